"""Drift-implicit Euler-Maruyama stepping on the merged grid.

Three scheme variants produce full trajectories: a recursive form stepping
once per merged node (the production path), a convolution form rebuilding
every row from scratch (O(N^2) reference used for cross-validation), and the
plain uniform-step scheme the merged construction generalises.  A fourth
routine isolates the noise-only part of the convolution form.

One path's integration is strictly sequential in the merged index; distinct
paths share no mutable state and may run concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .diffusion import DiffusionOperator
from .errors import DimensionMismatch, NonFiniteState, NonUniformInput
from .grids import MergedGrid
from .noise import LevelIncrements
from .resolvent import ResolventTable
from .spectrum import Eigensystem

__all__ = [
    "SolverInput",
    "Trajectory",
    "run_recursive",
    "run_convolution",
    "run_uniform",
    "discrete_stochastic_convolution",
]


@dataclass(frozen=True)
class SolverInput:
    """Validated bundle of everything one integration needs.

    ``increments`` may be left None for reuse across Monte Carlo paths (the
    driver swaps per-path increments in via ``dataclasses.replace``); the
    stepping routines require it.
    """

    es: Eigensystem
    grids: object
    merged: MergedGrid
    table: ResolventTable
    op: DiffusionOperator
    xi: np.ndarray
    increments: LevelIncrements | None = None

    def __post_init__(self):
        es, m = self.es, self.merged
        xi = np.asarray(self.xi, dtype=float).copy()
        if xi.ndim != 1 or xi.size != es.n_modes:
            raise DimensionMismatch(
                f"initial condition must have {es.n_modes} coefficients, got shape {xi.shape}"
            )
        xi.setflags(write=False)
        object.__setattr__(self, "xi", xi)
        if (self.op.n_modes, self.op.n_levels) != (es.n_modes, es.n_levels):
            raise DimensionMismatch(
                f"operator is {(self.op.n_modes, self.op.n_levels)}, eigensystem "
                f"{(es.n_modes, es.n_levels)}"
            )
        if tuple(self.grids.n) != tuple(m.level_counts):
            raise DimensionMismatch("merged grid was not built from these level grids")
        if m.n_levels != es.n_levels:
            raise DimensionMismatch(
                f"grids carry {m.n_levels} levels, eigensystem {es.n_levels}"
            )
        if self.table.log_prefix.shape != (es.n_modes, m.n_steps + 1):
            raise DimensionMismatch("resolvent table does not match modes/steps")
        if not np.array_equal(self.table.lambdas, es.lambdas):
            raise DimensionMismatch("resolvent table was built for a different spectrum")
        if self.increments is not None:
            _check_increments(self.increments, m)

    def with_increments(self, inc: LevelIncrements) -> "SolverInput":
        return replace(self, increments=inc)


def _check_increments(inc: LevelIncrements, m: MergedGrid) -> None:
    if inc.merged.shape != (m.n_levels, m.n_steps):
        raise DimensionMismatch(
            f"merged increments have shape {inc.merged.shape}, expected "
            f"{(m.n_levels, m.n_steps)}"
        )
    if len(inc.level) != m.n_levels or any(
        inc.level[l].shape != (m.level_counts[l],) for l in range(m.n_levels)
    ):
        raise DimensionMismatch("per-level increments do not match the level grids")


@dataclass(frozen=True)
class Trajectory:
    """Mode coefficients along the merged grid: ``values[eta, j-1]``.

    Row 0 is the initial condition.
    """

    values: np.ndarray
    merged: MergedGrid


def _require_increments(inp: SolverInput) -> LevelIncrements:
    if inp.increments is None:
        raise DimensionMismatch("solver input carries no increments")
    return inp.increments


def run_recursive(inp: SolverInput) -> Trajectory:
    """March the scheme once over the merged grid.

    Each step applies the one-step damping to the previous state plus, for
    every level with a node at the new time, a noise kick: the coefficient
    column evaluated at the level's previous node, propagated by the window
    product from that node to the step start, times the level increment.
    States at previous level nodes are held as per-level snapshots (O(L * J)
    memory) while the full trajectory is recorded for analysis.
    """
    inc = _require_increments(inp)
    es, m, op = inp.es, inp.merged, inp.op
    lam = es.lambdas
    sqrt_q = np.sqrt(es.qs)
    lp = inp.table.log_prefix
    taus = m.taus
    n_steps = m.n_steps

    values = np.zeros((n_steps + 1, es.n_modes))
    values[0] = inp.xi
    snap = [values[0]] * m.n_levels  # latest level-node state per level

    for eta in range(1, n_steps + 1):
        kicks = None
        for ell in sorted(m.active[eta]):
            s_idx = int(m.prev_index[eta, ell - 1])
            i = int(m.level_step_at[ell - 1, eta])
            db = inc.level[ell - 1][i - 1]
            col = op.column(float(taus[s_idx]), snap[ell - 1], ell)
            # window product from the level's previous node to the step start;
            # exactly one when that node is the previous merged node
            tail = np.exp(lp[:, eta - 1] - lp[:, s_idx])
            term = (sqrt_q[ell - 1] * col) * tail * db
            kicks = term if kicks is None else kicks + term
        total = values[eta - 1] if kicks is None else values[eta - 1] + kicks
        row = (1.0 / (1.0 + lam * m.steps[eta - 1])) * total
        if not np.all(np.isfinite(row)):
            raise NonFiniteState(eta)
        values[eta] = row
        for ell in m.active[eta]:
            snap[ell - 1] = values[eta]

    values.setflags(write=False)
    return Trajectory(values, m)


def _convolution_noise_row(inp: SolverInput, states: np.ndarray, eta: int) -> np.ndarray:
    """Noise double sum of the convolution form at merged node eta, reading
    past states out of ``states`` rows (levels ascending, level steps
    ascending: fixed accumulation order)."""
    inc = _require_increments(inp)
    es, m, op = inp.es, inp.merged, inp.op
    sqrt_q = np.sqrt(es.qs)
    lp = inp.table.log_prefix
    taus = m.taus

    acc = np.zeros(es.n_modes)
    for ell in range(1, m.n_levels + 1):
        node_eta = m.level_node_eta[ell - 1]
        # level steps i with t_{i,l} <= tau_eta
        i_max = int(np.searchsorted(node_eta, eta, side="right")) - 1
        for i in range(1, i_max + 1):
            s_idx = int(node_eta[i - 1])
            col = op.column(float(taus[s_idx]), states[s_idx], ell)
            window = np.exp(lp[:, eta] - lp[:, s_idx])
            acc += (sqrt_q[ell - 1] * col) * window * inc.level[ell - 1][i - 1]
    return acc


def run_convolution(inp: SolverInput) -> Trajectory:
    """Reference evaluation of the summed form, O(N^2 * J * L).

    Row eta is built from scratch as damped initial condition plus the noise
    double sum over all level nodes up to ``tau_eta``; states at past level
    nodes come from the rows already computed (causality).
    """
    _require_increments(inp)
    es, m = inp.es, inp.merged
    lam = es.lambdas

    # damped initial condition iterated with the same one-step primitive the
    # recursive form uses, so the zero-diffusion case coincides bit for bit
    damped = np.zeros((m.n_steps + 1, es.n_modes))
    damped[0] = inp.xi
    for eta in range(1, m.n_steps + 1):
        damped[eta] = (1.0 / (1.0 + lam * m.steps[eta - 1])) * damped[eta - 1]

    values = np.zeros((m.n_steps + 1, es.n_modes))
    values[0] = inp.xi
    for eta in range(1, m.n_steps + 1):
        row = damped[eta] + _convolution_noise_row(inp, values, eta)
        if not np.all(np.isfinite(row)):
            raise NonFiniteState(eta)
        values[eta] = row

    values.setflags(write=False)
    return Trajectory(values, m)


def discrete_stochastic_convolution(inp: SolverInput, state_source: Trajectory) -> Trajectory:
    """Noise-only part of the convolution form (initial condition suppressed),
    with coefficient states read from ``state_source``.

    Adding the damped initial condition row-wise reproduces
    :func:`run_convolution` exactly when ``state_source`` is its output.
    """
    _require_increments(inp)
    m = inp.merged
    states = np.asarray(state_source.values, dtype=float)
    if states.shape != (m.n_steps + 1, inp.es.n_modes):
        raise DimensionMismatch(
            f"state source has shape {states.shape}, expected "
            f"{(m.n_steps + 1, inp.es.n_modes)}"
        )
    values = np.zeros_like(states)
    for eta in range(1, m.n_steps + 1):
        values[eta] = _convolution_noise_row(inp, states, eta)
    values.setflags(write=False)
    return Trajectory(values, m)


def run_uniform(inp: SolverInput) -> Trajectory:
    """Plain uniform-step implicit Euler-Maruyama: every level must use the
    merged step count.  Kept free of the merged-grid machinery so it can
    cross-validate the recursive form."""
    inc = _require_increments(inp)
    es, m, op = inp.es, inp.merged, inp.op
    n = m.n_steps
    if any(c != n for c in m.level_counts):
        raise NonUniformInput(f"uniform solver needs n_l = {n} on every level")
    lam = es.lambdas
    sqrt_q = np.sqrt(es.qs)
    dt = 1.0 / n
    factor = 1.0 / (1.0 + lam * dt)
    taus = m.taus

    values = np.zeros((n + 1, es.n_modes))
    values[0] = inp.xi
    for i in range(1, n + 1):
        state = values[i - 1]
        kicks = None
        for ell in range(1, m.n_levels + 1):
            col = op.column(float(taus[i - 1]), state, ell)
            term = (sqrt_q[ell - 1] * col) * inc.level[ell - 1][i - 1]
            kicks = term if kicks is None else kicks + term
        row = factor * (state if kicks is None else state + kicks)
        if not np.all(np.isfinite(row)):
            raise NonFiniteState(i)
        values[i] = row

    values.setflags(write=False)
    return Trajectory(values, m)
