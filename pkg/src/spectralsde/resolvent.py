"""Implicit-Euler propagator products over merged-grid windows.

The one-step damping factor of mode ``j`` is ``1/(1 + lambda_j * dtau)``;
window products of these factors drive both the scheme and its moment
analysis.  Products are stored as log-space prefix sums: raw prefix products
underflow to zero for ``lambda ~ 1e8`` over thousands of steps, while window
ratios of log prefixes stay accurate to floating precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IndexOutOfRange, ReversedWindow
from .grids import MergedGrid
from .spectrum import Eigensystem

__all__ = [
    "ResolventTable",
    "build_resolvent_table",
    "resolvent_factor",
    "resolvent_factors",
    "resolvent_interpolant",
    "weight_sum",
    "weight_sum_modes",
]


@dataclass(frozen=True)
class ResolventTable:
    """Log-space prefix sums: ``log_prefix[j-1, eta]`` is the log of the
    product of one-step factors of mode j over merged steps ``1..eta``
    (``log_prefix[:, 0] = 0``).  Immutable; concurrent reads are safe."""

    log_prefix: np.ndarray
    lambdas: np.ndarray
    steps: np.ndarray

    @property
    def n_modes(self) -> int:
        return int(self.log_prefix.shape[0])

    @property
    def n_steps(self) -> int:
        return int(self.log_prefix.shape[1]) - 1


def build_resolvent_table(es: Eigensystem, m: MergedGrid) -> ResolventTable:
    """Tabulate all prefix products in O(J * N)."""
    logs = np.log1p(es.lambdas[:, None] * m.steps[None, :])
    lp = np.zeros((es.n_modes, m.n_steps + 1))
    np.cumsum(-logs, axis=1, out=lp[:, 1:])
    lp.setflags(write=False)
    return ResolventTable(lp, es.lambdas, m.steps)


def _check_window(table: ResolventTable, eta1: int, eta2: int) -> None:
    n = table.n_steps
    if not (0 <= eta1 <= n and 0 <= eta2 <= n):
        raise IndexOutOfRange(f"window indices must lie in 0..{n}, got {eta1}, {eta2}")
    if eta1 > eta2:
        raise ReversedWindow(f"window start {eta1} exceeds end {eta2}")


def _check_mode(table: ResolventTable, j: int) -> None:
    if not 1 <= j <= table.n_modes:
        raise IndexOutOfRange(f"mode must lie in 1..{table.n_modes}, got {j}")


def resolvent_factor(table: ResolventTable, j: int, eta1: int, eta2: int) -> float:
    """Window product of one-step factors of mode j over steps ``eta1+1..eta2``.

    Equals 1 for the empty window and stays strictly positive even when the
    raw prefix products underflow.
    """
    _check_mode(table, j)
    _check_window(table, eta1, eta2)
    lp = table.log_prefix[j - 1]
    return float(np.exp(lp[eta2] - lp[eta1]))


def resolvent_factors(table: ResolventTable, eta1: int, eta2: int) -> np.ndarray:
    """Window products for all modes at once."""
    _check_window(table, eta1, eta2)
    lp = table.log_prefix
    return np.exp(lp[:, eta2] - lp[:, eta1])


def resolvent_interpolant(es: Eigensystem, m: MergedGrid, j: int, eta0: int, t: float) -> float:
    """Continuous-in-t interpolation of the window product anchored at ``tau_eta0``.

    Product over ``nu > eta0`` of ``1/(1 + lambda_j*(min(t,tau_nu) - min(t,tau_{nu-1})))``:
    equals 1 for ``t <= tau_eta0``, the discrete window product at ``t = tau_eta``,
    and is non-increasing in t.  Used by verification, not by the stepping.
    """
    if not 1 <= j <= es.n_modes:
        raise IndexOutOfRange(f"mode must lie in 1..{es.n_modes}, got {j}")
    if not 0 <= eta0 <= m.n_steps:
        raise IndexOutOfRange(f"eta0 must lie in 0..{m.n_steps}, got {eta0}")
    if not 0.0 <= t <= 1.0:
        raise IndexOutOfRange(f"t must lie in [0, 1], got {t}")
    lam = float(es.lambdas[j - 1])
    taus = m.taus
    out = 1.0
    for nu in range(eta0 + 1, m.n_steps + 1):
        if taus[nu - 1] >= t:
            break
        inc = min(t, taus[nu]) - taus[nu - 1]
        out /= 1.0 + lam * inc
    return out


def weight_sum_modes(table: ResolventTable, m: MergedGrid, ell: int, i: int) -> np.ndarray:
    """Per-mode tail weights of level node ``(i, l)``: the sum over merged
    nodes ``tau_eta >= t_{i,l}`` of the squared window product from
    ``t_{i-1,l}`` times ``dtau_eta``.

    For uniform level grids the value is bounded by ``2/lambda_j``; quasi-
    uniform level grids weaken the bound to ``2*c_disc/lambda_j``.
    """
    m._check_level(ell)
    if not 1 <= i <= m.level_counts[ell - 1]:
        raise IndexOutOfRange(
            f"level {ell} has steps i = 1..{m.level_counts[ell - 1]}, got {i}"
        )
    start = m.node_eta(i, ell)
    anchor = m.node_eta(i - 1, ell)
    lp = table.log_prefix
    sq = np.exp(2.0 * (lp[:, start:] - lp[:, anchor][:, None]))
    return sq @ m.steps[start - 1 :]


def weight_sum(table: ResolventTable, m: MergedGrid, j: int, ell: int, i: int) -> float:
    """Scalar version of :func:`weight_sum_modes` for mode j."""
    _check_mode(table, j)
    return float(weight_sum_modes(table, m, ell, i)[j - 1])
