"""Maximal-regularity functionals, exact second-moment oracles, and Monte
Carlo estimation with standard errors.

The central inequality bounds the time-integrated squared (iota + 1/2)-smooth
norm of the scheme by twice the initial mass in the iota-smooth norm plus
twice the time-weighted iota-smooth Hilbert-Schmidt mass of the diffusion
coefficients over level nodes.  For state-independent operators both sides
are exact sums (second moments via the isometry of independent Gaussian
increments); otherwise they are estimated over paths with a one-sided
4-standard-error gate.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import AllPathsFailed, NonFiniteState, StateDependentDiffusion
from .grids import MergedGrid
from .noise import NoiseStream, path_increments
from .resolvent import build_resolvent_table
from .solver import SolverInput, Trajectory, run_recursive
from .spectrum import Eigensystem

__all__ = [
    "MomentTable",
    "InitWeightReport",
    "RegularityReport",
    "exact_convolution_moments",
    "exact_second_moments",
    "continuous_second_moments",
    "maxreg_lhs",
    "maxreg_rhs",
    "init_weight_check",
    "exact_regularity_report",
    "mc_regularity_experiment",
]


def _check_iota(iota: float) -> None:
    if not 0.0 <= iota <= 0.5:
        raise ValueError("iota must lie in [0, 0.5]")


@dataclass(frozen=True)
class MomentTable:
    """Second moments ``values[eta, j-1]`` of mode coefficients along the
    merged grid, tagged exact or estimated; estimates carry per-cell standard
    errors."""

    values: np.ndarray
    kind: str  # "exact" or "mc"
    se: np.ndarray | None = None


def _require_state_independent(inp: SolverInput) -> None:
    if not inp.op.is_state_independent:
        raise StateDependentDiffusion(
            "exact second moments exist only for state-independent operators"
        )


def exact_convolution_moments(inp: SolverInput) -> MomentTable:
    """Noise-only second moments for state-independent operators.

    Independence of the level increments turns the squared expectation of the
    noise double sum into a plain sum: each level step contributes
    ``q_l * window^2 * b^2 * dt`` to every row at or after its endpoint.
    """
    _require_state_independent(inp)
    es, m, op = inp.es, inp.merged, inp.op
    lp = inp.table.log_prefix
    taus = m.taus
    zero_state = np.zeros(es.n_modes)

    vals = np.zeros((m.n_steps + 1, es.n_modes))
    for eta in range(1, m.n_steps + 1):
        acc = np.zeros(es.n_modes)
        for ell in range(1, m.n_levels + 1):
            node_eta = m.level_node_eta[ell - 1]
            i_max = int(np.searchsorted(node_eta, eta, side="right")) - 1
            for i in range(1, i_max + 1):
                s_idx = int(node_eta[i - 1])
                col = op.column(float(taus[s_idx]), zero_state, ell)
                w2 = np.exp(2.0 * (lp[:, eta] - lp[:, s_idx]))
                acc += es.qs[ell - 1] * (col * col) * w2 * m.level_steps[ell - 1][i - 1]
        vals[eta] = acc
    vals.setflags(write=False)
    return MomentTable(vals, "exact")


def exact_second_moments(inp: SolverInput) -> MomentTable:
    """Full-scheme second moments: squared damped initial condition plus the
    noise-only table, cell for cell."""
    conv = exact_convolution_moments(inp)
    lp = inp.table.log_prefix
    init = np.exp(2.0 * lp).T * (inp.xi * inp.xi)[None, :]
    vals = init + conv.values
    vals.setflags(write=False)
    return MomentTable(vals, "exact")


def continuous_second_moments(es: Eigensystem, op, xi, times) -> np.ndarray:
    """Mode-wise second moments of the exact mild solution for diagonal
    state-independent operators (scalar Ornstein-Uhlenbeck formula per mode):
    ``exp(-2 lam s) xi^2 + q b^2 (1 - exp(-2 lam s)) / (2 lam)``.

    Returns an array of shape (len(times), n_modes); qualitative reference
    only, not used for gating.
    """
    if not op.is_state_independent:
        raise StateDependentDiffusion("continuous oracle needs a state-independent operator")
    if not op.is_diagonal:
        raise ValueError("continuous oracle implemented for diagonal operators only")
    xi = np.asarray(xi, dtype=float)
    times = np.asarray(times, dtype=float)
    diag = np.zeros(es.n_modes)
    k = min(es.n_modes, es.n_levels)
    diag[:k] = np.diagonal(op.matrix(0.0, np.zeros(es.n_modes)))[:k]
    q = np.zeros(es.n_modes)
    q[:k] = es.qs[:k]
    lam = es.lambdas
    decay = np.exp(-2.0 * lam[None, :] * times[:, None])
    return decay * (xi * xi)[None, :] + (q * diag * diag / (2.0 * lam))[None, :] * (1.0 - decay)


def maxreg_lhs(moments: MomentTable, es: Eigensystem, m: MergedGrid, iota: float) -> float:
    """Left side of the regularity estimate: the step-weighted sum over the
    grid of second moments in the (iota + 1/2)-smooth squared norm."""
    _check_iota(iota)
    w = es.lambdas ** (2.0 * iota + 1.0)
    return float(np.einsum("ej,j,e->", moments.values[1:], w, m.steps))


def maxreg_rhs(inp: SolverInput, iota: float, state_source: Trajectory | None = None) -> float:
    """Right side of the regularity estimate: twice the level-step-weighted
    iota-smooth Hilbert-Schmidt mass of the coefficients over level nodes.

    Exact (expectation-free) for state-independent operators.  For
    state-dependent operators, evaluates the realized functional along one
    trajectory ``state_source``; the Monte Carlo driver averages over paths.
    """
    _check_iota(iota)
    es, m, op = inp.es, inp.merged, inp.op
    w = es.lambdas ** (2.0 * iota)
    taus = m.taus
    if op.is_state_independent:
        states = None
    else:
        if state_source is None:
            raise StateDependentDiffusion(
                "state-dependent operators need a trajectory to evaluate the bound"
            )
        states = np.asarray(state_source.values, dtype=float)
    zero_state = np.zeros(es.n_modes)

    total = 0.0
    for ell in range(1, m.n_levels + 1):
        node_eta = m.level_node_eta[ell - 1]
        dts = m.level_steps[ell - 1]
        for i in range(1, m.level_counts[ell - 1] + 1):
            s_idx = int(node_eta[i - 1])
            x = zero_state if states is None else states[s_idx]
            col = op.column(float(taus[s_idx]), x, ell)
            total += float(es.qs[ell - 1]) * float(w @ (col * col)) * float(dts[i - 1])
    return 2.0 * total


@dataclass(frozen=True)
class InitWeightReport:
    """Per-mode check that the step-weighted squared damping of the initial
    condition stays below 2/lambda_j, plus the smoothness-weighted totals."""

    weight_sums: np.ndarray
    bounds: np.ndarray
    margins: np.ndarray
    init_lhs: float
    init_term: float

    @property
    def ok(self) -> bool:
        return bool(np.all(self.margins >= 0.0))


def init_weight_check(es: Eigensystem, m: MergedGrid, xi, iota: float) -> InitWeightReport:
    """Deterministic check of the initial-condition part of the estimate."""
    _check_iota(iota)
    xi = np.asarray(xi, dtype=float)
    table = build_resolvent_table(es, m)
    sq = np.exp(2.0 * table.log_prefix[:, 1:])
    weights = sq @ m.steps
    bounds = 2.0 / es.lambdas
    init_lhs = float(np.sum(es.lambdas ** (2.0 * iota + 1.0) * xi * xi * weights))
    init_term = 2.0 * float(np.sum(es.lambdas ** (2.0 * iota) * xi * xi))
    return InitWeightReport(weights, bounds, bounds - weights, init_lhs, init_term)


@dataclass(frozen=True)
class RegularityReport:
    """Both sides of the regularity estimate with verdicts.

    ``init_term`` already carries its factor two, so the full-scheme bound is
    ``init_term + rhs``.  Exact-mode entries have zero standard error; in mc
    mode the one-sided gate allows four combined relative standard errors of
    slack.
    """

    mode: str
    iota: float
    lhs_full: float
    lhs_conv: float
    rhs: float
    init_term: float
    bound_full: float
    margin_full: float
    margin_conv: float
    holds_full: bool
    holds_conv: bool
    verdict: str
    lhs_full_se: float = 0.0
    lhs_conv_se: float = 0.0
    rhs_se: float = 0.0
    paths: int = 0
    failed_paths: int = 0
    moments: MomentTable | None = None
    conv_moments: MomentTable | None = None
    exact_companion: "RegularityReport | None" = None

    @property
    def holds(self) -> bool:
        return self.holds_full and self.holds_conv

    def to_dict(self) -> dict:
        out = {
            "mode": self.mode,
            "iota": self.iota,
            "lhs_full": self.lhs_full,
            "lhs_conv": self.lhs_conv,
            "rhs": self.rhs,
            "init_term": self.init_term,
            "bound_full": self.bound_full,
            "margin_full": self.margin_full,
            "margin_conv": self.margin_conv,
            "lhs_full_se": self.lhs_full_se,
            "lhs_conv_se": self.lhs_conv_se,
            "rhs_se": self.rhs_se,
            "paths": self.paths,
            "failed_paths": self.failed_paths,
            "holds_full": self.holds_full,
            "holds_conv": self.holds_conv,
            "verdict": self.verdict,
        }
        if self.exact_companion is not None:
            out["exact_companion"] = self.exact_companion.to_dict()
        return out


def exact_regularity_report(inp: SolverInput, iota: float) -> RegularityReport:
    """Evaluate both sides of the estimate exactly (state-independent only)."""
    _check_iota(iota)
    _require_state_independent(inp)
    es, m = inp.es, inp.merged
    conv = exact_convolution_moments(inp)
    full = exact_second_moments(inp)
    lhs_conv = maxreg_lhs(conv, es, m, iota)
    lhs_full = maxreg_lhs(full, es, m, iota)
    rhs = maxreg_rhs(inp, iota)
    init_term = 2.0 * float(np.sum(es.lambdas ** (2.0 * iota) * inp.xi * inp.xi))
    bound = init_term + rhs
    holds_conv = bool(lhs_conv <= rhs)
    holds_full = bool(lhs_full <= bound)
    verdict = "holds (exact)" if (holds_conv and holds_full) else "violated (exact)"
    return RegularityReport(
        mode="exact",
        iota=iota,
        lhs_full=lhs_full,
        lhs_conv=lhs_conv,
        rhs=rhs,
        init_term=init_term,
        bound_full=bound,
        margin_full=bound - lhs_full,
        margin_conv=rhs - lhs_conv,
        holds_full=holds_full,
        holds_conv=holds_conv,
        verdict=verdict,
        moments=full,
        conv_moments=conv,
    )


def _chunk_ranges(n_items: int, chunk_size: int):
    return [range(k, min(k + chunk_size, n_items)) for k in range(0, n_items, chunk_size)]


def map_chunks(fn, n_items: int, threads: int = 1, chunk_size: int = 256) -> list:
    """Apply ``fn`` to fixed index chunks, in parallel when asked, and return
    the per-chunk results in ascending chunk order.

    Chunk boundaries depend only on ``chunk_size``, never on the worker
    count, so any order-respecting reduction of the results is reproducible
    across 1..k threads.
    """
    chunks = _chunk_ranges(n_items, chunk_size)
    if threads <= 1 or len(chunks) <= 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, chunks))


def mc_regularity_experiment(
    inp: SolverInput,
    iota: float,
    seed: int,
    paths: int,
    threads: int = 1,
    chunk_size: int = 256,
    increment_source=None,
) -> RegularityReport:
    """Estimate the regularity functionals over independent paths.

    Runs ``paths`` recursive integrations (increments keyed by ``(seed,
    path)`` unless ``increment_source(p)`` overrides them, e.g. for coupled
    comparisons), accumulates per-cell second moments and per-path values of
    both sides, and gates the estimate one-sidedly with four combined
    relative standard errors.  Paths that overflow are counted as failed and
    excluded from the statistics.  For state-independent operators the exact
    report rides along as ``exact_companion``.
    """
    _check_iota(iota)
    if paths < 2:
        raise ValueError("need at least two paths")
    es, m = inp.es, inp.merged
    grids = inp.grids
    lp = inp.table.log_prefix
    w_lhs = es.lambdas ** (2.0 * iota + 1.0)
    steps = m.steps
    det_rows = np.exp(lp).T * inp.xi[None, :]  # damped initial condition
    state_dependent = not inp.op.is_state_independent
    rhs_exact = None if state_dependent else maxreg_rhs(inp, iota)

    def run_chunk(idx_range):
        n_ok = 0
        n_failed = 0
        sum_sq = np.zeros((m.n_steps + 1, es.n_modes))
        sum_sq2 = np.zeros_like(sum_sq)
        sum_csq = np.zeros_like(sum_sq)
        sum_csq2 = np.zeros_like(sum_sq)
        s_lhs = s_lhs2 = 0.0
        s_conv = s_conv2 = 0.0
        s_rhs = s_rhs2 = 0.0
        for p in idx_range:
            if increment_source is None:
                inc = path_increments(grids, m, NoiseStream(seed, p))
            else:
                inc = increment_source(p)
            try:
                traj = run_recursive(inp.with_increments(inc))
            except NonFiniteState:
                n_failed += 1
                continue
            sq = traj.values * traj.values
            conv_sq = (traj.values - det_rows) ** 2
            lhs_p = float(np.einsum("ej,j,e->", sq[1:], w_lhs, steps))
            conv_p = float(np.einsum("ej,j,e->", conv_sq[1:], w_lhs, steps))
            sum_sq += sq
            sum_sq2 += sq * sq
            sum_csq += conv_sq
            sum_csq2 += conv_sq * conv_sq
            s_lhs += lhs_p
            s_lhs2 += lhs_p * lhs_p
            s_conv += conv_p
            s_conv2 += conv_p * conv_p
            if state_dependent:
                rhs_p = maxreg_rhs(inp.with_increments(inc), iota, state_source=traj)
                s_rhs += rhs_p
                s_rhs2 += rhs_p * rhs_p
            n_ok += 1
        return (n_ok, n_failed, sum_sq, sum_sq2, sum_csq, sum_csq2,
                s_lhs, s_lhs2, s_conv, s_conv2, s_rhs, s_rhs2)

    results = map_chunks(run_chunk, paths, threads=threads, chunk_size=chunk_size)

    n_ok = n_failed = 0
    sum_sq = np.zeros((m.n_steps + 1, es.n_modes))
    sum_sq2 = np.zeros_like(sum_sq)
    sum_csq = np.zeros_like(sum_sq)
    sum_csq2 = np.zeros_like(sum_sq)
    s_lhs = s_lhs2 = s_conv = s_conv2 = s_rhs = s_rhs2 = 0.0
    for (c_ok, c_failed, c_sq, c_sq2, c_cs, c_cs2, c_l, c_l2, c_c, c_c2, c_r, c_r2) in results:
        n_ok += c_ok
        n_failed += c_failed
        sum_sq += c_sq
        sum_sq2 += c_sq2
        sum_csq += c_cs
        sum_csq2 += c_cs2
        s_lhs += c_l
        s_lhs2 += c_l2
        s_conv += c_c
        s_conv2 += c_c2
        s_rhs += c_r
        s_rhs2 += c_r2

    if n_ok == 0:
        raise AllPathsFailed(f"all {paths} paths overflowed")

    def mean_se(total, total2, n):
        mean = total / n
        var = max(total2 - n * mean * mean, 0.0) / max(n - 1, 1)
        return mean, float(np.sqrt(var / n))

    def cell_table(total, total2):
        mean = total / n_ok
        var = np.maximum(total2 - n_ok * mean**2, 0.0) / max(n_ok - 1, 1)
        return MomentTable(mean, "mc", se=np.sqrt(var / n_ok))

    moments = cell_table(sum_sq, sum_sq2)
    conv_moments = cell_table(sum_csq, sum_csq2)

    lhs_mean, lhs_se = mean_se(s_lhs, s_lhs2, n_ok)
    conv_mean, conv_se = mean_se(s_conv, s_conv2, n_ok)
    if state_dependent:
        rhs_mean, rhs_se = mean_se(s_rhs, s_rhs2, n_ok)
    else:
        rhs_mean, rhs_se = float(rhs_exact), 0.0

    init_term = 2.0 * float(np.sum(es.lambdas ** (2.0 * iota) * inp.xi * inp.xi))
    bound = init_term + rhs_mean

    # one-sided gate with four combined relative standard errors of slack
    def gated(lhs, lhs_err, limit):
        if limit <= 0.0:
            return bool(lhs <= 0.0)
        rel = np.hypot(lhs_err, rhs_se) / limit
        return bool(lhs <= limit * (1.0 + 4.0 * rel))

    holds_full = gated(lhs_mean, lhs_se, bound)
    holds_conv = gated(conv_mean, conv_se, rhs_mean) if rhs_mean > 0.0 else conv_mean <= 0.0
    verdict = "holds (mc, 4se gate)" if (holds_full and holds_conv) else "violated (mc, 4se gate)"

    exact_companion = None
    if not state_dependent:
        # an exact decision supersedes the statistical gate
        exact_companion = exact_regularity_report(inp, iota)
        holds_full = exact_companion.holds_full
        holds_conv = exact_companion.holds_conv
        verdict = exact_companion.verdict

    return RegularityReport(
        mode="mc",
        iota=iota,
        lhs_full=lhs_mean,
        lhs_conv=conv_mean,
        rhs=rhs_mean,
        init_term=init_term,
        bound_full=bound,
        margin_full=bound - lhs_mean,
        margin_conv=rhs_mean - conv_mean,
        holds_full=holds_full,
        holds_conv=holds_conv,
        verdict=verdict,
        lhs_full_se=lhs_se,
        lhs_conv_se=conv_se,
        rhs_se=rhs_se,
        paths=paths,
        failed_paths=n_failed,
        moments=moments,
        conv_moments=conv_moments,
        exact_companion=exact_companion,
    )
