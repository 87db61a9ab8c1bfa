"""Shared test helpers: independent brute-force oracles and random problem
builders.  Everything here recomputes quantities straight from definitions,
deliberately avoiding the package's own index tables and log-space tricks."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from spectralsde import (
    AdditiveDiagonal,
    CallbackOperator,
    LinearDiagonal,
    NoiseStream,
    SolverInput,
    build_level_grids,
    build_resolvent_table,
    make_eigensystem,
    merge_grids,
    path_increments,
)


def max_rel_dev(a, b) -> float:
    """Largest cellwise deviation relative to the larger trajectory scale."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-300)
    return float(np.max(np.abs(a - b)) / scale)


def brute_merged_tables(n):
    """Recompute every merged-grid table from the definitions, O(N*L*n_max)."""
    levels = [[Fraction(i, m) for i in range(m + 1)] for m in n]
    taus = sorted({f for ns in levels for f in ns})
    n_steps = len(taus) - 1
    active = [
        frozenset(l + 1 for l, ns in enumerate(levels) if taus[eta] in ns)
        for eta in range(n_steps + 1)
    ]
    prev_value = {}
    for eta in range(1, n_steps + 1):
        for l, ns in enumerate(levels):
            prev_value[(eta, l + 1)] = max(f for f in ns if f < taus[eta])
    node_index = {}
    for l, ns in enumerate(levels):
        for i, f in enumerate(ns):
            node_index[(i, l + 1)] = taus.index(f)
    return taus, active, prev_value, node_index


def brute_resolvent(lam: float, steps, eta1: int, eta2: int) -> float:
    """Direct window product of one-step factors, no logs."""
    out = 1.0
    for nu in range(eta1 + 1, eta2 + 1):
        out *= 1.0 / (1.0 + lam * steps[nu - 1])
    return out


def brute_weight_sum(lam: float, fracs, node_of, n_level: int, i: int) -> float:
    """Tail weight of level node i recomputed from the definition: the node
    positions of the level come in via node_of (i -> merged index)."""
    steps = [float(b - a) for a, b in zip(fracs, fracs[1:])]
    start = node_of[i]
    anchor = node_of[i - 1]
    total = 0.0
    for eta in range(start, len(fracs)):
        total += brute_resolvent(lam, steps, anchor, eta) ** 2 * steps[eta - 1]
    return total


def random_eigensystem(rng, n_modes: int, n_levels: int, lam_low=0.5, lam_high=200.0,
                       powerlaw=False):
    if powerlaw:
        scale = float(rng.uniform(0.5, 5.0))
        expo = float(rng.uniform(1.0, 3.0))
        j = np.arange(1, n_modes + 1, dtype=float)
        ell = np.arange(1, n_levels + 1, dtype=float)
        return make_eigensystem(
            lambdas=scale * j**expo,
            qs=float(rng.uniform(0.1, 2.0)) * ell ** (-float(rng.uniform(1.5, 3.0))),
        )
    lam = np.sort(rng.uniform(lam_low, lam_high, size=n_modes))
    while np.any(np.diff(lam) <= 0):  # collisions are measure zero, but be safe
        lam = np.sort(rng.uniform(lam_low, lam_high, size=n_modes))
    qs = rng.uniform(0.0, 2.0, size=n_levels)
    return make_eigensystem(lambdas=lam, qs=qs)


def random_operator(rng, es, kind=None):
    kind = kind or rng.choice(["additive", "linear", "callback"])
    iota = float(rng.choice([0.0, 0.25, 0.5]))
    if kind == "additive":
        return AdditiveDiagonal(rng.standard_normal(es.n_levels), es.n_modes, iota=iota)
    if kind == "linear":
        return LinearDiagonal(
            rng.standard_normal(es.n_levels),
            0.5 * rng.standard_normal(es.n_levels),
            es.n_modes,
            iota=iota,
        )
    base = rng.standard_normal((es.n_modes, es.n_levels))
    mix = 0.3 * rng.standard_normal((es.n_modes, es.n_modes))

    def fn(t, x):
        return base * (1.0 + 0.5 * np.sin(2.0 * np.pi * t)) + np.outer(
            np.tanh(mix @ np.asarray(x, dtype=float)), np.ones(es.n_levels)
        )

    return CallbackOperator(fn, es.n_modes, es.n_levels, iota=iota)


def random_problem(rng, max_modes=16, max_levels=5, max_steps=16, kind=None, seed=None,
                   powerlaw=False):
    """A full random SolverInput with sampled increments attached."""
    n_modes = int(rng.integers(1, max_modes + 1))
    n_levels = int(rng.integers(1, max_levels + 1))
    es = random_eigensystem(rng, n_modes, n_levels, powerlaw=powerlaw)
    grids = build_level_grids(rng.integers(1, max_steps + 1, size=n_levels))
    merged = merge_grids(grids)
    table = build_resolvent_table(es, merged)
    op = random_operator(rng, es, kind=kind)
    xi = rng.standard_normal(n_modes)
    inp = SolverInput(es, grids, merged, table, op, xi)
    stream = NoiseStream(int(seed if seed is not None else rng.integers(2**63)), 0)
    return inp.with_increments(path_increments(grids, merged, stream))
