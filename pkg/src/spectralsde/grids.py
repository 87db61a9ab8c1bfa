"""Per-level time grids on [0, 1] and their merged non-uniform partition.

Each noise level ``l`` carries its own grid of ``n_l`` steps; the scheme steps
through the sorted union of all level nodes.  Node identity is exact: nodes
are ``fractions.Fraction`` values, so the union of ``i/n_l`` across levels
deduplicates correctly (1/3 versus 2/6) before any float conversion.  Floats
are derived once, for solver arithmetic.

Merged-grid conventions used throughout the package:

* merged nodes ``tau_0 = 0 < ... < tau_N = 1`` are addressed by ``eta`` in
  ``0..N``;
* levels are addressed 1-based, ``l = 1..L``, matching mode numbering;
* level nodes are addressed 1-based per level, ``i = 0..n_l``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import EmptyLevels, IndexOutOfRange, ZeroSteps

__all__ = [
    "LevelGrids",
    "QuasiUniformGrids",
    "MergedGrid",
    "build_level_grids",
    "explicit_level_grids",
    "merge_grids",
    "levels_in_window",
    "quasi_uniformity",
]

_ZERO = Fraction(0)
_ONE = Fraction(1)


@dataclass(frozen=True)
class LevelGrids:
    """Uniform per-level grids ``t_{i,l} = i/n_l`` for ``i = 0..n_l``."""

    n: tuple[int, ...]
    nodes: tuple[tuple[Fraction, ...], ...]

    @property
    def n_levels(self) -> int:
        return len(self.n)


@dataclass(frozen=True)
class QuasiUniformGrids:
    """Per-level grids with explicit rational nodes ``0 = t_0 < ... < t_{n_l} = 1``.

    Shares all merged-grid machinery with :class:`LevelGrids`; only node
    generation differs.
    """

    nodes: tuple[tuple[Fraction, ...], ...]

    @property
    def n(self) -> tuple[int, ...]:
        return tuple(len(ns) - 1 for ns in self.nodes)

    @property
    def n_levels(self) -> int:
        return len(self.nodes)


def build_level_grids(n) -> LevelGrids:
    """Uniform level grids with ``n[l-1]`` steps on level ``l``."""
    counts = tuple(int(v) for v in n)
    if len(counts) == 0:
        raise EmptyLevels("need at least one level")
    if any(v < 1 for v in counts):
        raise ZeroSteps(f"every level needs at least one step, got {counts}")
    nodes = tuple(tuple(Fraction(i, m) for i in range(m + 1)) for m in counts)
    return LevelGrids(counts, nodes)


def explicit_level_grids(node_lists) -> QuasiUniformGrids:
    """Per-level grids from explicit node sequences (ints, Fractions, or
    exact strings like ``"3/7"``); every level must span [0, 1] strictly
    increasingly."""
    if len(node_lists) == 0:
        raise EmptyLevels("need at least one level")
    levels = []
    for k, ns in enumerate(node_lists):
        fr = tuple(Fraction(x) for x in ns)
        if len(fr) < 2:
            raise ZeroSteps(f"level {k + 1} needs at least one step")
        if fr[0] != _ZERO or fr[-1] != _ONE:
            raise ValueError(f"level {k + 1} must start at 0 and end at 1")
        if any(b <= a for a, b in zip(fr, fr[1:])):
            raise ValueError(f"level {k + 1} nodes must be strictly increasing")
        levels.append(fr)
    return QuasiUniformGrids(tuple(levels))


def quasi_uniformity(g) -> float:
    """Largest per-level max-step/min-step ratio; exactly 1.0 for uniform grids."""
    worst = _ONE
    for ns in g.nodes:
        steps = [b - a for a, b in zip(ns, ns[1:])]
        ratio = max(steps) / min(steps)
        if ratio > worst:
            worst = ratio
    return float(worst)


@dataclass(frozen=True)
class MergedGrid:
    """Sorted union of all level nodes plus the index tables the scheme needs.

    ``active[eta]`` is the set of levels whose grid contains ``tau_eta``;
    ``prev_index[eta, l-1]`` is the merged index of level l's last node
    strictly before ``tau_eta`` (row 0 is -1: undefined);
    ``level_node_eta[l-1][i]`` maps level node ``(i, l)`` to its merged index;
    ``level_step_at[l-1, eta]`` inverts that map (-1 where ``tau_eta`` is not
    a level-l node).  Immutable after construction.
    """

    fracs: tuple[Fraction, ...]
    taus: np.ndarray
    steps: np.ndarray
    active: tuple[frozenset[int], ...]
    prev_index: np.ndarray
    level_node_eta: tuple[np.ndarray, ...]
    level_step_at: np.ndarray
    level_steps: tuple[np.ndarray, ...]
    level_counts: tuple[int, ...]

    @property
    def n_steps(self) -> int:
        return len(self.fracs) - 1

    @property
    def n_levels(self) -> int:
        return len(self.level_counts)

    def node_eta(self, i: int, ell: int) -> int:
        """Merged index of level node ``t_{i,l}``."""
        self._check_level(ell)
        if not 0 <= i <= self.level_counts[ell - 1]:
            raise IndexOutOfRange(
                f"level {ell} has nodes i = 0..{self.level_counts[ell - 1]}, got {i}"
            )
        return int(self.level_node_eta[ell - 1][i])

    def prev_node_index(self, eta: int, ell: int) -> int:
        """Merged index of ``s_{eta,l}``, level l's last node before ``tau_eta``."""
        self._check_level(ell)
        if not 1 <= eta <= self.n_steps:
            raise IndexOutOfRange(f"eta must lie in 1..{self.n_steps}, got {eta}")
        return int(self.prev_index[eta, ell - 1])

    def prev_node(self, eta: int, ell: int) -> float:
        return float(self.taus[self.prev_node_index(eta, ell)])

    def active_levels(self, eta: int) -> frozenset[int]:
        if not 0 <= eta <= self.n_steps:
            raise IndexOutOfRange(f"eta must lie in 0..{self.n_steps}, got {eta}")
        return self.active[eta]

    def _check_level(self, ell: int) -> None:
        if not 1 <= ell <= self.n_levels:
            raise IndexOutOfRange(f"level must lie in 1..{self.n_levels}, got {ell}")


def merge_grids(g) -> MergedGrid:
    """Merge the level grids of ``g`` (uniform or explicit) into one partition."""
    n_levels = g.n_levels
    counts = tuple(g.n)
    fracs = tuple(sorted(set().union(*g.nodes)))
    pos = {f: k for k, f in enumerate(fracs)}
    n_steps = len(fracs) - 1

    taus = np.array([float(f) for f in fracs])
    # steps from exact rational differences, rounded once
    steps = np.array([float(b - a) for a, b in zip(fracs, fracs[1:])])

    level_node_eta = tuple(
        np.array([pos[f] for f in ns], dtype=np.int64) for ns in g.nodes
    )
    level_steps = tuple(
        np.array([float(b - a) for a, b in zip(ns, ns[1:])]) for ns in g.nodes
    )

    level_sets = [set(ns) for ns in g.nodes]
    active = tuple(
        frozenset(l + 1 for l in range(n_levels) if fracs[eta] in level_sets[l])
        for eta in range(n_steps + 1)
    )

    prev = np.full((n_steps + 1, n_levels), -1, dtype=np.int64)
    for l in range(n_levels):
        ns = g.nodes[l]
        ptr = 0  # largest level-node index with ns[ptr] < tau_eta
        for eta in range(1, n_steps + 1):
            while ptr + 1 < len(ns) and ns[ptr + 1] < fracs[eta]:
                ptr += 1
            prev[eta, l] = pos[ns[ptr]]

    step_at = np.full((n_levels, n_steps + 1), -1, dtype=np.int64)
    for l in range(n_levels):
        step_at[l, level_node_eta[l]] = np.arange(counts[l] + 1)

    for arr in (taus, steps, prev, step_at, *level_node_eta, *level_steps):
        arr.setflags(write=False)

    return MergedGrid(
        fracs=fracs,
        taus=taus,
        steps=steps,
        active=active,
        prev_index=prev,
        level_node_eta=level_node_eta,
        level_step_at=step_at,
        level_steps=level_steps,
        level_counts=counts,
    )


def levels_in_window(m: MergedGrid, nu: int, eta: int) -> frozenset[int]:
    """Levels owning at least one merged node among ``tau_nu .. tau_eta``."""
    if not 1 <= nu <= eta <= m.n_steps:
        raise IndexOutOfRange(
            f"need 1 <= nu <= eta <= {m.n_steps}, got nu={nu}, eta={eta}"
        )
    return frozenset().union(*m.active[nu : eta + 1])
