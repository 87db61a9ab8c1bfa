"""Reproducible sampling of truncated Q-Wiener increments.

Every Gaussian increment is a pure function of ``(seed, path, level, merged
step)``: a counter-based hash (splitmix64-style avalanche rounds over keyed
lanes) yields a uniform in (0, 1), mapped through the inverse normal CDF and
scaled by the step width.  No generator state exists, so increments are
byte-identical however paths are scheduled across threads, and the same
Brownian family can drive different scheme variants for coupled comparisons.

Sampling happens on the merged grid; per-level increments are exact partial
sums over merged steps, so the telescoping identity between the two holds to
the last bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import EmptyLevels, GridMismatch, NegativeExponent, TruncationTooLarge
from .grids import MergedGrid
from .spectrum import Eigensystem

__all__ = [
    "NoiseStream",
    "LevelIncrements",
    "sample_merged_increments",
    "aggregate_level_increments",
    "path_increments",
    "restrict_merged_increments",
    "wiener_regularity_coefficient",
]

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
# distinct odd lane constants keep (path, level, step) contributions apart
_LANE_PATH = np.uint64(0xA0761D6478BD642F)
_LANE_LEVEL = np.uint64(0xE7037ED1A0B428DB)
_LANE_STEP = np.uint64(0x8EBC6AF09C88C6E3)

_INV_2_53 = 2.0**-53


@dataclass(frozen=True)
class NoiseStream:
    """Identity of one simulated path: master seed plus path index."""

    seed: int
    path_index: int = 0

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if int(self.path_index) < 0:
            raise ValueError("path_index must be >= 0")


@dataclass(frozen=True)
class LevelIncrements:
    """Brownian increments of one path.

    ``merged[l-1, eta-1]`` is the increment of level l's Brownian motion over
    merged step eta; ``level[l-1][i-1]`` the increment over level step i,
    telescoped exactly from the merged row.
    """

    merged: np.ndarray
    level: tuple[np.ndarray, ...]


def _mix64(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer, wrapping uint64 arithmetic
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _keyed_normals(seed: int, path: int, n_levels: int, n_steps: int) -> np.ndarray:
    """Standard normals indexed by (level, merged step), shape (L, N)."""
    with np.errstate(over="ignore"):
        base = np.array(seed, dtype=np.uint64)
        base = _mix64(base + _GOLDEN)
        base = _mix64(base ^ (np.uint64(path) * _LANE_PATH + _GOLDEN))
        ells = np.arange(1, n_levels + 1, dtype=np.uint64)[:, None] * _LANE_LEVEL
        etas = np.arange(1, n_steps + 1, dtype=np.uint64)[None, :] * _LANE_STEP
        h = _mix64(base ^ ells)
        h = _mix64(h ^ etas)
        # (h >> 11) + 0.5 lies strictly inside (0, 2**53): no CDF endpoint hits
        u = ((h >> np.uint64(11)).astype(np.float64) + 0.5) * _INV_2_53
    return ndtri(u)


def sample_merged_increments(m: MergedGrid, n_levels: int, stream: NoiseStream) -> np.ndarray:
    """Independent N(0, dtau_eta) increments for each level on the merged grid."""
    if n_levels < 1:
        raise EmptyLevels("need at least one noise level")
    z = _keyed_normals(int(stream.seed), int(stream.path_index), n_levels, m.n_steps)
    out = z * np.sqrt(m.steps)[None, :]
    out.setflags(write=False)
    return out


def aggregate_level_increments(merged, g, m: MergedGrid) -> LevelIncrements:
    """Telescope merged increments into per-level increments.

    For a level with a node at ``tau_eta`` the increment the scheme consumes,
    from the level's previous node up to ``tau_eta``, is exactly the level
    increment produced here.
    """
    arr = np.asarray(merged, dtype=float)
    if tuple(g.n) != tuple(m.level_counts):
        raise GridMismatch("merged grid was not built from these level grids")
    if arr.shape != (g.n_levels, m.n_steps):
        raise GridMismatch(
            f"expected merged increments of shape {(g.n_levels, m.n_steps)}, got {arr.shape}"
        )
    per_level = []
    for l in range(g.n_levels):
        row = arr[l].tolist()
        node_eta = m.level_node_eta[l]
        seg = np.empty(len(node_eta) - 1)
        # left-to-right partial sums in ascending merged order: the
        # telescoping identity is exact by construction
        for i in range(1, len(node_eta)):
            total = 0.0
            for eta in range(node_eta[i - 1] + 1, node_eta[i] + 1):
                total += row[eta - 1]
            seg[i - 1] = total
        seg.setflags(write=False)
        per_level.append(seg)
    return LevelIncrements(merged=arr, level=tuple(per_level))


def path_increments(g, m: MergedGrid, stream: NoiseStream) -> LevelIncrements:
    """Sample one path's merged increments and aggregate them to levels."""
    return aggregate_level_increments(
        sample_merged_increments(m, g.n_levels, stream), g, m
    )


def restrict_merged_increments(fine_m: MergedGrid, fine_merged, coarse_m: MergedGrid) -> np.ndarray:
    """Sum merged increments of a finer partition onto a coarser one.

    Every coarse node must appear in the fine partition; this is how one
    Brownian family, sampled once on a union grid, drives several scheme
    variants for coupled comparisons.
    """
    arr = np.asarray(fine_merged, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != fine_m.n_steps:
        raise GridMismatch(
            f"fine increments must have {fine_m.n_steps} columns, got {arr.shape}"
        )
    pos = {f: k for k, f in enumerate(fine_m.fracs)}
    try:
        idx = [pos[f] for f in coarse_m.fracs]
    except KeyError as missing:
        raise GridMismatch(f"coarse node {missing} is not a fine-grid node") from None
    out = np.empty((arr.shape[0], len(idx) - 1))
    for l in range(arr.shape[0]):
        row = arr[l].tolist()
        for k in range(1, len(idx)):
            total = 0.0
            for col in range(idx[k - 1], idx[k]):
                total += row[col]
            out[l, k - 1] = total
    return out


def wiener_regularity_coefficient(es: Eigensystem, r: float) -> float:
    """Coefficient c in ``E ||W_L(t)||^2 = c * t`` for the truncated process
    measured in the r-smooth norm: ``sum_l lambda_l**(2r) * q_l``."""
    if r < 0.0:
        raise NegativeExponent("fractional exponent r must be >= 0")
    if r == 0.0:
        return float(np.sum(es.qs))
    if es.n_levels > es.n_modes:
        raise TruncationTooLarge(
            "need an operator eigenvalue for every noise level (L <= J) when r > 0"
        )
    lam = es.lambdas[: es.n_levels]
    return float(np.sum(lam ** (2.0 * r) * es.qs))
