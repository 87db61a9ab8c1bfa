"""Diffusion-operator coefficient oracles.

The schemes touch the diffusion operator only through its coefficient matrix
``b[j, l](t, x)``: the component of B(t, x) applied to noise direction l,
read off in solution mode j.  Implementations provide that matrix, and a
cheap single-column path for diagonal structure.  Operators must be pure and
re-entrant; instances are immutable and safely shared across threads.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NegativeExponent
from .spectrum import Eigensystem, fractional_norm

__all__ = [
    "DiffusionOperator",
    "AdditiveDiagonal",
    "LinearDiagonal",
    "CallbackOperator",
    "hs_norm",
    "check_diffusion_bounds",
    "DiffusionBoundsReport",
]


class DiffusionOperator(ABC):
    """Coefficient oracle ``b[j, l](t, x)`` for j <= n_modes, l <= n_levels.

    ``iota`` is the declared smoothness index in [0, 1/2]: the operator
    promises finite r=iota Hilbert-Schmidt norms with at most linear growth
    in the state (checked empirically by :func:`check_diffusion_bounds`,
    never assumed).
    """

    def __init__(self, n_modes: int, n_levels: int, iota: float):
        if n_modes < 1 or n_levels < 1:
            raise DimensionMismatch("operators need n_modes >= 1 and n_levels >= 1")
        if not 0.0 <= iota <= 0.5:
            raise ValueError("iota must lie in [0, 0.5]")
        self.n_modes = int(n_modes)
        self.n_levels = int(n_levels)
        self.iota = float(iota)

    #: diagonal coefficient structure (single nonzero per column)
    is_diagonal = False
    #: coefficients ignore the state argument
    is_state_independent = False

    @abstractmethod
    def matrix(self, t: float, x) -> np.ndarray:
        """Dense coefficient matrix of shape (n_modes, n_levels)."""

    def column(self, t: float, x, ell: int) -> np.ndarray:
        """Column l of the coefficient matrix; overridden where structure
        makes the dense build wasteful."""
        return self.matrix(t, x)[:, ell - 1]


class AdditiveDiagonal(DiffusionOperator):
    """State-independent diagonal coefficients: ``b[l, l] = sigma_l``.

    Lipschitz constant 0; the workhorse for exact-moment oracles.
    """

    is_diagonal = True
    is_state_independent = True

    def __init__(self, sigma, n_modes: int, iota: float = 0.0):
        sigma = np.asarray(sigma, dtype=float).copy()
        if sigma.ndim != 1 or sigma.size == 0:
            raise DimensionMismatch("sigma must be a non-empty 1-d array")
        super().__init__(n_modes, sigma.size, iota)
        sigma.setflags(write=False)
        self.sigma = sigma

    def matrix(self, t, x):
        out = np.zeros((self.n_modes, self.n_levels))
        k = min(self.n_modes, self.n_levels)
        out[np.arange(k), np.arange(k)] = self.sigma[:k]
        return out

    def column(self, t, x, ell):
        out = np.zeros(self.n_modes)
        if ell <= self.n_modes:
            out[ell - 1] = self.sigma[ell - 1]
        return out


class LinearDiagonal(DiffusionOperator):
    """Diagonal coefficients affine in the state: ``b[l, l] = gamma_l + rho_l * x_l``."""

    is_diagonal = True

    def __init__(self, gamma, rho, n_modes: int, iota: float = 0.0):
        gamma = np.asarray(gamma, dtype=float).copy()
        rho = np.asarray(rho, dtype=float).copy()
        if gamma.shape != rho.shape or gamma.ndim != 1 or gamma.size == 0:
            raise DimensionMismatch("gamma and rho must be equal-length 1-d arrays")
        super().__init__(n_modes, gamma.size, iota)
        gamma.setflags(write=False)
        rho.setflags(write=False)
        self.gamma = gamma
        self.rho = rho

    def matrix(self, t, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros((self.n_modes, self.n_levels))
        k = min(self.n_modes, self.n_levels)
        idx = np.arange(k)
        out[idx, idx] = self.gamma[:k] + self.rho[:k] * x[:k]
        return out

    def column(self, t, x, ell):
        out = np.zeros(self.n_modes)
        if ell <= self.n_modes:
            out[ell - 1] = self.gamma[ell - 1] + self.rho[ell - 1] * float(x[ell - 1])
        return out


class CallbackOperator(DiffusionOperator):
    """General coefficients from a user function ``fn(t, x) -> (J, L) array``.

    The callback must be pure and re-entrant; nothing about it is verified
    beyond shape, so run :func:`check_diffusion_bounds` on new callbacks.
    """

    def __init__(self, fn, n_modes: int, n_levels: int, iota: float,
                 state_independent: bool = False):
        super().__init__(n_modes, n_levels, iota)
        self._fn = fn
        self.is_state_independent = bool(state_independent)

    def matrix(self, t, x):
        out = np.asarray(self._fn(t, x), dtype=float)
        if out.shape != (self.n_modes, self.n_levels):
            raise DimensionMismatch(
                f"callback returned shape {out.shape}, expected {(self.n_modes, self.n_levels)}"
            )
        return out


def _hs_norm_of_matrix(b: np.ndarray, es: Eigensystem, r: float) -> float:
    """Hilbert-Schmidt norm of a coefficient matrix into the r-smooth space."""
    w = es.lambdas ** (2.0 * r)
    return float(np.sqrt((w @ (b * b)) @ es.qs))


def hs_norm(op: DiffusionOperator, es: Eigensystem, t: float, x, r: float) -> float:
    """Truncated Hilbert-Schmidt norm of B(t, x) from the covariance-weighted
    noise basis into the r-smooth space:
    ``sqrt(sum_l q_l sum_j lambda_j**(2r) b[j,l]**2)``."""
    if r < 0.0:
        raise NegativeExponent("fractional exponent r must be >= 0")
    b = op.matrix(t, x)
    if b.shape != (es.n_modes, es.n_levels):
        raise DimensionMismatch(
            f"operator produces shape {b.shape}, eigensystem expects "
            f"{(es.n_modes, es.n_levels)}"
        )
    return _hs_norm_of_matrix(b, es, r)


@dataclass
class DiffusionBoundsReport:
    """Empirical probe of the Lipschitz and linear-growth quotients.

    Both quotients are suprema over sampled states only, hence lower bounds
    on the true constants; a sampling check cannot certify them globally.
    """

    lipschitz_quotient: float
    growth_quotient: float
    n_samples: int
    failures: list = field(default_factory=list)
    note: str = (
        "quotients are empirical lower bounds on the true constants, "
        "taken over sampled states only"
    )

    @property
    def ok(self) -> bool:
        return not self.failures


def check_diffusion_bounds(op: DiffusionOperator, es: Eigensystem,
                           sample_count: int, rng) -> DiffusionBoundsReport:
    """Probe an operator against its contract on random state pairs.

    Reports the largest observed difference quotient (plain norm) and growth
    quotient at the operator's declared iota.  Non-finite coefficients are
    recorded as failures instead of raising.
    """
    if sample_count < 2:
        raise ValueError("need at least two samples")
    n_modes = es.n_modes
    lip = 0.0
    growth = 0.0
    failures = []
    for k in range(int(sample_count)):
        t = float(rng.uniform())
        u = rng.standard_normal(n_modes)
        v = rng.standard_normal(n_modes)
        bu = op.matrix(t, u)
        bv = op.matrix(t, v)
        if not (np.all(np.isfinite(bu)) and np.all(np.isfinite(bv))):
            failures.append(f"non-finite coefficients at sample {k}")
            continue
        denom = fractional_norm(u - v, es, 0.0)
        if denom > 0.0:
            lip = max(lip, _hs_norm_of_matrix(bu - bv, es, 0.0) / denom)
        g_num = _hs_norm_of_matrix(bu, es, op.iota)
        g_den = 1.0 + fractional_norm(u, es, op.iota)
        growth = max(growth, g_num / g_den)
    return DiffusionBoundsReport(lip, growth, int(sample_count), failures)
