"""Shared eigensystem of the drift operator and noise covariance.

States are truncated Fourier coefficient vectors with respect to the common
eigenbasis: plain one-dimensional float arrays.  ``coeffs[j-1]`` is the
coefficient of mode ``j`` (modes are numbered from 1, as usual for spectral
expansions).  Fractional-power norms weight mode ``j`` by ``lambda_j**(2r)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyLevels,
    NegativeCovariance,
    NegativeExponent,
    NonMonotoneSpectrum,
    TruncationTooLarge,
)

__all__ = [
    "Eigensystem",
    "PowerLawSpec",
    "make_eigensystem",
    "fractional_norm",
    "fractional_weights",
    "project",
]


@dataclass(frozen=True)
class Eigensystem:
    """Truncated spectra: ``lambdas[j-1]`` for the (negated) drift operator,
    ``qs[l-1]`` for the noise covariance, both in the same eigenbasis.

    Immutable after construction; safe to share across threads.
    """

    lambdas: np.ndarray
    qs: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float).copy()
        q = np.asarray(self.qs, dtype=float).copy()
        if lam.ndim != 1 or lam.size == 0:
            raise NonMonotoneSpectrum("need a non-empty 1-d array of eigenvalues")
        if not np.all(np.isfinite(lam)) or lam[0] <= 0.0 or np.any(np.diff(lam) <= 0.0):
            raise NonMonotoneSpectrum(
                "eigenvalues must be finite, positive and strictly increasing"
            )
        if q.ndim != 1 or q.size == 0:
            raise EmptyLevels("need a non-empty 1-d array of covariance eigenvalues")
        if not np.all(np.isfinite(q)) or np.any(q < 0.0):
            raise NegativeCovariance("covariance eigenvalues must be finite and >= 0")
        lam.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "qs", q)

    @property
    def n_modes(self) -> int:
        return int(self.lambdas.size)

    @property
    def n_levels(self) -> int:
        return int(self.qs.size)


@dataclass(frozen=True)
class PowerLawSpec:
    """Concrete eigenvalue families ``lambda_j = lambda_scale * j**lambda_exponent``
    and ``q_l = q_scale * l**(-q_exponent)``.

    ``q_exponent > 1`` keeps the full covariance trace finite; the Laplacian on
    the unit interval is ``lambda_scale = pi**2, lambda_exponent = 2``.
    """

    lambda_scale: float
    lambda_exponent: float
    q_scale: float
    q_exponent: float
    n_modes: int
    n_levels: int

    def __post_init__(self):
        if self.lambda_scale <= 0.0:
            raise NonMonotoneSpectrum("lambda_scale must be positive")
        if self.lambda_exponent <= 0.0:
            raise NonMonotoneSpectrum("lambda_exponent must be positive")
        if self.q_scale < 0.0:
            raise NegativeCovariance("q_scale must be >= 0")
        if self.q_exponent <= 1.0:
            raise NegativeCovariance("q_exponent must exceed 1 for a finite trace")
        if self.n_modes < 1:
            raise NonMonotoneSpectrum("need at least one mode")
        if self.n_levels < 1:
            raise EmptyLevels("need at least one noise level")


def make_eigensystem(spec: PowerLawSpec | None = None, *, lambdas=None, qs=None) -> Eigensystem:
    """Build a validated eigensystem from a power-law spec or explicit lists."""
    if spec is not None:
        if lambdas is not None or qs is not None:
            raise ValueError("pass either a PowerLawSpec or explicit lists, not both")
        j = np.arange(1, spec.n_modes + 1, dtype=float)
        ell = np.arange(1, spec.n_levels + 1, dtype=float)
        return Eigensystem(
            spec.lambda_scale * j**spec.lambda_exponent,
            spec.q_scale * ell ** (-spec.q_exponent),
        )
    if lambdas is None or qs is None:
        raise ValueError("explicit construction needs both lambdas and qs")
    return Eigensystem(np.asarray(lambdas, dtype=float), np.asarray(qs, dtype=float))


def fractional_weights(es: Eigensystem, r: float) -> np.ndarray:
    """Per-mode norm weights ``lambda_j**(2r)``."""
    if r < 0.0:
        raise NegativeExponent("fractional exponent r must be >= 0")
    return es.lambdas ** (2.0 * r)


def fractional_norm(coeffs, es: Eigensystem, r: float) -> float:
    """Fractional Sobolev norm ``(sum_j lambda_j**(2r) * coeffs[j-1]**2)**0.5``.

    Accepts vectors of length <= ``es.n_modes`` (e.g. projected states); the
    sum runs over the stored coefficients only.  ``r = 0`` is the plain
    Euclidean norm.
    """
    if r < 0.0:
        raise NegativeExponent("fractional exponent r must be >= 0")
    x = np.asarray(coeffs, dtype=float)
    if x.ndim != 1:
        raise ValueError("coefficient vectors must be 1-d")
    if x.size > es.n_modes:
        raise TruncationTooLarge(
            f"vector has {x.size} coefficients but the eigensystem only {es.n_modes} modes"
        )
    w = es.lambdas[: x.size] ** (2.0 * r)
    return float(np.sqrt(np.sum(w * x * x)))


def project(coeffs, j_keep: int) -> np.ndarray:
    """Keep the first ``j_keep`` coefficients, dropping the rest. Idempotent."""
    x = np.asarray(coeffs, dtype=float)
    if x.ndim != 1:
        raise ValueError("coefficient vectors must be 1-d")
    if j_keep < 0:
        raise ValueError("j_keep must be >= 0")
    if j_keep > x.size:
        raise TruncationTooLarge(
            f"cannot keep {j_keep} coefficients of a vector with {x.size} modes"
        )
    return x[:j_keep].copy()
