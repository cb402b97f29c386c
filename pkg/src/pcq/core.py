"""Scalar numeric primitives shared by the whole coding chain.

Modulo-interval reduction, the Gaussian tail function, the truncated
Gaussian shaping density with its closed-form second moment, and seeded
counter-based random streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)


def qfunc(x):
    """Gaussian tail probability P(N(0,1) > x).

    Computed through the complementary error function, accurate to double
    precision over the whole real line. Accepts scalars or arrays.
    """
    return 0.5 * special.erfc(np.asarray(x, dtype=float) / _SQRT2)


@dataclass(frozen=True)
class ModInterval:
    """Half-open interval [-A/2, A/2) for the entrywise modulo operator."""

    A: float

    def __post_init__(self):
        if not (np.isfinite(self.A) and self.A > 0):
            raise ValueError(f"interval width must be positive and finite, got {self.A}")


def mod_reduce(x, interval):
    """Reduce ``x`` into [-A/2, A/2).

    Parameters
    ----------
    x : float or array_like
        Finite value(s) to reduce.
    interval : ModInterval or float
        The interval, or its width A directly.

    Returns
    -------
    y : float or ndarray
        ``x - k*A``, guaranteed to lie in [-A/2, A/2); the left endpoint is
        included and the right endpoint wraps.
    k : int or ndarray
        The unique integer wrap count per entry.
    """
    A = interval.A if isinstance(interval, ModInterval) else float(interval)
    if A <= 0:
        raise ValueError(f"interval width must be positive, got {A}")
    xa = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(xa)):
        raise ValueError("mod_reduce requires finite input")
    k = np.floor(xa / A + 0.5)
    y = xa - k * A
    # guard against rounding placing y exactly on the right edge
    hi = y >= A / 2
    k = k + hi
    y = y - hi * A
    lo = y < -A / 2
    k = k - lo
    y = y + lo * A
    if np.isscalar(x) or xa.ndim == 0:
        return float(y), int(k)
    return y, k.astype(np.int64)


def mod_wrap(x, A):
    """Residue of ``x`` in [-A/2, A/2) without the wrap count (hot path)."""
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    y = xa - np.floor(xa / A + 0.5) * A
    y[y >= A / 2] -= A
    y[y < -A / 2] += A
    return float(y[0]) if np.ndim(x) == 0 else y


@dataclass(frozen=True)
class TruncGaussian:
    """Zero-mean Gaussian shaping density truncated to [-A/2, A/2).

    ``sigma_d2`` is the variance parameter of the parent Gaussian; the
    normalizer is c = 1 - 2 Q(A / (2 sigma_d)).
    """

    sigma_d2: float
    A: float

    def __post_init__(self):
        if not (np.isfinite(self.sigma_d2) and self.sigma_d2 > 0):
            raise ValueError(f"shaping variance must be positive, got {self.sigma_d2}")
        if not (np.isfinite(self.A) and self.A > 0):
            raise ValueError(f"support width must be positive, got {self.A}")

    @property
    def sigma_d(self) -> float:
        return math.sqrt(self.sigma_d2)

    @property
    def c(self) -> float:
        """Probability mass of the parent Gaussian on the support."""
        return float(1.0 - 2.0 * qfunc(self.A / (2.0 * self.sigma_d)))

    def pdf(self, z):
        """Density at ``z``; raises if ``z`` lies outside the support."""
        za = np.asarray(z, dtype=float)
        if np.any(za < -self.A / 2) or np.any(za >= self.A / 2):
            raise ValueError(f"argument outside [-{self.A / 2}, {self.A / 2})")
        val = np.exp(-(za**2) / (2.0 * self.sigma_d2)) / (self.c * _SQRT2PI * self.sigma_d)
        return float(val) if np.isscalar(z) else val

    def kernel(self, z):
        """Unnormalized Gaussian kernel exp(-z^2 / (2 sigma_d2)), any z."""
        za = np.asarray(z, dtype=float)
        return np.exp(-(za**2) / (2.0 * self.sigma_d2))

    def variance(self) -> float:
        """Second moment of the truncated density, in closed form."""
        a = self.A
        s2 = self.sigma_d2
        return s2 * (1.0 - a * math.exp(-(a**2) / (8.0 * s2)) / (self.c * _SQRT2PI * self.sigma_d))


class SeededRandomSource:
    """Counter-based random stream addressed by (master_seed, stream_id).

    Equal keys replay bitwise-identical sequences; distinct stream ids give
    statistically independent Philox streams, so per-trial substreams can be
    drawn in parallel in any order.
    """

    def __init__(self, master_seed: int, stream_id: int = 0):
        self.master_seed = int(master_seed) & 0xFFFFFFFFFFFFFFFF
        self.stream_id = int(stream_id) & 0xFFFFFFFFFFFFFFFF
        self._gen = np.random.Generator(
            np.random.Philox(key=[self.master_seed, self.stream_id])
        )

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def standard_normal(self, size=None):
        return self._gen.standard_normal(size)

    def spawn(self, stream_id: int) -> "SeededRandomSource":
        """Fresh source for a substream of the same master seed."""
        return SeededRandomSource(self.master_seed, stream_id)

    def __repr__(self):
        return f"SeededRandomSource(master_seed={self.master_seed}, stream_id={self.stream_id})"
