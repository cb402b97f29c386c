"""Scalar M-ASK quantization on a modulo interval.

Alphabet construction, dithering, the shaping posterior, a codebook-free
randomized quantizer used as the statistical oracle for the coding chain,
encoder/decoder noise extraction, and a plug-in Wyner-Ziv rate estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from pcq.core import SeededRandomSource, TruncGaussian, mod_wrap


@dataclass(frozen=True)
class AskAlphabet:
    """M equally spaced amplitude points strictly inside [-A/2, A/2)."""

    A: float
    M: int
    points: np.ndarray = field(repr=False)

    @property
    def kappa(self) -> float:
        return self.A / self.M

    @property
    def bits(self) -> int:
        return self.M.bit_length() - 1


def make_alphabet(A: float, M: int) -> AskAlphabet:
    """Build the M-ASK alphabet with spacing kappa = A/M.

    M must be a power of two (multilevel labeling needs log2 M bit levels).
    """
    if A <= 0:
        raise ValueError(f"interval width must be positive, got {A}")
    if M < 2 or (M & (M - 1)) != 0:
        raise ValueError(f"alphabet size must be a power of two >= 2, got {M}")
    kappa = A / M
    points = -A / 2 + (np.arange(M) + 0.5) * kappa
    return AskAlphabet(A=float(A), M=int(M), points=points)


@dataclass(frozen=True)
class ShapingPosterior:
    """Selection distribution over the alphabet points for one source sample."""

    pmf: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pmf, dtype=float)
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("pmf entries must be nonnegative and sum to one")


def dither_and_wrap(x, alpha: float, d, A: float):
    """Derived source (alpha*x + d) mod A."""
    return mod_wrap(np.asarray(alpha, dtype=float) * np.asarray(x, dtype=float) + d, A)


def make_dither(n: int, A: float, rng: SeededRandomSource) -> np.ndarray:
    """Length-n i.i.d. dither, uniform on [-A/2, A/2), from a shared seed."""
    return rng.uniform(-A / 2, A / 2, n)


def shaping_posterior(x_prime: float, alph: AskAlphabet, tg: TruncGaussian) -> ShapingPosterior:
    """Posterior P(u | x') proportional to q((u - x') mod A)."""
    if not -alph.A / 2 <= x_prime < alph.A / 2:
        raise ValueError(f"x' must lie in [-{alph.A / 2}, {alph.A / 2})")
    if abs(tg.A - alph.A) > 1e-12 * alph.A:
        raise ValueError("shaping support must equal the alphabet interval")
    w = tg.pdf(mod_wrap(alph.points - x_prime, alph.A))
    return ShapingPosterior(pmf=w / w.sum())


def _stable_gauss_weights(d: np.ndarray, sigma_d2: float) -> np.ndarray:
    # normalize by the per-sample nearest point so narrow shaping never underflows
    e = d**2 / (2.0 * sigma_d2)
    return np.exp(-(e - e.min(axis=-1, keepdims=True)))


def posterior_weights(x_prime: np.ndarray, alph: AskAlphabet, tg: TruncGaussian) -> np.ndarray:
    """Unnormalized shaping weights q((u - x') mod A) for batches of samples.

    Returns shape ``x_prime.shape + (M,)``; each row is scaled by its largest
    entry, which cancels on normalization.
    """
    d = mod_wrap(
        alph.points.reshape((1,) * max(np.ndim(x_prime), 1) + (-1,))
        - np.atleast_1d(np.asarray(x_prime, dtype=float))[..., None],
        alph.A,
    )
    return _stable_gauss_weights(d, tg.sigma_d2)


def plain_weights(x: np.ndarray, alph: AskAlphabet, tg: TruncGaussian) -> np.ndarray:
    """Gaussian kernel weights exp(-(u - x)^2 / 2 sigma_d^2) without wrapping.

    Used by the plain (no modulo) quantizer, where source-to-point distances
    may exceed A/2.
    """
    d = alph.points.reshape((1,) * max(np.ndim(x), 1) + (-1,)) - np.atleast_1d(
        np.asarray(x, dtype=float)
    )[..., None]
    return _stable_gauss_weights(d, tg.sigma_d2)


def ideal_quantize(x_prime: float, posterior: ShapingPosterior, rng: SeededRandomSource, alph: AskAlphabet) -> float:
    """Draw one reconstruction point from the shaping posterior."""
    idx = int(rng.generator.choice(alph.M, p=posterior.pmf))
    return float(alph.points[idx])


def ideal_quantize_batch(
    x_prime: np.ndarray,
    alph: AskAlphabet,
    tg: TruncGaussian,
    rng: SeededRandomSource,
    wrap: bool = True,
    chunk: int = 1 << 16,
) -> np.ndarray:
    """Vectorized codebook-free sampler: one point per sample, drawn from the
    shaping posterior (wrapped or plain). Processes in chunks to bound the
    samples-by-M weight matrix."""
    flat = np.asarray(x_prime, dtype=float).ravel()
    out = np.empty(flat.size, dtype=np.int64)
    for lo in range(0, flat.size, chunk):
        part = flat[lo : lo + chunk]
        w = posterior_weights(part, alph, tg) if wrap else plain_weights(part, alph, tg)
        cdf = np.cumsum(w, axis=-1)
        u = rng.uniform(size=(part.size, 1)) * cdf[:, -1:]
        out[lo : lo + chunk] = np.sum(cdf < u, axis=-1)
    return alph.points[out].reshape(np.shape(x_prime))


def encoder_noise(u, x_prime, A: float):
    """Encoder noise (u - x') mod A."""
    return mod_wrap(np.asarray(u, dtype=float) - x_prime, A)


def decoder_noise(u, y_prime, A: float):
    """Decoder noise (u - y') mod A."""
    return mod_wrap(np.asarray(u, dtype=float) - y_prime, A)


def wrapped_noise_density(tg: TruncGaussian, alpha: float, var_z: float, grid_size: int = 8192):
    """Tabulated density of Z' = (Ztilde + alpha*Z) mod A on [-A/2, A/2).

    Ztilde follows the truncated Gaussian shaping density and Z is an
    independent N(0, var_z). Computed by Gauss-Hermite quadrature over z;
    returns (grid, values) for interpolation.
    """
    A = tg.A
    nodes, weights = np.polynomial.hermite_e.hermegauss(101)
    z = nodes * math.sqrt(var_z)
    grid = np.linspace(-A / 2, A / 2, grid_size, endpoint=False)
    # density of Ztilde at (v - alpha z) mod A, averaged over z
    arg = mod_wrap(grid[:, None] - alpha * z[None, :], A)
    vals = tg.pdf(arg) @ (weights / weights.sum())
    return grid, vals


def empirical_wrapped_density(
    tg: TruncGaussian, alpha: float, z_samples: np.ndarray, grid_size: int = 8192, max_samples: int = 16384
):
    """Tabulated density of (Ztilde + alpha*Z) mod A with Z drawn from data.

    Mixture of the shaping density over an empirical noise sample, so
    non-Gaussian side-noise features (clipping spikes of the companion
    encoder) show up in the decoder's likelihoods.
    """
    A = tg.A
    z = np.asarray(z_samples, dtype=float).ravel()
    if len(z) > max_samples:
        step = len(z) // max_samples
        z = z[: step * max_samples : step]
    grid = np.linspace(-A / 2, A / 2, grid_size, endpoint=False)
    vals = np.zeros(grid_size)
    chunk = 512
    for lo in range(0, len(z), chunk):
        arg = mod_wrap(grid[:, None] - alpha * z[lo : lo + chunk][None, :], A)
        vals += tg.pdf(arg).sum(axis=1)
    return grid, vals / len(z)


def sideinfo_weights(y_prime: np.ndarray, alph: AskAlphabet, density_grid, density_vals) -> np.ndarray:
    """Likelihood table f_Z'((u - y') mod A) for all alphabet points."""
    d = mod_wrap(
        alph.points.reshape((1,) * np.ndim(y_prime) + (-1,)) - np.asarray(y_prime)[..., None],
        alph.A,
    )
    A = alph.A
    step = density_grid[1] - density_grid[0]
    idx = np.clip(((d + A / 2) / step).astype(np.int64), 0, len(density_grid) - 1)
    return density_vals[idx]


def _pmf_entropy_bits(w: np.ndarray) -> np.ndarray:
    p = w / w.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(p > 0, p * np.log2(p, where=p > 0), 0.0)
    return -t.sum(axis=-1)


def estimate_wz_rate(
    var_z: float,
    tg: TruncGaussian,
    alph: AskAlphabet,
    samples: int = 200_000,
    rng: SeededRandomSource | None = None,
) -> float:
    """Plug-in estimate of I(U; X') - I(U; Y') in bits per symbol.

    U is uniform over the alphabet (dithered input), so both mutual
    informations reduce to log2 M minus a conditional entropy; the
    conditional pmfs are exact (shaping posterior; quadrature-built wrapped
    noise density) and only the conditioning variable is Monte Carlo
    averaged over its uniform distribution.
    """
    if samples < 1000:
        raise ValueError("need at least 1000 samples")
    rng = rng or SeededRandomSource(0, 0)
    A = alph.A
    chunk = 1 << 16

    xp = rng.uniform(-A / 2, A / 2, samples)
    h_u_given_x = np.mean(
        np.concatenate(
            [
                _pmf_entropy_bits(posterior_weights(xp[lo : lo + chunk], alph, tg))
                for lo in range(0, samples, chunk)
            ]
        )
    )

    grid, vals = wrapped_noise_density(tg, math.sqrt(max(1.0 - tg.sigma_d2 / var_z, 0.0)), var_z)
    yp = rng.uniform(-A / 2, A / 2, samples)
    h_u_given_y = np.mean(
        np.concatenate(
            [
                _pmf_entropy_bits(sideinfo_weights(yp[lo : lo + chunk], alph, grid, vals))
                for lo in range(0, samples, chunk)
            ]
        )
    )

    return float(h_u_given_y - h_u_given_x)


def estimate_wrap_stats(
    src_var_x1: float,
    gamma1: float,
    alpha1: float,
    alpha2: float,
    rho: float,
    var_x2: float,
    tg1: TruncGaussian,
    tg2: TruncGaussian,
    alph1: AskAlphabet,
    alph2: AskAlphabet,
    samples: int,
    rng: SeededRandomSource,
):
    """Monte Carlo estimates of E[I_1 Z_1] and E[X_1 I_2] for the bound report.

    Runs the ideal-quantizer chain: encoder 2 quantizes alpha2*X2 under
    dithered wrapping, encoder 1 sees side information gamma1*Z2'.
    """
    from pcq.rate_region import WrapStats

    cov = np.array(
        [
            [src_var_x1, rho * math.sqrt(src_var_x1 * var_x2)],
            [rho * math.sqrt(src_var_x1 * var_x2), var_x2],
        ]
    )
    x = rng.generator.multivariate_normal([0, 0], cov, samples).T
    d2 = make_dither(samples, alph2.A, rng)
    x2p = dither_and_wrap(x[1], alpha2, d2, alph2.A)
    u2 = ideal_quantize_batch(x2p, alph2, tg2, rng)
    z2p = decoder_noise(u2, d2, alph2.A)
    raw2 = np.asarray(alpha2 * x[1] + encoder_noise(u2, x2p, alph2.A))
    i2 = np.round((raw2 - z2p) / alph2.A)

    y1 = gamma1 * z2p
    z1 = x[0] - y1
    d1 = make_dither(samples, alph1.A, rng)
    x1p = dither_and_wrap(x[0], alpha1, d1, alph1.A)
    u1 = ideal_quantize_batch(x1p, alph1, tg1, rng)
    y1p = dither_and_wrap(y1, alpha1, d1, alph1.A)
    z1p = decoder_noise(u1, y1p, alph1.A)
    raw1 = np.asarray(encoder_noise(u1, x1p, alph1.A) + alpha1 * z1)
    i1 = np.round((raw1 - z1p) / alph1.A)

    return WrapStats(e_i1z1=float(np.mean(i1 * z1)), e_x1i2=float(np.mean(x[0] * i2)))
