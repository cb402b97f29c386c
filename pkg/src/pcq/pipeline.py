"""The two-encoder coding chain at the successive-decoding corner point.

Case 1 pairs a plain shaped polar quantizer for source 2 (full rate, its
decoded output becomes side information) with dithered modulo Wyner-Ziv
polar quantization for source 1. Case 2 quantizes both sources with plain
shaped polar codes and reconstructs with the model-based joint linear MMSE
estimator. An ideal mode replaces the polar quantizers with the codebook-free
shaping sampler to expose the analytic limits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from pcq.core import SeededRandomSource, TruncGaussian, mod_wrap
from pcq.polar import (
    MultilevelPolarSpec,
    allocate_level_counts,
    design_level_sets,
    design_nested_spec,
    estimate_level_stats,
    genie_sc_log_odds,
    scl_decode,
    scl_quantize,
)
from pcq.quantizer import (
    AskAlphabet,
    empirical_wrapped_density,
    make_alphabet,
    plain_weights,
    posterior_weights,
    sideinfo_weights,
)
from pcq.rate_region import CornerParams, GaussianSourcePair, corner_params

_DESIGN_STREAM = 0xD0_5160
_BLOCK_STREAM_BASE = 1 << 32


@dataclass(frozen=True)
class DsCodingConfig:
    """Frozen operating point of the distributed coding chain."""

    src: GaussianSourcePair
    rates: tuple[float, float]
    mode: str  # "case1" | "case2" | "ideal"
    n: int
    corner: CornerParams
    alphabets: tuple[AskAlphabet, AskAlphabet]
    shaping: tuple[TruncGaussian, TruncGaussian]
    polar: tuple[MultilevelPolarSpec | None, MultilevelPolarSpec | None]
    alpha1_op: float  # inflation factor consistent with the operating shaping
    var_z1_model: float  # side-information noise variance of the design model
    lmmse_op: np.ndarray  # reconstruction matrix at the operating point
    side_density: tuple[np.ndarray, np.ndarray] | None = field(repr=False, default=None)
    case2_lmmse: np.ndarray | None = None
    enc2_mod: bool = False  # dithered modulo variant of encoder 2
    reconstruction: str = "design"  # "design" | "corner"

    @property
    def num_levels(self) -> tuple[int, int]:
        return (self.alphabets[0].bits, self.alphabets[1].bits)


@dataclass(frozen=True)
class SharedRandomness:
    """Common randomness of one block: dithers plus rounding uniforms.

    Regenerated identically by encoder and decoder from (master seed,
    block index); nothing here is transmitted.
    """

    d1: np.ndarray  # [C, n]
    d2: np.ndarray  # [C, n]
    r1: np.ndarray  # [C, levels1, n]
    r2: np.ndarray  # [C, levels2, n]


@dataclass
class BlockResult:
    """Per-block empirical distortions and diagnostics."""

    delta1: np.ndarray
    delta2: np.ndarray
    bits1: int
    bits2: int
    wraps1: np.ndarray  # dither-wrap counts of encoder 1's input
    wraps2: np.ndarray  # wrap (mod) or clip (plain) counts of encoder 2
    decode_ok: np.ndarray


def block_distortion(x_block: np.ndarray, x_hat_block: np.ndarray) -> np.ndarray:
    """Per-block mean squared error along the last axis."""
    x_block = np.asarray(x_block, dtype=float)
    x_hat_block = np.asarray(x_hat_block, dtype=float)
    if x_block.shape != x_hat_block.shape:
        raise ValueError(f"shape mismatch: {x_block.shape} vs {x_hat_block.shape}")
    return np.mean((x_block - x_hat_block) ** 2, axis=-1)


def side_info_y1(z2_prime: np.ndarray, corner: CornerParams) -> np.ndarray:
    """Side information for encoder 1's decoder: gamma1 times Z2'."""
    return corner.gamma1 * np.asarray(z2_prime, dtype=float)


def block_randomness(cfg: DsCodingConfig, master_seed: int, block_ids) -> SharedRandomness:
    """Deterministic per-block dithers and rounding uniforms.

    One counter-based stream per block, independent of chunking and worker
    count, shared between encoding and decoding.
    """
    m1, m2 = cfg.num_levels
    n = cfg.n
    a1, a2 = cfg.alphabets
    d1 = np.empty((len(block_ids), n))
    d2 = np.empty((len(block_ids), n))
    r1 = np.empty((len(block_ids), m1, n))
    r2 = np.empty((len(block_ids), m2, n))
    for row, b in enumerate(block_ids):
        g = SeededRandomSource(master_seed, _BLOCK_STREAM_BASE + int(b)).generator
        d1[row] = g.uniform(-a1.A / 2, a1.A / 2, n)
        d2[row] = g.uniform(-a2.A / 2, a2.A / 2, n)
        r1[row] = g.random((m1, n))
        r2[row] = g.random((m2, n))
    return SharedRandomness(d1=d1, d2=d2, r1=r1, r2=r2)


def _sample_posterior(weights: np.ndarray, rng: SeededRandomSource) -> np.ndarray:
    cdf = np.cumsum(weights, axis=-1)
    u = rng.uniform(size=weights.shape[:-1] + (1,)) * cdf[..., -1:]
    return np.sum(cdf < u, axis=-1)


def _sample_with_uniforms(weights: np.ndarray, ru: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(weights, axis=-1)
    return np.sum(cdf < ru[..., None] * cdf[..., -1:], axis=-1)


def _limit_model_lmmse(
    src: GaussianSourcePair,
    gamma1: float,
    alpha1: float,
    m_x1u2: float,
    m_x2u2: float,
    m_u2sq: float,
    ez1: float,
) -> np.ndarray:
    """Generic LMMSE of X from (Z1', Z2') under the operating-point model.

    Second moments of encoder 2's statistic are design measurements; the
    modulo terms of Z1' are neglected (large-interval model).
    """
    var_z1 = src.var_x1 - 2 * gamma1 * m_x1u2 + gamma1**2 * m_u2sq
    e_y1z1 = gamma1 * m_x1u2 - gamma1**2 * m_u2sq
    e_x1z1p = alpha1 * (var_z1 + e_y1z1)
    e_x2z1p = alpha1 * (src.cov[0, 1] - gamma1 * m_x2u2)
    e_z1psq = alpha1**2 * var_z1 + ez1
    e_z1pz2p = alpha1 * (m_x1u2 - gamma1 * m_u2sq)
    exz = np.array([[e_x1z1p, m_x1u2], [e_x2z1p, m_x2u2]])
    qz = np.array([[e_z1psq, e_z1pz2p], [e_z1pz2p, m_u2sq]])
    return exz @ np.linalg.inv(qz)


def build_config(
    src: GaussianSourcePair,
    rates: tuple[float, float],
    mode: str,
    *,
    n: int = 256,
    kappa: tuple[float, float] = (1.325, 0.442),
    M: tuple[int, int] = (8, 16),
    var_d: tuple[float | None, float | None] = (None, None),
    list_size: int = 8,
    design_blocks: int = 2500,
    design_seed: int = 0,
    ordering: str = "mc",
    enc2_mod: bool = False,
    reconstruction: str = "design",
    prf_scale: float = 0.25,
    prf_floor: float = 0.5,
    safety_freeze: int = 0,
) -> DsCodingConfig:
    """Derive the full operating point, including the polar code designs.

    The design is deterministic given ``design_seed``. Shaping variances
    default to calibrated backoffs from the corner ideals (the corner values
    themselves leave no margin for the finite-length code); pass ``var_d``
    to override.
    """
    if mode not in ("case1", "case2", "ideal"):
        raise ValueError(f"unknown mode {mode!r}")
    r1, r2 = rates
    cp = corner_params(src, r1, r2)
    rng = SeededRandomSource(design_seed, _DESIGN_STREAM)

    if mode == "ideal":
        # intervals wide enough that modulo wraps are negligible for both
        # encoders (>= 16 sigma of each wrapped signal)
        sd1 = cp.D1 if var_d[0] is None else var_d[0]
        sd2 = cp.var_d2 if var_d[1] is None else var_d[1]
        A1 = 16.0 * math.sqrt(cp.var_x1_given_u2)
        A2 = 16.0 * src.sigma_x2
        alph1, alph2 = make_alphabet(A1, 256), make_alphabet(A2, 256)
        tg1, tg2 = TruncGaussian(sd1, A1), TruncGaussian(sd2, A2)
        return DsCodingConfig(
            src=src,
            rates=rates,
            mode=mode,
            n=n,
            corner=cp,
            alphabets=(alph1, alph2),
            shaping=(tg1, tg2),
            polar=(None, None),
            alpha1_op=cp.alpha1,
            var_z1_model=cp.var_x1_given_u2,
            lmmse_op=cp.lmmse,
            enc2_mod=True,
            reconstruction="corner",
        )

    A1, A2 = kappa[0] * M[0], kappa[1] * M[1]
    alph1, alph2 = make_alphabet(A1, M[0]), make_alphabet(A2, M[1])

    # plain (full-rate) designs converge quickly; the WZ nesting below is the
    # one that benefits from a large design sample
    plain_blocks = min(3000, design_blocks)

    if mode == "case2":
        sd1 = src.var_x1 * 2.0 ** (-2 * r1) if var_d[0] is None else var_d[0]
        sd2 = 0.19 if var_d[1] is None else var_d[1]
        tg1, tg2 = TruncGaussian(sd1, A1), TruncGaussian(sd2, A2)
        spec1 = _design_plain(src.sigma_x1, alph1, tg1, n, int(round(n * r1)), list_size, plain_blocks, rng, ordering)
        spec2 = _design_plain(src.sigma_x2, alph2, tg2, n, int(round(n * r2)), list_size, plain_blocks, rng, ordering)
        # model covariance from the per-source target distortions
        t1 = src.var_x1 * 2.0 ** (-2 * r1)
        t2 = src.var_x2 * 2.0 ** (-2 * r2)
        qu = src.cov + np.diag(
            [src.var_x1 * t1 / (src.var_x1 - t1), src.var_x2 * t2 / (src.var_x2 - t2)]
        )
        w = src.cov @ np.linalg.inv(qu)
        return DsCodingConfig(
            src=src,
            rates=rates,
            mode=mode,
            n=n,
            corner=cp,
            alphabets=(alph1, alph2),
            shaping=(tg1, tg2),
            polar=(spec1, spec2),
            alpha1_op=cp.alpha1,
            var_z1_model=cp.var_x1_given_u2,
            lmmse_op=cp.lmmse,
            case2_lmmse=w,
        )

    # ---- case 1 ----
    sd1 = 0.39 if var_d[0] is None else var_d[0]
    sd2 = 0.19 if var_d[1] is None else var_d[1]
    tg2 = TruncGaussian(sd2, A2)
    tg1 = TruncGaussian(sd1, A1)

    # stage 1: encoder 2 (plain, alpha2-scaled, full rate) and its measured
    # second moments, which set the side-information model for encoder 1
    spec2 = _design_plain(
        cp.alpha2 * src.sigma_x2, alph2, tg2, n, int(round(n * r2)), list_size, plain_blocks, rng, ordering
    )
    meas = min(300, design_blocks)
    xpair = rng.generator.multivariate_normal([0.0, 0.0], src.cov, (meas, n))
    s2 = cp.alpha2 * xpair[..., 1]
    sym2, _, _ = scl_quantize(plain_weights(s2, alph2, tg2), spec2, rng.uniform(size=(meas, alph2.bits, n)))
    u2 = alph2.points[sym2]
    m_u2sq = float(np.mean(u2**2))
    m_x2u2 = float(np.mean(xpair[..., 1] * u2))
    m_x1u2 = float(np.mean(xpair[..., 0] * u2))
    z1_samples = (xpair[..., 0] - cp.gamma1 * u2).ravel()

    var_z1 = float(np.mean(z1_samples**2))
    if sd1 >= var_z1:
        raise ValueError("encoder-1 shaping variance must stay below the side noise variance")
    alpha1 = math.sqrt(1.0 - sd1 / var_z1)

    # stage 2: encoder 1 (dithered modulo Wyner-Ziv) designed against the
    # empirical side-noise distribution (keeps encoder 2's clipping spikes)
    density = empirical_wrapped_density(tg1, alpha1, z1_samples)
    xp = rng.uniform(-A1 / 2, A1 / 2, (design_blocks, n))
    z = rng.generator.choice(z1_samples, size=(design_blocks, n))
    yp = mod_wrap(xp - alpha1 * z, A1)
    w_enc = posterior_weights(xp, alph1, tg1)
    u_idx = _sample_posterior(w_enc, rng)
    w_side = sideinfo_weights(yp, alph1, *density)
    stats = estimate_level_stats(w_enc, u_idx, w_side)
    # per-index regression of encoder on decoder log-odds: the decoder's
    # draw-consistency metric uses the slope-corrected posterior with the
    # residual spread as its logistic width
    lam_enc = np.clip(genie_sc_log_odds(w_enc, u_idx), -30, 30)
    lam_side = np.clip(genie_sc_log_odds(w_side, u_idx), -30, 30)
    slope = np.clip(
        (lam_enc * lam_side).mean(axis=1)
        / np.maximum((lam_side**2).mean(axis=1), 1e-9),
        0.5,
        20.0,
    )
    resid = np.sqrt(np.mean((lam_enc - slope[:, None, :] * lam_side) ** 2, axis=1))
    width = np.maximum(resid * prf_scale, prf_floor)
    spec1 = design_nested_spec(
        stats,
        int(round(n * r1)),
        list_size,
        prf_width=width,
        prf_slope=slope,
        ordering=ordering,
        safety_freeze=safety_freeze,
    )

    sym1, _, _ = scl_quantize(
        posterior_weights(xp[:meas], alph1, tg1), spec1, rng.uniform(size=(meas, alph1.bits, n))
    )
    ez1 = float(np.mean(mod_wrap(alph1.points[sym1] - xp[:meas], A1) ** 2))
    lmmse_op = (
        cp.lmmse
        if reconstruction == "corner"
        else _limit_model_lmmse(src, cp.gamma1, alpha1, m_x1u2, m_x2u2, m_u2sq, ez1)
    )
    return DsCodingConfig(
        src=src,
        rates=rates,
        mode=mode,
        n=n,
        corner=cp,
        alphabets=(alph1, alph2),
        shaping=(tg1, tg2),
        polar=(spec1, spec2),
        alpha1_op=alpha1,
        var_z1_model=var_z1,
        lmmse_op=lmmse_op,
        side_density=density,
        enc2_mod=enc2_mod,
        reconstruction=reconstruction,
    )


def _design_plain(src_std, alph, tg, n, tx_total, list_size, design_blocks, rng, ordering):
    """Full-rate plain-quantizer level stack (no side information)."""
    s = rng.standard_normal((design_blocks, n)) * src_std
    w = plain_weights(s, alph, tg)
    u = _sample_posterior(w, rng)
    stats = estimate_level_stats(w, u, None)
    quant, tx = allocate_level_counts(stats.enc_level_entropy, None, n, tx_total)
    levels = tuple(
        design_level_sets(
            n,
            int(q),
            int(t),
            enc_entropy=stats.enc_index_entropy[lev] if ordering == "mc" else None,
            ordering=ordering,
        )
        for lev, (q, t) in enumerate(zip(quant, tx))
    )
    return MultilevelPolarSpec(levels, list_size)


def encode2(x2_block: np.ndarray, cfg: DsCodingConfig, shared: SharedRandomness):
    """Encoder 2: full-rate shaped polar quantization of the scaled source.

    Plain by default (the experiments' configuration); the dithered modulo
    variant wraps alpha2*X2 + D2 onto the interval first.

    Returns (message bits, reconstruction points, decoder statistic Z2').
    """
    alph2 = cfg.alphabets[1]
    tg2 = cfg.shaping[1]
    a2 = cfg.corner.alpha2
    if cfg.enc2_mod:
        x2p = mod_wrap(a2 * np.asarray(x2_block, dtype=float) + shared.d2, alph2.A)
        w = posterior_weights(x2p, alph2, tg2)
    else:
        s2 = a2 * np.asarray(x2_block, dtype=float)
        w = plain_weights(s2, alph2, tg2)
    if cfg.polar[1] is None:
        raise ValueError("ideal mode runs through run_ideal_blocks")
    sym, msg, _ = scl_quantize(w, cfg.polar[1], shared.r2)
    u2 = alph2.points[sym]
    z2p = mod_wrap(u2 - shared.d2, alph2.A) if cfg.enc2_mod else u2
    return msg, u2, z2p


def encode1_wz(x1_block: np.ndarray, cfg: DsCodingConfig, shared: SharedRandomness):
    """Encoder 1: dithered modulo Wyner-Ziv polar quantization.

    Returns (message bits, quantizer points, derived source X1').
    """
    alph1 = cfg.alphabets[0]
    x1p = mod_wrap(cfg.alpha1_op * np.asarray(x1_block, dtype=float) + shared.d1, alph1.A)
    w = posterior_weights(x1p, alph1, cfg.shaping[0])
    sym, msg, _ = scl_quantize(w, cfg.polar[0], shared.r1)
    return msg, alph1.points[sym], x1p


def decode_case1(w1: np.ndarray, w2: np.ndarray, shared: SharedRandomness, cfg: DsCodingConfig):
    """Successive decoder: recover U2, derive side information, decode U1,
    reconstruct both sources through the linear MMSE matrix.

    Returns (x1_hat, x2_hat, u1_points).
    """
    alph1, alph2 = cfg.alphabets
    u2 = alph2.points[scl_decode(None, w2, cfg.polar[1])]
    z2p = mod_wrap(u2 - shared.d2, alph2.A) if cfg.enc2_mod else u2
    y1 = side_info_y1(z2p, cfg.corner)
    y1p = mod_wrap(cfg.alpha1_op * y1 + shared.d1, alph1.A)
    w_side = sideinfo_weights(y1p, alph1, *cfg.side_density)
    u1 = alph1.points[scl_decode(w_side, w1, cfg.polar[0], shared.r1)]
    z1p = mod_wrap(u1 - y1p, alph1.A)
    zz = np.stack([z1p, z2p], axis=-1)
    xh = zz @ cfg.lmmse_op.T
    return xh[..., 0], xh[..., 1], u1


def run_case1_blocks(cfg, x1, x2, shared) -> BlockResult:
    w2, u2_enc, z2p_enc = encode2(x2, cfg, shared)
    w1, u1_enc, x1p = encode1_wz(x1, cfg, shared)
    x1h, x2h, u1_dec = decode_case1(w1, w2, shared, cfg)
    wraps1 = _wrap_counts(cfg.alpha1_op * x1 + shared.d1, cfg.alphabets[0].A)
    if cfg.enc2_mod:
        wraps2 = _wrap_counts(cfg.corner.alpha2 * x2 + shared.d2, cfg.alphabets[1].A)
    else:
        wraps2 = _clip_counts(cfg.corner.alpha2 * x2, cfg.alphabets[1])
    return BlockResult(
        delta1=block_distortion(x1, x1h),
        delta2=block_distortion(x2, x2h),
        bits1=w1.shape[1],
        bits2=w2.shape[1],
        wraps1=wraps1,
        wraps2=wraps2,
        decode_ok=np.all(u1_dec == u1_enc, axis=-1),
    )


def encode_decode_case2(x1, x2, cfg: DsCodingConfig, shared: SharedRandomness):
    """Case 2: independent plain shaped polar quantization of both sources,
    joint linear MMSE reconstruction from (U1, U2) under the model
    covariance implied by the target distortions. Returns the full result."""
    alph1, alph2 = cfg.alphabets
    w1t = plain_weights(np.asarray(x1, dtype=float), alph1, cfg.shaping[0])
    sym1, msg1, _ = scl_quantize(w1t, cfg.polar[0], shared.r1)
    w2t = plain_weights(np.asarray(x2, dtype=float), alph2, cfg.shaping[1])
    sym2, msg2, _ = scl_quantize(w2t, cfg.polar[1], shared.r2)
    u1d = alph1.points[scl_decode(None, msg1, cfg.polar[0])]
    u2d = alph2.points[scl_decode(None, msg2, cfg.polar[1])]
    uu = np.stack([u1d, u2d], axis=-1)
    xh = uu @ cfg.case2_lmmse.T
    return BlockResult(
        delta1=block_distortion(x1, xh[..., 0]),
        delta2=block_distortion(x2, xh[..., 1]),
        bits1=msg1.shape[1],
        bits2=msg2.shape[1],
        wraps1=_clip_counts(x1, alph1),
        wraps2=_clip_counts(x2, alph2),
        decode_ok=np.all(u1d == alph1.points[sym1], axis=-1),
    )


def run_ideal_blocks(cfg: DsCodingConfig, x1, x2, master_seed: int, block_ids) -> BlockResult:
    """Corner-point chain with the codebook-free shaping sampler in place of
    the polar quantizers; the decoder receives both quantizer outputs."""
    alph1, alph2 = cfg.alphabets
    tg1, tg2 = cfg.shaping
    cp = cfg.corner
    C, n = x1.shape
    d1 = np.empty((C, n))
    d2 = np.empty((C, n))
    ru1 = np.empty((C, n))
    ru2 = np.empty((C, n))
    for row, b in enumerate(block_ids):
        g = SeededRandomSource(master_seed, _BLOCK_STREAM_BASE + int(b)).generator
        d1[row] = g.uniform(-alph1.A / 2, alph1.A / 2, n)
        d2[row] = g.uniform(-alph2.A / 2, alph2.A / 2, n)
        ru1[row] = g.random(n)
        ru2[row] = g.random(n)

    x2p = mod_wrap(cp.alpha2 * x2 + d2, alph2.A)
    u2 = alph2.points[_sample_with_uniforms(posterior_weights(x2p, alph2, tg2), ru2)]
    z2p = mod_wrap(u2 - d2, alph2.A)
    y1 = side_info_y1(z2p, cp)
    x1p = mod_wrap(cp.alpha1 * x1 + d1, alph1.A)
    u1 = alph1.points[_sample_with_uniforms(posterior_weights(x1p, alph1, tg1), ru1)]
    y1p = mod_wrap(cp.alpha1 * y1 + d1, alph1.A)
    z1p = mod_wrap(u1 - y1p, alph1.A)
    zz = np.stack([z1p, z2p], axis=-1)
    xh = zz @ cp.lmmse.T
    nbits = int(round(cfg.rates[0] * n)), int(round(cfg.rates[1] * n))
    return BlockResult(
        delta1=block_distortion(x1, xh[..., 0]),
        delta2=block_distortion(x2, xh[..., 1]),
        bits1=nbits[0],
        bits2=nbits[1],
        wraps1=_wrap_counts(cp.alpha1 * x1 + d1, alph1.A),
        wraps2=_wrap_counts(cp.alpha2 * x2 + d2, alph2.A),
        decode_ok=np.ones(C, dtype=bool),
    )


def _wrap_counts(raw, A):
    return np.sum(np.floor(np.asarray(raw) / A + 0.5) != 0, axis=-1).astype(np.int64)


def _clip_counts(x, alph):
    half = alph.A / 2
    return np.sum(np.abs(np.asarray(x)) >= half, axis=-1).astype(np.int64)
