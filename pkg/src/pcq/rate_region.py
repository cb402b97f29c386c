"""Closed-form rate-distortion machinery for the two-source Gaussian problem.

Scalar Wyner-Ziv formulas, the quadratic-Gaussian Berger-Tung region and its
Pareto boundary, corner-point operating parameters for successive decoding,
the 2x2 reconstruction matrix, and the analytic distortion upper bounds of
the modulo coding chain.

All rates are in bits (base-2 logarithms).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from pcq.core import TruncGaussian


@dataclass(frozen=True)
class GaussianSourcePair:
    """Zero-mean jointly Gaussian pair: variances and correlation coefficient."""

    var_x1: float
    var_x2: float
    rho: float

    def __post_init__(self):
        if self.var_x1 <= 0 or self.var_x2 <= 0:
            raise ValueError("source variances must be positive")
        if not -1.0 < self.rho < 1.0:
            raise ValueError(f"correlation must lie strictly inside (-1, 1), got {self.rho}")
        if self.var_x1 * self.var_x2 * (1.0 - self.rho**2) <= 0:
            raise ValueError("source covariance must be positive definite")

    @property
    def sigma_x1(self) -> float:
        return math.sqrt(self.var_x1)

    @property
    def sigma_x2(self) -> float:
        return math.sqrt(self.var_x2)

    @property
    def cov(self) -> np.ndarray:
        c = self.rho * self.sigma_x1 * self.sigma_x2
        return np.array([[self.var_x1, c], [c, self.var_x2]])


@dataclass(frozen=True)
class NoiseVars:
    """Variances of the two independent Gaussian description noises."""

    var_z1: float
    var_z2: float

    def __post_init__(self):
        if self.var_z1 <= 0 or self.var_z2 <= 0:
            raise ValueError("description noise variances must be positive")


@dataclass(frozen=True)
class CornerParams:
    """Operating point of the corner where encoder 2 does plain rate-distortion
    coding and encoder 1 does Wyner-Ziv coding against encoder 2's description.

    ``gamma1`` is the coefficient mapping encoder 2's decoded noise statistic
    to encoder 1's side information, defined here as
    rho * sigma_x1 / sigma_u2 (the LMMSE coefficient in the wide-interval
    limit).
    """

    var_d2: float  # encoder-2 target distortion (its shaping variance)
    var_z2: float
    var_z1: float
    D1: float
    D2: float
    alpha2: float
    alpha1: float
    gamma1: float
    var_x1_given_u2: float
    lmmse: np.ndarray


def wz_rate(var_cond: float, D: float) -> float:
    """Wyner-Ziv rate 0.5*log2(var_cond / D) in bits per symbol."""
    if var_cond <= 0:
        raise ValueError("conditional variance must be positive")
    if not 0 < D <= var_cond:
        raise ValueError(f"distortion must lie in (0, {var_cond}], got {D}")
    return 0.5 * math.log2(var_cond / D)


def wz_noise_var(var_cond: float, D: float) -> float:
    """Description noise variance var_cond*D / (var_cond - D) hitting distortion D."""
    if var_cond <= 0:
        raise ValueError("conditional variance must be positive")
    if not 0 < D < var_cond:
        raise ValueError(f"distortion must lie in (0, {var_cond}), got {D}")
    return var_cond * D / (var_cond - D)


def _qu_det(src: GaussianSourcePair, nv: NoiseVars) -> float:
    u1 = src.var_x1 + nv.var_z1
    u2 = src.var_x2 + nv.var_z2
    return u1 * u2 - (src.rho**2) * src.var_x1 * src.var_x2


def bt_rate_bounds(src: GaussianSourcePair, nv: NoiseVars) -> tuple[float, float, float]:
    """Minimum rates (R1, R2, R1+R2) of the Berger-Tung region at these noises."""
    det = _qu_det(src, nv)
    u1 = src.var_x1 + nv.var_z1
    u2 = src.var_x2 + nv.var_z2
    r1 = 0.5 * math.log2(det / (u2 * nv.var_z1))
    r2 = 0.5 * math.log2(det / (u1 * nv.var_z2))
    rsum = 0.5 * math.log2(det / (nv.var_z1 * nv.var_z2))
    return r1, r2, rsum


def bt_distortions(src: GaussianSourcePair, nv: NoiseVars) -> tuple[float, float]:
    """Achieved MSE pair of the Berger-Tung scheme at these description noises."""
    det = _qu_det(src, nv)
    cross = 1.0 - src.rho**2
    d1 = src.var_x1 * (src.var_x2 * cross + nv.var_z2) * nv.var_z1 / det
    d2 = src.var_x2 * (src.var_x1 * cross + nv.var_z1) * nv.var_z2 / det
    return d1, d2


def _rates_feasible(src, nv, R1, R2, slack=1e-12) -> bool:
    r1, r2, rsum = bt_rate_bounds(src, nv)
    return (R1 - r1 >= -slack) and (R2 - r2 >= -slack) and (R1 + R2 - rsum >= -slack)


def _min_feasible_vz(src, R1, R2, var_fixed, fixed_is_z1, iters=200):
    """Smallest feasible noise variance for one source, the other held fixed.

    The feasible set in the swept variance is an interval (raising it loosens
    the own-rate and sum-rate bounds but tightens the other encoder's), so
    first scan for any feasible seed, then bisect down to the region edge
    from the feasible side. Returns None when no variance is feasible.
    """
    base = src.var_x2 if fixed_is_z1 else src.var_x1

    def pack(v):
        return NoiseVars(var_fixed, v) if fixed_is_z1 else NoiseVars(v, var_fixed)

    lo = math.log(1e-8 * base)
    if _rates_feasible(src, pack(math.exp(lo)), R1, R2):
        return math.exp(lo)
    hi = None
    for v in np.exp(np.linspace(lo, math.log(1e8 * base), 129)):
        if _rates_feasible(src, pack(float(v)), R1, R2):
            hi = math.log(float(v))
            break
    if hi is None:
        return None
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if _rates_feasible(src, pack(math.exp(mid)), R1, R2):
            hi = mid
        else:
            lo = mid
    return math.exp(hi)


def bt_boundary(
    src: GaussianSourcePair,
    R1: float,
    R2: float,
    grid_size: int,
    return_noise: bool = False,
):
    """Pareto frontier of achievable (D1, D2) pairs at rates (R1, R2).

    Sweeps each description noise over a log grid spanning the two corner
    points, bisects the other noise to the region edge, merges both sweeps
    with the exact corner operating points, and keeps the Pareto-minimal
    set sorted by D1 ascending (D2 is then nonincreasing).

    With ``return_noise`` the achieving (var_z1, var_z2) pairs come back as
    a second array.
    """
    if R1 <= 0 or R2 <= 0:
        raise ValueError("rates must be positive")
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")

    ca = corner_params(src, R1, R2)
    cb = corner_params(_swap_src(src), R2, R1)  # swapped-index corner
    # corner B expressed in original index order
    cb_nv = NoiseVars(cb.var_z2, cb.var_z1)
    ca_nv = NoiseVars(ca.var_z1, ca.var_z2)

    pts = []
    for nv in (ca_nv, cb_nv):
        if _rates_feasible(src, nv, R1, R2):
            pts.append(bt_distortions(src, nv) + (nv.var_z1, nv.var_z2))

    half = max(grid_size // 2, 2)
    for v1 in np.exp(np.linspace(math.log(ca_nv.var_z1), math.log(cb_nv.var_z1), half)):
        v2 = _min_feasible_vz(src, R1, R2, v1, fixed_is_z1=True)
        if v2 is not None:
            pts.append(bt_distortions(src, NoiseVars(v1, v2)) + (v1, v2))
    for v2 in np.exp(np.linspace(math.log(cb_nv.var_z2), math.log(ca_nv.var_z2), half)):
        v1 = _min_feasible_vz(src, R1, R2, v2, fixed_is_z1=False)
        if v1 is not None:
            pts.append(bt_distortions(src, NoiseVars(v1, v2)) + (v1, v2))

    if not pts:
        raise ValueError(f"infeasible rates ({R1}, {R2}): empty distortion region")

    arr = np.array(sorted(set(pts)))
    # Pareto-minimal filter: after sorting by D1 then D2, keep strict D2 descents
    keep = []
    best_d2 = math.inf
    for row in arr:
        if row[1] < best_d2 - 1e-15:
            keep.append(row)
            best_d2 = row[1]
    out = np.array(keep)
    if return_noise:
        return out[:, :2], out[:, 2:]
    return out[:, :2]


def _swap_src(src: GaussianSourcePair) -> GaussianSourcePair:
    return GaussianSourcePair(src.var_x2, src.var_x1, src.rho)


def corner_params(src: GaussianSourcePair, R1: float, R2: float) -> CornerParams:
    """Derive the full corner operating point at rates (R1, R2).

    Encoder 2 compresses at rate R2 with plain rate-distortion coding;
    encoder 1 Wyner-Ziv codes at rate R1 against the decoded description.
    """
    if R1 <= 0 or R2 <= 0:
        raise ValueError("rates must be positive")
    var_d2 = src.var_x2 * 2.0 ** (-2.0 * R2)
    var_z2 = wz_noise_var(src.var_x2, var_d2)
    var_u2 = src.var_x2 + var_z2
    alpha2 = math.sqrt(1.0 - var_d2 / src.var_x2)
    var_x1_u2 = src.var_x1 * (1.0 - alpha2**2 * src.rho**2)
    D1 = var_x1_u2 * 2.0 ** (-2.0 * R1)
    var_z1 = wz_noise_var(var_x1_u2, D1)
    alpha1 = math.sqrt(1.0 - D1 / var_x1_u2)
    gamma1 = src.rho * src.sigma_x1 / math.sqrt(var_u2)
    _, D2 = bt_distortions(src, NoiseVars(var_z1, var_z2))
    cp = CornerParams(
        var_d2=var_d2,
        var_z2=var_z2,
        var_z1=var_z1,
        D1=D1,
        D2=D2,
        alpha2=alpha2,
        alpha1=alpha1,
        gamma1=gamma1,
        var_x1_given_u2=var_x1_u2,
        lmmse=np.zeros((2, 2)),
    )
    lm = lmmse_matrix(cp, src)
    return CornerParams(
        var_d2=var_d2,
        var_z2=var_z2,
        var_z1=var_z1,
        D1=D1,
        D2=D2,
        alpha2=alpha2,
        alpha1=alpha1,
        gamma1=gamma1,
        var_x1_given_u2=var_x1_u2,
        lmmse=lm,
    )


def lmmse_matrix(cp: CornerParams, src: GaussianSourcePair) -> np.ndarray:
    """Large-interval reconstruction matrix applied to (Z1', Z2')."""
    var_u2 = src.var_x2 + cp.var_z2
    det_x1u2 = src.var_x1 * var_u2 - (src.rho**2) * src.var_x1 * src.var_x2
    off = cp.alpha1 * src.rho * src.sigma_x1 * src.sigma_x2 * cp.var_z2 / det_x1u2
    return np.array(
        [
            [cp.alpha1, cp.gamma1],
            [off, src.sigma_x2 / math.sqrt(var_u2)],
        ]
    )


@dataclass(frozen=True)
class WrapStats:
    """Monte Carlo estimates of the wrap-correlation expectations.

    ``e_i1z1`` estimates E[I_1 Z_1] and ``e_x1i2`` estimates E[X_1 I_2],
    where I_l is the integer wrap count of the decoder noise of encoder l.
    """

    e_i1z1: float = 0.0
    e_x1i2: float = 0.0


@dataclass(frozen=True)
class BoundReport:
    """Right-hand sides of the analytic distortion bounds (all upper bounds)."""

    bound_z2_sq: float  # on E[(Z2')^2]
    bound_z1_sq: float  # on sigma_z1^2 = E[(X1 - gamma1 Z2')^2]
    bound_d1: float  # on E[(X1 - X1_hat)^2]
    kind: str = "upper bound"


def analytic_bounds(
    src: GaussianSourcePair,
    cp: CornerParams,
    tg1: TruncGaussian,
    tg2: TruncGaussian,
    *,
    d_min1: float,
    d_min2: float,
    wrap_stats: WrapStats,
) -> BoundReport:
    """Evaluate the coding chain's analytic distortion upper bounds.

    ``d_min1``/``d_min2`` are the minimum-distance constants of the shaped
    quantizer construction; they have no closed form here and are accepted
    as configuration.
    """
    if d_min1 is None or d_min2 is None or d_min1 <= 0 or d_min2 <= 0:
        raise ValueError("d_min1 and d_min2 must be supplied and positive")
    pq1 = tg1.variance()
    pq2 = tg2.variance()
    excess2 = pq2 / d_min2 - cp.var_d2
    b_z2 = src.var_x2 + excess2
    b_z1 = cp.var_x1_given_u2 + 2.0 * cp.gamma1 * tg2.A * wrap_stats.e_x1i2 + cp.gamma1**2 * excess2
    ratio = b_z1 / cp.var_x1_given_u2
    b_d1 = (
        ratio * cp.D1
        + 2.0 * cp.alpha1 * tg1.A * wrap_stats.e_i1z1
        + cp.alpha1**2 * (pq1 / d_min1 - ratio * cp.D1)
    )
    return BoundReport(bound_z2_sq=b_z2, bound_z1_sq=b_z1, bound_d1=b_d1)


def gaussian_mi(cov: np.ndarray, idx_a, idx_b) -> float:
    """Mutual information in bits between two blocks of a joint Gaussian."""
    a = np.atleast_1d(idx_a)
    b = np.atleast_1d(idx_b)
    ca = cov[np.ix_(a, a)]
    cb = cov[np.ix_(b, b)]
    cab = cov[np.ix_(np.concatenate([a, b]), np.concatenate([a, b]))]
    return 0.5 * math.log2(np.linalg.det(ca) * np.linalg.det(cb) / np.linalg.det(cab))


def corner_joint_cov(src: GaussianSourcePair, nv: NoiseVars) -> np.ndarray:
    """Covariance of (X1, X2, U1, U2) under U_l = X_l + Z_l with independent noises."""
    qx = src.cov
    top = np.hstack([qx, qx])
    bot = np.hstack([qx, qx + np.diag([nv.var_z1, nv.var_z2])])
    return np.vstack([top, bot])
