"""Distributed lossy coding of correlated Gaussian sources.

Analytic Berger-Tung / Wyner-Ziv rate-distortion machinery together with a
working coding chain: dithered modulo quantization, truncated Gaussian
shaping, and multilevel polar codes with successive cancellation list
encoding and decoding.
"""

from pcq.core import ModInterval, SeededRandomSource, TruncGaussian, mod_reduce, qfunc
from pcq.rate_region import (
    CornerParams,
    GaussianSourcePair,
    NoiseVars,
    bt_boundary,
    bt_distortions,
    bt_rate_bounds,
    corner_params,
    lmmse_matrix,
    wz_noise_var,
    wz_rate,
)

__all__ = [
    "ModInterval",
    "SeededRandomSource",
    "TruncGaussian",
    "mod_reduce",
    "qfunc",
    "GaussianSourcePair",
    "NoiseVars",
    "CornerParams",
    "wz_rate",
    "wz_noise_var",
    "bt_rate_bounds",
    "bt_distortions",
    "bt_boundary",
    "corner_params",
    "lmmse_matrix",
]

__version__ = "0.1.0"
