"""Experiment configuration, Monte Carlo harness, statistics, persistence.

Produces the data behind the distortion-region figure (frontier plus
achieved markers) and the distortion CCDF curves: trial CSVs with one row
per coded block, region CSVs, and CCDF CSVs.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields

import numpy as np
import yaml

from pcq.core import SeededRandomSource
from pcq.pipeline import (
    BlockResult,
    DsCodingConfig,
    block_randomness,
    build_config,
    encode_decode_case2,
    run_case1_blocks,
    run_ideal_blocks,
)
from pcq.rate_region import GaussianSourcePair, bt_boundary, corner_params

_SOURCE_STREAM_BASE = 2 << 32
TRIAL_COLUMNS = ("block", "delta1", "delta2", "bits1", "bits2", "wraps1", "wraps2")
REGION_COLUMNS = ("mode", "D1", "D2")
CCDF_COLUMNS = ("source", "D", "prob")


class ConfigError(ValueError):
    """Invalid experiment configuration; ``offenses`` lists every problem."""

    def __init__(self, offenses):
        self.offenses = list(offenses)
        super().__init__("; ".join(self.offenses))


@dataclass
class ExperimentConfig:
    """Knobs of one simulation run. ``kappa1`` defaults per mode
    (1.325 for case1, 0.6 for case2)."""

    var_x1: float = 2.5
    var_x2: float = 2.5
    rho: float = 0.8
    r1: float = 1.0
    r2: float = 2.0
    mode: str = "case1"
    kappa1: float | None = None
    kappa2: float = 0.442
    m1: int = 8
    m2: int = 16
    var_d1: float | None = None
    var_d2: float | None = None
    list_size: int = 8
    n: int = 256
    blocks: int = 5000
    master_seed: int = 0
    workers: int = 1
    design_blocks: int = 12000
    ordering: str = "mc"
    out: str | None = None

    def validate(self) -> None:
        bad = []
        if self.var_x1 <= 0 or self.var_x2 <= 0:
            bad.append(f"source variances must be positive, got ({self.var_x1}, {self.var_x2})")
        if not -1 < self.rho < 1:
            bad.append(f"rho must lie in (-1, 1), got {self.rho}")
        if self.r1 <= 0 or self.r2 <= 0:
            bad.append(f"rates must be positive, got ({self.r1}, {self.r2})")
        if self.mode not in ("case1", "case2", "ideal"):
            bad.append(f"mode must be case1|case2|ideal, got {self.mode!r}")
        for name in ("m1", "m2", "n"):
            v = getattr(self, name)
            if v < 2 or (v & (v - 1)) != 0:
                bad.append(f"{name} must be a power of two >= 2, got {v}")
        if self.kappa1 is not None and self.kappa1 <= 0:
            bad.append(f"kappa1 must be positive, got {self.kappa1}")
        if self.kappa2 <= 0:
            bad.append(f"kappa2 must be positive, got {self.kappa2}")
        for name in ("var_d1", "var_d2"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                bad.append(f"{name} must be positive, got {v}")
        if self.blocks < 1:
            bad.append(f"blocks must be >= 1, got {self.blocks}")
        if self.list_size < 1:
            bad.append(f"list_size must be >= 1, got {self.list_size}")
        if self.workers < 1:
            bad.append(f"workers must be >= 1, got {self.workers}")
        if self.design_blocks < 100:
            bad.append(f"design_blocks must be >= 100, got {self.design_blocks}")
        if self.ordering not in ("mc", "nr"):
            bad.append(f"ordering must be mc|nr, got {self.ordering!r}")
        if self.master_seed < 0:
            bad.append(f"master_seed must be nonnegative, got {self.master_seed}")
        if bad:
            raise ConfigError(bad)

    @property
    def effective_kappa1(self) -> float:
        if self.kappa1 is not None:
            return self.kappa1
        return 0.6 if self.mode == "case2" else 1.325

    @property
    def source(self) -> GaussianSourcePair:
        return GaussianSourcePair(self.var_x1, self.var_x2, self.rho)

    @classmethod
    def from_file(cls, path: str, **overrides) -> "ExperimentConfig":
        with open(path) as fh:
            raw = yaml.safe_load(fh) or {}
        if not isinstance(raw, dict):
            raise ConfigError([f"config file {path} must hold a flat key-value mapping"])
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError([f"unknown config key {k!r}" for k in unknown])
        raw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**raw)


@dataclass(frozen=True)
class TrialRecord:
    """One Monte Carlo block's results; maps 1:1 to a trial CSV row."""

    block: int
    delta1: float
    delta2: float
    bits1: int
    bits2: int
    wraps1: int
    wraps2: int

    def to_row(self) -> list[str]:
        return [
            str(self.block),
            repr(self.delta1),
            repr(self.delta2),
            str(self.bits1),
            str(self.bits2),
            str(self.wraps1),
            str(self.wraps2),
        ]

    @classmethod
    def from_row(cls, row) -> "TrialRecord":
        return cls(
            block=int(row[0]),
            delta1=float(row[1]),
            delta2=float(row[2]),
            bits1=int(row[3]),
            bits2=int(row[4]),
            wraps1=int(row[5]),
            wraps2=int(row[6]),
        )


@dataclass(frozen=True)
class Summary:
    """Distortion means with standard errors."""

    mean_delta1: float
    mean_delta2: float
    se_delta1: float
    se_delta2: float
    blocks: int
    decode_ok_rate: float


def _draw_sources(cfg: DsCodingConfig, master_seed: int, block_ids) -> tuple[np.ndarray, np.ndarray]:
    n = cfg.n
    x = np.empty((len(block_ids), n, 2))
    for row, b in enumerate(block_ids):
        g = SeededRandomSource(master_seed, _SOURCE_STREAM_BASE + int(b)).generator
        x[row] = g.multivariate_normal([0.0, 0.0], cfg.src.cov, n)
    return x[..., 0], x[..., 1]


def _run_chunk(cfg: DsCodingConfig, master_seed: int, block_ids: np.ndarray):
    x1, x2 = _draw_sources(cfg, master_seed, block_ids)
    if cfg.mode == "ideal":
        res = run_ideal_blocks(cfg, x1, x2, master_seed, block_ids)
    else:
        shared = block_randomness(cfg, master_seed, block_ids)
        if cfg.mode == "case1":
            res = run_case1_blocks(cfg, x1, x2, shared)
        else:
            res = encode_decode_case2(x1, x2, cfg, shared)
    return [
        TrialRecord(
            block=int(b),
            delta1=float(res.delta1[i]),
            delta2=float(res.delta2[i]),
            bits1=res.bits1,
            bits2=res.bits2,
            wraps1=int(res.wraps1[i]),
            wraps2=int(res.wraps2[i]),
        )
        for i, b in enumerate(block_ids)
    ], float(np.mean(res.decode_ok))


def make_coding_config(exp: ExperimentConfig) -> DsCodingConfig:
    """Build the coding chain for a validated experiment configuration."""
    exp.validate()
    return build_config(
        exp.source,
        (exp.r1, exp.r2),
        exp.mode,
        n=exp.n,
        kappa=(exp.effective_kappa1, exp.kappa2),
        M=(exp.m1, exp.m2),
        var_d=(exp.var_d1, exp.var_d2),
        list_size=exp.list_size,
        design_blocks=exp.design_blocks,
        design_seed=exp.master_seed,
        ordering=exp.ordering,
    )


def run_experiment(exp: ExperimentConfig, cfg: DsCodingConfig | None = None):
    """Simulate the configured number of blocks.

    Blocks are independent with per-block substreams, so results are
    deterministic for a given master seed regardless of chunking or worker
    count. Returns (records sorted by block index, Summary).
    """
    exp.validate()
    if cfg is None:
        cfg = make_coding_config(exp)
    chunk = 256
    ids = [np.arange(lo, min(lo + chunk, exp.blocks)) for lo in range(0, exp.blocks, chunk)]
    records: list[TrialRecord] = []
    ok_rates = []
    if exp.workers == 1 or len(ids) == 1:
        for part in ids:
            recs, ok = _run_chunk(cfg, exp.master_seed, part)
            records.extend(recs)
            ok_rates.append((ok, len(part)))
    else:
        with ProcessPoolExecutor(max_workers=exp.workers) as pool:
            for part, (recs, ok) in zip(
                ids, pool.map(_run_chunk, [cfg] * len(ids), [exp.master_seed] * len(ids), ids)
            ):
                records.extend(recs)
                ok_rates.append((ok, len(part)))
    records.sort(key=lambda r: r.block)
    d1 = np.array([r.delta1 for r in records])
    d2 = np.array([r.delta2 for r in records])
    nb = len(records)
    summary = Summary(
        mean_delta1=float(d1.mean()),
        mean_delta2=float(d2.mean()),
        se_delta1=float(d1.std(ddof=1) / math.sqrt(nb)) if nb > 1 else 0.0,
        se_delta2=float(d2.std(ddof=1) / math.sqrt(nb)) if nb > 1 else 0.0,
        blocks=nb,
        decode_ok_rate=float(sum(o * w for o, w in ok_rates) / sum(w for _, w in ok_rates)),
    )
    return records, summary


def ccdf(records, which: int, grid) -> list[tuple[float, float]]:
    """Empirical complementary CDF Pr(Delta_which > D) over the given grid."""
    if not records:
        raise ValueError("no records")
    grid = list(grid)
    if not grid:
        raise ValueError("empty threshold grid")
    if which not in (1, 2):
        raise ValueError(f"source index must be 1 or 2, got {which}")
    d = np.array([r.delta1 if which == 1 else r.delta2 for r in records])
    return [(float(t), float(np.mean(d > t))) for t in grid]


def write_trials_csv(path: str, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRIAL_COLUMNS)
        for r in records:
            w.writerow(r.to_row())


def read_trials_csv(path: str) -> list[TrialRecord]:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = tuple(next(rd))
        if header != TRIAL_COLUMNS:
            raise ValueError(f"unexpected trial CSV columns {header}, want {TRIAL_COLUMNS}")
        return [TrialRecord.from_row(row) for row in rd if row]


def write_ccdf_csv(path: str, curves: dict[int, list[tuple[float, float]]]) -> None:
    """``curves`` maps source index to its (D, prob) list."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CCDF_COLUMNS)
        for source in sorted(curves):
            for d, p in curves[source]:
                w.writerow([str(source), repr(float(d)), repr(float(p))])


def emit_region_csv(
    src: GaussianSourcePair,
    r1: float,
    r2: float,
    grid_size: int,
    path: str,
    markers: dict[str, tuple[float, float]] | None = None,
) -> None:
    """Write the distortion-region boundary plus optional achieved markers.

    Byte-identical for identical inputs: rows are fully determined by the
    frontier sweep and the marker values.
    """
    frontier = bt_boundary(src, r1, r2, grid_size)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(REGION_COLUMNS)
            for d1, d2 in frontier:
                w.writerow(["boundary", repr(float(d1)), repr(float(d2))])
            for name in sorted(markers or {}):
                d1, d2 = markers[name]
                w.writerow([name, repr(float(d1)), repr(float(d2))])
    except OSError as e:
        raise OSError(f"cannot write region CSV at {path}: {e}") from e
