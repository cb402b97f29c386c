"""Multilevel polar code engine for shaped quantization with side information.

Per bit level of the natural symbol labeling, a binary polar code over the
transform x = u F^(x log2 n) (non-bit-reversed) is run with successive
cancellation list (SCL) processing. Each synthesized index carries one of
three roles:

``frozen``
    pinned to 0 on both sides; chosen as the indices least predictable from
    the encoder's observation, so pinning costs nothing under dithering.
``info``
    branch-and-prune quantization decisions emitted as message bits; chosen
    as the indices the side-information decoder cannot infer.
``shaped``
    randomized-rounding draws from the synthesized-bit posterior, shared
    with the decoder through a common pseudo-random stream; the decoder
    re-estimates them by list search against its side-information
    posteriors. These indices are reliable for the side-information channel,
    which is what makes the Wyner-Ziv nesting work.

The surviving list is passed across levels, conditioning each level's
per-symbol posteriors on the lower-level decisions of each path.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy.special import expit, log_expit

ACT_FROZEN = 0
ACT_INFO = 1
ACT_SHAPED = 2

_W_FLOOR = 1e-297


def load_reliability_sequence(n: int) -> np.ndarray:
    """Universal reliability order truncated to block length n.

    Indices sorted least reliable first; entries >= n are dropped from the
    length-1024 master sequence, preserving order.
    """
    if n < 2 or (n & (n - 1)) != 0 or n > 1024:
        raise ValueError(f"block length must be a power of two in [2, 1024], got {n}")
    text = resources.files("pcq.data").joinpath("nr_reliability_1024.txt").read_text()
    seq = np.array([int(line) for line in text.split()], dtype=np.int64)
    return seq[seq < n]


def polar_transform(bits) -> np.ndarray:
    """Apply u -> u F^(x log2 n) over GF(2) along the last axis.

    Non-bit-reversed ordering; the transform is an involution.
    """
    x = np.array(bits, dtype=np.uint8, copy=True)
    n = x.shape[-1]
    if n < 1 or (n & (n - 1)) != 0:
        raise ValueError(f"length must be a power of two, got {n}")
    lead = x.shape[:-1]
    h = 1
    while h < n:
        x = x.reshape(lead + (n // (2 * h), 2 * h))
        x[..., :h] ^= x[..., h:]
        x = x.reshape(lead + (n,))
        h *= 2
    return x


@dataclass(frozen=True)
class PolarLevelSpec:
    """Index sets of one bit level's code.

    ``prf_width`` optionally holds per-index widths (log-odds domain) for the
    decoder's randomized-rounding consistency metric, calibrated from the
    design Monte Carlo.
    """

    n: int
    frozen: np.ndarray
    info: np.ndarray
    shaped: np.ndarray
    reliability_order: np.ndarray = field(repr=False)
    prf_width: np.ndarray | None = field(default=None, repr=False)
    prf_slope: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.n < 2 or (self.n & (self.n - 1)) != 0:
            raise ValueError(f"block length must be a power of two, got {self.n}")
        union = np.concatenate([self.frozen, self.info, self.shaped])
        if len(union) != self.n or len(np.unique(union)) != self.n:
            raise ValueError("frozen/info/shaped must partition the index range")

    @property
    def actions(self) -> np.ndarray:
        act = np.full(self.n, ACT_FROZEN, dtype=np.uint8)
        act[self.info] = ACT_INFO
        act[self.shaped] = ACT_SHAPED
        return act

    @property
    def tx_rate(self) -> float:
        return len(self.info) / self.n


@dataclass(frozen=True)
class MultilevelPolarSpec:
    """Per-level codes, least-significant bit level first (natural labeling)."""

    levels: tuple[PolarLevelSpec, ...]
    list_size: int

    def __post_init__(self):
        if self.list_size < 1:
            raise ValueError("list size must be >= 1")
        if not self.levels:
            raise ValueError("need at least one level")
        n = self.levels[0].n
        if any(l.n != n for l in self.levels):
            raise ValueError("all levels must share the block length")

    @property
    def n(self) -> int:
        return self.levels[0].n

    @property
    def num_levels(self) -> int:
        return len(self.levels)

    @property
    def message_bits(self) -> int:
        return int(sum(len(l.info) for l in self.levels))

    @property
    def total_rate(self) -> float:
        return self.message_bits / self.n

    @property
    def has_shaped(self) -> bool:
        return any(len(l.shaped) for l in self.levels)


def _f_llr(a, b):
    # exact check-node combine: llr of the xor of two bits
    return np.logaddexp(0.0, a + b) - np.logaddexp(a, b)


def _g_llr(a, b, c_bits):
    return b + (1.0 - 2.0 * c_bits) * a


def _logp_bit(llr, bits):
    # log posterior of the chosen bit under llr = log(P0/P1)
    s = np.where(bits == 1, llr, -llr)
    return -np.logaddexp(0.0, s)


class _SclState:
    """Path-aligned arrays plus the metric list; permuted on every prune."""

    def __init__(self, c: int, list_size: int):
        self.C = c
        self.L = list_size
        self.metrics = np.full((c, list_size), -np.inf)
        self.metrics[:, 0] = 0.0
        self.alive = 1
        self.persistent: list[np.ndarray] = []
        self.stack: list[np.ndarray] = []
        self._rows = np.arange(c)[:, None]

    def permute(self, parent: np.ndarray) -> None:
        for arr in self.persistent:
            arr[...] = arr[self._rows, parent]
        for arr in self.stack:
            arr[...] = arr[self._rows, parent]

    def branch(self, logp0: np.ndarray, logp1: np.ndarray) -> np.ndarray:
        """Extend every path with both bit values, keep the best L children.

        Candidate order is (path, bit), so the stable sort breaks ties by
        path index first.
        """
        c, L = logp0.shape
        cand = np.empty((c, 2 * L))
        cand[:, 0::2] = self.metrics + logp0
        cand[:, 1::2] = self.metrics + logp1
        order = np.argsort(-cand, axis=1, kind="stable")[:, :L]
        parent = order >> 1
        bits = (order & 1).astype(np.uint8)
        self.permute(parent)
        self.metrics = np.take_along_axis(cand, order, axis=1)
        self.alive = min(2 * self.alive, self.L)
        return bits

    def extend(self, bits: np.ndarray, llr0: np.ndarray) -> np.ndarray:
        self.metrics = self.metrics + _logp_bit(llr0, bits)
        return bits


def _run_level(state: _SclState, leaf_llr: np.ndarray, handler) -> np.ndarray:
    """SC recursion over one level; returns codeword-domain bits [C, L, n]."""

    def rec(lam, base):
        w = lam.shape[-1]
        if w == 1:
            return handler(base, lam[:, :, 0])[:, :, None]
        h = w // 2
        mu_f = _f_llr(lam[..., :h], lam[..., h:])
        state.stack.append(lam)
        c_bits = rec(mu_f, base)
        state.stack.pop()
        mu_g = _g_llr(lam[..., :h], lam[..., h:], c_bits)
        state.stack.append(c_bits)
        d_bits = rec(mu_g, base + h)
        state.stack.pop()
        return np.concatenate([c_bits ^ d_bits, d_bits], axis=-1)

    return rec(leaf_llr, 0)


def _level_leaf_llrs(weights: np.ndarray, sym: np.ndarray, level: int, M: int) -> np.ndarray:
    """Per-path channel llrs of bit `level` given each path's lower bits.

    ``weights`` is [C, n, M] unnormalized symbol likelihoods; ``sym`` is the
    [C, L, n] accumulated lower-bit symbol values.
    """
    C, n, _ = weights.shape
    low_sz = 1 << level
    grouped = weights.reshape(C, n, M // (2 * low_sz), 2, low_sz).sum(axis=2)
    low = (sym & (low_sz - 1)).astype(np.int64)
    rows = np.arange(C)[:, None, None]
    cols = np.arange(n)[None, None, :]
    g0 = grouped[rows, cols, 0, low]
    g1 = grouped[rows, cols, 1, low]
    return np.log(np.maximum(g0, _W_FLOOR)) - np.log(np.maximum(g1, _W_FLOOR))


def scl_quantize(
    weights: np.ndarray,
    spec: MultilevelPolarSpec,
    r_uniforms: np.ndarray,
    shaped_mode: str = "draw",
    return_all: bool = False,
):
    """Shaped SCL quantization encoding of a batch of blocks.

    Parameters
    ----------
    weights : ndarray [C, n, M]
        Unnormalized per-symbol selection weights (shaping posterior).
    spec : MultilevelPolarSpec
        Level structure; M must equal 2**num_levels.
    r_uniforms : ndarray [C, num_levels, n]
        Shared randomized-rounding uniforms (the decoder regenerates them).
    shaped_mode : {"draw", "explore"}
        "draw" extends every path by its randomized-rounding draw, which
        realizes the shaping distribution and lets the decoder reproduce the
        draws from the shared stream. "explore" branches shaped indices
        while the list has room, turning an exhaustive list into an exact
        maximum-posterior search (verification mode).

    Returns
    -------
    symbols : ndarray [C, n] int64 — alphabet indices of the best path.
    message : ndarray [C, message_bits] uint8 — concatenated info bits.
    metric : ndarray [C] — best-path log posterior.
    """
    if shaped_mode not in ("draw", "explore"):
        raise ValueError(f"unknown shaped_mode {shaped_mode!r}")
    C, n, M = weights.shape
    if M != 1 << spec.num_levels:
        raise ValueError("alphabet size must be 2**num_levels")
    if n != spec.n:
        raise ValueError("weight table block length does not match the level stack")
    L = spec.list_size
    state = _SclState(C, L)
    sym = np.zeros((C, L, n), dtype=np.uint8)
    state.persistent.append(sym)
    records = []

    for lev, lvl in enumerate(spec.levels):
        actions = lvl.actions
        leaf_llr = _level_leaf_llrs(weights, sym, lev, M)
        rec_arr = np.zeros((C, L, len(lvl.info)), dtype=np.uint8)
        state.persistent.append(rec_arr)
        records.append(rec_arr)
        r_lev = r_uniforms[:, lev, :]
        ptr = [0]

        def handler(i, llr0, actions=actions, r_lev=r_lev, ptr=ptr, rec_arr=rec_arr):
            act = actions[i]
            if act == ACT_FROZEN:
                bits = np.zeros_like(llr0, dtype=np.uint8)
                return state.extend(bits, llr0)
            if act == ACT_INFO:
                bits = state.branch(_logp_bit(llr0, 0), _logp_bit(llr0, 1))
                rec_arr[:, :, ptr[0]] = bits
                ptr[0] += 1
                return bits
            # shaped: randomized rounding, or exploration while the list has room
            if shaped_mode == "explore" and 2 * state.alive <= L:
                return state.branch(_logp_bit(llr0, 0), _logp_bit(llr0, 1))
            p1 = expit(-llr0)
            bits = (r_lev[:, i][:, None] < p1).astype(np.uint8)
            return state.extend(bits, llr0)

        cw = _run_level(state, leaf_llr, handler)
        sym |= cw << lev

    best = np.argmax(state.metrics, axis=1)
    rows = np.arange(C)
    symbols = sym[rows, best].astype(np.int64)
    message = (
        np.concatenate([r[rows, best] for r in records], axis=1)
        if spec.message_bits
        else np.zeros((C, 0), dtype=np.uint8)
    )
    if return_all:
        return symbols, message, state.metrics[rows, best], state
    return symbols, message, state.metrics[rows, best]


def scl_decode(
    weights: np.ndarray | None,
    message: np.ndarray,
    spec: MultilevelPolarSpec,
    r_uniforms: np.ndarray | None = None,
    s_prf: float = 0.2,
) -> np.ndarray:
    """Reconstruct symbol indices from the message and side information.

    Frozen bits are pinned to 0 and info bits to the received message;
    shaped bits are searched over the list, each branch scored by the
    probability that the shared randomized-rounding draw produced it: a
    logistic in the gap between the (slope-corrected) decoder posterior
    log-odds and the draw threshold. Per-index widths and slopes come from
    ``PolarLevelSpec.prf_width``/``prf_slope`` when calibrated (falling back
    to the scalar ``s_prf`` and unit slope).

    With no shaped indices the codeword is algebraic in the known bits and
    the side information is ignored.
    """
    if message.ndim != 2 or message.shape[1] != spec.message_bits:
        raise ValueError(
            f"message must be [blocks, {spec.message_bits}], got {message.shape}"
        )
    C = message.shape[0]
    n = spec.n
    splits = np.cumsum([len(l.info) for l in spec.levels])[:-1]
    msg_parts = np.split(message, splits, axis=1)

    if not spec.has_shaped:
        sym = np.zeros((C, n), dtype=np.int64)
        for lev, lvl in enumerate(spec.levels):
            u = np.zeros((C, n), dtype=np.uint8)
            # info bits are recorded at the encoder in ascending index order
            u[:, lvl.info] = msg_parts[lev]
            sym |= polar_transform(u).astype(np.int64) << lev
        return sym

    if weights is None:
        raise ValueError("side-information weights required when shaped bits exist")
    if s_prf <= 0:
        raise ValueError("s_prf must be positive")
    M = 1 << spec.num_levels
    L = spec.list_size
    state = _SclState(C, L)
    sym = np.zeros((C, L, n), dtype=np.uint8)
    state.persistent.append(sym)

    for lev, lvl in enumerate(spec.levels):
        actions = lvl.actions
        leaf_llr = _level_leaf_llrs(weights, sym, lev, M)
        msg_lev = msg_parts[lev]
        r_lev = r_uniforms[:, lev, :]
        widths = lvl.prf_width if lvl.prf_width is not None else np.full(n, s_prf)
        slopes = lvl.prf_slope if lvl.prf_slope is not None else np.ones(n)
        ptr = [0]

        def handler(i, llr0, actions=actions, msg_lev=msg_lev, r_lev=r_lev, ptr=ptr, widths=widths, slopes=slopes):
            act = actions[i]
            if act == ACT_FROZEN:
                bits = np.zeros_like(llr0, dtype=np.uint8)
                return state.extend(bits, llr0)
            if act == ACT_INFO:
                bits = np.broadcast_to(
                    msg_lev[:, ptr[0]][:, None], llr0.shape
                ).astype(np.uint8)
                ptr[0] += 1
                return state.extend(bits, llr0)
            lam_r = _logit(r_lev[:, i][:, None])
            t = (slopes[i] * (-llr0) - lam_r) / widths[i]
            return state.branch(log_expit(-t), log_expit(t))

        cw = _run_level(state, leaf_llr, handler)
        sym |= cw << lev

    best = np.argmax(state.metrics, axis=1)
    return sym[np.arange(C), best].astype(np.int64)


def _logit(p):
    p = np.clip(p, 1e-12, 1.0 - 1e-12)
    return np.log(p) - np.log1p(-p)


def genie_sc_log_odds(weights: np.ndarray, symbols: np.ndarray) -> np.ndarray:
    """Per-index synthesized-bit log-odds under genie-aided SC.

    Runs SC with every decision forced to the true synthesized bits and
    records log(P1/P0) at each index. Returns [num_levels, blocks, n].
    """
    C, n, M = weights.shape
    m = M.bit_length() - 1
    out = np.zeros((m, C, n))
    sym = symbols.astype(np.uint8)[:, None, :]
    state = _SclState(C, 1)
    for lev in range(m):
        leaf_llr = _level_leaf_llrs(weights, sym, lev, M)
        u_true = polar_transform(((symbols >> lev) & 1).astype(np.uint8))

        def handler(i, llr0, lev=lev, u_true=u_true):
            out[lev, :, i] = -llr0[:, 0]
            return u_true[:, i][:, None].astype(np.uint8)

        _run_level(state, leaf_llr, handler)
    return out


def genie_sc_entropies(weights: np.ndarray, symbols: np.ndarray) -> np.ndarray:
    """Per-index conditional entropy estimates under genie-aided SC.

    Averages the binary entropy of each index's genie posterior over the
    batch. Returns [num_levels, n].
    """
    lam = genie_sc_log_odds(weights, symbols)
    p1 = np.clip(expit(lam), 1e-15, 1 - 1e-15)
    return np.mean(-(p1 * np.log2(p1) + (1 - p1) * np.log2(1 - p1)), axis=1)


def symbol_bit_entropies(weights: np.ndarray, symbols: np.ndarray) -> np.ndarray:
    """Direct estimate of H(B_level | lower bits, observation) per level."""
    C, n, M = weights.shape
    m = M.bit_length() - 1
    out = np.zeros(m)
    for lev in range(m):
        low_sz = 1 << lev
        grouped = weights.reshape(C, n, M // (2 * low_sz), 2, low_sz).sum(axis=2)
        low = (symbols & (low_sz - 1)).astype(np.int64)
        rows = np.arange(C)[:, None]
        cols = np.arange(n)[None, :]
        g0 = grouped[rows, cols, 0, low]
        g1 = grouped[rows, cols, 1, low]
        p1 = np.clip(g1 / np.maximum(g0 + g1, _W_FLOOR), 1e-15, 1 - 1e-15)
        out[lev] = float(np.mean(-(p1 * np.log2(p1) + (1 - p1) * np.log2(1 - p1))))
    return out


@dataclass(frozen=True)
class LevelStats:
    """Monte Carlo channel statistics for one encoder's level stack."""

    enc_index_entropy: np.ndarray  # [m, n] quantization channel, genie SC
    side_index_entropy: np.ndarray | None  # [m, n] side-information channel
    enc_level_entropy: np.ndarray  # [m] direct per-symbol estimate
    side_level_entropy: np.ndarray | None


def estimate_level_stats(
    enc_weights: np.ndarray,
    symbols: np.ndarray,
    side_weights: np.ndarray | None = None,
) -> LevelStats:
    """Estimate per-index and per-level entropies from sampled channel tables.

    ``enc_weights``/``side_weights`` are [B, n, M] likelihood tables for the
    quantization and side-information channels of the same ``symbols``
    (drawn from the ideal shaping sampler); B*n is the trial count.
    """
    if enc_weights.shape[0] * enc_weights.shape[1] < 1000:
        raise ValueError("need at least 1000 symbol trials")
    hq = genie_sc_entropies(enc_weights, symbols)
    hq_lev = symbol_bit_entropies(enc_weights, symbols)
    hs = hs_lev = None
    if side_weights is not None:
        hs = genie_sc_entropies(side_weights, symbols)
        hs_lev = symbol_bit_entropies(side_weights, symbols)
    return LevelStats(hq, hs, hq_lev, hs_lev)


def design_level_sets(
    n: int,
    quant_bits: int,
    info_bits: int,
    enc_entropy: np.ndarray | None = None,
    side_entropy: np.ndarray | None = None,
    ordering: str = "mc",
) -> PolarLevelSpec:
    """Partition one level's indices into frozen / info / shaped sets.

    ``quant_bits`` is the level's quantization rate times n: that many
    indices are left free (info + shaped); the n - quant_bits least
    predictable indices for the quantization channel are frozen. Of the free
    indices, the ``info_bits`` least reliable for the side-information
    decoder are transmitted; the rest are shaped (decoder-inferable).

    ``ordering="mc"`` ranks by the supplied Monte Carlo entropies;
    ``ordering="nr"`` uses the universal reliability sequence for both
    channels.
    """
    if not 0 <= info_bits <= quant_bits <= n:
        raise ValueError(
            f"need 0 <= info_bits <= quant_bits <= n, got ({info_bits}, {quant_bits}, {n})"
        )
    if ordering == "nr":
        order = load_reliability_sequence(n)  # least reliable first
        rel_rank_q = rel_rank_s = np.argsort(order, kind="stable")
    elif ordering == "mc":
        if enc_entropy is None:
            raise ValueError("mc ordering requires encoder-channel entropies")
        # least reliable = highest entropy; rank 0 = least reliable
        rel_rank_q = np.argsort(np.argsort(-enc_entropy, kind="stable"), kind="stable")
        se = side_entropy if side_entropy is not None else enc_entropy
        rel_rank_s = np.argsort(np.argsort(-se, kind="stable"), kind="stable")
    else:
        raise ValueError(f"unknown ordering {ordering!r}")

    frozen = np.sort(np.argsort(rel_rank_q, kind="stable")[: n - quant_bits])
    free = np.setdiff1d(np.arange(n), frozen)
    free_by_side = free[np.argsort(rel_rank_s[free], kind="stable")]
    info = np.sort(free_by_side[:info_bits])
    shaped = np.sort(free_by_side[info_bits:])
    order_used = np.argsort(rel_rank_q, kind="stable")
    return PolarLevelSpec(
        n=n, frozen=frozen, info=info, shaped=shaped, reliability_order=order_used
    )


def design_nested_spec(
    stats: LevelStats,
    total_tx_bits: int,
    list_size: int,
    prf_width: np.ndarray | None = None,
    prf_slope: np.ndarray | None = None,
    ordering: str = "mc",
    safety_freeze: int = 0,
) -> MultilevelPolarSpec:
    """Design the full level stack of a nested (Wyner-Ziv) code.

    Frozen sets follow each level's quantization-rate count; the transmitted
    set is chosen globally across levels as the ``total_tx_bits`` free
    indices least reliable for the side-information decoder, which leaves
    the most decoder-inferable indices shaped. Falls back to per-level
    largest-remainder allocation under ``ordering="nr"`` (the universal
    sequence carries no per-index side statistics).

    ``safety_freeze`` additionally pins the that many shaped indices with the
    worst side-information reliability, trading a little quantization rate
    for a decode-failure margin at finite length.
    """
    if stats.side_index_entropy is None:
        raise ValueError("nested design requires side-information statistics")
    m, n = stats.enc_index_entropy.shape
    if ordering == "nr":
        quant, tx = allocate_level_counts(
            stats.enc_level_entropy, stats.side_level_entropy, n, total_tx_bits
        )
        levels = tuple(
            dataclasses.replace(
                design_level_sets(n, int(q), int(t), ordering="nr"),
                prf_width=None if prf_width is None else prf_width[lev],
                prf_slope=None if prf_slope is None else prf_slope[lev],
            )
            for lev, (q, t) in enumerate(zip(quant, tx))
        )
    else:
        quant = np.clip(
            np.rint(n * np.clip(1.0 - stats.enc_level_entropy, 0.0, 1.0)), 0, n
        ).astype(np.int64)
        if int(quant.sum()) < total_tx_bits:
            raise ValueError("message bits exceed the total quantization budget")
        frozen = []
        free_mask = np.zeros((m, n), dtype=bool)
        for lev in range(m):
            order = np.argsort(-stats.enc_index_entropy[lev], kind="stable")
            fr = np.sort(order[: n - quant[lev]])
            frozen.append(fr)
            free_mask[lev] = True
            free_mask[lev, fr] = False
        flat = np.argsort(-stats.side_index_entropy.ravel(), kind="stable")
        info_mask = np.zeros((m, n), dtype=bool)
        picked = 0
        shaped_seen = 0
        frozen_mask = ~free_mask
        for idx in flat:
            lev, i = divmod(int(idx), n)
            if not free_mask[lev, i]:
                continue
            if picked < total_tx_bits:
                info_mask[lev, i] = True
                picked += 1
            elif shaped_seen < safety_freeze:
                frozen_mask[lev, i] = True
                shaped_seen += 1
            else:
                break
        if picked < total_tx_bits:
            raise ValueError("not enough free indices for the message bits")
        levels = tuple(
            PolarLevelSpec(
                n=n,
                frozen=np.where(frozen_mask[lev])[0],
                info=np.where(info_mask[lev])[0],
                shaped=np.where(free_mask[lev] & ~info_mask[lev] & ~frozen_mask[lev])[0],
                reliability_order=np.argsort(-stats.enc_index_entropy[lev], kind="stable"),
                prf_width=None if prf_width is None else prf_width[lev],
                prf_slope=None if prf_slope is None else prf_slope[lev],
            )
            for lev in range(m)
        )
    return MultilevelPolarSpec(levels, list_size)


def _largest_remainder(raw: np.ndarray, total: int) -> np.ndarray:
    raw = np.maximum(raw, 0.0)
    s = raw.sum()
    scaled = raw * (total / s) if s > 0 else np.full_like(raw, total / len(raw))
    base = np.floor(scaled).astype(np.int64)
    short = total - base.sum()
    order = np.argsort(-(scaled - base), kind="stable")
    base[order[:short]] += 1
    return base


def allocate_level_counts(
    enc_level_entropy: np.ndarray,
    side_level_entropy: np.ndarray | None,
    n: int,
    total_tx_bits: int,
    quant_scale: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Integer per-level (quantization bits, transmitted bits).

    Quantization bits follow n*(1 - H(B|lower, X'))*quant_scale per level.
    Transmitted bits split ``total_tx_bits`` across levels proportionally to
    the side-information entropy gap (full rate when no side information),
    rounded by largest remainder and clamped to the quantization bits.
    """
    m = len(enc_level_entropy)
    quant = np.clip(
        np.rint(n * np.clip(1.0 - enc_level_entropy, 0.0, 1.0) * quant_scale), 0, n
    ).astype(np.int64)
    if side_level_entropy is None:
        # full rate: every free bit is transmitted. Any mismatch between the
        # entropy-implied free bits and the budget is settled at the
        # least-significant levels, where a forced decision costs only one
        # alphabet step rather than half the interval.
        tx = quant.copy()
        deficit = int(tx.sum()) - total_tx_bits
        lev = 0
        while deficit > 0 and lev < m:
            take = min(deficit, int(tx[lev]))
            tx[lev] -= take
            deficit -= take
            lev += 1
        lev = 0
        while deficit < 0 and lev < m:
            give = min(-deficit, n - int(tx[lev]))
            tx[lev] += give
            deficit += give
            lev += 1
        if deficit:
            raise ValueError("message bits exceed the level capacity")
        quant = tx.copy()
        return quant, tx
    gap = np.clip(np.asarray(side_level_entropy) - np.asarray(enc_level_entropy), 0.0, 1.0)
    tx = _largest_remainder(gap + 1e-12, total_tx_bits)
    # clamp to the quantization budget, pushing overflow to levels with slack
    for _ in range(m * 4):
        over = tx - quant
        if (over <= 0).all():
            break
        surplus = int(over[over > 0].sum())
        tx = np.minimum(tx, quant)
        slack = quant - tx
        room = np.where(slack > 0)[0]
        if not len(room):
            raise ValueError("transmitted bits exceed the total quantization budget")
        give = _largest_remainder(slack[room].astype(float), min(surplus, int(slack.sum())))
        tx[room] += give
    if tx.sum() != total_tx_bits:
        raise ValueError("could not allocate the requested message bits")
    return quant, tx
