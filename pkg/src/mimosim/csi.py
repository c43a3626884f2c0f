"""CSI feedback: exhaustive precoder search, rank selection, effective-SINR
link abstraction, MCS/TB-size selection and transport-block decode.

The search enumerates every codebook precoder.  Per rank it picks the best
per-subband co-phasing index i2 by subband capacity, accumulates wideband
capacity to pick the best composite wideband index i1, and finally selects
the rank that maximizes the achievable transport-block size after MCS
quantization.  Ties break toward the lower rank, then the lower i1, then
the lower i2; capacities within 1e-9 of the maximum count as tied, so
mathematically equivalent candidates (e.g. column-permuted precoders)
resolve to the lowest index regardless of floating-point evaluation order.

The link abstraction is exponential effective SINR with a per-MCS beta of
``max(1, 2^SE - 1) * 0.5`` (linear) and a logistic block-error curve with
0.5 dB slope around the per-MCS threshold.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .codebook import Codebook, make_codebook
from .mcs_table import BLER_SLOPE_DB, MCS_TABLE
from .mimo_sinr import IntfNormChannel, SignalChunk, SinrMatrix

__all__ = [
    "DATA_RE_PER_RB",
    "CsiFeedback",
    "PmSearchConfig",
    "PmSearch",
    "ExhaustivePmSearch",
    "capacity",
    "effective_sinr",
    "default_beta",
    "bler",
    "select_mcs_and_cqi",
    "mcs_for_sinr_matrix",
    "tb_size",
    "tb_decode_mimo",
    "feedback_scheduler",
    "codebook_factory_for_ports",
]

# Data resource elements per RB and slot (12 subcarriers x 12 data symbols;
# a declared overhead approximation).
DATA_RE_PER_RB = 144

MAX_RANK = 4
BLER_TARGET = 0.1


@dataclass
class CsiFeedback:
    """RI / PMI / CQI report plus the achievable TB size it implies."""

    ri: int
    i1: int
    i2_per_subband: list[int]
    wb_cqi: int
    mcs: int
    tb_size_bits: int
    generated_at_ms: float


@dataclass(frozen=True)
class PmSearchConfig:
    rank_limit: int = 4
    wb_update_interval_ms: float = 10.0
    sb_update_interval_ms: float = 2.0
    subband_size_rb: int = 4

    def __post_init__(self):
        if not 1 <= self.rank_limit <= MAX_RANK:
            raise ValueError(f"rank limit must be in 1..{MAX_RANK}")
        if self.wb_update_interval_ms <= 0 or self.sb_update_interval_ms <= 0:
            raise ValueError("update intervals must be positive")
        if self.sb_update_interval_ms > self.wb_update_interval_ms:
            raise ValueError("subband interval must not exceed wideband interval")
        if self.subband_size_rb < 1:
            raise ValueError("subband size must be >= 1")


def capacity(sinr: SinrMatrix, rb_range: tuple[int, int] | None = None) -> float:
    """Sum of log2(1 + SINR) over streams and the RB range [start, stop)."""
    start, stop = rb_range if rb_range is not None else (0, sinr.n_rb)
    return float(np.sum(np.log2(1.0 + sinr.sinr[:, start:stop])))


def effective_sinr(values, beta: float) -> float:
    """Exponential effective SINR: -beta * ln(mean(exp(-s / beta))).

    Computed around the minimum for numerical stability; exact for equal
    entries (fixed point).
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("effective SINR of an empty vector")
    if beta <= 0:
        raise ValueError("beta must be positive")
    m = float(v.min())
    return m - beta * math.log(float(np.mean(np.exp(-(v - m) / beta))))


def default_beta(mcs: int) -> float:
    """Per-MCS EESM beta: max(1, 2^SE - 1) * 0.5, linear."""
    se = MCS_TABLE[mcs].spectral_efficiency
    return max(1.0, 2.0 ** se - 1.0) * 0.5


def bler(eff_sinr_linear: float, mcs: int) -> float:
    """Logistic block-error rate vs the per-MCS dB threshold."""
    if eff_sinr_linear <= 0.0:
        return 1.0
    x = (10.0 * math.log10(eff_sinr_linear) - MCS_TABLE[mcs].snr_threshold_db) / BLER_SLOPE_DB
    if x >= 0:
        e = math.exp(-x)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(x))


def _cqi_for_mcs(mcs: int) -> int:
    # Coarse 16-level quantization of the MCS decision; 0 is out-of-range.
    return 1 + (mcs * 14) // (len(MCS_TABLE) - 1)


def select_mcs_and_cqi(eff_sinr_linear: float) -> tuple[int, int]:
    """Highest MCS whose modeled BLER at this effective SINR is <= 0.1.

    Below the lowest MCS: (0, 0), i.e. MCS 0 with out-of-range CQI.
    """
    for m in range(len(MCS_TABLE) - 1, -1, -1):
        if bler(eff_sinr_linear, m) <= BLER_TARGET:
            return m, _cqi_for_mcs(m)
    return 0, 0


def mcs_for_sinr_matrix(
    sinr: SinrMatrix, beta_override: float | None = None
) -> tuple[int, int, float]:
    """(mcs, cqi, effective SINR) for a SINR matrix, linearized per stream
    and RB, using each candidate MCS's own beta."""
    vec = sinr.sinr.ravel()
    for m in range(len(MCS_TABLE) - 1, -1, -1):
        eff = effective_sinr(vec, beta_override or default_beta(m))
        if bler(eff, m) <= BLER_TARGET:
            return m, _cqi_for_mcs(m), eff
    return 0, 0, effective_sinr(vec, beta_override or default_beta(0))


def tb_size(mcs: int, rank: int, n_rb: int) -> int:
    """Achievable transport-block bits in one slot.

    Floored per layer so the size is exactly linear in the rank.
    """
    return rank * int(math.floor(MCS_TABLE[mcs].spectral_efficiency * DATA_RE_PER_RB * n_rb))


def tb_decode_mimo(
    chunks: list[SignalChunk],
    mcs: int,
    rank: int,
    rng: np.random.Generator,
    beta_override: float | None = None,
) -> tuple[bool, float]:
    """Duration-weighted average over chunks, linearize, EESM, Bernoulli draw."""
    if not chunks:
        raise ValueError("no signal chunks to decode")
    for c in chunks:
        if c.sinr.rank != rank:
            raise ValueError(f"chunk rank {c.sinr.rank} differs from TB rank {rank}")
        if c.sinr.sinr.shape != chunks[0].sinr.sinr.shape:
            raise ValueError("chunks disagree on SINR matrix shape")
    total = sum(c.duration_symbols for c in chunks)
    avg = sum(c.sinr.sinr * c.duration_symbols for c in chunks) / total
    eff = effective_sinr(avg.ravel(), beta_override or default_beta(mcs))
    b = bler(eff, mcs)
    return bool(rng.random() >= b), b


def feedback_scheduler(
    cfg: PmSearchConfig, now_ms: float, last_wb_ms: float, last_sb_ms: float
) -> tuple[bool, bool]:
    """(refresh wideband, refresh subband); a WB refresh implies SB."""
    refresh_wb = now_ms - last_wb_ms >= cfg.wb_update_interval_ms
    refresh_sb = refresh_wb or (now_ms - last_sb_ms >= cfg.sb_update_interval_ms)
    return refresh_wb, refresh_sb


# ----------------------------------------------------------------------
# Exhaustive precoder search
# ----------------------------------------------------------------------


CAPACITY_TIE_TOL = 1e-9


def argmax_lowest(values: np.ndarray, axis: int = -1, tol: float = CAPACITY_TIE_TOL) -> np.ndarray:
    """Lowest index whose value lies within ``tol`` of the maximum.

    This is the documented tie-breaking rule of the exhaustive search.
    """
    m = values.max(axis=axis, keepdims=True)
    return np.argmax(values >= m - tol, axis=axis)


@functools.lru_cache(maxsize=None)
def _cached_codebook(num_ports: int, n1: int, n2: int, rank: int) -> Codebook | None:
    # Codebooks are immutable after construction, so one shared instance
    # (with its stacked-precoder cache) serves all searches in a process.
    try:
        return make_codebook(num_ports, n1, n2, rank)
    except Exception:
        return None


def codebook_factory_for_ports(num_ports: int, n1: int, n2: int):
    """rank -> Codebook (process-wide cache), or None when unsupported."""

    def factory(rank: int) -> Codebook | None:
        return _cached_codebook(num_ports, n1, n2, rank)

    return factory


def _subband_starts(n_rb: int, sb_size: int) -> np.ndarray:
    return np.arange(0, n_rb, sb_size)


def _batched_stream_sinr(h: np.ndarray, w: np.ndarray, chunk: int = 2048) -> np.ndarray:
    """Per-stream SINR for a batch of precoders.

    h: (nRB, rxPorts, P) whitened channel pages.
    w: (C, P, r) candidate precoders.
    Returns (C, nRB, r) linear SINRs from the MSE diagonal.

    Works on the effective channel HW (rxPorts is small), with one large
    matmul per chunk for BLAS; ranks 1 and 2 use closed-form MSE
    diagonals, higher ranks a batched inverse.
    """
    c, p, r = w.shape
    n_rb = h.shape[0]
    out = np.empty((c, n_rb, r))
    for lo in range(0, c, chunk):
        wc = w[lo : lo + chunk]
        cc = wc.shape[0]
        flat = wc.transpose(1, 0, 2).reshape(p, cc * r)
        hw = np.matmul(h, flat).reshape(n_rb, h.shape[1], cc, r)
        if r == 1:
            sinr = np.abs(hw[..., 0]) ** 2
            sinr = sinr.sum(axis=1).T[..., None]
        else:
            # m[k, b, i, j] = sum_q conj(hw[b, q, k, i]) hw[b, q, k, j]
            m = np.einsum("bqki,bqkj->kbij", hw.conj(), hw)
            if r == 2:
                a00 = 1.0 + m[..., 0, 0].real
                a11 = 1.0 + m[..., 1, 1].real
                det = a00 * a11 - np.abs(m[..., 0, 1]) ** 2
                sinr = np.stack([det / a11 - 1.0, det / a00 - 1.0], axis=-1)
            else:
                e = np.linalg.inv(np.eye(r) + m)
                idx = np.arange(r)
                sinr = 1.0 / e[..., idx, idx].real - 1.0
        out[lo : lo + chunk] = np.maximum(sinr, 0.0)
    return out


@dataclass
class _RankSelection:
    rank: int
    i1: int
    i2_per_subband: list[int]
    sinr: SinrMatrix
    wb_capacity: float


class PmSearch:
    """Interface for PMI/RI/CQI selection; only the exhaustive search ships."""

    def full_search(self, h_norm: IntfNormChannel, now_ms: float) -> CsiFeedback:
        raise NotImplementedError

    def subband_refresh(
        self, h_norm: IntfNormChannel, previous: CsiFeedback, now_ms: float
    ) -> CsiFeedback:
        raise NotImplementedError


class ExhaustivePmSearch(PmSearch):
    """Exhaustive enumeration of (rank, i1, per-subband i2)."""

    def __init__(self, codebook_factory, cfg: PmSearchConfig):
        self._factory = codebook_factory
        self.cfg = cfg

    # -- helpers --------------------------------------------------------

    def _best_for_rank(self, h: np.ndarray, cb: Codebook) -> _RankSelection:
        n_rb = h.shape[0]
        starts = _subband_starts(n_rb, self.cfg.subband_size_rb)
        n_sb = len(starts)
        stack = cb.stacked()  # (nI1, nI2, P, r)
        n_i1, n_i2, ports, rank = stack.shape

        sinr = _batched_stream_sinr(h, stack.reshape(n_i1 * n_i2, ports, rank))
        cap_rb = np.log2(1.0 + sinr).sum(axis=-1)  # (C, nRB)
        cap_sb = np.add.reduceat(cap_rb, starts, axis=-1).reshape(n_i1, n_i2, n_sb)

        best_i2 = argmax_lowest(cap_sb, axis=1)  # (nI1, nSb), ties to lowest i2
        wb_cap = np.take_along_axis(cap_sb, best_i2[:, None, :], axis=1)[:, 0, :].sum(axis=-1)
        i1 = int(argmax_lowest(wb_cap))  # ties to lowest i1
        i2_list = best_i2[i1]

        rb_sb = np.minimum(np.arange(n_rb) // self.cfg.subband_size_rb, n_sb - 1)
        chosen = sinr.reshape(n_i1, n_i2, n_rb, rank)[i1, i2_list[rb_sb], np.arange(n_rb)]
        return _RankSelection(
            rank=rank,
            i1=i1,
            i2_per_subband=[int(x) for x in i2_list],
            sinr=SinrMatrix(chosen.T.copy()),
            wb_capacity=float(wb_cap[i1]),
        )

    # -- public API ------------------------------------------------------

    def full_search(self, h_norm: IntfNormChannel, now_ms: float) -> CsiFeedback:
        h = h_norm.h.paged
        n_rb, rx_ports = h_norm.h.pages, h_norm.h.rows
        max_rank = min(self.cfg.rank_limit, rx_ports, h_norm.h.cols, MAX_RANK)
        best: tuple[int, CsiFeedback] | None = None
        for rank in range(1, max_rank + 1):
            cb = self._factory(rank)
            if cb is None:
                continue
            sel = self._best_for_rank(h, cb)
            mcs, cqi, _ = mcs_for_sinr_matrix(sel.sinr)
            tb = tb_size(mcs, rank, n_rb)
            if best is None or tb > best[0]:
                best = (
                    tb,
                    CsiFeedback(
                        ri=rank,
                        i1=sel.i1,
                        i2_per_subband=sel.i2_per_subband,
                        wb_cqi=cqi,
                        mcs=mcs,
                        tb_size_bits=tb,
                        generated_at_ms=now_ms,
                    ),
                )
        if best is None:
            raise ValueError("no codebook available for any rank")
        return best[1]

    def subband_refresh(
        self, h_norm: IntfNormChannel, previous: CsiFeedback, now_ms: float
    ) -> CsiFeedback:
        """Re-optimize only the per-subband i2 for the held rank and i1."""
        h = h_norm.h.paged
        n_rb = h_norm.h.pages
        cb = self._factory(previous.ri)
        starts = _subband_starts(n_rb, self.cfg.subband_size_rb)
        n_sb = len(starts)
        row = cb.stacked()[previous.i1]  # (nI2, P, r)

        sinr = _batched_stream_sinr(h, row)  # (nI2, nRB, r)
        cap_rb = np.log2(1.0 + sinr).sum(axis=-1)
        cap_sb = np.add.reduceat(cap_rb, starts, axis=-1)  # (nI2, nSb)
        i2_list = argmax_lowest(cap_sb, axis=0)

        rb_sb = np.minimum(np.arange(n_rb) // self.cfg.subband_size_rb, n_sb - 1)
        chosen = sinr[i2_list[rb_sb], np.arange(n_rb)]
        mcs, cqi, _ = mcs_for_sinr_matrix(SinrMatrix(chosen.T.copy()))
        return CsiFeedback(
            ri=previous.ri,
            i1=previous.i1,
            i2_per_subband=[int(x) for x in i2_list],
            wb_cqi=cqi,
            mcs=mcs,
            tb_size_bits=tb_size(mcs, previous.ri, n_rb),
            generated_at_ms=now_ms,
        )
