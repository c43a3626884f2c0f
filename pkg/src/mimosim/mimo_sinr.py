"""Interference covariance, whitening and MSE-based per-stream SINR.

The receiver model is linear MMSE with interference rejection combining.
Per resource block, the noise-plus-interference covariance W is
accumulated from interfering signals, the signal channel is whitened with
the Cholesky factor of W (Hn = L^-1 H), and the per-stream SINR under a
candidate precoder P follows from the MSE matrix

    E = (I + P^H Hn^H Hn P)^-1,     SINR_l = 1 / E[l, l] - 1

(the unbiased form: one less than the biased estimate).  No averaging
happens here; signal chunks are combined later by the decoder.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matarr import ComplexMatrixArray, MatrixArrayError

__all__ = [
    "CovarianceSet",
    "IntfNormChannel",
    "SinrMatrix",
    "SignalChunk",
    "noise_covariance",
    "add_interference",
    "whiten_channel",
    "compute_sinr",
    "siso_rx_psd",
    "dummy_precoder",
    "constant_precoder",
]


@dataclass
class CovarianceSet:
    """Noise-plus-interference covariance, one rxPorts x rxPorts page per RB."""

    cov: ComplexMatrixArray


@dataclass
class IntfNormChannel:
    """Interference-whitened channel L^-1 H, one rxPorts x txPorts page per RB."""

    h: ComplexMatrixArray


@dataclass
class SinrMatrix:
    """Per-stream, per-RB linear SINR (rank x nRB)."""

    sinr: np.ndarray

    @property
    def rank(self) -> int:
        return self.sinr.shape[0]

    @property
    def n_rb(self) -> int:
        return self.sinr.shape[1]


@dataclass
class SignalChunk:
    """One received signal interval: its SINR, duration and covariance."""

    sinr: SinrMatrix
    duration_symbols: int
    interference_cov: CovarianceSet

    def __post_init__(self):
        if self.duration_symbols < 1:
            raise ValueError("chunk duration must be >= 1 symbol")


def noise_covariance(noise_power_per_rb: float, rx_ports: int, n_rb: int) -> CovarianceSet:
    """White-noise covariance sigma^2 I per RB."""
    if noise_power_per_rb <= 0:
        raise ValueError("noise power must be positive")
    eye = noise_power_per_rb * np.eye(rx_ports)
    return CovarianceSet(ComplexMatrixArray.from_paged(np.broadcast_to(eye, (n_rb, rx_ports, rx_ports))))


def constant_precoder(matrix: np.ndarray, n_rb: int) -> ComplexMatrixArray:
    """Replicate one ports x rank precoder over all RBs."""
    m = np.asarray(matrix, dtype=np.complex128)
    return ComplexMatrixArray.from_paged(np.broadcast_to(m, (n_rb, *m.shape)))


def add_interference(
    acc: CovarianceSet, h: ComplexMatrixArray, p: ComplexMatrixArray
) -> CovarianceSet:
    """acc + (H P)(H P)^H per RB; pages are re-Hermitianized to suppress
    floating-point drift across long accumulations."""
    hp = h.page_multiply(p).paged
    outer = np.matmul(hp, hp.conj().transpose(0, 2, 1))
    if outer.shape != acc.cov.paged.shape:
        raise MatrixArrayError(
            f"covariance shape {acc.cov.paged.shape} does not accept {outer.shape}"
        )
    total = acc.cov.paged + outer
    total = 0.5 * (total + total.conj().transpose(0, 2, 1))
    return CovarianceSet(ComplexMatrixArray.from_paged(total))


def whiten_channel(h: ComplexMatrixArray, w: CovarianceSet) -> IntfNormChannel:
    """L^-1 H per RB with W = L L^H; fails on degenerate covariance."""
    l = w.cov.cholesky_llt()
    li = l.invert_lower_triangular()
    return IntfNormChannel(li.page_multiply(h))


def compute_sinr(h_norm: IntfNormChannel, p: ComplexMatrixArray) -> SinrMatrix:
    """Per-stream unbiased MMSE SINR under precoder pages p."""
    rank = p.cols
    hp = h_norm.h.page_multiply(p)
    gram = hp.hermitian().page_multiply(hp).paged  # (nRB, rank, rank)
    e = ComplexMatrixArray.from_paged(gram + np.eye(rank)).invert_hermitian_pd().paged
    diag = np.stack([e[:, l, l].real for l in range(rank)], axis=0)  # (rank, nRB)
    return SinrMatrix(np.maximum(1.0 / diag - 1.0, 0.0))


def siso_rx_psd(h: ComplexMatrixArray, p: ComplexMatrixArray) -> np.ndarray:
    """Per-RB received power: sum of Re diag((HP)^H (HP))."""
    hp = h.page_multiply(p).paged
    return np.einsum("pij,pij->p", hp.conj(), hp).real


def dummy_precoder(ports: int, rank: int) -> np.ndarray:
    """First `rank` identity columns scaled 1/sqrt(rank); used before any
    feedback exists.  Satisfies the codebook power constraint."""
    if rank > ports:
        raise ValueError(f"rank {rank} exceeds {ports} ports")
    return np.eye(ports, rank, dtype=np.complex128) / np.sqrt(rank)
