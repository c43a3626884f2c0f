"""Type-I precoding codebooks: two-port table and single-panel up to 32 ports.

Codebook mode 1 only, ranks 1 to 4.  Every precoder W of rank r over P
ports satisfies W^H W = (1/r) I and ||W||_F^2 = 1.  For a fixed composite
wideband index i1, the per-subband index i2 only co-phases the
second-polarization block (ranks 1 and 2).

The composite wideband index packs the standard's i11/i12/i13 vector into
one integer::

    i1 = i11 + numI11 * (i12 + numI12 * i13)

The ordering of this packing is an arbitrary but frozen choice; any tool
comparing composite PMI integers against this implementation must unpack
with the same formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .codebook_tables import (
    SUPPORTED_N1_N2,
    default_oversampling,
    rank2_i13_offsets,
    rank34_i13_offsets,
)
from .matarr import ComplexMatrixArray

__all__ = [
    "Codebook",
    "CodebookError",
    "CodebookParams",
    "TwoPortCodebook",
    "TypeOneSinglePanelCodebook",
    "dft_beam",
    "make_codebook",
    "make_two_port",
    "make_type_one_sp",
    "pack_i1",
    "unpack_i1",
    "dump_codebook",
]


class CodebookError(ValueError):
    """Raised for unsupported configurations or out-of-range indices."""


@dataclass(frozen=True)
class CodebookParams:
    n1: int
    n2: int
    o1: int
    o2: int
    num_ports: int
    rank: int


def pack_i1(i11: int, i12: int, i13: int, num_i11: int, num_i12: int) -> int:
    if not (0 <= i11 < num_i11 and 0 <= i12 < num_i12 and i13 >= 0):
        raise CodebookError(f"index component out of range: i11={i11}, i12={i12}, i13={i13}")
    return i11 + num_i11 * (i12 + num_i12 * i13)


def unpack_i1(i1: int, num_i11: int, num_i12: int) -> tuple[int, int, int]:
    if i1 < 0:
        raise CodebookError(f"i1 must be nonnegative, got {i1}")
    i11 = i1 % num_i11
    rest = i1 // num_i11
    return i11, rest % num_i12, rest // num_i12


def dft_beam(params: CodebookParams, l: int, m: int, tilde: bool = False) -> np.ndarray:
    """Beam vector: Kronecker product of horizontal and vertical DFT vectors.

    The tilde variant spans half the horizontal ports with a doubled
    phase step (used by ranks 3-4 at 16+ ports).
    """
    n1, n2, o1, o2 = params.n1, params.n2, params.o1, params.o2
    l_max = n1 * o1 // 2 if tilde else n1 * o1
    if not (0 <= l < l_max and 0 <= m < n2 * o2):
        raise CodebookError(f"beam index out of range: l={l}, m={m}")
    if tilde:
        h = np.exp(4j * math.pi * l * np.arange(n1 // 2) / (n1 * o1))
    else:
        h = np.exp(2j * math.pi * l * np.arange(n1) / (n1 * o1))
    v = np.exp(2j * math.pi * m * np.arange(n2) / (n2 * o2))
    return np.kron(h, v)


class Codebook:
    """Enumerable set of precoders addressed by (i1, i2) for one rank."""

    params: CodebookParams
    num_i11: int
    num_i12: int
    num_i13: int
    num_i2: int

    @property
    def num_i1(self) -> int:
        return self.num_i11 * self.num_i12 * self.num_i13

    def precoder_at(self, i1: int, i2: int) -> np.ndarray:
        if not 0 <= i1 < self.num_i1:
            raise CodebookError(f"i1={i1} out of range [0, {self.num_i1})")
        if not 0 <= i2 < self.num_i2:
            raise CodebookError(f"i2={i2} out of range [0, {self.num_i2})")
        return self._build(i1, i2)

    def _build(self, i1: int, i2: int) -> np.ndarray:
        raise NotImplementedError

    def stacked(self) -> np.ndarray:
        """All precoders as one (num_i1, num_i2, ports, rank) array.

        Built lazily on first use and cached; the exhaustive search and
        the dump command iterate it.
        """
        cached = getattr(self, "_stacked", None)
        if cached is None:
            cached = np.stack(
                [
                    np.stack([self._build(i1, i2) for i2 in range(self.num_i2)])
                    for i1 in range(self.num_i1)
                ]
            )
            self._stacked = cached
        return cached


class TwoPortCodebook(Codebook):
    """One- and two-port precoders (TS 38.214 Table 5.2.2.2.1-1).

    All variation lives in i2: four rank-1 entries, two rank-2 entries.
    """

    # Table 5.2.2.2.1-1, ports 3000-3001.
    _RANK1 = np.array([[[1], [1]], [[1], [1j]], [[1], [-1]], [[1], [-1j]]]) / math.sqrt(2)
    _RANK2 = np.array([[[1, 1], [1, -1]], [[1, 1], [1j, -1j]]]) / 2.0

    def __init__(self, num_ports: int, rank: int):
        if num_ports not in (1, 2):
            raise CodebookError(f"two-port codebook needs 1 or 2 ports, got {num_ports}")
        if not 1 <= rank <= num_ports:
            raise CodebookError(f"rank {rank} unsupported with {num_ports} ports")
        self.params = CodebookParams(1, 1, 1, 1, num_ports, rank)
        self.num_i11 = self.num_i12 = self.num_i13 = 1
        if num_ports == 1:
            self.num_i2 = 1
        else:
            self.num_i2 = 4 if rank == 1 else 2

    def _build(self, i1: int, i2: int) -> np.ndarray:
        if self.params.num_ports == 1:
            return np.array([[1.0 + 0j]])
        table = self._RANK1 if self.params.rank == 1 else self._RANK2
        return table[i2].astype(np.complex128)


class TypeOneSinglePanelCodebook(Codebook):
    """Single-panel codebook, codebook mode 1, ranks 1-4, up to 32 ports."""

    def __init__(self, n1: int, n2: int, rank: int, codebook_mode: int = 1):
        if codebook_mode != 1:
            raise CodebookError(f"codebook mode {codebook_mode} unsupported (mode 1 only)")
        if (n1, n2) not in SUPPORTED_N1_N2 or (n1, n2) == (1, 1):
            raise CodebookError(f"(N1, N2) = ({n1}, {n2}) is not a supported single-panel layout")
        num_ports = 2 * n1 * n2
        if not 1 <= rank <= min(num_ports, 4):
            raise CodebookError(f"rank {rank} unsupported with {num_ports} ports (1..4 only)")
        o1, o2 = default_oversampling(n1, n2)
        self.params = CodebookParams(n1, n2, o1, o2, num_ports, rank)
        self._wide = rank >= 3 and num_ports >= 16  # concatenated-beam construction
        self.num_i11 = n1 * o1 // 2 if self._wide else n1 * o1
        self.num_i12 = n2 * o2
        if rank == 1:
            self.num_i13 = 1
        elif rank == 2:
            self.num_i13 = len(rank2_i13_offsets(n1, n2))
        elif self._wide:
            self.num_i13 = 4
        else:
            self.num_i13 = len(rank34_i13_offsets(n1, n2))
        self.num_i2 = 4 if rank == 1 else 2

    def _secondary_beam(self, i11: int, i12: int, i13: int) -> np.ndarray:
        p = self.params
        offsets = (
            rank2_i13_offsets(p.n1, p.n2) if p.rank == 2 else rank34_i13_offsets(p.n1, p.n2)
        )
        k1, k2 = offsets[i13]
        l = (i11 + k1 * p.o1) % (p.n1 * p.o1)
        m = (i12 + k2 * p.o2) % (p.n2 * p.o2)
        return dft_beam(p, l, m)

    def _build(self, i1: int, i2: int) -> np.ndarray:
        p = self.params
        i11, i12, i13 = unpack_i1(i1, self.num_i11, self.num_i12)
        phi = np.exp(1j * math.pi * i2 / 2)
        if p.rank == 1:
            v = dft_beam(p, i11, i12)
            w = np.concatenate([v, phi * v])[:, None]
        elif self._wide:
            vt = dft_beam(p, i11, i12, tilde=True)
            theta = np.exp(1j * math.pi * i13 / 4)
            b1 = np.concatenate([vt, theta * vt])
            b2 = np.concatenate([vt, -theta * vt])
            if p.rank == 3:
                w = np.stack(
                    [
                        np.concatenate([b1, phi * b1]),
                        np.concatenate([b2, phi * b2]),
                        np.concatenate([b1, -phi * b1]),
                    ],
                    axis=1,
                )
            else:
                w = np.stack(
                    [
                        np.concatenate([b1, phi * b1]),
                        np.concatenate([b2, phi * b2]),
                        np.concatenate([b1, -phi * b1]),
                        np.concatenate([b2, -phi * b2]),
                    ],
                    axis=1,
                )
        else:
            v = dft_beam(p, i11, i12)
            vp = self._secondary_beam(i11, i12, i13)
            if p.rank == 2:
                cols = [
                    np.concatenate([v, phi * v]),
                    np.concatenate([vp, -phi * vp]),
                ]
            elif p.rank == 3:
                cols = [
                    np.concatenate([v, phi * v]),
                    np.concatenate([vp, phi * vp]),
                    np.concatenate([v, -phi * v]),
                ]
            else:
                cols = [
                    np.concatenate([v, phi * v]),
                    np.concatenate([vp, phi * vp]),
                    np.concatenate([v, -phi * v]),
                    np.concatenate([vp, -phi * vp]),
                ]
            w = np.stack(cols, axis=1)
        return w / math.sqrt(p.rank * p.num_ports)


def make_two_port(num_ports: int, rank: int) -> TwoPortCodebook:
    return TwoPortCodebook(num_ports, rank)


def make_type_one_sp(n1: int, n2: int, rank: int, codebook_mode: int = 1) -> TypeOneSinglePanelCodebook:
    return TypeOneSinglePanelCodebook(n1, n2, rank, codebook_mode)


def make_codebook(num_ports: int, n1: int, n2: int, rank: int) -> Codebook:
    """Pick the two-port table for <= 2 ports, the single-panel codebook above."""
    if num_ports <= 2:
        return make_two_port(num_ports, rank)
    if num_ports != 2 * n1 * n2:
        raise CodebookError(f"{num_ports} ports inconsistent with (N1, N2) = ({n1}, {n2})")
    return make_type_one_sp(n1, n2, rank)


def dump_codebook(cb: Codebook) -> str:
    """All (i1, i2) precoders in the matarr debug format, one page each,
    pages ordered i1-major."""
    stack = cb.stacked()
    pages = stack.reshape(-1, cb.params.num_ports, cb.params.rank)
    return ComplexMatrixArray.from_paged(pages).dump()
