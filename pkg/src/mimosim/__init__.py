"""Closed-loop single-user MIMO link simulator.

Building blocks: paged complex matrix kernels (:mod:`mimosim.matarr`),
planar arrays and a synthetic geometric channel
(:mod:`mimosim.antenna_channel`), Type-I precoding codebooks
(:mod:`mimosim.codebook`), MMSE-IRC per-stream SINR
(:mod:`mimosim.mimo_sinr`), CSI feedback construction (:mod:`mimosim.csi`),
the slot-driven simulator (:mod:`mimosim.simlink`) and the campaign CLI
(:mod:`mimosim.cli`).
"""

from .matarr import ComplexMatrixArray, DecompositionError, MatrixArrayError

__all__ = [
    "ComplexMatrixArray",
    "DecompositionError",
    "MatrixArrayError",
]

__version__ = "0.1.0"
