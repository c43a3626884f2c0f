"""Reviewed constants transcribed from TS 38.214 Rel-15, Section 5.2.2.2.1.

Each table below cites the cell it was copied from; the per-row unit tests
live in tests/test_codebook.py.  Beam offsets are stored in oversampling
units (multiples of O1 / O2) and scaled at the point of use.
"""

from __future__ import annotations

__all__ = [
    "SUPPORTED_N1_N2",
    "PORT_LAYOUTS",
    "default_oversampling",
    "rank2_i13_offsets",
    "rank34_i13_offsets",
]

# TS 38.214 Table 5.2.2.2.1-2: supported (N1, N2) for the single-panel
# codebook, keyed by the dual-polarized port count 2*N1*N2.
PORT_LAYOUTS: dict[int, tuple[tuple[int, int], ...]] = {
    2: ((1, 1),),
    4: ((2, 1),),
    8: ((2, 2), (4, 1)),
    12: ((3, 2), (6, 1)),
    16: ((4, 2), (8, 1)),
    24: ((4, 3), (6, 2), (12, 1)),
    32: ((4, 4), (8, 2), (16, 1)),
}

SUPPORTED_N1_N2: frozenset[tuple[int, int]] = frozenset(
    layout for layouts in PORT_LAYOUTS.values() for layout in layouts
)


def default_oversampling(n1: int, n2: int) -> tuple[int, int]:
    """(O1, O2) per TS 38.214 Table 5.2.2.2.1-2: O1=4; O2=4 when N2>1 else 1."""
    return 4, 4 if n2 > 1 else 1


# TS 38.214 Table 5.2.2.2.1-3: rank-2 secondary-beam offsets (k1, k2) per
# i13, in (O1, O2) units.  Row selection follows the table's N1/N2 cases.
_RANK2_OFFSETS_N1_2_N2_1 = ((0, 0), (1, 0))
_RANK2_OFFSETS_N1_GT2_N2_1 = ((0, 0), (1, 0), (2, 0), (3, 0))
_RANK2_OFFSETS_N1_EQ_N2 = ((0, 0), (1, 0), (0, 1), (1, 1))
_RANK2_OFFSETS_N1_GT_N2_GT1 = ((0, 0), (1, 0), (0, 1), (2, 0))


def rank2_i13_offsets(n1: int, n2: int) -> tuple[tuple[int, int], ...]:
    """All rank-2 (k1, k2) offsets in O-units, indexed by i13."""
    if n2 == 1:
        return _RANK2_OFFSETS_N1_2_N2_1 if n1 == 2 else _RANK2_OFFSETS_N1_GT2_N2_1
    if n1 == n2:
        return _RANK2_OFFSETS_N1_EQ_N2
    if n1 > n2:
        return _RANK2_OFFSETS_N1_GT_N2_GT1
    raise ValueError(f"(N1, N2) = ({n1}, {n2}) has no rank-2 offset row")


# TS 38.214 Table 5.2.2.2.1-4: rank-3/4 secondary-beam offsets (k1, k2) per
# i13, in (O1, O2) units.  Only used below 16 ports, so the keys cover
# exactly the 4/8/12-port layouts.
_RANK34_OFFSETS: dict[tuple[int, int], tuple[tuple[int, int], ...]] = {
    (2, 1): ((1, 0),),
    (4, 1): ((1, 0), (2, 0), (3, 0)),
    (6, 1): ((1, 0), (2, 0), (3, 0), (4, 0)),
    (2, 2): ((1, 0), (0, 1), (1, 1)),
    (3, 2): ((1, 0), (0, 1), (1, 1), (2, 0)),
}


def rank34_i13_offsets(n1: int, n2: int) -> tuple[tuple[int, int], ...]:
    """All rank-3/4 (k1, k2) offsets in O-units, indexed by i13 (ports < 16)."""
    try:
        return _RANK34_OFFSETS[(n1, n2)]
    except KeyError:
        raise ValueError(f"(N1, N2) = ({n1}, {n2}) has no rank-3/4 offset row") from None
