"""MCS table transcribed from TS 38.214 Table 5.1.3.1-2 (256QAM table).

Spectral efficiency is modulation order times code rate; the stored values
are the standard's rounded cells and each row is unit-tested against
``order * rate / 1024``.  The SNR threshold is the dB point where the
logistic block-error model crosses 0.5:

    t(m) = 10 log10(2^SE(m) - 1) + 2 dB implementation loss
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = ["McsTableEntry", "MCS_TABLE", "IMPLEMENTATION_LOSS_DB", "BLER_SLOPE_DB"]

IMPLEMENTATION_LOSS_DB = 2.0
BLER_SLOPE_DB = 0.5


@dataclass(frozen=True)
class McsTableEntry:
    mcs_index: int
    modulation_order: int
    code_rate_x1024: float
    spectral_efficiency: float  # bits per resource element

    @property
    def snr_threshold_db(self) -> float:
        """dB SNR at which the modeled BLER equals 0.5."""
        return (
            10.0 * math.log10(2.0 ** self.spectral_efficiency - 1.0) + IMPLEMENTATION_LOSS_DB
        )


# (index, modulation order, code rate x 1024, spectral efficiency)
_ROWS = (
    (0, 2, 120, 0.2344),
    (1, 2, 193, 0.3770),
    (2, 2, 308, 0.6016),
    (3, 2, 449, 0.8770),
    (4, 2, 602, 1.1758),
    (5, 4, 378, 1.4766),
    (6, 4, 434, 1.6953),
    (7, 4, 490, 1.9141),
    (8, 4, 553, 2.1602),
    (9, 4, 616, 2.4063),
    (10, 4, 658, 2.5703),
    (11, 6, 466, 2.7305),
    (12, 6, 517, 3.0293),
    (13, 6, 567, 3.3223),
    (14, 6, 616, 3.6094),
    (15, 6, 666, 3.9023),
    (16, 6, 719, 4.2129),
    (17, 6, 772, 4.5234),
    (18, 6, 822, 4.8164),
    (19, 6, 873, 5.1152),
    (20, 8, 682.5, 5.3320),
    (21, 8, 711, 5.5547),
    (22, 8, 754, 5.8906),
    (23, 8, 797, 6.2266),
    (24, 8, 841, 6.5703),
    (25, 8, 885, 6.9141),
    (26, 8, 916.5, 7.1602),
    (27, 8, 948, 7.4063),
)

MCS_TABLE: tuple[McsTableEntry, ...] = tuple(McsTableEntry(*row) for row in _ROWS)
