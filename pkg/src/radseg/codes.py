"""Embedded phase-code tables: Barker, polyphase Barker, and Frank.

Polyphase Barker entries are unimodular sequences whose aperiodic
autocorrelation has peak L and every off-peak magnitude <= 1. The phases
below (radians, first chip fixed at 0) were obtained by a minimax sidelobe
search and are stored to 12 decimals; at that precision each one still keeps
all sidelobes within 1e-9 of unity. The longest lag of any unimodular
sequence always has magnitude exactly 1, so a peak sidelobe of 1 is optimal.
"""

from __future__ import annotations

import numpy as np

from radseg.errors import NoSuchCode

# +1/-1 chips; phase 0 for +1 and pi for -1
BARKER: dict[int, tuple[int, ...]] = {
    2: (1, -1),
    3: (1, 1, -1),
    4: (1, 1, -1, 1),
    5: (1, 1, 1, -1, 1),
    7: (1, 1, 1, -1, -1, 1, -1),
    11: (1, 1, 1, -1, -1, -1, 1, -1, -1, 1, -1),
    13: (1, 1, 1, 1, 1, -1, -1, 1, 1, -1, 1, -1, 1),
}

POLYPHASE_BARKER: dict[int, tuple[float, ...]] = {
    3: (0.0, 4.932096191208, 0.439414421647),
    4: (0.0, 0.032011336248, 4.523731392560, 0.908789564897),
    5: (0.0, 4.857256067556, 4.685886596812, 5.921526680556, 2.128541224832),
    6: (0.0, 1.033113289684, 1.019029027771, 6.240932536190, 4.132453171884, 0.976776256781),
    7: (0.0, 4.904962738758, 5.383397203773, 3.770342770788, 0.013132790139, 0.447619225270,
        2.738762683582),
    8: (0.0, 0.383995822596, 5.794644511298, 0.676358210578, 2.704088231754, 5.594649289231,
        4.239460653255, 1.627739576090),
    9: (0.0, 6.037442709232, 4.860287610919, 4.822035490107, 0.584456286144, 1.301028514583,
        4.101458962787, 1.757607080526, 4.765528004997),
    10: (0.0, 0.506164748171, 2.171557893264, 3.896817515498, 4.685364918795, 3.029163837745,
         3.555069505287, 1.661293447632, 4.920104640566, 3.012000366201),
    11: (0.0, 4.139114463437, 1.769782830040, 5.911387855084, 6.055730688520, 4.756451280807,
         5.592429812004, 4.067415293780, 5.531959795570, 0.775306905826, 2.160099073540),
    12: (0.0, 0.802219896308, 0.800776884284, 0.457985794100, 2.189410202326, 3.427262873495,
         0.369270304725, 0.168568981427, 4.295175740739, 2.606896964385, 5.164307383710,
         1.926584654502),
    13: (0.0, 1.487228149916, 3.500405244572, 5.439701946226, 0.342572984499, 5.936440217702,
         1.187403138869, 6.045663293162, 2.111471507222, 0.048732390635, 4.329264958881,
         3.582853475330, 2.713502614301),
}

FRANK_ORDERS = (2, 3, 4)


def barker_phases(length: int) -> np.ndarray:
    try:
        chips = BARKER[length]
    except KeyError:
        raise NoSuchCode(f"no Barker code of length {length}") from None
    return np.where(np.array(chips) > 0, 0.0, np.pi)


def polyphase_barker_phases(length: int) -> np.ndarray:
    try:
        return np.array(POLYPHASE_BARKER[length], dtype=np.float64)
    except KeyError:
        raise NoSuchCode(f"no polyphase Barker code of length {length}") from None


def frank_phases(order: int) -> np.ndarray:
    """Row-major Frank code of order M: chip (i, j) has phase 2*pi*i*j/M."""
    if order not in FRANK_ORDERS:
        raise NoSuchCode(f"no Frank code of order {order}")
    i, j = np.meshgrid(np.arange(order), np.arange(order), indexing="ij")
    return (2 * np.pi * i * j / order).ravel()
