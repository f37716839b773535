"""LTE parallel concatenated convolutional (turbo) code.

Two 8-state RSC constituent encoders with feedback 13 and feedforward 15
(octal), a QPP internal interleaver and trellis termination of both
encoders (12 tail bits).  Decoding is iterative max-log-MAP with scaled
extrinsic information.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from ._kernels import rsc_maxlog

# (K, f1, f2) for all 188 block sizes of the LTE QPP interleaver table
QPP_TABLE = (
    (40, 3, 10), (48, 7, 12), (56, 19, 42), (64, 7, 16), (72, 7, 18), (80, 11, 20),
    (88, 5, 22), (96, 11, 24), (104, 7, 26), (112, 41, 84), (120, 103, 90), (128, 15, 32),
    (136, 9, 34), (144, 17, 108), (152, 9, 38), (160, 21, 120), (168, 101, 84), (176, 21, 44),
    (184, 57, 46), (192, 23, 48), (200, 13, 50), (208, 27, 52), (216, 11, 36), (224, 27, 56),
    (232, 85, 58), (240, 29, 60), (248, 33, 62), (256, 15, 32), (264, 17, 198), (272, 33, 68),
    (280, 103, 210), (288, 19, 36), (296, 19, 74), (304, 37, 76), (312, 19, 78), (320, 21, 120),
    (328, 21, 82), (336, 115, 84), (344, 193, 86), (352, 21, 44), (360, 133, 90), (368, 81, 46),
    (376, 45, 94), (384, 23, 48), (392, 243, 98), (400, 151, 40), (408, 155, 102), (416, 25, 52),
    (424, 51, 106), (432, 47, 72), (440, 91, 110), (448, 29, 168), (456, 29, 114), (464, 247, 58),
    (472, 29, 118), (480, 89, 180), (488, 91, 122), (496, 157, 62), (504, 55, 84), (512, 31, 64),
    (528, 17, 66), (544, 35, 68), (560, 227, 420), (576, 65, 96), (592, 19, 74), (608, 37, 76),
    (624, 41, 234), (640, 39, 80), (656, 185, 82), (672, 43, 252), (688, 21, 86), (704, 155, 44),
    (720, 79, 120), (736, 139, 92), (752, 23, 94), (768, 217, 48), (784, 25, 98), (800, 17, 80),
    (816, 127, 102), (832, 25, 52), (848, 239, 106), (864, 17, 48), (880, 137, 110), (896, 215, 112),
    (912, 29, 114), (928, 15, 58), (944, 147, 118), (960, 29, 60), (976, 59, 122), (992, 65, 124),
    (1008, 55, 84), (1024, 31, 64), (1056, 17, 66), (1088, 171, 204), (1120, 67, 140),
    (1152, 35, 72), (1184, 19, 74), (1216, 39, 76), (1248, 19, 78), (1280, 199, 240),
    (1312, 21, 82), (1344, 211, 252), (1376, 21, 86), (1408, 43, 88), (1440, 149, 60),
    (1472, 45, 92), (1504, 49, 846), (1536, 71, 48), (1568, 13, 28), (1600, 17, 80),
    (1632, 25, 102), (1664, 183, 104), (1696, 55, 954), (1728, 127, 96), (1760, 27, 110),
    (1792, 29, 112), (1824, 29, 114), (1856, 57, 116), (1888, 45, 354), (1920, 31, 120),
    (1952, 59, 610), (1984, 185, 124), (2016, 113, 420), (2048, 31, 64), (2112, 17, 66),
    (2176, 171, 136), (2240, 209, 420), (2304, 253, 216), (2368, 367, 444), (2432, 265, 456),
    (2496, 181, 468), (2560, 39, 80), (2624, 27, 164), (2688, 127, 504), (2752, 143, 172),
    (2816, 43, 88), (2880, 29, 300), (2944, 45, 92), (3008, 157, 188), (3072, 47, 96),
    (3136, 13, 28), (3200, 111, 240), (3264, 443, 204), (3328, 51, 104), (3392, 51, 212),
    (3456, 451, 192), (3520, 257, 220), (3584, 57, 336), (3648, 313, 228), (3712, 271, 232),
    (3776, 179, 236), (3840, 331, 120), (3904, 363, 244), (3968, 375, 248), (4032, 127, 168),
    (4096, 31, 64), (4160, 33, 130), (4224, 43, 264), (4288, 33, 134), (4352, 477, 408),
    (4416, 35, 138), (4480, 233, 280), (4544, 357, 142), (4608, 337, 480), (4672, 37, 146),
    (4736, 71, 444), (4800, 71, 120), (4864, 37, 152), (4928, 39, 462), (4992, 127, 234),
    (5056, 39, 158), (5120, 39, 80), (5184, 31, 96), (5248, 113, 902), (5312, 41, 166),
    (5376, 251, 336), (5440, 43, 170), (5504, 21, 86), (5568, 43, 174), (5632, 45, 176),
    (5696, 45, 178), (5760, 161, 120), (5824, 89, 182), (5888, 323, 184), (5952, 47, 186),
    (6016, 23, 94), (6080, 47, 190), (6144, 263, 480),
)

QPP_PARAMS = {k: (f1, f2) for k, f1, f2 in QPP_TABLE}
BLOCK_SIZES = tuple(k for k, _, _ in QPP_TABLE)
MAX_BLOCK_SIZE = 6144
EXTRINSIC_SCALE = 0.75
DEFAULT_ITERATIONS = 6


@dataclass(frozen=True)
class TurboCodeSpec:
    block_size: int
    iterations: int = DEFAULT_ITERATIONS

    def __post_init__(self):
        if self.block_size not in QPP_PARAMS:
            raise ValueError(f"{self.block_size} is not an LTE QPP block size")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


@lru_cache(maxsize=None)
def qpp_permutation(k: int) -> np.ndarray:
    """pi(i) = (f1*i + f2*i^2) mod K; interleaved bit i is input bit pi(i)."""
    if k not in QPP_PARAMS:
        raise ValueError(f"{k} is not an LTE QPP block size")
    f1, f2 = QPP_PARAMS[k]
    i = np.arange(k, dtype=np.int64)
    perm = (f1 * i + f2 * i * i) % k
    perm.setflags(write=False)
    return perm


def _rsc_tables():
    # state = s1<<2 | s2<<1 | s3 with s1 the newest register bit
    next_state = np.zeros((8, 2), dtype=np.int64)
    parity = np.zeros((8, 2), dtype=np.int64)
    for s in range(8):
        s1, s2, s3 = (s >> 2) & 1, (s >> 1) & 1, s & 1
        for u in range(2):
            a = u ^ s2 ^ s3
            parity[s, u] = a ^ s1 ^ s3
            next_state[s, u] = (a << 2) | (s >> 1)
    return next_state, parity


RSC_NEXT, RSC_PARITY = _rsc_tables()


def _rsc_encode(bits: np.ndarray):
    """Return (parity, tail_sys, tail_par) for one terminated RSC encoder."""
    s = 0
    par = np.empty(bits.size, dtype=np.int8)
    for i, u in enumerate(bits.tolist()):
        par[i] = RSC_PARITY[s, u]
        s = RSC_NEXT[s, u]
    tail_sys = np.empty(3, dtype=np.int8)
    tail_par = np.empty(3, dtype=np.int8)
    for i in range(3):
        u = ((s >> 1) ^ s) & 1  # feedback bit: drives the register input to 0
        tail_sys[i] = u
        tail_par[i] = RSC_PARITY[s, u]
        s = RSC_NEXT[s, u]
    assert s == 0
    return par, tail_sys, tail_par


def turbo_encode(bits, spec: Optional[TurboCodeSpec] = None):
    """Encode one code block into the three LTE output streams d0, d1, d2.

    Each stream has K + 4 bits; the 12 tail bits are multiplexed over the
    stream ends in the LTE order.
    """
    bits = np.asarray(bits, dtype=np.int64).ravel()
    k = bits.size
    if spec is None:
        spec = TurboCodeSpec(k)
    if spec.block_size != k:
        raise ValueError(f"input length {k} does not match block size {spec.block_size}")
    perm = qpp_permutation(k)
    z1, x_t, z_t = _rsc_encode(bits)
    z2, xp_t, zp_t = _rsc_encode(bits[perm])
    d0 = np.concatenate([bits.astype(np.int8), [x_t[0], z_t[1], xp_t[0], zp_t[1]]])
    d1 = np.concatenate([z1, [z_t[0], x_t[2], zp_t[0], xp_t[2]]])
    d2 = np.concatenate([z2, [x_t[1], z_t[2], xp_t[1], zp_t[2]]])
    return d0.astype(np.int8), d1.astype(np.int8), d2.astype(np.int8)


def _split_tails(d0, d1, d2, k):
    sys1_tail = np.array([d0[k], d2[k], d1[k + 1]])
    par1_tail = np.array([d1[k], d0[k + 1], d2[k + 1]])
    sys2_tail = np.array([d0[k + 2], d2[k + 2], d1[k + 3]])
    par2_tail = np.array([d1[k + 2], d0[k + 3], d2[k + 3]])
    return sys1_tail, par1_tail, sys2_tail, par2_tail


def turbo_decode(d0, d1, d2, spec: Optional[TurboCodeSpec] = None,
                 early_stop: Optional[Callable[[np.ndarray], bool]] = None,
                 return_llr: bool = False):
    """Iterative max-log-MAP decoding of the three stream LLRs.

    ``early_stop`` receives the hard decisions after every full iteration
    and ends decoding when it returns True (typically a CRC check).
    """
    d0 = np.asarray(d0, dtype=np.float64)
    d1 = np.asarray(d1, dtype=np.float64)
    d2 = np.asarray(d2, dtype=np.float64)
    k = d0.size - 4
    if spec is None:
        spec = TurboCodeSpec(k)
    if spec.block_size != k or d1.size != k + 4 or d2.size != k + 4:
        raise ValueError("stream lengths must all equal K + 4")
    perm = qpp_permutation(k)
    sys1_tail, par1_tail, sys2_tail, par2_tail = _split_tails(d0, d1, d2, k)
    sys = d0[:k]
    l_sys1 = np.concatenate([sys, sys1_tail])
    l_par1 = np.concatenate([d1[:k], par1_tail])
    l_sys2 = np.concatenate([sys[perm], sys2_tail])
    l_par2 = np.concatenate([d2[:k], par2_tail])

    apriori = np.zeros(k)
    llr = sys.copy()
    for _ in range(spec.iterations):
        post1 = rsc_maxlog(l_sys1, l_par1, apriori, RSC_NEXT, RSC_PARITY, k)
        ext1 = EXTRINSIC_SCALE * (post1 - sys - apriori)
        apriori2 = ext1[perm]
        post2 = rsc_maxlog(l_sys2, l_par2, apriori2, RSC_NEXT, RSC_PARITY, k)
        ext2 = EXTRINSIC_SCALE * (post2 - sys[perm] - apriori2)
        apriori = np.empty(k)
        apriori[perm] = ext2
        llr = np.empty(k)
        llr[perm] = post2
        if early_stop is not None and early_stop((llr < 0).astype(np.int8)):
            break
    bits = (llr < 0).astype(np.int8)
    if return_llr:
        return bits, llr
    return bits
