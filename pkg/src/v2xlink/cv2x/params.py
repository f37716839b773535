"""C-V2X sidelink (10 MHz, normal CP) subframe layout, MCS fixtures and
SCI Format 1 packing."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..dsp import BITS_PER_SYMBOL, ConfigurationError

SAMPLE_RATE_HZ = 15.36e6
DFT_SIZE = 1024
NUM_PRB = 50
SC_PER_PRB = 12
NUM_SUBCARRIERS = NUM_PRB * SC_PER_PRB
NUM_SYMBOLS = 14
CP_LENGTHS = np.array([80, 72, 72, 72, 72, 72, 72] * 2)
SYMBOL_STARTS = np.concatenate([[0], np.cumsum(CP_LENGTHS + DFT_SIZE)[:-1]])
SUBFRAME_SAMPLES = int(np.sum(CP_LENGTHS + DFT_SIZE))  # 15360

DMRS_SYMBOLS = (2, 5, 8, 11)
ZEROED_SYMBOL = 13
# PSCCH maps 10 data symbols (the last one is zeroed before transmission)
PSCCH_DATA_SYMBOLS = (0, 1, 3, 4, 6, 7, 9, 10, 12, 13)
PSSCH_DATA_SYMBOLS = (0, 1, 3, 4, 6, 7, 9, 10, 12)
PSCCH_PRBS = (0, 1)
PSCCH_MODULATION = "QPSK"
PSCCH_CAPACITY = 2 * SC_PER_PRB * len(PSCCH_DATA_SYMBOLS) * 2  # 480

PSCCH_C_INIT = 510
CYCLIC_SHIFTS = (0, 3, 6, 9)

# subcarrier k (0..599) sits at logical frequency k - 300
SUBCARRIER_BINS = (np.arange(NUM_SUBCARRIERS) - NUM_SUBCARRIERS // 2) % DFT_SIZE
# time-domain scale giving unit mean power when all 600 subcarriers carry unit power
OFDM_SCALE = np.sqrt(DFT_SIZE / NUM_SUBCARRIERS)


@dataclass(frozen=True)
class Cv2xMcsEntry:
    index: int
    modulation: str
    tbs_bits: int
    n_prb: int
    effective_coding_rate: float

    @property
    def bits_per_symbol(self) -> int:
        return BITS_PER_SYMBOL[self.modulation]

    @property
    def codeword_bits(self) -> int:
        """Physical PSSCH capacity over the 9 useful data symbols."""
        return self.n_prb * SC_PER_PRB * len(PSSCH_DATA_SYMBOLS) * self.bits_per_symbol


# 10 MHz list for a 48-PRB PSSCH (rates use 9 useful symbols)
MCS_TABLE_48PRB = tuple(
    Cv2xMcsEntry(i, mod, tbs, 48, rate)
    for i, (mod, tbs, rate) in enumerate([
        ("QPSK", 1320, 0.127), ("QPSK", 1736, 0.167), ("QPSK", 2152, 0.207),
        ("QPSK", 2792, 0.269), ("QPSK", 3496, 0.337), ("QPSK", 4264, 0.411),
        ("QPSK", 4968, 0.479), ("QPSK", 5992, 0.577), ("QPSK", 6712, 0.647),
        ("QPSK", 7480, 0.721), ("QPSK", 8504, 0.820), ("16QAM", 8504, 0.410),
        ("16QAM", 9528, 0.459), ("16QAM", 11064, 0.533), ("16QAM", 12216, 0.589),
        ("16QAM", 13536, 0.652), ("16QAM", 14688, 0.708), ("16QAM", 15840, 0.763),
        ("16QAM", 17568, 0.857), ("16QAM", 19080, 0.920), ("16QAM", 20616, 0.994),
    ])
)

# the two configurations compared against 802.11p; rates as published
QPSK_HALF = Cv2xMcsEntry(7, "QPSK", 2472, 20, 0.515)
QPSK_THREEQUARTER = Cv2xMcsEntry(10, "QPSK", 2664, 15, 0.74)
MCS_SCHEMES = {"qpsk_half": QPSK_HALF, "qpsk_threequarter": QPSK_THREEQUARTER}


def mcs_scheme(name: str) -> Cv2xMcsEntry:
    try:
        return MCS_SCHEMES[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown C-V2X MCS scheme {name!r}; options: {', '.join(MCS_SCHEMES)}") from None


def lookup_mcs(index: int, n_prb: int) -> Cv2xMcsEntry | None:
    for entry in (QPSK_HALF, QPSK_THREEQUARTER) + MCS_TABLE_48PRB:
        if entry.index == index and entry.n_prb == n_prb:
            return entry
    return None


@dataclass(frozen=True)
class SidelinkAllocation:
    pscch_prbs: tuple = PSCCH_PRBS
    pssch_prbs: tuple = field(default_factory=lambda: tuple(range(2, 22)))
    total_prbs: int = NUM_PRB

    def __post_init__(self):
        if len(self.pscch_prbs) != 2 or self.pscch_prbs[1] != self.pscch_prbs[0] + 1:
            raise ValueError("PSCCH spans exactly 2 contiguous PRBs")
        p = list(self.pssch_prbs)
        if not p or p != list(range(p[0], p[0] + len(p))):
            raise ValueError("PSSCH PRBs must be a non-empty contiguous range")
        if set(p) & set(self.pscch_prbs):
            raise ValueError("PSCCH and PSSCH PRBs overlap")
        if min(p + list(self.pscch_prbs)) < 0 or max(p + list(self.pscch_prbs)) >= self.total_prbs:
            raise ValueError(f"PRB indices must lie within 0..{self.total_prbs - 1}")

    @classmethod
    def adjacent(cls, n_prb: int, pscch_start: int = 0) -> "SidelinkAllocation":
        """PSCCH at ``pscch_start`` followed directly by ``n_prb`` PSSCH PRBs."""
        return cls((pscch_start, pscch_start + 1),
                   tuple(range(pscch_start + 2, pscch_start + 2 + n_prb)))

    @property
    def pscch_subcarriers(self) -> np.ndarray:
        return _subcarriers(self.pscch_prbs)

    @property
    def pssch_subcarriers(self) -> np.ndarray:
        return _subcarriers(self.pssch_prbs)


def _subcarriers(prbs) -> np.ndarray:
    prbs = np.asarray(prbs)
    return (prbs[:, None] * SC_PER_PRB + np.arange(SC_PER_PRB)[None, :]).ravel()


# --------------------------------------------------------------------------
# SCI Format 1
# --------------------------------------------------------------------------

SCI_FIELDS = (("mcs_index", 5), ("resource_indication", 11), ("time_gap", 4),
              ("retx_index", 1), ("reserved", 11))
SCI_BITS = 32


def riv_encode(start: int, length: int, n_prb: int = NUM_PRB) -> int:
    """Resource indication value of a contiguous PRB range."""
    if length < 1 or start < 0 or start + length > n_prb:
        raise ValueError("PRB range outside the carrier")
    if length - 1 <= n_prb // 2:
        return n_prb * (length - 1) + start
    return n_prb * (n_prb - length + 1) + (n_prb - 1 - start)


def riv_decode(riv: int, n_prb: int = NUM_PRB) -> tuple:
    """Inverse of :func:`riv_encode`; returns (start, length)."""
    length = riv // n_prb + 1
    start = riv % n_prb
    if start + length > n_prb:
        length = n_prb - length + 2
        start = n_prb - 1 - start
    return start, length


@dataclass(frozen=True)
class SciFormat1:
    mcs_index: int
    resource_indication: int
    time_gap: int = 0
    retx_index: int = 0

    def __post_init__(self):
        if not 0 <= self.mcs_index <= 20:
            raise ValueError("mcs_index must be 0..20")
        if not 0 <= self.resource_indication < 2 ** 11:
            raise ValueError("resource_indication must fit 11 bits")
        if not 0 <= self.time_gap < 2 ** 4:
            raise ValueError("time_gap must fit 4 bits")
        if self.retx_index not in (0, 2):
            raise ValueError("retx_index must be 0 (initial) or 2 (retransmission)")

    def pack(self) -> np.ndarray:
        values = {"mcs_index": self.mcs_index, "resource_indication": self.resource_indication,
                  "time_gap": self.time_gap, "retx_index": self.retx_index // 2, "reserved": 0}
        out = []
        for name, width in SCI_FIELDS:
            out.extend((values[name] >> np.arange(width - 1, -1, -1)) & 1)
        return np.array(out, dtype=np.int8)

    @classmethod
    def unpack(cls, bits) -> "SciFormat1":
        bits = np.asarray(bits).ravel()
        if bits.size != SCI_BITS:
            raise ValueError("SCI Format 1 has 32 bits")
        values, pos = {}, 0
        for name, width in SCI_FIELDS:
            v = 0
            for b in bits[pos:pos + width].tolist():
                v = (v << 1) | int(b)
            values[name] = v
            pos += width
        return cls(values["mcs_index"], values["resource_indication"], values["time_gap"],
                   2 * values["retx_index"])

    def pssch_prbs(self) -> tuple:
        start, length = riv_decode(self.resource_indication)
        return tuple(range(start, start + length))


def pssch_c_init(nxid: int) -> int:
    """Data scrambling seed, reduced to a function of NXID for one subframe."""
    return nxid * 2 ** 14 + PSCCH_C_INIT
