"""802.11p (half-clocked OFDM, 10 MHz) layout constants and tables."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from ..dsp import BITS_PER_SYMBOL, ConfigurationError

SAMPLE_RATE_HZ = 10e6
DFT_SIZE = 64
CP_LENGTH = 16
SYMBOL_LENGTH = DFT_SIZE + CP_LENGTH
STF_LENGTH = 160
LTF_LENGTH = 160
LTF_GUARD = 32
PREAMBLE_LENGTH = STF_LENGTH + LTF_LENGTH

# DFT-order bin indices
PILOT_BINS = np.array([7, 10, 44, 58])
NULL_BINS = np.concatenate([[0], np.arange(27, 38)])
OCCUPIED_BINS = np.array([b for b in range(DFT_SIZE) if b not in set(NULL_BINS.tolist())])
NUM_OCCUPIED = OCCUPIED_BINS.size


def _logical(b):
    return b - DFT_SIZE if b >= DFT_SIZE // 2 else b


# data subcarriers in ascending frequency (-26 .. 26)
DATA_BINS = np.array(sorted((b for b in OCCUPIED_BINS if b not in set(PILOT_BINS.tolist())), key=_logical))
# pilot base values in ascending frequency order
PILOT_VALUES = np.array([1.0, 1.0, 1.0, -1.0])
PILOT_BINS_SORTED = np.array(sorted(PILOT_BINS.tolist(), key=_logical))

SERVICE_BITS = 16
TAIL_BITS = 6

# subcarrier -26 .. 26 values of the training fields
_STF_LOGICAL = np.sqrt(13 / 6) * np.array(
    [0, 0, 1 + 1j, 0, 0, 0, -1 - 1j, 0, 0, 0, 1 + 1j, 0, 0, 0, -1 - 1j, 0, 0, 0, -1 - 1j, 0, 0, 0,
     1 + 1j, 0, 0, 0, 0, 0, 0, 0, -1 - 1j, 0, 0, 0, -1 - 1j, 0, 0, 0, 1 + 1j, 0, 0, 0, 1 + 1j, 0, 0,
     0, 1 + 1j, 0, 0, 0, 1 + 1j, 0, 0])
_LTF_LOGICAL = np.array(
    [1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1, 1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1, 0,
     1, -1, -1, 1, 1, -1, 1, -1, 1, -1, -1, -1, -1, -1, 1, 1, -1, -1, 1, -1, 1, -1, 1, 1, 1, 1],
    dtype=np.complex128)


def _to_bins(logical_values: np.ndarray) -> np.ndarray:
    out = np.zeros(DFT_SIZE, dtype=np.complex128)
    for k, v in zip(range(-26, 27), logical_values):
        out[k % DFT_SIZE] = v
    return out


STF_FREQ = _to_bins(_STF_LOGICAL)
LTF_FREQ = _to_bins(_LTF_LOGICAL)

# time-domain scale giving unit mean power with 52 unit-energy subcarriers
OFDM_SCALE = np.sqrt(DFT_SIZE / NUM_OCCUPIED)


@dataclass(frozen=True)
class Dot11pMcs:
    index: int
    modulation: str
    coding_rate: Fraction
    coded_bits_per_symbol: int
    data_bits_per_symbol: int
    data_rate_mbps: float
    rate_bits: tuple

    @property
    def bits_per_subcarrier(self) -> int:
        return BITS_PER_SYMBOL[self.modulation]


MCS_TABLE = (
    Dot11pMcs(0, "BPSK", Fraction(1, 2), 48, 24, 3.0, (1, 1, 0, 1)),
    Dot11pMcs(1, "BPSK", Fraction(3, 4), 48, 36, 4.5, (1, 1, 1, 1)),
    Dot11pMcs(2, "QPSK", Fraction(1, 2), 96, 48, 6.0, (0, 1, 0, 1)),
    Dot11pMcs(3, "QPSK", Fraction(3, 4), 96, 72, 9.0, (0, 1, 1, 1)),
    Dot11pMcs(4, "16QAM", Fraction(1, 2), 192, 96, 12.0, (1, 0, 0, 1)),
    Dot11pMcs(5, "16QAM", Fraction(3, 4), 192, 144, 18.0, (1, 0, 1, 1)),
    Dot11pMcs(6, "64QAM", Fraction(2, 3), 288, 192, 24.0, (0, 0, 0, 1)),
    Dot11pMcs(7, "64QAM", Fraction(3, 4), 288, 216, 27.0, (0, 0, 1, 1)),
)

SIG_MCS = MCS_TABLE[0]


def mcs(index: int) -> Dot11pMcs:
    if not 0 <= index < len(MCS_TABLE):
        raise ConfigurationError(f"802.11p MCS index must be 0..7, got {index}")
    return MCS_TABLE[index]


def mcs_from_rate_bits(bits) -> Dot11pMcs | None:
    bits = tuple(int(b) for b in bits)
    for row in MCS_TABLE:
        if row.rate_bits == bits:
            return row
    return None


@dataclass(frozen=True)
class PpduConfig:
    mcs: Dot11pMcs
    psdu_length_bytes: int
    scrambler_seed: int = 0b1011101

    def __post_init__(self):
        if not 1 <= self.psdu_length_bytes <= 4095:
            raise ValueError("psdu_length_bytes must be in 1..4095")
        if not 1 <= self.scrambler_seed <= 127:
            raise ValueError("scrambler_seed must be a nonzero 7-bit value")

    @property
    def num_data_symbols(self) -> int:
        n = SERVICE_BITS + 8 * self.psdu_length_bytes + TAIL_BITS
        return -(-n // self.mcs.data_bits_per_symbol)

    @property
    def num_pad_bits(self) -> int:
        n = SERVICE_BITS + 8 * self.psdu_length_bytes + TAIL_BITS
        return self.num_data_symbols * self.mcs.data_bits_per_symbol - n

    @property
    def num_samples(self) -> int:
        return PREAMBLE_LENGTH + SYMBOL_LENGTH * (1 + self.num_data_symbols)


# --------------------------------------------------------------------------
# Scrambler x^7 + x^4 + 1 and pilot polarity
# --------------------------------------------------------------------------

@lru_cache(maxsize=128)
def _scrambler_period(seed: int) -> np.ndarray:
    state = [(seed >> i) & 1 for i in range(7)]  # x1 .. x7
    out = np.empty(127, dtype=np.int8)
    for n in range(127):
        b = state[6] ^ state[3]
        out[n] = b
        state = [b] + state[:6]
    out.setflags(write=False)
    return out


def scrambler_sequence(seed: int, length: int) -> np.ndarray:
    if not 1 <= seed <= 127:
        raise ValueError("scrambler seed must be a nonzero 7-bit value")
    period = _scrambler_period(seed)
    return np.resize(period, length).astype(np.int8)


def scrambler_sequence_from_prefix(prefix, length: int) -> np.ndarray:
    """Continue the scrambler sequence from its first 7 output bits."""
    s = np.zeros(max(length, 7), dtype=np.int8)
    s[:7] = np.asarray(prefix, dtype=np.int8)[:7]
    for n in range(7, length):
        s[n] = s[n - 7] ^ s[n - 4]
    return s[:length]


def pilot_polarity(length: int = 127) -> np.ndarray:
    """+-1 polarity sequence (scrambler with all-ones state, 0 -> +1)."""
    return (1 - 2 * scrambler_sequence(127, length)).astype(float)


# --------------------------------------------------------------------------
# Per-symbol interleaver
# --------------------------------------------------------------------------

@lru_cache(maxsize=None)
def interleaver_perm(n_cbps: int, n_bpsc: int) -> np.ndarray:
    """j[k]: output position of coded bit k within one OFDM symbol."""
    k = np.arange(n_cbps)
    i = (n_cbps // 16) * (k % 16) + k // 16
    s = max(n_bpsc // 2, 1)
    j = s * (i // s) + (i + n_cbps - (16 * i) // n_cbps) % s
    j.setflags(write=False)
    return j


def interleave(bits, n_cbps: int, n_bpsc: int) -> np.ndarray:
    bits = np.asarray(bits).reshape(-1, n_cbps)
    out = np.empty_like(bits)
    out[:, interleaver_perm(n_cbps, n_bpsc)] = bits
    return out.ravel()


def deinterleave(values, n_cbps: int, n_bpsc: int) -> np.ndarray:
    values = np.asarray(values).reshape(-1, n_cbps)
    return values[:, interleaver_perm(n_cbps, n_bpsc)].ravel()
