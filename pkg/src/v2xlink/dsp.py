"""Signal-processing and bit-level primitives shared by both PHY chains.

LLR convention used everywhere in this package: a positive log-likelihood
ratio means bit 0 is the more likely value, ``llr = log P(b=0) / P(b=1)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

LLR_CLIP = 50.0

SCHEMES = ("BPSK", "QPSK", "16QAM", "64QAM")
BITS_PER_SYMBOL = {"BPSK": 1, "QPSK": 2, "16QAM": 4, "64QAM": 6}


class ConfigurationError(ValueError):
    """Raised for unsupported sizes, unknown names and inconsistent settings."""


@dataclass
class ComplexWaveform:
    """Time-domain complex baseband samples."""

    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.complex128)
        if self.samples.ndim != 1:
            raise ValueError("waveform samples must be one-dimensional")
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform contains NaN or Inf samples")

    def __len__(self):
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    def mean_power(self) -> float:
        if self.samples.size == 0:
            return 0.0
        return float(np.mean(np.abs(self.samples) ** 2))


@dataclass
class ResourceGrid:
    """Subcarrier x symbol complex matrix for one packet or subframe."""

    cells: np.ndarray

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=np.complex128)
        if self.cells.ndim != 2:
            raise ValueError("resource grid must be a 2-D matrix")

    @classmethod
    def empty(cls, num_subcarriers: int, num_symbols: int) -> "ResourceGrid":
        if num_subcarriers <= 0 or num_symbols <= 0:
            raise ValueError("grid dimensions must be positive")
        return cls(np.zeros((num_subcarriers, num_symbols), dtype=np.complex128))

    @property
    def num_subcarriers(self) -> int:
        return self.cells.shape[0]

    @property
    def num_symbols(self) -> int:
        return self.cells.shape[1]


# Soft decoder input: a plain float array of LLRs (see module docstring).
SoftBits = np.ndarray


@dataclass(frozen=True)
class CrcSpec:
    name: str
    width: int
    polynomial: int  # includes the leading x^width term

    def __post_init__(self):
        if self.width not in (16, 24):
            raise ValueError("CRC width must be 16 or 24")
        if self.polynomial >> self.width != 1:
            raise ValueError("polynomial must include its x^width coefficient")


CRC16 = CrcSpec("CRC16", 16, 0x11021)
CRC24A = CrcSpec("CRC24A", 24, 0x1864CFB)
CRC24B = CrcSpec("CRC24B", 24, 0x1800063)


# --------------------------------------------------------------------------
# Transforms
# --------------------------------------------------------------------------

def _is_235_smooth(n: int) -> bool:
    for p in (2, 3, 5):
        while n % p == 0:
            n //= p
    return n == 1


SUPPORTED_DFT_SIZES = frozenset(
    {64, 1024} | {12 * m for m in range(1, 101) if _is_235_smooth(m)}
)


def dft(x, size: int, inverse: bool = False) -> np.ndarray:
    """Unitary DFT (1/sqrt(N) on both directions).

    Operates along the last axis, so a (..., size) stack of symbols is
    transformed in one call.
    """
    x = np.asarray(x, dtype=np.complex128)
    if size not in SUPPORTED_DFT_SIZES:
        raise ConfigurationError(f"unsupported transform length {size}")
    if x.shape[-1] != size:
        raise ValueError(f"input length {x.shape[-1]} does not match size {size}")
    if inverse:
        return np.fft.ifft(x, norm="ortho")
    return np.fft.fft(x, norm="ortho")


# --------------------------------------------------------------------------
# Constellations
# --------------------------------------------------------------------------

def _pam_level(bits: np.ndarray) -> np.ndarray:
    # Gray PAM amplitude from the magnitude bits (most significant first);
    # 0 -> innermost ring is avoided: LTE ordering gives 1,3 / 3,1,5,7 patterns.
    level = np.ones(bits.shape[0])
    for k in range(bits.shape[1]):
        level = 2.0 ** (k + 1) - (1 - 2 * bits[:, bits.shape[1] - 1 - k]) * level
    return level


@lru_cache(maxsize=None)
def constellation(scheme: str) -> np.ndarray:
    """Unit-energy Gray constellation indexed by the integer value of the bits (MSB first)."""
    if scheme not in BITS_PER_SYMBOL:
        raise ConfigurationError(f"unknown modulation {scheme!r}; options: {', '.join(SCHEMES)}")
    m = BITS_PER_SYMBOL[scheme]
    labels = ((np.arange(2 ** m)[:, None] >> np.arange(m - 1, -1, -1)) & 1).astype(np.int64)
    if scheme == "BPSK":
        points = (1 - 2 * labels[:, 0]).astype(np.complex128)
    else:
        # b0/b1 pick the quadrant signs, even/odd remaining bits the I/Q ring
        i_sign = 1 - 2 * labels[:, 0]
        q_sign = 1 - 2 * labels[:, 1]
        if m == 2:
            i_amp = q_amp = np.ones(labels.shape[0])
        else:
            i_amp = _pam_level(labels[:, 2::2])
            q_amp = _pam_level(labels[:, 3::2])
        points = i_sign * i_amp + 1j * q_sign * q_amp
    points = points / np.sqrt(np.mean(np.abs(points) ** 2))
    points.setflags(write=False)
    return points


def map_symbols(bits, scheme: str) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64).ravel()
    m = BITS_PER_SYMBOL.get(scheme)
    if m is None:
        raise ConfigurationError(f"unknown modulation {scheme!r}; options: {', '.join(SCHEMES)}")
    if bits.size % m:
        raise ValueError(f"{bits.size} bits is not a multiple of {m} for {scheme}")
    idx = bits.reshape(-1, m) @ (1 << np.arange(m - 1, -1, -1))
    return constellation(scheme)[idx]


@lru_cache(maxsize=None)
def _label_masks(scheme: str):
    m = BITS_PER_SYMBOL[scheme]
    labels = (np.arange(2 ** m)[:, None] >> np.arange(m - 1, -1, -1)) & 1
    return labels.astype(bool)


def demap_soft(symbols, scheme: str, noise_variance) -> SoftBits:
    """Max-log LLRs for each bit; ``noise_variance`` may be per symbol.

    Values are clipped to +-LLR_CLIP.
    """
    y = np.asarray(symbols, dtype=np.complex128).ravel()
    nv = np.asarray(noise_variance, dtype=float)
    if np.any(nv <= 0):
        raise ValueError("noise_variance must be positive")
    points = constellation(scheme)
    labels = _label_masks(scheme)
    d = np.abs(y[:, None] - points[None, :]) ** 2
    m = labels.shape[1]
    llr = np.empty((y.size, m))
    for k in range(m):
        ones = labels[:, k]
        llr[:, k] = d[:, ones].min(axis=1) - d[:, ~ones].min(axis=1)
    if nv.ndim:
        llr /= nv.ravel()[:, None]
    else:
        llr /= float(nv)
    np.clip(llr, -LLR_CLIP, LLR_CLIP, out=llr)
    llr[~np.isfinite(llr)] = 0.0
    return llr.ravel()


def hard_decision(llrs) -> np.ndarray:
    return (np.asarray(llrs) < 0).astype(np.int8)


# --------------------------------------------------------------------------
# CRC
# --------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _crc_table(spec: CrcSpec) -> tuple:
    w = spec.width
    mask = (1 << w) - 1
    poly = spec.polynomial & mask
    table = []
    for byte in range(256):
        reg = byte << (w - 8)
        for _ in range(8):
            reg = ((reg << 1) ^ poly) if reg & (1 << (w - 1)) else (reg << 1)
            reg &= mask
        table.append(reg)
    return tuple(table)


def _crc_register(bits: np.ndarray, spec: CrcSpec) -> int:
    w = spec.width
    mask = (1 << w) - 1
    poly = spec.polynomial & mask
    table = _crc_table(spec)
    n_bytes = bits.size // 8
    reg = 0
    for byte in np.packbits(bits[: 8 * n_bytes]).tolist():
        reg = ((reg << 8) & mask) ^ table[((reg >> (w - 8)) ^ byte) & 0xFF]
    for b in bits[8 * n_bytes:].tolist():
        top = ((reg >> (w - 1)) & 1) ^ b
        reg = (reg << 1) & mask
        if top:
            reg ^= poly
    return reg


def _int_to_bits(value: int, width: int) -> np.ndarray:
    return ((value >> np.arange(width - 1, -1, -1)) & 1).astype(np.int8)


def crc_compute(bits, spec: CrcSpec) -> np.ndarray:
    """Parity bits (MSB first) so that ``bits ++ parity`` is divisible by the generator."""
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    return _int_to_bits(_crc_register(bits, spec), spec.width)


def crc_check(bits_with_crc, spec: CrcSpec) -> bool:
    bits = np.asarray(bits_with_crc, dtype=np.uint8).ravel()
    if bits.size < spec.width:
        return False
    return _crc_register(bits, spec) == 0


def crc_attach(bits, spec: CrcSpec) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int8).ravel()
    return np.concatenate([bits, crc_compute(bits, spec)])


def bits_to_int(bits) -> int:
    value = 0
    for b in np.asarray(bits).ravel().tolist():
        value = (value << 1) | int(b)
    return value


# --------------------------------------------------------------------------
# Pseudo-random sequences
# --------------------------------------------------------------------------

GOLD_NC = 1600


@lru_cache(maxsize=256)
def _gold(c_init: int, length: int) -> np.ndarray:
    total = length + GOLD_NC
    n = total + 31 + 28
    x1 = np.zeros(n, dtype=np.uint8)
    x2 = np.zeros(n, dtype=np.uint8)
    x1[0] = 1
    x2[:31] = (c_init >> np.arange(31)) & 1
    # x(n+31) only depends on x(n..n+3), so 28 new values per step are known
    for s in range(0, total, 28):
        j = slice(s + 31, s + 59)
        x1[j] = x1[s + 3:s + 31] ^ x1[s:s + 28]
        x2[j] = x2[s + 3:s + 31] ^ x2[s + 2:s + 30] ^ x2[s + 1:s + 29] ^ x2[s:s + 28]
    c = x1[GOLD_NC:GOLD_NC + length] ^ x2[GOLD_NC:GOLD_NC + length]
    c.setflags(write=False)
    return c


def gold_sequence(c_init: int, length: int) -> np.ndarray:
    """Length-31 Gold sequence, x1 seeded with 1, x2 with ``c_init``, Nc = 1600."""
    if not 0 <= c_init < 2 ** 31:
        raise ValueError("c_init must be in [0, 2^31)")
    if length <= 0:
        raise ValueError("length must be positive")
    return _gold(int(c_init), int(length)).astype(np.int8)


# --------------------------------------------------------------------------
# Noise
# --------------------------------------------------------------------------

def noise_variance_for(snr_db: float, reference_power: float) -> float:
    if not reference_power > 0:
        raise ValueError("reference_power must be positive")
    if np.isposinf(snr_db):
        return 0.0
    return reference_power / 10.0 ** (snr_db / 10.0)


def add_awgn(w: ComplexWaveform, snr_db: float, reference_power: float,
             rng: np.random.Generator) -> ComplexWaveform:
    """Add circular complex Gaussian noise; ``snr_db=inf`` disables it."""
    nv = noise_variance_for(snr_db, reference_power)
    if nv == 0.0:
        return ComplexWaveform(w.samples.copy(), w.sample_rate_hz)
    n = w.samples.size
    noise = rng.standard_normal((2, n))
    noisy = w.samples + np.sqrt(nv / 2.0) * (noise[0] + 1j * noise[1])
    return ComplexWaveform(noisy, w.sample_rate_hz)
