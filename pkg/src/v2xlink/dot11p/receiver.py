"""802.11p receiver: detection, synchronization, LTF channel estimation,
SIG decoding and DATA demodulation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from ..dsp import ComplexWaveform, ResourceGrid, dft, demap_soft
from ..fec import DOT11_CODE, depuncture, viterbi_decode
from .params import (
    CP_LENGTH,
    DATA_BINS,
    DFT_SIZE,
    LTF_FREQ,
    LTF_GUARD,
    OCCUPIED_BINS,
    OFDM_SCALE,
    PILOT_BINS_SORTED,
    PILOT_VALUES,
    SERVICE_BITS,
    SIG_MCS,
    STF_LENGTH,
    SYMBOL_LENGTH,
    TAIL_BITS,
    PpduConfig,
    deinterleave,
    mcs_from_rate_bits,
    pilot_polarity,
    scrambler_sequence_from_prefix,
)

DETECTION_THRESHOLD = 0.5
DETECTION_WINDOW = 48
DETECTION_HOLD = 16
STF_PERIOD = 16
# FFT windows start this many samples early, inside the cyclic prefix
TIMING_BACKOFF = 3
_NOISE_FLOOR = 1e-12


class SyncError(Exception):
    """No packet found, or the waveform ends before the packet does."""


@dataclass(frozen=True)
class SyncResult:
    packet_offset: int
    coarse_cfo_hz: float
    fine_cfo_hz: float

    @property
    def cfo_hz(self) -> float:
        return self.coarse_cfo_hz + self.fine_cfo_hz

    @property
    def ltf_start(self) -> int:
        """Index of the first long training symbol (after its guard)."""
        return self.packet_offset + STF_LENGTH + LTF_GUARD


class LtfEstimate(NamedTuple):
    coefficients: np.ndarray  # 64 bins, zero on null subcarriers
    noise_variance: float


@dataclass
class Dot11pResult:
    """Receiver outcome; ``failure`` is None, "sync" or "sig"."""

    psdu_bits: Optional[np.ndarray]
    failure: Optional[str] = None
    sig_config: Optional[PpduConfig] = None
    sync: Optional[SyncResult] = None

    @property
    def ok(self) -> bool:
        return self.failure is None


def _sliding_sum(x: np.ndarray, window: int) -> np.ndarray:
    c = np.concatenate([[0], np.cumsum(x)])
    return c[window:] - c[:-window]


def _rotate(x: np.ndarray, cfo_hz: float, fs: float) -> np.ndarray:
    n = np.arange(x.size)
    return x * np.exp(-2j * np.pi * cfo_hz * n / fs)


def _long_symbol() -> np.ndarray:
    return OFDM_SCALE * dft(LTF_FREQ, DFT_SIZE, inverse=True)


def detect_and_synchronize(rx: ComplexWaveform, threshold: float = DETECTION_THRESHOLD,
                           window: int = DETECTION_WINDOW,
                           hold: int = DETECTION_HOLD) -> SyncResult:
    """Packet detection and coarse CFO from the STF (lag-16 autocorrelation),
    fine timing by LTF cross-correlation and fine CFO from the LTF (lag 64).

    The normalized autocorrelation must stay above ``threshold`` for
    ``hold`` consecutive samples.  Raises :class:`SyncError` otherwise.
    """
    x = rx.samples
    fs = rx.sample_rate_hz
    lag = STF_PERIOD
    if x.size < window + lag + hold + 2 * SYMBOL_LENGTH:
        raise SyncError("waveform too short")
    prod = x[:-lag] * np.conj(x[lag:])
    power = np.abs(x) ** 2
    corr = _sliding_sum(prod, window)
    energy = 0.5 * (_sliding_sum(power[:-lag], window) + _sliding_sum(power[lag:], window))
    metric = np.abs(corr) / np.maximum(energy, 1e-30)
    above = metric >= threshold
    run = _sliding_sum(above.astype(np.int64), hold)
    hits = np.flatnonzero(run == hold)
    if hits.size == 0:
        raise SyncError("no packet detected")
    det = int(hits[0])
    coarse = -np.angle(corr[det:det + hold].sum()) * fs / (2 * np.pi * lag)
    y = _rotate(x, coarse, fs)

    # fine timing: sum of the two long-symbol correlation peaks
    lt = _long_symbol()
    lo = det + 64
    hi = min(det + STF_LENGTH + LTF_GUARD + 64, x.size - 2 * DFT_SIZE - DFT_SIZE)
    if hi <= lo:
        raise SyncError("waveform ends inside the preamble")
    seg = y[lo:hi + 2 * DFT_SIZE]
    cc = np.abs(np.correlate(seg, lt, mode="valid"))
    score = cc[:hi - lo] + cc[DFT_SIZE:DFT_SIZE + hi - lo]
    t = lo + int(np.argmax(score))

    a = t - 8
    fine_corr = np.sum(y[a:a + DFT_SIZE] * np.conj(y[a + DFT_SIZE:a + 2 * DFT_SIZE]))
    fine = -np.angle(fine_corr) * fs / (2 * np.pi * DFT_SIZE)
    return SyncResult(t - STF_LENGTH - LTF_GUARD, float(coarse), float(fine))


def estimate_channel_ltf(grid) -> LtfEstimate:
    """Average of the two received long symbols divided by the known LTF.

    ``grid`` is a 64 x 2 (subcarrier x symbol) :class:`ResourceGrid` or
    array of the DFT outputs.  The noise variance per subcarrier comes from
    the difference of the two symbols.
    """
    cells = grid.cells if isinstance(grid, ResourceGrid) else np.asarray(grid)
    if cells.shape != (DFT_SIZE, 2):
        raise ValueError("LTF grid must be 64 x 2")
    y1, y2 = cells[:, 0], cells[:, 1]
    h = np.zeros(DFT_SIZE, dtype=np.complex128)
    ref = OFDM_SCALE * LTF_FREQ[OCCUPIED_BINS]
    h[OCCUPIED_BINS] = 0.5 * (y1[OCCUPIED_BINS] + y2[OCCUPIED_BINS]) / ref
    diff = y1[OCCUPIED_BINS] - y2[OCCUPIED_BINS]
    nv = float(np.mean(np.abs(diff) ** 2) / 2.0)
    return LtfEstimate(h, nv)


def _windows(y: np.ndarray, starts: np.ndarray) -> np.ndarray:
    idx = np.asarray(starts)[:, None] + np.arange(DFT_SIZE)[None, :]
    return dft(y[idx], DFT_SIZE)


def _equalize(freq: np.ndarray, est: LtfEstimate, polarity: np.ndarray):
    """CPE correction from the pilots, then zero forcing.

    Returns (data symbols (n, 48), per-symbol noise variance (n, 48))."""
    h = est.coefficients
    hp = h[PILOT_BINS_SORTED] * OFDM_SCALE * PILOT_VALUES
    pilots = freq[:, PILOT_BINS_SORTED] * polarity[:, None]
    cpe = np.angle(np.sum(pilots * np.conj(hp)[None, :], axis=1))
    hd = h[DATA_BINS] * OFDM_SCALE
    g2 = np.maximum(np.abs(hd) ** 2, _NOISE_FLOOR)
    eq = freq[:, DATA_BINS] * np.exp(-1j * cpe)[:, None] * np.conj(hd)[None, :] / g2[None, :]
    nv = np.maximum(est.noise_variance, _NOISE_FLOOR) / g2
    return eq, np.broadcast_to(nv, eq.shape)


def decode_sig(freq: np.ndarray, est: LtfEstimate) -> Optional[PpduConfig]:
    """Decode the SIG symbol (DFT output, 64 bins); None when invalid."""
    eq, nv = _equalize(freq.reshape(1, -1), est, pilot_polarity(1))
    llr = demap_soft(eq.ravel(), "BPSK", nv.ravel())
    bits = viterbi_decode(deinterleave(llr, SIG_MCS.coded_bits_per_symbol, 1), DOT11_CODE)
    if bits[:18].sum() % 2 or bits[4]:
        return None
    row = mcs_from_rate_bits(bits[:4])
    length = int(np.sum(bits[5:17].astype(np.int64) << np.arange(12)))
    if row is None or length == 0:
        return None
    return PpduConfig(row, length)


def receive(rx: ComplexWaveform, expected: Optional[PpduConfig] = None) -> Dot11pResult:
    """Full receive chain.  Failures are reported, never raised.

    With ``expected`` given, a SIG field that disagrees with it in rate or
    length counts as a SIG failure.
    """
    try:
        sync = detect_and_synchronize(rx)
    except SyncError:
        return Dot11pResult(None, "sync")
    fs = rx.sample_rate_hz
    y = _rotate(_rotate(rx.samples, sync.coarse_cfo_hz, fs), sync.fine_cfo_hz, fs)
    t = sync.ltf_start
    b = TIMING_BACKOFF
    sig_start = t + 2 * DFT_SIZE
    if t - b < 0 or sig_start + SYMBOL_LENGTH > y.size:
        return Dot11pResult(None, "sync", sync=sync)
    ltf = _windows(y, np.array([t - b, t + DFT_SIZE - b]))
    est = estimate_channel_ltf(ltf.T)

    sig_freq = _windows(y, np.array([sig_start + CP_LENGTH - b]))[0]
    cfg = decode_sig(sig_freq, est)
    if cfg is None:
        return Dot11pResult(None, "sig", sync=sync)
    if expected is not None and (cfg.mcs != expected.mcs
                                 or cfg.psdu_length_bytes != expected.psdu_length_bytes):
        return Dot11pResult(None, "sig", cfg, sync)

    n_sym = cfg.num_data_symbols
    data_start = sig_start + SYMBOL_LENGTH
    if data_start + n_sym * SYMBOL_LENGTH > y.size:
        return Dot11pResult(None, "sync", cfg, sync)
    starts = data_start + CP_LENGTH - b + SYMBOL_LENGTH * np.arange(n_sym)
    pol = pilot_polarity(n_sym + 1)[1:]
    eq, nv = _equalize(_windows(y, starts), est, pol)
    m = cfg.mcs
    llr = demap_soft(eq.ravel(), m.modulation, nv.ravel())
    llr = deinterleave(llr, m.coded_bits_per_symbol, m.bits_per_subcarrier)
    mother = depuncture(llr, m.coding_rate)
    n_bits = SERVICE_BITS + 8 * cfg.psdu_length_bytes + TAIL_BITS
    decoded = viterbi_decode(mother[:2 * n_bits], DOT11_CODE)
    scr = scrambler_sequence_from_prefix(decoded[:7], n_bits)
    data = decoded ^ scr
    psdu = data[SERVICE_BITS:SERVICE_BITS + 8 * cfg.psdu_length_bytes].astype(np.int8)
    return Dot11pResult(psdu, None, cfg, sync)
