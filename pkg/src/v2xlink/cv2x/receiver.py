"""C-V2X sidelink receiver: SC-FDMA demodulation, DMRS channel estimation,
blind PSCCH decoding and PSSCH decoding."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

from ..dsp import CRC16, CRC24A, CRC24B, ComplexWaveform, ResourceGrid, bits_to_int, crc_check, \
    demap_soft, dft, gold_sequence
from ..fec import LTE_TBCC, RateMatchConfig, channel_deinterleave, conv_rate_recover, desegment, \
    rate_recover, segmentation_plan, turbo_decode, viterbi_decode
from ..fec.ratematch import code_block_lengths
from .params import (
    CP_LENGTHS,
    CYCLIC_SHIFTS,
    DFT_SIZE,
    DMRS_SYMBOLS,
    NUM_SUBCARRIERS,
    NUM_SYMBOLS,
    OFDM_SCALE,
    PSCCH_C_INIT,
    PSCCH_DATA_SYMBOLS,
    PSSCH_DATA_SYMBOLS,
    SC_PER_PRB,
    SCI_BITS,
    SUBCARRIER_BINS,
    SUBFRAME_SAMPLES,
    SYMBOL_STARTS,
    ZEROED_SYMBOL,
    Cv2xMcsEntry,
    SciFormat1,
    SidelinkAllocation,
    pssch_c_init,
)
from .transmitter import dmrs_generate, shift_ramp

SMOOTHING_WINDOW = 7
_FLOOR = 1e-12


class ChannelEstimate(NamedTuple):
    coefficients: np.ndarray  # (n_sc, 14)
    noise_variance: float


@dataclass
class Cv2xResult:
    """Receiver outcome; ``failure`` is None, "sci" or "payload"."""

    tb_bits: Optional[np.ndarray]
    failure: Optional[str] = None
    sci: Optional[SciFormat1] = None
    nxid: Optional[int] = None
    cyclic_shift: Optional[int] = None
    cfo_hz: float = 0.0

    @property
    def ok(self) -> bool:
        return self.failure is None


def scfdma_demodulate(rx: ComplexWaveform) -> ResourceGrid:
    """Strip cyclic prefixes and return the 600 x 14 grid of one subframe."""
    x = rx.samples
    if x.size < SUBFRAME_SAMPLES:
        x = np.concatenate([x, np.zeros(SUBFRAME_SAMPLES - x.size, dtype=np.complex128)])
    idx = (SYMBOL_STARTS + CP_LENGTHS)[:, None] + np.arange(DFT_SIZE)[None, :]
    freq = dft(x[idx], DFT_SIZE) / OFDM_SCALE
    return ResourceGrid(freq[:, SUBCARRIER_BINS].T)


def _smooth(h: np.ndarray, window: int):
    """Centered moving average along axis 0, shrinking at the band edges.

    Returns (average, number of points averaged per row)."""
    n = h.shape[0]
    half = window // 2
    c = np.concatenate([np.zeros((1,) + h.shape[1:], dtype=h.dtype), np.cumsum(h, axis=0)])
    lo = np.clip(np.arange(n) - half, 0, n)
    hi = np.clip(np.arange(n) + half + 1, 0, n)
    count = hi - lo
    return (c[hi] - c[lo]) / count[:, None], count


def channel_estimate_dmrs(cells: np.ndarray, pilots: np.ndarray,
                          window: int = SMOOTHING_WINDOW, extrapolate: bool = True,
                          shrink: bool = True) -> ChannelEstimate:
    """LS at the DMRS, frequency smoothing and PCHIP time interpolation.

    ``cells`` are the received (n_sc, 14) cells of one allocation and
    ``pilots`` the (n_sc, 4) transmitted DMRS.  Symbols outside 2..11 follow
    the end pieces of the interpolant, or take the nearest DMRS estimate
    when ``extrapolate`` is False.  Noise variance comes from the LS residual
    around the smoothed estimate.

    With ``shrink`` the interpolated track is pulled towards the mean of the
    four DMRS estimates by a Wiener weight 1 - (expected noise spread) /
    (observed spread): a static channel is averaged over all four pilots
    while a fast-fading one keeps its time variation.
    """
    ls = cells[:, DMRS_SYMBOLS] / pilots
    if window > 1:
        smooth, count = _smooth(ls, window)
        # the residual of a w-point average keeps (1 - 1/w) of the noise power
        keep = 1.0 - 1.0 / count
        nv = float(np.mean(np.abs(ls - smooth) ** 2 / keep[:, None]))
    else:
        smooth, count, nv = ls, np.ones(ls.shape[0]), 0.0
    tc = np.arange(NUM_SYMBOLS, dtype=float)
    if not extrapolate:
        tc = np.clip(tc, DMRS_SYMBOLS[0], DMRS_SYMBOLS[-1])
    re = PchipInterpolator(DMRS_SYMBOLS, smooth.real, axis=1)(tc)
    im = PchipInterpolator(DMRS_SYMBOLS, smooth.imag, axis=1)(tc)
    track = re + 1j * im
    if shrink:
        centre = smooth.mean(axis=1, keepdims=True)
        spread = float(np.mean(np.abs(smooth - centre) ** 2))
        # deviation of 4 iid samples from their mean keeps 3/4 of the variance
        noise_spread = 0.75 * nv * float(np.mean(1.0 / count))
        weight = 0.0 if spread <= noise_spread else 1.0 - noise_spread / spread
        track = centre + weight * (track - centre)
    return ChannelEstimate(track, nv)


def estimate_cfo(grid: ResourceGrid, subcarriers: np.ndarray, sample_rate_hz: float) -> float:
    """Frequency offset from the phase drift between DMRS symbols 2->8 and 5->11.

    Both pairs carry identical pilots whatever the cyclic shift or cover,
    so the estimate needs no pilot knowledge.
    """
    y = grid.cells[subcarriers]
    acc = np.sum(y[:, 8] * np.conj(y[:, 2])) + np.sum(y[:, 11] * np.conj(y[:, 5]))
    dt = (SYMBOL_STARTS[8] - SYMBOL_STARTS[2]) / sample_rate_hz
    return float(np.angle(acc) / (2 * np.pi * dt))


def _equalize(cells, est: ChannelEstimate, symbols, ramp=None):
    """Zero forcing, optional shift removal and inverse transform precoding.

    Returns (time-domain data symbols (n_sym, n_sc), per-symbol noise variance)."""
    h = est.coefficients[:, symbols]
    g2 = np.maximum(np.abs(h) ** 2, _FLOOR)
    eq = cells[:, symbols] * np.conj(h) / g2
    if ramp is not None:
        eq = eq * np.conj(ramp)[:, None]
    n_sc = cells.shape[0]
    data = dft(eq.T, n_sc, inverse=True)
    nv = np.mean(np.maximum(est.noise_variance, _FLOOR) / g2, axis=0)
    return data, nv


def _soft_bits(data, nv, scheme: str) -> np.ndarray:
    per_symbol = np.repeat(nv, data.shape[1])
    return demap_soft(data.ravel(), scheme, per_symbol)


def _descramble(llr: np.ndarray, c_init: int) -> np.ndarray:
    c = gold_sequence(c_init, llr.size)
    return np.where(c == 1, -llr, llr)


@dataclass(frozen=True)
class SciDecode:
    sci: SciFormat1
    nxid: int
    cyclic_shift: int


def decode_sci_llrs(llr: np.ndarray) -> Optional[tuple]:
    """Control-channel bit processing after demapping; (sci, nxid) or None."""
    llr = _descramble(llr, PSCCH_C_INIT)
    llr = channel_deinterleave(llr, 2, len(PSCCH_DATA_SYMBOLS))
    mother = conv_rate_recover(llr, SCI_BITS + 16)
    bits = viterbi_decode(mother, LTE_TBCC)
    if not crc_check(bits, CRC16):
        return None
    try:
        sci = SciFormat1.unpack(bits[:SCI_BITS])
    except ValueError:
        return None
    return sci, bits_to_int(bits[SCI_BITS:])


def pscch_blind_decode(grid: ResourceGrid, allocation: SidelinkAllocation) -> Optional[SciDecode]:
    """Try each cyclic shift; return the first whose CRC-16 passes."""
    sc = allocation.pscch_subcarriers
    cells = grid.cells[sc]
    n_sc = sc.size
    zeroed = PSCCH_DATA_SYMBOLS.index(ZEROED_SYMBOL)
    for shift in CYCLIC_SHIFTS:
        pilots = dmrs_generate(n_sc, shift)
        est = channel_estimate_dmrs(cells, pilots)
        data, nv = _equalize(cells, est, PSCCH_DATA_SYMBOLS, shift_ramp(n_sc, shift))
        llr = _soft_bits(data, nv, "QPSK").reshape(len(PSCCH_DATA_SYMBOLS), -1)
        llr[zeroed] = 0.0  # the last symbol was blanked
        decoded = decode_sci_llrs(llr.ravel())
        if decoded is not None:
            return SciDecode(decoded[0], decoded[1], shift)
    return None


def decode_pssch(grid: ResourceGrid, allocation: SidelinkAllocation, mcs: Cv2xMcsEntry,
                 nxid: int) -> Optional[np.ndarray]:
    """Equalize and decode the shared channel; returns the TB or None on CRC failure."""
    cells = grid.cells[allocation.pssch_subcarriers]
    n_sc = cells.shape[0]
    pilots = dmrs_generate(n_sc, 0, odd_cover=bool(nxid % 2))
    est = channel_estimate_dmrs(cells, pilots)
    data, nv = _equalize(cells, est, PSSCH_DATA_SYMBOLS)
    qm = mcs.bits_per_symbol
    llr = _descramble(_soft_bits(data, nv, mcs.modulation), pssch_c_init(nxid))
    llr = channel_deinterleave(llr, qm, len(PSSCH_DATA_SYMBOLS))

    plan = segmentation_plan(mcs.tbs_bits + 24)
    lengths = [qm * e for e in code_block_lengths(mcs.codeword_bits // qm, plan.num_blocks)]
    blocks, pos = [], 0
    for r, (k, e) in enumerate(zip(plan.block_sizes, lengths)):
        filler = plan.filler if r == 0 else 0
        streams = rate_recover(llr[pos:pos + e], RateMatchConfig(e, 0), k, filler)
        pos += e
        crc = CRC24B if plan.crc_per_block else CRC24A
        blocks.append(turbo_decode(*streams, early_stop=lambda b, c=crc: crc_check(b, c)))
    tb = desegment(blocks, plan)
    if not crc_check(tb, CRC24A):
        return None
    return tb[:-24].astype(np.int8)


def receive_subframe(rx: ComplexWaveform, allocation: SidelinkAllocation,
                     mcs: Cv2xMcsEntry, correct_cfo: bool = True) -> Cv2xResult:
    """Full receive chain; failures are reported in the result.

    The SCI must announce the expected MCS index and PSSCH PRBs, otherwise
    the subframe counts as a control failure.
    """
    x = rx.samples[:SUBFRAME_SAMPLES]
    grid = scfdma_demodulate(ComplexWaveform(x, rx.sample_rate_hz))
    cfo = 0.0
    if correct_cfo:
        used = np.concatenate([allocation.pscch_subcarriers, allocation.pssch_subcarriers])
        cfo = estimate_cfo(grid, used, rx.sample_rate_hz)
        n = np.arange(x.size)
        x = x * np.exp(-2j * np.pi * cfo * n / rx.sample_rate_hz)
        grid = scfdma_demodulate(ComplexWaveform(x, rx.sample_rate_hz))
    control = pscch_blind_decode(grid, allocation)
    if control is None:
        return Cv2xResult(None, "sci", cfo_hz=cfo)
    if control.sci.mcs_index != mcs.index or control.sci.pssch_prbs() != tuple(allocation.pssch_prbs):
        return Cv2xResult(None, "sci", control.sci, control.nxid, control.cyclic_shift, cfo)
    tb = decode_pssch(grid, allocation, mcs, control.nxid)
    failure = None if tb is not None else "payload"
    return Cv2xResult(tb, failure, control.sci, control.nxid, control.cyclic_shift, cfo)
