"""802.11p PPDU generation: preamble, SIG field and DATA symbols."""

from __future__ import annotations

import numpy as np

from ..dsp import ComplexWaveform, dft, map_symbols
from ..fec import DOT11_CODE, conv_encode, puncture
from .params import (
    CP_LENGTH,
    DATA_BINS,
    DFT_SIZE,
    LTF_FREQ,
    LTF_GUARD,
    OFDM_SCALE,
    PILOT_BINS_SORTED,
    PILOT_VALUES,
    SAMPLE_RATE_HZ,
    SERVICE_BITS,
    SIG_MCS,
    STF_FREQ,
    TAIL_BITS,
    PpduConfig,
    interleave,
    pilot_polarity,
    scrambler_sequence,
)


def _ofdm_time(freq: np.ndarray) -> np.ndarray:
    """64-point inverse DFT of one or more symbols, scaled to unit power."""
    return OFDM_SCALE * dft(freq, DFT_SIZE, inverse=True)


def build_preamble() -> ComplexWaveform:
    """Ten 16-sample short symbols (160) followed by a 32-sample guard and
    two 64-sample long symbols (160): 320 samples, 32 us at 10 MHz."""
    short = _ofdm_time(STF_FREQ)
    stf = np.tile(short, 3)[:160]
    long_ = _ofdm_time(LTF_FREQ)
    ltf = np.concatenate([long_[-LTF_GUARD:], long_, long_])
    return ComplexWaveform(np.concatenate([stf, ltf]), SAMPLE_RATE_HZ)


def sig_bits(cfg: PpduConfig) -> np.ndarray:
    """24 SIG bits: RATE(4), reserved, LENGTH(12, LSB first), parity, 6 tail zeros."""
    bits = np.zeros(24, dtype=np.int8)
    bits[0:4] = cfg.mcs.rate_bits
    bits[5:17] = (cfg.psdu_length_bytes >> np.arange(12)) & 1
    bits[17] = bits[:17].sum() % 2
    return bits


def _ofdm_symbols(data_syms: np.ndarray, polarity: np.ndarray) -> np.ndarray:
    """Build (n, 80) time-domain symbols with cyclic prefix from (n, 48) data values."""
    n = data_syms.shape[0]
    freq = np.zeros((n, DFT_SIZE), dtype=np.complex128)
    freq[:, DATA_BINS] = data_syms
    freq[:, PILOT_BINS_SORTED] = polarity[:, None] * PILOT_VALUES[None, :]
    t = _ofdm_time(freq)
    return np.concatenate([t[:, -CP_LENGTH:], t], axis=1)


def encode_sig(cfg: PpduConfig) -> np.ndarray:
    """SIG OFDM symbol (80 samples): BPSK, rate 1/2, interleaved, not scrambled."""
    coded = conv_encode(sig_bits(cfg), DOT11_CODE)
    inter = interleave(coded, SIG_MCS.coded_bits_per_symbol, 1)
    syms = map_symbols(inter, "BPSK").reshape(1, -1)
    return _ofdm_symbols(syms, pilot_polarity(1)).ravel()


def data_field_bits(psdu_bits, cfg: PpduConfig) -> np.ndarray:
    """SERVICE ++ PSDU ++ tail ++ pad, scrambled, with the tail re-zeroed."""
    n_psdu = 8 * cfg.psdu_length_bytes
    total = cfg.num_data_symbols * cfg.mcs.data_bits_per_symbol
    data = np.zeros(total, dtype=np.int8)
    data[SERVICE_BITS:SERVICE_BITS + n_psdu] = psdu_bits
    data ^= scrambler_sequence(cfg.scrambler_seed, total)
    tail = SERVICE_BITS + n_psdu
    data[tail:tail + TAIL_BITS] = 0
    return data


def encode_data(psdu_bits, cfg: PpduConfig) -> np.ndarray:
    """DATA field samples: n_sym symbols of 80 samples."""
    m = cfg.mcs
    coded = puncture(conv_encode(data_field_bits(psdu_bits, cfg), DOT11_CODE), m.coding_rate)
    inter = interleave(coded, m.coded_bits_per_symbol, m.bits_per_subcarrier)
    syms = map_symbols(inter, m.modulation).reshape(cfg.num_data_symbols, -1)
    pol = pilot_polarity(cfg.num_data_symbols + 1)[1:]
    return _ofdm_symbols(syms, pol).ravel()


def transmit(psdu_bits, cfg: PpduConfig) -> ComplexWaveform:
    """Complete PPDU: preamble, SIG and DATA."""
    psdu_bits = np.asarray(psdu_bits, dtype=np.int8).ravel()
    if psdu_bits.size != 8 * cfg.psdu_length_bytes:
        raise ValueError(
            f"PSDU has {psdu_bits.size} bits, configuration expects {8 * cfg.psdu_length_bytes}")
    samples = np.concatenate([build_preamble().samples, encode_sig(cfg), encode_data(psdu_bits, cfg)])
    return ComplexWaveform(samples, SAMPLE_RATE_HZ)
