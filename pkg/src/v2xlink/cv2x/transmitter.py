"""C-V2X sidelink transmitter: SCI/PSCCH, SL-SCH/PSSCH, DMRS and SC-FDMA."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import gcd

import numpy as np

from ..dsp import CRC16, CRC24A, ComplexWaveform, ResourceGrid, bits_to_int, crc_attach, dft, \
    gold_sequence, map_symbols
from ..fec import LTE_TBCC, RateMatchConfig, channel_interleave, conv_encode, conv_rate_match, \
    rate_match, segment_code_blocks, turbo_encode
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
    PSCCH_CAPACITY,
    PSCCH_DATA_SYMBOLS,
    PSSCH_DATA_SYMBOLS,
    SAMPLE_RATE_HZ,
    SC_PER_PRB,
    SUBCARRIER_BINS,
    ZEROED_SYMBOL,
    Cv2xMcsEntry,
    SciFormat1,
    SidelinkAllocation,
    pssch_c_init,
    riv_encode,
)

OCC_EVEN = np.array([1, 1, 1, 1])
OCC_ODD = np.array([1, -1, 1, -1])


@dataclass(frozen=True)
class SciCodeword:
    bits: np.ndarray
    nxid: int


def sci_encode(sci: SciFormat1, capacity: int = PSCCH_CAPACITY) -> SciCodeword:
    """CRC-16, tail-biting convolutional code and rate matching to ``capacity``.

    NXID is the integer value of the 16 CRC bits (MSB first).
    """
    with_crc = crc_attach(sci.pack(), CRC16)
    nxid = bits_to_int(with_crc[-16:])
    coded = conv_rate_match(conv_encode(with_crc, LTE_TBCC), capacity)
    return SciCodeword(coded.astype(np.int8), nxid)


def scramble(bits, c_init: int) -> np.ndarray:
    """XOR with the Gold sequence; applying it twice restores the input."""
    bits = np.asarray(bits, dtype=np.int8).ravel()
    return bits ^ gold_sequence(c_init, bits.size)


# --------------------------------------------------------------------------
# DMRS
# --------------------------------------------------------------------------

def _zc_root(n: int) -> int:
    u = max(n // 3, 1)
    while gcd(u, n) != 1:
        u += 1
    return u


@lru_cache(maxsize=None)
def zadoff_chu(n: int, root: int | None = None) -> np.ndarray:
    """Length-n Zadoff-Chu sequence (even and odd n)."""
    u = _zc_root(n) if root is None else root
    k = np.arange(n)
    if n % 2:
        seq = np.exp(-1j * np.pi * u * k * (k + 1) / n)
    else:
        seq = np.exp(-1j * np.pi * u * k * k / n)
    seq.setflags(write=False)
    return seq


def shift_ramp(n: int, cyclic_shift: int) -> np.ndarray:
    """Phase ramp exp(j 2 pi n_cs k / 12) realizing a cyclic time shift."""
    return np.exp(2j * np.pi * cyclic_shift * np.arange(n) / SC_PER_PRB)


def dmrs_generate(num_subcarriers: int, cyclic_shift: int = 0, odd_cover: bool = False) -> np.ndarray:
    """Pilots for the four DMRS symbols, shape (num_subcarriers, 4).

    Zadoff-Chu base sequence of the allocation length, cyclic shift as a
    phase ramp, and the orthogonal cover [+1,+1,+1,+1] or [+1,-1,+1,-1].
    """
    if cyclic_shift not in range(SC_PER_PRB):
        raise ValueError("cyclic shift must be 0..11")
    base = zadoff_chu(num_subcarriers) * shift_ramp(num_subcarriers, cyclic_shift)
    occ = OCC_ODD if odd_cover else OCC_EVEN
    return base[:, None] * occ[None, :]


# --------------------------------------------------------------------------
# Control channel
# --------------------------------------------------------------------------

def _precode(symbols: np.ndarray, n_sc: int, n_sym: int) -> np.ndarray:
    """Transform precoding; returns (n_sc, n_sym) frequency cells."""
    return dft(symbols.reshape(n_sym, n_sc), n_sc).T


def pscch_build(coded_bits, cyclic_shift: int) -> np.ndarray:
    """PSCCH cells on 24 subcarriers x 14 symbols (DMRS included, last symbol zero)."""
    if cyclic_shift not in CYCLIC_SHIFTS:
        raise ValueError(f"PSCCH cyclic shift must be one of {CYCLIC_SHIFTS}")
    coded_bits = np.asarray(coded_bits).ravel()
    if coded_bits.size != PSCCH_CAPACITY:
        raise ValueError(f"PSCCH carries {PSCCH_CAPACITY} coded bits")
    n_sc = 2 * SC_PER_PRB
    inter = channel_interleave(coded_bits, 2, len(PSCCH_DATA_SYMBOLS))
    syms = map_symbols(scramble(inter, PSCCH_C_INIT), "QPSK")
    cells = np.zeros((n_sc, NUM_SYMBOLS), dtype=np.complex128)
    ramp = shift_ramp(n_sc, cyclic_shift)
    cells[:, PSCCH_DATA_SYMBOLS] = _precode(syms, n_sc, len(PSCCH_DATA_SYMBOLS)) * ramp[:, None]
    cells[:, DMRS_SYMBOLS] = dmrs_generate(n_sc, cyclic_shift)
    cells[:, ZEROED_SYMBOL] = 0
    return cells


# --------------------------------------------------------------------------
# Shared channel
# --------------------------------------------------------------------------

def slsch_encode(tb_bits, mcs: Cv2xMcsEntry) -> np.ndarray:
    """TB CRC, segmentation, turbo coding, RV0 rate matching, concatenation
    and channel interleaving into ``mcs.codeword_bits`` bits."""
    tb_bits = np.asarray(tb_bits, dtype=np.int8).ravel()
    if tb_bits.size != mcs.tbs_bits:
        raise ValueError(f"transport block has {tb_bits.size} bits, MCS expects {mcs.tbs_bits}")
    blocks, plan = segment_code_blocks(crc_attach(tb_bits, CRC24A))
    qm = mcs.bits_per_symbol
    lengths = [qm * e for e in code_block_lengths(mcs.codeword_bits // qm, plan.num_blocks)]
    parts = []
    for r, (block, e) in enumerate(zip(blocks, lengths)):
        filler = plan.filler if r == 0 else 0
        parts.append(rate_match(turbo_encode(block), RateMatchConfig(e, 0), filler))
    codeword = np.concatenate(parts)
    return channel_interleave(codeword, qm, len(PSSCH_DATA_SYMBOLS)).astype(np.int8)


def pssch_build(codeword, nxid: int, mcs: Cv2xMcsEntry) -> np.ndarray:
    """PSSCH cells on n_prb*12 subcarriers x 14 symbols."""
    codeword = np.asarray(codeword).ravel()
    if codeword.size != mcs.codeword_bits:
        raise ValueError("codeword length does not match the MCS capacity")
    n_sc = mcs.n_prb * SC_PER_PRB
    syms = map_symbols(scramble(codeword, pssch_c_init(nxid)), mcs.modulation)
    cells = np.zeros((n_sc, NUM_SYMBOLS), dtype=np.complex128)
    cells[:, PSSCH_DATA_SYMBOLS] = _precode(syms, n_sc, len(PSSCH_DATA_SYMBOLS))
    cells[:, DMRS_SYMBOLS] = dmrs_generate(n_sc, 0, odd_cover=bool(nxid % 2))
    return cells


# --------------------------------------------------------------------------
# SC-FDMA
# --------------------------------------------------------------------------

def scfdma_modulate(grid: ResourceGrid) -> ComplexWaveform:
    """600 x 14 grid to one 15360-sample subframe."""
    if grid.cells.shape != (NUM_SUBCARRIERS, NUM_SYMBOLS):
        raise ValueError(f"grid must be {NUM_SUBCARRIERS} x {NUM_SYMBOLS}")
    freq = np.zeros((NUM_SYMBOLS, DFT_SIZE), dtype=np.complex128)
    freq[:, SUBCARRIER_BINS] = grid.cells.T
    t = OFDM_SCALE * dft(freq, DFT_SIZE, inverse=True)
    parts = [np.concatenate([t[i, -cp:], t[i]]) for i, cp in enumerate(CP_LENGTHS)]
    return ComplexWaveform(np.concatenate(parts), SAMPLE_RATE_HZ)


@dataclass(frozen=True)
class Cv2xTransmission:
    waveform: ComplexWaveform
    grid: ResourceGrid
    sci: SciFormat1
    nxid: int
    cyclic_shift: int
    allocation: SidelinkAllocation


def transmit_subframe(tb_bits, mcs: Cv2xMcsEntry, cyclic_shift: int = 0,
                      allocation: SidelinkAllocation | None = None) -> Cv2xTransmission:
    """One subframe carrying the SCI on PSCCH and ``tb_bits`` on the adjacent PSSCH."""
    if allocation is None:
        allocation = SidelinkAllocation.adjacent(mcs.n_prb)
    if len(allocation.pssch_prbs) != mcs.n_prb:
        raise ValueError("allocation size does not match the MCS PRB count")
    sci = SciFormat1(mcs.index, riv_encode(allocation.pssch_prbs[0], mcs.n_prb))
    control = sci_encode(sci)
    grid = ResourceGrid.empty(NUM_SUBCARRIERS, NUM_SYMBOLS)
    grid.cells[allocation.pscch_subcarriers] = pscch_build(control.bits, cyclic_shift)
    grid.cells[allocation.pssch_subcarriers] = pssch_build(slsch_encode(tb_bits, mcs), control.nxid, mcs)
    grid.cells[:, ZEROED_SYMBOL] = 0
    return Cv2xTransmission(scfdma_modulate(grid), grid, sci, control.nxid, cyclic_shift, allocation)
