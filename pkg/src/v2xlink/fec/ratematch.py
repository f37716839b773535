"""LTE transport-channel helpers: code block segmentation, circular-buffer
rate matching for turbo and tail-biting convolutional codes, and the
time-first channel interleaver."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..dsp import CRC24B, crc_attach, crc_check
from .turbo import BLOCK_SIZES, MAX_BLOCK_SIZE

SUBBLOCK_COLUMNS = 32
TURBO_COLUMN_PERM = np.array([0, 16, 8, 24, 4, 20, 12, 28, 2, 18, 10, 26, 6, 22, 14, 30,
                              1, 17, 9, 25, 5, 21, 13, 29, 3, 19, 11, 27, 7, 23, 15, 31])
CONV_COLUMN_PERM = np.array([1, 17, 9, 25, 5, 21, 13, 29, 3, 19, 11, 27, 7, 23, 15, 31,
                             0, 16, 8, 24, 4, 20, 12, 28, 2, 18, 10, 26, 6, 22, 14, 30])


@dataclass(frozen=True)
class RateMatchConfig:
    output_length: int
    redundancy_version: int = 0

    def __post_init__(self):
        if self.output_length <= 0:
            raise ValueError("output_length must be positive")
        if self.redundancy_version not in (0, 1, 2, 3):
            raise ValueError("redundancy_version must be 0..3")


# --------------------------------------------------------------------------
# Code block segmentation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Segmentation:
    input_length: int
    num_blocks: int
    block_sizes: tuple
    filler: int
    crc_per_block: bool


def segmentation_plan(b: int) -> Segmentation:
    """LTE segmentation of a ``b``-bit sequence (TB including its CRC)."""
    if b <= 0:
        raise ValueError("segmentation input must be non-empty")
    z = MAX_BLOCK_SIZE
    if b <= z:
        c, l, b_prime = 1, 0, b
    else:
        l = 24
        c = -(-b // (z - l))
        b_prime = b + c * l
    k_plus = next(k for k in BLOCK_SIZES if c * k >= b_prime)
    if c == 1:
        c_plus, c_minus, k_minus = 1, 0, 0
    else:
        k_minus = max(k for k in BLOCK_SIZES if k < k_plus)
        delta = k_plus - k_minus
        c_minus = (c * k_plus - b_prime) // delta
        c_plus = c - c_minus
    sizes = (k_minus,) * c_minus + (k_plus,) * c_plus
    filler = c_plus * k_plus + c_minus * k_minus - b_prime
    return Segmentation(b, c, sizes, filler, l > 0)


def segment_code_blocks(bits) -> tuple:
    """Split into code blocks; returns (blocks, plan).

    Filler bits (zeros) lead the first block; with more than one block each
    block carries its own CRC-24B.
    """
    bits = np.asarray(bits, dtype=np.int8).ravel()
    plan = segmentation_plan(bits.size)
    blocks = []
    pos = 0
    for r, k in enumerate(plan.block_sizes):
        payload = k - (24 if plan.crc_per_block else 0)
        fill = plan.filler if r == 0 else 0
        chunk = bits[pos:pos + payload - fill]
        pos += payload - fill
        block = np.concatenate([np.zeros(fill, dtype=np.int8), chunk])
        if plan.crc_per_block:
            block = crc_attach(block, CRC24B)
        blocks.append(block.astype(np.int8))
    return blocks, plan


def desegment(blocks, plan: Segmentation, check_crc: bool = False):
    """Inverse of :func:`segment_code_blocks`.

    With ``check_crc`` a tuple (bits, all_block_crcs_ok) is returned.
    """
    parts = []
    ok = True
    for r, block in enumerate(blocks):
        block = np.asarray(block, dtype=np.int8)
        if plan.crc_per_block:
            if check_crc:
                ok &= crc_check(block, CRC24B)
            block = block[:-24]
        fill = plan.filler if r == 0 else 0
        parts.append(block[fill:])
    bits = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int8)
    return (bits, ok) if check_crc else bits


def code_block_lengths(g: int, num_blocks: int) -> list:
    """Rate-matched output length E_r per block for ``g`` coded bits (one layer, Qm folded in by caller)."""
    gamma = g % num_blocks
    base = g // num_blocks
    return [base if r <= num_blocks - gamma - 1 else base + 1 for r in range(num_blocks)]


# --------------------------------------------------------------------------
# Sub-block interleaving
# --------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _subblock_indices(d: int, kind: str, stream: int) -> tuple:
    """Positions (into the stream, -1 for NULL) read out by the sub-block interleaver."""
    rows = -(-d // SUBBLOCK_COLUMNS)
    kpi = rows * SUBBLOCK_COLUMNS
    nd = kpi - d
    y = np.concatenate([np.full(nd, -1), np.arange(d)])
    perm = TURBO_COLUMN_PERM if kind == "turbo" else CONV_COLUMN_PERM
    if kind == "turbo" and stream == 2:
        k = np.arange(kpi)
        pi = (perm[k // rows] + SUBBLOCK_COLUMNS * (k % rows) + 1) % kpi
        v = y[pi]
    else:
        v = y.reshape(rows, SUBBLOCK_COLUMNS)[:, perm].T.ravel()
    v.setflags(write=False)
    return v, rows


@lru_cache(maxsize=None)
def turbo_buffer_map(k: int, filler: int = 0) -> tuple:
    """Circular buffer of a K-bit turbo block as (stream, index) pairs.

    Returns (stream_ids, positions, rows); NULL entries (dummy and filler
    bits) carry position -1.
    """
    d = k + 4
    v0, rows = _subblock_indices(d, "turbo", 0)
    v1, _ = _subblock_indices(d, "turbo", 1)
    v2, _ = _subblock_indices(d, "turbo", 2)
    kpi = v0.size
    pos = np.empty(3 * kpi, dtype=np.int64)
    sid = np.empty(3 * kpi, dtype=np.int64)
    pos[:kpi], sid[:kpi] = v0, 0
    pos[kpi::2], sid[kpi::2] = v1, 1
    pos[kpi + 1::2], sid[kpi + 1::2] = v2, 2
    # filler bits are NULL in the systematic and first parity streams
    if filler:
        is_fill = (pos >= 0) & (pos < filler) & (sid < 2)
        pos = np.where(is_fill, -1, pos)
    pos.setflags(write=False)
    sid.setflags(write=False)
    return sid, pos, rows


def _selection(sid, pos, rows, cfg: RateMatchConfig, turbo: bool):
    ncb = pos.size
    if turbo:
        k0 = rows * (2 * -(-ncb // (8 * rows)) * cfg.redundancy_version + 2)
    else:
        k0 = 0
    order = np.roll(np.arange(ncb), -k0)
    valid = order[pos[order] >= 0]
    if valid.size == 0:
        raise ValueError("circular buffer holds no data bits")
    reps = -(-cfg.output_length // valid.size)
    picked = np.tile(valid, reps)[:cfg.output_length]
    return sid[picked], pos[picked]


def rate_match(streams, cfg: RateMatchConfig, filler: int = 0) -> np.ndarray:
    """Turbo rate matching of (d0, d1, d2) to ``cfg.output_length`` bits."""
    d0, d1, d2 = (np.asarray(s) for s in streams)
    k = d0.size - 4
    sid, pos, rows = turbo_buffer_map(k, filler)
    s, p = _selection(sid, pos, rows, cfg, turbo=True)
    stacked = np.stack([d0, d1, d2])
    return stacked[s, p]


def rate_recover(llrs, cfg: RateMatchConfig, k: int, filler: int = 0):
    """Place received LLRs back into the three K+4 streams, summing repeats.

    Never-transmitted positions stay at zero; filler positions are set to a
    large positive value (known zero bits).
    """
    llrs = np.asarray(llrs, dtype=np.float64).ravel()
    if llrs.size != cfg.output_length:
        raise ValueError("LLR count does not match output_length")
    sid, pos, rows = turbo_buffer_map(k, filler)
    s, p = _selection(sid, pos, rows, cfg, turbo=True)
    out = np.zeros((3, k + 4))
    np.add.at(out, (s, p), llrs)
    if filler:
        out[0, :filler] = 50.0
        out[1, :filler] = 50.0  # first-parity bits of leading zeros in state 0 are zero too
    return out[0], out[1], out[2]


@lru_cache(maxsize=None)
def conv_buffer_map(d: int) -> tuple:
    v0, rows = _subblock_indices(d, "conv", 0)
    kpi = v0.size
    sid = np.repeat(np.arange(3), kpi)
    pos = np.concatenate([v0, v0, v0])
    return sid, pos, rows


def conv_rate_match(coded, output_length: int) -> np.ndarray:
    """Rate matching for the rate-1/3 tail-biting code (interleaved A B C input)."""
    coded = np.asarray(coded).ravel()
    if coded.size % 3:
        raise ValueError("tail-biting coded length must be a multiple of 3")
    streams = coded.reshape(-1, 3).T
    sid, pos, rows = conv_buffer_map(streams.shape[1])
    s, p = _selection(sid, pos, rows, RateMatchConfig(output_length), turbo=False)
    return streams[s, p]


def conv_rate_recover(llrs, d: int) -> np.ndarray:
    """Accumulate rate-matched LLRs back to the interleaved 3*d mother stream."""
    llrs = np.asarray(llrs, dtype=np.float64).ravel()
    sid, pos, rows = conv_buffer_map(d)
    s, p = _selection(sid, pos, rows, RateMatchConfig(llrs.size), turbo=False)
    out = np.zeros((3, d))
    np.add.at(out, (s, p), llrs)
    return out.T.ravel()


# --------------------------------------------------------------------------
# Channel interleaver
# --------------------------------------------------------------------------

@lru_cache(maxsize=None)
def channel_interleaver_perm(num_bits: int, bits_per_symbol: int, columns: int) -> np.ndarray:
    """Bit order after writing Qm-bit groups row by row into ``columns``
    columns and reading column by column (column c becomes time symbol c)."""
    if num_bits % (bits_per_symbol * columns):
        raise ValueError("codeword length must fill the interleaver matrix")
    groups = num_bits // bits_per_symbol
    rows = groups // columns
    g = np.arange(groups).reshape(rows, columns).T.ravel()
    perm = (g[:, None] * bits_per_symbol + np.arange(bits_per_symbol)).ravel()
    perm.setflags(write=False)
    return perm


def channel_interleave(bits, bits_per_symbol: int, columns: int) -> np.ndarray:
    bits = np.asarray(bits).ravel()
    return bits[channel_interleaver_perm(bits.size, bits_per_symbol, columns)]


def channel_deinterleave(values, bits_per_symbol: int, columns: int) -> np.ndarray:
    values = np.asarray(values).ravel()
    out = np.empty_like(values)
    out[channel_interleaver_perm(values.size, bits_per_symbol, columns)] = values
    return out
