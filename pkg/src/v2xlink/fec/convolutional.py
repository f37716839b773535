"""Constraint-length 7 convolutional codes: the 802.11 zero-tailed rate-1/2
code and the LTE tail-biting rate-1/3 code, plus 802.11 puncturing."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from ._kernels import viterbi_forward, viterbi_traceback

CONSTRAINT_LENGTH = 7
NUM_STATES = 64


@dataclass(frozen=True)
class ConvCodeSpec:
    generators: tuple
    tail_biting: bool = False
    constraint_length: int = CONSTRAINT_LENGTH

    def __post_init__(self):
        if self.constraint_length != CONSTRAINT_LENGTH:
            raise ValueError("only constraint length 7 is supported")
        allowed = {((0o133, 0o171), False), ((0o133, 0o171, 0o165), True)}
        if (tuple(self.generators), self.tail_biting) not in allowed:
            raise ValueError("generators must be (133,171) zero-tailed or (133,171,165) tail-biting")

    @property
    def n_out(self) -> int:
        return len(self.generators)


DOT11_CODE = ConvCodeSpec((0o133, 0o171), tail_biting=False)
LTE_TBCC = ConvCodeSpec((0o133, 0o171, 0o165), tail_biting=True)


def _parity(x: np.ndarray) -> np.ndarray:
    x = x.copy()
    for shift in (4, 2, 1):
        x ^= x >> shift
    return x & 1


_TRELLIS = {}


def _trellis(spec: ConvCodeSpec):
    # out[s, u, j]: coded bit j for register (u, state s); state bit 5 is the newest input
    if spec not in _TRELLIS:
        s = np.arange(NUM_STATES)[:, None]
        u = np.arange(2)[None, :]
        reg = (u << 6) | s
        out = np.stack([_parity(reg & g) for g in spec.generators], axis=-1).astype(np.int8)
        signs = (1.0 - 2.0 * out).astype(np.float64)
        _TRELLIS[spec] = (out, signs)
    return _TRELLIS[spec]


def conv_encode(bits, spec: ConvCodeSpec = DOT11_CODE) -> np.ndarray:
    """Encode; output is interleaved per input bit (A0 B0 [C0] A1 B1 ...).

    The zero-tailed code starts in state 0 and the caller supplies any tail
    bits.  The tail-biting code starts in the state given by the last six
    input bits, so the end state equals the start state.
    """
    bits = np.asarray(bits, dtype=np.int64).ravel()
    n = bits.size
    if spec.tail_biting:
        if n < CONSTRAINT_LENGTH - 1:
            raise ValueError("tail-biting encoding needs at least 6 bits")
        history = bits[::-1][:6]  # newest first
        init = history[::-1]
    else:
        init = np.zeros(6, dtype=np.int64)
    # register for step t holds bits[t], bits[t-1], ..., bits[t-6]
    padded = np.concatenate([init, bits])
    reg = np.zeros(n, dtype=np.int64)
    for k in range(CONSTRAINT_LENGTH):
        reg |= padded[6 - k:6 - k + n] << (6 - k)
    out = np.stack([_parity(reg & g) for g in spec.generators], axis=1)
    return out.ravel().astype(np.int8)


def encoder_states(bits, spec: ConvCodeSpec = DOT11_CODE) -> tuple:
    """(start_state, end_state) of the encoder register for ``bits``."""
    bits = np.asarray(bits, dtype=np.int64).ravel()

    def state_of(history):
        s = 0
        for k, b in enumerate(history[::-1][:6]):
            s |= int(b) << (5 - k)
        return s

    start = state_of(bits) if spec.tail_biting else 0
    padded = np.concatenate([np.zeros(6, dtype=np.int64), bits]) if not spec.tail_biting else bits
    return start, state_of(padded)


def viterbi_decode(llrs, spec: ConvCodeSpec = DOT11_CODE, terminated: bool = True) -> np.ndarray:
    """Soft-decision Viterbi decoding with full-sequence traceback.

    ``llrs`` hold one value per mother-code bit (punctured positions as 0).
    For the zero-tailed code ``terminated`` forces the path to end in state
    0; otherwise the best end state is used.  The tail-biting code uses two
    wrap-around passes, the second initialised with the end metrics of the
    first and extended by one more lap so the traceback is circular.
    """
    llr = np.asarray(llrs, dtype=np.float64).ravel()
    if llr.size % spec.n_out:
        raise ValueError(f"LLR count {llr.size} not a multiple of {spec.n_out}")
    llr = llr.reshape(-1, spec.n_out)
    if llr.shape[0] == 0:
        return np.zeros(0, dtype=np.int8)
    _, signs = _trellis(spec)
    if spec.tail_biting:
        n = llr.shape[0]
        _, end_metric = viterbi_forward(llr, signs, np.zeros(NUM_STATES))
        # second pass runs one more lap so the traceback starts from a merged survivor
        wrapped = np.concatenate([llr, llr])
        decisions, metric = viterbi_forward(wrapped, signs, end_metric)
        return viterbi_traceback(decisions, int(np.argmax(metric)))[:n]
    else:
        init = np.full(NUM_STATES, -1.0e30)
        init[0] = 0.0
        decisions, metric = viterbi_forward(llr, signs, init)
        end_state = 0 if terminated else int(np.argmax(metric))
    return viterbi_traceback(decisions, end_state)


# 802.11 puncturing patterns over the interleaved A/B mother stream
PUNCTURE_PATTERNS = {
    Fraction(1, 2): np.array([1, 1], dtype=bool),
    Fraction(2, 3): np.array([1, 1, 1, 0], dtype=bool),
    Fraction(3, 4): np.array([1, 1, 1, 0, 0, 1], dtype=bool),
}


def _pattern(rate) -> np.ndarray:
    rate = Fraction(rate)
    if rate not in PUNCTURE_PATTERNS:
        raise ValueError(f"unsupported coding rate {rate}")
    return PUNCTURE_PATTERNS[rate]


def puncture(coded, rate) -> np.ndarray:
    coded = np.asarray(coded).ravel()
    pat = _pattern(rate)
    if coded.size % pat.size:
        raise ValueError(f"{coded.size} coded bits is not a whole number of puncturing periods")
    return coded[np.tile(pat, coded.size // pat.size)]


def depuncture(llrs, rate, mother_length: Optional[int] = None) -> np.ndarray:
    """Re-insert zero LLRs (erasures) at punctured positions."""
    llrs = np.asarray(llrs, dtype=np.float64).ravel()
    pat = _pattern(rate)
    kept = int(pat.sum())
    if llrs.size % kept:
        raise ValueError(f"{llrs.size} LLRs is not a whole number of puncturing periods")
    periods = llrs.size // kept
    if mother_length is not None and mother_length != periods * pat.size:
        raise ValueError("mother_length inconsistent with the punctured length")
    out = np.zeros(periods * pat.size)
    out[np.tile(pat, periods)] = llrs
    return out
