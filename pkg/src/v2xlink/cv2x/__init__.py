"""C-V2X sidelink (PSCCH + PSSCH) transmitter and receiver for one subframe."""

from .params import (
    MCS_SCHEMES,
    MCS_TABLE_48PRB,
    QPSK_HALF,
    QPSK_THREEQUARTER,
    Cv2xMcsEntry,
    SciFormat1,
    SidelinkAllocation,
    mcs_scheme,
    riv_decode,
    riv_encode,
)
from .receiver import (
    Cv2xResult,
    channel_estimate_dmrs,
    decode_pssch,
    estimate_cfo,
    pscch_blind_decode,
    receive_subframe,
    scfdma_demodulate,
)
from .transmitter import (
    Cv2xTransmission,
    SciCodeword,
    dmrs_generate,
    pscch_build,
    pssch_build,
    scfdma_modulate,
    sci_encode,
    scramble,
    slsch_encode,
    transmit_subframe,
    zadoff_chu,
)

__all__ = [
    "MCS_SCHEMES", "MCS_TABLE_48PRB", "QPSK_HALF", "QPSK_THREEQUARTER", "Cv2xMcsEntry",
    "SciFormat1", "SidelinkAllocation", "mcs_scheme", "riv_decode", "riv_encode", "Cv2xResult",
    "channel_estimate_dmrs", "decode_pssch", "estimate_cfo", "pscch_blind_decode",
    "receive_subframe", "scfdma_demodulate", "Cv2xTransmission", "SciCodeword", "dmrs_generate",
    "pscch_build", "pssch_build", "scfdma_modulate", "sci_encode", "scramble", "slsch_encode",
    "transmit_subframe", "zadoff_chu",
]
