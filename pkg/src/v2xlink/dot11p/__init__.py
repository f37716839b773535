"""IEEE 802.11p (10 MHz OFDM) transmitter and receiver."""

from .params import MCS_TABLE, Dot11pMcs, PpduConfig, mcs, pilot_polarity
from .receiver import (
    Dot11pResult,
    SyncError,
    SyncResult,
    decode_sig,
    detect_and_synchronize,
    estimate_channel_ltf,
    receive,
)
from .transmitter import build_preamble, encode_sig, sig_bits, transmit

__all__ = [
    "MCS_TABLE", "Dot11pMcs", "PpduConfig", "mcs", "pilot_polarity", "Dot11pResult",
    "SyncError", "SyncResult", "decode_sig", "detect_and_synchronize", "estimate_channel_ltf",
    "receive", "build_preamble", "encode_sig", "sig_bits", "transmit",
]
