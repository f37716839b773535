"""Channel codes of both PHY chains."""

from .convolutional import (
    DOT11_CODE,
    LTE_TBCC,
    ConvCodeSpec,
    conv_encode,
    depuncture,
    puncture,
    viterbi_decode,
)
from .ratematch import (
    RateMatchConfig,
    channel_deinterleave,
    channel_interleave,
    conv_rate_match,
    conv_rate_recover,
    desegment,
    rate_match,
    rate_recover,
    segment_code_blocks,
    segmentation_plan,
)
from .turbo import QPP_TABLE, TurboCodeSpec, qpp_permutation, turbo_decode, turbo_encode

__all__ = [
    "DOT11_CODE", "LTE_TBCC", "ConvCodeSpec", "conv_encode", "depuncture", "puncture",
    "viterbi_decode", "RateMatchConfig", "channel_deinterleave", "channel_interleave",
    "conv_rate_match", "conv_rate_recover", "desegment", "rate_match", "rate_recover",
    "segment_code_blocks", "segmentation_plan", "QPP_TABLE", "TurboCodeSpec",
    "qpp_permutation", "turbo_decode", "turbo_encode",
]
