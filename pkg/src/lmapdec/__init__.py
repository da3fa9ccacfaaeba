"""Linear MAP decoding of rate-1/2 convolutional codes.

The package synthesizes the dual-encoder (shift register) decoder structure
for a code offline, runs the forward/backward register decoding engine, and
ships a reference BCJR decoder plus a Monte Carlo harness for equivalence,
BER, and timing studies.
"""

from .gf2 import Gf2Poly, parse_octal
from .codes import CodeSpec, Trellis, build_trellis, encode, bpsk
from .channel import ChannelParams, transmit, sse_from_channel, make_sse_frame
from .synth import DecoderSpec, synthesize, format_decoder_spec, parse_decoder_spec
from .engine import LmapDecoder, combine
from . import bcjr

__all__ = [
    "Gf2Poly",
    "parse_octal",
    "CodeSpec",
    "Trellis",
    "build_trellis",
    "encode",
    "bpsk",
    "ChannelParams",
    "transmit",
    "sse_from_channel",
    "make_sse_frame",
    "DecoderSpec",
    "synthesize",
    "format_decoder_spec",
    "parse_decoder_spec",
    "LmapDecoder",
    "combine",
    "bcjr",
]
