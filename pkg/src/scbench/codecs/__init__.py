"""Compression models under test and their shared plumbing."""

from .base import (HEADER_BITS, CodecError, CompressedBlob, IdentityCodec,
                   ZeroingCodec, bpp, bpp_entropy)
from .block_dct import BlockDctCodec, quant_matrix, zigzag_order
from .external import (ExternalCodec, ExternalConfigError, ExternalRunError)
from .linear_ae import (LinearAECodec, fit_linear_ae, gmp_schedule,
                        prune_linear_ae)
from .persistence import PersistenceError, load_codec, save_codec
from .rangecoder import (RangeCoderError, decode_symbols, encode_symbols,
                         stream_entropy_bits)

__all__ = [
    "HEADER_BITS", "CodecError", "CompressedBlob", "IdentityCodec",
    "ZeroingCodec", "bpp", "bpp_entropy",
    "BlockDctCodec", "quant_matrix", "zigzag_order",
    "ExternalCodec", "ExternalConfigError", "ExternalRunError",
    "LinearAECodec", "fit_linear_ae", "gmp_schedule", "prune_linear_ae",
    "PersistenceError", "load_codec", "save_codec",
    "RangeCoderError", "decode_symbols", "encode_symbols",
    "stream_entropy_bits",
]
