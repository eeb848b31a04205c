"""Approximate trace reconstruction over the deletion channel."""
from .bitcore import BitString, RngHandle, Stream, sample_uniform
from .blocktest import TestParams, test_match
from .channel import ChannelParams, TraceRecord, transmit, transmit_many, transmit_with_mask
from .editdist import edit_distance, lcs_length
from .reconstruct import PipelineParams, ReconstructionReport, evaluate, reconstruct

__all__ = [
    "BitString",
    "RngHandle",
    "Stream",
    "sample_uniform",
    "TestParams",
    "test_match",
    "ChannelParams",
    "TraceRecord",
    "transmit",
    "transmit_many",
    "transmit_with_mask",
    "edit_distance",
    "lcs_length",
    "PipelineParams",
    "ReconstructionReport",
    "evaluate",
    "reconstruct",
]

__version__ = "0.1.0"
