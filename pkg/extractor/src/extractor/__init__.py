"""Embedding extraction from audio corpora for the hyfuse pipeline."""

from .jobs import ExtractionJob, ExtractionResult, PairingReport, extract, verify_pairing
from .registry import REPRESENTATIONS

__all__ = [
    "REPRESENTATIONS",
    "ExtractionJob",
    "ExtractionResult",
    "PairingReport",
    "extract",
    "verify_pairing",
]
