"""Exact arithmetic for Hecke algebras and spherical pairs over close local fields."""
from .errors import CloseFieldError
from .local_ring import INF, PadicDigits, RingSpec
from .dvr_linalg import MatF, cartan, smith
from .spherical_pairs import CanonicalPoint, PairDescriptor, canonical_point
from .hecke import HeckeVector, ModuleVector, act, convolve, transfer_hecke, transfer_module

__version__ = "0.1.0"

__all__ = [
    "INF",
    "CanonicalPoint",
    "CloseFieldError",
    "HeckeVector",
    "MatF",
    "ModuleVector",
    "PadicDigits",
    "PairDescriptor",
    "RingSpec",
    "act",
    "canonical_point",
    "cartan",
    "convolve",
    "smith",
    "transfer_hecke",
    "transfer_module",
]
