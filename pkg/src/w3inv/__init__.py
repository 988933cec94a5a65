"""Lattice computation of the W3 invariant of unitary maps on the 3-torus,
with Floquet-Bloch edge-state counts for driven lattices."""

from .engine import InvariantReport, compute_invariants, w3_direct_central_difference, w3_hat
from .errors import ConsistencyError, GapViolation, GridTooCoarse, InvalidGrid, TrackingAmbiguous, W3Error
from .spectral import SpectralGrid, UnitaryGrid, diagonalize_grid, match_bands, spectral_grid

__all__ = [
    "ConsistencyError", "GapViolation", "GridTooCoarse", "InvalidGrid", "InvariantReport",
    "SpectralGrid", "TrackingAmbiguous", "UnitaryGrid", "W3Error", "compute_invariants",
    "diagonalize_grid", "match_bands", "spectral_grid", "w3_direct_central_difference", "w3_hat",
]
__version__ = "0.1.0"
