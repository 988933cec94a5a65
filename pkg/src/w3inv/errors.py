"""Exception hierarchy shared by all modules."""


class W3Error(Exception):
    """Base class for every error raised by this package."""


class InvalidGrid(W3Error, ValueError):
    """Input samples are not a valid unitary grid (shape, unitarity, eigensystem)."""


class GridTooCoarse(W3Error):
    """The discretization violates the admissibility requirements of the lattice algorithm."""

    def __init__(self, message, *, where=None, max_dphi=None):
        super().__init__(message)
        self.where = where
        self.max_dphi = max_dphi

    def advice(self):
        text = "refine the grid globally"
        if self.max_dphi is not None:
            text += f" (largest eigenphase step max_dphi = {self.max_dphi:.4f} rad, keep it below pi/2)"
        return text


class ConsistencyError(W3Error):
    """An internal identity failed; signals broken band transport or integration problems."""


class GapViolation(W3Error):
    """A gap position xi touches the spectrum, or a static Hamiltonian is gapless."""


class TrackingAmbiguous(W3Error):
    """Gap tracking cannot continue because a gap is closed at a stored time slice."""
