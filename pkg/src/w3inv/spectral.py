"""Eigen-decomposition of sampled unitary maps and local band matching.

A grid is stored as one dense array ``samples`` of shape ``(N1, N2, N3, n, n)``.
Point ``(i1, i2, i3)`` is addressed row-major; on periodic axes neighbours wrap
modulo ``N_alpha``.  Eigenvectors are stored as columns, ``evecs[..., :, nu]``.

Band indices are only meaningful locally: for each grid edge ``(p, p + delta_alpha)``
a permutation records which band at ``p + delta_alpha`` continues band ``nu``
at ``p``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .errors import GridTooCoarse, InvalidGrid

EPS_UNITARY = 1e-10
EPS_RESIDUAL = 1e-9
TAU_MATCH = 1.0 / np.sqrt(2.0)
GRAM_TOL = 1e-6
LINK_FLOOR = 1e-8
ARC_TIE = 1e-9
MATCH_METHODS = ("overlap", "eigenvalue", "auto")


@dataclass(frozen=True)
class UnitaryGrid:
    """Sampled map U(p) on an ``N1 x N2 x N3`` grid.

    ``samples[i1, i2, i3]`` is the ``n x n`` unitary at that grid point and
    ``periodic`` flags, axis by axis, whether index arithmetic wraps.
    """

    samples: np.ndarray
    periodic: tuple[bool, bool, bool] = (True, True, True)
    eps_unitary: float = EPS_UNITARY

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=complex)
        if samples.ndim != 5 or samples.shape[-1] != samples.shape[-2]:
            raise InvalidGrid(f"samples must have shape (N1, N2, N3, n, n), got {samples.shape}")
        if min(samples.shape[:3]) < 1:
            raise InvalidGrid("grid dimensions must be positive")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "periodic", tuple(bool(p) for p in self.periodic))
        dev = unitarity_deviation(samples)
        worst = np.unravel_index(np.argmax(dev), dev.shape)
        if dev[worst] >= self.eps_unitary:
            raise InvalidGrid(
                f"sample at grid point {tuple(int(i) for i in worst)} is not unitary: "
                f"max|U^dag U - 1| = {dev[worst]:.3e} >= {self.eps_unitary:.1e}"
            )

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(self.samples.shape[:3])

    @property
    def n(self) -> int:
        return self.samples.shape[-1]


def unitarity_deviation(samples: np.ndarray) -> np.ndarray:
    """Return ``max |U^dag U - 1|`` per matrix over the leading axes."""
    n = samples.shape[-1]
    gram = np.conj(np.swapaxes(samples, -1, -2)) @ samples
    return np.abs(gram - np.eye(n)).max(axis=(-1, -2))


@dataclass(frozen=True)
class SpectralGrid:
    """Eigen-data of a :class:`UnitaryGrid` plus the per-edge band permutations.

    ``perms[alpha][p][nu]`` is the index at ``p + delta_alpha`` of the band that
    continues band ``nu`` at ``p`` (``-1`` on missing edges of open axes), and
    ``links[alpha][p][nu]`` the normalized overlap
    ``<s^nu(p), s^perm(nu)(p + delta_alpha)> / |...|``.
    """

    evals: np.ndarray
    evecs: np.ndarray
    periodic: tuple[bool, bool, bool]
    perms: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None
    links: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None
    min_overlap: float | None = None
    max_residual: float = 0.0
    match_method: str = "overlap"

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(self.evals.shape[:3])

    @property
    def n(self) -> int:
        return self.evals.shape[-1]

    def edge_valid(self, axis: int) -> np.ndarray:
        """Boolean mask of base points ``p`` whose edge ``(p, p + delta_axis)`` exists."""
        mask = np.ones(self.dims, dtype=bool)
        if not self.periodic[axis]:
            idx = [slice(None)] * 3
            idx[axis] = -1
            mask[tuple(idx)] = False
        return mask

    def with_phases(self, phases: np.ndarray) -> "SpectralGrid":
        """Return a copy with every eigenvector multiplied by a unimodular phase.

        ``phases`` has shape ``(N1, N2, N3, n)``.  Edge data is recomputed since
        the link variables depend on the gauge (the permutations do not).
        """
        evecs = self.evecs * phases[..., None, :]
        spec = replace(self, evecs=evecs, perms=None, links=None, min_overlap=None)
        return spec if self.perms is None else match_bands(spec, method=self.match_method)


def _schur_eig(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Normal matrices have a diagonal complex Schur form with a unitary basis.
    t, z = scipy.linalg.schur(u, output="complex")
    return np.diag(t).copy(), z


def diagonalize_grid(grid: UnitaryGrid, eps_residual: float = EPS_RESIDUAL) -> SpectralGrid:
    """Diagonalize every sample of ``grid``.

    Eigenvalues are projected onto the unit circle.  Points where the batched
    general eigensolver returns a non-orthonormal basis (clustered eigenvalues)
    are redone with a complex Schur decomposition.
    """
    samples = grid.samples
    n = grid.n
    flat = samples.reshape(-1, n, n)
    try:
        w, v = np.linalg.eig(flat)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise InvalidGrid(f"batched diagonalization did not converge: {exc}") from exc
    v = v / np.linalg.norm(v, axis=-2, keepdims=True)
    gram = np.conj(np.swapaxes(v, -1, -2)) @ v
    bad = np.abs(gram - np.eye(n)).max(axis=(-1, -2)) > 1e-12
    for k in np.flatnonzero(bad):
        try:
            w[k], v[k] = _schur_eig(flat[k])
        except (np.linalg.LinAlgError, ValueError) as exc:
            point = np.unravel_index(k, grid.dims)
            raise InvalidGrid(f"diagonalization failed at grid point {point}: {exc}") from exc

    gram = np.conj(np.swapaxes(v, -1, -2)) @ v
    gram_dev = np.abs(gram - np.eye(n)).max(axis=(-1, -2))
    if gram_dev.max() > GRAM_TOL:
        point = np.unravel_index(int(np.argmax(gram_dev)), grid.dims)
        raise InvalidGrid(
            f"eigenvector basis at grid point {point} is not orthonormal "
            f"(deviation {gram_dev.max():.2e}); input is not a normal matrix"
        )

    w = w / np.abs(w)
    resid = np.linalg.norm(flat @ v - v * w[:, None, :], axis=-2).max(axis=-1)
    if resid.max() >= eps_residual:
        point = np.unravel_index(int(np.argmax(resid)), grid.dims)
        raise InvalidGrid(f"eigen-residual {resid.max():.2e} at grid point {point} exceeds {eps_residual:.1e}")

    dims = grid.dims
    return SpectralGrid(
        evals=w.reshape(*dims, n),
        evecs=v.reshape(*dims, n, n),
        periodic=grid.periodic,
        max_residual=float(resid.max()),
    )


def arc_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Angle in [0, pi] between points ``a`` and ``b`` on the unit circle."""
    return np.abs(np.angle(a * np.conj(b)))


def greedy_match(overlap: np.ndarray, arc: np.ndarray) -> np.ndarray:
    """Greedy band assignment for a batch of ``n x n`` overlap-magnitude matrices.

    Repeatedly pairs the largest remaining entry; exact ties are resolved by the
    smaller eigenvalue arc distance and then by the lower (row, column) index.
    Returns ``perm`` with ``perm[e, row] = column``.
    """
    batch, n, _ = overlap.shape
    score = overlap.copy()
    perm = np.full((batch, n), -1, dtype=int)
    rows = np.arange(batch)
    for _ in range(n):
        best = score.max(axis=(1, 2), keepdims=True)
        cand = score == best
        tie_arc = np.where(cand, arc, np.inf)
        cand &= tie_arc == tie_arc.min(axis=(1, 2), keepdims=True)
        flat = np.argmax(cand.reshape(batch, -1), axis=1)
        r, c = np.divmod(flat, n)
        perm[rows, r] = c
        score[rows, r, :] = -np.inf
        score[rows, :, c] = -np.inf
    return perm


def match_bands(spec: SpectralGrid, tau_match: float = TAU_MATCH, method: str = "overlap") -> SpectralGrid:
    """Attach edge permutations and link variables to ``spec``.

    ``method="overlap"`` pairs bands by eigenvector overlap (ties broken by
    eigenvalue distance) and raises :class:`GridTooCoarse` if a matched overlap
    falls below ``tau_match``.  ``method="eigenvalue"`` pairs by eigenvalue arc
    distance (ties broken by overlap); it is the robust choice when eigenvectors
    rotate quickly near degeneracies while the eigenvalues stay continuous, as
    for Floquet propagators.  There only overlaps below ``LINK_FLOOR`` are
    rejected, since the link phase is undefined at zero overlap.  Both methods
    raise if the permutations compose to a non-identity around some face.
    ``method="auto"`` tries overlap matching first and falls back to eigenvalue
    matching; if both fail the overlap error is raised.
    """
    if method not in MATCH_METHODS:
        raise ValueError(f"unknown matching method {method!r}; expected one of {MATCH_METHODS}")
    if method == "auto":
        try:
            return match_bands(spec, tau_match, "overlap")
        except GridTooCoarse as first:
            try:
                return match_bands(spec, tau_match, "eigenvalue")
            except GridTooCoarse:
                raise first from None
    n = spec.n
    dims = spec.dims
    floor = tau_match if method == "overlap" else LINK_FLOOR
    perms = []
    links = []
    min_overlap = np.inf
    for axis in range(3):
        nxt_vecs = np.roll(spec.evecs, -1, axis=axis)
        nxt_vals = np.roll(spec.evals, -1, axis=axis)
        ov = np.conj(np.swapaxes(spec.evecs, -1, -2)) @ nxt_vecs  # [nu, mu] = <s^nu(p), s^mu(q)>
        mag = np.abs(ov).reshape(-1, n, n)
        arc = arc_distance(spec.evals[..., :, None], nxt_vals[..., None, :]).reshape(-1, n, n)
        if method == "overlap":
            perm = greedy_match(mag, arc)
        else:
            # eigenvalues split by round-off only count as tied, the overlap decides
            perm = greedy_match(-np.floor(arc / ARC_TIE), -mag)
        perm = perm.reshape(*dims, n)
        link = np.take_along_axis(ov, perm[..., :, None], axis=-1)[..., 0]
        linkmag = np.abs(link)
        valid = spec.edge_valid(axis)
        if valid.any():
            edge_min = np.where(valid[..., None], linkmag, np.inf).min(axis=-1)
            worst = np.unravel_index(int(np.argmin(edge_min)), dims)
            if edge_min[worst] < floor:
                raise GridTooCoarse(
                    f"matched eigenvector overlap {edge_min[worst]:.3g} < {floor:.3g} on edge "
                    f"{tuple(int(i) for i in worst)} -> +axis {axis + 1}",
                    where=("edge", tuple(int(i) for i in worst), axis),
                )
            min_overlap = min(min_overlap, float(edge_min[worst]))
        link = np.where(valid[..., None], link / np.where(linkmag > 0, linkmag, 1.0), np.nan)
        perms.append(np.where(valid[..., None], perm, -1))
        links.append(link)

    out = replace(spec, perms=tuple(perms), links=tuple(links), min_overlap=min_overlap,
                  match_method=method)
    check_face_holonomy(out)
    return out


def face_valid(spec: SpectralGrid, alpha: int) -> np.ndarray:
    """Mask of base points whose face perpendicular to ``alpha`` exists."""
    beta, gamma = (alpha + 1) % 3, (alpha + 2) % 3
    return spec.edge_valid(beta) & spec.edge_valid(gamma)


def check_face_holonomy(spec: SpectralGrid) -> None:
    """Verify that band transport around every face is the identity."""
    for alpha in range(3):
        beta, gamma = (alpha + 1) % 3, (alpha + 2) % 3
        pb, pg = spec.perms[beta], spec.perms[gamma]
        if spec.n == 1:
            continue
        valid = face_valid(spec, alpha)
        # p -> p+d_beta -> p+d_beta+d_gamma  versus  p -> p+d_gamma -> p+d_beta+d_gamma
        via_beta = np.take_along_axis(np.roll(pg, -1, axis=beta), np.maximum(pb, 0), axis=-1)
        via_gamma = np.take_along_axis(np.roll(pb, -1, axis=gamma), np.maximum(pg, 0), axis=-1)
        broken = valid & np.any(via_beta != via_gamma, axis=-1)
        if broken.any():
            where = tuple(int(i) for i in np.argwhere(broken)[0])
            raise GridTooCoarse(
                f"band permutations do not close around face {where} perpendicular to axis {alpha + 1}",
                where=("face", where, alpha),
            )


def spectral_grid(grid: UnitaryGrid, *, eps_residual: float = EPS_RESIDUAL,
                  tau_match: float = TAU_MATCH, method: str = "overlap") -> SpectralGrid:
    """Diagonalize and band-match ``grid`` in one call."""
    return match_bands(diagonalize_grid(grid, eps_residual=eps_residual), tau_match=tau_match, method=method)
