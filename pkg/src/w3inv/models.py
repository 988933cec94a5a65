"""Built-in maps and lattice models.

* ``su2_sheet_map`` / ``su2_ball_map``: spin-1/2 rotations ``exp(i a.sigma/2)``
  with W3 = 2w and W3 = w respectively.
* ``graphene_bloch_h``: honeycomb lattice with a circularly polarized Peierls drive.
* ``qwz_bloch_h``: static two-band Chern insulator used for the static checks.
* ``strip_quasienergy_spectrum``: zigzag ribbon Floquet spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import UnitaryGrid

SIGMA = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex)
SQRT3 = np.sqrt(3.0)
# irrational sample offset: no grid size puts a sample exactly on the degenerate
# sheets and shells of the example maps (mu3 = k / 2w, |g| = k / w)
DEFAULT_OFFSET = np.sqrt(2.0) - 1.0


@dataclass(frozen=True)
class Su2SheetParams:
    w: int = 1

    def __post_init__(self):
        if int(self.w) != self.w or self.w < 1:
            raise ValueError("w must be a positive integer")


@dataclass(frozen=True)
class Su2BallParams:
    w: int = 1

    def __post_init__(self):
        if int(self.w) != self.w or self.w < 1:
            raise ValueError("w must be a positive integer")


@dataclass(frozen=True)
class GrapheneParams:
    A0: float = 0.7
    omega: float = 3.5
    strip_width: int = 24
    k_samples: int = 96

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError("omega must be positive")
        if self.strip_width < 2:
            raise ValueError("strip_width must be at least 2")
        if self.k_samples < 2:
            raise ValueError("k_samples must be at least 2")

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.omega


def su2_rotation(a: np.ndarray) -> np.ndarray:
    """``exp(i a.sigma / 2)`` for a batch of rotation vectors ``a[..., 3]``."""
    a = np.asarray(a, dtype=float)
    norm = np.linalg.norm(a, axis=-1)
    half = norm / 2.0
    safe = np.where(norm > 0, norm, 1.0)
    axis = a / safe[..., None]
    gen = np.einsum("...k,kij->...ij", axis, SIGMA)
    eye = np.eye(2, dtype=complex)
    return np.cos(half)[..., None, None] * eye + 1j * np.sin(half)[..., None, None] * gen


def _sheet_direction(mu1, mu2):
    u = 2.0 * mu1 - 1.0
    v = 2.0 * mu2 - 1.0
    theta = np.pi * np.maximum(np.abs(u), np.abs(v))
    azimuth = np.arctan2(v, u)
    return np.stack([np.sin(theta) * np.cos(azimuth), np.sin(theta) * np.sin(azimuth), np.cos(theta)], axis=-1)


def su2_sheet_map(params: Su2SheetParams, mu) -> np.ndarray:
    """First example map: ``a = 4 pi w mu3 f(mu1, mu2)``.

    ``f`` sends the square's centre to the north pole and its boundary to the
    south pole (radial square-to-disk stretch followed by the polar angle ``pi r``).
    """
    mu = np.mod(np.asarray(mu, dtype=float), 1.0)
    f = _sheet_direction(mu[..., 0], mu[..., 1])
    return su2_rotation(4.0 * np.pi * params.w * mu[..., 2, None] * f)


def su2_ball_map(params: Su2BallParams, mu) -> np.ndarray:
    """Second example map: ``a = 2 pi w g(mu)`` with ``g`` the cube-to-ball stretch."""
    mu = np.mod(np.asarray(mu, dtype=float), 1.0)
    x = 2.0 * mu - 1.0
    linf = np.abs(x).max(axis=-1)
    l2 = np.linalg.norm(x, axis=-1)
    scale = np.where(l2 > 0, linf / np.where(l2 > 0, l2, 1.0), 0.0)
    return su2_rotation(2.0 * np.pi * params.w * x * scale[..., None])


def grid_points(dims, offset: float = DEFAULT_OFFSET) -> np.ndarray:
    """Coordinates ``mu[i1, i2, i3] = (i + offset) / N`` on the unit cube."""
    axes = [(np.arange(n) + offset) / n for n in dims]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def sample_grid(fn, dims, offset: float = DEFAULT_OFFSET, **kwargs) -> UnitaryGrid:
    """Sample a periodic map ``fn(mu)`` on an equidistant grid.

    The default offset keeps every sample off the degeneracy sets of the
    example maps, where the eigenbasis would be arbitrary.
    """
    dims = tuple(int(n) for n in dims)
    return UnitaryGrid(fn(grid_points(dims, offset)), periodic=(True, True, True), **kwargs)


def identity_map(n: int = 2):
    def fn(mu):
        mu = np.asarray(mu)
        return np.broadcast_to(np.eye(n, dtype=complex), mu.shape[:-1] + (n, n)).copy()
    return fn


# ---------------------------------------------------------------------------
# graphene
# ---------------------------------------------------------------------------

# nearest-neighbour vectors A -> B, unit bond length
DELTAS = np.array([[0.0, 1.0], [SQRT3 / 2, -0.5], [-SQRT3 / 2, -0.5]])
A1 = DELTAS[0] - DELTAS[2]
A2 = DELTAS[0] - DELTAS[1]


def reciprocal_vectors():
    """``b1, b2`` with ``b_i . a_j = 2 pi delta_ij``."""
    amat = np.array([A1, A2])
    bmat = 2.0 * np.pi * np.linalg.inv(amat).T
    return bmat[0], bmat[1]


B1, B2 = reciprocal_vectors()


def bz_map(mu1, mu2) -> np.ndarray:
    """Rhombic reciprocal cell: ``k = mu1 b1 + mu2 b2``."""
    return np.multiply.outer(mu1, B1) + np.multiply.outer(mu2, B2)


def vector_potential(params: GrapheneParams, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return params.A0 * np.stack([np.sin(params.omega * t), np.cos(params.omega * t)], axis=-1)


def graphene_offdiag(params: GrapheneParams, mu1, mu2, t) -> np.ndarray:
    """``f(k, t) = sum_j exp(i k.(delta_j - delta_1)) exp(i A(t).delta_j)``.

    The Bloch phase uses the cell offset ``delta_j - delta_1`` (the periodic gauge)
    so that ``H`` is exactly periodic in ``mu1`` and ``mu2``; the Peierls phase uses
    the physical bond vector.
    """
    mu1 = np.mod(np.asarray(mu1, dtype=float), 1.0)
    mu2 = np.mod(np.asarray(mu2, dtype=float), 1.0)
    # cell offsets of the three B neighbours in units of (a1, a2): 0, -a2, -a1
    bloch = np.stack([np.ones_like(mu1), np.exp(-2j * np.pi * mu2), np.exp(-2j * np.pi * mu1)], axis=-1)
    peierls = np.exp(1j * DELTAS @ vector_potential(params, t))
    return bloch @ peierls


def graphene_bloch_h(params: GrapheneParams, mu1, mu2, t) -> np.ndarray:
    """2x2 Bloch Hamiltonian of irradiated graphene (hopping 1, zero diagonal)."""
    f = graphene_offdiag(params, mu1, mu2, t)
    h = np.zeros(np.shape(f) + (2, 2), dtype=complex)
    h[..., 0, 1] = f
    h[..., 1, 0] = np.conj(f)
    return h


def qwz_bloch_h(mu1, mu2, t=0.0, mass: float = 1.0) -> np.ndarray:
    """Static two-band Chern insulator ``sin kx sx + sin ky sy + (m + cos kx + cos ky) sz``.

    Band Chern numbers (lower, upper) are ``(+1, -1)`` for ``0 < m < 2``,
    ``(-1, +1)`` for ``-2 < m < 0`` and zero for ``|m| > 2``.
    """
    kx = 2.0 * np.pi * np.asarray(mu1, dtype=float)
    ky = 2.0 * np.pi * np.asarray(mu2, dtype=float)
    d = np.stack([np.sin(kx), np.sin(ky), mass + np.cos(kx) + np.cos(ky)], axis=-1)
    return np.einsum("...k,kij->...ij", d, SIGMA)


# ---------------------------------------------------------------------------
# zigzag strip
# ---------------------------------------------------------------------------

def strip_hamiltonian(params: GrapheneParams, kx, t) -> np.ndarray:
    """Zigzag ribbon periodic along x (period sqrt(3)), ``strip_width`` cells across.

    Sites are ordered ``(A_0, B_0, A_1, B_1, ...)``; ``A_j`` couples to ``B_j``
    through ``delta_1`` and to ``B_{j-1}`` through ``delta_2`` (one period along
    x) and ``delta_3``.
    """
    kx = np.atleast_1d(np.asarray(kx, dtype=float))
    w = params.strip_width
    hop = np.exp(1j * DELTAS @ vector_potential(params, t))
    h = np.zeros(kx.shape + (2 * w, 2 * w), dtype=complex)
    for j in range(w):
        a, b = 2 * j, 2 * j + 1
        h[..., a, b] += hop[0]
        if j > 0:
            bp = 2 * (j - 1) + 1
            h[..., a, bp] += hop[1] * np.exp(1j * kx * SQRT3) + hop[2]
    return h + np.conj(np.swapaxes(h, -1, -2))


def strip_quasienergy_spectrum(params: GrapheneParams, substeps: int | None = None,
                               edge_cells: int | None = None):
    """Quasienergy phases ``eps T = -arg d`` of the one-period strip propagator.

    Returns ``(kx, phases)`` with ``phases[k, nu]`` sorted ascending in (-pi, pi].
    With ``edge_cells`` set, also returns the weight of each eigenstate on the
    outermost ``edge_cells`` cells at either edge (same ordering as ``phases``).
    """
    from .floquet import evolve

    kx = np.linspace(-np.pi / SQRT3, np.pi / SQRT3, params.k_samples, endpoint=False)
    period = params.period
    if substeps is None:
        substeps = default_substeps(3.0 + 2.0 * params.A0, period, 1)
    u = evolve(lambda t: strip_hamiltonian(params, kx, t), period, 1, substeps)[..., -1, :, :]
    d, v = np.linalg.eig(u)
    phases = -np.angle(d)
    phases = np.where(phases <= -np.pi, phases + 2 * np.pi, phases)
    order = np.argsort(phases, axis=-1)
    phases = np.take_along_axis(phases, order, axis=-1)
    if edge_cells is None:
        return kx, phases
    cell = np.repeat(np.arange(params.strip_width), 2)
    edge = (cell < edge_cells) | (cell >= params.strip_width - edge_cells)
    weight = (np.abs(v) ** 2 * edge[None, :, None]).sum(axis=1) / (np.abs(v) ** 2).sum(axis=1)
    return kx, phases, np.take_along_axis(weight, order, axis=-1)


def bulk_quasienergies(params: GrapheneParams, n_k: int = 48, substeps: int | None = None) -> np.ndarray:
    """Bulk quasienergy phases ``eps T`` of graphene on an ``n_k x n_k`` momentum grid."""
    from .floquet import evolve

    mu = grid_points((n_k, n_k), 0.0)
    period = params.period
    if substeps is None:
        substeps = default_substeps(3.0 + 2.0 * params.A0, period, 1)
    u = evolve(lambda t: graphene_bloch_h(params, mu[..., 0], mu[..., 1], t), period, 1, substeps)[..., -1, :, :]
    return -np.angle(np.linalg.eigvals(u))


def gap_interval(phases: np.ndarray, centre: float) -> tuple[float, float]:
    """Eigenvalue-free interval of ``phases`` around the angle ``centre``, as (lo, hi) offsets."""
    rel = np.angle(np.exp(1j * (np.ravel(phases) - centre)))
    above = rel[rel > 0]
    below = rel[rel <= 0]
    hi = float(above.min()) if above.size else np.pi
    lo = float(below.max()) if below.size else -np.pi
    return lo, hi


def default_substeps(hnorm: float, period: float, steps: int, target: float = 0.02) -> int:
    """Substeps per stored step so that ``|H| dt`` stays below ``target``."""
    return max(1, int(np.ceil(hnorm * period / (steps * target))))
