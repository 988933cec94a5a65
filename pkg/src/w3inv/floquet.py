"""Floquet propagators, the per-gap invariant W3[U_xi] and gap tracking.

A propagator grid stores ``U(mu1, mu2, t_i)`` at ``t_i = T i / N3`` for
``i = 1..N3``; the identity at ``t = 0`` is implicit.  Axes 1 and 2 are periodic,
axis 3 is open.  The return map that closes the time direction is never
sampled: its contribution is the integer correction at the last slice.

Gaps and bands are numbered clockwise on the unit circle.  Gap 0 (equal to
gap n) is the one containing ``-1`` at small times, band ``nu`` lies clockwise
between gaps ``nu - 1`` and ``nu``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import engine
from .engine import (EPS_INT, TWO_PI, Diagnostics, InvariantReport, Lattice, branch_log_phase,
                     build_ledger, charged_cube_records, check_integer, chern_hat, lattice_sum,
                     max_phase_step, pair_charges)
from .errors import ConsistencyError, GapViolation, GridTooCoarse, TrackingAmbiguous
from .models import default_substeps, grid_points
from .spectral import SpectralGrid, UnitaryGrid, arc_distance, spectral_grid

GAP_MARGIN = 1e-6
# eigenvectors of driven propagators rotate quickly near the (non-generic) degeneracy
# lines that chiral-symmetric drives produce; eigenvalues stay continuous there
MATCH_METHOD = "eigenvalue"
HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class DrivenBlochModel:
    """Time-dependent Bloch Hamiltonian ``H(mu1, mu2, t)`` with drive period ``period``.

    ``hamiltonian`` must accept broadcastable arrays ``mu1, mu2`` and a scalar
    ``t`` and return ``(..., n, n)``.  ``hnorm`` bounds the spectral norm of H
    and sets the default substep count.
    """

    n: int
    hamiltonian: Callable
    period: float
    hnorm: float = 1.0
    static: bool = False
    name: str = "model"

    def __post_init__(self):
        if self.period <= 0:
            raise ValueError("period must be positive")

    def check_hermitian(self, mu1, mu2, t) -> None:
        h = np.asarray(self.hamiltonian(mu1, mu2, t))
        if h.shape[-2:] != (self.n, self.n):
            raise ValueError(f"Hamiltonian has shape {h.shape[-2:]}, expected ({self.n}, {self.n})")
        dev = np.abs(h - np.conj(np.swapaxes(h, -1, -2))).max()
        if dev > HERMITIAN_TOL:
            raise ValueError(f"Hamiltonian is not Hermitian (deviation {dev:.2e})")


def zero_model(n: int = 2, period: float = 1.0) -> DrivenBlochModel:
    def h(mu1, mu2, t):
        shape = np.broadcast(np.asarray(mu1), np.asarray(mu2)).shape
        return np.zeros(shape + (n, n), dtype=complex)
    return DrivenBlochModel(n, h, period, hnorm=0.0, static=True, name="zero")


def hermitian_expm(h: np.ndarray, dt: float) -> np.ndarray:
    """``exp(-i dt H)`` for a batch of Hermitian matrices via ``eigh``."""
    e, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * dt * e)[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def evolve(hfunc: Callable, total_time: float, steps: int, substeps: int) -> np.ndarray:
    """Exponential-midpoint propagation of ``i dU/dt = H(t) U`` from ``U(0) = 1``.

    Returns ``U`` at ``t = total_time * i / steps`` for ``i = 1..steps``, stacked on
    axis ``-3``.
    """
    if steps < 1 or substeps < 1:
        raise ValueError("steps and substeps must be positive")
    dt = total_time / (steps * substeps)
    h0 = np.asarray(hfunc(0.5 * dt))
    u = np.broadcast_to(np.eye(h0.shape[-1], dtype=complex), h0.shape).copy()
    out = np.empty(h0.shape[:-2] + (steps,) + h0.shape[-2:], dtype=complex)
    for i in range(steps):
        for j in range(substeps):
            t = (i * substeps + j + 0.5) * dt
            h = h0 if (i == 0 and j == 0) else hfunc(t)
            u = hermitian_expm(h, dt) @ u
        out[..., i, :, :] = u
    return out


@dataclass(frozen=True)
class PropagatorGrid:
    grid: UnitaryGrid
    substeps: int
    period: float


def propagate(model: DrivenBlochModel, dims, substeps: int | None = None,
              offset: float = 0.0) -> PropagatorGrid:
    """Sample ``U(mu1, mu2, t)`` on ``dims = (N1, N2, N3)``.

    Momenta sit at ``(i + offset) / N``; time slices at ``t = T i3 / N3``,
    ``i3 = 1..N3``.  ``substeps`` integration steps are taken per time slice.
    """
    n1, n2, n3 = (int(d) for d in dims)
    if n3 < 2:
        raise ValueError("the time axis needs at least two slices")
    if substeps is None:
        substeps = default_substeps(model.hnorm, model.period, n3)
    if substeps < 1:
        raise ValueError("substeps must be positive")
    mu = grid_points((n1, n2), offset)
    mu1, mu2 = mu[..., 0], mu[..., 1]
    model.check_hermitian(mu1, mu2, 0.0)
    u = evolve(lambda t: model.hamiltonian(mu1, mu2, t), model.period, n3, substeps)
    grid = UnitaryGrid(u, periodic=(True, True, False))
    return PropagatorGrid(grid=grid, substeps=int(substeps), period=model.period)


# ---------------------------------------------------------------------------
# W3 of the periodized map
# ---------------------------------------------------------------------------

def check_gap(evals: np.ndarray, xi: float, gap_margin: float = GAP_MARGIN) -> float:
    """Smallest arc distance from ``exp(i xi)`` to ``evals``; raise if inside ``gap_margin``."""
    dist = arc_distance(evals, np.exp(1j * xi))
    worst = float(dist.min())
    if worst <= gap_margin:
        where = tuple(int(i) for i in np.unravel_index(int(np.argmin(dist)), dist.shape))
        raise GapViolation(f"xi = {xi:.6f} lies within {worst:.2e} of an eigenvalue at {where[:-1]}; "
                           f"it is not in a spectral gap")
    return worst


def truncate(spec: SpectralGrid, slices: int) -> SpectralGrid:
    """Keep the first ``slices`` time slices of an open-axis spectral grid."""
    if spec.periodic[2]:
        raise ValueError("truncation is only defined along an open time axis")
    s = int(slices)
    if not 1 <= s <= spec.dims[2]:
        raise ValueError(f"slice count {s} outside 1..{spec.dims[2]}")
    perms = [p[:, :, :s].copy() for p in spec.perms]
    links = [l[:, :, :s].copy() for l in spec.links]
    perms[2][:, :, -1] = -1
    links[2][:, :, -1] = np.nan
    return replace(spec, evals=spec.evals[:, :, :s], evecs=spec.evecs[:, :, :s],
                   perms=tuple(perms), links=tuple(links))


def w3_xi(spec: SpectralGrid, xi: float, *, branch_cut: float = np.pi, gap_margin: float = GAP_MARGIN,
          eps_int: float = EPS_INT, lattice: Lattice | None = None) -> InvariantReport:
    """Integer ``W3[U_xi]`` of a propagator grid for the gap at angle ``xi``.

    The lattice sum runs over the open grid with the identity slice in front;
    the return map is accounted for by ``sum K F3`` on the last slice, where
    ``K`` shifts the ledger phase onto the ``log_xi`` branch ``[xi - 2 pi, xi)``.
    """
    if spec.periodic != (True, True, False):
        raise ValueError("w3_xi expects a grid periodic in axes 1, 2 and open in axis 3")
    last = spec.evals[:, :, -1]
    check_gap(last, xi, gap_margin)
    lat = lattice or Lattice.from_spectral(spec, eps_int)
    ledger = build_ledger(spec, lat.cubes, branch_cut, identity_start=True)
    raw = lattice_sum(lat.faces, ledger)
    phi_xi = branch_log_phase(last, xi, closed_top=False)
    k = engine._nearest_winding(phi_xi - ledger.phi[:, :, -1], "return-map integer K")
    f3 = lat.faces[2][:, :, -1]
    total = raw + float(np.sum(k * f3))
    dphi = max_phase_step(spec, identity_start=True)
    value = check_integer(total, f"W3[U_xi] at xi = {xi:.6f}", eps_int, dphi)
    chern = [chern_hat(spec, lat.faces, 2, spec.dims[2] - 1, eps_int)]
    diag = Diagnostics(dphi, dphi < engine.ADMISSIBLE_DPHI, abs(total - value),
                       lat.cubes.max_residual, spec.min_overlap)
    return InvariantReport(value, total, [None, None, None], chern, charged_cube_records(ledger), diag, xi=xi)


def floquet_spectral(prop: PropagatorGrid, method: str = MATCH_METHOD, **kwargs) -> SpectralGrid:
    """Diagonalize and band-match a propagator grid (eigenvalue matching by default)."""
    return spectral_grid(prop.grid, method=method, **kwargs)


# ---------------------------------------------------------------------------
# gaps and band Chern numbers
# ---------------------------------------------------------------------------

def find_gaps(evals: np.ndarray, count: int) -> np.ndarray:
    """Centres of the ``count`` widest arcs free of eigenvalues, as angles in (-pi, pi]."""
    theta = np.sort(np.angle(evals).ravel())
    if theta.size == 0:
        raise ValueError("no eigenvalues")
    widths = np.diff(np.concatenate([theta, theta[:1] + TWO_PI]))
    order = np.argsort(-widths, kind="stable")[:count]
    centres = theta[order] + widths[order] / 2.0
    return np.angle(np.exp(1j * centres))


def ccw_offset(theta, start) -> np.ndarray:
    """Counterclockwise angle from ``start`` to ``theta`` in [0, 2 pi)."""
    return np.mod(np.asarray(theta) - start, TWO_PI)


def arc_members(evals: np.ndarray, xi_a: float, xi_b: float) -> np.ndarray:
    """Mask of eigenvalues on the counterclockwise arc from ``xi_a`` to ``xi_b``."""
    span = ccw_offset(xi_b, xi_a)
    if span == 0.0:
        span = TWO_PI
    return ccw_offset(np.angle(evals), xi_a) < span


def arc_chern(lattice: Lattice, xi_a: float, xi_b: float, slice_index: int = -1,
              eps_int: float = EPS_INT) -> int:
    """Total Chern number of the bands between ``xi_a`` and ``xi_b`` (counterclockwise)."""
    spec = lattice.spec
    idx = slice_index % spec.dims[2]
    mask = arc_members(spec.evals[:, :, idx], xi_a, xi_b)
    f = lattice.faces[2][:, :, idx]
    return check_integer(float(np.sum(np.where(mask, f, 0.0))), "arc Chern number", eps_int)


def gap_relation_check(values: dict[float, int], lattice: Lattice, eps_int: float = EPS_INT) -> bool:
    """``W3[U_xb] = W3[U_xa] - C(xa -> xb)`` for every counterclockwise-adjacent gap pair.

    ``values`` maps gap angles to their invariant.  Raises ConsistencyError on a
    violation; a full loop is implied since the arcs cover the circle once.
    """
    angles = sorted(values, key=lambda a: ccw_offset(a, 0.0))
    if len(angles) < 2:
        return True
    loop = 0
    for a, b in zip(angles, angles[1:] + angles[:1]):
        c = arc_chern(lattice, a, b, eps_int=eps_int)
        loop += c
        if values[b] != values[a] - c:
            raise ConsistencyError(
                f"gap relation violated: W3 at {b:.4f} is {values[b]}, expected "
                f"{values[a]} - {c} = {values[a] - c}")
    if loop != 0:
        raise ConsistencyError(f"band Chern numbers around the circle sum to {loop}")
    return True


@dataclass
class FloquetResult:
    gaps: list[float]
    reports: list[InvariantReport]
    band_chern: list[int]
    relation_ok: bool
    lattice: Lattice = field(repr=False)

    @property
    def values(self) -> list[int]:
        return [r.w3 for r in self.reports]


def clockwise_order(gaps) -> list[float]:
    """Gap angles in clockwise order, starting with the gap containing -1 (or closest to it)."""
    gaps = [float(g) for g in gaps]
    start = min(gaps, key=lambda g: float(arc_distance(np.exp(1j * g), -1.0)))
    return sorted(gaps, key=lambda g: ccw_offset(start, g))


def band_cherns_between(lattice: Lattice, gaps_cw: list[float], slice_index: int = -1,
                        eps_int: float = EPS_INT) -> list[int]:
    """Chern numbers of band groups between clockwise-ordered gaps: group ``nu`` sits
    clockwise from ``gaps_cw[nu - 1]`` to ``gaps_cw[nu]``."""
    n = len(gaps_cw)
    out = []
    for nu in range(1, n + 1):
        hi, lo = gaps_cw[nu - 1], gaps_cw[nu % n]
        out.append(arc_chern(lattice, lo, hi, slice_index, eps_int) if n > 1
                   else 0)
    return out


def floquet_invariants(spec: SpectralGrid, gaps, *, branch_cut: float = np.pi,
                       gap_margin: float = GAP_MARGIN, eps_int: float = EPS_INT) -> FloquetResult:
    """Evaluate ``W3[U_xi]`` for each gap angle and check the gap relation."""
    lat = Lattice.from_spectral(spec, eps_int)
    gaps_cw = clockwise_order(gaps)
    reports = [w3_xi(spec, g, branch_cut=branch_cut, gap_margin=gap_margin, eps_int=eps_int, lattice=lat)
               for g in gaps_cw]
    ok = gap_relation_check({g: r.w3 for g, r in zip(gaps_cw, reports)}, lat, eps_int)
    cherns = band_cherns_between(lat, gaps_cw, -1, eps_int)
    return FloquetResult(gaps_cw, reports, cherns, ok, lat)


# ---------------------------------------------------------------------------
# gap tracking
# ---------------------------------------------------------------------------

@dataclass
class TrackSlice:
    index: int                     # stored slice, 1-based (mu3 = index / N3)
    mu3: float
    gaps: list[float]              # xi_0 (= xi_n), xi_1, ..., xi_{n-1}; clockwise
    n_values: list[int]            # n^1 .. n^n
    chern: list[int]               # C^1 .. C^n from the curvature on this slice
    chern_running: list[int]       # C^1 .. C^n from the initial slice plus charged cubes
    events: list[dict]             # charged cubes between the previous slice and this one


@dataclass
class GapTrack:
    slices: list[TrackSlice]
    substeps: int

    @property
    def final(self) -> list[int]:
        return self.slices[-1].n_values

    @property
    def charged_cubes(self) -> list[dict]:
        return [e for s in self.slices for e in s.events]


def _band_arcs(evals: np.ndarray, gaps: list[float], gap_margin: float) -> np.ndarray:
    """Index ``nu - 1`` of the band arc holding each eigenvalue; every arc must hold one per point."""
    n = len(gaps)
    theta = np.angle(evals)
    dist = np.min([arc_distance(evals, np.exp(1j * g)) for g in gaps], axis=0)
    if dist.min() <= gap_margin:
        raise TrackingAmbiguous(
            f"an eigenvalue lies within {dist.min():.2e} of a tracked gap; the gap closes at a "
            f"stored slice, use the per-gap W3 evaluation instead")
    # clockwise offset from gap 0; band nu occupies (cw(g_{nu-1}), cw(g_nu))
    cw = ccw_offset(gaps[0], theta)
    bounds = [ccw_offset(gaps[0], g) for g in gaps[1:]] + [TWO_PI]
    arcs = np.searchsorted(np.asarray(bounds), cw)
    counts = np.stack([(arcs == nu).sum(axis=-1) for nu in range(n)], axis=-1)
    if np.any(counts != 1):
        raise TrackingAmbiguous(
            "the system is not fully gapped at a stored slice (a band arc does not hold exactly "
            "one eigenvalue per momentum); use the per-gap W3 evaluation instead")
    return arcs


def _band_chern_slice(lat: Lattice, s: int, arcs: np.ndarray, n: int, eps_int: float) -> list[int]:
    f = lat.faces[2][:, :, s]
    return [check_integer(float(np.sum(np.where(arcs == nu, f, 0.0))), f"Chern number of band {nu + 1}", eps_int)
            for nu in range(n)]


def _same_free_arc(evals: np.ndarray, a: float, b: float) -> bool:
    """True if no eigenvalue lies on the shorter arc between angles ``a`` and ``b``."""
    if ccw_offset(b, a) > np.pi:
        a, b = b, a
    span = ccw_offset(b, a)
    return not np.any(ccw_offset(np.angle(evals), a) <= span)


def _order_gaps(centres, anchor: float) -> list[float]:
    """Gap centres clockwise, starting with the one closest to ``anchor``."""
    start = min(centres, key=lambda g: float(arc_distance(np.exp(1j * g), np.exp(1j * anchor))))
    return sorted((float(g) for g in centres), key=lambda g: ccw_offset(start, g))


def locate_gaps(evals: np.ndarray, anchor: float) -> list[float]:
    """Mid-arc gap positions ``xi_0, xi_1, ..., xi_{n-1}`` of a fully gapped slice.

    Gap 0 is the eigenvalue-free arc containing ``anchor`` (or the nearest one).
    Sorting each momentum's eigenvalues clockwise from there, band ``nu`` holds
    the ``nu``-th one; gap ``nu`` sits halfway between the clockwise-most member
    of band ``nu`` and the counterclockwise-most member of band ``nu + 1``.
    """
    n = evals.shape[-1]
    theta = np.sort(np.angle(evals).ravel())
    widths = np.diff(np.concatenate([theta, theta[:1] + TWO_PI]))
    # free arc k runs counterclockwise from theta[k] to theta[k] + widths[k]
    inside = ccw_offset(anchor, theta) < widths
    if inside.any():
        k = int(np.argmax(np.where(inside, widths, -1.0)))
    else:
        mids = theta + widths / 2.0
        k = int(np.argmin(arc_distance(np.exp(1j * mids), np.exp(1j * anchor))))
    xi0 = float(np.angle(np.exp(1j * (theta[k] + widths[k] / 2.0))))
    if n == 1:
        return [xi0]
    cw = np.sort(ccw_offset(xi0, np.angle(evals)), axis=-1)
    hi = cw.reshape(-1, n).max(axis=0)       # clockwise-most member of each band
    lo = cw.reshape(-1, n).min(axis=0)
    gaps = [xi0]
    for nu in range(n - 1):
        if hi[nu] >= lo[nu + 1]:
            raise TrackingAmbiguous(
                f"bands {nu + 1} and {nu + 2} overlap on the grid (no gap separates them); "
                f"use the per-gap W3 evaluation instead")
        gaps.append(float(np.angle(np.exp(1j * (xi0 - 0.5 * (hi[nu] + lo[nu + 1]))))))
    return gaps


def _scalar_track(spec: SpectralGrid, substeps: int) -> GapTrack:
    n, n3 = spec.n, spec.dims[2]
    slices = []
    for s in range(n3):
        gap = float(np.angle(-spec.evals[0, 0, s, 0]))
        slices.append(TrackSlice(s + 1, (s + 1) / n3, [gap] * n, [0] * n, [0] * n, [0] * n, []))
    return GapTrack(slices, substeps)


def track_gaps(model: DrivenBlochModel, dims, substeps: int | None = None, initial_gaps=None, *,
               gap_margin: float = GAP_MARGIN, eps_int: float = EPS_INT,
               offset: float = 0.0, prop: PropagatorGrid | None = None) -> GapTrack:
    """March through the time slices and update ``n^nu`` at every charged cube.

    At the first slice ``n^nu`` is the partial sum ``C^1 + ... + C^nu`` (the
    eigenvalues have not yet wrapped around the circle, so gap 0 carries zero).
    Between slices a cube whose bands are charged changes the gaps whose branch
    cut separates the paired eigenvalues at the cube's base point.
    """
    prop = prop or propagate(model, dims, substeps, offset)
    spec = floquet_spectral(prop)
    lat = Lattice.from_spectral(spec, eps_int)
    n = spec.n
    n3 = spec.dims[2]

    evals0 = spec.evals[:, :, 0]
    spread = arc_distance(spec.evals, spec.evals[:1, :1, :, :1]).max(axis=(0, 1, 3))
    if np.all(spread <= gap_margin):
        # scalar propagator: one eigenvalue cluster, nothing can wind
        return _scalar_track(spec, prop.substeps)
    if initial_gaps is None:
        gaps = locate_gaps(evals0, np.pi)
    else:
        if len(initial_gaps) != n:
            raise ValueError(f"need {n} initial gaps, got {len(initial_gaps)}")
        gaps = _order_gaps(initial_gaps, np.pi)
    if n > 1 and not _same_free_arc(evals0, gaps[0], np.pi):
        raise TrackingAmbiguous("no gap contains -1 at the first slice; increase N3")

    arcs = _band_arcs(evals0, gaps, gap_margin)
    chern = _band_chern_slice(lat, 0, arcs, n, eps_int)
    running = list(chern)
    nvals = list(np.cumsum(chern))          # n^1..n^n, with n^n = sum C = 0
    slices = [TrackSlice(1, 1.0 / n3, list(gaps), [int(v) for v in nvals], chern, list(running), [])]

    for s in range(n3 - 1):
        events = []
        delta = [0] * n                     # change of n^nu, nu = 1..n (n^n == n^0)
        for point in map(tuple, np.argwhere(np.any(lat.cubes.charges[:, :, s] != 0, axis=-1))):
            p = point + (s,)
            ch = lat.cubes.charges[p]
            d = spec.evals[p]
            record = {"point": [int(i) for i in p], "charges": ch.tolist(), "gap_changes": [0] * n}
            for g in range(n):
                phi = branch_log_phase(d, gaps[g], closed_top=False)
                dn = 0
                for lo, hi, c in pair_charges(ch):
                    k = int(engine._nearest_winding(np.array(phi[lo] - phi[hi]), f"tracking integer at {p}"))
                    dn += c * k
                nu = g if g > 0 else n
                delta[nu - 1] += dn
                record["gap_changes"][nu - 1] = dn
            for band in np.flatnonzero(ch):
                running[arcs[point + (int(band),)]] += int(ch[band])
            events.append(record)
        nvals = [v + dv for v, dv in zip(nvals, delta)]

        # next slice: locate gaps, keep their identity through the band transport
        nxt = spec.evals[:, :, s + 1]
        trial = locate_gaps(nxt, gaps[0])
        new_arcs = _band_arcs(nxt, trial, gap_margin)
        moved = np.take_along_axis(new_arcs, spec.perms[2][:, :, s], axis=-1)
        shifts = np.mod(moved - arcs, n)
        votes = np.bincount(shifts.ravel(), minlength=n)
        shift = int(np.argmax(votes))
        if votes[shift] != shifts.size:
            raise TrackingAmbiguous(f"band arcs are not transported consistently between slices {s + 1} and {s + 2}")
        if shift:
            trial = trial[shift:] + trial[:shift]
            new_arcs = np.mod(new_arcs - shift, n)
        # the running labels move with the bands
        gaps, arcs = trial, new_arcs
        chern = _band_chern_slice(lat, s + 1, arcs, n, eps_int)
        if chern != running:
            raise ConsistencyError(f"band Chern numbers {chern} at slice {s + 2} disagree with the "
                                   f"tracked values {running}")
        for nu in range(n):
            prev = nvals[nu - 1] if nu > 0 else nvals[n - 1]
            if nvals[nu] != prev + chern[nu]:
                raise ConsistencyError(f"n^{nu + 1} = {nvals[nu]} breaks n^{nu + 1} = n^{nu} + C^{nu + 1} "
                                       f"at slice {s + 2}")
        slices.append(TrackSlice(s + 2, (s + 2) / n3, list(gaps), [int(v) for v in nvals], chern,
                                 list(running), events))
    return GapTrack(slices, prop.substeps)


def cross_check_track(track: GapTrack, spec: SpectralGrid, slices=None, gap_margin: float = GAP_MARGIN,
                      eps_int: float = EPS_INT) -> list[tuple[int, list[int]]]:
    """Re-derive ``n^nu`` with ``w3_xi`` on truncated grids and compare with ``track``.

    Returns ``(slice index, values)`` pairs; raises ConsistencyError on disagreement.
    """
    out = []
    for entry in track.slices:
        if slices is not None and entry.index not in slices:
            continue
        sub = truncate(spec, entry.index)
        lat = Lattice.from_spectral(sub, eps_int)
        values = []
        for nu in range(1, len(entry.gaps) + 1):
            xi = entry.gaps[nu % len(entry.gaps)]
            values.append(w3_xi(sub, xi, gap_margin=gap_margin, eps_int=eps_int, lattice=lat).w3)
        if values != entry.n_values:
            raise ConsistencyError(f"slice {entry.index}: tracked n = {entry.n_values}, W3[U_xi] = {values}")
        out.append((entry.index, values))
    return out


# ---------------------------------------------------------------------------
# static Hamiltonians
# ---------------------------------------------------------------------------

def fhs_chern(evecs: np.ndarray) -> np.ndarray:
    """Chern numbers of a consistently ordered eigenbasis on a periodic 2D grid.

    ``evecs[i1, i2, :, nu]``; plain plaquette products of link phases.
    """
    def link(axis):
        nxt = np.roll(evecs, -1, axis=axis)
        ov = np.einsum("...in,...in->...n", np.conj(evecs), nxt)
        return ov / np.abs(ov)
    u1, u2 = link(0), link(1)
    plaq = u1 * np.roll(u2, -1, axis=0) * np.conj(np.roll(u1, -1, axis=1)) * np.conj(u2)
    return np.angle(plaq).sum(axis=(0, 1)) / TWO_PI


@dataclass
class StaticResult:
    energies_range: list[tuple[float, float]]
    chern: list[int]
    n_values: list[int]
    check_values: list[int] | None


def static_specialize(hamiltonian: Callable, dims, *, gap_margin: float = GAP_MARGIN,
                      eps_int: float = EPS_INT, offset: float = 0.0, cross_check: bool = True) -> StaticResult:
    """Edge counts of a static Hamiltonian from the Chern numbers of its bands.

    Bands are numbered by increasing energy; ``n^nu = C^1 + ... + C^nu``.  The
    cross-check evaluates ``W3[U_xi]`` on a short two-slice propagator in which no
    eigenphase has travelled further than a quarter turn.
    """
    n1, n2 = int(dims[0]), int(dims[1])
    mu = grid_points((n1, n2), offset)
    h = np.asarray(hamiltonian(mu[..., 0], mu[..., 1]))
    e, v = np.linalg.eigh(h)
    gaps = e[..., 1:].min(axis=(0, 1)) - e[..., :-1].max(axis=(0, 1))
    if gaps.size and gaps.min() <= gap_margin:
        nu = int(np.argmin(gaps))
        raise GapViolation(f"static Hamiltonian is gapless between bands {nu + 1} and {nu + 2} "
                           f"(indirect gap {gaps.min():.2e})")
    raw = fhs_chern(v)
    chern = [check_integer(float(x), f"Chern number of band {nu + 1}", eps_int) for nu, x in enumerate(raw)]
    nvals = [int(x) for x in np.cumsum(chern)]
    ranges = [(float(e[..., nu].min()), float(e[..., nu].max())) for nu in range(e.shape[-1])]

    check = None
    if cross_check:
        n = e.shape[-1]
        span = float(np.abs(e).max())
        tau = (np.pi / 4) / max(span, 1e-12)
        model = DrivenBlochModel(n, lambda a, b, t: hamiltonian(a, b), 2 * tau, hnorm=span, static=True)
        prop = propagate(model, (n1, n2, 2), substeps=1, offset=offset)
        spec = floquet_spectral(prop)
        sub = truncate(spec, 1)
        lat = Lattice.from_spectral(sub, eps_int)
        check = []
        for nu in range(1, n + 1):
            if nu == n:
                xi = np.pi
            else:
                xi = -tau * 0.5 * (ranges[nu - 1][1] + ranges[nu][0])
            check.append(w3_xi(sub, xi, gap_margin=gap_margin, eps_int=eps_int, lattice=lat).w3)
        if check != nvals:
            raise ConsistencyError(f"static edge counts {nvals} disagree with W3[U_xi] = {check}")
    return StaticResult(ranges, chern, nvals, check)
