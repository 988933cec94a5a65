from dataclasses import replace

import numpy as np
import pytest

from w3inv import models, spectral
from w3inv.errors import GridTooCoarse, InvalidGrid
from w3inv.spectral import UnitaryGrid


def constant_grid(u, dims=(3, 3, 3), periodic=(True, True, True)):
    return UnitaryGrid(np.broadcast_to(u, tuple(dims) + u.shape).copy(), periodic=periodic)


def test_identity_grid_diagonalizes_to_unit_eigenvalues():
    spec = spectral.diagonalize_grid(constant_grid(np.eye(3, dtype=complex)))
    np.testing.assert_allclose(spec.evals, 1.0, atol=1e-14)
    gram = np.conj(np.swapaxes(spec.evecs, -1, -2)) @ spec.evecs
    np.testing.assert_allclose(gram, np.broadcast_to(np.eye(3), gram.shape), atol=1e-12)


def test_diagonal_input():
    u = np.diag(np.exp([1j * np.pi / 3, -1j * np.pi / 3]))
    spec = spectral.diagonalize_grid(constant_grid(u))
    got = np.sort(np.angle(spec.evals[0, 0, 0]))
    np.testing.assert_allclose(got, [-np.pi / 3, np.pi / 3], atol=1e-14)
    # standard basis vectors up to phase
    np.testing.assert_allclose(np.abs(spec.evecs[0, 0, 0]).max(axis=0), 1.0, atol=1e-12)


def test_su2_rotation_eigenvalues():
    a = np.array([0.3, -0.4, 1.1])
    a = a / np.linalg.norm(a) * (np.pi / 2)
    u = models.su2_rotation(a)
    spec = spectral.diagonalize_grid(constant_grid(u))
    np.testing.assert_allclose(np.sort(np.angle(spec.evals[0, 0, 0])), [-np.pi / 4, np.pi / 4], atol=1e-13)


def test_eigenvalues_are_on_the_circle_and_residual_small():
    rng = np.random.default_rng(0)
    h = rng.normal(size=(4, 2, 2, 3, 3)) + 1j * rng.normal(size=(4, 2, 2, 3, 3))
    h = h + np.conj(np.swapaxes(h, -1, -2))
    e, v = np.linalg.eigh(h)
    u = (v * np.exp(1j * e)[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))
    spec = spectral.diagonalize_grid(UnitaryGrid(u))
    assert np.all(np.abs(spec.evals) == pytest.approx(1.0, abs=1e-15))
    assert spec.max_residual < spectral.EPS_RESIDUAL


def test_degenerate_samples_get_orthonormal_basis():
    u = np.diag([1j, 1j, -1.0 + 0j])
    spec = spectral.diagonalize_grid(constant_grid(u))
    gram = np.conj(np.swapaxes(spec.evecs, -1, -2)) @ spec.evecs
    assert np.abs(gram - np.eye(3)).max() < 1e-12


@pytest.mark.parametrize("bad", [
    np.ones((2, 2, 2, 2, 3)),
    np.ones((2, 2, 2)),
])
def test_bad_shapes_rejected(bad):
    with pytest.raises(InvalidGrid):
        UnitaryGrid(bad)


def test_non_unitary_sample_rejected():
    samples = np.broadcast_to(np.eye(2, dtype=complex), (3, 3, 3, 2, 2)).copy()
    samples[1, 2, 0] *= 1.001
    with pytest.raises(InvalidGrid, match=r"\(1, 2, 0\)"):
        UnitaryGrid(samples)


def test_unitarity_tolerance_is_configurable():
    samples = np.broadcast_to(np.eye(2, dtype=complex), (2, 2, 2, 2, 2)).copy()
    samples[0, 0, 0] *= 1 + 1e-8
    with pytest.raises(InvalidGrid):
        UnitaryGrid(samples)
    UnitaryGrid(samples, eps_unitary=1e-6)


def test_constant_grid_has_identity_permutations():
    rng = np.random.default_rng(3)
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))
    u = q @ np.diag(np.exp(1j * np.array([0.3, 2.0, -2.2]))) @ np.conj(q.T)
    spec = spectral.spectral_grid(constant_grid(u))
    for p in spec.perms:
        assert np.all(p == np.arange(3))


def test_swapped_eigenvectors_give_transposition():
    # same unitary at two points, eigenpairs stored in swapped slots
    u = np.diag(np.exp([0.4j, -1.3j]))
    spec = spectral.diagonalize_grid(constant_grid(u, dims=(2, 1, 1)))
    evals = spec.evals.copy()
    evecs = spec.evecs.copy()
    evals[1, 0, 0] = evals[1, 0, 0, ::-1]
    evecs[1, 0, 0] = evecs[1, 0, 0][:, ::-1]
    matched = spectral.match_bands(replace(spec, evals=evals, evecs=evecs))
    assert matched.perms[0][0, 0, 0].tolist() == [1, 0]
    assert matched.perms[0][1, 0, 0].tolist() == [1, 0]


def test_greedy_match_tie_breaks():
    overlap = np.array([[[0.5, 0.5], [0.5, 0.5]]])
    arc = np.array([[[0.2, 0.1], [0.1, 0.2]]])
    assert spectral.greedy_match(overlap, arc)[0].tolist() == [1, 0]
    # full tie: lower index wins
    assert spectral.greedy_match(overlap, np.zeros_like(arc))[0].tolist() == [0, 1]


def test_matching_floor_violation_names_edge():
    # eigenbasis jumps to the 3 x 3 Fourier basis between neighbours along axis 1:
    # every overlap is 1/sqrt(3) < 1/sqrt(2)
    dft = np.exp(2j * np.pi * np.outer(np.arange(3), np.arange(3)) / 3) / np.sqrt(3)
    d = np.diag(np.exp([0.5j, -0.5j, 2.5j]))

    def fn(mu):
        jump = (np.floor(2 * mu[..., 0]) == 1)[..., None, None]
        return np.where(jump, dft @ d @ np.conj(dft.T), d)

    grid = models.sample_grid(fn, (2, 2, 2), offset=0.0)
    with pytest.raises(GridTooCoarse, match="edge") as info:
        spectral.spectral_grid(grid)
    assert info.value.where[0] == "edge"


def test_sheet_map_matches_with_overlap():
    grid = models.sample_grid(lambda mu: models.su2_sheet_map(models.Su2SheetParams(1), mu), (6, 6, 6))
    spec = spectral.spectral_grid(grid)
    assert spec.min_overlap >= spectral.TAU_MATCH
    spectral.check_face_holonomy(spec)


def test_ball_map_w1_matching():
    """Ball map, w = 1 on 6^3: eigenvalue matching succeeds with trivial face holonomy.

    Overlap matching is refused by contract: the eigenvector fields on opposite
    faces of the cube are mirror images and tie at exactly 1/sqrt(2).
    """
    grid = models.sample_grid(lambda mu: models.su2_ball_map(models.Su2BallParams(1), mu), (6, 6, 6))
    spec = spectral.spectral_grid(grid, method="eigenvalue")
    spectral.check_face_holonomy(spec)
    assert spectral.spectral_grid(grid, method="auto").match_method == "eigenvalue"
    with pytest.raises(GridTooCoarse):
        spectral.spectral_grid(grid, method="overlap")


def test_unknown_method_rejected():
    with pytest.raises(ValueError):
        spectral.spectral_grid(constant_grid(np.eye(2, dtype=complex)), method="nearest")


def test_open_axis_has_no_wrapping_edges():
    grid = constant_grid(np.diag(np.exp([0.1j, 2.0j])), periodic=(True, True, False))
    spec = spectral.spectral_grid(grid)
    assert np.all(spec.perms[2][:, :, -1] == -1)
    assert np.all(spec.perms[2][:, :, :-1] >= 0)
    assert not spec.edge_valid(2)[:, :, -1].any()


def test_gauge_change_keeps_permutations():
    grid = models.sample_grid(lambda mu: models.su2_sheet_map(models.Su2SheetParams(2), mu), (12, 12, 12))
    spec = spectral.spectral_grid(grid)
    rng = np.random.default_rng(1)
    other = spec.with_phases(np.exp(1j * rng.uniform(0, 2 * np.pi, spec.evals.shape)))
    for a in range(3):
        np.testing.assert_array_equal(other.perms[a], spec.perms[a])


def test_determinism_bit_for_bit():
    grid = models.sample_grid(lambda mu: models.su2_ball_map(models.Su2BallParams(2), mu), (8, 8, 8))
    a = spectral.spectral_grid(grid, method="eigenvalue")
    b = spectral.spectral_grid(grid, method="eigenvalue")
    assert np.array_equal(a.evals, b.evals) and np.array_equal(a.evecs, b.evecs)
    for x, y in zip(a.links, b.links):
        assert np.array_equal(x, y)
