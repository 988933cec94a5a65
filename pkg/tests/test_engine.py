import numpy as np
import pytest

from randmaps import random_grid
from w3inv import engine, models, spectral
from w3inv.errors import ConsistencyError, GridTooCoarse

PI = np.pi


def sheet(w, n):
    p = models.Su2SheetParams(w)
    return models.sample_grid(lambda mu: models.su2_sheet_map(p, mu), (n, n, n))


def ball(w, n):
    p = models.Su2BallParams(w)
    return models.sample_grid(lambda mu: models.su2_ball_map(p, mu), (n, n, n))


def run(grid, method="overlap", **kw):
    spec = spectral.spectral_grid(grid, method=method)
    return spec, engine.compute_invariants(spec, **kw)


def test_identity_map():
    spec, rep = run(models.sample_grid(models.identity_map(2), (4, 4, 4)))
    assert rep.w3 == 0 and rep.w1 == [0, 0, 0]
    assert all(c.total == 0 and c.per_band == [0, 0] for c in rep.chern)
    assert rep.diagnostics.max_dphi == 0.0 and rep.diagnostics.admissible
    assert rep.charged_cubes == []
    faces = engine.face_curvature(spec)
    assert all(np.all(f == 0) for f in faces)


def test_single_winding_eigenvalue():
    def fn(mu):
        out = np.zeros(mu.shape[:-1] + (2, 2), dtype=complex)
        out[..., 0, 0] = np.exp(2j * PI * mu[..., 0])
        out[..., 1, 1] = 1.0
        return out

    _, rep = run(models.sample_grid(fn, (5, 4, 4)))
    assert rep.w1 == [1, 0, 0]
    assert rep.w3 == 0


def test_sheet_map_w1():
    spec, rep = run(sheet(1, 6))
    assert rep.w3 == 2
    assert rep.w1[2] == 0
    assert rep.charged_cubes == []
    faces = engine.face_curvature(spec)
    mu3 = (np.arange(6) + models.DEFAULT_OFFSET) / 6
    for s in range(6):
        c = engine.chern_hat(spec, faces, 2, s)
        # the band with eigenphase +2 pi mu3 carries +1
        plus = int(np.argmin(np.abs(np.angle(spec.evals[0, 0, s] * np.exp(-2j * PI * mu3[s])))))
        assert c.per_band[plus] == 1 and c.per_band[1 - plus] == -1


def test_sheet_map_m_sheet():
    """Nonzero edge integers only on the axis-3 edges crossing mu3 = 1/2."""
    n = 6
    spec = spectral.spectral_grid(sheet(1, n))
    lat = engine.Lattice.from_spectral(spec)
    ledger = engine.build_ledger(spec, lat.cubes)
    assert not ledger.m[0].any() and not ledger.m[1].any()
    layers = np.flatnonzero(ledger.m[2].any(axis=(0, 1, 3)))
    mu3 = (np.arange(n) + models.DEFAULT_OFFSET) / n
    # backward edge (i3 - 1, i3) crosses the sheet
    for i3 in layers:
        assert mu3[i3 - 1] < 0.5 < mu3[i3]
    assert layers.size == 1


def test_sheet_map_w2_gives_four():
    assert run(sheet(2, 12))[1].w3 == 4


def test_ball_map_w1_and_charged_cubes():
    spec, rep = run(ball(1, 6), method="eigenvalue")
    assert rep.w3 == 1
    for cube in rep.charged_cubes:
        assert sum(cube["charges"]) == 0
        assert sorted(cube["charges"]) == [-1, 1]
    # the cube holding the centre of the torus cell is charged
    centre = tuple(int(np.floor(0.5 * 6 - models.DEFAULT_OFFSET)) for _ in range(3))
    assert list(centre) in [c["point"] for c in rep.charged_cubes]


def test_branch_cut_changes_ledger_not_w3():
    spec = spectral.spectral_grid(sheet(1, 6))
    lat = engine.Lattice.from_spectral(spec)
    a = engine.build_ledger(spec, lat.cubes, PI)
    b = engine.build_ledger(spec, lat.cubes, 0.3)
    assert any(not np.array_equal(x, y) for x, y in zip(a.m, b.m))
    for cut in (PI, 0.3, -2.0, 1e-3):
        assert engine.compute_invariants(spec, branch_cut=cut, lattice=lat).w3 == 2


def test_forward_edges_agree():
    spec = spectral.spectral_grid(ball(2, 12), method="eigenvalue")
    assert engine.compute_invariants(spec, backward=False).w3 == engine.compute_invariants(spec).w3 == 2


def test_two_band_faces_are_opposite():
    rng = np.random.default_rng(7)
    for _ in range(10):
        spec = spectral.spectral_grid(random_grid(rng, 2, (4, 4, 4), scale=0.3, windings=False))
        for f in engine.face_curvature(spec):
            s = f.sum(axis=-1)
            assert np.abs(s - np.rint(s)).max() < 1e-12


def test_faces_in_principal_range():
    spec = spectral.spectral_grid(sheet(3, 18))
    for f in engine.face_curvature(spec):
        assert np.all(f > -0.5) and np.all(f <= 0.5)


def test_inadmissible_phase_step_flagged():
    # eigenvalue steps of 0.6 pi along axis 1
    def fn(mu):
        out = np.zeros(mu.shape[:-1] + (2, 2), dtype=complex)
        out[..., 0, 0] = np.exp(6j * PI * mu[..., 0])
        out[..., 1, 1] = 1.0
        return out

    _, rep = run(models.sample_grid(fn, (10, 3, 3)))
    assert rep.diagnostics.max_dphi == pytest.approx(0.6 * PI)
    assert not rep.diagnostics.admissible
    assert rep.w1 == [3, 0, 0]


def test_pair_charges():
    assert engine.pair_charges(np.array([1, -1])) == [(0, 1, 1)]
    assert engine.pair_charges(np.array([-1, 0, 1])) == [(0, 2, -1)]
    assert engine.pair_charges(np.array([1, 1, -2])) == [(0, 2, 1), (1, 2, 1)]
    with pytest.raises(ConsistencyError):
        engine.pair_charges(np.array([1, 0, 0]))


def test_branch_log_phase_ranges():
    z = np.exp(1j * np.linspace(-PI, PI, 41))
    for cut in (PI, 0.0, 1.0):
        top = engine.branch_log_phase(z, cut)
        assert np.all(top <= cut) and np.all(top > cut - 2 * PI - 1e-12)
        open_top = engine.branch_log_phase(z, cut, closed_top=False)
        assert np.all(open_top < cut) and np.all(open_top >= cut - 2 * PI)
        np.testing.assert_allclose(np.exp(1j * top), z, atol=1e-12)


def test_nearest_winding_refuses_ties():
    assert engine._nearest_winding(np.array([0.1, 2 * PI + 0.2, -3 * PI - 0.5]), "x").tolist() == [0, -1, 2]
    with pytest.raises(GridTooCoarse):
        engine._nearest_winding(np.array([PI]), "x")


def test_check_integer():
    assert engine.check_integer(2.0000000001, "v") == 2
    with pytest.raises(GridTooCoarse, match="not an integer"):
        engine.check_integer(1.9, "v", max_dphi=1.0)


def test_requires_periodic_grid():
    grid = spectral.UnitaryGrid(np.broadcast_to(np.eye(2, dtype=complex), (3, 3, 3, 2, 2)).copy(),
                                periodic=(True, True, False))
    spec = spectral.spectral_grid(grid)
    with pytest.raises(ValueError):
        engine.compute_invariants(spec)
    with pytest.raises(ValueError):
        engine.w3_direct_central_difference(grid)


def test_central_difference_baseline():
    assert engine.w3_direct_central_difference(models.sample_grid(models.identity_map(2), (4, 4, 4))) == 0.0
    values = [engine.w3_direct_central_difference(sheet(2, n)) for n in (10, 20, 40)]
    errors = [abs(v - 4) for v in values]
    assert errors[0] > 0.05
    assert errors[0] > errors[1] > errors[2]


def test_report_dict_fields():
    rep = run(sheet(1, 6))[1].to_dict()
    assert set(rep) == {"invariants", "charged_cubes", "diagnostics"}
    assert rep["invariants"]["W3"] == 2
    assert set(rep["diagnostics"]) >= {"W3_raw", "max_dphi", "admissible"}
