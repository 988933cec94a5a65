"""Acceptance suite; ``conftest.py`` prints one PASS/FAIL line per criterion."""

import time

import numpy as np
import pytest

import test_properties as props
from w3inv import engine, floquet, models, spectral
from w3inv.floquet import DrivenBlochModel

PI = np.pi
criterion = pytest.mark.criterion


def sheet(w, n):
    p = models.Su2SheetParams(w)
    return models.sample_grid(lambda mu: models.su2_sheet_map(p, mu), (n, n, n))


def ball(w, n):
    p = models.Su2BallParams(w)
    return models.sample_grid(lambda mu: models.su2_ball_map(p, mu), (n, n, n))


def graphene_model(a0=0.7, omega=3.5):
    p = models.GrapheneParams(A0=a0, omega=omega)
    return DrivenBlochModel(2, lambda a, b, t: models.graphene_bloch_h(p, a, b, t), p.period, hnorm=3.0)


def qwz_model(mass=1.0):
    hnorm = float(np.sqrt(2.0 + (abs(mass) + 2.0) ** 2))
    return DrivenBlochModel(2, lambda a, b, t: models.qwz_bloch_h(a, b, mass=mass), 0.9 * PI / hnorm,
                            hnorm=hnorm, static=True)


def timed(fn, *args, **kw):
    start = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - start


# 1 -----------------------------------------------------------------------

@criterion("1", "sheet map W3 = 2w on max(6, 6w)^3, < 10 s each")
@pytest.mark.parametrize("w", [1, 2, 3])
def test_sheet_map(w):
    n = max(6, 6 * w)

    def go():
        return engine.compute_invariants(spectral.spectral_grid(sheet(w, n)))

    rep, secs = timed(go)
    assert rep.w3 == 2 * w
    assert rep.diagnostics.admissible
    assert abs(rep.w3_raw - 2 * w) < 1e-6
    assert secs < 10.0


# 2 -----------------------------------------------------------------------

@criterion("2", "ball map W3 = w; single charged cube pair for w = 1 on 6^3")
@pytest.mark.parametrize("w", [1, 2, 3])
def test_ball_map(w):
    n = max(6, 6 * w)

    def go():
        return engine.compute_invariants(spectral.spectral_grid(ball(w, n), method="eigenvalue"))

    rep, secs = timed(go)
    assert rep.w3 == w
    assert secs < 10.0


@criterion("2", "ball map W3 = w; single charged cube pair for w = 1 on 6^3")
def test_ball_map_single_charged_cube():
    rep = engine.compute_invariants(spectral.spectral_grid(ball(1, 6), method="eigenvalue"))
    centre = [int(np.floor(0.5 * 6 - models.DEFAULT_OFFSET))] * 3
    points = [c["point"] for c in rep.charged_cubes]
    assert centre in points
    assert sorted(rep.charged_cubes[points.index(centre)]["charges"]) == [-1, 1]
    assert len(rep.charged_cubes) == 1, f"{len(rep.charged_cubes)} charged cubes at {points}"


# 3 -----------------------------------------------------------------------

@criterion("3", "graphene n = (-1, 2) on 6^3 and 16^3, C = (-3, +3) at 16^3, < 2 min")
@pytest.mark.parametrize("n", [6, 16])
def test_graphene(n):
    def go():
        spec = floquet.floquet_spectral(floquet.propagate(graphene_model(), (n, n, n)))
        return floquet.floquet_invariants(spec, [0.0, PI])

    result, secs = timed(go)
    values = dict(zip(result.gaps, (r.w3 for r in result.reports)))
    # xi = 1 is the gap at angle 0, xi = -1 the gap at pi
    assert values[0.0] == -1
    assert values[PI] == 2
    assert result.relation_ok
    if n == 16:
        assert result.band_chern == [-3, 3]
    assert secs < 120.0


# 4 -----------------------------------------------------------------------

@criterion("4", "sheet w = 2: W3 = 4 at every admissible N in 6..20, baseline off by > 0.05 at N = 10")
def test_convergence_comparison():
    admissible = []
    for n in range(6, 21):
        rep = engine.compute_invariants(spectral.spectral_grid(sheet(2, n)))
        if rep.diagnostics.admissible:
            admissible.append(n)
            assert rep.w3 == 4, n
            baseline = engine.w3_direct_central_difference(sheet(2, n))
            # the algorithm's error is zero, the baseline's is not
            assert abs(baseline - 4) > abs(rep.w3 - 4)
    assert 10 in admissible
    assert abs(engine.w3_direct_central_difference(sheet(2, 10)) - 4) > 0.05


# 5 -----------------------------------------------------------------------

@criterion("5", "property suites, 200 randomized trials each")
@pytest.mark.parametrize("suite", [
    props.test_integer_residual,
    props.test_gauge_invariance,
    props.test_branch_cut_invariance,
    props.test_chern_sum_rules,
    props.test_gap_shift_relation,
], ids=["a-integer", "b-gauge", "c-branch-cut", "d-chern-sums", "e-gap-shift"])
def test_property_suite(suite):
    suite()


@criterion("5", "property suites, 200 randomized trials each")
def test_property_generators_are_usable():
    props.test_random_generators_are_usable()


# 6 -----------------------------------------------------------------------

@criterion("6", "static Chern model: n = (1, 0) from track_gaps and w3_xi at every slice, no charged cubes")
def test_static_specialization():
    model = qwz_model(1.0)
    dims = (8, 8, 8)
    track = floquet.track_gaps(model, dims)
    assert track.charged_cubes == []
    assert all(s.n_values == [1, 0] for s in track.slices)
    assert all(s.chern == [1, -1] for s in track.slices)
    spec = floquet.floquet_spectral(floquet.propagate(model, dims))
    checked = floquet.cross_check_track(track, spec)
    assert len(checked) == dims[2]
    assert all(v == [1, 0] for _, v in checked)
    static = floquet.static_specialize(lambda a, b: models.qwz_bloch_h(a, b, mass=1.0), dims[:2])
    assert static.chern == [1, -1]
    assert static.n_values == [1, 0] and static.check_values == [1, 0]


# 7 -----------------------------------------------------------------------

@criterion("7", "graphene propagator: doubled substeps keep the integers, drift < 1e-4")
@pytest.mark.parametrize("n", [6, 16])
def test_self_convergence(n):
    model = graphene_model()
    base = floquet.propagate(model, (n, n, n))
    fine = floquet.propagate(model, (n, n, n), substeps=2 * base.substeps)
    results = [floquet.floquet_invariants(floquet.floquet_spectral(p), [0.0, PI]) for p in (base, fine)]
    assert [r.w3 for r in results[0].reports] == [r.w3 for r in results[1].reports]
    assert results[0].band_chern == results[1].band_chern
    ea = np.sort(np.angle(np.linalg.eigvals(base.grid.samples[:, :, -1])), axis=-1)
    eb = np.sort(np.angle(np.linalg.eigvals(fine.grid.samples[:, :, -1])), axis=-1)
    drift = np.abs(np.angle(np.exp(1j * (ea - eb)))).max()
    assert drift < 1e-4


# 8 -----------------------------------------------------------------------

@criterion("8", "strip spectrum, width >= 20: bulk gaps around 0 and pi stay open")
def test_strip_gaps_open():
    params = models.GrapheneParams(A0=0.7, omega=3.5)
    assert params.strip_width >= 20
    _, phases, weight = models.strip_quasienergy_spectrum(params, edge_cells=4)
    bulk_states = phases[weight < 0.5]
    bulk_run = models.bulk_quasienergies(params)
    for centre in (0.0, PI):
        lo, hi = models.gap_interval(bulk_run, centre)
        assert hi - lo > 0.1
        rel = np.angle(np.exp(1j * (bulk_states - centre)))
        assert not np.any((rel > lo) & (rel < hi)), centre
