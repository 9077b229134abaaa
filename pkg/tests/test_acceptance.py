"""One pass/fail test per acceptance criterion, at the stated tolerances."""

import math

import numpy as np
import pytest

from conftest import GOLDEN, SQRT2M1
from spindex.hamiltonian import TwistPerturbation, rotation
from spindex.index_core import (cz_index, cz_via_closest_odd, is_degenerate, iterate_path, mean_index,
                                smooth_random_path)
from spindex.orbit_census import lefschetz_sum, rationality_test, twist_perturbation
from spindex.resonance import ResonanceConfig, check_generator_bound, find_resonances
from spindex.sphere_flow import TrivializationRecord, mean_index_orbit

NORTH, SOUTH = np.array([0.0, 0.0, 1.0]), np.array([0.0, 0.0, -1.0])


@pytest.mark.parametrize("alpha", [GOLDEN, SQRT2M1], ids=["golden", "sqrt2"])
def test_two_point_rotation_family(rotation_censuses, alpha):
    census = rotation_censuses[alpha]
    assert not census.continuum_flag
    assert len(census.orbits) == 2
    by_z = sorted(census.orbits, key=lambda o: -o.point[2])
    north, south = by_z
    assert np.linalg.norm(np.asarray(north.point) - NORTH) <= 1e-9
    assert np.linalg.norm(np.asarray(south.point) - SOUTH) <= 1e-9
    assert all(o.classification == "elliptic" for o in census.orbits)
    assert abs(north.delta - 2 * alpha) <= 1e-6
    assert abs(south.delta + 2 * alpha) <= 1e-6
    r = math.fmod(north.delta + south.delta, 4.0)
    assert min(abs(r), 4.0 - abs(r)) <= 1e-6
    assert not any(rationality_test(o.delta, 10_000).rational for o in census.orbits)


def test_iteration_linearity():
    rng = np.random.default_rng(20)
    worst = 0.0
    for _ in range(200):
        path = smooth_random_path(rng)
        d1 = mean_index(path)
        for k in range(2, 11):
            worst = max(worst, abs(mean_index(iterate_path(path, k)) - k * d1))
    assert worst <= 1e-8


def _nondegenerate_paths(rng, count, accept=lambda p: True):
    out = []
    while len(out) < count:
        p = smooth_random_path(rng)
        if not is_degenerate(p.endpoint) and accept(p):
            out.append(p)
    return out


def test_index_bound():
    rng = np.random.default_rng(30)
    violations = 0
    for p in _nondegenerate_paths(rng, 1000):
        mu = cz_index(p)
        violations += not abs(mu - mean_index(p)) < 1
    assert violations == 0


def test_closest_odd_rule():
    rng = np.random.default_rng(40)

    def elliptic(p):
        d = mean_index(p)
        return abs(np.trace(p.endpoint)) < 2 and abs(d - round(d)) > 1e-9

    paths = _nondegenerate_paths(rng, 1000, elliptic)
    agree = sum(cz_index(p) == cz_via_closest_odd(mean_index(p)) for p in paths)
    assert agree == 1000


@pytest.mark.parametrize("lambda0", [0.05, 0.1, 0.2])
def test_twist_additivity(lambda0):
    H = rotation(GOLDEN)
    tp = TwistPerturbation(tuple(NORTH), lambda0, 0.5)
    base, _ = mean_index_orbit(H, NORTH)
    shifted, _ = mean_index_orbit(twist_perturbation(H, NORTH, tp), NORTH)
    assert abs((shifted - base) - tp.lam / math.pi) <= 1e-4


def test_lefschetz_sum_catalog(rotation_censuses, island_census):
    for census in (*rotation_censuses.values(), island_census):
        assert lefschetz_sum(census) == 2
    assert len(island_census.orbits) > 2
    assert {o.classification for o in island_census.orbits} == {"elliptic", "hyperbolic"}


def test_mod4_well_definedness():
    # a latitude circle closes at T = 2 and separates the two poles, so the
    # frames from north and south differ by a full winding class
    H = rotation(0.5)
    p = np.array([math.sqrt(1 - 0.09), 0.0, 0.3])
    d_south, m_south = mean_index_orbit(H, p, 2.0, TrivializationRecord(tuple(SOUTH)))
    d_north, m_north = mean_index_orbit(H, p, 2.0, TrivializationRecord(tuple(NORTH)))
    diff = d_south - d_north
    assert abs(diff) > 1.0
    assert abs(diff - 4 * round(diff / 4)) <= 1e-6
    gap = abs(m_south.value - m_north.value)
    assert min(gap, 4.0 - gap) <= 1e-6


def test_flux_properties():
    from spindex.blowup_glue import (ConcatenatedIsotopy, IdentityIsotopy, TorusHamiltonianIsotopy,
                                     TranslationIsotopy, flux, rates_from_flux)
    L1 = 5.0
    fid = flux(IdentityIsotopy(L1))
    assert (fid.A1, fid.A2) == (0.0, 0.0)
    ham = TorusHamiltonianIsotopy.random(L1, seed=3)
    assert flux(ham).norm() <= 1e-8
    v1, v2 = 0.3, -0.7
    tr = TranslationIsotopy(L1, v1, v2)
    ftr = flux(tr)
    r1, r2 = rates_from_flux(ftr, L1)
    assert abs(r1 - v1) <= 1e-10 and abs(r2 - v2) <= 1e-10
    tr2 = TranslationIsotopy(L1, -0.1, 0.2)
    cat = flux(ConcatenatedIsotopy([tr, ham, tr2]))
    parts = [ftr, flux(ham), flux(tr2)]
    assert abs(cat.A1 - sum(f.A1 for f in parts)) <= 1e-8
    assert abs(cat.A2 - sum(f.A2 for f in parts)) <= 1e-8


def test_gluing_two_copies(island_census, island_torus):
    cyl, iso, tc = island_torus
    plus, minus = tc.copy("+"), tc.copy("-")
    assert {p.copy for p in tc.points} == {"+", "-"}
    assert len(plus) == len(minus) > 0
    # punctured sphere census: everything except the two marked poles
    punctured = sorted(o.trace for o in island_census.orbits if abs(o.point[2]) < 1 - 1e-6)
    for copy in (plus, minus):
        assert len(copy) == len(punctured)
        assert np.max(np.abs(np.sort([p.trace for p in copy]) - punctured)) <= 1e-6
    for a, b in zip(plus, minus):
        assert abs(a.trace - b.trace) <= 1e-6
    assert tc.collar_fixed_points == 0
    assert iso.total_area == (8 + 4 * iso.tau) * math.pi
    assert abs(iso.L1 * iso.L2 - iso.total_area) <= 1e-12


def test_index_gap_growth(island_torus):
    from spindex.blowup_glue import index_gap_report
    _, _, tc = island_torus
    rows = {k: {(r.a, r.b): r for r in index_gap_report(tc, k=k)} for k in (4, 8, 16)}
    assert rows[4]
    nonequal = [key for key, r in rows[16].items() if not r.equal]
    assert nonequal
    for key in nonequal:
        g4 = rows[4][key].gap
        for k in (8, 16):
            assert abs(rows[k][key].gap - (k / 4) * g4) <= 0.05 * (k / 4) * g4
        assert rows[16][key].gap > 3
        assert rows[16][key].flagged


def test_resonance_generator_bound(rotation_censuses):
    cfg = ResonanceConfig(N=2, n=1)
    rs = find_resonances([o.delta for o in rotation_censuses[GOLDEN].orbits], cfg)
    assert rs.rank_estimate == 1
    gen = min(rs.vectors, key=lambda v: sum(abs(x) for x in v))
    assert gen == (1, 1)
    verdict = check_generator_bound(rs, cfg)
    assert verdict.passed
    assert sum(gen) == 2 == cfg.N / (cfg.N - cfg.n)
