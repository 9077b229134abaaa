"""Blow-up to the cylinder, torus gluing, flux and the torus census."""

import math

import numpy as np
import pytest

from conftest import GOLDEN
from spindex.blowup_glue import (BlowUpError, CollarError, FluxVector, TorusHamiltonianIsotopy,
                                 TranslationIsotopy, blow_up, dichotomy_verdict, divergence_drift, flux,
                                 generic_torus_census, glue, index_gap_report, iterate_deltas, rates_from_flux)
from spindex.hamiltonian import rotation, zero


@pytest.fixture(scope="module")
def golden_cyl():
    return blow_up(rotation(GOLDEN), grid=(16, 32))


def test_boundary_rotation_matches_mean_index(golden_cyl):
    # [DERIVED] rotation(alpha) turns both boundary circles by 2 pi alpha in theta
    bp, bq = golden_cyl.boundary_rotations
    assert abs(bp - 2 * math.pi * GOLDEN) <= 1e-8
    assert abs(bq - 2 * math.pi * GOLDEN) <= 1e-8
    lp, lq = golden_cyl.local_rotations
    assert abs(lp + lq) <= 1e-8
    assert golden_cyl.boundary_rigidity() <= 1e-6
    assert np.allclose(golden_cyl.theta_shift, 2 * math.pi * GOLDEN, atol=1e-8)


def test_interpolation_matches_flow(golden_cyl):
    z, th = np.array([0.3, -0.55]), np.array([1.0, 4.0])
    ze, te = golden_cyl.evaluate(z, th)
    zi, ti = golden_cyl.interpolate(z, th)
    assert np.allclose(ze, zi, atol=1e-8)
    assert np.allclose(np.angle(np.exp(1j * (te - ti))), 0.0, atol=1e-8)
    assert golden_cyl.area_drift(n=8) <= 1e-10


def test_blow_up_rejections():
    with pytest.raises(BlowUpError, match="degenerate: completion undefined"):
        blow_up(zero(), grid=(8, 16))
    with pytest.raises(BlowUpError, match="antipodal"):
        blow_up(rotation(0.3), Q=(1.0, 0.0, 0.0), grid=(8, 16))
    with pytest.raises(BlowUpError, match="static"):
        blow_up(rotation(0.3), P=(1.0, 0.0, 0.0), grid=(8, 16))


def test_collar_error_near_identity_rotation():
    cyl = blow_up(rotation(1e-4), grid=(8, 16))
    with pytest.raises(CollarError, match="fixed-point-free"):
        glue(cyl)
    with pytest.raises(ValueError):
        glue(blow_up(rotation(0.3), grid=(8, 16)), tau=0.0)


def test_glued_rotation_flux_is_nonzero(golden_cyl):
    iso = glue(golden_cyl, tau=0.5)
    assert iso.total_area == 10 * math.pi
    assert divergence_drift(iso) <= 1e-6
    fv = flux(iso)
    # [DERIVED] every s-slice turns by 2 pi alpha in theta, so A1 = L1 2 pi alpha before reduction
    assert abs(fv.raw[0] - iso.L1 * 2 * math.pi * GOLDEN) <= 1e-8
    assert not fv.is_zero()


def test_translation_convention():
    fv = flux(TranslationIsotopy(4.0, 0.1, 0.2))
    assert abs(fv.A1 - 0.2 * 4.0) <= 1e-12
    assert abs(fv.A2 + 0.1 * 2 * math.pi) <= 1e-12
    assert rates_from_flux(fv, 4.0) == pytest.approx((0.1, 0.2), abs=1e-12)


def test_hamiltonian_torus_dichotomy():
    iso = TorusHamiltonianIsotopy.random(5.0, seed=1, amplitude=0.05)
    fv = flux(iso)
    assert fv.is_zero()
    tc = generic_torus_census(iso)
    assert tc.points and tc.lefschetz_sum == 0
    assert dichotomy_verdict(fv, tc).verdict == "hamiltonian-like"


def test_translation_dichotomy():
    iso = TranslationIsotopy(5.0, 0.3, 0.4)
    fv = flux(iso)
    tc = generic_torus_census(iso)
    assert not tc.points
    assert dichotomy_verdict(fv, tc).verdict == "fixed-point-free-like"
    empty_zero = dichotomy_verdict(FluxVector(0.0, 0.0, 10.0), tc)
    assert empty_zero.verdict == "inconsistent"


def test_island_torus_labels_and_gaps(island_torus):
    _, _, tc = island_torus
    labels = [p.label for p in tc.points]
    assert len(set(labels)) == len(labels)
    assert all(p.classification in ("elliptic", "hyperbolic") for p in tc.points)
    d1, d4 = iterate_deltas(tc, 1), iterate_deltas(tc, 4)
    for lab in labels:
        assert abs(d4[lab] - 4 * d1[lab]) <= 1e-8
    first = labels[0]
    rows = index_gap_report(tc, base_tag=first, k=2)
    assert rows and all(first in (r.a, r.b) for r in rows)


def test_boundary_action_is_limit_of_interior(island_torus):
    cyl, _, _ = island_torus
    th = np.array([0.5, 2.0, 4.5])
    for which, z in (("P", 1.0 - 1e-7), ("Q", -1.0 + 1e-7)):
        _, te = cyl.evaluate(np.full(3, z), th)
        expect = cyl.boundary_action(which, th)
        assert np.max(np.abs(np.angle(np.exp(1j * (te - expect))))) <= 1e-5


def test_flux_invariant_under_torus_function():
    tr = TranslationIsotopy(5.0, 0.2, -0.3)
    ham = TorusHamiltonianIsotopy.random(5.0, seed=9)
    from spindex.blowup_glue import ConcatenatedIsotopy
    a, b = flux(tr), flux(ConcatenatedIsotopy([ham, tr]))
    assert abs(a.A1 - b.A1) <= 1e-6 and abs(a.A2 - b.A2) <= 1e-6


def test_copies_share_lifted_indices(island_torus):
    _, _, tc = island_torus
    for a, b in zip(tc.copy("+"), tc.copy("-")):
        assert a.label[:-1] == b.label[:-1]
        assert abs(a.delta - b.delta) <= 1e-6


def test_gap_table_at_first_iterate(island_torus):
    _, _, tc = island_torus
    d = iterate_deltas(tc, 1)
    for r in index_gap_report(tc, k=1):
        assert abs(r.gap - abs(d[r.a] - d[r.b])) <= 1e-12
        assert r.equal == (r.gap <= 1e-6)
    lone = type(tc)(tc.points[:1], 0, tc.collar_clearance, None)
    assert index_gap_report(lone, k=4) == []
