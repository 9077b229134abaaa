"""Fixed-point census, classification, twists and rationality."""

import math

import numpy as np
import pytest

from spindex.hamiltonian import TwistPerturbation, rotation, zero
from spindex.index_core import LemmaInapplicableError, rotation as rot
from spindex.orbit_census import (CensusIncompleteError, CensusReport, classify, classify_trace,
                                  find_fixed_points, lefschetz_index, lefschetz_sum, rationality_test,
                                  twist_perturbation)


def test_classification_by_trace():
    assert classify_trace(1.0) == "elliptic"
    assert classify_trace(-2.5) == "hyperbolic"
    assert classify_trace(2.0) == "degenerate"
    assert classify(rot(0.4)) == "elliptic"
    assert classify(np.diag([3.0, 1 / 3.0])) == "hyperbolic"


def test_lefschetz_index_signs():
    # [DERIVED] det(I - R) = 2 - 2 cos > 0; a positive saddle has det(I - D) < 0
    assert lefschetz_index(rot(0.4)) == 1
    assert lefschetz_index(np.diag([3.0, 1 / 3.0])) == -1
    assert lefschetz_index(np.diag([-3.0, -1 / 3.0])) == 1
    with pytest.raises(LemmaInapplicableError):
        lefschetz_index(np.eye(2))


def test_island_census_signs(island_census):
    signs = {o.classification: set() for o in island_census.orbits}
    for o in island_census.orbits:
        signs[o.classification].add(1 if o.det_i_minus_d > 0 else -1)
    assert signs == {"elliptic": {1}, "hyperbolic": {-1}}
    n_ell = sum(o.classification == "elliptic" for o in island_census.orbits)
    n_hyp = len(island_census.orbits) - n_ell
    assert n_ell - n_hyp == 2


def test_zero_hamiltonian_is_a_continuum():
    census = find_fixed_points(zero())
    assert census.continuum_flag
    with pytest.raises(LemmaInapplicableError, match="non-isolated"):
        lefschetz_sum(census)


def test_rational_rotation_iterate_is_a_continuum():
    census = find_fixed_points(rotation(1.0 / 3.0), k=3)
    assert census.continuum_flag
    assert 0 < len(census.orbits) <= 16


def test_incomplete_census_detected(rotation_censuses):
    census = next(iter(rotation_censuses.values()))
    partial = CensusReport(census.orbits[:1], 1, False, 1)
    with pytest.raises(CensusIncompleteError, match="incomplete"):
        lefschetz_sum(partial)


def test_newton_tolerance_enforced():
    with pytest.raises(ValueError):
        find_fixed_points(rotation(0.3), newton_tol=1e-6)


def test_twist_requires_static_center():
    tp = TwistPerturbation((1.0, 0.0, 0.0), 0.1, 0.5)
    with pytest.raises(ValueError, match="static"):
        twist_perturbation(rotation(0.3), (1.0, 0.0, 0.0), tp)
    H = rotation(0.3)
    assert twist_perturbation(H, (0, 0, 1), TwistPerturbation((0, 0, 1), 0.0, 0.5)) is H


def test_twist_lambda_from_window():
    # [DERIVED] the bump rises and falls on quarter windows, so its integral is 3/4 of the window
    tp = TwistPerturbation((0, 0, 1), 0.4, 0.5, (0.95, 0.1))
    ts = np.linspace(0.0, 1.0, 200001)
    integral = np.trapezoid([tp.kappa(t) for t in ts], ts)
    assert abs(integral - tp.kappa_integral) <= 1e-6
    assert abs(tp.lam - 0.4 * 0.075) <= 1e-15


def test_rationality():
    assert rationality_test(1.0 / 3.0).rational
    v = rationality_test((math.sqrt(5) - 1) / 2)
    assert not v.rational and v.best.denominator <= 10_000
    with pytest.raises(ValueError):
        rationality_test(0.5, qmax=1)


def test_census_csv(tmp_path, rotation_censuses):
    census = next(iter(rotation_censuses.values()))
    path = tmp_path / "c.csv"
    census.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0].split(",") == list(CensusReport.CSV_HEADER)
    assert len(lines) == 3
