"""Index computations on 2x2 symplectic paths."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spindex.index_core import (LemmaInapplicableError, NonSymplecticError, SymplecticPath2,
                                UndersampledPathError, concatenate_paths, cz_index, cz_via_closest_odd, exp_path,
                                index_report, iterate_path, mean_index, reduce_mod, rotation, rotation_path,
                                smooth_random_path)


# -- oracles: closed forms ------------------------------------------------------

@given(st.floats(-12.0, 12.0))
@settings(max_examples=60, deadline=None)
def test_rotation_mean_index_is_angle_over_pi(x):
    # [DERIVED] R(pi x t) winds x half-turns
    assert abs(mean_index(rotation_path(math.pi * x, n=513)) - x) <= 1e-9


def test_hyperbolic_exp_path_has_zero_index():
    # [DERIVED] exp(t diag(a, -a)) never rotates
    p = exp_path(np.diag([0.7, -0.7]))
    assert abs(mean_index(p)) <= 1e-12
    assert cz_index(p) == 0


@pytest.mark.parametrize("x,mu", [(0.6, 1), (1.2, 1), (2.5, 3), (-0.6, -1), (-3.3, -3)])
def test_rotation_cz_index(x, mu):
    # [DERIVED] elliptic endpoint: the odd integer closest to the mean index
    assert cz_index(rotation_path(math.pi * x)) == mu


def test_degenerate_endpoint_reported():
    assert cz_index(rotation_path(2 * math.pi)) == "degenerate"


# -- properties -----------------------------------------------------------------

def test_iterate_and_concatenate_are_additive():
    rng = np.random.default_rng(1)
    a, b = smooth_random_path(rng), smooth_random_path(rng)
    assert abs(mean_index(iterate_path(a, 3)) - 3 * mean_index(a)) <= 1e-9
    # a loop followed by a path adds the loop's winding
    loop = rotation_path(4 * math.pi)
    assert abs(mean_index(concatenate_paths(loop, b)) - (4 + mean_index(b))) <= 1e-9


def test_closest_odd_rejects_integers():
    with pytest.raises(LemmaInapplicableError, match="integer"):
        cz_via_closest_odd(2.0)
    assert cz_via_closest_odd(1.9) == 1 and cz_via_closest_odd(2.1) == 3


def test_reduce_mod():
    m = reduce_mod(-1.25, 4)
    assert abs(m.value - 2.75) <= 1e-15
    assert abs(reduce_mod(3.999999, 4).distance_to_zero() - 1e-6) <= 1e-12


# -- validation -----------------------------------------------------------------

def test_non_symplectic_rejected():
    ms = np.stack([np.eye(2), 1.1 * np.eye(2)])
    with pytest.raises(NonSymplecticError):
        SymplecticPath2(np.array([0.0, 1.0]), ms)


def test_undersampled_rejected():
    ms = np.stack([np.eye(2), rotation(3.0)])
    with pytest.raises(UndersampledPathError):
        SymplecticPath2(np.array([0.0, 1.0]), ms)


def test_report_and_json_roundtrip():
    p = rotation_path(1.2 * math.pi)
    rep = index_report(p)
    assert rep.mu == 1 and abs(rep.delta - 1.2) <= 1e-12
    q = SymplecticPath2.from_json(p.to_json())
    assert np.allclose(q.ms, p.ms) and abs(mean_index(q) - rep.delta) <= 1e-12
