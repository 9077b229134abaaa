"""Flows on the sphere, linearizations and trivializations."""

import math

import numpy as np
import pytest

from spindex.hamiltonian import rotation, tabulated, zero
from spindex.sphere_flow import (ChartAtlas, NonClosedOrbitError, TrivializationError, TrivializationRecord,
                                 area_drift, flow, linearized_flow, mean_index_orbit, time_one_map, vector_field)

GOLDEN_T = (5 ** 0.5 - 1) / 2


def _poly():
    return tabulated([(2, 0, 1, 1.0), (0, 1, 2, 0.5), (1, 1, 0, 0.3)])


def test_rotation_time_one_map_closed_form():
    # [DERIVED] rotation(alpha) turns every point by 2 pi alpha about the z axis
    alpha = 0.3
    P = ChartAtlas.from_cylindrical(np.array([[0.4, 0.2], [-0.7, 2.0], [0.0, 5.0]]))
    Q = time_one_map(rotation(alpha), P)
    zt_p, zt_q = ChartAtlas.to_cylindrical(P), ChartAtlas.to_cylindrical(Q)
    assert np.allclose(zt_q[:, 0], zt_p[:, 0], atol=1e-12)
    turn = np.mod(zt_q[:, 1] - zt_p[:, 1], 2 * math.pi)
    assert np.allclose(turn, 2 * math.pi * alpha, atol=1e-9)


def test_integrator_is_fourth_order():
    # [DERIVED] halving the step of a 2-stage Gauss method cuts the error by ~16
    H, P = _poly(), np.array([[1.0, 0.0, 0.0]])
    ref = time_one_map(H, P, step=2.5e-4)
    errs = [np.linalg.norm(time_one_map(H, P, step=h) - ref) for h in (1e-2, 5e-3)]
    assert 12.0 < errs[0] / errs[1] < 20.0


def test_field_tangent_and_area_preserved():
    H = _poly()
    rng = np.random.default_rng(0)
    P = rng.standard_normal((20, 3))
    P /= np.linalg.norm(P, axis=1, keepdims=True)
    X = vector_field(H, 0.3, P)
    assert np.max(np.abs(np.sum(X * P, axis=1))) <= 1e-14
    assert area_drift(H) <= 1e-10
    Q = time_one_map(H, P)
    assert np.max(np.abs(np.linalg.norm(Q, axis=1) - 1.0)) <= 1e-12


def test_zero_hamiltonian_is_identity():
    P = np.array([[0.6, 0.0, 0.8]])
    assert np.array_equal(time_one_map(zero(), P), P)


def test_cylinder_and_cap_charts_roundtrip():
    rng = np.random.default_rng(2)
    P = rng.standard_normal((50, 3))
    P /= np.linalg.norm(P, axis=1, keepdims=True)
    assert np.allclose(ChartAtlas.from_cylindrical(ChartAtlas.to_cylindrical(P)), P, atol=1e-13)
    north = P[P[:, 2] > 0]
    assert np.allclose(ChartAtlas.from_cap(ChartAtlas.to_cap(north, "north"), "north"), north, atol=1e-13)


def test_coarse_step_warns():
    with pytest.warns(UserWarning):
        traj = flow(rotation(0.3), (1.0, 0.0, 0.0), 1.0, step=1e-2)
    assert traj.warnings


def test_pole_index_and_frame_independence():
    # [DERIVED] the north pole of rotation(alpha) has lifted index 2 alpha
    H = rotation(0.3)
    d1, m = mean_index_orbit(H, (0, 0, 1))
    d2, _ = mean_index_orbit(H, (0, 0, 1), triv=TrivializationRecord((1.0, 0.0, 0.0)))
    assert abs(d1 - 0.6) <= 1e-9 and abs(d2 - 0.6) <= 1e-9
    assert abs(m.value - 0.6) <= 1e-9
    d_south, _ = mean_index_orbit(H, (0, 0, -1))
    assert abs(d_south + 0.6) <= 1e-9


def test_winding_correction_shifts_by_two():
    H = rotation(0.3)
    base = linearized_flow(H, (0, 0, 1))
    shifted = linearized_flow(H, (0, 0, 1), triv=TrivializationRecord((0, 0, -1), winding_correction=1))
    from spindex.index_core import mean_index
    assert abs(mean_index(shifted) - mean_index(base) - 2.0) <= 1e-9


def test_trivialization_breakdown_suggests_point():
    with pytest.raises(TrivializationError, match="excluded_point="):
        mean_index_orbit(rotation(0.3), (0, 0, 1), triv=TrivializationRecord((0, 0, 1)))


def test_non_closed_orbit_rejected():
    with pytest.raises(NonClosedOrbitError):
        mean_index_orbit(rotation(0.3), (1.0, 0.0, 0.0))


def test_energy_conserved_for_time_separable_field():
    # the schedule only rescales time, so level sets of the spatial part are invariant
    from spindex.hamiltonian import compile_spec
    H = _poly()
    ham = compile_spec(H)
    traj = flow(H, (0.6, 0.0, 0.8), 1.0)
    e = ham.value(0.5, traj.points)
    assert np.max(np.abs(e - e[0])) <= 1e-8


def test_rational_rotation_period_and_zero_time():
    P = ChartAtlas.from_cylindrical(np.array([[0.2, 1.0], [-0.5, 3.0]]))
    assert np.max(np.abs(time_one_map(rotation(1.0 / 3.0), P, k=3) - P)) <= 1e-8
    assert np.max(np.abs(time_one_map(rotation(GOLDEN_T), P, k=3) - P)) > 1e-3
    traj = flow(rotation(0.3), P[0], 0.0)
    assert np.array_equal(traj.end, P[0])


def test_linearized_determinant_and_csv(tmp_path):
    path = linearized_flow(_poly(), (0.0, 0.0, 1.0), 1.0, TrivializationRecord((0.6, 0.0, -0.8)))
    assert np.max(np.abs(np.linalg.det(path.ms) - 1.0)) <= 1e-8
    traj = flow(_poly(), (0.6, 0.0, 0.8), 0.1)
    traj.to_csv(tmp_path / "t.csv")
    head = (tmp_path / "t.csv").read_text().splitlines()[0]
    assert head == "t,x,y,z"
