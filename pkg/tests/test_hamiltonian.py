"""Catalog Hamiltonians: derivatives, schedules and serialization."""

import numpy as np
import pytest

from spindex.hamiltonian import (HamiltonianSpec, Schedule, compile_spec, fourier_perturbation,
                                 perturbed_rotation, rotation, tabulated)


@pytest.mark.parametrize("spec", [
    tabulated([(2, 0, 1, 1.0), (0, 1, 2, 0.5), (1, 1, 0, 0.3)]),
    perturbed_rotation(0.6, 0.17, 1, 1.018, "bulge"),
    fourier_perturbation(rotation(0.4), 0.05, seed=7),
], ids=["tabulated", "island", "fourier"])
def test_derivatives_match_finite_differences(spec):
    ham = compile_spec(spec)
    rng = np.random.default_rng(0)
    P = rng.standard_normal((5, 3))
    t, h = 0.4, 1e-6
    g, H = ham.grad(t, P), ham.hess(t, P)
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        fd = (ham.value(t, P + e) - ham.value(t, P - e)) / (2 * h)
        assert np.allclose(g[:, i], fd, rtol=1e-6, atol=1e-7)
        fd2 = (ham.grad(t, P + e) - ham.grad(t, P - e)) / (2 * h)
        assert np.allclose(H[:, :, i], fd2, rtol=1e-6, atol=1e-6)


def test_schedule_reparametrizes_unit_interval():
    s = Schedule(0.05)
    assert s.reparam(0.0) == 0.0 and s.reparam(1.0) == pytest.approx(1.0)
    ts = np.linspace(0.0, 1.0, 20001)
    assert np.trapezoid([s.zeta_prime(t) for t in ts], ts) == pytest.approx(1.0, abs=1e-6)
    assert all(0.0 <= b <= 1.0 for b in s.breakpoints())


def test_spec_roundtrip():
    spec = fourier_perturbation(perturbed_rotation(0.6, 0.1, 2, 0.5), 0.02, seed=3)
    again = HamiltonianSpec.from_dict(spec.to_dict())
    P = np.array([[0.3, 0.4, np.sqrt(0.75)]])
    assert np.allclose(compile_spec(again).grad(0.3, P), compile_spec(spec).grad(0.3, P))


def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        HamiltonianSpec("mystery")
