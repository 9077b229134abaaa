"""Shared expensive fixtures: censuses and the glued island torus are built once."""

import math

import pytest

from spindex.hamiltonian import perturbed_rotation, rotation

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
SQRT2M1 = math.sqrt(2.0) - 1.0


def island_spec():
    return perturbed_rotation(GOLDEN, 0.17, 1, 1.018, "bulge")


@pytest.fixture(scope="session")
def rotation_censuses():
    from spindex.orbit_census import find_fixed_points
    return {a: find_fixed_points(rotation(a)) for a in (GOLDEN, SQRT2M1)}


@pytest.fixture(scope="session")
def island_census():
    from spindex.orbit_census import find_fixed_points
    return find_fixed_points(island_spec())


@pytest.fixture(scope="session")
def island_torus():
    from spindex.blowup_glue import blow_up, glue, torus_census
    cyl = blow_up(island_spec())
    iso = glue(cyl, 0.5)
    return cyl, iso, torus_census(iso)
