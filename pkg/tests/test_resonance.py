"""Resonance relations and the two-point verdict."""

import math

import pytest

from spindex.orbit_census import CensusReport
from spindex.resonance import (ResonanceConfig, ResonanceError, check_generator_bound, find_resonances,
                               verify_two_point_theorem)

GOLDEN = (math.sqrt(5) - 1) / 2


def test_two_point_pair_has_single_generator():
    rs = find_resonances([2 * GOLDEN, 4 - 2 * GOLDEN])
    assert rs.vectors == ((1, 1),)
    assert rs.rank_estimate == 1
    assert rs.residues[0] == pytest.approx(0.0, abs=1e-12)


def test_irrational_single_index_has_no_relation():
    assert find_resonances([2 * GOLDEN], ResonanceConfig(a_max=20)).vectors == ()


def test_non_primitive_minimal_solution_kept():
    # [DERIVED] 1, 2, 3 times 1 are nonzero mod 4; 4 is the first relation
    assert find_resonances([1.0]).vectors == ((4,),)


def test_rational_pair_relations():
    # [DERIVED] 2/3 and 4/3: (2, -1) and (6, 0) style relations; rank 2 lattice
    rs = find_resonances([2 / 3, 4 / 3])
    assert (2, -1) in rs.vectors
    assert rs.rank_estimate == 2


def test_generator_bound():
    cfg = ResonanceConfig(2, 1)
    assert check_generator_bound((1, 1), cfg).passed
    assert check_generator_bound((0, 1), cfg).passed
    assert not check_generator_bound((2, 1), cfg).passed
    assert not check_generator_bound((1, -1), cfg).passed
    with pytest.raises(ResonanceError, match="rank"):
        check_generator_bound(find_resonances([2 / 3, 4 / 3]), cfg)


def test_config_validation_and_budget():
    with pytest.raises(ValueError):
        ResonanceConfig(N=1, n=1)
    with pytest.raises(ValueError):
        ResonanceConfig(a_max=21)
    with pytest.raises(ResonanceError, match="budget"):
        find_resonances([0.1] * 6, ResonanceConfig(a_max=20))


def test_two_point_verdict(rotation_censuses, island_census):
    census = next(iter(rotation_censuses.values()))
    assert verify_two_point_theorem(census).passed
    info = verify_two_point_theorem(island_census)
    assert info.passed and info.informational
    lonely = CensusReport(census.orbits[:1], 1, False, 1)
    assert not verify_two_point_theorem(lonely).passed
    with pytest.raises(ResonanceError):
        verify_two_point_theorem(CensusReport([], None, True, 1))
