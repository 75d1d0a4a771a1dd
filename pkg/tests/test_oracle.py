"""Unit tests for the brute-force certification evaluators."""

import numpy as np
import pytest

from phiribbon.dist import canonical, make_joint
from phiribbon.errors import BadParameter, GridTooLarge, NotBipartite
from phiribbon.oracle import GridSpec, brute_maximal_correlation, brute_min_objective
from phiribbon.phi import square
from phiribbon.ribbon_mc import mc_def_gap


def test_gridspec_validation():
    with pytest.raises(BadParameter):
        GridSpec(resolution=2)


def test_gridspec_points_include_endpoints_and_midpoint():
    pts = GridSpec(resolution=4).points(-1.0, 1.0)
    assert pts[0] == -1.0 and pts[-1] == 1.0
    assert 0.0 in pts


def test_grid_cap_enforced():
    d = make_joint([4, 4], np.full(16, 1 / 16))
    with pytest.raises(GridTooLarge):
        brute_min_objective(d, square(), [1.0, 1.0], GridSpec(resolution=21))


def test_brute_min_objective_finds_violation_for_copies():
    d = canonical("equal_copies", k=2, base=[0.5, 0.5])
    gap, f = brute_min_objective(d, square(), [0.6, 0.6], GridSpec(resolution=21))
    assert gap == pytest.approx(-0.2, abs=1e-12)
    # the minimizing function certifies the same gap through the definition
    assert mc_def_gap(d, [0.6, 0.6], f) == pytest.approx(gap, abs=1e-12)


def test_brute_min_objective_independent_is_nonnegative():
    d = make_joint([2, 2], np.outer([0.4, 0.6], [0.3, 0.7]).ravel())
    gap, _ = brute_min_objective(d, square(), [1.0, 1.0], GridSpec(resolution=21))
    assert gap >= -1e-12


def test_brute_min_objective_boundary_point_near_zero():
    d = canonical("dsbs", lam=0.5)
    gap, _ = brute_min_objective(
        d, square(), [2 / 3, 2 / 3], GridSpec(resolution=41)
    )
    assert abs(gap) <= 1e-3


def test_brute_min_objective_deterministic():
    d = canonical("dsbs", lam=0.5)
    a = brute_min_objective(d, square(), [0.9, 0.9], GridSpec(resolution=9))
    b = brute_min_objective(d, square(), [0.9, 0.9], GridSpec(resolution=9))
    assert a[0] == b[0]
    assert np.array_equal(a[1].values, b[1].values)


def test_brute_maximal_correlation_dsbs():
    d = canonical("dsbs", lam=0.7)
    got = brute_maximal_correlation(d, GridSpec(resolution=41))
    assert got == pytest.approx(0.7, abs=2e-2)


def test_brute_maximal_correlation_independent():
    d = make_joint([2, 2], np.outer([0.4, 0.6], [0.3, 0.7]).ravel())
    assert brute_maximal_correlation(d, GridSpec(resolution=21)) <= 2e-2


def test_brute_maximal_correlation_copy_is_one():
    d = canonical("dsbs", lam=1.0)
    assert brute_maximal_correlation(d, GridSpec(resolution=5)) == pytest.approx(
        1.0, abs=1e-12
    )


def test_brute_maximal_correlation_needs_bipartite():
    with pytest.raises(NotBipartite):
        brute_maximal_correlation(canonical("xor_triple"), GridSpec(resolution=5))
