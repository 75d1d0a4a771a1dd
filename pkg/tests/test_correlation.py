"""Unit tests for maximal correlation and the SDPI constant estimate."""

import numpy as np
import pytest

from phiribbon.correlation import (
    SearchOpts,
    eta_lower_bound_rho2,
    eta_phi,
    maximal_correlation,
    mc_witness,
)
from phiribbon.dist import JointFunction, canonical, cond_expectation, make_joint
from phiribbon.errors import BadParameter, NotBipartite
from phiribbon.phi import binent, square, xlogx


def test_search_opts_validation():
    with pytest.raises(BadParameter):
        SearchOpts(restarts=0)
    with pytest.raises(BadParameter):
        SearchOpts(grad_tol=0.0)


def test_maximal_correlation_needs_bipartite():
    with pytest.raises(NotBipartite):
        maximal_correlation(canonical("xor_triple"))


def test_maximal_correlation_dsbs():
    for lam in np.linspace(0.1, 0.9, 9):
        d = canonical("dsbs", lam=lam)
        assert maximal_correlation(d) == pytest.approx(lam, abs=1e-12)


def test_maximal_correlation_independent_is_zero():
    d = make_joint([2, 3], np.outer([0.4, 0.6], [0.2, 0.3, 0.5]).ravel())
    assert maximal_correlation(d) == pytest.approx(0.0, abs=1e-12)


def test_maximal_correlation_deterministic_copy_is_one():
    d = canonical("dsbs", lam=1.0)
    assert maximal_correlation(d) == pytest.approx(1.0, abs=1e-12)


def test_maximal_correlation_degenerate_support():
    # one side is effectively constant: rho = 0
    d = make_joint([2, 2], [0.5, 0.5, 0.0, 0.0])
    assert maximal_correlation(d) == 0.0


def test_mc_witness_achieves_rho():
    rng = np.random.default_rng(10)
    for _ in range(5):
        d = make_joint([3, 3], rng.dirichlet(np.ones(9)))
        f, g, rho = mc_witness(d)
        px = d.marginal_vector(0)
        py = d.marginal_vector(1)
        # unit variance, zero mean, and correlation equal to rho
        assert np.dot(px, f) == pytest.approx(0.0, abs=1e-9)
        assert np.dot(px, f * f) == pytest.approx(1.0, abs=1e-9)
        assert np.dot(py, g * g) == pytest.approx(1.0, abs=1e-9)
        corr = float(f @ d.probs @ g)
        assert corr == pytest.approx(rho, abs=1e-9)
        assert rho == pytest.approx(maximal_correlation(d), abs=1e-12)


def test_mc_witness_conditional_expectation_consistency():
    # E[g(Y)|X] should be rho * f(X) at the optimum
    d = canonical("dsbs", lam=0.6)
    f, g, rho = mc_witness(d)
    e = cond_expectation(d, JointFunction(np.broadcast_to(g, (2, 2)).copy()), 0)
    assert np.allclose(e.values, rho * f, atol=1e-9)


def test_eta_phi_square_equals_rho_squared():
    for lam in (0.3, 0.7):
        d = canonical("dsbs", lam=lam)
        est = eta_phi(d, square(), opts=SearchOpts(restarts=8, seed=1))
        assert est.value == pytest.approx(lam * lam, abs=1e-6)
        assert est.lower_bound_rho2 == pytest.approx(lam * lam, abs=1e-12)


def test_eta_phi_value_is_achieved_by_witness():
    from phiribbon.phi import _entropy_of_weighted

    d = canonical("dsbs", lam=0.5)
    phi = binent()
    est = eta_phi(d, phi, opts=SearchOpts(restarts=8, seed=2))
    px = d.marginal_vector(0)
    py = d.marginal_vector(1)
    fx = est.witness.values
    gy = (d.probs.T @ fx) / py
    num = _entropy_of_weighted(phi, py, gy)
    den = _entropy_of_weighted(phi, px, fx)
    assert den > 0
    assert num / den == pytest.approx(est.value, rel=1e-9)


def test_eta_phi_never_exceeds_one_for_matching_psi():
    d = canonical("dsbs", lam=0.9)
    est = eta_phi(d, xlogx(0.01, 4.0), opts=SearchOpts(restarts=8, seed=3))
    assert 0.0 <= est.value <= 1.0


def test_eta_phi_at_least_rho_squared():
    # the SDPI constant is bounded below by rho^2 for every admissible phi
    rng = np.random.default_rng(11)
    for _ in range(3):
        d = make_joint([2, 2], rng.dirichlet(np.ones(4)))
        est = eta_phi(d, binent(), opts=SearchOpts(restarts=8, seed=4))
        assert est.value >= eta_lower_bound_rho2(d) - 1e-6


def test_eta_phi_deterministic_given_seed():
    d = canonical("dsbs", lam=0.5)
    a = eta_phi(d, binent(), opts=SearchOpts(restarts=6, seed=5))
    b = eta_phi(d, binent(), opts=SearchOpts(restarts=6, seed=5))
    assert a.value == b.value
    assert np.array_equal(a.witness.values, b.witness.values)
