"""Unit tests for the convex-function catalog and entropies."""

import math

import numpy as np
import pytest

from phiribbon.dist import JointFunction, canonical, cond_expectation, make_joint
from phiribbon.errors import BadParameter, DomainViolation, NotIndependent
from phiribbon.phi import (
    PhiSpec,
    binent,
    check_class_F,
    cond_phi_entropy,
    marginal_phi_entropy,
    parse_phi,
    phi_entropy,
    phi_mutual_information,
    power_alpha,
    square,
    subadditivity_gap,
    sym_alpha,
    xlogx,
)


# ---------------------------------------------------------------------------
# catalog


def test_parse_phi_names():
    assert parse_phi("square").name == "square"
    assert parse_phi("binent").name == "binent"
    assert parse_phi("power:1.5").name == "power:1.5"
    assert parse_phi("sym:2.0").name == "sym:2.0"
    assert parse_phi("xlogx").domain[1] == 64.0
    assert parse_phi("xlogx:0.5,8").domain == (0.5, 8.0)
    with pytest.raises(BadParameter):
        parse_phi("cube")


def test_power_alpha_range_check():
    with pytest.raises(BadParameter):
        power_alpha(1.0)
    with pytest.raises(BadParameter):
        power_alpha(2.5)


def test_analytic_derivatives_match_finite_differences():
    for phi in (square(), power_alpha(1.5), xlogx(0.1, 8.0), binent(), sym_alpha(1.7)):
        a, b = phi.domain
        t = np.linspace(a + 0.1 * (b - a), b - 0.1 * (b - a), 17)
        for order in (1, 2):
            got = phi.deriv(order, t)
            fd = phi._fd(order, t)
            assert np.allclose(got, fd, rtol=1e-6, atol=1e-6), (phi.name, order)


def test_binent_is_in_bits():
    phi = binent()
    # Phi_1(1) = 1 - h(1) = 1 bit
    assert phi.eval(np.array([1.0]))[0] == pytest.approx(1.0)
    assert phi.deriv(2, 0.0) == pytest.approx(1.0 / math.log(2))


def test_sym_alpha_endpoints():
    phi = sym_alpha(1.5)
    assert phi.eval(np.array([0.0]))[0] == pytest.approx(0.0)
    assert phi.eval(np.array([1.0]))[0] == pytest.approx(1.0)
    assert phi.eval(np.array([-1.0]))[0] == pytest.approx(1.0)


def test_xlogx_allow_zero_convention():
    phi = xlogx(0.0, 4.0)
    assert phi.allow_zero
    assert phi.safe_eval(np.array([0.0]))[0] == 0.0
    phi.check_in_domain(np.array([0.0, 1.0, 4.0]))
    with pytest.raises(DomainViolation):
        phi.check_in_domain(np.array([5.0]))


def test_check_class_F_verifies_builtins():
    for phi in (square(), xlogx(0.01, 8.0), binent(), power_alpha(1.5), sym_alpha(1.5)):
        report = check_class_F(phi)
        assert report["verified"], (phi.name, report)
        assert phi.is_class_F is True


def test_check_class_F_refutes_quartic():
    # t^4 on [1,2]: Phi'''' Phi'' = 288 t^2 < 1152 t^2 = 2 Phi'''^2
    phi = PhiSpec("quartic", (1.0, 2.0), eval=lambda t: np.asarray(t, float) ** 4)
    report = check_class_F(phi)
    assert not report["verified"]
    assert report["convex"]
    assert not report["condition_vi"]
    assert phi.is_class_F is False


# ---------------------------------------------------------------------------
# entropies


def test_phi_entropy_constant_is_zero():
    d = canonical("dsbs", lam=0.5)
    f = JointFunction(0.3 * np.ones((2, 2)))
    assert phi_entropy(d, square(), f).value == 0.0


def test_phi_entropy_square_is_variance():
    rng = np.random.default_rng(3)
    d = make_joint([2, 3], rng.dirichlet(np.ones(6)))
    f = JointFunction(rng.uniform(-1, 1, size=(2, 3)))
    assert phi_entropy(d, square(), f).value == pytest.approx(d.variance(f), abs=1e-12)


def test_phi_entropy_xlogx_indicator_value():
    # f = 2 * 1{x = y} on DSBS(0.5): takes value 2 w.p. 0.75 and 0 w.p. 0.25,
    # so E f = 1.5 and H = 1.5 log 2 - 1.5 log 1.5
    d = canonical("dsbs", lam=0.5)
    f = JointFunction(2.0 * np.eye(2))
    want = 1.5 * math.log(2.0) - 1.5 * math.log(1.5)
    assert phi_entropy(d, xlogx(0.0, 4.0), f).value == pytest.approx(want, abs=1e-12)


def test_phi_entropy_domain_violation():
    d = canonical("dsbs", lam=0.5)
    with pytest.raises(DomainViolation):
        phi_entropy(d, square(), JointFunction(2.0 * np.ones((2, 2))))


def test_phi_entropy_small_amplitude_no_cancellation():
    # direct evaluation loses ~10 digits here; the quadrature path must not
    d = canonical("dsbs", lam=0.5)
    eps = 1e-6
    f = JointFunction(1.0 + eps * np.array([[1.0, -1.0], [-1.0, 1.0]]))
    phi = xlogx(0.01, 8.0)
    # H ~ Phi''(1)/2 * eps^2 * Var = eps^2 / 2 (unit variance of the sign)
    got = phi_entropy(d, phi, f).value
    assert got == pytest.approx(0.5 * eps * eps, rel=1e-6)


def test_marginal_phi_entropy_matches_lift():
    rng = np.random.default_rng(4)
    d = make_joint([3, 2], rng.dirichlet(np.ones(6)))
    from phiribbon.dist import MarginalFunction

    g = MarginalFunction(0, rng.uniform(-0.9, 0.9, size=3))
    direct = marginal_phi_entropy(d, binent(), g).value
    lifted = phi_entropy(d, binent(), g.lift(d)).value
    assert direct == pytest.approx(lifted, abs=1e-12)


def test_cond_phi_entropy_all_coords_is_zero():
    rng = np.random.default_rng(5)
    d = make_joint([2, 2], rng.dirichlet(np.ones(4)))
    f = JointFunction(rng.uniform(-1, 1, size=(2, 2)))
    assert cond_phi_entropy(d, square(), f, [0, 1]).value == pytest.approx(0.0, abs=1e-14)


def test_cond_phi_entropy_empty_coords_is_total():
    rng = np.random.default_rng(6)
    d = make_joint([2, 2], rng.dirichlet(np.ones(4)))
    f = JointFunction(rng.uniform(-1, 1, size=(2, 2)))
    assert cond_phi_entropy(d, square(), f, []).value == pytest.approx(
        phi_entropy(d, square(), f).value
    )


def test_cond_phi_entropy_additive_case():
    # independent pair, f = g(X) + h(Y): conditionally on X the variance is Var[h]
    rng = np.random.default_rng(7)
    px, py = [0.4, 0.6], [0.3, 0.7]
    d = make_joint([2, 2], np.outer(px, py).ravel())
    g = np.array([0.2, -0.1])
    h = np.array([-0.3, 0.25])
    f = JointFunction(g[:, None] + h[None, :])
    var_h = float(np.dot(py, (h - np.dot(py, h)) ** 2))
    assert cond_phi_entropy(d, square(), f, [0]).value == pytest.approx(var_h, abs=1e-12)


def test_chain_rule_identity():
    rng = np.random.default_rng(8)
    d = make_joint([2, 3, 2], rng.dirichlet(np.ones(12)))
    f = JointFunction(rng.uniform(0.1, 0.9, size=(2, 3, 2)))
    for phi in (square(), power_alpha(1.5), xlogx(0.01, 2.0)):
        for coords in ([0], [1], [0, 2]):
            total = phi_entropy(d, phi, f).value
            cond = cond_phi_entropy(d, phi, f, coords).value
            # entropy of the conditional mean, evaluated on the coarsened law
            from phiribbon.dist import marginal

            dm = marginal(d, coords)
            probs = np.transpose(
                d.probs, coords + [a for a in range(3) if a not in coords]
            ).reshape(dm.probs.size, -1)
            vals = np.transpose(
                f.values, coords + [a for a in range(3) if a not in coords]
            ).reshape(probs.shape)
            means = np.divide(
                (probs * vals).sum(1),
                probs.sum(1),
                out=np.full(probs.shape[0], phi.domain[0] + 1e-9),
                where=probs.sum(1) > 0,
            )
            outer = phi_entropy(dm, phi, JointFunction(means.reshape(dm.probs.shape)))
            assert total == pytest.approx(cond + outer.value, abs=1e-10)


def test_phi_mutual_information_independent_is_zero():
    ind = make_joint([2, 3], np.outer([0.3, 0.7], [0.2, 0.5, 0.3]).ravel())
    assert phi_mutual_information(ind, xlogx(0.0, 64.0)) == pytest.approx(0.0, abs=1e-12)


def test_phi_mutual_information_xlogx_dsbs():
    d = canonical("dsbs", lam=0.5)
    want = 0.75 * math.log(1.5) + 0.25 * math.log(0.5)
    assert phi_mutual_information(d, xlogx(0.0, 64.0)) == pytest.approx(want, abs=1e-12)


def test_phi_mutual_information_square_dsbs_is_lambda_sq():
    for lam in (0.2, 0.5, 0.8):
        d = canonical("dsbs", lam=lam)
        assert phi_mutual_information(d, square()) == pytest.approx(lam * lam, abs=1e-12)


def test_phi_mutual_information_zero_ratio_convention():
    # perfectly correlated bits produce ratio 0 off the diagonal
    d = canonical("dsbs", lam=1.0)
    got = phi_mutual_information(d, xlogx(0.0, 64.0))
    assert got == pytest.approx(math.log(2.0), abs=1e-10)


def test_phi_mutual_information_outside_defined_range():
    d = canonical("dsbs", lam=1.0)
    with pytest.raises(DomainViolation):
        phi_mutual_information(d, binent())  # ratio 2 > 1


def test_subadditivity_gap_single_coordinate_function():
    px, py = [0.4, 0.6], [0.3, 0.7]
    d = make_joint([2, 2], np.outer(px, py).ravel())
    f = JointFunction(np.array([[0.2, 0.2], [0.8, 0.8]]))  # depends on X1 only
    assert subadditivity_gap(d, square(), f) == pytest.approx(0.0, abs=1e-12)


def test_subadditivity_gap_nonnegative_random():
    rng = np.random.default_rng(9)
    px, py = rng.dirichlet(np.ones(2)), rng.dirichlet(np.ones(2))
    d = make_joint([2, 2], np.outer(px, py).ravel())
    for _ in range(20):
        f = JointFunction(rng.uniform(0.1, 1.9, size=(2, 2)))
        assert subadditivity_gap(d, xlogx(0.01, 4.0), f) >= -1e-10


def test_subadditivity_gap_requires_independence():
    d = canonical("dsbs", lam=0.5)
    with pytest.raises(NotIndependent):
        subadditivity_gap(d, square(), JointFunction(np.zeros((2, 2))))
