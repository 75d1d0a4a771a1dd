"""Search-based membership for the general entropy-inequality region.

The defining inequality ``H_phi(f) >= sum_i lambda_i H_phi(E[f|X_i])`` has
no closed form outside the quadratic case, so membership is probed by
minimizing the gap over function values with multi-start projected descent.
Semantics are one-sided: a negative gap re-evaluated from scratch is a
proof of non-membership; failure to find one is only evidence.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .correlation import SearchOpts
from .dist import (
    Channel,
    JointDist,
    JointFunction,
    cond_expectation,
    make_joint,
)
from .errors import BadCoordinate, BadShape, PhiNotClassF
from .phi import (
    PhiSpec,
    cond_phi_entropy,
    phi_entropy,
    phi_mutual_information,
)
from .ribbon_mc import _check_lambda, gram_matrix, mc_membership

__all__ = [
    "SearchOpts",
    "RibbonVerdict",
    "phi_ribbon_membership",
    "normalized_phi_ribbon_membership",
    "definition_gap",
    "i_phi_channel_test",
    "eta_from_ribbon",
    "ribbon_boundary_trace",
    "alpha_equivalent_membership",
    "lift_witness_to_product",
    "lift_witness_through_channels",
]


@dataclass(frozen=True)
class RibbonVerdict:
    verdict: str  # "holds_up_to_search" | "violated"
    gap: float
    witness: JointFunction | None = None

    @property
    def violated(self) -> bool:
        return self.verdict == "violated"


def definition_gap(d: JointDist, phi: PhiSpec, lam, f: JointFunction) -> float:
    """Re-evaluate the defining inequality at f through the entropy module.

    Used to certify witnesses independently of the flat evaluator below.
    """
    lam = _check_lambda(lam, d.k)
    g = phi_entropy(d, phi, f).value
    for i in range(d.k):
        if lam[i] == 0:
            continue
        total = phi_entropy(d, phi, f).value
        cond = cond_phi_entropy(d, phi, f, [i]).value
        g -= lam[i] * (total - cond)  # chain rule: H(E[f|X_i]) = H(f) - H(f|X_i)
    return g


class _FlatProblem:
    """Vectorized gap evaluation over function values on the joint support."""

    def __init__(self, d: JointDist, phi: PhiSpec, lam):
        self.d = d
        self.phi = phi
        self.lam = _check_lambda(lam, d.k)
        self.sup = np.flatnonzero(d.support_mask.ravel())
        self.p = d.probs.ravel()[self.sup]
        self.n = len(self.sup)
        symbols = np.unravel_index(self.sup, d.alphabet_sizes)
        self.idx = []  # per coordinate: support-symbol index of each atom
        self.marg = []
        for i in range(d.k):
            pi = d.marginal_vector(i)
            sup_i = np.flatnonzero(pi > 0)
            remap = np.full(d.alphabet_sizes[i], -1)
            remap[sup_i] = np.arange(len(sup_i))
            self.idx.append(remap[symbols[i]])
            self.marg.append(pi[sup_i])

    def cond_means(self, f: np.ndarray, i: int) -> np.ndarray:
        num = np.bincount(self.idx[i], weights=self.p * f, minlength=len(self.marg[i]))
        return num / self.marg[i]

    def gap(self, f: np.ndarray) -> float:
        phi = self.phi
        m = float(self.p @ f)
        g = float(self.p @ phi.safe_eval(f)) - float(phi.safe_eval(m))
        for i in range(self.d.k):
            if self.lam[i] == 0:
                continue
            gi = self.cond_means(f, i)
            hi = float(self.marg[i] @ phi.safe_eval(gi)) - float(phi.safe_eval(m))
            g -= self.lam[i] * hi
        return g

    def gap_grad(self, f: np.ndarray) -> tuple[float, np.ndarray]:
        phi = self.phi
        m = float(self.p @ f)
        d1m = float(phi.deriv(1, m))
        g = float(self.p @ phi.safe_eval(f)) - float(phi.safe_eval(m))
        grad = self.p * (phi.deriv(1, f) - d1m)
        for i in range(self.d.k):
            if self.lam[i] == 0:
                continue
            gi = self.cond_means(f, i)
            hi = float(self.marg[i] @ phi.safe_eval(gi)) - float(phi.safe_eval(m))
            g -= self.lam[i] * hi
            grad -= self.lam[i] * self.p * (phi.deriv(1, gi)[self.idx[i]] - d1m)
        return g, grad

    def to_joint(self, f: np.ndarray) -> JointFunction:
        vals = np.zeros(math.prod(self.d.alphabet_sizes))
        vals[self.sup] = f
        return JointFunction(vals.reshape(self.d.alphabet_sizes))


def _mc_direction(d: JointDist, lam) -> np.ndarray | None:
    """Quadratic-case violating direction, as values on the joint support.

    Near a constant, the gap behaves like the quadratic-case gap scaled by
    ``Phi''(c)/2``, so the eigen-witness of the quadratic test is the right
    small-amplitude seed for every Phi.
    """
    res = mc_membership(d, np.asarray(lam, float).clip(0, 1))
    if res.verdict or res.witness is None:
        return None
    u = sum(f.lift(d).values for f in res.witness)
    sup = np.flatnonzero(d.support_mask.ravel())
    return u.ravel()[sup]


def _seeds(prob: _FlatProblem, d: JointDist, lam, rng, restarts: int):
    """Start points: quadratic-case witness sweeps, box corners, random."""
    a, b = prob.phi.domain
    lo = a + 1e-9 * (b - a)
    hi = b - 1e-9 * (b - a)
    c = 0.5 * (a + b)
    out = []
    u = _mc_direction(d, lam)
    if u is not None and np.max(np.abs(u)) > 0:
        u = u / np.max(np.abs(u))
        for eps in (0.45, 0.2, 0.05, 0.01, 1e-3):
            out.append(np.clip(c + eps * (b - a) * u, lo, hi))
    if prob.n <= 10:
        for bits in range(2**prob.n):
            s = np.array([1.0 if bits >> j & 1 else -1.0 for j in range(prob.n)])
            out.append(np.clip(c + 0.5 * (b - a) * s, lo, hi))
            out.append(np.clip(c + 0.2 * (b - a) * s, lo, hi))
    while len(out) < restarts:
        out.append(rng.uniform(lo, hi, size=prob.n))
    return out, lo, hi


def _descend(prob, f, lo, hi, opts: SearchOpts, project=None):
    if project is not None:
        f = project(f)
    val, grad = prob.gap_grad(f)
    step = opts.step_init * (hi - lo)
    for _ in range(opts.max_iters):
        moved = False
        while step > 1e-14 * (hi - lo):
            f_new = np.clip(f - step * grad, lo, hi)
            if project is not None:
                f_new = project(f_new)
            v_new = prob.gap(f_new)
            if v_new < val - 1e-18:
                f = f_new
                val, grad = prob.gap_grad(f)
                moved = True
                step *= 1.5
                break
            step *= 0.5
        if not moved:
            break
        proj_grad = np.where((f <= lo) & (grad > 0), 0.0, grad)
        proj_grad = np.where((f >= hi) & (proj_grad < 0), 0.0, proj_grad)
        if np.linalg.norm(proj_grad) < opts.grad_tol:
            break
    return val, f


def _search(d, phi, lam, opts, project=None) -> RibbonVerdict:
    if phi.is_class_F is None:
        from .phi import check_class_F

        check_class_F(phi)
    if phi.is_class_F is False:
        warnings.warn(
            f"{phi.name} failed the class conditions; tensorization "
            "guarantees do not apply",
            PhiNotClassF,
        )
    prob = _FlatProblem(d, phi, lam)
    rng = np.random.default_rng(opts.seed)
    seeds, lo, hi = _seeds(prob, d, lam, rng, opts.restarts)
    if project is not None:
        seeds = [project(f) for f in seeds]
    # rank candidate starts by their raw gap; descend from the best ones
    init_vals = np.array([prob.gap(f) for f in seeds])
    order = np.argsort(init_vals)
    starts = [seeds[j] for j in order[: opts.restarts]]
    best_val, best_f = np.inf, None
    for f0 in starts:
        val, f = _descend(prob, f0, lo, hi, opts, project)
        if val < best_val:
            best_val, best_f = val, f
        if best_val < -10 * opts.violation_tol:
            break  # a certified violation needs no better witness
    if best_f is not None and best_val < -opts.violation_tol:
        witness = prob.to_joint(best_f)
        certified = definition_gap(d, phi, lam, witness)
        if certified <= -opts.violation_tol:
            return RibbonVerdict("violated", float(certified), witness)
    return RibbonVerdict("holds_up_to_search", float(best_val))


def phi_ribbon_membership(
    d: JointDist, phi: PhiSpec, lam, opts: SearchOpts | None = None
) -> RibbonVerdict:
    """Probe ``H_phi(f) >= sum lambda_i H_phi(E[f|X_i])`` over box-valued f."""
    opts = opts or SearchOpts(restarts=64)
    return _search(d, phi, lam, opts)


def normalized_phi_ribbon_membership(
    d: JointDist, phi: PhiSpec, lam, opts: SearchOpts | None = None
) -> RibbonVerdict:
    """Same search restricted to f >= 0 with E[f] = 1 (density-like f)."""
    opts = opts or SearchOpts(restarts=64)
    prob = _FlatProblem(d, phi, lam)
    a, b = phi.domain
    top = b - 1e-9 * (b - a)

    floor = 1e-12  # keep Phi' finite for the descent; 0 itself adds nothing

    def project(v: np.ndarray) -> np.ndarray:
        # shift-and-clip projection onto {f in [floor, top], E[f] = 1}
        lo_mu, hi_mu = np.min(v) - top, np.max(v)
        for _ in range(100):
            mu = 0.5 * (lo_mu + hi_mu)
            f = np.clip(v - mu, floor, top)
            s = float(prob.p @ f)
            if s > 1.0:
                lo_mu = mu
            else:
                hi_mu = mu
        return np.clip(v - 0.5 * (lo_mu + hi_mu), floor, top)

    if not phi.allow_zero and phi.domain[0] > 1e-12:
        raise BadShape(
            f"{phi.name} does not admit non-negative functions reaching 0"
        )
    return _search(d, phi, lam, opts, project=project)


def _joint_with_u(d: JointDist, channel: Channel) -> JointDist:
    """Joint law of (X flattened, U) for a channel on the whole outcome."""
    W = channel.matrix
    flat = d.probs.ravel()
    if W.shape[0] != flat.size:
        raise BadShape(
            f"channel expects {W.shape[0]} input symbols, joint has {flat.size}"
        )
    q = flat[:, None] * W
    return make_joint([flat.size, W.shape[1]], q.ravel())


def i_phi_channel_test(
    d: JointDist, phi: PhiSpec, lam, channel: Channel
) -> float:
    """Gap ``I_phi(U; X_all) - sum_i lambda_i I_phi(U; X_i)``.

    ``channel`` maps the flattened joint outcome to U.  A negative gap
    certifies that lambda is outside the mutual-information region.
    """
    lam = _check_lambda(lam, d.k)
    big = _joint_with_u(d, channel)
    gap = phi_mutual_information(big, phi)
    nu = channel.matrix.shape[1]
    q = big.probs.reshape(*d.alphabet_sizes, nu)
    for i in range(d.k):
        if lam[i] == 0:
            continue
        axes = tuple(a for a in range(d.k) if a != i)
        qi = q.sum(axis=axes)
        gap -= lam[i] * phi_mutual_information(
            make_joint([d.alphabet_sizes[i], nu], qi.ravel()), phi
        )
    return gap


def eta_from_ribbon(
    d: JointDist, phi: PhiSpec, opts: SearchOpts | None = None
) -> float:
    """Recover the SDPI constant as ``inf (1 - l1)/l2`` over the region.

    Along the ray ``(l1, l2) = (1 - t mu, t)`` the objective is constantly
    ``mu``, so the infimum is the smallest mu whose ray meets the region;
    found by bisection with a short scan over t per mu.
    """
    if d.k != 2:
        raise BadShape("eta_from_ribbon needs a bipartite distribution")
    opts = opts or SearchOpts(restarts=12, max_iters=200)

    def feasible(mu: float) -> bool:
        for t in (0.25, 0.1, 0.02, 0.005, 0.001):
            lam = (1.0 - t * mu, t)
            if not (0 <= lam[0] <= 1):
                continue
            if not phi_ribbon_membership(d, phi, lam, opts).violated:
                return True
        return False

    lo, hi = 0.0, 1.0
    if feasible(0.0):
        return 0.0
    for _ in range(14):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi


def ribbon_boundary_trace(
    d: JointDist, phi: PhiSpec, directions: int = 32, opts: SearchOpts | None = None
) -> list[tuple[np.ndarray, str]]:
    """Bisect membership along rays from the origin of the lambda cube.

    The region is down-closed toward the origin (the inequality is linear
    in lambda with non-negative coefficients), so ray bisection is sound.
    Returns one (lambda, verdict-at-full-ray) entry per direction.
    """
    if d.k not in (2, 3):
        raise BadCoordinate("tracing supports k = 2 or 3")
    opts = opts or SearchOpts(restarts=12, max_iters=200)
    dirs = []
    if d.k == 2:
        for j in range(directions):
            theta = (j + 0.5) / directions * (np.pi / 2)
            v = np.array([np.cos(theta), np.sin(theta)])
            dirs.append(v / np.max(v))
    else:
        m = max(2, int(np.ceil(np.sqrt(directions))))
        for aidx in range(m):
            for bidx in range(m - aidx):
                w = np.array([aidx + 0.5, bidx + 0.5, m - aidx - bidx - 0.5])
                v = w / np.sum(w)
                dirs.append(v / np.max(v))
    out = []
    for v in dirs:
        if not phi_ribbon_membership(d, phi, v, opts).violated:
            out.append((v, "holds_up_to_search"))
            continue
        lo, hi = 0.0, 1.0
        while hi - lo > 1e-3:
            mid = 0.5 * (lo + hi)
            if phi_ribbon_membership(d, phi, mid * v, opts).violated:
                hi = mid
            else:
                lo = mid
        out.append((lo * v, "violated"))
    return out


def alpha_equivalent_membership(
    d: JointDist, alpha: float, lam, opts: SearchOpts | None = None
) -> tuple[RibbonVerdict, RibbonVerdict]:
    """Run the ``t^alpha`` and symmetrized-``alpha`` searches and reconcile.

    The two regions coincide: ``Phi_alpha(t)`` is an affine combination of
    ``phi_alpha((1+t)/2)`` and ``phi_alpha((1-t)/2)``, which transports any
    symmetric-side witness to the power side exactly; in the reverse
    direction ``f -> eps f - 1`` shrinks the violation like ``eps^alpha``,
    so transported gaps are certified at whatever (tiny) magnitude they
    reach rather than at the absolute search tolerance.
    """
    from .phi import power_alpha, sym_alpha

    opts = opts or SearchOpts(restarts=16)
    pw, sm = power_alpha(alpha), sym_alpha(alpha)
    rp = phi_ribbon_membership(d, pw, lam, opts)
    rs = phi_ribbon_membership(d, sm, lam, opts)
    if rs.violated and not rp.violated:
        f = rs.witness.values
        best = None
        for cand in ((1.0 + f) / 2.0, (1.0 - f) / 2.0):
            gap = definition_gap(d, pw, lam, JointFunction(cand))
            if gap < -1e-15 and (best is None or gap < best[0]):
                best = (gap, cand)
        if best is not None:
            rp = RibbonVerdict("violated", best[0], JointFunction(best[1]))
    elif rp.violated and not rs.violated:
        g = np.clip(rp.witness.values, 0.0, 1.0)
        best = None
        for eps in (0.5, 0.1, 1e-2, 1e-3, 1e-4):
            for cand in (eps * g - 1.0, 1.0 - eps * g):
                gap = definition_gap(d, sm, lam, JointFunction(cand))
                if gap < -1e-13 and (best is None or gap < best[0]):
                    best = (gap, cand)
        if best is not None:
            rs = RibbonVerdict("violated", best[0], JointFunction(best[1]))
    return rp, rs


def lift_witness_to_product(
    f: JointFunction, dx: JointDist, dy: JointDist
) -> JointFunction:
    """View a witness on dx as a function on the coordinate-wise product.

    The lifted function ignores the second factor, so its gap on the
    product equals the original gap exactly.
    """
    k = dx.k
    shape = [s for pair in zip(dx.alphabet_sizes, dy.alphabet_sizes) for s in pair]
    vals = np.broadcast_to(
        f.values.reshape([s if i % 2 == 0 else 1 for i, s in enumerate(shape)]),
        shape,
    )
    merged = [a * b for a, b in zip(dx.alphabet_sizes, dy.alphabet_sizes)]
    return JointFunction(vals.reshape(merged).copy())


def lift_witness_through_channels(
    d: JointDist, chans: list[Channel], f_out: JointFunction
) -> JointFunction:
    """Pull a witness back through per-coordinate channels via E[f(Y)|x]."""
    vals = np.asarray(f_out.values, dtype=float)
    for ch in sorted(chans, key=lambda c: c.coord):
        vals = np.moveaxis(
            np.tensordot(vals, ch.matrix, axes=([ch.coord], [1])), -1, ch.coord
        )
    return JointFunction(vals)
