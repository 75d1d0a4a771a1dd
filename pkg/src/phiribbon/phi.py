"""Convex-function catalog and the entropies built from them.

``H_phi(f) = E[Phi(f)] - Phi(E f)`` generalizes variance (``Phi(t)=t^2``)
and carries the same chain-rule structure.  The built-in functions all live
on compact intervals; derivative access is analytic where we have closed
forms and 5-point finite differences otherwise.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dist import JointDist, JointFunction, MarginalFunction, cond_expectation, marginal
from .errors import BadParameter, DomainViolation, NotIndependent

_CLAMP = 1e-12


@dataclass
class PhiSpec:
    """A convex function on a compact interval with derivatives up to order 4.

    ``is_class_F`` is a tri-state: None until :func:`check_class_F` runs,
    then True/False.  ``allow_zero`` admits the single extra point 0 with
    the convention ``Phi(0) = lim_{t->0+} Phi(t)`` (used by ``xlogx`` where
    ``0 log 0 := 0``).
    """

    name: str
    domain: tuple[float, float]
    eval: Callable[[np.ndarray], np.ndarray]
    d1: Callable[[np.ndarray], np.ndarray] | None = None
    d2: Callable[[np.ndarray], np.ndarray] | None = None
    d3: Callable[[np.ndarray], np.ndarray] | None = None
    d4: Callable[[np.ndarray], np.ndarray] | None = None
    allow_zero: bool = False
    # where the defining formula makes sense at all (ratio arguments of the
    # mutual information may leave the compact working interval)
    nat_domain: tuple[float, float] | None = None
    is_class_F: bool | None = field(default=None, compare=False)

    def __post_init__(self):
        a, b = self.domain
        if not (math.isfinite(a) and math.isfinite(b) and b > a):
            raise BadParameter("domain must be a non-degenerate compact interval")

    # -- derivative access -------------------------------------------------

    def _h(self) -> float:
        a, b = self.domain
        return (b - a) * 1e-4

    def _fd(self, order: int, t: np.ndarray) -> np.ndarray:
        """5-point centered stencil, shifted one-sided near the edges."""
        a, b = self.domain
        h = self._h()
        t = np.asarray(t, dtype=float)
        # shift evaluation points so the whole stencil stays in-domain
        center = np.clip(t, a + 2 * h, b - 2 * h)
        samples = np.stack([self.eval(center + i * h) for i in range(-2, 3)])
        if order == 1:
            w = np.array([1, -8, 0, 8, -1]) / (12 * h)
        elif order == 2:
            w = np.array([-1, 16, -30, 16, -1]) / (12 * h * h)
        elif order == 3:
            w = np.array([-1, 2, 0, -2, 1]) / (2 * h**3)
        elif order == 4:
            w = np.array([1, -4, 6, -4, 1]) / h**4
        else:  # pragma: no cover
            raise BadParameter(f"derivative order {order} unsupported")
        return np.tensordot(w, samples, axes=(0, 0))

    def deriv(self, order: int, t) -> np.ndarray:
        fn = (self.d1, self.d2, self.d3, self.d4)[order - 1]
        t = np.asarray(t, dtype=float)
        if fn is not None:
            return fn(t)
        return self._fd(order, t)

    # -- domain handling ---------------------------------------------------

    def check_in_domain(self, values: np.ndarray, mask: np.ndarray | None = None):
        a, b = self.domain
        v = np.asarray(values, dtype=float)
        ok = (v >= a) & (v <= b)
        if self.allow_zero:
            ok |= v == 0.0
        if mask is not None:
            ok = ok | ~mask
        if not np.all(ok):
            bad = v[~ok].ravel()[0]
            raise DomainViolation(
                f"value {bad!r} outside domain [{a}, {b}] of {self.name}"
            )

    def safe_eval(self, t) -> np.ndarray:
        """Evaluate, honoring the allow_zero convention off-domain point."""
        t = np.asarray(t, dtype=float)
        if self.allow_zero:
            a, _ = self.domain
            out = self.eval(np.where(t == 0.0, a, t))
            return np.where(t == 0.0, self._zero_limit(), out)
        return self.eval(t)

    def _zero_limit(self) -> float:
        return 0.0


# ---------------------------------------------------------------------------
# built-ins


def square() -> PhiSpec:
    return PhiSpec(
        "square",
        (-1.0, 1.0),
        eval=lambda t: t * t,
        d1=lambda t: 2.0 * t,
        d2=lambda t: np.full_like(np.asarray(t, float), 2.0),
        d3=lambda t: np.zeros_like(np.asarray(t, float)),
        d4=lambda t: np.zeros_like(np.asarray(t, float)),
        nat_domain=(-math.inf, math.inf),
    )


def power_alpha(alpha: float) -> PhiSpec:
    a = float(alpha)
    if not 1.0 < a <= 2.0:
        raise BadParameter("power_alpha requires alpha in (1, 2]")
    return PhiSpec(
        f"power:{a}",
        (0.0, 1.0),
        eval=lambda t: np.power(t, a),
        d1=lambda t: a * np.power(t, a - 1),
        d2=lambda t: a * (a - 1) * np.power(t, a - 2),
        d3=lambda t: a * (a - 1) * (a - 2) * np.power(t, a - 3),
        d4=lambda t: a * (a - 1) * (a - 2) * (a - 3) * np.power(t, a - 4),
        nat_domain=(0.0, math.inf),
    )


def xlogx(delta: float = 1e-6, top: float = 64.0) -> PhiSpec:
    lo = float(delta)
    hi = float(top)
    if lo < 0 or hi <= max(lo, 0.0):
        raise BadParameter("xlogx requires 0 <= delta < T")
    allow_zero = lo == 0.0
    if allow_zero:
        # keep the working interval positive; t = 0 handled by convention
        lo = min(1e-300, hi / 2)
    return PhiSpec(
        f"xlogx:{delta},{top}",
        (lo, hi),
        eval=lambda t: t * np.log(t),
        d1=lambda t: np.log(t) + 1.0,
        d2=lambda t: 1.0 / t,
        d3=lambda t: -1.0 / t**2,
        d4=lambda t: 2.0 / t**3,
        allow_zero=allow_zero,
        nat_domain=(0.0, math.inf),
    )


def binent() -> PhiSpec:
    """``Phi_1(t) = 1 - h((1+t)/2)`` with the binary entropy in bits."""

    def f(t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            p = (1 + t) / 2
            q = (1 - t) / 2
            out = 1.0 + np.where(p > 0, p * np.log2(p), 0.0) + np.where(
                q > 0, q * np.log2(q), 0.0
            )
        return out

    ln2 = math.log(2.0)
    return PhiSpec(
        "binent",
        (-1.0, 1.0),
        eval=f,
        d1=lambda t: 0.5 * np.log((1 + t) / (1 - t)) / ln2,
        d2=lambda t: 1.0 / ((1 - t * t) * ln2),
        d3=lambda t: 2.0 * t / ((1 - t * t) ** 2 * ln2),
        d4=lambda t: (2 + 6 * t * t) / ((1 - t * t) ** 3 * ln2),
    )


def sym_alpha(alpha: float) -> PhiSpec:
    a = float(alpha)
    if not 1.0 < a <= 2.0:
        raise BadParameter("sym_alpha requires alpha in (1, 2]")
    c = 2.0**a - 2.0

    def dk(k: int):
        coef = math.prod(a - i for i in range(k)) / c
        sign = (-1.0) ** k

        def f(t):
            t = np.asarray(t, dtype=float)
            return coef * (np.power(1 + t, a - k) + sign * np.power(1 - t, a - k))

        return f

    return PhiSpec(
        f"sym:{a}",
        (-1.0, 1.0),
        eval=lambda t: (np.power(1 + t, a) + np.power(1 - t, a) - 2.0) / c,
        d1=dk(1),
        d2=dk(2),
        d3=dk(3),
        d4=dk(4),
    )


_POWER_RE = re.compile(r"^(power|sym):([0-9.]+)$")
_XLOGX_RE = re.compile(r"^xlogx(?::([0-9.eE+-]+),([0-9.eE+-]+))?$")


def parse_phi(name: str) -> PhiSpec:
    """Resolve a CLI-style name: square, power:A, xlogx[:D,T], binent, sym:A."""
    if name == "square":
        return square()
    if name == "binent":
        return binent()
    m = _POWER_RE.match(name)
    if m:
        return power_alpha(float(m.group(2))) if m.group(1) == "power" else sym_alpha(
            float(m.group(2))
        )
    m = _XLOGX_RE.match(name)
    if m:
        if m.group(1) is None:
            return xlogx()
        return xlogx(float(m.group(1)), float(m.group(2)))
    raise BadParameter(f"unknown phi name {name!r}")


# ---------------------------------------------------------------------------
# entropies


@dataclass(frozen=True)
class EntropyValue:
    value: float
    decomposition: tuple[float, ...] | None = None


def _clamped(v: float) -> float:
    return 0.0 if -_CLAMP <= v < 0.0 else v


# Gauss-Legendre nodes mapped to [0, 1], for the Bregman-term quadrature
_GL_S, _GL_W = np.polynomial.legendre.leggauss(12)
_GL_S = 0.5 * (_GL_S + 1.0)
_GL_W = 0.5 * _GL_W


def _entropy_of_weighted(phi: PhiSpec, weights: np.ndarray, values: np.ndarray) -> float:
    """H_phi of a finite law given atom weights (summing to w) and values.

    Evaluated in Bregman form ``E[Phi(f) - Phi(m) - Phi'(m)(f - m)]``; when
    that difference is tiny relative to Phi's scale (catastrophic
    cancellation regime) each term is recomputed without subtraction as
    ``(v - m)^2 * integral_0^1 (1 - s) Phi''(m + s(v - m)) ds``.
    """
    keep = weights > 0
    if not np.all(keep):  # zero-weight atoms carry arbitrary values
        weights = weights[keep]
        values = np.asarray(values)[keep]
    w = weights.sum()
    if w <= 0:
        return 0.0
    m = float(np.dot(weights, values) / w)
    pf = phi.safe_eval(values)
    pm = float(phi.safe_eval(m))
    a, b = phi.domain
    interior = (m > a) and (m < b)
    if phi.d1 is not None and interior:
        d1m = float(phi.deriv(1, m))
        out = float(np.dot(weights, pf - pm - d1m * (values - m)) / w)
    else:
        out = float(np.dot(weights, pf) / w - pm)
    scale = float(np.max(np.abs(pf))) + abs(pm)
    if interior and out < 1e-5 * scale and phi.d2 is not None:
        dv = np.asarray(values, dtype=float) - m
        zero = phi.allow_zero & (np.asarray(values) == 0.0)
        nodes = m + np.outer(dv, _GL_S)  # always inside the hull of {v, m}
        terms = dv * dv * (phi.deriv(2, nodes) @ ((1.0 - _GL_S) * _GL_W))
        if np.any(zero):
            # singular lower end: fall back to the direct formula there
            direct = phi.safe_eval(values) - pm - float(phi.deriv(1, m)) * dv
            terms = np.where(zero, direct, terms)
        out = float(np.dot(weights, terms) / w)
    return _clamped(out)


def phi_entropy(d: JointDist, phi: PhiSpec, f: JointFunction) -> EntropyValue:
    """``H_phi(f) = E[Phi(f)] - Phi(E f)``; non-negative by convexity."""
    phi.check_in_domain(f.values, d.support_mask)
    w = np.where(d.support_mask, d.probs, 0.0).ravel()
    v = f.values.ravel()
    return EntropyValue(_entropy_of_weighted(phi, w, v))


def marginal_phi_entropy(d: JointDist, phi: PhiSpec, g: MarginalFunction) -> EntropyValue:
    """H_phi of a single-coordinate function under the marginal law."""
    p = d.marginal_vector(g.coord)
    phi.check_in_domain(g.values, p > 0)
    return EntropyValue(_entropy_of_weighted(phi, np.where(p > 0, p, 0.0), g.values))


def cond_phi_entropy(
    d: JointDist, phi: PhiSpec, f: JointFunction, coords: Sequence[int]
) -> EntropyValue:
    """``H_phi(f | X_coords) = sum_s p(s) H_phi(f | X_coords = s)``."""
    phi.check_in_domain(f.values, d.support_mask)
    coords = sorted(set(int(c) for c in coords))
    if not coords:
        return phi_entropy(d, phi, f)
    drop = tuple(a for a in range(d.k) if a not in coords)
    # move conditioning axes to the front, flatten both groups
    order = coords + list(drop)
    probs = np.transpose(d.probs, order).reshape(
        math.prod(d.alphabet_sizes[c] for c in coords), -1
    )
    vals = np.transpose(f.values, order).reshape(probs.shape)
    terms = []
    total = 0.0
    for row_p, row_v in zip(probs, vals):
        ps = row_p.sum()
        if ps <= 0:
            terms.append(0.0)
            continue
        h = _entropy_of_weighted(phi, row_p, row_v)
        terms.append(ps * h)
        total += ps * h
    return EntropyValue(_clamped(total), tuple(terms))


def phi_mutual_information(d: JointDist, phi: PhiSpec) -> float:
    """``I_phi(X;Y) = sum p(x)p(y) Phi(p(x,y)/(p(x)p(y))) - Phi(1)``."""
    from .errors import NotBipartite

    if d.k != 2:
        raise NotBipartite("phi_mutual_information needs exactly 2 coordinates")
    px = d.marginal_vector(0)
    py = d.marginal_vector(1)
    prod = np.outer(px, py)
    ok = prod > 0
    ratio = np.divide(d.probs, prod, out=np.zeros_like(d.probs), where=ok)
    # ratios may leave the compact working interval; require only that the
    # formula itself is defined there
    lo, hi = phi.nat_domain or phi.domain
    bad = ok & ((ratio < lo) | (ratio > hi)) & ~(phi.allow_zero & (ratio == 0))
    if np.any(bad):
        raise DomainViolation(
            f"ratio {ratio[bad].ravel()[0]!r} outside the defined range of {phi.name}"
        )
    # exact-zero ratios take the limiting value (0 log 0 := 0 and friends)
    args = np.where(ok, np.where(ratio == 0, 1e-300, ratio), 1.0)
    vals = np.where(ok, phi.eval(args), 0.0)
    out = float(np.sum(prod * vals) - phi.safe_eval(1.0))
    return _clamped(out)


def check_class_F(phi: PhiSpec, grid_points: int = 256) -> dict:
    """Numerically test the subadditivity conditions on an interior grid.

    Checks ``Phi'''' Phi'' >= 2 Phi'''^2`` pointwise and spot-checks
    concavity of ``1/Phi''`` via second differences; also confirms
    convexity and non-affineness.  Sets ``phi.is_class_F``.
    """
    if grid_points < 16:
        raise BadParameter("grid_points must be >= 16")
    a, b = phi.domain
    pad = (b - a) * 1e-3
    t = np.linspace(a + pad, b - pad, grid_points)
    d2 = phi.deriv(2, t)
    d3 = phi.deriv(3, t)
    d4 = phi.deriv(4, t)
    convex_ok = bool(np.min(d2) >= -1e-10)
    affine = bool(np.max(np.abs(d2)) <= 1e-10)
    lhs = d4 * d2
    rhs = 2.0 * d3 * d3
    margin = lhs - rhs
    tol = 1e-8 * (1.0 + np.abs(lhs) + np.abs(rhs))
    vi_ok = bool(np.all(margin >= -tol))
    worst = int(np.argmin(margin - (-tol)))
    # condition (v): 1/Phi'' concave <=> second differences <= 0
    inv = 1.0 / np.where(np.abs(d2) > 1e-300, d2, np.nan)
    sec = inv[:-2] - 2 * inv[1:-1] + inv[2:]
    v_ok = bool(np.all(sec[np.isfinite(sec)] <= 1e-8 * (1 + np.abs(inv[1:-1][np.isfinite(sec)]))))
    verdict = convex_ok and not affine and vi_ok and v_ok
    phi.is_class_F = verdict
    return {
        "verified": verdict,
        "convex": convex_ok,
        "affine": affine,
        "condition_vi": vi_ok,
        "condition_v": v_ok,
        "worst_margin": float(margin[worst]),
        "worst_location": float(t[worst]),
    }


def subadditivity_gap(d: JointDist, phi: PhiSpec, f: JointFunction) -> float:
    """``sum_i H_phi(f | X_{-i}) - H_phi(f)`` for fully independent coordinates."""
    from .dist import is_fully_independent

    if not is_fully_independent(d):
        raise NotIndependent("subadditivity_gap requires independent coordinates")
    total = phi_entropy(d, phi, f).value
    s = 0.0
    for i in range(d.k):
        others = [a for a in range(d.k) if a != i]
        s += cond_phi_entropy(d, phi, f, others).value
    return s - total
