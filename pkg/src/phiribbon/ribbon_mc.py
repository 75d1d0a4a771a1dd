"""Exact region tests built on a block Gram matrix of marginal bases.

For each coordinate we build an orthonormal basis of zero-mean functions
under the marginal inner product; cross inner products under the joint law
assemble into a symmetric matrix ``M``.  Every region query here reduces to
a positive-semidefinite test on a matrix derived from ``M`` and the
diagonal expansion of the queried lambda point:

* variance region ("mc"): member iff ``Lambda^{-1} - M >= 0``
  (blocks with ``lambda_i = 0`` deleted);
* same region, alternate form ("sprime"): member iff ``M - M Lambda M >= 0``;
* sum-variance region ("tilde"): member iff ``M - Lambda >= 0``.

Non-member verdicts return an eigenvector mapped back to functions that
violate the defining inequality, re-checkable from scratch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dist import JointDist, JointFunction, MarginalFunction, marginal
from .errors import (
    BadLambda,
    BadShape,
    NonGeneric,
    NotCorrelationMatrix,
)

PSD_TOL = 1e-9
_common_tol = 1e-8


@dataclass(frozen=True)
class GramMatrix:
    """Block Gram matrix of per-coordinate orthonormal zero-mean bases."""

    block_dims: tuple[int, ...]
    M: np.ndarray
    basis: tuple[tuple[MarginalFunction, ...], ...]

    @property
    def size(self) -> int:
        return int(sum(self.block_dims))

    def block_slices(self) -> list[slice]:
        out, start = [], 0
        for dim in self.block_dims:
            out.append(slice(start, start + dim))
            start += dim
        return out


@dataclass(frozen=True)
class MembershipResult:
    verdict: bool
    min_eigenvalue: float
    witness: tuple[MarginalFunction, ...] | None = None
    gap: float | None = None


def _marginal_basis(p: np.ndarray) -> np.ndarray:
    """Orthonormal zero-mean basis under <f,g> = sum p f g, as columns.

    Symbols are processed in decreasing probability; vectors whose residual
    norm falls below 1e-10 are dropped (the span of centered indicators has
    dimension support-1).  Rows at zero-probability symbols are 0.
    """
    n = len(p)
    support = np.flatnonzero(p > 0)
    order = support[np.argsort(-p[support])]
    basis: list[np.ndarray] = []
    for s in order:
        v = np.zeros(n)
        v[s] = 1.0
        v[support] -= p[s]  # center: subtract the mean of the indicator
        for b in basis:
            v -= np.dot(p, v * b) * b
        norm = np.sqrt(np.dot(p, v * v))
        if norm < 1e-10:
            continue
        basis.append(v / norm)
    return np.column_stack(basis) if basis else np.zeros((n, 0))


def gram_matrix(d: JointDist) -> GramMatrix:
    """Assemble M with one block per coordinate; diagonal blocks are I."""
    mats = []
    for i in range(d.k):
        mats.append(_marginal_basis(d.marginal_vector(i)))
    dims = tuple(m.shape[1] for m in mats)
    size = sum(dims)
    M = np.eye(size)
    sl = []
    start = 0
    for dim in dims:
        sl.append(slice(start, start + dim))
        start += dim
    for i in range(d.k):
        for j in range(i + 1, d.k):
            pij = marginal(d, [i, j]).probs
            block = mats[i].T @ pij @ mats[j]
            M[sl[i], sl[j]] = block
            M[sl[j], sl[i]] = block.T
    basis = tuple(
        tuple(MarginalFunction(i, mats[i][:, j]) for j in range(dims[i]))
        for i in range(d.k)
    )
    return GramMatrix(dims, M, basis)


def _check_lambda(lam, k: int) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (k,):
        raise BadLambda(f"lambda must have {k} entries")
    if np.any(lam < 0) or np.any(lam > 1):
        raise BadLambda("lambda entries must lie in [0, 1]")
    return lam


def _expand(lam: np.ndarray, dims) -> np.ndarray:
    return np.repeat(lam, dims)


def _witness_functions(
    d: JointDist, g: GramMatrix, coeffs: np.ndarray, kept: list[int] | None = None
) -> tuple[MarginalFunction, ...]:
    """Map a coefficient vector back to one function per coordinate."""
    kept = kept if kept is not None else list(range(len(g.block_dims)))
    out = []
    pos = 0
    for i in range(d.k):
        vals = np.zeros(d.alphabet_sizes[i])
        if i in kept:
            dim = g.block_dims[i]
            c = coeffs[pos : pos + dim]
            pos += dim
            for cj, fj in zip(c, g.basis[i]):
                vals += cj * fj.values
        out.append(MarginalFunction(i, vals))
    return tuple(out)


def fc2_gap(d: JointDist, lam, fs) -> float:
    """Gap of the strong Cauchy-Schwarz inequality at single-coordinate fs.

    Negative iff ``Var[sum f_i] > sum (1/lambda_i) Var[f_i]`` restricted to
    coordinates with positive lambda and all other f_i constant.
    """
    lam = _check_lambda(lam, d.k)
    total = JointFunction(sum(f.lift(d).values for f in fs))
    var_sum = d.variance(total)
    bound = 0.0
    for i, f in enumerate(fs):
        v = d.variance(f.lift(d))
        if lam[i] > 0:
            bound += v / lam[i]
        elif v > 1e-15:
            return float("inf")  # lambda_i = 0 puts no constraint via f_i
    return bound - var_sum


def mc_def_gap(d: JointDist, lam, f: JointFunction) -> float:
    """Gap of the defining variance inequality at a joint function f."""
    from .dist import cond_expectation

    lam = _check_lambda(lam, d.k)
    g = d.variance(f)
    for i in range(d.k):
        gi = cond_expectation(d, f, i)
        g -= lam[i] * d.variance(gi.lift(d))
    return g


def tilde_gap(d: JointDist, lam, fs) -> float:
    """Gap ``Var[sum f_i] - sum lambda_i Var[f_i]`` at single-coordinate fs."""
    lam = _check_lambda(lam, d.k)
    total = JointFunction(sum(f.lift(d).values for f in fs))
    g = d.variance(total)
    for i, f in enumerate(fs):
        g -= lam[i] * d.variance(f.lift(d))
    return g


def mc_membership(d: JointDist, lam, g: GramMatrix | None = None) -> MembershipResult:
    """PSD test ``Lambda^{-1} - M >= 0`` after deleting lambda_i = 0 blocks."""
    lam = _check_lambda(lam, d.k)
    g = g or gram_matrix(d)
    kept = [i for i in range(d.k) if lam[i] > 0]
    if not kept:
        return MembershipResult(True, float("inf"))
    sl = g.block_slices()
    idx = np.concatenate([np.arange(s.start, s.stop) for s in [sl[i] for i in kept]])
    if idx.size == 0:
        return MembershipResult(True, float("inf"))
    Msub = g.M[np.ix_(idx, idx)]
    dims = [g.block_dims[i] for i in kept]
    inv = _expand(1.0 / lam[kept], dims)
    A = np.diag(inv) - Msub
    w, V = np.linalg.eigh(A)
    if w[0] >= -PSD_TOL:
        return MembershipResult(True, float(w[0]))
    c = V[:, 0]
    fs = _witness_functions(d, g, c, kept)
    gap = fc2_gap(d, lam, fs)
    return MembershipResult(False, float(w[0]), fs, float(gap))


def mc_membership_sprime(
    d: JointDist, lam, g: GramMatrix | None = None
) -> MembershipResult:
    """Same region via ``M - M Lambda M >= 0``; lambda_i = 0 needs no care."""
    lam = _check_lambda(lam, d.k)
    g = g or gram_matrix(d)
    L = _expand(lam, g.block_dims)
    A = g.M - g.M @ (L[:, None] * g.M)
    w, V = np.linalg.eigh(A)
    if w[0] >= -PSD_TOL:
        return MembershipResult(True, float(w[0]))
    c = V[:, 0]
    fs = _witness_functions(d, g, c)
    f = JointFunction(sum(fi.lift(d).values for fi in fs))
    gap = mc_def_gap(d, lam, f)
    return MembershipResult(False, float(w[0]), fs, float(gap))


def tilde_membership(d: JointDist, lam, g: GramMatrix | None = None) -> MembershipResult:
    """Sum-variance region: member iff ``M - Lambda >= 0`` blockwise."""
    lam = _check_lambda(lam, d.k)
    g = g or gram_matrix(d)
    L = _expand(lam, g.block_dims)
    A = g.M - np.diag(L)
    if A.size == 0:
        return MembershipResult(True, float("inf"))
    w, V = np.linalg.eigh(A)
    if w[0] >= -PSD_TOL:
        return MembershipResult(True, float(w[0]))
    c = V[:, 0]
    fs = _witness_functions(d, g, c)
    gap = tilde_gap(d, lam, fs)
    return MembershipResult(False, float(w[0]), fs, float(gap))


def bipartite_closed_form(rho: float, lam) -> bool:
    """k = 2 closed form: member iff ``(1 - 1/l1)(1 - 1/l2) >= rho^2``."""
    lam = _check_lambda(lam, 2)
    l1, l2 = lam
    if l1 == 0 or l2 == 0 or rho == 0:
        return True
    if l1 == 1 or l2 == 1:
        # (1 - 1/l) = 0 on that side: member only if rho vanishes
        return rho * rho <= PSD_TOL
    return (1 - 1 / l1) * (1 - 1 / l2) >= rho * rho - PSD_TOL


def bbt_closed_form(d: JointDist, lam) -> bool:
    """Closed form for alphabets (2, 2, 3) via three scalar inequalities.

    Requires the conditional expectations of the two binary-coordinate
    basis functions on the ternary coordinate to be linearly independent
    ("generic" case); otherwise raises NonGeneric.
    """
    if d.alphabet_sizes != (2, 2, 3):
        raise BadShape("bbt_closed_form needs alphabet sizes (2, 2, 3)")
    lam = _check_lambda(lam, 3)
    g = gram_matrix(d)
    if g.block_dims != (1, 1, 2):
        raise NonGeneric("degenerate supports")
    g1 = g.basis[0][0].values
    g2 = g.basis[1][0].values
    rho12 = float(
        np.sum(marginal(d, [0, 1]).probs * np.outer(g1, g2))
    )
    if rho12 < 0:
        g2 = -g2
        rho12 = -rho12
    p3 = d.marginal_vector(2)
    # conditional expectations of g1, g2 on the ternary coordinate
    p13 = marginal(d, [0, 2]).probs
    p23 = marginal(d, [1, 2]).probs
    with np.errstate(divide="ignore", invalid="ignore"):
        e1 = np.where(p3 > 0, (g1 @ p13) / p3, 0.0)
        e2 = np.where(p3 > 0, (g2 @ p23) / p3, 0.0)
    stack = np.sqrt(p3)[:, None] * np.column_stack([e1, e2])
    if np.linalg.svd(stack, compute_uv=False)[-1] <= 1e-8:
        raise NonGeneric("conditional expectations on X3 are linearly dependent")
    rho13_sq = float(p3 @ (e1 * e1))
    rho23_sq = float(p3 @ (e2 * e2))
    cross = float(p3 @ (e1 * e2))  # = E[ E[g1|X3] E[g2|X3] ]
    u = np.where(lam > 0, 1.0 / np.maximum(lam, 1e-300) - 1.0, np.inf)
    u1, u2, u3 = u

    def fin(x):
        return x if np.isfinite(x) else 1e300

    a = fin(u1) * fin(u3) - rho13_sq
    b = fin(u2) * fin(u3) - rho23_sq
    c = fin(u3) * rho12 + cross
    tol = PSD_TOL * (1 + abs(fin(u3)))
    return a >= -tol and b >= -tol and a * b >= c * c - tol * (1 + abs(c))


def pearson_matrix(d: JointDist) -> np.ndarray:
    """Pearson correlation matrix of an all-binary distribution's bits."""
    if any(s != 2 for s in d.alphabet_sizes):
        raise BadShape("pearson_matrix needs all-binary coordinates")
    k = d.k
    R = np.eye(k)
    vals = []
    for i in range(k):
        p = d.marginal_vector(i)
        m = p[1]
        sd = np.sqrt(m * (1 - m))
        if sd <= 0:
            raise NonGeneric(f"coordinate {i} is deterministic")
        vals.append((np.array([0.0, 1.0]) - m) / sd)
    for i in range(k):
        for j in range(i + 1, k):
            pij = marginal(d, [i, j]).probs
            R[i, j] = R[j, i] = float(vals[i] @ pij @ vals[j])
    return R


def gaussian_mc_membership(R: np.ndarray, lam) -> bool:
    """Member iff ``Lambda^{-1} - R >= 0`` (lambda_i = 0 rows deleted).

    ``R`` is the correlation matrix of a jointly Gaussian (or the Pearson
    matrix of an all-binary) vector.
    """
    R = np.asarray(R, dtype=float)
    k = R.shape[0]
    if R.shape != (k, k) or not np.allclose(R, R.T, atol=1e-9):
        raise NotCorrelationMatrix("R must be symmetric")
    if not np.allclose(np.diag(R), 1.0, atol=1e-9):
        raise NotCorrelationMatrix("R must have unit diagonal")
    if np.linalg.eigvalsh(R)[0] < -PSD_TOL:
        raise NotCorrelationMatrix("R must be positive semidefinite")
    lam = _check_lambda(lam, k)
    kept = np.flatnonzero(lam > 0)
    if kept.size == 0:
        return True
    A = np.diag(1.0 / lam[kept]) - R[np.ix_(kept, kept)]
    return bool(np.linalg.eigvalsh(A)[0] >= -PSD_TOL)


def detect_structure(d: JointDist, g: GramMatrix | None = None) -> dict:
    """Flags readable directly off the Gram spectrum.

    ``pairwise_independent``: all cross blocks vanish.  ``common_part``:
    top eigenvalue reaches k (a non-constant function computable from each
    coordinate).  ``tilde_degenerate``: M is singular, i.e. some zero-mean
    single-coordinate functions, not all zero, sum to the zero function.
    """
    g = g or gram_matrix(d)
    k = d.k
    off = g.M - _block_diag_of(g)
    w = np.linalg.eigvalsh(g.M) if g.size else np.array([1.0])
    report = {
        "pairwise_independent": bool(np.max(np.abs(off)) < 1e-10) if g.size else True,
        "common_part": bool(w[-1] >= k - _common_tol),
        "tilde_degenerate": bool(w[0] <= _common_tol),
        "top_eigenvalue": float(w[-1]),
        "min_eigenvalue": float(w[0]),
    }
    if report["tilde_degenerate"] and g.size:
        V = np.linalg.eigh(g.M)[1]
        report["kernel_witness"] = _witness_functions(d, g, V[:, 0])
    return report


def _block_diag_of(g: GramMatrix) -> np.ndarray:
    out = np.zeros_like(g.M)
    for s in g.block_slices():
        out[s, s] = g.M[s, s]
    return out


def mc_boundary_trace(
    d: JointDist, directions: int = 64, g: GramMatrix | None = None
) -> list[tuple[np.ndarray, bool]]:
    """Bisect membership along rays from the origin of the lambda cube.

    The region is down-closed along such rays (the defining inequalities
    are linear in lambda), so bisection is exact.  Returns the last member
    point on each ray together with membership of the full-length point.
    """
    g = g or gram_matrix(d)
    if d.k != 2:
        raise BadShape("mc_boundary_trace currently supports k = 2")
    out = []
    for j in range(directions):
        theta = (j + 0.5) / directions * (np.pi / 2)
        direction = np.array([np.cos(theta), np.sin(theta)])
        direction = direction / np.max(direction)  # exits the cube at t = 1
        lo, hi = 0.0, 1.0
        full = mc_membership(d, direction, g).verdict
        if full:
            out.append((direction, True))
            continue
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            if mc_membership(d, mid * direction, g).verdict:
                lo = mid
            else:
                hi = mid
        out.append((lo * direction, False))
    return out


def rho2_from_trace(trace) -> float:
    """``inf (1 - l1)/l2`` over traced boundary points."""
    best = float("inf")
    for lam, _ in trace:
        l1, l2 = float(lam[0]), float(lam[1])
        if l2 > 1e-9:
            best = min(best, (1 - l1) / l2)
    return best
