"""Scalar correlation measures: maximal correlation and the SDPI constant.

Maximal correlation is spectral (second singular value of the normalized
joint matrix).  The SDPI constant ``eta_phi`` is a supremum of entropy
ratios with no closed form in general, so it is estimated by multi-start
projected gradient ascent; every reported value is achieved by a concrete
witness function and is therefore a certified lower bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dist import JointDist, MarginalFunction
from .errors import BadParameter, NotBipartite
from .phi import PhiSpec, _entropy_of_weighted

_VAR_FLOOR = 1e-12


@dataclass(frozen=True)
class SearchOpts:
    """Knobs for the multi-start ascent/descent searches."""

    restarts: int = 32
    max_iters: int = 500
    grad_tol: float = 1e-9
    violation_tol: float = 1e-9
    seed: int = 0
    step_init: float = 0.1

    def __post_init__(self):
        if self.restarts < 1:
            raise BadParameter("restarts must be >= 1")
        if self.grad_tol <= 0 or self.violation_tol <= 0:
            raise BadParameter("tolerances must be positive")


@dataclass(frozen=True)
class EtaEstimate:
    value: float
    witness: MarginalFunction
    lower_bound_rho2: float
    restarts_used: int
    converged: bool


def _bipartite_matrices(d: JointDist):
    if d.k != 2:
        raise NotBipartite(f"need a bipartite distribution, got k={d.k}")
    px = d.marginal_vector(0)
    py = d.marginal_vector(1)
    sx = px > 0
    sy = py > 0
    P = d.probs[np.ix_(sx, sy)]
    return P, px[sx], py[sy], sx, sy


def maximal_correlation(d: JointDist) -> float:
    """Second singular value of ``Q[x,y] = p(x,y)/sqrt(p(x)p(y))``."""
    P, px, py, _, _ = _bipartite_matrices(d)
    if len(px) < 2 or len(py) < 2:
        return 0.0
    Q = P / np.sqrt(np.outer(px, py))
    s = np.linalg.svd(Q, compute_uv=False)
    return float(min(1.0, s[1]))


def mc_witness(d: JointDist) -> tuple[np.ndarray, np.ndarray, float]:
    """Optimal (f, g) pair on the full alphabets, unit variance, plus rho.

    Entries at zero-probability symbols are 0.
    """
    P, px, py, sx, sy = _bipartite_matrices(d)
    f_full = np.zeros(d.alphabet_sizes[0])
    g_full = np.zeros(d.alphabet_sizes[1])
    if len(px) < 2 or len(py) < 2:
        f_full[np.flatnonzero(sx)[0]] = 1.0  # arbitrary, rho is 0
        g_full[np.flatnonzero(sy)[0]] = 1.0
        return f_full, g_full, 0.0
    Q = P / np.sqrt(np.outer(px, py))
    U, s, Vt = np.linalg.svd(Q)
    f = U[:, 1] / np.sqrt(px)
    g = Vt[1, :] / np.sqrt(py)
    # normalize to zero mean, unit variance (they already are, up to sign)
    f -= np.dot(px, f)
    g -= np.dot(py, g)
    f /= max(np.sqrt(np.dot(px, f * f)), 1e-300)
    g /= max(np.sqrt(np.dot(py, g * g)), 1e-300)
    if float(f @ (P @ g)) < 0:
        g = -g
    f_full[sx] = f
    g_full[sy] = g
    return f_full, g_full, float(min(1.0, s[1]))


def eta_lower_bound_rho2(d: JointDist) -> float:
    return maximal_correlation(d) ** 2


def _ratio_and_grad(
    fx: np.ndarray,
    P: np.ndarray,
    px: np.ndarray,
    py: np.ndarray,
    phi: PhiSpec,
    psi: PhiSpec,
):
    """Objective H_psi(E[f|Y]) / H_phi(f) and its gradient in f."""
    mean = float(px @ fx)
    gy = (P.T @ fx) / py
    num = _entropy_of_weighted(psi, py, gy)
    den = _entropy_of_weighted(phi, px, fx)
    if den <= _VAR_FLOOR:
        return None
    # dN/df_x = sum_y p(x,y) Psi'(g_y) - p(x) Psi'(E f)
    dpsi_g = psi.deriv(1, gy)
    dpsi_m = float(psi.deriv(1, mean))
    grad_num = P @ dpsi_g - px * dpsi_m
    dphi_f = phi.deriv(1, fx)
    dphi_m = float(phi.deriv(1, mean))
    grad_den = px * (dphi_f - dphi_m)
    ratio = num / den
    grad = (grad_num - ratio * grad_den) / den
    return ratio, grad


def _amplitude_sweep(
    direction: np.ndarray,
    P: np.ndarray,
    px: np.ndarray,
    py: np.ndarray,
    phi: PhiSpec,
    psi: PhiSpec,
) -> tuple[float, np.ndarray]:
    """Best ratio along f = c + eps * direction for shrinking amplitudes.

    Small-amplitude expansion of both entropies turns the ratio into a
    Rayleigh quotient, so sweeping eps downward recovers the supremum when
    it is attained in the constant-function limit.
    """
    a, b = phi.domain
    c = 0.5 * (a + b)
    u = direction - px @ direction
    span = max(np.max(np.abs(u)), 1e-300)
    u = u / span
    best = -np.inf
    best_f = None
    eps = 0.45 * (b - a)
    while eps >= (b - a) * 1e-5:
        f = np.clip(c + eps * u, a + 1e-9 * (b - a), b - 1e-9 * (b - a))
        out = _ratio_and_grad(f, P, px, py, phi, psi)
        if out is not None and out[0] > best:
            best, best_f = out[0], f
        eps *= 0.5
    return best, best_f


def eta_phi(
    d: JointDist,
    phi: PhiSpec,
    psi: PhiSpec | None = None,
    opts: SearchOpts | None = None,
) -> EtaEstimate:
    """Estimate ``sup_f H_psi(E[f|Y]) / H_phi(f)`` over non-constant f on X.

    The reported value is a lower bound on the supremum, achieved by the
    returned witness.  ``psi`` defaults to ``phi``.
    """
    opts = opts or SearchOpts()
    psi = psi or phi
    P, px, py, sx, _ = _bipartite_matrices(d)
    rho2 = eta_lower_bound_rho2(d)
    a, b = phi.domain
    lo = a + 1e-9 * (b - a)
    hi = b - 1e-9 * (b - a)
    rng = np.random.default_rng(opts.seed)
    n = len(px)

    fwit, _, _ = mc_witness(d)
    svd_dir = fwit[sx]

    best_val = 0.0
    best_f = None
    converged = False
    for r in range(opts.restarts):
        if r == 0:
            f = np.clip(0.5 * (a + b) + 0.2 * (b - a) * svd_dir, lo, hi)
        else:
            f = rng.uniform(lo, hi, size=n)
        if np.ptp(f) < 1e-8 * (b - a):
            f = f + rng.normal(0, 1e-3 * (b - a), size=n)
            f = np.clip(f, lo, hi)
        step = opts.step_init * (b - a)
        out = _ratio_and_grad(f, P, px, py, phi, psi)
        if out is None:
            continue
        val, grad = out
        gnorm = np.inf
        for _ in range(opts.max_iters):
            # projected gradient norm for the box constraint
            proj = np.where((f <= lo) & (grad < 0), 0.0, grad)
            proj = np.where((f >= hi) & (proj > 0), 0.0, proj)
            gnorm = float(np.linalg.norm(proj))
            if gnorm < opts.grad_tol:
                break
            improved = False
            while step > 1e-14 * (b - a):
                f_new = np.clip(f + step * proj, lo, hi)
                out_new = _ratio_and_grad(f_new, P, px, py, phi, psi)
                if out_new is not None and out_new[0] > val + 1e-16:
                    f, (val, grad) = f_new, out_new
                    improved = True
                    step *= 1.5
                    break
                step *= 0.5
            if not improved:
                break
        if val > best_val:
            best_val, best_f = val, f
            converged = gnorm < opts.grad_tol
    # the supremum often sits in the small-amplitude limit around a
    # constant; sweep that regime explicitly along the best directions
    for direction in (svd_dir, *( [best_f - px @ best_f] if best_f is not None else [] )):
        sval, sf = _amplitude_sweep(direction, P, px, py, phi, psi)
        if sf is not None and sval > best_val:
            best_val, best_f, converged = sval, sf, True
    if best_f is None:
        best_f = np.clip(0.5 * (a + b) + 0.1 * (b - a) * svd_dir, lo, hi)
        best_val = 0.0
    full = np.zeros(d.alphabet_sizes[0])
    full[sx] = best_f
    witness = MarginalFunction(0, full, sx)
    return EtaEstimate(
        value=float(min(best_val, 1.0) if psi is phi else best_val),
        witness=witness,
        lower_bound_rho2=rho2,
        restarts_used=opts.restarts,
        converged=converged,
    )
