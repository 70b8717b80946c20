"""Lower bounds on the spectral gap: curvature and stability certificates.

Curvature certificate.  On the radius-sqrt(N) sphere the Ricci tensor is
(1 - 1/N) g, so the curvature-plus-potential condition for the Gibbs measure
of beta * H reads, uniformly over sigma and unit tangent v,

    (1 - 1/N) + beta * Hess H(sigma)(v, v) >= c.

With r_min the uniform-over-sphere infimum of the Hessian quadratic form,
c = (1 - 1/N) + beta * r_min; when c > 0 the measure satisfies log-Sobolev
and hence Poincare inequalities, giving the gap lower bound c/2 under the
package's -L convention.  The sphere-wide extremes r_max, r_min are computed
by multi-start Riemannian ascent of the extreme tangent-Hessian eigenvalue
(inner eigenproblem by shifted power iteration; eigenvalue gradient from the
eigenvector with the tangency-transport correction).  The ascent yields inner
bounds on the true extremes, so certificates at N > 2 are heuristic and
flagged; for N = 2 an exhaustive angular grid makes them exact.

Stability certificate.  The uniform measure satisfies a Poincare inequality
with gap 1 - 1/N; perturbing by the Gibbs density and taking U = beta * H
with oscillation exponent 2 beta (max H - min H) gives the all-temperature
bound

    lower_bound = (1/2)(1 - 1/N) exp(-2 beta (max H - min H)),

with max/min H estimated by multi-start optimization (grid-exact at N = 2).
The estimated oscillation is an inner bound, so this certificate is likewise
flagged heuristic at N > 2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import landscape, model, sphere
from .errors import ParameterError
from .rng import STREAM_RESTART, make_rng
from .spectral import GAP_CONVENTION, LOWER

BAKRY_EMERY = "bakry_emery"
POINCARE_STABILITY = "poincare_stability"


@dataclass(frozen=True)
class HessianExtremes:
    r_max: float
    r_min: float
    r_range: float
    restarts: int
    converged: bool

    def __post_init__(self):
        if self.r_min > self.r_max:
            raise ParameterError("r_min must not exceed r_max")


@dataclass(frozen=True)
class Certificate:
    kind: str
    lower_bound: float
    inputs: dict
    convention: str = GAP_CONVENTION

    def __post_init__(self):
        if self.lower_bound < 0:
            raise ParameterError("certificates carry nonnegative lower bounds")

    def to_record(self, seed=None, spec=None):
        rec = {"value": self.lower_bound, "direction": LOWER, "method": self.kind,
               "std_error": None, "convention": self.convention}
        if seed is not None:
            rec["seed"] = seed
        if spec is not None:
            rec["spec"] = {"p": spec.p, "n": spec.n, "beta": spec.beta}
        return rec


def _circle_grid_points(grid):
    th = np.linspace(0.0, 2.0 * np.pi, grid, endpoint=False)
    return th, np.sqrt(2.0) * np.column_stack([np.cos(th), np.sin(th)])


def _parabolic_refine(values):
    """Max of the periodic sequence with a three-point parabolic correction."""
    i = int(np.argmax(values))
    m = values.size
    y0, y1, y2 = values[i - 1], values[i], values[(i + 1) % m]
    denom = y0 - 2.0 * y1 + y2
    if denom >= 0.0:
        return float(y1)
    return float(y1 - 0.125 * (y2 - y0) ** 2 / denom)


def _circle_hessian_form(J, grid=32768):
    """Hess H(theta)(t, t) for the unit tangent on an angular grid (N = 2)."""
    th, pts = _circle_grid_points(grid)
    tang = np.column_stack([-np.sin(th), np.cos(th)])
    h_vals = model.energy_many(J, pts)
    n, p = J.n, J.p
    scale = J.scale
    # contract the tensor down to per-point matrices
    t = np.asarray(J.entries).reshape(-1, n)
    mats = t @ pts.T                       # (n^{p-1}, m)
    while mats.shape[0] > n * n:
        m = mats.shape[1]
        mats = np.einsum("anc,cn->ac", mats.reshape(-1, n, m), pts, optimize=True)
    mats = mats.reshape(n, n, grid)
    quad = np.einsum("abm,ma,mb->m", mats, tang, tang, optimize=True)
    return scale * p * (p - 1) * quad - (p / n) * h_vals, h_vals


def circle_hessian_extremes(J, grid=32768):
    form, _ = _circle_hessian_form(J, grid)
    r_hi = _parabolic_refine(form)
    r_lo = -_parabolic_refine(-form)
    return HessianExtremes(r_max=r_hi, r_min=r_lo, r_range=r_hi - r_lo,
                           restarts=0, converged=True)


class _PointData:
    """Cascade products at one sphere point, reused across eigen-iterations."""

    __slots__ = ("x", "t3", "hmat", "g_e", "h_val", "n", "p")

    def __init__(self, J, x):
        from . import backends

        self.x = x
        self.n, self.p = J.n, J.p
        t3, mat, vec, e = backends.cascade(J._flat, J.n, J.p, x)
        s = J.scale
        self.t3 = t3
        self.hmat = s * J.p * (J.p - 1) * mat.reshape(J.n, J.n)
        self.g_e = s * J.p * vec
        self.h_val = s * e

    def apply(self, v):
        w = self.hmat @ v - (self.p / self.n) * self.h_val * v
        return w - (float(w @ self.x) / self.n) * self.x

    def rayleigh(self, v):
        v = v - (float(v @ self.x) / self.n) * self.x
        v /= np.linalg.norm(v)
        return float(v @ self.apply(v)), v


def _warm_power(data, v0, which, shift_hint, tol=1e-9, max_iter=120):
    """Extreme tangent eigenpair by shifted power iteration, warm-started."""
    sign = 1.0 if which == "max" else -1.0
    c = abs(shift_hint) * 1.05 + 1e-9
    lam, v = data.rayleigh(v0)
    for _ in range(max_iter):
        w = c * v + sign * data.apply(v)
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0, v, True
        v_new = w / nw
        v_new -= (float(v_new @ data.x) / data.n) * data.x
        v_new /= np.linalg.norm(v_new)
        lam_new = float(v_new @ data.apply(v_new))
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            return lam_new, v_new, True
        lam, v = lam_new, v_new
    return lam, v, False


def _eig_gradient(J, data, v):
    """Riemannian gradient of the extreme eigenvalue at data.x, eigenvector v.

    Tangent projection of  scale p(p-1)(p-2) (J : sigma^{p-3})[v, v, .]
    - (2(p-1)/N)(grad_E H . v) v - (p/N) grad_E H; the middle term transports
    the tangency constraint of v.
    """
    from . import backends

    n, p = data.n, data.p
    w = backends.vv_grad(data.t3, n, v)
    grad = (J.scale * p * (p - 1) * (p - 2) * w
            - (2.0 * (p - 1) / n) * float(data.g_e @ v) * v
            - (p / n) * data.g_e)
    return sphere.project_tangent(data.x, grad)


def _eigenvalue_ascent(J, x0, rng, which="max", max_iter=1500, tol=1e-5):
    """Ascend the extreme tangent eigenvalue over the sphere from x0.

    Line-search trials are accepted on the Rayleigh quotient of the carried
    eigenvector (a valid inner bound on the extreme eigenvalue), so each
    trial costs one contraction cascade; the eigenpair is then refreshed by
    warm-started power iteration.
    """
    sign = 1.0 if which == "max" else -1.0
    x = np.asarray(x0, dtype=float)
    data = _PointData(J, x)
    v0 = sphere.random_tangent(x, rng)
    lam, v, _ = _warm_power(data, v0, which, shift_hint=1.0, max_iter=300)
    step = 0.2
    converged = False
    ftol = 1e-8
    for _ in range(max_iter):
        lam_before = lam
        grad = sign * _eig_gradient(J, data, v)
        gn = float(np.linalg.norm(grad))
        if gn <= tol * (1.0 + abs(lam)):
            converged = True
            break
        t = min(step * 2.0, 5.0 / max(gn, 1e-30))
        improved = False
        for _ in range(30):
            xt = sphere.renormalize(x + t * grad)
            data_t = _PointData(J, xt)
            ray, v_t = data_t.rayleigh(v)
            if sign * ray > sign * lam + 1e-6 * t * gn * gn:
                lam_t, v_t, _ = _warm_power(data_t, v_t, which, shift_hint=lam)
                if sign * lam_t > sign * lam:
                    x, data, lam, v = xt, data_t, lam_t, v_t
                    improved = True
                    break
            t *= 0.5
        if not improved:
            # no improving step at any scale: a local max of the eigenvalue
            # field to working precision (the field is non-smooth at
            # eigenvalue crossings, so the gradient need not vanish there)
            converged = True
            break
        step = t
        if sign * (lam - lam_before) <= ftol * (1.0 + abs(lam)):
            converged = True
            break
    return lam, converged


def hessian_extremes(J, restarts=32, seed=None, max_iter=1500):
    """Sphere-wide extremes of the tangent-Hessian quadratic form.

    Multi-start ascent; the returned r_max (r_min) is the best over restarts
    and is an inner estimate of the true supremum (infimum).  N = 2 uses an
    exhaustive angular grid instead and is exact to grid refinement.
    """
    if restarts < 1:
        raise ParameterError("restarts must be >= 1")
    if J.n == 2:
        return circle_hessian_extremes(J)
    base = J.seed if seed is None else seed
    best_hi = (-np.inf, False)
    best_lo = (np.inf, False)
    for k in range(restarts):
        rng = make_rng(base, STREAM_RESTART, 1000 + k)
        x0 = sphere.random_point(J.n, rng)
        hi, c1 = _eigenvalue_ascent(J, x0, rng, which="max", max_iter=max_iter)
        lo, c2 = _eigenvalue_ascent(J, x0, rng, which="min", max_iter=max_iter)
        if hi > best_hi[0]:
            best_hi = (hi, c1)
        if lo < best_lo[0]:
            best_lo = (lo, c2)
    # the flag reflects the restarts that produced the reported extremes
    return HessianExtremes(r_max=float(best_hi[0]), r_min=float(best_lo[0]),
                           r_range=float(best_hi[0] - best_lo[0]),
                           restarts=restarts, converged=best_hi[1] and best_lo[1])


def bakry_emery_certificate(spec, extremes):
    """Curvature certificate c = (1 - 1/N) + beta r_min; None unless c > 0."""
    if not extremes.converged:
        raise ParameterError("hessian extremes did not converge; certificate refused")
    c = (1.0 - 1.0 / spec.n) + spec.beta * extremes.r_min
    if c <= 0.0:
        return None
    return Certificate(
        kind=BAKRY_EMERY, lower_bound=0.5 * c,
        inputs={"curvature": c, "r_min": extremes.r_min, "r_max": extremes.r_max,
                "beta": spec.beta, "n": spec.n,
                "heuristic": spec.n > 2})


def _circle_energy_range(J, grid=32768):
    _, pts = _circle_grid_points(grid)
    h = model.energy_many(J, pts)
    hi = _parabolic_refine(h)
    lo = -_parabolic_refine(-h)
    return lo, hi


def poincare_stability_certificate(J, beta, budget=24, seed=None, tol_g=1e-7):
    """All-temperature stability bound (1/2)(1 - 1/N) exp(-2 beta osc H).

    max/min H come from multi-start descents on -H and H (budget restarts
    each); failed descents are tolerated and counted, with the bound flagged
    heuristic since the oscillation is estimated from inside.
    """
    n = J.n
    if n == 2:
        lo, hi = _circle_energy_range(J)
        failures = 0
        heuristic = False
    else:
        base = J.seed if seed is None else seed
        lo = np.inf
        hi = -np.inf
        failures = 0
        neg = model.negated(J)
        for k in range(budget):
            rng = make_rng(base, STREAM_RESTART, 2000 + k)
            x0 = sphere.random_point(n, rng)
            try:
                m = landscape.find_local_minimum(J, x0, tol_g=tol_g, rng=rng)
                lo = min(lo, m.energy)
            except Exception:
                failures += 1
            try:
                m = landscape.find_local_minimum(neg, x0, tol_g=tol_g, rng=rng)
                hi = max(hi, -m.energy)
            except Exception:
                failures += 1
        if not np.isfinite(lo) or not np.isfinite(hi):
            raise ParameterError("all optimizer restarts failed; no oscillation estimate")
        heuristic = True
    osc = hi - lo
    lb = 0.5 * (1.0 - 1.0 / n) * float(np.exp(-2.0 * beta * osc))
    return Certificate(
        kind=POINCARE_STABILITY, lower_bound=lb,
        inputs={"max_h": hi, "min_h": lo, "oscillation": osc, "beta": beta,
                "n": n, "heuristic": heuristic, "failed_restarts": failures})
