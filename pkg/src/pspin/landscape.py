"""Local minima of the energy on the sphere and the critical-point complexity.

Minima are found by Riemannian gradient descent with Armijo backtracking
along renormalized rays (retraction by renormalization; stationary points do
not depend on the retraction).  Each converged point carries a second-order
certificate: the bottom eigenvalue of the tangent Hessian, computed by a
two-stage shifted power iteration on the Hessian operator.

The complexity function theta(p, E) is the exponential growth rate of the
expected number of critical points with energy below E*N: equal to
(1/2) log(p-1) for E >= 0 and

    1/2 + (1/2) log(p-1) - E^2/2 + int_{-2}^{2} rho_sc(x) log|x - E| dx

for E < 0, with rho_sc the unit semicircle density on [-2, 2].  The singular
log integral is evaluated by adaptive quadrature split at x = E.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from . import model, sphere
from .errors import (AnalysisError, ConvergenceError, FlatLandscapeError,
                     ParameterError)
from .rng import STREAM_RESTART, make_rng


@dataclass(frozen=True)
class Minimum:
    location: np.ndarray
    energy: float
    gradient_norm: float
    hessian_min_eigenvalue: float


@dataclass
class MinimaCatalog:
    spec: model.ModelSpec
    minima: list
    dedupe_overlap: float
    restarts_used: int
    failed_restarts: int = 0

    def __len__(self):
        return len(self.minima)

    def __getitem__(self, k):
        return self.minima[k]


def _power_dominant(apply_fn, n, x, rng, tol=1e-12, max_iter=500):
    """Dominant (largest modulus) eigenpair of the tangent operator at x."""
    v = sphere.project_tangent(x, rng.standard_normal(n))
    v /= np.linalg.norm(v)
    lam = 0.0
    converged = False
    for _ in range(max_iter):
        w = apply_fn(v)
        lam_new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0, v, True
        v = sphere.project_tangent(x, w / nw)
        v /= np.linalg.norm(v)
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            lam = lam_new
            converged = True
            break
        lam = lam_new
    return lam, v, converged


def tangent_extreme_eigenpair(J, sigma, which, rng=None, tol=1e-11, max_iter=500):
    """Top or bottom eigenpair of the covariant Hessian on the tangent space.

    Shifted power iteration: first find the dominant-modulus eigenvalue mu,
    then iterate on (|mu| I + Hess) or (|mu| I - Hess) so the sought extreme
    becomes dominant.
    """
    if which not in ("min", "max"):
        raise ParameterError("which must be 'min' or 'max'")
    sigma = np.asarray(sigma, dtype=float)
    rng = rng if rng is not None else make_rng(0)
    apply_h, _, _ = model.spherical_hessian_operator(J, sigma)
    mu, _, conv0 = _power_dominant(apply_h, J.n, sigma, rng, tol=tol, max_iter=max_iter)
    c = abs(mu) * (1.0 + 1e-3) + 1e-12
    if which == "max":
        shifted = lambda v: c * v + apply_h(v)
    else:
        shifted = lambda v: c * v - apply_h(v)
    lam_s, v, conv = _power_dominant(shifted, J.n, sigma, rng, tol=tol, max_iter=max_iter)
    lam = lam_s - c if which == "max" else c - lam_s
    return lam, v, (conv0 and conv)


def _tangent_gradient_norm(J, x):
    g, e = model.grad_and_energy(J, x)
    gs = sphere.project_tangent(x, g)
    return gs, float(np.linalg.norm(gs)), e


def _newton_polish(J, x, target, max_newton=60):
    """Tangent-space Newton iterations; quadratic convergence near a minimum.

    The radial direction is pinned by adding a multiple of x x^T / N, so the
    dense solve is nonsingular while the tangent part is untouched.
    """
    n = J.n
    gs, gn, e = _tangent_gradient_norm(J, x)
    for _ in range(max_newton):
        if gn <= target:
            break
        hess = model.euclidean_hessian_matrix(J, x)
        h_val = model.energy(J, x)
        proj = np.eye(n) - np.outer(x, x) / n
        a = proj @ (hess - (J.p / n) * h_val * np.eye(n)) @ proj
        pin = max(1.0, float(np.abs(np.diag(a)).max()))
        a += pin * np.outer(x, x) / n
        try:
            delta = np.linalg.solve(a, -gs)
        except np.linalg.LinAlgError:
            break
        delta = sphere.project_tangent(x, delta)
        t = 1.0
        improved = False
        for _ in range(30):
            xt = sphere.renormalize(x + t * delta)
            gst, gnt, et = _tangent_gradient_norm(J, xt)
            if gnt < gn:
                x, gs, gn, e = xt, gst, gnt, et
                improved = True
                break
            t *= 0.5
        if not improved:
            break
    return x, gs, gn, e


def find_local_minimum(J, start, tol_g=1e-8, max_iter=5000, rng=None):
    """Riemannian descent with backtracking until |grad| <= tol_g * sqrt(N).

    Armijo gradient descent does the transport; once the gradient is small a
    tangent-space Newton polish drives it to the tolerance (plain descent
    stalls when energy decrements fall below float rounding).  Returns the
    point with its gradient norm and the bottom tangent-Hessian eigenvalue
    (the local-minimum certificate).
    """
    if tol_g <= 0:
        raise ParameterError("tol_g must be > 0")
    n = J.n
    x = sphere.renormalize(np.asarray(start, dtype=float))
    target = tol_g * np.sqrt(n)
    polish_at = max(target, 1e-3 * np.sqrt(n))
    g, e = model.grad_and_energy(J, x)
    gs = sphere.project_tangent(x, g)
    gn = float(np.linalg.norm(gs))
    step = 1.0
    it = 0
    while gn > polish_at and it < max_iter:
        d = -gs
        accepted = False
        t = min(step * 2.0, 1e3 / max(gn, 1e-30))
        for _ in range(60):
            xt = sphere.renormalize(x + t * d)
            et = model.energy(J, xt)
            if et <= e - 1e-4 * t * gn * gn:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        step = t
        x = xt
        g, e = model.grad_and_energy(J, x)
        gs = sphere.project_tangent(x, g)
        gn = float(np.linalg.norm(gs))
        it += 1
    if gn > target:
        x, gs, gn, e = _newton_polish(J, x, target)
    if gn > target:
        raise ConvergenceError(
            f"descent stalled at |grad| = {gn:.3e} (target {target:.3e})")
    lam_min, _, _ = tangent_extreme_eigenpair(J, x, "min", rng=rng)
    return Minimum(location=x, energy=e, gradient_norm=gn,
                   hessian_min_eigenvalue=lam_min)


def default_tol_h(p):
    # curvature-scale proportional slack for the second-order certificate
    return 1e-6 * p * (p - 1)


def catalog_minima(J, restarts, tol_g=1e-8, dedupe_overlap=0.98, seed=None,
                   max_iter=5000):
    """Multi-start minima search, deduplicated by |overlap| and sorted by energy.

    Restart k draws its start from the stream (seed, RESTART, k); failed or
    uncertified restarts are dropped and counted.  For even p the |overlap|
    dedupe identifies sigma with -sigma.
    """
    if restarts < 1:
        raise ParameterError("restarts must be >= 1")
    if np.all(np.asarray(J.entries) == 0.0):
        raise FlatLandscapeError("flat landscape: zero coupling tensor")
    base = J.seed if seed is None else seed
    tol_h = default_tol_h(J.p)
    found = []
    failed = 0
    for k in range(restarts):
        rng = make_rng(base, STREAM_RESTART, k)
        start = sphere.random_point(J.n, rng)
        try:
            m = find_local_minimum(J, start, tol_g=tol_g, max_iter=max_iter, rng=rng)
        except ConvergenceError:
            failed += 1
            continue
        if m.hessian_min_eigenvalue < -tol_h:
            failed += 1
            continue
        found.append(m)
    found.sort(key=lambda m: m.energy)
    kept = []
    for m in found:
        dup = any(abs(sphere.overlap(m.location, q.location)) > dedupe_overlap
                  for q in kept)
        if not dup:
            kept.append(m)
    return MinimaCatalog(spec=J.spec, minima=kept, dedupe_overlap=dedupe_overlap,
                         restarts_used=restarts, failed_restarts=failed)


def semicircle_log_moment(e_val):
    """int_{-2}^{2} rho_sc(x) log|x - E| dx by adaptive quadrature."""
    def f(x):
        return np.sqrt(4.0 - x * x) / (2.0 * np.pi) * np.log(abs(x - e_val))

    pts = [e_val] if -2.0 < e_val < 2.0 else None
    val, _ = integrate.quad(f, -2.0, 2.0, points=pts, limit=300,
                            epsabs=1e-12, epsrel=1e-12)
    return float(val)


def theta(p, e_val):
    """Growth rate of the expected count of critical points below E*N."""
    if p < 3:
        raise ParameterError("p must be >= 3")
    if e_val >= 0.0:
        return 0.5 * np.log(p - 1.0)
    return float(0.5 + 0.5 * np.log(p - 1.0) - e_val * e_val / 2.0
                 + semicircle_log_moment(e_val))


@functools.lru_cache(maxsize=None)
def ground_state_scale(p):
    """E0 > 0 with theta(p, -E0) = 0, found by bisection on (0, 10]."""
    if p < 3:
        raise ParameterError("p must be >= 3")
    f = lambda e: theta(p, -e)
    a, b = 1e-9, 10.0
    fa, fb = f(a), f(b)
    if not (fa > 0.0 > fb):
        raise AnalysisError(
            f"no sign change for the complexity zero: theta({a}) = {fa}, theta({b}) = {fb}")
    return float(optimize.bisect(f, a, b, xtol=1e-9))


def theta_prime_at_root(p, h=1e-5):
    e0 = ground_state_scale(p)
    return (theta(p, -e0 + h) - theta(p, -e0 - h)) / (2.0 * h)


def m_n(p, n, k0):
    """Centering sequence -E0 N + log(N) / (2 theta'(-E0)) - K0."""
    if n < 2:
        raise ParameterError("n must be >= 2")
    e0 = ground_state_scale(p)
    tp = theta_prime_at_root(p)
    return float(-e0 * n + np.log(n) / (2.0 * tp) - k0)
