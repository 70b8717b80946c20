"""Geometry helpers for the sphere of radius sqrt(N) in R^N.

Points live on S^{N-1}(sqrt(N)) = {x : sum x_i^2 = N}; the metric is the one
induced from R^N, so tangent norms and inner products are plain Euclidean.
Configurations and tangent vectors are bare float64 arrays; the invariants
(norm sqrt(N), tangency) are enforced at operation boundaries.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatchError, ParameterError

NORM_RTOL = 1e-10        # relative tolerance on sum(x^2) = N
TANGENT_ATOL_PER_N = 1e-10   # |<v, x>| <= tol * N


def check_point(x):
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    s = float(x @ x)
    if not np.isfinite(s) or abs(s - n) > NORM_RTOL * n * 10:
        raise ParameterError(f"point is not on the radius-sqrt(N) sphere: |x|^2 = {s}, N = {n}")
    return x


def check_same_dim(a, b):
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatchError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")


def overlap(a, b):
    """Normalized inner product (1/N) sum_i a_i b_i; in [-1, 1] for sphere points."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    check_same_dim(a, b)
    return float(a @ b) / a.shape[0]


def project_tangent(x, v):
    """Remove the radial component of v at x: v - (<v,x>/N) x."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    check_same_dim(x, v)
    n = x.shape[0]
    return v - (float(v @ x) / n) * x


def is_tangent(x, v, atol_per_n=TANGENT_ATOL_PER_N):
    return abs(float(np.asarray(v) @ np.asarray(x))) <= atol_per_n * x.shape[0]


def renormalize(x):
    """Radially project x back to the sphere of radius sqrt(N)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    return x * (np.sqrt(n) / np.linalg.norm(x))


def random_point(n, rng):
    """Uniform point on S^{N-1}(sqrt(N))."""
    g = rng.standard_normal(n)
    return renormalize(g)


def random_tangent(x, rng, unit=True):
    """Random tangent direction at x (unit Euclidean norm by default)."""
    v = project_tangent(x, rng.standard_normal(x.shape[0]))
    if unit:
        v = v / np.linalg.norm(v)
    return v


def geodesic(x, v, t):
    """Unit-speed geodesic from x in tangent direction v (any nonzero length).

    gamma(t) = cos(t/sqrt(N)) x + sin(t/sqrt(N)) sqrt(N) v_hat, so that
    gamma(0) = x and |gamma'(0)| = 1.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    vn = np.linalg.norm(v)
    if vn == 0.0:
        raise ParameterError("geodesic direction must be nonzero")
    vh = np.asarray(v, dtype=float) / vn
    rt = t / np.sqrt(n)
    return np.cos(rt) * x + np.sin(rt) * np.sqrt(n) * vh


def geodesic_distance(a, b):
    """Arc distance sqrt(N) * arccos(R(a, b)) between sphere points."""
    r = np.clip(overlap(a, b), -1.0, 1.0)
    return np.sqrt(a.shape[0]) * float(np.arccos(r))


def cap_distance(sigma, center, q):
    """Geodesic distance from sigma to the cap {R(center, .) >= q}.

    Closed form: sqrt(N) * max(0, arccos(R(sigma, center)) - arccos(q)).
    """
    n = np.asarray(sigma).shape[0]
    r = np.clip(overlap(sigma, center), -1.0, 1.0)
    return np.sqrt(n) * max(0.0, float(np.arccos(r)) - float(np.arccos(np.clip(q, -1.0, 1.0))))
