"""Spectral-gap estimation: exact circle solver, chain diagnostics, bounds.

Gap convention.  Everything in this package reports the gap of -L where
L = (1/2)(Laplacian - beta g(grad H, grad .)).  With this convention the
zero-coupling (or beta = 0) gap is (1/2)(1 - 1/N) — one half of the sphere
Laplacian gap — which pins the factor of two unambiguously: variational and
conductance expressions built from the Dirichlet form
E(f, f) = int g(grad f, grad f) dpi are divided by two before being reported.
Every estimate carries the convention tag.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import eigsh

from . import model, sets, sphere
from .errors import (AnalysisError, ConductanceConditionError, ParameterError)

GAP_CONVENTION = "gap of -L, L = (1/2)(laplacian - beta * g(grad H, grad .))"

EXACT = "Exact"
UPPER = "UpperBound"
LOWER = "LowerBound"
POINT = "PointEstimate"


@dataclass(frozen=True)
class GapEstimate:
    value: float
    direction: str
    method: str
    std_error: float | None = None
    discretization_error: float | None = None
    convention: str = GAP_CONVENTION

    def __post_init__(self):
        if self.value < 0:
            raise ParameterError("gap estimates are nonnegative")
        if self.direction == EXACT and self.discretization_error is None:
            raise ParameterError("Exact estimates must carry a discretization error")

    def to_record(self, seed=None, spec=None):
        rec = {"value": self.value, "direction": self.direction, "method": self.method,
               "std_error": self.std_error, "convention": self.convention}
        if self.discretization_error is not None:
            rec["discretization_error"] = self.discretization_error
        if seed is not None:
            rec["seed"] = seed
        if spec is not None:
            rec["spec"] = {"p": spec.p, "n": spec.n, "beta": spec.beta}
        return rec


def with_error(est, std_error):
    return replace(est, std_error=std_error)


def _circle_hamiltonian(J, thetas):
    pts = np.sqrt(2.0) * np.column_stack([np.cos(thetas), np.sin(thetas)])
    return model.energy_many(J, pts)


def _circle_eig(J, beta, m):
    """Smallest nonzero eigenvalue of -L on the radius-sqrt(2) circle, m nodes.

    Conservative second-order scheme for -(1/(2R^2)) w^{-1} (w f')' with
    w = exp(-beta H), symmetrized by the similarity transform D^{1/2} . D^{-1/2};
    the transformed matrix has O(1) entries even at large beta because only
    differences of H enter the exponents.  Also returns an absolute rounding
    floor: eigenvalues below eps * ||B|| are not resolvable in float64.
    """
    h = 2.0 * np.pi / m
    nodes = h * np.arange(m)
    mids = nodes + 0.5 * h
    hn = _circle_hamiltonian(J, nodes)
    hm = _circle_hamiltonian(J, mids)

    c = 1.0 / (4.0 * h * h)   # 1/(2 R^2 h^2) with R^2 = 2
    ip = np.arange(m)
    inext = (ip + 1) % m
    off = -c * np.exp(beta * (0.5 * (hn + hn[inext]) - hm))
    diag = c * (np.exp(beta * (hn - hm)) + np.exp(beta * (hn - hm[ip - 1])))
    b = sparse.csr_matrix(
        (np.concatenate([diag, off, off]),
         (np.concatenate([ip, ip, inext]), np.concatenate([ip, inext, ip]))),
        shape=(m, m))
    shift = 1e-8 * float(diag.max())
    vals = eigsh(b, k=2, sigma=-shift, which="LM", v0=np.ones(m),
                 return_eigenvectors=False)
    vals = np.sort(vals)
    floor = 64.0 * np.finfo(float).eps * float(diag.max())
    return max(float(vals[1]), 0.0), floor


def exact_gap_circle(J, beta, grid_points=4096):
    """Exact (discretized) gap of -L for N = 2, with Richardson error estimate."""
    if J.spec.n != 2:
        raise ParameterError("exact_gap_circle requires N = 2")
    if grid_points < 64:
        raise ParameterError("grid_points must be >= 64")
    lam_c, _ = _circle_eig(J, beta, grid_points // 2)
    lam_f, floor = _circle_eig(J, beta, grid_points)
    value = max(lam_f + (lam_f - lam_c) / 3.0, 0.0)
    err = abs(lam_f - lam_c) / 3.0 + floor
    return GapEstimate(value, EXACT, "circle_fd", discretization_error=err)


def autocorrelation_time(series, c=6.0):
    """Integrated autocorrelation time with a self-consistent window.

    tau(W) = 1 + 2 sum_{t<=W} rho(t); the window is the smallest W with
    W >= c * tau(W).  Returns (tau, std_error) with the standard
    sqrt(2(2W+1)/n) * tau error.  An i.i.d. series gives tau ~= 1.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < 100:
        raise ParameterError("series must have at least 100 entries")
    x = x - x.mean()
    var = float(x @ x) / n
    if var == 0.0:
        raise AnalysisError("autocorrelation time undefined for a constant series")
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(x, nfft)
    acf = np.fft.irfft(f * np.conj(f), nfft)[:n].real
    rho = acf / acf[0]

    tau = 1.0
    w = 1
    for w in range(1, n // 2):
        tau = 1.0 + 2.0 * float(rho[1:w + 1].sum())
        if w >= c * tau:
            break
    err = tau * np.sqrt(2.0 * (2.0 * w + 1.0) / n)
    return float(max(tau, 0.0)), float(err)


class CoordinateFunction:
    """Test function f(sigma) = sigma_i; an eigenfunction at beta = 0."""

    def __init__(self, index):
        self.index = index

    def value(self, sigma):
        return float(sigma[self.index])

    def values(self, samples):
        return samples[:, self.index]

    def euclidean_gradient(self, sigma):
        g = np.zeros_like(sigma)
        g[self.index] = 1.0
        return g

    def sq_tangent_gradients(self, samples):
        # |P e_i|^2 = 1 - sigma_i^2 / N
        n = samples.shape[1]
        return 1.0 - samples[:, self.index] ** 2 / n


def _generic_sq_tangent_gradients(test_fn, samples):
    n = samples.shape[1]
    out = np.empty(samples.shape[0])
    for i, s in enumerate(samples):
        g = sphere.project_tangent(s, np.asarray(test_fn.euclidean_gradient(s), dtype=float))
        out[i] = float(g @ g)
    return out


def rayleigh_upper_bound(J, beta, test_fn, chain, blocks=20):
    """Variational upper bound (1/2) E(f, f) / Var f from chain averages.

    The chain must target the Gibbs measure (MALA).  The jackknife error is
    over contiguous blocks so autocorrelation inflates the error rather than
    hiding it.
    """
    samples = chain.samples
    k = samples.shape[0]
    if k < blocks * 2:
        raise ParameterError("chain too short for the requested jackknife")
    if hasattr(test_fn, "values"):
        f = np.asarray(test_fn.values(samples), dtype=float)
    else:
        f = np.array([test_fn.value(s) for s in samples], dtype=float)
    if hasattr(test_fn, "sq_tangent_gradients"):
        g2 = np.asarray(test_fn.sq_tangent_gradients(samples), dtype=float)
    else:
        g2 = _generic_sq_tangent_gradients(test_fn, samples)

    var = float(f.var())
    if var <= 0.0 or not np.isfinite(var):
        raise AnalysisError("test function has zero variance under the chain")
    ratio = 0.5 * float(g2.mean()) / var

    edges = np.linspace(0, k, blocks + 1, dtype=int)
    loo = []
    for b in range(blocks):
        mask = np.ones(k, dtype=bool)
        mask[edges[b]:edges[b + 1]] = False
        vb = float(f[mask].var())
        if vb <= 0:
            raise AnalysisError("test function variance degenerate in a jackknife block")
        loo.append(0.5 * float(g2[mask].mean()) / vb)
    loo = np.asarray(loo)
    err = float(np.sqrt((blocks - 1) / blocks * ((loo - loo.mean()) ** 2).sum()))
    return GapEstimate(ratio, UPPER, "rayleigh", std_error=err)


def eta(x):
    """Smooth shell profile: exp(1 - 1/(1 - (x-1)^2)) on (0, 1], 0 at x = 0.

    eta(0) = 0, eta(1) = 1 and sup |eta'| <= 3 on [0, 1].
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ParameterError("eta is defined on [0, 1]")
    u = arr - 1.0
    body = 1.0 - u * u
    with np.errstate(divide="ignore"):
        out = np.exp(1.0 - 1.0 / np.where(body > 0.0, body, np.inf))
    out = np.where(arr > 0.0, out, 0.0)
    return float(out) if np.ndim(x) == 0 else out


def conductance_upper_bound(pi_a, pi_aeps_c, pi_shell, eps):
    """Bottleneck upper bound on the gap from cap/shell/complement masses.

    Dirichlet-form value 9 eps^{-2} pi(shell) / (pi(A) pi(A_eps^c) - 4 pi(shell)),
    halved for the -L convention.  Requires the denominator to be positive.
    """
    for name, v in (("pi_a", pi_a), ("pi_aeps_c", pi_aeps_c), ("pi_shell", pi_shell)):
        if not (0.0 <= v <= 1.0):
            raise ParameterError(f"{name} must be a probability, got {v}")
    if eps <= 0:
        raise ParameterError("eps must be > 0")
    denom = pi_a * pi_aeps_c - 4.0 * pi_shell
    if denom <= 0.0:
        raise ConductanceConditionError(
            "conductance condition violated: pi(A) pi(A_eps^c) <= 4 pi(shell)")
    value = 0.5 * 9.0 * pi_shell / (eps * eps * denom)
    return GapEstimate(value, UPPER, "conductance")


def conductance_test_function(region, eps, sigma, pi_a):
    """Piecewise test function for the bottleneck bound around a cap A.

    Value -pi(A^c) on A, pi(A) outside the eps-enlargement, and
    -pi(A^c) + eta(d(sigma, A)/eps) across the shell; continuous because the
    jump pi(A) + pi(A^c) equals eta(1) = 1.
    """
    if region.kind != sets.CAP:
        raise ParameterError("the conductance test function is defined for caps")
    n = region.n
    r = np.sqrt(n) * float(np.arccos(np.clip(region.q_low, -1.0, 1.0)))
    if r + eps >= np.pi * np.sqrt(n):
        raise ParameterError("eps too large: cap radius + eps exceeds the injectivity radius")
    d = sphere.cap_distance(np.asarray(sigma, dtype=float), region.center, region.q_low)
    if d <= 0.0:
        return -(1.0 - pi_a)
    if d >= eps:
        return pi_a
    return -(1.0 - pi_a) + float(eta(d / eps))
