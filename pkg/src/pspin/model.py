"""Disorder tensor, Hamiltonian and its derivatives on the sphere.

The energy of a configuration sigma on S^{N-1}(sqrt(N)) is the normalized
contraction

    H(sigma) = N^{-(p-1)/2} sum_{i_1..i_p} J_{i_1..i_p} sigma_{i_1} ... sigma_{i_p}

with i.i.d. standard Gaussian couplings J.  The stored tensor is the average
of J over index permutations, which leaves H (and hence its law, with
covariance N * R(sigma, sigma')^p) unchanged while letting gradient and
Hessian contractions exploit symmetry:

    grad_E H = p * scale * (J_sym : sigma^{p-1})
    Hess_E H = p (p-1) * scale * (J_sym : sigma^{p-2})

One contraction cascade J -> order-3 -> matrix -> vector -> scalar therefore
yields Hessian, gradient and energy together and is reused across MCMC steps.

The covariant (sphere) derivatives follow from the tangent projection
P = I - sigma sigma^T / N and the degree-p homogeneity identity
(sigma, grad_E H) = p H:

    grad H  = P grad_E H
    Hess H v = P(Hess_E H v) - (p/N) H v           for tangent v.
"""

from __future__ import annotations

import itertools
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import backends, sphere
from .errors import DimensionMismatchError, ParameterError
from .rng import make_rng

# dense storage refusal threshold (entries), per the desk-scale envelope
MAX_TENSOR_ENTRIES = 10 ** 8

_MAGIC = b"PSPN1"


@dataclass(frozen=True)
class ModelSpec:
    """Degree p >= 3, dimension N >= 2 and inverse temperature beta >= 0."""

    p: int
    n: int
    beta: float = 0.0

    def __post_init__(self):
        if int(self.p) != self.p or int(self.n) != self.n:
            raise ParameterError("p and n must be integers")
        if self.beta < 0 or not np.isfinite(self.beta):
            raise ParameterError(f"beta must be finite and >= 0, got {self.beta}")


@dataclass(frozen=True)
class CouplingTensor:
    """One disorder realization: permutation-symmetric order-p array over [N]^p."""

    spec: ModelSpec
    entries: np.ndarray
    seed: int
    _flat: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        p, n = self.spec.p, self.spec.n
        if self.entries.shape != (n,) * p:
            raise DimensionMismatchError(
                f"entries shape {self.entries.shape} does not match (n,)*p = {(n,) * p}")
        if not np.all(np.isfinite(self.entries)):
            raise ParameterError("tensor entries must be finite")
        ent = np.ascontiguousarray(self.entries, dtype=float)
        ent.setflags(write=False)
        object.__setattr__(self, "entries", ent)
        object.__setattr__(self, "_flat", ent.reshape(-1))

    @property
    def p(self):
        return self.spec.p

    @property
    def n(self):
        return self.spec.n

    @property
    def scale(self):
        return float(self.n) ** (-(self.p - 1) / 2.0)


def _symmetrize(raw, p):
    """Average over index permutations, exactly invariant entry-wise.

    Every member of a permutation orbit reads the same accumulated sum (via
    the sorted canonical index), so the result is bitwise permutation
    symmetric rather than symmetric only up to rounding.
    """
    n = raw.shape[0]
    flat = raw.reshape(-1)
    shape = (n,) * p
    idx = np.stack(np.unravel_index(np.arange(flat.size), shape))
    canon = np.ravel_multi_index(tuple(np.sort(idx, axis=0)), shape)
    orbit_sum = np.zeros(flat.size)
    np.add.at(orbit_sum, canon, flat)
    count = np.zeros(flat.size)
    np.add.at(count, canon, 1.0)
    return (orbit_sum[canon] / count[canon]).reshape(shape)


def sample_disorder(spec, seed):
    """Draw the symmetrized coupling tensor for a given 64-bit seed.

    Deterministic in (p, n, seed); the induced Hamiltonian is equal in law
    to the raw i.i.d.-Gaussian contraction.
    """
    if spec.p < 3:
        raise ParameterError(f"p must be >= 3, got {spec.p}")
    if spec.n < 2:
        raise ParameterError(f"n must be >= 2, got {spec.n}")
    count = spec.n ** spec.p
    if count > MAX_TENSOR_ENTRIES:
        raise ParameterError(
            f"dense tensor would need {count} entries (> {MAX_TENSOR_ENTRIES}); "
            "reduce p or N")
    rng = make_rng(seed)
    raw = rng.standard_normal(count).reshape((spec.n,) * spec.p)
    return CouplingTensor(spec, _symmetrize(raw, spec.p), int(seed))


def zero_tensor(spec):
    """All-zero couplings (flat landscape); test and calibration hook."""
    return CouplingTensor(spec, np.zeros((spec.n,) * spec.p), 0)


def negated(J):
    """Tensor of -H; used for maximization via minimization machinery."""
    return CouplingTensor(J.spec, -np.asarray(J.entries), J.seed)


def _check_dims(J, sigma):
    if sigma.shape[0] != J.n:
        raise DimensionMismatchError(
            f"configuration dim {sigma.shape[0]} != model dim {J.n}")


def energy(J, sigma):
    """H(sigma): normalized contraction of the tensor with sigma, p times."""
    sigma = np.asarray(sigma, dtype=float)
    _check_dims(J, sigma)
    _, e = backends.grad_energy(J._flat, J.n, J.p, sigma)
    return e


def energy_many(J, sigmas):
    """H over a batch of configurations, shape (M, N) -> (M,)."""
    sigmas = np.asarray(sigmas, dtype=float)
    if sigmas.ndim != 2 or sigmas.shape[1] != J.n:
        raise DimensionMismatchError("expected batch of shape (M, N)")
    return backends.energy_many(J._flat, J.n, J.p, sigmas)


def euclidean_gradient(J, sigma):
    """Gradient of the natural extension of H to R^N."""
    sigma = np.asarray(sigma, dtype=float)
    _check_dims(J, sigma)
    g, _ = backends.grad_energy(J._flat, J.n, J.p, sigma)
    return g


def grad_and_energy(J, sigma):
    sigma = np.asarray(sigma, dtype=float)
    _check_dims(J, sigma)
    return backends.grad_energy(J._flat, J.n, J.p, sigma)


def spherical_gradient(J, sigma):
    """Covariant gradient: Euclidean gradient minus its radial component."""
    g = euclidean_gradient(J, sigma)
    return sphere.project_tangent(np.asarray(sigma, dtype=float), g)


TANGENT_CHECK_PER_N = 1e-8


def spherical_hessian_apply(J, sigma, v):
    """Apply the covariant Hessian at sigma to a tangent vector v."""
    sigma = np.asarray(sigma, dtype=float)
    v = np.asarray(v, dtype=float)
    _check_dims(J, sigma)
    if v.shape[0] != J.n:
        raise DimensionMismatchError("tangent vector dimension mismatch")
    if abs(float(v @ sigma)) > TANGENT_CHECK_PER_N * J.n * max(1.0, float(np.linalg.norm(v))):
        raise ParameterError("v is not tangent at sigma")
    _, mat, vec, e = backends.cascade(J._flat, J.n, J.p, sigma)
    s = J.scale
    h = s * J.p * (J.p - 1) * (mat.reshape(J.n, J.n) @ v) - (J.p / J.n) * (s * e) * v
    return sphere.project_tangent(sigma, h)


def euclidean_hessian_matrix(J, sigma):
    """Dense Hessian of the R^N extension at sigma (N x N, symmetric)."""
    sigma = np.asarray(sigma, dtype=float)
    _check_dims(J, sigma)
    _, mat, _, _ = backends.cascade(J._flat, J.n, J.p, sigma)
    return J.scale * J.p * (J.p - 1) * mat.reshape(J.n, J.n)


def spherical_hessian_operator(J, sigma):
    """Return (apply, energy, euclid_grad): one cascade, many Hessian applies.

    ``apply(v)`` realizes P(Hess_E v) - (p/N) H v followed by tangent
    projection, with the cascade at sigma computed once up front.
    """
    sigma = np.asarray(sigma, dtype=float)
    _check_dims(J, sigma)
    _, mat, vec, e = backends.cascade(J._flat, J.n, J.p, sigma)
    s = J.scale
    n, p = J.n, J.p
    hmat = s * p * (p - 1) * mat.reshape(n, n)
    h_val = s * e
    g = s * p * vec

    def apply(v):
        w = hmat @ v - (p / n) * h_val * v
        return w - (float(w @ sigma) / n) * sigma

    return apply, h_val, g


overlap = sphere.overlap


def write_tensor(path, J):
    """Binary format: magic 'PSPN1', LE u32 p, u32 N, u64 seed, N^p LE f64 entries."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IIQ", J.p, J.n, J.seed & 0xFFFFFFFFFFFFFFFF))
        fh.write(np.ascontiguousarray(J.entries, dtype="<f8").tobytes(order="C"))


def read_tensor(path, beta=0.0):
    """Read a tensor file written by write_tensor; beta is supplied by the caller."""
    with open(path, "rb") as fh:
        magic = fh.read(5)
        if magic != _MAGIC:
            raise ParameterError(f"bad magic {magic!r}; not a tensor file")
        p, n, seed = struct.unpack("<IIQ", fh.read(16))
        count = n ** p
        if count > MAX_TENSOR_ENTRIES:
            raise ParameterError("tensor file exceeds the dense storage limit")
        data = np.frombuffer(fh.read(count * 8), dtype="<f8")
        if data.size != count:
            raise ParameterError("tensor file truncated")
    entries = data.astype(float).reshape((n,) * p)
    return CouplingTensor(ModelSpec(p, n, beta), entries, seed)
