"""Caps and bands on the sphere: membership, normalized volume, uniform sampling.

For a uniform point on S^{N-1}(sqrt(N)) and a fixed center x, the overlap
q = R(x, .) has marginal density

    c_N (1 - q^2)^{(N-3)/2}  on [-1, 1],   c_N = Gamma(N/2) / (sqrt(pi) Gamma((N-1)/2)),

so a cap {R >= q0} or band {R in [q_lo, q_hi]} has normalized volume equal to
a 1D integral of that density.  The density is evaluated through log-gamma
expressions so that large N does not underflow; volumes use adaptive
quadrature, and sampling inverts the Beta-function form of the CDF
(q^2 ~ Beta(1/2, (N-1)/2) on either half).

Membership uses closed intervals with exact comparisons: the boundaries have
measure zero, so the convention is inconsequential.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from . import sphere
from .errors import DimensionMismatchError, ParameterError, RegionError

CAP = "cap"
BAND = "band"


@dataclass(frozen=True)
class RegionSpec:
    """Overlap-defined subset of the sphere around a center point.

    A cap is {R(center, .) >= q_low} (q_high pinned to 1); a band is
    {R(center, .) in [q_low, q_high]}.
    """

    kind: str
    center: np.ndarray
    q_low: float
    q_high: float = 1.0

    def __post_init__(self):
        if self.kind not in (CAP, BAND):
            raise ParameterError(f"region kind must be {CAP!r} or {BAND!r}")
        if not (-1.0 <= self.q_low <= self.q_high <= 1.0):
            raise ParameterError(
                f"require -1 <= q_low <= q_high <= 1, got [{self.q_low}, {self.q_high}]")
        if self.kind == CAP and self.q_high != 1.0:
            raise ParameterError("cap regions must have q_high = 1")
        c = np.ascontiguousarray(self.center, dtype=float)
        c.setflags(write=False)
        object.__setattr__(self, "center", c)

    @property
    def n(self):
        return self.center.shape[0]

    @classmethod
    def cap(cls, center, q):
        return cls(CAP, center, float(q), 1.0)

    @classmethod
    def band(cls, center, q, eps):
        return cls(BAND, center, max(-1.0, float(q - eps)), min(1.0, float(q + eps)))

    @classmethod
    def band_edges(cls, center, q_low, q_high):
        return cls(BAND, center, float(q_low), float(q_high))


def contains(region, sigma):
    """True iff the overlap with the region center lies in [q_low, q_high]."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape[0] != region.n:
        raise DimensionMismatchError("configuration dim does not match region center")
    r = sphere.overlap(region.center, sigma)
    return region.q_low <= r <= region.q_high


def log_marginal_norm(n):
    """log c_N for the overlap marginal density."""
    return special.gammaln(n / 2.0) - 0.5 * np.log(np.pi) - special.gammaln((n - 1) / 2.0)


def marginal_logpdf(q, n):
    """Log density of the overlap coordinate of a uniform sphere point."""
    q = np.asarray(q, dtype=float)
    with np.errstate(divide="ignore"):
        body = 0.5 * (n - 3.0) * np.log1p(-q * q)
    return log_marginal_norm(n) + body


def overlap_cdf(q, n):
    """P(R <= q) for the uniform overlap marginal, via the incomplete Beta form."""
    q = np.asarray(q, dtype=float)
    a, b = (n - 1) / 2.0, 0.5
    tail = 0.5 * special.betainc(a, b, np.clip(1.0 - q * q, 0.0, 1.0))
    return np.where(q >= 0.0, 1.0 - tail, tail)


def _overlap_ppf(u, n):
    # inverse of overlap_cdf, elementwise for u in (0, 1)
    u = np.asarray(u, dtype=float)
    a, b = (n - 1) / 2.0, 0.5
    upper = u >= 0.5
    tail = np.where(upper, 2.0 * (1.0 - u), 2.0 * u)
    tail = np.clip(tail, 0.0, 1.0)
    q = np.sqrt(np.clip(1.0 - special.betaincinv(a, b, tail), 0.0, 1.0))
    return np.where(upper, q, -q)


def region_volume(region, n):
    """Normalized volume of the region: quadrature of the overlap marginal.

    Absolute error <= 1e-10; an empty interval gives 0.
    """
    if n < 2:
        raise ParameterError("n must be >= 2")
    lo, hi = region.q_low, region.q_high
    if lo >= hi:
        return 0.0
    if lo <= -1.0 and hi >= 1.0:
        return 1.0

    def dens(q):
        return float(np.exp(marginal_logpdf(q, n)))

    val, _ = integrate.quad(dens, lo, hi, epsabs=1e-12, epsrel=1e-12, limit=200)
    return float(min(max(val, 0.0), 1.0))


def sample_uniform_region(region, rng, size=None):
    """Uniform draw(s) on the region.

    The overlap coordinate q comes from the truncated marginal (inverse CDF);
    the orthogonal part is uniform on the sub-sphere, and the point is
    sigma = q sqrt(N) c_hat + sqrt(N (1 - q^2)) w  with w a unit vector
    orthogonal to the center.  Outputs satisfy membership and the norm
    invariant by construction.
    """
    n = region.n
    flo = float(overlap_cdf(region.q_low, n))
    fhi = float(overlap_cdf(region.q_high, n))
    if fhi - flo <= 0.0:
        raise RegionError("zero-volume region cannot be sampled")
    m = 1 if size is None else int(size)
    u = flo + (fhi - flo) * rng.random(m)
    q = _overlap_ppf(u, n)
    q = np.clip(q, region.q_low, region.q_high)

    chat = region.center / np.linalg.norm(region.center)
    g = rng.standard_normal((m, n))
    g -= np.outer(g @ chat, chat)
    norms = np.linalg.norm(g, axis=1)
    # a zero residual is a probability-zero event; regenerate defensively
    bad = norms == 0.0
    while np.any(bad):
        g[bad] = rng.standard_normal((int(bad.sum()), n))
        g[bad] -= np.outer(g[bad] @ chat, chat)
        norms = np.linalg.norm(g, axis=1)
        bad = norms == 0.0
    w = g / norms[:, None]
    pts = (np.sqrt(n) * q)[:, None] * chat + (np.sqrt(n * (1.0 - q * q)))[:, None] * w
    return pts[0] if size is None else pts


def full_sphere_sample(n, rng, size=None):
    """Uniform draw(s) on the whole sphere of radius sqrt(N)."""
    m = 1 if size is None else int(size)
    g = rng.standard_normal((m, n))
    g *= (np.sqrt(n) / np.linalg.norm(g, axis=1))[:, None]
    return g[0] if size is None else g


def region_to_dict(region):
    return {"kind": region.kind, "q_low": region.q_low, "q_high": region.q_high}
