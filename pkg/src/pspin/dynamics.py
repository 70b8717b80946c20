"""Diffusion sampling on the sphere: projected Euler-Maruyama and exact MALA.

The generator is L = (1/2)(Laplacian - beta g(grad H, grad .)), whose
diffusion has invariant density proportional to exp(-beta H) against the
normalized volume measure.  One unadjusted step from x is

    z = x - (beta/2) grad H(x) dt + P_x xi sqrt(dt),    xi ~ N(0, I_N),
    x' = sqrt(N) z / |z|,

i.e. tangent drift, tangent noise of covariance dt * Id on T_x, then radial
renormalization.  The renormalization bias is O(dt); the Metropolis-adjusted
variant removes it entirely and is the correctness anchor.

MALA proposal density.  Both drift and noise are tangent, so the
pre-renormalization point z lies on the affine tangent plane at x and the
proposal is the radial projection of an (N-1)-dimensional Gaussian on that
plane.  Writing u = z(y) - x with z(y) = N y / (x, y) the plane point that
projects to y, the proposal density with respect to the sphere's surface
measure is

    q(y | x) = (2 pi dt)^{-(N-1)/2} exp(-|u - mu(x)|^2 / (2 dt))
               * (1 + |u|^2 / N)^{N/2},

where mu(x) = -(beta/2) dt P_x grad H(x) and the last factor is the area
Jacobian of the radial projection (gnomonic map).  Proposals with
(x, y) <= 0 have density zero.  The acceptance ratio built from these
densities makes the Gibbs measure exactly stationary, independent of dt.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import backends, model, sets, sphere
from .errors import IntegrationError, ParameterError
from .rng import STREAM_CHAIN, STREAM_PILOT, STREAM_START, derive_seed, make_rng

PROJECTED_EULER = "projected_euler"
MALA = "mala"

_BLOCK = 1024


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float
    scheme: str = MALA
    steps: int = 1000
    thin: int = 1
    rng_seed: int = 0

    def __post_init__(self):
        if self.dt <= 0:
            raise ParameterError("dt must be > 0")
        if self.scheme not in (PROJECTED_EULER, MALA):
            raise ParameterError(f"unknown scheme {self.scheme!r}")
        if self.steps < 1 or self.thin < 1:
            raise ParameterError("steps and thin must be >= 1")


@dataclass
class Trajectory:
    spec: model.ModelSpec
    config: IntegratorConfig
    samples: np.ndarray                 # (K, N) recorded states
    observables: dict = field(default_factory=dict)   # name -> (K,) series
    acceptance_rate: float | None = None

    @property
    def energies(self):
        return self.observables["energy"]


def _drift_and_noise_step(J, beta, state, dt, xi):
    n = J.n
    gs = model.spherical_gradient(J, state)
    eta = sphere.project_tangent(state, xi)
    z = state - 0.5 * beta * dt * gs + np.sqrt(dt) * eta
    return sphere.renormalize(z)


def langevin_step(J, beta, state, dt, rng=None, noise=None):
    """One projected Euler-Maruyama step; `noise` overrides the N(0, I) draw."""
    if dt <= 0:
        raise ParameterError("dt must be > 0")
    state = np.asarray(state, dtype=float)
    if noise is None:
        noise = rng.standard_normal(J.n)
    out = _drift_and_noise_step(J, beta, state, dt, np.asarray(noise, dtype=float))
    if not np.all(np.isfinite(out)):
        raise IntegrationError("non-finite state after Langevin step", step=0)
    return out


def proposal_log_density(J, beta, x, y, dt):
    """log q(y | x) for the MALA proposal, up to the (2 pi dt) normalization.

    The dropped constant is symmetric in (x, y) and cancels in MH ratios.
    Returns -inf when y is outside the forward hemisphere of x.
    """
    n = J.n
    sxy = float(x @ y)
    if sxy <= 0.0:
        return -np.inf
    u = (n / sxy) * y - x
    mu = -0.5 * beta * dt * model.spherical_gradient(J, x)
    d = u - mu
    return -float(d @ d) / (2.0 * dt) + 0.5 * n * np.log1p(float(u @ u) / n)


def mala_transition_density(J, beta, x, y, dt):
    """k(x -> y): proposal density times acceptance probability (y != x)."""
    lqf = proposal_log_density(J, beta, x, y, dt)
    if lqf == -np.inf:
        return 0.0
    lqr = proposal_log_density(J, beta, y, x, dt)
    la = min(0.0, -beta * (model.energy(J, y) - model.energy(J, x)) + lqr - lqf)
    return float(np.exp(lqf + la))


def mala_step(J, beta, state, dt, rng=None, noise=None, uniform=None, region=None):
    """One Metropolis-adjusted step; returns (state, accepted).

    Test hooks: `noise` injects the N(0, I) draw, `uniform` the acceptance
    variate.  With `region` set, proposals leaving the region are rejected,
    targeting the Gibbs measure conditioned on the region.
    """
    if dt <= 0:
        raise ParameterError("dt must be > 0")
    state = np.asarray(state, dtype=float)
    if noise is None:
        noise = rng.standard_normal(J.n)
    y = _drift_and_noise_step(J, beta, state, dt, np.asarray(noise, dtype=float))
    if not np.all(np.isfinite(y)):
        raise IntegrationError("non-finite MALA proposal", step=0)
    if region is not None and not sets.contains(region, y):
        return state, False
    lqf = proposal_log_density(J, beta, state, y, dt)
    lqr = proposal_log_density(J, beta, y, state, dt)
    if lqr == -np.inf or lqf == -np.inf:
        return state, False
    la = -beta * (model.energy(J, y) - model.energy(J, state)) + lqr - lqf
    u = rng.random() if uniform is None else uniform
    if u <= 0.0 or np.log(u) < la:
        return y, True
    return state, False


def run_blocks(J, beta, dt, x0, steps, seed, scheme=MALA, region=None, record_every=1):
    """Drive the backend block kernels; returns (positions, energies, acc_rate).

    Noise is pre-drawn per block from the Philox stream for `seed`, so a chain
    is reproducible independent of the block size.
    """
    n = J.n
    rng = make_rng(seed)
    x = np.asarray(x0, dtype=float).copy()
    use_region = region is not None
    center = region.center if use_region else np.zeros(n)
    q_lo = region.q_low if use_region else -1.0
    q_hi = region.q_high if use_region else 1.0

    kept_pos = []
    kept_e = []
    accepted = 0
    done = 0
    while done < steps:
        b = min(_BLOCK, steps - done)
        normals = rng.standard_normal((b, n))
        if scheme == MALA:
            logu = np.log(rng.random(b))
            pos, energies, acc, _, _ = backends.mala_block(
                J._flat, n, J.p, beta, dt, x, normals, logu,
                center, q_lo, q_hi, use_region)
            accepted += int(acc.sum())
        else:
            pos, energies = backends.langevin_block(J._flat, n, J.p, beta, dt, x, normals)
        finite = np.isfinite(pos).all(axis=1)
        if not finite.all():
            raise IntegrationError("non-finite state in chain",
                                   step=done + int(np.argmin(finite)))
        idx = np.arange(b)
        keep = idx[(done + idx + 1) % record_every == 0]
        kept_pos.append(pos[keep])
        kept_e.append(energies[keep])
        x = pos[-1].copy()
        done += b
    positions = np.concatenate(kept_pos) if kept_pos else np.empty((0, n))
    energies = np.concatenate(kept_e) if kept_e else np.empty(0)
    rate = accepted / steps if scheme == MALA else None
    return positions, energies, rate, x


def run_chain(J, beta, config, start):
    """Iterate the configured scheme, recording every `thin` steps.

    `start` is a configuration or a RegionSpec (uniform start on the region).
    The recorded observables are the energy and the overlap with the starting
    point.  Deterministic given (config.rng_seed, start).
    """
    if isinstance(start, sets.RegionSpec):
        x0 = sets.sample_uniform_region(start, make_rng(config.rng_seed, STREAM_START))
    else:
        x0 = sphere.check_point(np.asarray(start, dtype=float))
    pos, energies, rate, _ = run_blocks(
        J, beta, config.dt, x0, config.steps,
        derive_seed(config.rng_seed, STREAM_CHAIN),
        scheme=config.scheme, record_every=config.thin)
    ref = x0
    ovl = pos @ ref / J.n
    return Trajectory(
        spec=J.spec, config=config, samples=pos,
        observables={"energy": energies, "overlap_ref": np.asarray(ovl)},
        acceptance_rate=rate)


def tune_dt(J, beta, start, seed, dt0=0.1, target=(0.5, 0.7), pilot_steps=60,
            max_rounds=40, region=None):
    """Double/halve dt until the MALA pilot acceptance lands in `target`.

    dt is capped at 4N: beyond that the tangent proposal saturates at
    near-orthogonal jumps whose angular spread shrinks, which slows mixing
    even though acceptance stays high (at beta ~ 0 acceptance is ~1 for any
    dt, so an uncapped doubling search would run away).
    """
    dt = min(dt0, 4.0 * J.n)
    dt_max = 4.0 * J.n
    lo, hi = target
    x0 = np.asarray(start, dtype=float)
    for round_idx in range(max_rounds):
        _, _, rate, _ = run_blocks(J, beta, dt, x0, pilot_steps,
                                   derive_seed(seed, STREAM_PILOT, round_idx),
                                   scheme=MALA, region=region)
        if rate < lo:
            dt *= 0.5
        elif rate > hi:
            if dt >= dt_max:
                return dt_max
            dt = min(dt * 2.0, dt_max)
        else:
            return dt
    return dt


def trajectory_to_csv(path, traj, coords=False):
    """CSV export: step,energy,overlap_ref[,coord_0..coord_{N-1}]."""
    k, n = traj.samples.shape
    thin = traj.config.thin
    with open(path, "w") as fh:
        head = "step,energy,overlap_ref"
        if coords:
            head += "," + ",".join(f"coord_{i}" for i in range(n))
        fh.write(head + "\n")
        for i in range(k):
            row = [str((i + 1) * thin), repr(float(traj.observables["energy"][i])),
                   repr(float(traj.observables["overlap_ref"][i]))]
            if coords:
                row += [repr(float(v)) for v in traj.samples[i]]
            fh.write(",".join(row) + "\n")
