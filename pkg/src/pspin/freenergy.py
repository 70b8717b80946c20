"""Restricted partition functions and free energies over caps and bands.

F(A) = (1/N) log Z(A) with Z(A) = int_A exp(-beta H) dV against the
normalized volume measure, so F(full sphere) = 0 at beta = 0.

Two estimators:

* uniform importance — Z(A) = V(A) * E_{uniform on A}[exp(-beta H)], with the
  log-mean-exp evaluated stably and a delete-one jackknife on the log.  Cheap
  and unbiased-in-the-limit, but the weights degenerate once beta sqrt(N) is
  large.

* annealed (stepping stone) — a geometric inverse-temperature ladder
  0 = b_0 < b_1 < ... < b_K = beta with
  Z(A; b_{k+1}) / Z(A; b_k) = E_{b_k, A}[exp(-(b_{k+1} - b_k) H)], each rung
  averaged over a MALA chain confined to A (proposals leaving A are
  rejected).  Rungs whose log-weight variance exceeds 0.5 are split at the
  midpoint (bounded number of splits), and the per-rung step size is tuned by
  a short acceptance pilot.  Recommended once beta sqrt(N) > ~8.

Band widths follow the low-temperature construction: order N^{-1/2} bands in
profiles (default eps = 2/sqrt(N)) and an order-1 parameter in the cap/shell
split used by ratio experiments.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import logsumexp

from . import dynamics, model, sets, sphere
from .errors import ConfigError, ParameterError, RegionError
from .rng import STREAM_SAMPLER, derive_seed, make_rng

UNIFORM = "uniform"
ANNEALED = "annealed"
AUTO = "auto"

MIN_BUDGET = 1000
ESS_RELIABLE = 50.0


@dataclass
class FreeEnergyEstimate:
    value: float
    std_error: float
    method: str
    region: sets.RegionSpec | None      # None means the full sphere
    beta: float
    ess: float = np.inf
    reliable: bool = True

    def __post_init__(self):
        if self.std_error < 0:
            raise ParameterError("std_error must be >= 0")


class BandProfile(NamedTuple):
    points: list                        # [(q, FreeEnergyEstimate)]
    q_star: float                       # grid argmax of the free energy


def _log_volume(region, n):
    if region is None:
        return 0.0
    v = sets.region_volume(region, n)
    if v <= 0.0:
        raise RegionError("zero-volume region")
    return float(np.log(v))


def _draw_uniform(region, n, rng, size):
    if region is None:
        return sets.full_sphere_sample(n, rng, size=size)
    return sets.sample_uniform_region(region, rng, size=size)


def _log_mean_exp_jackknife(logw):
    """(log mean exp, delete-one jackknife std error, ESS) for i.i.d. weights."""
    m = logw.size
    lse = float(logsumexp(logw))
    shift = logw.max()
    w = np.exp(logw - shift)
    total = float(w.sum())
    ess = total * total / float((w * w).sum())
    if m < 2:
        return lse - np.log(m), 0.0, ess
    # leave-one-out log means from the total weight
    with np.errstate(divide="ignore"):
        loo = shift + np.log(np.maximum(total - w, 0.0)) - np.log(m - 1)
    mean_loo = loo.mean()
    var = (m - 1) / m * float(((loo - mean_loo) ** 2).sum())
    return lse - np.log(m), float(np.sqrt(var)), float(ess)


def _block_log_mean_exp_error(logw, blocks=10):
    """Block jackknife error of log-mean-exp for autocorrelated weights."""
    m = logw.size
    blocks = min(blocks, m)
    edges = np.linspace(0, m, blocks + 1, dtype=int)
    loo = []
    for b in range(blocks):
        mask = np.ones(m, dtype=bool)
        mask[edges[b]:edges[b + 1]] = False
        loo.append(float(logsumexp(logw[mask])) - np.log(mask.sum()))
    loo = np.asarray(loo)
    return float(np.sqrt((blocks - 1) / blocks * ((loo - loo.mean()) ** 2).sum()))


def _uniform_estimate(J, beta, region, budget, seed):
    n = J.n
    logv = _log_volume(region, n)
    rng = make_rng(seed, STREAM_SAMPLER)
    pts = _draw_uniform(region, n, rng, budget)
    logw = -beta * model.energy_many(J, pts)
    lme, err, ess = _log_mean_exp_jackknife(logw)
    return FreeEnergyEstimate(
        value=(logv + lme) / n, std_error=err / n, method=UNIFORM,
        region=region, beta=beta, ess=ess, reliable=ess >= ESS_RELIABLE)


def _geometric_ladder(beta, rungs):
    # 0, beta 2^-(K-2), ..., beta/2, beta
    return [0.0] + [beta * 2.0 ** (-(rungs - 2 - i)) for i in range(rungs - 1)]


def _annealed_estimate(J, beta, region, budget, seed, rungs=20, split_var=0.5,
                       max_transitions=120, burn_frac=0.25):
    n = J.n
    logv = _log_volume(region, n)
    if beta == 0.0:
        return FreeEnergyEstimate(value=logv / n, std_error=0.0, method=ANNEALED,
                                  region=region, beta=beta, ess=np.inf, reliable=True)
    ladder = _geometric_ladder(beta, rungs)
    queue = [(ladder[i], ladder[i + 1]) for i in range(len(ladder) - 1)]
    steps_per = max(200, budget // (2 * len(queue)))

    rng0 = make_rng(seed, STREAM_SAMPLER, 0)
    state = _draw_uniform(region, n, rng0, None)
    log_ratio_sum = 0.0
    var_sum = 0.0
    min_ess = np.inf
    dt = None
    chain_idx = 0
    transitions_done = 0
    while queue:
        b_lo, b_hi = queue.pop(0)
        chain_idx += 1
        if b_lo == 0.0:
            # independent uniform draws; no chain needed
            rng = make_rng(seed, STREAM_SAMPLER, chain_idx)
            pts = _draw_uniform(region, n, rng, steps_per)
            h = model.energy_many(J, pts)
            state = pts[-1]
        else:
            # re-tune the step size at each rung, warm-started from the last
            dt = dynamics.tune_dt(J, b_lo, state,
                                  derive_seed(seed, STREAM_SAMPLER, 10_000 + chain_idx),
                                  dt0=dt if dt is not None else 0.1,
                                  pilot_steps=40, region=region)
            pos, h, _, state = dynamics.run_blocks(
                J, b_lo, dt, state, steps_per,
                derive_seed(seed, STREAM_SAMPLER, chain_idx),
                scheme=dynamics.MALA, region=region)
            burn = int(burn_frac * steps_per)
            h = h[burn:]
        delta = b_hi - b_lo
        logw = -delta * h
        if (float(np.var(logw)) > split_var and transitions_done + len(queue) + 2 <= max_transitions):
            mid = 0.5 * (b_lo + b_hi)
            queue.insert(0, (mid, b_hi))
            queue.insert(0, (b_lo, mid))
            chain_idx -= 1  # reuse the stream at the refined transition
            continue
        transitions_done += 1
        lme = float(logsumexp(logw)) - np.log(logw.size)
        if b_lo == 0.0:
            _, err, ess = _log_mean_exp_jackknife(logw)
        else:
            err = _block_log_mean_exp_error(logw)
            shift = logw.max()
            w = np.exp(logw - shift)
            ess = float(w.sum()) ** 2 / float((w * w).sum())
        log_ratio_sum += lme
        var_sum += err * err
        min_ess = min(min_ess, ess)
    value = (logv + log_ratio_sum) / n
    return FreeEnergyEstimate(value=value, std_error=float(np.sqrt(var_sum)) / n,
                              method=ANNEALED, region=region, beta=beta,
                              ess=min_ess, reliable=min_ess >= ESS_RELIABLE)


def _combine_annealed(ests, n):
    """Combine independent annealed runs by averaging partition functions.

    Confined chains can miss modes of a region (a one-sided error in log Z);
    the Z-scale mean is dominated by the best-covering replica, and the
    replica dispersion enters the error alongside the per-run jackknives.
    """
    logz = np.array([n * e.value for e in ests])
    w = np.exp(logz - logsumexp(logz))
    value = (logsumexp(logz) - np.log(len(ests))) / n
    per_run = np.sqrt(np.sum((w * np.array([n * e.std_error for e in ests])) ** 2))
    disp = np.sqrt(np.sum(w * (logz - np.sum(w * logz)) ** 2) / len(ests))
    err = float(np.sqrt(per_run ** 2 + disp ** 2)) / n
    ess = float(np.sum([e.ess for e in ests]))
    return FreeEnergyEstimate(value=float(value), std_error=err, method=ANNEALED,
                              region=ests[0].region, beta=ests[0].beta,
                              ess=ess, reliable=all(e.reliable for e in ests))


def restricted_free_energy(J, beta, region=None, budget=10_000, method=AUTO, seed=0,
                           replicas=1):
    """Estimate F(region) = (1/N) log int_region exp(-beta H) dV.

    `region=None` means the full sphere.  `method` is 'uniform', 'annealed'
    or 'auto' (annealed once beta sqrt(N) > 8).  `replicas` > 1 runs that many
    independent annealed ladders on a split budget and averages the partition
    functions, which shields against chains stuck in a sub-mode of the
    region.  Estimates whose effective sample size drops below 50 are flagged
    unreliable.
    """
    if budget < MIN_BUDGET:
        raise ParameterError(f"budget must be >= {MIN_BUDGET}")
    if beta < 0:
        raise ParameterError("beta must be >= 0")
    if method == AUTO:
        # the annealed chain assumes a connected region; overlap bands are
        # disconnected exactly at N = 2 (two arcs), where the circle is small
        # enough for uniform importance anyway
        if J.n == 2:
            method = UNIFORM
        else:
            method = ANNEALED if beta * np.sqrt(J.n) > 8.0 else UNIFORM
    if method == UNIFORM:
        return _uniform_estimate(J, beta, region, budget, seed)
    if method == ANNEALED:
        if replicas <= 1:
            return _annealed_estimate(J, beta, region, budget, seed)
        per = max(MIN_BUDGET, budget // replicas)
        ests = [_annealed_estimate(J, beta, region, per, derive_seed(seed, 777 + r))
                for r in range(replicas)]
        return _combine_annealed(ests, J.n)
    raise ParameterError(f"unknown method {method!r}")


def band_profile(J, beta, center, q_grid, eps=None, budget=20_000, method=AUTO, seed=0):
    """Restricted free energies of Band(center, q, eps) across a q grid.

    Returns the per-q estimates and the grid argmax q_star (the empirical
    location of the dominant band).  eps defaults to 2/sqrt(N).
    """
    q_grid = [float(q) for q in q_grid]
    if any(not (0.0 < q < 1.0) for q in q_grid):
        raise ParameterError("q grid must lie inside (0, 1)")
    eps = 2.0 / np.sqrt(J.n) if eps is None else float(eps)
    per_q = max(MIN_BUDGET, budget // len(q_grid))
    points = []
    for i, q in enumerate(q_grid):
        band = sets.RegionSpec.band(center, q, eps)
        est = restricted_free_energy(J, beta, band, budget=per_q, method=method,
                                     seed=derive_seed(seed, i))
        points.append((q, est))
    q_star = max(points, key=lambda t: t[1].value)[0]
    return BandProfile(points=points, q_star=q_star)


def region_masses(J, beta, regions, budget, seed, method=AUTO, replicas=4):
    """Gibbs masses of a partition of the sphere from per-region free energies.

    `regions` must cover the sphere disjointly (up to measure zero); the
    masses are self-normalized: pi_i = Z_i / sum_j Z_j with
    Z_i = exp(N F_i).  Returns (pi, log_z, estimates).
    """
    ests = [restricted_free_energy(J, beta, r, budget=budget, method=method,
                                   seed=derive_seed(seed, 100 + i), replicas=replicas)
            for i, r in enumerate(regions)]
    n = J.n
    logz = np.array([n * e.value for e in ests])
    pi = np.exp(logz - logsumexp(logz))
    return pi, logz, ests


def gibbs_ratio_experiment(J, beta, k=1, eps=0.2, budget=24_000, qstar=None,
                           qstarstar=None, qstarstar_frac=0.5, catalog=None,
                           seed=0, restarts=30, profile_budget=None, method=AUTO):
    """Cap/shell mass comparison around the k-th lowest minimum.

    Builds, around x_k and with w = eps / sqrt(N),

        A = Cap(x_k, q** + w),   B = Band edges [q**, q** + w],
        C = complement {R < q**},

    where q* is the empirical band-profile maximizer (computed if not given)
    and q** < q* is configured (default q*/2, validated against
    2 eps < q* - q**).  Returns the masses pi(A), pi(B), the ratio
    pi(B)/pi(A) = exp(N (F(B) - F(A))) and the ingredients for the
    conductance bound.
    """
    if catalog is None:
        from . import landscape
        catalog = landscape.catalog_minima(J, restarts=restarts, seed=derive_seed(seed, 7))
    if len(catalog) < k:
        raise ParameterError(f"catalog has {len(catalog)} minima; need at least k = {k}")
    x_k = catalog[k - 1].location
    n = J.n
    if qstar is None:
        grid = np.linspace(0.15, 0.9, 16)
        prof = band_profile(J, beta, x_k, grid,
                            budget=profile_budget or max(MIN_BUDGET * len(grid), budget // 2),
                            method=method, seed=derive_seed(seed, 11))
        qstar = prof.q_star
    qss = float(qstar) * qstarstar_frac if qstarstar is None else float(qstarstar)
    if qss >= qstar:
        raise ConfigError(f"band ordering violated: q** = {qss} >= q* = {qstar}")
    if 2.0 * eps >= qstar - qss:
        raise ConfigError(
            f"shell too wide: 2 eps = {2 * eps} >= q* - q** = {qstar - qss}")
    w = eps / np.sqrt(n)
    cap_a = sets.RegionSpec.cap(x_k, qss + w)
    shell_b = sets.RegionSpec.band_edges(x_k, qss, qss + w)
    comp_c = sets.RegionSpec.band_edges(x_k, -1.0, qss)
    pi, logz, ests = region_masses(J, beta, [cap_a, shell_b, comp_c],
                                   budget=budget // 3, seed=seed, method=method)
    f_a, f_b, f_c = (e.value for e in ests)
    err = float(np.sqrt(sum(e.std_error ** 2 for e in ests[:2])))
    log_ratio = n * (f_b - f_a)
    return {
        "ratio": float(np.exp(log_ratio)),
        "log_ratio": float(log_ratio),
        "log_ratio_err": n * err,
        "pi_A": float(pi[0]),
        "pi_B": float(pi[1]),
        "pi_C": float(pi[2]),
        "q_star": float(qstar),
        "q_star_star": float(qss),
        "eps": float(eps),
        "center_energy": float(catalog[k - 1].energy),
        "estimates": ests,
    }


def concentration_experiment(spec, beta, region_builder=None, replicas=50,
                             budget=4000, base_seed=0, method=AUTO):
    """Disorder-resampled free energies: mean and standard deviation.

    `region_builder` maps a disorder draw to a region (None = full sphere).
    One call handles one (p, N); sweeps assemble the by-N table.
    """
    if replicas < 2:
        raise ParameterError("replicas must be >= 2")
    values = np.empty(replicas)
    for r in range(replicas):
        J = model.sample_disorder(spec, derive_seed(base_seed, r))
        region = region_builder(J) if region_builder is not None else None
        est = restricted_free_energy(J, beta, region, budget=budget, method=method,
                                     seed=derive_seed(base_seed, 5000 + r))
        values[r] = est.value
    return {"mean": float(values.mean()), "std": float(values.std(ddof=1)),
            "values": values}
