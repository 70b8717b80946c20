"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -rA` to see the per-criterion
summaries.  Expensive intermediate data (Hessian extremes, the low-temperature
sweep) is shared through module-scoped fixtures.
"""

import time

import numpy as np
import pytest
from scipy import stats

from pspin import (certificates, dynamics, freenergy, harness, landscape,
                   model, sets, spectral, sphere)
from pspin.rng import derive_seed, make_rng

from conftest import random_sphere_point


def _report(k, text):
    print(f"ACCEPTANCE {k}: PASS — {text}")


# ----------------------------------------------------------------- 1
def test_criterion_1_sphere_spectrum_oracle():
    t0 = time.time()
    J0 = model.zero_tensor(model.ModelSpec(3, 2, 0.0))
    est = spectral.exact_gap_circle(J0, 0.0, 4096)
    elapsed = time.time() - t0
    assert abs(est.value - 0.25) < 1e-6
    assert elapsed < 1.0
    _report(1, f"zero-coupling circle gap {est.value:.10f} = 1/4 within 1e-6 "
               f"({elapsed:.2f} s)")


# ----------------------------------------------------------------- 2
@pytest.mark.parametrize("p,n", [(3, 2), (3, 8), (4, 8)])
def test_criterion_2_covariance_law(p, n):
    reps = 10_000
    x = random_sphere_point(n, seed=21)
    y = random_sphere_point(n, seed=22)
    spec = model.ModelSpec(p, n, 0.0)
    hx = np.empty(reps)
    hy = np.empty(reps)
    for r in range(reps):
        J = model.sample_disorder(spec, derive_seed(555, p, n, r))
        hx[r] = model.energy(J, x)
        hy[r] = model.energy(J, y)
    target = n * sphere.overlap(x, y) ** p
    prod = (hx - hx.mean()) * (hy - hy.mean())
    se = prod.std(ddof=1) / np.sqrt(reps)
    dev = abs(prod.mean() - target)
    assert dev < 4 * se
    _report(2, f"(p={p}, N={n}) empirical Cov = {prod.mean():+.4f} vs N R^p = "
               f"{target:+.4f} ({dev / se:.2f} SE)")


# ----------------------------------------------------------------- 3
def test_criterion_3_derivative_identities():
    t0 = time.time()
    checks = 0
    for (p, n, seed) in ((3, 6, 42), (4, 5, 42)):
        J = model.sample_disorder(model.ModelSpec(p, n, 0.0), seed)
        rng = make_rng(31)
        for i in range(50):
            x = sphere.random_point(n, rng)
            g = model.euclidean_gradient(J, x)
            h = model.energy(J, x)
            assert abs(g @ x - p * h) <= 1e-10 * max(1.0, abs(p * h))
            v = sphere.random_tangent(x, rng)
            gs = model.spherical_gradient(J, x)
            step = 1e-5
            fd1 = (model.energy(J, sphere.geodesic(x, v, step))
                   - model.energy(J, sphere.geodesic(x, v, -step))) / (2 * step)
            assert abs(fd1 - gs @ v) <= 1e-4 * max(1.0, abs(fd1))
            hv = model.spherical_hessian_apply(J, x, v)
            step2 = 1e-4
            fd2 = (model.energy(J, sphere.geodesic(x, v, step2)) - 2 * h
                   + model.energy(J, sphere.geodesic(x, v, -step2))) / step2 ** 2
            assert abs(fd2 - v @ hv) <= 1e-3 * max(1.0, abs(fd2))
            checks += 1
    _report(3, f"Euler identity to 1e-10 and geodesic-difference gradient/Hessian "
               f"matches on {checks} random points ({time.time() - t0:.1f} s)")


# ----------------------------------------------------------------- 4
def test_criterion_4_gap_sandwich_circle():
    t0 = time.time()
    cfg = harness.ExperimentConfig(
        kind="gap_sweep", master_seed=404, p_grid=(3,), n_grid=(2,),
        beta_grid=(0.0, 1.0, 4.0, 8.0), seeds=tuple(range(20)),
        fe_budget=12_000, profile_budget=9_000, restarts=10, cert_restarts=4,
        chain_steps=6_000, out_dir="unused")
    rec = harness.run_gap_sweep(cfg)
    lower = upper = 0
    for cell in rec["cells"]:
        exact = next(e for e in cell["estimates"] if e["direction"] == "Exact")
        slack = exact.get("discretization_error", 0.0) + 1e-9
        for e in cell["estimates"]:
            if e["direction"] == "UpperBound":
                assert e["value"] >= exact["value"] - slack - 3 * (e.get("std_error") or 0.0), \
                    (cell["beta"], cell["seed"], e)
                upper += 1
            elif e["direction"] == "LowerBound":
                assert e["value"] <= exact["value"] + slack, \
                    (cell["beta"], cell["seed"], e)
                lower += 1
    elapsed = time.time() - t0
    assert elapsed < 600
    _report(4, f"80 instances: {lower} certificates below and {upper} bounds above "
               f"the exact gap ({elapsed:.0f} s)")


# ----------------------------------------------------------------- 5 / 6
N_GRID_EXTREMES = (8, 16, 32, 64)
DRAWS_PER_N = 50


@pytest.fixture(scope="module")
def extremes_data():
    data = {}
    for n in N_GRID_EXTREMES:
        rows = []
        for s in range(DRAWS_PER_N):
            J = model.sample_disorder(model.ModelSpec(3, n, 0.0),
                                      derive_seed(606, n, s))
            ext = certificates.hessian_extremes(J, restarts=6, seed=s)
            rows.append(ext)
        data[n] = rows
    return data


def test_criterion_5_hessian_extremes_scaling(extremes_data):
    t0 = time.time()
    means = {n: np.mean([e.r_range for e in rows])
             for n, rows in extremes_data.items()}
    spread = max(means.values()) / min(means.values())
    assert spread < 2.0
    sums = np.array([e.r_max + e.r_min
                     for rows in extremes_data.values() for e in rows])
    se = sums.std(ddof=1) / np.sqrt(sums.size)
    assert abs(sums.mean()) <= 4 * se
    _report(5, f"mean r(H) by N {dict((n, round(v, 2)) for n, v in means.items())} "
               f"(x{spread:.2f} across N); mean(r_max)+mean(r_min) = "
               f"{sums.mean():+.3f} ({abs(sums.mean()) / se:.2f} SE)")


def test_criterion_6_high_temperature_certificates(extremes_data):
    bounds_by_n = {}
    for n in (8, 16, 32):
        rows = extremes_data[n]
        rbar = np.mean([e.r_max for e in rows])
        beta = 0.1 * (1.0 - 1.0 / n) / rbar
        spec = model.ModelSpec(3, n, beta)
        values = []
        for ext in rows:
            cert = certificates.bakry_emery_certificate(spec, ext)
            assert cert is not None, (n, beta, ext)
            values.append(cert.lower_bound)
        bounds_by_n[n] = np.mean(values)
    ratio = max(bounds_by_n.values()) / min(bounds_by_n.values())
    assert ratio < 2.0
    _report(6, f"curvature certificates positive for all 150 draws at "
               f"beta = 0.1(1-1/N)/mean r_max; certified bounds "
               f"{dict((n, round(v, 3)) for n, v in bounds_by_n.items())} "
               f"(x{ratio:.2f} across N)")


# ----------------------------------------------------------------- 7 / 8
@pytest.fixture(scope="module")
def low_temperature_sweep():
    cfg = harness.ExperimentConfig(
        kind="phase_slope", master_seed=42, p_grid=(3,), n_grid=(10, 14, 18, 22),
        beta_grid=(8.0,), seeds=tuple(range(10)), fe_budget=24_000,
        profile_budget=12_000, restarts=24, cert_restarts=4, chain_steps=4_000,
        out_dir="unused", threads=1)
    return harness.run_phase_slope(cfg)


def test_criterion_7_low_temperature_phase(low_temperature_sweep):
    rep = low_temperature_sweep["report"]
    assert rep["sign_test_p"] < 0.05
    assert rep["c1_proxy_positive"] >= 8
    _report(7, f"{rep['negative_slopes']}/{rep['total']} negative slopes of "
               f"log(gap bound) vs N at beta = 8 (sign-test p = "
               f"{rep['sign_test_p']:.4f}); -(1/N) log bound > 0 at N = 22 for "
               f"{rep['c1_proxy_positive']}/10 seeds")


def test_criterion_8_cap_band_separation():
    t0 = time.time()
    n_grid = (10, 14, 18)
    logs = {n: [] for n in n_grid}
    for n in n_grid:
        for s in range(10):
            J = model.sample_disorder(model.ModelSpec(3, n, 8.0), s)
            out = freenergy.gibbs_ratio_experiment(
                J, 8.0, k=1, eps=0.2, budget=24_000, restarts=24,
                profile_budget=12_000, seed=derive_seed(808, n, s))
            logs[n].append(out["log_ratio"])
    neg18 = sum(1 for v in logs[18] if v < 0)
    assert neg18 >= 8
    slopes = [np.polyfit(n_grid, [logs[n][s] for n in n_grid], 1)[0]
              for s in range(10)]
    neg_slopes = sum(1 for v in slopes if v < 0)
    p = stats.binomtest(neg_slopes, 10, 0.5, alternative="greater").pvalue
    assert p < 0.05
    _report(8, f"log pi(B1)/pi(A1) negative for {neg18}/10 seeds at N = 18 "
               f"(median {np.median(logs[18]):.1f}); decreasing in N for "
               f"{neg_slopes}/10 seeds (sign-test p = {p:.4f}; "
               f"{time.time() - t0:.0f} s)")


# ----------------------------------------------------------------- 9
def test_criterion_9_free_energy_concentration():
    t0 = time.time()
    stds = {}
    for n in (8, 16, 32):
        out = freenergy.concentration_experiment(
            model.ModelSpec(3, n, 1.0), 1.0, replicas=50, budget=6_000,
            base_seed=909)
        stds[n] = out["std"]
    assert stds[32] < stds[8]
    scaled = {n: stds[n] * np.sqrt(n) for n in stds}
    ratio = max(scaled.values()) / min(scaled.values())
    assert ratio < 2.0
    _report(9, f"disorder std of F: {dict((n, round(v, 4)) for n, v in stds.items())}; "
               f"std*sqrt(N) within x{ratio:.2f} ({time.time() - t0:.0f} s)")


# ----------------------------------------------------------------- 10
def test_criterion_10_complexity_function():
    t0 = time.time()
    for p in (3, 4, 5):
        assert landscape.theta(p, 0.7) == 0.5 * np.log(p - 1.0)
        assert landscape.theta(p, 0.0) == 0.5 * np.log(p - 1.0)
    assert abs(landscape.theta(3, -1e-6) - landscape.theta(3, 0.0)) <= 1e-4
    for p in (3, 4, 5):
        e0 = landscape.ground_state_scale(p)
        assert abs(landscape.theta(p, -e0)) < 1e-7
    elapsed = time.time() - t0
    assert elapsed < 1.0
    _report(10, f"theta = log(p-1)/2 on E >= 0, continuous at 0 to 1e-4, root "
                f"residuals < 1e-7 ({elapsed:.2f} s)")


# ----------------------------------------------------------------- 11
def test_criterion_11_determinism(tmp_path):
    kw = dict(kind="gap_sweep", master_seed=11, p_grid=(3,), n_grid=(2,),
              beta_grid=(0.0, 1.0), seeds=(0, 1), fe_budget=6_000,
              profile_budget=6_000, restarts=8, cert_restarts=3,
              chain_steps=3_000)
    outs = []
    for i, threads in enumerate((1, 1, 2)):
        out = tmp_path / f"run{i}"
        cfg = harness.ExperimentConfig(out_dir=str(out), threads=threads, **kw)
        harness.write_outputs(harness.run_gap_sweep(cfg), out)
        outs.append(out)
    ref_csv = (outs[0] / "gap_sweep.csv").read_bytes()
    ref_json = (outs[0] / "records.json").read_bytes()
    for out in outs[1:]:
        assert (out / "gap_sweep.csv").read_bytes() == ref_csv
        assert (out / "records.json").read_bytes() == ref_json
    _report(11, "repeated runs and a worker-count change produce byte-identical "
                "CSV/JSON outputs")
