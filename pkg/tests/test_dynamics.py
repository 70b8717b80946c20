import numpy as np
import pytest
from scipy import integrate, stats

from pspin import dynamics, model, sets, sphere
from pspin.errors import IntegrationError, ParameterError
from pspin.rng import make_rng

from conftest import random_sphere_point


def test_config_validation():
    with pytest.raises(ParameterError):
        dynamics.IntegratorConfig(dt=0.0)
    with pytest.raises(ParameterError):
        dynamics.IntegratorConfig(dt=0.1, steps=0)
    with pytest.raises(ParameterError):
        dynamics.IntegratorConfig(dt=0.1, scheme="leapfrog")


def test_zero_noise_descends(tensor_p3_n6):
    J = tensor_p3_n6
    x = random_sphere_point(6, seed=4)
    y = dynamics.langevin_step(J, 2.0, x, 1e-3, noise=np.zeros(6))
    assert model.energy(J, y) < model.energy(J, x)


def test_step_norm_invariant(tensor_p3_n6):
    J = tensor_p3_n6
    rng = make_rng(1)
    x = random_sphere_point(6, seed=5)
    for _ in range(50):
        x = dynamics.langevin_step(J, 1.0, x, 0.05, rng=rng)
        assert abs(x @ x - 6.0) <= 1e-10 * 6.0


def test_beta0_tangent_displacement_isotropic(tensor_p3_n6):
    # at beta = 0 repeated single steps from a fixed state have mean-zero
    # tangent displacement
    J = tensor_p3_n6
    n, reps, dt = 6, 100_000, 0.05
    x = random_sphere_point(n, seed=6)
    rng = make_rng(2)
    noise = rng.standard_normal((reps, n))
    disp = np.empty((reps, n))
    for r in range(reps):
        y = dynamics.langevin_step(J, 0.0, x, dt, noise=noise[r])
        d = y - x
        disp[r] = d - (d @ x / n) * x
    mean = disp.mean(axis=0)
    se = disp.std(axis=0, ddof=1) / np.sqrt(reps)
    assert np.all(np.abs(mean) <= 4 * se)


def test_nonfinite_state_raises(tensor_p3_n6):
    with pytest.raises((IntegrationError, ParameterError)):
        dynamics.langevin_step(tensor_p3_n6, 1.0, np.full(6, np.nan), 0.1,
                               noise=np.zeros(6))


def test_mala_trivial_acceptance(tensor_p3_n6):
    # zero gradient and zero noise propose the current state: accepted
    J0 = model.zero_tensor(model.ModelSpec(3, 6, 0.0))
    x = random_sphere_point(6, seed=7)
    y, accepted = dynamics.mala_step(J0, 1.0, x, 0.1, noise=np.zeros(6),
                                     uniform=1.0 - 1e-12)
    assert accepted and np.allclose(y, x)


def test_mala_acceptance_near_one_at_small_dt():
    # regression: dt = 1e-4, N = 8, p = 3, beta = 1 gives acceptance >= 0.95
    J = model.sample_disorder(model.ModelSpec(3, 8, 1.0), 1)
    cfg = dynamics.IntegratorConfig(dt=1e-4, scheme=dynamics.MALA, steps=2000,
                                    thin=1, rng_seed=4)
    traj = dynamics.run_chain(J, 1.0, cfg, random_sphere_point(8, seed=8))
    assert traj.acceptance_rate >= 0.95


def test_mala_detailed_balance_circle(tensor_p3_n2):
    J = tensor_p3_n2
    beta, dt = 1.5, 0.05
    angles = [(0.3, 0.9), (2.0, 1.4), (-1.0, -0.6), (0.1, 3.0)]
    for ta, tb in angles:
        a = np.sqrt(2.0) * np.array([np.cos(ta), np.sin(ta)])
        b = np.sqrt(2.0) * np.array([np.cos(tb), np.sin(tb)])
        lhs = np.exp(-beta * model.energy(J, a)) * dynamics.mala_transition_density(J, beta, a, b, dt)
        rhs = np.exp(-beta * model.energy(J, b)) * dynamics.mala_transition_density(J, beta, b, a, dt)
        assert abs(lhs - rhs) <= 1e-8 * max(lhs, rhs, 1e-300)


def test_mala_beta0_uniform_marginal():
    # KS test of a fixed coordinate against the analytic sphere marginal
    n = 4
    J = model.sample_disorder(model.ModelSpec(3, n, 0.0), 2)
    cfg = dynamics.IntegratorConfig(dt=0.8, scheme=dynamics.MALA, steps=60_000,
                                    thin=4, rng_seed=123)
    traj = dynamics.run_chain(J, 0.0, cfg, random_sphere_point(n, seed=1))
    coord = traj.samples[:, 0] / np.sqrt(n)
    res = stats.kstest(coord, lambda t: sets.overlap_cdf(t, n))
    assert res.pvalue > 0.01


def test_mala_beta0_overlap_moments():
    # E[R(sigma, e1 sqrt(N))] = 0 and E[R^2] = 1/N within 4 standard errors
    n = 6
    J = model.sample_disorder(model.ModelSpec(3, n, 0.0), 3)
    cfg = dynamics.IntegratorConfig(dt=1.0, scheme=dynamics.MALA, steps=80_000,
                                    thin=4, rng_seed=5)
    traj = dynamics.run_chain(J, 0.0, cfg, random_sphere_point(n, seed=2))
    r = traj.samples[:, 0] / np.sqrt(n)
    m = r.size
    se1 = r.std(ddof=1) / np.sqrt(m)
    assert abs(r.mean()) <= 4 * se1
    r2 = r * r
    se2 = r2.std(ddof=1) / np.sqrt(m)
    assert abs(r2.mean() - 1.0 / n) <= 4 * se2


def test_mala_gibbs_exact_on_circle(tensor_p3_n2):
    # beta > 0 stationarity against the quadrature CDF; exercises the full
    # acceptance ratio including the drift asymmetry
    J = tensor_p3_n2
    beta, dt = 1.5, 0.25
    cfg = dynamics.IntegratorConfig(dt=dt, scheme=dynamics.MALA, steps=150_000,
                                    thin=10, rng_seed=7)
    traj = dynamics.run_chain(J, beta, cfg, np.sqrt(2.0) * np.array([1.0, 0.0]))
    theta = np.arctan2(traj.samples[:, 1], traj.samples[:, 0])
    grid = np.linspace(-np.pi, np.pi, 4001)
    pts = np.sqrt(2.0) * np.column_stack([np.cos(grid), np.sin(grid)])
    w = np.exp(-beta * model.energy_many(J, pts))
    cdf_grid = integrate.cumulative_trapezoid(w, grid, initial=0.0)
    cdf_grid /= cdf_grid[-1]
    res = stats.kstest(theta, lambda t: np.interp(t, grid, cdf_grid))
    assert res.pvalue > 0.01


def test_run_chain_thin_count_and_determinism(tensor_p3_n6):
    J = tensor_p3_n6
    cfg = dynamics.IntegratorConfig(dt=0.05, scheme=dynamics.MALA, steps=1000,
                                    thin=10, rng_seed=99)
    x = random_sphere_point(6, seed=3)
    t1 = dynamics.run_chain(J, 1.0, cfg, x)
    t2 = dynamics.run_chain(J, 1.0, cfg, x)
    assert t1.samples.shape == (100, 6)
    assert len(t1.observables["energy"]) == len(t1.observables["overlap_ref"]) == 100
    assert np.array_equal(t1.samples, t2.samples)
    assert np.array_equal(t1.energies, t2.energies)
    assert np.allclose((t1.samples ** 2).sum(axis=1), 6.0, rtol=1e-10)


def test_run_chain_region_start(tensor_p3_n6):
    J = tensor_p3_n6
    c = random_sphere_point(6, seed=4)
    region = sets.RegionSpec.cap(c, 0.5)
    cfg = dynamics.IntegratorConfig(dt=0.05, scheme=dynamics.PROJECTED_EULER,
                                    steps=200, thin=20, rng_seed=11)
    traj = dynamics.run_chain(J, 1.0, cfg, region)
    assert traj.samples.shape == (10, 6)
    assert traj.acceptance_rate is None


def test_chain_stationarity_diagnostic():
    # MALA at beta = 2: second-half mean of the energy within 2 standard
    # errors of the second-quarter mean
    J = model.sample_disorder(model.ModelSpec(3, 8, 2.0), 5)
    dt = dynamics.tune_dt(J, 2.0, random_sphere_point(8, seed=5), seed=17)
    cfg = dynamics.IntegratorConfig(dt=dt, scheme=dynamics.MALA, steps=40_000,
                                    thin=1, rng_seed=21)
    traj = dynamics.run_chain(J, 2.0, cfg, random_sphere_point(8, seed=5))
    e = traj.energies
    q2 = e[10_000:20_000]
    h2 = e[20_000:]
    from pspin import spectral
    tau, _ = spectral.autocorrelation_time(h2)
    se = np.sqrt(q2.var() * 2 * tau / q2.size + h2.var() * 2 * tau / h2.size)
    assert abs(h2.mean() - q2.mean()) <= 2 * se


def test_tune_dt_targets_acceptance(tensor_p3_n6):
    J = tensor_p3_n6
    x = random_sphere_point(6, seed=6)
    dt = dynamics.tune_dt(J, 2.0, x, seed=31)
    cfg = dynamics.IntegratorConfig(dt=dt, scheme=dynamics.MALA, steps=4000,
                                    thin=1, rng_seed=13)
    traj = dynamics.run_chain(J, 2.0, cfg, x)
    assert 0.35 <= traj.acceptance_rate <= 0.85


def test_trajectory_csv_export(tmp_path, tensor_p3_n6):
    J = tensor_p3_n6
    cfg = dynamics.IntegratorConfig(dt=0.05, scheme=dynamics.MALA, steps=50,
                                    thin=5, rng_seed=1)
    traj = dynamics.run_chain(J, 1.0, cfg, random_sphere_point(6, seed=7))
    path = tmp_path / "traj.csv"
    dynamics.trajectory_to_csv(path, traj, coords=True)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "step,energy,overlap_ref," + ",".join(f"coord_{i}" for i in range(6))
    assert len(lines) == 11
    assert lines[1].split(",")[0] == "5"
