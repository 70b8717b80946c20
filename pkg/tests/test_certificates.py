import numpy as np
import pytest

from pspin import certificates, landscape, model, spectral, sphere
from pspin.errors import ParameterError
from pspin.rng import make_rng

from conftest import random_sphere_point


def test_zero_tensor_extremes_and_certificate():
    J0 = model.zero_tensor(model.ModelSpec(3, 10, 5.0))
    ext = certificates.hessian_extremes(J0, restarts=2, seed=1)
    assert abs(ext.r_max) < 1e-12 and abs(ext.r_min) < 1e-12
    assert ext.converged
    cert = certificates.bakry_emery_certificate(model.ModelSpec(3, 10, 5.0), ext)
    assert cert.lower_bound == pytest.approx(0.45, abs=1e-12)
    assert cert.kind == certificates.BAKRY_EMERY


def test_certificate_none_when_curvature_negative():
    ext = certificates.HessianExtremes(r_max=5.0, r_min=-5.0, r_range=10.0,
                                       restarts=1, converged=True)
    assert certificates.bakry_emery_certificate(model.ModelSpec(3, 10, 1.0), ext) is None
    small = certificates.bakry_emery_certificate(model.ModelSpec(3, 10, 0.01), ext)
    assert small is not None
    assert small.lower_bound == pytest.approx(0.5 * (0.9 - 0.05))


def test_certificate_monotone_in_beta():
    ext = certificates.HessianExtremes(r_max=4.0, r_min=-4.0, r_range=8.0,
                                       restarts=1, converged=True)
    values = []
    for beta in (0.0, 0.05, 0.1, 0.2):
        cert = certificates.bakry_emery_certificate(model.ModelSpec(3, 12, beta), ext)
        values.append(-np.inf if cert is None else cert.lower_bound)
    assert all(b <= a for a, b in zip(values, values[1:]))


def test_extremes_refused_unconverged():
    ext = certificates.HessianExtremes(r_max=1.0, r_min=-1.0, r_range=2.0,
                                       restarts=1, converged=False)
    with pytest.raises(ParameterError):
        certificates.bakry_emery_certificate(model.ModelSpec(3, 10, 0.1), ext)


def test_eigenvalue_ascent_gradient_matches_finite_differences(tensor_p3_n6):
    # the transported eigenvalue gradient against a geodesic difference
    J = tensor_p3_n6
    x = random_sphere_point(6, seed=3)
    lam, v, _ = landscape.tangent_extreme_eigenpair(J, x, "max", rng=make_rng(1))
    data = certificates._PointData(J, x)
    grad = sphere.project_tangent(x, certificates._eig_gradient(J, data, v))
    d = sphere.random_tangent(x, make_rng(9))
    h = 1e-6
    lp, _, _ = landscape.tangent_extreme_eigenpair(J, sphere.geodesic(x, d, h), "max",
                                                   rng=make_rng(1))
    lm, _, _ = landscape.tangent_extreme_eigenpair(J, sphere.geodesic(x, d, -h), "max",
                                                   rng=make_rng(1))
    fd = (lp - lm) / (2 * h)
    assert abs(fd - float(grad @ d)) <= 1e-3 * max(1.0, abs(fd))


def test_extremes_restart_monotonicity():
    # more restarts never shrink the maximum nor raise the minimum
    J = model.sample_disorder(model.ModelSpec(3, 12, 0.0), 5)
    few = certificates.hessian_extremes(J, restarts=2, seed=9)
    many = certificates.hessian_extremes(J, restarts=8, seed=9)
    assert many.r_max >= few.r_max - 1e-12
    assert many.r_min <= few.r_min + 1e-12
    assert many.r_range == pytest.approx(many.r_max - many.r_min)


def test_extremes_sign_symmetry_in_distribution():
    # r_max(H) and -r_min(H) are equal in law; over draws the means cancel
    vals = []
    for s in range(24):
        J = model.sample_disorder(model.ModelSpec(3, 10, 0.0), 4000 + s)
        ext = certificates.hessian_extremes(J, restarts=4, seed=s)
        vals.append((ext.r_max, ext.r_min))
    r_hi = np.array([a for a, _ in vals])
    r_lo = np.array([b for _, b in vals])
    s = r_hi + r_lo
    se = s.std(ddof=1) / np.sqrt(len(s))
    assert abs(s.mean()) <= 4 * se


def test_circle_extremes_match_brute_force(tensor_p3_n2):
    J = tensor_p3_n2
    ext = certificates.hessian_extremes(J)
    # dense brute force over a fine angle grid
    th = np.linspace(0, 2 * np.pi, 200_001)
    pts = np.sqrt(2.0) * np.column_stack([np.cos(th), np.sin(th)])
    tang = np.column_stack([-np.sin(th), np.cos(th)])
    vals = np.empty(th.size)
    for i in range(0, th.size, 5000):
        sl = slice(i, min(i + 5000, th.size))
        for j in range(sl.start, sl.stop):
            hv = model.spherical_hessian_apply(J, pts[j], tang[j])
            vals[j] = float(tang[j] @ hv)
    assert ext.r_max == pytest.approx(vals.max(), abs=1e-5)
    assert ext.r_min == pytest.approx(vals.min(), abs=1e-5)


def test_poincare_zero_tensor_exact_gap():
    J0 = model.zero_tensor(model.ModelSpec(3, 10, 0.0))
    cert = certificates.poincare_stability_certificate(J0, 0.0, budget=3, seed=2)
    assert cert.lower_bound == pytest.approx(0.45, abs=1e-12)
    assert cert.kind == certificates.POINCARE_STABILITY


def test_poincare_monotone_in_beta(tensor_p3_n6):
    values = [certificates.poincare_stability_certificate(
        tensor_p3_n6, beta, budget=6, seed=3).lower_bound
        for beta in (0.0, 0.5, 1.0, 2.0)]
    assert all(b < a for a, b in zip(values, values[1:]))


def test_certificates_below_exact_gap_circle():
    # oracle cross-check at several temperatures on seeded N = 2 instances
    for seed in (3, 5, 9):
        J = model.sample_disorder(model.ModelSpec(3, 2, 0.0), seed)
        ext = certificates.hessian_extremes(J)
        for beta in (0.5, 1.0, 4.0, 8.0):
            exact = spectral.exact_gap_circle(J, beta)
            ceiling = exact.value + exact.discretization_error + 1e-9
            cert = certificates.bakry_emery_certificate(
                model.ModelSpec(3, 2, beta), ext)
            if cert is not None:
                assert cert.lower_bound <= ceiling
            pc = certificates.poincare_stability_certificate(J, beta)
            assert pc.lower_bound <= ceiling


def test_consistency_of_conventions_at_beta_zero(tensor_p3_n6):
    # both certificate kinds return exactly (1/2)(1 - 1/N) at beta = 0
    J = tensor_p3_n6
    ext = certificates.hessian_extremes(J, restarts=2, seed=4)
    be = certificates.bakry_emery_certificate(model.ModelSpec(3, 6, 0.0), ext)
    pc = certificates.poincare_stability_certificate(J, 0.0, budget=3, seed=4)
    target = 0.5 * (1 - 1 / 6)
    assert be.lower_bound == pytest.approx(target, abs=1e-12)
    assert pc.lower_bound == pytest.approx(target, abs=1e-12)


def test_hessian_range_bounded_in_n():
    means = {}
    for n in (8, 16):
        rs = []
        for s in range(6):
            J = model.sample_disorder(model.ModelSpec(3, n, 0.0), 6000 + s)
            rs.append(certificates.hessian_extremes(J, restarts=4, seed=s).r_range)
        means[n] = np.mean(rs)
    assert max(means.values()) / min(means.values()) < 2.0


def test_certificate_serialization(tensor_p3_n6):
    ext = certificates.hessian_extremes(tensor_p3_n6, restarts=2, seed=5)
    cert = certificates.poincare_stability_certificate(tensor_p3_n6, 0.5, budget=4, seed=5)
    rec = cert.to_record(seed=42, spec=tensor_p3_n6.spec)
    assert rec["direction"] == "LowerBound"
    assert rec["convention"] == spectral.GAP_CONVENTION
    assert rec["value"] == cert.lower_bound
