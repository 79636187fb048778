import numpy as np
import pytest

from acx.errors import CertificateRejected, DomainError, ParameterError, PreconditionError
from acx.fields import AffineMap, BoxDomain, PolynomialScalar, random_structure
from acx.kobayashi import (BETA, ChirkaWeight, MetricQuery, build_certificate, certificate_constant,
                           chirka_levi, distance_comparability, hopf_margin, kr_bracket,
                           kr_lower_certificate, kr_upper, log_theta, surface_distance,
                           tangent_map_anisotropy, theta, verify_certificate)


def disc_of_radius(x2, d, center=0.0):
    pad = 1.1 * d
    return BoxDomain(2, [center - pad, -pad], [center + pad, pad],
                     PolynomialScalar((x2[0] - center) ** 2 + x2[1] ** 2 - d * d))


def test_unit_disc_upper_bound_is_one(jst1, unit_disc):
    upper, f = kr_upper(MetricQuery(unit_disc, jst1, [0, 0], [1, 0]), 1e-4)
    assert upper == pytest.approx(1.0, abs=2e-3)
    assert upper >= 1.0 - 1e-9      # no disc beats the Schwarz lemma


@pytest.mark.parametrize("d", [0.5, 0.25])
def test_small_disc_metric_is_tau_over_d(jst1, x2, d):
    D = disc_of_radius(x2, d, 0.2)
    tau = np.array([0.3, 0.4])
    upper, _ = kr_upper(MetricQuery(D, jst1, [0.2, 0], tau), 1e-4)
    assert upper == pytest.approx(np.linalg.norm(tau) / d, rel=0.02)


def test_metric_is_absolutely_homogeneous(jst1, unit_disc):
    q = MetricQuery(unit_disc, jst1, [0.1, 0.2], [0.3, -0.4])
    a, _ = kr_upper(q, 1e-4)
    b, _ = kr_upper(q.with_vector([-0.6, 0.8]), 1e-4)
    assert b == pytest.approx(2 * a, rel=2e-3)


def test_metric_decreases_under_inclusion(jst1, x2, unit_disc):
    half = disc_of_radius(x2, 0.5)
    for q, v in (([0, 0], [1, 0]), ([0.1, 0.2], [0.3, -0.4])):
        big, _ = kr_upper(MetricQuery(unit_disc, jst1, q, v))
        small, _ = kr_upper(MetricQuery(half, jst1, q, v))
        assert small >= big


def test_bracket_orders_and_contains_schwarz_value(jst1, unit_disc):
    br = kr_bracket(MetricQuery(unit_disc, jst1, [0, 0], [1, 0]))
    assert br.lower <= br.upper
    assert br.contains(1.0)
    assert br.localized
    # the certified lower bound never exceeds 1 / sqrt(2 B e) on the unit disc
    assert br.lower <= 1 / np.sqrt(2 * br.certificate.B * np.e) + 1e-12


def test_certificate_on_perturbed_ball(ball, diagonal):
    q = MetricQuery(ball, diagonal, [0, 0, 0, 0], [1, 0, 0, 0])
    cert = build_certificate(q)
    assert verify_certificate(cert, diagonal, ball)["u_max"] < 0
    lower = kr_lower_certificate(q, cert)
    upper, _ = kr_upper(q)
    assert 0 < lower <= upper


def test_certificate_rejects_tampered_constants(jst1, unit_disc):
    q = MetricQuery(unit_disc, jst1, [0, 0], [1, 0])
    cert = build_certificate(q)
    from dataclasses import replace
    with pytest.raises(CertificateRejected):
        verify_certificate(replace(cert, c=10.0), jst1, unit_disc)
    with pytest.raises(CertificateRejected):
        verify_certificate(replace(cert, B=0.05, r=0.3), jst1, unit_disc)


def test_certificate_constant_formula():
    assert certificate_constant(1.0, 0.0, 1.0, 0.0) == pytest.approx(1 / np.sqrt(2 * np.e))
    assert certificate_constant(2.0, 1.0, 1.0, 1.0) == pytest.approx(np.sqrt(1 / np.e ** 2))


def test_cutoff_profile():
    s = np.array([0.1, 1 / 3, 0.5, 2 / 3, 2.0])
    th = theta(s)
    assert th[0] == pytest.approx(0.1) and th[1] == pytest.approx(1 / 3)
    assert th[3] == pytest.approx(1.0) and th[4] == 1.0
    fine = np.linspace(1e-3, 1, 2001)
    assert np.all(np.diff(theta(fine)) >= -1e-15)
    # log theta' matches a finite difference away from the kinks
    val, d1, _ = log_theta(np.array([0.2, 0.6]))
    h = 1e-7
    fd = (log_theta(np.array([0.2, 0.6]) + h)[0] - log_theta(np.array([0.2, 0.6]) - h)[0]) / (2 * h)
    assert np.allclose(d1, fd, rtol=1e-5)


def test_chirka_weight_is_psh_for_small_perturbations(rng):
    J = random_structure(2, 0.05, rng)
    levi = chirka_levi(J, np.zeros(4), 0.5)
    assert levi.ok(0.0, 1.05 * BETA)
    assert not levi.ok(0.0, 0.5)


def test_chirka_weight_derivatives(rng):
    W = ChirkaWeight(np.zeros(4), 1.0, 0.5, 2.0)
    z = np.array([0.3, -0.2, 0.4, 0.1])
    h = 1e-6
    fd = np.array([(W(z + h * e) - W(z - h * e)) / (2 * h) for e in np.eye(4)])
    assert np.allclose(W.gradient(z), fd, atol=1e-6)


def test_query_validation(jst1, unit_disc):
    with pytest.raises(DomainError):
        MetricQuery(unit_disc, jst1, [2.0, 0], [1, 0])
    with pytest.raises(ParameterError):
        MetricQuery(unit_disc, jst1, [0, 0, 0], [1, 0, 0])
    with pytest.raises(ParameterError):
        kr_upper(MetricQuery(unit_disc, jst1, [0, 0], [1, 0]), tol=0)


def test_hopf_bound_on_unit_disc_is_exact(unit_disc):
    rep = hopf_margin(unit_disc, unit_disc.defining_function, [[0, 0]])
    # |u(p)| / delta = 2 - delta for u = |z|^2 - 1
    assert np.allclose(rep.ratios, 2 - rep.deltas)
    assert rep.passed and rep.margin >= 1


def test_hopf_margin_scales_with_u(ball, x4):
    u = ball.defining_function
    base = hopf_margin(ball, u, [[0, 0, 0, 0]]).margin
    twice = hopf_margin(ball, PolynomialScalar(2 * u.poly), [[0, 0, 0, 0]]).margin
    assert twice == pytest.approx(2 * base)
    with pytest.raises(PreconditionError):
        hopf_margin(ball, PolynomialScalar(-u.poly), [[0, 0, 0, 0]])


def test_surface_distance_is_exact_on_sphere(ball, rng):
    p = rng.normal(size=(5, 4))
    assert np.allclose(surface_distance(ball.defining_function, p), np.abs(np.linalg.norm(p, axis=1) - 1))


def test_anisotropy_of_unitary_map_is_diagonal(ball, jst2):
    c, s = np.cos(0.3), np.sin(0.3)
    U = AffineMap(np.kron(np.array([[c, -s], [s, c]]), np.eye(2)))
    rho = ball.defining_function
    rep = tangent_map_anisotropy(U, rho, rho, jst2, jst2, [0, 0, 0, -1.0])
    assert np.all(np.isfinite(np.diag(rep.exponents)))
    assert np.allclose(np.diag(rep.exponents), 0, atol=1e-6)


def test_anisotropy_requires_holomorphic_map(ball, jst2):
    rho = ball.defining_function
    conj = AffineMap(np.diag([1.0, -1.0, 1.0, 1.0]))
    with pytest.raises(PreconditionError):
        tangent_map_anisotropy(conj, rho, rho, jst2, jst2, [0, 0, 0, -1.0])


def test_shear_preserves_distance_to_model_boundary(x4, shear):
    x = x4
    model = PolynomialScalar(2 * x[2] + x[0] ** 2 + x[1] ** 2)
    image = PolynomialScalar(2 * x[2] - 2 * (x[0] ** 2 - x[1] ** 2) + x[0] ** 2 + x[1] ** 2)
    pts = np.array([[0.1, 0, -0.005 - d, 0] for d in (0.1, 0.01, 0.001)])
    rep = distance_comparability(shear, model, image, pts)
    assert rep.constant < 2.0
