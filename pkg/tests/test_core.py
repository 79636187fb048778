import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acx.core import (ball_grid, c2_distance, check_structure, complex_linear_frame, dbar, del_,
                      holomorphic_tangent, is_strictly_pseudoconvex, levi_form, levi_matrix,
                      normalize_chart, psh_defining_function, split_vector)
from acx.errors import DegeneratePointError, ParameterError, PreconditionError
from acx.fields import (PolynomialScalar, TangentVector, j_standard, random_structure, to_complex)
from acx.poly import Poly

from conftest import sphere_points


def complex_hessian(H):
    """Oracle: u_{z_j zbar_k} from the real Hessian."""
    n = H.shape[0] // 2
    out = np.zeros((n, n), complex)
    for j in range(n):
        for k in range(n):
            out[j, k] = 0.25 * (H[2 * j, 2 * k] + H[2 * j + 1, 2 * k + 1]
                                + 1j * (H[2 * j, 2 * k + 1] - H[2 * j + 1, 2 * k]))
    return out


def test_levi_form_matches_complex_hessian_for_jst(jst2, x4, rng):
    x = x4
    u = PolynomialScalar((x[0] ** 2 + x[1] ** 2) ** 2 + x[0] * x[0] * x[2]
                         - x[1] * x[1] * x[2] + 2 * x[0] * x[1] * x[3] + x[3] ** 3)
    for _ in range(5):
        z = rng.normal(size=4)
        v = rng.normal(size=4)
        w = to_complex(v)
        expected = (w @ complex_hessian(u.hessian(z)) @ w.conj()).real
        assert levi_form(jst2, u, TangentVector(z, v)) == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_levi_form_of_norm_squared_is_norm(jst2, x4, rng):
    r = PolynomialScalar(sum(v * v for v in x4))
    v = rng.normal(size=4)
    assert levi_form(jst2, r, TangentVector(rng.normal(size=4), v)) == pytest.approx(v @ v)
    flat = PolynomialScalar(x4[2])
    assert levi_form(jst2, flat, TangentVector(np.zeros(4), v)) == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 10.0))
def test_levi_form_scales_with_defining_function(seed, lam):
    rng = np.random.default_rng(seed)
    J = random_structure(2, 0.1, rng)
    x = [Poly.var(4, i) for i in range(4)]
    r = PolynomialScalar(sum(v * v for v in x) - 1 + 0.3 * x[0] * x[2])
    z = sphere_points(rng, 1)[0]
    X = TangentVector(z, rng.normal(size=4))
    assert levi_form(J, r.scaled(lam), X) == pytest.approx(lam * levi_form(J, r, X), rel=1e-9, abs=1e-12)


def test_levi_matrix_is_batched(jst2, x4, rng):
    r = PolynomialScalar(sum(v * v for v in x4) + x4[0] * x4[3])
    pts = rng.normal(size=(6, 4))
    batch = levi_matrix(jst2, r, pts)
    assert batch.shape == (6, 4, 4)
    assert np.allclose(batch[3], levi_matrix(jst2, r, pts[3]))


def test_dbar_and_del_split_du(rng):
    J = random_structure(2, 0.1, rng)
    x = [Poly.var(4, i) for i in range(4)]
    u = PolynomialScalar(x[0] * x[1] + x[2] ** 2 - x[3])
    z = rng.uniform(-0.5, 0.5, 4)
    v = TangentVector(z, rng.normal(size=4))
    v10, v01 = split_vector(J, v)
    assert abs(dbar(J, u, z)(v10)) < 1e-12
    assert abs(del_(J, u, z)(v01)) < 1e-12
    total = dbar(J, u, z).w + del_(J, u, z).w
    assert np.allclose(total, u.gradient(z))


def test_dbar_of_holomorphic_coordinate_vanishes(jst2, x4):
    # z1 = x0 + i x1; its real part has dbar = dzbar / 2 coefficients only
    u = PolynomialScalar(x4[0])
    a, b = del_(jst2, u, np.zeros(4)).dz_components()
    assert np.allclose(a, [0.5, 0]) and np.allclose(b, [0, 0])


def test_sphere_is_strictly_pseudoconvex_and_hyperplane_is_not(jst2, x4, rng):
    r = PolynomialScalar(sum(v * v for v in x4) - 1)
    report = is_strictly_pseudoconvex(jst2, r, sphere_points(rng, 8))
    assert report.passed and np.allclose(report.minima, 1.0)
    flat = PolynomialScalar(x4[2])
    pts = rng.normal(size=(5, 4))
    pts[:, 2] = 0
    assert not is_strictly_pseudoconvex(jst2, flat, pts).passed


def test_pseudoconvexity_requires_boundary_points(jst2, ball):
    with pytest.raises(PreconditionError):
        is_strictly_pseudoconvex(jst2, ball.defining_function, [[0.1, 0, 0, 0]])


def test_holomorphic_tangent_is_j_invariant_and_tangent(rng, ball):
    J = random_structure(2, 0.1, rng)
    z = sphere_points(rng, 1)[0]
    H = holomorphic_tangent(J, ball.defining_function, z)
    g = ball.defining_function.gradient(z)
    assert H.shape == (4, 2)
    assert np.allclose(g @ H, 0)
    JH = J.matrix(z) @ H
    assert np.allclose(H @ (H.T @ JH), JH)
    with pytest.raises(DegeneratePointError):
        holomorphic_tangent(J, ball.defining_function, np.zeros(4))


def test_psh_defining_function_preserves_domain(x4, rng):
    rho = PolynomialScalar(sum(v * v for v in x4) - 1)
    r = psh_defining_function(rho, 2.0)
    z = sphere_points(rng, 3)
    assert np.allclose(r(z), 0)
    assert np.allclose(r.gradient(z), rho.gradient(z))


def test_check_structure_detects_non_structures(jst2):
    assert check_structure(jst2, ball_grid(4, 5)).passed
    from acx.fields import CallableStructure
    bad = CallableStructure(4, lambda z: np.broadcast_to(np.eye(4), np.shape(z)[:-1] + (4, 4)))
    assert not check_structure(bad, ball_grid(4, 3)).passed


def test_complex_linear_frame_conjugates_to_jst(rng):
    J = random_structure(2, 0.3, rng)
    J0 = J.matrix(rng.uniform(-0.5, 0.5, 4))
    P = complex_linear_frame(J0)
    assert np.allclose(P @ J0, j_standard(2) @ P)
    assert np.allclose(complex_linear_frame(j_standard(2)), np.eye(4))


def test_normalize_chart_reaches_requested_c2_bound(rng):
    J = random_structure(2, 0.1, rng)
    p = np.array([0.1, 0.2, 0.0, 0.1])
    res = normalize_chart(J, p, 0.05, grid=9)
    assert res.c2_norm <= 0.05
    assert np.allclose(res.chart(p), 0)
    assert np.allclose(res.structure.matrix(np.zeros(4)), j_standard(2), atol=1e-12)
    assert check_structure(res.structure, ball_grid(4, 5)).passed
    assert c2_distance(res.structure, ball_grid(4, 9)) == pytest.approx(res.c2_norm)
    with pytest.raises(ParameterError):
        normalize_chart(J, p, 0.0)
