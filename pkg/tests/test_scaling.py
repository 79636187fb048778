import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acx.core import check_structure, is_strictly_pseudoconvex
from acx.errors import (DimensionError, DomainError, ModelDegeneracyError, ParameterError,
                        PreconditionError)
from acx.fields import (PolynomialStructure, block_structure, j_standard, poly_scalar,
                        random_structure, standard_structure)
from acx.poly import Poly
from acx.scaling import (DilationSpec, ModelDomain, dilate_defining, dilate_structure,
                         model_coefficients, model_domain, pinchuk_normalize, polydisc_samples,
                         scalar_c2_distance, scaling_sequence)

PTS = polydisc_samples(5)


def _var(i):
    return Poly.var(4, i)


def sphere():
    return poly_scalar(4, lambda x: x[0] ** 2 + x[1] ** 2 + x[2] ** 2 + x[3] ** 2 - 1)


def model():
    return poly_scalar(4, lambda x: 2 * x[2] + x[0] ** 2 + x[1] ** 2)


def test_dilation_spec_validation_and_factors():
    d = DilationSpec("nonisotropic", 0.25)
    assert np.allclose(d.factors(4), [2, 2, 4, 4])
    assert np.allclose(DilationSpec("isotropic", 0.5).factors(2), [2, 2])
    assert np.allclose(d([1, 1, 1, 1]), [2, 2, 4, 4])
    with pytest.raises(ParameterError):
        DilationSpec("nonisotropic", 0.0)
    with pytest.raises(ParameterError):
        DilationSpec("parabolic", 0.1)
    with pytest.raises(DimensionError):
        d.factors(6)


def test_dilated_defining_function_closed_form():
    rho = poly_scalar(4, lambda x: 2 * x[2] + x[0] ** 2 + x[1] ** 2 + x[2] ** 2 + x[3] ** 2)
    got = dilate_defining(rho, DilationSpec("nonisotropic", 0.1))
    expected = poly_scalar(4, lambda x: 2 * x[2] + x[0] ** 2 + x[1] ** 2 + 0.1 * (x[2] ** 2 + x[3] ** 2))
    assert scalar_c2_distance(got, expected, PTS) < 1e-13


def test_model_is_dilation_invariant():
    for delta in (0.5, 0.01):
        got = dilate_defining(model(), DilationSpec("nonisotropic", delta))
        assert scalar_c2_distance(got, model(), PTS) < 1e-12


def test_weighted_entry_is_fixed_by_dilation(x4):
    E = [row[:] for row in standard_structure(2).entries]
    E[2][0] = E[2][0] + x4[0]
    J = PolynomialStructure(E)
    Jd = dilate_structure(J, DilationSpec("nonisotropic", 0.01))
    assert Jd.entries[2][0] == x4[0]


def test_polynomial_dilation_matches_generic_pushforward(rng):
    J = random_structure(2, 0.2, rng, degree=2)
    spec = DilationSpec("nonisotropic", 0.3)
    fast = dilate_structure(J, spec)
    slow = J.pushforward_affine(np.diag(spec.factors(4)), np.zeros(4))
    assert np.allclose(fast.matrix(PTS), slow.matrix(PTS))
    assert check_structure(fast, PTS).passed


@settings(max_examples=10, deadline=None)
@given(st.floats(0.01, 1.0), st.floats(0.01, 1.0))
def test_dilations_compose(a, b):
    J = block_structure([(0.1 * _var(0) * _var(2), 0.2 * _var(3)), (0.1 * _var(1), 0.3 * _var(0) ** 2)])
    A, B = DilationSpec("nonisotropic", a), DilationSpec("nonisotropic", b)
    twice = dilate_structure(dilate_structure(J, A), B)
    once = dilate_structure(J, A.compose(B))
    assert np.max(np.abs(twice.matrix(PTS) - once.matrix(PTS))) < 1e-9


def test_nonisotropic_dilation_flattens_structures():
    J = block_structure([(0.05 * _var(0) * _var(1) + 0.05 * _var(2), 0.05 * _var(2)),
                         (0.05 * _var(1) + 0.03 * _var(0) * _var(3), 0.05 * _var(0))])
    ds = 2.0 ** -np.arange(2, 9)
    sup = [np.max(np.abs(dilate_structure(J, DilationSpec("nonisotropic", d)).matrix(PTS) - j_standard(2)))
           for d in ds]
    assert np.all(np.diff(sup) < 0)
    assert np.polyfit(np.log(ds), np.log(sup), 1)[0] >= 0.4


def test_normalization_of_sphere():
    t = np.array([0, 0, 0, 1.0])
    step = pinchuk_normalize(sphere(), t)
    assert max(step.invariant_errors().values()) < 1e-12
    img = step.normal_image([1e-3, -1e-3])
    assert np.allclose(img[:, [0, 1, 3]], 0, atol=1e-14)
    assert np.allclose(img[:, 2], [1e-3, -1e-3])
    m = model_domain(sphere(), t)
    assert m.h == pytest.approx(1.0) and abs(m.k) < 1e-12


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_sphere_model_is_the_same_at_every_point(seed):
    p = np.random.default_rng(seed).normal(size=4)
    t = p / np.linalg.norm(p)
    m = model_domain(sphere(), t)
    assert m.h == pytest.approx(1.0, abs=1e-9) and abs(m.k) < 1e-9


def test_model_coefficients_read_k_and_h():
    rho = poly_scalar(4, lambda x: 2 * x[2] + x[0] ** 2 + x[1] ** 2 + (x[0] ** 2 - x[1] ** 2) - 0.6 * x[0] * x[1])
    k, h = model_coefficients(rho)
    assert h == pytest.approx(1.0) and k == pytest.approx(0.5 + 0.15j)
    m = model_domain(rho, np.zeros(4))
    assert scalar_c2_distance(m.defining, rho, PTS) < 1e-12
    assert is_strictly_pseudoconvex(standard_structure(2), m.defining, [np.zeros(4)]).passed


def test_model_degeneracy_is_reported():
    with pytest.raises(ModelDegeneracyError):
        ModelDomain(0.5, 0.0)
    flat = poly_scalar(4, lambda x: 2 * x[2] + x[0] ** 2 - x[1] ** 2)
    with pytest.raises(PreconditionError):
        model_domain(flat, np.zeros(4))


def test_normalization_with_structure_is_standard_at_origin(rng):
    J = random_structure(2, 0.1, rng)
    t = np.array([0.6, 0, 0, 0.8])
    step = pinchuk_normalize(sphere(), t, J)
    assert np.allclose(step.structure.matrix(np.zeros(4)), j_standard(2), atol=1e-12)
    assert np.allclose(step.defining.gradient(np.zeros(4)), [0, 0, 2, 0], atol=1e-12)
    with pytest.raises(PreconditionError):
        pinchuk_normalize(sphere(), 0.5 * t, J)


def test_model_sequence_is_stationary():
    P = np.array([[0, 0, -2.0 ** -k, 0] for k in range(1, 6)])
    R = scaling_sequence(model(), None, P)
    assert np.max(R.rho_c2) < 1e-12 and np.max(R.j_sup) < 1e-12
    assert np.max(R.point_error) < 1e-12


def test_scaling_sequence_rejects_exterior_points():
    with pytest.raises(DomainError):
        scaling_sequence(model(), None, [[0, 0, 1.0, 0]])
