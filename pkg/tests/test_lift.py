import numpy as np
import pytest

from acx.core import holomorphic_tangent, levi_min_on_tangent
from acx.errors import AssemblyError, DegeneratePointError, ParameterError, PreconditionError
from acx.fields import CallableStructure, PolynomialScalar, PushforwardStructure, random_structure
from acx.lift import (CotangentPoint, LiftedStructure, canonical_form_residual, conormal_bundle,
                      cotangent_differential, cotangent_map, lift_grid, lift_invariance_check,
                      lift_structure, lifted_residual_on_grid, nijenhuis, nijenhuis_tensor,
                      total_reality_test)

from conftest import sphere_points


def bracket_fd(U, V, z, h=1e-5):
    """[U, V] = DV U - DU V by central differences."""
    E = np.eye(len(z))
    DV = np.stack([(V(z + h * e) - V(z - h * e)) / (2 * h) for e in E], 1)
    DU = np.stack([(U(z + h * e) - U(z - h * e)) / (2 * h) for e in E], 1)
    return DV @ U(z) - DU @ V(z)


def test_nijenhuis_matches_vector_field_definition(rng):
    J = random_structure(2, 0.3, rng, degree=2)
    z = rng.uniform(-0.5, 0.5, 4)
    X, Y = rng.normal(size=4), rng.normal(size=4)
    F = J.matrix
    const = lambda v: (lambda w: v + 0 * w)
    FX = lambda w: F(w) @ X
    FY = lambda w: F(w) @ Y
    expected = (bracket_fd(FX, FY, z) - F(z) @ bracket_fd(FX, const(Y), z)
                - F(z) @ bracket_fd(const(X), FY, z) - bracket_fd(const(X), const(Y), z))
    assert np.allclose(nijenhuis(J, X, Y, z), expected, atol=1e-8)
    assert np.allclose(nijenhuis(J, X, Y, z), -nijenhuis(J, Y, X, z), atol=1e-14)


def test_nijenhuis_vanishes_for_integrable_structures(jst2, shear):
    Jp = PushforwardStructure(jst2, shear)
    assert np.max(np.abs(nijenhuis_tensor(Jp, np.array([0.3, -0.2, 0.1, 0.4])))) < 1e-12


def test_nijenhuis_is_natural(rng, shear):
    J = random_structure(2, 0.2, rng)
    Jp = PushforwardStructure(J, shear)
    x = rng.uniform(-0.3, 0.3, 4)
    D = shear.jacobian(x)
    Di = np.linalg.inv(D)
    pushed = np.einsum("ka,aij,ib,jc->kbc", D, nijenhuis_tensor(J, x), Di, Di)
    assert np.allclose(pushed, nijenhuis_tensor(Jp, shear(x)), atol=1e-10)


def test_lift_squares_to_minus_identity(rng):
    J = random_structure(2, 0.1, rng, degree=2)
    L = LiftedStructure(J)
    xs, ps = lift_grid(4, 3)
    assert lifted_residual_on_grid(L, xs, ps) < 1e-9
    y = np.concatenate([rng.uniform(-0.5, 0.5, (6, 4)), rng.normal(size=(6, 4))], axis=1)
    M = L.matrix(y)
    assert np.max(np.abs(M @ M + np.eye(8))) < 1e-9


def test_lift_of_jst_is_block_diagonal(jst2):
    M = LiftedStructure(jst2).matrix(np.ones(8))
    assert np.allclose(M[:4, 4:], 0) and np.allclose(M[4:, :4], 0)
    assert np.allclose(M[4:, 4:], jst2.matrix(np.ones(4)).T)


def test_lift_structure_rejects_non_structures():
    bad = CallableStructure(4, lambda z: np.broadcast_to(2 * np.eye(4), np.shape(z)[:-1] + (4, 4)))
    with pytest.raises(AssemblyError):
        lift_structure(bad, k=2)


@pytest.mark.parametrize("eps", [0.0, 0.1])
def test_lift_is_natural_under_holomorphic_shear(rng, shear, eps):
    J = random_structure(2, eps, rng)
    Jp = PushforwardStructure(J, shear)
    xs = rng.uniform(-0.5, 0.5, (5, 4))
    ps = rng.normal(size=(5, 4))
    rep = lift_invariance_check(shear, J, Jp, xs, ps)
    assert rep.passed and rep.max_residual < 1e-12


def test_invariance_check_requires_pushforward(rng, shear):
    J = random_structure(2, 0.1, rng)
    with pytest.raises(PreconditionError):
        lift_invariance_check(shear, J, J, rng.normal(size=(2, 4)) * 0.3, rng.normal(size=(2, 4)))


def test_cotangent_map_preserves_canonical_form(rng, shear):
    pt = CotangentPoint(rng.uniform(-0.5, 0.5, 4), rng.normal(size=4))
    assert canonical_form_residual(shear, pt) < 1e-13
    h = 1e-6
    y = pt.stacked

    def F(v):
        return cotangent_map(shear, CotangentPoint(v[:4], v[4:])).stacked

    fd = np.stack([(F(y + h * e) - F(y - h * e)) / (2 * h) for e in np.eye(8)], axis=1)
    assert np.allclose(fd, cotangent_differential(shear, pt), atol=1e-7)


def test_cotangent_point_validation():
    with pytest.raises(ParameterError):
        CotangentPoint(np.zeros(4), np.zeros(3))


def test_conormal_covector_annihilates_holomorphic_tangent(rng, ball):
    J = random_structure(2, 0.1, rng)
    z = sphere_points(rng, 1)[0]
    s = conormal_bundle(ball.defining_function, J, z, 1.5)
    H = holomorphic_tangent(J, ball.defining_function, z)
    assert np.allclose(s.phi @ H, 0)
    with pytest.raises(PreconditionError):
        conormal_bundle(ball.defining_function, J, 0.5 * z, 1.0)
    with pytest.raises(ParameterError):
        conormal_bundle(ball.defining_function, J, z, 0.0)


def test_total_reality_agrees_with_levi_nondegeneracy(jst2, x4, rng):
    x = x4
    cases = {
        "sphere": (PolynomialScalar(sum(v * v for v in x) - 1), sphere_points(rng, 4)),
        "concave": (PolynomialScalar(2 * x[2] - x[0] ** 2 - x[1] ** 2), None),
        "flat": (PolynomialScalar(2 * x[2]), None),
        "harmonic": (PolynomialScalar(2 * x[2] + x[0] ** 2 - x[1] ** 2), None),
    }
    for name, (rho, pts) in cases.items():
        if pts is None:
            pts = rng.uniform(-0.5, 0.5, (4, 4))
            # solve rho = 0 for x2, which enters linearly with coefficient 2
            pts[:, 2] = 0
            pts[:, 2] = -rho(pts) / 2
        real = total_reality_test(rho, jst2, pts)
        nondegenerate = np.array([abs(levi_min_on_tangent(jst2, rho, z)) > 1e-6 for z in pts])
        assert np.all(nondegenerate == (real.angles > real.threshold)), name


def test_degenerate_conormal_point(jst2, x4):
    with pytest.raises(DegeneratePointError):
        conormal_bundle(PolynomialScalar(x4[0] ** 2 + x4[1] ** 2), jst2, np.zeros(4), 1.0)
