"""Structure checks, type splitting, Levi forms, pseudoconvexity and charts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (ConvergenceError, DegeneratePointError, DimensionError,
                     ParameterError, PreconditionError)
from .fields import (AffineMap, CallableScalar, FormValue, PolynomialScalar, PolynomialStructure,
                     ScalarField, StructureField, TangentVector, j_standard)

STRUCTURE_TOL = 1e-10


@dataclass(frozen=True)
class StructureReport:
    max_residual: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.threshold


def check_structure(J: StructureField, samples, tol: float = STRUCTURE_TOL) -> StructureReport:
    """Largest entry of ``J^2 + I`` over the sample points."""
    samples = np.atleast_2d(np.asarray(samples, float))
    M = np.asarray(J.matrix(samples))
    if M.ndim < 2 or M.shape[-1] != M.shape[-2]:
        raise DimensionError("structure matrix is not square")
    if M.shape[-1] % 2:
        raise DimensionError("structure matrix has odd size")
    res = M @ M + np.eye(M.shape[-1])
    return StructureReport(float(np.max(np.abs(res))), tol)


def split_vector(J: StructureField, v: TangentVector) -> tuple[np.ndarray, np.ndarray]:
    Jv = J.matrix(v.base) @ v.v
    return 0.5 * (v.v - 1j * Jv), 0.5 * (v.v + 1j * Jv)


def _form_split(J: StructureField, u: ScalarField, z) -> tuple[np.ndarray, np.ndarray]:
    z = np.asarray(z, float)
    w = u.gradient(z)
    wJ = w @ J.matrix(z)
    return 0.5 * (w - 1j * wJ), 0.5 * (w + 1j * wJ)


def dbar(J: StructureField, u: ScalarField, z) -> FormValue:
    """(0,1) part of ``du`` at ``z``; annihilates T^(1,0)."""
    return FormValue(np.asarray(z, float), _form_split(J, u, z)[1], "(0,1)")


def del_(J: StructureField, u: ScalarField, z) -> FormValue:
    """(1,0) part of ``du`` at ``z``."""
    return FormValue(np.asarray(z, float), _form_split(J, u, z)[0], "(1,0)")


def levi_matrix(J: StructureField, r: ScalarField, z) -> np.ndarray:
    """Matrix ``M`` with ``levi_form(X) = X^T M X`` (not symmetrized).

    Uses the pullback ``theta = dr o J``, ``theta_k = sum_i r_i J_ik``, and
    ``-d theta(X, JX) / 4``; the factor makes ``|z|^2`` give ``|v|^2`` for
    the standard structure.
    """
    z = np.asarray(z, float)
    g = r.gradient(z)
    H = r.hessian(z)
    Jm = J.matrix(z)
    dJ = J.derivative(z)                      # [..., c, i, k]
    # D[..., j, k] = d_j theta_k
    D = H @ Jm + np.einsum("...i,...jik->...jk", g, dJ)
    omega = D - np.swapaxes(D, -1, -2)
    return -0.25 * omega @ Jm


def levi_form(J: StructureField, r: ScalarField, X: TangentVector) -> float:
    M = levi_matrix(J, r, X.base)
    return float(X.v @ M @ X.v)


def holomorphic_tangent(J: StructureField, r: ScalarField, z) -> np.ndarray:
    """Orthonormal real basis (columns) of ``{v : dr(v) = dr(Jv) = 0}``."""
    z = np.asarray(z, float)
    g = r.gradient(z)
    if np.linalg.norm(g) < 1e-12:
        raise DegeneratePointError(f"dr vanishes at {z.tolist()}")
    rows = np.stack([g, g @ J.matrix(z)])
    _, s, vt = np.linalg.svd(rows)
    return vt[2:].T


def levi_min_on_tangent(J: StructureField, r: ScalarField, z) -> float:
    B = holomorphic_tangent(J, r, z)
    if B.shape[1] == 0:
        return np.inf
    M = B.T @ levi_matrix(J, r, z) @ B
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


@dataclass(frozen=True)
class PseudoconvexityReport:
    minima: np.ndarray
    threshold: float

    @property
    def min_value(self) -> float:
        return float(np.min(self.minima))

    @property
    def passed(self) -> bool:
        return bool(np.all(self.minima > self.threshold))


def is_strictly_pseudoconvex(J: StructureField, r: ScalarField, points,
                             surface_tol: float = 1e-8,
                             threshold: float = 1e-9) -> PseudoconvexityReport:
    """Minimum of the Levi form over unit vectors of the holomorphic tangent
    at every sample.  ``threshold`` absorbs round-off on Levi-flat samples."""
    points = np.atleast_2d(np.asarray(points, float))
    vals = r(points)
    if np.any(np.abs(vals) > surface_tol):
        raise PreconditionError("sample points are not on the hypersurface r = 0")
    minima = np.array([levi_min_on_tangent(J, r, z) for z in points])
    return PseudoconvexityReport(minima, threshold)


def psh_defining_function(rho: ScalarField, C: float) -> ScalarField:
    """``rho + C rho^2`` with chain-rule derivatives."""
    C = float(C)
    if isinstance(rho, PolynomialScalar):
        return PolynomialScalar(rho.poly + C * rho.poly * rho.poly)

    def grad(z):
        return (1 + 2 * C * rho(z))[..., None] * rho.gradient(z)

    def hess(z):
        g = rho.gradient(z)
        return ((1 + 2 * C * rho(z))[..., None, None] * rho.hessian(z)
                + 2 * C * g[..., :, None] * g[..., None, :])

    return CallableScalar(rho.dim, lambda z: rho(z) + C * rho(z) ** 2, grad, hess)


# ---------------------------------------------------------------------------
# charts

def ball_grid(dim: int, k: int = 17, radius: float = 1.0) -> np.ndarray:
    """Points of the ``k^dim`` tensor grid on ``[-radius, radius]^dim`` that lie
    in the closed ball."""
    axis = np.linspace(-radius, radius, k)
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    return pts[np.sum(pts ** 2, axis=-1) <= radius ** 2 + 1e-12]


def c2_distance(J: StructureField, points, reference=None) -> float:
    """Sampled ``max(|J - J0|, |dJ|, |d^2 J|)`` (entrywise sup) over points."""
    points = np.atleast_2d(np.asarray(points, float))
    J0 = j_standard(J.n) if reference is None else reference
    out = 0.0
    for chunk in np.array_split(points, max(1, len(points) // 4000)):
        out = max(out,
                  float(np.max(np.abs(J.matrix(chunk) - J0))),
                  float(np.max(np.abs(J.derivative(chunk)))),
                  float(np.max(np.abs(J.second_derivative(chunk)))))
    return out


def complex_linear_frame(J0: np.ndarray) -> np.ndarray:
    """Real matrix ``P`` with ``P J0 = J_st P`` closest to the identity in the
    Frobenius norm."""
    m = J0.shape[0]
    Jst = j_standard(m // 2)
    # row-major vec: vec(P J0) = (I kron J0^T) vec P, vec(Jst P) = (Jst kron I) vec P
    K = np.kron(np.eye(m), J0.T) - np.kron(Jst, np.eye(m))
    _, s, vt = np.linalg.svd(K)
    null = vt[np.sum(s > 1e-10 * max(s[0], 1.0)):]
    P = (null.T @ (null @ np.eye(m).ravel())).reshape(m, m)
    if np.linalg.cond(P) > 1e12:
        raise DegeneratePointError("no invertible complex-linear frame near the identity")
    return P


@dataclass(frozen=True)
class ChartResult:
    chart: AffineMap
    structure: StructureField
    lam: float
    c2_norm: float


def normalize_chart(J: StructureField, p, lam0: float, max_halvings: int = 30,
                    grid: int = 17) -> ChartResult:
    """Affine chart ``z = P (q - p) / lam`` with ``z_*(J)(0) = J_st`` and sampled
    ``C^2`` distance to ``J_st`` on the unit ball at most ``lam0``."""
    if lam0 <= 0:
        raise ParameterError("lam0 must be positive")
    p = np.asarray(p, float)
    P = complex_linear_frame(J.matrix(p))
    pts = ball_grid(J.dim, grid)
    base = J.pushforward_affine(P, -P @ p)
    lam = 1.0
    for _ in range(max_halvings):
        if isinstance(base, PolynomialStructure):
            # z_lam = z_1 / lam, so the pushed field is the base field at lam * w
            Jhat = PolynomialStructure([[e.scale_vars(np.full(J.dim, lam)) for e in r]
                                        for r in base.entries])
        else:
            Jhat = base.pushforward_affine(np.eye(J.dim) / lam, np.zeros(J.dim))
        norm = c2_distance(Jhat, pts)
        if norm <= lam0:
            A = P / lam
            return ChartResult(AffineMap(A, -A @ p), Jhat, lam, norm)
        lam *= 0.5
    raise ConvergenceError(f"C2 distance {norm:.3g} still above {lam0} after {max_halvings} halvings",
                           residual=norm)
