"""Almost complex lift of a structure to the cotangent bundle.

Points of ``T*R^{2n}`` are pairs ``(x, p)``; tangent vectors are stacked as
``(dx, dp)``.  The lift is ``J~ = E^ + (1/2) gamma(N_J)`` where ``E^`` is the
complete lift and ``gamma`` places ``p . S(e_h, e_i)`` in the fiber-row,
base-column block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (AssemblyError, ConditioningError, DegeneratePointError,
                     ParameterError, PreconditionError)
from .fields import Diffeo, ScalarField, StructureField

LIFT_TOL = 1e-9


@dataclass(frozen=True)
class CotangentPoint:
    x: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, float)
        p = np.asarray(self.p, float)
        if x.shape != p.shape:
            raise ParameterError("base and fiber must have the same length")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "p", p)

    @property
    def stacked(self) -> np.ndarray:
        return np.concatenate([self.x, self.p], axis=-1)

    @classmethod
    def from_stacked(cls, y) -> CotangentPoint:
        y = np.asarray(y, float)
        m = y.shape[-1] // 2
        return cls(y[..., :m], y[..., m:])


def nijenhuis_tensor(F: StructureField, z) -> np.ndarray:
    """``T[..., k, i, j] = N(e_i, e_j)^k`` for constant coordinate fields."""
    z = np.asarray(z, float)
    M = F.matrix(z)                 # [..., a, b]
    dF = F.derivative(z)            # [..., c, a, b]
    # [FX, FY]^k = (FX)^c d_c(FY)^k - (FY)^c d_c(FX)^k
    t1 = np.einsum("...ci,...ckj->...kij", M, dF)
    br = t1 - np.swapaxes(t1, -1, -2)
    # -F[FX, Y] = F (Y^c d_c F X);  -F[X, FY] = -F (X^c d_c F Y)
    u = np.einsum("...ka,...jai->...kij", M, dF)
    return br + u - np.swapaxes(u, -1, -2)


def nijenhuis(F: StructureField, X, Y, z) -> np.ndarray:
    T = nijenhuis_tensor(F, z)
    return np.einsum("...kij,...i,...j->...k", T, np.asarray(X, float), np.asarray(Y, float))


def _fiber_block_W(dE: np.ndarray, p: np.ndarray) -> np.ndarray:
    """``W[h, i] = p_a (d_i E^a_h - d_h E^a_i)`` (row ``h``, column ``i``)."""
    A = np.einsum("...a,...iah->...hi", p, dE)
    return A - np.swapaxes(A, -1, -2)


def _assemble(top: np.ndarray, lower: np.ndarray) -> np.ndarray:
    m = top.shape[-1]
    out = np.zeros(top.shape[:-2] + (2 * m, 2 * m))
    out[..., :m, :m] = top
    out[..., m:, :m] = lower
    out[..., m:, m:] = np.swapaxes(top, -1, -2)
    return out


def complete_lift(E: StructureField, pt: CotangentPoint) -> np.ndarray:
    """Block matrix ``[[E, 0], [W, E^T]]`` at ``pt``."""
    return _assemble(E.matrix(pt.x), _fiber_block_W(E.derivative(pt.x), pt.p))


def gamma_block(S: np.ndarray, p: np.ndarray) -> np.ndarray:
    """``gamma S`` for a vector valued 2-tensor ``S[..., k, i, h]``: the
    fiber row ``h`` receives ``p . S(e_i, e_h)`` from base column ``i``."""
    m = S.shape[-1]
    G = np.einsum("...k,...kih->...hi", p, S)
    out = np.zeros(G.shape[:-2] + (2 * m, 2 * m))
    out[..., m:, :m] = G
    return out


@dataclass(frozen=True)
class LiftedStructure:
    base: StructureField

    @property
    def dim(self) -> int:
        return 2 * self.base.dim

    def parts(self, x, p):
        """``(complete lift, gamma(N_J))`` as full matrices."""
        x = np.asarray(x, float)
        p = np.asarray(p, float)
        M = self.base.matrix(x)
        T = nijenhuis_tensor(self.base, x)
        NJ = np.einsum("...kij,...jl->...kil", T, M)      # N(X, JY)
        return (_assemble(M, _fiber_block_W(self.base.derivative(x), p)),
                gamma_block(NJ, p))

    def matrix(self, y) -> np.ndarray:
        y = np.asarray(y, float)
        m = self.base.dim
        E, G = self.parts(y[..., :m], y[..., m:])
        return E + 0.5 * G

    def residual(self, y) -> float:
        M = self.matrix(y)
        return float(np.max(np.abs(M @ M + np.eye(self.dim))))


def lift_grid(dim: int, k: int = 5, x_radius: float = 0.5, p_radius: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Tensor grids ``k^dim`` for base points and fiber covectors."""
    def grid(r):
        axis = np.linspace(-r, r, k)
        mesh = np.meshgrid(*([axis] * dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)
    return grid(x_radius), grid(p_radius)


def lifted_residual_on_grid(L: LiftedStructure, xs: np.ndarray, ps: np.ndarray) -> float:
    """``max |J~^2 + I|`` over all pairs of the two point sets.

    The lift is affine in ``p``, so each base point costs one structure
    evaluation and the fiber grid is handled by broadcasting.
    """
    m = L.base.dim
    M = L.base.matrix(xs)
    W0 = np.einsum("...iah->...ahi", L.base.derivative(xs))
    W0 = W0 - np.swapaxes(W0, -1, -2)                       # [x, a, h, i]
    T = nijenhuis_tensor(L.base, xs)
    G0 = np.einsum("...kij,...jl->...kli", T, M)            # [x, k, h, i]
    C0 = W0 + 0.5 * G0                                      # lower block per unit p_a
    worst = 0.0
    eye = np.eye(m)
    for i in range(len(xs)):
        C = np.einsum("pa,ahi->phi", ps, C0[i])             # [p, h, i]
        Mi = M[i]
        # J~^2 = [[M^2, 0], [C M + M^T C, (M^T)^2]]
        off = C @ Mi + Mi.T @ C
        worst = max(worst, float(np.max(np.abs(off))),
                    float(np.max(np.abs(Mi @ Mi + eye))))
    return worst


def lift_structure(J: StructureField, validate: bool = True, k: int = 3,
                   tol: float = LIFT_TOL) -> LiftedStructure:
    """Assemble the lift and check ``J~^2 = -I`` on a ``k^(2n)`` x ``k^(2n)`` grid."""
    L = LiftedStructure(J)
    if validate:
        xs, ps = lift_grid(J.dim, k)
        res = lifted_residual_on_grid(L, xs, ps)
        if res > tol:
            raise AssemblyError(f"lifted structure fails J~^2 = -I by {res:.3g}")
    return L


# ---------------------------------------------------------------------------
# cotangent maps

def _jac_checked(f: Diffeo, x) -> np.ndarray:
    D = f.jacobian(x)
    if np.any(np.abs(np.linalg.det(D)) < 1e-14):
        raise DegeneratePointError("differential is singular")
    return D


def cotangent_map(f: Diffeo, pt: CotangentPoint) -> CotangentPoint:
    """``(f(x), Df(x)^{-T} p)``."""
    D = _jac_checked(f, pt.x)
    p2 = np.linalg.solve(np.swapaxes(D, -1, -2), pt.p[..., None])[..., 0]
    return CotangentPoint(f(pt.x), p2)


def cotangent_differential(f: Diffeo, pt: CotangentPoint) -> np.ndarray:
    """Jacobian of :func:`cotangent_map` in stacked coordinates."""
    D = _jac_checked(f, pt.x)
    Dit = np.linalg.inv(np.swapaxes(D, -1, -2))
    H = f.hessian(pt.x)                       # [..., c, i, j] = d_c d_j f_i
    q = np.einsum("...ij,...j->...i", Dit, pt.p)
    # d_c (D^{-T} p) = -D^{-T} (d_c D)^T D^{-T} p
    dq = -np.einsum("...ik,...cjk,...j->...ic", Dit, H, q)
    m = D.shape[-1]
    out = np.zeros(D.shape[:-2] + (2 * m, 2 * m))
    out[..., :m, :m] = D
    out[..., m:, :m] = dq
    out[..., m:, m:] = Dit
    return out


def canonical_form_residual(f: Diffeo, pt: CotangentPoint) -> float:
    """``max |(f~^* theta - theta)(e_k)|`` with ``theta = p dx``."""
    y2 = cotangent_map(f, pt)
    dF = cotangent_differential(f, pt)
    m = pt.x.shape[-1]
    pulled = np.einsum("...i,...ik->...k", y2.p, dF[..., :m, :])
    theta = np.concatenate([pt.p, np.zeros_like(pt.p)], axis=-1)
    return float(np.max(np.abs(pulled - theta)))


@dataclass(frozen=True)
class InvarianceReport:
    max_residual: float
    precondition_residual: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.threshold


def lift_invariance_check(f: Diffeo, J: StructureField, Jp: StructureField, xs, ps,
                          tol: float = 1e-6, pre_tol: float = 1e-8) -> InvarianceReport:
    """Max of ``|d f~ J~ - J~' d f~|`` over all pairs ``(x, p)``."""
    xs = np.atleast_2d(np.asarray(xs, float))
    ps = np.atleast_2d(np.asarray(ps, float))
    D = f.jacobian(xs)
    pre = float(np.max(np.abs(D @ J.matrix(xs) - Jp.matrix(f(xs)) @ D)))
    if pre > pre_tol:
        raise PreconditionError(f"f does not carry J to J' (residual {pre:.3g})")
    L, Lp = LiftedStructure(J), LiftedStructure(Jp)
    X = np.repeat(xs, len(ps), axis=0)
    P = np.tile(ps, (len(xs), 1))
    pt = CotangentPoint(X, P)
    dF = cotangent_differential(f, pt)
    img = cotangent_map(f, pt)
    res = dF @ L.matrix(pt.stacked) - Lp.matrix(img.stacked) @ dF
    return InvarianceReport(float(np.max(np.abs(res))), pre, tol)


# ---------------------------------------------------------------------------
# conormal bundles

@dataclass(frozen=True)
class ConormalSample:
    z: np.ndarray
    c: float
    phi: np.ndarray      # complex covector c * d_J rho in the dx basis

    @property
    def point(self) -> CotangentPoint:
        """Real covector ``Re phi``."""
        return CotangentPoint(self.z, self.phi.real)


def conormal_bundle(rho: ScalarField, J: StructureField, z, c: float,
                    surface_tol: float = 1e-8) -> ConormalSample:
    """The conormal covector ``c * d_J rho(z)`` at a point of ``{rho = 0}``."""
    z = np.asarray(z, float)
    if abs(float(rho(z))) > surface_tol:
        raise PreconditionError("point is not on the hypersurface")
    if c == 0:
        raise ParameterError("c = 0 is the zero section")
    g = rho.gradient(z)
    if np.linalg.norm(g) < 1e-12:
        raise DegeneratePointError("d rho vanishes")
    phi = 0.5 * float(c) * (g - 1j * (g @ J.matrix(z)))
    return ConormalSample(z, float(c), phi)


def project_to_surface(rho: ScalarField, z, tol: float = 1e-13, maxiter: int = 50) -> np.ndarray:
    """Newton along the gradient onto ``{rho = 0}``."""
    z = np.array(z, float)
    for _ in range(maxiter):
        v = rho(z)
        if np.max(np.abs(v)) < tol:
            break
        g = rho.gradient(z)
        gg = np.sum(g * g, axis=-1)
        if np.any(gg < 1e-24):
            raise DegeneratePointError("d rho vanishes during projection")
        z = z - (v / gg)[..., None] * g
    return z


@dataclass(frozen=True)
class TotalRealityReport:
    angles: np.ndarray
    threshold: float

    @property
    def min_angle(self) -> float:
        return float(np.min(self.angles))

    @property
    def passed(self) -> bool:
        return bool(np.all(self.angles > self.threshold))


def conormal_tangent_basis(rho: ScalarField, J: StructureField, z, c: float = 1.0,
                           h: float = 1e-5) -> np.ndarray:
    """Columns spanning ``T Sigma`` at the conormal point over ``z``, from
    central differences of ``(s, c) -> (z(s), Re(c d_J rho(z(s))))``."""
    z = np.asarray(z, float)
    g = rho.gradient(z)
    _, _, vt = np.linalg.svd(g[None, :])
    chart = vt[1:]                                # tangent directions of the surface

    def param(s, cc):
        zz = project_to_surface(rho, z + s @ chart)
        return conormal_bundle(rho, J, zz, cc).point.stacked

    cols = []
    for k in range(chart.shape[0]):
        e = np.zeros(chart.shape[0])
        e[k] = h
        cols.append((param(e, c) - param(-e, c)) / (2 * h))
    zero = np.zeros(chart.shape[0])
    cols.append((param(zero, c + h) - param(zero, c - h)) / (2 * h))
    return np.stack(cols, axis=1)


def principal_angle(T: np.ndarray, S: np.ndarray) -> float:
    """Smallest principal angle between the column spans."""
    Q1, _ = np.linalg.qr(T)
    Q2, _ = np.linalg.qr(S)
    s = np.linalg.svd(Q1.T @ Q2, compute_uv=False)
    return float(np.arccos(np.clip(s[0], -1.0, 1.0)))


def total_reality_test(rho: ScalarField, J: StructureField, points, lifted: LiftedStructure | None = None,
                       tol: float = 1e-3, c: float = 1.0, h: float = 1e-5,
                       max_cond: float = 1e8) -> TotalRealityReport:
    """Smallest angle between ``T Sigma`` and ``J~ T Sigma`` at each sample."""
    L = lifted or LiftedStructure(J)
    angles = []
    for z in np.atleast_2d(np.asarray(points, float)):
        T = conormal_tangent_basis(rho, J, z, c, h)
        if np.linalg.cond(T) > max_cond:
            raise ConditioningError("tangent basis of the conormal bundle is ill-conditioned")
        y = conormal_bundle(rho, J, z, c).point.stacked
        angles.append(principal_angle(T, L.matrix(y) @ T))
    return TotalRealityReport(np.array(angles), tol)
