"""Non-isotropic dilations and the normalization/scaling pipeline near a
strictly pseudoconvex boundary point of a domain in four real dimensions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import complex_linear_frame, is_strictly_pseudoconvex
from .errors import (DegeneratePointError, DimensionError, DomainError, ModelDegeneracyError,
                     ParameterError, PreconditionError)
from .fields import (AffineMap, PolynomialScalar, PolynomialStructure, ScalarField, StructureField,
                     complex_affine, j_standard, poly_scalar, standard_structure)
from .lift import project_to_surface

NORMALIZE_TOL = 1e-10
PROJECTION_TOL = 1e-10
SURFACE_TOL = 1e-8


@dataclass(frozen=True)
class DilationSpec:
    """``nonisotropic``: ``(z1, z2) -> (d^-1/2 z1, d^-1 z2)``;
    ``isotropic``: ``z -> z / d``."""

    kind: str
    delta: float

    def __post_init__(self):
        if self.kind not in ("nonisotropic", "isotropic"):
            raise ParameterError(f"unknown dilation kind {self.kind!r}")
        if not np.isfinite(self.delta) or self.delta <= 0:
            raise ParameterError("dilation parameter must be positive")

    def factors(self, dim: int) -> np.ndarray:
        """Diagonal of the real point map."""
        if self.kind == "isotropic":
            if dim % 2:
                raise DimensionError("dimension must be even")
            return np.full(dim, 1.0 / self.delta)
        if dim != 4:
            raise DimensionError("non-isotropic dilation needs real dimension 4")
        s = self.delta ** -0.5
        return np.array([s, s, 1.0 / self.delta, 1.0 / self.delta])

    def point_map(self, dim: int = 4) -> AffineMap:
        return AffineMap(np.diag(self.factors(dim)))

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, float)
        return z * self.factors(z.shape[-1])

    def compose(self, other: DilationSpec) -> DilationSpec:
        if other.kind != self.kind:
            raise ParameterError("cannot compose dilations of different kinds")
        return DilationSpec(self.kind, self.delta * other.delta)


def dilate_structure(J: StructureField, spec: DilationSpec) -> StructureField:
    """Direct image of ``J`` under the dilation.  Polynomial entries are
    rescaled exactly: ``a_ij(w) -> (f_i / f_j) a_ij(w / f)``."""
    f = spec.factors(J.dim)
    if isinstance(J, PolynomialStructure):
        inv = 1.0 / f
        return PolynomialStructure([[p.scale_vars(inv) * (f[i] / f[j]) for j, p in enumerate(row)]
                                    for i, row in enumerate(J.entries)])
    return J.pushforward_affine(np.diag(f), np.zeros(J.dim))


def dilate_defining(rho: ScalarField, spec: DilationSpec) -> ScalarField:
    """``rho_d = d^-1 rho(Lambda^-1 w)``."""
    f = spec.factors(rho.dim)
    if isinstance(rho, PolynomialScalar):
        return PolynomialScalar(rho.poly.scale_vars(1.0 / f) * (1.0 / spec.delta))
    return rho.compose_affine(np.diag(1.0 / f), np.zeros(rho.dim)).scaled(1.0 / spec.delta)


def _complex_gradient(rho: ScalarField, t) -> np.ndarray:
    """``d rho / d z^j`` at ``t`` (standard complex coordinates)."""
    g = rho.gradient(t)
    return 0.5 * (g[0::2] - 1j * g[1::2])


@dataclass
class NormalizationStep:
    t: np.ndarray
    scale: float              # rho is replaced by scale * rho so that |grad rho(t)| = 2
    alpha: AffineMap
    L: AffineMap
    M: AffineMap
    T: AffineMap
    structure: StructureField
    defining: ScalarField
    normal: np.ndarray

    def invariant_errors(self) -> dict:
        z0 = np.zeros(4)
        lin = self.defining.gradient(z0) - np.array([0.0, 0.0, 2.0, 0.0])
        return {"T(t)": float(np.max(np.abs(self.T(self.t)))),
                "J_k(0)": float(np.max(np.abs(self.structure.matrix(z0) - j_standard(2)))),
                "linear part": float(np.max(np.abs(lin))),
                "rho_k(0)": float(abs(self.defining(z0)))}

    def check(self, tol: float = NORMALIZE_TOL) -> None:
        lim = tol * max(1.0, float(np.max(np.abs(self.T.A))))
        bad = {k: v for k, v in self.invariant_errors().items() if not v <= lim}
        if bad:
            raise DegeneratePointError(f"normalization invariants violated: {bad}")

    def normal_image(self, s) -> np.ndarray:
        """Images of ``t + s n`` with ``n`` the unit outward normal at ``t``."""
        s = np.atleast_1d(np.asarray(s, float))
        return self.T(self.t + s[:, None] * self.normal)


def pinchuk_normalize(rho: ScalarField, t, J: StructureField | None = None,
                      tol: float = NORMALIZE_TOL) -> NormalizationStep:
    """Affine chart ``T = M o L o alpha`` at the boundary point ``t``.

    ``alpha`` straightens the complex tangent, ``L`` makes the pushed structure
    standard at the origin and the complex-linear ``M`` restores the linear
    part ``2 Re z2`` of the pushed defining function."""
    t = np.asarray(t, float)
    if rho.dim != 4 or t.shape != (4,):
        raise DimensionError("normalization works in real dimension 4")
    J = standard_structure(2) if J is None else J
    if J.dim != 4:
        raise DimensionError("structure must act on R^4")
    if abs(float(rho(t))) > SURFACE_TOL:
        raise PreconditionError("t is not on the boundary")
    g = rho.gradient(t)
    gn = float(np.linalg.norm(g))
    if gn < 1e-12:
        raise DegeneratePointError("d rho vanishes at t")
    scale = 2.0 / gn
    r = rho.scaled(scale)
    dz = _complex_gradient(r, t)
    dzb = np.conj(dz)
    P = np.array([[dzb[1], -dzb[0]], [dz[0], dz[1]]])
    alpha = complex_affine(P, -P @ (t[0::2] + 1j * t[1::2]))
    J_alpha0 = alpha.A @ J.matrix(t) @ np.linalg.inv(alpha.A)
    L = AffineMap(complex_linear_frame(J_alpha0))
    LA = alpha.then(L)
    # gradient at 0 of r o (L alpha)^-1 is a real functional 2 Re(b . w)
    Ainv = np.linalg.inv(LA.A)
    gw = Ainv.T @ g * scale
    b = 0.5 * (gw[0::2] - 1j * gw[1::2])
    if abs(b[1]) < 1e-12:
        raise DegeneratePointError("complex tangent is degenerate after the frame change")
    M = complex_affine(np.array([[1.0, 0.0], [b[0], b[1]]]))
    T = LA.then(M)
    Tinv = np.linalg.inv(T.A)
    Jk = J.pushforward_affine(T.A, T.b)
    rk = r.compose_affine(Tinv, -Tinv @ T.b)
    step = NormalizationStep(t, scale, alpha, L, M, T, Jk, rk, g / gn)
    step.check(tol)
    return step


@dataclass(frozen=True)
class ModelDomain:
    """``rho_hat = 2 Re z2 + 2 Re(k z1^2) + h |z1|^2``."""

    k: complex
    h: float

    def __post_init__(self):
        if not self.h > 0:
            raise ModelDegeneracyError(f"H(z1, 0) = {self.h:.3e}|z1|^2 is not positive")

    @property
    def defining(self) -> PolynomialScalar:
        k, h = complex(self.k), float(self.h)
        return poly_scalar(4, lambda x: 2 * x[2] + 2 * (k.real * (x[0] * x[0] - x[1] * x[1])
                                                        - 2 * k.imag * x[0] * x[1])
                           + h * (x[0] * x[0] + x[1] * x[1]))

    def to_json(self) -> dict:
        return {"K": [float(np.real(self.k)), float(np.imag(self.k))], "H": float(self.h)}


def model_coefficients(rho_k: ScalarField) -> tuple[complex, float]:
    """Read ``K(z1, 0) = k z1^2`` and ``H(z1, 0) = h |z1|^2`` off the Hessian at 0."""
    H = rho_k.hessian(np.zeros(4))
    a, b, c = H[0, 0], H[0, 1], H[1, 1]
    return complex((a - c) / 8.0, -b / 4.0), float((a + c) / 4.0)


def model_domain(rho: ScalarField, t, J: StructureField | None = None) -> ModelDomain:
    J = standard_structure(2) if J is None else J
    rep = is_strictly_pseudoconvex(J, rho, [np.asarray(t, float)], surface_tol=SURFACE_TOL)
    if not rep.passed:
        raise PreconditionError("boundary is not strictly pseudoconvex at t")
    step = pinchuk_normalize(rho, t, J)
    k, h = model_coefficients(step.defining)
    return ModelDomain(k, h)


def polydisc_samples(k: int = 9, radius: float = 1.0) -> np.ndarray:
    s = np.linspace(-radius, radius, k)
    g = np.stack(np.meshgrid(s, s, s, s, indexing="ij"), axis=-1).reshape(-1, 4)
    r2 = radius * radius
    return g[(g[:, 0] ** 2 + g[:, 1] ** 2 <= r2 + 1e-12) & (g[:, 2] ** 2 + g[:, 3] ** 2 <= r2 + 1e-12)]


def scalar_c2_distance(u: ScalarField, v: ScalarField, points) -> float:
    """Sampled ``max(|u - v|, |du - dv|, |d^2 u - d^2 v|)``."""
    return max(float(np.max(np.abs(u(points) - v(points)))),
               float(np.max(np.abs(u.gradient(points) - v.gradient(points)))),
               float(np.max(np.abs(u.hessian(points) - v.hessian(points)))))


@dataclass
class ScalingElement:
    p: np.ndarray
    t: np.ndarray
    delta: float
    step: NormalizationStep
    structure: StructureField
    defining: ScalarField
    point: np.ndarray


@dataclass
class ScalingResult:
    elements: list
    model: ModelDomain
    j_sup: np.ndarray
    rho_c2: np.ndarray
    point_error: np.ndarray
    deltas: np.ndarray = field(init=False)

    def __post_init__(self):
        self.deltas = np.array([e.delta for e in self.elements])

    def rate(self, values=None) -> float:
        """Least-squares slope of ``log(values)`` against ``log(delta)``."""
        y = self.rho_c2 if values is None else np.asarray(values, float)
        keep = y > 0
        if keep.sum() < 2:
            return float("inf")
        return float(np.polyfit(np.log(self.deltas[keep]), np.log(y[keep]), 1)[0])

    def rows(self) -> list[dict]:
        return [{"k": i, "delta": float(e.delta), "J_sup": float(self.j_sup[i]),
                 "rho_c2": float(self.rho_c2[i]), "point_error": float(self.point_error[i])}
                for i, e in enumerate(self.elements)]


def scaling_sequence(rho: ScalarField, J: StructureField | None, points, t=None,
                     samples=None) -> ScalingResult:
    """Normalize at the projection of every ``p^k``, then dilate by
    ``delta_k = |p^k - t^k|``.  Diagnostics are measured on the unit polydisc
    against the model at ``t`` (default: the projection of the last point)."""
    J = standard_structure(2) if J is None else J
    points = np.atleast_2d(np.asarray(points, float))
    if points.shape[1] != 4:
        raise DimensionError("points must live in R^4")
    if np.any(rho(points) >= 0):
        raise DomainError("scaling points must lie inside {rho < 0}")
    ts = project_to_surface(rho, points, tol=PROJECTION_TOL)
    if t is None:
        t = ts[-1]
    model = model_domain(rho, t, J)
    rho_hat = model.defining
    pts = polydisc_samples() if samples is None else samples
    Jst = j_standard(2)
    elems, jd, rd, pe = [], [], [], []
    for p, tk in zip(points, ts):
        delta = float(np.linalg.norm(p - tk))
        step = pinchuk_normalize(rho, tk, J)
        spec = DilationSpec("nonisotropic", delta)
        Jh = dilate_structure(step.structure, spec)
        rh = dilate_defining(step.defining, spec)
        ph = spec(step.T(p))
        elems.append(ScalingElement(p, tk, delta, step, Jh, rh, ph))
        jd.append(float(np.max(np.abs(Jh.matrix(pts) - Jst))))
        rd.append(scalar_c2_distance(rh, rho_hat, pts))
        pe.append(float(np.linalg.norm(ph - np.array([0.0, 0.0, -1.0, 0.0]))))
    return ScalingResult(elems, model, np.array(jd), np.array(rd), np.array(pe))


__all__ = ["DilationSpec", "dilate_structure", "dilate_defining", "NormalizationStep",
           "pinchuk_normalize", "ModelDomain", "model_coefficients", "model_domain",
           "polydisc_samples", "scalar_c2_distance", "ScalingElement", "ScalingResult",
           "scaling_sequence"]
