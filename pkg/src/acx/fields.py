"""Scalar fields, almost complex structure fields and maps on a coordinate box.

Real coordinates are interleaved, ``(x1, y1, ..., xn, yn)``; a real vector
``v`` corresponds to the complex vector ``w_j = v[2j] + i v[2j+1]``.  Matrices
act on column vectors, so the standard structure sends ``dx_j`` to ``dy_j``.

Two representations exist for every field kind: polynomial (exact
derivatives, JSON serializable) and callable (user supplied oracle with
central finite differences, step ``1e-5 * scale``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError, DomainError
from .poly import Poly, PolyBatch, matadd, matmul, poly_matrix

FD_STEP = 1e-5


# ---------------------------------------------------------------------------
# complex <-> real helpers

def j_standard(n: int) -> np.ndarray:
    """Matrix of the standard structure on C^n in interleaved coordinates."""
    block = np.array([[0.0, -1.0], [1.0, 0.0]])
    return np.kron(np.eye(n), block)


def to_complex(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v[..., 0::2] + 1j * v[..., 1::2]


def to_real(w) -> np.ndarray:
    w = np.asarray(w, dtype=complex)
    out = np.empty(w.shape[:-1] + (2 * w.shape[-1],))
    out[..., 0::2] = w.real
    out[..., 1::2] = w.imag
    return out


def complex_parts(M) -> tuple[np.ndarray, np.ndarray]:
    """Split a real-linear map of C^n as ``M v = P w + Q conj(w)``."""
    M = np.asarray(M, dtype=float)
    a = M[..., 0::2, 0::2]
    b = M[..., 0::2, 1::2]
    c = M[..., 1::2, 0::2]
    d = M[..., 1::2, 1::2]
    P = 0.5 * ((a + d) + 1j * (c - b))
    Q = 0.5 * ((a - d) + 1j * (c + b))
    return P, Q


def real_matrix(P, Q=None) -> np.ndarray:
    """Inverse of :func:`complex_parts`."""
    P = np.asarray(P, dtype=complex)
    Q = np.zeros_like(P) if Q is None else np.asarray(Q, dtype=complex)
    n = P.shape[-1]
    M = np.empty(P.shape[:-2] + (2 * n, 2 * n))
    M[..., 0::2, 0::2] = (P + Q).real
    M[..., 0::2, 1::2] = (Q - P).imag
    M[..., 1::2, 0::2] = (P + Q).imag
    M[..., 1::2, 1::2] = (P - Q).real
    return M


def _check_dim(dim: int) -> int:
    dim = int(dim)
    if dim <= 0 or dim % 2:
        raise DimensionError(f"real dimension must be a positive even integer, got {dim}")
    return dim


# ---------------------------------------------------------------------------
# finite differences

def _fd_jacobian(fn: Callable, z: np.ndarray, h: float) -> np.ndarray:
    """Central differences; returns array with a new axis -(k+1) for d/dx^c at
    position right after the point axes: shape ``z.shape[:-1] + (m,) + out``."""
    z = np.asarray(z, dtype=float)
    m = z.shape[-1]
    cols = []
    for c in range(m):
        e = np.zeros(m)
        e[c] = h
        cols.append((np.asarray(fn(z + e)) - np.asarray(fn(z - e))) / (2 * h))
    return np.stack(cols, axis=z.ndim - 1)


# ---------------------------------------------------------------------------
# scalar fields

class ScalarField:
    """Real function with gradient and Hessian oracles."""

    dim: int
    representation: str

    def __call__(self, z) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, z) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, z) -> np.ndarray:
        raise NotImplementedError

    def compose_affine(self, A, b) -> ScalarField:
        """Return ``w -> self(A w + b)``."""
        return _AffineScalar(self, np.asarray(A, float), np.asarray(b, float))

    def scaled(self, factor: float) -> ScalarField:
        return _ScaledScalar(self, float(factor))


class PolynomialScalar(ScalarField):
    representation = "polynomial"

    def __init__(self, poly: Poly):
        self.poly = poly
        self.dim = _check_dim(poly.nvars)
        grad = poly.gradient()
        self._grad = PolyBatch(grad, (self.dim,))
        self._hess = PolyBatch([g.diff(j) for g in grad for j in range(self.dim)],
                               (self.dim, self.dim))

    def __call__(self, z):
        return self.poly(z)

    def gradient(self, z):
        return self._grad(z)

    def hessian(self, z):
        return self._hess(z)

    def compose_affine(self, A, b):
        return PolynomialScalar(self.poly.compose_affine(A, b))

    def scaled(self, factor):
        return PolynomialScalar(self.poly * factor)

    def to_json(self) -> dict:
        return {"dim": self.dim, "terms": self.poly.to_json()}

    @classmethod
    def from_json(cls, doc: dict) -> PolynomialScalar:
        return cls(Poly.from_json(int(doc["dim"]), doc["terms"]))


class CallableScalar(ScalarField):
    representation = "callable"

    def __init__(self, dim: int, fn: Callable, grad: Callable | None = None,
                 hess: Callable | None = None, scale: float = 1.0):
        self.dim = _check_dim(dim)
        self._fn, self._grad, self._hess = fn, grad, hess
        self.h = FD_STEP * scale

    def __call__(self, z):
        return np.asarray(self._fn(np.asarray(z, float)), float)

    def gradient(self, z):
        if self._grad is not None:
            return np.asarray(self._grad(np.asarray(z, float)), float)
        return _fd_jacobian(self, z, self.h)

    def hessian(self, z):
        if self._hess is not None:
            return np.asarray(self._hess(np.asarray(z, float)), float)
        H = _fd_jacobian(self.gradient, z, self.h)
        return 0.5 * (H + np.swapaxes(H, -1, -2))


class _AffineScalar(ScalarField):
    representation = "callable"

    def __init__(self, base: ScalarField, A: np.ndarray, b: np.ndarray):
        self.base, self.A, self.b = base, A, b
        self.dim = _check_dim(A.shape[1])

    def _x(self, z):
        return np.asarray(z, float) @ self.A.T + self.b

    def __call__(self, z):
        return self.base(self._x(z))

    def gradient(self, z):
        return self.base.gradient(self._x(z)) @ self.A

    def hessian(self, z):
        return self.A.T @ self.base.hessian(self._x(z)) @ self.A


class _ScaledScalar(ScalarField):
    representation = "callable"

    def __init__(self, base: ScalarField, factor: float):
        self.base, self.factor, self.dim = base, factor, base.dim

    def __call__(self, z):
        return self.factor * self.base(z)

    def gradient(self, z):
        return self.factor * self.base.gradient(z)

    def hessian(self, z):
        return self.factor * self.base.hessian(z)


def poly_scalar(dim: int, fn: Callable[[list[Poly]], Poly]) -> PolynomialScalar:
    """Build a polynomial field from an expression in coordinate polys."""
    xs = [Poly.var(dim, i) for i in range(dim)]
    return PolynomialScalar(fn(xs))


# ---------------------------------------------------------------------------
# structure fields

class StructureField:
    """Matrix field ``z -> J(z)`` with first and second derivative oracles.

    ``derivative(z)[..., c, i, j]`` is ``dJ_ij/dx^c``;
    ``second_derivative(z)[..., c, d, i, j]`` is ``d^2 J_ij / dx^c dx^d``.
    """

    dim: int
    representation: str

    @property
    def n(self) -> int:
        return self.dim // 2

    def matrix(self, z) -> np.ndarray:
        raise NotImplementedError

    def derivative(self, z) -> np.ndarray:
        raise NotImplementedError

    def second_derivative(self, z) -> np.ndarray:
        raise NotImplementedError

    def pushforward_affine(self, A, b) -> StructureField:
        """Direct image under the affine map ``x -> A x + b``."""
        return _AffineStructure(self, np.asarray(A, float), np.asarray(b, float))


class PolynomialStructure(StructureField):
    representation = "polynomial"

    def __init__(self, entries: Sequence[Sequence[Poly]]):
        self.entries = [list(r) for r in entries]
        self.dim = _check_dim(len(self.entries))
        if any(len(r) != self.dim for r in self.entries):
            raise DimensionError("structure matrix must be square")
        if any(p.nvars != self.dim for r in self.entries for p in r):
            raise DimensionError("entry polynomials must live on the same space")
        m = self.dim
        flat = [p for r in self.entries for p in r]
        d1 = [p.diff(c) for c in range(m) for p in flat]
        self._j = PolyBatch(flat, (m, m))
        self._d1 = PolyBatch(d1, (m, m, m))
        mm = m * m
        self._d2 = PolyBatch([d1[c * mm + k].diff(d) for c in range(m) for d in range(m)
                              for k in range(mm)], (m, m, m, m))

    def matrix(self, z):
        return self._j(z)

    def derivative(self, z):
        return self._d1(z)

    def second_derivative(self, z):
        return self._d2(z)

    def pushforward_affine(self, A, b):
        A = np.asarray(A, float)
        b = np.asarray(b, float)
        Ainv = np.linalg.inv(A)
        # J'(w) = A J(A^-1 (w - b)) A^-1
        cache: dict = {}
        inner = [[p.compose_affine(Ainv, -Ainv @ b, cache) for p in r] for r in self.entries]
        m = self.dim
        out = matmul(matmul(poly_matrix(m, A), inner), poly_matrix(m, Ainv))
        return PolynomialStructure(_prune(out))

    def to_json(self) -> dict:
        return {"dim": self.dim, "matrix": [[{"terms": p.to_json()} for p in r] for r in self.entries]}

    @classmethod
    def from_json(cls, doc: dict) -> PolynomialStructure:
        dim = int(doc["dim"])
        mat = doc["matrix"]
        return cls([[Poly.from_json(dim, e["terms"] if isinstance(e, dict) else e) for e in r]
                    for r in mat])


def _prune(M, tol: float = 1e-15):
    out = []
    for r in M:
        row = []
        for p in r:
            row.append(Poly(p.nvars, {k: v for k, v in p.terms.items() if abs(v) > tol}))
        out.append(row)
    return out


class CallableStructure(StructureField):
    representation = "callable"

    def __init__(self, dim: int, fn: Callable, derivative: Callable | None = None,
                 scale: float = 1.0):
        self.dim = _check_dim(dim)
        self._fn, self._d = fn, derivative
        self.h = FD_STEP * scale

    def matrix(self, z):
        return np.asarray(self._fn(np.asarray(z, float)), float)

    def derivative(self, z):
        if self._d is not None:
            return np.asarray(self._d(np.asarray(z, float)), float)
        return _fd_jacobian(self.matrix, z, self.h)

    def second_derivative(self, z):
        return _fd_jacobian(self.derivative, z, self.h)


class _AffineStructure(StructureField):
    representation = "callable"

    def __init__(self, base: StructureField, A, b):
        self.base, self.A, self.b = base, A, b
        self.Ainv = np.linalg.inv(A)
        self.dim = base.dim

    def _x(self, w):
        return (np.asarray(w, float) - self.b) @ self.Ainv.T

    def matrix(self, w):
        return self.A @ self.base.matrix(self._x(w)) @ self.Ainv

    def derivative(self, w):
        dJ = self.base.derivative(self._x(w))  # [..., d, i, j]
        inner = self.A @ dJ @ self.Ainv
        return np.einsum("...dij,dc->...cij", inner, self.Ainv)

    def second_derivative(self, w):
        d2 = self.base.second_derivative(self._x(w))
        inner = self.A @ d2 @ self.Ainv
        return np.einsum("...deij,dc,ef->...cfij", inner, self.Ainv, self.Ainv)


def standard_structure(n: int) -> PolynomialStructure:
    dim = 2 * n
    return PolynomialStructure(poly_matrix(dim, j_standard(n)))


def _unipotent_inverse(N: list[list[Poly]]) -> list[list[Poly]]:
    """``(I + N)^-1`` for nilpotent ``N`` as a finite Neumann series."""
    m = len(N)
    nv = N[0][0].nvars
    eye = poly_matrix(nv, np.eye(m))
    term = eye
    out = eye
    for k in range(1, m):
        term = matmul(term, N)
        out = matadd(out, term, (-1.0) ** k)
    return out


def conjugated_structure(upper: list[list[Poly]] | None, lower: list[list[Poly]] | None,
                         n: int) -> PolynomialStructure:
    """``J = S J_st S^-1`` with ``S = (I + U)(I + L)``; ``U``/``L`` strictly
    upper/lower triangular polynomial matrices.  ``J^2 = -I`` holds as an
    identity of polynomials and ``S^-1`` stays polynomial."""
    m = 2 * n
    zero = [[Poly.zero(m) for _ in range(m)] for _ in range(m)]
    U = upper if upper is not None else zero
    L = lower if lower is not None else zero
    for i in range(m):
        for j in range(m):
            if (j <= i and not U[i][j].is_zero()) or (j >= i and not L[i][j].is_zero()):
                raise ValueError("U must be strictly upper and L strictly lower triangular")
    eye = poly_matrix(m, np.eye(m))
    S = matmul(matadd(eye, U), matadd(eye, L))
    Sinv = matmul(_unipotent_inverse(L), _unipotent_inverse(U))
    J = matmul(matmul(S, poly_matrix(m, j_standard(n))), Sinv)
    return PolynomialStructure(_prune(J))


def random_structure(n: int, eps: float, rng: np.random.Generator, degree: int = 1,
                     diagonal: bool = False) -> PolynomialStructure:
    """Polynomial structure ``J_st + O(eps)`` with ``J(0) = J_st``.

    Random polynomials are normalized by their number of terms so that
    ``|J - J_st|`` stays of order ``eps`` on the unit box.  With
    ``diagonal=True`` the perturbation is confined to the 2x2 diagonal blocks.
    """
    m = 2 * n
    U = [[Poly.zero(m) for _ in range(m)] for _ in range(m)]
    L = [[Poly.zero(m) for _ in range(m)] for _ in range(m)]
    for i in range(m):
        for j in range(m):
            if i == j or (diagonal and i // 2 != j // 2):
                continue
            p = Poly.random(m, degree, rng, min_degree=1)
            p = p * (eps / max(len(p.terms), 1) ** 0.5)
            if j > i:
                U[i][j] = p
            else:
                L[i][j] = p
    return conjugated_structure(U, L, n)


def block_structure(blocks: Sequence[tuple[Poly, Poly]]) -> PolynomialStructure:
    """Diagonal structure: block ``k`` is ``S_k J_st S_k^-1`` with
    ``S_k = [[1, s_k], [0, 1]] [[1, 0], [t_k, 1]]``."""
    n = len(blocks)
    m = 2 * n
    U = [[Poly.zero(m) for _ in range(m)] for _ in range(m)]
    L = [[Poly.zero(m) for _ in range(m)] for _ in range(m)]
    for k, (s, t) in enumerate(blocks):
        U[2 * k][2 * k + 1] = s
        L[2 * k + 1][2 * k] = t
    return conjugated_structure(U, L, n)


# ---------------------------------------------------------------------------
# maps

class Diffeo:
    """Map with Jacobian ``[..., i, j] = df_i/dx_j`` and Hessian
    ``[..., d, i, j] = d^2 f_i / dx_d dx_j``."""

    dim: int

    def __call__(self, x) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, x) -> np.ndarray:
        return _fd_jacobian(self, x, FD_STEP).swapaxes(-1, -2)

    def hessian(self, x) -> np.ndarray:
        return _fd_jacobian(self.jacobian, x, FD_STEP)

    def inverse(self, y, x0=None, tol: float = 1e-13, maxiter: int = 50) -> np.ndarray:
        """Newton solve of ``f(x) = y`` (pointwise, vectorized)."""
        y = np.asarray(y, float)
        x = np.array(y if x0 is None else x0, dtype=float)
        for _ in range(maxiter):
            r = self(x) - y
            if np.max(np.abs(r)) < tol:
                break
            x = x - np.linalg.solve(self.jacobian(x), r[..., None])[..., 0]
        return x


class PolynomialMap(Diffeo):
    def __init__(self, components: Sequence[Poly], inverse_map: PolynomialMap | None = None):
        self.components = list(components)
        self.dim = self.components[0].nvars
        m = len(self.components)
        jac = [p.diff(j) for p in self.components for j in range(self.dim)]
        self._jac = PolyBatch(jac, (m, self.dim))
        self._hess = PolyBatch([q.diff(d) for d in range(self.dim) for q in jac], (self.dim, m, self.dim))
        self.inverse_map = inverse_map

    def __call__(self, x):
        x = np.asarray(x, float)
        return np.stack([p(x) for p in self.components], axis=-1)

    def jacobian(self, x):
        return self._jac(x)

    def hessian(self, x):
        return self._hess(x)

    def inverse(self, y, x0=None, tol=1e-13, maxiter=50):
        if self.inverse_map is not None:
            return self.inverse_map(y)
        return super().inverse(y, x0, tol, maxiter)


class AffineMap(PolynomialMap):
    def __init__(self, A, b=None):
        A = np.asarray(A, float)
        b = np.zeros(A.shape[0]) if b is None else np.asarray(b, float)
        self.A, self.b = A, b
        m = A.shape[1]
        comps = [sum((Poly.var(m, j, A[i, j]) for j in range(m)), Poly.const(m, b[i]))
                 for i in range(A.shape[0])]
        super().__init__(comps)

    def __call__(self, x):
        return np.asarray(x, float) @ self.A.T + self.b

    def inverse(self, y, x0=None, tol=1e-13, maxiter=50):
        return (np.asarray(y, float) - self.b) @ np.linalg.inv(self.A).T

    def then(self, other: AffineMap) -> AffineMap:
        """``other o self``."""
        return AffineMap(other.A @ self.A, other.A @ self.b + other.b)


def complex_affine(P, c=None) -> AffineMap:
    """Real form of the complex affine map ``z -> P z + c``."""
    P = np.asarray(P, dtype=complex)
    n = P.shape[0]
    c = np.zeros(n, complex) if c is None else np.asarray(c, complex)
    return AffineMap(real_matrix(P), to_real(c))


class PushforwardStructure(StructureField):
    """Direct image ``f_*(J)(w) = Df(u) J(u) Df(u)^-1`` with ``u = f^-1(w)``."""

    representation = "callable"

    def __init__(self, base: StructureField, f: Diffeo):
        self.base, self.f = base, f
        self.dim = base.dim

    def matrix(self, w):
        u = self.f.inverse(w)
        D = self.f.jacobian(u)
        return D @ self.base.matrix(u) @ np.linalg.inv(D)

    def derivative(self, w):
        u = self.f.inverse(w)
        D = self.f.jacobian(u)
        Di = np.linalg.inv(D)
        H = self.f.hessian(u)            # [..., d, i, j]
        J = self.base.matrix(u)
        dJ = self.base.derivative(u)     # [..., d, i, j]
        Jp = D @ J @ Di
        Jd = J[..., None, :, :]
        Dd, Did = D[..., None, :, :], Di[..., None, :, :]
        term = H @ Jd @ Did + Dd @ dJ @ Did - (Jp[..., None, :, :] @ H) @ Did
        return np.einsum("...dij,...dc->...cij", term, Di)

    def second_derivative(self, w):
        return _fd_jacobian(self.derivative, w, FD_STEP)


# ---------------------------------------------------------------------------
# light value types

@dataclass(frozen=True)
class BoxDomain:
    dim: int
    lo: np.ndarray
    hi: np.ndarray
    defining_function: ScalarField | None = None

    def __post_init__(self):
        _check_dim(self.dim)
        lo = np.broadcast_to(np.asarray(self.lo, float), (self.dim,)).copy()
        hi = np.broadcast_to(np.asarray(self.hi, float), (self.dim,)).copy()
        if np.any(lo >= hi):
            raise DomainError("box bounds must satisfy lo < hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def scale(self) -> float:
        return float(np.max(self.hi - self.lo))

    def contains(self, z, margin: float = 0.0) -> np.ndarray:
        z = np.asarray(z, float)
        inside = np.all((z >= self.lo) & (z <= self.hi), axis=-1)
        if self.defining_function is not None:
            inside &= self.defining_function(z) < -margin
        return inside

    def grid(self, k: int) -> np.ndarray:
        axes = [np.linspace(a, b, k) for a, b in zip(self.lo, self.hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=-1)


@dataclass(frozen=True)
class TangentVector:
    base: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        base = np.asarray(self.base, float)
        v = np.asarray(self.v, float)
        if base.shape != v.shape:
            raise DimensionError("base point and components must have the same length")
        if not (np.all(np.isfinite(base)) and np.all(np.isfinite(v))):
            raise DomainError("tangent vector entries must be finite")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "v", v)


@dataclass(frozen=True)
class FormValue:
    """Complexified covector in the real basis ``dx^k`` at ``base``."""

    base: np.ndarray
    w: np.ndarray
    bidegree: str = "mixed"
    meta: dict = field(default_factory=dict, compare=False)

    def __call__(self, X) -> complex:
        return complex(np.dot(self.w, np.asarray(X)))

    def dz_components(self) -> tuple[np.ndarray, np.ndarray]:
        """Coefficients ``(a, b)`` with ``w = sum a_j dz^j + b_j dzbar^j``."""
        wx, wy = self.w[0::2], self.w[1::2]
        return 0.5 * (wx - 1j * wy), 0.5 * (wx + 1j * wy)
