"""Discs, the Cauchy-Green transform and pseudoholomorphic disc solvers.

A disc is a map of the closed unit disc into ``C^n`` stored as coefficients
of ``zeta^j zetabar^k`` (``j + k <= N``).  The Cauchy-Green transform

    T g(tau) = (1/pi) iint_D g(zeta) / (tau - zeta) dA(zeta)

is a right inverse of ``d/dzetabar`` with ``T 1 = conj(tau)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.interpolate import BarycentricInterpolator

from .errors import (ConvergenceError, DataError, InputError, ParameterError,
                     PreconditionError)
from .fields import StructureField, complex_parts, to_real
from .poly import Poly

DEFAULT_N = 16
DEFAULT_GRID = (64, 128)
MAX_PICARD = 50


# ---------------------------------------------------------------------------
# grids

@dataclass(frozen=True)
class PolarGrid:
    Nr: int = DEFAULT_GRID[0]
    Ntheta: int = DEFAULT_GRID[1]

    def __post_init__(self):
        if self.Nr < 4 or self.Ntheta < 8:
            raise ParameterError("polar grid too coarse")

    @property
    def r(self) -> np.ndarray:
        return _gl01(self.Nr)[0]

    @property
    def weights(self) -> np.ndarray:
        return _gl01(self.Nr)[1]

    @property
    def theta(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.Ntheta) / self.Ntheta

    @property
    def points(self) -> np.ndarray:
        """Complex nodes, shape ``(Nr, Ntheta)``."""
        return self.r[:, None] * np.exp(1j * self.theta)[None, :]

    def sample(self, fn: Callable) -> np.ndarray:
        return np.asarray(fn(self.points))


@lru_cache(maxsize=None)
def _gl01(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1), 0.5 * w


# ---------------------------------------------------------------------------
# discs

def n_coeffs(N: int) -> int:
    return (N + 1) * (N + 2) // 2


def _triangle(N: int) -> np.ndarray:
    j, k = np.meshgrid(np.arange(N + 1), np.arange(N + 1), indexing="ij")
    return j + k <= N


@dataclass(frozen=True)
class Disc:
    """Truncated expansion ``f_c = sum coeffs[c, j, k] zeta^j zetabar^k``."""

    coeffs: np.ndarray
    grid: PolarGrid = field(default_factory=PolarGrid)
    structure: str | None = None
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim != 3 or c.shape[1] != c.shape[2]:
            raise ValueError("coefficients must have shape (n, N+1, N+1)")
        c[:, ~_triangle(c.shape[1] - 1)] = 0
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    # shape
    @property
    def n(self) -> int:
        return self.coeffs.shape[0]

    @property
    def dim(self) -> int:
        return 2 * self.n

    @property
    def N(self) -> int:
        return self.coeffs.shape[1] - 1

    # constructors
    @classmethod
    def zero(cls, n: int, N: int = DEFAULT_N, grid: PolarGrid | None = None) -> Disc:
        return cls(np.zeros((n, N + 1, N + 1)), grid or PolarGrid())

    @classmethod
    def holomorphic(cls, taylor, N: int = DEFAULT_N, grid: PolarGrid | None = None) -> Disc:
        """From Taylor coefficients ``taylor[c][j]`` of ``zeta^j``."""
        taylor = [np.atleast_1d(np.asarray(t, complex)) for t in taylor]
        c = np.zeros((len(taylor), N + 1, N + 1), complex)
        for i, t in enumerate(taylor):
            m = min(len(t), N + 1)
            c[i, :m, 0] = t[:m]
        return cls(c, grid or PolarGrid())

    def with_coeffs(self, coeffs, **info) -> Disc:
        return Disc(coeffs, self.grid, self.structure, {**self.info, **info})

    # evaluation
    def __call__(self, zeta) -> np.ndarray:
        """Values at complex points, shape ``zeta.shape + (n,)``."""
        zeta = np.asarray(zeta, complex)
        p = np.arange(self.N + 1)
        Z = zeta[..., None] ** p
        Zb = np.conj(zeta)[..., None] ** p
        return np.einsum("...j,cjk,...k->...c", Z, self.coeffs, Zb)

    def real(self, zeta) -> np.ndarray:
        return to_real(self(zeta))

    @property
    def samples(self) -> np.ndarray:
        """Values at the polar grid nodes, shape ``(n, Nr, Ntheta)``."""
        return np.moveaxis(self(self.grid.points), -1, 0)

    def boundary(self, m: int = 256) -> np.ndarray:
        """Values at ``m`` equispaced points of the unit circle, ``(n, m)``."""
        return np.moveaxis(self(np.exp(2j * np.pi * np.arange(m) / m)), -1, 0)

    # calculus on coefficients
    def d_zeta(self) -> Disc:
        c = np.zeros_like(self.coeffs)
        j = np.arange(1, self.N + 1)
        c[:, :-1, :] = j[None, :, None] * self.coeffs[:, 1:, :]
        return self.with_coeffs(c)

    def d_zetabar(self) -> Disc:
        c = np.zeros_like(self.coeffs)
        k = np.arange(1, self.N + 1)
        c[:, :, :-1] = k[None, None, :] * self.coeffs[:, :, 1:]
        return self.with_coeffs(c)

    def __add__(self, other: Disc) -> Disc:
        return self.with_coeffs(self.coeffs + _match(other.coeffs, self.N))

    def __sub__(self, other: Disc) -> Disc:
        return self.with_coeffs(self.coeffs - _match(other.coeffs, self.N))

    def scale(self, a: complex) -> Disc:
        return self.with_coeffs(a * self.coeffs)

    def holomorphic_part(self) -> np.ndarray:
        """Taylor coefficients of the ``zetabar``-free part, ``(n, N+1)``."""
        return self.coeffs[:, :, 0].copy()

    # serialization
    def to_json(self) -> dict:
        mask = _triangle(self.N)
        flat = self.coeffs[:, mask]
        return {
            "dim": self.dim,
            "N": self.N,
            "basis": "zeta^j zetabar^k; component-major, then j, then k; j+k<=N",
            "coefficients": [[float(v.real), float(v.imag)] for v in flat.ravel()],
            "grid": {"Nr": self.grid.Nr, "Ntheta": self.grid.Ntheta},
        }

    @classmethod
    def from_json(cls, doc: dict) -> Disc:
        n = int(doc["dim"]) // 2
        N = int(doc["N"])
        vals = np.array([complex(a, b) for a, b in doc["coefficients"]])
        if vals.size != n * n_coeffs(N):
            raise InputError("coefficient count does not match dim and N")
        c = np.zeros((n, N + 1, N + 1), complex)
        c[:, _triangle(N)] = vals.reshape(n, -1)
        g = doc.get("grid", {})
        return cls(c, PolarGrid(int(g.get("Nr", DEFAULT_GRID[0])), int(g.get("Ntheta", DEFAULT_GRID[1]))))


def _match(c: np.ndarray, N: int) -> np.ndarray:
    out = np.zeros((c.shape[0], N + 1, N + 1), complex)
    m = min(N, c.shape[1] - 1) + 1
    out[:, :m, :m] = c[:, :m, :m]
    return out


# ---------------------------------------------------------------------------
# Cauchy-Green transform

@lru_cache(maxsize=16)
def _cg_tables(Nr: int, N: int) -> dict:
    """Radial weights: output mode ``k = m - 1`` at node ``rho_i`` equals
    ``sum_j W[k][i, j] g_m(r_j)``, plus per-mode least-squares fit operators."""
    r, _ = _gl01(Nr)
    xq, wq = np.polynomial.legendre.leggauss(Nr + 16)
    tq, wq = 0.5 * (xq + 1), 0.5 * wq
    interp = BarycentricInterpolator(r, np.eye(Nr))
    inner = np.outer(r, tq)                     # nodes on [0, rho_i]
    outer = r[:, None] + np.outer(1 - r, tq)    # nodes on [rho_i, 1]
    Lin = interp(inner.ravel()).reshape(Nr, -1, Nr)
    Lout = interp(outer.ravel()).reshape(Nr, -1, Nr)
    W = {}
    for m in range(-N + 1, N + 2):
        if m <= 0:
            ker = 2 * (wq * r[:, None]) * tq[None, :] ** (1 - m)        # (r/rho)^(1-m) dr
            W[m - 1] = np.einsum("iq,iqj->ij", ker, Lin)
        else:
            ker = -2 * (wq * (1 - r)[:, None]) * (r[:, None] / outer) ** (m - 1)
            W[m - 1] = np.einsum("iq,iqj->ij", ker, Lout)
    fits = {}
    for k in range(0, N + 1):
        degs = np.arange(k, N + 1, 2)
        V = r[:, None] ** degs[None, :]
        fits[k] = (degs, np.linalg.pinv(V))
    return {"W": W, "fits": fits}


def fit_modes(modes: dict[int, np.ndarray], N: int, Nr: int) -> tuple[np.ndarray, float]:
    """Least-squares fit of radial Fourier profiles to coefficients.

    ``modes[k]`` has shape ``(n, Nr)``: the ``e^{ik theta}`` profile.  Returns
    ``(coeffs, fit residual)``.
    """
    fits = _cg_tables(Nr, N)["fits"]
    r, _ = _gl01(Nr)
    n = next(iter(modes.values())).shape[0]
    c = np.zeros((n, N + 1, N + 1), complex)
    resid = 0.0
    for k, prof in modes.items():
        if abs(k) > N:
            continue
        degs, pinv = fits[abs(k)]
        a = prof @ pinv.T                        # (n, len(degs))
        resid = max(resid, float(np.max(np.abs(a @ (r[:, None] ** degs).T - prof), initial=0.0)))
        j = (degs + k) // 2
        kk = (degs - k) // 2
        c[:, j, kk] = a
    return c, resid


def _as_grid_values(g, grid: PolarGrid) -> np.ndarray:
    if isinstance(g, Disc):
        vals = Disc(g.coeffs, grid).samples
    elif callable(g):
        vals = np.asarray(g(grid.points), complex)
    else:
        vals = np.asarray(g, complex)
    if vals.ndim == 2:
        vals = vals[None]
    if vals.shape[-2:] != (grid.Nr, grid.Ntheta):
        raise InputError(f"grid function has shape {vals.shape}, expected (..., {grid.Nr}, {grid.Ntheta})")
    if not np.all(np.isfinite(vals)):
        raise InputError("grid function contains NaN or infinite samples")
    return vals


def cauchy_green(g, N: int = DEFAULT_N, grid: PolarGrid | None = None) -> Disc:
    """``T g`` as a disc.  ``g`` may be grid samples ``(n, Nr, Ntheta)`` or
    ``(Nr, Ntheta)``, a callable of complex points, or a :class:`Disc`.

    The angular integral is done exactly per Fourier mode (trapezoid rule),
    which reduces the singular kernel to smooth radial integrals split at
    the target radius; those use Gauss-Legendre on each piece.
    """
    grid = grid or PolarGrid()
    vals = _as_grid_values(g, grid)
    G = np.fft.fft(vals, axis=-1) / grid.Ntheta
    freqs = np.fft.fftfreq(grid.Ntheta, 1.0 / grid.Ntheta).astype(int)
    index = {int(m): i for i, m in enumerate(freqs)}
    W = _cg_tables(grid.Nr, N)["W"]
    modes = {}
    for k, Wk in W.items():
        m = k + 1
        if m in index:
            modes[k] = G[..., index[m]] @ Wk.T
    c, resid = fit_modes(modes, N, grid.Nr)
    return Disc(c, grid, info={"fit_residual": resid})


def dbar_residual(f: Disc, g) -> float:
    vals = _as_grid_values(g, f.grid)
    return float(np.max(np.abs(f.d_zetabar().samples - vals)))


def dbar_solve(g, h0=None, N: int = DEFAULT_N, grid: PolarGrid | None = None) -> Disc:
    """``h0 + T g`` with ``h0`` given by Taylor coefficients (or a Disc)."""
    Tg = cauchy_green(g, N, grid)
    if h0 is None:
        out = Tg
    else:
        h = h0 if isinstance(h0, Disc) else Disc.holomorphic(h0, N, Tg.grid)
        out = Tg + h
    return out.with_coeffs(out.coeffs, residual=dbar_residual(out, g))


def cauchy_green_monomial(j: int, k: int) -> list[tuple[complex, int, int]]:
    """Closed form of ``T(zeta^j zetabar^k)`` as ``[(coeff, j', k'), ...]``."""
    out = [(1.0 / (k + 1), j, k + 1)]
    if j >= k + 1:
        out.append((-1.0 / (k + 1), j - k - 1, 0))
    return out


# ---------------------------------------------------------------------------
# deformation tensors

def q_from_matrix(M: np.ndarray) -> np.ndarray:
    """``q = (i I + P)^-1 Q`` so that ``f`` is holomorphic for the structure
    ``M`` iff ``dbar f + q(f) conj(d f) = 0``."""
    P, Q = complex_parts(M)
    n = P.shape[-1]
    return np.linalg.solve(1j * np.eye(n) + P, Q)


class DeformationTensor:
    """Oracle ``(lam, z) -> q(lam, z)`` (complex ``n x n``) with ``q(0, .) = 0``.

    ``z`` is given in real interleaved coordinates, shape ``(..., 2n)``.
    """

    def __init__(self, n: int, fn: Callable, name: str = "custom"):
        self.n, self._fn, self.name = int(n), fn, name

    def __call__(self, lam: float, z) -> np.ndarray:
        z = np.asarray(z, float)
        if lam == 0:
            return np.zeros(z.shape[:-1] + (self.n, self.n), complex)
        return np.asarray(self._fn(lam, z), complex)

    @classmethod
    def zero(cls, n: int) -> DeformationTensor:
        return cls(n, lambda lam, z: np.zeros(np.shape(z)[:-1] + (n, n), complex), "zero")

    @classmethod
    def from_structure(cls, J: StructureField, mode: str = "scaled") -> DeformationTensor:
        """``mode='scaled'``: ``q = lam * q_J(z)``; ``mode='dilated'``:
        ``q = q_J(lam z)`` (the tensor of ``z -> J(lam z)``)."""
        if mode == "scaled":
            fn = lambda lam, z: lam * q_from_matrix(J.matrix(z))
        elif mode == "dilated":
            fn = lambda lam, z: q_from_matrix(J.matrix(lam * np.asarray(z)))
        else:
            raise ParameterError(f"unknown mode {mode!r}")
        return cls(J.n, fn, f"structure/{mode}")

    def c0_norm(self, lam: float, points) -> float:
        """Sampled sup of the operator 2-norm."""
        q = self(lam, points)
        return float(np.max(np.linalg.norm(q, ord=2, axis=(-2, -1)), initial=0.0))


def _apply_q(q: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``q`` has shape ``(..., n, n)`` on grid nodes, ``w`` shape ``(n, ...)``."""
    return np.moveaxis(np.einsum("...ab,...b->...a", q, np.moveaxis(w, 0, -1)), -1, 0)


def beltrami_residual(f: Disc, q: DeformationTensor, lam: float) -> float:
    """``max |dbar f + q(f) conj(d f)|`` over grid nodes."""
    vals = f.samples
    qf = q(lam, to_real(np.moveaxis(vals, 0, -1)))
    res = f.d_zetabar().samples + _apply_q(qf, np.conj(f.d_zeta().samples))
    return float(np.max(np.abs(res)))


def solve_j_disc(q: DeformationTensor, lam: float, h, N: int = DEFAULT_N, tol: float = 1e-8,
                 grid: PolarGrid | None = None, pin: tuple | None = None,
                 max_iter: int = MAX_PICARD) -> Disc:
    """Picard iteration ``f <- h + T(-q(f) conj(d f))``.

    ``h`` is holomorphic data (Taylor coefficients or a Disc).  With
    ``pin=(p, v)`` the holomorphic part is re-adjusted every step so that
    ``f(0) = p`` and ``df(0) d/dx = v`` (complex vectors).
    """
    grid = grid or PolarGrid()
    h = h if isinstance(h, Disc) else Disc.holomorphic(h, N, grid)
    h = Disc(_match(h.coeffs, N), grid, h.structure)
    if pin is not None:
        p, v = (np.asarray(a, complex) for a in pin)
        c = h.coeffs.copy()
        c[:, 0, 0], c[:, 1, 0] = p, v
        h = h.with_coeffs(c)
    if q.name == "zero" or lam == 0:
        return h.with_coeffs(h.coeffs, residual=0.0, iterations=0, increments=[], converged=True)

    f = h
    increments: list[float] = []
    growth = 0
    converged = False
    for it in range(1, max_iter + 1):
        vals = f.samples
        qf = q(lam, to_real(np.moveaxis(vals, 0, -1)))
        g = -_apply_q(qf, np.conj(f.d_zeta().samples))
        Tg = cauchy_green(g, N, grid)
        base = h.coeffs.copy()
        if pin is not None:
            # f(0) = h0 + Tg(0); f_x(0) = h1 + dTg(0) + dbar Tg(0)
            base[:, 0, 0] = p - Tg.coeffs[:, 0, 0]
            base[:, 1, 0] = v - Tg.coeffs[:, 1, 0] - Tg.coeffs[:, 0, 1]
        new = Disc(base + Tg.coeffs, grid, h.structure)
        step = float(np.max(np.abs(new.samples - vals)))
        if increments and step > increments[-1] and step > tol:
            growth += 1
            if growth >= 5:
                raise ConvergenceError("Picard iteration is not contracting", residual=step)
        else:
            growth = 0
        increments.append(step)
        f = new
        if step < tol:
            converged = True
            break
    res = beltrami_residual(f, q, lam)
    return f.with_coeffs(f.coeffs, residual=res, iterations=len(increments),
                         increments=increments, converged=converged)


# ---------------------------------------------------------------------------
# Riemann-Hilbert problems and Bishop discs

@dataclass(frozen=True)
class RiemannHilbertData:
    """Totally real ``E = {r_1 = ... = r_n = 0}`` and a reference disc.

    ``r`` maps real points ``(..., 2n)`` to ``(..., n)``; ``dr`` returns
    ``(..., n, 2n)`` real gradients.
    """

    r: Callable
    dr: Callable
    reference: Disc
    name: str = "custom"

    @property
    def n(self) -> int:
        return self.reference.n

    def G(self, f_values: np.ndarray) -> np.ndarray:
        """``dr_i/dz^j`` at complex points ``(..., n)``: shape ``(..., n, n)``."""
        D = self.dr(to_real(f_values))
        return 0.5 * (D[..., 0::2] - 1j * D[..., 1::2])

    @classmethod
    def torus(cls, n: int, N: int = DEFAULT_N) -> RiemannHilbertData:
        """``|z_k| = 1`` with ``f0(zeta) = (zeta, ..., zeta)``."""

        def r(x):
            w = x[..., 0::2] ** 2 + x[..., 1::2] ** 2
            return w - 1

        def dr(x):
            out = np.zeros(x.shape[:-1] + (n, 2 * n))
            for k in range(n):
                out[..., k, 2 * k] = 2 * x[..., 2 * k]
                out[..., k, 2 * k + 1] = 2 * x[..., 2 * k + 1]
            return out

        f0 = Disc.holomorphic([[0, 1]] * n, N)
        return cls(r, dr, f0, "torus")


def boundary_nodes(N: int) -> np.ndarray:
    M = 4 * N + 8
    return np.exp(2j * np.pi * np.arange(M) / M)


def _holo_basis(n: int, N: int, zeta: np.ndarray) -> np.ndarray:
    """Values of the real basis of holomorphic polynomials at ``zeta``.

    Column ``2*(c*(N+1)+j) + s`` is ``i^s zeta^j e_c``; returns ``(len, n, cols)``.
    """
    P = zeta[:, None] ** np.arange(N + 1)
    cols = 2 * n * (N + 1)
    out = np.zeros((len(zeta), n, cols), complex)
    for c in range(n):
        for j in range(N + 1):
            out[:, c, 2 * (c * (N + 1) + j)] = P[:, j]
            out[:, c, 2 * (c * (N + 1) + j) + 1] = 1j * P[:, j]
    return out


def coeffs_to_real(taylor: np.ndarray) -> np.ndarray:
    t = np.asarray(taylor, complex)
    return np.stack([t.real, t.imag], axis=-1).ravel()


def real_to_coeffs(x: np.ndarray, n: int, N: int) -> np.ndarray:
    x = np.asarray(x, float).reshape(n, N + 1, 2)
    return x[..., 0] + 1j * x[..., 1]


@dataclass(frozen=True)
class RHOperator:
    matrix: np.ndarray
    n: int
    N: int

    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.matrix, compute_uv=False)

    def rank_deficiency(self, rel: float = 1e-8) -> int:
        s = np.linalg.svd(self.matrix, compute_uv=False)
        return int(self.matrix.shape[1] - np.sum(s > rel * s[0]))

    def kernel(self, rel: float = 1e-8) -> np.ndarray:
        """Orthonormal kernel basis in real coefficient space (columns)."""
        _, s, vt = np.linalg.svd(self.matrix)
        rank = int(np.sum(s > rel * s[0]))
        return vt[rank:].T


def linearized_rh_operator(data: RiemannHilbertData, N: int = DEFAULT_N,
                           rank_tol: float = 1e-10) -> RHOperator:
    """Matrix of ``h -> 2 Re[G h]`` on boundary nodes, acting on real Taylor
    coefficients of holomorphic ``h`` up to degree ``N``."""
    zeta = boundary_nodes(N)
    f0 = data.reference(zeta)
    G = data.G(f0)
    smin = np.linalg.svd(G, compute_uv=False)[..., -1]
    if np.min(smin) < rank_tol:
        raise DataError("boundary matrix G is rank deficient on the reference disc")
    B = _holo_basis(data.n, N, zeta)
    rows = 2 * np.einsum("lab,lbc->lac", G, B).real
    return RHOperator(rows.reshape(-1, B.shape[-1]), data.n, N)


def bishop_family(data: RiemannHilbertData, q: DeformationTensor, lam: float, t,
                  tol: float = 1e-10, N: int | None = None, max_iter: int = 40,
                  grid: PolarGrid | None = None) -> Disc:
    """Disc with boundary on ``E`` and kernel coordinates ``t`` relative to
    the reference disc (Gauss-Newton on the holomorphic data ``h``)."""
    N = N or data.reference.N
    grid = grid or data.reference.grid
    n = data.n
    op = linearized_rh_operator(data, N)
    K = op.kernel()
    t = np.asarray(t, float)
    if t.shape != (K.shape[1],):
        raise ParameterError(f"t must have {K.shape[1]} entries")
    x0 = coeffs_to_real(_match(data.reference.coeffs, N)[:, :, 0])
    x = x0 + K @ t
    zeta = boundary_nodes(N)
    B = _holo_basis(n, N, zeta)

    def disc_for(xv):
        return solve_j_disc(q, lam, real_to_coeffs(xv, n, N), N, tol=min(tol, 1e-10) * 1e-2,
                            grid=grid)

    res_norm = np.inf
    for _ in range(max_iter):
        f = disc_for(x)
        fb = f(zeta)
        F = np.concatenate([data.r(to_real(fb)).ravel(), K.T @ (x - x0) - t])
        res_norm = float(np.max(np.abs(F)))
        if res_norm < tol:
            bres = float(np.max(np.abs(data.r(to_real(f.boundary())))))
            return f.with_coeffs(f.coeffs, boundary_residual=bres, newton_residual=res_norm)
        Jb = 2 * np.einsum("lab,lbc->lac", data.G(fb), B).real.reshape(-1, B.shape[-1])
        Jac = np.vstack([Jb, K.T])
        dx = np.linalg.lstsq(Jac, -F, rcond=None)[0]
        x = x + dx
        if not np.all(np.isfinite(x)):
            break
    raise ConvergenceError(f"Newton iteration did not converge (residual {res_norm:.3g})",
                           residual=res_norm)


# ---------------------------------------------------------------------------
# reflection

@dataclass(frozen=True)
class ReflectedDisc:
    """``g`` on the upper half and ``conj(g(conj zeta))`` on the lower half."""

    g: Disc
    q: DeformationTensor
    lam: float

    def _piece(self, fn: Callable, zeta, conj_below: bool = True) -> np.ndarray:
        zeta = np.asarray(zeta, complex)
        up = fn(zeta)
        down = np.conj(fn(np.conj(zeta)))
        mask = (zeta.imag >= 0)[..., None]
        return np.where(mask, up, down if conj_below else fn(np.conj(zeta)))

    def __call__(self, zeta) -> np.ndarray:
        return self._piece(self.g, zeta)

    def d_zeta(self, zeta) -> np.ndarray:
        return self._piece(self.g.d_zeta(), zeta)

    def d_zetabar(self, zeta) -> np.ndarray:
        return self._piece(self.g.d_zetabar(), zeta)

    def phi(self, zeta) -> np.ndarray:
        zeta = np.asarray(zeta, complex)
        up = self.q(self.lam, to_real(self.g(zeta)))
        down = np.conj(self.q(self.lam, to_real(self.g(np.conj(zeta)))))
        return np.where((zeta.imag >= 0)[..., None, None], up, down)

    def residual(self, zeta) -> np.ndarray:
        """``|dbar g^ + phi conj(d g^)|`` at the points."""
        r = self.d_zetabar(zeta) + np.einsum("...ab,...b->...a", self.phi(zeta),
                                             np.conj(self.d_zeta(zeta)))
        return np.max(np.abs(r), axis=-1)

    def restrict_upper(self) -> ReflectedDisc:
        return self


def reflect(g: Disc, q: DeformationTensor | None = None, lam: float = 1.0,
            bound: float = 1.0, samples: int = 201) -> ReflectedDisc:
    """Schwarz-type extension across ``]-1, 1[``.

    Raises when the boundary values on the real segment are farther than
    ``bound`` from ``R^n``.
    """
    q = q or DeformationTensor.zero(g.n)
    x = np.linspace(-1, 1, samples)[1:-1]
    dist = float(np.max(np.abs(g(x.astype(complex)).imag)))
    if dist > bound:
        raise PreconditionError(f"values on the real segment are {dist:.3g} away from R^n (bound {bound})")
    return ReflectedDisc(g, q, lam)


def seam_report(R: ReflectedDisc, samples: int = 41, h: float = 1e-3) -> dict:
    """Residual on both halves and one-sided derivative mismatch on the seam.

    Derivatives across the seam use second-order one-sided stencils on each
    branch, so the comparison happens exactly on the real segment.
    """
    xs = np.linspace(-0.8, 0.8, samples)
    ys = np.linspace(0.05, 0.8, 9)
    X, Y = np.meshgrid(xs, ys)
    upper = X + 1j * Y
    upper = upper[np.abs(upper) < 0.95]
    res_up = float(np.max(R.residual(upper)))
    res_down = float(np.max(R.residual(np.conj(upper))))
    top = lambda z: R.g(z)
    bottom = lambda z: np.conj(R.g(np.conj(z)))
    x = xs.astype(complex)
    jumps = [np.abs(top(x) - bottom(x))]
    dx_top = (top(x + h) - top(x - h)) / (2 * h)
    dx_bot = (bottom(x + h) - bottom(x - h)) / (2 * h)
    dy_top = (-3 * top(x) + 4 * top(x + 1j * h) - top(x + 2j * h)) / (2 * h)
    dy_bot = (3 * bottom(x) - 4 * bottom(x - 1j * h) + bottom(x - 2j * h)) / (2 * h)
    deriv = max(float(np.max(np.abs(dx_top - dx_bot))), float(np.max(np.abs(dy_top - dy_bot))))
    return {"residual_upper": res_up, "residual_lower": res_down,
            "derivative_jump": deriv, "value_jump": float(np.max(jumps))}


# ---------------------------------------------------------------------------
# flattening a totally real curve

@dataclass(frozen=True)
class FlatteningMap:
    """Map ``u -> w`` (real interleaved coordinates) with derivative."""

    fn: Callable
    jac: Callable
    order: float
    slope: float
    k_max: int
    info: dict = field(default_factory=dict, compare=False)

    def __call__(self, u) -> np.ndarray:
        return self.fn(np.asarray(u, float))

    def jacobian(self, u) -> np.ndarray:
        return self.jac(np.asarray(u, float))


def _graph_poly(graph) -> Poly:
    if isinstance(graph, Poly):
        return graph
    return Poly(1, {(k,): float(c) for k, c in enumerate(graph)})


def _block_polys(J, comp: int, graph: Poly) -> tuple[Poly, Poly]:
    """Entries ``a = J1[0,0]``, ``c = J1[1,0]`` of the straightened block as
    polynomials in ``(X, Y)``, where ``J1`` is the image of the block under
    ``(x, y) -> (x, y - phi(x))``."""
    if not hasattr(J, "entries"):
        raise PreconditionError("flattening needs a polynomial structure")
    n2 = J.dim
    own = (2 * comp, 2 * comp + 1)
    X, Y = Poly.var(2, 0), Poly.var(2, 1)
    phi = graph.compose([X])
    dphi = graph.diff(0).compose([X])
    subs = []
    for i in range(n2):
        subs.append(X if i == own[0] else (Y + phi if i == own[1] else Poly.zero(2)))
    blk = []
    for a in own:
        row = []
        for b in own:
            p = J.entries[a][b]
            if any(e[i] for e in p.terms for i in range(n2) if i not in own):
                raise PreconditionError("structure block depends on other coordinates")
            row.append(p.compose(subs))
        blk.append(row)
    for a in range(n2):
        for b in range(n2):
            if (a // 2 != b // 2) and not J.entries[a][b].is_zero():
                raise PreconditionError("flattening needs a block-diagonal structure")
    # D M D^-1 with D = [[1, 0], [-phi', 1]], D^-1 = [[1, 0], [phi', 1]]
    m00, m01, m10, m11 = blk[0][0], blk[0][1], blk[1][0], blk[1][1]
    a = m00 + m01 * dphi
    c = (m10 + m11 * dphi) - dphi * a
    return a, c


def _taylor_table(p: Poly, X0: np.ndarray, P: int, Q: int) -> np.ndarray:
    """``T[..., i, j] = d_X^i d_Y^j p (X0, 0) / (i! j!)``."""
    from math import factorial
    out = np.zeros(X0.shape + (P + 1, Q + 1))
    pts = np.stack([X0, np.zeros_like(X0)], axis=-1)
    dx = p
    for i in range(P + 1):
        dy = dx
        for j in range(Q + 1):
            out[..., i, j] = dy(pts) / (factorial(i) * factorial(j))
            dy = dy.diff(1)
        dx = dx.diff(0)
    return out


def _flatten_jets(a: Poly, c: Poly, X0: np.ndarray, K: int):
    """Coefficient jets ``cs[j][..., p]`` of ``w = sum_j c_j(X) Y^j`` solving
    ``w_Y = i B w_X`` (``B = (1 + i a) / c``) with ``c_0 = X``, expanded in
    ``X - X0`` to order ``K + 1``."""
    L = K + 2
    A = _taylor_table(a, X0, L - 1, K).astype(complex)
    C = _taylor_table(c, X0, L - 1, K).astype(complex)
    Nm = 1j * A
    Nm[..., 0, 0] += 1
    B = np.zeros_like(C)
    for s in range(L + K + 1):
        for p in range(L):
            q = s - p
            if q < 0 or q > K:
                continue
            acc = Nm[..., p, q].copy()
            for p2 in range(p + 1):
                for q2 in range(q + 1):
                    if p2 == 0 and q2 == 0:
                        continue
                    acc -= C[..., p2, q2] * B[..., p - p2, q - q2]
            B[..., p, q] = acc / C[..., 0, 0]
    cs = [np.zeros(X0.shape + (L,), complex)]
    cs[0][..., 0] = X0
    cs[0][..., 1] = 1
    for j in range(K):
        nxt = np.zeros_like(cs[0])
        for aa in range(j + 1):
            cb = cs[j - aa]
            der = np.zeros_like(cb)
            der[..., :-1] = cb[..., 1:] * np.arange(1, L)
            for p in range(L):
                nxt[..., p] += np.sum(B[..., : p + 1, aa] * der[..., p::-1], axis=-1)
        cs.append(1j * nxt / (j + 1))
    return cs


def flatten_totally_real(J: StructureField, graphs, k_max: int = 4,
                         fit_points: int = 12) -> FlatteningMap:
    """Coordinates in which ``E = {y_j = phi_j(x_j)}`` becomes ``R^n`` and the
    deformation tensor vanishes to order ``k_max`` along ``R^n``.

    ``graphs[j]`` is a polynomial in one variable (coefficient list or
    :class:`Poly`).  The structure must be polynomial and split: block ``j``
    may depend on ``z_j`` only.
    """
    n = J.n
    if len(graphs) != n:
        raise ParameterError("one graph function per complex coordinate is required")
    polys = [_graph_poly(g) for g in graphs]
    for phi in polys:
        if abs(phi.diff(0)(np.zeros(1))) > 1e-12:
            raise PreconditionError("E must be tangent to R^n at the origin (dphi(0) = 0)")
    blocks = [_block_polys(J, c, polys[c]) for c in range(n)]

    def parts(u):
        u = np.asarray(u, float)
        out = []
        for c, (a, cc) in enumerate(blocks):
            x, y = u[..., 2 * c], u[..., 2 * c + 1]
            Yv = y - polys[c](x[..., None])
            cs = _flatten_jets(a, cc, x, k_max)
            powers = Yv[..., None] ** np.arange(k_max + 1)
            vals = np.stack([cj[..., 0] for cj in cs], axis=-1)
            dX = np.stack([cj[..., 1] for cj in cs], axis=-1)
            w = np.sum(vals * powers, axis=-1)
            wX = np.sum(dX * powers, axis=-1)
            wY = np.sum(vals[..., 1:] * powers[..., :-1] * np.arange(1, k_max + 1), axis=-1)
            dphi = polys[c].diff(0)(x[..., None])
            out.append((w, wX - wY * dphi, wY))
        return out

    def fn(u):
        u = np.asarray(u, float)
        res = np.empty_like(u)
        for c, (w, _, _) in enumerate(parts(u)):
            res[..., 2 * c], res[..., 2 * c + 1] = w.real, w.imag
        return res

    def jac(u):
        u = np.asarray(u, float)
        res = np.zeros(u.shape[:-1] + (2 * n, 2 * n))
        for c, (_, wx, wy) in enumerate(parts(u)):
            i = 2 * c
            res[..., i, i], res[..., i, i + 1] = wx.real, wy.real
            res[..., i + 1, i], res[..., i + 1, i + 1] = wx.imag, wy.imag
        return res

    slope, ys, qs = _vanishing_fit(J, polys, fn, jac, fit_points)
    order = float(round(slope)) if np.isfinite(slope) else np.inf
    return FlatteningMap(fn, jac, order, slope, k_max,
                         {"heights": ys.tolist(), "tensor": qs.tolist()})


def pushed_tensor(J: StructureField, jac: Callable, u: np.ndarray) -> np.ndarray:
    D = jac(u)
    M = D @ J.matrix(u) @ np.linalg.inv(D)
    return q_from_matrix(M)


def _vanishing_fit(J, polys, fn, jac, m: int):
    """Slope of ``log max|q|`` against ``log |Im w|`` near ``R^n``."""
    n = J.n
    xs = np.linspace(-0.2, 0.2, 5)
    heights = np.geomspace(0.05, 0.003, m)
    qs, ys = [], []
    for s in heights:
        pts = np.zeros((len(xs), 2 * n))
        for c in range(n):
            pts[:, 2 * c] = xs
            pts[:, 2 * c + 1] = polys[c](xs[:, None]) + s
        w = fn(pts)
        qs.append(np.max(np.abs(pushed_tensor(J, jac, pts))))
        ys.append(np.mean(np.abs(w[:, 1::2])))
    qs, ys = np.array(qs), np.array(ys)
    ok = qs > 1e-14
    if ok.sum() < 3:
        return np.inf, ys, qs
    slope = np.polyfit(np.log(ys[ok]), np.log(qs[ok]), 1)[0]
    return float(slope), ys, qs
