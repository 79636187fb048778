"""Two-sided estimates of the Kobayashi-Royden metric and boundary diagnostics.

Upper bounds come from explicit J-holomorphic discs found by bisection on the
scale ``alpha``.  Lower bounds come from a plurisubharmonic certificate: a
negative psh ``u`` with ``u - c|z|^2`` psh and a Chirka-type weight
``log theta(|w|^2) + A|z - q| + B|w|^2``, ``w = (z - q)/r``, which give

    K(q, v) >= sqrt(c / (2 B exp(1 + A C'))) |v| / |u(q)|^(1/2).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import holomorphic_tangent, levi_matrix, psh_defining_function
from .disc import DEFAULT_N, DeformationTensor, Disc, PolarGrid, solve_j_disc
from .errors import (AcxError, CertificateRejected, ConvergenceError, DomainError,
                     InconclusiveError, ParameterError, PreconditionError, SearchRangeError)
from .fields import (BoxDomain, Diffeo, PolynomialScalar, PolynomialStructure,
                     ScalarField, StructureField, j_standard, to_complex, to_real)
from .lift import project_to_surface
from .poly import Poly

CONTAINMENT_MARGIN = 1e-6
ALPHA_RANGE = (1e-6, 1e6)
LOCALIZATION_S = 0.25
LEVI_TOL = 1e-9


@dataclass(frozen=True)
class MetricQuery:
    domain: BoxDomain
    structure: StructureField
    q: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        if self.domain.defining_function is None:
            raise DomainError("metric queries need a domain with a defining function")
        q = np.asarray(self.q, float)
        v = np.asarray(self.v, float)
        if q.shape != (self.domain.dim,) or v.shape != q.shape:
            raise ParameterError("point and vector must match the domain dimension")
        if not self.domain.contains(q):
            raise DomainError("base point is not inside the domain")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "v", v)

    @property
    def rho(self) -> ScalarField:
        return self.domain.defining_function

    def with_vector(self, v) -> MetricQuery:
        return MetricQuery(self.domain, self.structure, self.q, v)


def domain_samples(domain: BoxDomain, k: int | None = None, target: int = 5000) -> np.ndarray:
    """Tensor-grid points of the box that lie strictly inside the domain."""
    k = k or max(5, int(round(target ** (1.0 / domain.dim))))
    pts = domain.grid(k)
    return pts[domain.contains(pts)]


# ---------------------------------------------------------------------------
# upper bound

def _is_standard(J: StructureField) -> bool:
    if not isinstance(J, PolynomialStructure):
        return False
    J0 = j_standard(J.n)
    for i, row in enumerate(J.entries):
        for j, p in enumerate(row):
            if p.terms != Poly.const(J.dim, J0[i, j]).terms:
                return False
    return True


def deformation_for(J: StructureField) -> DeformationTensor:
    return DeformationTensor.zero(J.n) if _is_standard(J) else DeformationTensor.from_structure(J)


SEED_SHAPES = (("linear",) + tuple(f"fejer{s}{m}" for m in (2, 4, 8, 16) for s in "-+")
               + tuple(f"mobius{s}{k}" for k in (0.5, 0.75, 0.875, 0.9375) for s in "-+"))


def seed_taylor(p, w, shape: str, N: int) -> np.ndarray:
    """Holomorphic seed with ``h(0) = p`` and ``h'(0) = w``.

    ``fejer+M`` uses ``w sum_k (1 - k/(M+1)) zeta^k / (1 - 1/(M+1))``, whose
    component along ``w`` stays above ``-(M+1)/(2M)`` times ``|w|``; it is the
    truncated half-plane map and suits directions transverse to the boundary.
    ``fejer-M`` is the same disc precomposed with ``zeta -> -zeta`` and
    negated, so it stays short on the ``+w`` side.  ``mobius+k`` is the
    truncation of ``w zeta / (1 - k zeta)``, a round disc shifted along
    ``+w``; ``mobius-k`` shifts along ``-w``.
    """
    n = len(p)
    if shape == "linear":
        out = np.zeros((n, 2), complex)
        out[:, 1] = w
    elif shape.startswith("fejer") and shape[5:6] in "+-" and shape[6:].isdigit():
        M = min(int(shape[6:]), N)
        k = np.arange(N + 1)
        weights = np.where((k >= 1) & (k <= M), 1 - k / (M + 1), 0.0) / (1 - 1 / (M + 1))
        if shape[5] == "-":
            weights = weights * (-1.0) ** (k + 1)
        out = (w[:, None] * weights[None, :]).astype(complex)
    elif shape.startswith("mobius") and shape[6:7] in "+-":
        kap = float(shape[7:]) * (1 if shape[6] == "+" else -1)
        k = np.arange(N + 1)
        weights = np.where(k >= 1, kap ** np.maximum(k - 1, 0), 0.0)
        out = (w[:, None] * weights[None, :]).astype(complex)
    else:
        raise ParameterError(f"unknown seed shape {shape!r}")
    out[:, 0] = p
    return out


def _trial_disc(query: MetricQuery, tensor: DeformationTensor, alpha: float, N: int,
                grid: PolarGrid, shape: str = "linear") -> Disc | None:
    p = to_complex(query.q)
    w = to_complex(query.v) / alpha
    try:
        f = solve_j_disc(tensor, 1.0, seed_taylor(p, w, shape, N), N, grid=grid, pin=(p, w))
    except ConvergenceError:
        return None
    if not f.info.get("converged", True):
        return None
    return f


def disc_inside(f: Disc, domain: BoxDomain, margin: float = CONTAINMENT_MARGIN, m: int = 256) -> bool:
    """``rho(f) <= -margin`` at the grid nodes and on the boundary circle."""
    pts = np.concatenate([to_real(np.moveaxis(f.samples, 0, -1)).reshape(-1, f.dim),
                          to_real(np.moveaxis(f.boundary(m), 0, -1))])
    return bool(np.all(domain.contains(pts, margin=margin)))


def kr_upper(query: MetricQuery, tol: float = 1e-3, N: int = DEFAULT_N,
             grid: PolarGrid | None = None, shapes=SEED_SHAPES) -> tuple[float, Disc]:
    """Least feasible ``alpha`` (relative tolerance ``tol``) and its disc.

    A trial is feasible when, for some seed shape, the pinned disc with
    ``f(0) = q`` and ``df(0) d/dx = v / alpha`` stays inside the domain with
    margin.
    """
    if tol <= 0:
        raise ParameterError("tol must be positive")
    grid = grid or PolarGrid(16, 32)
    tensor = deformation_for(query.structure)

    order = list(shapes)

    def feasible(alpha):
        for shape in list(order):
            f = _trial_disc(query, tensor, alpha, N, grid, shape)
            if f is not None and disc_inside(f, query.domain):
                order.remove(shape)
                order.insert(0, shape)
                return f.with_coeffs(f.coeffs, seed=shape)
        return None

    lo, hi = ALPHA_RANGE
    best = feasible(hi)
    if best is None:
        raise SearchRangeError(f"no feasible alpha in [{lo:g}, {hi:g}]")
    f_lo = feasible(lo)
    if f_lo is not None:
        return lo, f_lo
    while hi / lo - 1 > tol:
        mid = np.sqrt(lo * hi)
        f = feasible(mid)
        if f is None:
            lo = mid
        else:
            hi, best = mid, f
    return float(hi), best


# ---------------------------------------------------------------------------
# Chirka weight

RISE = 300.0        # slope of s (log theta)' just after s = 1/3


def _cutoff_constants(rise: float = RISE) -> tuple[float, float]:
    """Kink ``s1`` and drop slope ``beta`` of ``h = s (log theta)'``.

    ``h`` is 1 up to ``1/3``, rises with slope ``rise`` to ``s1``, then falls
    linearly to 0 at ``2/3``; ``beta`` makes ``int h / s = log 3`` so that
    ``theta`` reaches 1.  The weight needs ``B >= beta``.
    """
    a, e = 1 / 3, 2 / 3

    def total(beta):
        s1 = (beta * e - 1 + rise * a) / (rise + beta)
        p1 = 1 - rise * a            # h = p1 + rise s on [a, s1]
        up = p1 * np.log(s1 / a) + rise * (s1 - a)
        down = beta * e * np.log(e / s1) - beta * (e - s1)
        return up + down - np.log(3), s1

    lo, hi = 1.0, 100.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if total(mid)[0] < 0:
            lo = mid
        else:
            hi = mid
    return total(hi)[1], hi


_S1, BETA = _cutoff_constants()


def log_theta(s):
    """``(log theta, (log theta)', (log theta)'')`` for the cutoff ``theta``.

    ``theta(s) = s`` on ``[0, 1/3]`` and ``1`` on ``[2/3, oo)``; it is
    nondecreasing and ``C^{1,1}``, which is all the Levi test needs.
    """
    s = np.asarray(s, float)
    a, e = 1 / 3, 2 / 3
    p1 = 1 - RISE * a
    lt_s1 = np.log(a) + p1 * np.log(_S1 / a) + RISE * (_S1 - a)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.select([s <= a, s <= _S1, s <= e],
                        [np.log(s),
                         np.log(a) + p1 * np.log(s / a) + RISE * (s - a),
                         lt_s1 + BETA * e * np.log(s / _S1) - BETA * (s - _S1)],
                        0.0)
        h = np.select([s <= a, s <= _S1, s <= e], [1.0, p1 + RISE * s, BETA * (e - s)], 0.0)
        dh = np.select([s <= a, s <= _S1, s <= e], [0.0, RISE, -BETA], 0.0)
        d1 = h / s
        d2 = (dh * s - h) / s ** 2
    return val, d1, d2


def theta(s):
    return np.exp(log_theta(s)[0])


def _radial_parts(z, q, r):
    """Values, gradients and Hessians of ``log theta(s)``, ``|z-q|`` and ``s``
    with ``s = |z-q|^2 / r^2``."""
    d = np.asarray(z, float) - q
    s = np.sum(d * d, axis=-1) / r ** 2
    ds = 2 * d / r ** 2
    eye = np.eye(d.shape[-1])
    dds = np.broadcast_to(2 * eye / r ** 2, d.shape + (d.shape[-1],))
    lt, l1, l2 = log_theta(s)
    g_log = l1[..., None] * ds
    h_log = l2[..., None, None] * ds[..., :, None] * ds[..., None, :] + l1[..., None, None] * dds
    # |z - q|
    nd = np.sqrt(np.sum(d * d, axis=-1))
    u = d / nd[..., None]
    g_abs = u
    h_abs = (eye - u[..., :, None] * u[..., None, :]) / nd[..., None, None]
    return (lt, g_log, h_log), (nd, g_abs, h_abs), (s, ds, dds)


class ChirkaWeight(ScalarField):
    """``log theta(|z-q|^2/r^2) + A |z-q| + B |z-q|^2/r^2`` (singular at ``q``)."""

    def __init__(self, q, r: float, A: float, B: float):
        self.q = np.asarray(q, float)
        self.dim = self.q.shape[0]
        self.r, self.A, self.B = float(r), float(A), float(B)

    def _mix(self, z, idx):
        parts = _radial_parts(z, self.q, self.r)
        return parts[0][idx] + self.A * parts[1][idx] + self.B * parts[2][idx]

    def __call__(self, z):
        return self._mix(z, 0)

    def gradient(self, z):
        return self._mix(z, 1)

    def hessian(self, z):
        return np.asarray(self._mix(z, 2))


class _Jet(ScalarField):
    """Scalar field from precomputed gradient/Hessian arrays at fixed points."""

    def __init__(self, dim, grad, hess):
        self.dim, self._g, self._h = dim, grad, hess

    def __call__(self, z):
        return np.zeros(np.shape(z)[:-1])

    def gradient(self, z):
        return self._g

    def hessian(self, z):
        return self._h


def _sym_levi(J: StructureField, g, H, pts) -> np.ndarray:
    M = levi_matrix(J, _Jet(J.dim, g, H), pts)
    return 0.5 * (M + np.swapaxes(M, -1, -2))


def chirka_samples(dim: int, radii=None, n_dirs: int = 16, seed: int = 0) -> np.ndarray:
    """Points ``w`` of the unit ball on a radial ``10^-2`` grid off the origin."""
    radii = np.arange(1, 101) / 100.0 if radii is None else np.asarray(radii, float)
    rng = np.random.default_rng(seed)
    dirs = np.concatenate([np.eye(dim), rng.normal(size=(n_dirs, dim))])
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    return (radii[:, None, None] * dirs[None]).reshape(-1, dim)


@dataclass(frozen=True)
class ChirkaLevi:
    """Symmetrized Levi matrices of the three weight components at points."""
    log: np.ndarray
    abs: np.ndarray
    quad: np.ndarray

    def min_eig(self, A: float, B: float) -> np.ndarray:
        return np.linalg.eigvalsh(self.log + A * self.abs + B * self.quad)[..., 0]

    def ok(self, A: float, B: float) -> bool:
        scale = np.max(np.abs(self.log), axis=(-2, -1)) + A * np.max(np.abs(self.abs), axis=(-2, -1)) + B
        return bool(np.all(self.min_eig(A, B) >= -LEVI_TOL * scale))


def chirka_levi(J: StructureField, q, r: float, samples=None,
                domain: BoxDomain | None = None) -> ChirkaLevi:
    """Levi data at ``q + r w``; with ``domain``, only points inside it."""
    q = np.asarray(q, float)
    w = chirka_samples(J.dim) if samples is None else samples
    pts = q + r * w
    if domain is not None:
        pts = pts[domain.contains(pts)]
    (_, gl, hl), (_, ga, ha), (_, gs, hs) = _radial_parts(pts, q, r)
    return ChirkaLevi(_sym_levi(J, gl, hl, pts), _sym_levi(J, ga, ha, pts),
                      _sym_levi(J, gs, np.asarray(hs), pts))


A_GRID = np.concatenate([[0.0], np.logspace(-2, 2, 17)])
B_GRID = np.logspace(-2, 2, 161)


def chirka_constants(J: StructureField, q, radius_of_B, diameter: float = 0.0,
                     samples=None, domain: BoxDomain | None = None) -> tuple[float, float]:
    """Pair ``(A, B)`` on ``A_GRID x B_GRID`` making the weight psh on the
    samples and maximizing the certificate constant, i.e. minimizing
    ``B exp(A C')``; ``radius_of_B`` gives the weight radius.

    Positivity is monotone in ``B`` for fixed ``A`` (the ``B`` term is a
    positive Levi form near the standard structure), so each ``A`` gets a
    binary search over ``B_GRID``.
    """
    cache: dict[int, ChirkaLevi] = {}

    def ok(A, i):
        if i not in cache:
            cache[i] = chirka_levi(J, q, radius_of_B(B_GRID[i]), samples, domain)
        return cache[i].ok(A, B_GRID[i])

    best = None
    for A in A_GRID:
        growth = np.exp(A * diameter)
        hi = len(B_GRID) - 1
        if best is not None:
            # only B with B * growth < best cost can improve
            hi = int(np.searchsorted(B_GRID, best[0] / growth)) - 1
        if hi < 0:
            break
        if not ok(A, hi):
            continue
        lo = -1                       # invariant: ok(A, hi), not ok(A, lo) (or lo = -1)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if ok(A, mid):
                hi = mid
            else:
                lo = mid
        cost = B_GRID[hi] * growth
        if best is None or cost < best[0]:
            best = (cost, float(A), float(B_GRID[hi]))
    if best is None:
        raise CertificateRejected("no Chirka constants on the search grid")
    return best[1], best[2]


# ---------------------------------------------------------------------------
# certificates

@dataclass(frozen=True)
class PshCertificate:
    u: ScalarField
    c: float
    L: float
    A: float
    B: float
    tau: float
    r: float
    q: np.ndarray
    diameter: float
    samples: np.ndarray = field(repr=False)

    @property
    def constant(self) -> float:
        """``c' = sqrt(c / (2 B exp(1 + A C')))``."""
        return certificate_constant(self.c, self.A, self.B, self.diameter)

    def to_json(self) -> dict:
        return {"c": self.c, "L": self.L, "A": self.A, "B": self.B, "tau": self.tau,
                "r": self.r, "diameter": self.diameter, "constant": self.constant}


def certificate_constant(c: float, A: float, B: float, diameter: float) -> float:
    return float(np.sqrt(c / (2 * B * np.exp(1 + A * diameter))))


def _euclid_levi(J: StructureField, pts) -> np.ndarray:
    g = 2 * pts
    H = np.broadcast_to(2 * np.eye(pts.shape[-1]), pts.shape + (pts.shape[-1],))
    return _sym_levi(J, g, H, pts)


def convexity_constant(J: StructureField, u: ScalarField, pts) -> float:
    """Largest ``c`` with ``Levi(u) - c Levi(|z|^2) >= 0`` at every sample."""
    Lu = _sym_levi(J, u.gradient(pts), u.hessian(pts), pts)
    Ln = _euclid_levi(J, pts)
    C = np.linalg.cholesky(Ln)
    X = np.linalg.solve(C, Lu)
    Y = np.linalg.solve(C, np.swapaxes(X, -1, -2))
    return float(np.min(np.linalg.eigvalsh(0.5 * (Y + np.swapaxes(Y, -1, -2)))[..., 0]))


def build_certificate(query: MetricQuery, u: ScalarField | None = None, c: float | None = None,
                      A: float | None = None, B: float | None = None,
                      samples=None) -> PshCertificate:
    """Certificate for ``query``; unspecified pieces are found automatically.

    ``u`` defaults to ``rho + C rho^2`` with the smallest ``C`` on a short
    ladder for which ``u - c|z|^2`` is psh with ``c > 0`` and ``u < 0``.
    """
    J, rho = query.structure, query.rho
    pts = domain_samples(query.domain) if samples is None else np.asarray(samples, float)
    pts = np.concatenate([pts, query.q[None]])
    if u is None:
        for C in (0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0):
            cand = psh_defining_function(rho, C)
            if np.all(cand(pts) < 0):
                cc = convexity_constant(J, cand, pts)
                if cc > 0:
                    u = cand
                    break
        else:
            raise CertificateRejected("no psh defining function on the ladder")
    if c is None:
        c = convexity_constant(J, u, pts) * (1 - 1e-9)
        if c <= 0:
            raise CertificateRejected("u - c|z|^2 is not psh for any c > 0")
    uq = float(u(query.q))
    if uq >= 0:
        raise CertificateRejected("u(q) must be negative")
    L = float(-np.min(u(pts)))
    diameter = float(np.max(np.linalg.norm(pts - query.q, axis=-1)))

    def radius(Bv):
        return float(np.sqrt(2 * Bv * abs(uq) / c))

    if A is None or B is None:
        A, B = chirka_constants(J, query.q, radius, diameter, domain=query.domain)
    return PshCertificate(u, float(c), L, float(A), float(B), 1.0 / abs(uq), radius(B),
                          query.q, diameter, pts)


def verify_certificate(cert: PshCertificate, J: StructureField, domain: BoxDomain | None = None) -> dict:
    """Recheck every invariant on the stored samples; raises on failure."""
    pts = cert.samples
    uv = cert.u(pts)
    if np.any(uv >= 0):
        raise CertificateRejected("u is not negative on the samples")
    if np.any(uv < -cert.L - 1e-12):
        raise CertificateRejected("u drops below -L")
    Lu = _sym_levi(J, cert.u.gradient(pts), cert.u.hessian(pts), pts)
    lev = np.linalg.eigvalsh(Lu - cert.c * _euclid_levi(J, pts))[..., 0]
    if np.any(lev < -LEVI_TOL * (1 + np.max(np.abs(Lu)))):
        raise CertificateRejected(f"u - c|z|^2 fails psh test (min {lev.min():.3g})")
    if not chirka_levi(J, cert.q, cert.r, domain=domain).ok(cert.A, cert.B):
        raise CertificateRejected("Chirka weight is not psh on the samples")
    return {"u_max": float(uv.max()), "levi_min": float(lev.min())}


def kr_lower_certificate(query: MetricQuery, cert: PshCertificate, verify: bool = True) -> float:
    if verify:
        verify_certificate(cert, query.structure, query.domain)
    return cert.constant * float(np.linalg.norm(query.v)) / np.sqrt(abs(float(cert.u(query.q))))


def localization_check(f: Disc, query: MetricQuery, radius: float, s: float = LOCALIZATION_S,
                       m: int = 64) -> bool:
    """``f(s Delta)`` inside ``D`` and inside the ball of ``radius`` about ``q``."""
    zeta = s * np.concatenate([f.grid.points.ravel(), np.exp(2j * np.pi * np.arange(m) / m)])
    pts = to_real(f(zeta))
    near = np.linalg.norm(pts - query.q, axis=-1) < radius
    return bool(np.all(near) and np.all(query.domain.contains(pts)))


@dataclass(frozen=True)
class MetricBracket:
    lower: float
    upper: float
    witness_disc: Disc
    certificate: PshCertificate
    localized: bool

    def __post_init__(self):
        if self.lower > self.upper + 1e-8:
            raise AcxError(f"bracket inverted: lower {self.lower:.6g} > upper {self.upper:.6g}")

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)

    @property
    def ratio(self) -> float:
        return self.upper / self.lower if self.lower > 0 else np.inf

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def to_json(self) -> dict:
        return {"lower": self.lower, "upper": self.upper, "localized": self.localized,
                "witness": self.witness_disc.to_json(), "certificate": self.certificate.to_json()}


def kr_bracket(query: MetricQuery, tol: float = 1e-3, N: int = DEFAULT_N,
               certificate: PshCertificate | None = None) -> MetricBracket:
    upper, disc = kr_upper(query, tol, N)
    cert = certificate or build_certificate(query)
    lower = kr_lower_certificate(query, cert)
    return MetricBracket(lower, upper, disc, cert, localization_check(disc, query, cert.r))


# ---------------------------------------------------------------------------
# boundary behavior

def inner_normal(rho: ScalarField, b) -> np.ndarray:
    g = rho.gradient(np.asarray(b, float))
    nrm = np.linalg.norm(g)
    if nrm < 1e-12:
        raise PreconditionError("d rho vanishes at the boundary point")
    return -g / nrm


def blowup_direction(domain: BoxDomain, J: StructureField, b, direction: str) -> np.ndarray:
    if direction == "normal":
        return -inner_normal(domain.defining_function, b)
    if direction == "tangential":
        return holomorphic_tangent(J, domain.defining_function, b)[:, 0]
    raise ParameterError(f"direction must be 'tangential' or 'normal', got {direction!r}")


@dataclass(frozen=True)
class RateFit:
    slope: float
    deltas: np.ndarray
    values: np.ndarray
    ratios: np.ndarray


def blowup_rate_fit(domain: BoxDomain, J: StructureField, b, direction: str,
                    ks=range(3, 8), tol: float = 1e-3, max_ratio: float = 10.0) -> RateFit:
    """Slope of ``log K`` against ``log delta`` at ``q = b + delta n``.

    In the normal direction the certificate only scales like
    ``delta^(-1/2)``, so the width test is applied to
    ``ratio * delta^(1/2)``.
    """
    rho = domain.defining_function
    b = np.asarray(b, float)
    if abs(float(rho(b))) > 1e-8:
        raise PreconditionError("b is not a boundary point")
    n = inner_normal(rho, b)
    v = blowup_direction(domain, J, b, direction)
    deltas = np.array([2.0 ** -k for k in ks])
    mids, ratios = [], []
    for d in deltas:
        br = kr_bracket(MetricQuery(domain, J, b + d * n, v), tol)
        width = br.ratio * (np.sqrt(d) if direction == "normal" else 1.0)
        if width > max_ratio:
            raise InconclusiveError(f"bracket too wide at delta={d:g} (ratio {br.ratio:.3g})")
        mids.append(br.midpoint)
        ratios.append(br.ratio)
    slope = float(np.polyfit(np.log(deltas), np.log(mids), 1)[0])
    return RateFit(slope, deltas, np.array(mids), np.array(ratios))


def boundary_points(rho: ScalarField, center, count: int, seed: int = 0) -> np.ndarray:
    """Boundary points from random rays out of ``center``, projected by Newton."""
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(count, len(center)))
    d /= np.linalg.norm(d, axis=1)[:, None]
    return project_to_surface(rho, np.asarray(center, float) + d)


@dataclass(frozen=True)
class HopfReport:
    deltas: np.ndarray
    ratios: np.ndarray          # min over rays at each delta

    @property
    def margin(self) -> float:
        return float(np.min(self.ratios))

    @property
    def passed(self) -> bool:
        return bool(self.margin > 1e-3 and self.ratios[-1] >= 0.5 * self.ratios[0])


def hopf_margin(domain: BoxDomain, u: ScalarField, K, rays: int = 16,
                deltas=(0.1, 0.05, 0.025, 0.0125), seed: int = 0, center=None) -> HopfReport:
    """``min |u(p)| / dist(p, dG)`` over points ``p = b + delta n`` on inner
    normal rays; ``dist`` is taken as ``delta``."""
    rho = domain.defining_function
    inside = domain_samples(domain)
    if np.any(u(inside) >= 0):
        raise PreconditionError("u is not negative on the domain samples")
    K = np.atleast_2d(np.asarray(K, float))
    if np.any(u(K) >= 0):
        raise PreconditionError("u is not negative on the compact set")
    center = 0.5 * (domain.lo + domain.hi) if center is None else np.asarray(center, float)
    bs = boundary_points(rho, center, rays, seed)
    ns = np.stack([inner_normal(rho, b) for b in bs])
    ratios = []
    for d in deltas:
        pts = bs + d * ns
        ratios.append(float(np.min(np.abs(u(pts)) / d)))
    return HopfReport(np.array(deltas, float), np.array(ratios))


def surface_distance(rho: ScalarField, pts) -> np.ndarray:
    """Distance to ``{rho = 0}`` via gradient projection (exact for balls)."""
    pts = np.atleast_2d(np.asarray(pts, float))
    return np.linalg.norm(pts - project_to_surface(rho, pts), axis=-1)


@dataclass(frozen=True)
class ComparabilityReport:
    ratios: np.ndarray

    @property
    def constant(self) -> float:
        return float(max(np.max(self.ratios), 1.0 / np.min(self.ratios)))


def distance_comparability(f: Diffeo, rho: ScalarField, rho_prime: ScalarField, points) -> ComparabilityReport:
    pts = np.atleast_2d(np.asarray(points, float))
    return ComparabilityReport(surface_distance(rho_prime, f(pts)) / surface_distance(rho, pts))


def _complex_frame(J: StructureField, rho: ScalarField, z) -> np.ndarray:
    """Real vectors ``(xi1, xi2)``: ``xi1`` is the projection of ``e_x1`` on
    the holomorphic tangent of the level set through ``z``; ``xi2 = e_x2``."""
    H = holomorphic_tangent(J, rho, z)
    e1 = np.zeros(len(z))
    e1[0] = 1.0
    xi1 = H @ (H.T @ e1)
    xi2 = np.zeros(len(z))
    xi2[2] = 1.0
    return np.stack([xi1, xi2], axis=1)


def _complex_coords(Jm: np.ndarray, frame: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Complex coordinates of real ``w`` in the J-complex basis ``frame``."""
    cols = []
    for k in range(frame.shape[1]):
        cols += [frame[:, k], Jm @ frame[:, k]]
    c = np.linalg.solve(np.stack(cols, axis=1), w)
    return c[0::2] + 1j * c[1::2]


@dataclass(frozen=True)
class AnisotropyReport:
    deltas: np.ndarray
    matrices: np.ndarray       # (len(deltas), 2, 2) complex
    exponents: np.ndarray      # (2, 2); inf marks entries that vanish

    def to_json(self) -> dict:
        return {"deltas": self.deltas.tolist(),
                "abs_entries": np.abs(self.matrices).tolist(),
                "exponents": [[e if np.isfinite(e) else "inf" for e in row] for row in self.exponents]}


def tangent_map_anisotropy(f: Diffeo, rho: ScalarField, rho_prime: ScalarField,
                           J: StructureField, Jp: StructureField, b,
                           deltas=None, holo_tol: float = 1e-6) -> AnisotropyReport:
    """Matrix of ``df`` in the adapted bases along the inner normal at ``b``
    and the fitted exponent of each entry against the distance."""
    if J.dim != 4:
        raise ParameterError("anisotropy estimates are for C^2")
    deltas = np.array([2.0 ** -k for k in range(3, 8)] if deltas is None else deltas, float)
    b = np.asarray(b, float)
    n = inner_normal(rho, b)
    mats = []
    for d in deltas:
        z = b + d * n
        D = f.jacobian(z)
        w = f(z)
        res = np.max(np.abs(D @ J.matrix(z) - Jp.matrix(w) @ D))
        if res > holo_tol:
            raise PreconditionError(f"f is not (J, J')-holomorphic at the samples ({res:.3g})")
        X = _complex_frame(J, rho, z)
        Xp = _complex_frame(Jp, rho_prime, w)
        Jpm = Jp.matrix(w)
        A = np.stack([_complex_coords(Jpm, Xp, D @ X[:, j]) for j in range(2)], axis=1)
        mats.append(A)
    mats = np.array(mats)
    dist = surface_distance(rho, b + deltas[:, None] * n)
    exps = np.full((2, 2), np.inf)
    for i in range(2):
        for j in range(2):
            a = np.abs(mats[:, i, j])
            if np.max(a) > 1e-12:
                exps[i, j] = float(np.polyfit(np.log(dist), np.log(np.maximum(a, 1e-300)), 1)[0])
    return AnisotropyReport(deltas, mats, exps)


def metric_scalar(dim: int, fn) -> PolynomialScalar:
    """Convenience wrapper for polynomial defining functions."""
    x = [Poly.var(dim, i) for i in range(dim)]
    return PolynomialScalar(fn(x))


__all__ = [
    "MetricQuery", "MetricBracket", "PshCertificate", "kr_upper", "kr_lower_certificate",
    "kr_bracket", "build_certificate", "verify_certificate", "certificate_constant",
    "ChirkaWeight", "chirka_constants", "theta", "log_theta", "blowup_rate_fit", "hopf_margin",
    "tangent_map_anisotropy", "distance_comparability", "domain_samples",
]
