"""Sparse real polynomials in the real coordinates of a box domain.

Coordinates are ordered ``(x1, y1, x2, y2, ...)`` with ``z^j = x_j + i y_j``.
Everything downstream (structure fields, defining functions, polynomial
diffeomorphisms) is built from :class:`Poly` so that derivatives are exact.
"""

from __future__ import annotations

from itertools import product
from typing import Iterable, Mapping

import numpy as np

Exponent = tuple[int, ...]


class Poly:
    """Polynomial ``sum coeff * prod x_i**e_i`` with float coefficients."""

    __slots__ = ("nvars", "terms", "_cache")

    def __init__(self, nvars: int, terms: Mapping[Exponent, float] | None = None):
        self.nvars = int(nvars)
        clean: dict[Exponent, float] = {}
        for exps, c in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != self.nvars:
                raise ValueError(f"exponent {exps} does not match nvars={self.nvars}")
            if any(e < 0 for e in exps):
                raise ValueError("negative exponent")
            c = float(c)
            if c != 0.0:
                clean[exps] = clean.get(exps, 0.0) + c
        self.terms = {k: v for k, v in clean.items() if v != 0.0}
        self._cache = None

    @classmethod
    def _raw(cls, nvars: int, terms: dict) -> Poly:
        """Trusted constructor: integer tuple keys of the right length."""
        obj = cls.__new__(cls)
        obj.nvars = nvars
        obj.terms = {k: v for k, v in terms.items() if v != 0.0}
        obj._cache = None
        return obj

    # construction -------------------------------------------------------
    @classmethod
    def const(cls, nvars: int, c: float) -> Poly:
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def var(cls, nvars: int, i: int, c: float = 1.0) -> Poly:
        e = [0] * nvars
        e[i] = 1
        return cls(nvars, {tuple(e): c})

    @classmethod
    def zero(cls, nvars: int) -> Poly:
        return cls(nvars)

    @classmethod
    def random(cls, nvars: int, degree: int, rng: np.random.Generator,
               scale: float = 1.0, min_degree: int = 0) -> Poly:
        terms = {}
        for e in product(range(degree + 1), repeat=nvars):
            if min_degree <= sum(e) <= degree:
                terms[e] = scale * rng.uniform(-1.0, 1.0)
        return cls(nvars, terms)

    # algebra ------------------------------------------------------------
    def _coerce(self, other) -> Poly:
        if isinstance(other, Poly):
            if other.nvars != self.nvars:
                raise ValueError("nvars mismatch")
            return other
        return Poly.const(self.nvars, float(other))

    def __add__(self, other) -> Poly:
        other = self._coerce(other)
        t = dict(self.terms)
        for k, v in other.terms.items():
            t[k] = t.get(k, 0.0) + v
        return Poly._raw(self.nvars, t)

    __radd__ = __add__

    def __neg__(self) -> Poly:
        return Poly._raw(self.nvars, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other) -> Poly:
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> Poly:
        return self._coerce(other) - self

    def __mul__(self, other) -> Poly:
        if not isinstance(other, Poly):
            c = float(other)
            return Poly._raw(self.nvars, {k: c * v for k, v in self.terms.items()})
        other = self._coerce(other)
        if not self.terms or not other.terms:
            return Poly(self.nvars)
        e1, c1 = self._arrays()
        e2, c2 = other._arrays()
        exps = (e1[:, None, :] + e2[None, :, :]).reshape(-1, self.nvars)
        coeffs = (c1[:, None] * c2[None, :]).ravel()
        # unique on integer keys is far cheaper than a row-wise unique
        radix = int(exps.max()) + 1
        keys = exps @ (radix ** np.arange(self.nvars, dtype=np.int64))
        uniq, first, inv = np.unique(keys, return_index=True, return_inverse=True)
        summed = np.zeros(len(uniq))
        np.add.at(summed, inv.ravel(), coeffs)
        return Poly._raw(self.nvars, dict(zip(map(tuple, exps[first].tolist()), summed.tolist())))

    __rmul__ = __mul__

    def __pow__(self, n: int) -> Poly:
        out = Poly.const(self.nvars, 1.0)
        for _ in range(int(n)):
            out = out * self
        return out

    def __eq__(self, other) -> bool:
        return isinstance(other, Poly) and self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self):
        return hash((self.nvars, tuple(sorted(self.terms.items()))))

    def __repr__(self) -> str:
        if not self.terms:
            return "Poly(0)"
        parts = []
        for e, c in sorted(self.terms.items()):
            mono = "*".join(f"x{i}^{p}" if p > 1 else f"x{i}" for i, p in enumerate(e) if p)
            parts.append(f"{c:+.6g}" + (f"*{mono}" if mono else ""))
        return "Poly(" + " ".join(parts) + ")"

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def is_zero(self) -> bool:
        return not self.terms

    # calculus -----------------------------------------------------------
    def diff(self, i: int) -> Poly:
        t = {}
        for e, c in self.terms.items():
            if e[i] > 0:
                e2 = list(e)
                e2[i] -= 1
                t[tuple(e2)] = c * e[i]
        return Poly._raw(self.nvars, t)

    def gradient(self) -> list[Poly]:
        return [self.diff(i) for i in range(self.nvars)]

    def hessian(self) -> list[list[Poly]]:
        g = self.gradient()
        return [[gi.diff(j) for j in range(self.nvars)] for gi in g]

    def scale_vars(self, factors) -> Poly:
        """Return ``x -> p(factors * x)`` (diagonal linear substitution)."""
        f = np.asarray(factors, dtype=float)
        return Poly(self.nvars, {e: c * float(np.prod(f ** np.array(e))) for e, c in self.terms.items()})

    def compose_affine(self, A: np.ndarray, b: np.ndarray, cache: dict | None = None) -> Poly:
        """Return ``x -> p(A x + b)``; ``A`` may change the number of variables."""
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        m = A.shape[1]
        lin = [Poly(m, {tuple(int(k == j) for k in range(m)): A[i, j] for j in range(m)}) + b[i]
               for i in range(self.nvars)]
        return self.compose(lin, cache)

    def compose(self, subs: list[Poly], cache: dict | None = None) -> Poly:
        """Substitute polynomial ``subs[i]`` for variable ``i``.

        ``cache`` maps exponent tuples to composed monomials and may be shared
        between calls that use the same substitution.
        """
        if len(subs) != self.nvars:
            raise ValueError("need one substitution per variable")
        m = subs[0].nvars
        cache = {} if cache is None else cache
        cache.setdefault((0,) * self.nvars, Poly.const(m, 1.0))

        def mono(e: Exponent) -> Poly:
            if e not in cache:
                k = max(i for i, v in enumerate(e) if v)
                prev = e[:k] + (e[k] - 1,) + e[k + 1:]
                cache[e] = mono(prev) * subs[k]
            return cache[e]

        acc: dict[Exponent, float] = {}
        for e, c in sorted(self.terms.items()):
            for k, v in mono(e).terms.items():
                acc[k] = acc.get(k, 0.0) + c * v
        return Poly._raw(m, acc)

    # evaluation ---------------------------------------------------------
    def _arrays(self):
        if self._cache is None:
            if self.terms:
                exps = np.array(list(self.terms.keys()), dtype=int)
                coeffs = np.array(list(self.terms.values()), dtype=float)
            else:
                exps = np.zeros((0, self.nvars), dtype=int)
                coeffs = np.zeros(0)
            self._cache = (exps, coeffs)
        return self._cache

    def __call__(self, x) -> np.ndarray:
        """Evaluate at points ``x`` of shape ``(..., nvars)``."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.nvars:
            raise ValueError(f"expected last axis {self.nvars}, got {x.shape}")
        exps, coeffs = self._arrays()
        if coeffs.size == 0:
            return np.zeros(x.shape[:-1])
        maxdeg = int(exps.max()) if exps.size else 0
        lead = x.shape[:-1]
        flat = x.reshape(-1, self.nvars)
        # powers[k, p, i] = x_i**k at point p
        powers = np.ones((maxdeg + 1,) + flat.shape)
        for k in range(1, maxdeg + 1):
            powers[k] = powers[k - 1] * flat
        mono = np.ones((len(coeffs), flat.shape[0]))
        for i in range(self.nvars):
            col = exps[:, i]
            if col.any():
                mono *= powers[col, :, i]
        return (coeffs @ mono).reshape(lead)

    # serialization ------------------------------------------------------
    def to_json(self) -> list[dict]:
        return [{"coeff": c, "exponents": list(e)} for e, c in sorted(self.terms.items())]

    @classmethod
    def from_json(cls, nvars: int, terms: Iterable[Mapping]) -> Poly:
        acc: dict[Exponent, float] = {}
        for t in terms:
            e = tuple(int(v) for v in t["exponents"])
            acc[e] = acc.get(e, 0.0) + float(t["coeff"])
        return cls(nvars, acc)


def poly_matrix(nvars: int, M) -> list[list[Poly]]:
    """Lift a constant matrix to a matrix of constant polynomials."""
    M = np.asarray(M, dtype=float)
    return [[Poly.const(nvars, M[i, j]) for j in range(M.shape[1])] for i in range(M.shape[0])]


def matmul(A: list[list[Poly]], B: list[list[Poly]]) -> list[list[Poly]]:
    n, k, m = len(A), len(B), len(B[0])
    nv = A[0][0].nvars
    out = []
    for i in range(n):
        row = []
        for j in range(m):
            acc = Poly.zero(nv)
            for r in range(k):
                if A[i][r].terms and B[r][j].terms:
                    acc = acc + A[i][r] * B[r][j]
            row.append(acc)
        out.append(row)
    return out


def matadd(A, B, scale: float = 1.0):
    return [[a + scale * b for a, b in zip(ra, rb)] for ra, rb in zip(A, B)]


class PolyBatch:
    """Many polynomials in the same variables evaluated over one shared
    monomial table; ``shape`` is the logical shape of the collection."""

    def __init__(self, polys, shape: tuple[int, ...]):
        polys = list(polys)
        self.shape = tuple(shape)
        self.nvars = polys[0].nvars
        keys = sorted({e for p in polys for e in p.terms})
        index = {e: i for i, e in enumerate(keys)}
        self.exps = np.array(keys, dtype=int).reshape(len(keys), self.nvars)
        self.coeffs = np.zeros((len(polys), len(keys)))
        for r, p in enumerate(polys):
            for e, c in p.terms.items():
                self.coeffs[r, index[e]] = c

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        lead = x.shape[:-1]
        flat = x.reshape(-1, self.nvars)
        if len(self.exps) == 0:
            return np.zeros(lead + self.shape)
        maxdeg = int(self.exps.max())
        powers = np.ones((maxdeg + 1,) + flat.shape)
        for k in range(1, maxdeg + 1):
            powers[k] = powers[k - 1] * flat
        mono = np.ones((len(self.exps), flat.shape[0]))
        for i in range(self.nvars):
            col = self.exps[:, i]
            if col.any():
                mono *= powers[col, :, i]
        vals = self.coeffs @ mono                      # (npolys, npts)
        return vals.T.reshape(lead + self.shape)


def evaluate_matrix(M: list[list[Poly]], x) -> np.ndarray:
    return PolyBatch([p for r in M for p in r], (len(M), len(M[0])))(x)
