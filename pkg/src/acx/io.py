"""JSON fixtures: structures, domains, maps, deformation tensors, discs and
Riemann-Hilbert data.  Every document carries a ``kind`` tag."""

from __future__ import annotations

import hashlib
import json
import os
from importlib import resources
from pathlib import Path

import numpy as np

from .disc import DeformationTensor, Disc, RiemannHilbertData
from .errors import InputError
from .fields import BoxDomain, PolynomialMap, PolynomialScalar, PolynomialStructure
from .poly import Poly, PolyBatch

KINDS = ("structure", "domain", "scalar", "map", "deformation", "disc", "rh")


def corpus_dir() -> Path:
    env = os.environ.get("ACX_CORPUS")
    if env:
        return Path(env)
    return Path(str(resources.files("acx") / "corpus"))


def resolve(path: str | os.PathLike) -> Path:
    """Existing path as given, else a file of that name in the corpus."""
    p = Path(path)
    if p.exists():
        return p
    for cand in (corpus_dir() / p.name, corpus_dir() / f"{p.name}.json"):
        if cand.exists():
            return cand
    raise InputError(f"fixture not found: {path}")


def sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def read_document(path) -> tuple[dict, Path]:
    p = resolve(path)
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{p.name}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(doc, dict) or doc.get("kind") not in KINDS:
        raise InputError(f"{p.name}: missing or unknown 'kind' (expected one of {', '.join(KINDS)})")
    return doc, p


def _poly(dim: int, terms) -> Poly:
    try:
        return Poly.from_json(dim, terms)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed polynomial terms: {exc}") from None


def build(doc: dict):
    kind = doc["kind"]
    try:
        if kind == "structure":
            return PolynomialStructure.from_json(doc)
        if kind == "scalar":
            return PolynomialScalar(_poly(int(doc["dim"]), doc["terms"]))
        if kind == "domain":
            dim = int(doc["dim"])
            rho = PolynomialScalar(_poly(dim, doc["defining"]["terms"]))
            return BoxDomain(dim, doc["lo"], doc["hi"], rho)
        if kind == "map":
            dim = int(doc["dim"])
            return PolynomialMap([_poly(dim, c["terms"]) for c in doc["components"]])
        if kind == "disc":
            return Disc.from_json(doc)
        if kind == "rh":
            if doc.get("name") != "torus":
                raise InputError("only torus Riemann-Hilbert data is supported")
            return RiemannHilbertData.torus(int(doc["n"]), int(doc.get("N", 16)))
        if kind == "deformation":
            return _deformation(doc)
    except (KeyError, TypeError) as exc:
        raise InputError(f"{kind} document is missing field {exc}") from None
    raise InputError(f"unknown kind {kind!r}")


def _deformation(doc: dict) -> DeformationTensor:
    """``q(lam, z) = lam * (P + i Q)(z)`` with polynomial entries."""
    n = int(doc["n"])
    ent = doc["entries"]
    if len(ent) != n or any(len(r) != n for r in ent):
        raise InputError("deformation entries must be n x n")
    re = PolyBatch([_poly(2 * n, e["re"]) for r in ent for e in r], (n, n))
    im = PolyBatch([_poly(2 * n, e.get("im", [])) for r in ent for e in r], (n, n))
    return DeformationTensor(n, lambda lam, z: lam * (re(z) + 1j * im(z)), doc.get("name", "polynomial"))


def load(path, expect: str | tuple[str, ...] | None = None):
    """Parsed object, resolved path and raw document."""
    doc, p = read_document(path)
    if expect is not None:
        allowed = (expect,) if isinstance(expect, str) else expect
        if doc["kind"] not in allowed:
            raise InputError(f"{p.name}: expected a {' or '.join(allowed)} fixture, got {doc['kind']}")
    return build(doc), p, doc


def dump(obj, kind: str, **meta) -> dict:
    """Fixture document for a structure, scalar, domain or map."""
    if kind == "structure":
        body = obj.to_json()
    elif kind == "scalar":
        body = obj.to_json()
    elif kind == "domain":
        body = {"dim": obj.dim, "lo": obj.lo.tolist(), "hi": obj.hi.tolist(),
                "defining": {"terms": obj.defining_function.poly.to_json()}}
    elif kind == "map":
        body = {"dim": obj.dim, "components": [{"terms": c.to_json()} for c in obj.components]}
    elif kind == "disc":
        body = obj.to_json()
    else:
        raise InputError(f"cannot serialize kind {kind!r}")
    return {"kind": kind, **meta, **body}


def corpus_index(directory: Path | None = None) -> list[dict]:
    """Sorted index of fixtures with their descriptions and anchors."""
    d = corpus_dir() if directory is None else Path(directory)
    if not d.is_dir():
        return []
    out = []
    for p in sorted(d.glob("*.json")):
        try:
            doc = json.loads(p.read_text())
        except json.JSONDecodeError:
            continue
        if not isinstance(doc, dict) or doc.get("kind") not in KINDS:
            continue
        out.append({"name": p.stem, "file": p.name, "kind": doc["kind"],
                    "description": doc.get("description", ""), "anchor": doc.get("anchor", ""),
                    "sha256": sha256(p)})
    return out


def parse_vector(text: str, dim: int) -> np.ndarray:
    """Comma-separated values; ``dim`` reals or ``dim/2`` complex numbers."""
    parts = [s.strip() for s in str(text).split(",") if s.strip()]
    try:
        if len(parts) == dim:
            return np.array([float(s) for s in parts])
        if 2 * len(parts) == dim:
            zs = [complex(s.replace("i", "j")) for s in parts]
            return np.array([c for z in zs for c in (z.real, z.imag)])
    except ValueError:
        raise InputError(f"cannot parse vector {text!r}") from None
    raise InputError(f"vector {text!r} needs {dim} real or {dim // 2} complex entries")
