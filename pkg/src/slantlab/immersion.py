"""Parametric immersions into R^{2n}: built-in registry, JSON documents, 2-jets."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .ambient import AmbientSpace, canonical_J
from .errors import (
    CoordinateParseError,
    DimensionError,
    DomainError,
    OddAmbientDimension,
    SlantlabError,
    SpecDocumentError,
    UnknownExample,
)
from .exprdsl import FUNCTIONS, Expr, eval_jet2_batch, parse, to_string

_IDENT_OK = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_0123456789")


@dataclass(frozen=True)
class Immersion:
    name: str
    params: tuple[str, ...]
    ambient: AmbientSpace
    coords: tuple[Expr, ...]
    domain_notes: str = ""
    default_grid: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.coords) != self.ambient.real_dim:
            raise DimensionError(
                f"{len(self.coords)} coordinates for ambient dimension {self.ambient.real_dim}")
        if len(self.params) > self.ambient.real_dim:
            raise DimensionError("more parameters than ambient dimensions")

    @property
    def k(self) -> int:
        return len(self.params)

    @property
    def n(self) -> int:
        return self.ambient.complex_dim

    def coord_strings(self) -> list[str]:
        return [to_string(c, self.params) for c in self.coords]

    def to_document(self) -> dict:
        doc = {
            "name": self.name,
            "params": list(self.params),
            "ambient_complex_dim": self.n,
            "coords": self.coord_strings(),
        }
        if self.domain_notes:
            doc["domain_notes"] = self.domain_notes
        return doc


@dataclass(frozen=True)
class ImmersionJet:
    point: np.ndarray      # (k,)
    position: np.ndarray   # (2n,)
    jacobian: np.ndarray   # (2n, k), column j = d phi / d u_j
    hessian: np.ndarray    # (2n, k, k)


def _build(name, params, n, coord_texts, notes="", default_grid=None) -> Immersion:
    coords = []
    for i, text in enumerate(coord_texts):
        try:
            coords.append(parse(text, params))
        except SlantlabError as exc:
            raise CoordinateParseError(i, exc) from exc
    return Immersion(name, tuple(params), canonical_J(n), tuple(coords), notes, default_grid)


# -- registry --------------------------------------------------------------

_EX51 = ["t*cos(u)", "s*cos(u)", "t*cos(v)", "s*cos(v)", "t*sin(u)",
         "s*sin(u)", "t*sin(v)", "s*sin(v)", "u", "v"]


def _example_31(**_):
    return _build(
        "example-3.1", ["t", "s", "u", "v"], 3,
        ["t", "s", "u", "sin(v)", "0", "cos(v)"],
        "slant function equals v; keep v in (0, pi/2) for a proper slant part",
        "t=0:0:1,s=0:0:1,u=0:0:1,v=0.1:1.5:15",
    )


def _example_51(**_):
    return _build(
        "example-5.1", ["t", "s", "u", "v"], 5, _EX51,
        "t, s not in {0, 1}; u, v in (0, pi/2)",
        "t=0.6:3.1:6,s=0.6:3.1:6,u=0.2:1.3:6,v=0.2:1.3:6",
    )


def _holomorphic_plane(**_):
    return _build("holomorphic-plane", ["a", "b"], 2, ["a", "b", "0", "0"],
                  "", "a=-1:1:3,b=-1:1:3")


def _totally_real_plane(**_):
    return _build("totally-real-plane", ["a", "b"], 2, ["a", "0", "b", "0"],
                  "", "a=-1:1:3,b=-1:1:3")


def _circle(r: float = 1.0, **_):
    r = float(r)
    if not r > 0:
        raise UnknownExample(f"circle radius must be positive, got {r}")
    return _build("circle", ["t"], 1, [f"{r!r}*cos(t)", f"{r!r}*sin(t)"],
                  f"radius {r!r}", "t=0:6:7")


def _trivial_product(t0: float = 2.0, s0: float = 3.0, **_):
    t0, s0 = float(t0), float(s0)
    fiber = [
        f"{t0!r}*cos(u)", f"{s0!r}*cos(u)", f"{t0!r}*cos(v)", f"{s0!r}*cos(v)",
        f"{t0!r}*sin(u)", f"{s0!r}*sin(u)", f"{t0!r}*sin(v)", f"{s0!r}*sin(v)", "u", "v",
    ]
    return _build(
        "trivial-product", ["a", "b", "u", "v"], 6, ["a", "b"] + fiber,
        f"flat holomorphic plane times the (u, v) leaf of example-5.1 at t={t0!r}, s={s0!r}; "
        "constant warping",
        "a=-1:1:3,b=-1:1:3,u=0.2:1.3:4,v=0.2:1.3:4",
    )


_REGISTRY = {
    "example-3.1": _example_31,
    "example-5.1": _example_51,
    "holomorphic-plane": _holomorphic_plane,
    "totally-real-plane": _totally_real_plane,
    "circle": _circle,
    "trivial-product": _trivial_product,
}


def example_names() -> list[str]:
    return list(_REGISTRY)


def get_example(name: str, **constants) -> Immersion:
    """Built-in immersion by name.

    ``circle`` accepts ``r`` (radius); ``trivial-product`` accepts ``t0`` and
    ``s0``. The name may also carry them inline, e.g. ``"circle:r=2"``.
    """
    if ":" in name:
        name, _, extra = name.partition(":")
        for item in filter(None, extra.split(",")):
            key, eq, val = item.partition("=")
            if not eq:
                raise UnknownExample(f"bad example option {item!r}")
            try:
                constants[key.strip()] = float(val)
            except ValueError:
                raise UnknownExample(f"bad example option {item!r}") from None
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise UnknownExample(f"unknown example {name!r}; known: {', '.join(_REGISTRY)}") from None
    return factory(**constants)


# -- documents -------------------------------------------------------------

def load_spec(document) -> Immersion:
    """Build an immersion from a JSON object (mapping or JSON text)."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SpecDocumentError(f"not valid JSON: {exc}") from exc
    if not isinstance(document, Mapping):
        raise SpecDocumentError("immersion document must be a JSON object")
    missing = [k for k in ("name", "params", "ambient_complex_dim", "coords") if k not in document]
    if missing:
        raise SpecDocumentError(f"missing keys: {missing}")

    name = document["name"]
    params = document["params"]
    n = document["ambient_complex_dim"]
    coords = document["coords"]
    notes = document.get("domain_notes", "")
    if not isinstance(name, str):
        raise SpecDocumentError("name must be a string")
    if not isinstance(params, list) or not params or not all(isinstance(p, str) for p in params):
        raise SpecDocumentError("params must be a non-empty array of identifiers")
    for p in params:
        if not p or p[0].isdigit() or set(p) - _IDENT_OK or p in FUNCTIONS:
            raise SpecDocumentError(f"invalid parameter name {p!r}")
    if len(set(params)) != len(params):
        raise SpecDocumentError("duplicate parameter names")
    if not isinstance(coords, list) or not all(isinstance(c, str) for c in coords):
        raise SpecDocumentError("coords must be an array of expression strings")
    if len(coords) % 2:
        raise OddAmbientDimension(f"{len(coords)} coordinates: a Kaehler ambient is even-dimensional")
    if isinstance(n, bool) or not isinstance(n, int):
        raise SpecDocumentError("ambient_complex_dim must be an integer")
    if len(coords) != 2 * n:
        raise DimensionError(f"ambient_complex_dim {n} needs {2 * n} coordinates, got {len(coords)}")
    if len(params) > 2 * n:
        raise DimensionError("more parameters than ambient dimensions")
    if not isinstance(notes, str):
        raise SpecDocumentError("domain_notes must be a string")
    return _build(name, list(params), n, coords, notes)


def load_spec_file(path) -> Immersion:
    return load_spec(Path(path).read_text())


# -- jets ------------------------------------------------------------------

def jet2_batch(imm: Immersion, points) -> list[ImmersionJet]:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != imm.k:
        raise DimensionError(f"points need {imm.k} parameters, got {pts.shape[1]}")
    P, k, d = pts.shape[0], imm.k, imm.ambient.real_dim
    pos = np.empty((P, d))
    jac = np.empty((P, d, k))
    hess = np.empty((P, d, k, k))
    for i, c in enumerate(imm.coords):
        try:
            v, g, H = eval_jet2_batch(c, pts)
        except DomainError as exc:
            raise exc.with_coord(i)
        pos[:, i], jac[:, i, :], hess[:, i] = v, g, H
    return [ImmersionJet(pts[p].copy(), pos[p], jac[p], hess[p]) for p in range(P)]


def jet2(imm: Immersion, point) -> ImmersionJet:
    point = np.asarray(point, dtype=float).reshape(-1)
    return jet2_batch(imm, point[None, :])[0]


def metric_batch(imm: Immersion, points) -> np.ndarray:
    """Induced metric (Gram matrix of the Jacobian) at each point, shape (P,k,k)."""
    jets = jet2_batch(imm, points)
    return np.stack([j.jacobian.T @ j.jacobian for j in jets])
