"""Pointwise geometry: frames, the T/F/B/C split of J, the slant spectrum and
point classification.

Conventions: tangent vectors are k-vectors in the orthonormal tangent frame,
normal vectors are (2n-k)-vectors in the orthonormal normal frame.  The
normal frame is an arbitrary orthonormal completion, so only gauge-invariant
quantities should be compared across runs or implementations.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._parallel import pmap
from .ambient import AmbientSpace
from .errors import ImmersionDegenerate, InvalidGrid, NumericalInstability, ZeroVector
from .immersion import Immersion, ImmersionJet, jet2_batch
from .tolerances import DEFAULT, Tolerances

HALF_PI = 0.5 * math.pi

COMPLEX = "complex-point"
TOTALLY_REAL = "totally-real-point"
POINTWISE_SLANT = "pointwise-slant"
CR = "CR"
SEMI_SLANT = "pointwise-semi-slant"
GENERIC = "generic"


# -- orthonormalisation ----------------------------------------------------

def gram_schmidt_pivoted(A: np.ndarray, count: int, against: np.ndarray | None = None):
    """Modified Gram-Schmidt with column pivoting and one re-orthogonalisation pass.

    Picks, at every step, the remaining column with the largest residual norm
    (first index on ties).  Returns the (d, count) orthonormal block and the
    pivot order.  `against` is an optional orthonormal block every output is
    kept orthogonal to.
    """
    R = np.array(A, dtype=float, copy=True)
    d, m = R.shape
    basis = [] if against is None else [against[:, j] for j in range(against.shape[1])]
    Q = np.zeros((d, count))
    remaining = list(range(m))
    pivots = []
    for j in range(count):
        norms = np.linalg.norm(R[:, remaining], axis=0)
        pick = remaining[int(np.argmax(norms))]
        q = R[:, pick].copy()
        for _ in range(2):
            for b in basis:
                q -= (b @ q) * b
        nq = np.linalg.norm(q)
        if nq == 0.0:
            raise ImmersionDegenerate((), "zero column during orthonormalisation")
        q /= nq
        Q[:, j] = q
        basis.append(q)
        pivots.append(pick)
        remaining.remove(pick)
        if remaining:
            R[:, remaining] -= np.outer(q, q @ R[:, remaining])
    return Q, pivots


# -- frames ----------------------------------------------------------------

@dataclass(frozen=True)
class PointFrame:
    point: np.ndarray
    coord_basis: np.ndarray      # (2n, k) Jacobian
    tangent_frame: np.ndarray    # (2n, k)
    normal_frame: np.ndarray     # (2n, 2n-k)
    coord_to_frame: np.ndarray   # (k, k): column j = d/du_j in frame components
    induced_metric: np.ndarray   # (k, k)

    @property
    def frame_to_coord(self) -> np.ndarray:
        return np.linalg.inv(self.coord_to_frame)

    def to_ambient(self, X) -> np.ndarray:
        return self.tangent_frame @ np.asarray(X, dtype=float)

    def normal_to_ambient(self, N) -> np.ndarray:
        return self.normal_frame @ np.asarray(N, dtype=float)


def build_frames(jet: ImmersionJet, rank_tol: float = DEFAULT.rank) -> PointFrame:
    Jac = np.asarray(jet.jacobian, dtype=float)
    d, k = Jac.shape
    G = Jac.T @ Jac
    ev = np.linalg.eigvalsh(G)
    if ev[-1] <= 0.0 or ev[0] < rank_tol * ev[-1]:
        raise ImmersionDegenerate(jet.point, f"(Gram eigenvalues {ev[0]:.3e} .. {ev[-1]:.3e})")
    E, _ = gram_schmidt_pivoted(Jac, k)
    P = np.eye(d) - E @ E.T
    N, _ = gram_schmidt_pivoted(P, d - k, against=E)
    return PointFrame(
        point=np.asarray(jet.point, dtype=float),
        coord_basis=Jac,
        tangent_frame=E,
        normal_frame=N,
        coord_to_frame=E.T @ Jac,
        induced_metric=G,
    )


# -- T, F, B, C ------------------------------------------------------------

@dataclass(frozen=True)
class TFOperators:
    T: np.ndarray  # (k, k)
    F: np.ndarray  # (2n-k, k)
    B: np.ndarray  # (k, 2n-k)
    C: np.ndarray  # (2n-k, 2n-k)


def tf_operators(frame: PointFrame, space: AmbientSpace) -> TFOperators:
    E, N, J = frame.tangent_frame, frame.normal_frame, space.J
    JE, JN = J @ E, J @ N
    return TFOperators(T=E.T @ JE, F=N.T @ JE, B=E.T @ JN, C=N.T @ JN)


# -- slant spectrum --------------------------------------------------------

@dataclass(frozen=True)
class SlantCluster:
    lam: float
    multiplicity: int
    basis: np.ndarray   # (k, m), orthonormal columns in frame coordinates
    theta: float

    @property
    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T


@dataclass(frozen=True)
class SlantSpectrum:
    clusters: tuple[SlantCluster, ...]
    eigenvalues: np.ndarray  # descending

    @property
    def k(self) -> int:
        return int(sum(c.multiplicity for c in self.clusters))


def _sign_fix(V: np.ndarray) -> np.ndarray:
    V = V.copy()
    for j in range(V.shape[1]):
        col = V[:, j]
        big = np.flatnonzero(np.abs(col) > 1e-12 * max(np.abs(col).max(), 1e-300))
        if big.size and col[big[0]] < 0:
            V[:, j] = -col
    return V


def theta_from_lambda(lam: float) -> float:
    return float(np.arccos(math.sqrt(min(1.0, max(0.0, lam)))))


def slant_spectrum(tf: TFOperators, cluster_tol: float = DEFAULT.cluster,
                   spectrum_tol: float = DEFAULT.spectrum) -> SlantSpectrum:
    T = tf.T
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise ValueError("T must be square")
    M = -(T @ T)
    M = 0.5 * (M + M.T)
    w, V = np.linalg.eigh(M)
    order = np.argsort(-w, kind="stable")
    w, V = w[order], _sign_fix(V[:, order])
    if w.size and (w[0] > 1.0 + spectrum_tol or w[-1] < -spectrum_tol):
        raise NumericalInstability(f"-T^2 eigenvalues {w} leave [0, 1]")
    clusters = []
    start = 0
    for i in range(1, len(w) + 1):
        if i == len(w) or w[i - 1] - w[i] >= cluster_tol:
            lam = float(np.mean(w[start:i]))
            clusters.append(SlantCluster(lam, i - start, V[:, start:i], theta_from_lambda(lam)))
            start = i
    return SlantSpectrum(tuple(clusters), w)


def wirtinger_angle(tf: TFOperators, X) -> float:
    X = np.asarray(X, dtype=float)
    nx = np.linalg.norm(X)
    if nx < 1e-14:
        raise ZeroVector("Wirtinger angle of a zero vector")
    return float(np.arccos(min(1.0, np.linalg.norm(tf.T @ X) / nx)))


# -- classification --------------------------------------------------------

@dataclass(frozen=True)
class PointClass:
    tag: str
    m1: int
    m2: int
    theta: float | None


def _is_holomorphic(c: SlantCluster, angle_tol: float) -> bool:
    return c.theta <= angle_tol


def _is_totally_real(c: SlantCluster, angle_tol: float) -> bool:
    return HALF_PI - c.theta <= angle_tol


def classify_point(spec: SlantSpectrum, angle_tol: float = DEFAULT.angle) -> PointClass:
    cs = spec.clusters
    k = spec.k
    if len(cs) == 1:
        c = cs[0]
        if _is_holomorphic(c, angle_tol):
            return PointClass(COMPLEX, k, 0, c.theta)
        if _is_totally_real(c, angle_tol):
            return PointClass(TOTALLY_REAL, 0, k, c.theta)
        return PointClass(POINTWISE_SLANT, 0, k, c.theta)
    if len(cs) == 2 and _is_holomorphic(cs[0], angle_tol):
        hi, lo = cs
        if _is_totally_real(lo, angle_tol):
            return PointClass(CR, hi.multiplicity, lo.multiplicity, lo.theta)
        return PointClass(SEMI_SLANT, hi.multiplicity, lo.multiplicity, lo.theta)
    m1 = cs[0].multiplicity if cs and _is_holomorphic(cs[0], angle_tol) else 0
    return PointClass(GENERIC, m1, k - m1, None)


def holomorphic_split(spec: SlantSpectrum, angle_tol: float = DEFAULT.angle):
    """Bases (frame coordinates) of the lambda=1 cluster and of its complement."""
    k = spec.k
    cs = list(spec.clusters)
    if cs and _is_holomorphic(cs[0], angle_tol):
        hol, rest = cs[0].basis, cs[1:]
    else:
        hol, rest = np.zeros((k, 0)), cs
    comp = np.hstack([c.basis for c in rest]) if rest else np.zeros((k, 0))
    return hol, comp


# -- per-point pipeline ----------------------------------------------------

@dataclass(frozen=True)
class PointAnalysis:
    jet: ImmersionJet
    frame: PointFrame
    tf: TFOperators
    spectrum: SlantSpectrum
    cls: PointClass


def analyze_jet(jet: ImmersionJet, space: AmbientSpace, tols: Tolerances = DEFAULT) -> PointAnalysis:
    frame = build_frames(jet, tols.rank)
    tf = tf_operators(frame, space)
    spec = slant_spectrum(tf, tols.cluster, tols.spectrum)
    return PointAnalysis(jet, frame, tf, spec, classify_point(spec, tols.angle))


def analyze_point(imm: Immersion, point, tols: Tolerances = DEFAULT) -> PointAnalysis:
    return analyze_points(imm, [point], tols)[0]


def analyze_points(imm: Immersion, points, tols: Tolerances = DEFAULT) -> list[PointAnalysis]:
    jets = jet2_batch(imm, points)
    return pmap(lambda j: analyze_jet(j, imm.ambient, tols), jets)


# -- grids -----------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    axes: tuple[tuple[str, tuple[float, ...]], ...]

    def names(self) -> list[str]:
        return [a for a, _ in self.axes]

    def points(self, params: Sequence[str]) -> np.ndarray:
        """Cartesian product (last axis fastest) with columns in `params` order."""
        names = self.names()
        missing = [p for p in params if p not in names]
        extra = [a for a in names if a not in params]
        if missing or extra:
            raise InvalidGrid(f"grid axes {names} do not match parameters {list(params)}")
        rows = np.array(list(itertools.product(*(v for _, v in self.axes))), dtype=float)
        cols = [names.index(p) for p in params]
        return rows[:, cols]

    def to_text(self) -> str:
        parts = []
        for name, vals in self.axes:
            parts.append(f"{name}={vals[0]!r}:{vals[-1]!r}:{len(vals)}")
        return ",".join(parts)

    def __len__(self) -> int:
        n = 1
        for _, v in self.axes:
            n *= len(v)
        return n


def parse_grid(text: str) -> GridSpec:
    """``t=0.5:3:6,s=2,...``: start:stop:count axes (inclusive), or a single value."""
    if not isinstance(text, str) or not text.strip():
        raise InvalidGrid("empty grid")
    axes = []
    for item in text.split(","):
        name, eq, rng = item.strip().partition("=")
        name = name.strip()
        if not eq or not name:
            raise InvalidGrid(f"bad grid axis {item!r}")
        fields = rng.split(":")
        try:
            if len(fields) == 1:
                vals = (float(fields[0]),)
            elif len(fields) == 3:
                a, b, c = float(fields[0]), float(fields[1]), int(fields[2])
                if c < 1:
                    raise InvalidGrid(f"axis {name}: count must be >= 1")
                vals = (a,) if c == 1 else tuple(float(x) for x in np.linspace(a, b, c))
            else:
                raise InvalidGrid(f"bad grid axis {item!r}")
        except ValueError:
            raise InvalidGrid(f"bad grid axis {item!r}") from None
        if not all(math.isfinite(v) for v in vals):
            raise InvalidGrid(f"axis {name}: non-finite value")
        if name in [a for a, _ in axes]:
            raise InvalidGrid(f"duplicate axis {name}")
        axes.append((name, vals))
    return GridSpec(tuple(axes))


# -- field classification --------------------------------------------------

@dataclass
class FieldReport:
    points: np.ndarray
    classes: list[PointClass]
    uniform: bool
    structure: str | None
    m1: int | None
    m2: int | None
    theta_min: float | None
    theta_max: float | None
    theta_mode: str | None   # "constant" | "pointwise" | None
    problems: list[str] = field(default_factory=list)


def classify_field(imm: Immersion, grid: GridSpec, tols: Tolerances = DEFAULT) -> FieldReport:
    pts = grid.points(imm.params)
    if len(pts) == 0:
        raise InvalidGrid("empty grid")
    classes = [a.cls for a in analyze_points(imm, pts, tols)]
    sigs = {(c.tag, c.m1, c.m2) for c in classes}
    problems = []
    if len(sigs) != 1:
        listed = "; ".join(f"{t} (m1={a}, m2={b})" for t, a, b in sorted(sigs, key=str))
        problems.append(f"StructureNotUniform: {listed}")
        return FieldReport(pts, classes, False, None, None, None, None, None, None, problems)
    tag, m1, m2 = sigs.pop()
    thetas = [c.theta for c in classes if c.theta is not None]
    if thetas:
        lo, hi = min(thetas), max(thetas)
        mode = "constant" if hi - lo < tols.angle else "pointwise"
    else:
        lo = hi = mode = None
    return FieldReport(pts, classes, True, tag, m1, m2, lo, hi, mode, problems)

