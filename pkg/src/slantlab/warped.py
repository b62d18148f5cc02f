"""Warped-product detection and the identity / inequality audits.

Two derivative pipelines meet here on purpose:

* the AD path: exact Jacobians and Hessians give h, shape operators and the
  metric derivatives used for d(ln f);
* the FD path: Christoffel symbols come from central differences of the
  induced metric, and Lie brackets from central differences of cluster
  projectors.

Checks that mix the two are cross-validations of both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._parallel import pmap
from .errors import (
    ImmersionDegenerate,
    InvalidSplit,
    InvalidWarping,
    MissingSplit,
    ProjectorDiscontinuity,
    SlantAngleSingular,
)
from .immersion import Immersion, ImmersionJet, jet2_batch, metric_batch
from .pointgeom import (
    CR,
    HALF_PI,
    SEMI_SLANT,
    GridSpec,
    PointAnalysis,
    analyze_jet,
    analyze_points,
    holomorphic_split,
)
from .secondform import SecondForm, h_invariants, second_form, shape_apply
from .tolerances import DEFAULT, Tolerances


# -- splits ----------------------------------------------------------------

@dataclass(frozen=True)
class SplitSpec:
    base_params: tuple[str, ...]
    fiber_params: tuple[str, ...]

    def indices(self, params: Sequence[str]) -> tuple[list[int], list[int]]:
        params = list(params)
        if sorted(self.base_params + self.fiber_params) != sorted(params):
            raise InvalidSplit(f"split {self.to_text()} does not partition parameters {params}")
        return [params.index(p) for p in self.base_params], [params.index(p) for p in self.fiber_params]

    def to_text(self) -> str:
        return f"base={','.join(self.base_params)};fiber={','.join(self.fiber_params)}"


def parse_split(text: str) -> SplitSpec:
    """``base=t,s fiber=u,v`` (``;`` also accepted between the two parts)."""
    if not isinstance(text, str):
        raise InvalidSplit("split must be a string")
    parts = {}
    for chunk in text.replace(";", " ").split():
        key, eq, vals = chunk.partition("=")
        if not eq or key not in ("base", "fiber") or key in parts:
            raise InvalidSplit(f"bad split {text!r}")
        names = tuple(v.strip() for v in vals.split(",") if v.strip())
        parts[key] = names
    if set(parts) != {"base", "fiber"} or not parts["base"] or not parts["fiber"]:
        raise InvalidSplit(f"split needs non-empty base= and fiber= parts: {text!r}")
    if set(parts["base"]) & set(parts["fiber"]):
        raise InvalidSplit("base and fiber overlap")
    if len(set(parts["base"])) != len(parts["base"]) or len(set(parts["fiber"])) != len(parts["fiber"]):
        raise InvalidSplit("repeated parameter in split")
    return SplitSpec(parts["base"], parts["fiber"])


# -- metric calculus -------------------------------------------------------

def metric_derivative_ad(jet: ImmersionJet) -> np.ndarray:
    """dG[l, i, j] = d_l G_ij from the exact jet."""
    Jac, H = jet.jacobian, jet.hessian
    t = np.einsum("dli,dj->lij", H, Jac)
    return t + np.swapaxes(t, 1, 2)


def metric_derivative_fd(imm: Immersion, points: np.ndarray, step: float) -> np.ndarray:
    """Central differences of the induced metric: (P, k, k, k) indexed [p, l, i, j]."""
    P, k = points.shape
    disp = np.concatenate([points + step * np.eye(k)[l] for l in range(k)]
                          + [points - step * np.eye(k)[l] for l in range(k)])
    G = metric_batch(imm, disp).reshape(2, k, P, k, k)
    return np.transpose((G[0] - G[1]) / (2.0 * step), (1, 0, 2, 3))


def christoffel(G: np.ndarray, dG: np.ndarray) -> np.ndarray:
    """Gamma[l, i, j] (upper l) of a metric with derivatives dG[m, i, j] = d_m G_ij."""
    Ginv = np.linalg.inv(G)
    # lowered: Gamma_{m i j} = 1/2 (d_i G_mj + d_j G_mi - d_m G_ij)
    low = 0.5 * (np.transpose(dG, (1, 0, 2)) + np.transpose(dG, (1, 2, 0)) - dG)
    return np.einsum("lm,mij->lij", Ginv, low)


def _gnorm(v: np.ndarray, G: np.ndarray) -> float:
    return math.sqrt(max(0.0, float(v @ G @ v)))


def _g_projector(G: np.ndarray, idx: Sequence[int]) -> np.ndarray:
    """G-orthogonal projector (coordinate components) onto span{d_i : i in idx}."""
    k = G.shape[0]
    B = np.eye(k)[:, list(idx)]
    return B @ np.linalg.solve(B.T @ G @ B, B.T @ G)


def grad_lnf(base_metric, lnf_partials) -> tuple[np.ndarray, float]:
    """Gradient of ln f on the base (coordinate components) and its squared norm."""
    G = np.atleast_2d(np.asarray(base_metric, dtype=float))
    d = np.asarray(lnf_partials, dtype=float).reshape(-1)
    grad = np.linalg.solve(G, d)
    return grad, float(d @ grad)


def lnf_partials_fd(f: Callable[[np.ndarray], float], base_point, step: float = DEFAULT.fd_step) -> np.ndarray:
    """d(ln f)/d(base_a) by central differences of a warping function callable."""
    x = np.asarray(base_point, dtype=float)
    out = np.empty(x.size)
    for a in range(x.size):
        e = np.zeros_like(x)
        e[a] = step
        fp, fm = f(x + e), f(x - e)
        if not (fp > 0 and fm > 0):
            raise InvalidWarping(f"warping function not positive near {list(x)}")
        out[a] = (math.log(fp) - math.log(fm)) / (2.0 * step)
    return out


def lnf_partials_ad(jet: ImmersionJet, base: Sequence[int], fiber: Sequence[int]) -> np.ndarray:
    """Full-length d(ln f) with f^2 proportional to the first fiber diagonal metric entry."""
    G = jet.jacobian.T @ jet.jacobian
    mu = fiber[0]
    if not G[mu, mu] > 0:
        raise InvalidWarping(f"non-positive fiber metric at {list(jet.point)}")
    dG = metric_derivative_ad(jet)
    out = np.zeros(G.shape[0])
    for a in base:
        out[a] = dG[a, mu, mu] / (2.0 * G[mu, mu])
    return out


# -- warped-product detection ----------------------------------------------

@dataclass
class WarpedReport:
    split: SplitSpec
    points: np.ndarray
    offdiag_residual: float
    base_independence_residual: float
    f_values: list[float]
    f_consistency_residual: float
    grad_lnf_sq: list[float]
    connection_residual: float
    hiepko_base_geodesic: float
    hiepko_fiber_umbilical: float
    structural_pass: bool
    connection_pass: bool
    hiepko_pass: bool
    nontrivial: bool
    tolerances: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.structural_pass and self.connection_pass and self.hiepko_pass


def detect_warped(imm: Immersion, split: SplitSpec, grid: GridSpec | np.ndarray,
                  tols: Tolerances = DEFAULT) -> WarpedReport:
    base, fiber = split.indices(imm.params)
    pts = grid.points(imm.params) if isinstance(grid, GridSpec) else np.atleast_2d(np.asarray(grid, float))
    P, k = pts.shape
    jets = jet2_batch(imm, pts)
    G = np.stack([j.jacobian.T @ j.jacobian for j in jets])
    for j, g in zip(jets, G):
        ev = np.linalg.eigvalsh(g)
        if ev[0] < tols.rank * ev[-1]:
            raise ImmersionDegenerate(j.point)
    dG = metric_derivative_fd(imm, pts, tols.fd_step)
    Gbb = G[:, base][:, :, base]
    Gff = G[:, fiber][:, :, fiber]

    offdiag = float(np.abs(G[:, base][:, :, fiber]).max())
    base_indep = float(np.abs(dG[:, fiber][:, :, base][:, :, :, base]).max())

    # f relative to the first grid point; the fiber metric reference is taken at the
    # same fiber coordinates so that non-flat fiber metrics are handled too
    ref_base = pts[0, base]
    ref_pts = pts.copy()
    ref_pts[:, base] = ref_base
    Gref = metric_batch(imm, ref_pts)[:, fiber][:, :, fiber]
    mu = 0
    f_ref = math.sqrt(Gref[0, mu, mu])
    if not (np.all(Gff[:, mu, mu] > 0) and np.all(Gref[:, mu, mu] > 0)):
        raise InvalidWarping("non-positive fiber metric entry")
    f = f_ref * np.sqrt(Gff[:, mu, mu] / Gref[:, mu, mu])
    scale = np.maximum(1.0, np.abs(Gff).max(axis=(1, 2)))
    dev = np.abs(Gff / (f ** 2)[:, None, None] - Gref / f_ref ** 2).max(axis=(1, 2))
    f_consistency = float((dev * np.maximum(1.0, f ** 2) / scale).max())
    # f must not depend on the fiber point
    groups: dict[tuple, list[float]] = {}
    for p in range(P):
        groups.setdefault(tuple(pts[p, base]), []).append(f[p])
    spread = max((max(v) - min(v)) for v in groups.values())
    f_consistency = max(f_consistency, float(spread))

    grad_sq, conn, geo, umb = [], 0.0, 0.0, 0.0
    for p in range(P):
        g = G[p]
        d_lnf = lnf_partials_ad(jets[p], base, fiber)
        grad_sq.append(grad_lnf(Gbb[p], d_lnf[base])[1])
        Gam = christoffel(g, dG[p])
        norms = np.sqrt(np.diag(g))
        for a in base:
            for m in fiber:
                r = Gam[:, a, m].copy()
                r[m] -= d_lnf[a]
                conn = max(conn, _gnorm(r, g) / (norms[a] * norms[m]))
        Pb = _g_projector(g, base)
        Pf = _g_projector(g, fiber)
        I = np.eye(k)
        for a in base:
            for b in base:
                v = (I - Pb) @ Gam[:, a, b]
                geo = max(geo, _gnorm(v, g) / (norms[a] * norms[b]))
        nf = {(m, n): (I - Pf) @ Gam[:, m, n] for m in fiber for n in fiber}
        Gf_inv = np.linalg.inv(Gff[p])
        Hm = sum(Gf_inv[i, j] * nf[(m, n)] for i, m in enumerate(fiber) for j, n in enumerate(fiber))
        Hm = Hm / len(fiber)
        for m in fiber:
            for n in fiber:
                r = nf[(m, n)] - g[m, n] * Hm
                umb = max(umb, _gnorm(r, g) / (norms[m] * norms[n]))

    structural = offdiag <= tols.structural and base_indep <= tols.fd and f_consistency <= tols.structural
    nontrivial = bool(f.max() - f.min() > tols.structural)
    return WarpedReport(
        split=split,
        points=pts,
        offdiag_residual=offdiag,
        base_independence_residual=base_indep,
        f_values=[float(x) for x in f],
        f_consistency_residual=f_consistency,
        grad_lnf_sq=[float(x) for x in grad_sq],
        connection_residual=float(conn),
        hiepko_base_geodesic=float(geo),
        hiepko_fiber_umbilical=float(umb),
        structural_pass=bool(structural),
        connection_pass=bool(conn <= tols.fd),
        hiepko_pass=bool(geo <= tols.fd and umb <= tols.fd),
        nontrivial=nontrivial,
        tolerances=tols.as_dict(),
    )


# -- inequality ------------------------------------------------------------

@dataclass
class InequalityPoint:
    point: np.ndarray
    theta: float
    slant_dim: int
    lhs: float
    rhs: float
    margin: float
    grad_lnf_sq: float
    slant_block_vanishes: bool
    holomorphic_block_geodesic: bool
    minimal: bool
    equality: bool


@dataclass
class InequalityReport:
    split: SplitSpec
    rows: list[InequalityPoint]
    skipped: list[tuple[list[float], str]]
    min_margin: float | None
    structural_pass: bool
    passed: bool


def inequality_rhs(slant_dim: int, theta: float, grad_sq: float) -> float:
    s, c = math.sin(theta), math.cos(theta)
    return 2.0 * slant_dim * (1.0 / (s * s) + (c * c) / (s * s)) * grad_sq


def inequality_audit(imm: Immersion, split: SplitSpec, grid: GridSpec | np.ndarray,
                     tols: Tolerances = DEFAULT) -> InequalityReport:
    warped = detect_warped(imm, split, grid, tols)
    base, fiber = split.indices(imm.params)
    pts = warped.points
    analyses = analyze_points(imm, pts, tols)

    def one(a: PointAnalysis):
        c = a.cls
        if c.tag != SEMI_SLANT:
            return None, f"point class {c.tag} is not {SEMI_SLANT}"
        if not (tols.theta_guard < c.theta < HALF_PI - tols.theta_guard):
            return None, f"SlantAngleSingular: theta={c.theta!r}"
        h = second_form(a.jet, a.frame)
        inv = h_invariants(h, a.spectrum, tols.angle)
        d_lnf = lnf_partials_ad(a.jet, base, fiber)
        Gbb = a.frame.induced_metric[np.ix_(base, base)]
        gsq = grad_lnf(Gbb, d_lnf[base])[1]
        rhs = inequality_rhs(c.m2, c.theta, gsq)
        lhs = inv.norm_sq
        margin = lhs - rhs
        return InequalityPoint(
            point=a.jet.point, theta=c.theta, slant_dim=c.m2, lhs=lhs, rhs=rhs, margin=margin,
            grad_lnf_sq=gsq,
            slant_block_vanishes=inv.slant_block < tols.identity,
            holomorphic_block_geodesic=inv.holomorphic_block < tols.identity,
            minimal=inv.mean_curvature_norm < tols.identity,
            equality=abs(margin) < tols.margin,
        ), None

    rows, skipped = [], []
    for a, (row, why) in zip(analyses, pmap(one, analyses)):
        if row is None:
            skipped.append(([float(x) for x in a.jet.point], why))
        else:
            rows.append(row)
    min_margin = min((r.margin for r in rows), default=None)
    passed = (warped.structural_pass and not skipped and min_margin is not None
              and min_margin >= -tols.margin)
    return InequalityReport(split, rows, skipped, min_margin, warped.structural_pass, bool(passed))


# -- identity suite --------------------------------------------------------

@dataclass(frozen=True)
class IdentitySpec:
    name: str
    description: str
    needs_split: bool
    needs_holomorphic: bool
    asserted: bool       # False: evaluated and reported, but not expected to hold in general
    path: str = "ad"     # "ad" or "fd": selects the tolerance


IDENTITIES: tuple[IdentitySpec, ...] = (
    IdentitySpec("slant-tangent-norm", "g(TX,TY) = cos^2(theta) g(X,Y) on every cluster", False, False, True),
    IdentitySpec("slant-normal-norm", "g(FX,FY) = sin^2(theta) g(X,Y) on every cluster", False, False, True),
    IdentitySpec("holomorphic-integrability", "g(h(X,JY),FV) = g(h(JX,Y),FV)", False, True, True),
    IdentitySpec("slant-integrability",
                 "g(A_{FTW}V - A_{FTV}W, X) = g(A_{FW}V - A_{FV}W, JX)", False, True, True),
    IdentitySpec("holomorphic-geodesic", "g(h(X,Y),FTV) = g(h(X,JY),FV)", False, True, True),
    IdentitySpec("slant-geodesic", "g(h(U,X),FTV) = g(h(U,JX),FV)", False, True, True),
    IdentitySpec("local-product", "A_{FTV}X = A_{FV}JX", False, True, False),
    IdentitySpec("shape-symmetry", "g(A_{FV}W,X) = g(A_{FW}V,X)", True, True, True),
    IdentitySpec("shape-ftw",
                 "g(A_{FTW}V,X) = -JX(ln f) g(TW,V) - X(ln f) cos^2(theta) g(V,W)", True, True, True),
    IdentitySpec("shape-fw-jx", "g(A_{FW}V,JX) = X(ln f) g(W,V) + JX(ln f) g(V,TW)", True, True, True),
    IdentitySpec("mixed-holomorphic-vanish", "g(h(X,Y),FV) = 0", False, True, True),
    IdentitySpec("mixed-slant", "g(h(X,V),FW) = -JX(ln f) g(V,W) - X(ln f) g(V,TW)", True, True, True),
    IdentitySpec("shape-fv-slant-valued", "A_{FV}X has no D^T component", False, True, True),
    IdentitySpec("warped-criterion",
                 "A_{FTW}X - A_{FW}JX = -(1 + cos^2(theta)) X(ln f) W", True, True, False),
    IdentitySpec("warped-criterion-reduced",
                 "A_{FTW}X - A_{FW}JX = -sin^2(theta) X(ln f) W", True, True, True),
    IdentitySpec("shape-symmetry-reduced",
                 "g(A_{FV}W,X) - g(A_{FW}V,X) = 2 X(ln f) g(V,TW)", True, True, True),
    IdentitySpec("shape-ftw-reduced",
                 "g(A_{FTW}V,X) = -JX(ln f) g(TW,V) + X(ln f) cos^2(theta) g(V,W)", True, True, True),
    IdentitySpec("shape-fw-jx-reduced", "g(A_{FW}V,JX) = X(ln f) g(W,V) - JX(ln f) g(V,TW)", True, True, True),
    IdentitySpec("slant-geodesic-defect",
                 "g(h(U,X),FTV) - g(h(U,JX),FV) = -sin^2(theta) X(ln f) g(U,V)", True, True, True),
    IdentitySpec("integrability-holomorphic", "[D^T, D^T] has no D^theta component (FD brackets)",
                 False, True, True, "fd"),
    IdentitySpec("integrability-slant", "[D^theta, D^theta] has no D^T component (FD brackets)",
                 False, True, True, "fd"),
)

IDENTITY_NAMES = tuple(s.name for s in IDENTITIES)
_BY_NAME = {s.name: s for s in IDENTITIES}


@dataclass
class IdentityResult:
    name: str
    description: str
    max_residual: float | None
    tolerance: float
    passed: bool | None
    asserted: bool
    applicable_points: int
    total_points: int


@dataclass
class IdentityReport:
    immersion: str
    seed: int
    probe_count: int
    split: SplitSpec | None
    results: list[IdentityResult]

    def __getitem__(self, name: str) -> IdentityResult:
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    @property
    def passed(self) -> bool:
        return all(r.passed is not False for r in self.results if r.asserted)


def resolve_selection(selection, split: SplitSpec | None) -> list[str]:
    if selection is None or selection == "all" or selection == ["all"]:
        return [s.name for s in IDENTITIES if split is not None or not s.needs_split]
    if isinstance(selection, str):
        selection = [x.strip() for x in selection.split(",") if x.strip()]
    names = []
    for name in selection:
        if name not in _BY_NAME:
            raise KeyError(f"unknown identity {name!r}; known: {', '.join(IDENTITY_NAMES)}")
        if _BY_NAME[name].needs_split and split is None:
            raise MissingSplit(f"identity {name!r} needs a base/fiber split")
        names.append(name)
    return names


def _unit_probes(rng: np.random.Generator, basis: np.ndarray, count: int) -> np.ndarray:
    m = basis.shape[1]
    z = rng.standard_normal((count, max(m, 1)))[:, :m]
    if m == 0:
        return np.zeros((count, basis.shape[0]))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return z @ basis.T


def _rowdot(a, b):
    return np.einsum("pi,pi->p", a, b)


def point_identity_residuals(a: PointAnalysis, names: Sequence[str], probe_count: int, rng_seed: int,
                             d_lnf_coord: np.ndarray | None, tols: Tolerances = DEFAULT) -> dict:
    """Max residual per AD-path identity at one point; None where the identity does not apply."""
    rng = np.random.default_rng(rng_seed)
    spec = a.spectrum
    T, F = a.tf.T, a.tf.F
    h = second_form(a.jet, a.frame)
    n = probe_count

    # probes are drawn in a fixed order regardless of the selection
    cluster_probes = [(c, _unit_probes(rng, c.basis, n), _unit_probes(rng, c.basis, n)) for c in spec.clusters]
    U1, U2 = holomorphic_split(spec, tols.angle)
    X = _unit_probes(rng, U1, n)
    Y = _unit_probes(rng, U1, n)
    U = _unit_probes(rng, U2, n)
    V = _unit_probes(rng, U2, n)
    W = _unit_probes(rng, U2, n)

    structured = a.cls.tag in (SEMI_SLANT, CR)
    cos2 = spec.clusters[1].lam if structured else None
    sin2 = 1.0 - cos2 if structured else None

    Cinv = np.linalg.inv(a.frame.coord_to_frame)

    def dl(Z):
        return (Z @ Cinv.T) @ d_lnf_coord

    def Fv(Z):
        return Z @ F.T

    def Tv(Z):
        return Z @ T.T

    def g(A, B):
        return _rowdot(A, B)

    def hh(A, B):
        return h(A, B)

    def A_(N, Z):
        return shape_apply(h, N, Z)

    out: dict[str, float | None] = {}
    for name in names:
        spec_i = _BY_NAME[name]
        if spec_i.path == "fd":
            continue
        if name in ("slant-tangent-norm", "slant-normal-norm"):
            worst = 0.0
            for c, P1, P2 in cluster_probes:
                if name == "slant-tangent-norm":
                    r = g(Tv(P1), Tv(P2)) - c.lam * g(P1, P2)
                else:
                    r = g(Fv(P1), Fv(P2)) - (1.0 - c.lam) * g(P1, P2)
                worst = max(worst, float(np.abs(r).max()))
            out[name] = worst
            continue
        if not structured or U1.shape[1] == 0 or U2.shape[1] == 0:
            out[name] = None
            continue
        JX, JY = Tv(X), Tv(Y)
        if name == "holomorphic-integrability":
            r = g(hh(X, JY), Fv(V)) - g(hh(JX, Y), Fv(V))
        elif name == "slant-integrability":
            lhs = g(A_(Fv(Tv(W)), V) - A_(Fv(Tv(V)), W), X)
            rhs = g(A_(Fv(W), V) - A_(Fv(V), W), JX)
            r = lhs - rhs
        elif name == "holomorphic-geodesic":
            r = g(hh(X, Y), Fv(Tv(V))) - g(hh(X, JY), Fv(V))
        elif name == "slant-geodesic":
            r = g(hh(U, X), Fv(Tv(V))) - g(hh(U, JX), Fv(V))
        elif name == "local-product":
            r = np.linalg.norm(A_(Fv(Tv(V)), X) - A_(Fv(V), JX), axis=1)
        elif name == "mixed-holomorphic-vanish":
            r = g(hh(X, Y), Fv(V))
        elif name == "shape-fv-slant-valued":
            r = np.linalg.norm(A_(Fv(V), X) @ U1, axis=1)
        else:
            Xl, JXl = dl(X), dl(JX)
            if name == "shape-symmetry":
                r = g(A_(Fv(V), W), X) - g(A_(Fv(W), V), X)
            elif name == "shape-symmetry-reduced":
                r = g(A_(Fv(V), W), X) - g(A_(Fv(W), V), X) - 2.0 * Xl * g(V, Tv(W))
            elif name == "shape-ftw":
                r = g(A_(Fv(Tv(W)), V), X) - (-JXl * g(Tv(W), V) - Xl * cos2 * g(V, W))
            elif name == "shape-ftw-reduced":
                r = g(A_(Fv(Tv(W)), V), X) - (-JXl * g(Tv(W), V) + Xl * cos2 * g(V, W))
            elif name == "shape-fw-jx":
                r = g(A_(Fv(W), V), JX) - (Xl * g(W, V) + JXl * g(V, Tv(W)))
            elif name == "shape-fw-jx-reduced":
                r = g(A_(Fv(W), V), JX) - (Xl * g(W, V) - JXl * g(V, Tv(W)))
            elif name == "mixed-slant":
                r = g(hh(X, V), Fv(W)) - (-JXl * g(V, W) - Xl * g(V, Tv(W)))
            elif name == "warped-criterion":
                vec = A_(Fv(Tv(W)), X) - A_(Fv(W), JX) + ((1.0 + cos2) * Xl)[:, None] * W
                r = np.linalg.norm(vec, axis=1)
            elif name == "warped-criterion-reduced":
                vec = A_(Fv(Tv(W)), X) - A_(Fv(W), JX) + (sin2 * Xl)[:, None] * W
                r = np.linalg.norm(vec, axis=1)
            elif name == "slant-geodesic-defect":
                r = g(hh(U, X), Fv(Tv(V))) - g(hh(U, JX), Fv(V)) + sin2 * Xl * g(U, V)
            else:
                raise AssertionError(name)
        out[name] = float(np.abs(r).max())
    return out


def identity_suite(imm: Immersion, grid: GridSpec | np.ndarray, selection="all", probe_count: int = 20,
                   seed: int = 0, split: SplitSpec | None = None,
                   tols: Tolerances = DEFAULT) -> IdentityReport:
    names = resolve_selection(selection, split)
    pts = grid.points(imm.params) if isinstance(grid, GridSpec) else np.atleast_2d(np.asarray(grid, float))
    if split is not None:
        base, fiber = split.indices(imm.params)
    analyses = analyze_points(imm, pts, tols)

    def one(item):
        idx, a = item
        d = lnf_partials_ad(a.jet, base, fiber) if split is not None else None
        return point_identity_residuals(a, names, probe_count, int(seed) ^ idx, d, tols)

    per_point = pmap(one, list(enumerate(analyses)))

    fd_results = {}
    if "integrability-holomorphic" in names:
        fd_results["integrability-holomorphic"] = integrability_check(imm, "holomorphic", pts, tols)
    if "integrability-slant" in names:
        fd_results["integrability-slant"] = integrability_check(imm, "slant", pts, tols)

    results = []
    for name in names:
        s = _BY_NAME[name]
        tol = tols.fd if s.path == "fd" else tols.identity
        if s.path == "fd":
            rep = fd_results[name]
            vals = [v for v in rep.per_point if v is not None]
        else:
            vals = [r[name] for r in per_point if r.get(name) is not None]
        worst = max(vals) if vals else None
        passed = None if worst is None else bool(worst <= tol)
        results.append(IdentityResult(name, s.description, worst, tol, passed, s.asserted,
                                      len(vals), len(pts)))
    return IdentityReport(imm.name, int(seed), int(probe_count), split, results)


# -- integrability ---------------------------------------------------------

@dataclass
class IntegrabilityReport:
    which: str
    per_point: list[float | None]
    max_residual: float | None


def _coord_projector(a: PointAnalysis, which: str, angle_tol: float) -> tuple[np.ndarray, int]:
    U1, U2 = holomorphic_split(a.spectrum, angle_tol)
    U = U1 if which == "holomorphic" else U2
    C = a.frame.coord_to_frame
    return np.linalg.solve(C, U @ (U.T @ C)), U.shape[1]


def integrability_check(imm: Immersion, which: str, grid: GridSpec | np.ndarray,
                        tols: Tolerances = DEFAULT) -> IntegrabilityReport:
    """Max complementary component of Lie brackets of projected coordinate fields."""
    if which in ("D^T", "holomorphic"):
        which = "holomorphic"
    elif which in ("D^theta", "slant"):
        which = "slant"
    else:
        raise ValueError(f"unknown distribution {which!r}")
    pts = grid.points(imm.params) if isinstance(grid, GridSpec) else np.atleast_2d(np.asarray(grid, float))
    P, k = pts.shape
    h = tols.fd_step
    stencil = np.concatenate([pts] + [pts + h * np.eye(k)[l] for l in range(k)]
                             + [pts - h * np.eye(k)[l] for l in range(k)])
    jets = jet2_batch(imm, stencil)
    projs = pmap(lambda j: _coord_projector(analyze_jet(j, imm.ambient, tols), which, tols.angle), jets)

    per_point: list[float | None] = []
    for p in range(P):
        P0, r0 = projs[p]
        plus = [projs[P * (1 + l) + p] for l in range(k)]
        minus = [projs[P * (1 + k + l) + p] for l in range(k)]
        if any(r != r0 for _, r in plus + minus):
            raise ProjectorDiscontinuity(f"cluster rank changes near {list(pts[p])}")
        if r0 == 0 or r0 == k:
            per_point.append(0.0)
            continue
        # dP[l] = d_l of the projector; field Y_j = column j of P
        dP = np.stack([(plus[l][0] - minus[l][0]) / (2 * h) for l in range(k)])
        G = jets[p].jacobian.T @ jets[p].jacobian
        Q = np.eye(k) - P0
        worst = 0.0
        for i in range(k):
            for j in range(i + 1, k):
                Yi, Yj = P0[:, i], P0[:, j]
                dYj = np.einsum("l,lr->r", Yi, dP[:, :, j])
                dYi = np.einsum("l,lr->r", Yj, dP[:, :, i])
                br = Q @ (dYj - dYi)
                worst = max(worst, _gnorm(br, G))
        per_point.append(worst)
    vals = [v for v in per_point if v is not None]
    return IntegrabilityReport(which, per_point, max(vals) if vals else None)
