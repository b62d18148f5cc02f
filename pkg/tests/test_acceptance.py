"""Acceptance criteria, one check per criterion.

Each check prints a single ``ACCEPTANCE <n> PASS|FAIL ...`` line; the lines are
also repeated in the pytest terminal summary (see conftest.py).  Run this file
directly to print only the summary lines.
"""

import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest
import sympy as sp

from slantlab.errors import ImmersionDegenerate
from slantlab.exprdsl import Binary, Call, NumericLiteral, ParamRef, to_string
from slantlab.immersion import example_names, get_example, jet2, load_spec
from slantlab.pointgeom import COMPLEX, SEMI_SLANT, TOTALLY_REAL, analyze_point, classify_field, parse_grid
from slantlab.secondform import second_form, shape_operator
from slantlab.warped import detect_warped, identity_suite, inequality_audit, parse_split

LINES: dict[int, str] = {}

SPLIT = parse_split("base=t,s;fiber=u,v")
GRID_51 = "t=0.5:3:4,s=0.5:3:4,u=0.3:1.2:3,v=0.3:1.2:3"


def record(n: int, ok: bool, detail: str) -> bool:
    line = f"ACCEPTANCE {n:2d} {'PASS' if ok else 'FAIL'}  {detail}"
    LINES[n] = line
    print(line)
    return ok


def _ex51_points():
    return parse_grid(GRID_51).points(["t", "s", "u", "v"])


def _sympy_grad_lnf_sq(tv: int, sv: int):
    t, s, u, v = sp.symbols("t s u v", positive=True)
    phi = sp.Matrix([t * sp.cos(u), s * sp.cos(u), t * sp.cos(v), s * sp.cos(v), t * sp.sin(u),
                     s * sp.sin(u), t * sp.sin(v), s * sp.sin(v), u, v])
    Jac = phi.jacobian([t, s, u, v])
    G = sp.simplify(Jac.T * Jac)
    lnf = sp.log(sp.sqrt(G[2, 2]))
    d = sp.Matrix([sp.diff(lnf, t), sp.diff(lnf, s)])
    return sp.nsimplify(sp.simplify((d.T * G[:2, :2].inv() * d)[0]).subs({t: tv, s: sv}))


# -- 1 ---------------------------------------------------------------------

def criterion_1():
    imm = get_example("example-3.1")
    rep = classify_field(imm, parse_grid("t=0,s=0,u=0,v=0.1:1.5:15"))
    worst = max(abs(c.theta - p[3]) for p, c in zip(rep.points, rep.classes))
    ok = (all(c.tag == SEMI_SLANT and c.m1 == 2 and c.m2 == 2 for c in rep.classes)
          and len(rep.classes) == 15 and worst <= 1e-9)
    return record(1, ok, f"example-3.1 v-grid: 15 semi-slant points, max |theta - v| = {worst:.3e} (tol 1e-9)")


# -- 2 ---------------------------------------------------------------------

def criterion_2():
    imm = get_example("example-5.1")
    pts = _ex51_points()
    worst = 0.0
    tags = set()
    for p in pts:
        a = analyze_point(imm, p)
        tags.add(a.cls.tag)
        t, s = p[0], p[1]
        worst = max(worst, abs(math.cos(a.cls.theta) - 1.0 / (t * t + s * s + 1.0)))
    ok = worst <= 1e-9 and tags == {SEMI_SLANT} and len(pts) == 144 and not np.any(pts[:, :2] == 1.0)
    return record(2, ok, f"example-5.1 4x4x3x3: max |cos theta - 1/(t^2+s^2+1)| = {worst:.3e} (tol 1e-9)")


# -- 3 ---------------------------------------------------------------------

def criterion_3():
    imm = get_example("example-5.1")
    pts = _ex51_points()
    g_err = 0.0
    for p in pts:
        a = analyze_point(imm, p)
        w = p[0] ** 2 + p[1] ** 2 + 1.0
        g_err = max(g_err, float(np.abs(a.frame.induced_metric - np.diag([2, 2, w, w])).max()))
    rep = detect_warped(imm, SPLIT, pts)
    f_err = max(abs(f - math.sqrt(p[0] ** 2 + p[1] ** 2 + 1)) for p, f in zip(pts, rep.f_values))
    at = detect_warped(imm, SPLIT, parse_grid("t=2,s=3,u=0.3:1.2:3,v=0.3:1.2:3"))
    oracle = _sympy_grad_lnf_sq(2, 3)
    f23 = max(abs(f - math.sqrt(14)) for f in at.f_values)
    g23 = max(abs(g - float(oracle)) for g in at.grad_lnf_sq)
    ok = (oracle == sp.Rational(13, 392) and g_err <= 1e-9 and f_err <= 1e-9 and f23 <= 1e-9
          and g23 <= 1e-9 and rep.structural_pass)
    return record(3, ok, f"metric err {g_err:.1e}, f err {f_err:.1e}, |f(2,3)-sqrt14| {f23:.1e}, "
                         f"|grad ln f|^2(2,3) vs sympy {oracle} err {g23:.1e} (tol 1e-9)")


# -- 4 ---------------------------------------------------------------------

def criterion_4():
    imm = get_example("example-5.1")
    at = inequality_audit(imm, SPLIT, parse_grid("t=2,s=3,u=0.3:1.2:3,v=0.3:1.2:3"))
    rhs_err = max(abs(r.rhs - 197 / 1470) for r in at.rows)
    rep = inequality_audit(imm, SPLIT, _ex51_points())
    ok = (len(at.rows) == 9 and rhs_err <= 1e-9 and not rep.skipped and len(rep.rows) == 144
          and rep.min_margin >= -1e-6)
    return record(4, ok, f"rhs(2,3) err vs 197/1470 = {rhs_err:.1e} (tol 1e-9); "
                         f"min margin over 144 points = {rep.min_margin:.6f} (>= -1e-6)")


# -- 5 ---------------------------------------------------------------------

def criterion_5():
    rep = identity_suite(get_example("example-5.1"), _ex51_points(),
                         "mixed-holomorphic-vanish,mixed-slant", 20, 0, SPLIT)
    r6 = rep["mixed-holomorphic-vanish"].max_residual
    r7 = rep["mixed-slant"].max_residual
    ok = r6 <= 1e-8 and r7 <= 1e-6 and rep["mixed-slant"].applicable_points == 144
    return record(5, ok, f"g(h(X,Y),FV)=0 residual {r6:.2e} (tol 1e-8); "
                         f"g(h(X,V),FW) relation residual {r7:.2e} (tol 1e-6)")


# -- 6 ---------------------------------------------------------------------

CRITERION_6 = ("shape-symmetry", "shape-ftw", "shape-fw-jx", "holomorphic-integrability",
               "holomorphic-geodesic", "slant-geodesic")


def criterion_6():
    rep = identity_suite(get_example("example-5.1"), _ex51_points(), ",".join(CRITERION_6), 20, 0, SPLIT)
    res = {n: rep[n].max_residual for n in CRITERION_6}
    bad = [n for n, r in res.items() if not r <= 1e-6]
    detail = ", ".join(f"{n} {r:.2e}" for n, r in res.items())
    return record(6, not bad, f"max residuals (tol 1e-6): {detail}" + (f"; failing: {bad}" if bad else ""))


# -- 7 ---------------------------------------------------------------------

_FUNCS = ("sin", "cos", "exp")


def _random_expr(rng, k, depth=2):
    if depth == 0 or rng.random() < 0.3:
        if rng.random() < 0.7:
            return ParamRef(int(rng.integers(k)))
        return NumericLiteral(round(float(rng.uniform(-1.5, 1.5)), 3))
    kind = rng.integers(4)
    if kind == 0:
        return Call(str(rng.choice(_FUNCS)), Binary("mul", NumericLiteral(0.5), _random_expr(rng, k, depth - 1)))
    op = ("add", "sub", "mul")[kind - 1]
    return Binary(op, _random_expr(rng, k, depth - 1), _random_expr(rng, k, depth - 1))


def random_immersion(rng, idx):
    k = int(rng.integers(1, 5))
    n = int(rng.integers(2, 6))
    params = [f"x{i}" for i in range(k)]
    coords = []
    for d in range(2 * n):
        e = _random_expr(rng, k)
        if d < k:  # a generic linear part keeps the Jacobian of full rank
            e = Binary("add", ParamRef(d), Binary("mul", NumericLiteral(0.3), e))
        coords.append(to_string(e, params))
    return load_spec({"name": f"random-{idx}", "params": params, "ambient_complex_dim": n, "coords": coords})


def _property_residuals(imm, p, rng):
    a = analyze_point(imm, p)
    T, F = a.tf.T, a.tf.F
    k = imm.k
    out = {}
    X = rng.standard_normal((10, k))
    out["norm"] = float(np.abs(np.sum((X @ T.T) ** 2, 1) + np.sum((X @ F.T) ** 2, 1) - np.sum(X**2, 1)).max())
    out["skew"] = float(np.abs(T + T.T).max())
    ev = np.linalg.eigvalsh(-T @ T)
    out["spec_ok"] = bool(ev.min() >= -1e-10 and ev.max() <= 1 + 1e-10)
    h = second_form(a.jet, a.frame)
    out["hsym"] = float(np.abs(h.h - h.h.transpose(1, 0, 2)).max(initial=0.0))
    dual = 0.0
    m = a.frame.normal_frame.shape[1]
    for _ in range(5 if m else 0):
        N = rng.standard_normal(m)
        N /= np.linalg.norm(N)
        A = shape_operator(h, a.frame, N)
        Xv, Yv = rng.standard_normal((2, k))
        dual = max(dual, abs(A(Xv) @ Yv - h(Xv, Yv) @ N))
    out["dual"] = float(dual)
    step = 1e-6
    fd = np.empty_like(a.jet.jacobian)
    for i in range(k):
        d = np.zeros(k)
        d[i] = step
        fd[:, i] = (jet2(imm, p + d).position - jet2(imm, p - d).position) / (2 * step)
    out["jac"] = float(np.abs(fd - a.jet.jacobian).max())
    return out


def criterion_7():
    rng = np.random.default_rng(20240607)
    worst = {"norm": 0.0, "skew": 0.0, "hsym": 0.0, "dual": 0.0, "jac": 0.0}
    spec_ok, evaluated, dims = True, 0, set()
    for idx in range(50):
        imm = random_immersion(rng, idx)
        dims.add((imm.k, imm.n))
        got = 0
        while got < 5:
            p = rng.uniform(-1, 1, imm.k)
            try:
                r = _property_residuals(imm, p, rng)
            except ImmersionDegenerate:
                continue
            got += 1
            evaluated += 1
            spec_ok &= r["spec_ok"]
            for key in worst:
                worst[key] = max(worst[key], r[key])
    ok = (evaluated == 250 and spec_ok and worst["norm"] <= 1e-10 and worst["skew"] <= 1e-10
          and worst["hsym"] <= 1e-9 and worst["dual"] <= 1e-9 and worst["jac"] <= 1e-5)
    return record(7, ok, f"50 random immersions x 5 points: |TX|^2+|FX|^2-|X|^2 {worst['norm']:.1e}, "
                         f"T skew {worst['skew']:.1e}, -T^2 spectrum in range {spec_ok}, "
                         f"h sym {worst['hsym']:.1e}, A/h duality {worst['dual']:.1e}, "
                         f"AD-FD Jacobian {worst['jac']:.1e}")


# -- 8 ---------------------------------------------------------------------

def criterion_8():
    rng = np.random.default_rng(8)
    worst, count = 0.0, 0
    for name in example_names():
        imm = get_example(name)
        pts = parse_grid(imm.default_grid).points(imm.params)
        sel = pts[np.linspace(0, len(pts) - 1, 10).round().astype(int)]
        for p in sel:
            a = analyze_point(imm, p)
            for c in a.spectrum.clusters:
                Z = rng.standard_normal((100, c.multiplicity))
                Z /= np.linalg.norm(Z, axis=1, keepdims=True)
                X = Z @ c.basis.T
                ratio = np.minimum(1.0, np.linalg.norm(X @ a.tf.T.T, axis=1))
                angles = np.arccos(ratio)
                worst = max(worst, float(np.abs(angles - c.theta).max()))
            count += 1
    ok = worst <= 1e-7 and count == 10 * len(example_names())
    return record(8, ok, f"{count} points over {len(example_names())} examples: max spread between spectral "
                         f"and sampled Wirtinger angle {worst:.2e} (tol 1e-7)")


# -- 9 ---------------------------------------------------------------------

def criterion_9():
    msgs, ok = [], True
    for name, tag, theta in (("holomorphic-plane", COMPLEX, 0.0), ("totally-real-plane", TOTALLY_REAL, math.pi / 2)):
        imm = get_example(name)
        rep = classify_field(imm, parse_grid(imm.default_grid))
        good = all(c.tag == tag and abs(c.theta - theta) <= 1e-9 for c in rep.classes)
        if tag == COMPLEX:
            good &= all(c.m2 == 0 for c in rep.classes)
        ok &= good
        msgs.append(f"{name} -> {tag} {good}")
    errs = []
    for r in (0.5, 1.0, 2.0):
        imm = get_example("circle", r=r)
        for t in np.linspace(0, 6, 7):
            a = analyze_point(imm, [t])
            errs.append(abs(second_form(a.jet, a.frame).norm_sq() - 1 / r**2))
    ok &= max(errs) <= 1e-9
    msgs.append(f"circle |h|^2 - 1/r^2 max {max(errs):.1e} (tol 1e-9)")
    return record(9, ok, "; ".join(msgs))


# -- 10 --------------------------------------------------------------------

CLI_SUITE = [
    ["list-examples"],
    ["describe", "--immersion", "example-5.1"],
    ["classify", "--immersion", "example-3.1", "--point", "t=0,s=0,u=0,v=1.0471976"],
    ["scan", "--immersion", "example-5.1", "--grid", GRID_51],
    ["check-warped", "--immersion", "example-5.1", "--split", "base=t,s;fiber=u,v", "--grid", GRID_51],
    ["identities", "--immersion", "example-5.1", "--split", "base=t,s;fiber=u,v",
     "--grid", "t=0.5:3:3,s=0.5:3:3,u=0.3:1.2:2,v=0.3:1.2:2", "--seed", "11"],
    ["audit-inequality", "--immersion", "example-5.1", "--split", "base=t,s;fiber=u,v", "--grid", GRID_51],
]


def _run_suite(threads: str) -> list[bytes]:
    out = []
    env = dict(os.environ, SLANTLAB_THREADS=threads)
    for argv in CLI_SUITE:
        proc = subprocess.run([sys.executable, "-m", "slantlab.cli", *argv], capture_output=True, env=env)
        out.append(proc.stdout)
    return out


def criterion_10():
    a, b, c = _run_suite("1"), _run_suite("1"), _run_suite("4")
    valid = all(json.loads(x)["exit_code"] in (0, 1) for x in a)
    same = a == b == c
    return record(10, same and valid, f"{len(CLI_SUITE)} CLI commands x 3 runs (threads 1, 1, 4): "
                                      f"byte-identical {same}")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10]


@pytest.mark.parametrize("check", CRITERIA, ids=[f"criterion_{i}" for i in range(1, 11)])
def test_acceptance(check):
    assert check()


if __name__ == "__main__":
    results = [c() for c in CRITERIA]
    print()
    for n in sorted(LINES):
        print(LINES[n])
    sys.exit(0 if all(results) else 1)
