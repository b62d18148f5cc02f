import math

import numpy as np
import pytest
import sympy as sp

from slantlab.errors import InvalidSplit, MissingSplit
from slantlab.immersion import get_example, load_spec
from slantlab.pointgeom import parse_grid
from slantlab.tolerances import DEFAULT
from slantlab.warped import (
    IDENTITY_NAMES,
    christoffel,
    detect_warped,
    grad_lnf,
    identity_suite,
    inequality_audit,
    inequality_rhs,
    integrability_check,
    lnf_partials_fd,
    metric_derivative_ad,
    metric_derivative_fd,
    parse_split,
    resolve_selection,
)

SPLIT = parse_split("base=t,s;fiber=u,v")
SMALL = parse_grid("t=0.5:3:3,s=0.5:3:3,u=0.3:1.2:2,v=0.3:1.2:2")


def _sympy_oracle(tv, sv):
    """|grad ln f|^2 and the inequality right-hand side from the symbolic immersion."""
    t, s, u, v = sp.symbols("t s u v", positive=True)
    phi = sp.Matrix([t * sp.cos(u), s * sp.cos(u), t * sp.cos(v), s * sp.cos(v), t * sp.sin(u),
                     s * sp.sin(u), t * sp.sin(v), s * sp.sin(v), u, v])
    Jac = phi.jacobian([t, s, u, v])
    G = sp.simplify(Jac.T * Jac)
    lnf = sp.log(sp.sqrt(G[2, 2]))
    d = sp.Matrix([sp.diff(lnf, t), sp.diff(lnf, s)])
    gsq = sp.simplify((d.T * G[:2, :2].inv() * d)[0])
    # theta from the Wirtinger angle of the slant plane: cos(theta) = |T d_u| / |d_u|
    J = sp.zeros(10, 10)
    for i in range(5):
        J[2 * i + 1, 2 * i] = 1
        J[2 * i, 2 * i + 1] = -1
    cos_theta = sp.simplify((Jac[:, 3].T * J * Jac[:, 2])[0] / G[2, 2])
    csc2 = 1 / (1 - cos_theta**2)
    cot2 = cos_theta**2 / (1 - cos_theta**2)
    rhs = 2 * 2 * (csc2 + cot2) * gsq
    sub = {t: tv, s: sv}
    return sp.nsimplify(gsq.subs(sub)), sp.nsimplify(sp.simplify(rhs.subs(sub))), sp.simplify(cos_theta)


def test_symbolic_oracle_values():
    gsq, rhs, cos_theta = _sympy_oracle(2, 3)
    assert gsq == sp.Rational(13, 392)
    assert rhs == sp.Rational(197, 1470)
    t, s = sp.symbols("t s", positive=True)
    assert sp.simplify(sp.Abs(cos_theta) - 1 / (t**2 + s**2 + 1)) == 0


def test_parse_split():
    assert parse_split("base=t,s fiber=u,v") == SPLIT
    assert parse_split(SPLIT.to_text()) == SPLIT
    for bad in ["base=t", "base=t;fiber=t", "base=;fiber=u", "foo=t;fiber=u", "base=t,t;fiber=u"]:
        with pytest.raises(InvalidSplit):
            parse_split(bad)
    with pytest.raises(InvalidSplit):
        parse_split("base=t;fiber=u").indices(["t", "s", "u", "v"])


def test_metric_derivative_ad_vs_fd():
    imm = get_example("example-5.1")
    p = np.array([[1.4, 2.1, 0.5, 0.8]])
    from slantlab.immersion import jet2
    ad = metric_derivative_ad(jet2(imm, p[0]))
    fd = metric_derivative_fd(imm, p, 1e-4)[0]
    np.testing.assert_allclose(ad, fd, atol=1e-7)


def test_christoffel_polar():
    # plane polar metric diag(1, r^2): Gamma^r_thth = -r, Gamma^th_rth = 1/r
    r = 1.7
    G = np.diag([1.0, r * r])
    dG = np.zeros((2, 2, 2))
    dG[0, 1, 1] = 2 * r
    Gam = christoffel(G, dG)
    assert Gam[0, 1, 1] == pytest.approx(-r)
    assert Gam[1, 0, 1] == pytest.approx(1 / r) and Gam[1, 1, 0] == pytest.approx(1 / r)


def test_grad_lnf_fd_helper():
    f = lambda b: math.sqrt(b[0] ** 2 + b[1] ** 2 + 1)
    d = lnf_partials_fd(f, [2.0, 3.0])
    _, sq = grad_lnf(np.diag([2.0, 2.0]), d)
    assert sq == pytest.approx(13 / 392, abs=1e-9)


def test_detect_example51():
    rep = detect_warped(get_example("example-5.1"), SPLIT, SMALL)
    assert rep.passed and rep.nontrivial
    for p, f, g in zip(rep.points, rep.f_values, rep.grad_lnf_sq):
        t, s = p[0], p[1]
        assert f == pytest.approx(math.sqrt(t * t + s * s + 1), abs=1e-9)
        assert g == pytest.approx((t * t + s * s) / (2 * (t * t + s * s + 1) ** 2), abs=1e-12)


def test_detect_rejects_wrong_split():
    rep = detect_warped(get_example("example-5.1"), parse_split("base=t,u;fiber=s,v"), SMALL)
    assert not rep.structural_pass and not rep.passed


def test_trivial_product_is_trivial():
    imm = get_example("trivial-product")
    rep = detect_warped(imm, parse_split("base=a,b;fiber=u,v"), parse_grid(imm.default_grid))
    assert rep.structural_pass and not rep.nontrivial
    assert max(rep.grad_lnf_sq) < 1e-20


def test_inequality_rhs_value():
    theta = math.acos(1 / 14)
    assert inequality_rhs(2, theta, 13 / 392) == pytest.approx(197 / 1470, abs=1e-12)


def test_inequality_audit_example51():
    rep = inequality_audit(get_example("example-5.1"), SPLIT, SMALL)
    assert rep.passed and not rep.skipped
    assert rep.min_margin >= -DEFAULT.margin
    assert all(r.slant_dim == 2 for r in rep.rows)


def test_inequality_audit_skips_singular_angle():
    imm = get_example("example-3.1")
    rep = inequality_audit(imm, parse_split("base=t,s,u;fiber=v"), parse_grid("t=0,s=0,u=0,v=0.0005:0.5:2"))
    assert rep.skipped and rep.skipped[0][1].startswith("SlantAngleSingular")
    assert not rep.passed


def test_resolve_selection():
    assert "mixed-slant" not in resolve_selection("all", None)
    assert resolve_selection("all", SPLIT) == list(IDENTITY_NAMES)
    with pytest.raises(MissingSplit):
        resolve_selection("mixed-slant", None)
    with pytest.raises(KeyError):
        resolve_selection("nope", None)


def test_identity_suite_example51():
    rep = identity_suite(get_example("example-5.1"), SMALL, "all", 10, 0, SPLIT)
    for name in ("slant-tangent-norm", "slant-normal-norm", "holomorphic-integrability",
                 "holomorphic-geodesic", "mixed-holomorphic-vanish", "mixed-slant",
                 "shape-fv-slant-valued", "warped-criterion-reduced", "shape-symmetry-reduced",
                 "shape-ftw-reduced", "shape-fw-jx-reduced", "slant-geodesic-defect"):
        assert rep[name].passed, name
    assert rep["integrability-holomorphic"].passed and rep["integrability-slant"].passed
    # the plain geodesic condition fails: slant leaves are umbilical, not geodesic
    assert rep["slant-geodesic"].max_residual > 1e-2


def test_identity_suite_trivial_product_all_vanish():
    imm = get_example("trivial-product")
    rep = identity_suite(imm, parse_grid(imm.default_grid), "all", 5, 1, parse_split("base=a,b;fiber=u,v"))
    for r in rep.results:
        if r.asserted and r.max_residual is not None:
            assert r.passed, r.name
    assert rep["warped-criterion"].max_residual < 1e-8
    assert rep["local-product"].max_residual < 1e-8


def test_identity_suite_deterministic_across_threads(monkeypatch):
    imm = get_example("example-5.1")
    out = []
    for threads in ("1", "3"):
        monkeypatch.setenv("SLANTLAB_THREADS", threads)
        rep = identity_suite(imm, SMALL, "mixed-slant,slant-tangent-norm", 7, 42, SPLIT)
        out.append([(r.name, r.max_residual) for r in rep.results])
    assert out[0] == out[1]


def test_integrability_flat_and_example31():
    for name, which in [("example-3.1", "holomorphic"), ("example-3.1", "D^theta")]:
        imm = get_example(name)
        rep = integrability_check(imm, which, parse_grid("t=0.1,s=0.2,u=0.3,v=0.4:1.2:3"))
        assert rep.max_residual < 1e-6
    with pytest.raises(ValueError):
        integrability_check(get_example("example-3.1"), "bogus", np.zeros((1, 4)))


def test_non_integrable_holomorphic_distribution():
    # a CR submanifold whose J-invariant plane twists along a; the bracket test and the
    # second-fundamental-form criterion must agree that it is not integrable
    imm = load_spec({"name": "twist", "params": ["a", "b", "c"], "ambient_complex_dim": 3,
                     "coords": ["a", "b", "0", "0", "c", "a*c"]})
    pts = np.array([[0.2, 0.1, 0.3]])
    assert integrability_check(imm, "holomorphic", pts).max_residual > 1e-2
    rep = identity_suite(imm, pts, "holomorphic-integrability,integrability-holomorphic", 10, 0)
    assert not rep["holomorphic-integrability"].passed
    assert not rep["integrability-holomorphic"].passed


def test_grad_lnf_one_dimensional():
    t = 1.7
    vec, sq = grad_lnf([[1.0]], [1.0 / t])
    assert sq == pytest.approx(1 / t**2, rel=1e-15) and vec[0] == pytest.approx(1 / t)
    assert grad_lnf(np.eye(2), [0.0, 0.0])[1] == 0.0


def test_example31_product_metric():
    imm = get_example("example-3.1")
    rep = detect_warped(imm, parse_split("base=t,s,u;fiber=v"), parse_grid("t=0:1:2,s=0:1:2,u=0,v=0.2:1.2:3"))
    assert rep.structural_pass and not rep.nontrivial
    np.testing.assert_allclose(rep.f_values, 1.0, atol=1e-15)


def test_hiepko_flags_example51():
    rep = detect_warped(get_example("example-5.1"), SPLIT, SMALL)
    assert rep.hiepko_base_geodesic <= 1e-6 and rep.hiepko_fiber_umbilical <= 1e-6
    assert rep.connection_residual <= 1e-5 and rep.offdiag_residual <= 1e-10
