"""Command-line front end.

Exit codes: 0 all audits pass, 1 an audit failed, 2 usage error,
3 numerical failure (degenerate immersion, singular slant angle, ...).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import NumericalFailure, SlantlabError, UsageError
from .immersion import Immersion, example_names, get_example, load_spec_file
from .pointgeom import analyze_point, classify_field, parse_grid
from .report import SCHEMA_VERSION, dumps, to_csv
from .secondform import h_invariants, second_form
from .tolerances import DEFAULT
from .warped import (
    IDENTITY_NAMES,
    detect_warped,
    identity_suite,
    inequality_audit,
    parse_split,
)

COMMANDS = ("list-examples", "describe", "classify", "scan", "check-warped", "identities", "audit-inequality")
CSV_COMMANDS = ("scan", "audit-inequality")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--immersion", help="built-in name (see list-examples) or path to a JSON document")
    common.add_argument("--point", help="parameter values, e.g. t=0,s=0,u=0,v=1.05")
    common.add_argument("--grid", help="axes name=start:stop:count, comma separated")
    common.add_argument("--split", help="base=...;fiber=...")
    common.add_argument("--suite", default="all", help="identity names (comma separated) or 'all'")
    common.add_argument("--tol-structural", type=float)
    common.add_argument("--tol-identity", type=float)
    common.add_argument("--tol-fd", type=float)
    common.add_argument("--theta-guard", type=float)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--probes", type=int, default=20)
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")

    parser = _Parser(prog="slantlab", description="Slant geometry audits for immersions into C^n.")
    parser.add_argument("--version", action="version", version=f"slantlab {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def _load_immersion(ref: str | None) -> Immersion:
    if not ref:
        raise UsageError("--immersion is required")
    if os.path.isfile(ref):
        return load_spec_file(ref)
    return get_example(ref)


def _parse_point(text: str | None, imm: Immersion) -> np.ndarray:
    if not text:
        raise UsageError("--point is required")
    vals = {}
    for item in text.split(","):
        name, eq, val = item.partition("=")
        name = name.strip()
        try:
            if not eq:
                raise ValueError
            vals[name] = float(val)
        except ValueError:
            raise UsageError(f"bad point component {item!r}") from None
        if not math.isfinite(vals[name]):
            raise UsageError(f"non-finite value for {name}")
    missing = [p for p in imm.params if p not in vals]
    extra = [p for p in vals if p not in imm.params]
    if missing or extra:
        raise UsageError(f"point must set exactly {list(imm.params)}; missing {missing}, unknown {extra}")
    return np.array([vals[p] for p in imm.params])


def _grid_for(args, imm: Immersion):
    text = args.grid or imm.default_grid
    if not text:
        raise UsageError("--grid is required for this immersion")
    return parse_grid(text)


def _split_for(args, required: bool):
    if not args.split:
        if required:
            raise UsageError("--split is required")
        return None
    return parse_split(args.split)


def _point_dict(imm: Immersion, p) -> dict:
    return {name: float(x) for name, x in zip(imm.params, p)}


# -- commands --------------------------------------------------------------

def _cmd_list(args, tols):
    out = []
    for name in example_names():
        imm = get_example(name)
        out.append({"name": name, "params": list(imm.params), "ambient_complex_dim": imm.n,
                    "domain_notes": imm.domain_notes, "default_grid": imm.default_grid})
    return {"examples": out}, 0, None


def _cmd_describe(args, tols):
    imm = _load_immersion(args.immersion)
    doc = imm.to_document()
    doc.setdefault("domain_notes", "")
    doc["default_grid"] = imm.default_grid
    return doc, 0, None


def _cmd_classify(args, tols):
    imm = _load_immersion(args.immersion)
    p = _parse_point(args.point, imm)
    a = analyze_point(imm, p, tols)
    h = second_form(a.jet, a.frame)
    inv = h_invariants(h, a.spectrum, tols.angle)
    payload = {
        "point": _point_dict(imm, p),
        "class": {"tag": a.cls.tag, "m1": a.cls.m1, "m2": a.cls.m2, "theta": a.cls.theta},
        "spectrum": [{"lambda": c.lam, "multiplicity": c.multiplicity, "theta": c.theta}
                     for c in a.spectrum.clusters],
        "induced_metric": a.frame.induced_metric,
        "h_norm_sq": inv.norm_sq,
        "h_blocks": {"holomorphic": inv.holomorphic_block, "slant": inv.slant_block, "mixed": inv.mixed_block},
        "mean_curvature_norm": inv.mean_curvature_norm,
    }
    return payload, 0, None


def _cmd_scan(args, tols):
    imm = _load_immersion(args.immersion)
    grid = _grid_for(args, imm)
    rep = classify_field(imm, grid, tols)
    rows = [{"point": _point_dict(imm, p), "tag": c.tag, "m1": c.m1, "m2": c.m2, "theta": c.theta}
            for p, c in zip(rep.points, rep.classes)]
    payload = {"points": rows, "uniform": rep.uniform, "structure": rep.structure, "m1": rep.m1,
               "m2": rep.m2, "theta_min": rep.theta_min, "theta_max": rep.theta_max,
               "theta_mode": rep.theta_mode, "problems": rep.problems}
    header = list(imm.params) + ["tag", "m1", "m2", "theta"]
    csv_rows = [list(p) + [c.tag, c.m1, c.m2, c.theta] for p, c in zip(rep.points, rep.classes)]
    return payload, 0, (header, csv_rows)


def _cmd_check_warped(args, tols):
    imm = _load_immersion(args.immersion)
    split = _split_for(args, True)
    rep = detect_warped(imm, split, _grid_for(args, imm), tols)
    payload = {
        "split": split.to_text(),
        "offdiag_residual": rep.offdiag_residual,
        "base_independence_residual": rep.base_independence_residual,
        "f_consistency_residual": rep.f_consistency_residual,
        "connection_residual": rep.connection_residual,
        "hiepko_base_geodesic": rep.hiepko_base_geodesic,
        "hiepko_fiber_umbilical": rep.hiepko_fiber_umbilical,
        "structural_pass": rep.structural_pass,
        "connection_pass": rep.connection_pass,
        "hiepko_pass": rep.hiepko_pass,
        "nontrivial": rep.nontrivial,
        "points": [{"point": _point_dict(imm, p), "f": f, "grad_lnf_sq": g}
                   for p, f, g in zip(rep.points, rep.f_values, rep.grad_lnf_sq)],
    }
    return payload, 0 if rep.passed else 1, None


def _cmd_identities(args, tols):
    imm = _load_immersion(args.immersion)
    split = _split_for(args, False)
    if args.probes < 1:
        raise UsageError("--probes must be >= 1")
    suite = args.suite
    if suite != "all":
        unknown = [s for s in suite.split(",") if s.strip() and s.strip() not in IDENTITY_NAMES]
        if unknown:
            raise UsageError(f"unknown identities {unknown}; known: {', '.join(IDENTITY_NAMES)}")
    rep = identity_suite(imm, _grid_for(args, imm), suite, args.probes, args.seed, split, tols)
    payload = {
        "split": split.to_text() if split else None,
        "seed": rep.seed,
        "probes": rep.probe_count,
        "identities": [{"name": r.name, "description": r.description, "max_residual": r.max_residual,
                        "tolerance": r.tolerance, "pass": r.passed, "asserted": r.asserted,
                        "applicable_points": r.applicable_points, "total_points": r.total_points}
                       for r in rep.results],
    }
    return payload, 0 if rep.passed else 1, None


def _cmd_audit(args, tols):
    imm = _load_immersion(args.immersion)
    split = _split_for(args, True)
    rep = inequality_audit(imm, split, _grid_for(args, imm), tols)
    rows = [{"point": _point_dict(imm, r.point), "theta": r.theta, "slant_dim": r.slant_dim, "lhs": r.lhs,
             "rhs": r.rhs, "margin": r.margin, "grad_lnf_sq": r.grad_lnf_sq,
             "slant_block_vanishes": r.slant_block_vanishes,
             "holomorphic_block_geodesic": r.holomorphic_block_geodesic,
             "minimal": r.minimal, "equality": r.equality} for r in rep.rows]
    payload = {"split": split.to_text(), "rows": rows,
               "skipped": [{"point": _point_dict(imm, p), "reason": why} for p, why in rep.skipped],
               "min_margin": rep.min_margin, "structural_pass": rep.structural_pass}
    if any(why.startswith("SlantAngleSingular") for _, why in rep.skipped):
        code = 3
    else:
        code = 0 if rep.passed else 1
    header = list(imm.params) + ["status", "theta", "slant_dim", "lhs", "rhs", "margin", "grad_lnf_sq",
                                 "slant_block_vanishes", "holomorphic_block_geodesic", "minimal", "equality"]
    csv_rows = [list(r.point) + ["ok", r.theta, r.slant_dim, r.lhs, r.rhs, r.margin, r.grad_lnf_sq,
                                 r.slant_block_vanishes, r.holomorphic_block_geodesic, r.minimal, r.equality]
                for r in rep.rows]
    csv_rows += [list(p) + [why] + [None] * 10 for p, why in rep.skipped]
    return payload, code, (header, csv_rows)


_HANDLERS = {
    "list-examples": _cmd_list,
    "describe": _cmd_describe,
    "classify": _cmd_classify,
    "scan": _cmd_scan,
    "check-warped": _cmd_check_warped,
    "identities": _cmd_identities,
    "audit-inequality": _cmd_audit,
}


def _config(args, tols) -> dict:
    if args is None or args.command is None:
        return {}
    return {
        "immersion": args.immersion,
        "point": args.point,
        "grid": args.grid,
        "split": args.split,
        "suite": args.suite,
        "seed": args.seed,
        "probes": args.probes,
        "format": args.format,
        "tolerances": tols.as_dict() if tols else None,
    }


def _write(text: str, out: str | None, stdout) -> None:
    if out:
        Path(out).write_text(text)
    else:
        stdout.write(text)


def run(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    argv = list(sys.argv[1:] if argv is None else argv)
    args = tols = None
    payload, code, error, table = None, 0, None, None
    try:
        args = _build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError(f"a command is required: {', '.join(COMMANDS)}")
        try:
            tols = DEFAULT.with_overrides(structural=args.tol_structural, identity=args.tol_identity,
                                          fd=args.tol_fd, theta_guard=args.theta_guard)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        if args.format == "csv" and args.command not in CSV_COMMANDS:
            raise UsageError(f"--format csv is only available for {', '.join(CSV_COMMANDS)}")
        payload, code, table = _HANDLERS[args.command](args, tols)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except UsageError as exc:
        code, error = 2, exc
    except (NumericalFailure, np.linalg.LinAlgError) as exc:
        code, error = 3, exc
    except (SlantlabError, KeyError, ValueError) as exc:
        code, error = 2, exc

    if args is not None and error is None and args.format == "csv" and table is not None:
        _write(to_csv(*table), args.out, stdout)
        return code

    report = {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": "slantlab", "version": __version__},
        "command": getattr(args, "command", None),
        "config": _config(args, tols),
        "payload": payload,
        "status": "error" if error else ("pass" if code == 0 else "fail"),
        "exit_code": code,
        "error": None if error is None else {"type": type(error).__name__, "message": str(error)},
    }
    _write(dumps(report), getattr(args, "out", None), stdout)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
