"""Command-line front end.

    iterfe --spec FILE --out DIR [--command solve|solve-e0|diagnose|simulate|verify]

Writes ``DIR/report.json`` and ``DIR/results.csv`` (columns x, phi, status,
residual).  Exit codes: 0 success, 2 unreadable or invalid equation file, 3 no bounded
solution exists (the partial sums g_k grow without bound, or orbit sums of g
do not vanish), 4 more undecided points than ``--max-undecided`` allows.

For ``simulate`` the phi column is the estimated absorption probability at 1
and the residual column holds the half-width of its 95% interval.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .almostlim import CERTIFIED
from .errors import (
    GUnboundedError, NotSolvableError, SpecParseError, SpecValidationError, TooManyUnresolved,
)
from .funcspace import affine
from .solver import (
    admissibility_report, check_Bg_zero, check_G_bounded, solve_E, solve_E0,
)
from .specfile import COMMANDS, EquationSpec, load_spec
from .stochastic import absorption_probability
from .verify import check_hypotheses, class_report, residual_E

__all__ = ["main", "run", "EXIT_OK", "EXIT_SPEC", "EXIT_UNSOLVABLE", "EXIT_UNDECIDED"]

EXIT_OK, EXIT_SPEC, EXIT_UNSOLVABLE, EXIT_UNDECIDED = 0, 2, 3, 4
CSV_HEADER = ("x", "phi", "status", "residual")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    return obj


def _fmt(v) -> str:
    return repr(float(v)) if np.isfinite(v) else "nan"


def _write_outputs(out: Path, report: dict, rows) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")
    with open(out / "results.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for x, phi, status, res in rows:
            w.writerow((_fmt(x), _fmt(phi), status, _fmt(res)))


def _undecided_exit(status, limit) -> int:
    if not len(status):
        return EXIT_OK
    frac = sum(s not in CERTIFIED for s in status) / len(status)
    return EXIT_UNDECIDED if frac > limit else EXIT_OK


def _solution_rows(sol):
    return zip(sol.points, sol.values, sol.status, sol.residual)


def _cmd_solve(spec: EquationSpec, prm, out):
    rep = solve_E(spec.system, spec.g, spec.h, spec.endpoints, spec.grid, prm,
                  spec.options.class_selector)
    report = {"solution": rep.to_dict()}
    return report, list(_solution_rows(rep)), _undecided_exit(rep.status, spec.options.max_undecided)


def _cmd_solve_e0(spec: EquationSpec, prm, out):
    h = spec.h or affine(spec.endpoints.a, spec.endpoints.b)
    sol = solve_E0(spec.system, h, spec.grid, prm)
    report = {"solution": {"residual_sup": sol.residual_sup, "points": len(sol.points),
                           "undecided": int((~sol.certified).sum()),
                           "methods": sorted(set(sol.methods))}}
    return report, list(_solution_rows(sol)), _undecided_exit(sol.status, spec.options.max_undecided)


def _cmd_diagnose(spec: EquationSpec, prm, out):
    hyp = check_hypotheses(spec.system, spec.grid)
    report = {"hypotheses": hyp.to_dict()}
    g_rep = check_G_bounded(spec.system, spec.g, spec.grid, prm.k_max, prm.g_cap, prm)
    report["g_family"] = g_rep.to_dict()
    report["g_family"]["worst_sequence"] = g_rep.worst_sequence
    if g_rep.unbounded:
        report["error"] = {"kind": "g_unbounded",
                           "message": f"g_k grows linearly with slope {g_rep.slope:.12g} "
                                      f"at x={g_rep.worst_point:.17g}"}
        return report, [], EXIT_UNSOLVABLE
    bg = check_Bg_zero(spec.system, spec.g, spec.grid, prm)
    report["bg_sup"] = bg.sup_abs
    report["admissibility"] = admissibility_report(
        spec.system, spec.g, spec.options.class_selector, spec.grid, prm).to_dict()
    rows = [(x, v, s, abs(v)) for x, v, s in zip(bg.points, bg.values, bg.status)]
    return report, rows, _undecided_exit(bg.status, spec.options.max_undecided)


def _cmd_simulate(spec: EquationSpec, prm, out):
    opts = spec.options
    points = opts.points or tuple(spec.grid.points(spec.system.special_points()))
    cfg = opts.trajectory(prm.seed)
    rows, ests = [], []
    for x in points:
        try:
            est = absorption_probability(spec.system, x, opts.n_samples, cfg, prm.workers)
            status = "resolved"
        except TooManyUnresolved as exc:
            est, status = exc.estimate, "undecided"
        ests.append(est.to_dict())
        rows.append((x, est.p_hat, status, est.half_width))
    report = {"absorption": ests}
    code = _undecided_exit(["convergent" if r[2] == "resolved" else "undecided" for r in rows],
                           opts.max_undecided)
    return report, rows, code


def _cmd_verify(spec: EquationSpec, prm, out):
    hyp = check_hypotheses(spec.system, spec.grid)
    rep = solve_E(spec.system, spec.g, spec.h, spec.endpoints, spec.grid, prm,
                  spec.options.class_selector)
    report = {"hypotheses": hyp.to_dict(), "solution": rep.to_dict()}
    if rep.phi is not None:
        report["residual_E"] = residual_E(rep.phi, spec.system, spec.g, rep.phi.nodes())
        report["class_report"] = class_report(rep.phi, spec.grid).to_dict()
    return report, list(_solution_rows(rep)), _undecided_exit(rep.status, spec.options.max_undecided)


_COMMANDS = {
    "solve": _cmd_solve, "solve-e0": _cmd_solve_e0, "diagnose": _cmd_diagnose,
    "simulate": _cmd_simulate, "verify": _cmd_verify,
}


def run(command: str, spec: EquationSpec, out, workers: int = 1) -> int:
    """Execute one command, write report.json and results.csv under ``out``, return the exit code."""
    out = Path(out)
    prm = spec.params.solve_params(workers)
    report = {"command": command, "spec": spec.to_dict()}
    try:
        body, rows, code = _COMMANDS[command](spec, prm, out)
        report.update(body)
    except GUnboundedError as exc:
        rows, code = [], EXIT_UNSOLVABLE
        report["error"] = {"kind": "g_unbounded", "message": str(exc)}
        if exc.report is not None:
            report["g_family"] = exc.report.to_dict()
            report["g_family"]["worst_sequence"] = exc.report.worst_sequence
    except NotSolvableError as exc:
        rows, code = [], EXIT_UNSOLVABLE
        report["error"] = {"kind": "not_solvable", "message": str(exc),
                           "violations": exc.violations}
    report["exit_code"] = code
    _write_outputs(out, report, rows)
    return code


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="iterfe", description=__doc__.split("\n\n")[0])
    ap.add_argument("--spec", required=True, help="equation file (JSON)")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--command", choices=COMMANDS, help="defaults to options.command in the equation file")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--grid-m", type=int, dest="grid_m")
    ap.add_argument("--tol", type=float)
    ap.add_argument("--mc-samples", type=int, dest="mc_samples")
    ap.add_argument("--max-undecided", type=float, dest="max_undecided")
    ap.add_argument("--workers", type=int, default=1)
    return ap


def _apply_overrides(spec: EquationSpec, args) -> EquationSpec:
    params = spec.params
    if args.seed is not None:
        params = replace(params, seed=args.seed % 2**64)
    if args.tol is not None:
        params = replace(params, tol=args.tol)
    if args.mc_samples is not None:
        params = replace(params, mc_samples=args.mc_samples)
    grid = replace(spec.grid, M=args.grid_m) if args.grid_m is not None else spec.grid
    opts = spec.options
    if args.max_undecided is not None:
        opts = replace(opts, max_undecided=args.max_undecided)
    if args.mc_samples is not None:
        opts = replace(opts, n_samples=args.mc_samples)
    return replace(spec, params=params, grid=grid, options=opts)


def _spec_error(out, kind, problems) -> int:
    _write_outputs(Path(out), {"exit_code": EXIT_SPEC,
                               "error": {"kind": kind, "problems": problems}}, [])
    for p in problems:
        print(f"iterfe: {p}", file=sys.stderr)
    return EXIT_SPEC


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        spec = _apply_overrides(load_spec(args.spec), args)
        spec.params.solve_params(args.workers)
    except SpecParseError as exc:
        return _spec_error(args.out, "parse_error", [str(exc)])
    except SpecValidationError as exc:
        return _spec_error(args.out, "validation_error", exc.problems)
    except ValueError as exc:
        return _spec_error(args.out, "validation_error", [str(exc)])
    return run(args.command or spec.options.command, spec, args.out, args.workers)


if __name__ == "__main__":
    sys.exit(main())
