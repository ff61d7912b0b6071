"""Command-line interface.

Exit codes: 0 success, 1 a ``check`` that ran but exceeded its tolerance,
2 domain errors (bad input, violated hypotheses), 3 numerical
non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .borel import RayGrid, growth_estimate, picard_solve
from .errors import DomainError, ExactPertError
from .formal import (
    formal_ift,
    formal_residual,
    g_recursion,
    majorant_check,
    majorant_constants,
    majorant_growth_fit,
    majorant_sequence,
    to_standard_form,
)
from .laplace import (
    ResummationResult,
    ResumParams,
    SectorSpec,
    choose_xi_max,
    laplace,
    prepare_implicit,
    pade_continue,
    resum_series,
)
from .matrix import eigen_resum, recursive_block_diagonalize, similarity_residual, similarity_residual_direct
from .oracle import eig_direct, newton_direct, verify
from .problem_io import ProblemFile, format_json, parse_problem
from .series import GrowthBound, formal_borel

__all__ = ["main", "run_command"]

COMMANDS = ("formal", "standard-form", "borel", "resum", "check", "majorant", "matrix", "eigen", "sweep")
CHECK_FAILED = 1


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, GrowthBound):
        return {"prefactor": obj.prefactor, "rate": obj.rate, "fit_residual": obj.fit_residual,
                "degenerate": obj.degenerate}
    if isinstance(obj, (complex, np.complexfloating)):
        return [_jsonable(float(obj.real)), _jsonable(float(obj.imag))]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else repr(value)
    return obj


def _hbar(text: str) -> complex:
    try:
        return complex(text.replace(" ", ""))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc


def _xi_max(text: str) -> float | None:
    if text == "auto":
        return None
    try:
        value = float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a length or 'auto', got {text!r}") from exc
    if not value > 0:
        raise argparse.ArgumentTypeError("xi_max must be positive")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="exactpert", description="Borel-resummed perturbation theory.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "formal": "formal power-series solution of F(hbar, z) = 0",
        "standard-form": "standard-form coefficients G of an implicit problem",
        "borel": "Borel-plane solution sigma on the ray",
        "resum": "Borel-resummed values at the given hbar",
        "check": "resummed values against the direct oracle",
        "majorant": "majorant bounds for the standard-form recursion",
        "matrix": "block diagonalization of a matrix family",
        "eigen": "resummed eigenvalues of a matrix family",
        "sweep": "resummation over hbar values and parameter points",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("problem", type=Path, help="JSON problem file")
        p.add_argument("--order", "-K", type=int, help="truncation order K")
        p.add_argument("--theta", type=float, help="Borel ray direction (radians)")
        p.add_argument("--R", type=float, help="Borel-disc diameter")
        p.add_argument("--hbar", type=_hbar, action="append", help="evaluation point (repeatable)")
        p.add_argument("--xi-max", type=_xi_max, default=False, help="ray length, or 'auto'")
        p.add_argument("--grid-h", type=float, help="ray grid step")
        p.add_argument("--tol", type=float, help="fixed-point tolerance")
        p.add_argument("--n-max", type=int, help="fixed-point sweep limit")
        p.add_argument("--gap-tol", type=float, help="eigenvalue separation threshold")
        p.add_argument("--out", type=Path, help="write the JSON result here")
        p.add_argument("--csv", type=Path, help="write the CSV table here")
        p.add_argument("--quiet", action="store_true", help="do not print the JSON result")
        if name in ("check", "sweep"):
            p.add_argument("--check-tol", type=float, default=1e-6, help="oracle deviation tolerance")
    return parser


def _configure(pf: ProblemFile, args) -> ProblemFile:
    changes = {}
    for attr, key in (("order", "order"), ("grid_h", "h"), ("tol", "tol"), ("n_max", "n_max"), ("gap_tol", "gap_tol")):
        value = getattr(args, attr)
        if value is not None:
            changes[key] = value
    if args.xi_max is not False:
        changes["xi_max"] = args.xi_max
    for key in ("order", "n_max"):
        if key in changes and changes[key] < (0 if key == "order" else 1):
            raise DomainError(f"--{key.replace('_', '-')} out of range: {changes[key]}")
    for key in ("h", "tol", "gap_tol"):
        if key in changes and not changes[key] > 0:
            raise DomainError(f"{key} must be positive, got {changes[key]}")
    pf = pf.with_numerics(**changes)
    if args.theta is not None or args.R is not None:
        theta = pf.sector.theta if args.theta is None else args.theta
        R = pf.sector.R if args.R is None else args.R
        pf = replace(pf, sector=SectorSpec(theta, R))
    return pf


def _hbars(pf: ProblemFile, args, required: bool = True) -> list[complex]:
    values = list(args.hbar or pf.sweep.hbar_values)
    if required and not values:
        raise DomainError("no evaluation points: pass --hbar or list sweep.hbar_values in the file")
    return values


def _require(pf: ProblemFile, *kinds: str) -> None:
    if pf.kind not in kinds:
        raise DomainError(f"this command needs a problem of kind {' or '.join(kinds)}, got '{pf.kind}'")


def _series_rows(coeffs: np.ndarray) -> tuple[list[str], list[list]]:
    coeffs = np.asarray(coeffs)
    if coeffs.ndim == 1:
        return ["n", "re", "im"], [[n, c.real, c.imag] for n, c in enumerate(coeffs)]
    return ["n", "i", "re", "im"], [[n, i + 1, c.real, c.imag] for n, row in enumerate(coeffs) for i, c in enumerate(row)]


def _cmd_formal(pf: ProblemFile, args) -> tuple[dict, tuple]:
    _require(pf, "implicit", "series")
    if pf.kind == "series":
        coeffs = np.asarray(pf.problem.coeffs)
        return {"coefficients": coeffs}, _series_rows(coeffs)
    sol = formal_ift(pf.problem, pf.seed, pf.numerics.order)
    coeffs = np.asarray(sol.series.coeffs)
    residual = formal_residual(pf.problem, sol.series)
    result = {"coefficients": coeffs, "jacobian_condition": sol.condition,
              "max_residual": float(np.max(np.abs(residual)))}
    return result, _series_rows(coeffs)


def _standard_form(pf: ProblemFile):
    _require(pf, "implicit", "standard_form")
    if pf.kind == "standard_form":
        return pf.problem, None
    sol = formal_ift(pf.problem, pf.seed, max(pf.numerics.order, 1))
    return to_standard_form(pf.problem, sol), sol


def _cmd_standard_form(pf: ProblemFile, args) -> tuple[dict, tuple]:
    sf, sol = _standard_form(pf)
    records = sf.records()
    borel = [{"m": list(m.parts), "i": i,
              "terms": [{"num": t.num, "den": t.den, "integrations": t.integrations} for t in cf.terms]}
             for (m, i), cf in sorted(sf.borel.items(), key=lambda kv: (kv[0][0].parts, kv[0][1]))]
    result = {"records": [{"k": k, "m": list(m), "i": i, "v": v} for k, m, i, v in records], "borel": borel}
    if sol is not None:
        result["f0"], result["f1"] = sol.f0, sol.f1
    rows = [[k, " ".join(map(str, m)), i, v.real, v.imag] for k, m, i, v in records]
    return result, (["k", "m", "i", "re", "im"], rows)


def _grid(pf: ProblemFile, xi_max: float) -> RayGrid:
    return RayGrid(pf.sector.theta, xi_max, pf.numerics.h)


def _cmd_borel(pf: ProblemFile, args) -> tuple[dict, tuple]:
    if pf.kind == "series":
        sigma = pade_continue(formal_borel(pf.problem), _grid(pf, pf.numerics.xi_max or 40.0))
        method = "pade"
    else:
        sf, _ = _standard_form(pf)
        xi_max = pf.numerics.xi_max
        if xi_max is None:
            pilot = picard_solve(sf, _grid(pf, ResumParams().pilot_xi_max), pf.numerics.tol, pf.numerics.n_max)
            xi_max = choose_xi_max(growth_estimate(pilot), _hbars(pf, args, required=False) or [pf.sector.R / 2],
                                   pf.sector.theta, pf.numerics.tail_tol)
        sigma = picard_solve(sf, _grid(pf, xi_max), pf.numerics.tol, pf.numerics.n_max)
        method = "picard"
    growth = growth_estimate(sigma)
    values = sigma.values if sigma.values.ndim == 2 else sigma.values[:, None]
    stride = max(1, (sigma.grid.size - 1) // 100)
    info = sigma.info["pade"] if method == "pade" else sigma.info
    result = {"xi_max": sigma.grid.s_max, "h": sigma.grid.h, "nodes": sigma.grid.size, "growth": growth,
              method: info,
              "samples": [{"xi": complex(sigma.grid.nodes[j]), "sigma": values[j]}
                          for j in range(0, sigma.grid.size, stride)]}
    header = ["xi"] + [f"{part}_{i + 1}" for i in range(values.shape[1]) for part in ("re", "im")]
    if values.shape[1] == 1:
        header = ["xi", "re", "im"]
    rows = [[s] + [x for v in row for x in (v.real, v.imag)] for s, row in zip(sigma.grid.s, values)]
    return result, (header, rows)


def _result_row(r) -> dict:
    row = {"hbar": r.hbar, "value": r.value, "tail_bound": r.tail_bound}
    if r.error:
        row["error"] = r.error
        row["exit_code"] = r.diagnostics.get("exit_code")
    else:
        for key in ("residual", "xi_max", "h", "growth", "picard_residual"):
            if key in r.diagnostics:
                row[key] = r.diagnostics[key]
    return row


def _resum_values(pf: ProblemFile, hbars: Sequence[complex], problem=None, seed=None):
    """Resummed results for an implicit, standard-form or series problem."""
    problem = pf.problem if problem is None else problem
    params = pf.numerics.resum_params()
    if pf.kind == "series":
        xi_max = pf.numerics.xi_max or 40.0
        return [resum_series(problem, pf.sector, h, _grid(pf, xi_max)) for h in hbars]
    if pf.kind == "standard_form":
        xi_max = pf.numerics.xi_max or 40.0
        sigma = picard_solve(problem, _grid(pf, xi_max), params.tol, params.n_max)
        growth = growth_estimate(sigma)
        out = []
        for h in hbars:
            pf.sector.require(h)
            value, tail = laplace(sigma, h, growth)
            out.append(ResummationResult(complex(h), np.atleast_1d(value), tail,
                                         {"growth": growth, "xi_max": sigma.grid.s_max, "h": sigma.grid.h}))
        return out
    solved = prepare_implicit(problem, pf.seed if seed is None else seed, pf.sector, params, hbars)
    results = []
    for h in hbars:
        try:
            results.append(solved.evaluate(h))
        except ExactPertError as exc:
            results.append(ResummationResult(complex(h), np.full(problem.dim, np.nan + 0j), math.inf,
                                             {"exit_code": exc.exit_code}, error=str(exc)))
    return results


def _value_rows(results) -> tuple[list[str], list[list]]:
    header = ["hbar_re", "hbar_im", "i", "value_re", "value_im", "tail_bound"]
    rows = []
    for r in results:
        for i, v in enumerate(np.atleast_1d(r.value)):
            rows.append([r.hbar.real, r.hbar.imag, i + 1, v.real, v.imag, r.tail_bound])
    return header, rows


def _cmd_resum(pf: ProblemFile, args) -> tuple[dict, tuple]:
    if pf.kind == "matrix":
        return _cmd_eigen(pf, args)
    results = _resum_values(pf, _hbars(pf, args))
    return {"results": [_result_row(r) for r in results]}, _value_rows(results)


def _oracle_seed(pf: ProblemFile, problem, seed, hbar: complex) -> np.ndarray:
    sol = formal_ift(problem, seed, 2)
    return np.atleast_1d(sol.series(hbar))


def _check_rows(records) -> tuple[list[str], list[list]]:
    header = ["hbar_re", "hbar_im", "i", "value_re", "value_im", "oracle_re", "oracle_im", "deviation"]
    rows = []
    for rec in records:
        for i, (v, o) in enumerate(zip(np.atleast_1d(rec["value"]), np.atleast_1d(rec["oracle"]))):
            rows.append([rec["hbar"].real, rec["hbar"].imag, i + 1, v.real, v.imag, o.real, o.imag, abs(v - o)])
    return header, rows


def _implicit_check(pf: ProblemFile, hbars, problem=None, seed=None) -> list[dict]:
    problem = pf.problem if problem is None else problem
    seed = pf.seed if seed is None else seed
    records = []
    for r in _resum_values(pf, hbars, problem, seed):
        oracle = newton_direct(problem, r.hbar, _oracle_seed(pf, problem, seed, r.hbar), theta=pf.sector.theta)
        value = np.atleast_1d(r.value)
        dev = float(np.max(np.abs(value - oracle))) if r.ok else math.inf
        rec = {"hbar": r.hbar, "value": value, "oracle": oracle, "deviation": dev,
               "residual": r.diagnostics.get("residual")}
        if r.error:
            rec["error"] = r.error
        records.append(rec)
    return records


def _matrix_records(pf: ProblemFile, hbars) -> list[dict]:
    branches = eigen_resum(pf.problem, pf.sector, hbars, pf.numerics.resum_params(), pf.numerics.gap_tol)
    records = []
    for j, h in enumerate(hbars):
        oracle, _ = eig_direct(pf.problem, h)
        values = np.array([branch[j].scalar for branch in branches])
        errors = [branch[j].error for branch in branches if branch[j].error]
        dev = float(np.max(np.abs(values - oracle))) if not errors else math.inf
        rec = {"hbar": complex(h), "value": values, "oracle": oracle, "deviation": dev,
               "tail_bound": max(branch[j].tail_bound for branch in branches)}
        if errors:
            rec["error"] = errors[0]
        records.append(rec)
    return records


def _cmd_check(pf: ProblemFile, args) -> tuple[dict, tuple]:
    hbars = _hbars(pf, args)
    if pf.kind == "matrix":
        records = _matrix_records(pf, hbars)
    else:
        _require(pf, "implicit")
        records = _implicit_check(pf, hbars)
    report = verify([r["value"] for r in records], [r["oracle"] for r in records], args.check_tol,
                    labels=[r["hbar"] for r in records])
    result = {"records": records, "passed": report.passed, "max_deviation": report.max_deviation,
              "tolerance": report.tolerance, "summary": report.summary()}
    return result, _check_rows(records)


def _cmd_majorant(pf: ProblemFile, args) -> tuple[dict, tuple]:
    sf, _ = _standard_form(pf)
    K = pf.numerics.order
    A, B = majorant_constants(sf, K)
    M = majorant_sequence(A, B, sf.dim, K)
    g = g_recursion(sf, K)
    report = majorant_check(g, M)
    fit = majorant_growth_fit(M)
    gv = np.asarray(g.coeffs)
    gmag = np.abs(gv) if gv.ndim == 1 else np.abs(gv).max(axis=1)
    result = {"A": A, "B": B, "M": list(M.values), "g_magnitude": gmag, "passed": report.passed,
              "checked": report.checked, "first_violation": report.first_violation,
              "worst_ratio": report.worst_ratio, "growth": fit}
    rows = [[n, gmag[n], M.values[n], M.values[n] * math.factorial(max(n - 1, 0))] for n in range(len(M.values))]
    return result, (["n", "g", "M", "bound"], rows)


def _cmd_matrix(pf: ProblemFile, args) -> tuple[dict, tuple]:
    _require(pf, "matrix")
    dec = recursive_block_diagonalize(pf.problem, pf.numerics.order, pf.numerics.gap_tol, pf.P00)
    lam = np.asarray(dec.Lambda.coeffs)
    result = {"block_sizes": dec.block_sizes, "tree": dec.tree,
              "S": None if dec.S is None else dec.S.coeffs, "T": None if dec.T is None else dec.T.coeffs,
              "Lambda": lam, "P": dec.P.coeffs,
              "similarity_residual": [{"hbar": h, "truncation": similarity_residual(dec, pf.problem, h),
                                       "direct": similarity_residual_direct(dec, pf.problem, h)}
                                      for h in _hbars(pf, args, required=False)]}
    rows = [[n, r + 1, c + 1, lam[n, r, c].real, lam[n, r, c].imag]
            for n in range(lam.shape[0]) for r in range(lam.shape[1]) for c in range(lam.shape[2])
            if lam[n, r, c] != 0]
    return result, (["n", "row", "col", "re", "im"], rows)


def _cmd_eigen(pf: ProblemFile, args) -> tuple[dict, tuple]:
    _require(pf, "matrix")
    records = _matrix_records(pf, _hbars(pf, args))
    return {"records": records}, _check_rows(records)


def _threads() -> int:
    raw = os.environ.get("EXACTPERT_THREADS")
    if raw is None:
        return min(4, os.cpu_count() or 1)
    try:
        return max(1, int(raw))
    except ValueError as exc:
        raise DomainError(f"EXACTPERT_THREADS must be an integer, got {raw!r}") from exc


def _cmd_sweep(pf: ProblemFile, args) -> tuple[dict, tuple]:
    _require(pf, "implicit", "matrix")
    hbars = _hbars(pf, args)
    if pf.kind == "matrix":
        tasks = [(None, lambda: _matrix_records(pf, hbars))]
    elif pf.sweep.x_grid:
        tasks = [(pt.x, lambda pt=pt: _implicit_check(pf, hbars, pt.problem,
                                                      pt.seed if pt.seed is not None else pf.seed))
                 for pt in pf.sweep.x_grid]
    else:
        tasks = [(None, lambda: _implicit_check(pf, hbars))]
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        futures = [pool.submit(fn) for _, fn in tasks]
        outputs = [f.result() for f in futures]
    points = [{"x": x, "records": recs} for (x, _), recs in zip(tasks, outputs)]
    flat = [rec for recs in outputs for rec in recs]
    report = verify([r["value"] for r in flat], [r["oracle"] for r in flat], args.check_tol)
    header = ["x", "hbar_re", "hbar_im", "i", "value_re", "value_im", "oracle_re", "oracle_im", "deviation"]
    rows = []
    for (x, _), recs in zip(tasks, outputs):
        _, body = _check_rows(recs)
        rows += [["" if x is None else x] + row for row in body]
    result = {"points": points, "passed": report.passed, "max_deviation": report.max_deviation,
              "tolerance": report.tolerance}
    return result, (header, rows)


HANDLERS = {
    "formal": _cmd_formal,
    "standard-form": _cmd_standard_form,
    "borel": _cmd_borel,
    "resum": _cmd_resum,
    "check": _cmd_check,
    "majorant": _cmd_majorant,
    "matrix": _cmd_matrix,
    "eigen": _cmd_eigen,
    "sweep": _cmd_sweep,
}


def _write_csv(path: Path, table: tuple) -> None:
    header, rows = table
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _point_exit_codes(node: Any) -> list[int]:
    """Exit codes of per-hbar failures recorded anywhere in a result."""
    if isinstance(node, dict):
        found = [node["exit_code"]] if isinstance(node.get("exit_code"), int) else []
        return found + [c for v in node.values() for c in _point_exit_codes(v)]
    if isinstance(node, list):
        return [c for v in node for c in _point_exit_codes(v)]
    return []


def run_command(argv: Sequence[str] | None = None) -> tuple[int, dict | None]:
    """Run one CLI invocation; returns the exit code and the JSON document (if any)."""
    args = build_parser().parse_args(argv)
    try:
        pf = _configure(parse_problem(args.problem), args)
        result, table = HANDLERS[args.command](pf, args)
    except ExactPertError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code, None
    config = dict(pf.numerics.to_dict(), theta=pf.sector.theta, R=pf.sector.R,
                  hbar=list(args.hbar or pf.sweep.hbar_values))
    if args.command in ("check", "sweep"):
        config["check_tol"] = args.check_tol
    document = _jsonable({"command": args.command, "problem": pf.name or args.problem.name, "kind": pf.kind,
                          "config": config, "result": result})
    text = format_json(document)
    if args.out:
        args.out.write_text(text)
    if args.csv:
        _write_csv(args.csv, table)
    if not args.quiet:
        sys.stdout.write(text)
    code = max(_point_exit_codes(result), default=0)
    if not code and args.command in ("check", "sweep") and not result["passed"]:
        print(f"error: oracle deviation {result['max_deviation']:.3e} exceeds {args.check_tol:g}", file=sys.stderr)
        code = CHECK_FAILED
    return code, document


def main(argv: Sequence[str] | None = None) -> int:
    code, _ = run_command(argv)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
