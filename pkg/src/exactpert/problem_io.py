"""JSON problem files: parsing with field-path errors and canonical serialization.

Complex numbers are ``[re, im]`` pairs.  Sparse coefficient tables are lists
of records ``{"k", "m", "i", "v"}``; Borel parts are records
``{"m", "i", "constant", "rational"}`` where ``rational`` holds ascending
``num`` and ``den`` coefficient lists (or a list of such objects for a sum).
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import numpy as np

from .borel import CoefficientFunction, RationalTerm
from .errors import DomainError, ExactPertError, ParseError
from .formal import ProblemSpec, StandardFormProblem
from .laplace import ResumParams, SectorSpec
from .matrix import MatrixFamily
from .series import MultiIndex, TruncatedSeries

__all__ = [
    "KINDS",
    "Numerics",
    "ProblemFile",
    "SweepSpec",
    "complex_pair",
    "dump_problem",
    "format_json",
    "parse_problem",
    "problem_from_dict",
    "problem_to_dict",
]

KINDS = ("implicit", "standard_form", "matrix", "series")


@dataclass(frozen=True)
class Numerics:
    """Numerical knobs; ``xi_max = None`` selects the ray length automatically."""

    order: int = 8
    xi_max: float | None = 40.0
    h: float = 1e-3
    tol: float = 1e-10
    n_max: int = 50
    gap_tol: float = 1e-6
    tail_tol: float = 1e-12

    def resum_params(self) -> ResumParams:
        return ResumParams(order=self.order, xi_max=self.xi_max, h=self.h, tol=self.tol,
                           n_max=self.n_max, tail_tol=self.tail_tol)

    def to_dict(self) -> dict:
        return {"order": self.order, "xi_max": self.xi_max, "h": self.h, "tol": self.tol,
                "n_max": self.n_max, "gap_tol": self.gap_tol, "tail_tol": self.tail_tol}


@dataclass(frozen=True, eq=False)
class XPoint:
    """One parameter point of a sweep with its own coefficient table."""

    x: float
    problem: Any
    seed: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class SweepSpec:
    """``hbar`` values and optional parameter points."""

    hbar_values: tuple = ()
    x_grid: tuple = ()


@dataclass(frozen=True, eq=False)
class ProblemFile:
    """Validated content of a problem file."""

    kind: str
    problem: Any
    seed: np.ndarray | None = None
    sector: SectorSpec = SectorSpec()
    numerics: Numerics = Numerics()
    sweep: SweepSpec = SweepSpec()
    name: str = ""
    P00: np.ndarray | None = None

    @property
    def dim(self) -> int:
        if self.kind == "matrix":
            return self.problem.n
        if self.kind == "series":
            return self.problem.dim
        return self.problem.dim

    def with_numerics(self, **changes) -> "ProblemFile":
        return replace(self, numerics=replace(self.numerics, **changes))


def complex_pair(z) -> list[float]:
    z = complex(z)
    return [float(z.real), float(z.imag)]


class _Reader:
    """Typed accessors that report the JSON field path on failure."""

    def __init__(self, data: Any, path: str = "$"):
        self.data, self.path = data, path

    def fail(self, msg: str, sub: str | None = None) -> ParseError:
        where = self.path if sub is None else f"{self.path}.{sub}"
        return ParseError(f"{where}: {msg}")

    def child(self, key: str | int) -> "_Reader":
        if isinstance(key, int):
            if not isinstance(self.data, list) or key >= len(self.data):
                raise self.fail(f"missing element [{key}]")
            return _Reader(self.data[key], f"{self.path}[{key}]")
        if not isinstance(self.data, dict) or key not in self.data:
            raise self.fail(f"missing field '{key}'")
        return _Reader(self.data[key], f"{self.path}.{key}")

    def has(self, key: str) -> bool:
        return isinstance(self.data, dict) and key in self.data and self.data[key] is not None

    def items(self) -> list["_Reader"]:
        if not isinstance(self.data, list):
            raise self.fail("expected a list")
        return [_Reader(v, f"{self.path}[{j}]") for j, v in enumerate(self.data)]

    def integer(self, lo: int | None = None) -> int:
        if isinstance(self.data, bool) or not isinstance(self.data, int):
            raise self.fail(f"expected an integer, got {self.data!r}")
        if lo is not None and self.data < lo:
            raise self.fail(f"must be >= {lo}, got {self.data}")
        return int(self.data)

    def real(self, positive: bool = False) -> float:
        if isinstance(self.data, bool) or not isinstance(self.data, (int, float)):
            raise self.fail(f"expected a number, got {self.data!r}")
        value = float(self.data)
        if not math.isfinite(value) or (positive and not value > 0):
            raise self.fail(f"expected a {'positive ' if positive else ''}finite number, got {self.data!r}")
        return value

    def cplx(self) -> complex:
        d = self.data
        if (not isinstance(d, list) or len(d) != 2
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in d)):
            raise self.fail(f"expected a complex number [re, im], got {d!r}")
        z = complex(float(d[0]), float(d[1]))
        if not (math.isfinite(z.real) and math.isfinite(z.imag)):
            raise self.fail("complex entries must be finite")
        return z

    def cplx_list(self) -> list[complex]:
        return [r.cplx() for r in self.items()]

    def string(self) -> str:
        if not isinstance(self.data, str):
            raise self.fail(f"expected a string, got {self.data!r}")
        return self.data


def _multiindex(r: _Reader, dim: int) -> MultiIndex:
    parts = [p.integer(lo=0) for p in r.items()]
    if len(parts) != dim:
        raise r.fail(f"multi-index has {len(parts)} entries, problem has dim {dim}")
    return MultiIndex(tuple(parts))


def _component(r: _Reader, dim: int) -> int:
    i = r.integer(lo=1)
    if i > dim:
        raise r.fail(f"component index {i} exceeds dim {dim}")
    return i


def _rational_terms(r: _Reader) -> list[RationalTerm]:
    specs = r.items() if isinstance(r.data, list) else [r]
    terms = []
    for spec in specs:
        num, den = spec.child("num").cplx_list(), spec.child("den").cplx_list()
        if not den or abs(den[0]) == 0:
            raise spec.fail("denominator vanishes at xi = 0", "den")
        integrations = spec.child("integrations").integer(lo=0) if spec.has("integrations") else 0
        try:
            terms.append(RationalTerm(num, den, integrations))
        except ExactPertError as exc:
            raise spec.fail(str(exc)) from exc
    return terms


def _table(r: _Reader, dim: int, cls, sector: SectorSpec):
    coeffs: dict = {}
    for rec in r.child("coeffs").items():
        k = rec.child("k").integer(lo=0)
        m = _multiindex(rec.child("m"), dim)
        i = _component(rec.child("i"), dim)
        key = (k, m, i)
        if key in coeffs:
            raise rec.fail(f"duplicate coefficient (k={k}, m={list(m.parts)}, i={i})")
        coeffs[key] = rec.child("v").cplx()
    borel: dict = {}
    if r.has("borel"):
        for rec in r.child("borel").items():
            m = _multiindex(rec.child("m"), dim)
            i = _component(rec.child("i"), dim)
            constant = rec.child("constant").cplx() if rec.has("constant") else coeffs.get((0, m, i), 0.0)
            terms = _rational_terms(rec.child("rational")) if rec.has("rational") else []
            cf = CoefficientFunction(constant, tuple(terms))
            try:
                cf.check_ray(sector.theta)
            except ExactPertError as exc:
                raise type(exc)(f"{rec.path}: {exc}") from exc
            if (m, i) in borel:
                raise rec.fail(f"duplicate Borel part (m={list(m.parts)}, i={i})")
            if (0, m, i) not in coeffs and constant != 0:
                coeffs[(0, m, i)] = constant
            borel[(m, i)] = cf
    try:
        return cls(dim, coeffs, borel)
    except ExactPertError as exc:
        raise type(exc)(f"{r.path}: {exc}") from exc


def _matrix(r: _Reader, n: int | None) -> np.ndarray:
    rows = r.items()
    mat = np.array([[c.cplx() for c in row.items()] for row in rows], dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or (n is not None and mat.shape[0] != n):
        raise r.fail(f"expected a square {n}x{n} matrix, got shape {mat.shape}")
    return mat


def _series(r: _Reader, dim: int) -> TruncatedSeries:
    rows = r.child("coefficients").items()
    if not rows:
        raise r.fail("series needs at least one coefficient", "coefficients")
    if dim == 1 and all(isinstance(row.data, list) and len(row.data) == 2
                        and not isinstance(row.data[0], list) for row in rows):
        return TruncatedSeries(np.array([row.cplx() for row in rows]))
    values = []
    for row in rows:
        entry = row.cplx_list()
        if len(entry) != dim:
            raise row.fail(f"expected {dim} components, got {len(entry)}")
        values.append(entry)
    return TruncatedSeries(np.array(values))


def _numerics(r: _Reader) -> Numerics:
    base = Numerics()
    if not isinstance(r.data, dict):
        raise r.fail("expected an object")
    known = set(base.to_dict())
    unknown = set(r.data) - known
    if unknown:
        raise r.fail(f"unknown numerics field(s) {sorted(unknown)}")
    changes = {}
    for key in ("order", "n_max"):
        if r.has(key):
            changes[key] = r.child(key).integer(lo=1 if key == "n_max" else 0)
    for key in ("h", "tol", "gap_tol", "tail_tol"):
        if r.has(key):
            changes[key] = r.child(key).real(positive=True)
    if "xi_max" in r.data:
        value = r.data["xi_max"]
        changes["xi_max"] = None if value in (None, "auto") else r.child("xi_max").real(positive=True)
    return replace(base, **changes)


def _hbar_values(r: _Reader) -> list[complex]:
    if isinstance(r.data, dict):
        start = r.child("start").real(positive=True)
        stop = r.child("stop").real(positive=True)
        num = r.child("num").integer(lo=1)
        return [complex(v) for v in np.logspace(np.log10(start), np.log10(stop), num)]
    out = []
    for item in r.items():
        out.append(complex(item.real()) if not isinstance(item.data, list) else item.cplx())
    return out


def problem_from_dict(data: Any, source: str = "$") -> ProblemFile:
    """Validate a decoded JSON document.

    Raises
    ------
    ParseError
        Schema violation; the message starts with the JSON field path.
    DomainError
        Sector violations and Borel parts with poles near the ray.
    """
    r = _Reader(data, source)
    if not isinstance(data, dict):
        raise r.fail("top level must be an object")
    kind = r.child("kind").string()
    if kind not in KINDS:
        raise r.fail(f"unknown kind '{kind}'; expected one of {list(KINDS)}", "kind")
    sector = SectorSpec()
    if r.has("sector"):
        sr = r.child("sector")
        theta = sr.child("theta").real() if sr.has("theta") else 0.0
        R = sr.child("R").real(positive=True) if sr.has("R") else 1.0
        sector = SectorSpec(theta, R)
    numerics = _numerics(r.child("numerics")) if r.has("numerics") else Numerics()
    name = r.child("name").string() if r.has("name") else ""
    P00 = None
    if kind == "matrix":
        n = r.child("size").integer(lo=1)
        if r.has("borel"):
            raise DomainError(f"{r.path}.borel: sector-analytic matrix entries are not supported")
        orders = [_matrix(o, n) for o in r.child("orders").items()]
        if not orders:
            raise r.fail("needs at least the leading matrix", "orders")
        problem = MatrixFamily(tuple(orders))
        if r.has("P00"):
            P00 = _matrix(r.child("P00"), n)
        dim = n
    else:
        dim = r.child("dim").integer(lo=1)
        if kind == "series":
            problem = _series(r, dim)
        else:
            cls = ProblemSpec if kind == "implicit" else StandardFormProblem
            problem = _table(r, dim, cls, sector)
    seed = None
    if r.has("seed"):
        seed = np.array(r.child("seed").cplx_list(), dtype=complex)
        if seed.size != dim:
            raise r.fail(f"seed has {seed.size} components, expected {dim}", "seed")
    elif kind == "implicit":
        raise r.fail("implicit problems need a seed for the leading-order solve", "seed")
    hbars: list[complex] = []
    x_grid: list[XPoint] = []
    if r.has("sweep"):
        sw = r.child("sweep")
        if sw.has("hbar_values"):
            hbars = _hbar_values(sw.child("hbar_values"))
        if sw.has("x_grid"):
            if kind not in ("implicit", "standard_form"):
                raise sw.fail("x_grid applies to implicit and standard_form problems", "x_grid")
            for pt in sw.child("x_grid").items():
                x = pt.child("x").real()
                table = _table(pt, dim, type(problem), sector)
                pseed = np.array(pt.child("seed").cplx_list(), dtype=complex) if pt.has("seed") else None
                x_grid.append(XPoint(x, table, pseed))
    for j, hbar in enumerate(hbars):
        if not sector.contains(hbar):
            raise DomainError(
                f"{r.path}.sweep.hbar_values[{j}]: hbar = {hbar} outside the Borel disc "
                f"Re(e^(i theta)/hbar) > 1/R = {1 / sector.R:g}"
            )
    return ProblemFile(kind, problem, seed, sector, numerics, SweepSpec(tuple(hbars), tuple(x_grid)), name, P00)


def parse_problem(path: str | Path) -> ProblemFile:
    """Read and validate a JSON problem file.

    Syntax errors report ``line:column``; schema errors report the field path.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"{path}: cannot read problem file ({exc.strerror})") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: malformed JSON ({exc.msg})") from exc
    try:
        return problem_from_dict(data)
    except ExactPertError as exc:
        raise type(exc)(f"{path}: {exc}") from exc


def _table_dict(table) -> dict:
    out: dict = {"coeffs": [{"k": k, "m": list(m), "i": i, "v": complex_pair(v)} for k, m, i, v in table.records()]}
    if table.borel:
        out["borel"] = [
            {"m": list(m.parts), "i": i, "constant": complex_pair(cf.constant),
             "rational": [dict({"num": [complex_pair(c) for c in t.num], "den": [complex_pair(c) for c in t.den]},
                               **({"integrations": t.integrations} if t.integrations else {}))
                          for t in cf.terms]}
            for (m, i), cf in sorted(table.borel.items(), key=lambda kv: (kv[0][0].parts, kv[0][1]))
        ]
    return out


def problem_to_dict(pf: ProblemFile) -> dict:
    """Canonical JSON-ready form; ``problem_from_dict`` inverts it."""
    out: dict = {"kind": pf.kind}
    if pf.name:
        out["name"] = pf.name
    if pf.kind == "matrix":
        out["size"] = pf.problem.n
        out["orders"] = [[[complex_pair(v) for v in row] for row in a] for a in pf.problem.orders]
        if pf.P00 is not None:
            out["P00"] = [[complex_pair(v) for v in row] for row in pf.P00]
    elif pf.kind == "series":
        out["dim"] = pf.problem.dim
        coeffs = np.asarray(pf.problem.coeffs)
        out["coefficients"] = ([complex_pair(c) for c in coeffs] if coeffs.ndim == 1
                               else [[complex_pair(c) for c in row] for row in coeffs])
    else:
        out["dim"] = pf.problem.dim
        out.update(_table_dict(pf.problem))
    if pf.seed is not None:
        out["seed"] = [complex_pair(z) for z in pf.seed]
    out["sector"] = {"theta": pf.sector.theta, "R": pf.sector.R}
    out["numerics"] = pf.numerics.to_dict()
    if pf.sweep.hbar_values or pf.sweep.x_grid:
        sweep: dict = {}
        if pf.sweep.hbar_values:
            sweep["hbar_values"] = [complex_pair(h) for h in pf.sweep.hbar_values]
        if pf.sweep.x_grid:
            sweep["x_grid"] = [dict({"x": pt.x}, **_table_dict(pt.problem),
                                    **({"seed": [complex_pair(z) for z in pt.seed]} if pt.seed is not None else {}))
                               for pt in pf.sweep.x_grid]
        out["sweep"] = sweep
    return out


_FLAT_ARRAY = re.compile(r"\[\s*([^\[\]{}\"]*?)\s*\]")


def format_json(document: Any) -> str:
    """Indented JSON with sorted keys and number-only arrays kept on one line."""
    text = json.dumps(document, indent=2, sort_keys=True)
    return _FLAT_ARRAY.sub(lambda m: "[" + ", ".join(v.strip() for v in m.group(1).split(",")) + "]", text) + "\n"


def dump_problem(pf: ProblemFile, path: str | Path | None = None) -> str:
    """Serialize canonically (sorted keys, fixed indentation); write when ``path`` is given."""
    text = format_json(problem_to_dict(pf))
    if path is not None:
        Path(path).write_text(text)
    return text
