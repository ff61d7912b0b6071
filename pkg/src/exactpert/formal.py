"""Formal perturbation theory for implicit equations ``F(hbar, z) = 0``.

An equation is a sparse table of coefficients ``F^i_{k,m}`` of
``hbar**k z**m`` (``i`` is the 1-based equation index, ``m`` a multi-index
over the ``N`` unknowns).  A table entry may additionally carry a Borel part,
in which case the full coefficient of ``z**m`` in equation ``i`` is
``sum_k F^i_{k,m} hbar**k + L[alpha](hbar)``.

The pipeline is: solve the leading equation ``F_0(f_0) = 0`` by Newton's
method, build the formal solution order by order with the inverse leading
Jacobian, substitute ``z = f_0 + hbar (f_1 + w)`` to reach the standard form
``w = hbar G(hbar, w)``, and solve that formally with the ``g`` recursion.
Majorant sequences bound the growth of the ``g`` coefficients.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .borel import CoefficientFunction, RationalTerm
from .errors import (
    DimensionError,
    DomainError,
    InconsistentInputError,
    NoSolutionError,
    SingularJacobianError,
)
from .series import (
    GrowthBound,
    MultiIndex,
    TruncatedSeries,
    binomial_count,
    log_linear_envelope,
    multiindex_enumerate,
    multinomial,
    ts_pow_multi,
)

__all__ = [
    "FormalSolution",
    "MajorantReport",
    "MajorantSequence",
    "ProblemSpec",
    "StandardFormProblem",
    "formal_ift",
    "formal_residual",
    "g_recursion",
    "majorant_check",
    "majorant_constants",
    "majorant_growth_fit",
    "majorant_sequence",
    "scalar_recursion",
    "scalar_standard_form",
    "solve_leading",
    "to_standard_form",
]

JACOBIAN_COND_MAX = 1e12

Key = tuple[int, MultiIndex, int]


def _mi(m) -> MultiIndex:
    return m if isinstance(m, MultiIndex) else MultiIndex(tuple(np.atleast_1d(m).tolist()))


@dataclass(frozen=True, eq=False)
class _CoefficientTable:
    """Sparse table ``(k, m, i) -> value`` plus optional Borel parts per ``(m, i)``."""

    dim: int
    coeffs: Mapping[Key, complex]
    borel: Mapping[tuple[MultiIndex, int], CoefficientFunction] = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 1:
            raise DimensionError(f"dimension must be >= 1, got {self.dim}")
        table: dict[Key, complex] = {}
        for key, value in self.coeffs.items():
            k, m, i = key
            m = _mi(m)
            if k < 0 or not 1 <= i <= self.dim or m.dim != self.dim:
                raise DimensionError(f"invalid coefficient key (k={k}, m={m.parts}, i={i}) for N={self.dim}")
            table[(int(k), m, int(i))] = table.get((int(k), m, int(i)), 0) + complex(value)
        borel: dict[tuple[MultiIndex, int], CoefficientFunction] = {}
        for (m, i), cf in self.borel.items():
            m = _mi(m)
            if not 1 <= i <= self.dim or m.dim != self.dim:
                raise DimensionError(f"invalid Borel key (m={m.parts}, i={i}) for N={self.dim}")
            base = table.get((0, m, int(i)), 0.0)
            if abs(cf.constant - base) > 1e-12 * max(1.0, abs(base)):
                raise InconsistentInputError(
                    f"Borel coefficient (m={m.parts}, i={i}) has constant {cf.constant} but the "
                    f"table's order-0 entry is {base}"
                )
            borel[(m, int(i))] = cf
        object.__setattr__(self, "coeffs", table)
        object.__setattr__(self, "borel", borel)

    @classmethod
    def from_records(cls, dim: int, records: Iterable[tuple[int, Sequence[int], int, complex]], borel=None):
        return cls(dim, {(k, _mi(m), i): v for k, m, i, v in records}, dict(borel or {}))

    @property
    def max_k(self) -> int:
        return max((k for k, _, _ in self.coeffs), default=0)

    @property
    def max_m(self) -> int:
        keys = [m.weight for _, m, _ in self.coeffs] + [m.weight for m, _ in self.borel]
        return max(keys, default=0)

    def layer(self, k: int) -> list[tuple[MultiIndex, int, complex]]:
        return sorted(((m, i, v) for (kk, m, i), v in self.coeffs.items() if kk == k),
                      key=lambda t: (t[0].parts, t[1]))

    def full_table(self, order: int) -> dict[Key, complex]:
        """Table including the ``hbar`` expansion of Borel parts through ``order``."""
        table = {key: v for key, v in self.coeffs.items() if key[0] <= order}
        for (m, i), cf in self.borel.items():
            series = cf.hbar_series(order)
            for k in range(1, order + 1):
                if series[k] != 0:
                    table[(k, m, i)] = table.get((k, m, i), 0) + series[k]
        return table

    def coefficient_functions(self) -> dict[tuple[MultiIndex, int], CoefficientFunction]:
        """Every coefficient as ``a + L[alpha]`` (polynomial parts included)."""
        by_key: dict[tuple[MultiIndex, int], dict[int, complex]] = defaultdict(dict)
        for (k, m, i), v in self.coeffs.items():
            by_key[(m, i)][k] = v
        for key in self.borel:
            by_key.setdefault(key, {})
        out = {}
        for key, powers in by_key.items():
            poly = np.zeros(max(powers, default=0) + 1, dtype=complex)
            for k, v in powers.items():
                poly[k] = v
            cf = CoefficientFunction.from_hbar_polynomial(poly)
            extra = self.borel.get(key)
            if extra is not None:
                cf = CoefficientFunction(cf.constant, cf.terms + extra.terms, extra.samples, extra.growth)
            out[key] = cf
        return out

    def records(self) -> list[tuple[int, tuple[int, ...], int, complex]]:
        return [(k, m.parts, i, v) for (k, m, i), v in
                sorted(self.coeffs.items(), key=lambda kv: (kv[0][0], kv[0][1].parts, kv[0][2]))]


class ProblemSpec(_CoefficientTable):
    """Implicit equation ``F^i(hbar, z) = sum F^i_{k,m} hbar**k z**m = 0``."""


class StandardFormProblem(_CoefficientTable):
    """Standard-form equation ``w = hbar G(hbar, w)`` with ``G^i = sum G^i_{k,m} hbar**k w**m``."""


@dataclass(frozen=True, eq=False)
class FormalSolution:
    """Formal solution ``f_0 + f_1 hbar + ... + f_K hbar**K``."""

    series: TruncatedSeries
    leading_jacobian: np.ndarray
    seed: np.ndarray
    condition: float = 1.0

    @property
    def f0(self) -> np.ndarray:
        return np.atleast_1d(self.series.coeffs[0])

    @property
    def f1(self) -> np.ndarray:
        return np.atleast_1d(self.series.coeffs[1]) if self.series.order >= 1 else np.zeros_like(self.f0)


def _monomial(z: np.ndarray, m: MultiIndex) -> complex:
    out = 1.0 + 0j
    for zj, p in zip(z, m.parts):
        if p:
            out *= zj**p
    return out


def _layer_eval(entries, z: np.ndarray, n_dim: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Value, Jacobian and absolute term scale of one polynomial layer at ``z``."""
    val = np.zeros(n_dim, dtype=complex)
    scale = np.zeros(n_dim)
    jac = np.zeros((n_dim, n_dim), dtype=complex)
    for m, i, v in entries:
        term = v * _monomial(z, m)
        val[i - 1] += term
        scale[i - 1] += abs(term)
        for j, p in enumerate(m.parts):
            if p:
                parts = list(m.parts)
                parts[j] -= 1
                jac[i - 1, j] += v * p * _monomial(z, MultiIndex(tuple(parts)))
    return val, jac, scale


def _seed_vector(seed, n_dim: int) -> np.ndarray:
    z = np.atleast_1d(np.asarray(seed, dtype=complex)).ravel()
    if z.size != n_dim:
        raise DimensionError(f"seed has {z.size} components, problem has N={n_dim}")
    return z


def solve_leading(p: ProblemSpec, seed, tol: float = 1e-12, max_iter: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Root ``f_0`` of the leading equation ``F_0(z) = 0`` and the Jacobian there.

    Damped Newton iteration from ``seed``.  Convergence means
    ``|F_0^i(f_0)| <= tol * (1 + sum of |terms|)`` for every component.

    Raises
    ------
    NoSolutionError
        Newton's method did not converge.
    SingularJacobianError
        The Jacobian at the root has condition number above ``1e12``.
    """
    entries = p.layer(0)
    z = _seed_vector(seed, p.dim)

    def merit(point):
        val, _, scale = _layer_eval(entries, point, p.dim)
        return float(np.max(np.abs(val) / (1.0 + scale))), val

    err, val = merit(z)
    for _ in range(max_iter):
        if err <= tol:
            break
        _, jac, _ = _layer_eval(entries, z, p.dim)
        step, *_ = np.linalg.lstsq(jac, -val, rcond=None)
        lam = 1.0
        while True:
            trial = z + lam * step
            trial_err, trial_val = merit(trial)
            if trial_err < err or lam < 1e-6:
                break
            lam *= 0.5
        z, err, val = trial, trial_err, trial_val
    else:
        err, val = merit(z)
    if not err <= tol:
        raise NoSolutionError(f"Newton iteration for the leading equation did not converge (residual {err:.3g})")
    _, jac, _ = _layer_eval(entries, z, p.dim)
    cond = float(np.linalg.cond(jac)) if np.all(np.isfinite(jac)) else np.inf
    if not cond <= JACOBIAN_COND_MAX:
        raise SingularJacobianError(
            f"Jacobian singular: IFT hypothesis fails (condition number {cond:.3g} > {JACOBIAN_COND_MAX:g})"
        )
    return z, jac


def _by_order(table: Mapping[Key, complex]) -> dict[int, list[tuple[MultiIndex, int, complex]]]:
    out: dict[int, list] = defaultdict(list)
    for (k, m, i), v in sorted(table.items(), key=lambda kv: (kv[0][0], kv[0][1].parts, kv[0][2])):
        out[k].append((m, i, v))
    return out


def _pack(coeffs: np.ndarray) -> TruncatedSeries:
    return TruncatedSeries(coeffs[:, 0] if coeffs.shape[1] == 1 else coeffs)


def formal_ift(p: ProblemSpec, seed, K: int, tol: float = 1e-12) -> FormalSolution:
    """Formal power-series solution of ``F(hbar, z) = 0`` through order ``K``.

    At order ``n`` the unknown ``f_n`` enters only through ``J_0 f_n``, so
    ``f_n = -J_0^{-1} c_n`` where ``c_n`` is the order-``n`` coefficient of
    ``F(hbar, f_0 + ... + f_{n-1} hbar**(n-1))``.
    """
    if K < 0:
        raise DimensionError("order K must be non-negative")
    f0, jac = solve_leading(p, seed, tol)
    table = _by_order(p.full_table(K))
    coeffs = np.zeros((K + 1, p.dim), dtype=complex)
    coeffs[0] = f0
    monomials = sorted({m for rows in table.values() for m, _, _ in rows}, key=lambda m: m.parts)
    for n in range(1, K + 1):
        current = TruncatedSeries(coeffs[: n + 1])
        powers = {m: ts_pow_multi(current, m).coeffs for m in monomials}
        rhs = np.zeros(p.dim, dtype=complex)
        for k in range(n + 1):
            for m, i, v in table.get(k, ()):
                rhs[i - 1] += v * powers[m][n - k]
        coeffs[n] = np.linalg.solve(jac, -rhs)
    cond = float(np.linalg.cond(jac))
    return FormalSolution(_pack(coeffs), jac, _seed_vector(seed, p.dim), cond)


def formal_residual(p: ProblemSpec, f: TruncatedSeries) -> np.ndarray:
    """Relative residual of ``F(hbar, f(hbar))`` at each order ``0 .. K``.

    Order ``n`` reports ``max_i |r^i_n| / max(s^i_n, tiny)`` where ``s^i_n`` is
    the same sum taken over absolute values of the terms.
    """
    vec = f.as_vector()
    order = vec.order
    table = _by_order(p.full_table(order))
    abs_vec = TruncatedSeries(np.abs(vec.coeffs))
    res = np.zeros((order + 1, p.dim), dtype=complex)
    scale = np.zeros((order + 1, p.dim))
    cache: dict[MultiIndex, tuple[np.ndarray, np.ndarray]] = {}
    for k, rows in table.items():
        for m, i, v in rows:
            if m not in cache:
                cache[m] = (ts_pow_multi(vec, m).coeffs, ts_pow_multi(abs_vec, m).coeffs.real)
            pw, apw = cache[m]
            res[k:, i - 1] += v * pw[: order + 1 - k]
            scale[k:, i - 1] += abs(v) * apw[: order + 1 - k]
    rel = np.abs(res) / np.maximum(scale, np.finfo(float).tiny)
    return rel.max(axis=1)


class _Laurent:
    """Coefficient of one ``w``-monomial: Laurent polynomial in ``hbar`` plus
    Borel terms ``hbar**q L[term]``."""

    def __init__(self):
        self.poly: dict[int, complex] = defaultdict(complex)
        self.size: dict[int, float] = defaultdict(float)
        self.borel: list[tuple[int, RationalTerm]] = []

    def add_poly(self, power: int, value: complex) -> None:
        self.poly[power] += value
        self.size[power] += abs(value)

    def add_scaled(self, other: "_Laurent", c: complex) -> None:
        for power, v in other.poly.items():
            self.poly[power] += c * v
            self.size[power] += abs(c) * other.size[power]
        self.borel.extend((q, t.scaled(c)) for q, t in other.borel)

    def normalize(self) -> list[RationalTerm]:
        """Rewrite all Borel terms with nonnegative ``hbar`` powers folded in.

        Uses ``L[I^p R] = hbar**p L[R]`` and ``L[R] / hbar = R(0) + L[R']``.
        """
        out = []
        for q, term in self.borel:
            q += term.integrations
            rat = RationalTerm(term.num, term.den)
            while q < 0:
                r0 = rat.value_at_zero()
                if r0 != 0:
                    self.add_poly(q + 1, r0)
                rat = rat.derivative()
                q += 1
            if np.any(rat.num):
                out.append(rat.integrated(q) if q else rat)
        return _merge_terms(out)


def _merge_terms(terms: list[RationalTerm]) -> list[RationalTerm]:
    merged: dict[tuple, RationalTerm] = {}
    for t in terms:
        key = (t.integrations, t.den.tobytes(), t.den.size)
        if key in merged:
            prev = merged[key]
            size = max(prev.num.size, t.num.size)
            num = np.zeros(size, dtype=complex)
            num[: prev.num.size] += prev.num
            num[: t.num.size] += t.num
            merged[key] = RationalTerm(num, t.den, t.integrations)
        else:
            merged[key] = t
    return [t for t in merged.values() if np.any(t.num)]


def _expand_shifted_power(f0: np.ndarray, f1: np.ndarray, m: MultiIndex) -> dict[tuple[int, MultiIndex], complex]:
    """``prod_j (f0_j + hbar f1_j + hbar w_j)**m_j`` as ``{(hbar power, w index): coeff}``."""
    n_dim = len(m)
    acc: dict[tuple[int, tuple[int, ...]], complex] = {(0, (0,) * n_dim): 1.0}
    for j, power in enumerate(m.parts):
        if not power:
            continue
        nxt: dict[tuple[int, tuple[int, ...]], complex] = defaultdict(complex)
        for a in range(power + 1):
            for b in range(power - a + 1):
                c = power - a - b
                coef = multinomial(a, b, c) * f0[j] ** a * f1[j] ** b
                if coef == 0:
                    continue
                for (e, l), v in acc.items():
                    lw = list(l)
                    lw[j] += c
                    nxt[(e + b + c, tuple(lw))] += v * coef
        acc = nxt
    return {(e, MultiIndex(l)): v for (e, l), v in acc.items()}


def to_standard_form(p: ProblemSpec, sol: FormalSolution, tol: float = 1e-9) -> StandardFormProblem:
    """Standard form ``w = hbar G(hbar, w)`` under ``z = f_0 + hbar (f_1 + w)``.

    ``G = hbar^{-1} w - hbar^{-2} J_0^{-1} F(hbar, f_0 + hbar f_1 + hbar w)``.
    The ``hbar^{-2}`` and ``hbar^{-1}`` parts must cancel because ``f_0`` and
    ``f_1`` solve orders 0 and 1; the cancellation is checked to relative
    tolerance ``tol``.  Borel parts of ``F`` are carried through exactly.
    """
    if sol.series.order < 1:
        raise DimensionError("standard form needs the formal solution through order 1")
    n_dim = p.dim
    f0, f1 = sol.f0, sol.f1
    jinv = np.linalg.inv(sol.leading_jacobian)
    parts: dict[tuple[int, MultiIndex], _Laurent] = defaultdict(_Laurent)
    poly_by_key: dict[tuple[MultiIndex, int], dict[int, complex]] = defaultdict(dict)
    for (k, m, i), v in p.coeffs.items():
        poly_by_key[(m, i)][k] = v
    for key in p.borel:
        poly_by_key.setdefault(key, {})
    for (m, i), powers in sorted(poly_by_key.items(), key=lambda kv: (kv[0][0].parts, kv[0][1])):
        cf = p.borel.get((m, i))
        if cf is not None and cf.samples is not None:
            raise DomainError("sampled Borel parts cannot be carried through the standard-form substitution")
        for (e, l), c in _expand_shifted_power(f0, f1, m).items():
            target = parts[(i, l)]
            for k, v in powers.items():
                target.add_poly(k + e - 2, v * c)
            if cf is not None:
                target.borel.extend((e - 2, t.scaled(c)) for t in cf.terms)

    table: dict[Key, complex] = {}
    borel: dict[tuple[MultiIndex, int], CoefficientFunction] = {}
    w_indices = sorted({l for _, l in parts}, key=lambda x: (x.weight, x.parts))
    for l in w_indices:
        for i in range(1, n_dim + 1):
            obj = _Laurent()
            for i2 in range(1, n_dim + 1):
                if jinv[i - 1, i2 - 1] != 0 and (i2, l) in parts:
                    obj.add_scaled(parts[(i2, l)], -jinv[i - 1, i2 - 1])
            if l == MultiIndex.unit(n_dim, i - 1):
                obj.add_poly(-1, 1.0)
            terms = obj.normalize()
            for power in sorted(obj.poly):
                value, size = obj.poly[power], obj.size[power]
                if power < 0:
                    if abs(value) > tol * max(1.0, size):
                        raise InconsistentInputError(
                            f"hbar^{power} term of G (w-index {l.parts}, component {i}) does not cancel "
                            f"({abs(value):.3g}); f_0/f_1 do not solve orders 0 and 1"
                        )
                    continue
                if abs(value) > 1e-14 * max(1.0, size):
                    table[(power, l, i)] = value
            if terms:
                borel[(l, i)] = CoefficientFunction(table.get((0, l, i), 0.0), tuple(terms))
    return StandardFormProblem(n_dim, table, borel)


def scalar_standard_form(p: ProblemSpec, sol: FormalSolution) -> StandardFormProblem:
    """Scalar standard form from the explicit coefficient formula.

    With ``A_m(hbar) = F_{0m} + hbar F_{1m} + hbar**2 B_m(hbar)`` the
    coefficient of ``w**k`` in ``G`` is

        C_k = -J_0^{-1} sum_{m >= k} [ sum_{i+j=m-k, i<=m-2} (m; i,j,k) F_{0m} f0^i f1^j hbar^{m-2-i}
                                     + sum_{i+j=m-k, i<=m-1} (m; i,j,k) F_{1m} f0^i f1^j hbar^{m-1-i}
                                     + sum_{i+j=m-k}         (m; i,j,k) B_m f0^i f1^j hbar^{m-i} ].

    Polynomial scalar problems only; used to cross-check :func:`to_standard_form`.
    """
    if p.dim != 1 or p.borel:
        raise DomainError("the explicit scalar formula applies to polynomial scalar problems")
    f0, f1 = complex(sol.f0[0]), complex(sol.f1[0])
    jinv = 1.0 / complex(sol.leading_jacobian[0, 0])
    coef: dict[tuple[int, int], complex] = defaultdict(complex)
    for (k, m, _), v in p.coeffs.items():
        coef[(k, m.parts[0])] += v
    max_m = max((m for _, m in coef), default=0)
    max_k = max((k for k, _ in coef), default=0)
    table: dict[Key, complex] = defaultdict(complex)
    for kw in range(max_m + 1):
        for m in range(kw, max_m + 1):
            for i in range(m - kw + 1):
                j = m - kw - i
                mult = multinomial(i, j, kw) * f0**i * f1**j
                if i <= m - 2:
                    table[(m - 2 - i, kw)] += -jinv * mult * coef.get((0, m), 0)
                if i <= m - 1:
                    table[(m - 1 - i, kw)] += -jinv * mult * coef.get((1, m), 0)
                for kb in range(2, max_k + 1):
                    table[(kb - 2 + m - i, kw)] += -jinv * mult * coef.get((kb, m), 0)
    records = {(k, MultiIndex((kw,)), 1): v for (k, kw), v in table.items() if v != 0}
    return StandardFormProblem(1, records)


def scalar_recursion(p: ProblemSpec, seed, K: int) -> TruncatedSeries:
    """Scalar formal solution from the literal composition sum.

    ``f_n = -J_0^{-1} sum_m sum_k sum F_{km} f_{i_1} ... f_{i_m}`` over
    compositions ``i_1 + ... + i_m = n - k`` with every ``i_j <= n - 1``.
    Exponential in ``m``; intended as an independent check.
    """
    if p.dim != 1:
        raise DimensionError("scalar recursion needs N = 1")
    f0, jac = solve_leading(p, seed)
    jinv = 1.0 / complex(jac[0, 0])
    table = p.full_table(K)
    f = np.zeros(K + 1, dtype=complex)
    f[0] = f0[0]
    for n in range(1, K + 1):
        acc = 0j
        for (k, m, _), v in table.items():
            if k > n:
                continue
            deg = m.parts[0]
            for combo in itertools.product(range(n), repeat=deg):
                if sum(combo) == n - k:
                    acc += v * np.prod([f[c] for c in combo]) if deg else v
        f[n] = -jinv * acc
    return TruncatedSeries(f)


def g_recursion(s: StandardFormProblem, K: int) -> TruncatedSeries:
    """Formal solution ``g`` of ``w = hbar G(hbar, w)`` through order ``K``.

    ``g_0 = 0`` and ``g_{n+1}^i = sum_{k<=n} sum_m G^i_{km} [g^m]_{n-k}``.
    """
    table = _by_order(s.full_table(K))
    g = np.zeros((K + 1, s.dim), dtype=complex)
    for n in range(K):
        current = TruncatedSeries(g[: n + 1])
        cache: dict[MultiIndex, np.ndarray] = {}
        for k in range(n + 1):
            for m, i, v in table.get(k, ()):
                if m.weight > n - k:
                    continue
                if m not in cache:
                    cache[m] = ts_pow_multi(current, m).coeffs
                g[n + 1, i - 1] += v * cache[m][n - k]
    return _pack(g)


@dataclass(frozen=True)
class MajorantSequence:
    """Majorant values ``M_0 .. M_K`` and the parameters ``(A, B, N)``."""

    values: tuple[float, ...]
    params: tuple[float, float, int]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if any(v < 0 for v in vals):
            raise DomainError("majorant values must be non-negative")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)


def majorant_sequence(A: float, B: float, N: int, K: int) -> MajorantSequence:
    """Majorant recursion ``M_0 = 0``, ``M_1 = A`` and

        M_{n+1} = A sum_{k=0}^n B^k sum_{m=0}^{n-k} sum_{|m|=m} rho_m B^m [M^m]_{n-k}

    with ``rho_m = 1 / binom(m + N - 1, N - 1)`` and ``[M^m]_r`` the order-``r``
    coefficient of the ``|m|``-th power of ``sum_n M_n t^n``.
    """
    if A < 0 or B < 0:
        raise DomainError("majorant parameters A, B must be non-negative")
    M = np.zeros(K + 1)
    for n in range(K):
        series = TruncatedSeries(M[: n + 1].astype(complex))
        powers = [np.zeros(n + 1) for _ in range(n + 1)]
        powers[0][0] = 1.0
        for r in range(1, n + 1):
            powers[r] = ts_pow_multi(series, (r,)).coeffs.real
        total = 0.0
        for k in range(n + 1):
            inner = 0.0
            for m in range(n - k + 1):
                rho = 1.0 / binomial_count(N, m)
                for _ in multiindex_enumerate(N, m):
                    inner += rho * B**m * powers[m][n - k]
            total += B**k * inner
        M[n + 1] = A * total
    return MajorantSequence(tuple(M), (float(A), float(B), int(N)))


def majorant_constants(s: StandardFormProblem, K: int, B: float | None = None) -> tuple[float, float]:
    """Constants ``(A, B)`` with ``|G_{km}| <= rho_m A B^{k+|m|} k!`` on the table.

    When ``B`` is not given it is the largest root ratio
    ``(|G_{km}| / (rho_m k!))^{1/(k+|m|)}`` over entries with ``k + |m| >= 1``
    (at least 1); ``A`` is then the smallest admissible value.
    """
    table = s.full_table(K)
    weights = {key: abs(v) * binomial_count(s.dim, key[1].weight) / math.factorial(key[0])
               for key, v in table.items()}
    if B is None:
        B = 1.0
        for (k, m, _), w in weights.items():
            if k + m.weight >= 1 and w > 0:
                B = max(B, w ** (1.0 / (k + m.weight)))
    A = max((w / B ** (k + m.weight) for (k, m, _), w in weights.items()), default=0.0)
    return float(A), float(B)


@dataclass(frozen=True)
class MajorantReport:
    """Outcome of comparing ``|g_{n+1}|`` with ``M_{n+1} n!``."""

    passed: bool
    checked: int
    first_violation: int | None
    worst_ratio: float


def majorant_check(g: TruncatedSeries, M: MajorantSequence | Sequence[float]) -> MajorantReport:
    """Check ``|g^i_{n+1}| <= M_{n+1} n!`` for ``n = 0 .. K-1``.

    ``first_violation`` is the coefficient index ``n + 1`` of the first
    failure.  ``worst_ratio`` is the largest ``|g_{n+1}| / (M_{n+1} n!)``.
    """
    values = M.values if isinstance(M, MajorantSequence) else tuple(M)
    mags = np.abs(g.as_vector().coeffs).max(axis=1)
    top = min(len(mags), len(values)) - 1
    first, worst = None, 0.0
    for n in range(top):
        bound = values[n + 1] * math.factorial(n)
        mag = mags[n + 1]
        if mag == 0:
            continue
        ratio = mag / bound if bound > 0 else np.inf
        worst = max(worst, ratio)
        if ratio > 1 + 1e-12 and first is None:
            first = n + 1
    return MajorantReport(first is None, top, first, float(worst))


def majorant_growth_fit(M: MajorantSequence | Sequence[float]) -> GrowthBound:
    """Geometric envelope ``M_n <= D * rate**n`` from a log-linear regression.

    ``rate`` is ``exp`` of the least-squares slope of ``log M_n`` over the
    positive entries; ``D`` is the smallest prefactor making the bound hold on
    every entry.  Fewer than two positive entries give a degenerate result
    with rate 0.
    """
    values = np.asarray(M.values if isinstance(M, MajorantSequence) else M, dtype=float)
    fit = log_linear_envelope(np.arange(values.size), values)
    if fit.degenerate:
        return GrowthBound(fit.prefactor, 0.0, 0.0, degenerate=True)
    return GrowthBound(fit.prefactor, float(np.exp(fit.rate)), fit.fit_residual)
