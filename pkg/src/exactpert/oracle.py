"""Independent reference computations.

Nothing here reuses the Borel-plane solver, the product quadrature or the
formal recursions.  Laplace integrals are computed by adaptive Romberg
integration of the closed-form integrand, solutions by Newton's method at
fixed ``hbar`` and eigenvalues by dense eigensolvers.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .borel import CoefficientFunction, RationalTerm
from .errors import DomainError, OracleFailure
from .formal import ProblemSpec
from .series import MultiIndex, TruncatedSeries

__all__ = [
    "VerificationReport",
    "coefficient_values",
    "eig_direct",
    "equation_residual",
    "newton_direct",
    "pow_multi_literal",
    "reference_laplace",
    "series_substitute_literal",
    "verify",
]

_ROMBERG_LEVELS = 6


@dataclass(frozen=True)
class VerificationReport:
    """Comparison of engine values against oracle values."""

    passed: bool
    max_deviation: float
    tolerance: float
    rows: list = field(default_factory=list)

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict}: max deviation {self.max_deviation:.3e} (tolerance {self.tolerance:.1e})"


def verify(engine: Sequence, oracle: Sequence, tolerance: float, relative: bool = False,
           labels: Sequence | None = None) -> VerificationReport:
    """Elementwise comparison; NaN entries on either side count as failures."""
    rows, worst = [], 0.0
    labels = list(labels) if labels is not None else list(range(len(engine)))
    for label, a, b in zip(labels, engine, oracle):
        a, b = np.atleast_1d(np.asarray(a, dtype=complex)), np.atleast_1d(np.asarray(b, dtype=complex))
        dev = float(np.max(np.abs(a - b)))
        if relative:
            dev /= max(float(np.max(np.abs(b))), np.finfo(float).tiny)
        dev = dev if np.isfinite(dev) else math.inf
        worst = max(worst, dev)
        rows.append((label, dev))
    return VerificationReport(worst <= tolerance, worst, tolerance, rows)


def _romberg(func, a: float, b: float) -> tuple[complex, float]:
    """Romberg estimate on ``[a, b]`` and the change between the last two diagonal entries."""
    n = 2**_ROMBERG_LEVELS
    x = np.linspace(a, b, n + 1)
    y = func(x)
    table = []
    for level in range(_ROMBERG_LEVELS + 1):
        stride = n >> level
        pts = y[::stride]
        width = (b - a) / (2**level)
        row = [width * (pts.sum() - 0.5 * (pts[0] + pts[-1]))]
        for j in range(1, level + 1):
            factor = 4.0**j
            row.append(row[j - 1] + (row[j - 1] - table[-1][j - 1]) / (factor - 1))
        table.append(row)
    return complex(table[-1][-1]), float(abs(table[-1][-1] - table[-2][-2]))


def _adaptive(func, a: float, b: float, tol: float, depth: int, budget: list) -> complex:
    value, err = _romberg(func, a, b)
    if err <= tol:
        return value
    if depth == 0 or budget[0] <= 0:
        raise OracleFailure(f"adaptive quadrature did not reach tolerance on [{a:.6g}, {b:.6g}]")
    budget[0] -= 1
    mid = 0.5 * (a + b)
    return (_adaptive(func, a, mid, tol / 2, depth - 1, budget)
            + _adaptive(func, mid, b, tol / 2, depth - 1, budget))


def _degree_excess(term: RationalTerm) -> int:
    return term.num.size - term.den.size


def reference_laplace(alpha: CoefficientFunction | RationalTerm, hbar: complex, target_tol: float = 1e-12,
                      theta: float = 0.0, max_depth: int = 40) -> complex:
    """``L[alpha](hbar)`` in direction ``theta`` by adaptive Romberg integration.

    Only the Borel part of a :class:`CoefficientFunction` is transformed.
    An integrated term ``I^p R`` contributes ``hbar**p L[R]``.  The ray is
    cut where the integrand has dropped below ``target_tol / 100`` and keeps
    decaying.

    Raises
    ------
    DomainError
        ``Re(e^{i theta} / hbar) <= 0`` or the Borel part is sampled data.
    OracleFailure
        The adaptive quadrature exhausted its subdivision budget.
    """
    terms = (alpha,) if isinstance(alpha, RationalTerm) else alpha.terms
    if isinstance(alpha, CoefficientFunction) and alpha.samples is not None:
        raise DomainError("the reference transform needs closed-form Borel parts")
    direction = complex(np.exp(1j * theta))
    hbar = complex(hbar)
    lam = direction / hbar
    rate = lam.real
    if not rate > 0:
        raise DomainError(f"Laplace integral diverges: Re(e^(i theta)/hbar) = {rate:.6g} <= 0")
    total = 0.0 + 0j
    for term in terms:
        base = RationalTerm(term.num, term.den)

        def integrand(s, base=base):
            return direction * base(direction * s) * np.exp(-lam * s)

        excess = max(_degree_excess(base), 0)
        cutoff = (2.0 * excess + 1.0) / rate
        while abs(integrand(np.array([cutoff]))[0]) > target_tol / 100 or cutoff * rate < 2 * excess + 1:
            cutoff *= 1.5
            if cutoff * rate > 5e3:
                raise OracleFailure("integrand does not decay along the ray")
        panels = np.linspace(0.0, cutoff, int(math.ceil(cutoff * rate)) + 1)
        budget = [20000]
        tol = target_tol / 10
        value = 0.0 + 0j
        for a, b in zip(panels[:-1], panels[1:]):
            value += _adaptive(integrand, a, b, tol * (b - a) / cutoff, max_depth, budget)
        total += hbar**term.integrations * value
    return complex(total)


def coefficient_values(p: ProblemSpec, hbar: complex, theta: float = 0.0,
                       target_tol: float = 1e-13) -> dict[tuple[MultiIndex, int], complex]:
    """Every coefficient ``F^i_m(hbar)`` evaluated directly."""
    hbar = complex(hbar)
    values: dict[tuple[MultiIndex, int], complex] = {}
    for (k, m, i), v in p.coeffs.items():
        values[(m, i)] = values.get((m, i), 0.0) + v * hbar**k
    for (m, i), cf in p.borel.items():
        if cf.terms:
            values[(m, i)] = values.get((m, i), 0.0) + reference_laplace(cf, hbar, target_tol, theta)
    return values


def _evaluate(values, z: np.ndarray, n_dim: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    val = np.zeros(n_dim, dtype=complex)
    scale = np.zeros(n_dim)
    jac = np.zeros((n_dim, n_dim), dtype=complex)
    for (m, i), c in values.items():
        mono = np.prod([zj**pj for zj, pj in zip(z, m.parts)])
        val[i - 1] += c * mono
        scale[i - 1] += abs(c * mono)
        for j, pj in enumerate(m.parts):
            if pj:
                lowered = np.prod([zq ** (pq - (q == j)) for q, (zq, pq) in enumerate(zip(z, m.parts))])
                jac[i - 1, j] += c * pj * lowered
    return val, jac, scale


def equation_residual(p: ProblemSpec, hbar: complex, z, theta: float = 0.0) -> float:
    """``max_i |F^i(hbar, z)|`` with the Borel parts transformed by :func:`reference_laplace`."""
    z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    if not np.all(np.isfinite(z)):
        return math.inf
    val, _, _ = _evaluate(coefficient_values(p, hbar, theta), z, p.dim)
    return float(np.max(np.abs(val)))


def newton_direct(p: ProblemSpec, hbar: complex, seed, tol: float = 1e-12, max_iter: int = 100,
                  theta: float = 0.0) -> np.ndarray:
    """Root of ``F(hbar, .)`` near ``seed`` by damped Newton at fixed ``hbar``.

    Raises
    ------
    OracleFailure
        No convergence within ``max_iter`` steps.
    """
    values = coefficient_values(p, hbar, theta)
    z = np.atleast_1d(np.asarray(seed, dtype=complex)).ravel().copy()
    if z.size != p.dim:
        raise DomainError(f"seed has {z.size} components, problem has N={p.dim}")
    for _ in range(max_iter):
        val, jac, scale = _evaluate(values, z, p.dim)
        if np.max(np.abs(val)) <= tol * (1.0 + np.max(scale)):
            return z
        step = np.linalg.lstsq(jac, -val, rcond=None)[0]
        norm0, t = np.max(np.abs(val)), 1.0
        while t > 1e-6:
            trial = z + t * step
            if np.max(np.abs(_evaluate(values, trial, p.dim)[0])) < norm0:
                break
            t /= 2
        z = z + t * step
    val, _, scale = _evaluate(values, z, p.dim)
    if np.max(np.abs(val)) <= tol * (1.0 + np.max(scale)) * 10:
        return z
    raise OracleFailure(f"direct Newton at hbar = {hbar} did not converge (residual {np.max(np.abs(val)):.3g})")


def eig_direct(A, hbar: complex) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and eigenvectors of ``A(hbar)``, ordered to match the leading eigenvalues.

    ``A`` needs ``evaluate(hbar)`` and ``leading`` (the ``hbar = 0`` matrix).
    Pairing minimises the total distance to the sorted leading eigenvalues.
    """
    mat = np.asarray(A.evaluate(hbar), dtype=complex)
    vals, vecs = np.linalg.eig(mat)
    lead = np.linalg.eigvals(np.asarray(A.leading, dtype=complex))
    lead = lead[np.lexsort((lead.imag, lead.real))]
    cost = np.abs(lead[:, None] - vals[None, :])
    _, cols = linear_sum_assignment(cost)
    return vals[cols], vecs[:, cols]


def pow_multi_literal(v: TruncatedSeries, m: Sequence[int]) -> TruncatedSeries:
    """``prod_j v_j**m_j`` by enumerating every assignment of orders to factors."""
    coeffs = np.asarray(v.as_vector().coeffs)
    K = coeffs.shape[0] - 1
    factors = [j for j, mj in enumerate(m) for _ in range(mj)]
    out = np.zeros(K + 1, dtype=complex)
    if not factors:
        out[0] = 1.0
        return TruncatedSeries(out)
    for orders in itertools.product(range(K + 1), repeat=len(factors)):
        total = sum(orders)
        if total <= K:
            out[total] += math.prod(coeffs[o, j] for o, j in zip(orders, factors))
    return TruncatedSeries(out)


def series_substitute_literal(p: ProblemSpec, f: TruncatedSeries) -> np.ndarray:
    """Coefficients of ``F(hbar, f(hbar))`` through order ``K``, shape ``(K + 1, N)``.

    Borel parts enter through their ``hbar`` expansion.
    """
    vec = f.as_vector()
    K = vec.order
    out = np.zeros((K + 1, p.dim), dtype=complex)
    for (k, m, i), value in p.full_table(K).items():
        if k > K:
            continue
        power = pow_multi_literal(vec, m.parts).coeffs
        out[k:, i - 1] += value * power[: K + 1 - k]
    return out
