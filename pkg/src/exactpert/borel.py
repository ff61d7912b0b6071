"""Borel-plane machinery on a discretized ray.

The ray ``xi = exp(i theta) s``, ``0 <= s <= xi_max``, is sampled on a uniform
grid.  Every integral along the ray is computed in the real variable ``s``
with the complex step ``h exp(i theta)``, so a direction ``theta != 0`` is a
rotation of the inputs and nothing else.

The central routine is :func:`picard_solve`, which solves the convolution
integral equation

    sigma^i(xi) = a^i_0 + int_0^xi [ alpha^i_0 + sum_{|m| >= 1}
                  ( a^i_m sigma^{*m} + alpha^i_m * sigma^{*m} ) ] dt

whose Laplace transform is the standard-form equation ``w = hbar G(hbar, w)``
with coefficients ``A_m = a_m + L[alpha_m]``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import (
    ContinuationError,
    DimensionError,
    DivergenceError,
    DomainError,
    ResolutionError,
)
from .series import BorelSeries, GrowthBound, MultiIndex, log_linear_envelope

if TYPE_CHECKING:  # pragma: no cover
    from .formal import StandardFormProblem

__all__ = [
    "CoefficientFunction",
    "RationalTerm",
    "RayFunction",
    "RayGrid",
    "convolve",
    "cumulative_integral",
    "growth_estimate",
    "picard_solve",
    "ray_distance",
    "successive_terms",
    "taylor_match",
]

POLE_RADIUS = 0.1
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class RayGrid:
    """Uniform grid ``xi_j = j h exp(i theta)`` for ``j = 0 .. ceil(xi_max / h)``."""

    theta: float
    xi_max: float
    h: float

    def __post_init__(self):
        if not self.h > 0:
            raise DomainError(f"grid step must be positive, got h={self.h}")
        if not self.xi_max >= 10 * self.h:
            raise DomainError(f"ray length xi_max={self.xi_max} must be at least 10 h = {10 * self.h}")

    @cached_property
    def size(self) -> int:
        ratio = self.xi_max / self.h
        steps = round(ratio) if abs(ratio - round(ratio)) < 1e-9 * max(1.0, ratio) else math.ceil(ratio)
        return int(steps) + 1

    @property
    def s(self) -> np.ndarray:
        """Node distances ``|xi_j|``."""
        return np.arange(self.size) * self.h

    @property
    def direction(self) -> complex:
        return complex(np.exp(1j * self.theta))

    @property
    def step(self) -> complex:
        """Complex quadrature step ``h exp(i theta)``."""
        return self.h * self.direction

    @property
    def nodes(self) -> np.ndarray:
        return self.s * self.direction

    @property
    def s_max(self) -> float:
        return (self.size - 1) * self.h


@dataclass(frozen=True, eq=False)
class RayFunction:
    """Samples of a function at the nodes of a :class:`RayGrid`.

    ``values`` has shape ``(n,)`` for scalar functions and ``(n, N)`` for
    vector-valued ones.  ``info`` carries solver diagnostics and takes no part
    in the numerical content.
    """

    grid: RayGrid
    values: np.ndarray
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = np.array(self.values, dtype=complex, copy=True)
        if vals.ndim == 0:
            vals = np.full(self.grid.size, complex(vals))
        if vals.shape[0] != self.grid.size:
            raise DimensionError(f"{vals.shape[0]} samples for a grid of {self.grid.size} nodes")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_callable(cls, grid: RayGrid, func) -> "RayFunction":
        return cls(grid, func(grid.nodes))

    @property
    def dim(self) -> int:
        return 1 if self.values.ndim == 1 else int(self.values.shape[1])

    def magnitude(self) -> np.ndarray:
        v = np.abs(self.values)
        return v if v.ndim == 1 else v.max(axis=1)


def ray_distance(point: complex, theta: float) -> float:
    """Distance from ``point`` to the ray ``exp(i theta) [0, inf)``."""
    z = complex(point) * complex(np.exp(-1j * theta))
    return abs(z.imag) if z.real >= 0 else abs(z)


def _as_poly(values) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(values, dtype=complex))
    if arr.size == 0:
        arr = np.zeros(1, dtype=complex)
    return np.trim_zeros(arr, "b") if np.any(arr) else np.zeros(1, dtype=complex)


@dataclass(frozen=True, eq=False)
class RationalTerm:
    """The ``p``-fold integral ``I^p[num/den]`` with ``I f(xi) = int_0^xi f``.

    Polynomials are stored in ascending powers of ``xi``.  Its Laplace
    transform is ``hbar**p L[num/den]``.
    """

    num: np.ndarray
    den: np.ndarray
    integrations: int = 0

    def __post_init__(self):
        num, den = _as_poly(self.num), _as_poly(self.den)
        if den[0] == 0:
            raise DomainError("rational Borel part: denominator vanishes at xi = 0")
        if self.integrations < 0:
            raise DomainError("integration count must be non-negative")
        num.setflags(write=False)
        den.setflags(write=False)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    @property
    def is_polynomial(self) -> bool:
        return self.den.size == 1

    def poles(self) -> np.ndarray:
        if self.is_polynomial:
            return np.zeros(0, dtype=complex)
        return npoly.polyroots(self.den)

    def scaled(self, c: complex) -> "RationalTerm":
        return RationalTerm(self.num * c, self.den, self.integrations)

    def integrated(self, q: int = 1) -> "RationalTerm":
        return RationalTerm(self.num, self.den, self.integrations + q)

    def value_at_zero(self) -> complex:
        return complex(self.num[0] / self.den[0]) if self.integrations == 0 else 0.0

    def derivative(self) -> "RationalTerm":
        if self.integrations:
            return RationalTerm(self.num, self.den, self.integrations - 1)
        if self.is_polynomial:
            return RationalTerm(npoly.polyder(self.num) / self.den[0], [1.0])
        num = npoly.polysub(npoly.polymul(npoly.polyder(self.num), self.den),
                            npoly.polymul(self.num, npoly.polyder(self.den)))
        return RationalTerm(num, npoly.polymul(self.den, self.den))

    def taylor(self, n: int) -> np.ndarray:
        """First ``n`` Taylor coefficients at ``xi = 0``."""
        p = self.integrations
        base = np.zeros(max(n - p, 0), dtype=complex)
        num = np.zeros(max(n - p, 0), dtype=complex)
        k = min(len(num), self.num.size)
        num[:k] = self.num[:k]
        for j in range(len(base)):
            acc = num[j]
            for i in range(1, min(j, self.den.size - 1) + 1):
                acc -= self.den[i] * base[j - i]
            base[j] = acc / self.den[0]
        out = np.zeros(n, dtype=complex)
        for j, b in enumerate(base):
            out[j + p] = b * math.factorial(j) / math.factorial(j + p)
        return out

    def __call__(self, xi):
        if self.integrations:
            raise DomainError("integrated terms are evaluated on a grid, not pointwise")
        xi = np.asarray(xi, dtype=complex)
        return npoly.polyval(xi, self.num) / npoly.polyval(xi, self.den)

    def sample(self, grid: RayGrid) -> np.ndarray:
        p = self.integrations
        if p == 0:
            return self(grid.nodes)
        if self.is_polynomial:
            coeffs = np.zeros(self.num.size + p, dtype=complex)
            for j, c in enumerate(self.num):
                coeffs[j + p] = c * math.factorial(j) / math.factorial(j + p)
            return npoly.polyval(grid.nodes, coeffs / self.den[0])
        # I^p R(xi_j) = e^{i p theta} / (p-1)! int_0^{s_j} (s_j - u)^{p-1} R(e^{i theta} u) du,
        # expanded binomially into cumulative moments of R.
        s = grid.s
        u = s[:-1, None] + 0.5 * grid.h * (1.0 + _GL_X[None, :])
        base = RationalTerm(self.num, self.den)
        vals = base(u * grid.direction) * (0.5 * grid.h * _GL_W[None, :])
        out = np.zeros(grid.size, dtype=complex)
        for r in range(p):
            moment = np.concatenate([[0.0], np.cumsum((vals * u**r).sum(axis=1))])
            out += math.comb(p - 1, r) * (-1) ** r * s ** (p - 1 - r) * moment
        return out * grid.direction**p / math.factorial(p - 1)


@dataclass(frozen=True, eq=False)
class CoefficientFunction:
    """Coefficient ``A(hbar) = a + L[alpha](hbar)`` given by its Borel data.

    ``alpha`` is a sum of :class:`RationalTerm` objects and, optionally, raw
    samples on a fixed grid.  ``growth`` is an optional ``(A, L)`` pair
    asserting ``|alpha(xi)| <= A exp(L |xi|)`` on the ray.
    """

    constant: complex = 0.0
    terms: tuple[RationalTerm, ...] = ()
    samples: RayFunction | None = None
    growth: tuple[float, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "constant", complex(self.constant))
        object.__setattr__(self, "terms", tuple(self.terms))

    @classmethod
    def rational(cls, num: Sequence, den: Sequence, constant: complex = 0.0) -> "CoefficientFunction":
        return cls(constant, (RationalTerm(num, den),))

    @classmethod
    def from_hbar_polynomial(cls, coeffs: Sequence[complex]) -> "CoefficientFunction":
        """``sum_k c_k hbar**k`` written as ``c_0 + L[sum_{k>=1} c_k xi^{k-1}/(k-1)!]``."""
        coeffs = np.asarray(coeffs, dtype=complex)
        const = coeffs[0] if coeffs.size else 0.0
        if coeffs.size <= 1 or not np.any(coeffs[1:]):
            return cls(const)
        poly = np.array([c / math.factorial(k) for k, c in enumerate(coeffs[1:])])
        return cls(const, (RationalTerm(poly, [1.0]),))

    @property
    def has_borel_part(self) -> bool:
        return bool(self.terms) or self.samples is not None

    def poles(self) -> np.ndarray:
        found = [t.poles() for t in self.terms]
        return np.concatenate(found) if found else np.zeros(0, dtype=complex)

    def check_ray(self, theta: float, radius: float = POLE_RADIUS) -> None:
        """Reject denominators with a root within ``radius`` of the ray."""
        for pole in self.poles():
            if ray_distance(pole, theta) < radius:
                raise ContinuationError(
                    f"Borel part has a pole at xi = {pole.real:.6g}{pole.imag:+.6g}j, within "
                    f"{radius} of the ray theta = {theta:.6g}: Borel-disc hypothesis fails"
                )

    def evaluate(self, grid: RayGrid) -> np.ndarray:
        """Samples of ``alpha`` at the grid nodes."""
        self.check_ray(grid.theta)
        out = np.zeros(grid.size, dtype=complex)
        for term in self.terms:
            out += term.sample(grid)
        if self.samples is not None:
            if self.samples.grid != grid:
                raise DimensionError("sampled Borel part lives on a different grid")
            out += self.samples.values
        if self.growth is not None:
            amp, rate = self.growth
            bound = amp * np.exp(rate * grid.s) * (1 + 1e-12)
            bad = np.nonzero(np.abs(out) > bound)[0]
            if bad.size:
                raise DomainError(f"Borel part exceeds its declared growth bound at xi = {grid.s[bad[0]]:.6g}")
        return out

    def borel_taylor(self, n: int) -> np.ndarray:
        """Taylor coefficients ``alpha_0 .. alpha_{n-1}`` of the Borel part."""
        if self.samples is not None:
            raise DomainError("sampled Borel parts have no formal expansion")
        out = np.zeros(n, dtype=complex)
        for term in self.terms:
            out += term.taylor(n)
        return out

    def hbar_series(self, order: int) -> np.ndarray:
        """Coefficients of ``a + L[alpha]`` in powers of ``hbar`` up to ``order``."""
        out = np.zeros(order + 1, dtype=complex)
        out[0] = self.constant
        if order:
            alpha = self.borel_taylor(order)
            out[1:] = [alpha[k] * math.factorial(k) for k in range(order)]
        return out

    def scaled(self, c: complex) -> "CoefficientFunction":
        samples = None if self.samples is None else RayFunction(self.samples.grid, self.samples.values * c)
        return CoefficientFunction(self.constant * c, tuple(t.scaled(c) for t in self.terms), samples)

    def __add__(self, other: "CoefficientFunction") -> "CoefficientFunction":
        if self.samples is not None and other.samples is not None:
            samples = RayFunction(self.samples.grid, self.samples.values + other.samples.values)
        else:
            samples = self.samples if self.samples is not None else other.samples
        return CoefficientFunction(self.constant + other.constant, self.terms + other.terms, samples)


def cumulative_integral(values: np.ndarray, grid: RayGrid) -> np.ndarray:
    """Trapezoidal ``int_0^{xi_j}`` along the ray, zero at the origin."""
    values = np.asarray(values, dtype=complex)
    out = np.zeros_like(values)
    out[1:] = np.cumsum(0.5 * (values[1:] + values[:-1]), axis=0)
    return out * grid.step


def _conv_full(u: np.ndarray, v: np.ndarray, step: complex) -> np.ndarray:
    """Trapezoidal discrete convolution of two scalar sample arrays."""
    n = u.shape[0]
    full = np.convolve(u, v)[:n]
    return step * (full - 0.5 * (u * v[0] + u[0] * v))


def convolve(f: RayFunction, g: RayFunction) -> RayFunction:
    """Borel-plane convolution ``(f * g)(xi) = int_0^xi f(xi - y) g(y) dy``.

    Trapezoidal rule on the grid; vector arguments are convolved
    componentwise.  The value at the origin is zero.
    """
    if f.grid != g.grid:
        raise DimensionError("convolution of functions on different grids")
    step = f.grid.step
    a, b = f.values, g.values
    if a.ndim == 1 and b.ndim == 1:
        return RayFunction(f.grid, _conv_full(a, b, step))
    a2 = a if a.ndim == 2 else a[:, None]
    b2 = b if b.ndim == 2 else b[:, None]
    cols = max(a2.shape[1], b2.shape[1])
    if a2.shape[1] not in (1, cols) or b2.shape[1] not in (1, cols):
        raise DimensionError("component count mismatch in convolution")
    out = np.stack([_conv_full(a2[:, min(i, a2.shape[1] - 1)], b2[:, min(i, b2.shape[1] - 1)], step)
                    for i in range(cols)], axis=1)
    return RayFunction(f.grid, out)


@dataclass
class _BorelData:
    """Constant parts and sampled Borel parts of a standard-form problem."""

    dim: int
    a0: np.ndarray
    alpha0: np.ndarray
    # per multi-index of weight >= 1: (a_m of shape (N,), alpha_m of shape (N, n) or None)
    terms: dict


def _collect(s: "StandardFormProblem", grid: RayGrid) -> _BorelData:
    n_dim = s.dim
    a0 = np.zeros(n_dim, dtype=complex)
    alpha0 = np.zeros((n_dim, grid.size), dtype=complex)
    terms: dict[MultiIndex, list] = {}
    for (m, i), cf in sorted(s.coefficient_functions().items(), key=lambda kv: (kv[0][0].parts, kv[0][1])):
        samples = cf.evaluate(grid) if cf.has_borel_part else None
        if m.weight == 0:
            a0[i - 1] += cf.constant
            if samples is not None:
                alpha0[i - 1] += samples
            continue
        a_m, alpha_m = terms.setdefault(m, [np.zeros(n_dim, dtype=complex), None])
        a_m[i - 1] += cf.constant
        if samples is not None and np.any(samples):
            if alpha_m is None:
                alpha_m = np.zeros((n_dim, grid.size), dtype=complex)
                terms[m][1] = alpha_m
            alpha_m[i - 1] += samples
    terms = {m: (a, al) for m, (a, al) in terms.items() if np.any(a) or al is not None}
    return _BorelData(n_dim, a0, alpha0, terms)


def _power_plan(data: _BorelData) -> list[tuple[MultiIndex, int, MultiIndex]]:
    """Convolution powers needed, as ``(m, first, rest)`` with ``Q_m = sigma_first * Q_rest``."""
    needed: set[MultiIndex] = set()
    for m in data.terms:
        cur = m
        while cur.weight >= 2 and cur not in needed:
            needed.add(cur)
            first = next(j for j, p in enumerate(cur.parts) if p)
            parts = list(cur.parts)
            parts[first] -= 1
            cur = MultiIndex(tuple(parts))
    plan = []
    for m in sorted(needed, key=lambda x: (x.weight, x.parts)):
        first = next(j for j, p in enumerate(m.parts) if p)
        parts = list(m.parts)
        parts[first] -= 1
        plan.append((m, first, MultiIndex(tuple(parts))))
    return plan


def _single(m: MultiIndex) -> int | None:
    return m.parts.index(1) if m.weight == 1 else None


def picard_solve(s: "StandardFormProblem", grid: RayGrid, tol: float = 1e-10, n_max: int = 50) -> RayFunction:
    """Solve the Borel-plane integral equation of a standard-form problem.

    The trapezoidal discretization of the Volterra equation is lower
    triangular, so the discrete fixed point is computed node by node: at
    node ``j`` the history sums are formed once and the fixed-point map is
    iterated on the single unknown ``sigma(xi_j)`` until the increment stops
    changing (at most ``n_max`` sweeps).  The result is the same discrete
    fixed point that global Picard iteration converges to.

    ``info`` of the returned function records ``residual`` (largest final
    increment relative to ``1 + |sigma|``) and ``iterations`` (largest
    per-node sweep count).

    Raises
    ------
    DivergenceError
        The node iteration did not settle within ``n_max`` sweeps.
    ResolutionError
        The solution overflowed or the iteration stagnated above ``tol``.
    """
    data = _collect(s, grid)
    n, n_dim, step = grid.size, data.dim, complex(grid.step)
    half = 0.5 * step
    plan = _power_plan(data)
    # rows 0..N-1 hold sigma, further rows the planned convolution powers
    index = {MultiIndex.unit(n_dim, i): i for i in range(n_dim)}
    for m, _, _ in plan:
        index[m] = len(index)
    store = np.zeros((len(index), n), dtype=complex)
    sig_rev = np.zeros((n_dim, n), dtype=complex)
    store[:n_dim, 0] = data.a0
    sig_rev[:, n - 1] = data.a0
    origin = store[:, 0].tolist()
    steps = [(index[m], first, index[rest]) for m, first, rest in plan]
    linear = [(index[m], a.tolist()) for m, (a, _) in data.terms.items() if np.any(a)]
    kernels = [(index[m], al, al[:, ::-1].copy()) for m, (_, al) in data.terms.items() if al is not None]
    a0 = data.a0.tolist()
    alpha0 = data.alpha0
    comps = range(n_dim)

    prev = list(alpha0[:, 0])
    for idx, a in linear:
        for i in comps:
            prev[i] += a[i] * origin[idx]
    running = [0j] * n_dim
    eps4 = 4 * np.finfo(float).eps
    worst_residual, worst_iters = 0.0, 0

    # overflow is detected explicitly through the finiteness check
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(1, n):
            lo, hi = n - j, n - 1
            hist = [complex(np.dot(sig_rev[first, lo:hi], store[rest, 1:j])) for _, first, rest in steps]
            conv = [(idx, al[:, j].tolist(), al[:, 0].tolist(),
                     [complex(np.dot(al_rev[i, lo:hi], store[idx, 1:j])) for i in comps])
                    for idx, al, al_rev in kernels]
            base = [a0[i] + running[i] + half * prev[i] for i in comps]
            if j < 2:
                guess = store[:n_dim, j - 1].tolist()
            else:
                guess = (2 * store[:n_dim, j - 1] - store[:n_dim, j - 2]).tolist()
            alpha_j = alpha0[:, j].tolist()
            cur = origin[:]
            prev_delta, converged = math.inf, False
            for it in range(1, n_max + 1):
                cur[:n_dim] = guess
                for (t, first, rest), hs in zip(steps, hist):
                    cur[t] = step * (hs + 0.5 * (guess[first] * origin[rest] + origin[first] * cur[rest]))
                value = alpha_j[:]
                for idx, a in linear:
                    q = cur[idx]
                    for i in comps:
                        value[i] += a[i] * q
                for idx, al_j, al_0, hs in conv:
                    q, q0 = cur[idx], origin[idx]
                    for i in comps:
                        value[i] += step * (hs[i] + 0.5 * (al_j[i] * q0 + al_0[i] * q))
                new = [base[i] + half * value[i] for i in comps]
                if not all(cmath.isfinite(v) for v in new):
                    raise ResolutionError(
                        f"Borel-plane solution overflows near |xi| = {grid.s[j]:.4g}; shorten the ray (xi_max)"
                    )
                scale = 1.0 + max(abs(v) for v in new)
                delta = max(abs(v - g) for v, g in zip(new, guess)) / scale
                guess = new
                if delta <= eps4:
                    converged = True
                    break
                if delta >= prev_delta:
                    if delta > tol:
                        raise ResolutionError(
                            f"node iteration stagnated at relative increment {delta:.3g} > tol near "
                            f"|xi| = {grid.s[j]:.4g}; refine the grid"
                        )
                    converged = True
                    break
                prev_delta = delta
            if not converged:
                raise DivergenceError(
                    f"fixed-point iteration at |xi| = {grid.s[j]:.4g} not converged after {n_max} sweeps "
                    f"(last increment {delta:.3g}); refine the grid"
                )
            cur[:n_dim] = guess
            for (t, first, rest), hs in zip(steps, hist):
                cur[t] = step * (hs + 0.5 * (guess[first] * origin[rest] + origin[first] * cur[rest]))
            store[:, j] = cur
            sig_rev[:, n - 1 - j] = guess
            running = [running[i] + half * (prev[i] + value[i]) for i in comps]
            prev = value
            worst_residual = max(worst_residual, delta)
            worst_iters = max(worst_iters, it)

    sig = store[:n_dim]
    values = sig[0] if n_dim == 1 else sig.T
    info = {"residual": float(worst_residual), "iterations": worst_iters, "tol": tol, "n_max": n_max}
    return RayFunction(grid, values, info)


def successive_terms(s: "StandardFormProblem", grid: RayGrid, n: int) -> list[RayFunction]:
    """Graded successive approximations ``sigma_0 .. sigma_n``.

    ``sigma_0 = a_0``; for ``k >= 1``

        sigma_k = int_0^xi [ [k == 1] alpha_0 + sum_{|m| >= 1}
                  ( a_m S^m_{k-|m|} + alpha_m * S^m_{k-|m|-1} ) ]

    where ``S^m_g`` is the sum of all convolution products of ``|m|``
    factors (``m_i`` copies of component ``i``) whose grades add up to
    ``g``.  Each ``sigma_k`` is ``O(xi^k)`` at the origin and the terms sum
    to the solution of :func:`picard_solve`.
    """
    data = _collect(s, grid)
    plan = _power_plan(data)
    step = grid.step
    sigmas: list[np.ndarray] = [np.repeat(data.a0[:, None], grid.size, axis=1)]
    graded: dict[tuple[MultiIndex, int], np.ndarray] = {}

    def power(m: MultiIndex, g: int) -> np.ndarray:
        if g < 0:
            return np.zeros(grid.size, dtype=complex)
        j = _single(m)
        if j is not None:
            return sigmas[g][j]
        key = (m, g)
        if key not in graded:
            _, first, rest = next(p for p in plan if p[0] == m)
            acc = np.zeros(grid.size, dtype=complex)
            for g1 in range(g + 1):
                acc += _conv_full(sigmas[g1][first], power(rest, g - g1), step)
            graded[key] = acc
        return graded[key]

    for k in range(1, n + 1):
        rhs = data.alpha0.copy() if k == 1 else np.zeros((data.dim, grid.size), dtype=complex)
        for m, (a, al) in data.terms.items():
            if k - m.weight >= 0:
                rhs += a[:, None] * power(m, k - m.weight)[None, :]
            if al is not None and k - m.weight - 1 >= 0:
                q = power(m, k - m.weight - 1)
                rhs += np.stack([_conv_full(al[i], q, step) for i in range(data.dim)])
        sigmas.append(cumulative_integral(rhs.T, grid).T)

    return [RayFunction(grid, sg[0] if data.dim == 1 else sg.T) for sg in sigmas]


def growth_estimate(f: RayFunction) -> GrowthBound:
    """Exponential bound ``|f(xi)| <= D exp(K |xi|)`` on the sampled ray.

    ``K`` is the least-squares slope of the log of the running maximum of
    ``|f|`` (clamped at zero); ``D`` is the smallest prefactor that makes the
    bound hold at every node.
    """
    envelope = np.maximum.accumulate(f.magnitude())
    return log_linear_envelope(f.grid.s, envelope, clamp_rate=True)


def taylor_match(sigma: RayFunction, phi: BorelSeries, j_max: int) -> float:
    """Largest deviation between the Taylor jet of ``sigma`` at 0 and ``phi``.

    The jet is read off a least-squares Chebyshev fit of ``sigma`` on the
    initial segment ``|xi| <= min(0.5, xi_max)``.  Deviations are scaled by
    ``max(1, |phi_j|)`` and maximised over ``j <= j_max`` and components.
    """
    if j_max > 6:
        raise ResolutionError(f"taylor_match supports j_max <= 6, got {j_max}")
    grid = sigma.grid
    width = min(0.5, grid.s_max)
    count = int(np.searchsorted(grid.s, width, side="right"))
    if count < 4 * (j_max + 1):
        raise ResolutionError(
            f"only {count} nodes within |xi| <= {width:g}; need {4 * (j_max + 1)} for order {j_max}"
        )
    degree = min(j_max + 10, count // 2)
    u = grid.s[:count] / width
    vals = sigma.values[:count]
    vals = vals[:, None] if vals.ndim == 1 else vals
    ref = np.asarray(phi.coeffs)
    ref = ref[:, None] if ref.ndim == 1 else ref
    if ref.shape[0] < j_max + 1:
        # coefficients beyond the supplied jet are zero
        ref = np.vstack([ref, np.zeros((j_max + 1 - ref.shape[0], max(ref.shape[1], 1)), dtype=complex)])
    top = j_max
    worst = 0.0
    for comp in range(vals.shape[1]):
        fits = [np.polynomial.Chebyshev.fit(u, part, degree, domain=[0, 1]) for part in (vals[:, comp].real, vals[:, comp].imag)]
        for j in range(top + 1):
            c_s = complex(fits[0].deriv(j)(0.0), fits[1].deriv(j)(0.0)) / math.factorial(j) / width**j
            c_xi = c_s / grid.direction**j
            target = ref[j, min(comp, ref.shape[1] - 1)]
            worst = max(worst, abs(c_xi - target) / max(1.0, abs(target)))
    return worst

