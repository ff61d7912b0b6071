"""Laplace transforms along a ray, Pade continuation and resummation drivers.

The Laplace transform in direction ``theta`` is

    L[phi](hbar) = int_0^{inf e^{i theta}} exp(-xi / hbar) phi(xi) dxi,

which converges for ``hbar`` in the Borel disc ``Re(e^{i theta} / hbar) > K``
when ``|phi| <= D exp(K |xi|)``.  On a truncated grid the integral is
computed by product quadrature: the exponential weight is integrated
exactly against the piecewise-quadratic interpolant of ``phi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

from .borel import POLE_RADIUS, RayFunction, RayGrid, growth_estimate, picard_solve, ray_distance
from .errors import (
    ConditioningError,
    ContinuationError,
    DimensionError,
    DomainError,
    ExactPertError,
)
from .formal import FormalSolution, ProblemSpec, StandardFormProblem, formal_ift, to_standard_form
from .oracle import equation_residual
from .series import BorelSeries, GrowthBound, TruncatedSeries, formal_borel, gevrey_fit

__all__ = [
    "ImplicitResummation",
    "PadeApproximant",
    "ResumParams",
    "ResummationResult",
    "SectorSpec",
    "choose_xi_max",
    "laplace",
    "laplace_weights",
    "pade_continue",
    "prepare_implicit",
    "resum_implicit_solution",
    "resum_series",
]

XI_MAX_CAP = 200.0


@dataclass(frozen=True)
class SectorSpec:
    """Borel disc ``Re(e^{i theta} / hbar) > 1 / R`` bisected by direction ``theta``."""

    theta: float = 0.0
    R: float = 1.0

    def __post_init__(self):
        if not self.R > 0:
            raise DomainError(f"Borel-disc diameter R must be positive, got {self.R}")

    @property
    def arc(self) -> tuple[float, float]:
        """Opening arc of directions."""
        return (self.theta - math.pi / 2, self.theta + math.pi / 2)

    def decay_rate(self, hbar: complex) -> float:
        """``Re(e^{i theta} / hbar)``, the exponential decay rate of the Laplace kernel."""
        if hbar == 0:
            return math.inf
        return float((np.exp(1j * self.theta) / complex(hbar)).real)

    def contains(self, hbar: complex) -> bool:
        return self.decay_rate(hbar) > 1.0 / self.R

    def require(self, hbar: complex) -> None:
        if not self.contains(hbar):
            raise DomainError(
                f"hbar = {complex(hbar)} outside the Borel disc: Re(e^(i theta)/hbar) = "
                f"{self.decay_rate(hbar):.6g} <= 1/R = {1.0 / self.R:.6g}"
            )


@dataclass(frozen=True, eq=False)
class ResummationResult:
    """Resummed value at one ``hbar`` with its truncation estimate.

    ``error`` holds the message of a per-``hbar`` failure, in which case
    ``value`` is NaN.
    """

    hbar: complex
    value: np.ndarray
    tail_bound: float
    diagnostics: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def scalar(self) -> complex:
        return complex(np.ravel(self.value)[0])

    @property
    def ok(self) -> bool:
        return self.error is None


def _moments(mu: complex, lo: float, hi: float) -> np.ndarray:
    """``int_lo^hi t^p exp(-mu t) dt`` for ``p = 0, 1, 2``."""

    def from_zero(T: float) -> np.ndarray:
        if T == 0:
            return np.zeros(3, dtype=complex)
        if abs(mu) * T <= 4.0:
            out = np.zeros(3, dtype=complex)
            term = 1.0 + 0j
            for k in range(80):
                for p in range(3):
                    out[p] += term * T ** (p + k + 1) / (p + k + 1)
                term *= -mu / (k + 1)
                if abs(term) * T ** (k + 4) < 1e-18:
                    break
            return out
        e = np.exp(-mu * T)
        m0 = (1 - e) / mu
        m1 = (m0 - T * e) / mu
        m2 = (2 * m1 - T * T * e) / mu
        return np.array([m0, m1, m2])

    return from_zero(hi) - from_zero(lo)


def _quadratic_weights(m: np.ndarray) -> np.ndarray:
    """Weights of the interpolation nodes t = 0, 1, 2 given moments ``m``."""
    m0, m1, m2 = m
    return np.array([(m2 - 3 * m1 + 2 * m0) / 2, 2 * m1 - m2, (m2 - m1) / 2])


def laplace_weights(grid: RayGrid, hbar: complex) -> np.ndarray:
    """Weights ``w_j`` with ``L[phi](hbar) ~ sum_j w_j phi(xi_j)`` on the truncated ray.

    Exponentially fitted composite Simpson rule: on each pair of cells the
    kernel ``exp(-xi/hbar)`` is integrated exactly against the quadratic
    interpolant of ``phi``.  A trailing odd cell uses the quadratic through
    the last three nodes.
    """
    lam = grid.direction / complex(hbar)
    h = grid.h
    mu = lam * h
    n_cells = grid.size - 1
    weights = np.zeros(grid.size, dtype=complex)
    pairs = n_cells // 2
    if pairs:
        w0, w1, w2 = _quadratic_weights(_moments(mu, 0.0, 2.0))
        starts = np.exp(-lam * grid.s[0 : 2 * pairs : 2]) * h
        weights[0 : 2 * pairs : 2] += starts * w0
        weights[1 : 2 * pairs : 2] += starts * w1
        weights[2 : 2 * pairs + 1 : 2] += starts * w2
    if n_cells % 2:
        w0, w1, w2 = _quadratic_weights(_moments(mu, 1.0, 2.0))
        base = np.exp(-lam * grid.s[n_cells - 2]) * h
        weights[n_cells - 2 : n_cells + 1] += base * np.array([w0, w1, w2])
    return weights * grid.direction


def laplace(sigma: RayFunction, hbar: complex, growth: GrowthBound | None = None) -> tuple[np.ndarray | complex, float]:
    """Laplace transform of sampled ``sigma`` and the estimated tail beyond the grid.

    The tail bound is ``D exp(-(r - K) xi_max) / (r - K)`` with
    ``r = Re(e^{i theta}/hbar)`` and ``(D, K)`` from ``growth`` (estimated from
    ``sigma`` when omitted).

    Raises
    ------
    DomainError
        ``r <= K``: ``hbar`` lies outside the disc where the integral converges.
    """
    grid = sigma.grid
    growth = growth_estimate(sigma) if growth is None else growth
    if hbar == 0:
        raise DomainError("Laplace transform at hbar = 0 is the formal limit, not a quadrature")
    rate = float((grid.direction / complex(hbar)).real)
    if not rate > growth.rate:
        raise DomainError(
            f"hbar = {complex(hbar)} outside the convergence disc: Re(e^(i theta)/hbar) = {rate:.6g} "
            f"<= growth rate K = {growth.rate:.6g}"
        )
    weights = laplace_weights(grid, hbar)
    value = weights @ sigma.values
    gap = rate - growth.rate
    tail = growth.prefactor * math.exp(-gap * grid.s_max) / gap
    value = complex(value) if np.ndim(value) == 0 else value
    return value, float(tail)


def choose_xi_max(growth: GrowthBound, hbars: Iterable[complex], theta: float = 0.0,
                  tail_tol: float = 1e-12, cap: float = XI_MAX_CAP) -> float:
    """Shortest ray with ``D exp(-(r - K) xi_max) / (r - K) < tail_tol / 10`` for every ``hbar``."""
    best = 0.0
    for hbar in hbars:
        rate = float((np.exp(1j * theta) / complex(hbar)).real)
        gap = rate - growth.rate
        if gap <= 0:
            continue
        need = math.log(max(growth.prefactor, 1e-300) * 10 / (gap * tail_tol)) / gap
        best = max(best, need)
    return float(min(max(best, 1.0), cap))


@dataclass(frozen=True, eq=False)
class PadeApproximant:
    """Rational approximant ``p(xi / scale) / q(xi / scale)`` (ascending coefficients)."""

    num: np.ndarray
    den: np.ndarray
    scale: float = 1.0

    def __call__(self, xi):
        t = np.asarray(xi, dtype=complex) / self.scale
        return npoly.polyval(t, self.num) / npoly.polyval(t, self.den)

    def poles(self) -> np.ndarray:
        if self.den.size <= 1:
            return np.zeros(0, dtype=complex)
        return npoly.polyroots(self.den) * self.scale


def _robust_pade(c: np.ndarray, m: int, n: int, tol: float = 1e-14) -> tuple[np.ndarray, np.ndarray]:
    """Type ``(m, n)`` Pade approximant by SVD with automatic degree reduction.

    Follows the robust algorithm of Gonnet, Guettel and Trefethen: the
    denominator is a null vector of the lower Toeplitz block; numerically
    rank-deficient blocks lower both degrees until the block has full rank,
    which removes spurious pole/zero pairs.
    """
    c = np.asarray(c[: m + n + 1], dtype=complex)
    ts = tol * np.linalg.norm(c)
    if np.max(np.abs(c[: m + 1])) <= tol * np.max(np.abs(c)):
        return np.zeros(1, dtype=complex), np.ones(1, dtype=complex)
    while True:
        if n == 0:
            return c[: m + 1].copy(), np.ones(1, dtype=complex)
        size = m + n + 1
        col = c[:size]
        Z = np.zeros((size, n + 1), dtype=complex)
        for j in range(n + 1):
            Z[j:, j] = col[: size - j]
        C = Z[m + 1 :, :]
        rho = int(np.sum(np.linalg.svd(C, compute_uv=False) > ts))
        if rho == n:
            break
        m, n = max(m - (n - rho), 0), rho
    _, _, vh = np.linalg.svd(C)
    b = vh[-1].conj()
    D = np.diag(np.abs(b) + math.sqrt(np.finfo(float).eps))
    q, _ = np.linalg.qr((C @ D).conj().T, mode="complete")
    b = D @ q[:, n]
    b = b / np.linalg.norm(b)
    a = Z[: m + 1, :] @ b
    lead = int(np.argmax(np.abs(b) > tol))
    b, a = b[lead:], a[lead:]
    last = np.nonzero(np.abs(b) > tol)[0]
    b = b[: last[-1] + 1]
    keep = np.nonzero(np.abs(a) > ts)[0]
    a = a[: keep[-1] + 1] if keep.size else np.zeros(1, dtype=complex)
    return a / b[0], b / b[0]


def _pade_scale(c: np.ndarray) -> float:
    """Variable scale that balances the coefficient magnitudes."""
    k = np.nonzero(np.abs(c) > 0)[0]
    if k.size < 2:
        return 1.0
    slope, _ = np.polyfit(k, np.log(np.abs(c[k])), 1)
    return float(np.exp(-slope))


def pade_approximant(coeffs: Sequence[complex]) -> PadeApproximant:
    """Near-diagonal ``[floor(n/2) / ceil(n/2)]`` approximant of ``sum c_k xi^k``.

    Raises
    ------
    ConditioningError
        The approximant violates its own matching conditions.
    """
    c = np.asarray(coeffs, dtype=complex)
    if c.size < 4:
        raise DimensionError(f"Pade continuation needs at least 4 coefficients, got {c.size}")
    n = c.size - 1
    scale = _pade_scale(c)
    scaled = c * scale ** np.arange(c.size)
    num, den = _robust_pade(scaled, n // 2, n - n // 2)
    # matching conditions: q * c - p vanishes through order deg p + deg q
    order = num.size + den.size - 2
    prod = np.convolve(den, scaled)[: order + 1]
    prod[: num.size] -= num
    mismatch = np.max(np.abs(prod)) / np.max(np.abs(scaled))
    if mismatch > 1e-8:
        raise ConditioningError(f"Pade solve ill-conditioned (matching residual {mismatch:.3g})")
    return PadeApproximant(num, den, scale)


def _segment_distance(point: complex, grid: RayGrid) -> float:
    z = complex(point) / grid.direction
    if z.real > grid.s_max:
        return abs(z - grid.s_max)
    return ray_distance(point, grid.theta)


def pade_continue(phi: BorelSeries, grid: RayGrid, pole_radius: float = POLE_RADIUS) -> RayFunction:
    """Analytic continuation of a Borel series along the ray by Pade approximation.

    Raises
    ------
    ContinuationError
        A pole of the approximant lies within ``pole_radius`` of the sampled
        segment of the ray.  Poles beyond ``xi_max`` do not enter the
        truncated Laplace integral.
    """
    coeffs = np.asarray(phi.coeffs)
    cols = coeffs[:, None] if coeffs.ndim == 1 else coeffs
    samples, info = [], []
    for j in range(cols.shape[1]):
        approx = pade_approximant(cols[:, j])
        for pole in approx.poles():
            if _segment_distance(pole, grid) < pole_radius:
                raise ContinuationError(
                    f"Pade pole at xi = {pole.real:.6g}{pole.imag:+.6g}j within {pole_radius} of the ray: "
                    f"series not summable in direction theta = {grid.theta:.6g} at this resolution"
                )
        samples.append(approx(grid.nodes))
        info.append({"num_degree": approx.num.size - 1, "den_degree": approx.den.size - 1})
    values = samples[0] if coeffs.ndim == 1 else np.stack(samples, axis=1)
    return RayFunction(grid, values, {"pade": info})


def resum_series(f: TruncatedSeries, sector: SectorSpec, hbar: complex, grid: RayGrid) -> ResummationResult:
    """Borel sum ``f_0 + L[continuation of the Borel transform]`` of a formal series."""
    sector.require(hbar)
    if abs(grid.theta - sector.theta) > 1e-15:
        raise DomainError("grid direction differs from the sector direction")
    phi = formal_borel(f)
    f0 = np.atleast_1d(np.asarray(f.coeffs[0], dtype=complex))
    diagnostics: dict = {"xi_max": grid.s_max, "h": grid.h, "theta": grid.theta}
    if len(phi) == 0 or not np.any(phi.coeffs):
        diagnostics["growth"] = GrowthBound(0.0, 0.0, 0.0, degenerate=True)
        return ResummationResult(complex(hbar), f0, 0.0, diagnostics)
    if f.order >= 4:
        diagnostics["gevrey"] = gevrey_fit(f)
    continued = pade_continue(phi, grid)
    growth = growth_estimate(continued)
    value, tail = laplace(continued, hbar, growth)
    diagnostics.update(growth=growth, pade=continued.info["pade"])
    return ResummationResult(complex(hbar), f0 + np.atleast_1d(value), tail, diagnostics)


@dataclass(frozen=True)
class ResumParams:
    """Numerical knobs of the implicit resummation pipeline.

    ``xi_max = None`` selects the ray length from a pilot solve so that the
    Laplace tail stays below ``tail_tol``.
    """

    order: int = 8
    xi_max: float | None = 40.0
    h: float = 1e-3
    tol: float = 1e-10
    n_max: int = 50
    tail_tol: float = 1e-12
    pilot_xi_max: float = 5.0


@dataclass(frozen=True, eq=False)
class ImplicitResummation:
    """Borel-plane solution of an implicit problem, ready for evaluation at any ``hbar``."""

    problem: ProblemSpec
    formal: FormalSolution
    standard_form: StandardFormProblem
    sigma: RayFunction
    growth: GrowthBound
    sector: SectorSpec
    params: ResumParams

    def evaluate(self, hbar: complex) -> ResummationResult:
        """``f(hbar) = f_0 + hbar f_1 + hbar L[sigma](hbar)`` with its residual in ``F``."""
        hbar = complex(hbar)
        self.sector.require(hbar)
        lap, tail = laplace(self.sigma, hbar, self.growth)
        value = self.formal.f0 + hbar * self.formal.f1 + hbar * np.atleast_1d(lap)
        residual = equation_residual(self.problem, hbar, value)
        diagnostics = {
            "growth": self.growth,
            "xi_max": self.sigma.grid.s_max,
            "h": self.sigma.grid.h,
            "theta": self.sigma.grid.theta,
            "picard_residual": self.sigma.info.get("residual"),
            "residual": residual,
        }
        return ResummationResult(hbar, value, abs(hbar) * tail, diagnostics)


def prepare_implicit(p: ProblemSpec, seed, sector: SectorSpec, params: ResumParams = ResumParams(),
                     hbars: Sequence[complex] = ()) -> ImplicitResummation:
    """Formal solution, standard form and Borel-plane solution of ``F = 0``."""
    sol = formal_ift(p, seed, max(params.order, 1))
    sf = to_standard_form(p, sol)
    xi_max = params.xi_max
    if xi_max is None:
        pilot = picard_solve(sf, RayGrid(sector.theta, params.pilot_xi_max, params.h), params.tol, params.n_max)
        targets = list(hbars) or [1.0 / (2.0 / sector.R)]
        xi_max = max(choose_xi_max(growth_estimate(pilot), targets, sector.theta, params.tail_tol),
                     10 * params.h)
        params = replace(params, xi_max=xi_max)
    sigma = picard_solve(sf, RayGrid(sector.theta, xi_max, params.h), params.tol, params.n_max)
    return ImplicitResummation(p, sol, sf, sigma, growth_estimate(sigma), sector, params)


def resum_implicit_solution(p: ProblemSpec, seed, sector: SectorSpec, hbars: Sequence[complex],
                            params: ResumParams = ResumParams()) -> list[ResummationResult]:
    """Borel-resummed solution ``f(hbar)`` of ``F(hbar, z) = 0`` at each ``hbar``.

    Failures at an individual ``hbar`` are reported in that result's
    ``error`` field; failures of the shared solve propagate.
    """
    solved = prepare_implicit(p, seed, sector, params, hbars)
    out = []
    for hbar in hbars:
        try:
            out.append(solved.evaluate(hbar))
        except ExactPertError as exc:
            nan = np.full(p.dim, np.nan + 0j)
            out.append(ResummationResult(complex(hbar), nan, math.inf,
                                         {"exit_code": exc.exit_code}, error=str(exc)))
    return out
