"""Truncated power series in the small parameter and multi-index combinatorics.

A :class:`TruncatedSeries` holds the coefficients ``c_0 .. c_K`` of a finite
jet ``sum_n c_n hbar**n``.  Coefficients are complex scalars, length-``N``
vectors or square matrices; the leading axis of ``coeffs`` is always the
order axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError

__all__ = [
    "BorelSeries",
    "GrowthBound",
    "binomial_count",
    "iter_table",
    "multinomial",
    "MultiIndex",
    "TruncatedSeries",
    "formal_borel",
    "gevrey_fit",
    "log_linear_envelope",
    "multiindex_enumerate",
    "ts_add",
    "ts_mul",
    "ts_pow_multi",
    "ts_scale",
]


def _frozen(values, dtype=complex) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TruncatedSeries:
    """Finite jet ``c_0 + c_1 hbar + ... + c_K hbar**K``.

    Parameters
    ----------
    coeffs : array_like
        Shape ``(K+1,)`` for scalar series, ``(K+1, N)`` for vector series
        and ``(K+1, n, n)`` for matrix series.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.coeffs)
        if arr.ndim == 0 or arr.shape[0] == 0:
            raise DimensionError("a truncated series needs at least one coefficient")
        object.__setattr__(self, "coeffs", arr)

    @classmethod
    def zeros(cls, order: int, shape: tuple[int, ...] = ()) -> "TruncatedSeries":
        return cls(np.zeros((order + 1,) + tuple(shape), dtype=complex))

    @classmethod
    def constant(cls, value, order: int) -> "TruncatedSeries":
        value = np.asarray(value, dtype=complex)
        out = np.zeros((order + 1,) + value.shape, dtype=complex)
        out[0] = value
        return cls(out)

    @property
    def order(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def value_shape(self) -> tuple[int, ...]:
        return self.coeffs.shape[1:]

    @property
    def is_scalar(self) -> bool:
        return self.coeffs.ndim == 1

    @property
    def dim(self) -> int:
        """Component count ``N`` (1 for scalar series)."""
        return 1 if self.is_scalar else int(self.coeffs.shape[1])

    def component(self, i: int) -> "TruncatedSeries":
        """Scalar series of component ``i`` (0-based)."""
        if self.is_scalar:
            if i != 0:
                raise DimensionError("scalar series has a single component")
            return self
        return TruncatedSeries(self.coeffs[:, i])

    def as_vector(self) -> "TruncatedSeries":
        """View a scalar series as a vector series with ``N = 1``."""
        return TruncatedSeries(self.coeffs[:, None]) if self.is_scalar else self

    def truncate(self, order: int) -> "TruncatedSeries":
        if order > self.order:
            pad = np.zeros((order - self.order,) + self.value_shape, dtype=complex)
            return TruncatedSeries(np.concatenate([self.coeffs, pad]))
        return TruncatedSeries(self.coeffs[: order + 1])

    def __call__(self, hbar):
        """Evaluate the polynomial ``sum_n c_n hbar**n`` by Horner's rule."""
        acc = np.zeros(self.value_shape, dtype=complex)
        for c in self.coeffs[::-1]:
            acc = acc * hbar + c
        return acc if acc.shape else complex(acc)

    def __repr__(self) -> str:
        return f"TruncatedSeries(order={self.order}, shape={self.value_shape})"


@dataclass(frozen=True, order=True)
class MultiIndex:
    """Index vector ``m = (m_1, ..., m_N)`` with weight ``|m| = sum m_i``."""

    parts: tuple[int, ...]

    def __post_init__(self):
        parts = tuple(int(p) for p in self.parts)
        if not parts:
            raise DimensionError("a multi-index needs at least one part")
        if any(p < 0 for p in parts):
            raise DimensionError(f"multi-index parts must be non-negative, got {parts}")
        object.__setattr__(self, "parts", parts)

    @classmethod
    def of(cls, *parts: int) -> "MultiIndex":
        return cls(tuple(parts))

    @classmethod
    def unit(cls, n: int, j: int) -> "MultiIndex":
        parts = [0] * n
        parts[j] = 1
        return cls(tuple(parts))

    @property
    def weight(self) -> int:
        return sum(self.parts)

    @property
    def dim(self) -> int:
        return len(self.parts)

    def __iter__(self):
        return iter(self.parts)

    def __len__(self) -> int:
        return len(self.parts)


@dataclass(frozen=True, eq=False)
class BorelSeries:
    """Formal Borel transform ``phi_k = f_{k+1} / k!`` with ``f_0`` kept aside."""

    coeffs: np.ndarray
    constant_term: np.ndarray | complex = 0.0
    dim: int = 1

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _frozen(self.coeffs))
        const = np.asarray(self.constant_term, dtype=complex)
        object.__setattr__(self, "constant_term", complex(const) if const.ndim == 0 else _frozen(const))

    def __len__(self) -> int:
        return int(self.coeffs.shape[0])


@dataclass(frozen=True)
class GrowthBound:
    """Constants of an exponential bound ``|f| <= prefactor * exp(rate * t)``.

    Depending on context ``t`` is the order ``n`` (with an ``n!`` factor for
    Gevrey bounds) or the distance ``|xi|`` along a ray.  ``fit_residual`` is
    the root-mean-square residual of the log-linear regression that produced
    the rate.
    """

    prefactor: float
    rate: float
    fit_residual: float = 0.0
    degenerate: bool = False

    def __post_init__(self):
        if self.prefactor < 0:
            raise ValueError("prefactor must be non-negative")


def _check_same_order(a: TruncatedSeries, b: TruncatedSeries) -> None:
    if a.order != b.order:
        raise DimensionError(f"order mismatch: {a.order} vs {b.order}")


def _cauchy(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Truncated Cauchy product along the leading axis (elementwise otherwise)."""
    n = a.shape[0]
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape), dtype=complex)
    for j in range(n):
        if np.any(a[j]):
            out[j:] += a[j] * b[: n - j]
    return out


def _broadcastable(a: TruncatedSeries, b: TruncatedSeries) -> tuple[np.ndarray, np.ndarray]:
    x, y = a.coeffs, b.coeffs
    if x.shape[1:] == y.shape[1:]:
        return x, y
    if x.ndim == 1 and y.ndim == 2:
        return x[:, None], y
    if y.ndim == 1 and x.ndim == 2:
        return x, y[:, None]
    raise DimensionError(f"incompatible value shapes {x.shape[1:]} and {y.shape[1:]}")


def ts_mul(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    """Cauchy product truncated at the common order.

    Vector series are multiplied componentwise; a scalar series multiplies
    every component of a vector series.
    """
    _check_same_order(a, b)
    x, y = _broadcastable(a, b)
    return TruncatedSeries(_cauchy(x, y))


def ts_add(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    _check_same_order(a, b)
    x, y = _broadcastable(a, b)
    return TruncatedSeries(x + y)


def ts_scale(a: TruncatedSeries, c) -> TruncatedSeries:
    return TruncatedSeries(a.coeffs * c)


def ts_pow_multi(v: TruncatedSeries, m: MultiIndex | Sequence[int]) -> TruncatedSeries:
    """Multi-index power ``v_1**m_1 * ... * v_N**m_N`` of a vector series.

    Computed by repeated truncated multiplication; the result is a scalar
    series of the same order.
    """
    m = m if isinstance(m, MultiIndex) else MultiIndex(tuple(m))
    vec = v.as_vector()
    if vec.dim != m.dim:
        raise DimensionError(f"series has {vec.dim} components but multi-index has {m.dim} parts")
    out = np.zeros(vec.order + 1, dtype=complex)
    out[0] = 1.0
    for j, power in enumerate(m.parts):
        comp = vec.coeffs[:, j]
        for _ in range(power):
            out = _cauchy(out, comp)
    return TruncatedSeries(out)


@lru_cache(maxsize=None)
def _compositions(n: int, m: int) -> tuple[tuple[int, ...], ...]:
    if n == 1:
        return ((m,),)
    out = []
    for first in range(m + 1):
        for rest in _compositions(n - 1, m - first):
            out.append((first,) + rest)
    return tuple(out)


def multiindex_enumerate(n: int, m: int) -> list[MultiIndex]:
    """All weak compositions of ``m`` into ``n`` parts, lexicographically ordered.

    The count is ``binom(m + n - 1, n - 1)``.
    """
    if n < 1 or m < 0:
        raise DimensionError(f"need n >= 1 and m >= 0, got n={n}, m={m}")
    return [MultiIndex(p) for p in _compositions(n, m)]


def formal_borel(f: TruncatedSeries) -> BorelSeries:
    """Formal Borel transform ``phi_k = f_{k+1} / k!`` for ``k = 0 .. K-1``."""
    coeffs = f.coeffs
    k = np.arange(f.order)
    fact = np.array([math.factorial(int(i)) for i in k], dtype=float)
    shape = (-1,) + (1,) * (coeffs.ndim - 1)
    phi = coeffs[1:] / fact.reshape(shape) if f.order else coeffs[:0]
    const = coeffs[0]
    return BorelSeries(phi, const if const.shape else complex(const), f.dim)


def log_linear_envelope(t: np.ndarray, magnitude: np.ndarray, clamp_rate: bool = False) -> GrowthBound:
    """Fit ``log magnitude ~ log P + r t`` and return an envelope bound.

    The rate ``r`` is the least-squares slope over the strictly positive
    samples.  The prefactor is then raised to the smallest value for which
    ``magnitude <= P exp(r t)`` holds at every sample, so the returned bound
    is valid on the data rather than merely a best fit.
    """
    t = np.asarray(t, dtype=float)
    magnitude = np.asarray(magnitude, dtype=float)
    positive = magnitude > 0
    if not np.any(positive):
        return GrowthBound(0.0, 0.0, 0.0, degenerate=True)
    tp, yp = t[positive], np.log(magnitude[positive])
    if tp.size == 1 or np.ptp(tp) == 0:
        return GrowthBound(float(magnitude.max()), 0.0, 0.0, degenerate=True)
    slope, intercept = np.polyfit(tp, yp, 1)
    residual = float(np.sqrt(np.mean((yp - (intercept + slope * tp)) ** 2)))
    if clamp_rate:
        slope = max(slope, 0.0)
    prefactor = float(np.max(np.exp(yp - slope * tp)))
    return GrowthBound(prefactor, float(slope), residual)


def gevrey_fit(f: TruncatedSeries) -> GrowthBound:
    """Fit ``|f_n| <= C M**n n!`` to the coefficients of ``f``.

    ``log(|f_n| / n!)`` is regressed on ``n`` over the nonzero coefficients;
    the rate of the returned bound is ``M = exp(slope)``.
    """
    if f.order < 4:
        raise DimensionError(f"gevrey_fit needs order >= 4, got {f.order}")
    mags = np.abs(f.coeffs).reshape(f.order + 1, -1).max(axis=1)
    n = np.arange(f.order + 1)
    scaled = np.array([mags[i] / math.factorial(i) for i in n])
    fit = log_linear_envelope(n, scaled)
    if fit.degenerate:
        return GrowthBound(0.0, 0.0, 0.0, degenerate=True)
    return GrowthBound(fit.prefactor, float(np.exp(fit.rate)), fit.fit_residual)


def iter_table(table: dict) -> Iterable:
    """Deterministic iteration over a sparse coefficient table."""
    return sorted(table.items(), key=lambda kv: (kv[0][0], kv[0][1].parts, kv[0][2]))


def binomial_count(n: int, m: int) -> int:
    """Number of weak compositions of ``m`` into ``n`` parts."""
    return math.comb(m + n - 1, n - 1)


def multinomial(*parts: int) -> int:
    """Multinomial coefficient ``(sum parts)! / prod(parts!)``."""
    out, total = 1, 0
    for p in parts:
        total += p
        out *= math.comb(total, p)
    return out

