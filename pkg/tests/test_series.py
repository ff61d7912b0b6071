from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from exactpert import (
    MultiIndex,
    TruncatedSeries,
    formal_borel,
    gevrey_fit,
    multiindex_enumerate,
    ts_add,
    ts_mul,
    ts_pow_multi,
    ts_scale,
)
from exactpert.errors import DimensionError
from exactpert.oracle import pow_multi_literal
from exactpert.series import binomial_count, log_linear_envelope

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def series_of(order: int, dim: int | None = None):
    shape = (order + 1,) if dim is None else (order + 1, dim)
    return st.builds(lambda re, im: TruncatedSeries(re + 1j * im),
                     arrays(float, shape, elements=finite), arrays(float, shape, elements=finite))


@given(st.integers(0, 6).flatmap(lambda K: st.tuples(series_of(K), series_of(K), series_of(K))))
@settings(max_examples=60, deadline=None)
def test_mul_commutative_and_associative(abc):
    a, b, c = abc
    np.testing.assert_allclose(ts_mul(a, b).coeffs, ts_mul(b, a).coeffs, atol=1e-9)
    left = ts_mul(ts_mul(a, b), c).coeffs
    right = ts_mul(a, ts_mul(b, c)).coeffs
    np.testing.assert_allclose(left, right, atol=1e-9 * (1 + np.abs(left).max()))


@given(st.integers(0, 6).flatmap(lambda K: st.tuples(series_of(K), series_of(K), series_of(K))))
@settings(max_examples=40, deadline=None)
def test_mul_distributes_over_add(abc):
    a, b, c = abc
    lhs = ts_mul(a, ts_add(b, c)).coeffs
    rhs = ts_add(ts_mul(a, b), ts_mul(a, c)).coeffs
    np.testing.assert_allclose(lhs, rhs, atol=1e-9 * (1 + np.abs(lhs).max()))


def test_mul_truncates_at_common_order():
    a = TruncatedSeries([1.0, 1.0, 0.0])
    assert np.allclose(ts_mul(a, a).coeffs, [1, 2, 1])
    b = TruncatedSeries([0.0, 0.0, 1.0])
    assert np.allclose(ts_mul(b, b).coeffs, 0)


def test_mismatched_orders_rejected():
    with pytest.raises(DimensionError):
        ts_mul(TruncatedSeries([1.0, 2.0]), TruncatedSeries([1.0]))


def test_scale_and_evaluate():
    a = TruncatedSeries([1.0, 2.0, 3.0])
    assert ts_scale(a, 2)(0.5) == pytest.approx(2 * (1 + 1 + 0.75))


def test_scalar_times_vector_is_componentwise():
    s = TruncatedSeries([2.0, 1.0])
    v = TruncatedSeries([[1.0, 3.0], [0.0, 1.0]])
    np.testing.assert_allclose(ts_mul(s, v).coeffs, [[2, 6], [1, 5]])


@pytest.mark.parametrize("n,m", [(1, 0), (1, 5), (2, 4), (3, 4), (4, 3)])
def test_multiindex_enumerate_count_and_order(n, m):
    found = multiindex_enumerate(n, m)
    assert len(found) == math.comb(m + n - 1, n - 1) == binomial_count(n, m)
    assert all(mi.weight == m and mi.dim == n for mi in found)
    assert [mi.parts for mi in found] == sorted(mi.parts for mi in found)
    assert len(set(found)) == len(found)


def test_multiindex_rejects_negative_parts():
    with pytest.raises(DimensionError):
        MultiIndex((1, -1))


@given(st.integers(1, 3), st.integers(0, 6), st.data())
@settings(max_examples=60, deadline=None)
def test_pow_multi_matches_literal(dim, K, data):
    v = data.draw(series_of(K, dim))
    m = data.draw(st.lists(st.integers(0, 2), min_size=dim, max_size=dim))
    fast = ts_pow_multi(v, m).coeffs
    slow = pow_multi_literal(v, m).coeffs
    np.testing.assert_allclose(fast, slow, atol=1e-10 * (1 + np.abs(slow).max()))


def test_pow_multi_zero_index_is_one():
    v = TruncatedSeries(np.ones((4, 2)))
    np.testing.assert_array_equal(ts_pow_multi(v, (0, 0)).coeffs, [1, 0, 0, 0])


def test_pow_multi_dimension_mismatch():
    with pytest.raises(DimensionError):
        ts_pow_multi(TruncatedSeries(np.ones((3, 2))), (1, 1, 1))


def test_formal_borel_divides_by_factorial():
    f = TruncatedSeries([7.0] + [math.factorial(k) for k in range(6)])
    phi = formal_borel(f)
    np.testing.assert_allclose(phi.coeffs, 1.0)
    assert phi.constant_term == 7.0
    assert len(phi) == 6


def test_gevrey_fit_recovers_factorial_growth():
    K = 14
    f = TruncatedSeries([2.0 * 3.0**n * math.factorial(n) for n in range(K + 1)])
    fit = gevrey_fit(f)
    assert fit.rate == pytest.approx(3.0, rel=1e-9)
    assert fit.prefactor == pytest.approx(2.0, rel=1e-9)


def test_gevrey_fit_needs_order_four():
    with pytest.raises(DimensionError):
        gevrey_fit(TruncatedSeries([1.0, 1.0, 1.0]))


@given(arrays(float, 12, elements=st.floats(1e-3, 1e3)))
@settings(max_examples=40, deadline=None)
def test_log_linear_envelope_bounds_every_sample(mags):
    t = np.arange(mags.size, dtype=float)
    fit = log_linear_envelope(t, mags)
    assert np.all(mags <= fit.prefactor * np.exp(fit.rate * t) * (1 + 1e-12))


def test_truncate_pads_and_cuts():
    a = TruncatedSeries([1.0, 2.0])
    assert a.truncate(3).order == 3
    assert a.truncate(0).coeffs.tolist() == [1.0]


def test_coefficients_are_immutable():
    a = TruncatedSeries([1.0, 2.0])
    with pytest.raises(ValueError):
        a.coeffs[0] = 5
