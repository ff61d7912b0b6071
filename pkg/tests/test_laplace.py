from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import exp1

from exactpert import (
    BorelSeries,
    CoefficientFunction,
    GrowthBound,
    ProblemSpec,
    RayFunction,
    RayGrid,
    ResumParams,
    SectorSpec,
    TruncatedSeries,
    convolve,
    laplace,
    pade_continue,
    resum_implicit_solution,
    resum_series,
)
from exactpert.errors import ContinuationError, DimensionError, DomainError
from exactpert.laplace import choose_xi_max, laplace_weights, pade_approximant
from exactpert.oracle import newton_direct

EULER_AT_01 = 0.0915633339397881
CATALAN = ProblemSpec.from_records(1, [(0, (1,), 1, 1.0), (0, (0,), 1, -1.0), (1, (2,), 1, -1.0)])


def _catalan_closed(hbar: float) -> float:
    return (1 - math.sqrt(1 - 4 * hbar)) / (2 * hbar)


def test_pinned_euler_value_matches_exponential_integral():
    assert math.exp(10.0) * exp1(10.0) == pytest.approx(EULER_AT_01, abs=1e-15)


def test_constant_transform():
    grid = RayGrid(0.0, 5.0, 1e-3)
    value, tail = laplace(RayFunction(grid, np.ones(grid.size)), 0.1)
    assert abs(value - 0.1) < 1e-8
    assert tail < 1e-15


@pytest.mark.parametrize("hbar", [0.05, 0.1, 0.2])
@pytest.mark.parametrize("n", range(7))
def test_monomial_identity(n, hbar):
    grid = RayGrid(0.0, 40 * hbar, 1e-3)
    f = RayFunction.from_callable(grid, lambda x: x**n / math.factorial(n))
    value, _ = laplace(f, hbar)
    assert abs(value - hbar ** (n + 1)) < 1e-8


def test_rotated_direction_identity():
    theta = 0.6
    hbar = 0.1 * np.exp(1j * 0.4)
    grid = RayGrid(theta, 8.0, 1e-3)
    f = RayFunction.from_callable(grid, lambda x: x**2 / 2)
    value, _ = laplace(f, hbar)
    assert abs(value - hbar**3) < 1e-12


def test_product_identity():
    grid = RayGrid(0.0, 30.0, 1e-3)
    hbar = 0.2
    f = RayFunction.from_callable(grid, lambda x: 1 / (1 + x))
    g = RayFunction.from_callable(grid, np.cos)
    lhs, _ = laplace(convolve(f, g), hbar)
    rhs = laplace(f, hbar)[0] * laplace(g, hbar)[0]
    assert abs(lhs - rhs) < 1e-7


def _monomial_error(n: int, h: float, hbar: float = 0.1) -> float:
    grid = RayGrid(0.0, 10.0, h)
    f = RayFunction.from_callable(grid, lambda x: x**n / math.factorial(n))
    return abs(laplace(f, hbar)[0] - hbar ** (n + 1))


@pytest.mark.parametrize("n", [0, 1, 2])
def test_quadrature_exact_for_quadratics(n):
    assert _monomial_error(n, 0.1) < 1e-15


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_quadrature_order(n):
    errs = [_monomial_error(n, h) for h in (0.1, 0.05, 0.025)]
    assert errs[0] / errs[1] >= 3.5 and errs[1] / errs[2] >= 3.5


def test_weights_handle_odd_cell_count():
    grid = RayGrid(0.0, 1.3, 0.1)
    assert (grid.size - 1) % 2 == 1
    w = laplace_weights(grid, 0.5)
    x = grid.s
    exact = 0.5 * (1 - math.exp(-2 * 1.3))
    assert abs(w @ np.ones_like(x) - exact) < 1e-15
    assert abs(w @ x**2 - 0.5**3 * (2 - math.exp(-2.6) * (2.6**2 + 2 * 2.6 + 2))) < 1e-14


def test_tail_bound_dominates_truncation():
    grid = RayGrid(0.0, 5.0, 1e-3)
    value, tail = laplace(RayFunction(grid, np.ones(grid.size)), 0.5)
    assert abs(value - 0.5) <= tail * (1 + 1e-9)
    assert tail == pytest.approx(math.exp(-10) / 2, rel=1e-12)


def test_refuses_exactly_at_growth_rate():
    grid = RayGrid(0.0, 5.0, 1e-2)
    f = RayFunction(grid, np.ones(grid.size))
    with pytest.raises(DomainError, match="outside"):
        laplace(f, 0.5, GrowthBound(1.0, 2.0))
    laplace(f, 0.49, GrowthBound(1.0, 2.0))


def test_sector_membership():
    sector = SectorSpec(0.0, 1.0)
    assert sector.contains(0.5) and not sector.contains(1.0) and not sector.contains(-0.1)
    assert sector.contains(0.3 + 0.3j)
    with pytest.raises(DomainError, match="Borel disc"):
        sector.require(2.0)
    with pytest.raises(DomainError):
        SectorSpec(0.0, 0.0)


def test_choose_xi_max_meets_tail_tolerance():
    growth = GrowthBound(2.0, 1.0)
    xi = choose_xi_max(growth, [0.1, 0.2], tail_tol=1e-12)
    gap = 1 / 0.2 - 1.0
    assert 2.0 * math.exp(-gap * xi) / gap <= 1e-13 * (1 + 1e-9)


def test_pade_exponential():
    grid = RayGrid(0.0, 5.0, 1e-3)
    phi = BorelSeries(np.array([1.0 / math.factorial(k) for k in range(17)]))
    sampled = pade_continue(phi, grid)
    assert np.max(np.abs(sampled.values / np.exp(grid.s) - 1)) < 1e-6


def test_pade_twelve_coefficients_resolution():
    grid = RayGrid(0.0, 5.0, 1e-3)
    phi = BorelSeries(np.array([1.0 / math.factorial(k) for k in range(12)]))
    err = np.max(np.abs(pade_continue(phi, grid).values / np.exp(grid.s) - 1))
    assert 1e-3 < err < 1e-2


def test_pade_recovers_rational_exactly():
    approx = pade_approximant([(-1.0) ** k for k in range(10)])
    x = np.linspace(0, 20, 50)
    np.testing.assert_allclose(approx(x), 1 / (1 + x), rtol=1e-10)
    assert approx.den.size == 2


def test_pade_needs_four_coefficients():
    with pytest.raises(DimensionError):
        pade_approximant([1.0, 1.0, 1.0])


def test_pade_pole_on_ray_rejected_and_off_ray_accepted():
    phi = BorelSeries(np.ones(10))
    with pytest.raises(ContinuationError, match="pole"):
        pade_continue(phi, RayGrid(0.0, 5.0, 1e-2))
    rotated = pade_continue(phi, RayGrid(math.pi / 2, 5.0, 1e-2))
    np.testing.assert_allclose(rotated.values, 1 / (1 - rotated.grid.nodes), rtol=1e-10)


def test_geometric_series_resums():
    res = resum_series(TruncatedSeries(np.ones(25)), SectorSpec(0.0, 1.0), 0.5, RayGrid(0.0, 20.0, 1e-3))
    assert abs(res.scalar - 2.0) < 1e-6


def test_euler_series_resums():
    series = TruncatedSeries([0.0] + [(-1) ** n * math.factorial(n) for n in range(11)])
    res = resum_series(series, SectorSpec(0.0, 1.0), 0.1, RayGrid(0.0, 40.0, 1e-3))
    assert abs(res.scalar - EULER_AT_01) < 1e-6


def test_constant_series_is_its_value():
    res = resum_series(TruncatedSeries([3.0, 0.0, 0.0]), SectorSpec(), 0.2, RayGrid(0.0, 1.0, 1e-2))
    assert res.scalar == 3.0 and res.tail_bound == 0.0


def test_catalan_resummation_and_residual():
    hbars = [0.05, 0.1, 0.2]
    results = resum_implicit_solution(CATALAN, 1.0, SectorSpec(0.0, 1.0), hbars)
    for hbar, res in zip(hbars, results):
        assert res.ok
        assert abs(res.scalar - _catalan_closed(hbar)) < 1e-6
        assert res.diagnostics["residual"] < 1e-6


def test_constant_solution():
    p = ProblemSpec.from_records(1, [(0, (1,), 1, 1.0), (0, (0,), 1, -2.5)])
    res = resum_implicit_solution(p, 0.0, SectorSpec(), [0.3], ResumParams(xi_max=2.0, h=1e-2))[0]
    assert res.scalar == pytest.approx(2.5, abs=1e-14)


def test_euler_implicit_problem():
    p = ProblemSpec(1, {(0, (1,), 1): -1.0}, {((0,), 1): CoefficientFunction.rational([1.0], [1.0, 1.0])})
    res = resum_implicit_solution(p, 0.0, SectorSpec(), [0.1])[0]
    assert abs(res.scalar - EULER_AT_01) < 1e-6


def test_coupled_pair_matches_newton():
    p = ProblemSpec.from_records(2, [
        (0, (1, 0), 1, 1.0), (0, (0, 0), 1, -1.0), (1, (1, 1), 1, -1.0),
        (0, (0, 1), 2, 1.0), (0, (0, 0), 2, -2.0), (1, (2, 0), 2, -1.0),
    ])
    hbars = [0.02, 0.05]
    results = resum_implicit_solution(p, [1.0, 2.0], SectorSpec(), hbars, ResumParams(xi_max=None))
    for hbar, res in zip(hbars, results):
        np.testing.assert_allclose(res.value, newton_direct(p, hbar, [1.0, 2.0]), atol=1e-7)


def test_point_failure_is_recorded():
    results = resum_implicit_solution(CATALAN, 1.0, SectorSpec(0.0, 1.0), [0.1, 1.5])
    assert results[0].ok
    assert not results[1].ok and np.isnan(results[1].scalar)
    assert results[1].diagnostics["exit_code"] == 2


@given(st.floats(0.05, 0.22))
@settings(max_examples=10, deadline=None)
def test_catalan_matches_closed_form_anywhere(hbar):
    res = resum_implicit_solution(CATALAN, 1.0, SectorSpec(), [hbar], ResumParams(xi_max=30.0, h=2e-3))[0]
    assert abs(res.scalar - _catalan_closed(hbar)) < 1e-5
