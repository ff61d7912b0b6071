from __future__ import annotations

import math

import numpy as np
import pytest
from factories import random_problem, random_standard_form
from hypothesis import given, settings
from hypothesis import strategies as st

from exactpert import (
    CoefficientFunction,
    ProblemSpec,
    StandardFormProblem,
    TruncatedSeries,
    formal_ift,
    formal_residual,
    g_recursion,
    majorant_check,
    majorant_constants,
    majorant_growth_fit,
    majorant_sequence,
    solve_leading,
    to_standard_form,
)
from exactpert.errors import DimensionError, InconsistentInputError, NoSolutionError, SingularJacobianError
from exactpert.formal import scalar_recursion, scalar_standard_form
from exactpert.oracle import series_substitute_literal

CATALAN = ProblemSpec.from_records(1, [(0, (1,), 1, 1.0), (0, (0,), 1, -1.0), (1, (2,), 1, -1.0)])


def _euler() -> ProblemSpec:
    return ProblemSpec(1, {(0, (1,), 1): -1.0}, {((0,), 1): CoefficientFunction.rational([1.0], [1.0, 1.0])})


def _evaluate_table(table, hbar: complex, z: np.ndarray) -> np.ndarray:
    out = np.zeros(z.size, dtype=complex)
    for (k, m, i), v in table.items():
        out[i - 1] += v * hbar**k * np.prod(z ** np.array(m.parts))
    return out


def test_catalan_coefficients():
    sol = formal_ift(CATALAN, 1.0, 8)
    expected = [math.comb(2 * n, n) // (n + 1) for n in range(9)]
    np.testing.assert_allclose(sol.series.coeffs.real, expected, rtol=0, atol=1e-12)
    assert sol.condition == pytest.approx(1.0)


def test_euler_coefficients_alternate_factorials():
    sol = formal_ift(_euler(), 0.0, 9)
    expected = [0.0] + [(-1) ** n * math.factorial(n) for n in range(9)]
    np.testing.assert_allclose(sol.series.coeffs, expected, atol=1e-12)


def test_scalar_recursion_agrees_with_ift(rng):
    for _ in range(5):
        p, f0 = random_problem(rng, 1, 3)
        a = formal_ift(p, f0, 6).series.coeffs
        b = scalar_recursion(p, f0, 6).coeffs
        np.testing.assert_allclose(a, b, atol=1e-10 * (1 + np.abs(b).max()))


def test_formal_residual_small(rng):
    p, f0 = random_problem(rng, 2, 3)
    sol = formal_ift(p, f0, 8)
    assert formal_residual(p, sol.series).max() < 1e-10
    np.testing.assert_allclose(series_substitute_literal(p, sol.series), 0, atol=1e-8 * np.abs(sol.series.coeffs).max())


def test_solve_leading_reports_no_solution():
    p = ProblemSpec.from_records(1, [(0, (2,), 1, 1.0), (0, (0,), 1, 1.0)])
    with pytest.raises(NoSolutionError):
        solve_leading(p, 0.3 + 0j, max_iter=5)


def test_singular_jacobian_message():
    p = ProblemSpec.from_records(1, [(0, (2,), 1, 1.0), (1, (0,), 1, -1.0)])
    with pytest.raises(SingularJacobianError, match="IFT hypothesis"):
        formal_ift(p, 0.0, 3)


def test_invalid_key_rejected():
    with pytest.raises(DimensionError):
        ProblemSpec.from_records(2, [(0, (1,), 1, 1.0)])


def test_borel_constant_must_match_table():
    with pytest.raises(InconsistentInputError):
        ProblemSpec(1, {(0, (1,), 1): 1.0}, {((0,), 1): CoefficientFunction.rational([1.0], [1.0, 1.0], 2.0)})


def test_standard_form_equivalence(rng):
    """``F(hbar, f0 + hbar (f1 + w)) = hbar J_0 (w - hbar G(hbar, w))`` pointwise."""
    for dim in (1, 2):
        p, f0 = random_problem(rng, dim, 3)
        sol = formal_ift(p, f0, 4)
        sf = to_standard_form(p, sol)
        assert min(k for k, _, _ in sf.coeffs) >= 0
        for _ in range(3):
            hbar = 0.1 * complex(*rng.standard_normal(2))
            w = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
            z = sol.f0 + hbar * (sol.f1 + w)
            lhs = _evaluate_table(p.coeffs, hbar, z)
            rhs = hbar * sol.leading_jacobian @ (w - hbar * _evaluate_table(sf.coeffs, hbar, w))
            np.testing.assert_allclose(lhs, rhs, atol=1e-11 * (1 + np.abs(lhs).max()))


def test_scalar_formula_matches_general_substitution(rng):
    for _ in range(5):
        p, f0 = random_problem(rng, 1, 3, hbar_orders=3)
        sol = formal_ift(p, f0, 3)
        general = to_standard_form(p, sol).coeffs
        explicit = {key: v for key, v in scalar_standard_form(p, sol).coeffs.items() if abs(v) > 1e-13}
        for key in set(general) | set(explicit):
            assert general.get(key, 0) == pytest.approx(explicit.get(key, 0), abs=1e-10)


def test_g_recursion_reproduces_formal_solution(rng):
    for dim in (1, 2):
        p, f0 = random_problem(rng, dim, 2)
        K = 7
        sol = formal_ift(p, f0, K)
        g = g_recursion(to_standard_form(p, sol), K).as_vector().coeffs
        f = sol.series.as_vector().coeffs
        np.testing.assert_allclose(g[0], 0, atol=0)
        np.testing.assert_allclose(g[1:K], f[2:], atol=1e-9 * np.abs(f).max())


def test_standard_form_keeps_borel_part():
    sf = to_standard_form(_euler(), formal_ift(_euler(), 0.0, 2))
    g = g_recursion(sf, 8).coeffs
    expected = [0.0] + [(-1) ** (n + 1) * math.factorial(n + 1) for n in range(8)]
    np.testing.assert_allclose(g, expected, atol=1e-9)


def test_majorant_hand_values():
    assert majorant_sequence(1.0, 1.0, 1, 4).values == (0.0, 1.0, 2.0, 5.0, 15.0)


def test_majorant_bounds_random_problems(rng):
    for dim in (1, 2):
        s = random_standard_form(rng, dim, 2, 2)
        A, B = majorant_constants(s, 12)
        report = majorant_check(g_recursion(s, 12), majorant_sequence(A, B, dim, 12))
        assert report.passed, report


def test_majorant_check_flags_violation():
    report = majorant_check(TruncatedSeries([0.0, 2.0, 0.0]), [0.0, 1.0, 1.0])
    assert not report.passed and report.first_violation == 1 and report.worst_ratio == pytest.approx(2.0)


def test_majorant_growth_fit_is_envelope():
    M = majorant_sequence(1.0, 1.0, 1, 20)
    fit = majorant_growth_fit(M)
    n = np.arange(len(M))
    assert np.all(np.array(M.values) <= fit.prefactor * fit.rate**n * (1 + 1e-12))
    assert 1.0 < fit.rate < 6.0


@given(st.floats(0.1, 3.0), st.floats(0.5, 3.0))
@settings(max_examples=25, deadline=None)
def test_majorant_monotone_in_constants(A, B):
    lo = majorant_sequence(A, B, 1, 8).values
    hi = majorant_sequence(A * 1.5, B * 1.2, 1, 8).values
    assert all(a <= b * (1 + 1e-12) for a, b in zip(lo, hi))


def test_exponential_standard_form_g_is_geometric():
    s = StandardFormProblem.from_records(1, [(0, (0,), 1, 1.0), (0, (1,), 1, 1.0)])
    np.testing.assert_allclose(g_recursion(s, 6).coeffs, [0, 1, 1, 1, 1, 1, 1])
