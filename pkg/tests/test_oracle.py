from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.special import exp1

from exactpert import CoefficientFunction, MatrixFamily, ProblemSpec, RationalTerm, TruncatedSeries, formal_ift
from exactpert.errors import DomainError, OracleFailure
from exactpert.oracle import (
    eig_direct,
    equation_residual,
    newton_direct,
    pow_multi_literal,
    reference_laplace,
    series_substitute_literal,
    verify,
)

CATALAN = ProblemSpec.from_records(1, [(0, (1,), 1, 1.0), (0, (0,), 1, -1.0), (1, (2,), 1, -1.0)])


@pytest.mark.parametrize("hbar", [0.05, 0.1, 0.5, 2.0])
def test_reference_laplace_euler(hbar):
    exact = math.exp(1 / hbar) * exp1(1 / hbar) * 1.0
    assert reference_laplace(RationalTerm([1.0], [1.0, 1.0]), hbar) == pytest.approx(exact, abs=1e-12)


def test_reference_laplace_polynomials():
    assert reference_laplace(RationalTerm([1.0], [1.0]), 0.3) == pytest.approx(0.3, abs=1e-14)
    cubic = RationalTerm([0, 0, 0, 1 / 6], [1.0])
    assert reference_laplace(cubic, 0.2) == pytest.approx(0.2**4, abs=1e-14)


def test_reference_laplace_lorentzian():
    assert reference_laplace(RationalTerm([1.0], [1.0, 0.0, 1.0]), 0.1) == pytest.approx(0.09819103501, abs=1e-10)


def test_reference_laplace_integrated_term():
    base = reference_laplace(RationalTerm([1.0], [1.0, 1.0]), 0.1)
    assert reference_laplace(RationalTerm([1.0], [1.0, 1.0], 2), 0.1) == pytest.approx(0.01 * base, abs=1e-14)


def test_reference_laplace_rotated():
    theta = 0.5
    hbar = 0.2 * np.exp(0.3j)
    value = reference_laplace(RationalTerm([0, 1.0], [1.0]), hbar, theta=theta)
    assert value == pytest.approx(hbar**2, abs=1e-13)


def test_reference_laplace_domain():
    with pytest.raises(DomainError):
        reference_laplace(RationalTerm([1.0], [1.0]), -0.1)


def test_reference_laplace_budget_exhaustion():
    with pytest.raises(OracleFailure):
        reference_laplace(RationalTerm([1.0], [1.0, 0.0, 1e6]), 0.1, target_tol=1e-15, max_depth=2)


def test_newton_recovers_leading_root():
    z = newton_direct(CATALAN, 1e-6, 1.0)
    assert abs(z[0] - 1.0) < 1e-5
    assert abs(z[0] - 2 / (1 + math.sqrt(1 - 4e-6))) < 1e-12


def test_newton_with_borel_part():
    p = ProblemSpec(1, {(0, (1,), 1): -1.0}, {((0,), 1): CoefficientFunction.rational([1.0], [1.0, 1.0])})
    assert newton_direct(p, 0.1, 0.0)[0] == pytest.approx(0.0915633339397881, abs=1e-12)
    assert equation_residual(p, 0.1, [0.0915633339397881]) < 1e-12


def test_newton_failure():
    p = ProblemSpec.from_records(1, [(0, (2,), 1, 1.0), (0, (0,), 1, 1.0), (1, (0,), 1, 1e-3)])
    with pytest.raises(OracleFailure):
        newton_direct(p, 0.1, 0.5, max_iter=3)


def test_eig_direct_pairs_with_leading_order():
    A = MatrixFamily((np.diag([2.0, 0.0, 1.0]), 0.01 * np.ones((3, 3))))
    vals, vecs = eig_direct(A, 0.1)
    np.testing.assert_allclose(vals.real, [0, 1, 2], atol=0.01)
    mat = A.evaluate(0.1)
    np.testing.assert_allclose(mat @ vecs, vecs * vals, atol=1e-12)


def test_verify_report():
    report = verify([1.0, 2.0], [1.0, 2.0 + 1e-9], 1e-8, labels=["a", "b"])
    assert report.passed and report.rows[1][0] == "b"
    assert report.summary().startswith("PASS")
    failed = verify([np.nan], [1.0], 1.0)
    assert not failed.passed and failed.summary().startswith("FAIL")
    assert verify([1.1], [1.0], 0.2, relative=True).max_deviation == pytest.approx(0.1)


def test_literal_power_small_case():
    v = TruncatedSeries(np.array([[1.0, 2.0], [1.0, 1.0], [0.0, 0.0]]))
    # (1 + t)^2 (2 + t) = 2 + 5t + 4t^2 + ...
    np.testing.assert_allclose(pow_multi_literal(v, (2, 1)).coeffs, [2, 5, 4])


def test_literal_substitution_annihilates_solution():
    sol = formal_ift(CATALAN, 1.0, 8)
    np.testing.assert_allclose(series_substitute_literal(CATALAN, sol.series), 0, atol=1e-9)
