"""Estimator-style wrappers.

``fit`` performs the ``hbar``-independent work (formal solution, Borel-plane
solve or Pade continuation, block diagonalization); ``predict`` evaluates at
an array of ``hbar`` values.  Hyperparameters are the numerical knobs, so
``get_params``/``set_params``/``clone`` behave as for any scikit-learn
estimator.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .borel import RayGrid, growth_estimate
from .errors import DimensionError, DomainError
from .formal import ProblemSpec
from .laplace import ResumParams, SectorSpec, laplace, pade_continue, prepare_implicit
from .matrix import (
    GAP_TOL,
    MatrixFamily,
    characteristic_problem,
    leading_eigenvalues,
    recursive_block_diagonalize,
)
from .series import TruncatedSeries, formal_borel

__all__ = ["BlockDiagonalizer", "EigenResummer", "ImplicitResummer", "SeriesResummer"]


def _check_hbars(hbars) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(hbars, dtype=complex))
    if arr.ndim != 1:
        raise DimensionError(f"hbar values must be a 1-D array, got shape {arr.shape}")
    if arr.size == 0:
        raise DimensionError("no hbar values given")
    if not np.all(np.isfinite(arr)):
        raise DomainError("hbar values must be finite")
    return arr


class _Resummer(BaseEstimator):
    def __init__(self, order=8, xi_max=40.0, h=1e-3, tol=1e-10, n_max=50, theta=0.0, R=1.0, tail_tol=1e-12):
        self.order = order
        self.xi_max = xi_max
        self.h = h
        self.tol = tol
        self.n_max = n_max
        self.theta = theta
        self.R = R
        self.tail_tol = tail_tol

    def _params(self) -> ResumParams:
        return ResumParams(order=self.order, xi_max=self.xi_max, h=self.h, tol=self.tol,
                           n_max=self.n_max, tail_tol=self.tail_tol)

    def _sector(self) -> SectorSpec:
        return SectorSpec(self.theta, self.R)


class ImplicitResummer(_Resummer):
    """Borel-resummed solution branch of ``F(hbar, z) = 0`` through ``seed``."""

    def __init__(self, seed=1.0, order=8, xi_max=40.0, h=1e-3, tol=1e-10, n_max=50, theta=0.0, R=1.0,
                 tail_tol=1e-12):
        super().__init__(order, xi_max, h, tol, n_max, theta, R, tail_tol)
        self.seed = seed

    def fit(self, X: ProblemSpec, y=None, hbars=()):
        if not isinstance(X, ProblemSpec):
            raise DomainError(f"expected a ProblemSpec, got {type(X).__name__}")
        self.solution_ = prepare_implicit(X, self.seed, self._sector(), self._params(), list(hbars))
        self.n_features_in_ = X.dim
        return self

    def predict(self, hbars) -> np.ndarray:
        """Values ``f(hbar)``, shape ``(len(hbars),)`` for scalar problems and ``(len(hbars), N)`` otherwise."""
        check_is_fitted(self, "solution_")
        values = np.array([self.solution_.evaluate(h).value for h in _check_hbars(hbars)])
        return values[:, 0] if self.n_features_in_ == 1 else values


class SeriesResummer(_Resummer):
    """Borel sum of a formal series by Pade continuation and Laplace transform."""

    def fit(self, X, y=None):
        series = X if isinstance(X, TruncatedSeries) else TruncatedSeries(np.asarray(X, dtype=complex))
        grid = RayGrid(self.theta, 40.0 if self.xi_max is None else self.xi_max, self.h)
        self.f0_ = np.atleast_1d(np.asarray(series.coeffs[0]))
        phi = formal_borel(series)
        self.continued_ = pade_continue(phi, grid) if len(phi) and np.any(phi.coeffs) else None
        self.growth_ = None if self.continued_ is None else growth_estimate(self.continued_)
        return self

    def predict(self, hbars) -> np.ndarray:
        check_is_fitted(self, "f0_")
        sector = self._sector()
        out = []
        for h in _check_hbars(hbars):
            sector.require(h)
            if self.continued_ is None:
                out.append(self.f0_)
            else:
                value, _ = laplace(self.continued_, h, self.growth_)
                out.append(self.f0_ + np.atleast_1d(value))
        values = np.array(out)
        return values[:, 0] if values.shape[1] == 1 else values


class EigenResummer(_Resummer):
    """Resummed eigenvalue branches of a matrix family, ordered by leading eigenvalue."""

    def __init__(self, order=8, xi_max=40.0, h=1e-3, tol=1e-10, n_max=50, theta=0.0, R=1.0, tail_tol=1e-12,
                 gap_tol=GAP_TOL):
        super().__init__(order, xi_max, h, tol, n_max, theta, R, tail_tol)
        self.gap_tol = gap_tol

    def fit(self, X: MatrixFamily, y=None, hbars=()):
        if not isinstance(X, MatrixFamily):
            raise DomainError(f"expected a MatrixFamily, got {type(X).__name__}")
        lead = leading_eigenvalues(X, self.gap_tol)
        problem = characteristic_problem(X)
        self.branches_ = [prepare_implicit(problem, a, self._sector(), self._params(), list(hbars)) for a in lead]
        self.leading_eigenvalues_ = lead
        return self

    def predict(self, hbars) -> np.ndarray:
        """Eigenvalues, shape ``(len(hbars), n)``."""
        check_is_fitted(self, "branches_")
        hb = _check_hbars(hbars)
        return np.array([[b.evaluate(h).scalar for b in self.branches_] for h in hb])


class BlockDiagonalizer(BaseEstimator):
    """Order-``K`` block diagonalization ``P A P^{-1} = Lambda`` of a matrix family."""

    def __init__(self, order=6, gap_tol=GAP_TOL):
        self.order = order
        self.gap_tol = gap_tol

    def fit(self, X: MatrixFamily, y=None):
        if not isinstance(X, MatrixFamily):
            raise DomainError(f"expected a MatrixFamily, got {type(X).__name__}")
        self.decomposition_ = recursive_block_diagonalize(X, self.order, self.gap_tol)
        return self

    def _evaluate(self, series: TruncatedSeries, hbars) -> np.ndarray:
        return np.array([series(h) for h in _check_hbars(hbars)])

    def predict(self, hbars) -> np.ndarray:
        """Block-diagonal ``Lambda(hbar)``, shape ``(len(hbars), n, n)``."""
        check_is_fitted(self, "decomposition_")
        return self._evaluate(self.decomposition_.Lambda, hbars)

    def transform(self, hbars) -> np.ndarray:
        """Conjugating matrices ``P(hbar)``, shape ``(len(hbars), n, n)``."""
        check_is_fitted(self, "decomposition_")
        return self._evaluate(self.decomposition_.P, hbars)
