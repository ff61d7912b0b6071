"""Block diagonalization and eigenvalue resummation of matrix families.

A family ``A(hbar) = sum_k A_k hbar**k`` whose leading matrix splits into
eigenvalue groups is conjugated, order by order, into block-diagonal form
``P A P^{-1} = Lambda``.  Each two-way split uses

    P = [[I, S], [T, I]],   Lambda' = A11 + S A21,   Lambda'' = A22 + T A12,

where ``S`` and ``T`` solve the quadratic equations

    A12 + S A22 - A11 S - S A21 S = 0,
    A21 + T A11 - A22 T - T A12 T = 0.

With ``S_0 = T_0 = 0`` every order is a Sylvester equation with the leading
diagonal blocks.  Further groups are split off ``Lambda''`` recursively.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .borel import RayGrid
from .errors import (
    ConditioningError,
    DefectiveInputError,
    DimensionError,
    DiscriminantError,
    DomainError,
    ExactPertError,
    GapError,
    InternalConsistencyError,
)
from .formal import ProblemSpec
from .laplace import ResummationResult, ResumParams, SectorSpec, resum_implicit_solution, resum_series
from .series import MultiIndex, TruncatedSeries

__all__ = [
    "BlockDecomposition",
    "BlockPartition",
    "MatrixFamily",
    "assemble_P_Lambda",
    "characteristic_polynomial",
    "characteristic_problem",
    "eigen_resum",
    "leading_eigenvalues",
    "leading_split",
    "left_eigenvector_resum",
    "recursive_block_diagonalize",
    "similarity_residual",
    "similarity_residual_direct",
    "solve_ST_formal",
]

GAP_TOL = 1e-6
DEFECT_COND_MAX = 1e8
SYLVESTER_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class MatrixFamily:
    """Polynomial family ``A(hbar) = sum_k orders[k] hbar**k`` of square matrices."""

    orders: tuple
    borel_parts: dict | None = None

    def __post_init__(self):
        mats = [np.array(a, dtype=complex) for a in self.orders]
        if not mats:
            raise DimensionError("matrix family needs at least the leading matrix")
        n = mats[0].shape[0] if mats[0].ndim == 2 else -1
        for k, a in enumerate(mats):
            if a.ndim != 2 or a.shape != (n, n):
                raise DimensionError(f"order {k} has shape {a.shape}; expected square {n}x{n}")
            a.setflags(write=False)
        if self.borel_parts:
            raise DomainError("sector-analytic matrix entries are not supported; give the family as an hbar-polynomial")
        object.__setattr__(self, "orders", tuple(mats))

    @property
    def n(self) -> int:
        return int(self.orders[0].shape[0])

    @property
    def degree(self) -> int:
        return len(self.orders) - 1

    @property
    def leading(self) -> np.ndarray:
        return self.orders[0]

    def evaluate(self, hbar: complex) -> np.ndarray:
        out = np.zeros((self.n, self.n), dtype=complex)
        for a in reversed(self.orders):
            out = out * complex(hbar) + a
        return out

    def series(self, K: int) -> TruncatedSeries:
        coeffs = np.zeros((K + 1, self.n, self.n), dtype=complex)
        for k, a in enumerate(self.orders[: K + 1]):
            coeffs[k] = a
        return TruncatedSeries(coeffs)

    def conjugate(self, P0: np.ndarray) -> "MatrixFamily":
        """Family ``P0 A(hbar) P0^{-1}``."""
        inv = np.linalg.inv(P0)
        return MatrixFamily(tuple(P0 @ a @ inv for a in self.orders))


@dataclass(frozen=True, eq=False)
class BlockPartition:
    """Grouping of the (conjugated) basis into eigenvalue groups.

    ``groups`` lists the basis indices of each group in block order; the
    two-way split separates the first group from the rest.
    """

    groups: tuple
    leading_blocks: tuple
    gap_tol: float = GAP_TOL

    def __post_init__(self):
        groups = tuple(tuple(int(i) for i in g) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        if len(groups) >= 2:
            gap = self.gap
            if gap < self.gap_tol:
                raise GapError(
                    f"spectra of the split blocks are {gap:.3g} apart, below gap_tol = {self.gap_tol:g}: "
                    f"the Sylvester equations lose uniqueness"
                )

    @property
    def sizes(self) -> tuple[int, int]:
        first = len(self.groups[0])
        return first, sum(len(g) for g in self.groups) - first

    @property
    def gap(self) -> float:
        a, b = self.leading_blocks
        ea, eb = np.linalg.eigvals(a), np.linalg.eigvals(b)
        if ea.size == 0 or eb.size == 0:
            return math.inf
        return float(np.min(np.abs(ea[:, None] - eb[None, :])))


@dataclass(frozen=True, eq=False)
class BlockDecomposition:
    """``P A P^{-1} = Lambda`` through order ``K``.

    ``S`` and ``T`` are those of the outermost split; ``tree`` records every
    split as ``{"path", "sizes", "gap"}``.
    """

    P: TruncatedSeries
    Lambda: TruncatedSeries
    S: TruncatedSeries | None
    T: TruncatedSeries | None
    tree: list = field(default_factory=list)
    block_sizes: tuple = ()

    @property
    def K(self) -> int:
        return self.P.order


def _block_diagonal_off(mat: np.ndarray, sizes: Sequence[int]) -> float:
    """Largest entry outside the diagonal blocks."""
    mask = np.ones(mat.shape, dtype=bool)
    start = 0
    for s in sizes:
        mask[start : start + s, start : start + s] = False
        start += s
    return float(np.max(np.abs(mat[mask]))) if mask.any() else 0.0


def _cluster(values: np.ndarray, gap_tol: float) -> list[list[int]]:
    """Single-linkage clusters of ``values`` at distance ``gap_tol``."""
    order = list(np.lexsort((values.imag, values.real)))
    groups: list[list[int]] = []
    for idx in order:
        near = [g for g in groups if any(abs(values[idx] - values[j]) < gap_tol for j in g)]
        merged = [idx] + [j for g in near for j in g]
        groups = [g for g in groups if g not in near] + [merged]
    groups = [sorted(g, key=lambda j: order.index(j)) for g in groups]
    return sorted(groups, key=lambda g: order.index(g[0]))


def leading_split(A00, gap_tol: float = GAP_TOL, P00=None) -> tuple[np.ndarray, np.ndarray, BlockPartition]:
    """Conjugate the leading matrix to block-diagonal form grouped by eigenvalue.

    Returns ``(P00, Lambda00, partition)`` with ``P00 A00 P00^{-1} = Lambda00``.
    Eigenvalues closer than ``gap_tol`` share a group.  A user-supplied
    ``P00`` is used as given and the groups are read off the block pattern
    of ``Lambda00``.

    Raises
    ------
    DefectiveInputError
        ``A00`` is numerically non-diagonalizable and no ``P00`` was given.
    """
    A00 = np.array(A00, dtype=complex)
    if A00.ndim != 2 or A00.shape[0] != A00.shape[1]:
        raise DimensionError(f"leading matrix must be square, got shape {A00.shape}")
    n = A00.shape[0]
    if P00 is not None:
        P00 = np.array(P00, dtype=complex)
        lam = P00 @ A00 @ np.linalg.inv(P00)
        groups = _pattern_groups(lam, gap_tol)
    else:
        vals, vecs = np.linalg.eig(A00)
        if np.linalg.cond(vecs) > DEFECT_COND_MAX:
            raise DefectiveInputError(
                "leading matrix is not diagonalizable (eigenvector matrix singular); supply an exact "
                "transformation P00 for its Jordan form"
            )
        clusters = _cluster(vals, gap_tol)
        perm = [j for g in clusters for j in g]
        P00 = np.linalg.inv(vecs[:, perm])
        lam = np.diag(vals[perm])
        groups, start = [], 0
        for g in clusters:
            groups.append(tuple(range(start, start + len(g))))
            start += len(g)
    return P00, lam, _partition(lam, groups, gap_tol)


def _pattern_groups(lam: np.ndarray, gap_tol: float) -> list[tuple[int, ...]]:
    """Contiguous groups from the block pattern of ``lam``."""
    n = lam.shape[0]
    scale = max(1.0, float(np.max(np.abs(lam))))
    coupled = np.abs(lam) > 1e-12 * scale
    groups, start = [], 0
    while start < n:
        end = start + 1
        while end < n and (coupled[start:end, end:].any() or coupled[end:, start:end].any()):
            end += 1
        groups.append(tuple(range(start, end)))
        start = end
    return groups


def _partition(lam: np.ndarray, groups: Sequence[Sequence[int]], gap_tol: float) -> BlockPartition:
    first = list(groups[0])
    rest = [i for g in groups[1:] for i in g]
    return BlockPartition(tuple(tuple(g) for g in groups),
                          (lam[np.ix_(first, first)], lam[np.ix_(rest, rest)]), gap_tol)


class _Sylvester:
    """Solver for ``L X - X M = R`` by a factorized Kronecker system."""

    def __init__(self, L: np.ndarray, M: np.ndarray, tol: float):
        p, q = L.shape[0], M.shape[0]
        self.L, self.M, self.tol, self.shape = L, M, tol, (p, q)
        op = np.kron(np.eye(q), L) - np.kron(M.T, np.eye(p))
        self.lu = scipy.linalg.lu_factor(op)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        x = scipy.linalg.lu_solve(self.lu, rhs.reshape(-1, order="F")).reshape(self.shape, order="F")
        resid = np.max(np.abs(self.L @ x - x @ self.M - rhs)) if rhs.size else 0.0
        scale = max(1.0, float(np.max(np.abs(rhs))) if rhs.size else 0.0)
        if resid > self.tol * scale:
            raise ConditioningError(
                f"Sylvester residual {resid:.3g} exceeds tolerance: spectral gap too small numerically"
            )
        return x


def _blocks(A: MatrixFamily, n1: int, K: int):
    mats = [A.orders[k] if k < len(A.orders) else np.zeros((A.n, A.n), dtype=complex) for k in range(K + 1)]
    return ([a[:n1, :n1] for a in mats], [a[:n1, n1:] for a in mats],
            [a[n1:, :n1] for a in mats], [a[n1:, n1:] for a in mats])


def solve_ST_formal(A: MatrixFamily, part: BlockPartition, K: int,
                    tol: float = SYLVESTER_TOL) -> tuple[TruncatedSeries, TruncatedSeries]:
    """Series ``S`` and ``T`` of the two-way split through order ``K``.

    ``A`` must already be conjugated so that ``A_0`` is block-diagonal.
    """
    n1, n2 = part.sizes
    if n1 + n2 != A.n:
        raise DimensionError(f"partition sizes {part.sizes} do not match matrix size {A.n}")
    scale = max(1.0, float(np.max(np.abs(A.leading))))
    if _block_diagonal_off(A.leading, (n1, n2)) > 1e-12 * scale:
        raise DomainError("leading matrix is not block-diagonal; conjugate by P00 first")
    A11, A12, A21, A22 = _blocks(A, n1, K)
    syl_s = _Sylvester(A11[0], A22[0], tol)
    syl_t = _Sylvester(A22[0], A11[0], tol)
    S = np.zeros((K + 1, n1, n2), dtype=complex)
    T = np.zeros((K + 1, n2, n1), dtype=complex)
    for k in range(1, K + 1):
        rs = A12[k].copy()
        rt = A21[k].copy()
        for b in range(1, k):
            rs += S[k - b] @ A22[b] - A11[b] @ S[k - b]
            rt += T[k - b] @ A11[b] - A22[b] @ T[k - b]
        for a in range(1, k):
            for c in range(1, k - a):
                b = k - a - c
                rs -= S[a] @ A21[b] @ S[c]
                rt -= T[a] @ A12[b] @ T[c]
        # L X - X M = R with the order-k unknowns moved to the left
        S[k] = syl_s.solve(rs)
        T[k] = syl_t.solve(rt)
    return TruncatedSeries(S), TruncatedSeries(T)


def _mat_mul_series(a: np.ndarray, b: np.ndarray, K: int | None = None) -> np.ndarray:
    """Cauchy product of matrix series, truncated at ``K`` (full length when ``None``)."""
    top = a.shape[0] + b.shape[0] - 2 if K is None else K
    out = np.zeros((top + 1, a.shape[1], b.shape[2]), dtype=complex)
    for i in range(min(a.shape[0], top + 1)):
        for j in range(min(b.shape[0], top + 1 - i)):
            out[i + j] += a[i] @ b[j]
    return out


def _residual_coeffs(P: np.ndarray, A: np.ndarray, Lam: np.ndarray) -> np.ndarray:
    """All coefficients of ``P A - Lambda P`` (untruncated polynomial product)."""
    pa = _mat_mul_series(P, A)
    lp = _mat_mul_series(Lam, P)
    size = max(pa.shape[0], lp.shape[0])
    out = np.zeros((size,) + pa.shape[1:], dtype=complex)
    out[: pa.shape[0]] += pa
    out[: lp.shape[0]] -= lp
    return out


def assemble_P_Lambda(S: TruncatedSeries, T: TruncatedSeries, A: MatrixFamily,
                      tol: float = 1e-9) -> BlockDecomposition:
    """``P = [[I, S], [T, I]]`` and ``Lambda = diag(A11 + S A21, A22 + T A12)``."""
    K = S.order
    s, t = np.asarray(S.coeffs), np.asarray(T.coeffs)
    n1, n2 = s.shape[1], s.shape[2]
    A11, A12, A21, A22 = _blocks(A, n1, K)
    P = np.zeros((K + 1, A.n, A.n), dtype=complex)
    P[0] = np.eye(A.n)
    P[:, :n1, n1:] += s
    P[:, n1:, :n1] += t
    lam1 = np.array(A11) + _mat_mul_series(s, np.array(A21), K)
    lam2 = np.array(A22) + _mat_mul_series(t, np.array(A12), K)
    Lam = np.zeros((K + 1, A.n, A.n), dtype=complex)
    Lam[:, :n1, :n1] = lam1
    Lam[:, n1:, n1:] = lam2
    resid = _residual_coeffs(P, A.series(K).coeffs, Lam)[: K + 1]
    scale = max(1.0, float(np.max(np.abs(A.series(K).coeffs))))
    worst = float(np.max(np.abs(resid)))
    if worst > tol * scale:
        raise InternalConsistencyError(f"P A - Lambda P has coefficient {worst:.3g} through order {K}")
    gap = float(np.min(np.abs(np.linalg.eigvals(lam1[0])[:, None] - np.linalg.eigvals(lam2[0])[None, :])))
    return BlockDecomposition(TruncatedSeries(P), TruncatedSeries(Lam), S, T,
                              [{"path": (), "sizes": (n1, n2), "gap": gap}], (n1, n2))


def _split(B: MatrixFamily, groups: list[tuple[int, ...]], K: int, gap_tol: float, tol: float,
           path: tuple) -> BlockDecomposition:
    if len(groups) == 1:
        P = np.zeros((K + 1, B.n, B.n), dtype=complex)
        P[0] = np.eye(B.n)
        return BlockDecomposition(TruncatedSeries(P), B.series(K), None, None, [], (B.n,))
    try:
        part = _partition(B.leading, groups, gap_tol)
        S, T = solve_ST_formal(B, part, K, tol)
        stage = assemble_P_Lambda(S, T, B)
    except ExactPertError as exc:
        raise type(exc)(f"split at path {list(path)}: {exc}") from exc
    n1 = part.sizes[0]
    lam = np.asarray(stage.Lambda.coeffs)
    sub_family = MatrixFamily(tuple(lam[:, n1:, n1:]))
    offset = len(groups[0])
    sub_groups = [tuple(i - offset for i in g) for g in groups[1:]]
    sub = _split(sub_family, sub_groups, K, gap_tol, tol, path + (1,))
    n = B.n
    embed = np.zeros((K + 1, n, n), dtype=complex)
    embed[0, :n1, :n1] = np.eye(n1)
    embed[:, n1:, n1:] = sub.P.coeffs
    P = _mat_mul_series(embed, np.asarray(stage.P.coeffs), K)
    Lam = np.zeros((K + 1, n, n), dtype=complex)
    Lam[:, :n1, :n1] = lam[:, :n1, :n1]
    Lam[:, n1:, n1:] = sub.Lambda.coeffs
    tree = [{"path": path, "sizes": part.sizes, "gap": part.gap}]
    tree += [dict(rec, path=path + (1,) + tuple(rec["path"][len(path) + 1 :])) for rec in sub.tree]
    return BlockDecomposition(TruncatedSeries(P), TruncatedSeries(Lam), S, T, tree, (n1,) + sub.block_sizes)


def recursive_block_diagonalize(A: MatrixFamily, K: int, gap_tol: float = GAP_TOL, P00=None,
                                tol: float = SYLVESTER_TOL) -> BlockDecomposition:
    """Split ``A`` into one block per leading eigenvalue group through order ``K``.

    The returned ``P`` includes the leading conjugation ``P00``, so
    ``P(hbar) A(hbar) P(hbar)^{-1} = Lambda(hbar) + O(hbar**(K+1))`` for the
    original family.
    """
    P00, _, part = leading_split(A.leading, gap_tol, P00)
    B = A.conjugate(P00)
    dec = _split(B, list(part.groups), K, gap_tol, tol, ())
    P = np.asarray(dec.P.coeffs) @ P00
    return BlockDecomposition(TruncatedSeries(P), dec.Lambda, dec.S, dec.T, dec.tree, dec.block_sizes)


def _poly_eval(coeffs: np.ndarray, hbar: complex) -> np.ndarray:
    out = np.zeros(coeffs.shape[1:], dtype=complex)
    for c in coeffs[::-1]:
        out = out * hbar + c
    return out


def similarity_residual(dec: BlockDecomposition, A: MatrixFamily, hbar: complex) -> float:
    """Truncation error ``||P A P^{-1} - Lambda||_2`` of the order-``K`` decomposition.

    Uses ``P A P^{-1} - Lambda = R P^{-1}`` with ``R = P A - Lambda P``.  The
    coefficients of ``R`` through order ``K`` vanish by construction (they are
    checked when the decomposition is assembled) and are dropped, so the
    result measures the ``O(hbar**(K+1))`` remainder free of cancellation.
    """
    R = _residual_coeffs(np.asarray(dec.P.coeffs), A.series(A.degree).coeffs, np.asarray(dec.Lambda.coeffs))
    R[: dec.K + 1] = 0
    Rh = _poly_eval(R, complex(hbar))
    Ph = _poly_eval(np.asarray(dec.P.coeffs), complex(hbar))
    return float(np.linalg.norm(np.linalg.solve(Ph.T, Rh.T).T, 2))


def similarity_residual_direct(dec: BlockDecomposition, A: MatrixFamily, hbar: complex) -> float:
    """``||P A P^{-1} - Lambda||_2`` formed from the evaluated matrices."""
    Ph = _poly_eval(np.asarray(dec.P.coeffs), complex(hbar))
    Lh = _poly_eval(np.asarray(dec.Lambda.coeffs), complex(hbar))
    return float(np.linalg.norm(Ph @ A.evaluate(hbar) @ np.linalg.inv(Ph) - Lh, 2))


def characteristic_polynomial(A: MatrixFamily) -> np.ndarray:
    """Coefficients ``c[j, k]`` of ``det(z I - A(hbar)) = sum_j sum_k c[j, k] hbar**k z**(n-j)``.

    Division-free Berkowitz recursion over ``hbar``-polynomial entries.
    """
    n = A.n
    deg = A.degree
    entry = np.stack(A.orders, axis=-1)  # (n, n, deg+1)

    def pmul(a, b):
        return np.convolve(a, b)

    def padd(a, b):
        out = np.zeros(max(a.size, b.size), dtype=complex)
        out[: a.size] += a
        out[: b.size] += b
        return out

    poly = [np.ones(1, dtype=complex), -entry[0, 0]]
    for r in range(1, n):
        M = entry[:r, :r]
        col = [entry[i, r] for i in range(r)]
        row = [entry[r, i] for i in range(r)]
        toeplitz = [np.ones(1, dtype=complex), -entry[r, r]]
        vec = col
        for _ in range(r):
            toeplitz.append(-sum((pmul(row[i], vec[i]) for i in range(r)), np.zeros(1, dtype=complex)))
            vec = [sum((pmul(M[i, j], vec[j]) for j in range(r)), np.zeros(1, dtype=complex)) for i in range(r)]
        new = []
        for i in range(r + 2):
            acc = np.zeros(1, dtype=complex)
            for j in range(min(i, r) + 1):
                if i - j < len(toeplitz):
                    acc = padd(acc, pmul(toeplitz[i - j], poly[j]))
            new.append(acc)
        poly = new
    width = n * deg + 1
    out = np.zeros((n + 1, width), dtype=complex)
    for j, c in enumerate(poly):
        out[j, : min(c.size, width)] = c[:width]
    return out


def characteristic_problem(A: MatrixFamily) -> ProblemSpec:
    """``F(hbar, z) = det(z I - A(hbar))`` as a scalar implicit problem."""
    c = characteristic_polynomial(A)
    n = A.n
    coeffs = {}
    for j in range(n + 1):
        for k in range(c.shape[1]):
            if c[j, k] != 0:
                coeffs[(k, MultiIndex((n - j,)), 1)] = c[j, k]
    return ProblemSpec(1, coeffs)


def leading_eigenvalues(A: MatrixFamily, gap_tol: float = GAP_TOL) -> np.ndarray:
    """Eigenvalues of ``A_0`` ordered by ``(Re, Im)``.

    Raises
    ------
    DiscriminantError
        Two leading eigenvalues are closer than ``gap_tol``.
    """
    lead = np.linalg.eigvals(A.leading)
    lead = lead[np.lexsort((lead.imag, lead.real))]
    if lead.size > 1:
        dist = np.abs(lead[:, None] - lead[None, :]) + np.diag(np.full(lead.size, np.inf))
        if np.min(dist) < gap_tol:
            raise DiscriminantError(
                f"leading eigenvalues coalesce (separation {np.min(dist):.3g} < {gap_tol:g}): "
                "leading-order discriminant vanishes"
            )
    return lead


def eigen_resum(A: MatrixFamily, sector: SectorSpec, hbars: Sequence[complex],
                params: ResumParams = ResumParams(), gap_tol: float = GAP_TOL) -> list[list[ResummationResult]]:
    """Resummed eigenvalue branches ``lambda_i(hbar)``, one list per leading eigenvalue.

    Each branch solves the characteristic equation by the implicit pipeline
    seeded at its leading eigenvalue ``a_i``; branches are ordered by
    ``(Re a_i, Im a_i)``.

    Raises
    ------
    DiscriminantError
        Two leading eigenvalues are closer than ``gap_tol``.
    """
    lead = leading_eigenvalues(A, gap_tol)
    problem = characteristic_problem(A)
    return [resum_implicit_solution(problem, a, sector, hbars, params) for a in lead]


def left_eigenvector_resum(dec: BlockDecomposition, sector: SectorSpec, hbar: complex,
                           grid: RayGrid) -> np.ndarray:
    """Rows of ``P(hbar)`` (left eigenvectors when every block is 1x1), resummed entrywise."""
    coeffs = np.asarray(dec.P.coeffs)
    n = coeffs.shape[1]
    out = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            series = TruncatedSeries(coeffs[:, i, j])
            out[i, j] = resum_series(series, sector, hbar, grid).scalar
    return out
