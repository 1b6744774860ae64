"""Algebraic identifiability of sparse causal coefficients.

All checks operate on the total-effect matrix ``C`` (or on ``Cov(I, X)``,
which has the same null space and the same column images up to an
invertible left factor). Ranks and image comparisons are evaluated on a
column-normalized copy of the matrix: scaling columns changes neither
their spans nor the zero pattern of the null space, but it keeps one
relative tolerance meaningful when total effects differ by orders of
magnitude.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import SizeGuard
from .model import Scm, population_covariances

RANK_TOL = 1e-8
DEFAULT_S_MAX = 3
SUBSET_BUDGET = 2_000_000


def normalize_columns(C, tol=RANK_TOL):
    """Scale columns to unit norm; columns below ``tol`` times the largest
    column norm are treated as exactly zero."""
    C = np.asarray(C, dtype=float)
    if C.size == 0:
        return C.copy()
    norms = np.linalg.norm(C, axis=0)
    top = norms.max()
    out = np.zeros_like(C)
    if top == 0:
        return out
    keep = norms > tol * top
    out[:, keep] = C[:, keep] / norms[keep]
    return out


def numerical_rank(M, tol=RANK_TOL) -> int:
    """Number of singular values above ``tol`` times the largest one."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))


def same_image(Cn, S, T, tol=RANK_TOL) -> bool:
    """Whether the columns ``S`` and ``T`` of the (normalized) matrix span
    the same subspace."""
    rs = numerical_rank(Cn[:, list(S)], tol)
    rt = numerical_rank(Cn[:, list(T)], tol)
    if rs != rt:
        return False
    return numerical_rank(Cn[:, sorted(set(S) | set(T))], tol) == rs


def partial_identifiability(C, rank_tol=RANK_TOL) -> np.ndarray:
    """Boolean mask of coordinates whose causal coefficient is pinned down
    by the moment equation: row ``j`` of ``Id - C^+ C`` vanishes."""
    Cn = normalize_columns(C, rank_tol)
    d = Cn.shape[1]
    if d == 0:
        return np.zeros(0, dtype=bool)
    null_proj = np.eye(d) - np.linalg.pinv(Cn, rcond=rank_tol) @ Cn
    return np.all(np.abs(null_proj) <= rank_tol, axis=1)


def identified_coordinate_estimates(cov_IX, cov_IY, rank_tol=RANK_TOL):
    """Moore-Penrose solution of ``Cov(I, X) beta = Cov(I, Y)``.

    Returns ``(estimate, mask)``; entries are only guaranteed to equal the
    causal coefficient where ``mask`` is true.
    """
    cov_IX = np.asarray(cov_IX, dtype=float)
    cov_IY = np.asarray(cov_IY, dtype=float).reshape(-1)
    est = np.linalg.pinv(cov_IX, rcond=rank_tol) @ cov_IY
    return est, partial_identifiability(cov_IX, rank_tol)


def check_a1(C, pa, rank_tol=RANK_TOL) -> bool:
    """Parent columns of ``C`` have full column rank."""
    pa = list(pa)
    if not pa:
        raise ValueError("pa must be non-empty")
    Cn = normalize_columns(C, rank_tol)
    return numerical_rank(Cn[:, pa], rank_tol) == len(pa)


def _guard(d, max_size, force, budget=SUBSET_BUDGET):
    total = sum(comb(d, k) for k in range(max_size + 1))
    if total > budget and not force:
        raise SizeGuard(f"{total} subsets exceed the budget of {budget}; pass force=True")


def check_a2(C, pa, beta_pa, max_size=None, rank_tol=RANK_TOL, force=False):
    """Non-cancellation check for all ``S`` with ``|S| <= max_size``.

    For every ``S`` with ``rank(C_S) <= rank(C_PA)`` and a different image,
    ``v = C_PA beta_PA`` must not lie in ``im(C_S)``. Returns
    ``(verdict, witness)`` with ``witness`` the first violating set.
    """
    C = np.asarray(C, dtype=float)
    pa = list(pa)
    d = C.shape[1]
    max_size = d if max_size is None else int(max_size)
    if max_size > d:
        raise ValueError("max_size cannot exceed d")
    _guard(d, max_size, force)
    Cn = normalize_columns(C, rank_tol)
    v = C[:, pa] @ np.asarray(beta_pa, dtype=float).reshape(-1)
    vnorm = np.linalg.norm(v)
    r_pa = numerical_rank(Cn[:, pa], rank_tol)
    for size in range(max_size + 1):
        for S in itertools.combinations(range(d), size):
            CS = Cn[:, list(S)]
            r_s = numerical_rank(CS, rank_tol)
            if r_s > r_pa or same_image(Cn, S, pa, rank_tol):
                continue
            if size == 0 or r_s == 0:
                resid = vnorm
            else:
                U, s, _ = np.linalg.svd(CS, full_matrices=False)
                U = U[:, : int(np.sum(s > rank_tol * s[0]))]
                resid = np.linalg.norm(v - U @ (U.T @ v))
            if resid <= rank_tol * max(vnorm, np.finfo(float).tiny):
                return False, S
    return True, None


def check_a3(C, pa, rank_tol=RANK_TOL):
    """Every other set of ``|pa|`` columns spans a different subspace.

    Returns ``(verdict, witness)``.
    """
    pa = tuple(sorted(pa))
    if not pa:
        raise ValueError("pa must be non-empty")
    Cn = normalize_columns(C, rank_tol)
    for S in itertools.combinations(range(Cn.shape[1]), len(pa)):
        if S != pa and same_image(Cn, S, pa, rank_tol):
            return False, S
    return True, None


def sparsest_solutions(C, target, max_size=None, rank_tol=RANK_TOL):
    """Smallest supports ``S`` for which ``C_S w = target`` is solvable.

    Returns ``(size, supports)``; ``(None, [])`` if none up to ``max_size``.
    """
    C = np.asarray(C, dtype=float)
    target = np.asarray(target, dtype=float).reshape(-1)
    d = C.shape[1]
    max_size = d if max_size is None else max_size
    scale = max(np.linalg.norm(target), np.finfo(float).tiny)
    Cn = normalize_columns(C, rank_tol)
    for size in range(max_size + 1):
        hits = []
        for S in itertools.combinations(range(d), size):
            if size == 0:
                resid = np.linalg.norm(target)
            else:
                w, *_ = np.linalg.lstsq(Cn[:, list(S)], target, rcond=rank_tol)
                resid = np.linalg.norm(Cn[:, list(S)] @ w - target)
            if resid <= rank_tol * scale:
                hits.append(S)
        if hits:
            return size, hits
    return None, []


@dataclass(frozen=True)
class IdentReport:
    a1: bool
    rank_c_pa: int
    a2: bool | None
    a2_witness: tuple | None
    a2_max_size: int | None
    a3: bool
    a3_witness: tuple | None
    per_coordinate: np.ndarray
    solution_space_dim: int
    pa_y: tuple

    def to_dict(self):
        def one_based(S):
            return None if S is None else [j + 1 for j in S]

        return {
            "A1": self.a1,
            "rank_C_pa": self.rank_c_pa,
            "A2": self.a2,
            "A2_witness": one_based(self.a2_witness),
            "A2_max_size": self.a2_max_size,
            "A3": self.a3,
            "A3_witness": one_based(self.a3_witness),
            "identifiable_coordinates": [int(j) + 1 for j in np.flatnonzero(self.per_coordinate)],
            "solution_space_dim": self.solution_space_dim,
            "pa_y": one_based(self.pa_y),
        }


def identify(scm: Scm, a2_max_size=None, rank_tol=RANK_TOL, force=False, check_a2_=True) -> IdentReport:
    """Run every algebraic check on ``scm``'s total-effect matrix."""
    C = scm.total_effects()
    pa = scm.parents
    Cn = normalize_columns(C, rank_tol)
    rank_c_pa = numerical_rank(Cn[:, list(pa)], rank_tol) if pa else 0
    if pa:
        a1 = rank_c_pa == len(pa)
        a3, w3 = check_a3(C, pa, rank_tol)
    else:
        a1, a3, w3 = True, True, None
    a2 = w2 = None
    size = None
    if check_a2_:
        size = min(scm.d, max(DEFAULT_S_MAX, len(pa))) if a2_max_size is None else a2_max_size
        a2, w2 = check_a2(C, pa, scm.beta_star[list(pa)], size, rank_tol, force)
    return IdentReport(
        a1=a1,
        rank_c_pa=rank_c_pa,
        a2=a2,
        a2_witness=w2,
        a2_max_size=size,
        a3=a3,
        a3_witness=w3,
        per_coordinate=partial_identifiability(C, rank_tol),
        solution_space_dim=scm.d - numerical_rank(Cn, rank_tol),
        pa_y=pa,
    )


def population_identified_estimates(scm: Scm, rank_tol=RANK_TOL):
    _, cov_IX, cov_IY = population_covariances(scm)
    return identified_coordinate_estimates(cov_IX, cov_IY, rank_tol)
