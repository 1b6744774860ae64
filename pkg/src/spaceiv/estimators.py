"""Anderson-Rubin test, LIML/TSLS subset fits and the sparse IV search.

The search fits every support of a given size, keeps the one with the
smallest Anderson-Rubin statistic and accepts the sparsity level as soon
as that statistic falls below the F critical value.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import kernels
from .errors import (
    DegenerateResidual,
    EigenFailure,
    NormalizationFailure,
    RankDeficientFirstStage,
    RankDeficientInstruments,
    SpaceIVError,
)
from .fdist import ar_threshold
from .model import Dataset, Scm, empirical_covariances, population_covariances, population_moments

LIML = "liml"
TSLS = "tsls"


class ModelViolationWarning(UserWarning):
    """No sparsity level up to ``s_max`` passed the Anderson-Rubin test."""


@dataclass(frozen=True)
class TestConfig:
    alpha: float = 0.05
    s_max: int = 3
    stage_estimator: str = LIML
    df_convention: str = "m_then_nm"
    test_empty: bool = False
    center: bool = False

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.s_max < 1:
            raise ValueError("s_max must be at least 1")
        if self.stage_estimator not in (LIML, TSLS):
            raise ValueError(f"stage_estimator must be {LIML!r} or {TSLS!r}")
        if self.df_convention not in ("m_then_nm", "nm_then_m"):
            raise ValueError("df_convention must be 'm_then_nm' or 'nm_then_m'")

    def validate_for(self, d):
        if self.s_max > d:
            raise ValueError(f"s_max={self.s_max} exceeds d={d}")


@dataclass(frozen=True)
class LevelRecord:
    s: int
    support: tuple
    statistic: float
    threshold: float
    accepted: bool
    failed: tuple = ()


@dataclass(frozen=True)
class FitResult:
    beta_hat: np.ndarray
    support: tuple
    statistic: float
    threshold: float
    accepted: bool
    sparsity_path: tuple = ()
    warning: bool = False
    method: str = "spaceIV"

    def __post_init__(self):
        beta = np.asarray(self.beta_hat, dtype=float)
        object.__setattr__(self, "beta_hat", beta)
        object.__setattr__(self, "support", tuple(int(j) for j in np.flatnonzero(beta)))

    def to_dict(self):
        """JSON-ready view; supports are reported with 1-based column labels."""
        return {
            "method": self.method,
            "beta": [float(b) for b in self.beta_hat],
            "support": [j + 1 for j in self.support],
            "statistic": _num(self.statistic),
            "threshold": _num(self.threshold),
            "accepted": bool(self.accepted),
            "warning": bool(self.warning),
            "path": [
                {
                    "s": r.s,
                    "support": [j + 1 for j in r.support],
                    "statistic": _num(r.statistic),
                    "threshold": _num(r.threshold),
                    "accepted": r.accepted,
                    "failed_subsets": [[j + 1 for j in S] for S in r.failed],
                }
                for r in self.sparsity_path
            ],
        }


def _num(x):
    x = float(x)
    return x if np.isfinite(x) else None


def _subset_array(d, size):
    """All ``size``-subsets of ``range(d)`` as rows of a ``(k, size)`` array."""
    rows = list(itertools.combinations(range(d), size))
    return np.array(rows, dtype=np.intp).reshape(len(rows), size)


def _as_arrays(X, Y, I):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    I = np.asarray(I, dtype=float)
    if I.ndim == 1:
        I = I[:, None]
    Y = np.asarray(Y, dtype=float).reshape(-1)
    if not X.shape[0] == I.shape[0] == Y.shape[0]:
        raise ValueError(f"row mismatch: X {X.shape}, Y {Y.shape}, I {I.shape}")
    return X, Y, I


def _project(I, V):
    """Projection of the columns of ``V`` onto ``im(I)``."""
    G = I.T @ I
    try:
        c, low = scipy.linalg.cho_factor(G)
    except np.linalg.LinAlgError as exc:
        raise RankDeficientInstruments("I^T I is singular") from exc
    if np.linalg.cond(G) > 1e14:
        raise RankDeficientInstruments("I^T I is numerically singular")
    return I @ scipy.linalg.cho_solve((c, low), I.T @ V)


def ar_statistic(X, Y, I, beta) -> float:
    """Anderson-Rubin statistic ``(r'P r)/(r'(Id-P) r) * (n-m)/m`` of ``r = Y - X beta``."""
    X, Y, I = _as_arrays(X, Y, I)
    n, m = I.shape
    if n <= m:
        raise ValueError("need n > m")
    r = Y - X @ np.asarray(beta, dtype=float).reshape(-1)
    Pr = _project(I, r)
    rr = r @ r
    den = (r - Pr) @ (r - Pr)
    if rr == 0 or den <= 1e-12 * rr:
        raise DegenerateResidual("residual lies in the column space of I")
    return float((r @ Pr) / den * (n - m) / m)


def _pencil(X_S, Y, I):
    W = np.column_stack([Y, X_S])
    PW = _project(I, W)
    R = W - PW
    return PW.T @ PW, R.T @ R


def liml(X_S, Y, I) -> np.ndarray:
    """LIML coefficients on the columns ``X_S``: the minimizer of the
    Anderson-Rubin statistic over coefficient vectors supported there."""
    X_S, Y, I = _as_arrays(X_S, Y, I)
    if X_S.shape[1] < 1:
        raise ValueError("need at least one regressor")
    gp, gm = _pencil(X_S, Y, I)
    try:
        w, V = scipy.linalg.eigh(gp, gm)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenFailure(str(exc)) from exc
    v = V[:, 0]
    if abs(v[0]) < 1e-12 * np.linalg.norm(v):
        raise NormalizationFailure("minimizing eigenvector has no response component")
    return -v[1:] / v[0]


def tsls(X_S, Y, I) -> np.ndarray:
    """Two-stage least squares ``(X_S' P X_S)^{-1} X_S' P Y``."""
    X_S, Y, I = _as_arrays(X_S, Y, I)
    PX = _project(I, X_S)
    G = PX.T @ X_S
    if np.linalg.matrix_rank(G) < G.shape[0]:
        raise RankDeficientFirstStage("X_S' P X_S is singular")
    return np.linalg.solve(G, PX.T @ Y)


class _Grams:
    """Per-dataset sufficient statistics for the subset scans."""

    def __init__(self, data: Dataset):
        W = np.column_stack([data.Y, data.X])
        PW = _project(data.I, W)
        R = W - PW
        self.gp = PW.T @ PW
        self.gm = R.T @ R
        self.n, self.m, self.d = data.n, data.m, data.d

    def scan(self, size, estimator):
        subsets = _subset_array(self.d, size)
        subsets = subsets.reshape(-1, size)
        if estimator == LIML:
            ratios, betas = kernels.liml_scan(self.gp, self.gm, subsets)
        else:
            ratios, betas = kernels.tsls_scan(self.gp, self.gm, subsets)
        return subsets, ratios * (self.n - self.m) / self.m, betas

    def empty_statistic(self):
        den = self.gm[0, 0]
        if den <= 1e-12 * (self.gp[0, 0] + den):
            raise DegenerateResidual("response lies in the column space of I")
        return self.gp[0, 0] / den * (self.n - self.m) / self.m


class _PopulationGrams(_Grams):
    """Population analogue: per-observation Gram matrices of the projected
    and residual parts of ``W = (Y, X)``."""

    def __init__(self, scm: Scm):
        cov_I, cov_IW, cov_W = population_moments(scm)
        self.gp = cov_IW.T @ np.linalg.pinv(cov_I) @ cov_IW
        self.gm = cov_W - self.gp
        # the ratio is reported unscaled
        self.n, self.m, self.d = 2, 1, scm.d


def space_iv_population(scm: Scm, s_max=3, estimator=LIML, tol=1e-9) -> FitResult:
    """Large-sample limit of :func:`space_iv`: a level is accepted when the
    smallest population ratio of explained to unexplained moment variance
    is zero (below ``tol``), since the critical value divided by ``n``
    vanishes while the statistic divided by ``n`` converges to that ratio."""
    grams = _PopulationGrams(scm)
    cfg = TestConfig(s_max=s_max, stage_estimator=estimator)
    cfg.validate_for(scm.d)
    path = []
    beta_hat = np.zeros(scm.d)
    stat, accepted = np.nan, False
    for s in range(1, s_max + 1):
        S, stat, b, failed = _best_of_level(grams, s, cfg)
        accepted = stat <= tol
        path.append(LevelRecord(s, S, stat, tol, accepted, failed))
        beta_hat = np.zeros(scm.d)
        beta_hat[list(S)] = b
        if accepted:
            break
    return FitResult(beta_hat, (), stat, tol, accepted, tuple(path), warning=not accepted)


def _prepare(data, cfg):
    cfg.validate_for(data.d)
    if cfg.center:
        data = data.centered()
    return data, ar_threshold(cfg.alpha, data.n, data.m, cfg.df_convention)


def _best_of_level(grams, s, cfg):
    subsets, stats, betas = grams.scan(s, cfg.stage_estimator)
    ok = np.isfinite(stats)
    failed = tuple(tuple(int(j) for j in row) for row in subsets[~ok])
    if not ok.any():
        raise SpaceIVError(f"every subset of size {s} failed to fit")
    # argmin over finite entries; ties go to the lexicographically first support
    best = int(np.flatnonzero(ok)[np.argmin(stats[ok])])
    return tuple(int(j) for j in subsets[best]), float(stats[best]), betas[best], failed


def space_iv(data: Dataset, cfg: TestConfig = TestConfig()) -> FitResult:
    """Sparsest support whose best fit passes the Anderson-Rubin test.

    If no level up to ``cfg.s_max`` is accepted, the fit at ``s_max`` is
    returned with ``accepted=False`` and a :class:`ModelViolationWarning`.
    """
    data, threshold = _prepare(data, cfg)
    grams = _Grams(data)
    d = data.d
    path = []
    if cfg.test_empty:
        stat = grams.empty_statistic()
        accepted = stat <= threshold
        path.append(LevelRecord(0, (), stat, threshold, accepted))
        if accepted:
            return FitResult(np.zeros(d), (), stat, threshold, True, tuple(path))
    beta_hat = np.zeros(d)
    stat = np.nan
    accepted = False
    for s in range(1, cfg.s_max + 1):
        S, stat, b, failed = _best_of_level(grams, s, cfg)
        accepted = stat <= threshold
        path.append(LevelRecord(s, S, stat, threshold, accepted, failed))
        beta_hat = np.zeros(d)
        beta_hat[list(S)] = b
        if accepted:
            break
    if not accepted:
        warnings.warn(
            f"no support of size <= {cfg.s_max} passed the Anderson-Rubin test; "
            "the model assumptions may be violated",
            ModelViolationWarning,
            stacklevel=2,
        )
    return FitResult(beta_hat, (), stat, threshold, accepted, tuple(path), warning=not accepted)


def accepted_supports(data: Dataset, size: int, cfg: TestConfig = TestConfig()):
    """All supports of ``size`` whose best fit passes the test."""
    data, threshold = _prepare(data, cfg)
    grams = _Grams(data)
    subsets, stats, _ = grams.scan(size, cfg.stage_estimator)
    keep = np.isfinite(stats) & (stats <= threshold)
    return [tuple(int(j) for j in row) for row in subsets[keep]]


def subset_intersection(data: Dataset, cfg: TestConfig = TestConfig(), mode="minimal", k=None) -> frozenset:
    """Intersection of accepted supports.

    ``mode="fixed_size"`` intersects the accepted supports of size ``k``;
    ``mode="minimal"`` uses the smallest size (up to ``cfg.s_max``) with
    any accepted support. An empty collection yields the empty set.
    """
    if mode == "fixed_size":
        if k is None:
            raise ValueError("fixed_size mode needs k")
        sizes = [int(k)]
    elif mode == "minimal":
        sizes = range(1, cfg.s_max + 1)
    else:
        raise ValueError("mode must be 'fixed_size' or 'minimal'")
    data, threshold = _prepare(data, cfg)
    grams = _Grams(data)
    for size in sizes:
        subsets, stats, _ = grams.scan(size, cfg.stage_estimator)
        keep = np.isfinite(stats) & (stats <= threshold)
        if keep.any():
            sets = [frozenset(int(j) for j in row) for row in subsets[keep]]
            return frozenset.intersection(*sets)
    return frozenset()


def _aic(rss, n, s):
    return n * np.log(rss / n) + 2 * (s + 1)


def ols_sparse(data: Dataset, s_max: int = 3) -> FitResult:
    """Best-subset OLS over sizes ``0..s_max`` selected by
    ``AIC = n log(RSS/n) + 2 (s + 1)``."""
    n, d = data.n, data.d
    if n <= d:
        raise ValueError("OLS-sparse needs n > d")
    W = np.column_stack([data.Y, data.X])
    G = W.T @ W
    best = (np.inf, (), np.zeros(0))
    path = []
    for s in range(0, s_max + 1):
        subsets = _subset_array(d, s)
        rss, betas = kernels.ls_scan(G, subsets)
        # Gram-based RSS loses digits near zero; floor it at machine precision
        rss = np.maximum(rss, np.finfo(float).eps * G[0, 0])
        aic = _aic(rss, n, s)
        aic[~np.isfinite(aic)] = np.inf
        i = int(np.argmin(aic))
        if np.isfinite(aic[i]):
            path.append(LevelRecord(s, tuple(int(j) for j in subsets[i]), float(aic[i]), np.nan, False))
            if aic[i] < best[0]:
                best = (float(aic[i]), tuple(int(j) for j in subsets[i]), betas[i])
    beta_hat = np.zeros(d)
    beta_hat[list(best[1])] = best[2]
    return FitResult(
        beta_hat, best[1], best[0], np.nan, True, tuple(path), method="OLS-sparse"
    )


def _moment_system(source):
    if isinstance(source, Scm):
        _, cov_IX, cov_IY = population_covariances(source)
    else:
        cov_IX, cov_IY = empirical_covariances(source)
    return cov_IX, cov_IY


def oracle_fit(source, pa, mode="known_set") -> FitResult:
    """Moment-equation fits that are told the parents (``known_set``) or
    only their number (``known_size``); benchmark use only.

    ``source`` is a :class:`Dataset` or, for population mode, an :class:`Scm`.
    """
    cov_IX, cov_IY = _moment_system(source)
    d = cov_IX.shape[1]
    pa = tuple(sorted(int(j) for j in pa))
    if mode == "known_set":
        candidates = [pa]
        method = "oracle-set"
    elif mode == "known_size":
        candidates = list(itertools.combinations(range(d), len(pa)))
        method = "oracle-size"
    else:
        raise ValueError("mode must be 'known_set' or 'known_size'")
    best = (np.inf, (), None)
    if mode == "known_size" and len(pa) > 0:
        g = np.column_stack([cov_IY, cov_IX])
        G = g.T @ g
        subsets = np.array(candidates, dtype=np.intp)
        losses, betas = kernels.ls_scan(G, subsets)
        for i, S in enumerate(candidates):
            if np.isfinite(losses[i]):
                loss, b = max(losses[i], 0.0), betas[i]
            else:
                b, loss = _lstsq_loss(cov_IX[:, list(S)], cov_IY)
            if loss < best[0]:
                best = (loss, S, b)
    else:
        for S in candidates:
            b, loss = _lstsq_loss(cov_IX[:, list(S)], cov_IY)
            if loss < best[0]:
                best = (loss, S, b)
    beta_hat = np.zeros(d)
    if best[1]:
        beta_hat[list(best[1])] = best[2]
    return FitResult(beta_hat, best[1], float(best[0]), np.nan, True, (), method=method)


def _lstsq_loss(M, v):
    if M.shape[1] == 0:
        return np.zeros(0), float(v @ v)
    b, *_ = np.linalg.lstsq(M, v, rcond=None)
    r = v - M @ b
    return b, float(r @ r)

