"""Linear instrumental-variable structural causal models.

The generative model is

    X := B X + A I + H * loading_x + eps_X
    Y := X^T beta + H * loading_y + eps_Y

with ``I``, ``H``, ``eps_X`` and ``eps_Y`` jointly independent. Everything
the identifiability theory needs is captured by the total-effect matrix
``C = A^T (Id - B)^{-T}``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidSampleSize, SingularStructure

RCOND_THRESHOLD = 1e-10

STANDARD_NORMAL = "standard-normal"
UNIT_VECTORS = "discrete-uniform-unit-vectors"
INSTRUMENT_LAWS = (STANDARD_NORMAL, UNIT_VECTORS)


def _frozen(a, ndim, name):
    arr = np.array(a, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must have {ndim} dimension(s), got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


def _check_invertible(M):
    if M.shape[0] == 0:
        return
    with np.errstate(all="ignore"):
        rcond = 1.0 / np.linalg.cond(M)
    if not np.isfinite(rcond) or rcond < RCOND_THRESHOLD:
        raise SingularStructure(
            f"Id - B has reciprocal condition number {rcond:.3g} < {RCOND_THRESHOLD:g}"
        )


@dataclass(frozen=True)
class NoiseSpec:
    """Additive Gaussian noise with a scalar-loaded hidden confounder.

    With ``confounder_dim > 1`` every hidden component carries the same
    loadings, so only their sum enters the model.
    """

    d: int
    confounder_dim: int = 1
    confounder_loading_x: np.ndarray = None
    confounder_loading_y: float = 1.0
    eps_x_scale: np.ndarray = None
    eps_y_scale: float = 1.0
    instrument_law: str = STANDARD_NORMAL

    def __post_init__(self):
        lx = np.ones(self.d) if self.confounder_loading_x is None else self.confounder_loading_x
        sx = np.ones(self.d) if self.eps_x_scale is None else self.eps_x_scale
        object.__setattr__(self, "confounder_loading_x", _frozen(lx, 1, "confounder_loading_x"))
        object.__setattr__(self, "eps_x_scale", _frozen(sx, 1, "eps_x_scale"))
        if self.confounder_loading_x.shape != (self.d,) or self.eps_x_scale.shape != (self.d,):
            raise ValueError("noise vectors must have length d")
        if self.confounder_dim < 0:
            raise ValueError("confounder_dim must be non-negative")
        if np.any(self.eps_x_scale <= 0) or self.eps_y_scale <= 0:
            raise ValueError("noise scales must be strictly positive")
        if self.instrument_law not in INSTRUMENT_LAWS:
            raise ValueError(f"instrument_law must be one of {INSTRUMENT_LAWS}")

    def __eq__(self, other):
        if not isinstance(other, NoiseSpec):
            return NotImplemented
        return self.d == other.d and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(json.dumps(self.to_dict(), sort_keys=True))

    def instrument_covariance(self, m: int) -> np.ndarray:
        """Closed-form ``Cov(I)``."""
        if self.instrument_law == STANDARD_NORMAL:
            return np.eye(m)
        return np.eye(m) / m - np.ones((m, m)) / m**2

    def to_dict(self):
        return {
            "confounder_dim": self.confounder_dim,
            "confounder_loading_x": self.confounder_loading_x.tolist(),
            "confounder_loading_y": float(self.confounder_loading_y),
            "eps_x_scale": self.eps_x_scale.tolist(),
            "eps_y_scale": float(self.eps_y_scale),
            "instrument_law": self.instrument_law,
        }

    @classmethod
    def from_dict(cls, d, payload):
        payload = dict(payload or {})
        return cls(d=d, **payload)


@dataclass(frozen=True)
class Scm:
    """Linear IV SCM with predictor coefficients ``B`` (d x d), instrument
    coefficients ``A`` (d x m) and causal coefficient ``beta_star`` (d,)."""

    B: np.ndarray
    A: np.ndarray
    beta_star: np.ndarray
    noise: NoiseSpec = None

    def __post_init__(self):
        B = _frozen(self.B, 2, "B")
        A = _frozen(self.A, 2, "A")
        beta = _frozen(self.beta_star, 1, "beta_star")
        d, m = A.shape
        if B.shape != (d, d):
            raise ValueError(f"B must be {d}x{d}, got {B.shape}")
        if beta.shape != (d,):
            raise ValueError(f"beta_star must have length {d}, got {beta.shape}")
        _check_invertible(np.eye(d) - B)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "beta_star", beta)
        noise = self.noise if self.noise is not None else NoiseSpec(d=d)
        if noise.d != d:
            raise ValueError("noise specification has the wrong dimension")
        object.__setattr__(self, "noise", noise)

    @property
    def d(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.A.shape[1]

    @property
    def parents(self) -> tuple:
        """0-based indices of the non-zero entries of ``beta_star``."""
        return tuple(int(j) for j in np.flatnonzero(self.beta_star))

    def total_effects(self) -> np.ndarray:
        return total_effect_matrix(self.A, self.B)

    def to_dict(self):
        return {
            "d": self.d,
            "m": self.m,
            "B": self.B.tolist(),
            "A": self.A.tolist(),
            "beta": self.beta_star.tolist(),
            "noise": self.noise.to_dict(),
        }

    def to_json(self, indent=2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, payload) -> "Scm":
        d, m = int(payload["d"]), int(payload["m"])
        A = np.array(payload["A"], dtype=float).reshape(d, m)
        B = np.array(payload["B"], dtype=float).reshape(d, d)
        beta = np.array(payload["beta"], dtype=float).reshape(d)
        return cls(B=B, A=A, beta_star=beta, noise=NoiseSpec.from_dict(d, payload.get("noise")))

    @classmethod
    def from_json(cls, text: str) -> "Scm":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class Dataset:
    """``n`` observations of predictors ``X``, instruments ``I`` and response ``Y``."""

    X: np.ndarray
    I: np.ndarray
    Y: np.ndarray
    column_names: tuple = field(default=None, compare=False)

    def __post_init__(self):
        X = _frozen(self.X, 2, "X")
        I = _frozen(self.I, 2, "I")
        Y = _frozen(self.Y, 1, "Y")
        if not X.shape[0] == I.shape[0] == Y.shape[0]:
            raise ValueError(
                f"X, I and Y need the same number of rows, got {X.shape}, {I.shape}, {Y.shape}"
            )
        if X.shape[0] <= I.shape[1]:
            raise InvalidSampleSize(f"need n > m, got n={X.shape[0]}, m={I.shape[1]}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "I", I)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def m(self) -> int:
        return self.I.shape[1]

    def centered(self) -> "Dataset":
        return Dataset(
            X=self.X - self.X.mean(axis=0),
            I=self.I - self.I.mean(axis=0),
            Y=self.Y - self.Y.mean(),
        )

    def to_csv(self, fh=None):
        """Write ``I1..Im, X1..Xd, Y`` columns; returns the text if ``fh`` is None."""
        out = io.StringIO() if fh is None else fh
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(
            [f"I{k + 1}" for k in range(self.m)] + [f"X{j + 1}" for j in range(self.d)] + ["Y"]
        )
        block = np.column_stack([self.I, self.X, self.Y])
        for row in block:
            writer.writerow([repr(float(v)) for v in row])
        if fh is None:
            return out.getvalue()
        return None

    @classmethod
    def from_csv(cls, fh) -> "Dataset":
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        rows = np.array([[float(v) for v in row] for row in reader if row], dtype=float)
        if rows.size == 0:
            rows = rows.reshape(0, len(header))
        i_cols = [k for k, h in enumerate(header) if h.startswith("I")]
        x_cols = [k for k, h in enumerate(header) if h.startswith("X")]
        if "Y" not in header or not i_cols:
            raise ValueError("CSV needs columns I1..Im, X1..Xd and Y")
        i_cols.sort(key=lambda k: int(header[k][1:]))
        x_cols.sort(key=lambda k: int(header[k][1:]))
        return cls(X=rows[:, x_cols], I=rows[:, i_cols], Y=rows[:, header.index("Y")])


def total_effect_matrix(A, B) -> np.ndarray:
    """Return ``C = A^T (Id - B)^{-T}`` (m x d).

    ``C[i, j]`` is the total effect of instrument ``i`` on ``X^j``.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    d = A.shape[0]
    M = np.eye(d) - B
    _check_invertible(M)
    # C^T = (Id - B)^{-1} A
    return np.linalg.solve(M, A).T


def extended_effect_matrix(A, B, gamma, beta_star) -> np.ndarray:
    """Total effects when predictors may also be children of ``Y``.

    Builds ``B_ext = [[B, gamma], [beta^T, 0]]`` and returns the first ``d``
    columns of ``(A^T, 0) (Id - B_ext)^{-T}``.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    gamma = np.asarray(gamma, dtype=float).reshape(-1)
    beta = np.asarray(beta_star, dtype=float).reshape(-1)
    d, m = A.shape
    B_ext = np.zeros((d + 1, d + 1))
    B_ext[:d, :d] = B
    B_ext[:d, d] = gamma
    B_ext[d, :d] = beta
    A_ext = np.vstack([A, np.zeros((1, m))])
    return total_effect_matrix(A_ext, B_ext)[:, :d]


def _draw_instruments(rng, n, m, law):
    if law == STANDARD_NORMAL:
        return rng.standard_normal((n, m))
    idx = rng.integers(0, m, size=n)
    I = np.zeros((n, m))
    I[np.arange(n), idx] = 1.0
    return I


def sample_dataset(scm: Scm, n: int, seed) -> Dataset:
    """Draw ``n`` i.i.d. observations from ``scm``; a pure function of its inputs."""
    if n <= scm.m:
        raise InvalidSampleSize(f"need n > m, got n={n}, m={scm.m}")
    noise = scm.noise
    rng = np.random.default_rng(seed)
    I = _draw_instruments(rng, n, scm.m, noise.instrument_law)
    H = rng.standard_normal((n, noise.confounder_dim)).sum(axis=1)
    eps_x = rng.standard_normal((n, scm.d)) * noise.eps_x_scale
    eps_y = rng.standard_normal(n) * noise.eps_y_scale
    rhs = I @ scm.A.T + np.outer(H, noise.confounder_loading_x) + eps_x
    X = np.linalg.solve(np.eye(scm.d) - scm.B, rhs.T).T
    Y = X @ scm.beta_star + H * noise.confounder_loading_y + eps_y
    return Dataset(X=X, I=I, Y=Y)


def population_covariances(scm: Scm):
    """Return ``(Cov(I), Cov(I, X), Cov(I, Y))`` in closed form."""
    cov_I = scm.noise.instrument_covariance(scm.m)
    C = scm.total_effects()
    cov_IX = cov_I @ C
    return cov_I, cov_IX, cov_IX @ scm.beta_star


def population_moments(scm: Scm):
    """Closed-form ``(Cov(I), Cov(I, W), Cov(W))`` for ``W = (Y, X)``."""
    d, m = scm.d, scm.m
    noise = scm.noise
    cov_I = noise.instrument_covariance(m)
    inv = np.linalg.inv(np.eye(d) - scm.B)
    lx = noise.confounder_loading_x
    q = noise.confounder_dim
    cov_noise_x = q * np.outer(lx, lx) + np.diag(noise.eps_x_scale**2)
    cov_X = inv @ (scm.A @ cov_I @ scm.A.T + cov_noise_x) @ inv.T
    # covariance of X with the part of Y that does not pass through X
    cross = inv @ lx * (q * noise.confounder_loading_y)
    beta = scm.beta_star
    cov_XY = cov_X @ beta + cross
    var_Y = beta @ cov_X @ beta + 2 * beta @ cross + q * noise.confounder_loading_y**2 + noise.eps_y_scale**2
    cov_W = np.empty((d + 1, d + 1))
    cov_W[0, 0] = var_Y
    cov_W[0, 1:] = cov_XY
    cov_W[1:, 0] = cov_XY
    cov_W[1:, 1:] = cov_X
    cov_IX = cov_I @ scm.total_effects()
    cov_IW = np.column_stack([cov_IX @ beta, cov_IX])
    return cov_I, cov_IW, cov_W


def empirical_covariances(data: Dataset):
    """Sample ``Cov(I, X)`` and ``Cov(I, Y)`` (1/n normalization, centered)."""
    Ic = data.I - data.I.mean(axis=0)
    Xc = data.X - data.X.mean(axis=0)
    Yc = data.Y - data.Y.mean()
    return Ic.T @ Xc / data.n, Ic.T @ Yc / data.n


def moment_residual(source, beta) -> np.ndarray:
    """``Cov(I, Y - X^T beta)`` for a :class:`Dataset` or, in population
    mode, for an :class:`Scm` where it equals ``Cov(I) C (beta* - beta)``."""
    beta = np.asarray(beta, dtype=float).reshape(-1)
    if isinstance(source, Scm):
        if beta.shape != (source.d,):
            raise ValueError(f"beta must have length {source.d}")
        cov_I = source.noise.instrument_covariance(source.m)
        return cov_I @ source.total_effects() @ (source.beta_star - beta)
    if isinstance(source, Dataset):
        if beta.shape != (source.d,):
            raise ValueError(f"beta must have length {source.d}")
        cov_IX, cov_IY = empirical_covariances(source)
        return cov_IY - cov_IX @ beta
    raise TypeError("source must be an Scm or a Dataset")


def support(beta, tol=0.0) -> tuple:
    return tuple(int(j) for j in np.flatnonzero(np.abs(np.asarray(beta)) > tol))


def index_set(indices: Sequence[int], d: int) -> tuple:
    """Validate and sort a set of 0-based predictor indices."""
    out = tuple(sorted({int(j) for j in indices}))
    if out and (out[0] < 0 or out[-1] >= d):
        raise ValueError(f"indices {out} out of range for d={d}")
    return out
