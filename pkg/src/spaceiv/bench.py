"""Random-model simulation study: model generation, assumption groups,
batched fits and summary tables.

Every random quantity is drawn from a :class:`numpy.random.SeedSequence`
keyed by ``(master_seed, model_id)`` for the model and
``(master_seed, model_id, n)`` for the data, so results do not depend on
the order in which models are processed or on the number of workers.
"""

from __future__ import annotations

import csv
import json
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import identifiability
from .estimators import LIML, TSLS, ModelViolationWarning, TestConfig, ols_sparse, oracle_fit, space_iv
from .model import NoiseSpec, Scm, sample_dataset

SPACE_IV = "spaceIV"
OLS_SPARSE = "OLS-sparse"
ORACLE_SIZE = "oracle-size"
ORACLE_SET = "oracle-set"
METHODS = (SPACE_IV, OLS_SPARSE, ORACLE_SIZE, ORACLE_SET)

A1_AND_A3 = "A1_and_A3"
A1_ONLY = "A1_only"
NONE = "none"
GROUPS = (A1_AND_A3, A1_ONLY, NONE)

DEFAULT_SIZES = (50, 100, 200, 400, 800, 1600)
FULL_MODELS = 2000

RECORD_FIELDS = ("model_id", "group", "n", "method", "rmse", "correct_sparsity", "correct_support")
SUMMARY_FIELDS = (
    "method", "n", "group", "count", "failures",
    "rmse_median", "rmse_q25", "rmse_q75", "rmse_min", "rmse_max",
    "frac_correct_sparsity", "frac_correct_support",
)

# model-level and data-level streams are kept apart by a leading tag
_MODEL_STREAM = 0
_DATA_STREAM = 1


@dataclass(frozen=True)
class BenchConfig:
    d: int = 20
    m: int = 10
    q: int = 1
    n_models: int = 200
    sample_sizes: tuple = DEFAULT_SIZES
    s_max: int = 3
    alpha: float = 0.05
    methods: tuple = METHODS
    stage_estimator: str = LIML
    df_convention: str = "m_then_nm"
    master_seed: int = 0
    n_parents: int = 2
    edge_low: float = 0.5
    edge_high: float = 1.5
    instrument_density: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "sample_sizes", tuple(int(n) for n in self.sample_sizes))
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.n_models < 1:
            raise ValueError("n_models must be at least 1")
        if not self.sample_sizes or any(b <= a for a, b in zip(self.sample_sizes, self.sample_sizes[1:])):
            raise ValueError("sample_sizes must be non-empty and strictly increasing")
        if self.sample_sizes[0] <= self.m:
            raise ValueError("every sample size must exceed m")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
        if self.stage_estimator not in (LIML, TSLS):
            raise ValueError(f"stage_estimator must be {LIML!r} or {TSLS!r}")
        if not 0 < self.n_parents <= self.d:
            raise ValueError("n_parents must lie in 1..d")
        if self.s_max > self.d:
            raise ValueError("s_max cannot exceed d")
        # raises on a bad alpha or df convention
        self.test_config()

    def test_config(self) -> TestConfig:
        return TestConfig(
            alpha=self.alpha,
            s_max=self.s_max,
            stage_estimator=self.stage_estimator,
            df_convention=self.df_convention,
        )

    def to_dict(self):
        out = asdict(self)
        out["sample_sizes"] = list(self.sample_sizes)
        out["methods"] = list(self.methods)
        return out

    @classmethod
    def from_dict(cls, payload):
        return cls(**payload)


@dataclass(frozen=True)
class BenchRecord:
    model_id: int
    group: str
    n: int
    method: str
    rmse: float
    correct_sparsity: bool
    correct_support: bool
    wall_time: float = field(default=0.0, compare=False)
    error: str = None

    def row(self):
        return [
            self.model_id,
            self.group,
            self.n,
            self.method,
            repr(float(self.rmse)),
            int(self.correct_sparsity),
            int(self.correct_support),
        ]


def model_seed(cfg: BenchConfig, model_id: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([cfg.master_seed, _MODEL_STREAM, model_id])


def data_seed(cfg: BenchConfig, model_id: int, n: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([cfg.master_seed, _DATA_STREAM, model_id, n])


def generate_random_model(cfg: BenchConfig, seed) -> Scm:
    """Random model with a fully connected predictor DAG, sparse binary
    instrument loadings and ``cfg.n_parents`` unit causal coefficients."""
    rng = np.random.default_rng(seed)
    d, m = cfg.d, cfg.m
    order = rng.permutation(d)
    position = np.empty(d, dtype=int)
    position[order] = np.arange(d)
    lower = position[:, None] > position[None, :]  # j precedes i in the order
    magnitude = rng.uniform(cfg.edge_low, cfg.edge_high, size=(d, d))
    sign = rng.choice([-1.0, 1.0], size=(d, d))
    B = np.where(lower, sign * magnitude, 0.0)
    scale = np.abs(B).max(axis=1)
    scale[scale == 0] = 1.0
    B = B / scale[:, None]

    A = rng.binomial(1, cfg.instrument_density, size=(d, m)).astype(float)
    k = min(d, m)
    A[np.arange(k), np.arange(k)] = 1.0

    beta = np.zeros(d)
    beta[rng.choice(d, size=cfg.n_parents, replace=False)] = 1.0
    return Scm(B=B, A=A, beta_star=beta, noise=NoiseSpec(d=d, confounder_dim=cfg.q))


def classify_assumptions(scm: Scm, rank_tol=identifiability.RANK_TOL) -> str:
    """Group label from the rank conditions on the population ``C``; the
    non-cancellation condition is not checked."""
    C = scm.total_effects()
    pa = scm.parents
    if not identifiability.check_a1(C, pa, rank_tol=rank_tol):
        return NONE
    a3, _ = identifiability.check_a3(C, pa, rank_tol=rank_tol)
    return A1_AND_A3 if a3 else A1_ONLY


def _fit(method, data, scm, cfg, test_cfg):
    if method == SPACE_IV:
        return space_iv(data, test_cfg)
    if method == OLS_SPARSE:
        return ols_sparse(data, cfg.s_max)
    if method == ORACLE_SIZE:
        return oracle_fit(data, scm.parents, mode="known_size")
    return oracle_fit(data, scm.parents, mode="known_set")


def run_model(cfg: BenchConfig, model_id: int):
    """All records for one model; a pure function of ``(cfg, model_id)``."""
    scm = generate_random_model(cfg, model_seed(cfg, model_id))
    group = classify_assumptions(scm)
    pa = set(scm.parents)
    test_cfg = cfg.test_config()
    records = []
    for n in cfg.sample_sizes:
        data = sample_dataset(scm, n, data_seed(cfg, model_id, n))
        for method in cfg.methods:
            start = time.perf_counter()
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", ModelViolationWarning)
                    fit = _fit(method, data, scm, cfg, test_cfg)
            except Exception as exc:  # recorded, not fatal
                records.append(
                    BenchRecord(model_id, group, n, method, np.nan, False, False,
                                time.perf_counter() - start, f"{type(exc).__name__}: {exc}")
                )
                continue
            elapsed = time.perf_counter() - start
            support = set(fit.support)
            records.append(
                BenchRecord(
                    model_id, group, n, method,
                    float(np.linalg.norm(scm.beta_star - fit.beta_hat)),
                    len(support) == len(pa),
                    support == pa,
                    elapsed,
                )
            )
    return scm, group, records


def _run_model_star(args):
    return run_model(*args)


@dataclass
class BenchResult:
    config: BenchConfig
    groups: dict
    records: list
    models: dict = field(default_factory=dict, repr=False)

    def group_counts(self):
        counts = {g: 0 for g in GROUPS}
        for g in self.groups.values():
            counts[g] += 1
        return counts

    def group_proportions(self):
        total = len(self.groups)
        return {g: c / total for g, c in self.group_counts().items()}

    def select(self, method=None, n=None, group=None):
        return [
            r for r in self.records
            if (method is None or r.method == method)
            and (n is None or r.n == n)
            and (group is None or r.group == group)
        ]

    def summary(self):
        return summarize(self.records, self.config)

    def write(self, out_dir):
        return write_outputs(self, out_dir)


def run_benchmark(cfg: BenchConfig, jobs: int = 1, keep_models=False) -> BenchResult:
    """Fit every method on every model and sample size.

    ``jobs > 1`` distributes models over worker processes; the output is
    identical to a serial run.
    """
    tasks = [(cfg, i) for i in range(cfg.n_models)]
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_model_star, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        results = [_run_model_star(t) for t in tasks]
    groups, records, models = {}, [], {}
    for model_id, (scm, group, recs) in enumerate(results):
        groups[model_id] = group
        records.extend(recs)
        if keep_models:
            models[model_id] = scm
    order = {m: k for k, m in enumerate(METHODS)}
    records.sort(key=lambda r: (r.model_id, r.n, order[r.method]))
    return BenchResult(cfg, groups, records, models)


def _quantiles(values):
    # numpy's default "linear" method is Hyndman-Fan type 7
    return np.percentile(values, [50, 25, 75, 0, 100], method="linear")


def summarize(records, cfg: BenchConfig):
    """One row per ``(method, n, group)`` present in ``cfg``; RMSE
    quantiles ignore failed runs, fractions count failures as wrong."""
    rows = []
    for method in cfg.methods:
        for n in cfg.sample_sizes:
            for group in GROUPS:
                sel = [r for r in records if r.method == method and r.n == n and r.group == group]
                if not sel:
                    continue
                rmse = np.array([r.rmse for r in sel if np.isfinite(r.rmse)])
                q = [float(v) for v in (_quantiles(rmse) if rmse.size else np.full(5, np.nan))]
                rows.append({
                    "method": method,
                    "n": n,
                    "group": group,
                    "count": len(sel),
                    "failures": len(sel) - rmse.size,
                    "rmse_median": q[0],
                    "rmse_q25": q[1],
                    "rmse_q75": q[2],
                    "rmse_min": q[3],
                    "rmse_max": q[4],
                    "frac_correct_sparsity": float(np.mean([r.correct_sparsity for r in sel])),
                    "frac_correct_support": float(np.mean([r.correct_support for r in sel])),
                })
    return rows


def figure_names(stage_estimator):
    """File stems of the RMSE-by-method, sparsity-fraction and by-group
    plot tables, tagged with the first-stage estimator."""
    return {
        "consistency": f"rmse_valid_{stage_estimator}",
        "sparsity": f"sparsity_valid_{stage_estimator}",
        "groups": f"rmse_by_group_{stage_estimator}",
    }


BOX_FIELDS = ("method", "n", "group", "count", "rmse_median", "rmse_q25", "rmse_q75", "rmse_min", "rmse_max")
SPARSITY_FIELDS = ("method", "n", "group", "count", "frac_correct_sparsity")


def figure_tables(summary_rows, cfg: BenchConfig):
    """Plot-data tables: RMSE boxes for all methods on the valid group,
    the spaceIV correct-sparsity fraction on the valid group, and RMSE
    boxes for every method and group."""
    names = figure_names(cfg.stage_estimator)
    valid = [r for r in summary_rows if r["group"] == A1_AND_A3]
    return {
        names["consistency"]: (BOX_FIELDS, valid),
        names["sparsity"]: (SPARSITY_FIELDS, [r for r in valid if r["method"] == SPACE_IV]),
        names["groups"]: (BOX_FIELDS, list(summary_rows)),
    }


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _write_table(path, fields, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for r in rows:
            writer.writerow([_fmt(r[f]) for f in fields])


def write_outputs(result: BenchResult, out_dir):
    """Write records, summary, per-figure tables, group labels and the
    configuration; returns a mapping from table name to path."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {}
    p = os.path.join(out_dir, "records.csv")
    with open(p, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RECORD_FIELDS)
        for r in result.records:
            writer.writerow(r.row())
    paths["records"] = p

    rows = result.summary()
    p = os.path.join(out_dir, "summary.csv")
    _write_table(p, SUMMARY_FIELDS, rows)
    paths["summary"] = p

    for name, (fields, table) in figure_tables(rows, result.config).items():
        p = os.path.join(out_dir, f"{name}.csv")
        _write_table(p, fields, table)
        paths[name] = p

    p = os.path.join(out_dir, "groups.csv")
    _write_table(
        p, ("model_id", "group"),
        [{"model_id": k, "group": g} for k, g in sorted(result.groups.items())],
    )
    paths["groups"] = p

    if result.models:
        p = os.path.join(out_dir, "models.json")
        with open(p, "w") as fh:
            json.dump({str(k): s.to_dict() for k, s in sorted(result.models.items())}, fh)
        paths["models"] = p

    p = os.path.join(out_dir, "config.json")
    with open(p, "w") as fh:
        json.dump(result.config.to_dict(), fh, indent=2)
    paths["config"] = p
    return paths


def full_scale(cfg: BenchConfig) -> BenchConfig:
    return replace(cfg, n_models=FULL_MODELS)
