import csv
import json

import numpy as np
import pytest

from spaceiv import bench
from spaceiv.bench import (
    A1_AND_A3,
    GROUPS,
    NONE,
    RECORD_FIELDS,
    SUMMARY_FIELDS,
    BenchConfig,
    BenchRecord,
    classify_assumptions,
    generate_random_model,
    model_seed,
    run_benchmark,
    run_model,
    summarize,
)
from spaceiv.model import Scm

SMALL = BenchConfig(d=6, m=4, n_models=6, sample_sizes=(60, 200), s_max=2)


class TestModelGeneration:
    @pytest.mark.parametrize("model_id", range(10))
    def test_invariants(self, model_id):
        cfg = BenchConfig()
        scm = generate_random_model(cfg, model_seed(cfg, model_id))
        B = scm.B
        # a permuted lower-triangular structure with every edge present
        order = np.argsort((B != 0).sum(axis=1))
        assert np.all(np.triu(B[np.ix_(order, order)]) == 0)
        assert (B != 0).sum() == cfg.d * (cfg.d - 1) // 2
        row_max = np.abs(B).max(axis=1)
        np.testing.assert_allclose(row_max[row_max > 0], 1.0)
        assert np.all(np.diag(scm.A[: cfg.m, : cfg.m]) == 1.0)
        assert set(np.unique(scm.A)) <= {0.0, 1.0}
        assert np.count_nonzero(scm.beta_star) == 2 and set(scm.beta_star[scm.beta_star != 0]) == {1.0}
        assert scm.noise.confounder_dim == cfg.q

    def test_seeded(self):
        cfg = BenchConfig()
        a = generate_random_model(cfg, model_seed(cfg, 3))
        b = generate_random_model(cfg, model_seed(cfg, 3))
        c = generate_random_model(cfg, model_seed(cfg, 4))
        assert np.array_equal(a.B, b.B) and np.array_equal(a.A, b.A)
        assert not np.array_equal(a.B, c.B)


class TestClassification:
    def test_three_groups(self):
        assert GROUPS == ("A1_and_A3", "A1_only", "none")

    def test_duplicate_parent_columns_are_not_valid(self):
        # parents X1 and X2 receive identical instrument effects
        A = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        scm = Scm(B=np.zeros((3, 3)), A=A, beta_star=np.array([1.0, 1.0, 0.0]))
        assert classify_assumptions(scm) == NONE

    def test_shared_image_is_a1_only(self):
        A = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
        scm = Scm(B=np.zeros((3, 3)), A=A, beta_star=np.array([1.0, 1.0, 0.0]))
        assert classify_assumptions(scm) == "A1_only"

    def test_valid_model(self):
        A = np.eye(3)
        scm = Scm(B=np.zeros((3, 3)), A=A, beta_star=np.array([1.0, 1.0, 0.0]))
        assert classify_assumptions(scm) == A1_AND_A3


class TestRuns:
    def test_record_layout(self):
        scm, group, records = run_model(SMALL, 0)
        assert group in GROUPS
        assert len(records) == len(SMALL.sample_sizes) * len(SMALL.methods)
        assert all(r.error is None for r in records)
        for r in records:
            assert r.rmse >= 0 and r.correct_support <= r.correct_sparsity

    def test_serial_and_parallel_agree(self):
        a = run_benchmark(SMALL, jobs=1)
        b = run_benchmark(SMALL, jobs=2)
        assert a.records == b.records and a.groups == b.groups

    def test_seed_changes_results(self):
        a = run_benchmark(SMALL)
        b = run_benchmark(BenchConfig(**{**SMALL.to_dict(), "master_seed": 1}))
        assert [r.rmse for r in a.records] != [r.rmse for r in b.records]

    def test_method_subset(self):
        cfg = BenchConfig(**{**SMALL.to_dict(), "methods": ["spaceIV"], "n_models": 2})
        res = run_benchmark(cfg)
        assert {r.method for r in res.records} == {"spaceIV"}

    def test_config_validation(self):
        with pytest.raises(ValueError):
            BenchConfig(methods=("lasso",))
        with pytest.raises(ValueError):
            BenchConfig(sample_sizes=(100, 50))
        with pytest.raises(ValueError):
            BenchConfig(sample_sizes=(5,))
        with pytest.raises(ValueError):
            BenchConfig(alpha=2.0)
        assert BenchConfig.from_dict(SMALL.to_dict()) == SMALL

    def test_full_scale(self):
        assert bench.full_scale(SMALL).n_models == 2000


class TestSummary:
    def test_type7_quantiles(self):
        recs = [BenchRecord(i, A1_AND_A3, 60, "spaceIV", float(v), True, True)
                for i, v in enumerate([1.0, 2.0, 4.0, 8.0])]
        cfg = BenchConfig(**{**SMALL.to_dict(), "sample_sizes": [60], "methods": ["spaceIV"]})
        (row,) = summarize(recs, cfg)
        assert row["rmse_median"] == 3.0
        assert row["rmse_q25"] == 1.75 and row["rmse_q75"] == 5.0
        assert row["rmse_min"] == 1.0 and row["rmse_max"] == 8.0

    def test_failures_are_excluded_from_quantiles(self):
        recs = [BenchRecord(0, NONE, 60, "spaceIV", np.nan, False, False, error="x"),
                BenchRecord(1, NONE, 60, "spaceIV", 2.0, True, False)]
        cfg = BenchConfig(**{**SMALL.to_dict(), "sample_sizes": [60], "methods": ["spaceIV"]})
        (row,) = summarize(recs, cfg)
        assert row["failures"] == 1 and row["rmse_median"] == 2.0
        assert row["frac_correct_sparsity"] == 0.5

    def test_written_files(self, tmp_path):
        res = run_benchmark(SMALL, keep_models=True)
        paths = res.write(tmp_path)
        assert set(paths) == {
            "records", "summary", "rmse_valid_liml", "sparsity_valid_liml", "rmse_by_group_liml",
            "groups", "models", "config",
        }
        with open(paths["records"]) as fh:
            rows = list(csv.reader(fh))
        assert tuple(rows[0]) == RECORD_FIELDS
        assert len(rows) == 1 + len(res.records)
        with open(paths["summary"]) as fh:
            header = next(csv.reader(fh))
        assert tuple(header) == SUMMARY_FIELDS
        with open(paths["sparsity_valid_liml"]) as fh:
            sparsity = list(csv.DictReader(fh))
        assert {r["method"] for r in sparsity} <= {"spaceIV"}
        assert {r["group"] for r in sparsity} <= {A1_AND_A3}
        with open(paths["rmse_by_group_liml"]) as fh:
            groups = list(csv.DictReader(fh))
        assert len(groups) == len(res.summary())
        assert json.load(open(paths["config"])) == SMALL.to_dict()
        models = json.load(open(paths["models"]))
        assert Scm.from_dict(models["0"]).d == SMALL.d

    def test_tsls_table_names(self):
        assert set(bench.figure_names("tsls").values()) == {
            "rmse_valid_tsls", "sparsity_valid_tsls", "rmse_by_group_tsls"
        }
