"""Command-line interface: ``spaceiv {simulate,check,fit,subset,bench,example}``.

Results go to stdout (or ``--out``) as JSON or CSV. Failures exit with a
non-zero status and a one-line JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings

import numpy as np

from . import bench, catalog, graph, identifiability
from .estimators import LIML, TSLS, ModelViolationWarning, TestConfig, ols_sparse, space_iv, subset_intersection
from .model import Dataset, Scm, sample_dataset

EXIT_ERROR = 1


def _read_text(path):
    if path == "-":
        return sys.stdin.read()
    with open(path) as fh:
        return fh.read()


def _emit(text, out=None):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_json(obj, out=None):
    _emit(json.dumps(obj, indent=2) + "\n", out)


def _load_dataset(path):
    if path == "-":
        return Dataset.from_csv(sys.stdin)
    with open(path, newline="") as fh:
        return Dataset.from_csv(fh)


def _load_structure(path):
    """A model JSON (has ``B``) or a graph JSON (has ``edges``)."""
    payload = json.loads(_read_text(path))
    if "edges" in payload:
        return graph.CausalGraph.from_dict(payload)
    return Scm.from_dict(payload)


def _test_config(args):
    return TestConfig(
        alpha=args.alpha,
        s_max=args.smax,
        stage_estimator=args.estimator,
        df_convention=args.df_convention,
        test_empty=getattr(args, "test_empty", False),
        center=getattr(args, "center", False),
    )


def cmd_simulate(args):
    scm = Scm.from_json(_read_text(args.model))
    data = sample_dataset(scm, args.n, args.seed)
    _emit(data.to_csv(), args.out)


def _genericity(g, draws, seed):
    rng = np.random.default_rng(seed)
    passed = 0
    for _ in range(draws):
        A, B, beta = graph.random_coefficients(g, rng)
        scm = Scm(B=B, A=A, beta_star=beta)
        C = scm.total_effects()
        pa = scm.parents
        if identifiability.check_a1(C, pa) and identifiability.check_a3(C, pa)[0]:
            passed += 1
    return {"draws": draws, "A1_and_A3": passed, "fraction": passed / draws if draws else None}


def cmd_check(args):
    structure = _load_structure(args.input)
    if args.graphical or isinstance(structure, graph.CausalGraph):
        g = structure if isinstance(structure, graph.CausalGraph) else graph.from_scm(structure)
        out = graph.check_b_conditions(g, force=args.force).to_dict()
        if args.monte_carlo:
            out["monte_carlo"] = _genericity(g, args.monte_carlo, args.seed)
    else:
        out = identifiability.identify(structure, a2_max_size=args.a2_max_size, force=args.force).to_dict()
        if args.monte_carlo:
            out["monte_carlo"] = _genericity(graph.from_scm(structure), args.monte_carlo, args.seed)
    _emit_json(out, args.out)


def cmd_fit(args):
    data = _load_dataset(args.data)
    if args.method == "ols-sparse":
        fit = ols_sparse(data, args.smax)
    else:
        with warnings.catch_warnings(record=True):
            warnings.simplefilter("always", ModelViolationWarning)
            fit = space_iv(data, _test_config(args))
    _emit_json(fit.to_dict(), args.out)


def cmd_subset(args):
    data = _load_dataset(args.data)
    found = subset_intersection(data, _test_config(args), mode=args.mode, k=args.k)
    _emit_json({"mode": args.mode, "k": args.k, "set": sorted(j + 1 for j in found)}, args.out)


def _bench_config(args):
    payload = json.loads(_read_text(args.config)) if args.config else {}
    overrides = {
        "master_seed": args.seed,
        "n_models": args.models,
        "sample_sizes": None if args.sizes is None else [int(s) for s in args.sizes.split(",")],
        "alpha": args.alpha,
        "s_max": args.smax,
        "stage_estimator": args.estimator,
        "df_convention": args.df_convention,
        "methods": None if args.methods is None else args.methods.split(","),
    }
    payload.update({k: v for k, v in overrides.items() if v is not None})
    cfg = bench.BenchConfig.from_dict(payload)
    if args.full:
        cfg = bench.full_scale(cfg)
    return cfg


def cmd_bench(args):
    cfg = _bench_config(args)
    result = bench.run_benchmark(cfg, jobs=args.jobs, keep_models=args.save_models)
    paths = result.write(args.out)
    failures = sum(1 for r in result.records if r.error)
    _emit_json({"config": cfg.to_dict(), "groups": result.group_counts(), "failed_runs": failures, "files": paths})


def cmd_example(args):
    if args.graph:
        _emit(catalog.GRAPHS[args.name]().to_json() + "\n", args.out)
    else:
        _emit(catalog.MODELS[args.name]().to_json() + "\n", args.out)


def _add_test_options(p, with_smax=True):
    p.add_argument("--alpha", type=float, default=0.05)
    if with_smax:
        p.add_argument("--smax", type=int, default=3)
    p.add_argument("--estimator", choices=(LIML, TSLS), default=LIML)
    p.add_argument("--df-convention", choices=("m_then_nm", "nm_then_m"), default="m_then_nm")
    p.add_argument("--center", action="store_true", help="center all columns before testing")


def build_parser():
    parser = argparse.ArgumentParser(prog="spaceiv", description="Sparse causal effect estimation with instruments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="sample a dataset CSV from a model JSON")
    p.add_argument("model")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check", help="identifiability report for a model or graph JSON")
    p.add_argument("input")
    p.add_argument("--graphical", action="store_true", help="graph criteria instead of the rank checks")
    p.add_argument("--monte-carlo", type=int, default=0, metavar="R",
                   help="also draw R random coefficient sets on the graph")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--a2-max-size", type=int)
    p.add_argument("--force", action="store_true", help="lift the enumeration size guards")
    p.add_argument("--out")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("fit", help="fit a dataset CSV")
    p.add_argument("data")
    p.add_argument("--method", choices=("spaceiv", "ols-sparse"), default="spaceiv")
    p.add_argument("--test-empty", action="store_true", help="also test the empty support")
    _add_test_options(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("subset", help="intersection of accepted supports")
    p.add_argument("data")
    p.add_argument("--mode", choices=("minimal", "fixed_size"), default="minimal")
    p.add_argument("--k", type=int)
    _add_test_options(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_subset)

    p = sub.add_parser("bench", help="random-model simulation study")
    p.add_argument("--config", help="BenchConfig JSON; flags override its fields")
    p.add_argument("--seed", type=int)
    p.add_argument("--models", type=int)
    p.add_argument("--sizes", help="comma-separated sample sizes")
    p.add_argument("--alpha", type=float)
    p.add_argument("--smax", type=int)
    p.add_argument("--estimator", choices=(LIML, TSLS))
    p.add_argument("--df-convention", choices=("m_then_nm", "nm_then_m"))
    p.add_argument("--methods", help="comma-separated subset of " + ",".join(bench.METHODS))
    p.add_argument("--full", action="store_true", help=f"{bench.FULL_MODELS} models")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--save-models", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("example", help="print a built-in model or graph as JSON")
    p.add_argument("name", choices=sorted(set(catalog.MODELS) | set(catalog.GRAPHS)))
    p.add_argument("--graph", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_example)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "example":
            table = catalog.GRAPHS if args.graph else catalog.MODELS
            if args.name not in table:
                raise ValueError(f"no {'graph' if args.graph else 'model'} named {args.name!r}")
        args.func(args)
    except (ValueError, KeyError, OSError, TypeError) as exc:
        # SpaceIVError derives from ValueError
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return EXIT_ERROR
    return 0


if __name__ == "__main__":
    sys.exit(main())
