"""Command-line entry point.

Subcommands:
  run <config>    evaluate configured algorithms, write results.csv (+figure)
  sweep <config>  approximation-ratio curve over capacities, write sweep.csv
  check           run the built-in consistency and bound checks
  gen             write a synthetic dataset to file

Exit codes: 0 success, 1 config error, 2 runtime error (including a
failed `check`).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .dataset import Dataset, save_dense, synth_gaussian_mixture
from .distree import check_survival_bound
from .experiment import (
    ExperimentConfig,
    aggregate,
    capacity_sweep,
    emit_csv,
    read_config_pairs,
    run_experiment,
)
from .objectives import ExemplarObjective, LogDetObjective, WeightedCoverageObjective
from .solvers import (
    CardinalityConstraint,
    check_beta_nice,
    greedy,
    parse_solver_spec,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treemax",
        description="Distributed submodular maximization on capacity-bounded machines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_overrides(sp, with_figures=True):
        sp.add_argument("--seed", type=int, help="replace the config's seed list")
        sp.add_argument("--workers", type=int, help="threads across experiment cells")
        sp.add_argument("--solver", help="greedy | lazy | threshold:EPS | stochastic:EPS")
        sp.add_argument("--objective", choices=["exemplar", "logdet"])
        sp.add_argument("--mu", help="comma-separated capacity list")
        sp.add_argument("--k", type=int, help="selection budget")
        sp.add_argument("--out", help="output directory")
        if with_figures:
            sp.add_argument(
                "--no-figures", action="store_true",
                help="skip PNG rendering, write tables only",
            )

    p_run = sub.add_parser("run", help="evaluate algorithms from a config file")
    p_run.add_argument("config", help="flat key=value config file")
    add_overrides(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="approximation ratio across capacities")
    p_sweep.add_argument("config", help="flat key=value config file")
    add_overrides(p_sweep)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_check = sub.add_parser("check", help="run built-in consistency checks")
    p_check.add_argument("--seed", type=int, default=0)
    p_check.add_argument("--trials", type=int, default=200,
                         help="trials per consistency check")
    p_check.set_defaults(func=_cmd_check)

    p_gen = sub.add_parser("gen", help="write a synthetic dataset")
    p_gen.add_argument("--out", required=True, help="destination file")
    p_gen.add_argument("--n", type=int, default=1000)
    p_gen.add_argument("--d", type=int, default=10)
    p_gen.add_argument("--clusters", type=int, default=10)
    p_gen.add_argument("--spread", type=float, default=0.2)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--format", choices=["csv", "whitespace"], default="csv")
    p_gen.set_defaults(func=_cmd_gen)

    return parser


def _load_config(args) -> ExperimentConfig:
    pairs = read_config_pairs(args.config)
    if args.seed is not None:
        pairs["seeds"] = str(args.seed)
    if args.workers is not None:
        pairs["workers"] = str(args.workers)
    if args.solver is not None:
        pairs["solver"] = args.solver
    if args.objective is not None:
        pairs["objective"] = args.objective
    if args.mu is not None:
        pairs["mu"] = args.mu
    if args.k is not None:
        pairs["k"] = str(args.k)
    if args.out is not None:
        pairs["out_dir"] = args.out
    return ExperimentConfig.from_pairs(pairs)


def _print_aggregates(rows, file) -> None:
    print(
        f"{'algorithm':<12} {'mu':>8} {'mean_value':>14} "
        f"{'mean_rel_err%':>14} {'seeds':>6}",
        file=file,
    )
    for agg in aggregate(rows):
        print(
            f"{agg.algorithm:<12} {agg.mu:>8} {agg.mean_value:>14.6g} "
            f"{agg.mean_rel_err_pct:>14.4g} {agg.seeds:>6}",
            file=file,
        )


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    rows = run_experiment(cfg)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "results.csv"
    emit_csv(rows, csv_path)
    _print_aggregates(rows, sys.stdout)
    print(f"wrote {csv_path}")
    if not args.no_figures:
        from .reports import render_run_figure

        fig_path = render_run_figure(rows, out_dir / "results.png")
        print(f"wrote {fig_path}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_config(args)
    rows = capacity_sweep(cfg)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "sweep.csv"
    emit_csv(rows, csv_path)
    print(
        f"{'algorithm':<12} {'mu':>8} {'mean_ratio':>12} {'stdev':>10} "
        f"(sqrt_nk = {rows[0].sqrt_nk:.1f})"
    )
    for row in rows:
        print(f"{row.algorithm:<12} {row.mu:>8} {row.mean_ratio:>12.6g} "
              f"{row.stdev_ratio:>10.3g}")
    print(f"wrote {csv_path}")
    if not args.no_figures:
        from .reports import render_sweep_figure

        fig_path = render_sweep_figure(rows, out_dir / "sweep.png")
        print(f"wrote {fig_path}")
    return 0


def _random_coverage(rng: np.random.Generator, n: int, universe: int):
    cover = [np.flatnonzero(rng.random(universe) < 0.3) for _ in range(n)]
    weights = rng.uniform(0.5, 2.0, size=universe)
    return WeightedCoverageObjective(cover, weights)


def _check_objective_properties(seed: int, trials: int) -> tuple[bool, str]:
    """Monotone marginals and diminishing returns on random instances."""
    rng = np.random.default_rng(seed)
    points = rng.standard_normal((30, 3))
    oracles = [
        ExemplarObjective(Dataset(points)),
        LogDetObjective(Dataset(points)),
        _random_coverage(rng, 24, 40),
    ]
    violations = 0
    total = 0
    for oracle in oracles:
        n = oracle.ground_size
        for _ in range(trials):
            t_size = int(rng.integers(2, min(n, 10)))
            t = np.sort(rng.choice(n, size=t_size, replace=False))
            s_size = int(rng.integers(1, t_size))
            s = np.sort(rng.choice(t, size=s_size, replace=False))
            outside = np.setdiff1d(np.arange(n), t)
            e = int(rng.choice(outside))
            gain_small = oracle.marginal(e, s)
            gain_large = oracle.marginal(e, t)
            total += 1
            if gain_large < -1e-9 or gain_small < gain_large - 1e-9:
                violations += 1
    return violations == 0, f"{violations}/{total} triple violations"


def _check_niceness(seed: int, trials: int) -> list[tuple[str, bool, str]]:
    rng = np.random.default_rng(seed)
    points = rng.standard_normal((25, 3))
    oracles = [
        ("coverage", _random_coverage(rng, 14, 30)),
        ("logdet", LogDetObjective(Dataset(points))),
    ]
    results = []
    for spec_text in ("greedy", "threshold:0.1"):
        spec = parse_solver_spec(spec_text)
        for name, oracle in oracles:
            ground = np.arange(oracle.ground_size)
            k = max(2, oracle.ground_size // 5)
            report = check_beta_nice(spec, oracle, ground, k=k, trials=trials, seed=seed)
            results.append(
                (
                    f"niceness[{spec_text} on {name}] beta={spec.beta:g}",
                    report.passed,
                    f"{report.drop_violations} drop / {report.slack_violations} slack "
                    f"violations in {report.trials} trials",
                )
            )
    return results


def _check_survival(seed: int, trials: int) -> tuple[bool, str]:
    """Partition-survival bound on random coverage instances, greedy
    solution as the target set."""
    rng = np.random.default_rng(seed)
    held = 0
    instances = 5
    for i in range(instances):
        oracle = _random_coverage(rng, 15, 25)
        ground = np.arange(15)
        target = greedy(oracle.fork(), ground, CardinalityConstraint(3)).selected
        report = check_survival_bound(
            oracle, ground, l=3, target=target, k=3,
            trials=max(trials, 200), seed=seed + 1000 + i,
        )
        if report.holds:
            held += 1
    return held == instances, f"bound held on {held}/{instances} instances"


def _cmd_check(args) -> int:
    checks: list[tuple[str, bool, str]] = []
    ok, detail = _check_objective_properties(args.seed, args.trials)
    checks.append(("objective-properties", ok, detail))
    checks.extend(_check_niceness(args.seed, args.trials))
    ok, detail = _check_survival(args.seed, args.trials)
    checks.append(("partition-survival", ok, detail))

    failed = 0
    for name, ok, detail in checks:
        status = "PASS" if ok else "FAIL"
        failed += 0 if ok else 1
        print(f"{status}  {name}: {detail}")
    if failed:
        print(f"{failed} of {len(checks)} checks failed")
        return 2
    print(f"all {len(checks)} checks passed")
    return 0


def _cmd_gen(args) -> int:
    ds = synth_gaussian_mixture(args.n, args.d, args.clusters, args.spread, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_dense(ds, out, format=args.format)
    print(f"wrote {out} ({ds.n} items x {ds.d} features)")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; those are config errors here
        code = exc.code if isinstance(exc.code, int) else 1
        return 0 if code == 0 else 1
    try:
        return args.func(args)
    except ValueError as exc:
        # ConfigFieldError and friends subclass ValueError
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
