"""Experiment harness: flat-text configs, result tables, CSV emission.

A run evaluates each configured algorithm at every capacity and seed on
one dataset/objective pair, reporting values and the signed relative
error against the centralized greedy reference. A sweep aggregates the
tree and two-round baselines into approximation-ratio curves across
capacities. Baseline capacity violations become tagged rows (value and
relative error NaN) instead of aborting the table; the event is logged
to stderr.
"""

from __future__ import annotations

import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .dataset import Dataset, load_dense, normalize, subsample, synth_gaussian_mixture
from .distree import (
    CapacityError,
    TreeConfig,
    rand_greedi,
    random_baseline,
    tree_compress,
)
from .objectives import ExemplarObjective, LogDetObjective, ObjectiveOracle
from .solvers import CardinalityConstraint, lazy_greedy, parse_solver_spec

KNOWN_ALGORITHMS = ("greedy", "tree", "rand_greedi", "random")


class ConfigFieldError(ValueError):
    """A config field is missing, malformed, or out of range."""

    def __init__(self, field: str, problem: str):
        self.field = field
        super().__init__(f"field {field!r}: {problem}")


def read_config_pairs(path) -> dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigFieldError("<file>", f"cannot read {path}: {exc}") from exc
    pairs: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigFieldError("<file>", f"line {lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key in pairs:
            raise ConfigFieldError(key, f"duplicated on line {lineno}")
        pairs[key] = value.strip()
    return pairs


class _Fields:
    """Typed accessors over raw key=value pairs, tracking consumed keys."""

    def __init__(self, pairs: dict[str, str]):
        self.pairs = pairs
        self.used: set[str] = set()

    def _raw(self, key: str, default):
        self.used.add(key)
        if key in self.pairs:
            return self.pairs[key]
        if default is _REQUIRED:
            raise ConfigFieldError(key, "required")
        return default

    def str_(self, key: str, default=None, choices=None) -> Optional[str]:
        v = self._raw(key, default)
        if v is not None and choices is not None and v not in choices:
            raise ConfigFieldError(key, f"{v!r} not one of {sorted(choices)}")
        return v

    def int_(self, key: str, default=None, low=None) -> Optional[int]:
        v = self._raw(key, default)
        if v is None or isinstance(v, int):
            return v
        try:
            n = int(v)
        except ValueError:
            raise ConfigFieldError(key, f"{v!r} is not an integer") from None
        if low is not None and n < low:
            raise ConfigFieldError(key, f"must be >= {low}, got {n}")
        return n

    def float_(self, key: str, default=None) -> Optional[float]:
        v = self._raw(key, default)
        if v is None or isinstance(v, float):
            return v
        try:
            return float(v)
        except ValueError:
            raise ConfigFieldError(key, f"{v!r} is not a number") from None

    def int_list(self, key: str, default=None, low=None) -> Optional[list[int]]:
        v = self._raw(key, default)
        if v is None or isinstance(v, list):
            return v
        out = []
        for piece in v.split(","):
            piece = piece.strip()
            if not piece:
                continue
            try:
                n = int(piece)
            except ValueError:
                raise ConfigFieldError(key, f"{piece!r} is not an integer") from None
            if low is not None and n < low:
                raise ConfigFieldError(key, f"entries must be >= {low}, got {n}")
            out.append(n)
        if not out:
            raise ConfigFieldError(key, "list is empty")
        return out

    def str_list(self, key: str, default=None) -> Optional[list[str]]:
        v = self._raw(key, default)
        if v is None or isinstance(v, list):
            return v
        out = [piece.strip() for piece in v.split(",") if piece.strip()]
        if not out:
            raise ConfigFieldError(key, "list is empty")
        return out

    def reject_unknown(self):
        unknown = set(self.pairs) - self.used
        if unknown:
            raise ConfigFieldError(sorted(unknown)[0], "unknown field")


_REQUIRED = object()


@dataclass
class ExperimentConfig:
    """One experiment's full description; see configs/ for examples."""

    dataset: str
    dataset_name: str
    dataset_n: int
    dataset_d: int
    dataset_clusters: int
    dataset_spread: float
    dataset_seed: int
    dataset_format: str
    dataset_skip_header: bool
    normalize: str
    subsample_n: Optional[int]
    subsample_seed: int
    objective: str
    eval_size: int
    eval_seed: int
    bandwidth: float
    noise: float
    kernel_exponent: str
    k: int
    mu: list[int]
    algorithms: list[str]
    solver: str
    seeds: list[int]
    out_dir: str
    workers: int

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_pairs(read_config_pairs(path))

    @classmethod
    def from_pairs(cls, pairs: dict[str, str]) -> "ExperimentConfig":
        f = _Fields(pairs)
        dataset = f.str_("dataset", _REQUIRED)
        cfg = cls(
            dataset=dataset,
            dataset_name=f.str_(
                "dataset_name",
                "synthetic" if dataset == "synthetic" else Path(dataset).stem,
            ),
            dataset_n=f.int_("dataset_n", 1000, low=1),
            dataset_d=f.int_("dataset_d", 10, low=1),
            dataset_clusters=f.int_("dataset_clusters", 10, low=1),
            dataset_spread=f.float_("dataset_spread", 0.2),
            dataset_seed=f.int_("dataset_seed", 0),
            dataset_format=f.str_("dataset_format", "csv", choices={"csv", "whitespace"}),
            dataset_skip_header=f.str_("dataset_skip_header", "false", choices={"true", "false"})
            == "true",
            normalize=f.str_("normalize", "none", choices={"none", "item", "feature"}),
            subsample_n=f.int_("subsample_n", None, low=1),
            subsample_seed=f.int_("subsample_seed", 0),
            objective=f.str_("objective", _REQUIRED, choices={"exemplar", "logdet"}),
            eval_size=f.int_("eval_size", 10_000, low=1),
            eval_seed=f.int_("eval_seed", 0),
            bandwidth=f.float_("bandwidth", 0.5),
            noise=f.float_("noise", 1.0),
            kernel_exponent=f.str_("kernel_exponent", "squared", choices={"squared", "plain"}),
            k=f.int_("k", _REQUIRED, low=1),
            mu=f.int_list("mu", _REQUIRED, low=1),
            algorithms=f.str_list("algorithms", ["greedy", "tree"]),
            solver=f.str_("solver", "lazy"),
            seeds=f.int_list("seeds", list(range(10)), low=0),
            out_dir=f.str_("out_dir", "out"),
            workers=f.int_("workers", 1, low=1),
        )
        f.reject_unknown()
        for alg in cfg.algorithms:
            if alg not in KNOWN_ALGORITHMS:
                raise ConfigFieldError(
                    "algorithms", f"{alg!r} not one of {list(KNOWN_ALGORITHMS)}"
                )
        needs_capacity = {"tree", "rand_greedi"} & set(cfg.algorithms)
        if needs_capacity:
            for mu in cfg.mu:
                if mu <= cfg.k:
                    raise ConfigFieldError("mu", f"capacity {mu} must exceed k={cfg.k}")
        try:
            parse_solver_spec(cfg.solver)
        except ValueError as exc:
            raise ConfigFieldError("solver", str(exc)) from None
        return cfg


def build_dataset(cfg: ExperimentConfig) -> Dataset:
    if cfg.dataset == "synthetic":
        ds = synth_gaussian_mixture(
            cfg.dataset_n, cfg.dataset_d, cfg.dataset_clusters,
            cfg.dataset_spread, cfg.dataset_seed,
        )
    else:
        ds = load_dense(cfg.dataset, format=cfg.dataset_format,
                        skip_header=cfg.dataset_skip_header)
    if cfg.subsample_n is not None and cfg.subsample_n < ds.n:
        ds = subsample(ds, cfg.subsample_n, cfg.subsample_seed)
    if cfg.normalize != "none":
        ds = normalize(ds, mode=cfg.normalize)
    return ds


def build_oracle(cfg: ExperimentConfig, ds: Dataset) -> ObjectiveOracle:
    if cfg.objective == "exemplar":
        return ExemplarObjective(ds, eval_size=cfg.eval_size, eval_seed=cfg.eval_seed)
    return LogDetObjective(
        ds, bandwidth=cfg.bandwidth, noise=cfg.noise, exponent=cfg.kernel_exponent
    )


@dataclass
class ResultRow:
    """One CSV row; field order is the pinned column order."""

    dataset: str
    objective: str
    algorithm: str
    k: int
    mu: int
    seed: int
    value: float
    rel_err_pct: float
    rounds: int
    oracle_calls: int
    wall_ms: float


@dataclass
class SweepRow:
    """One capacity-sweep curve point (mean over seeds)."""

    dataset: str
    objective: str
    algorithm: str
    k: int
    mu: int
    sqrt_nk: float
    mean_ratio: float
    stdev_ratio: float
    seeds: int


def _format_cell(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return "%.9g" % v
    return str(v)


def emit_csv(rows, path) -> None:
    """Write rows (a list of one dataclass type) as UTF-8 CSV.

    Header order is the dataclass field order; floats carry 9
    significant digits, enough to reproduce values exactly on parse.
    """
    if not rows:
        raise ValueError("refusing to write an empty table")
    names = [f.name for f in fields(rows[0])]
    lines = [",".join(names)]
    for row in rows:
        lines.append(",".join(_format_cell(getattr(row, name)) for name in names))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _reference_greedy(oracle: ObjectiveOracle, k: int):
    """Centralized reference: lazy greedy (identical output to greedy),
    one shot per (dataset, objective, k)."""
    fork = oracle.fork()
    t0 = time.perf_counter()
    res = lazy_greedy(fork, np.arange(oracle.ground_size), CardinalityConstraint(k))
    wall_ms = (time.perf_counter() - t0) * 1e3
    return res, wall_ms


def relative_error_pct(reference_value: float, value: float) -> float:
    """Signed percentage shortfall against the centralized reference."""
    if reference_value == 0.0:
        return 0.0 if value == 0.0 else float("-inf")
    return 100.0 * (reference_value - value) / reference_value


def _run_cell(
    oracle: ObjectiveOracle,
    cfg: ExperimentConfig,
    algorithm: str,
    mu: int,
    seed: int,
):
    """One (algorithm, capacity, seed) cell -> (value, rounds, calls) or
    a CapacityError."""
    fork = oracle.fork()
    n = oracle.ground_size
    if algorithm == "tree":
        tree_cfg = TreeConfig(k=cfg.k, mu=mu, solver=cfg.solver, master_seed=seed)
        report = tree_compress(fork, tree_cfg)
        return report.best.value, report.round_count, report.total_oracle_calls
    if algorithm == "rand_greedi":
        m = -(-n // mu)
        report = rand_greedi(fork, k=cfg.k, m=m, seed=seed, mu=mu)
        return report.best.value, len(report.rounds), report.total_oracle_calls
    if algorithm == "random":
        res = random_baseline(fork, cfg.k, seed)
        return res.value, 1, res.oracle_calls
    raise AssertionError(f"unhandled algorithm {algorithm}")


def run_experiment(cfg: ExperimentConfig, log=sys.stderr) -> list[ResultRow]:
    """Evaluate every configured (algorithm, capacity, seed) cell.

    The centralized greedy reference is always computed (it anchors
    rel_err_pct); a `greedy` entry in `algorithms` additionally emits
    its rows. Cells run across `cfg.workers` threads; row order is
    deterministic regardless of scheduling.
    """
    ds = build_dataset(cfg)
    oracle = build_oracle(cfg, ds)
    n = oracle.ground_size
    if cfg.k > n:
        raise ConfigFieldError("k", f"k={cfg.k} exceeds dataset size n={n}")
    ref, ref_wall_ms = _reference_greedy(oracle, cfg.k)

    cells: list[tuple[str, int, int]] = []
    for algorithm in cfg.algorithms:
        if algorithm == "greedy":
            continue
        mus = cfg.mu if algorithm in ("tree", "rand_greedi") else [n]
        for mu in mus:
            for seed in cfg.seeds:
                cells.append((algorithm, mu, seed))

    def solve(cell):
        algorithm, mu, seed = cell
        t0 = time.perf_counter()
        try:
            value, rounds, calls = _run_cell(oracle, cfg, algorithm, mu, seed)
        except CapacityError as exc:
            print(
                f"capacity violation [{algorithm} mu={mu} seed={seed}]: {exc}",
                file=log,
            )
            value, rounds, calls = float("nan"), 0, 0
        wall_ms = (time.perf_counter() - t0) * 1e3
        return ResultRow(
            dataset=cfg.dataset_name,
            objective=cfg.objective,
            algorithm=algorithm,
            k=cfg.k,
            mu=mu,
            seed=seed,
            value=value,
            rel_err_pct=relative_error_pct(ref.value, value),
            rounds=rounds,
            oracle_calls=calls,
            wall_ms=wall_ms,
        )

    if cfg.workers > 1 and len(cells) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            computed = list(pool.map(solve, cells))
    else:
        computed = [solve(cell) for cell in cells]

    rows: list[ResultRow] = []
    if "greedy" in cfg.algorithms:
        for seed in cfg.seeds:
            rows.append(
                ResultRow(
                    dataset=cfg.dataset_name,
                    objective=cfg.objective,
                    algorithm="greedy",
                    k=cfg.k,
                    mu=n,
                    seed=seed,
                    value=ref.value,
                    rel_err_pct=0.0,
                    rounds=1,
                    oracle_calls=ref.oracle_calls,
                    wall_ms=ref_wall_ms,
                )
            )
    rows.extend(computed)
    return rows


def capacity_sweep(cfg: ExperimentConfig, log=sys.stderr) -> list[SweepRow]:
    """Approximation-ratio curves across the capacity list.

    Requires the capacity grid to bracket sqrt(n*k), the threshold at
    which two-round schemes become feasible; each curve point is the
    mean over seeds of value / centralized-greedy value.
    """
    ds = build_dataset(cfg)
    oracle = build_oracle(cfg, ds)
    n = oracle.ground_size
    if cfg.k > n:
        raise ConfigFieldError("k", f"k={cfg.k} exceeds dataset size n={n}")
    sqrt_nk = math.sqrt(n * cfg.k)
    if min(cfg.mu) >= sqrt_nk or max(cfg.mu) < sqrt_nk:
        raise ConfigFieldError(
            "mu",
            f"capacity list must span both sides of sqrt(n*k) = {sqrt_nk:.1f}, "
            f"got {cfg.mu}",
        )
    ref, _ = _reference_greedy(oracle, cfg.k)
    algorithms = [a for a in cfg.algorithms if a in ("tree", "rand_greedi")]
    if not algorithms:
        raise ConfigFieldError("algorithms", "sweep needs tree and/or rand_greedi")

    cells = [(a, mu, s) for a in algorithms for mu in cfg.mu for s in cfg.seeds]

    def solve(cell):
        algorithm, mu, seed = cell
        try:
            value, _, _ = _run_cell(oracle, cfg, algorithm, mu, seed)
        except CapacityError as exc:
            print(
                f"capacity violation [{algorithm} mu={mu} seed={seed}]: {exc}",
                file=log,
            )
            value = float("nan")
        return value

    if cfg.workers > 1 and len(cells) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            values = list(pool.map(solve, cells))
    else:
        values = [solve(cell) for cell in cells]

    by_point: dict[tuple[str, int], list[float]] = {}
    for (algorithm, mu, _), value in zip(cells, values):
        by_point.setdefault((algorithm, mu), []).append(value / ref.value)

    rows = []
    for algorithm in algorithms:
        for mu in cfg.mu:
            ratios = np.asarray(by_point[(algorithm, mu)])
            rows.append(
                SweepRow(
                    dataset=cfg.dataset_name,
                    objective=cfg.objective,
                    algorithm=algorithm,
                    k=cfg.k,
                    mu=mu,
                    sqrt_nk=sqrt_nk,
                    mean_ratio=float(np.nanmean(ratios)) if not np.isnan(ratios).all()
                    else float("nan"),
                    stdev_ratio=float(np.nanstd(ratios)) if not np.isnan(ratios).all()
                    else float("nan"),
                    seeds=len(ratios),
                )
            )
    return rows


@dataclass
class AggregateRow:
    dataset: str
    objective: str
    algorithm: str
    k: int
    mu: int
    mean_value: float
    stdev_value: float
    mean_rel_err_pct: float
    seeds: int


def aggregate(rows: list[ResultRow]) -> list[AggregateRow]:
    """Mean/stdev over seeds per (dataset, objective, algorithm, k, mu).

    Population standard deviation; NaN-tagged rows (capacity violations)
    are excluded from the statistics but counted in `seeds`.
    """
    groups: dict[tuple, list[ResultRow]] = {}
    order: list[tuple] = []
    for row in rows:
        key = (row.dataset, row.objective, row.algorithm, row.k, row.mu)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(row)
    out = []
    for key in order:
        members = groups[key]
        values = np.asarray([m.value for m in members])
        errs = np.asarray([m.rel_err_pct for m in members])
        good = ~np.isnan(values)
        out.append(
            AggregateRow(
                dataset=key[0],
                objective=key[1],
                algorithm=key[2],
                k=key[3],
                mu=key[4],
                mean_value=float(values[good].mean()) if good.any() else float("nan"),
                stdev_value=float(values[good].std()) if good.any() else float("nan"),
                mean_rel_err_pct=float(errs[good].mean()) if good.any() else float("nan"),
                seeds=len(members),
            )
        )
    return out
