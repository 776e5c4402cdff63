"""Multi-round tree-style compression over simulated fixed-capacity machines.

Each round splits the surviving items across ceil(|A|/mu) machines by
balanced random partition, runs the configured selection subprocedure on
every machine, keeps the best machine output seen so far, and carries the
union of the outputs into the next round. The loop ends after the round a
single machine handled everything. A two-round baseline and a uniform
random baseline live here too, along with a Monte Carlo check of the
survival bound that underpins the approximation guarantee.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .objectives import ObjectiveOracle
from .partition import balanced_random_partition, subseed
from .solvers import (
    CardinalityConstraint,
    Constraint,
    SolverResult,
    SolverSpec,
    greedy,
    lazy_greedy,
    parse_solver_spec,
)


class ConfigError(ValueError):
    """A run configuration violates the framework's preconditions."""


class CapacityError(RuntimeError):
    """A simulated machine would have to hold more than `mu` items."""


class NonProgressError(RuntimeError):
    """The round loop exceeded its guard without converging."""


def round_count(n: int, k: int, mu: int) -> int:
    """Upper bound on the number of compression rounds.

    One round suffices when everything fits on one machine; otherwise
    the bound is the smallest r with mu * (mu/k)^(r-1) >= n, evaluated
    in exact integer arithmetic to avoid float-log boundary errors.
    """
    if n < 1 or k < 1:
        raise ConfigError("need n >= 1 and k >= 1")
    if mu <= k:
        raise ConfigError(f"capacity mu={mu} must exceed k={k}")
    if mu >= n:
        return 1
    lhs, rhs, t = mu, n, 0
    while lhs < rhs:
        lhs *= mu
        rhs *= k
        t += 1
    return t + 1


@dataclass
class TreeConfig:
    """Parameters of one tree-compression run.

    `constraint` defaults to plain cardinality at `k`; passing a
    hereditary constraint switches the per-machine runs to "feasible
    set" semantics, with `k` still bounding the per-machine output size
    for capacity arithmetic (choose k = the largest feasible set size).
    Runs never exceed the precomputed round bound; by default they also
    stop early at the first single-machine round, while `fixed_rounds`
    disables the early stop and plays out the whole schedule.
    """

    k: int
    mu: int
    solver: SolverSpec
    constraint: Optional[Constraint] = None
    master_seed: int = 0
    max_rounds_guard: int = 64
    fixed_rounds: bool = False
    workers: int = 1

    def __post_init__(self):
        if isinstance(self.solver, str):
            self.solver = parse_solver_spec(self.solver)
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.mu <= self.k:
            raise ConfigError(
                f"capacity mu={self.mu} must be at least k+1={self.k + 1}"
            )
        if self.constraint is not None and self.solver.name not in ("greedy", "lazy"):
            raise ConfigError(
                f"{self.solver.name} supports cardinality runs only"
            )
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.max_rounds_guard < 1:
            raise ConfigError("max_rounds_guard must be >= 1")


@dataclass
class MachineTrace:
    machine: int
    input_size: int
    output_size: int
    value: float
    oracle_calls: int


@dataclass
class RoundTrace:
    t: int
    input_size: int
    machine_count: int
    machines: list[MachineTrace]
    output_size: int


@dataclass
class ExecutionReport:
    rounds: list[RoundTrace]
    best: SolverResult
    total_oracle_calls: int
    wall_time: float
    round_bound: int

    @property
    def round_count(self) -> int:
        return len(self.rounds)


def trace_lines(report: ExecutionReport) -> list[str]:
    """One line per machine per round: t, machine, sizes, value, calls."""
    lines = ["t machine input_size output_size value oracle_calls"]
    for rnd in report.rounds:
        for m in rnd.machines:
            lines.append(
                f"{rnd.t} {m.machine} {m.input_size} {m.output_size} "
                f"{m.value:.9g} {m.oracle_calls}"
            )
    return lines


def _run_machine(
    oracle: ObjectiveOracle,
    part: np.ndarray,
    cfg: TreeConfig,
    seed: int,
) -> SolverResult:
    if cfg.constraint is not None:
        run = greedy if cfg.solver.name == "greedy" else lazy_greedy
        return run(oracle, part, cfg.constraint)
    return cfg.solver.run(oracle, part, cfg.k, seed)


def _solve_round(
    oracle: ObjectiveOracle, parts, cfg: TreeConfig, seeds: list[int]
) -> list[tuple[SolverResult, int]]:
    """Solve every machine's part; returns (result, oracle_calls) in
    machine order regardless of scheduling."""
    forks = [oracle.fork() for _ in parts]

    def solve(i: int) -> tuple[SolverResult, int]:
        res = _run_machine(forks[i], parts[i], cfg, seeds[i])
        return res, forks[i].eval_count

    if cfg.workers == 1 or len(parts) == 1:
        return [solve(i) for i in range(len(parts))]
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(solve, range(len(parts))))


def tree_compress(oracle: ObjectiveOracle, cfg: TreeConfig, ground=None) -> ExecutionReport:
    """Run the multi-round compression over simulated machines.

    Deterministic per (config, master_seed) for deterministic solvers:
    partitions are keyed (master_seed, round) and machine seeds
    (master_seed, round, machine), all derived before dispatch.
    """
    start_time = time.perf_counter()
    if ground is None:
        surviving = np.arange(oracle.ground_size, dtype=np.int64)
    else:
        surviving = np.unique(np.asarray(list(ground), dtype=np.int64))
    if not len(surviving):
        raise ConfigError("ground set is empty")

    bound = round_count(len(surviving), cfg.k, cfg.mu)
    best: Optional[SolverResult] = None
    best_value = 0.0
    rounds: list[RoundTrace] = []
    total_calls = 0
    t = 0

    while True:
        if t >= cfg.max_rounds_guard:
            raise NonProgressError(
                f"no convergence within {cfg.max_rounds_guard} rounds "
                f"(|A|={len(surviving)}); the subprocedure may not be compressing"
            )
        m = -(-len(surviving) // cfg.mu)
        plan = balanced_random_partition(surviving, m, subseed(cfg.master_seed, t))
        oversize = [len(p) for p in plan.parts if len(p) > cfg.mu]
        if oversize:
            raise CapacityError(
                f"round {t}: a machine was handed {oversize[0]} > mu={cfg.mu} items"
            )
        seeds = [
            int(np.random.default_rng(subseed(cfg.master_seed, t, i)).integers(2**63))
            for i in range(m)
        ]
        outcomes = _solve_round(oracle, plan.parts, cfg, seeds)

        traces = []
        outputs = []
        for i, (res, calls) in enumerate(outcomes):
            total_calls += calls
            outputs.append(np.asarray(res.selected, dtype=np.int64))
            traces.append(
                MachineTrace(
                    machine=i,
                    input_size=len(plan.parts[i]),
                    output_size=len(res.selected),
                    value=res.value,
                    oracle_calls=calls,
                )
            )
            if res.value > best_value or best is None:
                best = res
                best_value = res.value

        next_surviving = np.unique(np.concatenate(outputs)) if outputs else surviving[:0]
        rounds.append(
            RoundTrace(
                t=t,
                input_size=len(surviving),
                machine_count=m,
                machines=traces,
                output_size=len(next_surviving),
            )
        )
        t += 1
        # The precomputed bound caps both modes; adaptive mode may stop
        # earlier once a single machine has seen everything. The ceil in
        # the machine count can leave slightly more than mu survivors at
        # the bound (fractional mu/k near a shrink boundary); the best
        # partial solution returned is complete regardless, which is
        # exactly what the fixed schedule would return.
        done = (t >= bound) or (not cfg.fixed_rounds and m == 1)
        if done:
            break
        if not len(next_surviving):
            break  # nothing survived; best-so-far stands
        surviving = next_surviving

    return ExecutionReport(
        rounds=rounds,
        best=best,
        total_oracle_calls=total_calls,
        wall_time=time.perf_counter() - start_time,
        round_bound=bound,
    )


def rand_greedi(
    oracle: ObjectiveOracle,
    k: int,
    m: int,
    seed: int,
    mu: Optional[int] = None,
    workers: int = 1,
) -> ExecutionReport:
    """Two-round baseline: partition to m machines, greedy(k) each, then
    greedy(k) over the union of the partial solutions.

    When `mu` is given, machine loads are checked against it: a part
    larger than mu, or a union larger than mu, raises CapacityError.
    That failure mode is the reason the multi-round scheme exists; it is
    reported, never silently absorbed.
    """
    start_time = time.perf_counter()
    if m < 1:
        raise ConfigError("need at least one machine")
    if k < 1:
        raise ConfigError("k must be >= 1")
    n = oracle.ground_size
    ground = np.arange(n, dtype=np.int64)
    if mu is not None and -(-n // m) > mu:
        raise CapacityError(
            f"round 1: ceil({n}/{m}) = {-(-n // m)} items per machine exceeds mu={mu}"
        )

    plan = balanced_random_partition(ground, m, subseed(seed, 0))
    constraint = CardinalityConstraint(k)
    forks = [oracle.fork() for _ in range(m)]

    def solve(i: int) -> tuple[SolverResult, int]:
        res = greedy(forks[i], plan.parts[i], constraint)
        return res, forks[i].eval_count

    if workers == 1 or m == 1:
        outcomes = [solve(i) for i in range(m)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(solve, range(m)))

    best: Optional[SolverResult] = None
    best_value = 0.0
    total_calls = 0
    traces = []
    outputs = []
    for i, (res, calls) in enumerate(outcomes):
        total_calls += calls
        outputs.append(np.asarray(res.selected, dtype=np.int64))
        traces.append(
            MachineTrace(i, len(plan.parts[i]), len(res.selected), res.value, calls)
        )
        if res.value > best_value or best is None:
            best = res
            best_value = res.value

    union = np.unique(np.concatenate(outputs))
    round1 = RoundTrace(0, n, m, traces, len(union))
    if mu is not None and len(union) > mu:
        raise CapacityError(
            f"round 2: union of partial solutions has {len(union)} items, "
            f"exceeding mu={mu}"
        )

    fork = oracle.fork()
    final = greedy(fork, union, constraint)
    total_calls += fork.eval_count
    round2 = RoundTrace(
        1,
        len(union),
        1,
        [MachineTrace(0, len(union), len(final.selected), final.value, fork.eval_count)],
        len(final.selected),
    )
    if final.value > best_value:
        best = final

    return ExecutionReport(
        rounds=[round1, round2],
        best=best,
        total_oracle_calls=total_calls,
        wall_time=time.perf_counter() - start_time,
        round_bound=2,
    )


def random_baseline(oracle: ObjectiveOracle, k: int, seed: int) -> SolverResult:
    """Uniform random k-subset, evaluated once."""
    n = oracle.ground_size
    if not 1 <= k <= n:
        raise ConfigError(f"need 1 <= k <= n, got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    selected = sorted(int(e) for e in rng.choice(n, size=k, replace=False))
    before = oracle.eval_count
    value = oracle.value(selected)
    return SolverResult(
        selected=selected,
        value=value,
        oracle_calls=oracle.eval_count - before,
        gains=[],
    )


@dataclass
class SurvivalBoundReport:
    """Monte Carlo comparison of how much of a target set's value
    survives random partitioning plus per-machine selection."""

    trials: int
    mean_surviving_value: float
    target_value: float
    mean_best_machine_value: float
    slack: float  # three standard errors of the per-trial differences
    holds: bool
    details: dict = field(default_factory=dict)


def check_survival_bound(
    oracle: ObjectiveOracle,
    ground,
    l: int,
    target,
    k: int,
    trials: int,
    seed: int,
    beta: float = 1.0,
) -> SurvivalBoundReport:
    """Check E[f(C intersect union of outputs)] >= f(C) - (1+beta) * E[max_i f(S_i)].

    C is the `target` set (|C| <= k, C inside `ground`); each trial
    partitions `ground` into `l` parts, runs greedy(k) on each, and
    measures how much of C's value the union of outputs retains. The
    inequality is asserted with a three-standard-error slack on the
    per-trial differences.
    """
    ground_arr = np.unique(np.asarray(list(ground), dtype=np.int64))
    target_arr = np.unique(np.asarray(list(target), dtype=np.int64))
    if len(target_arr) > k:
        raise ConfigError(f"target set has {len(target_arr)} items, more than k={k}")
    if not np.isin(target_arr, ground_arr).all():
        raise ConfigError("target set must lie inside the ground set")

    constraint = CardinalityConstraint(k)
    f_target = oracle.value(target_arr)
    diffs = np.empty(trials)
    surviving_vals = np.empty(trials)
    max_vals = np.empty(trials)
    for trial in range(trials):
        plan = balanced_random_partition(ground_arr, l, subseed(seed, trial))
        outputs = [greedy(oracle, part, constraint).selected for part in plan.parts]
        union = np.unique(np.concatenate([np.asarray(o, dtype=np.int64) for o in outputs]))
        surviving = target_arr[np.isin(target_arr, union)]
        f_surviving = oracle.value(surviving)
        f_max = max(oracle.value(o) for o in outputs)
        surviving_vals[trial] = f_surviving
        max_vals[trial] = f_max
        diffs[trial] = f_surviving - (f_target - (1.0 + beta) * f_max)

    stderr = float(diffs.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    slack = 3.0 * stderr
    return SurvivalBoundReport(
        trials=trials,
        mean_surviving_value=float(surviving_vals.mean()),
        target_value=f_target,
        mean_best_machine_value=float(max_vals.mean()),
        slack=slack,
        holds=bool(diffs.mean() >= -slack),
    )
