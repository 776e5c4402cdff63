"""Single-machine selection subprocedures and an exact brute-force oracle.

The greedy family here serves as the per-machine compression step of the
distributed tree runs. Greedy and lazy greedy accept any hereditary
constraint; threshold and stochastic greedy are cardinality-only, as are
their usual statements. All tie-breaking is by smallest item id, which
is what makes rerunning on a reduced ground set reproduce the same
selection (the "niceness" the distributed analysis leans on).
"""

from __future__ import annotations

import heapq
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Iterable, Optional

import numpy as np

from .objectives import ObjectiveOracle

BRUTE_FORCE_LIMIT = 1_000_000

# Chunk width for the threshold-greedy scan: sequential semantics, batched
# evaluation; at most chunk-1 wasted oracle calls per accepted item.
_SCAN_CHUNK = 64


class InstanceTooLargeError(ValueError):
    """Brute-force enumeration would exceed the configured limit."""


class Constraint(ABC):
    """Hereditary feasibility test: any subset of a feasible set stays
    feasible, and the empty set is always feasible."""

    def weight_of(self, item: int) -> float:
        return 0.0

    @abstractmethod
    def admits(self, count: int, used_weight: float, item: int) -> bool:
        """Whether `item` may join a selection of this size and weight."""

    @abstractmethod
    def admits_mask(self, count: int, used_weight: float, items: np.ndarray) -> np.ndarray: ...

    def check_set(self, items: Iterable[int]) -> bool:
        count, used = 0, 0.0
        for e in items:
            if not self.admits(count, used, e):
                return False
            count += 1
            used += self.weight_of(e)
        return True


@dataclass(frozen=True)
class CardinalityConstraint(Constraint):
    k: int

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("k must be >= 0")

    def admits(self, count: int, used_weight: float, item: int) -> bool:
        return count < self.k

    def admits_mask(self, count, used_weight, items):
        return np.full(len(items), count < self.k)


class KnapsackConstraint(Constraint):
    """Total selected weight must stay within the budget."""

    def __init__(self, weights, budget: float):
        w = np.asarray(weights, dtype=np.float64)
        if (w < 0).any():
            raise ValueError("item weights must be non-negative")
        if budget < 0:
            raise ValueError("budget must be non-negative")
        self.weights = w
        self.budget = float(budget)

    def weight_of(self, item: int) -> float:
        return float(self.weights[item])

    def admits(self, count, used_weight, item):
        return used_weight + self.weights[item] <= self.budget

    def admits_mask(self, count, used_weight, items):
        return used_weight + self.weights[items] <= self.budget


class IntersectionConstraint(Constraint):
    """Feasible iff feasible under every member constraint."""

    def __init__(self, *members: Constraint):
        if not members:
            raise ValueError("need at least one member constraint")
        self.members = members

    def weight_of(self, item: int) -> float:
        # Weight drives knapsack state; at most one member may carry it.
        return max(m.weight_of(item) for m in self.members)

    def admits(self, count, used_weight, item):
        return all(m.admits(count, used_weight, item) for m in self.members)

    def admits_mask(self, count, used_weight, items):
        mask = self.members[0].admits_mask(count, used_weight, items)
        for m in self.members[1:]:
            mask = mask & m.admits_mask(count, used_weight, items)
        return mask


@dataclass
class SolverResult:
    """Outcome of one selection run.

    `oracle_calls` counts every value query the run issued, including
    the single final re-evaluation that `value` reports, so `value`
    always equals `oracle.value(selected)` exactly.
    """

    selected: list[int]
    value: float
    oracle_calls: int
    gains: list[float] = field(default_factory=list)


def _prepare_ground(ground) -> np.ndarray:
    arr = np.asarray(list(ground), dtype=np.int64)
    return np.unique(arr)


def _finalize(oracle: ObjectiveOracle, selected: list[int], start_calls: int,
              gains: list[float]) -> SolverResult:
    value = oracle.value(selected)
    return SolverResult(
        selected=selected,
        value=value,
        oracle_calls=oracle.eval_count - start_calls,
        gains=gains,
    )


def greedy(
    oracle: ObjectiveOracle,
    ground,
    constraint: Constraint,
    tie_break: str = "smallest",
) -> SolverResult:
    """Classic greedy: repeatedly add the feasible item of maximum
    marginal gain, smallest id on ties, until no feasible item improves.

    `tie_break="largest"` inverts the tie rule; it exists so the
    consistency checks can build deliberately inconsistent selectors.
    Production paths always use the default.
    """
    if tie_break not in ("smallest", "largest"):
        raise ValueError(f"unknown tie_break {tie_break!r}")
    remaining = _prepare_ground(ground)
    start = oracle.eval_count
    cur = oracle.selection()
    used = 0.0
    gains: list[float] = []
    while len(remaining):
        mask = constraint.admits_mask(len(cur.selected), used, remaining)
        cands = remaining[mask]
        if not len(cands):
            break
        g = cur.gains(cands)
        if tie_break == "smallest":
            i = int(np.argmax(g))  # first occurrence, cands ascending
        else:
            i = len(g) - 1 - int(np.argmax(g[::-1]))
        if g[i] <= 0.0:
            break
        e = int(cands[i])
        cur.add(e)
        gains.append(float(g[i]))
        used += constraint.weight_of(e)
        remaining = remaining[remaining != e]
    return _finalize(oracle, cur.selected, start, gains)


def lazy_greedy(oracle: ObjectiveOracle, ground, constraint: Constraint) -> SolverResult:
    """Greedy with stale-gain pruning: identical output to `greedy`,
    usually far fewer oracle calls.

    Heap entries carry the step at which their gain was computed; a
    popped entry that is fresh for the current step is selected outright,
    otherwise it is re-evaluated and pushed back. Submodularity makes
    every stale entry an upper bound, which is what keeps the selected
    item the true argmax. Items that stop fitting the constraint are
    dropped for good: the used weight only grows.
    """
    remaining = _prepare_ground(ground)
    start = oracle.eval_count
    cur = oracle.selection()
    if not len(remaining):
        return _finalize(oracle, cur.selected, start, [])

    g0 = cur.gains(remaining)
    heap = [(-float(g), int(e), 0) for g, e in zip(g0, remaining)]
    heapq.heapify(heap)
    used = 0.0
    step = 0
    gains: list[float] = []

    while heap:
        neg_g, e, stamp = heapq.heappop(heap)
        if not constraint.admits(len(cur.selected), used, e):
            continue
        if stamp != step:
            fresh = float(cur.gain(e))
            entry = (-fresh, e, step)
            if heap and entry > heap[0]:
                heapq.heappush(heap, entry)
                continue
            neg_g = -fresh
        if -neg_g <= 0.0:
            break
        cur.add(e)
        gains.append(-neg_g)
        used += constraint.weight_of(e)
        step += 1
    return _finalize(oracle, cur.selected, start, gains)


def threshold_greedy(oracle: ObjectiveOracle, ground, k: int, eps: float) -> SolverResult:
    """Descending-threshold greedy under a cardinality constraint.

    Thresholds sweep from the best singleton value d down to (eps/k)*d,
    shrinking by (1-eps) per pass; each pass scans items in ascending id
    order and takes any whose current gain meets the threshold. The
    selection it returns on a ground set never changes when an item it
    declined is removed, with slack factor 1 + 2*eps.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must be in (0, 1)")
    if k < 0:
        raise ValueError("k must be >= 0")
    remaining = _prepare_ground(ground)
    start = oracle.eval_count
    cur = oracle.selection()
    gains: list[float] = []
    if not len(remaining) or k == 0:
        return _finalize(oracle, cur.selected, start, gains)

    d_max = float(np.max(cur.gains(remaining)))
    if d_max <= 0.0:
        return _finalize(oracle, cur.selected, start, gains)

    floor = (eps / k) * d_max
    w = d_max
    while w >= floor and len(cur.selected) < k:
        pos = 0
        while pos < len(remaining) and len(cur.selected) < k:
            chunk = remaining[pos : pos + _SCAN_CHUNK]
            g = cur.gains(chunk)
            hits = np.nonzero(g >= w)[0]
            if not len(hits):
                pos += len(chunk)
                continue
            i = int(hits[0])
            e = int(chunk[i])
            cur.add(e)
            gains.append(float(g[i]))
            remaining = remaining[remaining != e]
            pos += i  # resume right after the accepted item
        w *= 1.0 - eps
    return _finalize(oracle, cur.selected, start, gains)


def stochastic_greedy(
    oracle: ObjectiveOracle, ground, k: int, eps: float, seed: int
) -> SolverResult:
    """Greedy over a fresh uniform sample of candidates each step.

    Sample size is ceil((n/k) * ln(1/eps)) with n the ground-set size,
    capped at the remaining pool; when the sample covers the whole pool
    the step is exactly a greedy step, so full-size sampling reproduces
    greedy outright. Deterministic per seed.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must be in (0, 1)")
    if k < 0:
        raise ValueError("k must be >= 0")
    remaining = _prepare_ground(ground)
    start = oracle.eval_count
    cur = oracle.selection()
    gains: list[float] = []
    n = len(remaining)
    if n == 0 or k == 0:
        return _finalize(oracle, cur.selected, start, gains)

    rng = np.random.default_rng(seed)
    sample_size = math.ceil((n / k) * math.log(1.0 / eps))
    while len(cur.selected) < k and len(remaining):
        m = min(sample_size, len(remaining))
        picked = np.sort(rng.choice(len(remaining), size=m, replace=False))
        cands = remaining[picked]
        g = cur.gains(cands)
        i = int(np.argmax(g))
        if g[i] <= 0.0:
            break
        e = int(cands[i])
        cur.add(e)
        gains.append(float(g[i]))
        remaining = remaining[remaining != e]
    return _finalize(oracle, cur.selected, start, gains)


def brute_force_opt(oracle: ObjectiveOracle, ground, constraint: Constraint) -> SolverResult:
    """Exact maximizer by exhaustive enumeration of feasible sets.

    Ties go to the lexicographically smallest item tuple. Guarded: the
    number of enumerated sets must stay within BRUTE_FORCE_LIMIT.
    """
    items = _prepare_ground(ground)
    n = len(items)
    start = oracle.eval_count

    if isinstance(constraint, CardinalityConstraint):
        k = min(constraint.k, n)
        total = sum(math.comb(n, j) for j in range(1, k + 1))
        if total > BRUTE_FORCE_LIMIT:
            raise InstanceTooLargeError(
                f"{total} candidate sets exceed the {BRUTE_FORCE_LIMIT} limit"
            )
        sizes = range(1, k + 1)
    else:
        if n > 60 or 2**n > BRUTE_FORCE_LIMIT:
            raise InstanceTooLargeError(
                f"2^{n} candidate sets exceed the {BRUTE_FORCE_LIMIT} limit"
            )
        sizes = range(1, n + 1)

    best_set: tuple[int, ...] = ()
    best_value = 0.0  # value of the empty set
    for size in sizes:
        for combo in combinations(items.tolist(), size):
            if not constraint.check_set(combo):
                continue
            v = oracle.value(combo)
            if v > best_value or (v == best_value and combo < best_set):
                best_value = v
                best_set = combo
    selected = list(best_set)
    value = oracle.value(selected)
    return SolverResult(
        selected=selected,
        value=value,
        oracle_calls=oracle.eval_count - start,
        gains=[],
    )


@dataclass(frozen=True)
class SolverSpec:
    """A named, parameterized selection algorithm with a uniform
    (oracle, ground, k, seed) calling shape.

    `beta` is the declared niceness factor; None marks algorithms with
    no such certificate (the stochastic sampler), which the consistency
    checker refuses.
    """

    name: str
    run: Callable[[ObjectiveOracle, np.ndarray, int, int], SolverResult]
    beta: Optional[float]
    eps: Optional[float] = None


def parse_solver_spec(spec: str) -> SolverSpec:
    """Parse CLI-style solver names: greedy, lazy, threshold:EPS,
    stochastic:EPS."""
    name, _, arg = spec.partition(":")
    name = name.strip().lower()
    if name == "greedy":
        if arg:
            raise ValueError("greedy takes no parameter")
        return SolverSpec(
            "greedy",
            lambda o, g, k, s: greedy(o, g, CardinalityConstraint(k)),
            beta=1.0,
        )
    if name == "lazy":
        if arg:
            raise ValueError("lazy takes no parameter")
        return SolverSpec(
            "lazy",
            lambda o, g, k, s: lazy_greedy(o, g, CardinalityConstraint(k)),
            beta=1.0,
        )
    if name == "threshold":
        eps = float(arg) if arg else 0.1
        if not 0.0 < eps < 1.0:
            raise ValueError("threshold eps must be in (0, 1)")
        return SolverSpec(
            f"threshold:{eps:g}",
            lambda o, g, k, s: threshold_greedy(o, g, k, eps),
            beta=1.0 + 2.0 * eps,
            eps=eps,
        )
    if name == "stochastic":
        eps = float(arg) if arg else 0.5
        if not 0.0 < eps < 1.0:
            raise ValueError("stochastic eps must be in (0, 1)")
        return SolverSpec(
            f"stochastic:{eps:g}",
            lambda o, g, k, s: stochastic_greedy(o, g, k, eps, s),
            beta=None,
            eps=eps,
        )
    raise ValueError(
        f"unknown solver {spec!r} (expected greedy, lazy, threshold:EPS or stochastic:EPS)"
    )


@dataclass
class ConsistencyReport:
    """Outcome of the selection-consistency check."""

    algorithm: str
    beta: float
    trials: int
    drop_violations: int
    slack_violations: int
    counterexamples: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.drop_violations == 0 and self.slack_violations == 0


def check_beta_nice(
    spec: SolverSpec,
    oracle: ObjectiveOracle,
    ground,
    k: int,
    trials: int,
    seed: int,
    tol: float = 1e-9,
) -> ConsistencyReport:
    """Verify the two selection-consistency properties of `spec` on
    random subsets.

    For each trial draw T and a random unselected x in T: (1) rerunning
    on T minus {x} must reproduce the selection exactly, and (2) the
    gain of x on top of the selection must stay within beta * f(S) / k.
    Algorithms without a declared beta are rejected.
    """
    if spec.beta is None:
        raise ValueError(f"{spec.name} has no declared niceness factor to check")
    items = _prepare_ground(ground)
    rng = np.random.default_rng(seed)
    report = ConsistencyReport(spec.name, spec.beta, trials, 0, 0)

    for trial in range(trials):
        t_size = int(rng.integers(min(k + 1, len(items)), len(items) + 1))
        t = np.sort(rng.choice(items, size=t_size, replace=False))
        result = spec.run(oracle, t, k, int(rng.integers(2**32)))
        outside = np.setdiff1d(t, result.selected)
        if not len(outside):
            continue
        x = int(rng.choice(outside))

        reduced = spec.run(oracle, t[t != x], k, 0)
        if reduced.selected != result.selected:
            report.drop_violations += 1
            if len(report.counterexamples) < 5:
                report.counterexamples.append(
                    {"trial": trial, "property": "drop", "T": t.tolist(), "x": x,
                     "full": result.selected, "reduced": reduced.selected}
                )
            continue

        bound = spec.beta * result.value / k + tol
        gain = oracle.marginal(x, result.selected)
        if gain > bound:
            report.slack_violations += 1
            if len(report.counterexamples) < 5:
                report.counterexamples.append(
                    {"trial": trial, "property": "slack", "T": t.tolist(), "x": x,
                     "gain": gain, "bound": bound}
                )
    return report
