"""Multi-round compression framework: round arithmetic, capacity
accounting, determinism, baselines and the survival-bound check."""

from __future__ import annotations

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from treemax.dataset import synth_gaussian_mixture
from treemax.distree import (
    CapacityError,
    ConfigError,
    NonProgressError,
    TreeConfig,
    check_survival_bound,
    rand_greedi,
    random_baseline,
    round_count,
    trace_lines,
    tree_compress,
)
from treemax.objectives import ExemplarObjective, WeightedCoverageObjective
from treemax.solvers import (
    CardinalityConstraint,
    KnapsackConstraint,
    SolverResult,
    SolverSpec,
    brute_force_opt,
    greedy,
)


def exemplar(n=160, d=3, seed=0, **kw):
    return ExemplarObjective(synth_gaussian_mixture(n, d, 5, 0.3, seed), **kw)


def random_coverage(rng, n, universe=30):
    cover = [rng.choice(universe, size=rng.integers(1, 5), replace=False) for _ in range(n)]
    return WeightedCoverageObjective(cover, rng.uniform(0.1, 2.0, size=universe))


class TestRoundCount:
    def test_reference_configs(self):
        assert round_count(160, 10, 20) == 4
        assert round_count(1000, 10, 100) == 2

    def test_single_machine_cases(self):
        assert round_count(50, 5, 50) == 1
        assert round_count(50, 5, 500) == 1

    def test_boundary_is_integer_exact(self):
        # n = mu * (mu/k)^(r-1) exactly needs r rounds; one more item
        # tips it to r+1. Float logs would wobble right here.
        assert round_count(4000, 10, 200) == 2
        assert round_count(4001, 10, 200) == 3
        assert round_count(8000, 10, 200) == 3
        assert round_count(80_000, 10, 200) == 3
        assert round_count(80_001, 10, 200) == 4

    def test_errors(self):
        with pytest.raises(ConfigError):
            round_count(100, 10, 10)
        with pytest.raises(ConfigError):
            round_count(0, 1, 2)
        with pytest.raises(ConfigError):
            round_count(10, 0, 2)


class TestTreeCompress:
    def test_single_round_when_capacity_covers_everything(self):
        obj = exemplar(n=40)
        cfg = TreeConfig(k=6, mu=64, solver="greedy", master_seed=1)
        report = tree_compress(obj, cfg)
        assert report.round_count == 1
        central = greedy(exemplar(n=40), range(40), CardinalityConstraint(6))
        assert report.best.selected == central.selected
        assert report.best.value == central.value

    def test_reference_shape_four_rounds(self):
        # 160 items, k=10, capacity 20: every machine fills its 10-item
        # output, so the machine counts walk 8, 4, 2, 1.
        obj = exemplar(n=160)
        cfg = TreeConfig(k=10, mu=20, solver="greedy", master_seed=2)
        report = tree_compress(obj, cfg)
        assert report.round_count == 4
        assert [r.machine_count for r in report.rounds] == [8, 4, 2, 1]
        assert report.round_bound == 4

    def test_round_trace_arithmetic(self):
        obj = exemplar(n=130)
        cfg = TreeConfig(k=8, mu=25, solver="lazy", master_seed=3)
        report = tree_compress(obj, cfg)
        for rnd in report.rounds:
            assert rnd.machine_count == -(-rnd.input_size // 25)
            assert rnd.output_size <= min(rnd.input_size, 8 * rnd.machine_count)
            for m in rnd.machines:
                assert m.input_size <= 25
                assert m.output_size <= 8
        sizes = [r.input_size for r in report.rounds]
        assert all(a > b for a, b in zip(sizes, sizes[1:]))

    def test_best_value_non_decreasing_across_rounds(self):
        obj = exemplar(n=200)
        cfg = TreeConfig(k=10, mu=30, solver="greedy", master_seed=4)
        report = tree_compress(obj, cfg)
        best_so_far = 0.0
        per_round_best = []
        for rnd in report.rounds:
            best_so_far = max(best_so_far, max(m.value for m in rnd.machines))
            per_round_best.append(best_so_far)
        assert per_round_best == sorted(per_round_best)
        assert report.best.value == best_so_far

    def test_observed_rounds_within_bound_on_sweep(self):
        # Whole-number mu/k ratios, as in the reference sweeps.
        rng = np.random.default_rng(5)
        for n in (100, 400, 1500):
            obj = WeightedCoverageObjective.modular(rng.uniform(0.5, 2.0, size=n))
            for k in (2, 10):
                for mu in (2 * k, 4 * k, 8 * k, n):
                    cfg = TreeConfig(k=k, mu=mu, solver="lazy", master_seed=6)
                    report = tree_compress(obj, cfg)
                    assert report.round_count <= report.round_bound
                    assert report.round_bound == round_count(n, k, mu)

    def test_round_cap_engages_at_tiny_capacity(self):
        # With mu barely above k the ceil in m_t = ceil(|A|/mu) adds up
        # to k items of slack per round, so the run-until-one-machine
        # rule alone would need more rounds than the shrink-factor
        # bound. The loop caps at the bound instead: the final round
        # here still has two machines, and the best partial solution is
        # the complete answer.
        n, k, mu = 400, 2, 5
        obj = WeightedCoverageObjective.modular(
            np.random.default_rng(50).uniform(0.5, 2.0, size=n)
        )
        report = tree_compress(obj, TreeConfig(k=k, mu=mu, solver="lazy", master_seed=6))
        assert report.round_bound == 6
        assert report.round_count == 6
        assert report.rounds[-1].machine_count > 1
        assert len(report.best.selected) <= k
        fixed = tree_compress(
            obj, TreeConfig(k=k, mu=mu, solver="lazy", master_seed=6, fixed_rounds=True)
        )
        assert fixed.round_count == 6
        assert fixed.best.value == report.best.value

    def test_deterministic_across_worker_counts(self):
        cfgs = [
            TreeConfig(k=10, mu=20, solver="greedy", master_seed=7, workers=w)
            for w in (1, 4)
        ]
        reports = [tree_compress(exemplar(n=160), cfg) for cfg in cfgs]
        a, b = reports
        assert a.best.selected == b.best.selected
        assert a.best.value == b.best.value
        assert a.total_oracle_calls == b.total_oracle_calls
        assert [r.output_size for r in a.rounds] == [r.output_size for r in b.rounds]
        for ra, rb in zip(a.rounds, b.rounds):
            for ma, mb in zip(ra.machines, rb.machines):
                assert (ma.value, ma.oracle_calls) == (mb.value, mb.oracle_calls)

    def test_deterministic_per_master_seed(self):
        a = tree_compress(exemplar(), TreeConfig(k=10, mu=20, solver="greedy", master_seed=8))
        b = tree_compress(exemplar(), TreeConfig(k=10, mu=20, solver="greedy", master_seed=8))
        c = tree_compress(exemplar(), TreeConfig(k=10, mu=20, solver="greedy", master_seed=9))
        assert a.best.selected == b.best.selected
        assert a.best.selected != c.best.selected or a.best.value != c.best.value

    def test_stochastic_solver_deterministic_per_master_seed(self):
        cfg = TreeConfig(k=10, mu=20, solver="stochastic:0.5", master_seed=10)
        a = tree_compress(exemplar(), cfg)
        b = tree_compress(exemplar(), cfg)
        assert a.best.selected == b.best.selected

    def test_fixed_round_schedule(self):
        obj = exemplar(n=160)
        cfg = TreeConfig(k=10, mu=20, solver="greedy", master_seed=11, fixed_rounds=True)
        report = tree_compress(obj, cfg)
        assert report.round_count == report.round_bound == 4

    def test_knapsack_constraint_runs_feasible_sets(self):
        rng = np.random.default_rng(12)
        weights = rng.uniform(0.5, 1.5, size=100)
        cons = KnapsackConstraint(weights, budget=5.0)
        obj = exemplar(n=100)
        cfg = TreeConfig(k=10, mu=20, solver="greedy", constraint=cons, master_seed=13)
        report = tree_compress(obj, cfg)
        assert cons.check_set(report.best.selected)
        for rnd in report.rounds:
            for m in rnd.machines:
                assert m.input_size <= 20

    def test_non_progress_guard(self):
        # The round cap already contains a "compressor" that returns its
        # whole input; the guard protects the remaining case, a schedule
        # longer than the configured patience (here bound 14 > guard 8).
        def identity(oracle, ground, k, seed):
            items = [int(e) for e in np.asarray(ground)]
            return SolverResult(items, oracle.value(items), 1, [])

        obj = WeightedCoverageObjective.modular(
            np.random.default_rng(14).uniform(0.5, 2.0, size=400)
        )
        assert round_count(400, 2, 3) == 14
        cfg = TreeConfig(
            k=2,
            mu=3,
            solver=SolverSpec("identity", identity, beta=None),
            master_seed=14,
            max_rounds_guard=8,
        )
        with pytest.raises(NonProgressError):
            tree_compress(obj, cfg)

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            TreeConfig(k=10, mu=10, solver="greedy")
        with pytest.raises(ConfigError):
            TreeConfig(k=0, mu=5, solver="greedy")
        with pytest.raises(ConfigError):
            TreeConfig(k=2, mu=5, solver="greedy", workers=0)
        with pytest.raises(ConfigError):
            TreeConfig(
                k=2, mu=5, solver="threshold:0.1",
                constraint=KnapsackConstraint([1.0] * 10, budget=3.0),
            )

    def test_trace_lines_shape(self):
        report = tree_compress(exemplar(), TreeConfig(k=10, mu=20, solver="greedy"))
        lines = trace_lines(report)
        machine_rows = sum(r.machine_count for r in report.rounds)
        assert len(lines) == machine_rows + 1
        assert lines[0].split() == [
            "t", "machine", "input_size", "output_size", "value", "oracle_calls",
        ]
        assert lines[1].split()[0] == "0"


class TestRandGreedi:
    def test_single_machine_equals_centralized(self):
        res = rand_greedi(exemplar(n=50), k=6, m=1, seed=0)
        central = greedy(exemplar(n=50), range(50), CardinalityConstraint(6))
        assert res.best.selected == central.selected
        assert res.best.value == central.value

    def test_capacity_violation_on_union(self):
        # ceil(400/7) = 58 items per machine fits mu = 64, but the union
        # of 7 partial solutions has 70 items and does not.
        obj = exemplar(n=400)
        with pytest.raises(CapacityError, match="union"):
            rand_greedi(obj, k=10, m=7, seed=1, mu=64)

    def test_capacity_violation_on_part_size(self):
        obj = exemplar(n=400)
        with pytest.raises(CapacityError, match="per machine"):
            rand_greedi(obj, k=10, m=3, seed=2, mu=100)

    def test_no_check_without_mu(self):
        res = rand_greedi(exemplar(n=100), k=5, m=4, seed=3)
        assert len(res.rounds) == 2
        assert res.rounds[0].machine_count == 4

    def test_matches_tree_at_high_capacity_matched_seeds(self):
        # With capacity at least sqrt(n k) the tree collapses to two
        # rounds and, under a matched partition seed, reproduces the
        # two-round baseline exactly.
        n, k, mu, seed = 200, 5, 40, 17
        m = -(-n // mu)
        obj_tree = exemplar(n=n)
        obj_base = exemplar(n=n)
        tree = tree_compress(obj_tree, TreeConfig(k=k, mu=mu, solver="greedy", master_seed=seed))
        base = rand_greedi(obj_base, k=k, m=m, seed=seed, mu=mu)
        assert tree.round_count == 2
        assert mu * mu >= n * k
        assert tree.best.selected == base.best.selected
        assert tree.best.value == base.best.value

    def test_errors(self):
        with pytest.raises(ConfigError):
            rand_greedi(exemplar(n=10), k=2, m=0, seed=0)
        with pytest.raises(ConfigError):
            rand_greedi(exemplar(n=10), k=0, m=2, seed=0)


class TestRandomBaseline:
    def test_full_set(self):
        obj = exemplar(n=12)
        res = random_baseline(obj, k=12, seed=0)
        assert res.selected == list(range(12))
        assert res.value == obj.value(range(12))

    def test_deterministic_per_seed(self):
        a = random_baseline(exemplar(n=50), k=5, seed=4)
        b = random_baseline(exemplar(n=50), k=5, seed=4)
        c = random_baseline(exemplar(n=50), k=5, seed=5)
        assert a.selected == b.selected
        assert a.selected != c.selected

    def test_oracle_called_once(self):
        obj = exemplar(n=30)
        res = random_baseline(obj, k=4, seed=6)
        assert res.oracle_calls == 1
        assert len(res.selected) == 4

    def test_bounds(self):
        with pytest.raises(ConfigError):
            random_baseline(exemplar(n=10), k=11, seed=0)
        with pytest.raises(ConfigError):
            random_baseline(exemplar(n=10), k=0, seed=0)


class TestSurvivalBound:
    def test_trivial_single_part_retains_everything(self):
        obj = WeightedCoverageObjective.modular([5.0, 1.0, 0.5, 0.2])
        report = check_survival_bound(
            obj, range(4), l=1, target=[0], k=1, trials=10, seed=0
        )
        assert report.holds
        assert report.mean_surviving_value == report.target_value == 5.0

    def test_random_coverage_instances(self):
        rng = np.random.default_rng(7)
        for trial in range(5):
            obj = random_coverage(rng, n=15)
            target = greedy(obj, range(15), CardinalityConstraint(3)).selected
            report = check_survival_bound(
                obj, range(15), l=3, target=target, k=3, trials=300, seed=trial
            )
            assert report.holds

    def test_with_exact_optimum_as_target(self):
        rng = np.random.default_rng(8)
        obj = random_coverage(rng, n=12)
        opt = brute_force_opt(obj, range(12), CardinalityConstraint(3))
        report = check_survival_bound(
            obj, range(12), l=3, target=opt.selected, k=3, trials=300, seed=9
        )
        assert report.holds

    def test_validation(self):
        obj = WeightedCoverageObjective.modular([1.0] * 6)
        with pytest.raises(ConfigError):
            check_survival_bound(obj, range(6), l=2, target=[0, 1, 2], k=2, trials=5, seed=0)
        with pytest.raises(ConfigError):
            check_survival_bound(obj, range(4), l=2, target=[5], k=2, trials=5, seed=0)
