"""Distributed submodular maximization on capacity-bounded machines.

The package provides monotone submodular objectives with incremental
evaluation, sequential solvers with declared consistency factors, and a
multi-round compression scheme that repeatedly partitions the ground
set across machines and unions their per-machine selections until one
machine can hold everything.
"""

from .dataset import (
    Dataset,
    DatasetError,
    load_dense,
    normalize,
    save_dense,
    subsample,
    synth_gaussian_mixture,
)
from .distree import (
    CapacityError,
    ConfigError,
    ExecutionReport,
    MachineTrace,
    NonProgressError,
    RoundTrace,
    SurvivalBoundReport,
    TreeConfig,
    check_survival_bound,
    rand_greedi,
    random_baseline,
    round_count,
    trace_lines,
    tree_compress,
)
from .experiment import (
    ConfigFieldError,
    ExperimentConfig,
    ResultRow,
    SweepRow,
    aggregate,
    capacity_sweep,
    emit_csv,
    read_config_pairs,
    run_experiment,
)
from .objectives import (
    ExemplarObjective,
    LogDetObjective,
    ObjectiveOracle,
    SelectionCursor,
    UnknownItemError,
    WeightedCoverageObjective,
)
from .partition import PartitionPlan, balanced_random_partition, subseed
from .solvers import (
    CardinalityConstraint,
    ConsistencyReport,
    Constraint,
    InstanceTooLargeError,
    IntersectionConstraint,
    KnapsackConstraint,
    SolverResult,
    SolverSpec,
    brute_force_opt,
    check_beta_nice,
    greedy,
    lazy_greedy,
    parse_solver_spec,
    stochastic_greedy,
    threshold_greedy,
)

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "CardinalityConstraint",
    "ConfigError",
    "ConfigFieldError",
    "ConsistencyReport",
    "Constraint",
    "Dataset",
    "DatasetError",
    "ExecutionReport",
    "ExemplarObjective",
    "ExperimentConfig",
    "InstanceTooLargeError",
    "IntersectionConstraint",
    "KnapsackConstraint",
    "LogDetObjective",
    "MachineTrace",
    "NonProgressError",
    "ObjectiveOracle",
    "PartitionPlan",
    "ResultRow",
    "RoundTrace",
    "SelectionCursor",
    "SolverResult",
    "SolverSpec",
    "SurvivalBoundReport",
    "SweepRow",
    "TreeConfig",
    "UnknownItemError",
    "WeightedCoverageObjective",
    "aggregate",
    "balanced_random_partition",
    "brute_force_opt",
    "capacity_sweep",
    "check_beta_nice",
    "check_survival_bound",
    "emit_csv",
    "greedy",
    "lazy_greedy",
    "load_dense",
    "normalize",
    "parse_solver_spec",
    "rand_greedi",
    "random_baseline",
    "read_config_pairs",
    "round_count",
    "run_experiment",
    "save_dense",
    "stochastic_greedy",
    "subsample",
    "subseed",
    "synth_gaussian_mixture",
    "threshold_greedy",
    "trace_lines",
    "tree_compress",
    "__version__",
]
