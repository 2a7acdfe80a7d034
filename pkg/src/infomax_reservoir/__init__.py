"""Recurrent infomax for stochastic binary recurrent networks.

Simulation of input-driven binary stochastic units with homeostatic rate
control, information-maximising weight updates, and readout benchmarks
(memory capacity, Boolean-function capacity) for the trained networks.
"""

from .errors import ConfigurationError, DegenerateStatsError, SnapshotError
from .network import (
    NetworkParams,
    NetworkState,
    StateTrace,
    init_network,
    membrane_potential,
    firing_probability,
    step,
    update_bias,
    run_phase,
    zero_state,
)
from .infomax import (
    BlockStats,
    MiReport,
    RIConfig,
    BlockResult,
    accumulate_stats,
    merge_stats,
    gaussian_mi,
    mi_gradient,
    apply_ri_update,
    run_ri_block,
)

from .benchmarks import (
    BenchmarkPhases,
    BenchmarkRun,
    BooleanRule,
    EvalReport,
    ReadoutModel,
    RuleResult,
    TaskScore,
    boolean_capacity,
    determination_coefficient,
    enumerate_rules,
    evaluate_tasks,
    is_linearly_separable,
    memory_capacity,
    rule_from_id,
    rule_target,
    run_benchmark_phases,
    train_readout,
    truth_table_separable,
)
from .analysis import (
    ConnectionRecord,
    WeightSummary,
    neuron_input_mi,
    top_connections,
    weight_summary,
)
from .io import (load_snapshot, save_snapshot, read_trace_csv,
                 write_trace_csv)
from .runner import (
    ExperimentConfig,
    RunTrace,
    TrialTrace,
    evaluate_checkpoint,
    full_profile,
    reduced_profile,
    run_experiment,
    run_trial,
    sweep_report,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError", "DegenerateStatsError", "SnapshotError",
    "NetworkParams", "NetworkState", "StateTrace", "init_network",
    "membrane_potential", "firing_probability", "step", "update_bias",
    "run_phase", "zero_state",
    "BlockStats", "MiReport", "RIConfig", "BlockResult",
    "accumulate_stats", "merge_stats", "gaussian_mi", "mi_gradient",
    "apply_ri_update", "run_ri_block",
    "BenchmarkPhases", "BenchmarkRun", "BooleanRule", "EvalReport",
    "ReadoutModel", "RuleResult", "TaskScore", "boolean_capacity",
    "determination_coefficient", "enumerate_rules", "evaluate_tasks",
    "is_linearly_separable", "memory_capacity", "rule_from_id",
    "rule_target", "run_benchmark_phases", "train_readout",
    "truth_table_separable",
    "ConnectionRecord", "WeightSummary", "neuron_input_mi",
    "top_connections", "weight_summary",
    "load_snapshot", "save_snapshot", "read_trace_csv", "write_trace_csv",
    "ExperimentConfig", "RunTrace", "TrialTrace", "evaluate_checkpoint",
    "full_profile", "reduced_profile", "run_experiment", "run_trial",
    "sweep_report",
]
