"""Routing engine and simulator for quantum networks with fusion swapping."""

from .netgraph import (
    Demand,
    Edge,
    GenParams,
    GeneratorKind,
    Network,
    Node,
    NodeKind,
    edge_key,
    generate,
    link_success_prob,
    load_demands,
    load_network,
    save_network,
)
from .rate import (
    FlowGraph,
    OutcomeSample,
    WidthedPath,
    channel_rate,
    classic_path_rate,
    exhaustive_rate,
    flow_graph_rate,
    is_series_parallel,
    make_path,
    monte_carlo_rate,
    path_rate,
)
from .router import (
    CandidateSet,
    QubitLedger,
    RoutePlan,
    alg1_best_path,
    alg2_candidates,
    alg3_merge,
    alg4_augment,
    run_pipeline,
)
from .baseline import BaselinePlan, ScoringMode, run_qcast, run_qcast_n
from .harness import (
    Algorithm,
    ExperimentConfig,
    ResultRow,
    SweepVariable,
    emit_csv,
    parse_config,
    run_experiment,
)

__version__ = "0.1.0"
