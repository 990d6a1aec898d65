"""Exact and simulated analysis of pass-and-swap queueing models."""

__version__ = "0.1.0"

from .errors import (
    CapabilityError,
    ConvergenceError,
    DeadlockError,
    DomainError,
    ModelFormatError,
    PandsError,
    ResourceError,
    StructureError,
    UnsupportedFeatureError,
    UsageError,
)
from .model import (
    EMPTY,
    Macrostate,
    MultiServerRates,
    PandsQueue,
    RateFunction,
    State,
    SwappingGraph,
    TableRates,
    ValidationReport,
    all_macrostates,
    all_states,
    delta_mu,
    macrostate,
    mu,
    validate_rate_function,
)
from .dynamics import (
    CompletionOutcome,
    Transition,
    apply_completion,
    open_transitions,
    predecessors,
)
from .product_form import (
    BalanceWeight,
    PartialBalanceReport,
    StabilityReport,
    TruncatedDistribution,
    balance,
    flow_rates,
    log_state_weight,
    macrostate_flow_identity,
    stability_check,
    state_weight,
    stationary_truncated,
    verify_partial_balance,
)
from .closed import (
    ClassPartition,
    ClosedAnalysis,
    ClosedDistribution,
    ClosedQueue,
    IsomorphicModel,
    PlacementOrder,
    TandemAnalysis,
    TandemDistribution,
    TandemNetwork,
    TandemState,
    TandemTransition,
    adheres,
    adheres_tandem,
    analyze_closed,
    analyze_tandem,
    closed_step,
    closed_transitions,
    communicating_classes,
    enumerate_adhering,
    enumerate_placement_orders,
    enumerate_sigma,
    first_queue_macrostates,
    isomorphic_model,
    order_from_state,
    stationary_closed,
    stationary_tandem,
    tandem_step,
    tandem_transitions,
)
from .cluster import (
    ClusterMetrics,
    ClusterSpec,
    CompiledTandem,
    TraceEntry,
    compile_cluster,
    metrics,
    protocol_trace,
)
from .oracle import (
    GeneratorMatrix,
    StationarySolution,
    build_generator,
    solve_stationary,
    solve_unique,
    total_variation,
)
from .sim import (
    ProtocolSimulator,
    SimConfig,
    SimResult,
    simulate,
    simulate_protocol,
)
