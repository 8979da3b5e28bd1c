"""delaysync: distributed adaptive leader tracking with state and input delays.

A fleet of linear agents, each with a delayed internal coupling and a
delayed input channel, follows a stable reference model over a weighted
graph.  The package provides the dense linear algebra kit, graph checks,
a fixed-step delay integrator, the plant and controller pieces, a scenario
harness, and a small CLI (``delaysync run|validate|list-builtins``).
"""

from .adaptive import (
    ControllerConfig,
    ControllerState,
    augmented_error,
    auxiliary_input,
    control,
    gain_derivatives,
    mismatch,
    predict_leader_regressor,
    regressor,
)
from .dde import DdeState, HistoryBuffer, rk4_ode_step, run, sample, step_rk4
from .errors import (
    DelaySyncError,
    DimensionMismatch,
    DivergenceDetected,
    EmptyTrace,
    FutureQuery,
    NoMatchingSolution,
    NonFiniteState,
    NotHurwitz,
    NotPositiveDefinite,
    NotSymmetric,
    ParseError,
    SingularMatrix,
    SingularWeight,
    StaleQuery,
    UnbalancedTopology,
    ValidationError,
)
from .harness import (
    CheckResult,
    ReferenceSignal,
    Scenario,
    SimTrace,
    TraceMetrics,
    lyapunov_monitor,
    metrics,
    run_scenario,
    validate_scenario,
)
from .linalg import (
    cholesky,
    kron,
    solve_linear,
    solve_lyapunov,
    symmetric_eigenvalues,
)
from .plant import (
    AgentDynamics,
    FleetDynamics,
    LeaderModel,
    MatchingGains,
    agent_derivative,
    aux_derivative,
    leader_derivative,
    matching_gains,
)
from .topology import (
    ThresholdReport,
    Topology,
    TopologyMatrices,
    build_matrices,
    check_balanced,
    check_threshold,
    leader_reachable,
)

__version__ = "0.1.0"

__all__ = [
    "AgentDynamics",
    "CheckResult",
    "ControllerConfig",
    "ControllerState",
    "DdeState",
    "DelaySyncError",
    "DimensionMismatch",
    "DivergenceDetected",
    "EmptyTrace",
    "FleetDynamics",
    "FutureQuery",
    "HistoryBuffer",
    "LeaderModel",
    "MatchingGains",
    "NoMatchingSolution",
    "NonFiniteState",
    "NotHurwitz",
    "NotPositiveDefinite",
    "NotSymmetric",
    "ParseError",
    "ReferenceSignal",
    "Scenario",
    "SimTrace",
    "SingularMatrix",
    "SingularWeight",
    "StaleQuery",
    "ThresholdReport",
    "Topology",
    "TopologyMatrices",
    "TraceMetrics",
    "UnbalancedTopology",
    "ValidationError",
    "agent_derivative",
    "augmented_error",
    "aux_derivative",
    "auxiliary_input",
    "build_matrices",
    "check_balanced",
    "check_threshold",
    "cholesky",
    "control",
    "gain_derivatives",
    "kron",
    "leader_derivative",
    "leader_reachable",
    "lyapunov_monitor",
    "matching_gains",
    "metrics",
    "mismatch",
    "predict_leader_regressor",
    "regressor",
    "rk4_ode_step",
    "run",
    "run_scenario",
    "sample",
    "solve_linear",
    "solve_lyapunov",
    "step_rk4",
    "symmetric_eigenvalues",
    "validate_scenario",
]
