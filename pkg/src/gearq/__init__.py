"""Throughput and delay of selective-repeat ARQ over Gilbert-Elliott links.

Analytic matrix-MGF evaluation, a matrix signal-flow-graph engine, and a
slot-level Monte Carlo simulator for three retransmission schemes
(uncoded, feedback soft combining, MDS-coded frames) over two-state
Markov erasure channels with unreliable cumulative feedback.
"""

from .channel import (
    CompositeChannel,
    DegenerateChainError,
    HalfChannel,
    ParameterError,
    build_composite,
    build_half_channel,
    joint_observation_matrices,
    stationary_distribution,
    symmetric_composite,
)
from .genfunc import (
    DualMatrix,
    ImproperMGFError,
    NonConvergenceError,
    dual_add,
    dual_geo,
    dual_identity,
    dual_mul,
    dual_sum_truncated,
    dual_term,
    dual_zero,
    scalarize,
    spectral_radius,
)
from .protocols import (
    Metrics,
    ModelSwitches,
    NominalAttempts,
    ProtocolParams,
    SoftCombiningAttempts,
    build_arq_mgf,
    harq_metrics,
    uncoded_metrics,
)
from .coded import (
    CodedKernel,
    build_coded_mgf,
    coded_metrics,
    default_coded_kernel,
)
from .flowgraph import (
    FlowGraph,
    GraphError,
    build_uncoded_graph,
    eliminate_node,
    graph_gain,
)
from .sim import SimConfig, SimStats, ge_run, ge_step, pooled_estimate, simulate
from .cli import SweepConfig, parse_sweep_config, run_sweep

__version__ = "0.1.0"
