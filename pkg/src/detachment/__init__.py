"""Detachment problem: minimize outside influence in circle-induced networks
by removing individual (vertex, circle) memberships."""
from .cascade import (
    CascadeTrace,
    EpoiEstimate,
    InfluenceEstimate,
    RngSpec,
    SourceDistribution,
    estimate_epoi,
    estimate_influence,
    exact_epoi,
    exact_influence,
    run_cascade,
)
from .generator import GeneratorParams, StatsReport, generate_circles, generate_instance, graph_stats, sample_weights
from .network import (
    BridgeBlockNetwork,
    CircleCollection,
    DetachmentPair,
    InducedNetwork,
    apply_detachment,
    apply_detachment_set,
    build_bbn,
    enumerate_candidates,
    fill_weights,
    flat_weights,
    induce_network,
    load_circles,
    load_weights,
    save_circles,
    save_weights,
)
from .optimizer import (
    Evaluator,
    MinCutConfig,
    OptimizationResult,
    compare_methods,
    exhaustive_detach,
    greedy_detach,
    min_cut_detach,
)

__all__ = [name for name in dir() if not name.startswith("_")]
