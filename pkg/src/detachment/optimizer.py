"""Detachment search: greedy, exhaustive and min-cut."""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from typing import Mapping, Optional, Tuple

import networkx as nx

from .cascade import (
    DEFAULT_EDGE_CAP,
    EpoiEstimate,
    RngSpec,
    SourceDistribution,
    epoi_on_network,
    estimate_influence,
    exact_epoi_on_network,
)
from .errors import DisconnectedTerminals, InputError, NoBridges, NoCandidates, TooLarge
from .network import (
    BridgeBlockNetwork,
    CircleCollection,
    DetachmentPair,
    InducedNetwork,
    apply_detachment,
    apply_detachment_set,
    build_bbn,
    detachment_edge_loss,
    enumerate_candidates,
    induce_network,
)

DEFAULT_TRIALS = 10_000
DEFAULT_TERMINAL_TRIALS = 1_000
DEFAULT_COMBINATION_CAP = 5_000


@dataclass(frozen=True)
class Evaluator:
    """How EPOI is evaluated: exactly, or by Monte Carlo with ``trials`` per circle."""

    kind: str = "monte_carlo"
    trials: int = DEFAULT_TRIALS
    edge_cap: int = DEFAULT_EDGE_CAP

    @classmethod
    def exact(cls, edge_cap: int = DEFAULT_EDGE_CAP) -> "Evaluator":
        return cls("exact", 0, edge_cap)

    @classmethod
    def monte_carlo(cls, trials: int = DEFAULT_TRIALS) -> "Evaluator":
        return cls("monte_carlo", trials)

    def __call__(self, circles, network, p, rng) -> EpoiEstimate:
        if self.kind == "exact":
            return exact_epoi_on_network(circles, network, p, self.edge_cap)
        return epoi_on_network(circles, network, p, self.trials, rng)


@dataclass(frozen=True)
class OptimizationResult:
    detachments: Tuple[DetachmentPair, ...]
    final_circles: CircleCollection
    epoi_trace: Tuple[EpoiEstimate, ...]
    method: str
    wall_time: float
    terminals: Optional[Tuple[str, str]] = None

    @property
    def final_epoi(self) -> EpoiEstimate:
        return self.epoi_trace[-1]

    def to_json(self) -> dict:
        out = {
            "method": self.method,
            "detachments": [{"vertex": v, "circle": c} for v, c in self.detachments],
            "epoi_trace": [e.to_json() for e in self.epoi_trace],
            "final_epoi": self.final_epoi.value,
            "wall_time": self.wall_time,
        }
        if self.terminals is not None:
            out["terminals"] = list(self.terminals)
        return out


@dataclass(frozen=True)
class MinCutConfig:
    terminal_selection: str = "largest_influence"  # or largest_size, explicit
    capacity_policy: str = "unit"  # or weighted
    terminals: Optional[Tuple[str, str]] = None
    terminal_trials: int = DEFAULT_TERMINAL_TRIALS

    def __post_init__(self):
        if self.terminal_selection not in ("largest_influence", "largest_size", "explicit"):
            raise InputError(f"unknown terminal selection {self.terminal_selection!r}")
        if self.capacity_policy not in ("unit", "weighted"):
            raise InputError(f"unknown capacity policy {self.capacity_policy!r}")
        if self.terminal_selection == "explicit":
            if self.terminals is None or len(self.terminals) != 2 or self.terminals[0] == self.terminals[1]:
                raise InputError("explicit terminals must name two distinct circles")


def _detached_network(circles: CircleCollection, network: InducedNetwork, pair: DetachmentPair):
    """Circles and induced network after one detachment, without re-inducing
    from scratch when no vertex is orphaned."""
    after = apply_detachment(circles, pair)
    if after.orphaned != circles.orphaned:
        return after, induce_network(after, network.weights)
    return after, network.without_edges(detachment_edge_loss(circles, pair))


def _resolve(circles, weights, p):
    network = induce_network(circles, weights)
    if p is None:
        p = SourceDistribution.uniform(circles)
    elif not isinstance(p, SourceDistribution):
        p = SourceDistribution(p)
    p.check_support(circles)
    return network, p


def greedy_detach(
    circles: CircleCollection,
    weights: Mapping,
    p: Optional[SourceDistribution] = None,
    m: int = 1,
    evaluator: Evaluator = Evaluator(),
    rng: RngSpec = RngSpec(),
) -> OptimizationResult:
    """Commit, m times, the single bridge-block link whose detachment gives the
    lowest EPOI. Every candidate in every step is evaluated with the same
    ``rng``, so Monte Carlo comparisons use common random numbers."""
    if m < 1:
        raise InputError("m must be >= 1")
    started = time.perf_counter()
    network, p = _resolve(circles, weights, p)
    trace = [evaluator(circles, network, p, rng)]
    chosen = []
    for step in range(m):
        candidates = enumerate_candidates(build_bbn(circles))
        if not candidates:
            raise NoCandidates(f"no bridge links left after {step} of {m} detachments")
        best = None
        for pair in candidates:
            after, net_after = _detached_network(circles, network, pair)
            est = evaluator(after, net_after, p, rng)
            # strict comparison keeps the first minimizer in (circle, vertex) order
            if best is None or est.value < best[0].value:
                best = (est, pair, after, net_after)
        est, pair, circles, network = best
        chosen.append(pair)
        trace.append(est)
    return OptimizationResult(tuple(chosen), circles, tuple(trace), "greedy", time.perf_counter() - started)


def exhaustive_detach(
    circles: CircleCollection,
    weights: Mapping,
    p: Optional[SourceDistribution] = None,
    m: int = 1,
    combination_cap: int = DEFAULT_COMBINATION_CAP,
    edge_cap: int = DEFAULT_EDGE_CAP,
) -> OptimizationResult:
    """Exact minimizer over every m-subset of bridge-block links."""
    started = time.perf_counter()
    network, p = _resolve(circles, weights, p)
    candidates = enumerate_candidates(build_bbn(circles))
    if m < 1 or m > len(candidates):
        raise TooLarge(f"cannot choose {m} detachments from {len(candidates)} links")
    if math.comb(len(candidates), m) > combination_cap:
        raise TooLarge(f"C({len(candidates)}, {m}) exceeds the cap of {combination_cap} combinations")
    if network.n_edges > edge_cap:
        raise TooLarge(f"{network.n_edges} directed edges exceed the exact-oracle cap of {edge_cap}")
    baseline = exact_epoi_on_network(circles, network, p, edge_cap)
    best = None
    for subset in itertools.combinations(candidates, m):
        after = apply_detachment_set(circles, subset)
        est = exact_epoi_on_network(after, induce_network(after, weights), p, edge_cap)
        if best is None or est.value < best[0].value:
            best = (est, subset, after)
    est, subset, after = best
    return OptimizationResult(tuple(subset), after, (baseline, est), "exhaustive", time.perf_counter() - started)


def _select_terminals(circles, network, bbn: BridgeBlockNetwork, config: MinCutConfig, rng: RngSpec):
    components = bbn.block_components()
    if config.terminal_selection == "explicit":
        a, b = config.terminals
        for cid in (a, b):
            if cid not in circles.circles:
                raise InputError(f"unknown terminal circle {cid!r}")
        if bbn.separated(a, b):
            raise DisconnectedTerminals(f"circles {a} and {b} are already separated")
        return a, b
    pool = components[0] if components else []
    if len(pool) < 2:
        raise DisconnectedTerminals("no bridge-block component holds two circles")
    if config.terminal_selection == "largest_size":
        ranked = sorted(pool, key=lambda c: (-len(circles[c]), c))
    else:
        score = {c: estimate_influence(network, circles[c], config.terminal_trials, rng.substream("terminal", c)).mean for c in pool}
        ranked = sorted(pool, key=lambda c: (-score[c], c))
    return ranked[0], ranked[1]


def _link_capacity(circles, weights, circle: str, vertex: str) -> float:
    """Transmission mass from a bridge into one of its circles."""
    return math.fsum(weights[(vertex, x)] for x in circles[circle] if x != vertex)


def _residual_reachable(g: nx.DiGraph, flow: dict, source, tol: float = 1e-9) -> set:
    """Nodes reachable from ``source`` through arcs with spare residual capacity."""
    seen = {source}
    stack = [source]
    while stack:
        u = stack.pop()
        for v in set(g.successors(u)) | set(g.predecessors(u)):
            if v in seen:
                continue
            spare = flow[v].get(u, 0.0) if g.has_edge(v, u) else 0.0
            if g.has_edge(u, v):
                spare += g[u][v]["capacity"] - flow[u][v]
            if spare > tol:
                seen.add(v)
                stack.append(v)
    return seen


def bbn_min_cut(circles: CircleCollection, source: str, sink: str, capacity_policy: str = "unit", weights=None):
    """Minimum set of bridge-block links separating two circles.

    The returned cut is the canonical one whose source side is the set of
    nodes reachable from the source in the residual network.
    """
    bbn = build_bbn(circles)
    if not bbn.links:
        raise NoBridges("the bridge-block network has no links")
    g = nx.DiGraph()
    caps = {}
    for c, v in sorted(bbn.links):
        cap = 1.0 if capacity_policy == "unit" else _link_capacity(circles, weights, c, v)
        caps[(c, v)] = cap
        g.add_edge(("block", c), ("bridge", v), capacity=cap)
        g.add_edge(("bridge", v), ("block", c), capacity=cap)
    big = (len(bbn.links) + 1) if capacity_policy == "unit" else math.fsum(caps.values()) + 1.0
    g.add_edge("s", ("block", source), capacity=big)
    g.add_edge(("block", sink), "t", capacity=big)
    value, flow = nx.maximum_flow(g, "s", "t")
    side_s = _residual_reachable(g, flow, "s")
    cut = []
    for c, v in sorted(bbn.links):
        b, r = ("block", c), ("bridge", v)
        if (b in side_s) != (r in side_s):
            cut.append(DetachmentPair(v, c))
    return value, cut


def min_cut_detach(
    circles: CircleCollection,
    weights: Mapping,
    p: Optional[SourceDistribution] = None,
    config: MinCutConfig = MinCutConfig(),
    mc_trials: int = DEFAULT_TRIALS,
    rng: RngSpec = RngSpec(),
    evaluator: Optional[Evaluator] = None,
) -> OptimizationResult:
    """Separate the two chosen terminal circles by a minimum bridge-block cut;
    each cut link is one detachment."""
    started = time.perf_counter()
    network, p = _resolve(circles, weights, p)
    bbn = build_bbn(circles)
    if not bbn.links:
        raise NoBridges("the bridge-block network has no links")
    source, sink = _select_terminals(circles, network, bbn, config, rng)
    _, cut = bbn_min_cut(circles, source, sink, config.capacity_policy, network.weights)
    after = apply_detachment_set(circles, cut)
    if not build_bbn(after).separated(source, sink):
        raise AssertionError(f"cut {cut} failed to separate {source} from {sink}")
    evaluator = evaluator or Evaluator.monte_carlo(mc_trials)
    baseline = evaluator(circles, network, p, rng)
    final = evaluator(after, induce_network(after, network.weights), p, rng)
    return OptimizationResult(tuple(cut), after, (baseline, final), "mincut", time.perf_counter() - started, (source, sink))


@dataclass(frozen=True)
class MethodComparison:
    mincut_size: int
    epoi_base: EpoiEstimate
    epoi_cut: EpoiEstimate
    epoi_greedy: EpoiEstimate
    cut: OptimizationResult
    greedy: OptimizationResult

    @property
    def epoi_stderr(self) -> float:
        """Largest standard error among the three reported EPOI values."""
        return max(self.epoi_base.std_error, self.epoi_cut.std_error, self.epoi_greedy.std_error)

    def to_json(self) -> dict:
        return {
            "mincut": self.mincut_size,
            "epoi_base": self.epoi_base.value,
            "epoi_cut": self.epoi_cut.value,
            "epoi_greedy": self.epoi_greedy.value,
            "stderr_base": self.epoi_base.std_error,
            "stderr_cut": self.epoi_cut.std_error,
            "stderr_greedy": self.epoi_greedy.std_error,
            "terminals": list(self.cut.terminals),
            "cut": [list(pair) for pair in self.cut.detachments],
            "greedy": [list(pair) for pair in self.greedy.detachments],
        }


def compare_methods(
    circles: CircleCollection,
    weights: Mapping,
    p: Optional[SourceDistribution] = None,
    mc_trials: int = DEFAULT_TRIALS,
    rng: RngSpec = RngSpec(),
    search_trials: Optional[int] = None,
    config: MinCutConfig = MinCutConfig(),
) -> MethodComparison:
    """Min-cut first, then greedy with m equal to the cut size.

    The greedy search uses ``search_trials`` per circle on ``rng``; the three
    reported EPOI values are then re-estimated with ``mc_trials`` on a fresh
    stream shared by all three, so the greedy figure carries no selection
    bias from its own search.
    """
    network, p = _resolve(circles, weights, p)
    cut = min_cut_detach(circles, weights, p, config, search_trials or mc_trials, rng)
    greedy = greedy_detach(circles, weights, p, len(cut.detachments), Evaluator.monte_carlo(search_trials or mc_trials), rng)
    report = rng.substream("report")
    w = network.weights
    base = epoi_on_network(circles, network, p, mc_trials, report)
    cut_epoi = epoi_on_network(cut.final_circles, induce_network(cut.final_circles, w), p, mc_trials, report)
    greedy_epoi = epoi_on_network(greedy.final_circles, induce_network(greedy.final_circles, w), p, mc_trials, report)
    return MethodComparison(len(cut.detachments), base, cut_epoi, greedy_epoi, cut, greedy)
