"""Random circle collections with a controlled bridge/link profile.

Circles are filled by a mix of uniform and size-preferential choice, the
bridge-block network is forced connected, and extra bridges and links are
added until the vertex/circle/bridge/link ratios are met.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import asdict, dataclass
from typing import List, Optional

import numpy as np

from .cascade import RngSpec
from .errors import InfeasibleTargets
from .network import (
    CircleCollection,
    EdgeWeights,
    InducedNetwork,
    build_bbn,
    flat_weights,
    induce_network,
)

# Counts of the observed 967-vertex insider network that the preset mirrors.
PAPER_VERTICES = 967
PAPER_CIRCLES = 106
PAPER_BRIDGES = 140
# The observed link count |F| is unpublished. Memberships per bridge is
# calibrated so that baseline EPOI under Beta(20, 80) weights sits near 0.79.
PAPER_LINKS_PER_BRIDGE = 2.35
PAPER_MIX = 0.3
PAPER_WEIGHT_A = 20.0
PAPER_WEIGHT_B = 80.0

STAGE4_MAX_REDRAWS = 1000


@dataclass(frozen=True)
class GeneratorParams:
    n_vertices: int
    alpha: float  # |V| / |circles|
    beta: float  # |V| / |bridges|
    gamma: float  # |V| / |links|
    mix: float = PAPER_MIX
    weight_a: float = PAPER_WEIGHT_A
    weight_b: float = PAPER_WEIGHT_B
    seed: int = 0

    @classmethod
    def paper_profile(cls, n_vertices: int, seed: int = 0, links_per_bridge: float = PAPER_LINKS_PER_BRIDGE, mix: float = PAPER_MIX):
        return cls(
            n_vertices=n_vertices,
            alpha=PAPER_VERTICES / PAPER_CIRCLES,
            beta=PAPER_VERTICES / PAPER_BRIDGES,
            gamma=PAPER_VERTICES / (links_per_bridge * PAPER_BRIDGES),
            mix=mix,
            seed=seed,
        )

    @property
    def n_circles(self) -> int:
        return int(round(self.n_vertices / self.alpha))

    @property
    def target_bridges(self) -> int:
        return int(round(self.n_vertices / self.beta))

    @property
    def target_links(self) -> int:
        return int(round(self.n_vertices / self.gamma))

    def check(self) -> None:
        k, b, f, n = self.n_circles, self.target_bridges, self.target_links, self.n_vertices
        if min(self.alpha, self.beta, self.gamma) <= 0:
            raise InfeasibleTargets("alpha, beta and gamma must be positive")
        if not 0.0 <= self.mix <= 1.0:
            raise InfeasibleTargets(f"mix must lie in [0, 1], got {self.mix}")
        if self.weight_a <= 0 or self.weight_b <= 0:
            raise InfeasibleTargets("Beta shape parameters must be positive")
        if k < 2:
            raise InfeasibleTargets(f"n={n} gives {k} circles; need at least 2")
        if n < k:
            raise InfeasibleTargets(f"{n} vertices cannot seed {k} circles")
        if b < k - 1:
            raise InfeasibleTargets(f"{b} bridges cannot connect {k} circles (need {k - 1})")
        if b > n:
            raise InfeasibleTargets(f"{b} bridges exceed {n} vertices")
        if f < 2 * b:
            raise InfeasibleTargets(f"{f} links are fewer than 2 per bridge ({2 * b})")
        if f > k * b:
            raise InfeasibleTargets(f"{f} links exceed circles x bridges ({k * b})")

    def to_json(self) -> dict:
        d = asdict(self)
        d.update(n_circles=self.n_circles, target_bridges=self.target_bridges, target_links=self.target_links)
        return d


def _mixed_choice(rng: np.random.Generator, sizes: np.ndarray, mix: float) -> int:
    k = sizes.shape[0]
    probs = (1.0 - mix) / k + mix * sizes / sizes.sum()
    return int(rng.choice(k, p=probs / probs.sum()))


def generate_circles(params: GeneratorParams) -> CircleCollection:
    params.check()
    n, k = params.n_vertices, params.n_circles
    rng = RngSpec(params.seed, 0x47454E).numpy()
    width = len(str(n - 1))
    names = [f"v{i:0{width}d}" for i in range(n)]
    cwidth = len(str(k - 1))
    cids = [f"c{i:0{cwidth}d}" for i in range(k)]

    members: List[set] = [set() for _ in range(k)]
    home = np.empty(n, dtype=np.int64)
    degree = np.zeros(n, dtype=np.int64)

    # stage 1: one seed vertex per circle, the rest by the mixed rule
    order = rng.permutation(n)
    sizes = np.zeros(k, dtype=np.float64)
    for c in range(k):
        v = int(order[c])
        members[c].add(v)
        home[v] = c
        sizes[c] += 1
    for v in order[k:]:
        c = _mixed_choice(rng, sizes, params.mix)
        members[c].add(int(v))
        home[v] = c
        sizes[c] += 1
    degree[:] = 1

    # stage 2: attach every circle to the growing connected part by one bridge
    connected = np.zeros(k, dtype=bool)
    connected[home[rng.integers(n)]] = True
    while not connected.all():
        pool = np.flatnonzero(~connected[home])
        u = int(pool[rng.integers(pool.size)])
        targets = np.flatnonzero(connected)
        c = int(targets[rng.integers(targets.size)])
        members[c].add(u)
        degree[u] += 1
        connected[home[u]] = True

    # stage 3: extra bridges from random non-bridges
    n_bridges = int((degree >= 2).sum())
    while n_bridges < params.target_bridges:
        pool = np.flatnonzero(degree == 1)
        u = int(pool[rng.integers(pool.size)])
        choices = [c for c in range(k) if u not in members[c]]
        c = choices[int(rng.integers(len(choices)))]
        members[c].add(u)
        degree[u] += 1
        n_bridges += 1

    # stage 4: extra memberships for existing bridges
    n_links = int(degree[degree >= 2].sum())
    while n_links < params.target_links:
        bridges = np.flatnonzero((degree >= 2) & (degree < k))
        u = int(bridges[rng.integers(bridges.size)])
        sizes = np.array([len(m) for m in members], dtype=np.float64)
        for _ in range(STAGE4_MAX_REDRAWS):
            c = _mixed_choice(rng, sizes, params.mix)
            if u not in members[c]:
                break
        else:
            choices = [c for c in range(k) if u not in members[c]]
            c = choices[int(rng.integers(len(choices)))]
        members[c].add(u)
        degree[u] += 1
        n_links += 1

    circles = CircleCollection.from_mapping({cids[c]: {names[v] for v in members[c]} for c in range(k)})
    bbn = build_bbn(circles)
    assert len(bbn.components()) == 1, "generated bridge-block network is disconnected"
    return circles


def sample_weights(network: InducedNetwork, weight_a: float, weight_b: float, rng: RngSpec) -> EdgeWeights:
    """Independent Beta(weight_a, weight_b) transmission probability per ordered edge."""
    if weight_a <= 0 or weight_b <= 0:
        raise ValueError("Beta shape parameters must be positive")
    draws = rng.numpy().beta(weight_a, weight_b, size=network.n_edges)
    return {pair: float(w) for pair, w in zip(network.edge_list(), draws)}


def beta_filler(weight_a: float, weight_b: float, rng: RngSpec):
    """Weight-filling policy for ``fill_weights``."""
    def fill(pairs):
        return rng.numpy().beta(weight_a, weight_b, size=len(pairs))
    return fill


@dataclass(frozen=True)
class StatsReport:
    n_vertices: int
    n_circles: int
    n_bridges: int
    n_links: int
    n_edges: int
    circle_size_histogram: tuple
    vertex_degree_histogram: tuple
    bridge_membership_histogram: tuple
    bbn_component_count: int
    largest_component_fraction: float

    def to_json(self) -> dict:
        d = asdict(self)
        for key in ("circle_size_histogram", "vertex_degree_histogram", "bridge_membership_histogram"):
            d[key] = [list(pair) for pair in d[key]]
        return d

    @classmethod
    def from_json(cls, data: dict) -> "StatsReport":
        d = dict(data)
        for key in ("circle_size_histogram", "vertex_degree_histogram", "bridge_membership_histogram"):
            d[key] = tuple(tuple(pair) for pair in d[key])
        return cls(**d)


def _histogram(values) -> tuple:
    return tuple(sorted(Counter(values).items()))


def graph_stats(circles: CircleCollection, network: InducedNetwork) -> StatsReport:
    bbn = build_bbn(circles)
    comps = bbn.components()
    n_nodes = len(bbn.blocks) + len(bbn.bridges)
    memberships = circles.memberships()
    return StatsReport(
        n_vertices=len(circles.vertices),
        n_circles=len(circles),
        n_bridges=len(bbn.bridges),
        n_links=len(bbn.links),
        n_edges=network.n_edges,
        circle_size_histogram=_histogram(len(m) for m in circles.circles.values()),
        vertex_degree_histogram=_histogram(int(d) for d in np.diff(network.indptr)),
        bridge_membership_histogram=_histogram(len(memberships[v]) for v in bbn.bridges),
        bbn_component_count=len(comps),
        largest_component_fraction=(len(comps[0]) / n_nodes) if comps else 0.0,
    )


def generate_instance(params: GeneratorParams, weight_rng: Optional[RngSpec] = None):
    """Circles plus Beta weights over their induced network."""
    circles = generate_circles(params)
    skeleton = induce_network(circles, flat_weights(circles, 0.0))
    rng = weight_rng or RngSpec(params.seed, 0x574754)
    weights = sample_weights(skeleton, params.weight_a, params.weight_b, rng)
    return circles, weights, induce_network(circles, weights)
