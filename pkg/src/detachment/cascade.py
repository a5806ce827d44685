"""Independent cascade simulation, influence and EPOI estimation.

Randomness is counter-based (SplitMix64 hashing). Trial ``t`` of an
``RngSpec`` owns the stream ``stream_index + t``; within a trial, edge (u, v)
is live iff a hash of the trial state and the edge's endpoint ids falls below
w(u, v). Results therefore do not depend on evaluation order, and two
networks that differ by a detachment see the same coins on shared edges.
"""
from __future__ import annotations

import hashlib
import math
import weakref
from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Optional, Tuple

import numpy as np
from numba import njit

from .errors import InvalidDistribution, TooLarge, UnknownVertex
from .network import CircleCollection, InducedNetwork, induce_network

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
DEFAULT_EDGE_CAP = 20


def mix64(x: int) -> int:
    """SplitMix64 finalizer on Python ints."""
    x = (x + GOLDEN) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def key64(*parts) -> int:
    """Stable 64-bit key for a tuple of strings/ints."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(repr(part).encode("utf-8"))
        h.update(b"\x00")
    return int.from_bytes(h.digest(), "little")


@dataclass(frozen=True)
class RngSpec:
    master_seed: int = 0
    stream_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "master_seed", int(self.master_seed) & MASK64)
        object.__setattr__(self, "stream_index", int(self.stream_index) & MASK64)

    def substream(self, *key) -> "RngSpec":
        """Independent stream family addressed by ``key`` (e.g. a circle id)."""
        return RngSpec(self.master_seed, mix64(self.stream_index ^ key64(*key)))

    def numpy(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=[self.master_seed, self.stream_index]))


# --- numba kernels -------------------------------------------------------

_GOLD = np.uint64(GOLDEN)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True)
def _mix(x):
    z = x + _GOLD
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def _trial_state(master_mixed, stream):
    return _mix(master_mixed ^ _mix(stream))


@njit(cache=True)
def _edge_keys(indptr, indices, vertex_keys):
    keys = np.empty(indices.shape[0], dtype=np.uint64)
    for u in range(indptr.shape[0] - 1):
        ku = vertex_keys[u]
        for e in range(indptr[u], indptr[u + 1]):
            keys[e] = _mix(ku ^ _mix(vertex_keys[indices[e]]))
    return keys


@njit(cache=True)
def _realize(indptr, indices, probs, edge_keys, state, live_ptr, live_idx):
    """Sample the live-edge graph of one trial: edge e is live iff its coin,
    a hash of (trial state, edge key), falls below its probability."""
    n = indptr.shape[0] - 1
    k = 0
    for u in range(n):
        live_ptr[u] = k
        for e in range(indptr[u], indptr[u + 1]):
            p = probs[e]
            if p <= 0.0:
                continue
            if (_mix(state ^ edge_keys[e]) >> _S11) * _INV53 < p:
                live_idx[k] = indices[e]
                k += 1
    live_ptr[n] = k


@njit(cache=True)
def _spread(live_ptr, live_idx, sources, layer, order):
    """Layered spread over live edges from ``sources``. ``layer`` must be all
    -1 on entry; influenced vertices get their infection step and are listed
    in ``order`` layer by layer (sorted within a layer). Returns the count."""
    count = 0
    for s in sources:
        if layer[s] == -1:
            layer[s] = 0
            order[count] = s
            count += 1
    start = 0
    step = 0
    while start < count:
        end = count
        order[start:end].sort()
        for k in range(start, end):
            u = order[k]
            for e in range(live_ptr[u], live_ptr[u + 1]):
                v = live_idx[e]
                if layer[v] == -1:
                    layer[v] = step + 1
                    order[count] = v
                    count += 1
        start = end
        step += 1
    return count


@njit(cache=True)
def _mark_reach(ptr, idx, start, mark, stack):
    """Mark every vertex reachable from ``start``; returns how many were marked."""
    mark[start] = True
    stack[0] = start
    top = 1
    count = 1
    while top > 0:
        top -= 1
        u = stack[top]
        for e in range(ptr[u], ptr[u + 1]):
            v = idx[e]
            if not mark[v]:
                mark[v] = True
                stack[top] = v
                top += 1
                count += 1
    return count


@njit(cache=True)
def _count_outside(ptr, idx, sources, blocked, seen, stack):
    """Count vertices reachable from ``sources`` without entering ``blocked``."""
    top = 0
    count = 0
    for s in sources:
        if not blocked[s] and not seen[s]:
            seen[s] = True
            stack[top] = s
            top += 1
    while top > 0:
        top -= 1
        u = stack[top]
        count += 1
        for e in range(ptr[u], ptr[u + 1]):
            v = idx[e]
            if not blocked[v] and not seen[v]:
                seen[v] = True
                stack[top] = v
                top += 1
    return count


@njit(cache=True)
def _reverse(n, live_ptr, live_idx, rev_ptr, rev_idx):
    m = live_ptr[n]
    for i in range(n + 1):
        rev_ptr[i] = 0
    for e in range(m):
        rev_ptr[live_idx[e] + 1] += 1
    for i in range(n):
        rev_ptr[i + 1] += rev_ptr[i]
    fill = rev_ptr[:n].copy()
    for u in range(n):
        for e in range(live_ptr[u], live_ptr[u + 1]):
            v = live_idx[e]
            rev_idx[fill[v]] = u
            fill[v] += 1


@njit(cache=True)
def _simulate(indptr, indices, probs, edge_keys, hub, src_ptr, src_idx, coef, offset, master_mixed, stream, trials):
    """Run ``trials`` live-edge realizations, each shared by every source set.

    Cascade sizes are counted exactly: if a source set can reach ``hub``, its
    size is |reach(hub)| plus what it reaches while avoiding reach(hub).

    Returns per-set sums and squared sums of cascade sizes, plus the sum and
    squared sum over trials of ``sum_c coef[c] * (size_c - offset[c])``.
    """
    n = indptr.shape[0] - 1
    n_sets = src_ptr.shape[0] - 1
    sums = np.zeros(n_sets, dtype=np.int64)
    sumsq = np.zeros(n_sets, dtype=np.int64)
    total = 0.0
    total_sq = 0.0
    downstream = np.zeros(n, dtype=np.bool_)
    upstream = np.zeros(n, dtype=np.bool_)
    seen = np.zeros(n, dtype=np.bool_)
    nothing = np.zeros(n, dtype=np.bool_)
    stack = np.empty(n, dtype=np.int64)
    live_ptr = np.empty(n + 1, dtype=np.int64)
    live_idx = np.empty(indices.shape[0], dtype=np.int64)
    rev_ptr = np.empty(n + 1, dtype=np.int64)
    rev_idx = np.empty(indices.shape[0], dtype=np.int64)
    for t in range(trials):
        state = _trial_state(master_mixed, stream + np.uint64(t))
        _realize(indptr, indices, probs, edge_keys, state, live_ptr, live_idx)
        _reverse(n, live_ptr, live_idx, rev_ptr, rev_idx)
        downstream[:] = False
        upstream[:] = False
        hub_reach = _mark_reach(live_ptr, live_idx, hub, downstream, stack)
        _mark_reach(rev_ptr, rev_idx, hub, upstream, stack)
        x = 0.0
        for c in range(n_sets):
            sources = src_idx[src_ptr[c]:src_ptr[c + 1]]
            via_hub = False
            for s in sources:
                if upstream[s]:
                    via_hub = True
                    break
            if via_hub:
                count = hub_reach + _count_outside(live_ptr, live_idx, sources, downstream, seen, stack)
            else:
                count = _count_outside(live_ptr, live_idx, sources, nothing, seen, stack)
            seen[:] = False
            sums[c] += count
            sumsq[c] += count * count
            x += coef[c] * (count - offset[c])
        total += x
        total_sq += x * x
    return sums, sumsq, total, total_sq


@njit(cache=True)
def _live_edge_expectation(n, tails, heads, probs, source_mask):
    """E|reach(sources) minus sources| over all 2^E live-edge subsets, by
    enumeration. Counting only new vertices keeps an exact zero exact."""
    m = tails.shape[0]
    total = 0.0
    reached = np.zeros(n, dtype=np.bool_)
    for mask in range(1 << m):
        weight = 1.0
        for e in range(m):
            if (mask >> e) & 1:
                weight *= probs[e]
            else:
                weight *= 1.0 - probs[e]
        if weight == 0.0:
            continue
        for i in range(n):
            reached[i] = source_mask[i]
        changed = True
        while changed:
            changed = False
            for e in range(m):
                if (mask >> e) & 1 and reached[tails[e]] and not reached[heads[e]]:
                    reached[heads[e]] = True
                    changed = True
        size = 0
        for i in range(n):
            if reached[i] and not source_mask[i]:
                size += 1
        if size:
            total += weight * size
    return total


# --- public API ------------------------------------------------------------


@dataclass(frozen=True)
class CascadeTrace:
    layers: Tuple[frozenset, ...]

    @property
    def influenced(self) -> frozenset:
        return frozenset().union(*self.layers) if self.layers else frozenset()


@dataclass(frozen=True)
class InfluenceEstimate:
    mean: float
    std_error: float
    trials: int
    exact: bool = False


@dataclass(frozen=True)
class EpoiEstimate:
    value: float
    std_error: float
    trials_per_circle: int
    per_circle_terms: Mapping[str, float] = field(default_factory=dict)
    per_circle_std_errors: Mapping[str, float] = field(default_factory=dict)
    exact: bool = False

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "std_error": self.std_error,
            "trials_per_circle": self.trials_per_circle,
            "exact": self.exact,
            "per_circle_terms": dict(self.per_circle_terms),
        }


@dataclass(frozen=True)
class SourceDistribution:
    probs: Mapping[str, float]

    def __post_init__(self):
        probs = {c: float(p) for c, p in sorted(self.probs.items())}
        if any(not math.isfinite(p) or p < 0 for p in probs.values()):
            raise InvalidDistribution("source probabilities must be finite and non-negative")
        if abs(sum(probs.values()) - 1.0) > 1e-9:
            raise InvalidDistribution(f"source probabilities sum to {sum(probs.values())}, not 1")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def uniform(cls, circles: CircleCollection) -> "SourceDistribution":
        k = len(circles)
        if k == 0:
            raise InvalidDistribution("no circles")
        return cls({c: 1.0 / k for c in circles.circle_ids})

    def check_support(self, circles: CircleCollection) -> None:
        extra = set(self.probs) - set(circles.circle_ids)
        if extra:
            raise InvalidDistribution(f"distribution names unknown circles: {sorted(extra)}")


def _source_indices(network: InducedNetwork, sources: Iterable[str]) -> np.ndarray:
    idx = network.index
    out = []
    for s in sorted(set(sources)):
        if s not in idx:
            raise UnknownVertex(f"source {s!r} is not a vertex of the network")
        out.append(idx[s])
    return np.asarray(out, dtype=np.int64)


_EDGE_KEYS: "weakref.WeakKeyDictionary[InducedNetwork, np.ndarray]" = weakref.WeakKeyDictionary()


def _vertex_key(v: str) -> int:
    return key64("vertex", v)


def edge_keys(network: InducedNetwork) -> np.ndarray:
    """Per-edge 64-bit keys derived from the endpoint ids, so an edge keeps its
    random coin when other edges are removed from the network."""
    keys = _EDGE_KEYS.get(network)
    if keys is None:
        vkeys = np.array([_vertex_key(v) for v in network.vertices], dtype=np.uint64)
        keys = _edge_keys(network.indptr, network.indices, vkeys)
        _EDGE_KEYS[network] = keys
    return keys


def _hub(network: InducedNetwork) -> int:
    """Vertex with the largest total outgoing probability; any choice is exact."""
    if network.n_vertices == 0:
        return 0
    rows = np.repeat(np.arange(network.n_vertices), np.diff(network.indptr))
    return int(np.argmax(np.bincount(rows, weights=network.probs, minlength=network.n_vertices)))


def run_cascade(network: InducedNetwork, sources: Iterable[str], rng: RngSpec) -> CascadeTrace:
    """One realization of the IC process from ``sources``.

    Each edge's success is a fixed coin of (trial stream, edge), so the edge
    is tried once no matter how many infected neighbours reach its tail.
    """
    src = _source_indices(network, sources)
    if src.size == 0:
        raise UnknownVertex("cascade needs at least one source")
    n = network.n_vertices
    layer = np.full(n, -1, dtype=np.int64)
    order = np.empty(n, dtype=np.int64)
    live_ptr = np.empty(n + 1, dtype=np.int64)
    live_idx = np.empty(network.n_edges, dtype=np.int64)
    state = np.uint64(_trial_state(np.uint64(mix64(rng.master_seed)), np.uint64(rng.stream_index)))
    _realize(network.indptr, network.indices, network.probs, edge_keys(network), state, live_ptr, live_idx)
    _spread(live_ptr, live_idx, src, layer, order)
    layers = [set() for _ in range(int(layer.max()) + 1)]
    for i in np.flatnonzero(layer >= 0):
        layers[layer[i]].add(network.vertices[i])
    return CascadeTrace(tuple(frozenset(s) for s in layers))


def _simulate_sets(network, source_sets, trials, rng, coef=None, offset=None):
    src_ptr = np.zeros(len(source_sets) + 1, dtype=np.int64)
    np.cumsum([len(s) for s in source_sets], out=src_ptr[1:])
    src_idx = np.concatenate(source_sets) if source_sets else np.zeros(0, dtype=np.int64)
    if coef is None:
        coef = np.zeros(len(source_sets))
        offset = np.zeros(len(source_sets))
    return _simulate(
        network.indptr,
        network.indices,
        network.probs,
        edge_keys(network),
        _hub(network),
        src_ptr,
        src_idx.astype(np.int64),
        np.asarray(coef, dtype=np.float64),
        np.asarray(offset, dtype=np.float64),
        np.uint64(mix64(rng.master_seed)),
        np.uint64(rng.stream_index),
        int(trials),
    )


def _moments(total, total_sq, trials: int) -> Tuple[float, float]:
    mean = total / trials
    if trials < 2:
        return float(mean), 0.0
    var = max(total_sq - total * total / trials, 0.0) / (trials - 1)
    return float(mean), math.sqrt(var / trials)


def estimate_influence(network: InducedNetwork, sources: Iterable[str], trials: int, rng: RngSpec) -> InfluenceEstimate:
    """Monte Carlo estimate of the expected cascade size; trial ``t`` uses
    stream ``rng.stream_index + t`` and agrees with ``run_cascade`` on it."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    src = _source_indices(network, sources)
    if src.size == 0:
        return InfluenceEstimate(0.0, 0.0, trials)
    sums, sumsq, _, _ = _simulate_sets(network, [src], trials, rng)
    mean, se = _moments(int(sums[0]), int(sumsq[0]), trials)
    return InfluenceEstimate(mean, se, trials)


def exact_influence(network: InducedNetwork, sources: Iterable[str], edge_cap: int = DEFAULT_EDGE_CAP) -> InfluenceEstimate:
    """Exact expected cascade size by enumerating live-edge subsets."""
    src = _source_indices(network, sources)
    if network.n_edges > edge_cap:
        raise TooLarge(f"{network.n_edges} directed edges exceed the exact-oracle cap of {edge_cap}")
    n = network.n_vertices
    tails = np.repeat(np.arange(n, dtype=np.int64), np.diff(network.indptr))
    source_mask = np.zeros(n, dtype=np.bool_)
    source_mask[src] = True
    gained = _live_edge_expectation(n, tails, network.indices.astype(np.int64), network.probs, source_mask)
    return InfluenceEstimate(int(source_mask.sum()) + float(gained), 0.0, 0, exact=True)


def _resolve_p(circles: CircleCollection, p: Optional[SourceDistribution]) -> SourceDistribution:
    if p is None:
        return SourceDistribution.uniform(circles)
    if not isinstance(p, SourceDistribution):
        p = SourceDistribution(p)
    p.check_support(circles)
    return p


def epoi_on_network(
    circles: CircleCollection,
    network: InducedNetwork,
    p: Optional[SourceDistribution] = None,
    trials_per_circle: int = 10_000,
    rng: RngSpec = RngSpec(),
) -> EpoiEstimate:
    """EPOI of ``circles`` given their already-induced network.

    Every trial realizes one live-edge graph and spreads from each source
    circle on it. The standard error comes from the per-trial EPOI values, so
    it accounts for the correlation between circles. Networks evaluated with
    the same ``rng`` see identical coins on the edges they share.
    """
    if trials_per_circle < 1:
        raise ValueError("trials_per_circle must be >= 1")
    p = _resolve_p(circles, p)
    n = network.n_vertices
    idx = network.index
    terms: Dict[str, float] = {}
    ses: Dict[str, float] = {}
    active = []
    for cid, weight in p.probs.items():
        if weight > 0:
            terms[cid] = 0.0
            ses[cid] = 0.0
            if circles[cid] and n > len(circles[cid]):
                active.append(cid)
    if not active:
        return EpoiEstimate(0.0, 0.0, trials_per_circle, terms, ses)
    sets = [np.asarray(sorted(idx[v] for v in circles[c]), dtype=np.int64) for c in active]
    outside = np.array([n - len(circles[c]) for c in active], dtype=np.float64)
    sizes = np.array([len(circles[c]) for c in active], dtype=np.float64)
    coef = np.array([p.probs[c] for c in active]) / outside
    sums, sumsq, total, total_sq = _simulate_sets(network, sets, trials_per_circle, rng, coef, sizes)
    for i, cid in enumerate(active):
        mean, se = _moments(int(sums[i]), int(sumsq[i]), trials_per_circle)
        terms[cid] = (mean - sizes[i]) / outside[i]
        ses[cid] = se / outside[i]
    value = math.fsum(p.probs[c] * terms[c] for c in terms)
    _, std_error = _moments(total, total_sq, trials_per_circle)
    return EpoiEstimate(value, std_error, trials_per_circle, terms, ses)


def estimate_epoi(
    circles: CircleCollection,
    weights: Mapping[Tuple[str, str], float],
    p: Optional[SourceDistribution] = None,
    trials_per_circle: int = 10_000,
    rng: RngSpec = RngSpec(),
) -> EpoiEstimate:
    """Monte Carlo estimate of the expected proportional outside influence."""
    return epoi_on_network(circles, induce_network(circles, weights), p, trials_per_circle, rng)


def exact_epoi_on_network(
    circles: CircleCollection,
    network: InducedNetwork,
    p: Optional[SourceDistribution] = None,
    edge_cap: int = DEFAULT_EDGE_CAP,
) -> EpoiEstimate:
    if network.n_edges > edge_cap:
        raise TooLarge(f"{network.n_edges} directed edges exceed the exact-oracle cap of {edge_cap}")
    p = _resolve_p(circles, p)
    n = network.n_vertices
    terms: Dict[str, float] = {}
    for cid, weight in p.probs.items():
        if weight <= 0:
            continue
        members = circles[cid]
        outside = n - len(members)
        if not members or outside == 0:
            terms[cid] = 0.0
            continue
        src = _source_indices(network, members)
        source_mask = np.zeros(n, dtype=np.bool_)
        source_mask[src] = True
        tails = np.repeat(np.arange(n, dtype=np.int64), np.diff(network.indptr))
        gained = _live_edge_expectation(n, tails, network.indices.astype(np.int64), network.probs, source_mask)
        terms[cid] = float(gained) / outside
    value = math.fsum(p.probs[c] * terms[c] for c in terms)
    return EpoiEstimate(value, 0.0, 0, terms, {c: 0.0 for c in terms}, exact=True)


def exact_epoi(
    circles: CircleCollection,
    weights: Mapping[Tuple[str, str], float],
    p: Optional[SourceDistribution] = None,
    edge_cap: int = DEFAULT_EDGE_CAP,
) -> EpoiEstimate:
    """Exact EPOI via live-edge enumeration; exponential in the edge count."""
    return exact_epoi_on_network(circles, induce_network(circles, weights), p, edge_cap)
