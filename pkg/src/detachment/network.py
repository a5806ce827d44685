"""Circle collections, induced information-flow networks and bridge-block networks."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, Iterable, Mapping, NamedTuple, Sequence, Tuple

import networkx as nx
import numpy as np

from .errors import InputError, InvalidWeight, MissingWeight, NotAMember

EdgeWeights = Dict[Tuple[str, str], float]


class DetachmentPair(NamedTuple):
    vertex: str
    circle: str

    def sort_key(self):
        return (self.circle, self.vertex)


DetachmentSet = Sequence[DetachmentPair]


@dataclass(frozen=True)
class CircleCollection:
    """Named circles over a vertex universe.

    The universe is the union of all circles. ``orphaned`` lists vertices that
    left the universe through detachments; it does not take part in equality.
    """

    circles: Mapping[str, frozenset]
    orphaned: Tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        normalized = {}
        for cid in sorted(self.circles):
            if not isinstance(cid, str) or not cid:
                raise InputError(f"circle id must be a non-empty string, got {cid!r}")
            members = frozenset(self.circles[cid])
            for v in members:
                if not isinstance(v, str) or not v:
                    raise InputError(f"vertex id must be a non-empty string, got {v!r} in {cid}")
            normalized[cid] = members
        object.__setattr__(self, "circles", normalized)
        object.__setattr__(self, "orphaned", tuple(self.orphaned))

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Iterable[str]], allow_empty: bool = False):
        circles = {cid: frozenset(members) for cid, members in mapping.items()}
        if not allow_empty:
            empty = [cid for cid, members in circles.items() if not members]
            if empty:
                raise InputError(f"empty circles in fresh data: {empty}")
        return cls(circles)

    def __getitem__(self, cid: str) -> frozenset:
        return self.circles[cid]

    def __len__(self) -> int:
        return len(self.circles)

    def __iter__(self):
        return iter(self.circles)

    @property
    def circle_ids(self) -> Tuple[str, ...]:
        return tuple(self.circles)

    @property
    def vertices(self) -> frozenset:
        return frozenset().union(*self.circles.values()) if self.circles else frozenset()

    def memberships(self) -> Dict[str, list]:
        """Map each vertex to the sorted list of circles containing it."""
        out: Dict[str, list] = {}
        for cid, members in self.circles.items():
            for v in members:
                out.setdefault(v, []).append(cid)
        return out

    def to_json(self) -> dict:
        return {"circles": {cid: sorted(members) for cid, members in self.circles.items()}}

    @classmethod
    def from_json(cls, data: Mapping) -> "CircleCollection":
        if not isinstance(data, Mapping) or not isinstance(data.get("circles"), Mapping):
            raise InputError('circle file must be an object with a "circles" mapping')
        raw = data["circles"]
        for cid, members in raw.items():
            if not isinstance(members, list):
                raise InputError(f"members of circle {cid!r} must be a list")
            if len(set(members)) != len(members):
                raise InputError(f"duplicate members in circle {cid!r}")
        return cls.from_mapping(raw)


def load_circles(path) -> CircleCollection:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: {exc}") from exc
    return CircleCollection.from_json(data)


def save_circles(circles: CircleCollection, path) -> None:
    Path(path).write_text(json.dumps(circles.to_json(), indent=1, sort_keys=True) + "\n", encoding="utf-8")


def load_weights(path) -> EdgeWeights:
    weights: EdgeWeights = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["u", "v", "w"]:
            raise InputError(f"{path}: expected header u,v,w, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise InputError(f"{path}:{lineno}: expected 3 fields")
            try:
                w = float(row[2])
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: bad weight {row[2]!r}") from exc
            weights[(row[0], row[1])] = w
    return weights


def save_weights(weights: Mapping[Tuple[str, str], float], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["u", "v", "w"])
        for (u, v) in sorted(weights):
            writer.writerow([u, v, repr(float(weights[(u, v)]))])


def co_member_pairs(circles: CircleCollection) -> list:
    """Sorted ordered pairs (u, v), u != v, sharing at least one circle."""
    pairs = set()
    for members in circles.circles.values():
        ms = sorted(members)
        for u in ms:
            for v in ms:
                if u != v:
                    pairs.add((u, v))
    return sorted(pairs)


def flat_weights(circles: CircleCollection, w: float) -> EdgeWeights:
    return {pair: float(w) for pair in co_member_pairs(circles)}


def fill_weights(circles: CircleCollection, weights: Mapping, fill) -> EdgeWeights:
    """Complete ``weights`` over all co-membership pairs; ``fill(missing_pairs)``
    returns values for the absent ones in the given order."""
    pairs = co_member_pairs(circles)
    missing = [p for p in pairs if p not in weights]
    out = {p: weights[p] for p in pairs if p in weights}
    if missing:
        out.update(zip(missing, (float(x) for x in fill(missing))))
    return out


@dataclass(frozen=True, eq=False)
class InducedNetwork:
    """Weighted directed graph (V, E, w) in CSR form.

    Vertices are sorted by id and each row's neighbours are sorted, so edge
    index order is (u, v) byte order.
    """

    vertices: Tuple[str, ...]
    indptr: np.ndarray
    indices: np.ndarray
    probs: np.ndarray

    @cached_property
    def index(self) -> Dict[str, int]:
        return {v: i for i, v in enumerate(self.vertices)}

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return int(self.indices.shape[0])

    def edge_list(self) -> list:
        out = []
        for i, u in enumerate(self.vertices):
            for e in range(self.indptr[i], self.indptr[i + 1]):
                out.append((u, self.vertices[self.indices[e]]))
        return out

    @property
    def edges(self) -> frozenset:
        return frozenset(self.edge_list())

    @property
    def weights(self) -> EdgeWeights:
        return {pair: float(w) for pair, w in zip(self.edge_list(), self.probs)}

    def without_edges(self, pairs: Iterable[Tuple[str, str]]) -> "InducedNetwork":
        """Copy with the given directed edges removed; vertices are kept."""
        idx = self.index
        drop = np.zeros(self.n_edges, dtype=bool)
        for u, v in pairs:
            i, j = idx[u], idx[v]
            lo, hi = self.indptr[i], self.indptr[i + 1]
            pos = lo + int(np.searchsorted(self.indices[lo:hi], j))
            if pos >= hi or self.indices[pos] != j:
                raise KeyError((u, v))
            drop[pos] = True
        keep = ~drop
        row_of_edge = np.repeat(np.arange(self.n_vertices), np.diff(self.indptr))
        counts = np.bincount(row_of_edge[keep], minlength=self.n_vertices)
        indptr = np.zeros(self.n_vertices + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        return InducedNetwork(self.vertices, indptr, self.indices[keep], self.probs[keep])


def induce_network(circles: CircleCollection, weights: Mapping[Tuple[str, str], float]) -> InducedNetwork:
    vertices = tuple(sorted(circles.vertices))
    idx = {v: i for i, v in enumerate(vertices)}
    adj = [set() for _ in vertices]
    for members in circles.circles.values():
        ms = [idx[v] for v in members]
        for i in ms:
            adj[i].update(ms)
    indptr = np.zeros(len(vertices) + 1, dtype=np.int64)
    indices, probs = [], []
    for i, nbrs in enumerate(adj):
        nbrs.discard(i)
        u = vertices[i]
        for j in sorted(nbrs):
            v = vertices[j]
            try:
                w = weights[(u, v)]
            except KeyError:
                raise MissingWeight(f"no weight for induced edge ({u}, {v})") from None
            w = float(w)
            if not (0.0 <= w <= 1.0):
                raise InvalidWeight(f"weight {w} for ({u}, {v}) outside [0, 1]")
            indices.append(j)
            probs.append(w)
        indptr[i + 1] = len(indices)
    return InducedNetwork(
        vertices,
        indptr,
        np.asarray(indices, dtype=np.int64),
        np.asarray(probs, dtype=np.float64),
    )


@dataclass(frozen=True)
class BridgeBlockNetwork:
    blocks: frozenset
    bridges: frozenset
    links: frozenset  # of (circle_id, vertex_id)

    def to_graph(self) -> nx.Graph:
        """Undirected BBN with nodes tagged ``("block", id)`` / ``("bridge", id)``."""
        g = nx.Graph()
        g.add_nodes_from(("block", b) for b in sorted(self.blocks))
        g.add_nodes_from(("bridge", v) for v in sorted(self.bridges))
        g.add_edges_from((("block", c), ("bridge", v)) for c, v in sorted(self.links))
        return g

    def components(self) -> list:
        """Connected components as lists of tagged nodes, largest first (ties by
        smallest member)."""
        comps = [sorted(c) for c in nx.connected_components(self.to_graph())]
        comps.sort(key=lambda c: (-len(c), c[0]))
        return comps

    def block_components(self) -> list:
        """Per component, the sorted circle ids it contains (largest block count first)."""
        out = [sorted(name for kind, name in comp if kind == "block") for comp in self.components()]
        out = [c for c in out if c]
        out.sort(key=lambda c: (-len(c), c[0]))
        return out

    def separated(self, a: str, b: str) -> bool:
        return not nx.has_path(self.to_graph(), ("block", a), ("block", b))


def build_bbn(circles: CircleCollection) -> BridgeBlockNetwork:
    members = circles.memberships()
    bridges = frozenset(v for v, cs in members.items() if len(cs) >= 2)
    links = frozenset((c, v) for v in bridges for c in members[v])
    return BridgeBlockNetwork(frozenset(circles.circle_ids), bridges, links)


def apply_detachment(circles: CircleCollection, pair: DetachmentPair) -> CircleCollection:
    vertex, circle = pair
    if circle not in circles.circles or vertex not in circles.circles[circle]:
        raise NotAMember(f"{vertex!r} is not a member of circle {circle!r}")
    new = dict(circles.circles)
    new[circle] = new[circle] - {vertex}
    orphaned = circles.orphaned
    if not any(vertex in members for members in new.values()):
        orphaned = orphaned + (vertex,)
    return CircleCollection(new, orphaned)


def apply_detachment_set(circles: CircleCollection, pairs: DetachmentSet) -> CircleCollection:
    seen = set()
    for i, pair in enumerate(pairs):
        pair = DetachmentPair(*pair)
        if pair in seen:
            raise NotAMember(f"duplicate detachment {tuple(pair)} at index {i}", index=i)
        seen.add(pair)
        try:
            circles = apply_detachment(circles, pair)
        except NotAMember as exc:
            raise NotAMember(f"pair {i}: {exc}", index=i) from None
    return circles


def enumerate_candidates(bbn: BridgeBlockNetwork) -> list:
    return [DetachmentPair(v, c) for c, v in sorted(bbn.links)]


def detachment_edge_loss(circles: CircleCollection, pair: DetachmentPair) -> list:
    """Directed edges that disappear from the induced network when ``pair`` is detached."""
    vertex, circle = pair
    others = [c for cid, c in circles.circles.items() if cid != circle and vertex in c]
    still = frozenset().union(*others) if others else frozenset()
    lost = []
    for x in sorted(circles.circles[circle]):
        if x != vertex and x not in still:
            lost.append((vertex, x))
            lost.append((x, vertex))
    return lost

