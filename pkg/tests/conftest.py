import itertools
import random
from fractions import Fraction

import pytest

from detachment.network import CircleCollection, co_member_pairs, flat_weights


def brute_force_sigma(circles, weights, sources):
    """Expected reach by enumerating live-edge subsets in plain Python."""
    vertices = sorted(circles.vertices)
    edges = co_member_pairs(circles)
    total = 0
    for live in itertools.product((False, True), repeat=len(edges)):
        prob = 1
        adj = {v: [] for v in vertices}
        for (u, v), on in zip(edges, live):
            w = weights[(u, v)]
            prob *= w if on else 1 - w
            if on:
                adj[u].append(v)
        seen = set(sources)
        stack = list(sources)
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        total += prob * len(seen)
    return total


def brute_force_epoi(circles, weights, p=None):
    n = len(circles.vertices)
    ids = circles.circle_ids
    p = p or {c: Fraction(1, len(ids)) for c in ids}
    value = 0
    for c in ids:
        members = circles[c]
        if not members or n == len(members):
            continue
        value += p[c] * (brute_force_sigma(circles, weights, members) - len(members)) / (n - len(members))
    return value


def random_instance(seed, max_edges=12, n_vertices=6):
    """Random small circle collection with random weights and a bridge."""
    rnd = random.Random(seed)
    names = "abcdefgh"[:n_vertices]
    while True:
        k = rnd.randint(2, 4)
        circles = {}
        for i in range(k):
            size = rnd.randint(1, 3)
            circles[f"I{i + 1}"] = set(rnd.sample(names, size))
        cc = CircleCollection.from_mapping(circles)
        pairs = co_member_pairs(cc)
        memberships = cc.memberships()
        has_bridge = any(len(cs) >= 2 for cs in memberships.values())
        if 0 < len(pairs) <= max_edges and has_bridge:
            weights = {pair: round(rnd.uniform(0.05, 0.95), 3) for pair in pairs}
            return cc, weights


@pytest.fixture
def t1():
    return CircleCollection.from_mapping({"I1": {"a", "b"}, "I2": {"b", "c"}})


@pytest.fixture
def t2():
    return CircleCollection.from_mapping({"I1": {"a", "b"}, "I2": {"b", "c"}, "I3": {"c", "d"}})


@pytest.fixture
def half():
    return lambda circles: flat_weights(circles, 0.5)
