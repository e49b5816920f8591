"""Graph-to-channel reductions for maximum independent set and 3-colorability.

``reduce_mis`` turns a graph into a SISO interference channel whose
interference-free active sets are exactly the independent sets.
``reduce_3col`` builds the 12n-user channel (3-antenna main users and
A-dummies, 2-antenna B-dummies) on which one stream per user is achievable
iff the graph is 3-colorable. Brute-force oracles accompany both.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, FrozenSet, List, Sequence, Tuple

import numpy as np

from .channel import InterferenceChannel, PrecoderSet
from .feasibility import certificate_verify, induced_certificate


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on nodes ``0..n-1``."""

    n: int
    edges: FrozenSet[Tuple[int, int]]

    @classmethod
    def make(cls, n: int, edges) -> "Graph":
        if n < 0:
            raise ValueError("node count must be non-negative")
        out = set()
        for e in edges:
            i, j = (int(x) for x in e)
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge {(i, j)} out of range")
            out.add((min(i, j), max(i, j)))
        return cls(int(n), frozenset(out))

    def adjacent(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.edges

    def to_dict(self) -> dict:
        return {"n": self.n, "edges": [list(e) for e in sorted(self.edges)]}

    @classmethod
    def from_dict(cls, data: dict) -> "Graph":
        return cls.make(int(data["n"]), data.get("edges", []))

    @classmethod
    def load(cls, path) -> "Graph":
        return cls.from_dict(json.loads(Path(path).read_text()))


# -- independent set --------------------------------------------------------


def reduce_mis(g: Graph) -> InterferenceChannel:
    """SISO channel with ``h_jk = 1`` iff ``j == k`` or ``(k, j)`` is an edge."""
    n = g.n
    H = [[np.array([[1.0 if (j == k or g.adjacent(j, k)) else 0.0]]) for k in range(n)] for j in range(n)]
    return InterferenceChannel([1] * n, [1] * n, H, 1.0, [1.0] * n)


def mis_max_dof(ch: InterferenceChannel) -> int:
    """Largest set of users that can all be active without any cross interference."""
    K = ch.K
    if K > 20:
        raise ValueError("exhaustive search limited to 20 users")
    hit = [[j != k and bool(np.any(ch.H[k][j])) for j in range(K)] for k in range(K)]
    best = 0
    for mask in range(1 << K):
        size = bin(mask).count("1")
        if size <= best:
            continue
        active = [k for k in range(K) if mask >> k & 1]
        if all(not hit[k][j] for k in active for j in active):
            best = size
    return best


# -- 3-colorability ---------------------------------------------------------


@dataclass
class ReductionChannel:
    """Channel plus the role of every user.

    Roles are ``("main", i)``, ``("A", i, k)`` for ``k in (1, 2)`` and
    ``("B", i, l)`` for ``l in 1..9``; user ``12 i + r`` belongs to main node
    ``i``.
    """

    channel: InterferenceChannel
    roles: List[tuple]
    n: int

    def index(self, role: tuple) -> int:
        return self.roles.index(role)


def _pair_order():
    """``l -> ((k1, k2), j)`` with ``l = 3 (j - 1) + pair-rank + 1``, pairs lexicographic."""
    pairs = list(itertools.combinations(range(3), 2))
    return {3 * (j - 1) + r + 1: (pair, j) for j in (1, 2, 3) for r, pair in enumerate(pairs)}


def reduce_3col(g: Graph) -> ReductionChannel:
    n = g.n
    roles: List[tuple] = []
    for i in range(n):
        roles += [("main", i), ("A", i, 1), ("A", i, 2)] + [("B", i, l) for l in range(1, 10)]
    K = len(roles)
    ant = [3 if r[0] != "B" else 2 for r in roles]
    H = [[np.zeros((ant[k], ant[j])) for j in range(K)] for k in range(K)]
    for k in range(K):
        H[k][k] = np.eye(ant[k])
    for i, j in g.edges:
        H[12 * i][12 * j] = np.eye(3)
        H[12 * j][12 * i] = np.eye(3)
    # a_{i,0} is the main user, a_{i,1}, a_{i,2} the A-dummies
    for i in range(n):
        for l, ((k1, k2), j) in _pair_order().items():
            b = 12 * i + 2 + l
            H[b][12 * i + k1][0, j - 1] = 1.0
            H[b][12 * i + k2][1, j - 1] = 1.0
    return ReductionChannel(InterferenceChannel(ant, ant, H, 1.0, [1.0] * K), roles, n)


def is_proper(g: Graph, coloring: Sequence[int]) -> bool:
    return len(coloring) == g.n and all(c in (1, 2, 3) for c in coloring) and all(
        coloring[i] != coloring[j] for i, j in g.edges)


def coloring_to_beamformers(g: Graph, coloring: Sequence[int], rc: ReductionChannel | None = None) -> PrecoderSet:
    """Unit beamformers achieving one stream per user from a proper coloring."""
    coloring = [int(c) for c in coloring]
    if not is_proper(g, coloring):
        raise ValueError("coloring is not a proper 3-coloring")
    rc = rc or reduce_3col(g)
    ch = rc.channel
    eye = np.eye(3)
    v: List[np.ndarray] = [None] * ch.K
    for i, c in enumerate(coloring):
        rest = [x for x in (1, 2, 3) if x != c]
        v[12 * i] = eye[:, [c - 1]].astype(complex)
        v[12 * i + 1] = eye[:, [rest[0] - 1]].astype(complex)
        v[12 * i + 2] = eye[:, [rest[1] - 1]].astype(complex)
    for k, role in enumerate(rc.roles):
        if role[0] != "B":
            continue
        inter = sum(ch.H[k][j] @ v[j] for j in range(ch.K) if j != k and rc.roles[j][0] != "B")
        inter = np.ravel(inter)
        # transmit orthogonally to the aligned interference line
        v[k] = (np.array([[0.0], [1.0]]) if abs(inter[0]) > 0 else np.array([[1.0], [0.0]])).astype(complex)
    return v


def _main_graph(rc: ReductionChannel) -> Graph:
    ch = rc.channel
    mains = [rc.index(("main", i)) for i in range(rc.n)]
    edges = [(a, b) for a in range(rc.n) for b in range(a + 1, rc.n) if np.any(ch.H[mains[a]][mains[b]])]
    return Graph.make(rc.n, edges)


def discrete_all_ones_check(rc: ReductionChannel) -> bool:
    """Search the discrete main-user choices for an all-ones DoF certificate.

    Each main user picks one of ``e1, e2, e3``; a choice works iff adjacent
    mains differ. Every accepted choice is confirmed by building the full
    beamformer set and running :func:`certificate_verify`.
    """
    if rc.n > 6:
        raise ValueError("exhaustive search limited to 6 main users")
    g = _main_graph(rc)
    for colors in itertools.product((1, 2, 3), repeat=rc.n):
        if not is_proper(g, colors):
            continue
        v = coloring_to_beamformers(g, colors, rc)
        d = [1] * rc.channel.K
        sig, inter = induced_certificate(rc.channel, d, v)
        if not certificate_verify(rc.channel, d, sig, inter):
            raise AssertionError(f"proper coloring {colors} failed certificate verification")
        return True
    return False


def brute_3col(g: Graph) -> bool:
    """Backtracking search for a proper 3-coloring."""
    if g.n > 12:
        raise ValueError("exhaustive search limited to 12 nodes")
    nbrs: Dict[int, List[int]] = {i: [] for i in range(g.n)}
    for i, j in g.edges:
        nbrs[i].append(j)
        nbrs[j].append(i)
    color = [0] * g.n

    def place(i: int) -> bool:
        if i == g.n:
            return True
        for c in (1, 2, 3):
            if all(color[j] != c for j in nbrs[i] if j < i):
                color[i] = c
                if place(i + 1):
                    return True
        color[i] = 0
        return False

    return place(0)


def all_graphs(n: int):
    """Every labelled simple graph on ``n`` nodes."""
    pairs = list(itertools.combinations(range(n), 2))
    for mask in range(1 << len(pairs)):
        yield Graph.make(n, [p for b, p in enumerate(pairs) if mask >> b & 1])


def is_connected(g: Graph) -> bool:
    if g.n == 0:
        return True
    seen = {0}
    todo = [0]
    while todo:
        u = todo.pop()
        for a, b in g.edges:
            for x, y in ((a, b), (b, a)):
                if x == u and y not in seen:
                    seen.add(y)
                    todo.append(y)
    return len(seen) == g.n
