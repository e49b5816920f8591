"""2-SAT via implication-graph strongly connected components.

A literal is a ``(name, polarity)`` pair; a clause is a pair of literals
read as their disjunction.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Hashable, List, Optional, Tuple

Literal = Tuple[Hashable, bool]
Clause = Tuple[Literal, Literal]


def neg(lit: Literal) -> Literal:
    return (lit[0], not lit[1])


@dataclass
class TwoSatInstance:
    """Clause list plus a parallel list of provenance tags."""

    clauses: List[Clause] = field(default_factory=list)
    tags: List[str] = field(default_factory=list)

    def add(self, a: Literal, b: Literal, tag: str = "") -> None:
        self.clauses.append((a, b))
        self.tags.append(tag)

    @property
    def variables(self) -> List[Hashable]:
        seen = {}
        for a, b in self.clauses:
            seen.setdefault(a[0], None)
            seen.setdefault(b[0], None)
        return list(seen)

    def __len__(self):
        return len(self.clauses)


def _scc(n: int, adj: List[List[int]]) -> List[int]:
    """Tarjan's algorithm, iterative. Component ids come out in reverse topological order."""
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    comp = [-1] * n
    stack: List[int] = []
    counter = 0
    ncomp = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, i = work[-1]
            if i < len(adj[v]):
                work[-1] = (v, i + 1)
                w = adj[v][i]
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, 0))
                elif on_stack[w]:
                    low[v] = min(low[v], index[w])
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp[w] = ncomp
                    if w == v:
                        break
                ncomp += 1
    return comp


def solve_2sat(inst: TwoSatInstance) -> Optional[Dict[Hashable, bool]]:
    """Return a satisfying assignment, or ``None`` when unsatisfiable."""
    names = inst.variables
    idx = {name: i for i, name in enumerate(names)}

    def node(lit: Literal) -> int:
        return 2 * idx[lit[0]] + (0 if lit[1] else 1)

    n = 2 * len(names)
    adj: List[List[int]] = [[] for _ in range(n)]
    for a, b in inst.clauses:
        # (a or b) == (not a -> b) and (not b -> a)
        adj[node(neg(a))].append(node(b))
        adj[node(neg(b))].append(node(a))
    comp = _scc(n, adj)
    out = {}
    for name, i in idx.items():
        t, f = comp[2 * i], comp[2 * i + 1]
        if t == f:
            return None
        # Tarjan numbers sinks first: pick the literal whose component comes later topologically.
        out[name] = t < f
    return out


def brute_force_2sat(inst: TwoSatInstance) -> Optional[Dict[Hashable, bool]]:
    """Truth-table oracle, exponential in the number of variables."""
    names = inst.variables
    if len(names) > 20:
        raise ValueError("too many variables for exhaustive search")
    for mask in range(1 << len(names)):
        val = {name: bool(mask >> i & 1) for i, name in enumerate(names)}
        if all(val[a[0]] == a[1] or val[b[0]] == b[1] for a, b in inst.clauses):
            return val
    return None


def satisfies(inst: TwoSatInstance, val: Dict[Hashable, bool]) -> bool:
    return all(val[a[0]] == a[1] or val[b[0]] == b[1] for a, b in inst.clauses)
