"""DoF-tuple achievability for interference channels with at most two antennas.

The checker works on 1-D subspaces ("values") attached to the transmit node
and the receive node of every single-stream user: the transmit value is the
beamforming direction, the receive value the (at most 1-D) interference
subspace. Full-rank cross links tie values together, so the nodes split into
components whose values are all linear images ``T_n theta`` of one root
direction ``theta``. Loops inside a component restrict ``theta`` to
eigenvectors of the loop matrix. Rank-1 cross links become Boolean choices
(transmit in the null space of the link, or accept its range as the
interference subspace), and every alignment / independence requirement turns
into 2-literal clauses over those choices. A satisfying assignment is turned
back into beamformers and verified independently.

Rank cutoffs: a link is nonzero iff ``||H||_F > 1e-12`` and full rank iff
``s_min > 1e-9 * s_max``.
"""
from __future__ import annotations

import hashlib
import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import least_squares

from .channel import InterferenceChannel, PrecoderSet
from .numerics import canonical_phase, orth
from .twosat import TwoSatInstance, solve_2sat

ZERO_TOL = 1e-12
RANK_TOL = 1e-9
SUBSPACE_TOL = 1e-9

Node = Tuple[str, int]  # ("tx", k) or ("rx", k)


# -- 1-D subspaces ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Subspace1D:
    """Line in C^2 stored by a unit, phase-normalized generator."""

    generator: np.ndarray

    @classmethod
    def of(cls, v) -> "Subspace1D":
        v = np.asarray(v, dtype=complex).ravel()
        n = np.linalg.norm(v)
        if n == 0:
            raise ValueError("zero vector spans no line")
        return cls(canonical_phase(v / n))

    def same(self, other: "Subspace1D") -> bool:
        return abs(np.vdot(self.generator, other.generator)) > 1 - SUBSPACE_TOL

    def __repr__(self):
        return f"Subspace1D({np.round(self.generator, 6).tolist()})"


def _null_line(h: np.ndarray) -> Subspace1D:
    return Subspace1D.of(np.linalg.svd(h)[2][-1].conj())


def _range_line(h: np.ndarray) -> Subspace1D:
    return Subspace1D.of(np.linalg.svd(h)[0][:, 0])


def link_rank(h: np.ndarray) -> int:
    if np.linalg.norm(h) <= ZERO_TOL:
        return 0
    s = np.linalg.svd(h, compute_uv=False)
    return int(np.sum(s > RANK_TOL * s[0]))


# -- outcome types ----------------------------------------------------------


@dataclass
class FeasibilityOutcome:
    """``verdict`` is ``"achievable"``, ``"infeasible"`` or ``"not_applicable"``.

    For achievable tuples ``precoders`` holds the beamformers and
    ``signal`` / ``interference`` the verified subspace bases, all in the
    original (unpadded) dimensions with d=0 users included as empty bases.
    """

    verdict: str
    signal: Optional[List[np.ndarray]] = None
    interference: Optional[List[np.ndarray]] = None
    precoders: Optional[PrecoderSet] = None
    witness: str = ""
    reason: str = ""
    clauses_emitted: int = 0
    tags: List[str] = field(default_factory=list)
    flagged: bool = False

    @property
    def achievable(self) -> bool:
        return self.verdict == "achievable"

    def to_dict(self) -> dict:
        out = {"verdict": self.verdict, "clauses_emitted": self.clauses_emitted, "tags": sorted(set(self.tags))}
        if self.witness:
            out["witness"] = self.witness
        if self.reason:
            out["reason"] = self.reason
        if self.flagged:
            out["flagged"] = True
        if self.achievable:
            def enc(mats):
                return [[[[float(z.real), float(z.imag)] for z in row] for row in m] for m in mats]
            out["certificate"] = {"precoders": enc(self.precoders), "signal": enc(self.signal),
                                  "interference": enc(self.interference)}
        return out


class RuleFailure(Exception):
    """A necessary condition failed; ``tag`` names the rule."""

    def __init__(self, tag: str):
        super().__init__(tag)
        self.tag = tag


# -- preprocessing ----------------------------------------------------------


@dataclass
class Reduced:
    """Active users padded to 2x2 links. ``users[i]`` is the original index."""

    users: List[int]
    d: List[int]
    H: List[List[np.ndarray]]


def preprocess(ch: InterferenceChannel, d: Sequence[int]) -> Reduced:
    """Drop d=0 users and zero-pad every link to 2x2.

    Raises ``ValueError`` for more than two antennas or out-of-range DoF, and
    ``RuleFailure`` for a two-stream user whose direct link is rank deficient.
    """
    d = [int(x) for x in d]
    if len(d) != ch.K:
        raise ValueError(f"need {ch.K} DoF entries")
    if max(ch.M) > 2 or max(ch.N) > 2:
        raise ValueError("checker handles at most two antennas per node")
    if any(x < 0 or x > 2 for x in d):
        raise ValueError("DoF entries must lie in {0, 1, 2}")
    users = [k for k in range(ch.K) if d[k] > 0]
    H = []
    for k in users:
        row = []
        for j in users:
            h = np.zeros((2, 2), dtype=complex)
            h[:ch.N[k], :ch.M[j]] = ch.H[k][j]
            row.append(h)
        H.append(row)
    red = Reduced(users, [d[k] for k in users], H)
    for i in range(len(users)):
        r = link_rank(H[i][i])
        if red.d[i] == 2 and r < 2:
            raise RuleFailure("direct-rank")
        if red.d[i] == 1 and r == 0:
            raise RuleFailure("direct-zero")
    return red


# -- link graphs and components --------------------------------------------


@dataclass
class LinkGraphs:
    """``G[(i, j)]`` = rank of the nonzero link tx j -> rx i (direct links included);
    ``Gp`` the full-rank cross links."""

    G: Dict[Tuple[int, int], int]
    Gp: List[Tuple[int, int]]


def build_link_graphs(red: Reduced) -> LinkGraphs:
    G = {}
    for i in range(len(red.users)):
        for j in range(len(red.users)):
            r = link_rank(red.H[i][j])
            if r > 0:
                G[(i, j)] = r
    Gp = [(i, j) for (i, j), r in G.items() if i != j and r == 2]
    return LinkGraphs(G, sorted(Gp))


@dataclass
class ComponentClass:
    """Connected component of single-stream nodes joined by full-rank links.

    ``maps[n]`` gives the value of node ``n`` as ``maps[n] @ theta``. For a
    loop-constrained component (``kind == "B1"``) ``candidates`` lists the
    admissible ``theta``; ``kind == "B2"`` leaves ``theta`` free.
    """

    nodes: List[Node]
    maps: Dict[Node, np.ndarray]
    kind: str = "B2"
    candidates: List[Subspace1D] = field(default_factory=list)

    def theta_of(self, n: Node, value: Subspace1D) -> Subspace1D:
        return Subspace1D.of(np.linalg.solve(self.maps[n], value.generator))

    def value_of(self, n: Node, theta: Subspace1D) -> Subspace1D:
        return Subspace1D.of(self.maps[n] @ theta.generator)


def _is_scalar(a: np.ndarray) -> bool:
    return np.linalg.norm(a - 0.5 * np.trace(a) * np.eye(2)) <= 1e-9 * np.linalg.norm(a)


def eigen_lines(a: np.ndarray) -> List[Subspace1D]:
    """Distinct eigen-directions of a non-scalar 2x2 matrix (one or two)."""
    half = 0.5 * np.trace(a)
    disc = half * half - np.linalg.det(a)
    scale = np.linalg.norm(a) ** 2
    if abs(disc) <= 1e-12 * scale:
        # defective: single eigenline, the kernel of a - lambda I
        return [_null_line(a - half * np.eye(2))]
    _, vec = np.linalg.eig(a)
    lines = [Subspace1D.of(vec[:, 0]), Subspace1D.of(vec[:, 1])]
    if lines[0].same(lines[1]):
        return lines[:1]
    return sorted(lines, key=lambda s: tuple(np.round(np.r_[s.generator.real, s.generator.imag], 12)))


def _components(red: Reduced, graphs: LinkGraphs) -> List[List[Node]]:
    adj: Dict[Node, List[Node]] = {}
    for i, j in graphs.Gp:
        adj.setdefault(("rx", i), []).append(("tx", j))
        adj.setdefault(("tx", j), []).append(("rx", i))
    nodes = [(kind, k) for k in range(len(red.users)) if red.d[k] == 1 for kind in ("tx", "rx")]
    seen = set()
    comps = []
    for n in nodes:
        if n in seen:
            continue
        comp = [n]
        seen.add(n)
        todo = deque([n])
        while todo:
            u = todo.popleft()
            for w in sorted(adj.get(u, [])):
                if w not in seen:
                    seen.add(w)
                    comp.append(w)
                    todo.append(w)
        comps.append(comp)
    return comps


def classify_component(red: Reduced, nodes: List[Node]) -> ComponentClass:
    """BFS spanning tree from the first node, then one loop matrix per non-tree edge."""
    root = nodes[0]
    members = set(nodes)
    maps = {root: np.eye(2, dtype=complex)}
    tree = set()
    todo = deque([root])
    while todo:
        u = todo.popleft()
        kind, k = u
        if kind == "rx":
            nbrs = [("tx", j) for j in range(len(red.users)) if ("tx", j) in members and j != k
                    and link_rank(red.H[k][j]) == 2]
        else:
            nbrs = [("rx", i) for i in range(len(red.users)) if ("rx", i) in members and i != k
                    and link_rank(red.H[i][k]) == 2]
        for w in nbrs:
            if w in maps:
                continue
            if kind == "rx":
                maps[w] = np.linalg.solve(red.H[k][w[1]], maps[u])
                tree.add((k, w[1]))
            else:
                maps[w] = red.H[w[1]][k] @ maps[u]
                tree.add((w[1], k))
            todo.append(w)
    cls = ComponentClass(list(nodes), maps)
    cand: Optional[List[Subspace1D]] = None
    for i in range(len(red.users)):
        for j in range(len(red.users)):
            if i == j or (i, j) in tree or ("rx", i) not in members or ("tx", j) not in members:
                continue
            if link_rank(red.H[i][j]) < 2:
                continue
            loop = np.linalg.solve(maps[("rx", i)], red.H[i][j] @ maps[("tx", j)])
            if _is_scalar(loop):
                continue
            lines = eigen_lines(loop)
            cand = lines if cand is None else [c for c in cand if any(c.same(x) for x in lines)]
    if cand is not None:
        if not cand:
            raise RuleFailure("loop-mismatch")
        cls.kind = "B1"
        cls.candidates = cand
    return cls


# -- clause emission --------------------------------------------------------

TRUE = ("__true__", True)


@dataclass
class _Det:
    """A way a component's ``theta`` can get fixed: if ``lit`` holds, ``theta == line``."""

    lit: tuple
    line: Subspace1D
    role: str  # "tx", "rx" or "cand"


@dataclass
class Encoding:
    red: Reduced
    comps: List[ComponentClass]
    where: Dict[Node, int]
    dets: List[List[_Det]]
    inst: TwoSatInstance
    pins: Dict[tuple, Tuple[Node, Subspace1D]]


class _Builder:
    def __init__(self):
        self.inst = TwoSatInstance()
        self.aux = 0

    def clause(self, a, b, tag):
        if a == TRUE or b == TRUE:
            return
        fa, fb = a == ("__true__", False), b == ("__true__", False)
        if fa and fb:
            raise RuleFailure(tag)
        if fa or fb:
            self.unit(b if fa else a, tag)
            return
        self.inst.add(a, b, tag)

    def unit(self, a, tag):
        if a == TRUE:
            return
        if a == ("__true__", False):
            raise RuleFailure(tag)
        # a single literal is forced through a fresh auxiliary: (a or y) and (a or not y)
        self.aux += 1
        y = (f"aux{self.aux}", True)
        self.inst.add(a, y, tag)
        self.inst.add(a, (y[0], False), tag)


def _not(lit):
    return (lit[0], not lit[1])


def _pair_tag(r1: str, r2: str, kind: str, singleton: bool = False) -> str:
    roles = {r1, r2}
    if singleton and roles == {"rx"}:
        return "eq2"
    if kind == "B1":
        return "eq9" if "tx" in roles else "eq4"
    if roles == {"tx"}:
        return "eq8"
    return "eq3"


def emit_clauses(red: Reduced, graphs: LinkGraphs, comps: List[ComponentClass]) -> Encoding:
    """Translate alignment and independence requirements into a 2-SAT instance."""
    b = _Builder()
    where = {n: ci for ci, c in enumerate(comps) for n in c.nodes}
    dets: List[List[_Det]] = [[] for _ in comps]
    pins: Dict[tuple, Tuple[Node, Subspace1D]] = {}
    K = len(red.users)
    d = red.d

    for ci, c in enumerate(comps):
        if c.kind == "B1":
            if len(c.candidates) == 1:
                dets[ci].append(_Det(TRUE, c.candidates[0], "cand"))
            else:
                z = ("z", ci)
                dets[ci].append(_Det((z, False), c.candidates[0], "cand"))
                dets[ci].append(_Det((z, True), c.candidates[1], "cand"))

    def pin(lit, node: Node, line: Subspace1D):
        c = where[node]
        dets[c].append(_Det(lit, comps[c].theta_of(node, line), node[0]))
        if lit != TRUE:
            pins[lit] = (node, line)

    # cross links into / out of two-stream users, and rank-1 choices
    for (i, j), r in sorted(graphs.G.items()):
        if i == j:
            continue
        if d[i] == 2:
            if d[j] == 2 or r == 2:
                raise RuleFailure("two-stream-receiver")
            x = (("x", i, j), True)
            y = ("y", i)
            b.clause(x, (y, True), "eq1")
            b.clause(x, (y, False), "eq1")
            pin(x, ("tx", j), _null_line(red.H[i][j]))
            continue
        if d[j] == 2:
            if r == 2:
                raise RuleFailure("two-stream-interferer")
            pin(TRUE, ("rx", i), _range_line(red.H[i][j]))
            continue
        if r == 1:
            x = ("x", i, j)
            pin((x, True), ("tx", j), _null_line(red.H[i][j]))
            pin((x, False), ("rx", i), _range_line(red.H[i][j]))

    # pairwise compatibility inside each component
    for ci, c in enumerate(comps):
        ds = dets[ci]
        for a, bb in itertools.combinations(ds, 2):
            if a.role == "cand" and bb.role == "cand":
                continue
            if a.line.same(bb.line):
                continue
            b.clause(_not(a.lit), _not(bb.lit), _pair_tag(a.role, bb.role, c.kind, len(c.nodes) == 1))

    def forbid(ci: int, theta: Subspace1D, tag: str):
        for dt in dets[ci]:
            if dt.line.same(theta):
                b.unit(_not(dt.lit), tag)

    # signal survives and stays independent of the interference line
    for k in range(K):
        if d[k] != 1:
            continue
        h = red.H[k][k]
        tx, rx = ("tx", k), ("rx", k)
        ca, cb = where[tx], where[rx]
        if link_rank(h) == 1:
            forbid(ca, comps[ca].theta_of(tx, _null_line(h)), "eq6" if comps[ca].nodes != [tx] else "eq2")
            forbid(cb, comps[cb].theta_of(rx, _range_line(h)), "eq7" if comps[cb].kind == "B1" else (
                "eq6" if len(comps[cb].nodes) > 1 else "eq2"))
            continue
        if ca == cb:
            loop = np.linalg.solve(comps[ca].maps[rx], h @ comps[ca].maps[tx])
            if _is_scalar(loop):
                raise RuleFailure("eq10")
            for line in eigen_lines(loop):
                forbid(ca, line, "eq10")
            continue
        for da in dets[ca]:
            sig = Subspace1D.of(h @ comps[ca].maps[tx] @ da.line.generator)
            bad = comps[cb].theta_of(rx, sig)
            for db in dets[cb]:
                if db.line.same(bad):
                    b.clause(_not(da.lit), _not(db.lit), "eq10")
    return Encoding(red, comps, where, dets, b.inst, pins)


# -- certificates -----------------------------------------------------------


def induced_certificate(ch: InterferenceChannel, d: Sequence[int], v: PrecoderSet, rtol: float = 1e-9):
    """Signal bases ``orth(V_k)`` and the interference span each receiver actually sees.

    Interference directions weaker than ``rtol`` times the largest incoming
    cross-link gain are dropped, and at most ``N_k - d_k`` are kept.
    """
    K = ch.K
    sig = [orth(v[k]) if d[k] > 0 else np.zeros((ch.M[k], 0), dtype=complex) for k in range(K)]
    inter = []
    for k in range(K):
        srcs = [j for j in range(K) if j != k and d[j] > 0 and ch.H[k][j].any()]
        blocks = [ch.H[k][j] @ sig[j] for j in srcs]
        scale = max([np.linalg.norm(ch.H[k][j], 2) for j in srcs], default=0.0)
        if not blocks or scale == 0:
            inter.append(np.zeros((ch.N[k], 0), dtype=complex))
            continue
        u, s, _ = np.linalg.svd(np.concatenate(blocks, axis=1), full_matrices=False)
        r = int(np.sum(s > rtol * scale))
        if d[k] > 0:
            r = min(r, ch.N[k] - d[k])
        inter.append(u[:, :max(r, 0)])
    return sig, inter


def certificate_verify(ch: InterferenceChannel, d: Sequence[int], signal, interference,
                       tol: float = 1e-7, indep_tol: float = 1e-7) -> bool:
    """Check the alignment conditions for given signal / interference bases.

    Every cross link must map the transmitter's signal subspace into the
    receiver's interference subspace (relative residual at most `tol`), and at
    each active receiver the received signal subspace must have full
    dimension ``d_k`` and be linearly independent of the interference
    subspace (smallest singular value of the stacked orthonormal bases above
    `indep_tol`).
    """
    K = ch.K
    d = [int(x) for x in d]
    for k in range(K):
        sk = np.asarray(signal[k], dtype=complex).reshape(ch.M[k], -1)
        if sk.shape[1] != d[k]:
            return False
        if d[k] and np.linalg.norm(sk.conj().T @ sk - np.eye(d[k])) > 1e-6:
            sk = orth(sk)
            if sk.shape[1] != d[k]:
                return False
    sig = [orth(np.asarray(signal[k], dtype=complex).reshape(ch.M[k], -1)) for k in range(K)]
    for k in range(K):
        if d[k] == 0:
            continue
        ik = orth(np.asarray(interference[k], dtype=complex).reshape(ch.N[k], -1))
        proj = np.eye(ch.N[k]) - ik @ ik.conj().T
        for j in range(K):
            if j == k or d[j] == 0:
                continue
            h = ch.H[k][j]
            if not h.any():
                continue
            hn = np.linalg.norm(h, 2)
            if np.linalg.norm(proj @ h @ sig[j], 2) > tol * hn:
                return False
        rx = ch.H[k][k] @ sig[k]
        hn = np.linalg.norm(ch.H[k][k], 2)
        if hn == 0:
            return False
        s = np.linalg.svd(rx, compute_uv=False)
        if s.size < d[k] or s[-1] <= indep_tol * hn:
            return False
        stacked = np.concatenate([orth(rx), ik], axis=1)
        if stacked.shape[1] > ch.N[k]:
            return False
        if np.linalg.svd(stacked, compute_uv=False)[-1] <= indep_tol:
            return False
    return True


def _instance_seed(ch: InterferenceChannel, d: Sequence[int]) -> int:
    h = hashlib.sha256(ch.dumps().encode())
    h.update(repr(list(d)).encode())
    return int.from_bytes(h.digest()[:8], "little")


def _lit_value(assign: Dict, lit) -> bool:
    if lit[0] == "__true__":
        return lit[1]
    return assign.get(lit[0], False) == lit[1]


def _assemble(ch: InterferenceChannel, d: Sequence[int], enc: Encoding, assign: Dict, seed: int) -> PrecoderSet:
    """Beamformers from a satisfying assignment; free components get a seeded random direction."""
    rng = np.random.default_rng(seed)
    theta: List[Subspace1D] = []
    for ci, c in enumerate(enc.comps):
        chosen = None
        if c.kind == "B1":
            if len(c.candidates) == 1:
                chosen = c.candidates[0]
            else:
                chosen = c.candidates[1 if assign.get(("z", ci), False) else 0]
        else:
            for dt in enc.dets[ci]:
                if _lit_value(assign, dt.lit):
                    chosen = dt.line
                    break
            if chosen is None:
                chosen = Subspace1D.of(rng.standard_normal(2) + 1j * rng.standard_normal(2))
        theta.append(chosen)
    v = [np.zeros((ch.M[k], 0), dtype=complex) for k in range(ch.K)]
    for i, k in enumerate(enc.red.users):
        if enc.red.d[i] == 2:
            v[k] = np.eye(2, dtype=complex)
            continue
        node = ("tx", i)
        g = enc.comps[enc.where[node]].value_of(node, theta[enc.where[node]]).generator[:ch.M[k]]
        n = np.linalg.norm(g)
        v[k] = (g / n if n > 0 else g).reshape(ch.M[k], 1)
    return v


def encode(ch: InterferenceChannel, d: Sequence[int]) -> Encoding:
    """Preprocess, decompose and emit the 2-SAT instance.

    Raises ``ValueError`` outside the supported sizes and ``RuleFailure``
    when a rule fails before any clause is needed.
    """
    red = preprocess(ch, d)
    graphs = build_link_graphs(red)
    comps = [classify_component(red, nodes) for nodes in _components(red, graphs)]
    return emit_clauses(red, graphs, comps)


def check_dof(ch: InterferenceChannel, d: Sequence[int]) -> FeasibilityOutcome:
    """Decide whether the DoF tuple `d` is achievable by linear alignment."""
    d = [int(x) for x in d]
    if max(ch.M) > 2 or max(ch.N) > 2:
        return FeasibilityOutcome("not_applicable", reason="more than two antennas at some node")
    try:
        enc = encode(ch, d)
    except RuleFailure as exc:
        return FeasibilityOutcome("infeasible", witness=exc.tag, tags=[exc.tag])
    tags = sorted(set(enc.inst.tags))
    assign = solve_2sat(enc.inst)
    if assign is None:
        return FeasibilityOutcome("infeasible", witness="2sat-unsat", clauses_emitted=len(enc.inst), tags=tags)
    seed = _instance_seed(ch, d)
    for attempt in range(2):
        v = _assemble(ch, d, enc, assign, seed + attempt)
        sig, inter = induced_certificate(ch, d, v)
        if certificate_verify(ch, d, sig, inter):
            return FeasibilityOutcome("achievable", sig, inter, v, clauses_emitted=len(enc.inst), tags=tags)
    return FeasibilityOutcome("infeasible", witness="certificate-verification-failed", clauses_emitted=len(enc.inst),
                              tags=tags, flagged=True)


# -- independent grid oracle ------------------------------------------------


def fibonacci_lines(n: int) -> np.ndarray:
    """``n`` unit vectors in C^2 spread evenly over the Bloch sphere (rows)."""
    i = np.arange(n) + 0.5
    polar = np.arccos(1 - 2 * i / n)
    azim = np.pi * (1 + 5 ** 0.5) * i
    return _bloch(polar, azim)


def _bloch(polar, azim) -> np.ndarray:
    polar = np.asarray(polar, dtype=float)
    azim = np.asarray(azim, dtype=float)
    return np.stack([np.cos(polar / 2), np.exp(1j * azim) * np.sin(polar / 2)], axis=-1)


def oracle_grid(ch: InterferenceChannel, d: Sequence[int], resolution: int = 2000, refine: int = 32,
                tol: float = 1e-4):
    """Search for an alignment certificate by sampling and local refinement.

    Every free single-stream transmitter (two antennas) ranges over a
    Fibonacci grid of `resolution` lines on the Bloch sphere. `resolution`
    joint configurations are drawn uniformly (fixed seed) from the product
    grid (the whole grid when only one user is free), scored by
    the misalignment residual, and the best `refine` are polished with a
    trust-region least-squares solve. Returns ``("achievable", V)`` with a
    certificate that passes :func:`certificate_verify` at `tol`, or
    ``("unknown", None)``; a grid search cannot prove infeasibility.
    """
    d = [int(x) for x in d]
    K = ch.K
    if K > 5:
        raise ValueError("oracle_grid handles at most 5 users")
    if max(ch.M) > 2 or max(ch.N) > 2:
        raise ValueError("oracle_grid handles at most two antennas per node")
    base: List[Optional[np.ndarray]] = []
    free = []
    for k in range(K):
        if d[k] == 0:
            base.append(np.zeros((ch.M[k], 0), dtype=complex))
        elif d[k] > min(ch.M[k], ch.N[k]):
            return "unknown", None
        elif d[k] == ch.M[k]:
            base.append(np.eye(ch.M[k], dtype=complex))
        else:
            base.append(None)
            free.append(k)

    def precoders(lines) -> PrecoderSet:
        v = list(base)
        for k, line in zip(free, lines):
            v[k] = np.asarray(line, dtype=complex).reshape(2, 1)
        return v

    hn = [[ch.H[k][j] / max(np.linalg.norm(ch.H[k][j], 2), 1e-300) for j in range(K)] for k in range(K)]
    slot = {k: u for u, k in enumerate(free)}

    def residual(lines: np.ndarray) -> np.ndarray:
        """Misalignment residual for a batch of configurations, ``lines[..., m, 2]``."""
        batch = lines.shape[:-2]
        out = []
        for k in range(K):
            if d[k] == 0:
                continue
            cols = []
            for j in range(K):
                if j == k or d[j] == 0 or not np.any(ch.H[k][j]):
                    continue
                if j in slot:
                    cols.append(np.einsum("nm,...m->...n", hn[k][j], lines[..., slot[j], :])[..., None])
                else:
                    cols.append(np.broadcast_to(hn[k][j] @ base[j], batch + (ch.N[k], d[j])))
            if not cols:
                continue
            g = np.concatenate(cols, axis=-1)
            if ch.N[k] - d[k] == 0:
                out.append(g.reshape(batch + (-1,)))
            else:
                # N_k = 2, d_k = 1: every pair of interference columns must be parallel
                a, b = np.triu_indices(g.shape[-1], 1)
                out.append(g[..., 0, a] * g[..., 1, b] - g[..., 1, a] * g[..., 0, b])
        if not out:
            return np.zeros(batch + (0,), dtype=complex)
        return np.concatenate(out, axis=-1)

    def accept(v):
        sig, inter = induced_certificate(ch, d, v, rtol=tol)
        return certificate_verify(ch, d, sig, inter, tol=tol, indep_tol=1e-3)

    if not free:
        v = precoders([])
        return ("achievable", v) if accept(v) else ("unknown", None)

    grid = fibonacci_lines(resolution)
    m = len(free)
    if m == 1:
        combos = np.arange(resolution)[:, None]
    else:
        combos = np.random.default_rng(resolution).integers(0, resolution, size=(resolution, m))
    scores = np.sum(np.abs(residual(grid[combos])) ** 2, axis=-1)
    order = np.argsort(scores, kind="stable")[:refine]

    def fun(x):
        r = residual(_bloch(x[..., 0::2], x[..., 1::2]))
        return np.concatenate([r.real, r.imag], axis=-1)

    def jac(x):
        # central differences, all coordinates in one batched evaluation
        step = 1e-7
        e = step * np.eye(x.size)
        return ((fun(x + e) - fun(x - e)) / (2 * step)).T

    for idx in order:
        v0 = precoders(grid[combos[idx]])
        if accept(v0):
            return "achievable", v0
        start = grid[combos[idx]]
        x0 = np.empty(2 * m)
        x0[0::2] = 2 * np.arccos(np.clip(np.abs(start[:, 0]), 0, 1))
        x0[1::2] = np.angle(start[:, 1]) - np.angle(start[:, 0])
        if fun(x0).size == 0:
            continue
        sol = least_squares(fun, x0, jac=jac, method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=100)
        v = precoders(_bloch(sol.x[0::2], sol.x[1::2]))
        if accept(v):
            return "achievable", v
    return "unknown", None
