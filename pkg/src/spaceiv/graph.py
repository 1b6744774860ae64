"""Graphs of IV models and the graphical identifiability checks.

Nodes are ``("I", k)`` for instruments, ``("X", j)`` for predictors (both
0-based) and ``"Y"`` for the response. In JSON and DOT output they are
written ``I1..Im``, ``X1..Xd`` and ``Y``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property

import networkx as nx
import numpy as np

from .errors import CyclicGraph, SizeGuard

Y = "Y"
_SOURCE = "__source__"
_SINK = "__sink__"


def inode(k):
    return ("I", int(k))


def xnode(j):
    return ("X", int(j))


def label(node) -> str:
    if node == Y:
        return "Y"
    kind, idx = node
    return f"{kind}{idx + 1}"


def parse_label(text: str):
    text = text.strip()
    if text == "Y":
        return Y
    kind, idx = text[0].upper(), int(text[1:]) - 1
    if kind not in ("I", "X") or idx < 0:
        raise ValueError(f"bad node label {text!r}")
    return (kind, idx)


@dataclass(frozen=True)
class CausalGraph:
    """Directed graph over instrument nodes, predictor nodes and ``Y``.

    ``predictors`` lists the predictor indices present (all ``d`` of them
    unless the graph is a marginalization).
    """

    m: int
    d: int
    edges: frozenset
    predictors: frozenset = None

    def __post_init__(self):
        preds = frozenset(range(self.d)) if self.predictors is None else frozenset(self.predictors)
        object.__setattr__(self, "predictors", preds)
        edges = frozenset((u, v) for u, v in self.edges)
        object.__setattr__(self, "edges", edges)
        nodes = set(self.nodes)
        for u, v in edges:
            if u not in nodes or v not in nodes:
                raise ValueError(f"edge {label(u)}->{label(v)} uses an unknown node")
            if v != Y and v[0] == "I":
                raise ValueError(f"edge into instrument node {label(v)}")
            if u == Y:
                raise ValueError("edges out of Y are not allowed")
        sub = nx.DiGraph()
        sub.add_nodes_from(xnode(j) for j in preds)
        sub.add_edges_from((u, v) for u, v in edges if u != Y and v != Y and u[0] == v[0] == "X")
        if not nx.is_directed_acyclic_graph(sub):
            cycle = nx.find_cycle(sub)
            raise CyclicGraph("predictor subgraph has a cycle: " + " -> ".join(label(u) for u, _ in cycle))

    @property
    def nodes(self):
        return [inode(k) for k in range(self.m)] + [xnode(j) for j in sorted(self.predictors)] + [Y]

    @cached_property
    def nx(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.nodes)
        g.add_edges_from(self.edges)
        return g

    @property
    def pa_y(self) -> tuple:
        """0-based predictor parents of ``Y``."""
        return tuple(sorted(u[1] for u, v in self.edges if v == Y and u[0] == "X"))

    def to_dict(self):
        return {
            "m": self.m,
            "d": self.d,
            "edges": sorted([label(u), label(v)] for u, v in self.edges),
            "pa_y": [j + 1 for j in self.pa_y],
        }

    def to_json(self, indent=2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, payload) -> "CausalGraph":
        edges = {(parse_label(u), parse_label(v)) for u, v in payload["edges"]}
        for j in payload.get("pa_y", []):
            edges.add((xnode(int(j) - 1), Y))
        return cls(m=int(payload["m"]), d=int(payload["d"]), edges=frozenset(edges))

    @classmethod
    def from_json(cls, text: str) -> "CausalGraph":
        return cls.from_dict(json.loads(text))

    def remove_instruments(self, drop) -> "CausalGraph":
        """Delete instrument nodes and renumber the remaining ones."""
        drop = set(drop)
        keep = [k for k in range(self.m) if k not in drop]
        new_index = {k: i for i, k in enumerate(keep)}
        edges = set()
        for u, v in self.edges:
            if u != Y and u[0] == "I":
                if u[1] in drop:
                    continue
                u = inode(new_index[u[1]])
            edges.add((u, v))
        return CausalGraph(m=len(keep), d=self.d, edges=frozenset(edges), predictors=self.predictors)

    def to_dot(self, name="G") -> str:
        lines = [f"digraph {name} {{"]
        for node in self.nodes:
            shape = "box" if node != Y and node[0] == "I" else "ellipse"
            lines.append(f'  "{label(node)}" [shape={shape}];')
        for u, v in sorted(self.edges, key=lambda e: (label(e[0]), label(e[1]))):
            lines.append(f'  "{label(u)}" -> "{label(v)}";')
        lines.append("}")
        return "\n".join(lines) + "\n"


def from_edge_labels(m, d, edges, predictors=None) -> CausalGraph:
    """Build a graph from 1-based string edges such as ``("I1", "X3")``."""
    return CausalGraph(
        m=m,
        d=d,
        edges=frozenset((parse_label(u), parse_label(v)) for u, v in edges),
        predictors=predictors,
    )


def from_scm(scm, zero_tol: float = 1e-9) -> CausalGraph:
    """Graph with an edge wherever the coefficient exceeds ``zero_tol`` in magnitude."""
    A, B, beta = scm.A, scm.B, scm.beta_star
    edges = set()
    for j, k in zip(*np.nonzero(np.abs(A) > zero_tol)):
        edges.add((inode(k), xnode(j)))
    for j, i in zip(*np.nonzero(np.abs(B) > zero_tol)):
        edges.add((xnode(i), xnode(j)))
    for j in np.flatnonzero(np.abs(beta) > zero_tol):
        edges.add((xnode(j), Y))
    return CausalGraph(m=scm.m, d=scm.d, edges=frozenset(edges))


def instrument_ancestors(g: CausalGraph, S) -> frozenset:
    """Instruments with a directed path into some predictor in ``S``."""
    G = g.nx
    out = set()
    for j in S:
        node = xnode(j)
        if node not in G:
            raise ValueError(f"predictor X{j + 1} is not in the graph")
        out.update(a[1] for a in nx.ancestors(G, node) if a != Y and a[0] == "I")
    return frozenset(out)


def marginalize(g: CausalGraph, V) -> CausalGraph:
    """Latent projection onto instruments, predictors ``V`` and ``Y``.

    ``u -> w`` is an edge of the result iff ``g`` has a directed path from
    ``u`` to ``w`` whose intermediate nodes all lie outside ``V``.
    """
    V = frozenset(int(j) for j in V)
    if not V <= g.predictors:
        raise ValueError("V must be a subset of the graph's predictors")
    kept = {xnode(j) for j in V} | {Y}
    G = g.nx
    edges = set()
    for u in [inode(k) for k in range(g.m)] + [xnode(j) for j in sorted(V)]:
        stack = list(G.successors(u))
        seen = set()
        while stack:
            w = stack.pop()
            if w in seen:
                continue
            seen.add(w)
            if w in kept:
                edges.add((u, w))
            else:
                stack.extend(G.successors(w))
    return CausalGraph(m=g.m, d=g.d, edges=frozenset(edges), predictors=V)


@dataclass(frozen=True)
class PathPacking:
    count: int
    cut: frozenset = field(default_factory=frozenset)


def max_node_disjoint_paths(g: CausalGraph, sources, targets) -> PathPacking:
    """Maximum number of node-disjoint directed paths from instruments
    ``sources`` to predictors ``targets``, with a minimum vertex cut.

    Every node is split into ``in -> out`` with unit capacity (endpoints
    included), so the max-flow value equals the size of the smallest node
    set meeting every source-target path.
    """
    sources = [inode(k) for k in sources]
    targets = [xnode(j) for j in targets]
    if not sources or not targets:
        raise ValueError("sources and targets must be non-empty")
    G = g.nx
    H = nx.DiGraph()
    for node in G.nodes:
        H.add_edge((node, 0), (node, 1), capacity=1)
    for u, v in G.edges:
        H.add_edge((u, 1), (v, 0))
    for s in sources:
        H.add_edge(_SOURCE, (s, 0))
    for t in targets:
        H.add_edge((t, 1), _SINK)
    value, (reach, _) = nx.minimum_cut(H, _SOURCE, _SINK)
    cut = frozenset(
        node for node in G.nodes if (node, 0) in reach and (node, 1) not in reach
    )
    return PathPacking(count=int(round(value)), cut=cut)


@dataclass(frozen=True)
class B3Entry:
    """A candidate set ``S`` whose instrument ancestors coincide with those of PA(Y)."""

    S: tuple
    cut_size: int
    cut: frozenset
    passes_ii: bool


@dataclass(frozen=True)
class GraphReport:
    pa_y: tuple
    b1: bool
    disjoint_paths: int
    b3: bool
    b3_entries: tuple = ()
    witness: tuple | None = None
    sets_checked: int = 0

    def to_dict(self):
        out = {
            "B1": self.b1,
            "B3": self.b3,
            "pa_y": [j + 1 for j in self.pa_y],
            "disjoint_paths": self.disjoint_paths,
            "sets_checked": self.sets_checked,
            "b3_i_violations": [
                {
                    "S": [j + 1 for j in e.S],
                    "cut_size": e.cut_size,
                    "cut": sorted(label(u) for u in e.cut),
                    "passes_ii": e.passes_ii,
                }
                for e in self.b3_entries
            ],
        }
        if self.witness is not None:
            out["witness"] = {"S": [j + 1 for j in self.witness], "failed": ["i", "ii"]}
        return out


def check_b_conditions(g: CausalGraph, force: bool = False, stop_at_first: bool = True) -> GraphReport:
    """Evaluate the node-disjoint path condition and the ancestor/cut
    distinctness condition over all sets of size ``|PA(Y)|``.

    By default the scan stops at the first set violating both parts of the
    distinctness check; with ``stop_at_first=False`` every set is examined
    and ``witness`` is the first violator.
    """
    pa = g.pa_y
    if not pa:
        raise ValueError("Y has no parents in the graph")
    k = len(pa)
    preds = sorted(g.predictors)
    if len(preds) > 30 and k > 4 and not force:
        raise SizeGuard(f"refusing to enumerate C({len(preds)}, {k}) sets; pass force=True")
    instruments = list(range(g.m))
    if instruments:
        b1_count = max_node_disjoint_paths(g, instruments, pa).count
    else:
        b1_count = 0
    an_pa = instrument_ancestors(g, pa)
    entries = []
    witness = None
    checked = 0
    for S in itertools.combinations(preds, k):
        if S == pa:
            continue
        checked += 1
        if instrument_ancestors(g, S) != an_pa:
            continue
        if instruments:
            packing = max_node_disjoint_paths(g, instruments, sorted(set(S) | set(pa)))
        else:
            packing = PathPacking(0)
        ok = packing.count >= k + 1
        entries.append(B3Entry(S=S, cut_size=packing.count, cut=packing.cut, passes_ii=ok))
        if not ok and witness is None:
            witness = S
            if stop_at_first:
                break
    return GraphReport(
        pa_y=pa,
        b1=b1_count >= k,
        disjoint_paths=b1_count,
        b3=witness is None,
        b3_entries=tuple(entries),
        witness=witness,
        sets_checked=checked,
    )


def random_coefficients(g: CausalGraph, rng, low=0.5, high=1.5):
    """Draw ``(A, B, beta)`` on the edges of ``g``, each coefficient uniform
    on ``(-high, -low) U (low, high)``."""
    d, m = g.d, g.m
    A = np.zeros((d, m))
    B = np.zeros((d, d))
    beta = np.zeros(d)
    for u, v in sorted(g.edges, key=lambda e: (label(e[0]), label(e[1]))):
        w = rng.uniform(low, high) * rng.choice((-1.0, 1.0))
        if v == Y:
            beta[u[1]] = w
        elif u[0] == "I":
            A[v[1], u[1]] = w
        else:
            B[v[1], u[1]] = w
    return A, B, beta
