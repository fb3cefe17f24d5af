"""Ontology DAG container, traversal primitives, walk sampler, and splits.

Edges run coarse -> fine (parent index, child index).  Only nodes with a
curated definition become graph nodes; edges through undefined terms are
contracted so hierarchy depth is preserved.
"""

from __future__ import annotations

import json
import logging
from collections import Counter, deque
from dataclasses import dataclass, field

import numpy as np

from .textprep import first_sentence, tokenize

log = logging.getLogger(__name__)

MIN_SPLIT_NODES = 10


@dataclass(frozen=True)
class TermNode:
    node_index: int
    term_id: str
    term_tokens: tuple[str, ...]
    def_tokens: tuple[str, ...] | None

    def __post_init__(self):
        if len(self.term_tokens) < 1:
            raise ValueError(f"empty terminology for {self.term_id}")
        if self.def_tokens is not None and len(self.def_tokens) < 1:
            raise ValueError(f"empty definition for {self.term_id}")


class OntologyDag:
    """Immutable directed acyclic graph with per-node token payloads."""

    def __init__(self, name: str, nodes: list[TermNode], edges: list[tuple[int, int]]):
        self.name = name
        self.nodes = tuple(nodes)
        self.edges = tuple(sorted(set(map(tuple, edges))))
        n = len(self.nodes)
        for parent, child in self.edges:
            if not (0 <= parent < n and 0 <= child < n):
                raise ValueError(f"edge ({parent},{child}) out of range")
        self.children = [[] for _ in range(n)]
        self.parents = [[] for _ in range(n)]
        for parent, child in self.edges:
            self.children[parent].append(child)
            self.parents[child].append(parent)
        self.neighbors = [sorted(set(self.children[i]) | set(self.parents[i]))
                          for i in range(n)]
        self.id_to_index = {node.term_id: node.node_index for node in self.nodes}
        if topological_order(self) is None:
            raise ValueError(f"graph {name} contains a cycle")
        self._depths = None

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def roots(self) -> list[int]:
        return [i for i in range(len(self.nodes)) if not self.parents[i]]


def topological_order(g: OntologyDag) -> list[int] | None:
    """Kahn's algorithm; None if a cycle survives."""
    indeg = [len(g.parents[i]) for i in range(len(g))]
    queue = deque(i for i, d in enumerate(indeg) if d == 0)
    order = []
    while queue:
        v = queue.popleft()
        order.append(v)
        for c in g.children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                queue.append(c)
    return order if len(order) == len(g) else None


# ----------------------------------------------------------------- building

def build_dag(terms, name: str | None = None) -> OntologyDag:
    """Build the graph for one merged term list.

    Terms without a curated definition are excluded; their incident
    edges are contracted through them (each defined descendant links to
    its nearest defined ancestors).  Any cycle in the raw `is_a` data is
    broken by dropping back edges found during a deterministic DFS.
    """
    terms = list(terms)
    name = name or (terms[0].source_graph if terms else "empty")
    ids = {t.term_id for t in terms}
    raw_parents = {t.term_id: [p for p in t.is_a_parents if p in ids] for t in terms}

    defined = []
    for t in terms:
        if not t.definition:
            continue
        def_toks = tuple(tokenize(first_sentence(t.definition)))
        term_toks = tuple(tokenize(t.name))
        if not def_toks or not term_toks:
            continue
        defined.append((t, term_toks, def_toks))

    nodes = [TermNode(i, t.term_id, term_toks, def_toks)
             for i, (t, term_toks, def_toks) in enumerate(defined)]
    index = {n.term_id: n.node_index for n in nodes}

    # nearest defined ancestors, walking up through undefined terms
    cache: dict[str, frozenset] = {}

    def defined_ancestors(term_id, trail):
        if term_id in cache:
            return cache[term_id]
        if term_id in trail:
            return frozenset()   # cycle among undefined terms
        found = set()
        for parent in raw_parents.get(term_id, ()):
            if parent in index:
                found.add(index[parent])
            else:
                found |= defined_ancestors(parent, trail | {term_id})
        result = frozenset(found)
        cache[term_id] = result
        return result

    edges = set()
    for node in nodes:
        for parent in raw_parents.get(node.term_id, ()):
            if parent in index:
                edges.add((index[parent], node.node_index))
            else:
                for anc in defined_ancestors(parent, frozenset({node.term_id})):
                    edges.add((anc, node.node_index))
    edges = {(p, c) for p, c in edges if p != c}
    edges = _break_cycles(len(nodes), edges, name)
    return OntologyDag(name, nodes, sorted(edges))


def _break_cycles(n: int, edges: set, name: str) -> set:
    """Drop back edges discovered by DFS from the lowest node index."""
    children = [[] for _ in range(n)]
    for p, c in sorted(edges):
        children[p].append(c)
    color = [0] * n   # 0 unvisited, 1 on stack, 2 done
    dropped = set()

    for start in range(n):
        if color[start]:
            continue
        stack = [(start, iter(children[start]))]
        color[start] = 1
        while stack:
            v, it = stack[-1]
            advanced = False
            for c in it:
                if color[c] == 1:
                    dropped.add((v, c))
                    log.warning("cycle in %s: dropping edge (%d,%d)", name, v, c)
                elif color[c] == 0:
                    color[c] = 1
                    stack.append((c, iter(children[c])))
                    advanced = True
                    break
            if not advanced:
                color[v] = 2
                stack.pop()
    return edges - dropped


# ---------------------------------------------------------------- traversal

def shortest_distance(g: OntologyDag, a: int, b: int) -> int | None:
    """BFS distance on the undirected view; None when unreachable."""
    if a == b:
        return 0
    seen = {a}
    frontier = [a]
    dist = 0
    while frontier:
        dist += 1
        nxt = []
        for v in frontier:
            for u in g.neighbors[v]:
                if u == b:
                    return dist
                if u not in seen:
                    seen.add(u)
                    nxt.append(u)
        frontier = nxt
    return None


def all_depths(g: OntologyDag) -> np.ndarray:
    """Depth of every node: 1 + shortest directed distance from any root."""
    if g._depths is not None:
        return g._depths
    depth = np.full(len(g), -1, dtype=np.int64)
    frontier = g.roots()
    for v in frontier:
        depth[v] = 1
    while frontier:
        nxt = []
        for v in frontier:
            for c in g.children[v]:
                if depth[c] == -1:
                    depth[c] = depth[v] + 1
                    nxt.append(c)
        frontier = nxt
    g._depths = depth
    return depth


def depth(g: OntologyDag, v: int) -> int:
    return int(all_depths(g)[v])


# ------------------------------------------------------------------ walking

@dataclass(frozen=True)
class WalkConfig:
    walks_per_node: int = 10     # m
    walk_length: int = 6         # k
    seed: int = 0

    def __post_init__(self):
        if self.walks_per_node < 1:
            raise ValueError("walks_per_node must be >= 1")
        if self.walk_length < 2:
            raise ValueError("walk_length must be >= 2")


@dataclass
class WalkBatch:
    paths: np.ndarray            # [num_paths, walk_length] int
    config: WalkConfig

    def __len__(self):
        return len(self.paths)


def sample_walks(g: OntologyDag, cfg: WalkConfig) -> WalkBatch:
    """m uniform random walks of length k from every node, over the
    undirected view of the edges.  Isolated nodes repeat themselves.
    Per-node generator seeds make the result order-independent."""
    if len(g) == 0:
        raise ValueError("empty graph")
    m, k = cfg.walks_per_node, cfg.walk_length
    paths = np.empty((m * len(g), k), dtype=np.int64)
    for start in range(len(g)):
        rng = np.random.default_rng(cfg.seed + start)
        for r in range(m):
            row = paths[start * m + r]
            row[0] = start
            cur = start
            for j in range(1, k):
                nbrs = g.neighbors[cur]
                cur = nbrs[rng.integers(len(nbrs))] if nbrs else cur
                row[j] = cur
    return WalkBatch(paths, cfg)


# ------------------------------------------------------------------- splits

@dataclass(frozen=True)
class DataSplit:
    train: tuple[int, ...]
    valid: tuple[int, ...]
    test: tuple[int, ...]
    seed: int

    def save(self, path) -> None:
        payload = {"train": list(self.train), "valid": list(self.valid),
                   "test": list(self.test), "seed": self.seed}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "DataSplit":
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        return cls(tuple(d["train"]), tuple(d["valid"]), tuple(d["test"]), d["seed"])


def make_split(g: OntologyDag, seed: int) -> DataSplit | None:
    """Seeded 70/10/20 shuffle split of the defined nodes; remainders go
    to train.  Graphs under MIN_SPLIT_NODES are skipped."""
    n = len(g)
    if n < MIN_SPLIT_NODES:
        log.warning("graph %s has %d nodes; skipping split", g.name, n)
        return None
    order = np.random.default_rng(seed).permutation(n)
    n_valid = int(np.floor(0.1 * n))
    n_test = int(np.floor(0.2 * n))
    valid = tuple(sorted(int(i) for i in order[:n_valid]))
    test = tuple(sorted(int(i) for i in order[n_valid:n_valid + n_test]))
    train = tuple(sorted(int(i) for i in order[n_valid + n_test:]))
    return DataSplit(train, valid, test, seed)


# ---------------------------------------------------------------- snapshots

def save_dag(g: OntologyDag, path) -> None:
    payload = {
        "name": g.name,
        "num_nodes": len(g),
        "num_edges": g.num_edges,
        "nodes": [{"id": n.term_id, "term": list(n.term_tokens),
                   "definition": list(n.def_tokens) if n.def_tokens else None}
                  for n in g.nodes],
        "edges": [list(e) for e in g.edges],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_dag(path) -> OntologyDag:
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    nodes = [TermNode(i, rec["id"], tuple(rec["term"]),
                      tuple(rec["definition"]) if rec["definition"] else None)
             for i, rec in enumerate(d["nodes"])]
    return OntologyDag(d["name"], nodes, [tuple(e) for e in d["edges"]])


def dag_stats(g: OntologyDag) -> dict:
    """Counts plus depth and word-count distributions (terminology vs.
    definition length comparison included)."""
    depths = all_depths(g)
    term_lens = [len(n.term_tokens) for n in g.nodes]
    def_lens = [len(n.def_tokens) for n in g.nodes if n.def_tokens]
    return {
        "name": g.name,
        "num_nodes": len(g),
        "num_edges": g.num_edges,
        "num_roots": len(g.roots()),
        "depth_histogram": dict(sorted(Counter(int(d) for d in depths).items())),
        "terminology_word_histogram": dict(sorted(Counter(term_lens).items())),
        "definition_word_histogram": dict(sorted(Counter(def_lens).items())),
        "mean_terminology_words": float(np.mean(term_lens)) if term_lens else 0.0,
        "mean_definition_words": float(np.mean(def_lens)) if def_lens else 0.0,
    }
