"""Directed graphs with node categories and feature vectors.

Nodes are dense integer ids 0..n-1. The pair universe is every ordered
pair (i, j) with i != j, iterated in row-major order, which fixes the
layout of all per-pair vectors used elsewhere in the package.
"""

import json
from dataclasses import dataclass, field

import numpy as np


class GraphFormatError(ValueError):
    """Raised when node/edge files violate the graph invariants."""


@dataclass(frozen=True)
class Node:
    id: int
    category: int
    features: np.ndarray


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable directed graph over dense node ids.

    features : (n, d) float array, one row per node
    categories : (n,) int array with values in [0, C)
    edges : (m, 2) int array of ordered pairs, lexicographically sorted
    """

    features: np.ndarray
    categories: np.ndarray
    edges: np.ndarray
    n_categories: int
    category_labels: dict = field(default=None, compare=False)

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        cats = np.asarray(self.categories, dtype=np.int64)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "categories", cats)
        if feats.ndim != 2:
            raise GraphFormatError("features must be a 2-d array")
        if cats.shape != (feats.shape[0],):
            raise GraphFormatError("categories length must match node count")
        if cats.size and (cats.min() < 0 or cats.max() >= self.n_categories):
            raise GraphFormatError("category out of range [0, C)")
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if edges.size:
            if edges.min() < 0 or edges.max() >= self.n:
                raise GraphFormatError("edge endpoint out of range")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise GraphFormatError("self-loop edge")
            edges = np.unique(edges, axis=0)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(
            self, "_edge_set", frozenset(map(tuple, edges.tolist()))
        )
        codes = edges[:, 0] * self.n + edges[:, 1] if edges.size else np.empty(0, np.int64)
        object.__setattr__(self, "_edge_codes", np.sort(codes))

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    @property
    def n_edges(self):
        return self.edges.shape[0]

    def node(self, i):
        return Node(i, int(self.categories[i]), self.features[i])

    def has_edge(self, i, j):
        return (i, j) in self._edge_set

    def edge_mask(self, i, j):
        """Vectorized membership test for ordered pairs."""
        codes = np.asarray(i, dtype=np.int64) * self.n + np.asarray(j, dtype=np.int64)
        idx = np.searchsorted(self._edge_codes, codes)
        idx = np.minimum(idx, max(self._edge_codes.size - 1, 0))
        if self._edge_codes.size == 0:
            return np.zeros(codes.shape, dtype=bool)
        return self._edge_codes[idx] == codes


def observed_label(g, i, j):
    """1 iff the ordered pair (i, j) is an observed edge."""
    if not (0 <= i < g.n and 0 <= j < g.n):
        raise GraphFormatError(f"node id out of range: ({i}, {j})")
    if i == j:
        raise GraphFormatError("pair must have i != j")
    return 1 if g.has_edge(i, j) else 0


class PairUniverse:
    """All ordered pairs (i, j), i != j, in deterministic row-major order."""

    def __init__(self, n):
        if n < 2:
            raise GraphFormatError("pair universe requires n >= 2")
        self.n = n

    def __len__(self):
        return self.n * (self.n - 1)

    def __iter__(self):
        for i in range(self.n):
            for j in range(self.n):
                if i != j:
                    yield (i, j)


def pair_universe(g):
    return PairUniverse(g.n)


def universe_indices(n):
    """Vectorized (src, dst) index arrays in PairUniverse order."""
    if n < 2:
        raise GraphFormatError("pair universe requires n >= 2")
    off_diagonal = ~np.eye(n, dtype=bool)
    ids = np.arange(n)
    src = np.broadcast_to(ids[:, None], (n, n))[off_diagonal]
    dst = np.broadcast_to(ids[None, :], (n, n))[off_diagonal]
    return src, dst


def observed_vector(g):
    """Binary observation vector over the pair universe."""
    dense = np.zeros((g.n, g.n), dtype=np.int64)
    if g.n_edges:
        dense[g.edges[:, 0], g.edges[:, 1]] = 1
    src, dst = universe_indices(g.n)
    return dense[src, dst]


def load_graph(nodes_path, edges_path):
    """Load a graph from a JSON-lines node file and a TSV edge file.

    Node records are ``{"id": int, "category": int, "features": [float, ...]}``;
    edge rows are ``src<TAB>dst``. Node ids must be dense 0..n-1.
    """
    records = []
    with open(nodes_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise GraphFormatError(
                    f"{nodes_path}:{lineno}: invalid JSON ({exc.msg})"
                ) from exc
            for key in ("id", "category", "features"):
                if key not in rec:
                    raise GraphFormatError(
                        f"{nodes_path}:{lineno}: missing field '{key}'"
                    )
            records.append(rec)
    if not records:
        raise GraphFormatError(f"{nodes_path}: no node records")

    seen = set()
    for rec in records:
        if rec["id"] in seen:
            raise GraphFormatError(f"duplicate node id {rec['id']}")
        seen.add(rec["id"])
    n = len(records)
    if seen != set(range(n)):
        raise GraphFormatError("node ids must be dense integers 0..n-1")

    records.sort(key=lambda r: r["id"])
    dims = {len(r["features"]) for r in records}
    if len(dims) != 1:
        raise GraphFormatError(
            f"inconsistent feature dimensions: {sorted(dims)}"
        )
    features = np.array([r["features"] for r in records], dtype=np.float64)
    categories = np.array([r["category"] for r in records], dtype=np.int64)
    if categories.min() < 0:
        raise GraphFormatError("negative category")

    edges = []
    with open(edges_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise GraphFormatError(
                    f"{edges_path}:{lineno}: expected 'src<TAB>dst'"
                )
            try:
                i, j = int(parts[0]), int(parts[1])
            except ValueError as exc:
                raise GraphFormatError(
                    f"{edges_path}:{lineno}: non-integer endpoint"
                ) from exc
            if i == j:
                raise GraphFormatError(f"{edges_path}:{lineno}: self-loop ({i}, {j})")
            if not (0 <= i < n and 0 <= j < n):
                raise GraphFormatError(
                    f"{edges_path}:{lineno}: dangling endpoint ({i}, {j})"
                )
            edges.append((i, j))

    return Graph(
        features=features,
        categories=categories,
        edges=np.array(edges, dtype=np.int64).reshape(-1, 2),
        n_categories=int(categories.max()) + 1 if n else 0,
    )


def save_graph(g, nodes_path, edges_path):
    """Write a graph in the load_graph file formats (round-trip exact)."""
    with open(nodes_path, "w", encoding="utf-8", newline="\n") as fh:
        for i in range(g.n):
            rec = {
                "id": i,
                "category": int(g.categories[i]),
                "features": [float(x) for x in g.features[i]],
            }
            fh.write(json.dumps(rec) + "\n")
    with open(edges_path, "w", encoding="utf-8", newline="\n") as fh:
        for i, j in g.edges.tolist():
            fh.write(f"{i}\t{j}\n")
