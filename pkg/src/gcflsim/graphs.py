"""Graph containers, TU-format ingestion and G(n,m) random nulls.

Graphs are simple and undirected: every edge is stored exactly once as an
(u, v) pair with u < v, node indices are 0-based, and node features are a
dense float64 matrix with one row per node.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ArgumentError, CorruptDatasetError, IngestionError

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class Graph:
    """One labeled graph sample: structure, node features and a class index."""

    num_nodes: int
    edges: np.ndarray  # (E, 2) int64, u < v, lexicographically sorted
    features: np.ndarray  # (num_nodes, feat_dim) float64
    label: int = 0

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.num_nodes < 1:
            raise ArgumentError("graph must have at least one node")
        if self.features.ndim != 2 or self.features.shape[0] != self.num_nodes:
            raise ArgumentError(
                f"features must have {self.num_nodes} rows, got shape {self.features.shape}"
            )
        if self.features.shape[1] < 1:
            raise ArgumentError("feat_dim must be >= 1")
        if self.edges.size:
            if self.edges.min() < 0 or self.edges.max() >= self.num_nodes:
                raise ArgumentError("edge endpoint out of range")
            lo = np.minimum(self.edges[:, 0], self.edges[:, 1])
            hi = np.maximum(self.edges[:, 0], self.edges[:, 1])
            if np.any(lo == hi):
                raise ArgumentError("self-loops are not allowed")
            canon = np.stack([lo, hi], axis=1)
            order = np.lexsort((canon[:, 1], canon[:, 0]))
            canon = canon[order]
            if len(canon) > 1 and np.any(np.all(canon[1:] == canon[:-1], axis=1)):
                raise ArgumentError("duplicate undirected edges are not allowed")
            self.edges = canon

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def feat_dim(self) -> int:
        return self.features.shape[1]

    @cached_property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.num_nodes, dtype=np.int64)
        if self.edges.size:
            np.add.at(deg, self.edges[:, 0], 1)
            np.add.at(deg, self.edges[:, 1], 1)
        return deg

    @cached_property
    def neighbors(self) -> list[np.ndarray]:
        """Sorted neighbor array per node."""
        adj: list[list[int]] = [[] for _ in range(self.num_nodes)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return [np.array(sorted(a), dtype=np.int64) for a in adj]

    @cached_property
    def adjacency(self) -> np.ndarray:
        """Dense symmetric 0/1 adjacency matrix (float64, no self-loops)."""
        a = np.zeros((self.num_nodes, self.num_nodes), dtype=np.float64)
        if self.edges.size:
            a[self.edges[:, 0], self.edges[:, 1]] = 1.0
            a[self.edges[:, 1], self.edges[:, 0]] = 1.0
        return a

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(u), int(v)) for u, v in self.edges}

    def with_features(self, features: np.ndarray) -> "Graph":
        return Graph(self.num_nodes, self.edges.copy(), features, self.label)

    def with_label(self, label: int) -> "Graph":
        return Graph(self.num_nodes, self.edges.copy(), self.features.copy(), label)


@dataclass(eq=False)
class Dataset:
    """A named collection of graphs sharing one feature space and label set."""

    name: str
    graphs: list[Graph]
    feat_dim: int = field(init=False)
    num_classes: int = field(init=False)

    def __post_init__(self):
        if not self.graphs:
            raise ArgumentError(f"dataset {self.name!r} is empty")
        dims = {g.feat_dim for g in self.graphs}
        if len(dims) != 1:
            raise ArgumentError(f"dataset {self.name!r} mixes feature dims {sorted(dims)}")
        self.feat_dim = dims.pop()
        self.num_classes = max(2, max(g.label for g in self.graphs) + 1)
        if min(g.label for g in self.graphs) < 0:
            raise ArgumentError("labels must be non-negative")

    def __len__(self) -> int:
        return len(self.graphs)


def erdos_renyi_gnm(n: int, m: int, seed: int) -> Graph:
    """Uniform G(n, m) random graph: exactly m distinct undirected edges.

    Deterministic under ``seed``; node features are a single constant column.
    """
    if n < 1:
        raise ArgumentError("n must be >= 1")
    max_m = n * (n - 1) // 2
    if m < 0 or m > max_m:
        raise ArgumentError(f"m={m} outside [0, {max_m}] for n={n}")
    rng = np.random.default_rng(seed)
    if max_m <= 200_000:
        chosen = rng.choice(max_m, size=m, replace=False) if m else np.empty(0, np.int64)
        edges = np.array([_edge_from_index(int(k), n) for k in np.sort(chosen)], dtype=np.int64)
    else:
        # rejection sampling keeps memory O(m) on very large vertex sets
        picked: set[tuple[int, int]] = set()
        edges_list: list[tuple[int, int]] = []
        while len(picked) < m:
            u = int(rng.integers(n))
            v = int(rng.integers(n))
            if u == v:
                continue
            e = (min(u, v), max(u, v))
            if e not in picked:
                picked.add(e)
                edges_list.append(e)
        edges = np.array(sorted(edges_list), dtype=np.int64)
    edges = edges.reshape(-1, 2)
    return Graph(n, edges, np.ones((n, 1)), 0)


def _edge_from_index(k: int, n: int) -> tuple[int, int]:
    """Decode the k-th pair in lexicographic order over {(u,v): u<v<n}."""
    u = 0
    remaining = k
    row = n - 1
    while remaining >= row:
        remaining -= row
        u += 1
        row -= 1
    return (u, u + 1 + remaining)


def binomial_gnp(n: int, p: float, seed: int) -> Graph:
    """G(n, p)-distributed graph realized as G(n, m) with binomial m."""
    if not 0.0 <= p <= 1.0:
        raise ArgumentError("p must be in [0, 1]")
    rng = np.random.default_rng(seed)
    m = int(rng.binomial(n * (n - 1) // 2, p))
    sub = int(rng.integers(2**32))
    return erdos_renyi_gnm(n, m, sub)


# ---------------------------------------------------------------------------
# TU text format ingestion
# ---------------------------------------------------------------------------


def load_tu_dataset(root_path: str | Path, name: str) -> Dataset:
    """Load a dataset in the public TU text layout from ``root_path``.

    Expects ``<name>_A.txt``, ``<name>_graph_indicator.txt`` and
    ``<name>_graph_labels.txt`` inside ``root_path`` (or ``root_path/<name>``),
    plus optional ``<name>_node_labels.txt`` / ``<name>_node_attributes.txt``.
    Node ids in the files are 1-based and edges are listed in both directions.
    """
    root = Path(root_path)
    base = root / name if (root / name / f"{name}_A.txt").exists() else root

    def required(suffix: str) -> Path:
        p = base / f"{name}_{suffix}"
        if not p.exists():
            raise IngestionError(f"missing required file: {p}")
        return p

    adj_path = required("A.txt")
    indicator_path = required("graph_indicator.txt")
    labels_path = required("graph_labels.txt")

    graph_of_node = _read_int_column(indicator_path)
    num_nodes_total = len(graph_of_node)
    if num_nodes_total == 0:
        raise CorruptDatasetError(f"{indicator_path} is empty")

    raw_labels = _read_int_column(labels_path)
    num_graphs = max(graph_of_node)
    if min(graph_of_node) < 1:
        raise CorruptDatasetError(f"{indicator_path}: graph ids must be 1-based")
    if len(raw_labels) != num_graphs:
        raise CorruptDatasetError(
            f"{labels_path}: {len(raw_labels)} labels for {num_graphs} graphs"
        )

    # 0-based contiguous class indices in sorted raw-label order
    label_map = {lab: i for i, lab in enumerate(sorted(set(raw_labels)))}
    labels = [label_map[lab] for lab in raw_labels]

    # global node id -> (graph index, local node index), in file order
    local_index = np.zeros(num_nodes_total, dtype=np.int64)
    node_counts = np.zeros(num_graphs, dtype=np.int64)
    for nid, gid in enumerate(graph_of_node):
        local_index[nid] = node_counts[gid - 1]
        node_counts[gid - 1] += 1
    if np.any(node_counts == 0):
        raise CorruptDatasetError(f"{indicator_path}: some graphs have no nodes")

    edge_sets: list[set[tuple[int, int]]] = [set() for _ in range(num_graphs)]
    with open(adj_path) as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                a_str, b_str = line.split(",")
                a, b = int(a_str), int(b_str)
            except ValueError as exc:
                raise CorruptDatasetError(f"{adj_path}:{line_no}: bad edge line {line!r}") from exc
            if not (1 <= a <= num_nodes_total and 1 <= b <= num_nodes_total):
                raise CorruptDatasetError(f"{adj_path}:{line_no}: node index out of range")
            ga, gb = graph_of_node[a - 1], graph_of_node[b - 1]
            if ga != gb:
                raise CorruptDatasetError(f"{adj_path}:{line_no}: edge crosses graphs {ga} and {gb}")
            if a == b:
                continue  # defensively drop self-loops
            u, v = int(local_index[a - 1]), int(local_index[b - 1])
            edge_sets[ga - 1].add((min(u, v), max(u, v)))

    features = _build_node_features(base, name, num_nodes_total)

    graphs = []
    by_graph = np.argsort(np.asarray(graph_of_node), kind="stable")
    node_rows = np.split(by_graph, np.cumsum(node_counts)[:-1])
    for gi in range(num_graphs):
        edges = np.array(sorted(edge_sets[gi]), dtype=np.int64).reshape(-1, 2)
        graphs.append(Graph(int(node_counts[gi]), edges, features[node_rows[gi]], labels[gi]))

    logger.info("loaded %s: %d graphs, feat_dim=%d, %d classes",
                name, len(graphs), graphs[0].feat_dim, len(label_map))
    return Dataset(name, graphs)


def _build_node_features(base: Path, name: str, num_nodes: int) -> np.ndarray:
    """Attributes when present, one-hot node labels appended; constant fallback."""
    attr_path = base / f"{name}_node_attributes.txt"
    label_path = base / f"{name}_node_labels.txt"
    parts = []
    if attr_path.exists():
        attrs = _read_float_matrix(attr_path)
        if len(attrs) != num_nodes:
            raise CorruptDatasetError(f"{attr_path}: {len(attrs)} rows for {num_nodes} nodes")
        parts.append(attrs)
    if label_path.exists():
        node_labels = _read_int_column(label_path)
        if len(node_labels) != num_nodes:
            raise CorruptDatasetError(f"{label_path}: {len(node_labels)} rows for {num_nodes} nodes")
        values = sorted(set(node_labels))
        index = {v: i for i, v in enumerate(values)}
        onehot = np.zeros((num_nodes, len(values)), dtype=np.float64)
        onehot[np.arange(num_nodes), [index[v] for v in node_labels]] = 1.0
        parts.append(onehot)
    if not parts:
        return np.ones((num_nodes, 1), dtype=np.float64)
    return np.concatenate(parts, axis=1)


def _read_int_column(path: Path) -> list[int]:
    out = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                # some TU label files use floats like "1.0"
                out.append(int(float(line.split(",")[0])))
            except ValueError as exc:
                raise CorruptDatasetError(f"{path}:{line_no}: bad integer {line!r}") from exc
    return out


def _read_float_matrix(path: Path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(x) for x in line.split(",")])
            except ValueError as exc:
                raise CorruptDatasetError(f"{path}:{line_no}: bad float row {line!r}") from exc
    width = {len(r) for r in rows}
    if len(width) != 1:
        raise CorruptDatasetError(f"{path}: ragged attribute rows")
    return np.asarray(rows, dtype=np.float64)


def complete_graph(n: int) -> Graph:
    """K_n with a constant feature column (test and null-model helper)."""
    if n < 1:
        raise ArgumentError("n must be >= 1")
    edges = np.array([(u, v) for u in range(n) for v in range(u + 1, n)], dtype=np.int64)
    return Graph(n, edges.reshape(-1, 2), np.ones((n, 1)), 0)


def max_edges(n: int) -> int:
    return n * (n - 1) // 2 if n > 1 else 0
