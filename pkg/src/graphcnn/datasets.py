"""Dataset loading, writing and synthetic generation.

Node-classification directory layout (all plain text, 0-indexed):

``edges.txt``
    ``src dst`` or ``src dst weight`` per line, whitespace separated.  Lines
    starting with ``#`` are comments; ``# directed: true`` marks a directed
    graph (default undirected, edges symmetrized).
``features.csv``
    One comma-separated row of decimals per node, no header.
``labels.txt``
    One integer per line, ``-1`` for unlabeled nodes.
``split.txt``
    One of ``train``, ``val``, ``test``, ``none`` per line.

Graph-classification directories use the TU layout (``A.txt``,
``graph_indicator.txt``, ``graph_labels.txt``, optional ``node_labels.txt``
and ``node_attributes.txt``), with or without a ``<NAME>_`` prefix and with
1-based node and graph ids.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, DomainError, LabelingError, ParseError
from .graph import Graph, cycle_graph, erdos_renyi, is_connected, make_rng, sbm

SPLITS = ("train", "val", "test", "none")


def child_seeds(seed: int, k: int) -> list[int]:
    """``k`` independent 64-bit seeds derived from one."""
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF)
    return [int(s) for s in ss.generate_state(k, dtype=np.uint64)]


@dataclass
class NodeDataset:
    graph: Graph
    features: np.ndarray
    labels: np.ndarray
    split: np.ndarray  # array of split tokens

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.split = np.asarray(self.split, dtype=object)
        n = self.graph.n
        if self.features.shape[0] != n or len(self.labels) != n or len(self.split) != n:
            raise DataError("graph, features, labels and split disagree on node count")
        bad = [s for s in set(self.split.tolist()) if s not in SPLITS]
        if bad:
            raise DataError(f"unknown split tokens {sorted(bad)}")
        in_split = self.split != "none"
        if np.any(self.labels[in_split] < 0):
            raise LabelingError("every train/val/test node needs a label >= 0")

    def mask(self, which: str) -> np.ndarray:
        return self.split == which

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1

    @property
    def num_features(self) -> int:
        return self.features.shape[1]


@dataclass
class GraphDataset:
    graphs: list
    features: list
    labels: np.ndarray
    n_classes: int
    label_values: list = field(default_factory=list)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if not self.graphs:
            raise DataError("graph dataset is empty")
        if len(self.graphs) != len(self.features) or len(self.graphs) != len(self.labels):
            raise DataError("graphs, features and labels differ in length")
        if self.labels.min() < 0 or self.labels.max() >= self.n_classes:
            raise LabelingError(f"graph labels outside [0, {self.n_classes})")

    def __len__(self):
        return len(self.graphs)

    @property
    def num_features(self) -> int:
        return self.features[0].shape[1]


# node datasets ----------------------------------------------------------------


def _read_lines(path: Path) -> list[str]:
    if not path.is_file():
        raise ParseError("file not found", path)
    with open(path, encoding="utf-8") as fh:
        return fh.read().splitlines()


def _parse_float(tok: str, path, lineno) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(f"not a number: {tok!r}", path, lineno) from None
    if not np.isfinite(v):
        raise ParseError(f"non-finite value {tok!r}", path, lineno)
    return v


def _parse_int(tok: str, path, lineno) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"not an integer: {tok!r}", path, lineno) from None


def read_features(path: Path) -> np.ndarray:
    rows, width = [], None
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        row = [_parse_float(t.strip(), path, lineno) for t in line.split(",")]
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ParseError(f"ragged row: {len(row)} columns, expected {width}", path, lineno)
        rows.append(row)
    if not rows:
        raise ParseError("no feature rows", path)
    return np.array(rows, dtype=np.float64)


def read_edges(path: Path, n: int):
    directed = False
    edges = []
    for lineno, line in enumerate(_read_lines(path), start=1):
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            m = re.match(r"#\s*directed\s*:\s*(\w+)", s)
            if m:
                directed = m.group(1).lower() in ("true", "1", "yes")
            continue
        tok = s.split()
        if len(tok) not in (2, 3):
            raise ParseError(f"expected 'src dst [weight]', got {s!r}", path, lineno)
        u, v = _parse_int(tok[0], path, lineno), _parse_int(tok[1], path, lineno)
        for node in (u, v):
            if not 0 <= node < n:
                raise ParseError(f"node index {node} outside [0, {n})", path, lineno)
        w = _parse_float(tok[2], path, lineno) if len(tok) == 3 else 1.0
        edges.append((u, v, w))
    try:
        return Graph.from_edges(n, edges, directed=directed)
    except ValueError as exc:
        raise ParseError(str(exc), path) from None


def load_node_dataset(dir_path, normalize_features: bool = True) -> NodeDataset:
    d = Path(dir_path)
    if not d.is_dir():
        raise DataError(f"dataset directory not found: {d}")
    feats = read_features(d / "features.csv")
    n = feats.shape[0]
    g = read_edges(d / "edges.txt", n)
    labels = []
    for lineno, line in enumerate(_read_lines(d / "labels.txt"), start=1):
        if line.strip():
            labels.append(_parse_int(line.strip(), d / "labels.txt", lineno))
    if len(labels) != n:
        raise ParseError(f"{len(labels)} labels for {n} nodes", d / "labels.txt")
    split = []
    for lineno, line in enumerate(_read_lines(d / "split.txt"), start=1):
        tok = line.strip()
        if not tok:
            continue
        if tok not in SPLITS:
            raise ParseError(f"unknown split token {tok!r}", d / "split.txt", lineno)
        split.append(tok)
    if len(split) != n:
        raise ParseError(f"{len(split)} split entries for {n} nodes", d / "split.txt")
    if normalize_features:
        feats = row_normalize(feats)
    return NodeDataset(g, feats, np.array(labels), np.array(split, dtype=object))


def row_normalize(x: np.ndarray) -> np.ndarray:
    s = x.sum(axis=1, keepdims=True)
    return np.where(s != 0, x / np.where(s != 0, s, 1.0), x)


def _fmt(v: float) -> str:
    return repr(float(v))


def write_node_dataset(ds: NodeDataset, dir_path):
    d = Path(dir_path)
    d.mkdir(parents=True, exist_ok=True)
    g = ds.graph
    lines = [f"# directed: {'true' if g.directed else 'false'}"]
    for s, t, w in g.edges():
        if not g.directed and s > t:
            continue
        lines.append(f"{s} {t}" if w == 1.0 else f"{s} {t} {_fmt(w)}")
    _write(d / "edges.txt", lines)
    _write(d / "features.csv", [",".join(_fmt(v) for v in row) for row in ds.features])
    _write(d / "labels.txt", [str(int(v)) for v in ds.labels])
    _write(d / "split.txt", [str(s) for s in ds.split])


def _write(path: Path, lines):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


# graph datasets (TU layout) ---------------------------------------------------------


def _tu_file(d: Path, suffix: str, required: bool = True) -> Path | None:
    plain = d / f"{suffix}.txt"
    if plain.is_file():
        return plain
    hits = sorted(p for p in d.glob(f"*_{suffix}.txt"))
    if hits:
        return hits[0]
    if required:
        raise ParseError(f"missing {suffix}.txt", d)
    return None


def _int_column(path: Path) -> np.ndarray:
    out = []
    for lineno, line in enumerate(_read_lines(path), start=1):
        if line.strip():
            out.append(_parse_int(line.strip().split(",")[0].strip(), path, lineno))
    return np.array(out, dtype=np.int64)


def degree_features(g: Graph) -> np.ndarray:
    return np.bincount(g.dst, minlength=g.n).astype(np.float64)[:, None]


def load_graph_dataset(dir_path) -> GraphDataset:
    d = Path(dir_path)
    if not d.is_dir():
        raise DataError(f"dataset directory not found: {d}")
    a_path = _tu_file(d, "A")
    gi_path = _tu_file(d, "graph_indicator")
    indicator = _int_column(gi_path)
    n_total = len(indicator)
    if n_total == 0:
        raise ParseError("graph indicator is empty", gi_path)
    n_graphs = int(indicator.max())
    if indicator.min() < 1 or not np.array_equal(np.unique(indicator), np.arange(1, n_graphs + 1)):
        raise ParseError("graph ids must cover 1..G without gaps", gi_path)
    gl_path = _tu_file(d, "graph_labels")
    raw_labels = _int_column(gl_path)
    if len(raw_labels) != n_graphs:
        raise ParseError(f"{len(raw_labels)} graph labels for {n_graphs} graphs", gl_path)

    pairs = []
    for lineno, line in enumerate(_read_lines(a_path), start=1):
        s = line.strip()
        if not s:
            continue
        tok = [t for t in re.split(r"[,\s]+", s) if t]
        if len(tok) != 2:
            raise ParseError(f"expected 'i, j', got {s!r}", a_path, lineno)
        u, v = _parse_int(tok[0], a_path, lineno) - 1, _parse_int(tok[1], a_path, lineno) - 1
        for node in (u, v):
            if not 0 <= node < n_total:
                raise ParseError(f"node id {node + 1} outside [1, {n_total}]", a_path, lineno)
        if indicator[u] != indicator[v]:
            raise ParseError(f"edge ({u + 1}, {v + 1}) crosses graphs", a_path, lineno)
        pairs.append((u, v))

    parts = []
    nl_path = _tu_file(d, "node_labels", required=False)
    if nl_path is not None:
        node_labels = _int_column(nl_path)
        if len(node_labels) != n_total:
            raise ParseError(f"{len(node_labels)} node labels for {n_total} nodes", nl_path)
        values = np.unique(node_labels)
        parts.append((node_labels[:, None] == values[None, :]).astype(np.float64))
    na_path = _tu_file(d, "node_attributes", required=False)
    if na_path is not None:
        attrs = read_features(na_path)
        if attrs.shape[0] != n_total:
            raise ParseError(f"{attrs.shape[0]} attribute rows for {n_total} nodes", na_path)
        parts.insert(0, attrs)
    features = np.concatenate(parts, axis=1) if parts else None

    if not np.all(np.diff(indicator) >= 0):
        raise ParseError("graph indicator must be nondecreasing", gi_path)
    starts = np.searchsorted(indicator, np.arange(1, n_graphs + 1), side="left")
    sizes = np.bincount(indicator - 1, minlength=n_graphs)
    local_edges = [[] for _ in range(n_graphs)]
    for u, v in pairs:
        gid = indicator[u] - 1
        local_edges[gid].append((u - starts[gid], v - starts[gid]))
    graphs, feats = [], []
    for k in range(n_graphs):
        g = Graph.from_edges(int(sizes[k]), local_edges[k], directed=False)
        graphs.append(g)
        if features is None:
            feats.append(degree_features(g))
        else:
            feats.append(features[starts[k]:starts[k] + sizes[k]])
    values = sorted(set(raw_labels.tolist()))
    index = {v: i for i, v in enumerate(values)}
    labels = np.array([index[v] for v in raw_labels])
    return GraphDataset(graphs, feats, labels, len(values), values)


def write_graph_dataset(ds: GraphDataset, dir_path, name: str | None = None):
    d = Path(dir_path)
    d.mkdir(parents=True, exist_ok=True)
    prefix = f"{name}_" if name else ""
    a_lines, gi_lines, attr_lines = [], [], []
    offset = 0
    for k, (g, x) in enumerate(zip(ds.graphs, ds.features)):
        for s, t, _ in g.edges():
            a_lines.append(f"{s + offset + 1}, {t + offset + 1}")
        gi_lines.extend([str(k + 1)] * g.n)
        attr_lines.extend(",".join(_fmt(v) for v in row) for row in x)
        offset += g.n
    values = ds.label_values or list(range(ds.n_classes))
    _write(d / f"{prefix}A.txt", a_lines)
    _write(d / f"{prefix}graph_indicator.txt", gi_lines)
    _write(d / f"{prefix}graph_labels.txt", [str(values[int(y)]) for y in ds.labels])
    _write(d / f"{prefix}node_attributes.txt", attr_lines)


# synthetic tasks -------------------------------------------------------------------


def make_synthetic_node_task(kind: str = "sbm", params: dict | None = None,
                             seed: int = 0) -> NodeDataset:
    """Planted-partition node task with noisy one-hot class features.

    ``params``: ``sizes``, ``p_in``, ``p_out``, ``flip`` (probability a
    node's feature points at a uniformly chosen wrong class),
    ``train_per_class`` and ``val_per_class``; the remainder is test.
    """
    if kind != "sbm":
        raise DomainError(f"unknown synthetic node task {kind!r}")
    p = dict(sizes=(100, 100, 100, 100), p_in=0.10, p_out=0.005, flip=0.3,
             train_per_class=20, val_per_class=30)
    p.update(params or {})
    sizes = [int(s) for s in p["sizes"]]
    m = len(sizes)
    if not 0.0 <= p["flip"] <= 1.0:
        raise DomainError("flip probability must lie in [0, 1]")
    if any(s < p["train_per_class"] + p["val_per_class"] for s in sizes):
        raise DomainError("class smaller than train_per_class + val_per_class")
    s_graph, s_feat, s_split = child_seeds(seed, 3)
    g, labels = sbm(sizes, p["p_in"], p["p_out"], s_graph)
    n = g.n
    rng = make_rng(s_feat)
    shown = labels.copy()
    if m > 1:
        flipped = rng.random(n) < p["flip"]
        offset = rng.integers(1, m, size=n)
        shown = np.where(flipped, (labels + offset) % m, labels)
    features = np.eye(m)[shown]
    rng = make_rng(s_split)
    split = np.full(n, "test", dtype=object)
    for c in range(m):
        members = rng.permutation(np.nonzero(labels == c)[0])
        split[members[:p["train_per_class"]]] = "train"
        split[members[p["train_per_class"]:p["train_per_class"] + p["val_per_class"]]] = "val"
    return NodeDataset(g, features, labels, split)


def _connected_er(n: int, p: float, rng, tries: int = 200) -> Graph:
    g = None
    for _ in range(tries):
        g = erdos_renyi(n, p, int(rng.integers(2 ** 63)))
        if is_connected(g):
            return g
    return g


def _clique_union(sizes) -> Graph:
    edges, base = [], 0
    for s in sizes:
        edges += [(base + i, base + j) for i in range(s) for j in range(i + 1, s)]
        base += s
    return Graph.from_edges(base, edges)


def make_synthetic_graph_task(kind: str = "ring-vs-er", params: dict | None = None,
                              seed: int = 0) -> GraphDataset:
    """Two graph families with degree features.

    ``ring-vs-er``: class 0 are undirected cycles, class 1 connected G(n, p)
    graphs with mean degree ``er_degree``.  ``component-count``: class ``c``
    is a union of ``c + 1`` cliques over ``n`` nodes.
    """
    p = dict(graphs_per_class=50, nodes=20, er_degree=4.0, max_components=3)
    p.update(params or {})
    rng = make_rng(seed)
    n, per = int(p["nodes"]), int(p["graphs_per_class"])
    graphs, labels = [], []
    if kind == "ring-vs-er":
        if n < 3:
            raise DomainError("ring-vs-er needs at least 3 nodes per graph")
        prob = min(1.0, p["er_degree"] / (n - 1))
        for _ in range(per):
            graphs.append(cycle_graph(n))
            labels.append(0)
            graphs.append(_connected_er(n, prob, rng))
            labels.append(1)
        n_classes = 2
    elif kind == "component-count":
        n_classes = int(p["max_components"])
        if n_classes < 2 or n < 2 * n_classes:
            raise DomainError("component-count needs max_components >= 2 and n >= 2 * max_components")
        for _ in range(per):
            for c in range(n_classes):
                k = c + 1
                sizes = rng.multinomial(n - 2 * k, np.full(k, 1.0 / k)) + 2
                graphs.append(_clique_union(sizes))
                labels.append(c)
    else:
        raise DomainError(f"unknown synthetic graph task {kind!r}")
    order = rng.permutation(len(graphs))
    graphs = [graphs[i] for i in order]
    labels = np.array(labels)[order]
    return GraphDataset(graphs, [degree_features(g) for g in graphs], labels, n_classes,
                        list(range(n_classes)))

