"""Graph representation, constructors, normalizations and structural statistics.

Storage is COO triplets ``(src, dst, weight)`` kept in a canonical order
(sorted by ``src`` then ``dst``, no duplicates, no explicit zeros).  The
adjacency matrix follows the shift convention ``A[dst, src] = weight`` so
that ``A @ x`` moves the signal along each edge; for the directed ring
``i -> i+1`` this gives the circular delay ``(A x)[i] = x[i-1]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from .errors import (
    DegenerateSpectrumError,
    DomainError,
    InvalidSizeError,
    ShapeError,
    UnsupportedStructureError,
)

DENSE_CAP = 2000


def make_rng(seed: int) -> np.random.Generator:
    """The one PRNG used across the package (PCG64 seeded with a 64-bit int)."""
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


@dataclass(frozen=True, eq=False)
class Graph:
    n: int
    directed: bool
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    dense_cap: int = DENSE_CAP
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        n = int(self.n)
        if n < 0:
            raise InvalidSizeError(f"vertex count must be >= 0, got {n}")
        src = np.asarray(self.src, dtype=np.int64).ravel()
        dst = np.asarray(self.dst, dtype=np.int64).ravel()
        w = np.asarray(self.weight, dtype=np.float64).ravel()
        if not (len(src) == len(dst) == len(w)):
            raise ShapeError("src, dst and weight must have equal length")
        if len(src) and (src.min() < 0 or dst.min() < 0 or src.max() >= n or dst.max() >= n):
            raise ShapeError(f"edge endpoint outside [0, {n})")
        if not np.all(np.isfinite(w)):
            raise DomainError("edge weights must be finite")
        keep = w != 0.0
        src, dst, w = src[keep], dst[keep], w[keep]
        order = np.lexsort((dst, src))
        src, dst, w = src[order], dst[order], w[order]
        if len(src) > 1:
            dup = (src[1:] == src[:-1]) & (dst[1:] == dst[:-1])
            if dup.any():
                k = int(np.argmax(dup))
                raise ShapeError(f"duplicate edge ({src[k]}, {dst[k]})")
        if not self.directed and len(src):
            # both orientations must be present with identical weight
            order_t = np.lexsort((src, dst))
            if not (
                np.array_equal(src, dst[order_t])
                and np.array_equal(dst, src[order_t])
                and np.array_equal(w, w[order_t])
            ):
                raise UnsupportedStructureError("undirected graph has an asymmetric edge set")
        for arr in (src, dst, w):
            arr.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "directed", bool(self.directed))
        object.__setattr__(self, "src", src)
        object.__setattr__(self, "dst", dst)
        object.__setattr__(self, "weight", w)

    # construction helpers -------------------------------------------------

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence], directed: bool = False,
                   dense_cap: int = DENSE_CAP) -> "Graph":
        """Build from ``(src, dst)`` or ``(src, dst, weight)`` tuples.

        For undirected graphs each pair may be listed in one or both
        orientations; the mirror is added automatically.
        """
        triples = {}
        for e in edges:
            if len(e) == 2:
                s, d, w = int(e[0]), int(e[1]), 1.0
            elif len(e) == 3:
                s, d, w = int(e[0]), int(e[1]), float(e[2])
            else:
                raise ShapeError(f"edge tuple must have 2 or 3 entries, got {e!r}")
            keys = [(s, d)] if directed else [(s, d), (d, s)]
            for key in keys:
                if key in triples and triples[key] != w:
                    raise ShapeError(f"conflicting weights for edge {key}")
                if key in triples and directed:
                    raise ShapeError(f"duplicate edge {key}")
                triples[key] = w
        if triples:
            arr = np.array([(s, d) for s, d in triples], dtype=np.int64)
            w = np.array(list(triples.values()), dtype=np.float64)
            return cls(n, directed, arr[:, 0], arr[:, 1], w, dense_cap)
        return cls.empty(n, directed, dense_cap)

    @classmethod
    def empty(cls, n: int, directed: bool = False, dense_cap: int = DENSE_CAP) -> "Graph":
        z = np.zeros(0, dtype=np.int64)
        return cls(n, directed, z, z, np.zeros(0), dense_cap)

    @classmethod
    def from_dense(cls, a: np.ndarray, directed: bool | None = None,
                   dense_cap: int = DENSE_CAP) -> "Graph":
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ShapeError(f"adjacency must be square, got {a.shape}")
        if directed is None:
            directed = not np.array_equal(a, a.T)
        dst, src = np.nonzero(a)
        return cls(a.shape[0], directed, src, dst, a[dst, src], dense_cap)

    @classmethod
    def from_sparse(cls, m, directed: bool | None = None, dense_cap: int = DENSE_CAP) -> "Graph":
        m = sp.coo_matrix(m)
        m.sum_duplicates()
        if directed is None:
            directed = (m != m.T).nnz > 0
        return cls(m.shape[0], directed, m.col, m.row, m.data, dense_cap)

    def with_weights(self, weight: np.ndarray) -> "Graph":
        return Graph(self.n, self.directed, self.src, self.dst, weight, self.dense_cap)

    # views ----------------------------------------------------------------

    @property
    def num_edges(self) -> int:
        """Stored triplets; an undirected edge between distinct nodes counts twice."""
        return int(len(self.src))

    def edges(self) -> list[tuple[int, int, float]]:
        return [(int(s), int(d), float(w)) for s, d, w in zip(self.src, self.dst, self.weight)]

    def sparse(self) -> sp.csr_matrix:
        """CSR adjacency with ``A[dst, src] = w`` (cached)."""
        m = self._cache.get("csr")
        if m is None:
            m = sp.csr_matrix((self.weight, (self.dst, self.src)), shape=(self.n, self.n))
            self._cache["csr"] = m
        return m

    def dense(self) -> np.ndarray:
        if self.n > self.dense_cap:
            raise InvalidSizeError(
                f"graph with {self.n} nodes exceeds dense cap {self.dense_cap}"
            )
        a = np.zeros((self.n, self.n))
        a[self.dst, self.src] = self.weight
        return a

    def is_symmetric(self) -> bool:
        if not self.directed:
            return True
        m = self.sparse()
        return (m != m.T).nnz == 0

    def subgraph(self, idx: Sequence[int]) -> "Graph":
        """Induced subgraph; node ``idx[k]`` becomes node ``k``."""
        idx = np.asarray(idx, dtype=np.int64)
        pos = np.full(self.n, -1, dtype=np.int64)
        pos[idx] = np.arange(len(idx))
        keep = (pos[self.src] >= 0) & (pos[self.dst] >= 0)
        return Graph(len(idx), self.directed, pos[self.src[keep]], pos[self.dst[keep]],
                     self.weight[keep], self.dense_cap)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.n == other.n
            and self.directed == other.directed
            and np.array_equal(self.src, other.src)
            and np.array_equal(self.dst, other.dst)
            and np.array_equal(self.weight, other.weight)
        )

    __hash__ = object.__hash__

    def __repr__(self):
        kind = "directed" if self.directed else "undirected"
        return f"Graph(n={self.n}, {kind}, triplets={self.num_edges})"


@dataclass(frozen=True)
class Permutation:
    """Bijection on ``[0, n)``: node ``i`` moves to position ``map[i]``.

    The matching permutation matrix has ``P[map[i], i] = 1``.
    """

    map: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.map, dtype=np.int64).ravel()
        if not np.array_equal(np.sort(m), np.arange(len(m))):
            raise ShapeError("permutation map is not a bijection on [0, n)")
        m.setflags(write=False)
        object.__setattr__(self, "map", m)

    def __len__(self):
        return len(self.map)

    def inverse(self) -> "Permutation":
        inv = np.empty_like(self.map)
        inv[self.map] = np.arange(len(self.map))
        return Permutation(inv)

    def matrix(self) -> np.ndarray:
        n = len(self.map)
        p = np.zeros((n, n))
        p[self.map, np.arange(n)] = 1.0
        return p

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(np.arange(n))

    @classmethod
    def random(cls, n: int, seed: int) -> "Permutation":
        return cls(make_rng(seed).permutation(n))


# constructors ---------------------------------------------------------------


def ring_graph(n: int) -> Graph:
    """Directed cycle ``i -> (i+1) mod n``; its adjacency is the circular shift."""
    if n < 1:
        raise InvalidSizeError(f"ring graph needs n >= 1, got {n}")
    src = np.arange(n)
    return Graph(n, True, src, (src + 1) % n, np.ones(n))


def cycle_graph(n: int) -> Graph:
    if n < 3:
        raise InvalidSizeError("undirected cycle needs n >= 3")
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def path_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)]) if n > 1 else Graph.empty(n)


def complete_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def star_graph(leaves: int) -> Graph:
    return Graph.from_edges(leaves + 1, [(0, j) for j in range(1, leaves + 1)])


def identity_graph(n: int) -> Graph:
    """Self-loop on every node: adjacency equal to the identity matrix."""
    idx = np.arange(n)
    return Graph(n, False, idx, idx, np.ones(n))


def _undirected_from_pairs(n: int, i: np.ndarray, j: np.ndarray) -> Graph:
    src = np.concatenate([i, j])
    dst = np.concatenate([j, i])
    return Graph(n, False, src, dst, np.ones(len(src)))


def erdos_renyi(n: int, p: float, seed: int) -> Graph:
    """G(n, p): each unordered pair independently with probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"edge probability must lie in [0, 1], got {p}")
    if n < 0:
        raise InvalidSizeError(f"n must be >= 0, got {n}")
    rng = make_rng(seed)
    i, j = np.triu_indices(n, 1)
    hit = rng.random(len(i)) < p
    return _undirected_from_pairs(n, i[hit], j[hit])


def sbm(class_sizes: Sequence[int], p_in: float, p_out: float, seed: int):
    """Planted-partition block model.

    Returns ``(graph, labels)`` with nodes grouped contiguously by class.
    """
    if len(class_sizes) == 0:
        raise InvalidSizeError("class_sizes must be nonempty")
    for p in (p_in, p_out):
        if not 0.0 <= p <= 1.0:
            raise DomainError(f"edge probability must lie in [0, 1], got {p}")
    if any(int(s) < 0 for s in class_sizes):
        raise InvalidSizeError("class sizes must be >= 0")
    labels = np.repeat(np.arange(len(class_sizes)), [int(s) for s in class_sizes])
    n = len(labels)
    rng = make_rng(seed)
    i, j = np.triu_indices(n, 1)
    prob = np.where(labels[i] == labels[j], p_in, p_out)
    hit = rng.random(len(i)) < prob
    return _undirected_from_pairs(n, i[hit], j[hit]), labels


# matrices and normalizations -------------------------------------------------


def degree_matrix(g: Graph) -> np.ndarray:
    """Diagonal of D: row sums of the adjacency, ``D[i] = sum_j A[i, j]``."""
    return np.bincount(g.dst, weights=g.weight, minlength=g.n).astype(np.float64)


def laplacian(g: Graph) -> np.ndarray:
    if g.directed:
        raise UnsupportedStructureError("the Laplacian is defined for undirected graphs only")
    return np.diag(degree_matrix(g)) - g.dense()


def normalize_sym(g: Graph) -> Graph:
    """``D^{-1/2} A D^{-1/2}``; isolated nodes keep all-zero rows."""
    if g.directed:
        raise UnsupportedStructureError("symmetric normalization needs an undirected graph")
    d = degree_matrix(g)
    inv = np.zeros_like(d)
    pos = d > 0
    inv[pos] = 1.0 / np.sqrt(d[pos])
    # grouped so both orientations round identically
    return g.with_weights(g.weight * (inv[g.src] * inv[g.dst]))


def spectral_radius(g: Graph) -> float:
    if g.num_edges == 0:
        return 0.0
    a = g.dense()
    vals = np.linalg.eigvalsh(a) if not g.directed else np.linalg.eigvals(a)
    return float(np.max(np.abs(vals)))


def normalize_spectral(g: Graph) -> Graph:
    """Divide all weights by ``|lambda_max|`` so the spectral radius becomes 1."""
    rho = spectral_radius(g)
    if rho <= 1e-12:
        raise DegenerateSpectrumError("adjacency has no nonzero eigenvalue")
    return g.with_weights(g.weight / rho)


def add_self_loops(g: Graph) -> Graph:
    diag = g.src == g.dst
    loops = np.zeros(g.n)
    loops[g.src[diag]] = g.weight[diag]
    idx = np.arange(g.n)
    src = np.concatenate([g.src[~diag], idx])
    dst = np.concatenate([g.dst[~diag], idx])
    w = np.concatenate([g.weight[~diag], loops + 1.0])
    return Graph(g.n, g.directed, src, dst, w, g.dense_cap)


def permute(g: Graph, p: Permutation) -> Graph:
    """Relabel nodes so that ``dense(result) = P dense(g) P^T``."""
    if len(p) != g.n:
        raise ShapeError(f"permutation length {len(p)} != vertex count {g.n}")
    return Graph(g.n, g.directed, p.map[g.src], p.map[g.dst], g.weight, g.dense_cap)


def permute_signal(x, p: Permutation):
    """Row reordering ``P x``; accepts arrays and autodiff tensors."""
    from .autodiff import Tensor, gather_rows

    if len(p) != x.shape[0]:
        raise ShapeError(f"permutation length {len(p)} != signal rows {x.shape[0]}")
    inv = p.inverse().map
    if isinstance(x, Tensor):
        return gather_rows(x, inv)
    return np.asarray(x)[inv]


# structural statistics -------------------------------------------------------


def diameter(g: Graph) -> float:
    """Longest unweighted shortest path, following edge direction.

    Returns ``math.inf`` when some node cannot reach another.
    """
    if g.n <= 1:
        return 0
    # csgraph wants M[i, j] for edge i -> j, the transpose of the shift matrix
    dist = csgraph.shortest_path(g.sparse().T, directed=g.directed, unweighted=True)
    top = dist.max()
    return math.inf if not np.isfinite(top) else int(top)


def average_degree(g: Graph) -> float:
    if g.n == 0:
        return 0.0
    return float(degree_matrix(g).mean())


def is_connected(g: Graph) -> bool:
    if g.n <= 1:
        return True
    ncomp = csgraph.connected_components(g.sparse(), directed=g.directed, connection="strong")[0]
    return ncomp == 1
