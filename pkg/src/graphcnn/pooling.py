"""Graph pooling: Top-k, SAGPool, SortPool and DiffPool.

Selection-based methods keep ``ceil(ratio * N)`` nodes, breaking score ties
toward the lower node index, and cut the adjacency down to the induced
subgraph.  DiffPool learns a soft assignment ``S`` and coarsens with
``S^T x`` and ``S^T A S``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError, DomainError, NumericError, ShapeError
from .graph import Graph
from .layers import GcnLayer

POOLING_METHODS = ("none", "topk", "sagpool", "sortpool", "diffpool")


@dataclass
class PoolResult:
    x_reduced: Tensor
    g_reduced: Graph
    record: object  # kept indices (ndarray) or the assignment matrix S (Tensor)
    aux_losses: dict = field(default_factory=dict)


def pooled_size(ratio: float, n: int) -> int:
    """``ceil(ratio * n)`` computed on the decimal value of ``ratio``, at least 1."""
    if not 0.0 < ratio <= 1.0:
        raise DomainError(f"pool ratio must lie in (0, 1], got {ratio}")
    exact = Fraction(repr(float(ratio))) * n
    return max(1, min(n, math.ceil(exact)))


def select_top(scores: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` largest scores, ties to the lower index, returned sorted."""
    order = np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")
    return np.sort(order[:k])


def _gate(x: Tensor, gate: Tensor) -> Tensor:
    # broadcast a k x 1 gate across channels via an outer product with ones
    ones = Tensor(np.ones((1, x.shape[1])))
    return ad.hadamard(x, ad.matmul(gate, ones))


def topk_pool(g: Graph, x: Tensor, ratio: float, p: Tensor) -> PoolResult:
    """Project onto ``p / |p|``, keep the top nodes, gate them by ``tanh`` of the score."""
    if x.shape[0] != g.n:
        raise ShapeError(f"signal has {x.shape[0]} rows, graph has {g.n} nodes")
    if p.shape != (x.shape[1], 1):
        raise ShapeError(f"projection must be {x.shape[1]} x 1, got {p.shape}")
    k = pooled_size(ratio, g.n)
    if not np.any(p.data):
        raise NumericError("degenerate projection: zero-norm vector")
    inv_norm = ad.power(ad.sum_all(ad.hadamard(p, p)), -0.5)
    scores = ad.matmul(ad.matmul(x, p), inv_norm)
    idx = select_top(scores.data[:, 0], k)
    gate = ad.tanh(ad.gather_rows(scores, idx))
    x_red = _gate(ad.gather_rows(x, idx), gate)
    return PoolResult(x_red, g.subgraph(idx), idx)


def sag_pool(g: Graph, x: Tensor, ratio: float, scorer: GcnLayer) -> PoolResult:
    """Self-attention pooling: a one-channel GCN (tanh) scores the nodes."""
    if scorer.out_dim != 1:
        raise ShapeError("SAGPool scorer must have a single output channel")
    k = pooled_size(ratio, g.n)
    scores = scorer(g, x)
    idx = select_top(scores.data[:, 0], k)
    x_red = _gate(ad.gather_rows(x, idx), ad.gather_rows(scores, idx))
    return PoolResult(x_red, g.subgraph(idx), idx)


def sort_order(x: np.ndarray) -> np.ndarray:
    """Descending by the last channel, ties by earlier channels, then node index."""
    n, c = x.shape
    keys = [np.arange(n)] + [-x[:, j] for j in range(c)]
    return np.lexsort(keys)


def sort_pool(g: Graph, x: Tensor, k: int) -> Tensor:
    """Fixed ``k x C`` output: top-``k`` rows in sort order, zero-padded if ``N < k``."""
    if k < 1:
        raise ContractError("sortpool k must be >= 1")
    if x.shape[0] != g.n:
        raise ShapeError(f"signal has {x.shape[0]} rows, graph has {g.n} nodes")
    order = sort_order(x.data)[:k]
    top = ad.gather_rows(x, order)
    if len(order) < k:
        top = ad.concat_rows([top, Tensor(np.zeros((k - len(order), x.shape[1])))])
    return top


def diffpool_losses(adj: np.ndarray, s: Tensor) -> dict[str, Tensor]:
    """Link-prediction loss ``|A - S S^T|_F / N^2`` and mean row entropy of ``S``."""
    n = s.shape[0]
    resid = ad.sub(Tensor(adj), ad.matmul(s, ad.transpose(s)))
    link = ad.scale(ad.power(ad.sum_all(ad.hadamard(resid, resid)), 0.5), 1.0 / n ** 2)
    entropy = ad.scale(ad.sum_all(ad.xlogx(s)), -1.0 / n)
    return {"link": link, "entropy": entropy}


def coarsen(adj, s: Tensor, z: Tensor) -> tuple[Tensor, Tensor]:
    """``(S^T z, S^T A S)`` for a constant adjacency ``adj``."""
    st = ad.transpose(s)
    return ad.matmul(st, z), ad.matmul(st, ad.sparse_matmul(adj, s))


def diff_pool(g: Graph, x: Tensor, assign_gnn, embed_gnn, n_clusters: int) -> PoolResult:
    if n_clusters < 1:
        raise ContractError("n_clusters must be >= 1")
    if n_clusters > g.n:
        raise ContractError(f"n_clusters={n_clusters} exceeds node count {g.n}")
    logits = assign_gnn(g, x)
    if logits.shape[1] != n_clusters:
        raise ShapeError(f"assignment network emits {logits.shape[1]} columns, "
                         f"expected {n_clusters}")
    s = ad.softmax_rows(logits)
    z = embed_gnn(g, x)
    x_red, a_red = coarsen(g, s, z)
    dense = a_red.data
    if not g.directed:
        dense = 0.5 * (dense + dense.T)
    g_red = Graph.from_dense(dense, directed=g.directed, dense_cap=g.dense_cap)
    aux = diffpool_losses(g.dense(), s)
    return PoolResult(x_red, g_red, s, aux)
