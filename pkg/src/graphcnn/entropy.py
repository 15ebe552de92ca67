"""Edge entropy: how predictive the graph structure is of node classes.

For walk length ``n`` the interclass connectivity ``p_ij(n)`` is the share
of length-``n`` walks starting in class ``i`` that end in class ``j``; the
edge entropy of class ``i`` is the base-``M`` entropy of that row.  Walks
follow edge direction on the binarized adjacency and may revisit nodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ContractError, LabelingError, ShapeError
from .graph import Graph


@dataclass(frozen=True)
class EntropyReport:
    order: int
    n_classes: int
    P: np.ndarray  # undefined rows are NaN
    H: np.ndarray  # NaN for undefined classes
    undefined_classes: frozenset

    def defined(self, cls: int) -> bool:
        return cls not in self.undefined_classes


def _class_indicator(g: Graph, labels, n_classes: int | None) -> sp.csr_matrix:
    labels = np.asarray(labels).ravel()
    if len(labels) != g.n:
        raise ShapeError(f"{len(labels)} labels for {g.n} nodes")
    if len(labels) and labels.min() < 0:
        raise LabelingError(f"node {int(np.argmin(labels))} has no class label")
    labels = labels.astype(np.int64)
    m = int(labels.max()) + 1 if n_classes is None else int(n_classes)
    if len(labels) and labels.max() >= m:
        raise LabelingError(f"label {int(labels.max())} outside [0, {m})")
    return sp.csr_matrix((np.ones(g.n, dtype=np.int64), (np.arange(g.n), labels)),
                         shape=(g.n, m))


def walk_counts(g: Graph, labels, n: int, n_classes: int | None = None) -> np.ndarray:
    """``count[i, j]``: length-``n`` walks from class ``i`` to class ``j``."""
    if n < 1:
        raise ContractError("walk length must be >= 1")
    y = _class_indicator(g, labels, n_classes)
    # B[dst, src] = 1, so B^T carries mass forward along src -> dst
    bt = sp.csr_matrix((np.ones(g.num_edges, dtype=np.int64), (g.src, g.dst)),
                       shape=(g.n, g.n))
    z = y
    for _ in range(n):
        z = bt @ z
    return np.asarray((y.T @ z).todense(), dtype=np.int64)


def interclass_probability(g: Graph, labels, n: int, n_classes: int | None = None) -> np.ndarray:
    counts = walk_counts(g, labels, n, n_classes).astype(np.float64)
    total = counts.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(total > 0, counts / np.where(total > 0, total, 1.0), np.nan)


def edge_entropy(g: Graph, labels, n: int, n_classes: int | None = None) -> EntropyReport:
    p = interclass_probability(g, labels, n, n_classes)
    m = p.shape[0]
    if m < 2:
        raise LabelingError("edge entropy needs at least two classes")
    undefined = frozenset(int(i) for i in np.nonzero(np.isnan(p[:, 0]))[0])
    safe = np.where(p > 0, p, 1.0)
    terms = np.where(p > 0, p * np.log(safe), 0.0)
    h = -terms.sum(axis=1) / np.log(m)
    h = np.clip(h, 0.0, 1.0)
    h[list(undefined)] = np.nan
    return EntropyReport(order=n, n_classes=m, P=p, H=h, undefined_classes=undefined)
