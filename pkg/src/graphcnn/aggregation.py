"""Readout layers that collapse a node set into one fixed-length row."""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError, DegenerateGraphError, ShapeError, UnsupportedStructureError
from .graph import Graph, laplacian
from .layers import DenseLayer

STAT_ORDER = ("mean", "sum", "max", "var")
_ALIASES = {"variance": "var"}

ZERO_CUTOFF = 1e-9


def canonical_stats(stats: Iterable[str]) -> tuple[str, ...]:
    chosen = set()
    for s in stats:
        s = _ALIASES.get(s, s)
        if s not in STAT_ORDER:
            raise ContractError(f"unknown readout statistic {s!r}; choose from {STAT_ORDER}")
        chosen.add(s)
    if not chosen:
        raise ContractError("readout needs at least one statistic")
    return tuple(s for s in STAT_ORDER if s in chosen)


def readout(x: Tensor, stats: Sequence[str]) -> Tensor:
    """Per-channel statistics concatenated in the order mean, sum, max, var."""
    if x.shape[0] == 0:
        raise DegenerateGraphError("readout of an empty graph")
    return ad.concat_cols([ad.reduce(x, s) for s in canonical_stats(stats)])


def harmonic_distances(g: Graph) -> np.ndarray:
    """``S(i, j) = sum_{lambda_k > cutoff} (phi_k(i) - phi_k(j))^2 / lambda_k``.

    Uses the Laplacian eigenpairs; zero modes (one per component) are
    dropped, so nodes in different components get a finite distance that
    only reflects their own components.
    """
    if g.directed and not g.is_symmetric():
        raise UnsupportedStructureError("harmonic distances need an undirected graph")
    lam, phi = np.linalg.eigh(laplacian(g) if not g.directed else
                              np.diag(g.dense().sum(axis=1)) - g.dense())
    keep = lam > ZERO_CUTOFF
    phi, lam = phi[:, keep], lam[keep]
    diff = phi[:, None, :] - phi[None, :, :]
    return (diff ** 2 / lam).sum(axis=2)


def fgsd_features(g: Graph, bins: int = 32, range_max: float = 4.0) -> Tensor:
    """Normalized histogram of pairwise harmonic distances (constant, 1 x bins)."""
    if g.n < 2:
        raise DegenerateGraphError("spectral distance features need at least 2 nodes")
    if bins < 1 or range_max <= 0:
        raise ContractError("need bins >= 1 and range_max > 0")
    d = harmonic_distances(g)
    i, j = np.triu_indices(g.n, 1)
    # snap eigensolver noise so values on a bin edge land in a label-independent bin
    vals = np.clip(np.round(d[i, j], 9), 0.0, range_max)
    hist, _ = np.histogram(vals, bins=bins, range=(0.0, range_max))
    return Tensor((hist / hist.sum())[None, :])


class DenseHead:
    """One or more dense layers, ReLU between them, raw logits out."""

    def __init__(self, in_dim: int, hidden: Sequence[int], n_classes: int,
                 rng: np.random.Generator, name: str = "head"):
        widths = [in_dim, *hidden, n_classes]
        self.layers = [
            DenseLayer(widths[i], widths[i + 1], rng,
                       activation="relu" if i < len(widths) - 2 else None,
                       name=f"{name}{i}")
            for i in range(len(widths) - 1)
        ]

    @property
    def in_dim(self) -> int:
        return self.layers[0].W.shape[0]

    def parameters(self) -> dict[str, Tensor]:
        out = {}
        for layer in self.layers:
            out.update(layer.parameters())
        return out

    def __call__(self, v: Tensor) -> Tensor:
        return graph_logits(v, self)


def graph_logits(readout_vec: Tensor, head: DenseHead) -> Tensor:
    if readout_vec.shape != (1, head.in_dim):
        raise ShapeError(f"head expects 1 x {head.in_dim}, got {readout_vec.shape}")
    h = readout_vec
    for layer in head.layers:
        h = layer(h)
    return h
