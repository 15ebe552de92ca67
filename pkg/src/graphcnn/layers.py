"""GCN, TAGCN and dense layers on top of the autodiff engine."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import DegreeError, ShapeError, SpecError
from .graph import Graph, add_self_loops, normalize_spectral, normalize_sym

ACTIVATIONS = {
    None: lambda t: t,
    "none": lambda t: t,
    "identity": lambda t: t,
    "relu": ad.relu,
    "tanh": ad.tanh,
}


def activate(x: Tensor, name) -> Tensor:
    try:
        return ACTIVATIONS[name](x)
    except KeyError:
        raise SpecError(f"unknown activation {name!r}") from None


def gcn_operator(g: Graph, normalize: bool = True):
    """Sparse propagation matrix for a GCN layer, cached on the graph.

    ``normalize=True`` gives ``D~^{-1/2} (A + I) D~^{-1/2}``, otherwise the
    raw ``A + I``.
    """
    key = ("gcn", normalize)
    op = g._cache.get(key)
    if op is None:
        looped = add_self_loops(g)
        if normalize:
            looped = normalize_sym(looped) if not looped.directed else normalize_spectral(looped)
        op = looped.sparse()
        g._cache[key] = op
    return op


def tagcn_operator(g: Graph, normalization: str = "auto"):
    """Shift matrix used inside a TAGCN layer.

    ``auto`` picks symmetric normalization for undirected graphs and
    spectral-radius normalization for directed ones.  Graphs without edges
    are returned as-is since neither normalization applies.
    """
    key = ("tagcn", normalization)
    op = g._cache.get(key)
    if op is None:
        if normalization == "none" or g.num_edges == 0:
            h = g
        elif normalization == "sym" or (normalization == "auto" and not g.directed):
            h = normalize_sym(g)
        elif normalization in ("spectral", "auto"):
            h = normalize_spectral(g)
        else:
            raise SpecError(f"unknown normalization {normalization!r}")
        op = h.sparse()
        g._cache[key] = op
    return op


class GcnLayer:
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator,
                 activation="relu", normalize: bool = True, name: str = "gcn"):
        if out_dim < 1:
            raise SpecError("output width must be >= 1")
        self.W = Tensor(ad.glorot_uniform(in_dim, out_dim, rng), requires_grad=True,
                        name=f"{name}.W")
        self.activation = activation
        self.normalize = normalize
        self.name = name

    @property
    def out_dim(self) -> int:
        return self.W.shape[1]

    def parameters(self) -> dict[str, Tensor]:
        return {self.W.name: self.W}

    def __call__(self, g: Graph, x: Tensor) -> Tensor:
        return gcn_forward(self, g, x)


class TagcnLayer:
    """``sigma(sum_k A^k x W_k)`` with one weight matrix per power."""

    def __init__(self, in_dim: int, out_dim: int, K: int, rng: np.random.Generator,
                 activation="relu", normalization: str = "auto", name: str = "tagcn"):
        if K < 0:
            raise SpecError("TAGCN degree must be >= 0")
        if out_dim < 1:
            raise SpecError("output width must be >= 1")
        self.K = K
        self.weights = [
            Tensor(ad.glorot_uniform(in_dim, out_dim, rng), requires_grad=True,
                   name=f"{name}.W{k}")
            for k in range(K + 1)
        ]
        self.activation = activation
        self.normalization = normalization
        self.name = name

    @property
    def out_dim(self) -> int:
        return self.weights[0].shape[1]

    def parameters(self) -> dict[str, Tensor]:
        return {w.name: w for w in self.weights}

    def __call__(self, g: Graph, x: Tensor) -> Tensor:
        return tagcn_forward(self, g, x)


class DenseLayer:
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator,
                 activation="relu", name: str = "dense"):
        self.W = Tensor(ad.glorot_uniform(in_dim, out_dim, rng), requires_grad=True,
                        name=f"{name}.W")
        self.b = Tensor(np.zeros((1, out_dim)), requires_grad=True, name=f"{name}.b")
        self.activation = activation

    def parameters(self) -> dict[str, Tensor]:
        return {self.W.name: self.W, self.b.name: self.b}

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[0] != 1:
            raise ShapeError("dense layers take a single 1 x C row")
        return activate(ad.add(ad.matmul(x, self.W), self.b), self.activation)


def _check_input(layer_in: int, g: Graph, x: Tensor):
    if x.shape[0] != g.n:
        raise ShapeError(f"signal has {x.shape[0]} rows, graph has {g.n} nodes")
    if x.shape[1] != layer_in:
        raise ShapeError(f"signal has {x.shape[1]} channels, layer expects {layer_in}")


def gcn_forward(layer: GcnLayer, g: Graph, x: Tensor) -> Tensor:
    _check_input(layer.W.shape[0], g, x)
    h = ad.sparse_matmul(gcn_operator(g, layer.normalize), x)
    return activate(ad.matmul(h, layer.W), layer.activation)


def tagcn_forward(layer: TagcnLayer, g: Graph, x: Tensor) -> Tensor:
    _check_input(layer.weights[0].shape[0], g, x)
    if layer.K >= max(g.n, 1) and layer.K > 0:
        raise DegreeError(f"TAGCN degree {layer.K} must be below vertex count {g.n}")
    out = ad.matmul(x, layer.weights[0])
    if layer.K:
        a = tagcn_operator(g, layer.normalization)
        h = x
        for w in layer.weights[1:]:
            h = ad.sparse_matmul(a, h)
            out = ad.add(out, ad.matmul(h, w))
    return activate(out, layer.activation)
