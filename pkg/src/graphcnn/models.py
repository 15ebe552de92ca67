"""Declarative model specs and the node/graph classification models built from them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .aggregation import DenseHead, canonical_stats, fgsd_features, readout
from .autodiff import Tensor
from .errors import SpecError
from .graph import Graph, make_rng
from .layers import GcnLayer, TagcnLayer
from .pooling import POOLING_METHODS, diff_pool, sag_pool, sort_pool, topk_pool


@dataclass(frozen=True)
class LayerSpec:
    variant: str = "gcn"  # gcn | tagcn
    K: int = 1
    width: int | None = None  # None on the last node-task layer means n_classes
    activation: str | None = "relu"


@dataclass(frozen=True)
class ModelSpec:
    task: str = "node"
    layers: tuple[LayerSpec, ...] = (LayerSpec(width=16), LayerSpec(activation=None))
    dropout: float = 0.5
    pooling: str = "none"
    pool_ratio: float = 0.5
    sortpool_k: int = 10
    diffpool_clusters: int = 4
    readout: tuple[str, ...] = ()
    fgsd: bool = False
    fgsd_bins: int = 32
    fgsd_range: float = 4.0
    head: tuple[int, ...] = ()
    normalization: str = "auto"

    @classmethod
    def stack(cls, task: str, conv: str = "gcn", depth: int = 2, hidden: int = 16,
              K: int = 1, **kw) -> "ModelSpec":
        """``depth`` identical conv layers; node tasks end in a logits layer."""
        if depth < 1:
            raise SpecError("need at least one conv layer")
        k = 1 if conv == "gcn" else K
        layers = [LayerSpec(conv, k, hidden, "relu") for _ in range(depth)]
        if task == "node":
            layers[-1] = LayerSpec(conv, k, None, None)
        if task == "graph":
            kw.setdefault("readout", ("mean",))
        return cls(task=task, layers=tuple(layers), **kw)

    def validate(self, n_classes: int | None = None) -> "ModelSpec":
        if self.task not in ("node", "graph"):
            raise SpecError(f"task must be 'node' or 'graph', got {self.task!r}")
        if not self.layers:
            raise SpecError("model needs at least one conv layer")
        if not 0.0 <= self.dropout < 1.0:
            raise SpecError("dropout must lie in [0, 1)")
        for i, layer in enumerate(self.layers):
            if layer.variant not in ("gcn", "tagcn"):
                raise SpecError(f"layer {i}: unknown variant {layer.variant!r}")
            if layer.variant == "tagcn" and layer.K < 1:
                raise SpecError(f"layer {i}: TAGCN degree must be >= 1")
            last_node = self.task == "node" and i == len(self.layers) - 1
            if layer.width is None and not last_node:
                raise SpecError(f"layer {i}: width required")
            if layer.width is not None and layer.width < 1:
                raise SpecError(f"layer {i}: width must be >= 1")
            if last_node and n_classes is not None and layer.width not in (None, n_classes):
                raise SpecError(f"last layer width {layer.width} != class count {n_classes}")
        if self.pooling not in POOLING_METHODS:
            raise SpecError(f"unknown pooling {self.pooling!r}; choose from {POOLING_METHODS}")
        if self.task == "node":
            if self.pooling != "none" or self.readout or self.fgsd or self.head:
                raise SpecError("node models take no pooling, readout or dense head")
        else:
            if self.pooling != "sortpool":
                canonical_stats(self.readout)
            if not 0.0 < self.pool_ratio <= 1.0:
                raise SpecError("pool_ratio must lie in (0, 1]")
        return self


def receptive_field(spec: ModelSpec) -> int:
    """Hop radius of one output node: the sum of the layer degrees."""
    return sum(layer.K if layer.variant == "tagcn" else 1 for layer in spec.layers)


def _conv(layer: LayerSpec, in_dim: int, out_dim: int, rng, name: str, normalization: str):
    if layer.variant == "gcn":
        return GcnLayer(in_dim, out_dim, rng, activation=layer.activation, name=name)
    return TagcnLayer(in_dim, out_dim, layer.K, rng, activation=layer.activation,
                      normalization=normalization, name=name)


class _Model:
    spec: ModelSpec

    def parameters(self) -> dict[str, Tensor]:
        out = {}
        for part in self._parts():
            out.update(part.parameters())
        return out

    def _parts(self):
        return list(self.convs)


class NodeModel(_Model):
    def __init__(self, spec: ModelSpec, input_dim: int, n_classes: int, rng):
        self.spec = spec
        self.convs = []
        dim = input_dim
        for i, layer in enumerate(spec.layers):
            out = n_classes if (layer.width is None or i == len(spec.layers) - 1) else layer.width
            self.convs.append(_conv(layer, dim, out, rng, f"conv{i}", spec.normalization))
            dim = out

    def forward(self, g: Graph, x: Tensor, train: bool = False, rng=None) -> Tensor:
        h = x
        for conv in self.convs:
            h = ad.dropout(h, self.spec.dropout, train, rng)
            h = conv(g, h)
        return h

    __call__ = forward


class _Param:
    def __init__(self, t: Tensor):
        self.t = t

    def parameters(self):
        return {self.t.name: self.t}


class GraphModel(_Model):
    """Conv stack, optional pooling after the first conv layer, readout, dense head.

    SortPool replaces the readout: its ``k x C`` output is flattened into
    the head.  Signal-free spectral distance features are appended to the
    readout when enabled.
    """

    def __init__(self, spec: ModelSpec, input_dim: int, n_classes: int, rng):
        self.spec = spec
        self.convs = []
        dim = input_dim
        for i, layer in enumerate(spec.layers):
            self.convs.append(_conv(layer, dim, layer.width, rng, f"conv{i}", spec.normalization))
            dim = layer.width
            if i == 0:
                pool_dim = dim
        self.pool_parts = []
        if spec.pooling == "topk":
            self.projection = Tensor(ad.glorot_uniform(pool_dim, 1, rng), requires_grad=True,
                                     name="pool.p")
            self.pool_parts = [_Param(self.projection)]
        elif spec.pooling == "sagpool":
            self.scorer = GcnLayer(pool_dim, 1, rng, activation="tanh", name="pool.score")
            self.pool_parts = [self.scorer]
        elif spec.pooling == "diffpool":
            self.assign = GcnLayer(pool_dim, spec.diffpool_clusters, rng, activation=None,
                                   name="pool.assign")
            self.embed = GcnLayer(pool_dim, pool_dim, rng, activation="relu", name="pool.embed")
            self.pool_parts = [self.assign, self.embed]
        if spec.pooling == "sortpool":
            feat = spec.sortpool_k * dim
        else:
            feat = dim * len(canonical_stats(spec.readout))
        if spec.fgsd:
            feat += spec.fgsd_bins
        self.head = DenseHead(feat, spec.head, n_classes, rng)

    def _parts(self):
        return [*self.convs, *self.pool_parts, self.head]

    def _assign(self, g: Graph, x: Tensor) -> Tensor:
        logits = self.assign(g, x)
        m = min(self.spec.diffpool_clusters, g.n)
        if m < logits.shape[1]:
            # fewer nodes than clusters: keep the first g.n assignment columns
            logits = ad.matmul(logits, Tensor(np.eye(logits.shape[1])[:, :m]))
        return logits

    def _pool(self, g: Graph, h: Tensor):
        spec = self.spec
        if spec.pooling == "topk":
            return topk_pool(g, h, spec.pool_ratio, self.projection)
        if spec.pooling == "sagpool":
            return sag_pool(g, h, spec.pool_ratio, self.scorer)
        if spec.pooling == "diffpool":
            return diff_pool(g, h, self._assign, self.embed, min(spec.diffpool_clusters, g.n))
        return None

    def forward(self, g: Graph, x: Tensor, train: bool = False, rng=None):
        """Return ``(logits 1 x M, aux_losses)``."""
        spec = self.spec
        h, cur, aux = x, g, {}
        for i, conv in enumerate(self.convs):
            h = ad.dropout(h, spec.dropout, train, rng)
            h = conv(cur, h)
            if i == 0:
                res = self._pool(cur, h)
                if res is not None:
                    h, cur = res.x_reduced, res.g_reduced
                    aux.update(res.aux_losses)
        if spec.pooling == "sortpool":
            top = sort_pool(cur, h, spec.sortpool_k)
            v = ad.reshape(top, (1, top.shape[0] * top.shape[1]))
        else:
            v = readout(h, spec.readout)
        if spec.fgsd:
            key = ("fgsd", spec.fgsd_bins, spec.fgsd_range)
            feats = g._cache.get(key)
            if feats is None:
                feats = g._cache[key] = fgsd_features(g, spec.fgsd_bins, spec.fgsd_range)
            v = ad.concat_cols([v, feats])
        return self.head(v), aux

    __call__ = forward


def build_model(spec: ModelSpec, input_dim: int, n_classes: int, seed: int):
    """Instantiate parameters (Glorot uniform from ``seed``) for a validated spec."""
    spec.validate(n_classes)
    rng = make_rng(seed)
    if spec.task == "node":
        return NodeModel(spec, input_dim, n_classes, rng)
    return GraphModel(spec, input_dim, n_classes, rng)

