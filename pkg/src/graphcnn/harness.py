"""Training loops, cross-validation, sweeps and the structure-effectiveness probe."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Adam, Tensor
from .config import ExperimentConfig
from .datasets import (
    GraphDataset,
    NodeDataset,
    child_seeds,
    load_graph_dataset,
    load_node_dataset,
    make_synthetic_graph_task,
    make_synthetic_node_task,
)
from .entropy import edge_entropy
from .errors import ConfigError, DataError
from .graph import Graph, erdos_renyi, identity_graph, make_rng
from .models import LayerSpec, ModelSpec, build_model, receptive_field


class FoldError(ConfigError):
    pass


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_acc: float
    test_acc: float


@dataclass
class RunResult:
    seed: int
    history: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    test_acc: float = 0.0
    val_acc: float = 0.0
    train_acc: float = 0.0
    fold: int | None = None
    wall_clock: float = 0.0

    def select_best(self):
        """Best-validation epoch (earliest on ties) determines the reported accuracy."""
        best = max(self.history, key=lambda r: (r.val_acc, -r.epoch))
        self.best_epoch = best.epoch
        self.test_acc = best.test_acc
        self.val_acc = best.val_acc


def summarize(values) -> tuple[float, float]:
    """Mean and population standard deviation."""
    v = np.asarray(values, dtype=np.float64)
    return float(v.mean()), float(v.std())


# datasets and specs ---------------------------------------------------------------


def _data_seed(cfg: ExperimentConfig, seed: int) -> int:
    return seed if cfg.data_seed < 0 else cfg.data_seed


def load_dataset(cfg: ExperimentConfig, seed: int):
    name = cfg.dataset
    if name.startswith("synth:"):
        kind = name.split(":", 1)[1]
        if cfg.task == "node":
            params = dict(sizes=cfg.sbm_sizes, p_in=cfg.sbm_p_in, p_out=cfg.sbm_p_out,
                          flip=cfg.feature_flip, train_per_class=cfg.train_per_class,
                          val_per_class=cfg.val_per_class)
            return make_synthetic_node_task(kind, params, _data_seed(cfg, seed))
        params = dict(graphs_per_class=cfg.graphs_per_class, nodes=cfg.graph_nodes,
                      er_degree=cfg.er_degree, max_components=cfg.max_components)
        return make_synthetic_graph_task(kind, params, _data_seed(cfg, seed))
    path = Path(cfg.data_dir) / name
    if not path.is_dir():
        raise DataError(f"dataset directory not found: {path}")
    if cfg.task == "node":
        return load_node_dataset(path, cfg.normalize_features)
    return load_graph_dataset(path)


def model_spec(cfg: ExperimentConfig) -> ModelSpec:
    if cfg.conv not in ("gcn", "tagcn"):
        raise ConfigError(f"conv must be gcn or tagcn, got {cfg.conv!r}")
    if cfg.task == "node":
        return ModelSpec.stack("node", cfg.conv, cfg.layers, cfg.hidden, cfg.K,
                               dropout=cfg.dropout, normalization=cfg.normalization)
    return ModelSpec.stack(
        "graph", cfg.conv, cfg.layers, cfg.hidden, cfg.K,
        dropout=cfg.dropout, normalization=cfg.normalization, pooling=cfg.pooling,
        pool_ratio=cfg.pool_ratio, sortpool_k=cfg.sortpool_k,
        diffpool_clusters=cfg.diffpool_clusters, readout=cfg.readout, fgsd=cfg.fgsd,
        fgsd_bins=cfg.fgsd_bins, fgsd_range=cfg.fgsd_range, head=cfg.head,
    )


def structure_graph(g: Graph, structure: str, seed: int) -> Graph:
    """The adjacency a node model trains on: the real one, identity, or density-matched G(n, p)."""
    if structure == "true":
        return g
    if structure == "identity":
        return identity_graph(g.n)
    if structure == "er":
        off = g.src != g.dst
        pairs = off.sum() / (1 if g.directed else 2)
        total = g.n * (g.n - 1) / (1 if g.directed else 2)
        return erdos_renyi(g.n, float(pairs / total) if total else 0.0, seed)
    raise ConfigError(f"unknown structure {structure!r}")


def _accuracy(pred: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> float:
    if not mask.any():
        return 0.0
    return float((pred[mask] == labels[mask]).mean())


# node classification ----------------------------------------------------------------


def train_node_run(ds: NodeDataset, cfg: ExperimentConfig, seed: int,
                   graph: Graph | None = None) -> RunResult:
    """Full-batch training of one seed; reports test accuracy at the best-val epoch."""
    t0 = time.perf_counter()
    init_seed, drop_seed, struct_seed = child_seeds(seed, 3)
    g = graph if graph is not None else structure_graph(ds.graph, cfg.structure, struct_seed)
    train, val, test = ds.mask("train"), ds.mask("val"), ds.mask("test")
    if not train.any():
        raise ConfigError("training mask is empty")
    spec = model_spec(cfg)
    model = build_model(spec, ds.num_features, ds.n_classes, init_seed)
    opt = Adam(model.parameters().values(), lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2,
               eps=cfg.eps, weight_decay=cfg.weight_decay)
    rng = make_rng(drop_seed)
    x = Tensor(ds.features)
    labels = ds.labels
    result = RunResult(seed=seed)
    best_val_loss, stale = np.inf, 0
    for epoch in range(1, cfg.epochs + 1):
        opt.zero_grad()
        loss = ad.cross_entropy(model(g, x, train=True, rng=rng), labels, train)
        ad.backward(loss)
        opt.step()
        logits = model(g, x)
        pred = logits.data.argmax(axis=1)
        val_mask = val if val.any() else train
        result.history.append(EpochRecord(epoch, loss.item(), _accuracy(pred, labels, val_mask),
                                          _accuracy(pred, labels, test)))
        val_loss = ad.cross_entropy(logits, labels, val_mask).item()
        if val_loss < best_val_loss:
            best_val_loss, stale = val_loss, 0
        else:
            stale += 1
            if cfg.patience and stale >= cfg.patience:
                break
    result.select_best()
    pred = model(g, x).data.argmax(axis=1)
    result.train_acc = _accuracy(pred, labels, train)
    result.wall_clock = time.perf_counter() - t0
    return result


def train_node(cfg: ExperimentConfig, graph_override=None):
    """Run every seed; returns ``(results, (mean, std))`` over seed test accuracies."""
    cfg.validate()
    if cfg.task != "node":
        raise ConfigError("train_node needs task = node")
    results = []
    for seed in cfg.seeds:
        ds = load_dataset(cfg, seed)
        g = graph_override(ds, seed) if graph_override else None
        results.append(train_node_run(ds, cfg, seed, g))
    return results, summarize([r.test_acc for r in results])


# graph classification -----------------------------------------------------------------


def stratified_folds(labels, k: int, seed: int) -> list[np.ndarray]:
    """Deal each class's shuffled members round-robin into ``k`` folds."""
    labels = np.asarray(labels)
    rng = make_rng(seed)
    folds = [[] for _ in range(k)]
    offset = 0
    for c in np.unique(labels):
        members = np.nonzero(labels == c)[0]
        if len(members) < k:
            raise FoldError(f"class {c} has {len(members)} members, fewer than {k} folds")
        for i, idx in enumerate(rng.permutation(members)):
            folds[(i + offset) % k].append(idx)
        offset += len(members)
    return [np.sort(np.array(f, dtype=np.int64)) for f in folds]


def _stratified_holdout(idx: np.ndarray, labels: np.ndarray, frac: float, rng):
    hold = []
    for c in np.unique(labels[idx]):
        members = rng.permutation(idx[labels[idx] == c])
        take = int(round(frac * len(members)))
        if len(members) > 1:
            take = max(1, min(take, len(members) - 1))
        else:
            take = 0
        hold.extend(members[:take].tolist())
    hold = np.sort(np.array(hold, dtype=np.int64))
    return np.setdiff1d(idx, hold), hold


def _graph_eval(model, ds: GraphDataset, idx, xs):
    correct, loss = 0, 0.0
    for i in idx:
        logits, _ = model(ds.graphs[i], xs[i])
        correct += int(np.argmax(logits.data[0]) == ds.labels[i])
        loss += ad.cross_entropy(logits, [ds.labels[i]]).item()
    n = max(len(idx), 1)
    return correct / n, loss / n


def train_graph_run(ds: GraphDataset, cfg: ExperimentConfig, seed: int, fold: int,
                    train_idx, test_idx) -> RunResult:
    t0 = time.perf_counter()
    init_seed, drop_seed, split_seed = child_seeds(seed * 1000 + fold, 3)
    rng = make_rng(split_seed)
    train_idx, val_idx = _stratified_holdout(np.asarray(train_idx), ds.labels,
                                             cfg.val_fraction, rng)
    spec = model_spec(cfg)
    model = build_model(spec, ds.num_features, ds.n_classes, init_seed)
    opt = Adam(model.parameters().values(), lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2,
               eps=cfg.eps, weight_decay=cfg.weight_decay)
    drop_rng = make_rng(drop_seed)
    xs = [Tensor(x) for x in ds.features]
    result = RunResult(seed=seed, fold=fold)
    eval_idx = val_idx if len(val_idx) else train_idx
    best_val_loss, stale = np.inf, 0
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(train_idx)
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            opt.zero_grad()
            terms = []
            for i in batch:
                logits, aux = model(ds.graphs[i], xs[i], train=True, rng=drop_rng)
                term = ad.cross_entropy(logits, [ds.labels[i]])
                for a in aux.values():
                    term = ad.add(term, a)
                terms.append(term)
            batch_loss = terms[0]
            for t in terms[1:]:
                batch_loss = ad.add(batch_loss, t)
            batch_loss = ad.scale(batch_loss, 1.0 / len(batch))
            ad.backward(batch_loss)
            opt.step()
            total += batch_loss.item() * len(batch)
        val_acc, val_loss = _graph_eval(model, ds, eval_idx, xs)
        test_acc, _ = _graph_eval(model, ds, test_idx, xs)
        result.history.append(EpochRecord(epoch, total / len(order), val_acc, test_acc))
        if val_loss < best_val_loss:
            best_val_loss, stale = val_loss, 0
        else:
            stale += 1
            if cfg.patience and stale >= cfg.patience:
                break
    result.select_best()
    result.train_acc, _ = _graph_eval(model, ds, train_idx, xs)
    result.wall_clock = time.perf_counter() - t0
    return result


def train_graph(cfg: ExperimentConfig):
    """Stratified k-fold CV per seed.

    Returns ``(results, (mean, std))`` where the summary is over every
    (seed, fold) test accuracy.
    """
    cfg.validate()
    if cfg.task != "graph":
        raise ConfigError("train_graph needs task = graph")
    results = []
    for seed in cfg.seeds:
        ds = load_dataset(cfg, seed)
        folds = stratified_folds(ds.labels, cfg.folds, cfg.fold_seed)
        everything = np.arange(len(ds))
        for k, test_idx in enumerate(folds):
            train_idx = np.setdiff1d(everything, test_idx)
            results.append(train_graph_run(ds, cfg, seed, k, train_idx, test_idx))
    return results, summarize([r.test_acc for r in results])


def run(cfg: ExperimentConfig):
    return train_node(cfg) if cfg.task == "node" else train_graph(cfg)


# sweeps and probes -----------------------------------------------------------------

SWEEP_AXES = {
    "depth": (1, 2, 3, 4),
    "K": (1, 2, 3),
    "pooling": ("none", "topk", "sagpool", "sortpool", "diffpool"),
    "readout": ("mean", "sum", "max", "var", "mean+var", "mean+max", "mean+sum+max+var"),
    "structure": ("true", "identity", "er"),
}


@dataclass
class SweepRow:
    axis: str
    value: str
    mean: float
    std: float
    receptive_field: int


def _apply_axis(cfg: ExperimentConfig, axis: str, value) -> ExperimentConfig:
    if axis == "depth":
        return cfg.replace(layers=int(value))
    if axis == "K":
        return cfg.replace(conv="tagcn", K=int(value))
    if axis == "pooling":
        return cfg.replace(pooling=str(value))
    if axis == "readout":
        return cfg.replace(readout=tuple(str(value).replace(",", "+").split("+")))
    if axis == "structure":
        return cfg.replace(structure=str(value))
    raise ConfigError(f"unknown sweep axis {axis!r}; choose from {sorted(SWEEP_AXES)}")


def sweep(cfg: ExperimentConfig, axis: str, values=None) -> list[SweepRow]:
    """One summary row per axis value; every row uses the same seeds."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; choose from {sorted(SWEEP_AXES)}")
    values = SWEEP_AXES[axis] if values is None else values
    rows = []
    for v in values:
        c = _apply_axis(cfg, axis, v)
        _, (mean, std) = run(c)
        rows.append(SweepRow(axis, str(v), mean, std, receptive_field(model_spec(c))))
    return rows


def effectiveness_probe(cfg: ExperimentConfig, seeds=None) -> dict:
    """Train on the true graph, identity and density-matched G(n, p).

    Returns per-variant ``(mean, std)`` test accuracy and the mean first-
    and second-order edge entropy of the true graphs.
    """
    if seeds is not None:
        cfg = cfg.replace(seeds=tuple(seeds))
    out = {}
    for variant in ("true", "identity", "er"):
        _, out[variant] = train_node(cfg.replace(structure=variant))
    for order in (1, 2):
        hs = []
        for seed in cfg.seeds:
            ds = load_dataset(cfg, seed)
            known = ds.labels >= 0
            if known.all():
                hs.append(np.nanmean(edge_entropy(ds.graph, ds.labels, order).H))
        out[f"H{order}"] = float(np.mean(hs)) if hs else float("nan")
    return out


__all__ = [
    "EpochRecord", "RunResult", "FoldError", "LayerSpec", "effectiveness_probe", "load_dataset",
    "model_spec", "run", "stratified_folds", "summarize", "sweep", "train_graph",
    "train_graph_run", "train_node", "train_node_run",
]
