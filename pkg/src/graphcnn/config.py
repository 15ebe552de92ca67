"""Flat ``key = value`` experiment configuration.

Blank lines and ``#`` comments are ignored.  Every key is typed; unknown
keys are an error that lists the valid ones.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(t) for t in s.replace("+", ",").split(",") if t.strip())


def _words(s: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in s.replace("+", ",").split(",") if t.strip())


@dataclass
class ExperimentConfig:
    task: str = "node"
    dataset: str = "synth:sbm"
    data_dir: str = "."
    output_dir: str = "out"
    normalize_features: bool = True
    structure: str = "true"  # true | identity | er
    data_seed: int = -1  # -1: synthetic data follows the run seed
    # synthetic node task
    sbm_sizes: tuple[int, ...] = (100, 100, 100, 100)
    sbm_p_in: float = 0.10
    sbm_p_out: float = 0.005
    feature_flip: float = 0.3
    train_per_class: int = 20
    val_per_class: int = 30
    # synthetic graph task
    graphs_per_class: int = 50
    graph_nodes: int = 20
    er_degree: float = 4.0
    max_components: int = 3
    # model
    conv: str = "gcn"
    layers: int = 2
    hidden: int = 16
    K: int = 2
    normalization: str = "auto"
    dropout: float = 0.5
    pooling: str = "none"
    pool_ratio: float = 0.5
    sortpool_k: int = 10
    diffpool_clusters: int = 4
    readout: tuple[str, ...] = ("mean",)
    fgsd: bool = False
    fgsd_bins: int = 32
    fgsd_range: float = 4.0
    head: tuple[int, ...] = (16,)
    # optimisation
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 5e-4
    epochs: int = 200
    patience: int = 10
    seeds: tuple[int, ...] = (0,)
    folds: int = 10
    fold_seed: int = 0
    batch_size: int = 32
    val_fraction: float = 0.1
    # reports
    order: int = 1

    def validate(self) -> "ExperimentConfig":
        if self.task not in ("node", "graph"):
            raise ConfigError(f"task must be node or graph, got {self.task!r}")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        if self.lr <= 0:
            raise ConfigError("lr must be > 0")
        if self.structure not in ("true", "identity", "er"):
            raise ConfigError("structure must be true, identity or er")
        if self.folds < 2 and self.task == "graph":
            raise ConfigError("folds must be >= 2")
        return self

    def replace(self, **changes) -> "ExperimentConfig":
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        for k in changes:
            if k not in data:
                raise ConfigError(_unknown(k))
        data.update(changes)
        return ExperimentConfig(**data)


# field annotations are strings under postponed evaluation
_PARSERS = {
    "bool": _bool,
    "int": int,
    "float": float,
    "str": str.strip,
    "tuple[int, ...]": _ints,
    "tuple[str, ...]": _words,
}


def valid_keys() -> list[str]:
    return [f.name for f in fields(ExperimentConfig)]


def _unknown(key: str) -> str:
    return f"unknown config key {key!r}; valid keys: {', '.join(valid_keys())}"


def parse_value(key: str, raw: str):
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    if key not in types:
        raise ConfigError(_unknown(key))
    try:
        return _PARSERS[types[key]](raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from None


def parse_config_text(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    changes = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if "=" not in s:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {s!r}")
        key, raw = (p.strip() for p in s.split("=", 1))
        changes[key] = parse_value(key, raw)
    return (base or ExperimentConfig()).replace(**changes)


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_config_text(p.read_text(encoding="utf-8"))


def dump_config(cfg: ExperimentConfig) -> str:
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        elif isinstance(v, bool):
            v = "true" if v else "false"
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
