"""Command-line entry point.

Exit codes: 0 ok, 1 usage or config error, 2 data error, 3 numeric error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, load_config, parse_value
from .datasets import NodeDataset, write_graph_dataset, write_node_dataset
from .entropy import edge_entropy
from .errors import ConfigError, GraphCnnError
from .graph import ring_graph
from .gsp import spectrum
from .harness import SWEEP_AXES, load_dataset, sweep, train_graph, train_node


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _fmt(v) -> str:
    return repr(float(v))


def _write_csv(path: Path, header: str, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [header] + [",".join(str(c) for c in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _metrics_rows(result):
    return [(r.epoch, _fmt(r.train_loss), _fmt(r.val_acc), _fmt(r.test_acc)) for r in result.history]


def _summary_rows(results, summary):
    rows = [(r.seed, _fmt(r.test_acc)) for r in results]
    return rows + [("mean", _fmt(summary[0])), ("std", _fmt(summary[1]))]


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    changes = {}
    for item in args.set or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = (p.strip() for p in item.split("=", 1))
        changes[key] = parse_value(key, raw)
    if args.seed is not None:
        changes["seeds"] = (args.seed,)
    if args.data_dir is not None:
        changes["data_dir"] = args.data_dir
    if args.out is not None:
        changes["output_dir"] = args.out
    return cfg.replace(**changes)


def cmd_train_node(cfg: ExperimentConfig, args) -> None:
    results, summary = train_node(cfg.replace(task="node"))
    out = Path(cfg.output_dir)
    for r in results:
        _write_csv(out / f"metrics_{r.seed}.csv", "epoch,train_loss,val_acc,test_acc",
                   _metrics_rows(r))
    _write_csv(out / "summary.csv", "seed,test_acc", _summary_rows(results, summary))
    print(f"test accuracy {summary[0]:.4f} +/- {summary[1]:.4f} over {len(results)} seeds")


def cmd_train_graph(cfg: ExperimentConfig, args) -> None:
    results, summary = train_graph(cfg.replace(task="graph"))
    out = Path(cfg.output_dir)
    for r in results:
        _write_csv(out / f"metrics_{r.seed}_fold{r.fold}.csv", "epoch,train_loss,val_acc,test_acc",
                   _metrics_rows(r))
    _write_csv(out / "folds.csv", "seed,fold,best_epoch,test_acc",
               [(r.seed, r.fold, r.best_epoch, _fmt(r.test_acc)) for r in results])
    per_seed = []
    for seed in cfg.seeds:
        accs = [r.test_acc for r in results if r.seed == seed]
        per_seed.append((seed, _fmt(np.mean(accs))))
    _write_csv(out / "summary.csv", "seed,test_acc",
               per_seed + [("mean", _fmt(summary[0])), ("std", _fmt(summary[1]))])
    print(f"test accuracy {summary[0]:.4f} +/- {summary[1]:.4f} over {len(results)} folds")


def cmd_sweep(cfg: ExperimentConfig, args) -> None:
    values = args.values.split(",") if args.values else None
    rows = sweep(cfg, args.axis, values)
    _write_csv(Path(cfg.output_dir) / "sweep.csv", "axis,value,mean_test_acc,std_test_acc,receptive_field",
               [(r.axis, r.value, _fmt(r.mean), _fmt(r.std), r.receptive_field) for r in rows])
    for r in rows:
        print(f"{r.axis}={r.value}: {r.mean:.4f} +/- {r.std:.4f}")


def _node_dataset(cfg: ExperimentConfig) -> NodeDataset:
    ds = load_dataset(cfg.replace(task="node"), cfg.seeds[0])
    return ds


def cmd_entropy(cfg: ExperimentConfig, args) -> None:
    order = args.order if args.order is not None else cfg.order
    ds = _node_dataset(cfg)
    rep = edge_entropy(ds.graph, ds.labels, order)
    out = Path(cfg.output_dir)
    rows = []
    for c in range(rep.n_classes):
        ok = rep.defined(c)
        rows.append((c, order, _fmt(rep.H[c]) if ok else "", "true" if ok else "false"))
    _write_csv(out / "edge_entropy.csv", "class,order,entropy,defined", rows)
    header = "class," + ",".join(f"p{j}" for j in range(rep.n_classes))
    prows = [(i, *("" if np.isnan(v) else _fmt(v) for v in rep.P[i])) for i in range(rep.n_classes)]
    _write_csv(out / "interclass_probability.csv", header, prows)
    for row in rows:
        print(f"class {row[0]}: H_{order} = {row[2] or 'undefined'}")


def cmd_spectrum_report(cfg: ExperimentConfig, args) -> None:
    g = ring_graph(args.ring) if args.ring is not None else _node_dataset(cfg).graph
    lam = np.asarray(spectrum(g).eigenvalues, dtype=np.complex128)
    # snap rounding noise so the order does not depend on the last ulp
    key_re = np.round(lam.real, 10)
    key_im = np.round(lam.imag, 10)
    order = np.lexsort((key_im, key_re))
    rows = [(i, _fmt(lam[k].real), _fmt(lam[k].imag)) for i, k in enumerate(order)]
    _write_csv(Path(cfg.output_dir) / "spectrum.csv", "index,re_lambda,im_lambda", rows)
    print(f"{len(rows)} eigenvalues written")


def cmd_synth(cfg: ExperimentConfig, args) -> None:
    ds = load_dataset(cfg, cfg.seeds[0])
    if not cfg.dataset.startswith("synth:"):
        raise ConfigError("synth needs a synthetic dataset (synth:sbm, synth:ring-vs-er, ...)")
    out = Path(cfg.output_dir)
    if isinstance(ds, NodeDataset):
        write_node_dataset(ds, out)
    else:
        write_graph_dataset(ds, out)
    print(f"wrote {cfg.dataset} to {out}")


COMMANDS = {
    "train-node": cmd_train_node,
    "train-graph": cmd_train_graph,
    "sweep": cmd_sweep,
    "entropy": cmd_entropy,
    "spectrum-report": cmd_spectrum_report,
    "synth": cmd_synth,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="graphcnn", description="Graph CNN workbench")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--seed", type=int, help="run only this seed")
        p.add_argument("--data-dir", help="root for dataset paths")
        p.add_argument("--out", help="output directory")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
        if name == "sweep":
            p.add_argument("--axis", required=True, choices=sorted(SWEEP_AXES))
            p.add_argument("--values", help="comma-separated axis values")
        if name == "entropy":
            p.add_argument("--order", type=int, help="walk length n >= 1")
        if name == "spectrum-report":
            p.add_argument("--ring", type=int, help="use the directed ring on N nodes")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        if args.command in ("train-node", "train-graph"):
            cfg.validate()
        COMMANDS[args.command](cfg, args)
    except GraphCnnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
