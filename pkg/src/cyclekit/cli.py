"""Command line: prepare, train, eval, stats shortness, sweep-k."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import asdict, fields

import numpy as np

from . import __version__
from .basis import BasisError, basis_stats_rows
from .kg import DatasetError, KnowledgeGraph, dataset_hash, load_dataset
from .metrics import PhaseTimer, mean_min_length, min_cycle_length, shortness_histogram, write_histogram
from .nn import CheckpointError, CycleModel, NonFiniteError, load_checkpoint, save_checkpoint
from .pipeline import RunConfig, evaluate, prepare_split, train
from .z2 import betti_number

ABLATIONS = {
    "single-basis": {"k": 1},
    "random-roots": {"root_mode": "random"},
    "mlp": {"use_gcn": False},
    "lstm": {"feature": "lstm"},
    "bow": {"feature": "bow"},
}


class UsageError(ValueError):
    pass


def emit(record: dict, stream=None) -> None:
    print(json.dumps(record, sort_keys=True, default=float), file=stream or sys.stderr, flush=True)


# ------------------------------------------------------------------ config

def _convert(name: str, text: str, kind: type):
    if kind is bool:
        low = text.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"{name}: expected a boolean, got {text!r}")
    try:
        return kind(text.strip())
    except ValueError as exc:
        raise UsageError(f"{name}: cannot parse {text!r} as {kind.__name__}") from exc


def read_config_file(path: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    types = RunConfig.field_types()
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in types:
                raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = _convert(key, value.strip().strip('"'), types[key])
    return out


def resolve_config(args, base: dict | None = None) -> RunConfig:
    """Flags override the config file, which overrides ``base`` and the defaults."""
    values = asdict(RunConfig())
    values.update(base or {})
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    for name in getattr(args, "ablation", None) or ():
        values.update(ABLATIONS[name])
    try:
        return RunConfig(**values).validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", dest="data_dir", help="dataset directory with train.txt / test.txt")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--out", dest="out_dir", help="output directory (default: runs)")
    p.add_argument("--k", type=int, help="number of shortest-path trees (default 20)")
    p.add_argument("--m", type=int, help="overlap neighbours per cycle (default 2)")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--weight-decay", dest="weight_decay", type=float)
    p.add_argument("--dropout", type=float)
    p.add_argument("--d-h", dest="d_h", type=int)
    p.add_argument("--neg-ratio", dest="neg_ratio", type=int)
    p.add_argument("--root-mode", dest="root_mode", choices=["cluster", "random"])
    p.add_argument("--ablation", action="append", choices=sorted(ABLATIONS))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cyclekit", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="build and cache the cycle bases of a split")
    _add_run_flags(p)
    p.add_argument("--split", default="train")
    p.add_argument("--cycle-graph-csv", action="store_true",
                   help="also dump the cycle graph of the first basis")

    p = sub.add_parser("train", help="train on the training split")
    _add_run_flags(p)

    p = sub.add_parser("eval", help="score a split with a trained checkpoint")
    _add_run_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--metric", choices=["auc-pr", "hits@10", "all"], default="all")
    p.add_argument("--repeats", type=int)
    p.add_argument("--num-neg", dest="num_neg", type=int)

    p = sub.add_parser("stats", help="basis statistics")
    stats = p.add_subparsers(dest="stat", required=True)
    s = stats.add_parser("shortness", help="minimum covering-cycle length histograms")
    _add_run_flags(s)
    s.add_argument("--split", default="test")
    s.add_argument("--modes", default="single,random-10,cluster-10")

    p = sub.add_parser("sweep-k", help="AUC-PR for several tree counts")
    _add_run_flags(p)
    p.add_argument("--values", default="1,2,5,10,20")
    p.add_argument("--repeats", type=int)
    return parser


# ---------------------------------------------------------------- commands

def _load(cfg: RunConfig) -> tuple[dict, str]:
    if not cfg.data_dir:
        raise UsageError("--data is required")
    if not os.path.isdir(cfg.data_dir):
        raise DatasetError(f"{cfg.data_dir}: dataset directory not found")
    return load_dataset(cfg.data_dir), os.path.basename(os.path.normpath(cfg.data_dir))


def _split(graphs: dict, name: str) -> KnowledgeGraph:
    if name not in graphs:
        raise UsageError(f"unknown split {name!r}")
    return graphs[name]


def _cache_path(cfg: RunConfig, split: str) -> str:
    return os.path.join(cfg.out_dir, f"bases_{split}_k{cfg.k}_s{cfg.seed}_{cfg.root_mode}.npz")


def _basis_key(cfg: RunConfig, split: str) -> dict:
    return cfg.basis_key(dataset_hash(cfg.data_dir), split)


def cmd_prepare(args) -> list[str]:
    cfg = resolve_config(args)
    graphs, name = _load(cfg)
    kg = _split(graphs, args.split)
    os.makedirs(cfg.out_dir, exist_ok=True)
    t0 = time.perf_counter()
    cache = _cache_path(cfg, args.split)
    prep = prepare_split(kg, cfg, cache=cache, key=_basis_key(cfg, args.split))
    elapsed = time.perf_counter() - t0
    g = prep.working.graph
    n_comp, labels = g.components
    e_per = np.bincount(labels[g.heads], minlength=n_comp)
    v_per = np.bincount(labels, minlength=n_comp)
    betti = (e_per - v_per + 1).tolist()
    lengths = np.concatenate([b.basis.cycle_length for b in prep.bundles])
    q = np.quantile(lengths, [0.0, 0.25, 0.5, 0.75, 1.0]).tolist() if lengths.size else []
    stats_path = os.path.join(cfg.out_dir, "basis_stats.csv")
    with open(stats_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cycle_id", "root", "length"])
        for cid, (_, _, root, length) in enumerate(basis_stats_rows(g, prep.bundles)):
            w.writerow([cid, root, length])
    written = [cache, stats_path]
    if args.cycle_graph_csv and prep.bundles:
        from .cycle_graph import cycle_graph
        cg = cycle_graph(prep.bundles[0].incidence, cfg.m)
        path = os.path.join(cfg.out_dir, "cycle_graph.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["src", "dst", "overlap"])
            w.writerows(cg.edge_rows())
        written.append(path)
    emit({"event": "prepare", "dataset": name, "split": args.split, "k": cfg.k,
          "betti_per_component": betti, "betti": betti_number(g),
          "cycle_length_quantiles": q, "elapsed_s": elapsed})
    return written


def _train_run(cfg: RunConfig, graphs: dict, name: str, log_path: str | None, timer: PhaseTimer):
    kg = graphs["train"]
    cache = _cache_path(cfg, "train")
    with timer.phase("preparation"):
        prep = prepare_split(kg, cfg, cache=cache, key=_basis_key(cfg, "train"))
    log_fh = open(log_path, "w") if log_path else None

    def log(rec):
        emit(rec)
        if log_fh:
            log_fh.write(json.dumps(rec, sort_keys=True) + "\n")

    try:
        res = train(kg, cfg, log, timer, prepared=prep)
    finally:
        if log_fh:
            log_fh.close()
    return res


def cmd_train(args) -> list[str]:
    cfg = resolve_config(args)
    graphs, name = _load(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    timer = PhaseTimer()
    log_path = os.path.join(cfg.out_dir, "train_log.jsonl")
    res = _train_run(cfg, graphs, name, log_path, timer)
    ckpt = os.path.join(cfg.out_dir, "checkpoint.npz")
    save_checkpoint(ckpt, res.model.config, res.model.params, cfg.seed, extra={
        "dataset": name, "relation_vocab": graphs["train"].relation_vocab,
        "run_config": asdict(cfg), "best_epoch": res.best_epoch, "best_train_auc_pr": res.best_auc})
    emit({"event": "trained", "epochs_run": len(res.history), "best_epoch": res.best_epoch,
          "best_train_auc_pr": res.best_auc, "phase_times": timer.times})
    return [log_path, ckpt]


def _metrics_for(args) -> tuple:
    return ("auc-pr", "hits@10") if args.metric == "all" else (args.metric,)


def cmd_eval(args) -> list[str]:
    config, params, seed, extra = load_checkpoint(args.checkpoint)
    base = dict(extra.get("run_config", {}))
    base.update(k=config.k, m=config.m, d_h=config.d_h, dropout=config.dropout,
                feature=config.feature, use_gcn=config.use_gcn, seed=seed)
    for f in ("k", "m", "d_h", "dropout"):
        if getattr(args, f, None) is not None and getattr(args, f) != base[f]:
            raise UsageError(f"--{f.replace('_', '-')} conflicts with the checkpoint ({base[f]})")
    cfg = resolve_config(args, base)
    graphs, name = _load(cfg)
    kg = _split(graphs, args.split)
    vocab = extra.get("relation_vocab")
    if vocab is not None and vocab != graphs["train"].relation_vocab:
        raise CheckpointError("checkpoint relation vocabulary does not match the dataset")
    model = CycleModel(config, params, seed=seed)
    timer = PhaseTimer()
    report = evaluate(model, kg, cfg, name, args.split, _metrics_for(args), timer)
    os.makedirs(cfg.out_dir, exist_ok=True)
    path = os.path.join(cfg.out_dir, f"metrics_{args.split}.json")
    with open(path, "w") as fh:
        fh.write(report.to_json() + "\n")
    emit({"event": "eval", **report.to_dict()})
    return [path]


def parse_mode(mode: str) -> tuple[int, str]:
    """``single`` | ``random-<k>`` | ``cluster-<k>`` -> (k, root mode)."""
    if mode == "single":
        return 1, "cluster"
    kind, _, num = mode.partition("-")
    if kind not in ("random", "cluster") or not num.isdigit() or int(num) < 1:
        raise UsageError(f"bad shortness mode {mode!r}")
    return int(num), kind


def cmd_stats_shortness(args) -> list[str]:
    cfg = resolve_config(args)
    graphs, name = _load(cfg)
    kg = _split(graphs, args.split)
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    if not modes:
        raise UsageError("--modes is empty")
    parsed = [parse_mode(m) for m in modes]
    os.makedirs(cfg.out_dir, exist_ok=True)
    written = []
    for mode, (k, root_mode) in zip(modes, parsed):
        mcfg = RunConfig(**{**asdict(cfg), "k": k, "root_mode": root_mode})
        prep = prepare_split(kg, mcfg, ratio=1)
        hist = shortness_histogram(prep.bundles, prep.working.target_edges)
        path = os.path.join(cfg.out_dir, f"shortness_{mode}.csv")
        write_histogram(path, hist)
        written.append(path)
        emit({"event": "shortness", "dataset": name, "mode": mode,
              "mean_min_length": mean_min_length(min_cycle_length(prep.bundles, prep.working.target_edges))})
    return written


def cmd_sweep_k(args) -> list[str]:
    cfg = resolve_config(args)
    try:
        values = [int(v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"--values: {exc}") from exc
    if not values or min(values) < 1:
        raise UsageError("--values needs positive integers")
    graphs, name = _load(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    rows = []
    for k in values:
        kcfg = RunConfig(**{**asdict(cfg), "k": k})
        timer = PhaseTimer()
        res = _train_run(kcfg, graphs, name, None, timer)
        report = evaluate(res.model, graphs["test"], kcfg, name, "test", ("auc-pr",), timer)
        rows.append((k, report.auc_pr))
        emit({"event": "sweep", "k": k, "auc_pr": report.auc_pr})
    path = os.path.join(cfg.out_dir, "sweep_k.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "auc_pr"])
        for k, a in rows:
            w.writerow([k, repr(a)])
    return [path]


COMMANDS = {"prepare": cmd_prepare, "train": cmd_train, "eval": cmd_eval, "sweep-k": cmd_sweep_k}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = cmd_stats_shortness if args.command == "stats" else COMMANDS[args.command]
    try:
        written = handler(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        emit({"event": "error", "kind": "usage", "message": str(exc)})
        return 2
    except (DatasetError, CheckpointError, BasisError, NonFiniteError, OSError) as exc:
        emit({"event": "error", "kind": type(exc).__name__, "message": str(exc)})
        return 1
    missing = [p for p in written if not os.path.exists(p)]
    if missing:
        emit({"event": "error", "kind": "output", "message": f"not written: {missing}"})
        return 1
    emit({"event": "done", "command": args.command, "outputs": written})
    return 0


if __name__ == "__main__":
    sys.exit(main())
