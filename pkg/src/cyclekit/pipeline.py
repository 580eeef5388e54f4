"""Train and evaluate the model on one dataset: targets, bases, epochs, metrics."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, fields
from typing import Callable, NamedTuple

import numpy as np

from .basis import BasisBundle, build_all_bases, load_bases, save_bases
from .kg import KnowledgeGraph, TargetSet, WorkingGraph, add_targets_to_graph, positives_of, sample_negatives
from .metrics import MetricsReport, PhaseTimer, auc_pr, hits_at_k
from .nn import Adam, CycleModel, ModelConfig, NonFiniteError

ROOT_MODES = ("cluster", "random")


@dataclass
class RunConfig:
    data_dir: str = ""
    k: int = 20
    m: int = 2
    epochs: int = 100
    patience: int = 20
    lr: float = 0.005
    weight_decay: float = 5e-5
    dropout: float = 0.2
    d_h: int = 10
    seed: int = 0
    neg_ratio: int = 1
    num_neg: int = 50
    repeats: int = 1
    root_mode: str = "cluster"
    feature: str = "br-lstm"
    use_gcn: bool = True
    out_dir: str = "runs"

    def validate(self) -> "RunConfig":
        for name in ("k", "m", "epochs", "patience", "d_h", "neg_ratio", "num_neg", "repeats"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer, got {getattr(self, name)}")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must lie in [0, 1)")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.root_mode not in ROOT_MODES:
            raise ValueError(f"root_mode must be one of {ROOT_MODES}")
        return self

    @classmethod
    def field_types(cls) -> dict:
        return {f.name: type(f.default) for f in fields(cls)}

    def model_config(self, num_relations: int) -> ModelConfig:
        return ModelConfig(num_relations=num_relations, k=self.k, m=self.m, d_h=self.d_h,
                           dropout=self.dropout, feature=self.feature, use_gcn=self.use_gcn)

    def basis_key(self, dataset: str, split: str, repeat: int = 0) -> dict:
        return {"dataset": dataset, "split": split, "k": self.k, "seed": self.seed,
                "root_mode": self.root_mode, "neg_ratio": self.neg_ratio, "repeat": repeat}


def target_seed(seed: int, repeat: int = 0, round_: int = 0) -> int:
    """Negative-sampling seed of one evaluation repeat (and Hits@k round)."""
    return int(np.random.SeedSequence([seed, repeat, round_]).generate_state(1)[0])


class PreparedSplit(NamedTuple):
    targets: TargetSet
    working: WorkingGraph
    bundles: list


def prepare_split(kg: KnowledgeGraph, cfg: RunConfig, repeat: int = 0, round_: int = 0,
                  ratio: int | None = None, cache: str | None = None, key: dict | None = None
                  ) -> PreparedSplit:
    """Sample negatives, add them to the graph and build the ``k`` bases.

    Bases are read from ``cache`` when it exists with a matching ``key`` and
    written there otherwise.
    """
    ratio = cfg.neg_ratio if ratio is None else ratio
    targets = sample_negatives(kg, positives_of(kg), ratio, target_seed(cfg.seed, repeat, round_))
    working = add_targets_to_graph(kg, targets)
    bundles = None
    if cache and os.path.exists(cache):
        try:
            bundles = load_bases(cache, working.graph.num_edges, key)
        except Exception:
            bundles = None
    if bundles is None:
        bundles = build_all_bases(working.graph, cfg.k, cfg.seed, cfg.root_mode)
        if cache:
            save_bases(cache, bundles, key or {})
    return PreparedSplit(targets, working, bundles)


class TrainResult(NamedTuple):
    model: CycleModel
    history: list
    best_epoch: int
    best_auc: float


def train(kg: KnowledgeGraph, cfg: RunConfig, log: Callable[[dict], None] | None = None,
          timer: PhaseTimer | None = None, prepared: PreparedSplit | None = None) -> TrainResult:
    """Full-batch training on every triplet of ``kg`` against sampled negatives.

    Each epoch takes one Adam step and then scores the training targets
    without dropout; the parameters of the best-scoring epoch are kept and
    training stops after ``patience`` epochs without improvement.
    """
    timer = timer or PhaseTimer()
    log = log or (lambda rec: None)
    if prepared is None:
        with timer.phase("preparation"):
            prepared = prepare_split(kg, cfg)
    model = CycleModel(cfg.model_config(kg.num_relations), seed=cfg.seed)
    history: list[dict] = []
    best = (-1, -np.inf, None)
    with timer.phase("training"):
        inst = model.prepare(prepared.bundles, prepared.working.target_edges)
        labels = prepared.targets.labels
        opt = Adam(cfg.lr, cfg.weight_decay)
        for epoch in range(cfg.epochs):
            try:
                loss, grads, _ = model.loss_and_grad(inst, labels, epoch)
            except NonFiniteError as exc:
                raise NonFiniteError(f"epoch {epoch}: {exc}") from exc
            if not np.isfinite(loss):
                raise NonFiniteError(f"epoch {epoch}: loss is {loss}")
            opt.step(model.params, grads)
            score = auc_pr(model.predict(inst), labels)
            rec = {"event": "epoch", "epoch": epoch, "loss": loss, "train_auc_pr": score}
            history.append(rec)
            log(rec)
            if score > best[1]:
                best = (epoch, score, {n: v.copy() for n, v in model.params.items()})
            elif epoch - best[0] >= cfg.patience:
                log({"event": "early_stop", "epoch": epoch, "best_epoch": best[0]})
                break
    if best[2] is not None:
        model.params = best[2]
    return TrainResult(model, history, best[0], float(best[1]))


def score_split(model: CycleModel, prepared: PreparedSplit) -> np.ndarray:
    inst = model.prepare(prepared.bundles, prepared.working.target_edges)
    return model.predict(inst)


def evaluate_auc(model: CycleModel, kg: KnowledgeGraph, cfg: RunConfig, timer: PhaseTimer | None = None,
                 first: PreparedSplit | None = None):
    """Mean AUC-PR over ``cfg.repeats`` negative samplings; returns (mean, n_pos, n_neg)."""
    timer = timer or PhaseTimer()
    values, n_pos, n_neg = [], 0, 0
    for r in range(cfg.repeats):
        if r == 0 and first is not None:
            prep = first
        else:
            with timer.phase("preparation"):
                prep = prepare_split(kg, cfg, repeat=r, ratio=1)
        with timer.phase("inference"):
            y = score_split(model, prep)
        values.append(auc_pr(y, prep.targets.labels))
        n_pos, n_neg = prep.targets.num_pos, prep.targets.num_neg
    return float(np.mean(values)), n_pos, n_neg


def evaluate_hits(model: CycleModel, kg: KnowledgeGraph, cfg: RunConfig, k: int = 10,
                  timer: PhaseTimer | None = None) -> float:
    """Hits@k against ``cfg.num_neg`` negatives per positive.

    Negatives come in rounds of one per positive, each round added to the
    graph on its own, so the working graph never holds more than one
    corruption per positive. Negative ``j`` is ranked against the positive's
    score from round ``j``. Averaged over ``cfg.repeats``.
    """
    timer = timer or PhaseTimer()
    out = []
    for r in range(cfg.repeats):
        pos, neg = [], []
        for j in range(cfg.num_neg):
            with timer.phase("preparation"):
                prep = prepare_split(kg, cfg, repeat=r, round_=j + 1, ratio=1)
            with timer.phase("inference"):
                y = score_split(model, prep)
            n = prep.targets.num_pos
            pos.append(y[:n])
            neg.append(y[n:])
        out.append(hits_at_k(np.stack(pos, axis=1), np.stack(neg, axis=1), k))
    return float(np.mean(out))


def evaluate(model: CycleModel, kg: KnowledgeGraph, cfg: RunConfig, dataset: str, split: str,
             metrics=("auc-pr", "hits@10"), timer: PhaseTimer | None = None) -> MetricsReport:
    timer = timer or PhaseTimer()
    report = MetricsReport(dataset, split, cfg.k, cfg.seed)
    if "auc-pr" in metrics:
        report.auc_pr, report.n_pos, report.n_neg = evaluate_auc(model, kg, cfg, timer)
    if "hits@10" in metrics:
        report.hits_at_10 = evaluate_hits(model, kg, cfg, 10, timer)
        report.n_pos = report.n_pos or kg.num_edges
    report.phase_times = dict(timer.times)
    return report


def config_dict(cfg: RunConfig) -> dict:
    return asdict(cfg)
