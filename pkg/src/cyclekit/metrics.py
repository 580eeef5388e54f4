"""Ranking metrics, basis shortness statistics and phase timing."""

from __future__ import annotations

import csv
import json
import math
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field

import numpy as np

from .basis import BasisBundle

PHASES = ("preparation", "training", "inference")


class UndefinedMetricError(ValueError):
    pass


def auc_pr(scores, labels) -> float:
    """Average precision: mean of the precision at the rank of each positive.

    Scores are sorted descending; tied scores keep their input order.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in shape")
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise UndefinedMetricError("average precision needs at least one positive")
    order = np.argsort(-scores, kind="stable")
    hits = labels[order]
    tp = np.cumsum(hits)
    precision = tp / np.arange(1, hits.size + 1)
    return float(precision[hits].sum() / n_pos)


def ranks(pos_scores, neg_scores) -> np.ndarray:
    """``1 + #(neg > pos) + floor(#(neg == pos) / 2)`` per positive.

    ``pos_scores`` is ``(n,)`` or, when each negative has its own reference
    score, ``(n, n_neg)`` like ``neg_scores``.
    """
    neg = np.asarray(neg_scores, dtype=np.float64)
    pos = np.asarray(pos_scores, dtype=np.float64)
    if pos.ndim == 1:
        pos = pos[:, None]
    above = (neg > pos).sum(axis=1)
    ties = (neg == pos).sum(axis=1)
    return 1 + above + ties // 2


def hits_at_k(pos_scores, neg_scores, k: int = 10) -> float:
    r = ranks(pos_scores, neg_scores)
    return float(np.mean(r <= k)) if r.size else 0.0


# --------------------------------------------------------------- shortness

def min_cycle_length(bundles: list[BasisBundle], target_edges) -> np.ndarray:
    """Shortest covering basis cycle per target, over all bases (inf if none)."""
    target_edges = np.asarray(target_edges, dtype=np.int64)
    best = np.full(target_edges.size, np.inf)
    for b in bundles:
        inc, length = b.incidence, b.basis.cycle_length
        lo, hi = inc.row_ptr[target_edges], inc.row_ptr[target_edges + 1]
        counts = hi - lo
        start = np.cumsum(counts) - counts
        seg = np.repeat(np.arange(target_edges.size), counts)
        cols = inc.row_cycles[lo[seg] + np.arange(counts.sum()) - start[seg]]
        cur = np.full(target_edges.size, np.inf)
        np.minimum.at(cur, seg, length[cols].astype(np.float64))
        best = np.minimum(best, cur)
    return best


def shortness_histogram(bundles: list[BasisBundle], target_edges) -> dict:
    """Proportion of targets per minimum covering-cycle length; ``inf`` = uncovered."""
    lengths = min_cycle_length(bundles, target_edges)
    if lengths.size == 0:
        return {}
    keys, counts = np.unique(lengths, return_counts=True)
    return {(math.inf if np.isinf(k) else int(k)): c / lengths.size for k, c in zip(keys, counts)}


def mean_min_length(lengths) -> float:
    """Mean over covered targets only (uncovered ones are bridges in every basis)."""
    lengths = np.asarray(lengths, dtype=np.float64)
    finite = lengths[np.isfinite(lengths)]
    return float(finite.mean()) if finite.size else math.inf


def write_histogram(path: str, hist: dict) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["min_length", "proportion"])
        for key in sorted(hist):
            w.writerow(["inf" if key == math.inf else key, repr(float(hist[key]))])


def read_histogram(path: str) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {(math.inf if r["min_length"] == "inf" else int(r["min_length"])): float(r["proportion"])
            for r in rows}


# ------------------------------------------------------------------ timing

class PhaseTimer:
    def __init__(self):
        self.times = {p: 0.0 for p in PHASES}

    @contextmanager
    def phase(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.times[name] = self.times.get(name, 0.0) + time.perf_counter() - t0


@dataclass
class MetricsReport:
    dataset: str
    split: str
    k: int
    seed: int
    auc_pr: float | None = None
    hits_at_10: float | None = None
    n_pos: int = 0
    n_neg: int = 0
    phase_times: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("auc_pr", "hits_at_10"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")

    def to_dict(self, timing: bool = True) -> dict:
        d = asdict(self)
        if not timing:
            d.pop("phase_times")
        return d

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), sort_keys=True)
