"""Central finite-difference check of the model's analytic gradients."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

# relative error is taken against max(|analytic|, |numeric|, FLOOR) so that
# gradients at round-off level do not blow the ratio up
FLOOR = 1e-6


class Probe(NamedTuple):
    name: str
    index: tuple
    analytic: float
    numeric: float
    rel_err: float


class GradCheckReport(NamedTuple):
    probes: list
    max_rel_err: float
    failures: list
    min_margin: float
    margin_ok: bool
    tol: float

    @property
    def passed(self) -> bool:
        return self.margin_ok and not self.failures


def argmax_margin(model, inst) -> float:
    """Smallest gap between the best and runner-up covering cycle of any target."""
    pred, _ = model.forward(inst)
    best = np.inf
    for view, p in zip(inst.bases, pred.P):
        ptr, cols = view.target_ptr, view.target_cycles
        for i in range(ptr.size - 1):
            vals = np.sort(p[cols[ptr[i]:ptr[i + 1]]])
            if vals.size >= 2:
                best = min(best, float(vals[-1] - vals[-2]))
    return best


def pick_probes(params: dict, n_probe: int, rng) -> list[tuple[str, tuple]]:
    """One random entry per tensor first, then random extras up to ``n_probe``."""
    names = sorted(params)
    picks = []
    for name in names[:n_probe]:
        shape = params[name].shape
        picks.append((name, tuple(int(rng.integers(s)) for s in shape)))
    sizes = np.array([params[n].size for n in names], dtype=float)
    while len(picks) < n_probe:
        name = names[int(rng.choice(len(names), p=sizes / sizes.sum()))]
        shape = params[name].shape
        picks.append((name, tuple(int(rng.integers(s)) for s in shape)))
    return picks


def gradient_check(model, inst, labels, n_probe: int = 20, h: float = 1e-5, tol: float = 1e-4,
                   seed: int = 0, grads: dict | None = None) -> GradCheckReport:
    """Compare analytic gradients (or ``grads`` if given) with
    ``(L(t + h) - L(t - h)) / 2h`` on ``n_probe`` sampled scalars.

    Runs without dropout. The report flags instances whose max routing is
    within ``10 h`` of a tie, where the loss is not differentiable.
    """
    if grads is None:
        _, grads, _ = model.loss_and_grad(inst, labels, train=False)
    rng = np.random.default_rng(seed)
    probes = []
    for name, idx in pick_probes(model.params, n_probe, rng):
        theta = model.params[name]
        old = theta[idx]
        theta[idx] = old + h
        lp = model.loss_and_grad(inst, labels, train=False)[0]
        theta[idx] = old - h
        lm = model.loss_and_grad(inst, labels, train=False)[0]
        theta[idx] = old
        num = (lp - lm) / (2 * h)
        ana = float(grads[name][idx])
        err = abs(ana - num) / max(abs(ana), abs(num), FLOOR)
        probes.append(Probe(name, idx, ana, num, err))
    margin = argmax_margin(model, inst)
    failures = [p for p in probes if p.rel_err > tol]
    return GradCheckReport(probes, max((p.rel_err for p in probes), default=0.0), failures,
                           margin, margin > 10 * h, tol)
