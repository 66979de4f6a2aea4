"""Evaluation protocol: logistic mapping, SRCC/PLCC/RMSE, repeated content-aware splits."""

import csv
import json
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import forest
from .metrics import pearson, plcc, rmse, srcc  # noqa: F401  (re-exported)

log = logging.getLogger(__name__)


def logistic5(s, b1, b2, b3, b4, b5):
    """``(b1 - b2) / (1 + exp(-(s - b3) / b4)) + b5``."""
    z = np.clip(-(np.asarray(s, dtype=np.float64) - b3) / b4, -700, 700)
    return (b1 - b2) / (1.0 + np.exp(z)) + b5


@dataclass
class LogisticFit:
    params: np.ndarray
    fitted: np.ndarray
    converged: bool
    n_iterations: int

    def __call__(self, s):
        return logistic5(s, *self.params)


def logistic_fit(pred, mos, max_iter=2000, rtol=1e-8, warn=True):
    """Least-squares fit of the 5-parameter logistic by Nelder-Mead.

    Starts from ``(max mos, min mos, mean pred, std pred / 4, 0)``. A fit
    that hits ``max_iter`` without converging is still returned, with
    ``converged=False`` and (unless ``warn`` is false) a :class:`RuntimeWarning`.
    """
    pred = np.asarray(pred, dtype=np.float64).ravel()
    mos = np.asarray(mos, dtype=np.float64).ravel()
    if pred.shape != mos.shape:
        raise ValueError("pred and mos differ in length")
    if len(pred) < 6:
        raise ValueError(f"logistic fit needs at least 6 points, got {len(pred)}")
    if np.ptp(pred) == 0:
        raise ValueError("logistic fit of a constant predictor")
    x0 = np.array([mos.max(), mos.min(), pred.mean(), pred.std() / 4, 0.0])

    def sse(b):
        if b[3] == 0:
            return np.inf
        r = logistic5(pred, *b) - mos
        return r @ r

    scale = np.maximum(np.abs(x0), 1e-12)
    f0 = sse(x0)
    res = minimize(
        sse, x0, method="Nelder-Mead",
        options={"maxiter": max_iter, "xatol": rtol * scale.max(), "fatol": rtol * max(f0, 1e-300),
                 "adaptive": True},
    )
    params = res.x if res.fun <= f0 else x0
    if warn and not res.success:
        warnings.warn(f"logistic fit did not converge: {res.message}", RuntimeWarning, stacklevel=2)
    return LogisticFit(params=params, fitted=logistic5(pred, *params), converged=bool(res.success),
                       n_iterations=int(res.nit))


@dataclass
class MetricReport:
    srcc: np.ndarray
    plcc: np.ndarray
    rmse: np.ndarray
    betas: np.ndarray
    failed: np.ndarray
    scatter: list = field(default_factory=list)

    @property
    def n_trials(self):
        return len(self.srcc)

    @property
    def n_failed(self):
        return int(self.failed.sum())

    def aggregate(self):
        ok = ~self.failed
        out = {"n_trials": self.n_trials, "n_failed": self.n_failed}
        for name in ("srcc", "plcc", "rmse"):
            v = getattr(self, name)[ok]
            out[name] = {
                "median": float(np.median(v)) if len(v) else None,
                "std": float(np.std(v, ddof=1)) if len(v) > 1 else None,
            }
        return out

    def write(self, prefix):
        """Write ``<prefix>_trials.csv``, ``<prefix>_summary.json`` and ``<prefix>_scatter.csv``."""
        with open(f"{prefix}_trials.csv", "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["trial", "failed", "srcc", "plcc", "rmse", "b1", "b2", "b3", "b4", "b5"])
            for i in range(self.n_trials):
                w.writerow([i, int(self.failed[i])] + [repr(float(v)) for v in
                           (self.srcc[i], self.plcc[i], self.rmse[i], *self.betas[i])])
        with open(f"{prefix}_summary.json", "w") as f:
            json.dump(self.aggregate(), f, indent=2, sort_keys=True)
            f.write("\n")
        with open(f"{prefix}_scatter.csv", "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["trial", "video_id", "pred", "fitted", "mos"])
            for row in self.scatter:
                w.writerow([row[0], row[1]] + [repr(float(v)) for v in row[2:]])


def _run_trial(features, targets, split, model_config, video_ids):
    cfg = dict(model_config or {})
    seed = int(cfg.pop("seed", 0)) + split.trial
    groups = cfg.pop("groups", None)
    threads = int(cfg.pop("threads", 1))
    g = None if groups is None else np.asarray(groups)[split.train]
    model = forest.train_forest(features[split.train], targets[split.train], hyper_grid=cfg.get("grid"),
                                seed=seed, n_folds=cfg.get("n_folds", 5), groups=g, threads=threads)
    pred = model.predict(features[split.test])
    y = targets[split.test]
    fit = logistic_fit(pred, y, warn=False)
    rows = [(split.trial, video_ids[i], p, q, t) for i, p, q, t in zip(split.test, pred, fit.fitted, y)]
    return srcc(pred, y), plcc(fit.fitted, y), rmse(fit.fitted, y), fit.params, rows


def evaluate_splits(features, targets, splits, model_config=None, video_ids=None, workers=1):
    """Train, predict, logistic-fit and score every split.

    SRCC is computed on raw predictions, PLCC and RMSE on logistic-fitted
    predictions. A trial that raises is marked failed and left out of the
    aggregates. ``model_config`` may hold ``seed``, ``grid``, ``n_folds``,
    ``groups`` (per-row content ids for grouped CV) and ``threads``.
    """
    features = np.asarray(features, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if video_ids is None:
        video_ids = [str(i) for i in range(len(targets))]

    def run(split):
        try:
            return _run_trial(features, targets, split, model_config, video_ids)
        except (ValueError, ArithmeticError) as e:
            log.warning("trial %d failed: %s", split.trial, e)
            return None

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(run, splits))
    else:
        results = [run(s) for s in splits]

    n = len(splits)
    out = {k: np.full(n, np.nan) for k in ("srcc", "plcc", "rmse")}
    betas = np.full((n, 5), np.nan)
    failed = np.zeros(n, bool)
    scatter = []
    for i, r in enumerate(results):
        if r is None:
            failed[i] = True
            continue
        out["srcc"][i], out["plcc"][i], out["rmse"][i], betas[i], rows = r
        scatter.extend(rows)
    return MetricReport(betas=betas, failed=failed, scatter=scatter, **out)
