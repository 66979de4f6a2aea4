import json

import numpy as np
import pytest

import oracles
from hdrpatchmax import evaluation, forest
from hdrpatchmax.metrics import plcc, rmse, srcc

SMALL_GRID = {"n_estimators": (20, 50), "max_features": ("sqrt", "all")}


def test_srcc_examples():
    x = np.arange(10.0)
    assert srcc(x, x) == 1.0
    assert srcc(x, -x) == -1.0
    assert srcc((1, 2, 3), (3, 1, 2)) == pytest.approx(-0.5, abs=1e-15)


def test_srcc_ties_share_mean_rank():
    # ranks (1.5, 1.5, 3, 4) against (1, 2, 3, 4): Pearson computed by hand
    a = np.array([1.5, 1.5, 3, 4]) - 2.5
    b = np.array([1.0, 2, 3, 4]) - 2.5
    assert srcc((7, 7, 8, 9), (1, 2, 3, 4)) == pytest.approx(a @ b / np.sqrt((a @ a) * (b @ b)), rel=1e-14)


def test_srcc_monotone_invariance(rng):
    x, y = rng.standard_normal(40), rng.standard_normal(40)
    base = srcc(x, y)
    assert srcc(x ** 3, y) == pytest.approx(base, abs=1e-15)
    assert srcc(x, np.exp(y)) == pytest.approx(base, abs=1e-15)


def test_metric_errors():
    with pytest.raises(ValueError):
        srcc((1, 1, 1), (1, 2, 3))
    with pytest.raises(ValueError):
        srcc((1, 2), (1, 2))
    with pytest.raises(ValueError):
        plcc((1, 2, 3), (1, 2))
    assert rmse((1, 2), (1, 4)) == pytest.approx(np.sqrt(2))


def test_logistic_recovers_noiseless_data():
    s = np.linspace(0, 10, 40)
    mos = evaluation.logistic5(s, 80, 20, 5, 1.5, 10)
    fit = evaluation.logistic_fit(s, mos)
    assert fit.converged
    assert np.sqrt(np.mean((fit.fitted - mos) ** 2)) < 1e-3


# the affine case drifts toward an infinitely wide logistic and never settles
@pytest.mark.filterwarnings("ignore:logistic fit did not converge:RuntimeWarning")
def test_logistic_fit_does_not_lose_linear_correlation(rng):
    pred = rng.uniform(0, 100, 50)
    fit = evaluation.logistic_fit(pred, pred)
    assert plcc(fit.fitted, pred) >= plcc(pred, pred) - 1e-9


def test_logistic_fit_no_worse_than_mean(rng):
    pred = rng.uniform(0, 1, 60)
    mos = 50 + 30 * np.tanh(3 * (pred - 0.5)) + rng.normal(0, 5, 60)
    fit = evaluation.logistic_fit(pred, mos)
    assert rmse(fit.fitted, mos) <= rmse(np.full(60, mos.mean()), mos) + 1e-9


def test_logistic_fit_errors():
    with pytest.raises(ValueError):
        evaluation.logistic_fit(np.arange(5.0), np.arange(5.0))
    with pytest.raises(ValueError):
        evaluation.logistic_fit(np.ones(10), np.arange(10.0))


def test_non_convergence_warns(rng):
    pred = rng.random(30)
    with pytest.warns(RuntimeWarning):
        fit = evaluation.logistic_fit(pred, rng.random(30) * 100, max_iter=3)
    assert not fit.converged and np.all(np.isfinite(fit.fitted))


def _dataset(n=200, seed=0):
    r = np.random.default_rng(seed)
    content = np.repeat(np.arange(n // 8), 8)
    y = r.uniform(0, 100, n)
    X = np.column_stack([y + r.normal(0, 1, n), r.random(n)])
    return X, y, content


def test_leaked_targets_give_near_perfect_srcc():
    X, y, content = _dataset()
    splits = forest.make_splits(content, n_trials=10, seed=0)
    report = evaluation.evaluate_splits(X, y, splits, {"grid": SMALL_GRID, "seed": 1})
    assert report.n_trials == 10 and report.n_failed == 0
    assert np.median(report.srcc) > 0.99


def test_shuffled_targets_give_null_srcc():
    X, y, content = _dataset(seed=1)
    shuffled = np.random.default_rng(2).permutation(y)
    splits = forest.make_splits(content, n_trials=10, seed=0)
    report = evaluation.evaluate_splits(X, shuffled, splits, {"grid": SMALL_GRID, "seed": 1})
    assert abs(np.median(report.srcc)) < 0.2


def test_failed_trials_are_counted(tmp_path):
    X, y, content = _dataset(64)
    splits = forest.make_splits(content, n_trials=4, seed=0)
    X = X.copy()
    X[splits[2].train[0], 0] = np.nan  # only trials training on this row fail
    report = evaluation.evaluate_splits(X, y, splits, {"grid": SMALL_GRID})
    assert report.n_failed == sum(splits[2].train[0] in s.train for s in splits)
    agg = report.aggregate()
    assert agg["n_failed"] == report.n_failed
    report.write(tmp_path / "r")
    rows = (tmp_path / "r_trials.csv").read_text().splitlines()
    assert len(rows) == 1 + 4
    assert json.loads((tmp_path / "r_summary.json").read_text())["n_trials"] == 4


def test_aggregate_matches_sort_oracle(rng):
    n = 17
    report = evaluation.MetricReport(srcc=rng.uniform(-1, 1, n), plcc=rng.uniform(-1, 1, n),
                                     rmse=rng.uniform(0, 10, n), betas=np.zeros((n, 5)),
                                     failed=np.zeros(n, bool))
    report.failed[[3, 9]] = True
    agg = report.aggregate()
    for name in ("srcc", "plcc", "rmse"):
        values = [v for v, bad in zip(getattr(report, name), report.failed) if not bad]
        med, sd = oracles.median_and_std(values)
        assert agg[name]["median"] == pytest.approx(med, abs=1e-15)
        assert agg[name]["std"] == pytest.approx(sd, rel=1e-12)


def test_report_invariants():
    X, y, content = _dataset(96, seed=3)
    splits = forest.make_splits(content, n_trials=5, seed=4)
    report = evaluation.evaluate_splits(X, y, splits, {"grid": SMALL_GRID}, workers=2)
    ok = ~report.failed
    assert np.all(np.abs(report.srcc[ok]) <= 1) and np.all(np.abs(report.plcc[ok]) <= 1)
    assert np.all(report.rmse[ok] >= 0)
    serial = evaluation.evaluate_splits(X, y, splits, {"grid": SMALL_GRID})
    assert np.array_equal(serial.srcc, report.srcc)
    assert len({row[0] for row in report.scatter}) == 5
