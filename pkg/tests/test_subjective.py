import warnings

import numpy as np
import pytest

from hdrpatchmax import subjective
from hdrpatchmax.subjective import ScoreTable


def planted_table(n_videos=50, n_subjects=20, seed=0):
    """Scores drawn from u = psi + delta + nu * N(0, 1) with known parameters."""
    r = np.random.default_rng(seed)
    psi = r.uniform(0, 100, n_videos)
    delta = r.normal(0, 5, n_subjects)
    nu = r.uniform(1, 5, n_subjects)
    sub, vid, sc = [], [], []
    for i in range(n_subjects):
        for j in range(n_videos):
            sub.append(f"s{i:02d}")
            vid.append(f"v{j:02d}")
            sc.append(psi[j] + delta[i] + nu[i] * r.standard_normal())
    table = ScoreTable(sub, vid, ["1"] * len(sc), sc)
    return table, psi, delta, nu


def test_identical_unbiased_subjects():
    scores = [30.0, 55.0, 80.0]
    sub = [f"s{i}" for i in range(4) for _ in scores]
    vid = [f"v{j}" for _ in range(4) for j in range(3)]
    table = ScoreTable(sub, vid, ["1"] * 12, scores * 4)
    with pytest.warns(RuntimeWarning, match="floor"):
        sol = subjective.solve_mos(table)
    assert np.allclose(sol.psi, scores, atol=1e-12)
    assert np.allclose(sol.delta, 0, atol=1e-12)
    assert np.allclose(sol.nu, np.sqrt(subjective.NU2_FLOOR))


def test_planted_recovery():
    table, psi, delta, _ = planted_table()
    sol = subjective.solve_mos(table)
    est = np.array([sol.psi_of(f"v{j:02d}", "1") for j in range(50)])
    assert np.corrcoef(est, psi)[0, 1] > 0.99
    # delta is identified only up to the sum-to-zero constraint
    assert np.sqrt(np.mean((sol.delta - (delta - delta.mean())) ** 2)) < 1.0
    assert abs(sol.delta.sum()) < 1e-9
    assert np.all(np.diff(sol.ll_history) >= -1e-9 * abs(sol.ll_history[0]))
    assert np.all(sol.nu > 0)


# on small tables one subject can absorb the residuals exactly and hit the nu floor
@pytest.mark.filterwarnings("ignore:.*inconsistency floor:RuntimeWarning")
def test_relabelling_invariance():
    table, *_ = planted_table(12, 8, seed=1)
    base = subjective.solve_mos(table)
    perm = np.random.default_rng(2).permutation(len(table.score))
    shuffled = ScoreTable(table.subject[perm], table.video[perm], table.device[perm], table.score[perm])
    renamed = ScoreTable(np.char.add("x", table.subject), table.video, table.device, table.score)
    for other in (subjective.solve_mos(shuffled), subjective.solve_mos(renamed)):
        assert np.allclose(other.psi, base.psi, rtol=1e-9)


def test_solver_preconditions():
    with pytest.raises(ValueError, match="fewer than 2 subjects"):
        subjective.solve_mos(ScoreTable(["a", "b", "a"], ["v1", "v1", "v2"], ["1"] * 3, [1, 2, 3]))


def _two_device_solution():
    table, *_ = planted_table(6, 5, seed=3)
    both = ScoreTable(np.concatenate([table.subject] * 2), np.concatenate([table.video] * 2),
                      ["1"] * len(table.score) + ["2"] * len(table.score),
                      np.concatenate([table.score, table.score + 7.0]))
    return subjective.solve_mos(both)


@pytest.mark.filterwarnings("ignore:.*inconsistency floor:RuntimeWarning")
def test_dmos_examples():
    sol = _two_device_solution()
    refs = {"v01": "v00", "v02": "v00", "v00": "v00"}
    d = subjective.dmos(sol, refs)
    assert d[("v00", "1")] == 0.0
    assert d[("v01", "1")] == pytest.approx(sol.psi_of("v01", "1") - sol.psi_of("v00", "1"))
    sol.psi[[i for i, (_, dev) in enumerate(sol.items) if dev == "2"]] += 13.0
    shifted = subjective.dmos(sol, refs)
    for key in d:
        assert shifted[key] == pytest.approx(d[key], abs=1e-9)


def test_dmos_subtraction():
    sol = subjective.MosSolution(items=[("d", "1"), ("r", "1")], psi=np.array([60.0, 80.0]),
                                 subjects=[], delta=np.zeros(0), nu=np.zeros(0), log_likelihood=0.0)
    assert subjective.dmos(sol, {"d": "r"})[("d", "1")] == -20.0
    with pytest.raises(KeyError):
        subjective.dmos(sol, {"d": "missing"})


def test_internal_correlation_identical_groups():
    r = np.random.default_rng(4)
    base = r.uniform(0, 100, 30)
    n = 6
    sub = [f"s{i}" for i in range(n) for _ in base]
    vid = [f"v{j}" for _ in range(n) for j in range(30)]
    table = ScoreTable(sub, vid, ["1"] * len(sub), np.tile(base, n))
    assert subjective.internal_correlation(table) == pytest.approx(1.0, abs=1e-12)


def test_internal_correlation_of_noise():
    r = np.random.default_rng(5)
    n_sub, n_vid = 20, 200
    sub = [f"s{i}" for i in range(n_sub) for _ in range(n_vid)]
    vid = [f"v{j}" for _ in range(n_sub) for j in range(n_vid)]
    table = ScoreTable(sub, vid, ["1"] * len(sub), r.integers(1, 101, len(sub)))
    assert abs(subjective.internal_correlation(table, n_trials=100, seed=1)) < 0.2


def test_internal_correlation_excludes_flat_subject():
    r = np.random.default_rng(6)
    base = r.uniform(0, 100, 20)
    scores = [base + r.normal(0, 3, 20) for _ in range(5)] + [np.full(20, 50.0)]
    sub = [f"s{i}" for i in range(6) for _ in range(20)]
    vid = [f"v{j}" for _ in range(6) for j in range(20)]
    table = ScoreTable(sub, vid, ["1"] * 120, np.concatenate(scores))
    with pytest.warns(RuntimeWarning, match="s5"):
        assert subjective.internal_correlation(table) > 0.9
    with pytest.raises(ValueError):
        subjective.internal_correlation(ScoreTable(sub[:60], vid[:60], ["1"] * 60, np.concatenate(scores[:3])))


def test_merge_self_map():
    x = np.linspace(10, 90, 16)
    m = subjective.fit_merge_map(x, x)
    assert np.sqrt(np.mean((m(x) - x) ** 2)) < 0.5


def test_merge_recovers_known_logistic():
    r = np.random.default_rng(7)
    x = np.sort(r.uniform(0, 100, 16))
    truth = subjective.logistic4(x, 90, 10, 50, 10)
    m = subjective.fit_merge_map(x, truth + r.normal(0, 0.5, x.size))
    assert np.sqrt(np.mean((m(x) - truth) ** 2)) < 1.0
    grid = np.linspace(x.min(), x.max(), 500)
    assert np.all(np.diff(m(grid)) >= 0)


def test_merge_degenerate_cases():
    x = np.arange(10.0)
    with pytest.raises(ValueError, match="a = b"):
        subjective.fit_merge_map(x, np.full(10, 3.0))
    with pytest.raises(ValueError):
        subjective.fit_merge_map(x[:5], x[:5])


def test_merge_non_convergence_reports_best():
    x = np.linspace(0, 100, 12)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(subjective.MergeFitError) as info:
            subjective.fit_merge_map(x, subjective.logistic4(x, 80, 20, 40, 7) + np.sin(x), max_iter=5)
    assert info.value.best is not None


def test_score_table_round_trip(tmp_path):
    table, *_ = planted_table(4, 3, seed=8)
    table.write_csv(tmp_path / "s.csv")
    back = ScoreTable.read_csv(tmp_path / "s.csv")
    assert np.array_equal(back.score, table.score) and list(back.subject) == list(table.subject)
