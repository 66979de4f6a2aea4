"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line (printed in the terminal summary by
conftest.py) before asserting, so a failing criterion still shows its
measured value.
"""

import time
from pathlib import Path

import numpy as np

import oracles
from conftest import ACCEPTANCE_RESULTS
from hdrpatchmax import cli, corpus, features, fr, hdrmax, nss, stchips, subjective
from hdrpatchmax.evaluation import evaluate_splits
from hdrpatchmax.forest import make_splits
from test_subjective import planted_table

README = Path(__file__).resolve().parents[1] / "README.md"

# HDRMAX feature distances, clip vs banded copy and clip vs noised copy, per content
GOLDEN_BAND_DIST = [
    0.0016595998022247982, 0.0013188472596831378, 0.0012746312965119292, 0.0012077255896703013,
    0.0015649718014870727, 0.0017354412864428652, 0.0013363858113094747, 0.0015628435053193109,
    0.0014625633716060318, 0.0013136723254049824,
]
GOLDEN_NOISE_DIST = [
    0.0012219031476155178, 0.0012256616964674127, 0.0009849289234928381, 0.0010932888637445678,
    0.0007798231975412944, 0.0010440555763901406, 0.0009332571587223013, 0.0010579927885437923,
    0.0011409990745385823, 0.0010133451306533871,
]


def record(num, title, ok, detail):
    ACCEPTANCE_RESULTS.append((num, title, bool(ok), detail))
    assert ok, f"criterion {num} ({title}) failed: {detail}"


def test_criterion_1_layout_widths():
    summary = features.layout_width("summary-v1")
    full = features.layout_width("full-v1")
    ok = summary == 253 == 37 + 108 + 72 + 36 and full == 361 == 37 + 216 + 72 + 36
    ok = ok and len(features.feature_names("summary-v1")) == 253 and len(features.feature_names("full-v1")) == 361
    record(1, "feature-layout fidelity", ok, f"summary-v1={summary} full-v1={full}")


def test_criterion_2_estimator_recovery():
    start = time.perf_counter()
    worst_ggd = 0.0
    for alpha in (0.5, 1.0, 2.0, 4.0):
        est = [nss.fit_ggd(oracles.sample_ggd(alpha, 1.0, 10 ** 5, np.random.default_rng([s, 1]))).alpha
               for s in range(20)]
        worst_ggd = max(worst_ggd, abs(np.median(est) / alpha - 1))
    worst_aggd = 0.0
    for nu, sl, sr in ((1.0, 1.0, 2.0), (2.0, 1.5, 0.5), (0.7, 1.0, 1.0), (3.0, 0.8, 1.6)):
        fits = [nss.fit_aggd(oracles.sample_aggd(nu, sl, sr, 10 ** 5, np.random.default_rng([s, 2])))
                for s in range(20)]
        got = (np.median([f.nu for f in fits]), np.median([np.sqrt(f.sigma_l2) for f in fits]),
               np.median([np.sqrt(f.sigma_r2) for f in fits]))
        worst_aggd = max(worst_aggd, *(abs(g / w - 1) for g, w in zip(got, (nu, sl, sr))))
    elapsed = time.perf_counter() - start
    ok = worst_ggd <= 0.05 and worst_aggd <= 0.10 and elapsed < 30
    record(2, "estimator recovery", ok,
           f"worst GGD rel err {worst_ggd:.4f}, worst AGGD rel err {worst_aggd:.4f}, {elapsed:.1f}s")


def test_criterion_3_oracle_equivalence():
    start = time.perf_counter()
    worst = {}

    def note(name, err):
        worst[name] = max(worst.get(name, 0.0), float(err))

    for case in range(100):
        r = np.random.default_rng([case, 3])
        p = r.random(tuple(r.integers(7, 12, 2)))
        note("mscn", np.abs(nss.mscn(p) - oracles.mscn(p.tolist())).max())
        q = r.random(tuple(r.integers(3, 12, 2)))
        note("sobel", np.abs(stchips.sobel_magnitude(q) - oracles.sobel(q.tolist())).max())
        m = r.standard_normal(tuple(r.integers(2, 9, 2)))
        note("products", max(np.abs(a - b).max() for a, b in zip(nss.pairwise_products(m), oracles.products(m.tolist()))))
        a = r.random(tuple(r.integers(11, 16, 2)))
        b = np.clip(a + r.normal(0, 0.1, a.shape), 0, 1)
        note("ssim", abs(fr.ssim_frame(a, b) - oracles.ssim_frame(a.tolist(), b.tolist())))
        note("psnr", abs(fr.psnr_frame(a, b) - oracles.psnr_frame(a, b)))
        vol = r.standard_normal((5, 5, 5))
        if case % 2:
            vol = np.round(vol)
        chip, angle = stchips.select_chips(vol)
        want_chip, want_angle = oracles.select_chip(vol.tolist())
        note("chips", 0.0 if angle == want_angle and np.array_equal(chip, want_chip) else np.inf)
    elapsed = time.perf_counter() - start
    tol = {"mscn": 1e-8, "sobel": 1e-8, "products": 0.0, "ssim": 1e-8, "psnr": 1e-8, "chips": 0.0}
    ok = all(worst[k] <= tol[k] for k in tol) and elapsed < 60
    detail = ", ".join(f"{k} {worst[k]:.1e}" for k in tol) + f"; 100 cases each, {elapsed:.1f}s"
    record(3, "oracle equivalence", ok, detail)


def test_criterion_4_mos_recovery():
    start = time.perf_counter()
    table, psi, delta, _ = planted_table()
    sol = subjective.solve_mos(table)
    est = np.array([sol.psi_of(f"v{j:02d}", "1") for j in range(50)])
    r = np.corrcoef(est, psi)[0, 1]
    d_rmse = np.sqrt(np.mean((sol.delta - (delta - delta.mean())) ** 2))
    monotone = bool(np.all(np.diff(sol.ll_history) >= 0))
    elapsed = time.perf_counter() - start
    ok = r > 0.99 and d_rmse < 1.0 and monotone and elapsed < 5
    record(4, "MOS recovery", ok,
           f"Pearson {r:.5f}, delta RMSE {d_rmse:.3f}, LL monotone {monotone}, {len(sol.ll_history) - 1} sweeps, {elapsed:.2f}s")


def test_criterion_5_protocol_sanity(mini_corpus, mini_features):
    y = np.array([item["mos"] for item in mini_corpus])
    groups = np.array([item["content_id"] for item in mini_corpus])
    ids = [item["video_id"] for item in mini_corpus]
    splits = make_splits(groups, n_trials=100, seed=0)
    config = {"seed": 0, "groups": groups}
    start = time.perf_counter()
    report = evaluate_splits(mini_features, y, splits, config, video_ids=ids)
    elapsed = time.perf_counter() - start
    # One permutation of 30 scores is a single draw from a wide null, and all
    # trials would share it. Each trial gets its own permutation instead.
    null = [evaluate_splits(mini_features, np.random.default_rng([5, s.trial]).permutation(y), [s], config,
                            video_ids=ids) for s in splits]
    null_srcc = np.array([r.srcc[0] for r in null if not r.failed[0]])
    med, null_med = np.median(report.srcc[~report.failed]), np.median(null_srcc)
    ok = (med > 0.9 and abs(null_med) < 0.2 and elapsed < 600
          and report.n_failed == 0 and report.n_trials == 100)
    record(5, "protocol-level sanity", ok,
           f"median SRCC {med:.4f} (std {np.std(report.srcc, ddof=1):.3f}), shuffled median {null_med:+.4f} "
           f"over {null_srcc.size} trials, "
           f"100 trials in {elapsed:.0f}s")


def test_criterion_6_reproduction_documented():
    text = README.read_text() if README.exists() else ""
    needed = ["0.8586", "hdrpatchmax extract", "hdrpatchmax mos", "hdrpatchmax evaluate", "--trials 100"]
    missing = [s for s in needed if s not in text]
    record(6, "published-number reproduction documented (not reproducible without the database)",
           not missing, "README lists the command sequence" if not missing else f"README lacks {missing}")


def test_criterion_7_determinism(mini_corpus_dir, corpus_feature_csv, tmp_path):
    videos = [str(mini_corpus_dir / f"c0{c}_l{lv}.yuv") for c, lv in ((0, 0), (1, 2), (2, 4), (3, 0))]
    outs = []
    for i, threads in enumerate((1, 1, 3)):
        path = tmp_path / f"f{i}.csv"
        assert cli.main(["extract", *videos, "--out", str(path), "--threads", str(threads)]) == 0
        outs.append(path.read_bytes())
    scores = str(mini_corpus_dir / "scores.csv")
    models = []
    for i, threads in enumerate((1, 1, 3)):
        path = tmp_path / f"m{i}.bin"
        assert cli.main(["train-model", "--features", str(corpus_feature_csv), "--scores", scores,
                         "--out", str(path), "--seed", "11", "--threads", str(threads)]) == 0
        models.append(path.read_bytes())
    ok = len(set(outs)) == 1 and len(set(models)) == 1
    record(7, "determinism", ok,
           f"extract identical across runs/threads {len(set(outs)) == 1}, "
           f"train-model identical {len(set(models)) == 1}")


def _hdr_distances(content):
    codes = corpus.to_codes(corpus.synthetic_luma(content))
    clip = corpus.from_codes(codes)
    banded = corpus.from_codes(corpus.quantize_codes(codes, 4))
    # noise with the same mean squared error as 4-code quantization
    r = np.random.default_rng([content, 8])
    noisy = corpus.from_codes(np.clip(np.rint(codes + r.normal(0, 4 / np.sqrt(12), codes.shape)), 64, 940))
    base = hdrmax.video_features(list(clip))
    return (np.linalg.norm(hdrmax.video_features(list(banded)) - base),
            np.linalg.norm(hdrmax.video_features(list(noisy)) - base))


def test_criterion_8_banding_sensitivity():
    dists = np.array([_hdr_distances(c) for c in range(corpus.MINI_CORPUS["n_contents"])])
    directional = bool(np.all(dists[:, 0] > dists[:, 1]))
    golden = (np.allclose(dists[:, 0], GOLDEN_BAND_DIST, rtol=1e-6)
              and np.allclose(dists[:, 1], GOLDEN_NOISE_DIST, rtol=1e-6))
    ratio = dists[:, 0] / dists[:, 1]
    record(8, "directional HDR sensitivity", directional and golden,
           f"banded > noised on {int(np.sum(dists[:, 0] > dists[:, 1]))}/10 contents, "
           f"ratio min {ratio.min():.2f} median {np.median(ratio):.2f}, golden match {golden}")
