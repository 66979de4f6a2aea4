"""Subjective score analysis.

* :func:`solve_mos` recovers per-(video, device) quality with per-subject
  bias and inconsistency under ``u = psi + delta + nu * N(0, 1)`` by
  maximum likelihood.
* :func:`dmos` differences a video's quality against its reference.
* :func:`internal_correlation` is the split-half consistency of z-scores.
* :func:`fit_merge_map` fits the 4-parameter logistic mapping anchor
  scores between databases.
"""

import csv
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .metrics import pearson

log = logging.getLogger(__name__)

NU2_FLOOR = 1e-4


@dataclass
class ScoreTable:
    subject: np.ndarray
    video: np.ndarray
    device: np.ndarray
    score: np.ndarray

    def __post_init__(self):
        self.subject = np.asarray(self.subject).astype(str)
        self.video = np.asarray(self.video).astype(str)
        self.device = np.asarray(self.device).astype(str)
        self.score = np.asarray(self.score, dtype=np.float64)
        n = len(self.score)
        if not (len(self.subject) == len(self.video) == len(self.device) == n):
            raise ValueError("score table columns differ in length")

    @classmethod
    def read_csv(cls, path):
        """Read ``subject_id, video_id, device_id, score`` rows."""
        cols = {"subject_id": [], "video_id": [], "device_id": [], "score": []}
        with open(path, newline="") as f:
            for row in csv.DictReader(f):
                for k in cols:
                    cols[k].append(row[k])
        return cls(cols["subject_id"], cols["video_id"], cols["device_id"], np.array(cols["score"], float))

    def write_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["subject_id", "video_id", "device_id", "score"])
            for row in zip(self.subject, self.video, self.device, self.score):
                w.writerow(list(row[:3]) + [repr(float(row[3]))])

    def select_device(self, device):
        m = self.device == str(device)
        return ScoreTable(self.subject[m], self.video[m], self.device[m], self.score[m])


@dataclass
class MosSolution:
    items: list  # (video_id, device_id) per psi entry
    psi: np.ndarray
    subjects: list
    delta: np.ndarray
    nu: np.ndarray
    log_likelihood: float
    ll_history: list = field(default_factory=list)

    def psi_of(self, video, device):
        return float(self.psi[self.items.index((str(video), str(device)))])

    def as_dict(self):
        return {item: float(p) for item, p in zip(self.items, self.psi)}


def _log_likelihood(r, nu2_obs):
    return float(-0.5 * np.sum(np.log(2 * np.pi * nu2_obs) + r * r / nu2_obs))


def solve_mos(table, tol=1e-9, max_sweeps=1000, nu2_floor=NU2_FLOOR):
    """Maximum-likelihood quality, bias and inconsistency by coordinate ascent.

    Each sweep applies the exact conditional maximizers in turn: psi as the
    precision-weighted mean of bias-corrected scores, delta as the subject's
    mean residual (then recentred to sum to zero, with psi shifted to
    compensate), and nu^2 as the subject's residual variance floored at
    ``nu2_floor``. Stops when the log-likelihood gains less than ``tol``.
    """
    keys = list(zip(table.video.tolist(), table.device.tolist()))
    items = sorted(set(keys))
    item_idx = {k: i for i, k in enumerate(items)}
    subjects = sorted(set(table.subject.tolist()))
    subj_idx = {s: i for i, s in enumerate(subjects)}
    j = np.array([item_idx[k] for k in keys])
    s = np.array([subj_idx[x] for x in table.subject.tolist()])
    u = table.score
    nj = np.bincount(j, minlength=len(items))
    ns = np.bincount(s, minlength=len(subjects))
    if (nj < 2).any():
        raise ValueError(f"videos rated by fewer than 2 subjects: {[items[i] for i in np.where(nj < 2)[0]][:5]}")
    if (ns < 2).any():
        raise ValueError(f"subjects with fewer than 2 ratings: {[subjects[i] for i in np.where(ns < 2)[0]][:5]}")

    psi = np.bincount(j, u, len(items)) / nj
    delta = np.zeros(len(subjects))
    r = u - psi[j]
    nu2 = np.maximum(np.bincount(s, r * r, len(subjects)) / ns, nu2_floor)
    ll = _log_likelihood(r, nu2[s])
    history = [ll]
    for _ in range(max_sweeps):
        w = 1.0 / nu2[s]
        psi = np.bincount(j, w * (u - delta[s]), len(items)) / np.bincount(j, w, len(items))
        delta = np.bincount(s, u - psi[j], len(subjects)) / ns
        k = delta.mean()
        delta -= k
        psi += k
        r = u - psi[j] - delta[s]
        nu2 = np.maximum(np.bincount(s, r * r, len(subjects)) / ns, nu2_floor)
        new_ll = _log_likelihood(r, nu2[s])
        if new_ll < ll - 1e-9 * max(1.0, abs(ll)):
            raise RuntimeError(f"log-likelihood decreased from {ll} to {new_ll}")
        history.append(new_ll)
        gain = new_ll - ll
        ll = new_ll
        if gain < tol:
            break
    floored = nu2 <= nu2_floor
    if floored.any():
        warnings.warn(
            f"{int(floored.sum())} subject(s) hit the inconsistency floor nu^2 = {nu2_floor}",
            RuntimeWarning, stacklevel=2,
        )
    return MosSolution(items=items, psi=psi, subjects=subjects, delta=delta, nu=np.sqrt(nu2),
                       log_likelihood=ll, ll_history=history)


def dmos(mos, references):
    """``psi(video, device) - psi(reference, device)`` for every video with a reference.

    ``references`` maps video id to its reference video id (references may
    map to themselves). Returns ``{(video, device): dmos}``.
    """
    psi = mos.as_dict()
    out = {}
    for (video, device), value in psi.items():
        if video not in references:
            continue
        ref = str(references[video])
        if (ref, device) not in psi:
            raise KeyError(f"reference {ref!r} of video {video!r} has no score on device {device!r}")
        out[(video, device)] = value - psi[(ref, device)]
    missing = set(map(str, references)) - {v for v, _ in psi}
    if missing:
        raise KeyError(f"videos without scores: {sorted(missing)[:5]}")
    return out


def _zscore_matrix(table):
    subjects = sorted(set(table.subject.tolist()))
    videos = sorted(set(table.video.tolist()))
    si = {x: i for i, x in enumerate(subjects)}
    vi = {x: i for i, x in enumerate(videos)}
    z = np.full((len(subjects), len(videos)), np.nan)
    for sub, vid, sc in zip(table.subject, table.video, table.score):
        z[si[sub], vi[vid]] = sc
    keep = []
    for i, sub in enumerate(subjects):
        row = z[i]
        sd = np.nanstd(row)
        if not sd > 0:
            warnings.warn(f"subject {sub!r} has zero score variance and is excluded", RuntimeWarning,
                          stacklevel=3)
            continue
        z[i] = (row - np.nanmean(row)) / sd
        keep.append(i)
    return z[keep]


def internal_correlation(table, device=None, n_trials=100, seed=0):
    """Median split-half Pearson correlation of per-video mean z-scores.

    z-scores use each subject's population mean and std on the device.
    Subjects are split into two random halves of equal size (with an odd
    count one subject sits out of each trial).
    """
    devices = sorted(set(table.device.tolist()))
    if device is None:
        if len(devices) != 1:
            raise ValueError(f"table has devices {devices}; choose one")
        device = devices[0]
    t = table.select_device(device)
    z = _zscore_matrix(t)
    n = z.shape[0]
    if n < 4:
        raise ValueError(f"need at least 4 subjects on device {device!r}, got {n}")
    half = n // 2
    rs = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for trial in range(n_trials):
            perm = np.random.default_rng([seed, trial]).permutation(n)
            a = np.nanmean(z[perm[:half]], axis=0)
            b = np.nanmean(z[perm[half:2 * half]], axis=0)
            ok = ~np.isnan(a) & ~np.isnan(b)
            try:
                rs.append(pearson(a[ok], b[ok]))
            except ValueError:
                continue
    if not rs:
        raise ValueError("no trial produced a defined correlation")
    return float(np.median(rs))


def logistic4(x, a, b, c, s):
    z = np.clip(-(np.asarray(x, dtype=np.float64) - c) / s, -700, 700)
    return (a - b) / (1.0 + np.exp(z)) + b


class MergeFitError(RuntimeError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


@dataclass
class MergeMap:
    a: float
    b: float
    c: float
    s: float
    rmse: float

    def __call__(self, x):
        return logistic4(x, self.a, self.b, self.c, self.s)

    def as_dict(self):
        return {"a": self.a, "b": self.b, "c": self.c, "s": self.s, "rmse": self.rmse}


def fit_merge_map(src, dst, max_iter=5000):
    """Least-squares logistic mapping anchor scores of one database onto another."""
    src = np.asarray(src, dtype=np.float64).ravel()
    dst = np.asarray(dst, dtype=np.float64).ravel()
    if src.shape != dst.shape:
        raise ValueError("anchor score vectors differ in length")
    if len(src) < 6:
        raise ValueError(f"need at least 6 anchor pairs, got {len(src)}")
    if np.ptp(dst) == 0:
        raise ValueError("degenerate merge map: constant destination scores (a = b)")
    if np.ptp(src) == 0:
        raise ValueError("degenerate merge map: constant source scores")
    x0 = np.array([dst.max(), dst.min(), src.mean(), src.std() / 4])

    def sse(p):
        if p[3] == 0:
            return np.inf
        r = logistic4(src, *p) - dst
        return r @ r

    # Convergence is judged on the objective only: for near-linear data the
    # optimum drifts toward s -> inf and the parameters never settle.
    tss = float(np.sum((dst - dst.mean()) ** 2))
    best = None
    x = x0
    used = 0
    while used < max_iter:
        res = minimize(sse, x, method="Nelder-Mead",
                       options={"maxiter": max_iter - used, "xatol": np.inf, "fatol": 1e-12 * tss,
                                "adaptive": True})
        used += max(int(res.nit), 1)
        improved = best is None or best.fun - res.fun > 1e-10 * tss
        if best is None or res.fun < best.fun:
            best = res
        x = res.x
        if res.success and not improved:
            break
    a, b, c, s = best.x
    fit_rmse = float(np.sqrt(best.fun / len(src)))
    if not best.success and used >= max_iter:
        raise MergeFitError(f"merge fit did not converge in {max_iter} iterations (rmse {fit_rmse:.4g})",
                            best=MergeMap(a, b, c, s, fit_rmse))
    if a == b or s == 0:
        raise ValueError("degenerate merge map fit (a = b or s = 0)")
    return MergeMap(float(a), float(b), float(c), float(s), fit_rmse)
