"""Random-forest regression built from scratch, with cross-validated hyperparameters.

Trees are CART regressors grown on bootstrap samples with per-node feature
subsampling, variance-reduction splits at midpoint thresholds, and a
minimum of two samples per leaf. All randomness for tree ``t`` comes from
``numpy.random.default_rng(seed + t)``, so a forest is reproducible
regardless of how many threads build it.
"""

import json
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from .metrics import srcc

MAGIC = b"HPMXRF01"
MAX_FEATURES_MODES = ("sqrt", "one_third", "all")
DEFAULT_GRID = {"n_estimators": (50, 100, 200), "max_features": ("sqrt", "one_third", "all")}
MIN_SAMPLES_LEAF = 2


class LayoutMismatchError(ValueError):
    """Feature matrix layout does not match the layout a model was trained on."""


def resolve_max_features(mode, n_features):
    if mode == "sqrt":
        return max(1, int(math.sqrt(n_features)))
    if mode == "one_third":
        return max(1, n_features // 3)
    if mode == "all":
        return n_features
    if isinstance(mode, int) and 0 < mode <= n_features:
        return mode
    raise ValueError(f"unknown max_features {mode!r}")


@numba.njit(cache=True, nogil=True)
def _grow(X, y, sample, keys, max_features, min_leaf):
    n = sample.shape[0]
    m = X.shape[1]
    cap = 2 * n + 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros(cap)

    idx = sample.copy()
    buf = np.empty(n, np.int64)
    stack_node = np.empty(cap, np.int64)
    stack_lo = np.empty(cap, np.int64)
    stack_hi = np.empty(cap, np.int64)
    sp = 0
    stack_node[0] = 0
    stack_lo[0] = 0
    stack_hi[0] = n
    sp = 1
    n_nodes = 1
    vals = np.empty(n)
    ys = np.empty(n)

    while sp > 0:
        sp -= 1
        node = stack_node[sp]
        lo = stack_lo[sp]
        hi = stack_hi[sp]
        cnt = hi - lo
        total = 0.0
        ymin = np.inf
        ymax = -np.inf
        for i in range(lo, hi):
            v = y[idx[i]]
            total += v
            if v < ymin:
                ymin = v
            if v > ymax:
                ymax = v
        value[node] = total / cnt
        if ymin == ymax or cnt < 2 * min_leaf:
            continue

        order = np.argsort(keys[node], kind="mergesort")
        best_score = -np.inf
        best_f = -1
        best_thr = 0.0
        for fi in range(m):
            if fi >= max_features and best_f >= 0:
                break
            f = order[fi]
            for i in range(cnt):
                vals[i] = X[idx[lo + i], f]
            srt = np.argsort(vals[:cnt], kind="mergesort")
            for i in range(cnt):
                ys[i] = y[idx[lo + srt[i]]]
            left_sum = 0.0
            for k in range(cnt - 1):
                left_sum += ys[k]
                nl = k + 1
                nr = cnt - nl
                if nl < min_leaf:
                    continue
                if nr < min_leaf:
                    break
                a = vals[srt[k]]
                b = vals[srt[k + 1]]
                if a == b:
                    continue
                right_sum = total - left_sum
                score = left_sum * left_sum / nl + right_sum * right_sum / nr
                if score > best_score:
                    best_score = score
                    best_f = f
                    thr = 0.5 * (a + b)
                    if thr >= b:
                        thr = a
                    best_thr = thr
        if best_f < 0:
            continue

        nl = 0
        nr = 0
        for i in range(lo, hi):
            s = idx[i]
            if X[s, best_f] <= best_thr:
                idx[lo + nl] = s
                nl += 1
            else:
                buf[nr] = s
                nr += 1
        for i in range(nr):
            idx[lo + nl + i] = buf[i]

        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = n_nodes
        right[node] = n_nodes + 1
        # right pushed first so the left subtree is numbered depth-first
        stack_node[sp] = n_nodes + 1
        stack_lo[sp] = lo + nl
        stack_hi[sp] = hi
        sp += 1
        stack_node[sp] = n_nodes
        stack_lo[sp] = lo
        stack_hi[sp] = lo + nl
        sp += 1
        n_nodes += 2

    return feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes], value[:n_nodes]


@numba.njit(cache=True, nogil=True)
def _apply(feature, threshold, left, right, value, X):
    out = np.empty(X.shape[0])
    for r in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = value[node]
    return out


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        return _apply(self.feature, self.threshold, self.left, self.right, self.value, X)

    @property
    def n_nodes(self):
        return len(self.feature)


def grow_tree(X, y, seed, max_features, min_samples_leaf=MIN_SAMPLES_LEAF, bootstrap=True):
    """Grow one tree; returns ``(tree, bootstrap_indices)``."""
    rng = np.random.default_rng(seed)
    n, m = X.shape
    sample = rng.integers(0, n, n) if bootstrap else np.arange(n)
    keys = rng.random((2 * n + 1, m))
    arrays = _grow(X, y, sample.astype(np.int64), keys, max_features, min_samples_leaf)
    return Tree(*arrays), sample


@dataclass
class ForestModel:
    trees: list
    n_features: int
    n_estimators: int
    max_features: str
    seed: int
    layout_version: str = "unspecified"
    oob_error: float = float("nan")
    cv_results: list = field(default_factory=list)

    def predict_trees(self, X):
        """(n_trees, n_rows) matrix of per-tree predictions."""
        X = _as_matrix(X)
        if X.shape[1] != self.n_features:
            raise LayoutMismatchError(
                f"model expects {self.n_features} features, got {X.shape[1]}"
            )
        return np.stack([t.predict(X) for t in self.trees])

    def predict(self, X):
        return self.predict_trees(X).mean(axis=0)

    def to_bytes(self):
        header = {
            "format": "hdrpatchmax-forest",
            "version": 1,
            "n_features": self.n_features,
            "n_estimators": self.n_estimators,
            "max_features": self.max_features,
            "seed": self.seed,
            "layout_version": self.layout_version,
            "oob_error": None if math.isnan(self.oob_error) else self.oob_error,
            "cv_results": self.cv_results,
            "node_counts": [t.n_nodes for t in self.trees],
        }
        h = json.dumps(header, sort_keys=True).encode()
        parts = [MAGIC, struct.pack("<I", len(h)), h]
        for t in self.trees:
            for a, dt in ((t.feature, "<i8"), (t.threshold, "<f8"), (t.left, "<i8"), (t.right, "<i8"), (t.value, "<f8")):
                parts.append(np.ascontiguousarray(a, dtype=dt).tobytes())
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data):
        if data[:8] != MAGIC:
            raise ValueError("not a forest model file")
        (hlen,) = struct.unpack("<I", data[8:12])
        header = json.loads(data[12:12 + hlen])
        pos = 12 + hlen
        trees = []
        for n in header["node_counts"]:
            arrs = []
            for dt in ("<i8", "<f8", "<i8", "<i8", "<f8"):
                a = np.frombuffer(data, dtype=dt, count=n, offset=pos)
                arrs.append(a.astype(np.int64 if dt == "<i8" else np.float64))
                pos += 8 * n
            trees.append(Tree(*arrs))
        oob = header["oob_error"]
        return cls(
            trees=trees,
            n_features=header["n_features"],
            n_estimators=header["n_estimators"],
            max_features=header["max_features"],
            seed=header["seed"],
            layout_version=header["layout_version"],
            oob_error=float("nan") if oob is None else oob,
            cv_results=header["cv_results"],
        )

    def save(self, path):
        with open(path, "wb") as f:
            f.write(self.to_bytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as f:
            return cls.from_bytes(f.read())


def _as_matrix(X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    return np.ascontiguousarray(X)


def check_finite(X):
    bad = np.where(~np.isfinite(X).all(axis=0))[0]
    if len(bad):
        raise ValueError(f"non-finite feature values in columns {bad.tolist()}")


def fit_forest(X, y, n_estimators=100, max_features="sqrt", seed=0, threads=1,
               layout_version="unspecified", min_samples_leaf=MIN_SAMPLES_LEAF):
    """Fit a forest with fixed hyperparameters (no model selection)."""
    X = _as_matrix(X)
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] != y.shape[0]:
        raise ValueError("X and y have different numbers of rows")
    check_finite(X)
    if not np.isfinite(y).all():
        raise ValueError("non-finite targets")
    k = resolve_max_features(max_features, X.shape[1])

    def one(t):
        return grow_tree(X, y, seed + t, k, min_samples_leaf)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            grown = list(ex.map(one, range(n_estimators)))
    else:
        grown = [one(t) for t in range(n_estimators)]

    n = len(y)
    oob_sum = np.zeros(n)
    oob_cnt = np.zeros(n)
    for tree, sample in grown:
        out = np.ones(n, bool)
        out[sample] = False
        if out.any():
            oob_sum[out] += tree.predict(X[out])
            oob_cnt[out] += 1
    has = oob_cnt > 0
    oob = float(np.mean((oob_sum[has] / oob_cnt[has] - y[has]) ** 2)) if has.any() else float("nan")
    return ForestModel(
        trees=[t for t, _ in grown],
        n_features=X.shape[1],
        n_estimators=n_estimators,
        max_features=str(max_features),
        seed=seed,
        layout_version=layout_version,
        oob_error=oob,
    )


def kfold_indices(n, n_folds, seed, groups=None):
    """Held-out index arrays for each fold; whole groups stay together when given."""
    rng = np.random.default_rng(seed)
    if groups is None:
        perm = rng.permutation(n)
        return [np.sort(f) for f in np.array_split(perm, n_folds)]
    groups = np.asarray(groups)
    uniq = np.unique(groups)
    uniq = uniq[rng.permutation(len(uniq))]
    n_folds = min(n_folds, len(uniq))
    folds = [[] for _ in range(n_folds)]
    for i, g in enumerate(uniq):
        folds[i % n_folds].extend(np.where(groups == g)[0].tolist())
    return [np.sort(np.array(f, dtype=int)) for f in folds]


def cross_validate_sizes(X, y, sizes, max_features, seed=0, n_folds=5, groups=None, threads=1):
    """Mean held-out SRCC for each forest size in ``sizes``.

    Tree ``t`` depends only on ``seed + t``, so a smaller forest is a prefix
    of the largest one; each fold grows the largest forest once and scores
    every prefix. Folds with an undefined SRCC are ignored.
    """
    X = _as_matrix(X)
    y = np.asarray(y, dtype=np.float64)
    sizes = sorted(int(s) for s in sizes)
    scores = {s: [] for s in sizes}
    for held in kfold_indices(len(y), n_folds, seed, groups):
        train = np.setdiff1d(np.arange(len(y)), held)
        if len(train) < 2 or len(held) < 3:
            continue
        model = fit_forest(X[train], y[train], sizes[-1], max_features, seed, threads)
        cum = np.cumsum(model.predict_trees(X[held]), axis=0)
        for s in sizes:
            try:
                scores[s].append(srcc(cum[s - 1] / s, y[held]))
            except ValueError:
                continue
    return {s: float(np.mean(v)) if v else float("-inf") for s, v in scores.items()}


def cross_validate(X, y, n_estimators, max_features, seed=0, n_folds=5, groups=None, threads=1):
    """Mean held-out SRCC over folds; folds with an undefined SRCC are ignored."""
    return cross_validate_sizes(X, y, [n_estimators], max_features, seed, n_folds, groups, threads)[n_estimators]


def train_forest(X, y, hyper_grid=None, seed=0, n_folds=5, groups=None, threads=1,
                 layout_version="unspecified"):
    """Select (n_estimators, max_features) by k-fold SRCC, then refit on all rows.

    Grid points are visited with the number of trees ascending and only a
    strictly better score replaces the incumbent, so ties favour fewer trees.
    """
    X = _as_matrix(X)
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] != len(y):
        raise ValueError("X and y have different numbers of rows")
    if len(y) < 10:
        raise ValueError(f"need at least 10 training rows, got {len(y)}")
    check_finite(X)
    grid = dict(DEFAULT_GRID)
    if hyper_grid:
        grid.update(hyper_grid)
    cv = {mf: cross_validate_sizes(X, y, grid["n_estimators"], mf, seed, n_folds, groups, threads)
          for mf in grid["max_features"]}
    results = []
    best = None
    for n_est in sorted(grid["n_estimators"]):
        for mf in grid["max_features"]:
            score = cv[mf][int(n_est)]
            results.append({"n_estimators": int(n_est), "max_features": mf, "cv_srcc": score})
            if best is None or score > best[0]:
                best = (score, n_est, mf)
    _, n_est, mf = best
    model = fit_forest(X, y, n_est, mf, seed, threads, layout_version)
    model.cv_results = results
    return model


DEVICE_IDS = (1, 2, 3)


def augment_device_index(X, device_ids, layout_version=None):
    """Append the display-device index (1, 2 or 3) as a trailing feature column.

    Returns the widened matrix, and the ``+tv`` layout string as well when
    ``layout_version`` is given.
    """
    X = _as_matrix(X)
    d = np.asarray(device_ids)
    if d.shape != (X.shape[0],):
        raise ValueError("one device id per row is required")
    bad = sorted(set(d.tolist()) - set(DEVICE_IDS))
    if bad:
        raise ValueError(f"unknown device ids {bad}; expected 1, 2 or 3")
    out = np.hstack([X, d.astype(np.float64)[:, None]])
    if layout_version is None:
        return out
    return out, layout_version + "+tv"


@dataclass(frozen=True)
class SplitSpec:
    trial: int
    seed: int
    train: np.ndarray
    test: np.ndarray


def make_splits(content_ids, ratio=0.8, n_trials=100, seed=0):
    """Content-aware train/test splits.

    For each trial the distinct contents are shuffled with a generator
    seeded by ``(seed, trial)`` and moved into the training side until at
    least ``ratio`` of the videos are covered; the remaining contents form
    the test side. Returns one :class:`SplitSpec` of row indices per trial.
    """
    content_ids = np.asarray(content_ids)
    uniq = np.unique(content_ids)
    if len(uniq) < 2:
        raise ValueError(f"need at least 2 distinct contents, got {len(uniq)}")
    n = len(content_ids)
    rows = {c: np.where(content_ids == c)[0] for c in uniq}
    splits = []
    for trial in range(n_trials):
        rng = np.random.default_rng([seed, trial])
        order = uniq[rng.permutation(len(uniq))]
        train, covered = [], 0
        k = 0
        while k < len(order) - 1 and covered < ratio * n:
            train.append(order[k])
            covered += len(rows[order[k]])
            k += 1
        test = order[k:]
        tr = np.sort(np.concatenate([rows[c] for c in train]))
        te = np.sort(np.concatenate([rows[c] for c in test]))
        splits.append(SplitSpec(trial=trial, seed=seed, train=tr, test=te))
    return splits
