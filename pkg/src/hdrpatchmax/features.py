"""HDRPatchMAX feature vectors: layouts, single-pass extraction and the feature CSV format."""

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import hdrmax, niqe, patchmax, stchips
from .config import ToolkitConfig
from .media_io import downscale2, open_video

# bank name -> width, in vector order
LAYOUTS = {
    "full-v1": (("niqe", 37), ("patchmax", 216), ("hdrmax", 72), ("stchips", 36)),
    "summary-v1": (("niqe", 37), ("patchmax", 108), ("hdrmax", 72), ("stchips", 36)),
}
TV_SUFFIX = "+tv"


def base_layout(version):
    base = version[: -len(TV_SUFFIX)] if version.endswith(TV_SUFFIX) else version
    if base not in LAYOUTS:
        raise ValueError(f"unknown feature layout {version!r}")
    return base


def bank_offsets(version):
    """``{bank: (start, stop)}`` for a layout, including the device column if present."""
    out, pos = {}, 0
    for bank, width in LAYOUTS[base_layout(version)]:
        out[bank] = (pos, pos + width)
        pos += width
    if version.endswith(TV_SUFFIX):
        out["tv"] = (pos, pos + 1)
    return out


def layout_width(version):
    return max(stop for _, stop in bank_offsets(version).values())


def feature_names(version):
    base = base_layout(version)
    pm = patchmax.feature_names()
    if base == "full-v1":
        pm = [f"{n}_mean" for n in pm] + [f"{n}_tstd" for n in pm]
    names = niqe.feature_names() + pm + hdrmax.feature_names() + stchips.feature_names()
    if version.endswith(TV_SUFFIX):
        names.append("tv_index")
    assert len(names) == layout_width(version)
    return names


def _per_frame(frame, cfg, model):
    return (
        niqe.frame_features(frame, model),
        patchmax.frame_features(frame, cfg.patchmax),
        hdrmax.frame_features(frame, cfg.hdrmax),
    )


def extract_frames(frames, cfg=None, layout="full-v1", model=None, threads=1):
    """Feature vector of a video given as an iterable of normalized luma planes.

    Frames are consumed once. The per-frame banks may run on ``threads``
    workers; results are always reduced in frame order.
    """
    cfg = cfg or ToolkitConfig()
    model = model or niqe.default_model()
    base = base_layout(layout)
    chips_full = stchips.ChipStream(cfg.stchips)
    chips_half = stchips.ChipStream(cfg.stchips)
    rows = []

    def consume(frame_iter, mapper):
        for frame, res in mapper(frame_iter):
            chips_full.push(frame)
            chips_half.push(downscale2(frame))
            rows.append(res)

    frames = (np.asarray(f, dtype=np.float64) for f in frames)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            def mapper(it):
                # bounded look-ahead keeps memory at a few frames per worker
                pending = []
                for f in it:
                    pending.append((f, ex.submit(_per_frame, f, cfg, model)))
                    if len(pending) >= 2 * threads:
                        g, fut = pending.pop(0)
                        yield g, fut.result()
                for g, fut in pending:
                    yield g, fut.result()
            consume(frames, mapper)
    else:
        consume(frames, lambda it: ((f, _per_frame(f, cfg, model)) for f in it))

    if len(rows) < patchmax.TEMPORAL_GROUP:
        raise ValueError(f"need at least {patchmax.TEMPORAL_GROUP} frames, got {len(rows)}")
    niqe_v = np.mean([r[0] for r in rows], axis=0)
    pm = patchmax.temporal_pool(np.array([r[1] for r in rows]))
    if base == "summary-v1":
        pm = pm[:108]
    hm = patchmax.temporal_pool(np.array([r[2] for r in rows]))
    st = np.concatenate([chips_full.result(), chips_half.result()])
    return np.concatenate([niqe_v, pm, hm, st])


def extract_video(path, meta, cfg=None, layout="full-v1", model=None, threads=1):
    """Feature vector of a raw YUV file."""
    frames = (y for y, _, _ in open_video(path, meta))
    return extract_frames(frames, cfg, layout, model, threads)


@dataclass
class FeatureFile:
    layout_version: str
    video_ids: list
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64).reshape(len(self.video_ids), -1)
        if self.matrix.shape[1] != layout_width(self.layout_version):
            raise ValueError(
                f"row width {self.matrix.shape[1]} does not match layout {self.layout_version} "
                f"({layout_width(self.layout_version)})"
            )

    def header_line(self):
        banks = " ".join(f"{b}={a}:{z}" for b, (a, z) in bank_offsets(self.layout_version).items())
        return f"# layout_version={self.layout_version} {banks}"

    def write_csv(self, path):
        with open(path, "w", newline="") as f:
            f.write(self.header_line() + "\n")
            w = csv.writer(f)
            w.writerow(["video_id"] + feature_names(self.layout_version))
            for vid, row in zip(self.video_ids, self.matrix):
                w.writerow([vid] + [repr(float(v)) for v in row])

    @classmethod
    def read_csv(cls, path):
        with open(path, newline="") as f:
            first = f.readline()
            if not first.startswith("# layout_version="):
                raise ValueError(f"{path}: missing layout header")
            layout = first.split()[1].split("=", 1)[1]
            reader = csv.reader(f)
            header = next(reader)
            if header[1:] != feature_names(layout):
                raise ValueError(f"{path}: column names do not match layout {layout}")
            ids, rows = [], []
            for row in reader:
                ids.append(row[0])
                rows.append([float(v) for v in row[1:]])
        return cls(layout, ids, np.array(rows).reshape(len(ids), -1))

    def rows_for(self, video_ids):
        index = {v: i for i, v in enumerate(self.video_ids)}
        missing = [v for v in video_ids if v not in index]
        if missing:
            raise KeyError(f"videos missing from feature file: {missing[:5]}")
        return self.matrix[[index[v] for v in video_ids]]
