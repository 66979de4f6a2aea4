"""HDRMAX: windowed rescale to [-1, 1] and an expansive nonlinearity before NSS fits."""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import nss
from .media_io import downscale2
from .patchmax import TEMPORAL_GROUP, temporal_pool


@dataclass(frozen=True)
class HdrMaxConfig:
    window: int = 20
    stride: int = 10
    delta: float = 4.0

    def __post_init__(self):
        if self.stride <= 0 or self.window <= 0 or self.window % self.stride:
            raise ValueError("stride must divide window")
        if (self.window - self.stride) % 2:
            raise ValueError("window - stride must be even so windows centre on cells")
        if self.delta <= 0:
            raise ValueError("delta must be positive")


def expansive_nonlinearity(x, delta=4.0):
    """``exp(d*x) - 1`` for x >= 0 and ``1 - exp(-d*x)`` for x < 0, on clamped [-1, 1]."""
    x = np.clip(np.asarray(x, dtype=np.float64), -1.0, 1.0)
    # both branches written through expm1 of |x| keep the odd symmetry exact
    return np.sign(x) * np.expm1(delta * np.abs(x))


def transform(luma, cfg=HdrMaxConfig()):
    """Windowed min/max rescale followed by the expansive nonlinearity.

    The frame is cut into stride x stride output cells. Each cell is
    rescaled with the min and max of the window x window support centred on
    it (clipped at the frame border). Flat supports produce zeros.
    """
    luma = np.asarray(luma, dtype=np.float64)
    h, w = luma.shape
    win, step = cfg.window, cfg.stride
    if h < win or w < win:
        raise ValueError(f"frame {luma.shape} is smaller than one {win}x{win} window")
    pad = (win - step) // 2
    # Edge padding does not change a clipped window's min or max.
    padded = np.pad(luma, win, mode="edge")
    mins = ndimage.minimum_filter(padded, size=win, mode="nearest")
    maxs = ndimage.maximum_filter(padded, size=win, mode="nearest")
    # filter output at q spans [q - win//2, q + win - win//2 - 1]
    rows = np.arange(0, h, step) - pad + win // 2 + win
    cols = np.arange(0, w, step) - pad + win // 2 + win
    cell_min = mins[np.ix_(rows, cols)]
    cell_max = maxs[np.ix_(rows, cols)]
    lo = np.repeat(np.repeat(cell_min, step, axis=0), step, axis=1)[:h, :w]
    hi = np.repeat(np.repeat(cell_max, step, axis=0), step, axis=1)[:h, :w]
    span = hi - lo
    flat = span <= 0
    with np.errstate(invalid="ignore", divide="ignore"):
        scaled = np.where(flat, 0.0, 2.0 * (luma - lo) / np.where(flat, 1.0, span) - 1.0)
    return expansive_nonlinearity(scaled, cfg.delta)


def scale_features(luma, cfg=HdrMaxConfig()):
    """18 NSS statistics of the MSCN field of the transformed plane."""
    m = nss.mscn(transform(luma, cfg))
    return nss.block_features(m)


def frame_features(luma, cfg=HdrMaxConfig()):
    """36 features: full resolution then the transform applied after downscaling."""
    luma = np.asarray(luma, dtype=np.float64)
    return np.concatenate([scale_features(luma, cfg), scale_features(downscale2(luma), cfg)])


def feature_names(prefix="hdrmax"):
    base = [f"s{s}_{n}" for s in (1, 2) for n in nss.BLOCK_FEATURE_NAMES]
    return [f"{prefix}_mean_{b}" for b in base] + [f"{prefix}_tstd_{b}" for b in base]


def video_features(frames, cfg=HdrMaxConfig(), map_fn=map):
    """72 features: 36 frame means followed by 36 averaged 5-frame-group stds."""
    per_frame = np.array(list(map_fn(lambda f: frame_features(f, cfg), frames)))
    if per_frame.ndim != 2 or per_frame.shape[0] < TEMPORAL_GROUP:
        raise ValueError(f"need at least {TEMPORAL_GROUP} frames")
    return temporal_pool(per_frame)
