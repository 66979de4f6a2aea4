"""Space-time gradient chips.

Per frame: Sobel gradient magnitude, then MSCN. A 5-tap temporal bandpass
runs over the MSCN sequence. Each non-overlapping 5-frame block is cut
into 5x5x5 volumes on a stride-5 spatial grid; in every volume the
oriented 5x5 space-time slice whose excess kurtosis is closest to zero is
kept. Selected chips are summarised by a GGD fit and AGGD fits of their
neighbour products.
"""

import logging
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import nss
from .media_io import downscale2

log = logging.getLogger(__name__)

CHIP = 5
N_ORIENTATIONS = 6


@dataclass(frozen=True)
class StChipsConfig:
    temporal_a: float = 0.5


def sobel_magnitude(luma):
    """Gradient magnitude from the 3x3 Sobel kernels with reflected borders."""
    p = np.asarray(luma, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] < 3 or p.shape[1] < 3:
        raise ValueError("Sobel needs a frame of at least 3x3")
    q = np.pad(p, 1, mode="symmetric")
    # smoothing [1, 2, 1] across, difference [-1, 0, 1] along
    sy = q[:-2, :] + 2 * q[1:-1, :] + q[2:, :]
    gx = sy[:, 2:] - sy[:, :-2]
    sx = q[:, :-2] + 2 * q[:, 1:-1] + q[:, 2:]
    gy = sx[2:, :] - sx[:-2, :]
    return np.sqrt(gx * gx + gy * gy)


def temporal_taps(a=0.5, n=CHIP):
    """``t (1 - a t) exp(-2 a t)`` sampled at t = 0..n-1, mean-removed so taps sum to zero."""
    t = np.arange(n, dtype=np.float64)
    k = t * (1 - a * t) * np.exp(-2 * a * t)
    return k - k.mean()


def _apply_taps(taps, window):
    # Differences against the newest frame: the taps sum to zero only up to
    # rounding, and this keeps a static input at exactly zero.
    ref = window[-1]
    acc = np.zeros_like(ref)
    for k, x in zip(taps, window):
        acc += k * (x - ref)
    return acc


def temporal_bandpass(frames, a=0.5):
    """Per-pixel correlation with the zero-DC taps in valid mode.

    ``frames`` is (T, H, W) with T >= 5; the result has T - 4 frames and
    ``out[k] = sum_t taps[t] * frames[k + t]``.
    """
    x = np.asarray(frames, dtype=np.float64)
    if x.shape[0] < CHIP:
        raise ValueError(f"temporal bandpass needs at least {CHIP} frames, got {x.shape[0]}")
    taps = temporal_taps(a)
    return np.stack([_apply_taps(taps, x[k:k + CHIP]) for k in range(x.shape[0] - CHIP + 1)])


def _round_half_away(v):
    v = np.round(v, 9)
    return (np.sign(v) * np.floor(np.abs(v) + 0.5)).astype(int)


def chip_offsets(m):
    """Spatial (dy, dx) offsets of the 5 samples of orientation m, centre-relative.

    The chip normal lies in the spatial plane at angle m*pi/6; the chip
    runs along the perpendicular direction, sampled at nearest positions.
    """
    theta = m * np.pi / N_ORIENTATIONS
    s = np.arange(CHIP) - CHIP // 2
    dx = _round_half_away(-s * np.sin(theta))
    dy = _round_half_away(s * np.cos(theta))
    return dy, dx


def chip_index_table():
    """(6, 25) flat indices into a C-ordered (t, y, x) 5x5x5 volume.

    Row m lists the chip samples time-major: 5 spatial samples per frame.
    """
    c = CHIP // 2
    table = np.empty((N_ORIENTATIONS, CHIP * CHIP), dtype=np.intp)
    for m in range(N_ORIENTATIONS):
        dy, dx = chip_offsets(m)
        idx = [(t * CHIP + (c + dy[s])) * CHIP + (c + dx[s]) for t in range(CHIP) for s in range(CHIP)]
        table[m] = idx
    return table


_CHIP_TABLE = chip_index_table()


def _kurtosis_rows(x):
    # x: (..., n) -> excess kurtosis per row; NaN for zero variance
    d = x - x.mean(axis=-1, keepdims=True)
    m2 = np.mean(d * d, axis=-1)
    m4 = np.mean(d ** 4, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        k = m4 / (m2 * m2) - 3.0
    return np.where(m2 > 0, k, np.nan)


def select_chips_batch(volumes):
    """Vectorized chip selection over (n, 5, 5, 5) volumes.

    Returns ``(chips, angles)``: chips is (n, 5, 5) with rows = frames and
    columns = samples along the chip line; angles holds the chosen
    orientation index, or -1 where all six slices are degenerate (the chip
    row is NaN there).
    """
    v = np.asarray(volumes, dtype=np.float64).reshape(-1, CHIP ** 3)
    slices = v[:, _CHIP_TABLE]  # (n, 6, 25)
    score = np.abs(_kurtosis_rows(slices))
    score = np.where(np.isnan(score), np.inf, score)
    best = np.argmin(score, axis=1)  # first minimum -> smallest m on ties
    ok = np.isfinite(score[np.arange(len(best)), best])
    chips = slices[np.arange(len(best)), best].reshape(-1, CHIP, CHIP)
    chips[~ok] = np.nan
    return chips, np.where(ok, best, -1)


def select_chips(volume):
    """Best chip of one 5x5x5 (t, y, x) volume; raises if every slice is degenerate."""
    chips, angles = select_chips_batch(np.asarray(volume)[None])
    if angles[0] < 0:
        raise nss.DegenerateInputError("all six chips of the volume have zero variance")
    return chips[0], int(angles[0])


def _volumes(block):
    # block: (5, H, W) -> (nby, nbx, 5, 5, 5) volumes on a stride-5 grid
    t, h, w = block.shape
    ny, nx = h // CHIP, w // CHIP
    b = block[:, : ny * CHIP, : nx * CHIP].reshape(t, ny, CHIP, nx, CHIP)
    return b.transpose(1, 3, 0, 2, 4), ny, nx


def block_features(block):
    """18 features of one 5-frame block of bandpassed gradient MSCN frames.

    Surviving chips are pooled: GGD over all chip coefficients, AGGD over
    the neighbour products taken inside each chip.
    """
    vols, _, _ = _volumes(block)
    chips, angles = select_chips_batch(vols.reshape(-1, CHIP, CHIP, CHIP))
    chips = chips[angles >= 0]
    if not len(chips):
        raise nss.DegenerateInputError("every chip volume in the block is degenerate")
    g = nss.fit_ggd(chips)
    out = [g.alpha, g.sigma2]
    products = (
        chips[:, :, :-1] * chips[:, :, 1:],
        chips[:, :-1, :] * chips[:, 1:, :],
        chips[:, :-1, :-1] * chips[:, 1:, 1:],
        chips[:, :-1, 1:] * chips[:, 1:, :-1],
    )
    for p in products:
        a = nss.fit_aggd(p)
        out.extend((a.eta, a.nu, a.sigma_l2, a.sigma_r2))
    return np.array(out)


def _gradient_mscn(frame):
    return nss.mscn(sobel_magnitude(frame))


class ChipStream:
    """Incremental ST-chip features for one scale.

    Frames are pushed one at a time and only a few gradient MSCN frames are
    held. The filter needs four frames of history before frame 0, so the
    stream waits for the first five frames and pads with their mirror
    image (frames 4, 3, 2, 1). Every input frame then yields one bandpassed
    frame, and a 5-frame video gives one full block.
    """

    def __init__(self, cfg=StChipsConfig()):
        self.taps = temporal_taps(cfg.temporal_a)
        self.history = deque(maxlen=CHIP)
        self.pending = []
        self.block = []
        self.features = []
        self.n_blocks = 0

    def push(self, frame):
        g = _gradient_mscn(frame)
        if self.pending is not None:
            self.pending.append(g)
            if len(self.pending) < CHIP:
                return
            start, self.pending = self.pending, None
            self.history.extend(start[CHIP - 1:0:-1])
            for x in start:
                self._advance(x)
            return
        self._advance(g)

    def _advance(self, g):
        self.history.append(g)
        self.block.append(_apply_taps(self.taps, self.history))
        if len(self.block) == CHIP:
            try:
                self.features.append(block_features(np.stack(self.block)))
            except nss.DegenerateInputError as e:
                log.warning("ST chips: block %d skipped (%s)", self.n_blocks, e)
            self.block = []
            self.n_blocks += 1

    def result(self):
        if self.pending is not None:
            raise ValueError(f"need at least {CHIP} frames, got {len(self.pending)}")
        if not self.features:
            raise nss.DegenerateInputError("no 5-frame block produced fittable chips")
        return np.mean(self.features, axis=0)


def scale_features(frames, cfg=StChipsConfig()):
    """18 features for one scale, averaged over all non-overlapping 5-frame blocks."""
    stream = ChipStream(cfg)
    for f in frames:
        stream.push(np.asarray(f, dtype=np.float64))
    return stream.result()


def feature_names(prefix="stchips"):
    return [f"{prefix}_s{s}_{n}" for s in (1, 2) for n in nss.BLOCK_FEATURE_NAMES]


def video_features(frames, cfg=StChipsConfig()):
    """36 features: 18 at full resolution, 18 on 2x2-downscaled frames."""
    full, half = ChipStream(cfg), ChipStream(cfg)
    n = 0
    for f in frames:
        f = np.asarray(f, dtype=np.float64)
        full.push(f)
        half.push(downscale2(f))
        n += 1
    if n < CHIP:
        raise ValueError(f"need at least {CHIP} frames, got {n}")
    return np.concatenate([full.result(), half.result()])
