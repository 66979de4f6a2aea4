"""Deterministic synthetic clips for demos, tests and the end-to-end smoke run.

Content is a 1/f-spectrum texture with hard-edged shapes and a smooth
luminance ramp, panned over time with a moving disc. Distortions are
applied in the 10-bit code domain so that quantization behaves like real
banding.
"""

import csv
import os

import numpy as np
from scipy import ndimage

from .media_io import VideoMeta, write_meta, write_video

DEFAULT_SHAPE = (192, 256)
DEFAULT_FRAMES = 10


def pink_texture(rng, h, w, exponent=1.0):
    """Zero-mean unit-variance field with amplitude spectrum ~ 1/f**exponent."""
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.rfftfreq(w)[None, :]
    f = np.sqrt(fx * fx + fy * fy)
    f[0, 0] = 1.0
    spec = (rng.standard_normal((h, w // 2 + 1)) + 1j * rng.standard_normal((h, w // 2 + 1))) / f ** exponent
    spec[0, 0] = 0
    field = np.fft.irfft2(spec, s=(h, w))
    return (field - field.mean()) / field.std()


def content_canvas(seed, h, w):
    """A large still canvas in [0, 1] from which frames are cropped."""
    rng = np.random.default_rng(seed)
    tex = 0.12 * pink_texture(rng, h, w)
    yy, xx = np.mgrid[0:h, 0:w] / max(h, w)
    angle = rng.uniform(0, 2 * np.pi)
    ramp = 0.5 + 0.3 * (np.cos(angle) * xx + np.sin(angle) * yy - 0.5)
    canvas = ramp + tex
    for _ in range(rng.integers(4, 9)):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        ry, rx = rng.uniform(8, h / 5), rng.uniform(8, w / 5)
        level = rng.uniform(-0.25, 0.25)
        if rng.random() < 0.5:
            mask = ((yy * max(h, w) - cy) / ry) ** 2 + ((xx * max(h, w) - cx) / rx) ** 2 < 1
        else:
            mask = (np.abs(yy * max(h, w) - cy) < ry) & (np.abs(xx * max(h, w) - cx) < rx)
        canvas = canvas + level * mask
    lo, hi = np.percentile(canvas, [0.5, 99.5])
    return np.clip(0.08 + 0.84 * (canvas - lo) / (hi - lo), 0.0, 1.0)


def synthetic_luma(seed, n_frames=DEFAULT_FRAMES, shape=DEFAULT_SHAPE):
    """(T, H, W) luma in [0, 1]: panned crop of a canvas plus a moving bright disc."""
    h, w = shape
    rng = np.random.default_rng([seed, 1])
    vy, vx = rng.integers(-2, 3), rng.integers(1, 4)
    margin = 4 * n_frames + 8
    canvas = content_canvas(seed, h + 2 * margin, w + 2 * margin)
    yy, xx = np.mgrid[0:h, 0:w]
    oy, ox = rng.uniform(0.25, 0.75) * h, rng.uniform(0.1, 0.4) * w
    frames = []
    for t in range(n_frames):
        y0, x0 = margin + vy * t, margin + vx * t
        f = canvas[y0:y0 + h, x0:x0 + w].copy()
        disc = ((yy - oy) ** 2 + (xx - (ox + 3 * t)) ** 2) < (min(h, w) / 10) ** 2
        f[disc] = 0.5 * f[disc] + 0.45
        frames.append(f)
    return np.stack(frames)


def to_codes(luma, bit_depth=10, full_range=False):
    """Normalized luma -> integer codes (limited range by default)."""
    s = 1 << (bit_depth - 8)
    if full_range:
        codes = np.rint(np.clip(luma, 0, 1) * ((1 << bit_depth) - 1))
    else:
        codes = np.rint(16 * s + np.clip(luma, 0, 1) * 219 * s)
    return codes.astype(np.int64)


def chroma_planes(seed, n_frames, shape, bit_depth=10):
    """Slowly varying chroma code planes (half resolution) around mid-grey."""
    rng = np.random.default_rng([seed, 2])
    ch, cw = (shape[0] + 1) // 2, (shape[1] + 1) // 2
    s = 1 << (bit_depth - 8)
    u = 128 * s + 40 * s * ndimage.gaussian_filter(rng.standard_normal((ch, cw)), 6) * 6
    v = 128 * s + 40 * s * ndimage.gaussian_filter(rng.standard_normal((ch, cw)), 6) * 6
    lo, hi = 16 * s, 240 * s
    u = np.clip(np.rint(u), lo, hi).astype(np.int64)
    v = np.clip(np.rint(v), lo, hi).astype(np.int64)
    return [(u, v)] * n_frames


def quantize_codes(codes, step):
    """Round codes to multiples of ``step`` (banding)."""
    return (np.rint(codes / step) * step).astype(np.int64)


def distort(luma, level, seed=0, bit_depth=10):
    """Compression-like degradation of increasing strength (level 0 = pristine).

    Gaussian blur of sigma 0.6*level followed by code quantization with a
    step of round(2**level) codes. ``level`` may be fractional.
    """
    out = np.asarray(luma, dtype=np.float64)
    if level <= 0:
        return out
    out = np.stack([ndimage.gaussian_filter(f, 0.6 * level, mode="reflect") for f in out])
    codes = quantize_codes(to_codes(out, bit_depth), max(1, int(round(2 ** level))))
    return from_codes(codes, bit_depth)


def add_noise(luma, sigma, seed=0):
    rng = np.random.default_rng(seed)
    return np.clip(luma + rng.normal(0, sigma, np.shape(luma)), 0.0, 1.0)


def from_codes(codes, bit_depth=10):
    """Integer codes -> normalized plane, the same mapping the reader applies."""
    return np.asarray(codes, dtype=np.float64) / ((1 << bit_depth) - 1)


def write_clip(path, luma, seed=0, bit_depth=10):
    """Write normalized luma (plus generated chroma) as a limited-range YUV file with a sidecar."""
    luma = np.asarray(luma)
    meta = VideoMeta(width=luma.shape[2], height=luma.shape[1], bit_depth=bit_depth,
                     pixel_format="yuv420p" if bit_depth == 8 else "yuv420p10le")
    codes = to_codes(luma, bit_depth)
    chroma = chroma_planes(seed, len(luma), luma.shape[1:], bit_depth)
    write_video(path, [(y, u, v) for y, (u, v) in zip(codes, chroma)], meta)
    write_meta(meta, os.path.splitext(path)[0] + ".json")
    return meta


def quality_score(level, rng, noise=2.0):
    """Synthetic opinion score: decreasing in distortion level with rater noise."""
    return float(np.clip(90 - 15 * level + rng.normal(0, noise), 1, 100))


def build_corpus(n_contents, levels, n_frames=DEFAULT_FRAMES, shape=DEFAULT_SHAPE, seed=0):
    """In-memory corpus: list of dicts with video_id, content_id, level, strength, mos and luma.

    Each distorted clip's strength is its nominal level jittered by up to
    +-0.5, so clips sharing a level still differ in true quality.
    """
    rng = np.random.default_rng([seed, 99])
    items = []
    for c in range(n_contents):
        clean = synthetic_luma(seed * 1000 + c, n_frames, shape)
        for level in levels:
            strength = level + rng.uniform(-0.5, 0.5) if level > 0 else 0.0
            items.append({
                "video_id": f"c{c:02d}_l{level}",
                "content_id": f"c{c:02d}",
                "level": level,
                "strength": strength,
                "mos": quality_score(strength, rng),
                "luma": distort(clean, strength),
            })
    return items


MINI_CORPUS = {"n_contents": 10, "levels": (0, 2, 4)}


def write_mini_corpus(outdir, seed=0):
    """Write the 30-clip mini corpus: YUV files, sidecars and ``scores.csv``.

    Returns the list of written ``.yuv`` paths.
    """
    os.makedirs(outdir, exist_ok=True)
    paths = []
    with open(os.path.join(outdir, "scores.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["video_id", "content_id", "score"])
        for item in build_corpus(seed=seed, **MINI_CORPUS):
            path = os.path.join(outdir, item["video_id"] + ".yuv")
            write_clip(path, item["luma"], seed=seed)
            w.writerow([item["video_id"], item["content_id"], repr(item["mos"])])
            paths.append(path)
    return paths
