"""Raw planar YUV 4:2:0 ingestion (8- and 10-bit) and simple plane utilities."""

import json
import logging
import os
from dataclasses import asdict, dataclass, replace

import numpy as np

log = logging.getLogger(__name__)

PIXEL_FORMATS = {"yuv420p": 8, "yuv420p10le": 10}

# (Kr, Kb) luma coefficients
_MATRIX_COEFFS = {"bt709": (0.2126, 0.0722), "bt2020": (0.2627, 0.0593)}


@dataclass(frozen=True)
class VideoMeta:
    width: int
    height: int
    bit_depth: int = 10
    pixel_format: str = "yuv420p10le"
    fps: float = 60.0
    range: str = "limited"
    transfer: str = "pq"
    gamut: str = "bt2020"

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"invalid dimensions {self.width}x{self.height}")
        if self.pixel_format not in PIXEL_FORMATS:
            raise ValueError(f"unsupported pixel_format {self.pixel_format!r}")
        if PIXEL_FORMATS[self.pixel_format] != self.bit_depth:
            raise ValueError(
                f"bit_depth {self.bit_depth} does not match pixel_format {self.pixel_format}"
            )
        if self.range not in ("limited", "full"):
            raise ValueError(f"unknown range {self.range!r}")
        if self.gamut not in _MATRIX_COEFFS:
            raise ValueError(f"unknown gamut {self.gamut!r}")
        if self.transfer not in ("pq", "bt709"):
            raise ValueError(f"unknown transfer {self.transfer!r}")

    @property
    def max_code(self):
        return (1 << self.bit_depth) - 1

    @property
    def bytes_per_sample(self):
        return 1 if self.bit_depth == 8 else 2

    @property
    def chroma_shape(self):
        return ((self.height + 1) // 2, (self.width + 1) // 2)

    @property
    def frame_bytes(self):
        ch, cw = self.chroma_shape
        return (self.width * self.height + 2 * ch * cw) * self.bytes_per_sample

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "pixel_format" in d and "bit_depth" not in d:
            d["bit_depth"] = PIXEL_FORMATS.get(d["pixel_format"], 0)
        if "bit_depth" in d and "pixel_format" not in d:
            d["pixel_format"] = "yuv420p" if int(d["bit_depth"]) == 8 else "yuv420p10le"
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        for k in ("width", "height", "bit_depth"):
            if k in known:
                known[k] = int(known[k])
        if "fps" in known:
            known["fps"] = float(known["fps"])
        return cls(**known)

    def to_dict(self):
        return asdict(self)

    def with_overrides(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw) if kw else self


def sidecar_path(video_path):
    root, _ = os.path.splitext(video_path)
    return root + ".json"


def load_meta(video_path, sidecar=None, **overrides):
    """Read the JSON sidecar next to a raw video (``clip.yuv`` -> ``clip.json``)."""
    sidecar = sidecar or sidecar_path(video_path)
    with open(sidecar) as f:
        d = json.load(f)
    d.update({k: v for k, v in overrides.items() if v is not None})
    return VideoMeta.from_dict(d)


def write_meta(meta, path):
    with open(path, "w") as f:
        json.dump(meta.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")


def frame_count(path, meta):
    """Number of whole frames in ``path``; raises if the size is not a multiple."""
    size = os.path.getsize(path)
    n, rem = divmod(size, meta.frame_bytes)
    if rem:
        raise ValueError(
            f"{path}: truncated file, {size} bytes is not a multiple of the "
            f"{meta.frame_bytes}-byte frame size (expected {(n + 1) * meta.frame_bytes} "
            f"bytes for {n + 1} frames, got {size})"
        )
    return n


def _limited_luma_bounds(meta):
    s = 1 << (meta.bit_depth - 8)
    return 16 * s, 235 * s


def read_frame_codes(f, meta):
    """Read one frame of integer codes ``(Y, U, V)`` from an open binary file, or None at EOF."""
    raw = f.read(meta.frame_bytes)
    if not raw:
        return None
    if len(raw) != meta.frame_bytes:
        raise ValueError(f"short read: expected {meta.frame_bytes} bytes, got {len(raw)}")
    dtype = np.uint8 if meta.bit_depth == 8 else np.dtype("<u2")
    codes = np.frombuffer(raw, dtype=dtype)
    ny = meta.width * meta.height
    ch, cw = meta.chroma_shape
    nc = ch * cw
    y = codes[:ny].reshape(meta.height, meta.width)
    u = codes[ny:ny + nc].reshape(ch, cw)
    v = codes[ny + nc:].reshape(ch, cw)
    return y, u, v


def open_video(path, meta):
    """Iterate over ``(Y, U, V)`` planes normalized to [0, 1] by ``2**bit_depth - 1``.

    Chroma planes are half resolution. The whole-file size is validated
    before the first frame is produced. Out-of-range codes are tolerated
    and reported once through the module logger.
    """
    n = frame_count(path, meta)
    scale = float(meta.max_code)
    lo, hi = _limited_luma_bounds(meta)
    flagged = False
    with open(path, "rb") as f:
        for _ in range(n):
            y, u, v = read_frame_codes(f, meta)
            if not flagged:
                over = int(np.count_nonzero(y > meta.max_code))
                if meta.range == "limited":
                    over += int(np.count_nonzero((y < lo) | (y > hi)))
                if over:
                    log.warning("%s: %d luma codes outside the nominal range", path, over)
                    flagged = True
            yield y / scale, u / scale, v / scale


def read_luma(path, meta, max_frames=None):
    """Stack the normalized luma planes of a file into a (T, H, W) array."""
    frames = []
    for i, (y, _, _) in enumerate(open_video(path, meta)):
        if max_frames is not None and i >= max_frames:
            break
        frames.append(y)
    return np.stack(frames)


def write_video(path, frames, meta):
    """Write integer-code ``(Y, U, V)`` frames as raw planar YUV."""
    dtype = np.uint8 if meta.bit_depth == 8 else np.dtype("<u2")
    with open(path, "wb") as f:
        for y, u, v in frames:
            for plane in (y, u, v):
                a = np.asarray(plane)
                if a.min() < 0 or a.max() > meta.max_code:
                    raise ValueError("code values out of range for bit depth")
                f.write(np.ascontiguousarray(a, dtype=dtype).tobytes())


def upsample_chroma(c, shape):
    """Nearest-neighbour 2x chroma upsampling cropped to ``shape``."""
    up = np.repeat(np.repeat(c, 2, axis=0), 2, axis=1)
    return up[: shape[0], : shape[1]]


def yuv_to_rgb(y, u, v, meta):
    """Convert normalized Y'CbCr planes to R'G'B' in [0, 1].

    Chroma may be half resolution (it is upsampled by pixel repetition).
    Limited-range inputs have their code offsets and excursions removed.
    """
    y = np.asarray(y, dtype=np.float64)
    if u.shape != y.shape:
        u = upsample_chroma(u, y.shape)
        v = upsample_chroma(v, y.shape)
    if u.shape != y.shape or v.shape != y.shape:
        raise ValueError("chroma planes do not match luma dimensions")
    kr, kb = _MATRIX_COEFFS[meta.gamut]
    kg = 1.0 - kr - kb
    if meta.range == "limited":
        m = float(meta.max_code)
        s = float(1 << (meta.bit_depth - 8))
        yl = (y * m - 16 * s) / (219 * s)
        cb = (u * m - 128 * s) / (224 * s)
        cr = (v * m - 128 * s) / (224 * s)
    else:
        yl = y
        cb = u - 0.5
        cr = v - 0.5
    r = yl + 2 * (1 - kr) * cr
    b = yl + 2 * (1 - kb) * cb
    g = (yl - kr * r - kb * b) / kg
    return tuple(np.clip(c, 0.0, 1.0) for c in (r, g, b))


def downscale2(p):
    """Halve each dimension by 2x2 block averaging; an odd trailing row/column is dropped."""
    p = np.asarray(p, dtype=np.float64)
    h, w = p.shape
    if h < 2 or w < 2:
        raise ValueError(f"cannot downscale a {h}x{w} plane")
    h2, w2 = h // 2, w // 2
    blocks = p[: 2 * h2, : 2 * w2].reshape(h2, 2, w2, 2)
    return (blocks[:, 0, :, 0] + blocks[:, 0, :, 1] + blocks[:, 1, :, 0] + blocks[:, 1, :, 1]) / 4.0
