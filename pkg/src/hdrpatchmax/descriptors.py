"""Content descriptors: spatial information, temporal information, colorfulness, mean luminance.

SI and TI follow ITU-T P.910 (maximum over time of the spatial standard
deviation of the Sobel magnitude / of the frame difference). Colorfulness
is the Hasler-Suesstrunk statistic averaged over frames. All values are
computed on encoded (not linearized) code values normalized to [0, 1].
"""

from dataclasses import asdict, dataclass

import numpy as np

from .media_io import yuv_to_rgb
from .stchips import sobel_magnitude

METHODS = {
    "si": "ITU-T P.910 SI on normalized luma (Sobel, reflected borders)",
    "ti": "ITU-T P.910 TI on normalized luma",
    "colorfulness": "Hasler-Suesstrunk on R'G'B' in [0,1], mean over frames",
    "avg_luminance": "mean normalized luma code value (PQ/gamma encoded, not linear light)",
}


@dataclass(frozen=True)
class DescriptorSet:
    si: float
    ti: float
    colorfulness: float
    avg_luminance: float

    def as_dict(self):
        return asdict(self)


def colorfulness(r, g, b):
    rg = r - g
    yb = 0.5 * (r + g) - b
    return float(np.sqrt(rg.var() + yb.var()) + 0.3 * np.sqrt(rg.mean() ** 2 + yb.mean() ** 2))


def descriptors(frames, meta=None):
    """Descriptors of a video given as an iterable of ``(Y, U, V)`` planes.

    Frames may also be bare luma planes, in which case colorfulness is 0.
    At least two frames are needed for TI.
    """
    si = ti = 0.0
    color_sum = 0.0
    luma_sum = 0.0
    n_px = 0
    prev = None
    n = 0
    for frame in frames:
        if isinstance(frame, tuple):
            y, u, v = frame
        else:
            y, u, v = frame, None, None
        y = np.asarray(y, dtype=np.float64)
        si = max(si, float(sobel_magnitude(y).std()))
        if prev is not None:
            ti = max(ti, float((y - prev).std()))
        if u is not None:
            if meta is None:
                raise ValueError("colorfulness needs VideoMeta for the RGB conversion")
            color_sum += colorfulness(*yuv_to_rgb(y, u, v, meta))
        luma_sum += y.sum()
        n_px += y.size
        prev = y
        n += 1
    if n < 2:
        raise ValueError("descriptors need at least two frames (TI is undefined otherwise)")
    return DescriptorSet(si=float(si), ti=float(ti), colorfulness=float(color_sum / n), avg_luminance=float(luma_sum / n_px))
