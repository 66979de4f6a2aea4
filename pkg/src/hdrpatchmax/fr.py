"""Full-reference baselines on luma: PSNR and single-scale SSIM."""

import numpy as np
from scipy import ndimage

PSNR_CAP = 100.0
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


def _check(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"reference {a.shape} and distorted {b.shape} differ in shape")
    return a, b


def psnr_frame(ref, dist, peak=1.0, cap=PSNR_CAP):
    ref, dist = _check(ref, dist)
    mse = np.mean((ref - dist) ** 2)
    if mse == 0:
        return cap
    return float(10 * np.log10(peak * peak / mse))


def ssim_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    x = np.arange(size) - (size - 1) / 2
    g = np.exp(-(x ** 2) / (2 * sigma ** 2))
    return g / g.sum()


def ssim_map(ref, dist, L=1.0):
    """SSIM index over the valid (fully covered) region of an 11x11 Gaussian window."""
    ref, dist = _check(ref, dist)
    if min(ref.shape) < SSIM_WINDOW:
        raise ValueError(f"frames must be at least {SSIM_WINDOW}x{SSIM_WINDOW}")
    g = ssim_window()
    r = SSIM_WINDOW // 2

    def filt(x):
        y = ndimage.correlate1d(x, g, axis=0, mode="reflect")
        y = ndimage.correlate1d(y, g, axis=1, mode="reflect")
        return y[r:-r, r:-r]

    c1 = (SSIM_K1 * L) ** 2
    c2 = (SSIM_K2 * L) ** 2
    mu_x = filt(ref)
    mu_y = filt(dist)
    sxx = filt(ref * ref) - mu_x * mu_x
    syy = filt(dist * dist) - mu_y * mu_y
    sxy = filt(ref * dist) - mu_x * mu_y
    return ((2 * mu_x * mu_y + c1) * (2 * sxy + c2)) / ((mu_x ** 2 + mu_y ** 2 + c1) * (sxx + syy + c2))


def ssim_frame(ref, dist):
    return float(ssim_map(ref, dist).mean())


def _paired(ref_frames, dist_frames):
    ref_frames = list(ref_frames)
    dist_frames = list(dist_frames)
    if len(ref_frames) != len(dist_frames):
        raise ValueError(f"frame counts differ: {len(ref_frames)} vs {len(dist_frames)}")
    if not ref_frames:
        raise ValueError("no frames")
    return zip(ref_frames, dist_frames)


def psnr(ref_frames, dist_frames, cap=PSNR_CAP):
    """Mean over frames of luma PSNR in dB (peak 1.0); identical frames score ``cap``."""
    return float(np.mean([psnr_frame(r, d, cap=cap) for r, d in _paired(ref_frames, dist_frames)]))


def ssim(ref_frames, dist_frames):
    """Mean SSIM over pixels and frames."""
    return float(np.mean([ssim_frame(r, d) for r, d in _paired(ref_frames, dist_frames)]))
