"""Contrast-segmented patch statistics.

Each frame is tiled into non-overlapping PxP patches. MSCN coefficients
are computed once over the whole frame and the local sigma from the same
pass, averaged over a patch, is that patch's contrast. Patches below the
T-th / above the (100-T)-th contrast percentile form the low / high
groups; the rest are medium. NSS statistics are averaged per group.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import nss
from .media_io import downscale2

log = logging.getLogger(__name__)

GROUPS = ("low", "medium", "high")
LOW, MEDIUM, HIGH = 0, 1, 2
TEMPORAL_GROUP = 5


@dataclass(frozen=True)
class PatchMaxConfig:
    patch_size: int = 20
    percentile: float = 10.0

    def __post_init__(self):
        if not 0 < self.percentile < 50:
            raise ValueError("percentile must lie in (0, 50)")
        if self.patch_size < 8:
            raise ValueError("patch_size must be at least 8")


def group_counts(n, percentile):
    k = math.ceil(n * percentile / 100.0 - 1e-9)
    if 2 * k > n:
        raise ValueError(f"{n} patches cannot hold two groups of {k}")
    return k


def segment_contrasts(contrasts, percentile):
    """Assign low/medium/high labels to patch contrasts given in raster order.

    The ``ceil(n*T/100)`` lowest patches are low and as many highest are
    high. Ties resolve by raster order: among equal contrasts the earlier
    patch ranks lower.
    """
    c = np.asarray(contrasts, dtype=np.float64).ravel()
    n = c.size
    if n < 3:
        raise ValueError(f"need at least 3 patches, got {n}")
    k = group_counts(n, percentile)
    order = np.argsort(c, kind="stable")
    labels = np.full(n, MEDIUM, dtype=np.int8)
    labels[order[:k]] = LOW
    labels[order[n - k:]] = HIGH
    return labels


def _tile(plane, p):
    ph, pw = plane.shape[0] // p, plane.shape[1] // p
    t = plane[: ph * p, : pw * p].reshape(ph, p, pw, p).transpose(0, 2, 1, 3)
    return t.reshape(ph * pw, p, p)


def segment_patches(sigma_plane, cfg=PatchMaxConfig()):
    """Labels (raster order) for the full PxP patches of a local-sigma plane."""
    p = cfg.patch_size
    if sigma_plane.shape[0] < p or sigma_plane.shape[1] < p:
        raise ValueError(f"frame {sigma_plane.shape} is smaller than one {p}x{p} patch")
    contrasts = _tile(np.asarray(sigma_plane, dtype=np.float64), p).mean(axis=(1, 2))
    return segment_contrasts(contrasts, cfg.percentile)


def _global_features(m):
    return nss.block_features(m)


def scale_features(luma, cfg=PatchMaxConfig()):
    """54 group-mean features (low, medium, high x 18) for one scale."""
    m, sigma = nss.mscn(luma, return_sigma=True)
    labels = segment_patches(sigma, cfg)
    feats = nss.batched_block_features(_tile(m, cfg.patch_size))
    valid = ~np.isnan(feats[:, 0])
    if not valid.any():
        raise nss.DegenerateInputError("no patch has fittable MSCN statistics")
    out = np.empty((3, len(nss.BLOCK_FEATURE_NAMES)))
    fallback = None
    for g in (LOW, MEDIUM, HIGH):
        sel = (labels == g) & valid
        if sel.any():
            out[g] = feats[sel].mean(axis=0)
        else:
            if fallback is None:
                fallback = _global_features(m)
            log.warning("PatchMAX: %s-contrast group has no fittable patch; using frame-global fit", GROUPS[g])
            out[g] = fallback
    return out.ravel()


def frame_features(luma, cfg=PatchMaxConfig()):
    """108 features: 54 at full resolution followed by 54 at half resolution."""
    luma = np.asarray(luma, dtype=np.float64)
    return np.concatenate([scale_features(luma, cfg), scale_features(downscale2(luma), cfg)])


def feature_names(prefix="patchmax"):
    return [
        f"{prefix}_s{s}_{g}_{name}"
        for s in (1, 2)
        for g in GROUPS
        for name in nss.BLOCK_FEATURE_NAMES
    ]


def temporal_pool(per_frame, group=TEMPORAL_GROUP):
    """Mean over frames and the mean within-group std over non-overlapping groups.

    ``per_frame`` is (T, F); a trailing partial group is dropped. Returns a
    2F vector ``[means, temporal stds]``.
    """
    a = np.asarray(per_frame, dtype=np.float64)
    t = a.shape[0]
    if t < group:
        raise ValueError(f"need at least {group} frames, got {t}")
    ng = t // group
    g = a[: ng * group].reshape(ng, group, -1)
    # shift by each group's first frame: repeated frames give an exact zero
    stds = (g - g[:, :1]).std(axis=1).mean(axis=0)
    return np.concatenate([a.mean(axis=0), stds])


def video_features(frames, cfg=PatchMaxConfig(), summary=False, map_fn=map):
    """216 PatchMAX features for a video (108 means then 108 temporal stds).

    With ``summary=True`` only the 108 means are returned. ``map_fn`` lets
    the caller supply an order-preserving parallel map.
    """
    per_frame = np.array(list(map_fn(lambda f: frame_features(f, cfg), frames)))
    if per_frame.ndim != 2 or per_frame.shape[0] < TEMPORAL_GROUP:
        raise ValueError(f"need at least {TEMPORAL_GROUP} frames")
    pooled = temporal_pool(per_frame)
    return pooled[:108] if summary else pooled
