"""NIQE-style features: 36 patch NSS statistics and the distance to a pristine model."""

import json
import logging
from dataclasses import dataclass
from importlib import resources

import numpy as np

from . import nss
from .media_io import downscale2

log = logging.getLogger(__name__)

MODEL_FORMAT = "niqe-pristine-v1"
N_FEATURES = 36
REGULARIZATION = 1e-6


@dataclass
class NiqePristineModel:
    mu: np.ndarray
    cov: np.ndarray
    patch_size: int = 96
    sharpness_fraction: float = 0.75
    format_version: str = MODEL_FORMAT

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64)
        self.cov = np.asarray(self.cov, dtype=np.float64)
        if self.mu.shape != (N_FEATURES,) or self.cov.shape != (N_FEATURES, N_FEATURES):
            raise ValueError("pristine model must hold a 36-vector and a 36x36 matrix")
        if not np.allclose(self.cov, self.cov.T, atol=1e-10, rtol=0):
            raise ValueError("pristine covariance is not symmetric")

    def to_dict(self):
        return {
            "format_version": self.format_version,
            "patch_size": self.patch_size,
            "sharpness_fraction": self.sharpness_fraction,
            "mu": self.mu.tolist(),
            "cov": self.cov.ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format_version") != MODEL_FORMAT:
            raise ValueError(f"unsupported pristine model format {d.get('format_version')!r}")
        return cls(
            mu=np.array(d["mu"]),
            cov=np.array(d["cov"]).reshape(N_FEATURES, N_FEATURES),
            patch_size=int(d["patch_size"]),
            sharpness_fraction=float(d["sharpness_fraction"]),
        )

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f)
            f.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))


def default_model():
    """The bundled pristine model, trained on grayscale scikit-image sample photographs."""
    text = resources.files("hdrpatchmax").joinpath("data/niqe_pristine.json").read_text()
    return NiqePristineModel.from_dict(json.loads(text))


def _tiles(plane, p):
    nh, nw = plane.shape[0] // p, plane.shape[1] // p
    t = plane[: nh * p, : nw * p].reshape(nh, p, nw, p).transpose(0, 2, 1, 3)
    return t.reshape(nh * nw, p, p)


def patch_features(luma, patch_size=96, sharpness_fraction=0.75):
    """Per-patch 36-vectors of the selected sharp patches.

    The frame is cropped to whole patches. Scale 1 uses PxP patches of the
    MSCN field; scale 2 uses (P/2)x(P/2) patches of the MSCN of the
    2x2-downscaled frame, so both scales share the patch grid. A patch is
    kept when its mean local sigma is at least ``sharpness_fraction`` of the
    largest patch mean sigma.
    """
    luma = np.asarray(luma, dtype=np.float64)
    p = patch_size
    if luma.shape[0] < p or luma.shape[1] < p:
        raise ValueError(f"frame {luma.shape} is smaller than one {p}x{p} patch")
    nh, nw = luma.shape[0] // p, luma.shape[1] // p
    crop = luma[: nh * p, : nw * p]
    m1, sigma = nss.mscn(crop, return_sigma=True)
    m2 = nss.mscn(downscale2(crop))
    f1 = nss.batched_block_features(_tiles(m1, p))
    f2 = nss.batched_block_features(_tiles(m2, p // 2))
    feats = np.concatenate([f1, f2], axis=1)
    sharp = _tiles(sigma, p).mean(axis=(1, 2))
    keep = sharp >= sharpness_fraction * sharp.max()
    if sharp.max() <= 0 or not keep.any():
        keep[:] = True
    keep &= ~np.isnan(feats).any(axis=1)
    if not keep.any():
        log.warning("NIQE: no sharp patch is fittable; using all fittable patches")
        keep = ~np.isnan(feats).any(axis=1)
    if not keep.any():
        raise nss.DegenerateInputError("no patch of the frame has fittable NSS statistics")
    return feats[keep]


def _regularized_inverse(cov):
    cov = (cov + cov.T) / 2
    w, v = np.linalg.eigh(cov)
    w = np.maximum(w, 0.0) + REGULARIZATION
    return (v / w) @ v.T


def distance(mu_a, cov_a, mu_b, cov_b):
    """Mahalanobis-like distance between two Gaussians using their pooled covariance."""
    d = np.asarray(mu_a, dtype=np.float64) - np.asarray(mu_b, dtype=np.float64)
    inv = _regularized_inverse((np.asarray(cov_a) + np.asarray(cov_b)) / 2)
    return float(np.sqrt(max(d @ inv @ d, 0.0)))


def _population_gaussian(feats):
    mu = feats.mean(axis=0)
    if feats.shape[0] < 2:
        return mu, np.zeros((feats.shape[1], feats.shape[1]))
    return mu, np.cov(feats, rowvar=False)


def frame_features(luma, model=None):
    """37 values: the 36 patch-mean statistics followed by the model distance."""
    if model is None:
        model = default_model()
    feats = patch_features(luma, model.patch_size, model.sharpness_fraction)
    mu, cov = _population_gaussian(feats)
    return np.append(mu, distance(mu, cov, model.mu, model.cov))


def feature_names(prefix="niqe"):
    names = [f"{prefix}_s{s}_{n}" for s in (1, 2) for n in nss.BLOCK_FEATURE_NAMES]
    return names + [f"{prefix}_distance"]


def video_features(frames, model=None, map_fn=map):
    """Frame-averaged 37 NIQE features."""
    if model is None:
        model = default_model()
    per_frame = np.array(list(map_fn(lambda f: frame_features(f, model), frames)))
    if per_frame.ndim != 2 or len(per_frame) == 0:
        raise ValueError("video has no frames")
    return per_frame.mean(axis=0)


def train_pristine_model(frames, patch_size=96, sharpness_fraction=0.75, map_fn=map):
    """Fit the pristine Gaussian to patch features pooled over a corpus of frames.

    Frames are pooled in the order given regardless of ``map_fn``.
    """
    frames = list(frames)
    if len(frames) < 10:
        raise ValueError(f"pristine corpus needs at least 10 frames, got {len(frames)}")
    pooled = np.concatenate(
        list(map_fn(lambda f: patch_features(f, patch_size, sharpness_fraction), frames))
    )
    mu, cov = _population_gaussian(pooled)
    return NiqePristineModel(
        mu=mu, cov=(cov + cov.T) / 2, patch_size=patch_size, sharpness_fraction=sharpness_fraction
    )
