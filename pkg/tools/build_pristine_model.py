"""Rebuild src/hdrpatchmax/data/niqe_pristine.json from scikit-image sample photographs.

The images shipped with scikit-image are public-domain or CC0 photographs;
they are converted to grayscale and normalized to [0, 1].

    python tools/build_pristine_model.py
"""

import os

import numpy as np
from skimage import color, data

from hdrpatchmax.niqe import train_pristine_model

IMAGES = ("astronaut", "camera", "chelsea", "coffee", "rocket", "coins", "moon",
          "grass", "gravel", "brick", "clock", "hubble_deep_field")


def load_gray(name):
    img = getattr(data, name)()
    if img.ndim == 3:
        img = color.rgb2gray(img[..., :3])
    else:
        img = img / 255.0
    return np.asarray(img, dtype=np.float64)


def main():
    frames = [load_gray(n) for n in IMAGES]
    model = train_pristine_model(frames)
    out = os.path.join(os.path.dirname(__file__), "..", "src", "hdrpatchmax", "data", "niqe_pristine.json")
    model.save(out)
    print(f"wrote {os.path.normpath(out)} from {len(frames)} images")


if __name__ == "__main__":
    main()
