"""Walk through the four feature banks on one synthetic clip.

Builds a clean clip and a degraded copy, then prints what each bank sees:
MSCN statistics, the contrast-segmented PatchMAX fits, the HDRMAX
nonlinearity and the space-time gradient chips.

    python demos/01_feature_banks.py
"""

import numpy as np

from hdrpatchmax import corpus, features, hdrmax, niqe, nss, patchmax, stchips


def main():
    clean = corpus.from_codes(corpus.to_codes(corpus.synthetic_luma(3)))
    degraded = corpus.distort(clean, 3.0)
    frame = clean[0]

    print("MSCN coefficients of a clean frame")
    m = nss.mscn(frame)
    g = nss.fit_ggd(m)
    print(f"  GGD shape {g.alpha:.3f}, variance {g.sigma2:.4f}, excess kurtosis {nss.excess_kurtosis(m):.3f}")
    for name, prod in zip(("horizontal", "vertical", "diag", "anti-diag"), nss.pairwise_products(m)):
        a = nss.fit_aggd(prod)
        print(f"  {name:>10} products: AGGD shape {a.nu:.3f}, mean {a.eta:+.4f}")

    print("\nPatchMAX: 20x20 patches split at the 10th and 90th contrast percentiles")
    _, sigma = nss.mscn(frame, return_sigma=True)
    labels = patchmax.segment_patches(sigma)
    print("  patches per group:", dict(zip(patchmax.GROUPS, np.bincount(labels.ravel(), minlength=3).tolist())))
    f_clean = patchmax.scale_features(frame)
    f_deg = patchmax.scale_features(degraded[0])
    for i, group in enumerate(patchmax.GROUPS):
        print(f"  {group:>6} group GGD shape: clean {f_clean[18 * i]:.3f}, degraded {f_deg[18 * i]:.3f}")

    print("\nHDRMAX: windowed rescale to [-1, 1], then sign(x) * expm1(4|x|)")
    for x in (-1.0, -0.5, 0.0, 0.5, 1.0):
        print(f"  f({x:+.1f}) = {hdrmax.expansive_nonlinearity(x):+.3f}")
    t = hdrmax.transform(frame)
    print(f"  transformed frame range [{t.min():.2f}, {t.max():.2f}]")

    print("\nST gradient chips: Sobel magnitude, MSCN, 5-tap temporal bandpass, min-|kurtosis| chip")
    chips = stchips.video_features(clean)
    print(f"  {chips.size} features; chip GGD shape full scale {chips[0]:.3f}, half scale {chips[18]:.3f}")

    print("\nNIQE distance to the bundled pristine model")
    model = niqe.default_model()
    print(f"  clean {niqe.frame_features(frame, model)[-1]:.3f}, degraded {niqe.frame_features(degraded[0], model)[-1]:.3f}")

    vec = features.extract_frames(clean, layout="summary-v1")
    print(f"\nsummary-v1 vector: {vec.size} values, banks {features.bank_offsets('summary-v1')}")


if __name__ == "__main__":
    main()
