"""Why the expansive nonlinearity helps with banding.

Each mini-corpus content is compared with two copies that have the same
mean squared error: one quantized to multiples of 4 code values (banding)
and one with added Gaussian noise. The HDRMAX features move further for
the banded copy on every content. Plain MSCN statistics of the
untransformed frames usually do as well, but not on every content.

    python demos/04_banding_vs_noise.py
"""

import numpy as np

from hdrpatchmax import corpus, hdrmax, nss


def plain_features(frames):
    return np.mean([nss.block_features(nss.mscn(f)) for f in frames], axis=0)


def main():
    print("content  HDRMAX band  HDRMAX noise  ratio   plain band  plain noise  ratio")
    for c in range(corpus.MINI_CORPUS["n_contents"]):
        codes = corpus.to_codes(corpus.synthetic_luma(c))
        clip = corpus.from_codes(codes)
        banded = corpus.from_codes(corpus.quantize_codes(codes, 4))
        r = np.random.default_rng([c, 8])
        noisy = corpus.from_codes(np.clip(np.rint(codes + r.normal(0, 4 / np.sqrt(12), codes.shape)), 64, 940))
        row = []
        for fn in (lambda v: hdrmax.video_features(list(v)), plain_features):
            base = fn(clip)
            b, n = np.linalg.norm(fn(banded) - base), np.linalg.norm(fn(noisy) - base)
            row += [b, n, b / n]
        print(f"{c:>7}  {row[0]:11.5f}  {row[1]:12.5f}  {row[2]:5.2f}   {row[3]:10.5f}  {row[4]:11.5f}  {row[5]:5.2f}")


if __name__ == "__main__":
    main()
