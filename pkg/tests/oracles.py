"""Independent reference implementations used as test oracles.

Everything here is written with explicit loops and exact constants so it
shares no code path with the package.
"""

import math

import numpy as np
from scipy.special import gammaincinv, gammaln


def reflect(i, n):
    """Half-sample symmetric index (edge sample repeated): -1 -> 0, n -> n-1."""
    while i < 0 or i >= n:
        i = -i - 1 if i < 0 else 2 * n - i - 1
    return i


def gauss_weights(L=3):
    s = (2 * L + 1) / 6.0
    w = [[math.exp(-(a * a + b * b) / (2 * s * s)) for b in range(-L, L + 1)] for a in range(-L, L + 1)]
    tot = sum(map(sum, w))
    return [[v / tot for v in row] for row in w]


def mscn(p, C=1.0 / 255, L=3):
    h, w = len(p), len(p[0])
    wt = gauss_weights(L)
    out = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            mu = 0.0
            sq = 0.0
            for a in range(-L, L + 1):
                for b in range(-L, L + 1):
                    v = p[reflect(i + a, h)][reflect(j + b, w)]
                    mu += wt[a + L][b + L] * v
                    sq += wt[a + L][b + L] * v * v
            sigma = math.sqrt(max(sq - mu * mu, 0.0))
            out[i, j] = (p[i][j] - mu) / (sigma + C)
    return out


def sobel(p):
    kx = [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]]
    ky = [[-1, -2, -1], [0, 0, 0], [1, 2, 1]]
    h, w = len(p), len(p[0])
    out = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            gx = gy = 0.0
            for a in range(3):
                for b in range(3):
                    v = p[reflect(i + a - 1, h)][reflect(j + b - 1, w)]
                    gx += kx[a][b] * v
                    gy += ky[a][b] * v
            out[i, j] = math.sqrt(gx * gx + gy * gy)
    return out


def products(m):
    h, w = len(m), len(m[0])
    H = np.array([[m[i][j] * m[i][j + 1] for j in range(w - 1)] for i in range(h)])
    V = np.array([[m[i][j] * m[i + 1][j] for j in range(w)] for i in range(h - 1)])
    D1 = np.array([[m[i][j] * m[i + 1][j + 1] for j in range(w - 1)] for i in range(h - 1)])
    # D2 pairs (i, j) with (i+1, j-1); stored at column j-1 so all planes align at (h-1, w-1)
    D2 = np.array([[m[i][j] * m[i + 1][j - 1] for j in range(1, w)] for i in range(h - 1)])
    return H, V, D1, D2


def psnr_frame(a, b, cap=100.0):
    mse = sum((x - y) ** 2 for x, y in zip(np.ravel(a), np.ravel(b))) / np.size(a)
    return cap if mse == 0 else 10 * math.log10(1.0 / mse)


def ssim_frame(x, y, K1=0.01, K2=0.03, L=1.0):
    g = [math.exp(-((k - 5) ** 2) / (2 * 1.5 ** 2)) for k in range(11)]
    s = sum(g)
    g = [v / s for v in g]
    c1, c2 = (K1 * L) ** 2, (K2 * L) ** 2
    h, w = len(x), len(x[0])
    vals = []
    for i in range(h - 10):
        for j in range(w - 10):
            mx = my = sxx = syy = sxy = 0.0
            for a in range(11):
                for b in range(11):
                    wt = g[a] * g[b]
                    u, v = x[i + a][j + b], y[i + a][j + b]
                    mx += wt * u
                    my += wt * v
                    sxx += wt * u * u
                    syy += wt * v * v
                    sxy += wt * u * v
            sxx -= mx * mx
            syy -= my * my
            sxy -= mx * my
            vals.append(((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2)))
    return sum(vals) / len(vals)


# exact (sin, cos) of m*pi/6, m = 0..5
_TRIG = [(0.0, 1.0), (0.5, math.sqrt(3) / 2), (math.sqrt(3) / 2, 0.5),
         (1.0, 0.0), (math.sqrt(3) / 2, -0.5), (0.5, -math.sqrt(3) / 2)]


def _round_half_away(v):
    return int(math.copysign(math.floor(abs(v) + 0.5), v))


def chip_slices(vol):
    """All six 5x5 chips (frames x samples along the chip line) of a (t, y, x) volume."""
    out = []
    for sin_t, cos_t in _TRIG:
        chip = np.zeros((5, 5))
        for t in range(5):
            for k, s in enumerate(range(-2, 3)):
                dx = _round_half_away(-s * sin_t)
                dy = _round_half_away(s * cos_t)
                chip[t, k] = vol[t][2 + dy][2 + dx]
        out.append(chip)
    return out


def kurtosis(x):
    x = list(np.ravel(x))
    n = len(x)
    mu = sum(x) / n
    m2 = sum((v - mu) ** 2 for v in x) / n
    if m2 == 0:
        return None
    m4 = sum((v - mu) ** 4 for v in x) / n
    return m4 / (m2 * m2) - 3


def select_chip(vol):
    """(chip, m) with minimal |excess kurtosis|; first index wins ties; None if all degenerate."""
    best = None
    for m, chip in enumerate(chip_slices(vol)):
        k = kurtosis(chip)
        if k is None:
            continue
        if best is None or abs(k) < best[0]:
            best = (abs(k), m, chip)
    return None if best is None else (best[2], best[1])


def _beta(sigma, nu):
    return sigma * math.exp(0.5 * (gammaln(1 / nu) - gammaln(3 / nu)))


def sample_ggd(alpha, sigma, n, rng):
    """Inverse-CDF sampler: |x|/beta = G^-1(u)^(1/alpha) with G the regularized lower gamma."""
    u = rng.random(n)
    mag = _beta(sigma, alpha) * gammaincinv(1 / alpha, u) ** (1 / alpha)
    return np.where(rng.random(n) < 0.5, -mag, mag)


def sample_aggd(nu, sigma_l, sigma_r, n, rng):
    """Inverse-CDF AGGD sampler; the left side carries mass beta_l / (beta_l + beta_r)."""
    bl, br = _beta(sigma_l, nu), _beta(sigma_r, nu)
    u = rng.random(n)
    p_left = bl / (bl + br)
    left = u < p_left
    # rescale u within each side to a uniform magnitude quantile
    q = np.where(left, (p_left - u) / p_left, (u - p_left) / (1 - p_left))
    g = gammaincinv(1 / nu, np.clip(q, 0, 1 - 1e-16)) ** (1 / nu)
    return np.where(left, -bl * g, br * g)


def median_and_std(values):
    """Sort-based median and sample standard deviation."""
    v = sorted(values)
    n = len(v)
    med = v[n // 2] if n % 2 else 0.5 * (v[n // 2 - 1] + v[n // 2])
    mu = sum(v) / n
    sd = math.sqrt(sum((x - mu) ** 2 for x in v) / (n - 1))
    return med, sd
