"""Natural scene statistics kernels shared by every feature bank.

Local Gaussian-weighted moments, MSCN coefficients, neighbouring pairwise
products and moment-matching fits of the generalized Gaussian (GGD) and
asymmetric generalized Gaussian (AGGD) families.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.special import gammaln

# C = 1 at 8-bit scale, expressed on [0, 1] luma.
DEFAULT_C = 1.0 / 255.0
WINDOW_HALF_WIDTH = 3

_ALPHA_GRID = np.arange(0.05, 10.0 + 5e-4, 1e-3)
_RHO_GRID = np.exp(2 * gammaln(2 / _ALPHA_GRID) - gammaln(1 / _ALPHA_GRID) - gammaln(3 / _ALPHA_GRID))


class DegenerateInputError(ValueError):
    """Samples cannot support the requested statistic (constant, one-sided, too few)."""


@dataclass(frozen=True)
class GgdFit:
    alpha: float
    beta: float
    sigma2: float


@dataclass(frozen=True)
class AggdFit:
    nu: float
    sigma_l2: float
    sigma_r2: float
    eta: float


def gaussian_window(half_width=WINDOW_HALF_WIDTH, sigma=None):
    """Circularly symmetric Gaussian weights of size (2L+1)x(2L+1), summing to one.

    The default spread puts the window edge at three standard deviations
    (sigma = (2L+1)/6, i.e. 7/6 for L=3).
    """
    if sigma is None:
        sigma = (2 * half_width + 1) / 6.0
    offsets = np.arange(-half_width, half_width + 1, dtype=np.float64)
    g = np.exp(-(offsets ** 2) / (2 * sigma ** 2))
    w = np.outer(g, g)
    return w / w.sum()


def local_moments(plane, window=None):
    """Gaussian-weighted local mean and standard deviation.

    Boundaries use symmetric reflection (edge sample repeated). Returns
    ``(mu, sigma)`` with ``sigma >= 0`` everywhere.
    """
    plane = np.asarray(plane, dtype=np.float64)
    if window is None:
        window = gaussian_window()
    if plane.ndim != 2 or plane.shape[0] < window.shape[0] or plane.shape[1] < window.shape[1]:
        raise ValueError(
            f"plane of shape {plane.shape} is smaller than the {window.shape} window"
        )
    # Centering first keeps E[x^2] - mu^2 well conditioned for offset inputs.
    if np.ptp(plane) == 0:
        return plane.copy(), np.zeros_like(plane)
    offset = plane.mean()
    centered = plane - offset
    mu_c = ndimage.correlate(centered, window, mode="reflect")
    mean_sq = ndimage.correlate(centered * centered, window, mode="reflect")
    var = np.maximum(mean_sq - mu_c * mu_c, 0.0)
    return mu_c + offset, np.sqrt(var)


def mscn(plane, window=None, C=DEFAULT_C, return_sigma=False):
    """Mean-subtracted contrast-normalized coefficients ``(p - mu) / (sigma + C)``."""
    if C <= 0:
        raise ValueError("C must be positive")
    plane = np.asarray(plane, dtype=np.float64)
    mu, sigma = local_moments(plane, window)
    out = (plane - mu) / (sigma + C)
    if return_sigma:
        return out, sigma
    return out


def pairwise_products(m):
    """Horizontal, vertical and two diagonal neighbour products.

    Each plane shrinks by the row/column its shift consumes:
    H is (h, w-1), V is (h-1, w), D1 and D2 are (h-1, w-1).
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 2 or m.shape[1] < 2:
        raise ValueError("pairwise products need a plane of at least 2x2")
    h = m[:, :-1] * m[:, 1:]
    v = m[:-1, :] * m[1:, :]
    d1 = m[:-1, :-1] * m[1:, 1:]
    d2 = m[:-1, 1:] * m[1:, :-1]
    return h, v, d1, d2


def _invert_rho(r):
    # rho(alpha) is increasing on the grid; np.interp clamps outside it.
    return np.interp(r, _RHO_GRID, _ALPHA_GRID)


def fit_ggd(samples):
    """Moment-matching GGD fit.

    The ratio ``(E|x|)^2 / E[x^2]`` is inverted against
    ``Gamma(2/a)^2 / (Gamma(1/a) Gamma(3/a))`` on a tabulated grid of
    shapes in [0.05, 10].
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 16:
        raise DegenerateInputError(f"GGD fit needs at least 16 samples, got {x.size}")
    if np.ptp(x) == 0:
        raise DegenerateInputError("GGD fit on constant samples")
    sigma2 = np.mean(x * x)
    r = np.mean(np.abs(x)) ** 2 / sigma2
    alpha = float(_invert_rho(r))
    beta = float(np.sqrt(sigma2) * np.exp(0.5 * (gammaln(1 / alpha) - gammaln(3 / alpha))))
    return GgdFit(alpha=alpha, beta=beta, sigma2=float(sigma2))


def fit_aggd(samples):
    """Moment-matching AGGD fit returning shape, left/right variances and eta."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 16:
        raise DegenerateInputError(f"AGGD fit needs at least 16 samples, got {x.size}")
    left = x[x < 0]
    right = x[x > 0]
    if left.size == 0 or right.size == 0:
        raise DegenerateInputError("AGGD fit needs samples on both sides of zero")
    sigma_l2 = np.mean(left * left)
    sigma_r2 = np.mean(right * right)
    gamma_hat = np.sqrt(sigma_l2 / sigma_r2)
    r_hat = np.mean(np.abs(x)) ** 2 / np.mean(x * x)
    big_r = r_hat * (gamma_hat ** 3 + 1) * (gamma_hat + 1) / (gamma_hat ** 2 + 1) ** 2
    nu = float(_invert_rho(big_r))
    eta = _aggd_eta(nu, sigma_l2, sigma_r2)
    return AggdFit(nu=nu, sigma_l2=float(sigma_l2), sigma_r2=float(sigma_r2), eta=float(eta))


def _aggd_eta(nu, sigma_l2, sigma_r2):
    scale = np.exp(0.5 * (gammaln(1 / nu) - gammaln(3 / nu)))
    beta_l = np.sqrt(sigma_l2) * scale
    beta_r = np.sqrt(sigma_r2) * scale
    return (beta_r - beta_l) * np.exp(gammaln(2 / nu) - gammaln(1 / nu))


def excess_kurtosis(samples):
    """Population excess kurtosis ``E[(x-mu)^4] / sigma^4 - 3``."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 4:
        raise DegenerateInputError("kurtosis needs at least 4 samples")
    d = x - x.mean()
    m2 = np.mean(d * d)
    if m2 == 0:
        raise DegenerateInputError("kurtosis of zero-variance samples")
    return float(np.mean(d ** 4) / m2 ** 2 - 3.0)


# Names of the 18 per-block statistics, in output order.
BLOCK_FEATURE_NAMES = ("ggd_alpha", "ggd_sigma2") + tuple(
    f"{orient}_{stat}"
    for orient in ("h", "v", "d1", "d2")
    for stat in ("eta", "nu", "sigma_l2", "sigma_r2")
)


def block_features(m):
    """The 18 NSS statistics of one MSCN block.

    GGD (alpha, sigma2) of the coefficients, then for each of the H, V, D1,
    D2 neighbour products the AGGD (eta, nu, sigma_l2, sigma_r2). Raises
    :class:`DegenerateInputError` if any fit is impossible.
    """
    g = fit_ggd(m)
    out = [g.alpha, g.sigma2]
    for prod in pairwise_products(m):
        a = fit_aggd(prod)
        out.extend((a.eta, a.nu, a.sigma_l2, a.sigma_r2))
    return np.array(out)


def _batched_ggd(x):
    # x: (n, k) -> (alpha, sigma2), NaN where degenerate
    sigma2 = np.mean(x * x, axis=1)
    mean_abs = np.mean(np.abs(x), axis=1)
    ok = (np.ptp(x, axis=1) > 0) & (x.shape[1] >= 16)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = mean_abs ** 2 / sigma2
    alpha = np.where(ok, _invert_rho(np.where(ok, r, 0.5)), np.nan)
    return alpha, np.where(ok, sigma2, np.nan)


def _batched_aggd(x):
    # x: (n, k) -> (eta, nu, sigma_l2, sigma_r2), NaN where degenerate
    neg = x < 0
    pos = x > 0
    n_l = neg.sum(axis=1)
    n_r = pos.sum(axis=1)
    sq = x * x
    ok = (n_l > 0) & (n_r > 0) & (x.shape[1] >= 16)
    with np.errstate(invalid="ignore", divide="ignore"):
        sigma_l2 = np.where(neg, sq, 0.0).sum(axis=1) / n_l
        sigma_r2 = np.where(pos, sq, 0.0).sum(axis=1) / n_r
        gamma_hat = np.sqrt(sigma_l2 / sigma_r2)
        r_hat = np.mean(np.abs(x), axis=1) ** 2 / np.mean(sq, axis=1)
        big_r = r_hat * (gamma_hat ** 3 + 1) * (gamma_hat + 1) / (gamma_hat ** 2 + 1) ** 2
    nu = _invert_rho(np.where(ok, big_r, 0.5))
    eta = _aggd_eta(nu, np.where(ok, sigma_l2, 1.0), np.where(ok, sigma_r2, 1.0))
    nan = np.full(x.shape[0], np.nan)
    return (
        np.where(ok, eta, nan),
        np.where(ok, nu, nan),
        np.where(ok, sigma_l2, nan),
        np.where(ok, sigma_r2, nan),
    )


def batched_block_features(blocks):
    """Vectorized :func:`block_features` over a stack of equal-size blocks.

    ``blocks`` has shape (n, h, w). Returns an (n, 18) array with a row of
    NaN wherever any of the fits is degenerate.
    """
    blocks = np.asarray(blocks, dtype=np.float64)
    n = blocks.shape[0]
    products = (
        blocks[:, :, :-1] * blocks[:, :, 1:],
        blocks[:, :-1, :] * blocks[:, 1:, :],
        blocks[:, :-1, :-1] * blocks[:, 1:, 1:],
        blocks[:, :-1, 1:] * blocks[:, 1:, :-1],
    )
    cols = list(_batched_ggd(blocks.reshape(n, -1)))
    for prod in products:
        cols.extend(_batched_aggd(prod.reshape(n, -1)))
    feats = np.stack(cols, axis=1)
    feats[np.isnan(feats).any(axis=1)] = np.nan
    return feats
