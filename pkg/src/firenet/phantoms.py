"""Synthetic test images and level models derived from them."""
from __future__ import annotations

import math

import numpy as np

from .sparsity import LevelModel, optimal_weights
from .transforms import haar_dwt, haar_level_bounds

__all__ = ["shepp_logan", "test_image", "piecewise_constant", "haar_level_sparsity", "reference_level_model"]

# (intensity, semi-axis a, semi-axis b, centre x, centre y, angle in degrees)
_SHEPP_LOGAN = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
]


def _grid(K: int):
    t = (np.arange(K) + 0.5) / K * 2.0 - 1.0
    yy, xx = np.meshgrid(-t, t, indexing="ij")
    return xx, yy


def _ellipses(K: int, spec) -> np.ndarray:
    xx, yy = _grid(K)
    img = np.zeros((K, K))
    for val, a, b, x0, y0, ang in spec:
        th = math.radians(ang)
        c, s = math.cos(th), math.sin(th)
        u = (xx - x0) * c + (yy - y0) * s
        v = -(xx - x0) * s + (yy - y0) * c
        img[(u / a) ** 2 + (v / b) ** 2 <= 1.0] += val
    return img


def shepp_logan(K: int) -> np.ndarray:
    """Modified Shepp-Logan head phantom on a ``K x K`` grid (values in ``[0, 1]``)."""
    return _ellipses(K, _SHEPP_LOGAN)


def test_image(K: int) -> np.ndarray:
    """Piecewise smooth image with edges, a smooth ramp and small details.

    It is compressible but not exactly sparse in the Haar basis, so
    reconstructions show a genuine model-mismatch floor.
    """
    xx, yy = _grid(K)
    img = 0.6 * shepp_logan(K)
    img += 0.15 * np.exp(-((xx - 0.3) ** 2 + (yy + 0.2) ** 2) / 0.08)
    img += 0.1 * (xx + 1.0) / 2.0 * (np.abs(xx) < 0.9) * (np.abs(yy) < 0.9)
    img += 0.2 * ((np.abs(xx + 0.55) < 0.06) & (np.abs(yy - 0.55) < 0.2))
    img += 0.1 * (((xx - 0.5) ** 2 + (yy - 0.55) ** 2) < 0.01)
    return img


def piecewise_constant(N: int, jumps: int = 8, seed=None) -> np.ndarray:
    """Random piecewise-constant 1-D signal of length ``N``."""
    rng = np.random.default_rng(seed)
    cuts = np.sort(rng.choice(np.arange(1, N), size=min(jumps, N - 1), replace=False))
    vals = rng.standard_normal(cuts.size + 1)
    return np.repeat(vals, np.diff(np.concatenate(([0], cuts, [N]))))


def haar_level_sparsity(x, r: int, tol: float = 1e-10) -> tuple:
    """Number of Haar coefficients per level whose modulus exceeds ``tol * max``."""
    c = haar_dwt(np.asarray(x), r)
    bounds = (0,) + haar_level_bounds(r, np.ndim(x))
    thr = tol * np.abs(c).max()
    return tuple(max(1, int(np.count_nonzero(np.abs(c[bounds[j] : bounds[j + 1]]) > thr))) for j in range(r))


def reference_level_model(r: int, d: int = 2) -> LevelModel:
    """Level model with the Haar sparsity of the Shepp-Logan phantom and optimal weights.

    For ``d = 1`` the middle row of the phantom is used.
    """
    K = 2**r
    img = shepp_logan(K)
    if d == 1:
        img = img[K // 2]
    elif d != 2:
        raise ValueError("d must be 1 or 2")
    s = haar_level_sparsity(img, r)
    M = haar_level_bounds(r, d)
    return LevelModel(M, s, optimal_weights(M, s))
