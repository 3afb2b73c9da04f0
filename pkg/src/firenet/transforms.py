"""Unitary transforms on power-of-two grids.

* ``dft_forward`` / ``dft_inverse``: d-dimensional DFT with centred frequencies
  ``omega in {-K/2+1, ..., K/2}`` along each axis, sign convention
  ``exp(+2 pi i omega . t / K)`` and normalisation ``N**-0.5``. Output index
  ``i`` along an axis holds frequency ``i - K/2 + 1``.
* ``wht_forward``: d-dimensional Walsh-Hadamard transform in sequency order
  (row ``omega`` has ``omega`` sign changes). It is real, symmetric and
  self-inverse.
* ``haar_dwt`` / ``haar_idwt``: orthonormal separable Haar transform with
  coefficients laid out level by level (coarse first). Level 1 holds the
  ``2**d`` functions at scale 0 (scaling function included). Level ``j >= 2``
  holds the ``(2**d - 1) * 2**((j-1) d)`` wavelets at scale ``j - 1``. Inside a
  level the tensor type ``q`` runs lexicographically on the outside and the
  translation ``p`` row-major on the inside.
* ``dct_orthonormal``: 1-D orthonormal DCT-II.
"""
from __future__ import annotations

import itertools

import numpy as np
import scipy.fft

from .numerics import as_complex_tensor

__all__ = [
    "fourier_frequencies",
    "walsh_frequencies",
    "dft_forward",
    "dft_inverse",
    "sequency_to_natural",
    "wht_forward",
    "wht_inverse",
    "haar_level_sizes",
    "haar_level_bounds",
    "haar_dwt",
    "haar_idwt",
    "dct_orthonormal",
]


def _log2(n: int) -> int:
    return int(n).bit_length() - 1


def fourier_frequencies(K: int) -> np.ndarray:
    """Centred frequencies ``-K/2+1, ..., K/2`` in storage order."""
    if K < 2:
        return np.zeros(1, dtype=int)
    return np.arange(-K // 2 + 1, K // 2 + 1)


def walsh_frequencies(K: int) -> np.ndarray:
    return np.arange(K)


def _centre_shift(K: int) -> int:
    return K // 2 - 1 if K >= 2 else 0


def dft_forward(x) -> np.ndarray:
    """Unitary DFT with centred frequency ordering.

    ``[F x](omega) = N**-0.5 * sum_t x(t) exp(2 pi i omega . t / K)``.
    """
    x = as_complex_tensor(x)
    X = np.fft.ifftn(x, norm="ortho")
    shifts = tuple(_centre_shift(K) for K in x.shape)
    return np.roll(X, shifts, axis=tuple(range(x.ndim)))


def dft_inverse(X) -> np.ndarray:
    """Inverse of :func:`dft_forward`."""
    X = as_complex_tensor(X)
    shifts = tuple(-_centre_shift(K) for K in X.shape)
    return np.fft.fftn(np.roll(X, shifts, axis=tuple(range(X.ndim))), norm="ortho")


def sequency_to_natural(K: int) -> np.ndarray:
    """Map a sequency index to the natural (Sylvester) Hadamard row index.

    Bit ``r - j`` of the result is ``omega^(j) xor omega^(j+1)`` where
    ``omega^(j)`` is the ``j``-th least significant bit of ``omega``. This is
    the bit reversal of the Gray code of ``omega``.
    """
    r = _log2(K)
    omega = np.arange(K)
    gray = omega ^ (omega >> 1)
    out = np.zeros(K, dtype=np.int64)
    for b in range(r):
        out |= ((gray >> b) & 1) << (r - 1 - b)
    return out


def _fwht_axis(a: np.ndarray, axis: int) -> np.ndarray:
    a = np.moveaxis(a, axis, -1).copy()
    K = a.shape[-1]
    lead = a.shape[:-1]
    h = 1
    while h < K:
        v = a.reshape(lead + (K // (2 * h), 2, h))
        top = v[..., 0, :] + v[..., 1, :]
        bot = v[..., 0, :] - v[..., 1, :]
        a = np.stack((top, bot), axis=-2).reshape(lead + (K,))
        h *= 2
    a = a[..., sequency_to_natural(K)] / np.sqrt(K)
    return np.moveaxis(a, -1, axis)


def wht_forward(x) -> np.ndarray:
    """Orthonormal Walsh-Hadamard transform in sequency order."""
    x = as_complex_tensor(x)
    out = x
    for ax in range(x.ndim):
        out = _fwht_axis(out, ax)
    return out


def wht_inverse(X) -> np.ndarray:
    """The sequency-ordered transform is its own inverse."""
    return wht_forward(X)


def haar_level_sizes(r: int, d: int = 1) -> list:
    """Sizes of the coefficient levels ``C_1, ..., C_r``."""
    if r < 1:
        raise ValueError("r must be at least 1")
    sizes = [2**d]
    for j in range(2, r + 1):
        sizes.append((2**d - 1) * 2 ** ((j - 1) * d))
    return sizes


def haar_level_bounds(r: int, d: int = 1) -> tuple:
    """Cumulative level boundaries ``(M_1, ..., M_r)`` with ``M_r = 2**(r d)``."""
    return tuple(int(v) for v in np.cumsum(haar_level_sizes(r, d)))


def _split(a: np.ndarray, axis: int):
    a = np.moveaxis(a, axis, 0)
    lo = (a[0::2] + a[1::2]) / np.sqrt(2.0)
    hi = (a[0::2] - a[1::2]) / np.sqrt(2.0)
    return np.moveaxis(lo, 0, axis), np.moveaxis(hi, 0, axis)


def _merge(lo: np.ndarray, hi: np.ndarray, axis: int) -> np.ndarray:
    lo = np.moveaxis(lo, axis, 0)
    hi = np.moveaxis(hi, axis, 0)
    out = np.empty((2 * lo.shape[0],) + lo.shape[1:], dtype=np.result_type(lo, hi))
    out[0::2] = (lo + hi) / np.sqrt(2.0)
    out[1::2] = (lo - hi) / np.sqrt(2.0)
    return np.moveaxis(out, 0, axis)


def _subbands(a: np.ndarray) -> dict:
    bands = {(): a}
    for ax in range(a.ndim):
        nxt = {}
        for q, arr in bands.items():
            lo, hi = _split(arr, ax)
            nxt[q + (0,)] = lo
            nxt[q + (1,)] = hi
        bands = nxt
    return bands


def _unsubbands(bands: dict, d: int) -> np.ndarray:
    for ax in reversed(range(d)):
        nxt = {}
        for q in itertools.product((0, 1), repeat=ax):
            nxt[q] = _merge(bands[q + (0,)], bands[q + (1,)], ax)
        bands = nxt
    return bands[()]


def _check_cube(x: np.ndarray, r: int) -> None:
    K = 2**r
    if any(n != K for n in x.shape):
        raise ValueError(f"expected every axis to have length 2**r = {K}, got shape {x.shape}")


def haar_dwt(x, r: int) -> np.ndarray:
    """Forward Haar transform of a ``(2**r,)*d`` tensor.

    Returns
    -------
    numpy.ndarray, shape (2**(r d),)
        Coefficients in level order.
    """
    if r < 1:
        raise ValueError("r must be at least 1")
    x = as_complex_tensor(x)
    _check_cube(x, r)
    d = x.ndim
    nonzero_q = [q for q in itertools.product((0, 1), repeat=d) if any(q)]
    blocks = []
    a = x
    for lev in range(r, 1, -1):
        bands = _subbands(a)
        blocks.append(np.concatenate([bands[q].ravel() for q in nonzero_q]))
        a = bands[(0,) * d]
    bands = _subbands(a)
    blocks.append(np.concatenate([bands[q].ravel() for q in itertools.product((0, 1), repeat=d)]))
    return np.concatenate(blocks[::-1])


def haar_idwt(c, r: int, d: int = 1) -> np.ndarray:
    """Inverse of :func:`haar_dwt`; returns a ``(2**r,)*d`` tensor."""
    if r < 1:
        raise ValueError("r must be at least 1")
    c = np.asarray(c, dtype=np.complex128).ravel()
    N = 2 ** (r * d)
    if c.size != N:
        raise ValueError(f"expected {N} coefficients for r={r}, d={d}, got {c.size}")
    all_q = list(itertools.product((0, 1), repeat=d))
    nonzero_q = all_q[1:]
    pos = 2**d
    bands = {q: c[i : i + 1].reshape((1,) * d) for i, q in enumerate(all_q)}
    a = _unsubbands(bands, d)
    for lev in range(2, r + 1):
        side = 2 ** (lev - 1)
        size = side**d
        bands = {(0,) * d: a}
        for q in nonzero_q:
            bands[q] = c[pos : pos + size].reshape((side,) * d)
            pos += size
        a = _unsubbands(bands, d)
    return a


def dct_orthonormal(x, inverse: bool = False) -> np.ndarray:
    """Orthonormal DCT-II (or its inverse) of a 1-D vector."""
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 1:
        raise ValueError("dct_orthonormal expects a 1-D vector")
    if inverse:
        return scipy.fft.idct(x, type=2, norm="ortho")
    return scipy.fft.dct(x, type=2, norm="ortho")
