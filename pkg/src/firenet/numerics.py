"""Shared numerical primitives.

Complex tensors are plain ``numpy.ndarray`` objects of dtype ``complex128``
with every axis a power of two, stored row-major. Randomness always flows
through an explicitly seeded ``numpy.random.Generator`` (PCG64).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "make_rng",
    "is_power_of_two",
    "as_complex_tensor",
    "norm_l2",
    "norm_l1w",
    "inner",
    "NormEstimate",
    "operator_norm",
    "MatrixOperator",
]


def make_rng(seed: Optional[int]) -> np.random.Generator:
    """Return a PCG64 generator. ``None`` draws fresh entropy."""
    return np.random.Generator(np.random.PCG64(seed))


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def as_complex_tensor(x, name: str = "x") -> np.ndarray:
    """Cast to ``complex128`` and check that every axis length is a power of two.

    Raises
    ------
    ValueError
        If some axis length is not a power of two.
    """
    arr = np.asarray(x, dtype=np.complex128)
    if arr.ndim == 0:
        raise ValueError(f"{name} must have at least one axis")
    for n in arr.shape:
        if not is_power_of_two(int(n)):
            raise ValueError(f"{name} has axis of length {n}, which is not a power of two")
    return arr


def norm_l2(x) -> float:
    """Euclidean norm of the flattened array."""
    return float(np.linalg.norm(np.ravel(x)))


def norm_l1w(x, w=None) -> float:
    """Weighted l1 norm ``sum_j w_j |x_j|``.

    Parameters
    ----------
    x : array_like
        Vector (flattened if multi-dimensional).
    w : array_like or None
        Positive weights of the same size as ``x``. ``None`` means unit weights.
    """
    x = np.ravel(x)
    if w is None:
        return float(np.sum(np.abs(x)))
    w = np.ravel(np.asarray(w, dtype=float))
    if w.shape != x.shape:
        raise ValueError(f"weight length {w.size} does not match vector length {x.size}")
    if np.any(w <= 0):
        raise ValueError("weights must be strictly positive")
    return float(np.sum(w * np.abs(x)))


def inner(a, b) -> complex:
    """Inner product conjugate-linear in the first argument."""
    return complex(np.vdot(np.ravel(a), np.ravel(b)))


@dataclass(frozen=True)
class NormEstimate:
    """Result of a power iteration.

    Attributes
    ----------
    value : float
        Estimate of the largest singular value.
    converged : bool
        Whether the relative change fell below the tolerance.
    iterations : int
        Number of iterations performed.
    tol : float
        Tolerance used.
    """

    value: float
    converged: bool
    iterations: int
    tol: float

    @property
    def safe_bound(self) -> float:
        """An upper bound to use in step-size conditions.

        Power iteration approaches the norm from below, so the estimate is
        inflated by ``1 + tol`` after convergence and by 5% otherwise.
        """
        if self.converged:
            return self.value * (1.0 + max(self.tol, 1e-12))
        return self.value * 1.05

    def __float__(self) -> float:
        return self.value


def operator_norm(
    apply: Callable[[np.ndarray], np.ndarray],
    apply_adj: Callable[[np.ndarray], np.ndarray],
    domain_shape: Sequence[int],
    range_shape: Optional[Sequence[int]] = None,
    tol: float = 1e-10,
    max_iters: int = 1000,
    rng: Optional[np.random.Generator] = None,
) -> NormEstimate:
    """Estimate the spectral norm of a linear map by power iteration on ``A* A``.

    Parameters
    ----------
    apply, apply_adj : callable
        The map and its adjoint.
    domain_shape : tuple of int
        Shape of the input of ``apply``.
    range_shape : tuple of int, optional
        Expected output shape of ``apply``; checked when given.
    tol : float
        Relative change at which the iteration stops.
    max_iters : int
        Iteration cap.
    rng : numpy.random.Generator, optional
        Source of the random start vector. Defaults to seed 0.

    Returns
    -------
    NormEstimate
    """
    domain_shape = tuple(int(n) for n in domain_shape)
    rng = make_rng(0) if rng is None else rng
    v = rng.standard_normal(domain_shape) + 1j * rng.standard_normal(domain_shape)
    v /= np.linalg.norm(v)
    Av = np.asarray(apply(v))
    if range_shape is not None and Av.shape != tuple(range_shape):
        raise ValueError(f"operator output shape {Av.shape} does not match expected {tuple(range_shape)}")
    back = np.asarray(apply_adj(Av))
    if back.shape != domain_shape:
        raise ValueError(f"adjoint output shape {back.shape} does not match domain shape {domain_shape}")

    est = np.linalg.norm(Av)
    for it in range(1, max_iters + 1):
        nb = np.linalg.norm(back)
        if nb == 0.0:
            return NormEstimate(0.0, True, it, tol)
        v = back / nb
        Av = apply(v)
        new = float(np.linalg.norm(Av))
        back = apply_adj(Av)
        if abs(new - est) <= tol * new:
            return NormEstimate(new, True, it, tol)
        est = new
    return NormEstimate(float(est), False, max_iters, tol)


class MatrixOperator:
    """Dense matrix wrapped in the operator interface used by the solvers.

    Parameters
    ----------
    matrix : array_like, shape (m, N)
    """

    def __init__(self, matrix):
        self.matrix = np.asarray(matrix, dtype=np.complex128)
        if self.matrix.ndim != 2:
            raise ValueError("matrix must be two-dimensional")
        self._norm: Optional[NormEstimate] = None

    @property
    def domain_shape(self):
        return (self.matrix.shape[1],)

    @property
    def range_shape(self):
        return (self.matrix.shape[0],)

    def forward(self, x):
        return self.matrix @ np.asarray(x).reshape(-1)

    def adjoint(self, y):
        return self.matrix.conj().T @ np.asarray(y).reshape(-1)

    def norm(self) -> NormEstimate:
        """Exact spectral norm from the SVD."""
        if self._norm is None:
            val = float(np.linalg.norm(self.matrix, 2)) if self.matrix.size else 0.0
            self._norm = NormEstimate(val, True, 0, 0.0)
        return self._norm
