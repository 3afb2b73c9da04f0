"""Sparsity-in-levels models, weights and robust-null-space constants.

A :class:`LevelModel` splits ``{0, ..., N-1}`` into ``r`` consecutive levels
with boundaries ``0 = M_0 < M_1 < ... < M_r = N``, local sparsities ``s_j`` and
one positive weight per level.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .numerics import make_rng, norm_l1w

__all__ = [
    "LevelModel",
    "RnsplConstants",
    "xi_zeta_kappa",
    "optimal_weights",
    "sigma_sM",
    "is_sM_sparse",
    "rnspl_perturbed_constants",
    "rnspl_perturbation_admissible",
    "theorem_constants",
    "theorem_lambda",
    "z_quantity",
    "rnspl_violation",
    "rnspl_falsify",
]


@dataclass(frozen=True)
class LevelModel:
    """Level boundaries, local sparsities and per-level weights.

    Parameters
    ----------
    M : sequence of int
        Strictly increasing boundaries ``M_1 < ... < M_r``.
    s : sequence of int
        Local sparsities with ``1 <= s_j <= M_j - M_{j-1}``.
    w : sequence of float, optional
        Positive per-level weights. Defaults to all ones.
    """

    M: tuple
    s: tuple
    w: tuple = None

    def __post_init__(self):
        M = tuple(int(v) for v in self.M)
        s = tuple(int(v) for v in self.s)
        w = (1.0,) * len(M) if self.w is None else tuple(float(v) for v in self.w)
        if len(M) == 0:
            raise ValueError("at least one level is required")
        if len(s) != len(M) or len(w) != len(M):
            raise ValueError("M, s and w must have the same length")
        prev = 0
        for j, Mj in enumerate(M):
            if Mj <= prev:
                raise ValueError("level boundaries must be strictly increasing and positive")
            if not 1 <= s[j] <= Mj - prev:
                raise ValueError(f"local sparsity s_{j + 1}={s[j]} must lie in [1, {Mj - prev}]")
            prev = Mj
        if any(not (v > 0 and math.isfinite(v)) for v in w):
            raise ValueError("weights must be positive and finite")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "w", w)

    @property
    def r(self) -> int:
        return len(self.M)

    @property
    def N(self) -> int:
        return self.M[-1]

    @property
    def level_sizes(self) -> tuple:
        bounds = (0,) + self.M
        return tuple(bounds[j + 1] - bounds[j] for j in range(self.r))

    @property
    def total_sparsity(self) -> int:
        return sum(self.s)

    def level_slices(self) -> list:
        bounds = (0,) + self.M
        return [slice(bounds[j], bounds[j + 1]) for j in range(self.r)]

    def weight_vector(self) -> np.ndarray:
        """Weights expanded to one entry per coordinate."""
        return np.repeat(np.asarray(self.w, dtype=float), self.level_sizes)

    def with_weights(self, w) -> "LevelModel":
        return LevelModel(self.M, self.s, tuple(w))

    def to_dict(self) -> dict:
        return {"M": list(self.M), "s": list(self.s), "w": list(self.w)}

    @classmethod
    def from_dict(cls, d: dict) -> "LevelModel":
        return cls(tuple(d["M"]), tuple(d["s"]), None if d.get("w") is None else tuple(d["w"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "LevelModel":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class RnsplConstants:
    """Constants ``(rho, gamma)`` of the weighted robust null space property in levels."""

    rho: float
    gamma: float

    def __post_init__(self):
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")


def xi_zeta_kappa(lm: LevelModel) -> tuple:
    """Return ``(xi, zeta, kappa)``.

    ``xi = sum_k w_k**2 s_k``, ``zeta = min_k w_k**2 s_k`` and ``kappa = xi / zeta``.
    """
    vals = [w * w * s for w, s in zip(lm.w, lm.s)]
    xi = float(sum(vals))
    zeta = float(min(vals))
    return xi, zeta, xi / zeta


def optimal_weights(M: Sequence[int], s: Sequence[int]) -> tuple:
    """Weights ``w_j = sqrt(s / s_j)`` with ``s = sum s_j``, which make ``kappa = r``."""
    s = [int(v) for v in s]
    if len(s) != len(M):
        raise ValueError("M and s must have the same length")
    if any(v < 1 for v in s):
        raise ValueError("local sparsities must be positive")
    total = float(sum(s))
    return tuple(math.sqrt(total / v) for v in s)


def _best_support(x: np.ndarray, lm: LevelModel) -> np.ndarray:
    """Boolean mask of the ``s_j`` largest-modulus entries inside each level."""
    mask = np.zeros(x.size, dtype=bool)
    mags = np.abs(x)
    for sl, sj in zip(lm.level_slices(), lm.s):
        seg = mags[sl]
        idx = np.argsort(-seg, kind="stable")[:sj]
        mask[sl.start + idx] = True
    return mask


def sigma_sM(x, lm: LevelModel) -> float:
    """Weighted l1 best ``(s, M)``-term approximation error.

    It is the weighted l1 norm of ``x`` outside the ``s_j`` largest entries
    of each level.
    """
    x = np.ravel(np.asarray(x))
    if x.size != lm.N:
        raise ValueError(f"vector length {x.size} does not match N={lm.N}")
    mask = _best_support(x, lm)
    return norm_l1w(np.where(mask, 0, x), lm.weight_vector())


def is_sM_sparse(x, lm: LevelModel, tol: Optional[float] = None) -> bool:
    """Whether each level of ``x`` has at most ``s_j`` entries above ``tol`` in modulus.

    The default ``tol`` is ``1e-12 * max |x_i|``.
    """
    x = np.ravel(np.asarray(x))
    if x.size != lm.N:
        raise ValueError(f"vector length {x.size} does not match N={lm.N}")
    if tol is None:
        tol = 1e-12 * float(np.abs(x).max()) if x.size else 0.0
    for sl, sj in zip(lm.level_slices(), lm.s):
        if np.count_nonzero(np.abs(x[sl]) > tol) > sj:
            return False
    return True


def rnspl_perturbation_admissible(c: RnsplConstants, lm: LevelModel, delta_A: float) -> bool:
    """Check ``delta_A < (1 - rho) / (gamma (1 + sqrt(xi) / min w))``."""
    xi, _, _ = xi_zeta_kappa(lm)
    bound = (1.0 - c.rho) / (c.gamma * (1.0 + math.sqrt(xi) / min(lm.w)))
    return 0 <= delta_A < bound


def rnspl_perturbed_constants(c: RnsplConstants, lm: LevelModel, delta_A: float) -> RnsplConstants:
    """Constants that survive a perturbation ``||A - A'|| <= delta_A``.

    ``rho' = (rho + gamma sqrt(xi) delta_A / min w) / (1 - gamma delta_A)`` and
    ``gamma' = gamma / (1 - gamma delta_A)``.

    Raises
    ------
    ValueError
        If ``delta_A`` is outside the admissible range.
    """
    if not rnspl_perturbation_admissible(c, lm, delta_A):
        raise ValueError("perturbation too large: the perturbed constants would not satisfy rho < 1")
    xi, _, _ = xi_zeta_kappa(lm)
    den = 1.0 - c.gamma * delta_A
    rho = (c.rho + c.gamma * math.sqrt(xi) * delta_A / min(lm.w)) / den
    return RnsplConstants(rho, c.gamma / den)


def theorem_constants(c: RnsplConstants, kappa: float) -> tuple:
    """Constants ``(C1, C2)`` of the recovery guarantee.

    ``C1 = ((1+rho)/2 + (3+rho) kappa**0.25 / 4) (3+rho)/(1-rho)`` and
    ``C2 = 2 ((3+rho)/(1-rho) + (7+rho)/(1-rho) kappa**0.25 / 2) gamma``.
    """
    rho, gamma = c.rho, c.gamma
    k4 = kappa**0.25
    C1 = ((1 + rho) / 2 + (3 + rho) * k4 / 4) * (3 + rho) / (1 - rho)
    C2 = 2 * ((3 + rho) / (1 - rho) + (7 + rho) / (1 - rho) * k4 / 2) * gamma
    return C1, C2


def theorem_lambda(c: RnsplConstants, lm: LevelModel) -> float:
    """Largest admissible regularisation parameter ``C1 / (C2 sqrt(xi))``."""
    xi, _, kappa = xi_zeta_kappa(lm)
    C1, C2 = theorem_constants(c, kappa)
    return C1 / (C2 * math.sqrt(xi))


def z_quantity(lm: LevelModel) -> float:
    """``Z = max(1, max_j w_j sqrt(M_j - M_{j-1}) / sqrt(xi))``."""
    xi, _, _ = xi_zeta_kappa(lm)
    vals = [w * math.sqrt(n) / math.sqrt(xi) for w, n in zip(lm.w, lm.level_sizes)]
    return max(1.0, max(vals))


def rnspl_violation(A: np.ndarray, x: np.ndarray, lm: LevelModel, c: RnsplConstants) -> float:
    """Largest violation of the rNSPL inequality at ``x`` over admissible supports.

    Positive means the inequality fails. The maximising support takes the
    ``s_j`` largest entries of each level.
    """
    x = np.ravel(x)
    xi, _, _ = xi_zeta_kappa(lm)
    mask = _best_support(x, lm)
    lhs = np.linalg.norm(x[mask])
    rhs = c.rho * norm_l1w(np.where(mask, 0, x), lm.weight_vector()) / math.sqrt(xi)
    rhs += c.gamma * np.linalg.norm(A @ x)
    return float(lhs - rhs)


def rnspl_falsify(
    apply_A: Callable[[np.ndarray], np.ndarray],
    lm: LevelModel,
    c: RnsplConstants,
    rng: Optional[np.random.Generator] = None,
    budget: int = 200,
    ascent_steps: int = 50,
) -> Optional[np.ndarray]:
    """Search for a vector that violates the rNSPL with constants ``c``.

    The map is materialised as a dense matrix (small ``N`` only). Candidates
    are right singular vectors, sparse random vectors and the result of
    normalised gradient ascent on the violation from random starts.

    Returns
    -------
    numpy.ndarray or None
        A witness with positive violation, or ``None`` when none was found.
        ``None`` is not a proof that the property holds.
    """
    N = lm.N
    if N > 64:
        raise ValueError("rnspl_falsify materialises the operator and is limited to N <= 64")
    rng = make_rng(0) if rng is None else rng
    A = np.column_stack([np.asarray(apply_A(e), dtype=np.complex128).ravel() for e in np.eye(N, dtype=np.complex128)])
    AhA = A.conj().T @ A
    xi, _, _ = xi_zeta_kappa(lm)
    wv = lm.weight_vector()

    def viol(x):
        return rnspl_violation(A, x, lm, c)

    _, _, Vh = np.linalg.svd(A, full_matrices=True)
    for v in Vh[::-1].conj():
        if viol(v) > 0:
            return v

    for trial in range(budget):
        x = np.zeros(N, dtype=np.complex128)
        for sl, sj in zip(lm.level_slices(), lm.s):
            idx = rng.choice(sl.stop - sl.start, size=sj, replace=False) + sl.start
            x[idx] = rng.standard_normal(sj) + 1j * rng.standard_normal(sj)
        if trial % 2:
            x += 0.1 * (rng.standard_normal(N) + 1j * rng.standard_normal(N))
        x /= np.linalg.norm(x)
        step = 0.1
        best = viol(x)
        for _ in range(ascent_steps):
            if best > 0:
                return x
            mask = _best_support(x, lm)
            g = np.zeros(N, dtype=np.complex128)
            nd = np.linalg.norm(x[mask])
            if nd > 0:
                g[mask] = x[mask] / nd
            off = ~mask & (np.abs(x) > 0)
            g[off] -= c.rho / math.sqrt(xi) * wv[off] * x[off] / np.abs(x[off])
            Ax = A @ x
            nA = np.linalg.norm(Ax)
            if nA > 0:
                g -= c.gamma * (AhA @ x) / nA
            g -= np.real(np.vdot(x, g)) * x
            gn = np.linalg.norm(g)
            if gn == 0:
                break
            cand = x + step * g / gn
            cand /= np.linalg.norm(cand)
            v = viol(cand)
            if v > best:
                x, best = cand, v
                step *= 1.2
            else:
                step *= 0.5
        if best > 0:
            return x
    return None
