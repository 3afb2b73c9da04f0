"""Closed-form minimiser sets of one-row problems and the accuracy-barrier experiment.

For a row ``A = c * (w_1 / rho_1, ..., w_N / rho_N)`` and data ``y = 1`` the
minimisers of basis pursuit, LASSO and square-root LASSO (weighted l1
penalty, weights ``w``) are simplices spanned by scaled coordinate vectors on
the indices where ``rho`` is smallest:

* basis pursuit (``c = 1``, constraint ``|A x - 1| <= eps``): ``(1 - eps) rho_j / w_j e_j``,
* LASSO (``c = lam``, ``rho_j < 2``): ``(1 - min rho / 2) rho_j / (lam w_j) e_j``,
* square-root LASSO (``c = lam``, ``rho_j < 1``): ``rho_j / (lam w_j) e_j``.

The solution jumps from one vertex to another as soon as the smallest
``rho_j`` changes. :func:`build_omega_instance` embeds this jump into a
``19 x 20`` square-root LASSO problem whose two nearby data sets have
minimisers about ``3 * 10**-K`` apart, and :func:`breakdown_table` measures
how far FIRENET run on the perturbed data lands from the true minimiser.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .numerics import MatrixOperator, make_rng, norm_l1w
from .solver import SolverConfig, firenet_reconstruct
from .transforms import dct_orthonormal

__all__ = [
    "SolutionSet",
    "normal_form",
    "bp_solution_set",
    "lasso_solution_set",
    "sqrt_lasso_solution_set",
    "dist_to_solution_set",
    "OmegaInstance",
    "build_omega_instance",
    "BarrierRow",
    "breakdown_table",
    "write_table_csv",
    "DEFAULT_BARRIER_CONFIG",
    "TABLE_REFERENCE",
]

# Reference FIRENET distances for comparison (n = 10, 20, 30).
TABLE_REFERENCE = {
    1: (0.2597827, 0.2598050, 0.2598052),
    3: (0.0025980, 0.0025980, 0.0025980),
    6: (0.0000015, 0.0000015, 0.0000015),
}


@dataclass
class SolutionSet:
    """Convex hull of a list of vertices.

    Attributes
    ----------
    vertices : list of ndarray
    objective : callable or None
        Objective of the problem the set solves, for certificates.
    description : str
    """

    vertices: list
    objective: Optional[Callable[[np.ndarray], float]] = field(default=None, repr=False)
    description: str = ""

    @property
    def dim(self) -> int:
        return int(np.asarray(self.vertices[0]).size)

    def vertex_matrix(self) -> np.ndarray:
        return np.column_stack([np.ravel(v) for v in self.vertices])


def _check_rho_w(rho, w):
    rho = np.asarray(rho, dtype=float).ravel()
    w = np.ones_like(rho) if w is None else np.asarray(w, dtype=float).ravel()
    if rho.size == 0:
        raise ValueError("rho must be non-empty")
    if w.shape != rho.shape:
        raise ValueError("rho and w must have the same length")
    if np.any(rho <= 0):
        raise ValueError("rho entries must be positive")
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    return rho, w


def normal_form(rho, w=None, lam: float = 1.0) -> tuple:
    """Row matrix ``lam * w / rho`` (shape ``(1, N)``) and data ``y = (1,)``.

    Use ``lam = 1`` for basis pursuit.
    """
    rho, w = _check_rho_w(rho, w)
    return (lam * w / rho).reshape(1, -1), np.ones(1)


def _vertices(rho, scale):
    idx = np.flatnonzero(rho == rho.min())
    out = []
    for j in idx:
        v = np.zeros(rho.size)
        v[j] = scale[j]
        out.append(v)
    return out


def bp_solution_set(rho, w=None, eps: float = 0.0) -> SolutionSet:
    """Minimisers of ``||x||_{l1,w}`` subject to ``|A x - 1| <= eps`` with ``A = w / rho``."""
    rho, w = _check_rho_w(rho, w)
    if not 0 <= eps < 1:
        raise ValueError("eps must lie in [0, 1)")
    A, y = normal_form(rho, w, 1.0)

    def obj(x):
        x = np.ravel(x)
        feasible = abs((A @ x)[0] - 1.0) <= eps + 1e-12
        return norm_l1w(x, w) if feasible else math.inf

    return SolutionSet(_vertices(rho, (1 - eps) * rho / w), obj, "basis pursuit")


def lasso_solution_set(rho, w=None, lam: float = 1.0) -> SolutionSet:
    """Minimisers of ``lam ||x||_{l1,w} + |A x - 1|**2`` with ``A = lam w / rho``."""
    rho, w = _check_rho_w(rho, w)
    if np.any(rho >= 2):
        raise ValueError("LASSO normal form requires rho_j < 2")
    if not lam > 0:
        raise ValueError("lam must be positive")
    A, y = normal_form(rho, w, lam)

    def obj(x):
        x = np.ravel(x)
        return lam * norm_l1w(x, w) + abs((A @ x)[0] - 1.0) ** 2

    scale = (1 - rho.min() / 2) * rho / (lam * w)
    return SolutionSet(_vertices(rho, scale), obj, "LASSO")


def sqrt_lasso_solution_set(rho, w=None, lam: float = 1.0) -> SolutionSet:
    """Minimisers of ``lam ||x||_{l1,w} + |A x - 1|`` with ``A = lam w / rho``."""
    rho, w = _check_rho_w(rho, w)
    if np.any(rho >= 1):
        raise ValueError("square-root LASSO normal form requires rho_j < 1")
    if not lam > 0:
        raise ValueError("lam must be positive")
    A, y = normal_form(rho, w, lam)

    def obj(x):
        x = np.ravel(x)
        return lam * norm_l1w(x, w) + abs((A @ x)[0] - 1.0)

    return SolutionSet(_vertices(rho, rho / (lam * w)), obj, "square-root LASSO")


def _project_simplex(v: np.ndarray) -> np.ndarray:
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1), 0.0)


def dist_to_solution_set(x, sset: SolutionSet, tol: float = 1e-14, max_iters: int = 20000) -> float:
    """Euclidean distance from ``x`` to the convex hull of the vertices.

    Points and segments are handled in closed form. Larger hulls use
    accelerated projected gradient on the barycentric coordinates.
    """
    if not sset.vertices:
        raise ValueError("empty solution set")
    x = np.ravel(np.asarray(x))
    V = sset.vertex_matrix()
    if V.shape[0] != x.size:
        raise ValueError(f"point has dimension {x.size}, set has dimension {V.shape[0]}")
    if V.shape[1] == 1:
        return float(np.linalg.norm(x - V[:, 0]))
    if V.shape[1] == 2:
        a, b = V[:, 0], V[:, 1]
        d = b - a
        dd = np.real(np.vdot(d, d))
        t = 0.0 if dd == 0 else float(np.clip(np.real(np.vdot(d, x - a)) / dd, 0.0, 1.0))
        return float(np.linalg.norm(x - (a + t * d)))
    G = np.real(V.conj().T @ V)
    h = np.real(V.conj().T @ x)
    Lip = max(np.linalg.eigvalsh(G).max(), 1e-300)
    t = np.full(V.shape[1], 1.0 / V.shape[1])
    z, k_prev = t.copy(), 1.0
    for _ in range(max_iters):
        t_new = _project_simplex(z - (G @ z - h) / Lip)
        k_new = (1 + math.sqrt(1 + 4 * k_prev * k_prev)) / 2
        z = t_new + (k_prev - 1) / k_new * (t_new - t)
        if np.linalg.norm(t_new - t) <= tol:
            t = t_new
            break
        t, k_prev = t_new, k_new
    return float(np.linalg.norm(x - V @ t))


@dataclass
class OmegaInstance:
    """A true problem ``(A_true, y_true)`` and its ``2**-n``-accurate approximation ``(A_n, y_n)``.

    ``x_true`` is the unique minimiser of the square-root LASSO with data
    ``(A_true, y_true)`` and weight ``lam``.
    """

    A_true: np.ndarray
    A_n: np.ndarray
    y_true: np.ndarray
    y_n: np.ndarray
    x_true: np.ndarray
    x_n: np.ndarray
    K: int
    n: int
    N1: int
    N2: int
    lam: float
    delta_geom: float
    gamma_K: float
    eps: float
    rho_true: np.ndarray
    rho_n: np.ndarray

    def solution_set(self) -> SolutionSet:
        return SolutionSet([self.x_true], None, "unique square-root LASSO minimiser")


def _omega_matrix(D: np.ndarray, gamma: float, rho: np.ndarray, N2: int) -> tuple:
    a = gamma / rho
    na = float(np.linalg.norm(a))
    block = np.zeros((N2 + 1, rho.size + N2))
    block[0, : rho.size] = a
    block[1:, rho.size :] = na * np.eye(N2)
    return D @ block, na


def build_omega_instance(
    K: int,
    n: int,
    N1: int = 2,
    N2: int = 18,
    lam: float = 1.0,
    sparsity: int = 5,
    seed: int = 0,
    sign: int = -1,
) -> OmegaInstance:
    """Construct the accuracy-barrier instance.

    The true matrix uses ``rho' = (1 - delta - eps, 1 - delta, ...)`` and the
    approximation ``rho# = (1 - delta, 1 - delta - eps, ...)`` with
    ``delta = 1/6``. ``eps`` is chosen so that ``||A_true - A_n||`` equals
    ``2**-(n+1)``; the data are identical. ``sign = +1`` perturbs upwards
    instead, which moves the true minimiser to the second coordinate.

    Parameters
    ----------
    K : int
        Number of correct digits that is out of reach.
    n : int
        Accuracy index; the approximation error is at most ``2**-n``.
    N1, N2 : int
        Sizes of the unstable and the well-conditioned blocks.
    lam : float
        Square-root LASSO weight in ``(0, 1]``.
    sparsity : int
        Number of nonzeros planted in the second block.
    seed : int
    sign : {-1, +1}
    """
    if K < 1 or n < 1:
        raise ValueError("K and n must be at least 1")
    if N1 < 2 or N2 < 1 or not 1 <= sparsity <= N2:
        raise ValueError("invalid block sizes")
    if not 0 < lam <= 1:
        raise ValueError("lam must lie in (0, 1]")
    if sign not in (-1, 1):
        raise ValueError("sign must be -1 or +1")
    delta = 1.0 / 6.0
    base = 1.0 - delta
    gamma = math.sqrt(2.0) / (3.0 * lam) * base * 10.0**K
    # Only the first row differs: gamma * t * (1, -1, 0, ...) with
    # t = |1/rho'_1 - 1/base|, so ||A_true - A_n|| = sqrt(2) * gamma * t.
    t = 2.0 ** (-n - 1) / (math.sqrt(2.0) * gamma)
    if sign < 0:
        eps = base - 1.0 / (1.0 / base + t)
    else:
        eps = 1.0 / (1.0 / base - t) - base
    rho_true = np.full(N1, base)
    rho_n = np.full(N1, base)
    rho_true[0] = base + sign * eps
    rho_n[1] = base + sign * eps
    D = np.column_stack([dct_orthonormal(e).real for e in np.eye(N2 + 1)])
    A_true, na = _omega_matrix(D, gamma, rho_true, N2)
    A_n, na_n = _omega_matrix(D, gamma, rho_n, N2)
    if abs(na - na_n) > 1e-12 * na:
        raise AssertionError("the two matrices must share ||a||")
    diff = float(np.linalg.norm(A_true - A_n, 2))
    if diff > 2.0**-n:
        raise AssertionError(f"perturbation {diff} exceeds 2**-n")
    rng = make_rng(seed)
    x2 = np.zeros(N2)
    supp = rng.choice(N2, size=sparsity, replace=False)
    x2[supp] = rng.standard_normal(sparsity)
    y = D @ np.concatenate(([1.0], na * x2))

    def minimiser(rho):
        x = np.zeros(N1 + N2)
        j = int(np.argmin(rho))
        x[j] = rho[j] / gamma
        x[N1:] = x2
        return x

    return OmegaInstance(
        A_true=A_true,
        A_n=A_n,
        y_true=y,
        y_n=y.copy(),
        x_true=minimiser(rho_true),
        x_n=minimiser(rho_n),
        K=K,
        n=n,
        N1=N1,
        N2=N2,
        lam=lam,
        delta_geom=delta,
        gamma_K=gamma,
        eps=eps,
        rho_true=rho_true,
        rho_n=rho_n,
    )


DEFAULT_BARRIER_CONFIG = SolverConfig(lam=1.0, p=200, n=60, delta=1e-14)


@dataclass(frozen=True)
class BarrierRow:
    K: int
    n: int
    dist: float
    lower_bound: float
    upper_bound: float

    @property
    def passed(self) -> bool:
        return self.lower_bound < self.dist <= self.upper_bound


def breakdown_table(
    K_list: Sequence[int] = (1, 3, 6),
    n_list: Sequence[int] = (10, 20, 30),
    solver_cfg: Optional[SolverConfig] = None,
    seed: int = 0,
) -> list:
    """Run FIRENET on ``(A_n, y_n)`` and measure the distance to the true minimiser set.

    Returns
    -------
    list of BarrierRow
    """
    cfg = DEFAULT_BARRIER_CONFIG if solver_cfg is None else solver_cfg
    rows = []
    for K in K_list:
        for n in n_list:
            inst = build_omega_instance(K, n, lam=cfg.lam, seed=seed)
            op = MatrixOperator(inst.A_n)
            x, _ = firenet_reconstruct(inst.y_n, op, cfg, record_trace=False)
            d = dist_to_solution_set(np.real_if_close(x, tol=1e6), inst.solution_set())
            rows.append(BarrierRow(K, n, d, 10.0**-K, 10.0 ** (-K + 1)))
    return rows


def write_table_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["K", "n", "dist", "lower_bound", "upper_bound", "pass"])
        for r in rows:
            wr.writerow([r.K, r.n, repr(r.dist), repr(r.lower_bound), repr(r.upper_bound), str(r.passed).lower()])
