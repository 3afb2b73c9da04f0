"""FIRENET: restarted primal-dual iterations for the weighted square-root LASSO.

The target problem is

    minimise  F3(x) = lam * ||x||_{l1,w} + ||A x - y||_2 .

``inner_iterations`` runs ``p`` primal-dual steps from ``(x0, 0)`` and returns
their ergodic average. ``firenet_reconstruct`` chains ``n`` such runs. Before
run ``k`` the data and the warm start are divided by ``p * beta_k``, and the
output is multiplied back, where ``beta_k = eps_k / (2 ||A||)`` and
``eps_k = upsilon * (delta + eps_{k-1})``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional

import numpy as np

from .numerics import NormEstimate, norm_l1w, norm_l2, operator_norm

__all__ = [
    "SolverConfig",
    "TraceRecord",
    "ConvergenceTrace",
    "InnerResult",
    "prox_shrink",
    "prox_l1w",
    "project_ball",
    "objective_f3",
    "inner_iterations",
    "firenet_reconstruct",
    "firenet_no_restart",
    "epsilon_schedule",
    "layer_count",
    "reference_solution",
    "default_step",
]


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of a FIRENET solve.

    Parameters
    ----------
    lam : float
        Regularisation weight.
    tau, sigma : float or None
        Primal and dual step sizes. ``None`` picks ``0.99 / ||A||`` for both.
    p : int
        Inner iterations per restart.
    n : int
        Number of restarts.
    delta : float
        Target accuracy entering the restart schedule.
    eps0 : float or None
        Initial error guess; ``None`` means ``||y||_2``.
    upsilon : float
        Restart contraction factor in ``(0, 1)``.
    w : array_like or None
        Positive weights (one per unknown); ``None`` means unit weights.
    """

    lam: float = 1e-3
    tau: Optional[float] = None
    sigma: Optional[float] = None
    p: int = 5
    n: int = 10
    delta: float = 1e-9
    eps0: Optional[float] = None
    upsilon: float = math.exp(-1.0)
    w: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        for name in ("tau", "sigma"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive")
        if int(self.p) < 1:
            raise ValueError("p must be at least 1")
        if int(self.n) < 0:
            raise ValueError("n must be non-negative")
        if not self.delta >= 0:
            raise ValueError("delta must be non-negative")
        if self.eps0 is not None and not self.eps0 > 0:
            raise ValueError("eps0 must be positive")
        if not 0 < self.upsilon < 1:
            raise ValueError("upsilon must lie in (0, 1)")
        if self.w is not None:
            w = np.asarray(self.w, dtype=float)
            if np.any(w <= 0) or not np.all(np.isfinite(w)):
                raise ValueError("weights must be positive and finite")
            object.__setattr__(self, "w", w)

    def with_(self, **kw) -> "SolverConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class TraceRecord:
    restart: int
    inner: int
    objective: float
    l2_error: Optional[float]
    eps: float
    beta: float


@dataclass
class ConvergenceTrace:
    """Per-iteration diagnostics of a FIRENET solve.

    ``objective`` is ``F3`` of the running ergodic average after ``inner``
    steps of restart ``restart``, mapped back to the original scale. At
    ``inner == p`` this is the restart output.
    """

    records: List[TraceRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.records])

    def errors(self) -> np.ndarray:
        return np.array([np.nan if r.l2_error is None else r.l2_error for r in self.records])

    def restart_outputs(self) -> List[TraceRecord]:
        """The last record of each restart."""
        last = {}
        for rec in self.records:
            last[rec.restart] = rec
        return [last[k] for k in sorted(last)]

    def to_rows(self, f_star: Optional[float] = None) -> list:
        rows = []
        for rec in self.records:
            gap = "" if f_star is None else repr(rec.objective - f_star)
            err = "" if rec.l2_error is None else repr(rec.l2_error)
            rows.append([rec.restart, rec.inner, repr(rec.objective), gap, err, repr(rec.eps), repr(rec.beta)])
        return rows

    def to_csv(self, path, f_star: Optional[float] = None) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["restart", "inner", "objective", "objective_gap", "l2_error_to_ref", "epsilon_k", "beta_k"])
            wr.writerows(self.to_rows(f_star))


@dataclass
class InnerResult:
    average: np.ndarray
    last: np.ndarray
    dual: np.ndarray


def prox_shrink(x, beta: float) -> np.ndarray:
    """Complex soft threshold ``max(0, 1 - beta / |x_j|) x_j`` with ``0 -> 0``.

    ``beta`` may be a scalar or an array broadcastable to ``x``.
    """
    x = np.asarray(x)
    beta = np.asarray(beta, dtype=float)
    if np.any(beta < 0):
        raise ValueError("threshold must be non-negative")
    mag = np.abs(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(mag > beta, 1.0 - beta / np.where(mag > 0, mag, 1.0), 0.0)
    return factor * x


def prox_l1w(x, tau_lambda: float, w=None) -> np.ndarray:
    """Proximal map of ``z -> tau_lambda ||z||_{l1,w}``.

    Equals ``B shrink(B^{-1} x, tau_lambda)`` with ``B = diag(w)``, which is a
    soft threshold of ``x_j`` at level ``tau_lambda * w_j``.
    """
    x = np.asarray(x)
    if w is None:
        return prox_shrink(x, tau_lambda)
    w = np.asarray(w, dtype=float).reshape(x.shape)
    if np.any(w <= 0):
        raise ValueError("weights must be strictly positive")
    return prox_shrink(x, tau_lambda * w)


def project_ball(y) -> np.ndarray:
    """Radial projection onto the closed unit l2 ball."""
    y = np.asarray(y)
    nrm = np.linalg.norm(y.ravel())
    return y / nrm if nrm > 1.0 else y.copy()


def objective_f3(x, y, apply_A: Callable, lam: float, w=None) -> float:
    """``lam * ||x||_{l1,w} + ||A x - y||_2``."""
    Ax = np.asarray(apply_A(x))
    y = np.asarray(y)
    if Ax.shape != y.shape:
        raise ValueError(f"A x has shape {Ax.shape} but y has shape {y.shape}")
    return lam * norm_l1w(x, w) + norm_l2(Ax - y)


def default_step(norm: float) -> float:
    """Step used for both ``tau`` and ``sigma`` when none is given."""
    return 0.99 / norm if norm > 0 else 1.0


def _resolve_norm(apply_A, apply_adj, x0, op_norm) -> float:
    if op_norm is None:
        est = operator_norm(apply_A, apply_adj, np.shape(x0), tol=1e-8)
        return est.safe_bound
    if isinstance(op_norm, NormEstimate):
        return op_norm.safe_bound
    return float(op_norm)


def inner_iterations(
    y,
    x0,
    apply_A: Callable,
    apply_adj: Callable,
    p: int,
    tau: float,
    sigma: float,
    lam: float,
    w=None,
    op_norm=None,
    callback: Optional[Callable[[int, np.ndarray, np.ndarray], None]] = None,
) -> InnerResult:
    """Run ``p`` primal-dual steps and return the ergodic average.

    Updates, starting from ``(x0, 0)``::

        x+ = prox_{tau lam ||.||_{l1,w}}(x - tau A* v)
        v+ = ball_projection(v + sigma A (2 x+ - x) - sigma y)

    Parameters
    ----------
    y : ndarray
        Data.
    x0 : ndarray
        Primal starting point.
    apply_A, apply_adj : callable
        Forward map and adjoint.
    p : int
        Number of steps.
    tau, sigma : float
        Step sizes with ``tau * sigma * ||A||**2 < 1``.
    lam : float
    w : ndarray, optional
    op_norm : float or NormEstimate, optional
        Bound on ``||A||``; estimated when omitted.
    callback : callable, optional
        Called as ``callback(i, running_average, A @ running_average)`` after step ``i``.

    Returns
    -------
    InnerResult
        Ergodic average of ``x^1 .. x^p``, last primal iterate and last dual iterate.
    """
    if int(p) < 1:
        raise ValueError("p must be at least 1")
    L = _resolve_norm(apply_A, apply_adj, x0, op_norm)
    if not tau * sigma * L * L < 1.0:
        raise ValueError(f"step sizes violate tau*sigma*||A||^2 < 1 (tau={tau}, sigma={sigma}, ||A||<={L})")
    y = np.asarray(y, dtype=np.complex128)
    x = np.array(x0, dtype=np.complex128)
    Ax = np.asarray(apply_A(x))
    v = np.zeros_like(y)
    thresh = tau * lam if w is None else tau * lam * np.asarray(w, dtype=float).reshape(x.shape)
    acc = np.zeros_like(x)
    acc_A = np.zeros_like(y)
    for i in range(1, int(p) + 1):
        x_new = prox_shrink(x - tau * np.asarray(apply_adj(v)), thresh)
        Ax_new = np.asarray(apply_A(x_new))
        v = project_ball(v + sigma * (2.0 * Ax_new - Ax) - sigma * y)
        if np.linalg.norm(v) > 1.0 + 1e-12:
            raise AssertionError("dual iterate left the unit ball")
        x, Ax = x_new, Ax_new
        acc += x
        acc_A += Ax
        if callback is not None:
            callback(i, acc / i, acc_A / i)
    return InnerResult(acc / int(p), x, v)


def epsilon_schedule(eps0: float, delta: float, upsilon: float, n: int) -> np.ndarray:
    """``eps_1 .. eps_n`` from ``eps_k = upsilon (delta + eps_{k-1})``."""
    out = np.empty(int(n))
    e = float(eps0)
    for k in range(int(n)):
        e = upsilon * (delta + e)
        out[k] = e
    return out


def _setup(y, op, cfg: SolverConfig):
    norm = op.norm()
    L = norm.safe_bound if isinstance(norm, NormEstimate) else float(norm)
    if not L > 0:
        raise ValueError("operator norm estimate failed")
    tau = default_step(L) if cfg.tau is None else cfg.tau
    sigma = default_step(L) if cfg.sigma is None else cfg.sigma
    if not tau * sigma * L * L < 1.0:
        raise ValueError(f"step sizes violate tau*sigma*||A||^2 < 1 (tau={tau}, sigma={sigma}, ||A||<={L})")
    return L, tau, sigma


def firenet_reconstruct(
    y,
    op,
    cfg: SolverConfig,
    x_init=None,
    reference=None,
    record_trace: bool = True,
):
    """Restarted FIRENET solve.

    Parameters
    ----------
    y : ndarray
        Measurements.
    op : object
        Provides ``forward``, ``adjoint``, ``norm()`` and ``domain_shape``.
    cfg : SolverConfig
    x_init : ndarray, optional
        Starting point of the first restart (default zero).
    reference : ndarray, optional
        Ground truth used to fill the l2 error column of the trace.
    record_trace : bool
        Set to ``False`` to skip per-iteration diagnostics.

    Returns
    -------
    x : ndarray
    trace : ConvergenceTrace
    """
    y = np.asarray(y, dtype=np.complex128)
    L, tau, sigma = _setup(y, op, cfg)
    w = None if cfg.w is None else np.asarray(cfg.w, dtype=float).reshape(op.domain_shape)
    x = np.zeros(op.domain_shape, dtype=np.complex128) if x_init is None else np.array(x_init, dtype=np.complex128)
    if x.shape != tuple(op.domain_shape):
        raise ValueError(f"x_init shape {x.shape} does not match operator domain {tuple(op.domain_shape)}")
    eps = norm_l2(y) if cfg.eps0 is None else float(cfg.eps0)
    trace = ConvergenceTrace()
    ref = None if reference is None else np.asarray(reference)
    for k in range(1, int(cfg.n) + 1):
        eps = cfg.upsilon * (cfg.delta + eps)
        beta = eps / (2.0 * L)
        s = cfg.p * beta
        if s == 0.0:
            break
        cb = None
        if record_trace:
            def cb(i, avg, A_avg, k=k, s=s, eps=eps, beta=beta):
                xi = s * avg
                obj = cfg.lam * norm_l1w(xi, w) + norm_l2(s * A_avg - y)
                err = None if ref is None else norm_l2(xi - ref)
                trace.records.append(TraceRecord(k, i, obj, err, eps, beta))
        res = inner_iterations(y / s, x / s, op.forward, op.adjoint, cfg.p, tau, sigma, cfg.lam, w, op_norm=L, callback=cb)
        x = s * res.average
    return x, trace


def firenet_no_restart(y, x0, op, n_total: int, beta: Optional[float] = None, cfg: Optional[SolverConfig] = None):
    """Single rescaled inner run of ``n_total`` steps.

    The data and start are divided by ``beta`` (default ``||y|| / ||A||``) and
    the ergodic average is multiplied back, which gives the ``O(1 / n_total)``
    behaviour. The same output is produced by :func:`firenet_reconstruct` with
    one restart of ``p = n_total`` steps and ``beta_1 = beta / n_total``.
    """
    cfg = SolverConfig() if cfg is None else cfg
    if int(n_total) < 1:
        raise ValueError("n_total must be at least 1")
    y = np.asarray(y, dtype=np.complex128)
    L, tau, sigma = _setup(y, op, cfg)
    if beta is None:
        beta = norm_l2(y) / L
    x0 = np.zeros(op.domain_shape, dtype=np.complex128) if x0 is None else np.asarray(x0, dtype=np.complex128)
    if beta == 0.0:
        return x0.copy()
    if not beta > 0:
        raise ValueError("beta must be positive")
    w = None if cfg.w is None else np.asarray(cfg.w, dtype=float).reshape(op.domain_shape)
    res = inner_iterations(y / beta, x0 / beta, op.forward, op.adjoint, n_total, tau, sigma, cfg.lam, w, op_norm=L)
    return beta * res.average


def layer_count(delta: float, Z: float, kappa: float) -> int:
    """Number of restarts ``ceil(log(Z / delta) kappa**0.25 Z)`` that reach accuracy ``delta``."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if Z < 1 or kappa < 1:
        raise ValueError("Z and kappa must be at least 1")
    val = math.log(Z / delta) * kappa**0.25 * Z
    return max(1, math.ceil(val - 1e-9 * max(1.0, val)))


def reference_solution(y, op, cfg: SolverConfig, restarts: int = 60, p: Optional[int] = None, no_restart_iters: int = 0):
    """High-accuracy minimiser used for objective gaps.

    A long restarted run with ``delta = 0`` is made. When ``no_restart_iters``
    is positive, a long non-restarted run is made too. The one with the lower
    objective is kept.

    Returns
    -------
    (x_star, f_star)
    """
    p = max(cfg.p, 20) if p is None else p
    w = None if cfg.w is None else np.asarray(cfg.w, dtype=float).reshape(op.domain_shape)
    long_cfg = cfg.with_(n=restarts, p=p, delta=0.0)
    x1, _ = firenet_reconstruct(y, op, long_cfg, record_trace=False)
    best = (x1, objective_f3(x1, y, op.forward, cfg.lam, w))
    if no_restart_iters > 0:
        x2 = firenet_no_restart(y, best[0], op, no_restart_iters, beta=None, cfg=cfg)
        f2 = objective_f3(x2, y, op.forward, cfg.lam, w)
        if f2 < best[1]:
            best = (x2, f2)
    return best
