"""Worst-case perturbation search against reconstruction maps.

The search maximises

    Q(r) = 0.5 * ||phi(y + A r) - x||**2 - 0.5 * lambda_pen * ||r||**2

by gradient ascent with momentum. Complex vectors are treated as pairs of
real coordinates, so every gradient below is the gradient with respect to
``(Re r, Im r)`` written back as a complex array. A reconstruction map is
any object with ``__call__(y)``; gradient mode ``"backprop"`` also needs a
``vjp(y, g)`` method returning the real adjoint of its Jacobian applied to
``g``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from .numerics import make_rng, norm_l2
from .solver import SolverConfig, _setup

__all__ = [
    "AttackConfig",
    "PerturbationReport",
    "FirenetMap",
    "LinearRecon",
    "unstable_least_squares",
    "q_value",
    "q_gradient",
    "perturbation_search",
    "FD_MAX_DIM",
]

FD_MAX_DIM = 256


@dataclass(frozen=True)
class AttackConfig:
    """Settings of the momentum ascent.

    Parameters
    ----------
    lambda_pen : float
        Penalty on ``||r||**2``.
    gamma_mom : float
        Momentum factor.
    eta : float or None
        Learning rate. ``None`` tunes it per instance by doubling and halving.
    steps, restarts : int
    seed : int or None
    gradient_mode : {"backprop", "finite_diff"}
    fd_step : float
    init_scale : float
        ``||r(0)|| = init_scale * ||x||``.
    target_ratio : float or None
        If set, ``r`` is rescaled after every step so that
        ``||A r|| = target_ratio * ||A x||``.
    domain : {"image", "measurement"}
        Where ``r`` lives. In the measurement domain ``A`` is the identity.
    allow_large_fd : bool
        Permit finite differences above ``FD_MAX_DIM`` real unknowns.
    """

    lambda_pen: float = 1e-3
    gamma_mom: float = 0.9
    eta: Optional[float] = None
    steps: int = 100
    restarts: int = 5
    seed: Optional[int] = 0
    gradient_mode: str = "backprop"
    fd_step: float = 1e-6
    init_scale: float = 0.01
    target_ratio: Optional[float] = None
    domain: str = "image"
    allow_large_fd: bool = False

    def __post_init__(self):
        if not self.lambda_pen > 0:
            raise ValueError("lambda_pen must be positive")
        if self.gamma_mom < 0:
            raise ValueError("gamma_mom must be non-negative")
        if self.eta is not None and not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.steps < 1 or self.restarts < 1:
            raise ValueError("steps and restarts must be at least 1")
        if self.gradient_mode not in ("backprop", "finite_diff"):
            raise ValueError("gradient_mode must be 'backprop' or 'finite_diff'")
        if not self.fd_step > 0:
            raise ValueError("fd_step must be positive")
        if not self.init_scale > 0:
            raise ValueError("init_scale must be positive")
        if self.target_ratio is not None and not self.target_ratio > 0:
            raise ValueError("target_ratio must be positive")
        if self.domain not in ("image", "measurement"):
            raise ValueError("domain must be 'image' or 'measurement'")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PerturbationReport:
    """Result of a perturbation search.

    ``norms`` holds ``(||r||, ||A r||, ||phi(y + A r) - phi(y)||, ||phi(y + A r) - x||)``.
    """

    r_star: np.ndarray
    Q_value: float
    norms: tuple
    trace: list
    baseline_error: float
    signal_norm: float
    eta: float
    restart: int
    config: dict = field(default_factory=dict)

    @property
    def lipschitz_ratio(self) -> float:
        """``||phi(y + A r) - phi(y)|| / ||A r||``."""
        return self.norms[2] / self.norms[1] if self.norms[1] > 0 else math.inf

    @property
    def damage(self) -> float:
        return self.norms[3]

    @property
    def error_increase(self) -> float:
        return self.norms[3] - self.baseline_error

    def to_dict(self) -> dict:
        return {
            "Q_value": self.Q_value,
            "norm_r": self.norms[0],
            "norm_Ar": self.norms[1],
            "recon_change": self.norms[2],
            "damage": self.norms[3],
            "baseline_error": self.baseline_error,
            "signal_norm": self.signal_norm,
            "lipschitz_ratio": self.lipschitz_ratio,
            "eta": self.eta,
            "restart": self.restart,
            "trace": [float(q) for q in self.trace],
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _shrink_vjp(z, theta, g):
    # Real adjoint of z -> max(0, 1 - theta/|z|) z; zero at and below the kink.
    mag = np.abs(z)
    active = mag > theta
    safe = np.where(active, mag, 1.0)
    zhat = z / safe
    radial = zhat * np.real(np.conj(zhat) * g)
    out = g - (theta / safe) * (g - radial)
    return np.where(active, out, 0.0)


def _ball_vjp(u, g):
    nu = np.linalg.norm(u)
    if nu <= 1.0:
        return g
    uhat = u / nu
    return (g - uhat * np.real(np.vdot(uhat, g))) / nu


class FirenetMap:
    """FIRENET as a differentiable map from measurements to reconstructions.

    The restart scales depend on ``eps0``, which is frozen at construction so
    that the map is a fixed function of ``y``. The derivative is taken
    through every unrolled step, using the almost-everywhere derivatives of
    the soft threshold and the ball projection.

    Parameters
    ----------
    op : object
        Coefficient-domain operator with ``forward``, ``adjoint``, ``norm()``
        and ``domain_shape``.
    cfg : SolverConfig
    eps0 : float
        Initial error guess, usually ``||y||`` of the unperturbed data.
    synthesis, analysis : callable, optional
        Map coefficients to the output domain and back (adjoint). For a
        :class:`~firenet.sampling.MeasurementOperator` on Haar coefficients
        the default maps to images.
    """

    def __init__(self, op, cfg: SolverConfig, eps0: float, synthesis=None, analysis=None):
        if not eps0 > 0:
            raise ValueError("eps0 must be positive")
        self.op = op
        self.cfg = cfg
        self.eps0 = float(eps0)
        self.L, self.tau, self.sigma = _setup(None, op, cfg)
        if synthesis is None and getattr(op, "domain", None) == "coeffs":
            from .transforms import haar_dwt, haar_idwt

            r, d = op.r, op.d
            synthesis = lambda c: haar_idwt(c, r, d)  # noqa: E731
            analysis = lambda x: haar_dwt(x, r)  # noqa: E731
        self.synthesis = synthesis
        self.analysis = analysis
        self.w = None if cfg.w is None else np.asarray(cfg.w, dtype=float).reshape(op.domain_shape)

    def scales(self) -> list:
        out, eps = [], self.eps0
        for _ in range(int(self.cfg.n)):
            eps = self.cfg.upsilon * (self.cfg.delta + eps)
            out.append(self.cfg.p * eps / (2.0 * self.L))
        return out

    def _run(self, y, tape=None):
        op, cfg = self.op, self.cfg
        tau, sigma = self.tau, self.sigma
        y = np.asarray(y, dtype=np.complex128)
        x = np.zeros(op.domain_shape, dtype=np.complex128)
        for s in self.scales():
            ys = y / s
            theta = tau * cfg.lam if self.w is None else tau * cfg.lam * self.w
            xi = x / s
            Ax = op.forward(xi)
            v = np.zeros_like(y)
            acc = np.zeros_like(x)
            steps = []
            for _ in range(int(cfg.p)):
                z = xi - tau * op.adjoint(v)
                mag = np.abs(z)
                x_new = np.where(mag > theta, 1.0 - theta / np.where(mag > 0, mag, 1.0), 0.0) * z
                Ax_new = op.forward(x_new)
                u = v + sigma * (2.0 * Ax_new - Ax) - sigma * ys
                nu = np.linalg.norm(u)
                v = u / nu if nu > 1.0 else u
                if tape is not None:
                    steps.append((z, u))
                xi, Ax = x_new, Ax_new
                acc += xi
            if tape is not None:
                tape.append((s, theta, steps))
            x = s * acc / cfg.p
        return x

    def coefficients(self, y) -> np.ndarray:
        return self._run(y)

    def __call__(self, y) -> np.ndarray:
        c = self._run(y)
        return c if self.synthesis is None else self.synthesis(c)

    def vjp(self, y, g) -> np.ndarray:
        """Real adjoint of the Jacobian at ``y`` applied to an output-domain vector ``g``."""
        op, cfg = self.op, self.cfg
        tau, sigma, p = self.tau, self.sigma, int(cfg.p)
        tape = []
        self._run(y, tape)
        g = np.asarray(g, dtype=np.complex128)
        gc = g if self.analysis is None else np.asarray(self.analysis(g), dtype=np.complex128)
        gy = np.zeros(np.shape(y), dtype=np.complex128)
        for s, theta, steps in reversed(tape):
            # x_out = s * mean(x_1..x_p): each x_i receives s/p * gc.
            share = (s / p) * gc
            gx = share.copy()
            gv = np.zeros_like(gy)
            gys = np.zeros_like(gy)
            for i in range(p - 1, -1, -1):
                z, u = steps[i]
                gu = _ball_vjp(u, gv)
                gx_tot = gx + 2.0 * sigma * op.adjoint(gu)
                gz = _shrink_vjp(z, theta, gx_tot)
                gys -= sigma * gu
                gv = gu - tau * op.forward(gz)
                gx = gz - sigma * op.adjoint(gu)
                if i > 0:
                    gx = gx + share
            gy += gys / s
            gc = gx / s
        return gy


class LinearRecon:
    """Linear reconstruction ``y -> B y``.

    Parameters
    ----------
    apply : callable or ndarray
        The map, or a dense matrix.
    apply_adj : callable, optional
        Its adjoint; required when ``apply`` is a callable.
    """

    def __init__(self, apply, apply_adj=None):
        if isinstance(apply, np.ndarray):
            B = apply
            self.matrix = B
            self._apply = lambda y: B @ y
            self._adj = lambda g: B.conj().T @ g
        else:
            if apply_adj is None:
                raise ValueError("an adjoint is required for a callable map")
            self.matrix = None
            self._apply, self._adj = apply, apply_adj

    def __call__(self, y):
        return self._apply(np.asarray(y, dtype=np.complex128))

    def vjp(self, y, g):
        return self._adj(np.asarray(g, dtype=np.complex128))


def _dense(op) -> np.ndarray:
    if hasattr(op, "dense"):
        return np.asarray(op.dense())
    if hasattr(op, "matrix"):
        return np.asarray(op.matrix)
    n = int(np.prod(op.domain_shape))
    cols = [np.ravel(op.forward(e.reshape(op.domain_shape))) for e in np.eye(n, dtype=np.complex128)]
    return np.column_stack(cols)


def unstable_least_squares(op, tiny: float = 1e-4, output_shape=None) -> LinearRecon:
    """Least-squares inverse of ``A`` with its smallest nonzero singular value replaced by ``tiny``.

    The map inverts the modified matrix exactly, so it amplifies data along
    the corresponding left singular vector by ``sigma_min / tiny``.
    """
    if not tiny > 0:
        raise ValueError("tiny must be positive")
    A = _dense(op)
    U, S, Vh = np.linalg.svd(A, full_matrices=False)
    keep = S > S[0] * 1e-12
    U, S, Vh = U[:, keep], S[keep].copy(), Vh[keep]
    S[-1] = tiny
    B = (Vh.conj().T / S) @ U.conj().T
    if output_shape is None:
        return LinearRecon(B)
    shape = tuple(output_shape)
    return LinearRecon(lambda y: (B @ y).reshape(shape), lambda g: B.conj().T @ np.ravel(g))


def _forward_pair(op, domain: str):
    if domain == "measurement":
        return (lambda r: r), (lambda g: g)
    return op.forward, op.adjoint


def q_value(recon: Callable, apply_A: Callable, x, y, r, lambda_pen: float) -> float:
    """``0.5 ||phi(y + A r) - x||**2 - 0.5 lambda_pen ||r||**2``."""
    x = np.asarray(x)
    Ar = np.asarray(apply_A(r))
    y = np.asarray(y)
    if Ar.shape != y.shape:
        raise ValueError(f"A r has shape {Ar.shape} but y has shape {y.shape}")
    out = np.asarray(recon(y + Ar))
    if out.shape != x.shape:
        raise ValueError(f"reconstruction has shape {out.shape} but x has shape {x.shape}")
    return 0.5 * norm_l2(out - x) ** 2 - 0.5 * lambda_pen * norm_l2(r) ** 2


def q_gradient(recon, apply_A: Callable, apply_adj: Callable, x, y, r, cfg: AttackConfig) -> np.ndarray:
    """Gradient of :func:`q_value` with respect to the real and imaginary parts of ``r``."""
    r = np.asarray(r, dtype=np.complex128)
    if cfg.gradient_mode == "backprop":
        if not hasattr(recon, "vjp"):
            raise ValueError("backprop mode needs a reconstruction map with a vjp method")
        yp = np.asarray(y) + np.asarray(apply_A(r))
        resid = np.asarray(recon(yp)) - np.asarray(x)
        return np.asarray(apply_adj(recon.vjp(yp, resid))) - cfg.lambda_pen * r
    if 2 * r.size > FD_MAX_DIM and not cfg.allow_large_fd:
        raise ValueError(
            f"finite differences over {2 * r.size} real coordinates; set allow_large_fd to proceed"
        )
    h = cfg.fd_step
    grad = np.zeros_like(r)
    flat = grad.reshape(-1)
    for j in range(r.size):
        for unit in (1.0, 1j):
            e = np.zeros(r.size, dtype=np.complex128)
            e[j] = unit * h
            e = e.reshape(r.shape)
            qp = q_value(recon, apply_A, x, y, r + e, cfg.lambda_pen)
            qm = q_value(recon, apply_A, x, y, r - e, cfg.lambda_pen)
            flat[j] += unit * (qp - qm) / (2 * h)
    return grad


def _tune_eta(Q, grad, r0, eta0):
    # Doubling while one plain step keeps improving, halving until it improves.
    q0 = Q(r0)
    g = grad(r0)

    def gain(eta):
        return Q(r0 + eta * g) - q0

    eta = eta0
    if gain(eta) > 0:
        for _ in range(20):
            if gain(2 * eta) > gain(eta):
                eta *= 2
            else:
                break
    else:
        for _ in range(40):
            eta /= 2
            if gain(eta) > 0:
                break
    return eta


def perturbation_search(recon, op, x, cfg: AttackConfig, y=None) -> PerturbationReport:
    """Momentum ascent on ``Q`` from ``restarts`` random starts.

    ``v <- gamma v + eta grad Q(r)`` and ``r <- r + v``. The run with the
    largest ``||phi(y + A r) - x||`` is returned (ties go to the lowest
    restart index). Non-convergence is not an error.

    Parameters
    ----------
    recon : callable
        Reconstruction map.
    op : object
        Image-domain operator defining ``A`` (``forward`` and ``adjoint``).
    x : ndarray
        Ground truth in the output domain of ``recon``.
    cfg : AttackConfig
    y : ndarray, optional
        Clean data; defaults to ``op.forward(x)``.
    """
    x = np.asarray(x, dtype=np.complex128)
    y = op.forward(x) if y is None else np.asarray(y, dtype=np.complex128)
    fwd, adj = _forward_pair(op, cfg.domain)
    r_shape = y.shape if cfg.domain == "measurement" else tuple(getattr(op, "domain_shape", x.shape))
    rng = make_rng(cfg.seed)
    base_out = np.asarray(recon(y))
    baseline = norm_l2(base_out - x)
    x_norm = norm_l2(x)
    y_norm = norm_l2(op.forward(x))
    target = None if cfg.target_ratio is None else cfg.target_ratio * y_norm

    def Q(r):
        return q_value(recon, fwd, x, y, r, cfg.lambda_pen)

    def grad(r):
        return q_gradient(recon, fwd, adj, x, y, r, cfg)

    def constrain(r):
        if target is None:
            return r
        nA = norm_l2(fwd(r))
        return r if nA == 0 else r * (target / nA)

    best = None
    for k in range(cfg.restarts):
        r = rng.standard_normal(r_shape) + 1j * rng.standard_normal(r_shape)
        r = constrain(r * (cfg.init_scale * max(x_norm, 1e-300) / norm_l2(r)))
        eta = cfg.eta
        if eta is None:
            g0 = norm_l2(grad(r))
            eta = _tune_eta(Q, grad, r, norm_l2(r) / g0 if g0 > 0 else 1.0)
        v = np.zeros_like(r)
        trace = [Q(r)]
        for _ in range(cfg.steps):
            v = cfg.gamma_mom * v + eta * grad(r)
            r = constrain(r + v)
            trace.append(Q(r))
        out = np.asarray(recon(y + fwd(r)))
        damage = norm_l2(out - x)
        if best is None or damage > best[0]:
            norms = (norm_l2(r), norm_l2(fwd(r)), norm_l2(out - base_out), damage)
            best = (damage, PerturbationReport(r, trace[-1], norms, trace, baseline, x_norm, eta, k, cfg.to_dict()))
    report = best[1]
    return report
