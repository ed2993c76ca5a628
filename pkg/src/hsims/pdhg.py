"""Primal-dual hybrid gradient solver for the relaxed multi-label problem.

Minimizes ``sum(u * f) / lambda + TV(u)`` over labelings ``u`` whose pixel rows
lie on the unit simplex, where TV sums the Euclidean norms of the per-class
forward-difference gradients.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import LabelField


def grid_step(height: int, width: int) -> float:
    """Finite-difference spacing ``1 / (max(H, W) - 1)``, mapping the image onto [0, 1]."""
    n = max(height, width)
    return 1.0 / (n - 1) if n > 1 else 1.0


@dataclass(frozen=True)
class PdhgConfig:
    lam: float
    tau: float | None = None
    sigma: float | None = None
    theta: float = 1.0
    max_iter: int = 1000
    tol: float = 1e-6

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be > 0, got {self.lam}")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        for name in ("tau", "sigma"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be > 0")

    def steps(self, h: float) -> tuple[float, float]:
        """``(tau, sigma)``; unset values default to ``h / sqrt(8)`` so that ``tau*sigma*||A||^2 <= 1``."""
        default = h / math.sqrt(8.0)
        return (self.tau if self.tau is not None else default,
                self.sigma if self.sigma is not None else default)


def _array(u):
    return u.data if isinstance(u, LabelField) else np.asarray(u, dtype=np.float64)


def grad(u, h: float) -> np.ndarray:
    """Forward differences ``(H, W, k) -> (H, W, k, 2)``; component 0 along columns, 1 along rows.

    Differences pointing outside the grid are zero.
    """
    u = _array(u)
    out = np.zeros(u.shape + (2,))
    out[:, :-1, :, 0] = (u[:, 1:] - u[:, :-1]) / h
    out[:-1, :, :, 1] = (u[1:] - u[:-1]) / h
    return out


def grad_adjoint(p: np.ndarray, h: float) -> np.ndarray:
    """Exact transpose of :func:`grad` (negative discrete divergence)."""
    px, py = p[..., 0], p[..., 1]
    out = np.zeros(p.shape[:-1])
    out[:, :-1] -= px[:, :-1]
    out[:, 1:] += px[:, :-1]
    out[:-1] -= py[:-1]
    out[1:] += py[:-1]
    return out / h


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of every row (last axis) onto the unit simplex.

    Sort-based: find the largest ``rho`` with ``s_rho - (cumsum_rho - 1) / rho > 0``
    and shift by that threshold.
    """
    v = np.asarray(v, dtype=np.float64)
    k = v.shape[-1]
    s = -np.sort(-v, axis=-1)
    css = np.cumsum(s, axis=-1) - 1.0
    ind = np.arange(1, k + 1)
    cond = s - css / ind > 0
    rho = k - np.argmax(cond[..., ::-1], axis=-1)
    thresh = np.take_along_axis(css, (rho - 1)[..., None], axis=-1) / rho[..., None]
    return np.maximum(v - thresh, 0.0)


def project_unit_ball(p: np.ndarray) -> np.ndarray:
    """Project every 2-vector (last axis) onto the closed Euclidean unit ball."""
    p = np.asarray(p, dtype=np.float64)
    norm = np.sqrt(np.sum(p * p, axis=-1, keepdims=True))
    return p / np.maximum(norm, 1.0)


def prox_data(u, f_eta: np.ndarray, tau: float, lam: float) -> np.ndarray:
    """``P_simplex(u - (tau / lambda) f)`` per pixel."""
    if lam == 0:
        raise ValueError("lambda must be nonzero")
    u = _array(u)
    if u.shape != f_eta.shape:
        raise ValueError(f"labeling shape {u.shape} does not match indicator shape {f_eta.shape}")
    return project_simplex(u - (tau / lam) * f_eta)


def total_variation(u, h: float) -> float:
    g = grad(u, h)
    return float(np.sum(np.sqrt(np.sum(g * g, axis=-1))))


def labeling_energy(u, f_eta: np.ndarray, lam: float, h: float) -> float:
    """Convex energy ``sum(u * f) / lambda + TV(u)`` minimized by :func:`solve_labeling`."""
    u = _array(u)
    return float(np.sum(u * f_eta)) / lam + total_variation(u, h)


@dataclass
class LabelingResult:
    u: np.ndarray       # (H, W, k) relaxed labeling
    p: np.ndarray       # (H, W, k, 2) final dual variable, reusable as a warm start
    iterations: int
    converged: bool


def solve_labeling(u0, f_eta: np.ndarray, cfg: PdhgConfig, p0: np.ndarray | None = None,
                   callback=None) -> LabelingResult:
    """Chambolle-Pock iterations for the labeling subproblem.

    ``callback(m, u, p)``, if given, is invoked after every iteration.
    """
    u = _array(u0).copy()
    f_eta = np.asarray(f_eta, dtype=np.float64)
    if u.shape != f_eta.shape:
        raise ValueError(f"labeling shape {u.shape} does not match indicator shape {f_eta.shape}")
    height, width = u.shape[:2]
    h = grid_step(height, width)
    tau, sigma = cfg.steps(h)
    p = np.zeros(u.shape + (2,)) if p0 is None else np.array(p0, dtype=np.float64)
    if p.shape != u.shape + (2,):
        raise ValueError(f"dual shape {p.shape} does not match labeling shape {u.shape}")
    u_bar = u.copy()
    step = tau / cfg.lam
    converged = False
    m = 0
    for m in range(1, cfg.max_iter + 1):
        p = project_unit_ball(p + sigma * grad(u_bar, h))
        u_next = project_simplex(u - tau * grad_adjoint(p, h) - step * f_eta)
        change = np.max(np.abs(u_next - u))
        u_bar = u_next + cfg.theta * (u_next - u)
        u = u_next
        if callback is not None:
            callback(m, u, p)
        if change < cfg.tol:
            converged = True
            break
    return LabelingResult(u=u, p=p, iterations=m, converged=converged)
