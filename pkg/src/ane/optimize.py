"""Nonlinear training of all network parameters by full-batch Adam.

The objective is ``1/2 ||f - v||_T^2`` over the quadrature mesh.  Input
weights stay on the unit sphere: their gradient is projected to the
tangent space and after every step each neuron is renormalized, with the
scale moved into ``b`` and ``c`` so the represented function is unchanged
by the renormalization itself.
"""

import csv
import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .exceptions import DivergenceError
from .network import ModelGradient, ReluModel, _tangent, forward
from .quadrature import sample

__all__ = [
    "TrainConfig",
    "TrainResult",
    "loss",
    "loss_gradient",
    "adam_train",
    "write_loss_trace",
]

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    plateau_window: int = 2000
    plateau_rel: float = 1e-3
    max_iters: int = 200_000
    seed: int = 0
    trace_every: int = 100

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.plateau_rel < 0:
            raise ValueError("plateau_rel must be nonnegative")
        if self.plateau_window < 1:
            raise ValueError("plateau_window must be at least 1")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")


@dataclass
class TrainResult:
    model: ReluModel
    final_loss: float
    iterations: int
    loss_trace: list = field(default_factory=list)
    initial_loss: float = float("nan")
    stopped_by: str = ""


def loss(model, mesh, f):
    """Discrete residual norm ``||f - v||_T``."""
    r = sample(mesh, f) - forward(model, mesh.points)[0]
    return float(np.sqrt(np.sum(r * r * mesh.volumes)))


def _objective(X, w, y, c0, c, omega, b, fixed_omega, fused=None):
    """Half squared loss and its gradient (omega part already tangent)."""
    if fused is None:
        fused = _kernels.HAVE_NUMBA
    if fused and omega.shape[0]:
        half_sq, g_c0, g_c, hit, g_w = _kernels.fused_objective(
            X, w, y, float(c0), c, np.ascontiguousarray(omega.T), b
        )
        g_b = -c * hit
        if fixed_omega:
            g_omega = np.zeros_like(omega)
        else:
            g_omega = _tangent(c[:, None] * g_w.T, omega)
        return half_sq, g_c0, g_c, g_omega, g_b
    if fixed_omega and X.shape[1] == 1:
        Z = X - b  # omega == 1 in one dimension
    else:
        Z = X @ omega.T - b
    A = np.maximum(Z, 0.0)
    r = c0 + A @ c - y
    wr = w * r
    half_sq = 0.5 * float(wr @ r)
    g_c0 = float(np.sum(wr))
    g_c = wr @ A
    Hw = (Z > 0.0) * wr[:, None]
    g_b = -c * Hw.sum(axis=0)
    if fixed_omega:
        g_omega = np.zeros_like(omega)
    else:
        g_omega = _tangent(c[:, None] * (Hw.T @ X), omega)
    return half_sq, g_c0, g_c, g_omega, g_b


def loss_gradient(model, mesh, f):
    """Gradient of ``1/2 ||f - v||_T^2`` with respect to every parameter."""
    y = sample(mesh, f)
    fixed = model.dim == 1
    _, g_c0, g_c, g_omega, g_b = _objective(
        np.asarray(mesh.points), mesh.volumes, y, model.c0, model.c, model.omega, model.b, fixed
    )
    return ModelGradient(g_c0, g_c, g_omega, g_b)


def adam_train(model, mesh, f, config=None):
    """Train ``model`` on ``mesh`` with full-batch Adam.

    Stops when the best loss so far has improved by less than a fraction
    ``plateau_rel`` over the last ``plateau_window`` iterations, or after
    ``max_iters`` steps, and returns the parameters with the smallest loss
    seen.  Tracking the running best keeps isolated Adam spikes from
    ending a run that is still making progress.

    Raises
    ------
    DivergenceError
        If the loss becomes NaN or infinite.
    """
    cfg = config or TrainConfig()
    X = np.ascontiguousarray(mesh.points)
    w = np.asarray(mesh.volumes)
    y = sample(mesh, f)
    fixed = model.dim == 1

    c0 = np.array([model.c0])
    c, omega, b = model.c.copy(), model.omega.copy(), model.b.copy()
    params = [c0, c, omega, b]
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    b1, b2, lr, eps = cfg.beta1, cfg.beta2, cfg.learning_rate, cfg.eps_adam

    window = deque(maxlen=cfg.plateau_window + 1)
    trace = []
    best = (np.inf, None)
    it = 0
    stopped_by = "max_iters"
    initial = None
    while True:
        half_sq, g_c0, g_c, g_omega, g_b = _objective(X, w, y, c0[0], c, omega, b, fixed)
        cur = float(np.sqrt(2.0 * half_sq))
        if not np.isfinite(cur):
            raise DivergenceError(it, lr)
        if initial is None:
            initial = cur
        if cur < best[0]:
            best = (cur, (c0[0], c.copy(), omega.copy(), b.copy()))
        if it % cfg.trace_every == 0:
            trace.append((it, cur))
        window.append(best[0])
        if len(window) == window.maxlen and best[0] >= (1.0 - cfg.plateau_rel) * window[0]:
            stopped_by = "plateau"
            break
        if it >= cfg.max_iters:
            break

        it += 1
        grads = [np.array([g_c0]), g_c, g_omega, g_b]
        bc1 = 1.0 - b1**it
        bc2 = 1.0 - b2**it
        for k, (p, g) in enumerate(zip(params, grads)):
            if k == 2 and fixed:
                continue
            m[k] *= b1
            m[k] += (1.0 - b1) * g
            v[k] *= b2
            v[k] += (1.0 - b2) * (g * g)
            p -= (lr / bc1) * m[k] / (np.sqrt(v[k] / bc2) + eps)
        if not fixed and omega.shape[0]:
            norms = np.linalg.norm(omega, axis=1)
            omega /= norms[:, None]
            b /= norms
            c *= norms

    if trace[-1][0] != it:
        trace.append((it, cur))
    best_loss, (bc0, bc, bomega, bb) = best
    logger.debug("adam: %d iterations, loss %.6g -> %.6g (%s)", it, initial, best_loss, stopped_by)
    return TrainResult(
        model=ReluModel(bomega, bb, bc0, bc),
        final_loss=best_loss,
        iterations=it,
        loss_trace=trace,
        initial_loss=initial,
        stopped_by=stopped_by,
    )


def write_loss_trace(trace, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "loss"])
        for it, val in trace:
            w.writerow([it, repr(float(val))])
