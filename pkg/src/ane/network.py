"""Two-layer ReLU networks with unit-length input weights.

A model with ``n`` neurons in ``d`` dimensions represents

    v(x) = c0 + sum_i c_i * max(0, omega_i . x - b_i)

with every ``omega_i`` on the unit sphere.  The hinge hyperplanes
``omega_i . x = b_i`` are where the function kinks.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .exceptions import DegenerateNeuronError

__all__ = [
    "Neuron",
    "ReluModel",
    "ModelGradient",
    "relu",
    "evaluate",
    "evaluate_batch",
    "forward",
    "normalize",
    "model_gradient",
    "parameter_count",
    "save_model",
    "load_model",
]


class Neuron(NamedTuple):
    omega: np.ndarray
    b: float


@dataclass
class ReluModel:
    """Parameters of a two-layer ReLU network.

    Attributes
    ----------
    omega : ndarray of shape (n, d)
        Input weights, one unit vector per row.
    b : ndarray of shape (n,)
        Hinge offsets.
    c0 : float
        Output bias.
    c : ndarray of shape (n,)
        Output weights.
    """

    omega: np.ndarray
    b: np.ndarray
    c0: float = 0.0
    c: np.ndarray = field(default=None)

    def __post_init__(self):
        self.omega = np.atleast_2d(np.asarray(self.omega, dtype=float))
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        if self.omega.shape[0] != self.b.shape[0]:
            # allow omega given as (0,) for an empty network
            if self.b.size == 0 and self.omega.size == 0:
                self.omega = self.omega.reshape(0, max(self.omega.shape[-1], 1))
            else:
                raise ValueError(
                    f"omega has {self.omega.shape[0]} rows but b has {self.b.shape[0]} entries"
                )
        if self.c is None:
            self.c = np.zeros(self.b.shape[0])
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        if self.c.shape[0] != self.b.shape[0]:
            raise ValueError(f"c has {self.c.shape[0]} entries, expected {self.b.shape[0]}")
        self.c0 = float(self.c0)

    @classmethod
    def empty(cls, dim, c0=0.0):
        return cls(np.zeros((0, dim)), np.zeros(0), c0, np.zeros(0))

    @property
    def dim(self):
        return self.omega.shape[1]

    @property
    def n_neurons(self):
        return self.b.shape[0]

    @property
    def neurons(self):
        return [Neuron(w.copy(), float(bi)) for w, bi in zip(self.omega, self.b)]

    @property
    def parameter_count(self):
        return parameter_count(self.n_neurons, self.dim)

    def copy(self):
        return ReluModel(self.omega.copy(), self.b.copy(), self.c0, self.c.copy())

    def with_neurons(self, omega, b, c=None):
        """Return a new model with extra neurons appended (output weights default to 0)."""
        omega = np.asarray(omega, dtype=float).reshape(-1, self.dim)
        b = np.asarray(b, dtype=float).reshape(-1)
        if c is None:
            c = np.zeros(b.shape[0])
        return ReluModel(
            np.vstack([self.omega, omega]),
            np.concatenate([self.b, b]),
            self.c0,
            np.concatenate([self.c, np.asarray(c, dtype=float).reshape(-1)]),
        )

    def with_output(self, c0, c):
        return ReluModel(self.omega.copy(), self.b.copy(), c0, np.array(c, dtype=float))


class ModelGradient(NamedTuple):
    """Derivatives of v(x) with respect to every parameter at one point."""

    d_c0: float
    d_c: np.ndarray
    d_omega: np.ndarray
    d_b: np.ndarray


def parameter_count(n, d):
    """Number of free parameters, (d + 1) * n + 1."""
    return (d + 1) * n + 1


def relu(t):
    return np.maximum(0.0, t)


def _as_points(model, x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x.reshape(-1, model.dim) if model.dim == 1 else x.reshape(1, -1)
    if x.shape[1] != model.dim:
        raise ValueError(f"points have dimension {x.shape[1]}, model has dimension {model.dim}")
    return x


def forward(model, X):
    """Evaluate the model and return ``(values, preactivations)``.

    ``preactivations[k, i]`` is ``omega_i . X[k] - b_i``; the partition and
    the optimizer reuse it instead of recomputing the hinge products.
    """
    X = _as_points(model, X)
    # explicit per-row reductions: results do not depend on the batch size
    Z = -model.b + np.zeros((X.shape[0], 1))
    for j in range(model.dim):
        Z += X[:, j, None] * model.omega[None, :, j]
    values = model.c0 + (np.maximum(Z, 0.0) * model.c).sum(axis=1)
    return values, Z


def evaluate_batch(model, X):
    """Evaluate the model at each row of ``X``."""
    return forward(model, X)[0]


def evaluate(model, x):
    """Evaluate the model at a single point."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != model.dim:
        raise ValueError(f"point has dimension {x.shape[0]}, model has dimension {model.dim}")
    return float(forward(model, x.reshape(1, -1))[0][0])


def normalize(model):
    """Rescale every neuron so that |omega_i| = 1 without changing v.

    Uses relu(w.x - b) = |w| relu(w/|w| . x - b/|w|).
    """
    norms = np.linalg.norm(model.omega, axis=1)
    bad = np.flatnonzero(norms == 0.0)
    if bad.size:
        raise DegenerateNeuronError(int(bad[0]))
    return ReluModel(
        model.omega / norms[:, None],
        model.b / norms,
        model.c0,
        model.c * norms,
    )


def _tangent(g, omega):
    """Project rows of g onto the tangent spaces of the sphere at rows of omega."""
    return g - np.sum(g * omega, axis=1, keepdims=True) * omega


def model_gradient(model, x):
    """Analytic derivatives of v at ``x``.

    The step function at the kink is taken as 0, so a neuron sitting exactly
    on its hinge contributes nothing to the b and omega derivatives.  The
    omega derivative is projected onto the tangent space of the sphere.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != model.dim:
        raise ValueError(f"point has dimension {x.shape[0]}, model has dimension {model.dim}")
    z = model.omega @ x - model.b
    active = (z > 0.0).astype(float)
    d_c = np.maximum(z, 0.0)
    d_b = -model.c * active
    d_omega = _tangent((model.c * active)[:, None] * x[None, :], model.omega)
    return ModelGradient(1.0, d_c, d_omega, d_b)


def save_model(model, path):
    """Write a plain-text checkpoint.

    Layout: ``d n`` header, then ``c0``, then one line per neuron holding
    ``c_i b_i omega_i[0] ... omega_i[d-1]``.
    """
    lines = [f"{model.dim} {model.n_neurons}", f"{model.c0:.17g}"]
    for ci, bi, wi in zip(model.c, model.b, model.omega):
        lines.append(" ".join(f"{v:.17g}" for v in (ci, bi, *wi)))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        rows = [line.split() for line in fh if line.strip()]
    d, n = int(rows[0][0]), int(rows[0][1])
    c0 = float(rows[1][0])
    body = np.array([[float(v) for v in r] for r in rows[2 : 2 + n]]).reshape(n, d + 2)
    if len(rows) != n + 2:
        raise ValueError(f"checkpoint declares {n} neurons but has {len(rows) - 2} neuron lines")
    return ReluModel(body[:, 2:], body[:, 1], c0, body[:, 0])
