"""Benchmark target functions and a name-based registry.

All targets are vectorized: they take an ``(N, d)`` array of points and
return ``(N,)`` values.
"""

from dataclasses import dataclass, field

import numpy as np

from .quadrature import Domain

__all__ = [
    "TargetFn",
    "TargetSpec",
    "test1",
    "test2",
    "test3",
    "TARGETS",
    "make_target",
    "register_target",
]

KELLOGG_BETA = 0.1
KELLOGG_SIGMA = -14.92256510455152
KELLOGG_RHO = np.pi / 4


class TargetFn:
    """A named, vectorized scalar function."""

    def __init__(self, func, name, dim, domain=None):
        self.func = func
        self.name = name
        self.dim = dim
        self.domain = domain

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, self.dim) if self.dim == 1 else X.reshape(1, -1)
        return self.func(X)

    def __repr__(self):
        return f"TargetFn({self.name!r}, dim={self.dim})"


def _column(X, j):
    X = np.asarray(X, dtype=float)
    return X[..., j] if X.ndim > 1 else X


def test1(X, k=0.01):
    """Smooth bump ``x (exp(-(x - 1/3)^2 / k) - exp(-4/9 / k))`` on [0, 1]."""
    x = _column(X, 0)
    return x * (np.exp(-((x - 1.0 / 3.0) ** 2) / k) - np.exp(-4.0 / 9.0 / k))


def test2(X, beta=KELLOGG_BETA, sigma=KELLOGG_SIGMA, rho=KELLOGG_RHO, kellogg_standard=False):
    """Intersecting-interface function ``r**beta * mu(theta)`` on [-1, 1]^2.

    The third angular branch is ``cos(theta*beta) * cos((theta - pi - rho)*beta)``
    by default.  With ``kellogg_standard=True`` the leading factor becomes
    ``cos(sigma*beta)``, which makes the function continuous across the
    negative axes.
    """
    x, y = _column(X, 0), _column(X, 1)
    r = np.hypot(x, y)
    t = np.mod(np.arctan2(y, x), 2.0 * np.pi)
    third = np.cos(sigma * beta) if kellogg_standard else np.cos(t * beta)
    mu = np.select(
        [t <= np.pi / 2, t <= np.pi, t <= 1.5 * np.pi],
        [
            np.cos((np.pi / 2 - sigma) * beta) * np.cos((t - np.pi / 2 + rho) * beta),
            np.cos(rho * beta) * np.cos((t - np.pi + sigma) * beta),
            third * np.cos((t - np.pi - rho) * beta),
        ],
        default=np.cos((np.pi / 2 - rho) * beta) * np.cos((t - 1.5 * np.pi - sigma) * beta),
    )
    return r**beta * mu


def test3(X, eps=0.01):
    """Circular transition layer ``tanh((x^2 + y^2 - 1/4)/eps) - tanh(3/(4 eps))``."""
    x, y = _column(X, 0), _column(X, 1)
    return np.tanh((x * x + y * y - 0.25) / eps) - np.tanh(0.75 / eps)


@dataclass
class TargetSpec:
    name: str
    dim: int
    domain: Domain
    func: object
    parameters: dict = field(default_factory=dict)

    def make(self, **overrides):
        unknown = set(overrides) - set(self.parameters)
        if unknown:
            raise KeyError(f"unknown parameter(s) for {self.name}: {sorted(unknown)}")
        params = {**self.parameters, **overrides}
        func = self.func
        return TargetFn(lambda X: func(X, **params), self.name, self.dim, self.domain)


TARGETS = {
    "test1": TargetSpec("test1", 1, Domain((0.0,), (1.0,)), test1, {"k": 0.01}),
    "test2": TargetSpec(
        "test2",
        2,
        Domain.cube(-1.0, 1.0, 2),
        test2,
        {
            "beta": KELLOGG_BETA,
            "sigma": KELLOGG_SIGMA,
            "rho": KELLOGG_RHO,
            "kellogg_standard": False,
        },
    ),
    "test3": TargetSpec("test3", 2, Domain.cube(-1.0, 1.0, 2), test3, {"eps": 0.01}),
}


def register_target(name, dim, domain, func, **parameters):
    """Add a user-supplied vectorized target ``func(X, **parameters)``."""
    TARGETS[name] = TargetSpec(name, dim, domain, func, parameters)
    return TARGETS[name]


def make_target(name, **parameters):
    try:
        spec = TARGETS[name]
    except KeyError:
        raise KeyError(f"unknown target {name!r}; known: {sorted(TARGETS)}") from None
    return spec.make(**parameters)
