"""Network enhancement: marking elements, choosing how many neurons to add,
and placing the new hinges."""

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .exceptions import DegenerateElementError
from .partition import principal_direction

__all__ = [
    "MarkParams",
    "EnhancementPlan",
    "GrowthRecord",
    "GrowthHistory",
    "mark_average",
    "mark_bulk",
    "mark",
    "global_growth",
    "init_uniform",
    "init_uniform_count",
    "init_from_marked",
    "init_random",
    "plan_local",
    "plan_global",
]

ALPHA_CLAMP = (0.1, 10.0)


@dataclass
class MarkParams:
    strategy: str = "average"
    gamma1: float = 0.7

    def __post_init__(self):
        if self.strategy not in ("average", "bulk"):
            raise ValueError(f"unknown marking strategy {self.strategy!r}")
        if not 0.0 < self.gamma1 < 1.0:
            raise ValueError(f"gamma1 must lie in (0, 1), got {self.gamma1}")


@dataclass
class EnhancementPlan:
    marked: list
    omega: np.ndarray
    b: np.ndarray
    init_mode: str

    @property
    def n_new(self):
        return self.b.shape[0]


class GrowthRecord(NamedTuple):
    n: int
    xi_hat: float


@dataclass
class GrowthHistory:
    records: list = field(default_factory=list)

    def append(self, n, xi_hat):
        if self.records and n <= self.records[-1].n:
            raise ValueError("neuron counts must be strictly increasing")
        self.records.append(GrowthRecord(int(n), float(xi_hat)))

    def __len__(self):
        return len(self.records)

    def __getitem__(self, k):
        return self.records[k]


def _indicators(partition_or_values):
    if hasattr(partition_or_values, "elements"):
        return np.array([e.indicator for e in partition_or_values.elements])
    return np.asarray(partition_or_values, dtype=float)


def _hashes(partition_or_values, n):
    if hasattr(partition_or_values, "elements"):
        return [e.pattern_hash for e in partition_or_values.elements]
    return [f"{k:016x}" for k in range(n)]


def mark_average(partition):
    """Indices of elements whose indicator is at least the mean indicator.

    Accepts a partition or a plain sequence of indicators.
    """
    xi = _indicators(partition)
    if xi.size == 0:
        return []
    # relative slack so that exactly-equal indicators survive the rounding of the mean
    threshold = xi.mean() * (1.0 - 1e-12)
    return [int(k) for k in np.flatnonzero(xi >= threshold)]


def mark_bulk(partition, gamma1):
    """Smallest set of elements carrying a ``gamma1`` share of the squared error.

    Elements are taken by decreasing indicator; ties go to the smaller
    pattern hash.
    """
    if not 0.0 < gamma1 < 1.0:
        raise ValueError(f"gamma1 must lie in (0, 1), got {gamma1}")
    xi = _indicators(partition)
    if xi.size == 0:
        return []
    hashes = _hashes(partition, xi.size)
    order = sorted(range(xi.size), key=lambda k: (-xi[k], hashes[k]))
    csum = np.cumsum(xi[order] ** 2)
    if csum[-1] == 0.0:
        return []
    k = int(np.searchsorted(csum, gamma1 * csum[-1], side="left"))
    return [int(i) for i in order[: k + 1]]


def mark(partition, params):
    if params.strategy == "average":
        return mark_average(partition)
    return mark_bulk(partition, params.gamma1)


def global_growth(history, epsilon, alpha2=1.0):
    """Neuron count for the next network under an assumed algebraic rate.

    ``n_k = min(2 n_{k-1}, ceil((xi_{k-1} / epsilon)**(1/alpha_k) * n_{k-1}))``
    where ``alpha_k`` is estimated from the last two records (clamped to
    [0.1, 10]) or is ``alpha2`` when only one record exists.  Returns
    ``n_{k-1}`` unchanged when the tolerance is already met.
    """
    if len(history) == 0:
        raise ValueError("history is empty")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    n_prev, xi_prev = history[-1]
    if xi_prev <= 0:
        raise ValueError(f"estimator must be positive, got {xi_prev}")
    if xi_prev <= epsilon:
        return n_prev
    if len(history) >= 2:
        n_pp, xi_pp = history[-2]
        alpha = math.log(xi_pp / xi_prev) / math.log(n_prev / n_pp)
        alpha = min(max(alpha, ALPHA_CLAMP[0]), ALPHA_CLAMP[1])
    else:
        if alpha2 <= 0:
            raise ValueError("alpha2 must be positive")
        alpha = alpha2
    target = (xi_prev / epsilon) ** (1.0 / alpha) * n_prev
    # absorb rounding such as 40.000000000000007
    n_next = math.ceil(target - 1e-9 * target)
    return int(max(min(2 * n_prev, n_next), n_prev))


def init_uniform(m0, domain):
    """Hinges on a coarse uniform grid: ``m0 + 1`` axis-parallel planes per axis.

    Along axis ``j`` the offsets are ``lower_j + i * extent_j / (m0 + 1)``
    for ``i = 0..m0``, so the first plane lies on the lower boundary and none
    on the upper one.
    """
    if m0 < 0:
        raise ValueError("m0 must be nonnegative")
    d = domain.dim
    omegas, bs = [], []
    for j in range(d):
        e = np.zeros(d)
        e[j] = 1.0
        step = domain.extents[j] / (m0 + 1)
        for i in range(m0 + 1):
            omegas.append(e)
            bs.append(domain.lower[j] + i * step)
    return np.array(omegas).reshape(-1, d), np.array(bs)


def init_uniform_count(count, domain):
    """``count`` axis-parallel hinges spread evenly over the axes, each axis
    subdivided at cell midpoints."""
    d = domain.dim
    per_axis = [count // d + (1 if j < count % d else 0) for j in range(d)]
    omegas, bs = [], []
    for j, m in enumerate(per_axis):
        e = np.zeros(d)
        e[j] = 1.0
        for i in range(m):
            omegas.append(e)
            bs.append(domain.lower[j] + (i + 0.5) * domain.extents[j] / m)
    return np.array(omegas).reshape(-1, d), np.array(bs)


def init_from_marked(elements, domain):
    """One hinge per marked element, through its centroid and normal to its
    direction of least spread.

    Single-point elements get a plane normal to the longest domain axis.
    """
    d = domain.dim
    omegas, bs = [], []
    for el in elements:
        try:
            w, _ = principal_direction(el)
        except DegenerateElementError:
            w = np.zeros(d)
            w[int(np.argmax(domain.extents))] = 1.0
        omegas.append(w)
        bs.append(float(w @ el.centroid))
    return np.array(omegas).reshape(-1, d), np.array(bs)


def init_random(count, domain, rng):
    """Random hinges that all cut the closed domain.

    ``omega`` is uniform on the sphere (fixed to +1 in 1-D) and ``b`` uniform
    between the extreme values of ``omega . x`` over the domain corners.
    """
    d = domain.dim
    if count <= 0:
        return np.zeros((0, d)), np.zeros(0)
    if d == 1:
        omega = np.ones((count, 1))
    else:
        omega = rng.standard_normal((count, d))
        omega /= np.linalg.norm(omega, axis=1, keepdims=True)
    proj = omega @ domain.corners.T
    b = rng.uniform(proj.min(axis=1), proj.max(axis=1))
    return omega, b


def plan_local(partition, domain, params, max_new=None):
    marked = mark(partition, params)
    if max_new is not None:
        marked = marked[:max_new] if params.strategy == "bulk" else _largest(partition, marked, max_new)
    omega, b = init_from_marked([partition.elements[k] for k in marked], domain)
    return EnhancementPlan(marked, omega, b, "pca")


def _largest(partition, marked, k):
    xi = {m: partition.elements[m].indicator for m in marked}
    keep = sorted(marked, key=lambda m: (-xi[m], partition.elements[m].pattern_hash))[:k]
    return sorted(keep)


def plan_global(n_new, domain, init_mode, rng=None):
    if init_mode == "uniform":
        omega, b = init_uniform_count(n_new, domain)
    elif init_mode == "random":
        if rng is None:
            raise ValueError("random initialization needs a generator")
        omega, b = init_random(n_new, domain, rng)
    else:
        raise ValueError(f"unknown init mode {init_mode!r}")
    return EnhancementPlan([], omega, b, init_mode)
