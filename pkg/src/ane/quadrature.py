"""Composite midpoint quadrature on axis-aligned cell meshes.

Every cell contributes its centroid as a quadrature point and its volume as
the weight, so ``Q(g) = sum_T g(x_T) |T|``.  Meshes start uniform and are
refined by splitting marked cells into ``2**d`` equal children.
"""

import csv
import itertools
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import NonFiniteSampleError

__all__ = [
    "Domain",
    "Cell",
    "QuadMesh",
    "WeightedPoints",
    "uniform_mesh",
    "refine_cells",
    "sample",
    "integrate",
    "discrete_inner",
    "discrete_norm",
    "integration_accuracy",
    "reference_integral",
    "write_mesh_csv",
    "read_mesh_csv",
]


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box ``[lower, upper]``."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lo) != len(hi):
            raise ValueError("lower and upper must have the same length")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ValueError(f"empty domain: lower={lo}, upper={hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def cube(cls, a, b, dim):
        return cls((a,) * dim, (b,) * dim)

    @property
    def dim(self):
        return len(self.lower)

    @property
    def extents(self):
        return np.subtract(self.upper, self.lower)

    @property
    def volume(self):
        return float(np.prod(self.extents))

    @property
    def corners(self):
        return np.array(list(itertools.product(*zip(self.lower, self.upper))))


class Cell(NamedTuple):
    center: np.ndarray
    half_width: np.ndarray
    level: int

    @property
    def volume(self):
        return float(np.prod(2.0 * self.half_width))


class QuadMesh:
    """A partition of a domain into axis-aligned boxes.

    Stored column-wise: ``centers`` and ``half_widths`` are ``(N, d)`` arrays
    and ``levels`` an ``(N,)`` integer array.
    """

    def __init__(self, domain, centers, half_widths, levels=None):
        self.domain = domain
        self.centers = np.asarray(centers, dtype=float).reshape(-1, domain.dim)
        self.half_widths = np.asarray(half_widths, dtype=float).reshape(-1, domain.dim)
        if levels is None:
            levels = np.zeros(self.centers.shape[0], dtype=int)
        self.levels = np.asarray(levels, dtype=int).reshape(-1)
        self.volumes = np.prod(2.0 * self.half_widths, axis=1)
        for arr in (self.centers, self.half_widths, self.volumes):
            arr.setflags(write=False)

    @property
    def dim(self):
        return self.domain.dim

    @property
    def points(self):
        return self.centers

    @property
    def n_cells(self):
        return self.centers.shape[0]

    def __len__(self):
        return self.n_cells

    @property
    def cells(self):
        return [
            Cell(c.copy(), h.copy(), int(lv))
            for c, h, lv in zip(self.centers, self.half_widths, self.levels)
        ]

    def __repr__(self):
        return f"QuadMesh(dim={self.dim}, n_cells={self.n_cells})"


class WeightedPoints:
    """Scattered quadrature points with explicit weights.

    Behaves like a :class:`QuadMesh` for every operation that only needs
    points and weights (loss, linear solve, partition); it cannot be refined.
    """

    def __init__(self, points, weights, domain=None):
        self.centers = np.asarray(points, dtype=float)
        if self.centers.ndim == 1:
            self.centers = self.centers[:, None]
        self.volumes = np.asarray(weights, dtype=float).reshape(-1)
        if self.volumes.shape[0] != self.centers.shape[0]:
            raise ValueError("points and weights differ in length")
        if domain is None:
            lo, hi = self.centers.min(axis=0), self.centers.max(axis=0)
            hi = np.where(hi > lo, hi, lo + 1.0)
            domain = Domain(tuple(lo), tuple(hi))
        self.domain = domain

    dim = QuadMesh.dim
    points = QuadMesh.points
    n_cells = QuadMesh.n_cells
    __len__ = QuadMesh.__len__


def uniform_mesh(domain, counts):
    """Tile ``domain`` with ``prod(counts)`` equal boxes."""
    counts = np.broadcast_to(np.asarray(counts, dtype=int), (domain.dim,))
    if np.any(counts < 1):
        raise ValueError(f"counts must be positive, got {tuple(counts)}")
    h = domain.extents / counts
    axes = [lo + h[j] * (np.arange(counts[j]) + 0.5) for j, lo in enumerate(domain.lower)]
    grid = np.meshgrid(*axes, indexing="ij")
    centers = np.stack([g.ravel() for g in grid], axis=1)
    half = np.tile(h / 2.0, (centers.shape[0], 1))
    return QuadMesh(domain, centers, half)


def refine_cells(mesh, marked):
    """Split every marked cell into ``2**d`` children; keep the rest.

    Unmarked cells keep their relative order; children are appended at the
    end in marked-cell order.
    """
    marked = np.unique(np.asarray(list(marked), dtype=int))
    if marked.size and (marked[0] < 0 or marked[-1] >= mesh.n_cells):
        raise IndexError("marked cell index out of range")
    keep = np.ones(mesh.n_cells, dtype=bool)
    keep[marked] = False
    signs = np.array(list(itertools.product((-1.0, 1.0), repeat=mesh.dim)))
    parent_c = mesh.centers[marked]
    child_h = mesh.half_widths[marked] / 2.0
    kids_c = (parent_c[:, None, :] + signs[None, :, :] * child_h[:, None, :]).reshape(-1, mesh.dim)
    kids_h = np.repeat(child_h, len(signs), axis=0)
    kids_l = np.repeat(mesh.levels[marked] + 1, len(signs))
    return QuadMesh(
        mesh.domain,
        np.vstack([mesh.centers[keep], kids_c]),
        np.vstack([mesh.half_widths[keep], kids_h]),
        np.concatenate([mesh.levels[keep], kids_l]),
    )


def sample(mesh, g):
    """Values of ``g`` at the mesh centroids.

    ``g`` is either a vectorized callable taking an ``(N, d)`` array or an
    array of precomputed values.
    """
    if callable(g):
        values = np.asarray(g(mesh.points), dtype=float).reshape(-1)
    else:
        values = np.asarray(g, dtype=float).reshape(-1)
    if values.shape[0] != mesh.n_cells:
        raise ValueError(f"got {values.shape[0]} samples for {mesh.n_cells} cells")
    bad = ~np.isfinite(values)
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise NonFiniteSampleError(k, mesh.points[k])
    return values


def integrate(mesh, g):
    return float(np.sum(sample(mesh, g) * mesh.volumes))


def discrete_inner(mesh, g, h):
    return float(np.sum(sample(mesh, g) * sample(mesh, h) * mesh.volumes))


def discrete_norm(mesh, g):
    v = sample(mesh, g)
    return float(np.sqrt(np.sum(v * v * mesh.volumes)))


def integration_accuracy(mesh, f, reference):
    """Relative midpoint error ``|I - Q(f)| / |I|`` against a reference integral."""
    if reference == 0:
        raise ValueError("reference integral must be nonzero")
    return abs(reference - integrate(mesh, f)) / abs(reference)


def reference_integral(domain, f, counts, chunk=1 << 20):
    """Midpoint integral of ``f`` on a fine uniform mesh, evaluated in chunks.

    Avoids materializing the whole mesh when ``counts`` is large (e.g. 1600^2).
    """
    counts = np.broadcast_to(np.asarray(counts, dtype=int), (domain.dim,))
    h = domain.extents / counts
    axes = [lo + h[j] * (np.arange(counts[j]) + 0.5) for j, lo in enumerate(domain.lower)]
    inner = np.stack([g.ravel() for g in np.meshgrid(*axes[1:], indexing="ij")], axis=1) if domain.dim > 1 else np.zeros((1, 0))
    rows_per_chunk = max(1, chunk // inner.shape[0])
    total = 0.0
    for start in range(0, counts[0], rows_per_chunk):
        x0 = axes[0][start : start + rows_per_chunk]
        pts = np.hstack([np.repeat(x0, inner.shape[0])[:, None], np.tile(inner, (x0.size, 1))])
        vals = np.asarray(f(pts), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise FloatingPointError("non-finite integrand on reference mesh")
        total += float(np.sum(vals))
    return total * float(np.prod(h))


def write_mesh_csv(mesh, path):
    d = mesh.dim
    header = [f"center_{j}" for j in range(d)] + [f"half_{j}" for j in range(d)] + ["level"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for c, h, lv in zip(mesh.centers, mesh.half_widths, mesh.levels):
            w.writerow([repr(float(v)) for v in c] + [repr(float(v)) for v in h] + [int(lv)])


def read_mesh_csv(path, domain):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    d = domain.dim
    return QuadMesh(domain, data[:, :d], data[:, d : 2 * d], data[:, 2 * d].astype(int))
