"""Physical partition induced by the hinge hyperplanes.

Instead of computing the polytopes cut out by the hyperplanes, quadrature
points are grouped by their activation sign pattern: point ``x`` gets bit
``i`` set iff ``omega_i . x - b_i >= 0``.  Each distinct pattern is one
element, carrying its local error indicator, centroid and covariance.
"""

import csv
import hashlib
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateElementError
from .network import forward
from .quadrature import discrete_norm, sample

__all__ = [
    "PhysicalElement",
    "PhysicalPartition",
    "sign_patterns",
    "build_partition",
    "total_estimator",
    "principal_direction",
    "write_partition_csv",
]


@dataclass
class PhysicalElement:
    pattern: np.ndarray
    pattern_hash: str
    point_indices: np.ndarray
    indicator: float
    centroid: np.ndarray
    covariance: np.ndarray
    volume: float

    @property
    def n_points(self):
        return self.point_indices.shape[0]


@dataclass
class PhysicalPartition:
    elements: list
    total_sq: float
    labels: np.ndarray

    def __len__(self):
        return len(self.elements)

    @property
    def indicators(self):
        return np.array([e.indicator for e in self.elements])


def sign_patterns(Z):
    """Boolean activation patterns from pre-activations (``>=`` side is on)."""
    return np.asarray(Z) >= 0.0


def _pattern_hash(packed_row):
    return hashlib.blake2b(packed_row.tobytes(), digest_size=8).hexdigest()


def build_partition(model, mesh, f):
    """Group the mesh centroids into elements of the physical partition.

    ``f`` may be a callable or an array of its values at the centroids.
    Elements are ordered by their packed sign pattern, so the result does
    not depend on point order.
    """
    X = mesh.points
    w = mesh.volumes
    v, Z = forward(model, X)
    r = sample(mesh, f) - v
    bits = sign_patterns(Z)
    n_pts, d = X.shape

    if bits.shape[1] == 0:
        labels = np.zeros(n_pts, dtype=np.intp)
        keys = np.zeros((1, 0), dtype=np.uint8)
    else:
        packed = np.ascontiguousarray(np.packbits(bits, axis=1))
        void = packed.view(np.dtype((np.void, packed.shape[1]))).ravel()
        _, first, labels = np.unique(void, return_index=True, return_inverse=True)
        labels = labels.reshape(-1)
        keys = packed[first]
    n_el = keys.shape[0]

    wsq = np.bincount(labels, weights=w * r * r, minlength=n_el)
    W = np.bincount(labels, weights=w, minlength=n_el)
    centroid = np.stack(
        [np.bincount(labels, weights=w * X[:, j], minlength=n_el) for j in range(d)], axis=1
    ) / W[:, None]
    dX = X - centroid[labels]
    cov = np.empty((n_el, d, d))
    for a in range(d):
        for b in range(a, d):
            cov[:, a, b] = np.bincount(labels, weights=w * dX[:, a] * dX[:, b], minlength=n_el) / W
            cov[:, b, a] = cov[:, a, b]

    order = np.argsort(labels, kind="stable")
    splits = np.cumsum(np.bincount(labels, minlength=n_el))[:-1]
    members = np.split(order, splits)

    elements = []
    for k in range(n_el):
        pattern = bits[members[k][0]].copy() if bits.shape[1] else np.zeros(0, dtype=bool)
        elements.append(
            PhysicalElement(
                pattern=pattern,
                pattern_hash=_pattern_hash(keys[k]),
                point_indices=members[k],
                indicator=float(np.sqrt(wsq[k])),
                centroid=centroid[k],
                covariance=cov[k],
                volume=float(W[k]),
            )
        )
    return PhysicalPartition(elements, float(np.sum(wsq)), labels)


def total_estimator(partition, mesh, f):
    """Relative error estimate ``sqrt(sum xi_K^2) / ||f||_T``."""
    fnorm = discrete_norm(mesh, f)
    if fnorm == 0.0:
        raise ValueError("target has zero discrete norm; relative estimator undefined")
    return float(np.sqrt(partition.total_sq)) / fnorm


def _lexmin_unit(basis, tol=1e-12):
    """Lexicographically smallest unit vector in span(basis) with a positive
    first nonzero entry.  ``basis`` has orthonormal columns."""
    Q = basis
    d = Q.shape[0]
    for j in range(d):
        if Q.shape[1] == 1:
            break
        row = Q[j]
        if np.linalg.norm(row) <= tol:
            continue
        # restrict to the subspace with zero j-th entry
        _, _, vt = np.linalg.svd(row[None, :])
        Q = Q @ vt[1:].T
    u = Q[:, 0] / np.linalg.norm(Q[:, 0])
    nz = np.flatnonzero(np.abs(u) > tol)
    if nz.size and u[nz[0]] < 0:
        u = -u
    return u


def principal_direction(element, rtol=1e-10):
    """Return ``(min_variance_direction, max_variance_direction)``.

    Raises :class:`DegenerateElementError` when the element has fewer than
    two distinct points.  Directions are unit vectors with a positive first nonzero entry.  When
    eigenvalues tie, the lexicographically smallest admissible vector in
    the tied eigenspace is chosen.
    """
    if element.n_points < 2 or not np.any(element.covariance):
        raise DegenerateElementError(
            f"element {element.pattern_hash} has fewer than two distinct points"
        )
    vals, vecs = np.linalg.eigh(element.covariance)
    scale = max(abs(vals[-1]), np.finfo(float).tiny)
    tied_low = np.abs(vals - vals[0]) <= rtol * scale
    u_min = _lexmin_unit(vecs[:, tied_low])
    tied_high = np.abs(vals - vals[-1]) <= rtol * scale
    hi = vecs[:, tied_high]
    if tied_high.all():
        hi = hi - np.outer(u_min, u_min @ hi)
        q, s, _ = np.linalg.svd(hi, full_matrices=False)
        hi = q[:, s > 1e-8]
        if hi.shape[1] == 0:
            return u_min, u_min.copy()
    u_max = _lexmin_unit(hi)
    return u_min, u_max


def write_partition_csv(partition, path):
    d = partition.elements[0].centroid.shape[0] if partition.elements else 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["pattern_hash", "n_points", "indicator"] + [f"centroid_{j}" for j in range(d)])
        for e in partition.elements:
            w.writerow([e.pattern_hash, e.n_points, repr(e.indicator)] + [repr(float(c)) for c in e.centroid])
