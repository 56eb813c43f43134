"""Optimal output weights for frozen hinges.

With the hinge parameters fixed the model is linear in ``(c0, c)``, so the
best discrete least-squares fit solves ``M c = F`` with the Gram matrix of
the basis ``{1, relu(omega_i . x - b_i)}`` under the quadrature inner
product.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .exceptions import SingularSystemError
from .network import forward
from .quadrature import sample

__all__ = ["MassSystem", "basis_matrix", "assemble", "cholesky", "solve_output", "fit_output"]


@dataclass
class MassSystem:
    matrix: np.ndarray
    rhs: np.ndarray

    @property
    def size(self):
        return self.rhs.shape[0]


def basis_matrix(model, points):
    """``(N, n + 1)`` array whose columns are the basis functions at ``points``."""
    _, Z = forward(model, points)
    return np.hstack([np.ones((Z.shape[0], 1)), np.maximum(Z, 0.0)])


def assemble(model, mesh, f):
    Phi = basis_matrix(model, mesh.points)
    wPhi = Phi * mesh.volumes[:, None]
    M = Phi.T @ wPhi
    M = 0.5 * (M + M.T)
    F = wPhi.T @ sample(mesh, f)
    return MassSystem(M, F)


def _cholesky(A):
    L, info = lapack.dpotrf(A, lower=1, clean=1)
    if info < 0:
        raise ValueError(f"dpotrf: illegal argument {-info}")
    if info == 0 and A.shape[0]:
        # a pivot at rounding level means the matrix is singular in floating point
        piv = np.diag(L) ** 2
        tiny = np.flatnonzero(piv <= A.shape[0] * np.finfo(float).eps * np.max(np.diag(A)))
        if tiny.size:
            info = int(tiny[0]) + 1
    return L, info


def cholesky(matrix):
    """Lower Cholesky factor of ``matrix``, without any diagonal shift."""
    L, info = _cholesky(np.array(matrix, dtype=float, order="F"))
    if info > 0:
        raise SingularSystemError(int(info) - 1)
    return L


def solve_output(system):
    """Solve ``M c = F`` by Cholesky; returns ``(c0, c)``.

    If the factorization fails, the diagonal is shifted once by
    ``1e-12 * trace / n`` and the factorization retried.

    Raises
    ------
    SingularSystemError
        If the shifted matrix is still not positive definite.  ``pivot`` is
        the 0-based index of the first failing leading minor.
    """
    A = np.array(system.matrix, dtype=float, order="F")
    L, info = _cholesky(A)
    if info > 0:
        n = A.shape[0]
        shift = 1e-12 * np.trace(A) / n
        L, info = _cholesky(A + shift * np.eye(n))
        if info > 0 or shift <= 0:
            raise SingularSystemError(int(info) - 1 if info > 0 else 0)
    x, info = lapack.dpotrs(L, np.asarray(system.rhs, dtype=float), lower=1)
    if info != 0:
        raise ValueError(f"dpotrs failed with info={info}")
    return float(x[0]), x[1:].copy()


def fit_output(model, mesh, f):
    """Return a copy of ``model`` with output weights re-solved on ``mesh``."""
    c0, c = solve_output(assemble(model, mesh, f))
    return model.with_output(c0, c)
