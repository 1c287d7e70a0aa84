"""Coupling-matrix admissibility, Perron-Frobenius data and the Dynkin catalog.

All matrices are plain ``numpy`` float arrays of shape ``(N, N)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import (
    ComplexSpectrum,
    InvalidRank,
    NegativeEntry,
    NoConvergence,
    NotDiagonalizable,
    NotIrreducible,
    SpectralRadiusTooLarge,
)

IMAG_TOL = 1e-9
COND_CAP = 1e8

_RANK_RANGES = {
    "A": (1, None),
    "B": (1, None),
    "C": (1, None),
    "D": (2, None),
    "E": (6, 8),
    "F": (4, 4),
    "G": (2, 2),
    "T": (1, None),
}


@dataclass(frozen=True)
class SpectralData:
    """Real eigendecomposition ``M = T diag(eigenvalues) T^{-1}``.

    Eigenvalues are sorted in descending order and ``right_eigenvectors``
    holds the matching columns of ``T``.
    """

    eigenvalues: np.ndarray
    right_eigenvectors: np.ndarray
    inverse: np.ndarray
    spectral_radius: float

    def reconstruct(self) -> np.ndarray:
        T, d, Tinv = self.right_eigenvectors, self.eigenvalues, self.inverse
        return (T * d) @ Tinv


@dataclass(frozen=True)
class PerronData:
    lambda_pf: float
    w: np.ndarray


def as_matrix(M) -> np.ndarray:
    """Validate and convert ``M`` to a finite square float array."""
    A = np.array(M, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise ValueError(f"coupling matrix must be square and non-empty, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("coupling matrix has non-finite entries")
    return A


def _path(n: int) -> np.ndarray:
    A = np.zeros((n, n))
    i = np.arange(n - 1)
    A[i, i + 1] = A[i + 1, i] = 1.0
    return A


def _cartan_from_adjacency(A: np.ndarray) -> np.ndarray:
    return 2.0 * np.eye(len(A)) - A


def cartan_matrix(family: str, rank: int) -> np.ndarray:
    """Cartan matrix with ``a_ij = 2(α_i, α_j)/(α_i, α_i)``, Bourbaki node order."""
    family = family.upper()
    n = int(rank)
    if family not in _RANK_RANGES:
        raise InvalidRank(f"unknown family {family!r}")
    lo, hi = _RANK_RANGES[family]
    if n < lo or (hi is not None and n > hi):
        raise InvalidRank(f"rank {n} outside the valid range for family {family}")

    if family in ("A", "T"):
        return _cartan_from_adjacency(_path(n))
    if family == "B":
        A = _path(n)
        if n >= 2:
            A[n - 1, n - 2] = 2.0  # short root last
        return _cartan_from_adjacency(A)
    if family == "C":
        return cartan_matrix("B", n).T.copy()
    if family == "D":
        A = np.zeros((n, n))
        for i in range(n - 3):
            A[i, i + 1] = A[i + 1, i] = 1.0
        if n >= 3:
            for leaf in (n - 2, n - 1):
                A[n - 3, leaf] = A[leaf, n - 3] = 1.0
        return _cartan_from_adjacency(A)
    if family == "E":
        # chain 1-3-4-5-...-n with node 2 attached to node 4
        A = np.zeros((n, n))
        chain = [0] + list(range(2, n))
        for a, b in zip(chain[:-1], chain[1:]):
            A[a, b] = A[b, a] = 1.0
        A[1, 3] = A[3, 1] = 1.0
        return _cartan_from_adjacency(A)
    if family == "F":
        A = _path(4)
        A[2, 1] = 2.0
        return _cartan_from_adjacency(A)
    # G2, long root first
    return np.array([[2.0, -1.0], [-3.0, 2.0]])


def dynkin_adjacency(family: str, rank: int) -> np.ndarray:
    """Adjacency matrix of a finite Dynkin diagram or of the tadpole ``T_N``.

    For every family this is ``2*I - Cartan``; the tadpole is the ``A_N``
    path with an extra loop on the first node.

    >>> dynkin_adjacency("G", 2)
    array([[0., 1.],
           [3., 0.]])
    """
    family = family.upper()
    A = 2.0 * np.eye(int(rank)) - cartan_matrix(family, rank)
    if family == "T":
        A[0, 0] = 1.0
    return A + 0.0  # normalise -0.0


def is_irreducible(M) -> bool:
    """True iff the directed graph with edges ``i -> j`` for ``M_ij > 0`` is strongly connected."""
    A = as_matrix(M)
    if np.any(A < 0):
        raise NegativeEntry("irreducibility is only defined here for non-negative matrices")
    if A.shape[0] == 1:
        return bool(A[0, 0] > 0)
    n_comp, _ = connected_components(A > 0, directed=True, connection="strong")
    return n_comp == 1


def check_mat_lt2(M, tol: float = IMAG_TOL, cond_cap: float = COND_CAP) -> SpectralData:
    """Check that ``M`` is real-diagonalisable with all eigenvalues in (-2, 2).

    Parameters
    ----------
    M : array_like
        Square real matrix.
    tol : float
        Largest tolerated imaginary part of any eigenvalue.
    cond_cap : float
        Largest tolerated condition number of the eigenvector matrix.

    Returns
    -------
    SpectralData

    Raises
    ------
    ComplexSpectrum, NotDiagonalizable, SpectralRadiusTooLarge
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    A = as_matrix(M)
    vals, vecs = np.linalg.eig(A)
    if np.max(np.abs(vals.imag)) >= tol:
        raise ComplexSpectrum(f"eigenvalues {vals} are not real to within {tol:g}")
    order = np.argsort(-vals.real, kind="stable")
    vals = vals.real[order]
    vecs = vecs[:, order]
    if np.max(np.abs(vecs.imag)) > tol * max(1.0, np.max(np.abs(vecs.real))):
        # a real eigenvalue always has a real eigenvector; LAPACK may hand back
        # a complex phase for (nearly) degenerate pairs
        vecs = _realify(A, vals)
    else:
        vecs = vecs.real
    cond = np.linalg.cond(vecs)
    if not np.isfinite(cond) or cond > cond_cap:
        raise NotDiagonalizable(f"eigenvector matrix condition number {cond:.3g} exceeds {cond_cap:g}")
    radius = float(np.max(np.abs(vals)))
    if radius >= 2.0:
        raise SpectralRadiusTooLarge(
            f"spectral radius {radius:.12g} is not below 2 (eigenvalues must lie in (-2, 2))"
        )
    Tinv = np.linalg.inv(vecs)
    return SpectralData(eigenvalues=vals, right_eigenvectors=vecs, inverse=Tinv, spectral_radius=radius)


def _realify(A, vals):
    """Real eigenvectors from null spaces of ``A - λI``, grouped by eigenvalue."""
    n = len(A)
    cols = []
    i = 0
    while i < n:
        j = i
        while j + 1 < n and abs(vals[j + 1] - vals[i]) < 1e-8 * max(1.0, abs(vals[i])):
            j += 1
        mult = j - i + 1
        _, _, vt = np.linalg.svd(A - vals[i] * np.eye(n))
        cols.extend(vt[-mult:])
        i = j + 1
    return np.array(cols).T


def perron_frobenius(G, tol: float = 1e-13, max_iter: int = 100_000) -> PerronData:
    """Perron-Frobenius eigenpair by shifted power iteration.

    Iterates on ``G + I`` starting from the all-ones vector, which keeps the
    dominant eigenvalue isolated for bipartite graphs. Stops once successive
    Rayleigh quotients and the eigen-residual ``||Gw - λw||_∞ / ||w||_∞`` are
    both below ``tol``.
    """
    A = as_matrix(G)
    if A.shape == (1, 1) and A[0, 0] >= 0:
        # a 1x1 matrix carries its own eigenpair; this also admits A_1 = [[0]]
        return PerronData(lambda_pf=float(A[0, 0]), w=np.ones(1))
    if not is_irreducible(A):
        raise NotIrreducible("Perron-Frobenius data requires an irreducible matrix")
    n = len(A)
    B = A + np.eye(n)
    x = np.ones(n)
    lam_old = np.inf
    for _ in range(max_iter):
        y = B @ x
        lam = float(x @ y / (x @ x)) - 1.0
        x = y / np.max(np.abs(y))
        resid = np.max(np.abs(A @ x - lam * x))
        if abs(lam - lam_old) < tol and resid < tol:
            break
        lam_old = lam
    else:
        raise NoConvergence(f"power iteration did not converge in {max_iter} steps")
    w = x / np.max(x)
    if np.any(w <= 0):
        raise NoConvergence("power iteration produced a non-positive eigenvector")
    lam = float(w @ (A @ w) / (w @ w))
    return PerronData(lambda_pf=lam, w=w)
