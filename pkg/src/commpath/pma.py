"""Uniform grids on [-1, 1] and commuting grid approximants of hermitian tuples."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import as_components, check_positive
from .linalg import (
    MatrixTuple,
    dagger,
    diagonal_tuple,
    hermitize,
    joint_diagonalize,
    max_hermiticity_defect,
    opnorm,
)

# eigenvalues this close to a support point fall into the lower bin
BIN_TIE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DeltaGrid:
    """Representative and support points of a ``delta``-dense grid on [-1, 1].

    Attributes
    ----------
    delta : float
        Requested resolution.
    spacing : float
        Half the gap between neighbouring representatives, never above ``delta``.
    rep_points : ndarray
        ``count`` increasing values from -1 to 1.
    support_points : ndarray
        ``count + 1`` bin edges, one half-gap outside every representative.
    """

    delta: float
    spacing: float
    rep_points: np.ndarray
    support_points: np.ndarray

    @property
    def count(self) -> int:
        return len(self.rep_points)

    def bin_index(self, x) -> np.ndarray:
        """Index of the half-open bin ``(s_k, s_{k+1}]`` holding each ``x``."""
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.support_points, x - BIN_TIE_TOL, side="left") - 1
        return np.clip(idx, 0, self.count - 1)

    def snap(self, x) -> np.ndarray:
        return self.rep_points[self.bin_index(x)]


def build_grids(delta: float) -> DeltaGrid:
    """Grid with spacing at most ``delta`` whose end representatives are -1 and 1.

    ``M = ceil(1 + 1/delta)`` representatives are spread evenly over [-1, 1],
    giving a half-gap ``1/(M-1) <= delta``.

    Examples
    --------
    >>> build_grids(0.5).rep_points
    array([-1.,  0.,  1.])
    """
    delta = check_positive(delta, "delta")
    if delta > 1:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    count = max(2, math.ceil(1.0 + 1.0 / delta - 1e-9))
    spacing = 1.0 / (count - 1)
    k = np.arange(count)
    rep = (2.0 * k - (count - 1)) / (count - 1)
    j = np.arange(count + 1)
    support = (2.0 * j - count) / (count - 1)
    return DeltaGrid(delta, spacing, rep, support)


@dataclass(frozen=True, eq=False)
class ProjectiveDecomposition:
    """Orthogonal partition of unity with a grid label per projector.

    Attributes
    ----------
    projectors : ndarray, shape (N, n, n)
    labels : ndarray, shape (N, m)
    source_dims : tuple of int
        ``(m, n)`` of the tuple that was decomposed.
    basis : ndarray, shape (n, n)
        Orthonormal basis whose columns span the projector ranges.
    members : tuple of ndarray
        Columns of ``basis`` spanning each projector.
    """

    projectors: np.ndarray
    labels: np.ndarray
    source_dims: tuple
    basis: np.ndarray
    members: tuple

    def __len__(self) -> int:
        return len(self.projectors)

    def reconstruct(self) -> np.ndarray:
        """Components ``sum_j labels[j, k] P_j``."""
        return np.einsum("jk,jab->kab", self.labels, self.projectors)


def _group_columns(labels: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    keys, inverse = np.unique(labels, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    return keys, [np.nonzero(inverse == g)[0] for g in range(len(keys))]


def decomposition_from_labels(
    basis: np.ndarray, labels: np.ndarray, keys: np.ndarray | None = None
) -> ProjectiveDecomposition:
    """Group basis columns with equal keys into spectral projectors.

    ``keys`` defaults to ``labels``. Groups are ordered lexicographically by key.
    """
    n = basis.shape[0]
    _, groups = _group_columns(labels if keys is None else keys)
    projectors = np.empty((len(groups), n, n), dtype=complex)
    for g, cols in enumerate(groups):
        V = basis[:, cols]
        projectors[g] = hermitize(V @ dagger(V))
    group_labels = np.array([labels[cols[0]] for cols in groups], dtype=float)
    return ProjectiveDecomposition(
        projectors, group_labels, (labels.shape[1], n), basis, tuple(groups)
    )


def _cpma_from_spectrum(basis: np.ndarray, points: np.ndarray, grid: DeltaGrid):
    labels = grid.snap(points)
    decomp = decomposition_from_labels(basis, labels)
    Xt = diagonal_tuple(basis, labels, hermitian=True)
    return Xt, decomp


def _check_cube(comps: np.ndarray, tol: float) -> None:
    scale = max(1.0, float(np.max(opnorm(comps))))
    defect = max_hermiticity_defect(comps)
    if defect > tol * scale:
        raise ValueError(f"input is not hermitian (defect {defect:.3e})")
    excess = float(np.max(opnorm(comps))) - 1.0
    if excess > 1e-12:
        raise ValueError(f"input norm exceeds 1 by {excess:.3e}")


def cpma_1d(X, delta: float, tol: float = 1e-8):
    """Commuting grid approximant of one hermitian contraction.

    Every eigenvalue is moved to the representative of its bin, so the result
    commutes with ``X``, is within ``delta`` of it, and has spectrum on the grid.

    Parameters
    ----------
    X : array_like, shape (n, n)
        Hermitian matrix with ``||X|| <= 1``.
    delta : float
        Grid resolution in (0, 1].

    Returns
    -------
    Xtilde : ndarray, shape (n, n)
    decomp : ProjectiveDecomposition
    """
    comps = as_components(X, "X")
    if comps.shape[0] != 1:
        raise ValueError("cpma_1d takes a single matrix")
    grid = build_grids(delta)
    _check_cube(comps, tol)
    w, V = np.linalg.eigh(hermitize(comps[0]))
    Xt, decomp = _cpma_from_spectrum(V, w[:, None], grid)
    return Xt[0], decomp


def cpma_md(X, delta: float, tol: float = 1e-8):
    """Commuting grid approximant of a commuting hermitian tuple.

    Joint eigenvalues are snapped coordinate-wise to the grid; the spectral
    projectors of equal label vectors form the returned decomposition.

    Returns
    -------
    Xtilde : MatrixTuple
    decomp : ProjectiveDecomposition

    Raises
    ------
    NotCommutingError
        If the components do not commute within ``tol``.
    """
    comps = as_components(X, "X")
    grid = build_grids(delta)
    _check_cube(comps, tol)
    if comps.shape[0] == 1:
        Xt, decomp = cpma_1d(comps[0], delta, tol)
        return MatrixTuple(Xt[None], "cube"), decomp
    Q, spec = joint_diagonalize(comps, tol)
    Xt, decomp = _cpma_from_spectrum(Q, np.real(spec.points), grid)
    return MatrixTuple(Xt, "cube"), decomp
