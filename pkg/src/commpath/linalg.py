"""Matrix tuples, the tuple metric, partitions and joint spectral tools."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from ._validation import as_components, as_matrix, check_positive, check_same_shape

VARIETIES = ("none", "cube", "disk", "torus", "sphere", "spherical-unitary")
HERMITIAN_VARIETIES = ("cube", "sphere")


class NotCommutingError(ValueError):
    """Raised when a tuple that must commute (or be normal) does not."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class ConvergenceError(RuntimeError):
    """Raised when joint diagonalization cannot reach the requested residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class BudgetInfeasible(RuntimeError):
    """Raised when a requested accuracy budget cannot be met."""


def check_variety(variety: str) -> str:
    if variety in VARIETIES:
        return variety
    if isinstance(variety, str) and variety.startswith("manifold:") and len(variety) > 9:
        return variety
    raise ValueError(f"unknown variety {variety!r}")


def is_hermitian_variety(variety: str) -> bool:
    return variety in HERMITIAN_VARIETIES or variety.startswith("manifold:")


@dataclass(frozen=True, eq=False)
class MatrixTuple:
    """Ordered tuple of ``m`` square complex matrices of size ``n``.

    Parameters
    ----------
    components : array_like, shape (m, n, n)
        The matrices. A single matrix is promoted to a 1-tuple.
    variety : str
        Tag naming the matrix variety the tuple is meant to live on.
    """

    components: np.ndarray
    variety: str = "none"

    def __post_init__(self):
        object.__setattr__(self, "components", as_components(self.components, "components"))
        object.__setattr__(self, "variety", check_variety(self.variety))

    @property
    def m(self) -> int:
        return self.components.shape[0]

    @property
    def n(self) -> int:
        return self.components.shape[1]

    def __len__(self) -> int:
        return self.m

    def __getitem__(self, j):
        return self.components[j]

    def __iter__(self):
        return iter(self.components)

    def with_variety(self, variety: str) -> "MatrixTuple":
        return MatrixTuple(self.components, variety)


@dataclass(frozen=True, eq=False)
class JointSpectrum:
    """Joint eigenvalues of a commuting normal tuple.

    ``points[k, j]`` is the eigenvalue of component ``j`` on the ``k``-th
    column of ``basis``.
    """

    points: np.ndarray
    basis: np.ndarray

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def m(self) -> int:
        return self.points.shape[1]


def opnorm(A) -> np.ndarray | float:
    """Spectral norm of a matrix, or of each matrix in a stack."""
    A = np.asarray(A)
    if A.shape[-1] == 0:
        return 0.0 if A.ndim == 2 else np.zeros(A.shape[:-2])
    s = np.linalg.svd(A, compute_uv=False)[..., 0]
    return float(s) if A.ndim == 2 else s


def hermitize(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + np.conj(np.swapaxes(A, -1, -2)))


def dagger(A: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(A, -1, -2))


def metric_eth(S, T) -> float:
    """Largest spectral-norm distance between corresponding components."""
    a = as_components(S, "S")
    b = as_components(T, "T")
    check_same_shape(a, b)
    return float(np.max(opnorm(a - b)))


def max_commutator(comps: np.ndarray) -> float:
    """Largest ``||[X_j, X_k]||`` over pairs ``j < k`` (0 for a 1-tuple)."""
    m = comps.shape[0]
    best = 0.0
    for j in range(m):
        for k in range(j + 1, m):
            c = comps[j] @ comps[k] - comps[k] @ comps[j]
            best = max(best, opnorm(c))
    return best


def max_normality_defect(comps: np.ndarray) -> float:
    d = comps @ dagger(comps) - dagger(comps) @ comps
    return float(np.max(opnorm(d)))


def max_hermiticity_defect(comps: np.ndarray) -> float:
    return float(np.max(opnorm(comps - dagger(comps))))


def hermitian_partition(X, tol: float = 1e-8) -> MatrixTuple:
    """Split normal matrices into real and imaginary hermitian parts.

    Returns ``(X_11, ..., X_1m, X_21, ..., X_2m)`` with
    ``X_1j = (X_j + X_j^*)/2`` and ``X_2j = (X_j - X_j^*)/(2i)``.
    """
    comps = as_components(X)
    scale = max(1.0, float(np.max(opnorm(comps))) ** 2)
    defect = max_normality_defect(comps)
    if defect > tol * scale:
        raise NotCommutingError(f"component is not normal (defect {defect:.3e})", defect)
    adj = dagger(comps)
    re = 0.5 * (comps + adj)
    im = -0.5j * (comps - adj)
    variety = "cube" if getattr(X, "variety", "none") == "disk" else "none"
    return MatrixTuple(np.concatenate([re, im]), variety)


def juncture(H) -> MatrixTuple:
    """Reassemble ``(H_1 + i H_{m+1}, ..., H_m + i H_{2m})``."""
    comps = as_components(H, "H")
    if comps.shape[0] % 2:
        raise ValueError("juncture needs an even number of components")
    m = comps.shape[0] // 2
    variety = "disk" if getattr(H, "variety", "none") == "cube" else "none"
    return MatrixTuple(comps[:m] + 1j * comps[m:], variety)


def interleaved_partition(X) -> np.ndarray:
    """``(Re X_1, Im X_1, ..., Re X_m, Im X_m)`` for normal components."""
    comps = as_components(X)
    adj = dagger(comps)
    out = np.empty((2 * comps.shape[0],) + comps.shape[1:], dtype=complex)
    out[0::2] = 0.5 * (comps + adj)
    out[1::2] = -0.5j * (comps - adj)
    return out


def interleaved_juncture(H) -> np.ndarray:
    """Inverse of :func:`interleaved_partition`."""
    comps = as_components(H, "H")
    if comps.shape[0] % 2:
        raise ValueError("interleaved juncture needs an even number of components")
    return comps[0::2] + 1j * comps[1::2]


def full_pinching(A) -> np.ndarray:
    """Keep the diagonal of ``A`` and zero everything else."""
    A = as_matrix(A)
    return np.diag(np.diag(A))


# fixed, generic weights so that joint diagonalization is reproducible
_COMBINATION_RNG_SEED = 0x9E3779B9


def _generic_coefficients(k: int) -> np.ndarray:
    rng = np.random.default_rng(_COMBINATION_RNG_SEED)
    return rng.standard_normal(k) + 2.0


def _normalize_phases(Q: np.ndarray) -> np.ndarray:
    # largest entry of every column made real and positive
    idx = np.argmax(np.abs(Q), axis=0)
    piv = Q[idx, np.arange(Q.shape[1])]
    return Q * (np.conj(piv) / np.abs(piv))


# off-diagonal level (relative) below which joint eigenbases are left alone
POLISH_TOL = 1e-13


def _offdiag_residual(comps: np.ndarray, Q: np.ndarray, scales: np.ndarray) -> float:
    D = dagger(Q)[None] @ comps @ Q[None]
    n = Q.shape[0]
    off = D.copy()
    off[:, np.arange(n), np.arange(n)] = 0
    per = np.max(np.abs(off), axis=(1, 2)) / np.maximum(scales, np.finfo(float).tiny)
    return float(np.max(per))


def _jacobi_sweeps(
    family: np.ndarray,
    V: np.ndarray,
    max_sweeps: int,
    threshold: float = 1e-15,
    pair_tol: float = 0.0,
):
    """Cyclic complex Jacobi rotations for a family of hermitian matrices.

    Only index pairs whose off-diagonal entries exceed ``pair_tol`` are
    visited, so a nearly diagonal family costs a handful of rotations.
    """
    F = family.copy()
    V = V.copy()
    n = V.shape[0]
    upper = np.triu(np.ones((n, n), dtype=bool), 1)
    for _ in range(max_sweeps):
        off = np.max(np.abs(F), axis=0)
        pairs = np.argwhere(upper & (off > pair_tol))
        rotated = False
        for p, q in pairs:
            g = np.stack(
                [F[:, p, p] - F[:, q, q], F[:, p, q] + F[:, q, p], 1j * (F[:, q, p] - F[:, p, q])]
            )
            G = np.real(g @ np.conj(g).T)
            _, vec = np.linalg.eigh(G)
            x, y, z = vec[:, -1]
            if x < 0:
                x, y, z = -x, -y, -z
            c = np.sqrt(0.5 + 0.5 * x)
            s = 0.5 * (y - 1j * z) / c
            if abs(s) > threshold:
                rotated = True
                R = np.array([[c, -np.conj(s)], [s, c]])
                pq = [p, q]
                F[:, pq, :] = np.conj(R).T @ F[:, pq, :]
                F[:, :, pq] = F[:, :, pq] @ R
                V[:, pq] = V[:, pq] @ R
        if not rotated:
            break
    return V


def commuting_residual(comps: np.ndarray) -> float:
    """Largest normality defect or pairwise commutator norm."""
    return max(max_normality_defect(comps), max_commutator(comps))


def joint_diagonalize(
    X,
    tol: float = 1e-8,
    coefficients=None,
    max_sweeps: int = 30,
) -> tuple[np.ndarray, JointSpectrum]:
    """Simultaneously diagonalize a commuting tuple of normal matrices.

    A generic real combination of the hermitian parts is diagonalized first;
    cyclic Jacobi sweeps then repair clusters the combination cannot split.

    Parameters
    ----------
    X : MatrixTuple or array_like
        Pairwise commuting normal matrices.
    tol : float
        Relative tolerance for the commutator check and for the off-diagonal
        residual of ``W^* X_j W``.
    coefficients : array_like, optional
        Weights for the ``2m`` hermitian parts; a fixed generic choice is used
        by default.

    Returns
    -------
    W : ndarray
        Unitary whose columns are joint eigenvectors.
    spectrum : JointSpectrum
        Joint eigenvalues in the column order of ``W``.
    """
    comps = as_components(X)
    check_positive(tol, "tol")
    m, n, _ = comps.shape
    scales = opnorm(comps)
    scale = float(np.max(scales))
    hermitian = max_hermiticity_defect(comps) <= tol * max(scale, 1e-300)
    if scale == 0.0:
        Q = np.eye(n, dtype=complex)
        return Q, JointSpectrum(np.zeros((n, m)), Q)
    residual = commuting_residual(comps)
    if residual > tol * scale:
        raise NotCommutingError(
            f"tuple is not a commuting normal family (residual {residual:.3e})", residual
        )

    offdiag = comps.copy()
    offdiag[:, np.arange(n), np.arange(n)] = 0
    if not np.any(offdiag):
        Q = np.eye(n, dtype=complex)
    else:
        adj = dagger(comps)
        re = 0.5 * (comps + adj)
        im = -0.5j * (comps - adj)
        family = re if hermitian else np.concatenate([re, im])
        if coefficients is None:
            coefficients = [1.0] if family.shape[0] == 1 else _generic_coefficients(family.shape[0])
        c = np.asarray(coefficients, dtype=float)
        if c.shape != (family.shape[0],):
            raise ValueError(f"expected {family.shape[0]} coefficients, got shape {c.shape}")
        C = hermitize(np.tensordot(c, family, axes=1))
        _, Q = np.linalg.eigh(C)
        # close eigenvalues of C leave eigenvectors mixed at the 1e-10 level;
        # Jacobi rotations on the offending pairs polish them to round-off
        polish = POLISH_TOL * max(scale, np.finfo(float).tiny)
        if _offdiag_residual(comps, Q, scales) > tol:
            sweeps, pair_tol = max_sweeps, 0.0
        else:
            sweeps, pair_tol = min(max_sweeps, 3), polish
        F = dagger(Q)[None] @ family @ Q[None]
        if sweeps > 0 and (pair_tol == 0.0 or np.max(np.abs(F[:, ~np.eye(n, dtype=bool)])) > pair_tol):
            Q = Q @ _jacobi_sweeps(F, np.eye(n, dtype=complex), sweeps, pair_tol=pair_tol)
        Q = _normalize_phases(Q)
        achieved = _offdiag_residual(comps, Q, scales)
        if achieved > tol:
            raise ConvergenceError(
                f"joint diagonalization stalled at relative residual {achieved:.3e}", achieved
            )
    D = dagger(Q)[None] @ comps @ Q[None]
    points = np.diagonal(D, axis1=1, axis2=2).T.copy()
    if hermitian:
        points = points.real.copy()
    return Q, JointSpectrum(points, Q)



def _as_points(A) -> np.ndarray:
    pts = getattr(A, "points", A)
    pts = np.asarray(pts)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] < 1:
        raise ValueError(f"expected an (n, m) array of points, got shape {pts.shape}")
    return pts


def _has_perfect_matching(allowed: np.ndarray) -> bool:
    match = maximum_bipartite_matching(csr_matrix(allowed.astype(np.int8)), perm_type="column")
    return bool(np.all(match >= 0))


def _greedy_assignment(cost: np.ndarray) -> np.ndarray:
    n = cost.shape[0]
    rows, cols = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    order = np.lexsort((cols.ravel(), rows.ravel(), cost.ravel()))
    perm = np.full(n, -1)
    used = np.zeros(n, dtype=bool)
    for flat in order:
        i, k = divmod(int(flat), n)
        if used[i] or perm[k] >= 0:
            continue
        perm[k] = i
        used[i] = True
    return perm


def eigenvalue_assignment(A, B, secondary=None, greedy_above: int = 256) -> np.ndarray:
    """Match the points of ``A`` to those of ``B`` minimizing the worst distance.

    The bottleneck value is found by bisection over the sorted edge costs with
    a bipartite matching feasibility test. Among bottleneck-optimal matchings
    the one minimizing ``secondary`` (by default the summed cost) is returned.
    Above ``greedy_above`` points a greedy nearest-pair matching is used.

    Parameters
    ----------
    A, B : JointSpectrum or array_like, shape (n, m)
    secondary : array_like, shape (n, n), optional
        Tie-breaking cost, ``secondary[i, k]`` for pairing ``A_i`` with ``B_k``.

    Returns
    -------
    perm : ndarray of int
        ``perm[k]`` is the index of the point of ``A`` paired with ``B_k``.
    """
    pa = _as_points(A)
    pb = _as_points(B)
    if pa.shape != pb.shape:
        raise ValueError(f"point sets differ in shape: {pa.shape} vs {pb.shape}")
    n = pa.shape[0]
    if np.array_equal(pa, pb):
        return np.arange(n)
    # sup-norm over coordinates, matching the tuple metric on diagonal tuples
    cost = np.max(np.abs(pa[:, None, :] - pb[None, :, :]), axis=2)
    if n > greedy_above:
        return _greedy_assignment(cost)
    values = np.unique(cost)
    lo, hi = 0, len(values) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _has_perfect_matching(cost <= values[mid]):
            hi = mid
        else:
            lo = mid + 1
    allowed = cost <= values[lo]
    sec = cost if secondary is None else np.asarray(secondary, dtype=float)
    if sec.shape != (n, n):
        raise ValueError(f"secondary cost must have shape {(n, n)}")
    big = (np.max(np.abs(sec)) + 1.0) * (n + 1)
    rows, cols = linear_sum_assignment(np.where(allowed, sec, big))
    perm = np.empty(n, dtype=int)
    perm[cols] = rows
    return perm


def _equal_point_clusters(points: np.ndarray, tol: float) -> list[np.ndarray]:
    n = points.shape[0]
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    dist = np.max(np.abs(points[:, None, :] - points[None, :, :]), axis=2)
    for i, k in zip(*np.nonzero(np.triu(dist <= tol, 1))):
        ri, rk = find(i), find(k)
        if ri != rk:
            parent[max(ri, rk)] = min(ri, rk)
    roots = np.array([find(i) for i in range(n)])
    return [np.nonzero(roots == r)[0] for r in np.unique(roots)]


def _polar_factor(M: np.ndarray) -> np.ndarray:
    U, _, Vh = np.linalg.svd(M)
    return U @ Vh


@dataclass(frozen=True, eq=False)
class Conjugation:
    """Result of :func:`conjugation_morphism`.

    ``psi_x`` equals ``W X W^*`` and is diagonal in ``basis`` (the joint
    eigenbasis of ``Y``), with ``points`` its diagonal. ``target_points`` are
    the joint eigenvalues of ``Y`` in the same basis.
    """

    W: np.ndarray
    psi_x: MatrixTuple
    basis: np.ndarray
    points: np.ndarray
    target_points: np.ndarray
    perm: np.ndarray
    eth_to_x: float
    eth_to_y: float


def diagonal_tuple(basis: np.ndarray, points: np.ndarray, hermitian: bool) -> np.ndarray:
    """Components ``basis @ diag(points[:, j]) @ basis^*``."""
    comps = np.ascontiguousarray(np.einsum("ik,kj,lk->jil", basis, points, np.conj(basis)))
    return hermitize(comps) if hermitian else comps


def conjugation_morphism(X, Y, tol: float = 1e-8) -> Conjugation:
    """Unitary ``W`` carrying ``X`` onto a tuple diagonal in ``Y``'s eigenbasis.

    The joint eigenvalues of ``X`` are paired with those of ``Y`` by
    :func:`eigenvalue_assignment`; among bottleneck-optimal pairings the one
    with the largest eigenvector overlap is preferred. Inside clusters of
    equal eigenvalues the basis of ``X`` is rotated to the closest match, so
    ``W`` stays as near the identity as the data allow.
    """
    xc = as_components(X, "X")
    yc = as_components(Y, "Y")
    check_same_shape(xc, yc, ("X", "Y"))
    Qx, sx = joint_diagonalize(xc, tol)
    Qy, sy = joint_diagonalize(yc, tol)
    overlap = np.abs(dagger(Qx) @ Qy) ** 2
    perm = eigenvalue_assignment(sx, sy, secondary=-overlap)
    Px = Qx[:, perm]
    scale = max(1.0, float(np.max(np.abs(sx.points))))
    for cluster in _equal_point_clusters(sx.points, 1e-10 * scale):
        cols = np.nonzero(np.isin(perm, cluster))[0]
        R = _polar_factor(dagger(Px[:, cols]) @ Qy[:, cols])
        Px[:, cols] = Px[:, cols] @ R
    W = Qy @ dagger(Px)
    points = sx.points[perm]
    hermitian = np.isrealobj(points)
    psi = diagonal_tuple(Qy, points, hermitian)
    variety = getattr(X, "variety", "none")
    return Conjugation(
        W=W,
        psi_x=MatrixTuple(psi, variety),
        basis=Qy,
        points=points,
        target_points=sy.points,
        perm=perm,
        eth_to_x=metric_eth(psi, xc),
        eth_to_y=metric_eth(psi, yc),
    )


def hausdorff_distance(A, B) -> float:
    """Euclidean Hausdorff distance between two finite point sets.

    Points may be complex scalars, or rows of an ``(k, d)`` array with real or
    complex coordinates.
    """
    pa = _as_points(A)
    pb = _as_points(B)
    if pa.shape[1] != pb.shape[1]:
        raise ValueError("point sets live in different dimensions")
    ra = np.concatenate([pa.real, pa.imag], axis=1) if np.iscomplexobj(pa) else pa
    rb = np.concatenate([pb.real, pb.imag], axis=1) if np.iscomplexobj(pb) else pb
    if ra.shape[1] != rb.shape[1]:
        ra = np.concatenate([pa.real, np.imag(pa)], axis=1)
        rb = np.concatenate([pb.real, np.imag(pb)], axis=1)
    d = np.sqrt(np.sum((ra[:, None, :] - rb[None, :, :]) ** 2, axis=2))
    return float(max(np.max(np.min(d, axis=1)), np.max(np.min(d, axis=0))))


def pseudospectrum_member(X, lam: complex, eps: float, rtol: float | None = None) -> bool:
    """Whether ``lam`` lies in the ``eps``-pseudospectrum of ``X``.

    Tests ``s_min(X - lam I) <= eps`` with a round-off allowance of
    ``rtol * ||X - lam I||`` (default ``10 n`` machine epsilons).
    """
    A = as_matrix(X, "X")
    check_positive(eps, "eps", allow_zero=True)
    n = A.shape[0]
    shifted = A - lam * np.eye(n)
    s = np.linalg.svd(shifted, compute_uv=False)
    if rtol is None:
        rtol = 10 * n * np.finfo(float).eps
    return bool(s[-1] <= eps + rtol * s[0])
