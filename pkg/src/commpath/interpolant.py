"""Unitary corrections and isospectral rotations between nearby commuting tuples."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import schur

from ._validation import as_components, as_matrix, check_positive
from .linalg import (
    BudgetInfeasible,
    Conjugation,
    MatrixTuple,
    conjugation_morphism,
    dagger,
    hermitize,
    max_hermiticity_defect,
    metric_eth,
    opnorm,
)
from .pma import ProjectiveDecomposition, _cpma_from_spectrum, build_grids

__all__ = [
    "BudgetInfeasible",
    "CorrectionResult",
    "IsospectralInterpolant",
    "almost_commuting_unitary_correction",
    "build_interpolant",
    "projection_exchange_unitary",
    "unitary_log_generator",
]


def _polar_unitary(T: np.ndarray) -> np.ndarray:
    U, _, Vh = np.linalg.svd(T)
    return U @ Vh


def projection_exchange_unitary(P, Q) -> np.ndarray:
    """Unitary ``U`` close to the identity with ``U P U^* = Q``.

    ``U`` is the unitary polar factor of ``QP + (1 - Q)(1 - P)``, which is
    invertible whenever ``||P - Q|| < 1``; then ``||1 - U|| <= sqrt(2) ||P - Q||``.

    Raises
    ------
    ValueError
        If ``||P - Q|| >= 1``.
    """
    P = as_matrix(P, "P")
    Q = as_matrix(Q, "Q")
    if P.shape != Q.shape:
        raise ValueError("projectors differ in size")
    gap = opnorm(P - Q)
    if gap >= 1.0:
        raise ValueError(f"projectors too far apart (||P - Q|| = {gap:.3e} >= 1)")
    eye = np.eye(P.shape[0])
    T = Q @ P + (eye - Q) @ (eye - P)
    return _polar_unitary(T)


@dataclass(frozen=True, eq=False)
class CorrectionResult:
    """Output of :func:`almost_commuting_unitary_correction`.

    Attributes
    ----------
    Z : ndarray
        Unitary commuting with every projector, ``Z = Wtilde^*``.
    Wtilde : ndarray
        ``sum_j W_j W P_j``.
    defects : ndarray
        ``||W P_j W^* - P_j||`` per projector.
    bound : float
        ``sqrt(2) N max(defects)``.
    residual : float
        Achieved ``||1 - W Z||``.
    """

    Z: np.ndarray
    Wtilde: np.ndarray
    defects: np.ndarray
    bound: float
    residual: float


def almost_commuting_unitary_correction(W, decomp, nu: float | None = None) -> CorrectionResult:
    """Unitary close to ``W^*`` that commutes with a partition of unity.

    Each projector ``P_j`` is pulled back from ``W P_j W^*`` by
    :func:`projection_exchange_unitary` and the pieces are glued into
    ``Wtilde = sum_j W_j W P_j``.

    Parameters
    ----------
    W : array_like
        Unitary nearly commuting with the projectors.
    decomp : ProjectiveDecomposition or array_like, shape (N, n, n)
    nu : float, optional
        Required bound on ``||1 - W Z||``.

    Raises
    ------
    BudgetInfeasible
        If some defect reaches ``1/(sqrt(2) N)``, or the achieved residual is
        not below ``nu``.
    """
    W = as_matrix(W, "W")
    projectors = np.asarray(getattr(decomp, "projectors", decomp), dtype=complex)
    N = projectors.shape[0]
    moved = W[None] @ projectors @ dagger(W)[None]
    defects = opnorm(moved - projectors)
    limit = 1.0 / (math.sqrt(2.0) * N)
    worst = int(np.argmax(defects))
    if defects[worst] >= limit:
        raise BudgetInfeasible(
            f"projector {worst} has defect {defects[worst]:.3e}, above the limit {limit:.3e} for N={N}"
        )
    Wtilde = np.zeros_like(W)
    for j in range(N):
        Wj = projection_exchange_unitary(moved[j], projectors[j])
        Wtilde += Wj @ W @ projectors[j]
    Z = dagger(Wtilde)
    residual = opnorm(np.eye(W.shape[0]) - W @ Z)
    bound = math.sqrt(2.0) * N * float(defects[worst])
    if nu is not None and residual >= nu:
        raise BudgetInfeasible(f"correction residual {residual:.3e} is not below nu={nu:.3e}")
    return CorrectionResult(Z, Wtilde, defects, bound, residual)


def unitary_log_generator(Z) -> np.ndarray:
    """Hermitian ``H`` with ``||H|| <= 1`` and ``exp(i pi H / 2) = Z``.

    Uses the complex Schur form of ``Z`` (diagonal for a unitary) and the
    principal phase of each eigenvalue.

    Raises
    ------
    ValueError
        If ``||1 - Z|| >= sqrt(2)`` or some phase leaves ``[-pi/2, pi/2]``.
    """
    Z = as_matrix(Z, "Z")
    n = Z.shape[0]
    dist = opnorm(np.eye(n) - Z)
    if dist >= math.sqrt(2.0):
        raise ValueError(f"||1 - Z|| = {dist:.3e} is not below sqrt(2)")
    T, V = schur(Z, output="complex")
    phases = np.angle(np.diag(T))
    if np.any(np.abs(phases) > np.pi / 2):
        raise ValueError("eigenvalue phase outside the principal range")
    return hermitize((V * (2.0 * phases / np.pi)) @ dagger(V))


@dataclass(frozen=True, eq=False)
class IsospectralInterpolant:
    """Rotation ``psi_t = Ad[exp(i pi t H / 2)]`` carrying ``Xtilde`` to ``Ytilde``.

    Attributes
    ----------
    W : ndarray
        Unitary with ``W X W^*`` diagonal in the eigenbasis of ``Y``.
    Wtilde : ndarray
        Correction of ``W`` that commutes with the projectors of ``Ytilde``.
    Z : ndarray
        ``Wtilde^* W = exp(i pi H / 2)``; ``Ad[Z]`` and ``Ad[W]`` agree on ``Xtilde``.
    H : ndarray
        Hermitian generator with ``||H|| <= 1``.
    Xtilde : MatrixTuple
        Commuting approximant of ``X``.
    Ytilde : MatrixTuple
        ``W Xtilde W^*``, diagonal in the eigenbasis of ``Y``.
    decomp : ProjectiveDecomposition
        Spectral projectors of ``Ytilde``.
    conjugation : Conjugation
    delta : float
        Achieved ``d(X, Xtilde)``.
    nu : float
        Achieved bound on ``d(Xtilde, psi_t(Xtilde))``.
    correction_residual : float
        ``||1 - Z||``.
    """

    W: np.ndarray
    Wtilde: np.ndarray
    Z: np.ndarray
    H: np.ndarray
    Xtilde: MatrixTuple
    Ytilde: MatrixTuple
    decomp: ProjectiveDecomposition
    conjugation: Conjugation
    delta: float
    nu: float
    correction_residual: float

    def __post_init__(self):
        w, V = np.linalg.eigh(self.H)
        object.__setattr__(self, "_eig", (w, V))

    def unitary(self, t: float) -> np.ndarray:
        """``exp(i pi t H / 2)``."""
        w, V = self._eig
        return (V * np.exp(0.5j * np.pi * t * w)) @ dagger(V)

    def apply(self, t: float, A=None) -> np.ndarray:
        """``psi_t(A)`` componentwise; ``A`` defaults to ``Xtilde``.

        ``t = 0`` returns the input unchanged.
        """
        comps = self.Xtilde.components if A is None else as_components(A, "A")
        if t == 0:
            return comps.copy()
        U = self.unitary(t)
        out = U[None] @ comps @ dagger(U)[None]
        if max_hermiticity_defect(comps) == 0.0:
            out = hermitize(out)
        return out


def build_interpolant(X, Y, delta: float, nu: float | None = None, tol: float = 1e-8) -> IsospectralInterpolant:
    """Isospectral interpolant between nearby commuting hermitian contraction tuples.

    Steps: conjugate ``X`` into the eigenbasis of ``Y``; snap that tuple to a
    ``delta`` grid, giving ``Ytilde`` and ``Xtilde = W^* Ytilde W``; correct
    ``W`` to commute with the grid projectors; take the logarithm of
    ``Wtilde^* W``.

    Parameters
    ----------
    X, Y : MatrixTuple or array_like
        Commuting hermitian tuples with ``||X_j||, ||Y_j|| <= 1``.
    delta : float
        Grid resolution, at least ``d(X, Y)``.
    nu : float, optional
        Required bound for the rotation; exceeded bounds raise.

    Raises
    ------
    BudgetInfeasible
        If the correction cannot be certified at this ``delta`` or the
        achieved rotation bound is not below ``nu``.
    """
    xc = as_components(X, "X")
    yc = as_components(Y, "Y")
    delta = check_positive(delta, "delta")
    grid = build_grids(min(delta, 1.0))
    for name, comps in (("X", xc), ("Y", yc)):
        scale = max(1.0, float(np.max(opnorm(comps))))
        if max_hermiticity_defect(comps) > tol * scale:
            raise ValueError(f"{name} is not hermitian")
        if float(np.max(opnorm(comps))) > 1.0 + 1e-12:
            raise ValueError(f"{name} is not a contraction tuple")
    mu = metric_eth(xc, yc)
    if mu > delta + 1e-12:
        raise BudgetInfeasible(f"d(X, Y) = {mu:.3e} exceeds delta = {delta:.3e}")
    conj = conjugation_morphism(xc, yc, tol)
    Yt, decomp = _cpma_from_spectrum(conj.basis, np.real(conj.points), grid)
    interp = interpolant_from_targets(conj, Yt, decomp, xc)
    if nu is not None and interp.nu >= nu:
        raise BudgetInfeasible(f"rotation bound {interp.nu:.3e} is not below nu = {nu:.3e}")
    return interp


def interpolant_from_targets(conj: Conjugation, Yt: np.ndarray, decomp, X) -> IsospectralInterpolant:
    """Finish an interpolant once the grid tuple ``Ytilde`` in ``Y``'s basis is known.

    ``Ytilde`` must be hermitian and diagonal in ``conj.basis`` with spectral
    projectors ``decomp``.
    """
    xc = as_components(X, "X")
    W = conj.W
    Xt = hermitize(dagger(W)[None] @ Yt @ W[None])
    corr = almost_commuting_unitary_correction(dagger(W), decomp)
    Wtilde = corr.Z
    Z = dagger(Wtilde) @ W
    try:
        H = unitary_log_generator(Z)
    except ValueError as exc:
        raise BudgetInfeasible(str(exc)) from exc
    rot = opnorm(np.eye(Z.shape[0]) - Z)
    x_norm = float(np.max(opnorm(Xt)))
    nu_eff = max(2.0 * rot * x_norm, metric_eth(Xt, Yt))
    return IsospectralInterpolant(
        W=W,
        Wtilde=Wtilde,
        Z=Z,
        H=H,
        Xtilde=MatrixTuple(Xt, "cube"),
        Ytilde=MatrixTuple(Yt, "cube"),
        decomp=decomp,
        conjugation=conj,
        delta=metric_eth(xc, Xt),
        nu=nu_eff,
        correction_residual=rot,
    )
