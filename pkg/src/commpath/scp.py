"""Unital completely positive maps with commuting normal Kraus operators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import as_components, as_matrix, check_positive
from .linalg import MatrixTuple, dagger, max_commutator, max_normality_defect, metric_eth, opnorm
from .paths import MatrixPath, connect_spherical_unitary


@dataclass(frozen=True, eq=False)
class SCPMap:
    """``X -> sum_j S_j X S_j^*`` for a spherical unitary ``S``.

    Parameters
    ----------
    kraus : MatrixTuple or array_like
        Commuting normal matrices with ``sum_j S_j S_j^* = 1``.
    tol : float
        Tolerance for the defining relations.
    """

    kraus: MatrixTuple
    tol: float = 1e-10

    def __post_init__(self):
        comps = as_components(self.kraus, "kraus")
        n = comps.shape[1]
        unital = opnorm(np.sum(comps @ dagger(comps), axis=0) - np.eye(n))
        if unital > self.tol:
            raise ValueError(f"Kraus operators are not spherical (residual {unital:.3e})")
        defect = max(max_normality_defect(comps), max_commutator(comps))
        if defect > self.tol:
            raise ValueError(f"Kraus operators are not commuting normal (residual {defect:.3e})")
        object.__setattr__(self, "kraus", MatrixTuple(comps, "spherical-unitary"))

    @property
    def m(self) -> int:
        return self.kraus.m

    @property
    def n(self) -> int:
        return self.kraus.n

    def __call__(self, X) -> np.ndarray:
        return apply_scp(self, X)


def apply_scp(scp: SCPMap, X) -> np.ndarray:
    """``sum_j S_j X S_j^*``."""
    A = as_matrix(X, "X")
    S = scp.kraus.components
    if A.shape[0] != S.shape[1]:
        raise ValueError(f"dimension mismatch: map acts on n={S.shape[1]}, X has n={A.shape[0]}")
    return np.sum(S @ A[None] @ dagger(S), axis=0)


def random_contraction(n: int, rng) -> np.ndarray:
    """Complex Gaussian matrix scaled to operator norm 1."""
    G = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return G / opnorm(G)


@dataclass(frozen=True, eq=False)
class SCPPath:
    """Path of maps ``t -> psi_{gamma(t)}`` over a spherical-unitary path ``gamma``."""

    path: MatrixPath
    epsilon: float
    tol: float = 1e-6

    def eval(self, t: float) -> SCPMap:
        return SCPMap(self.path.eval(t), self.tol)

    __call__ = eval

    @property
    def start(self) -> SCPMap:
        return self.eval(0.0)

    @property
    def end(self) -> SCPMap:
        return self.eval(1.0)


def connect_scp(S: SCPMap, T: SCPMap, epsilon: float, tol: float = 1e-8) -> SCPPath:
    """Path of spherical maps from ``psi_S`` to ``psi_T``.

    The Kraus tuples are joined within ``epsilon / (2m)``; since
    ``||psi_S(X) - psi_T(X)|| <= 2m d(S, T)`` for contractions ``X``, every
    map on the path stays within ``epsilon`` of ``psi_S``.
    """
    epsilon = check_positive(epsilon, "epsilon")
    if S.kraus.components.shape != T.kraus.components.shape:
        raise ValueError("Kraus tuples differ in shape")
    path = connect_spherical_unitary(S.kraus, T.kraus, epsilon / (2 * S.m), tol)
    return SCPPath(path, epsilon)


@dataclass(frozen=True)
class DeviationReport:
    """Monte-Carlo check of ``||psi_S(X) - psi_T(X)|| <= 2m d(S, T)``."""

    trials: int
    distance: float
    bound: float
    max_deviation: float
    max_ratio: float
    holds: bool


def scp_deviation_bound_check(S: SCPMap, T: SCPMap, trials: int = 200, seed: int | None = 0) -> DeviationReport:
    """Sample unit-norm contractions and compare both maps against the bound."""
    if S.kraus.components.shape != T.kraus.components.shape:
        raise ValueError("Kraus tuples differ in shape")
    rng = np.random.default_rng(seed)
    dist = metric_eth(S.kraus, T.kraus)
    bound = 2 * S.m * dist
    worst = 0.0
    for _ in range(trials):
        X = random_contraction(S.n, rng)
        worst = max(worst, opnorm(apply_scp(S, X) - apply_scp(T, X)))
    ratio = worst / bound if bound > 0 else 0.0
    return DeviationReport(trials, dist, bound, worst, ratio, worst <= bound + 1e-10)
