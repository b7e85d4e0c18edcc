"""Sampled certificates for paths and interpolants."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import as_components
from .interpolant import IsospectralInterpolant
from .linalg import (
    ConvergenceError,
    NotCommutingError,
    hausdorff_distance,
    joint_diagonalize,
    max_commutator,
    metric_eth,
)
from .manifold import loose_joint_points, variety_residuals
from .paths import MatrixPath

DEFAULT_SAMPLES = 33
PATH_CHECKS = (
    "endpoints",
    "commutator",
    "normality",
    "norm_excess",
    "manifold_distance",
    "defining_eq",
    "ball",
    "epsilon_budget",
)
INTERPOLANT_CHECKS = ("identity_at_zero", "endpoint_identity", "commutation", "ball", "spectral_invariance")


@dataclass(frozen=True)
class Tolerances:
    """Tolerance ladder used by the certificates.

    Attributes
    ----------
    algebraic : float
        Identities that hold exactly in exact arithmetic.
    conjugation : float
        Identities transported through a computed unitary, and the
        commutator / normality / norm residuals along paths.
    manifold : float
        Manifold distance and defining-equation residuals along paths.
    spectral : float
        Joint-spectrum drift under isospectral rotations.
    """

    algebraic: float = 1e-10
    conjugation: float = 1e-8
    manifold: float = 1e-6
    spectral: float = 1e-9


def chebyshev_samples(count: int = DEFAULT_SAMPLES) -> np.ndarray:
    """``count`` Chebyshev-spaced points in [0, 1], both ends included."""
    if count < 2:
        raise ValueError("need at least two samples")
    i = np.arange(count)
    ts = 0.5 * (1.0 - np.cos(np.pi * i / (count - 1)))
    ts[0], ts[-1] = 0.0, 1.0
    return ts


def _first_failure(checks: dict) -> str | None:
    for name, ok in checks.items():
        if not ok:
            return name
    return None


@dataclass(frozen=True, eq=False)
class PathCertificate:
    """Residuals of a path at sampled parameters and the resulting verdict.

    ``verdict`` is ``"pass"`` iff every entry of ``checks`` holds;
    ``failed_check`` names the first failing one in :data:`PATH_CHECKS` order.
    """

    variety: str
    sample_ts: np.ndarray
    eth_to_base: np.ndarray
    commutator: np.ndarray
    normality: np.ndarray
    norm_excess: np.ndarray
    manifold_distance: list
    defining_eq: list
    endpoints_exact: bool
    epsilon_reported: float
    budgets: dict | None
    checks: dict
    tolerances: Tolerances = field(default_factory=Tolerances)

    @property
    def verdict(self) -> str:
        return "pass" if all(self.checks.values()) else "fail"

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    @property
    def failed_check(self) -> str | None:
        return _first_failure(self.checks)

    def to_dict(self) -> dict:
        return {
            "kind": "certificate",
            "variety": self.variety,
            "verdict": self.verdict,
            "failed_check": self.failed_check,
            "epsilon_reported": self.epsilon_reported,
            "budgets": self.budgets,
            "endpoints_exact": self.endpoints_exact,
            "checks": dict(self.checks),
            "tolerances": {
                "algebraic": self.tolerances.algebraic,
                "conjugation": self.tolerances.conjugation,
                "manifold": self.tolerances.manifold,
                "spectral": self.tolerances.spectral,
            },
            "sample_ts": [float(t) for t in self.sample_ts],
            "eth_to_base": [float(v) for v in self.eth_to_base],
            "commutator": [float(v) for v in self.commutator],
            "normality": [float(v) for v in self.normality],
            "norm_excess": [float(v) for v in self.norm_excess],
            "manifold_distance": list(self.manifold_distance),
            "defining_eq": list(self.defining_eq),
        }


def _same_bits(A, B) -> bool:
    a = np.ascontiguousarray(as_components(A))
    b = np.ascontiguousarray(as_components(B))
    return a.shape == b.shape and a.tobytes() == b.tobytes()


def certify_path(
    path: MatrixPath,
    tolerances: Tolerances | None = None,
    samples: int | np.ndarray = DEFAULT_SAMPLES,
    expected_start=None,
    expected_end=None,
) -> PathCertificate:
    """Evaluate ``path`` at sampled parameters and check every path condition.

    Checks, in order: endpoints returned bit-exactly (against
    ``expected_start``/``expected_end`` when given); commutator, normality and
    norm excess within ``tolerances.conjugation``; manifold distance and
    defining equation within ``tolerances.manifold``; ball containment
    ``max d(gamma(t), start) < epsilon`` (or the path is constant); and
    ``epsilon <= 2 (nu + delta)`` for the reported budgets.
    """
    tol = tolerances or Tolerances()
    ts = chebyshev_samples(samples) if np.isscalar(samples) else np.asarray(samples, dtype=float)
    start = path.start
    points = [path.eval(t) for t in ts]
    reports = [variety_residuals(p, path.variety) for p in points]
    eth = np.array([metric_eth(p, start) for p in points])

    exact = _same_bits(path.eval(0.0), start) and _same_bits(path.eval(1.0), path.end)
    if expected_start is not None:
        exact = exact and _same_bits(path.eval(0.0), expected_start)
    if expected_end is not None:
        exact = exact and _same_bits(path.eval(1.0), expected_end)

    comm = np.array([r.commutator for r in reports])
    norm = np.array([r.normality for r in reports])
    excess = np.array([r.norm_excess for r in reports])
    mdist = [r.manifold_distance for r in reports]
    defeq = [r.defining_eq for r in reports]

    def within(values, limit):
        values = [v for v in values if v is not None]
        return bool(all(np.isfinite(v) and v <= limit for v in values))

    max_eth = float(np.max(eth))
    if path.budgets is not None:
        bound = 2.0 * (path.budgets["nu"] + path.budgets["delta"])
        budget_ok = path.epsilon <= bound * (1 + 1e-12) + 1e-15
    else:
        budget_ok = True
    checks = {
        "endpoints": bool(exact),
        "commutator": within(comm, tol.conjugation),
        "normality": within(norm, tol.conjugation),
        "norm_excess": within(excess, tol.conjugation),
        "manifold_distance": within(mdist, tol.manifold),
        "defining_eq": within(defeq, tol.manifold),
        "ball": bool(max_eth < path.epsilon or max_eth == 0.0),
        "epsilon_budget": bool(budget_ok),
    }
    return PathCertificate(
        variety=path.variety,
        sample_ts=ts,
        eth_to_base=eth,
        commutator=comm,
        normality=norm,
        norm_excess=excess,
        manifold_distance=mdist,
        defining_eq=defeq,
        endpoints_exact=bool(exact),
        epsilon_reported=float(path.epsilon),
        budgets=None if path.budgets is None else dict(path.budgets),
        checks=checks,
        tolerances=tol,
    )


@dataclass(frozen=True, eq=False)
class InterpolantCertificate:
    """Sampled checks of an isospectral interpolant, in :data:`INTERPOLANT_CHECKS` order."""

    sample_ts: np.ndarray
    eth_to_xtilde: np.ndarray
    commutator: np.ndarray
    spectral_drift: np.ndarray
    endpoint_error: float
    nu_reported: float
    delta: float
    checks: dict

    @property
    def verdict(self) -> str:
        return "pass" if all(self.checks.values()) else "fail"

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    @property
    def failed_check(self) -> str | None:
        return _first_failure(self.checks)

    def to_dict(self) -> dict:
        return {
            "kind": "interpolant-certificate",
            "verdict": self.verdict,
            "failed_check": self.failed_check,
            "checks": dict(self.checks),
            "nu_reported": self.nu_reported,
            "delta": self.delta,
            "endpoint_error": self.endpoint_error,
            "sample_ts": [float(t) for t in self.sample_ts],
            "eth_to_xtilde": [float(v) for v in self.eth_to_xtilde],
            "commutator": [float(v) for v in self.commutator],
            "spectral_drift": [float(v) for v in self.spectral_drift],
        }


def _joint_points(comps: np.ndarray) -> np.ndarray:
    try:
        return joint_diagonalize(comps)[1].points
    except (NotCommutingError, ConvergenceError):
        return loose_joint_points(comps)


def certify_interpolant(
    itp: IsospectralInterpolant,
    X,
    tolerances: Tolerances | None = None,
    samples: int | np.ndarray = DEFAULT_SAMPLES,
) -> InterpolantCertificate:
    """Check the defining properties of an interpolant at sampled ``t``.

    ``identity_at_zero``: ``psi_0(Xtilde)`` is ``Xtilde`` bit for bit.
    ``endpoint_identity``: ``psi_1(Xtilde) = W Xtilde W^*``.
    ``commutation``: the rotated components commute.
    ``ball``: ``d(psi_t(Xtilde), Xtilde) < nu``.
    ``spectral_invariance``: the joint spectrum does not move.
    """
    tol = tolerances or Tolerances()
    ts = chebyshev_samples(samples) if np.isscalar(samples) else np.asarray(samples, dtype=float)
    xt = itp.Xtilde.components
    base_pts = _joint_points(xt)
    rotated = [itp.apply(t) for t in ts]
    eth = np.array([metric_eth(r, xt) for r in rotated])
    comm = np.array([max_commutator(r) for r in rotated])
    drift = np.array([hausdorff_distance(_joint_points(r), base_pts) for r in rotated])
    target = itp.W[None] @ xt @ np.conj(itp.W.T)[None]
    endpoint_error = metric_eth(itp.apply(1.0), target)
    max_eth = float(np.max(eth))
    checks = {
        "identity_at_zero": _same_bits(itp.apply(0.0), xt),
        "endpoint_identity": bool(endpoint_error <= tol.conjugation),
        "commutation": bool(np.max(comm) <= tol.algebraic),
        "ball": bool(max_eth < itp.nu or max_eth == 0.0),
        "spectral_invariance": bool(np.max(drift) <= tol.spectral),
    }
    return InterpolantCertificate(
        sample_ts=ts,
        eth_to_xtilde=eth,
        commutator=comm,
        spectral_drift=drift,
        endpoint_error=float(endpoint_error),
        nu_reported=float(itp.nu),
        delta=metric_eth(X, xt),
        checks=checks,
    )
