"""Chart atlases for compact manifolds and chart-aware grid approximants."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import as_components, check_positive
from .linalg import (
    BudgetInfeasible,
    MatrixTuple,
    dagger,
    diagonal_tuple,
    joint_diagonalize,
    max_commutator,
    max_hermiticity_defect,
    max_normality_defect,
    opnorm,
)
from .pma import ProjectiveDecomposition, build_grids, decomposition_from_labels

SNAP_TOL = 1e-6
SPHERE_MARGIN = 0.35


def _wrap(theta):
    # into (-pi, pi]
    return np.pi - np.mod(np.pi - theta, 2 * np.pi)


class ChartAtlas:
    """Finite atlas of a compact manifold embedded in ``R^m``.

    Subclasses provide vectorized chart maps; every method acting on several
    points takes an ``(k, m)`` or ``(k, d)`` array together with one chart id
    per row.

    Attributes
    ----------
    m : int
        Ambient dimension.
    d : int
        Intrinsic dimension.
    chart_count : int
    half_width : float
        Chart domains lie in the box ``[-half_width, half_width]^d``.
    """

    kind = ""
    m: int
    d: int
    chart_count: int
    half_width: float

    @property
    def atlas_id(self) -> str:
        return f"{self.kind}-{self.m if self.kind != 'torus' else self.m // 2}"

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.atlas_id!r})"

    def _points(self, P, width=None) -> np.ndarray:
        P = np.asarray(P, dtype=float)
        P = np.atleast_2d(P)
        width = self.m if width is None else width
        if P.shape[1] != width:
            raise ValueError(f"expected points with {width} coordinates, got {P.shape[1]}")
        return P

    def _charts(self, charts, k) -> np.ndarray:
        c = np.broadcast_to(np.asarray(charts, dtype=int), (k,))
        if np.any((c < 0) | (c >= self.chart_count)):
            raise ValueError("chart id out of range")
        return c

    def distance(self, P) -> np.ndarray:
        """Euclidean distance of each point to the manifold."""
        P = self._points(P)
        return np.linalg.norm(P - self.project(P), axis=1)

    def best_chart(self, Z) -> np.ndarray:
        """Chart with the largest domain margin at each manifold point."""
        return np.argmax(self.margins(Z), axis=1)

    def margin(self, Z, charts) -> np.ndarray:
        M = self.margins(Z)
        return M[np.arange(M.shape[0]), self._charts(charts, M.shape[0])]

    def modulus(self, delta: float) -> float:
        """Parameter radius ``nu`` keeping ambient moves below ``delta``."""
        return check_positive(delta, "delta")

    def line_lipschitz(self, x0, x1) -> np.ndarray:
        """Bound on ambient sup-norm speed along each chart segment ``x0 -> x1``."""
        return np.ones(np.atleast_2d(x0).shape[0])

    # subclass hooks
    def project(self, P) -> np.ndarray:
        raise NotImplementedError

    def margins(self, Z) -> np.ndarray:
        raise NotImplementedError

    def to_params(self, Z, charts) -> np.ndarray:
        raise NotImplementedError

    def from_params(self, X, charts) -> np.ndarray:
        raise NotImplementedError

    def evaluable(self, X, charts) -> np.ndarray:
        return np.ones(np.atleast_2d(X).shape[0], dtype=bool)

    def sample(self, k: int, rng) -> np.ndarray:
        raise NotImplementedError


class SphereAtlas(ChartAtlas):
    """Unit sphere in ``R^m`` with ``2m`` hemispherical graph charts.

    Chart ``2i`` solves ``z_i = +sqrt(1 - |x|^2)``, chart ``2i + 1`` the
    negative root; the parameters are the remaining coordinates. A point
    belongs to a chart when ``+-z_i >= 0.35``.
    """

    kind = "sphere"

    def __init__(self, m: int):
        if m < 2:
            raise ValueError("sphere atlas needs m >= 2")
        self.m = m
        self.d = m - 1
        self.chart_count = 2 * m
        self.half_width = math.sqrt(1.0 - SPHERE_MARGIN**2)

    def project(self, P):
        P = self._points(P)
        r = np.linalg.norm(P, axis=1, keepdims=True)
        out = np.where(r > 0, P / np.where(r > 0, r, 1.0), 0.0)
        out[r[:, 0] == 0, 0] = 1.0
        return out

    def distance(self, P):
        P = self._points(P)
        return np.abs(np.linalg.norm(P, axis=1) - 1.0)

    def margins(self, Z):
        Z = self._points(Z)
        M = np.empty((Z.shape[0], self.chart_count))
        M[:, 0::2] = Z - SPHERE_MARGIN
        M[:, 1::2] = -Z - SPHERE_MARGIN
        return M

    def _axis_sign(self, charts):
        return charts // 2, 1.0 - 2.0 * (charts % 2)

    def to_params(self, Z, charts):
        Z = self._points(Z)
        c = self._charts(charts, Z.shape[0])
        axis, _ = self._axis_sign(c)
        keep = np.arange(self.m)[None, :] != axis[:, None]
        return Z[keep].reshape(Z.shape[0], self.d)

    def from_params(self, X, charts):
        X = self._points(X, self.d)
        c = self._charts(charts, X.shape[0])
        axis, sign = self._axis_sign(c)
        if not np.all(self.evaluable(X, c)):
            raise ValueError("parameters outside the unit ball")
        height = sign * np.sqrt(np.clip(1.0 - np.sum(X**2, axis=1), 0.0, None))
        Z = np.empty((X.shape[0], self.m))
        keep = np.arange(self.m)[None, :] != axis[:, None]
        Z[keep] = X.ravel()
        Z[np.arange(X.shape[0]), axis] = height
        return Z

    def evaluable(self, X, charts):
        X = self._points(X, self.d)
        return np.sum(X**2, axis=1) < 1.0

    @staticmethod
    def _slope(r):
        r = np.minimum(r, 1.0 - 1e-15)
        return r / np.sqrt(1.0 - r * r)

    def modulus(self, delta):
        delta = check_positive(delta, "delta")
        # the chart of largest margin keeps parameters inside radius r0
        r0 = math.sqrt(1.0 - 1.0 / self.m)
        root_d = math.sqrt(self.d)

        def cost(nu):
            r = r0 + root_d * nu
            if r >= 1.0:
                return math.inf
            return max(1.0, root_d * float(self._slope(r))) * nu

        lo, hi = 0.0, min(delta, (1.0 - r0) / root_d)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if cost(mid) <= delta:
                lo = mid
            else:
                hi = mid
        return lo

    def line_lipschitz(self, x0, x1):
        r = np.maximum(np.linalg.norm(np.atleast_2d(x0), axis=1), np.linalg.norm(np.atleast_2d(x1), axis=1))
        return np.maximum(1.0, self._slope(r))

    def sample(self, k, rng):
        P = rng.standard_normal((k, self.m))
        return self.project(P)


class TorusAtlas(ChartAtlas):
    """Product of ``m`` unit circles in ``R^{2m}``, coordinates interleaved.

    Each circle carries four angle charts centred at ``c pi/2`` with parameter
    range ``[-pi/2, pi/2]``; product chart ids are ``sum_i c_i 4^i``.
    """

    kind = "torus"

    def __init__(self, m: int):
        if m < 1:
            raise ValueError("torus atlas needs m >= 1")
        self.factors = m
        self.m = 2 * m
        self.d = m
        self.chart_count = 4**m
        self.half_width = math.pi / 2

    def _angles(self, Z):
        Z = self._points(Z)
        return np.arctan2(Z[:, 1::2], Z[:, 0::2])

    def _factor_charts(self, charts):
        c = np.asarray(charts)[:, None] // (4 ** np.arange(self.factors))[None, :]
        return c % 4

    def project(self, P):
        P = self._points(P)
        out = np.empty_like(P)
        r = np.hypot(P[:, 0::2], P[:, 1::2])
        safe = np.where(r > 0, r, 1.0)
        out[:, 0::2] = np.where(r > 0, P[:, 0::2] / safe, 1.0)
        out[:, 1::2] = np.where(r > 0, P[:, 1::2] / safe, 0.0)
        return out

    def distance(self, P):
        P = self._points(P)
        r = np.hypot(P[:, 0::2], P[:, 1::2])
        return np.sqrt(np.sum((r - 1.0) ** 2, axis=1))

    def _factor_margins(self, Z):
        theta = self._angles(Z)
        centers = np.arange(4) * (np.pi / 2)
        return np.pi / 2 - np.abs(_wrap(theta[:, :, None] - centers[None, None, :]))

    def margins(self, Z):
        F = self._factor_margins(Z)
        k = F.shape[0]
        ids = np.arange(self.chart_count)
        digits = (ids[:, None] // (4 ** np.arange(self.factors))[None, :]) % 4
        picked = F[:, np.arange(self.factors)[None, :], digits]  # (k, charts, factors)
        return np.min(picked, axis=2).reshape(k, self.chart_count)

    def best_chart(self, Z):
        # per-circle best centre; this maximizes the product margin
        F = self._factor_margins(Z)
        digits = np.argmax(F, axis=2)
        return np.sum(digits * (4 ** np.arange(self.factors))[None, :], axis=1)

    def to_params(self, Z, charts):
        theta = self._angles(Z)
        c = self._factor_charts(self._charts(charts, theta.shape[0]))
        return _wrap(theta - c * (np.pi / 2))

    def from_params(self, X, charts):
        X = self._points(X, self.d)
        c = self._factor_charts(self._charts(charts, X.shape[0]))
        theta = X + c * (np.pi / 2)
        Z = np.empty((X.shape[0], self.m))
        Z[:, 0::2] = np.cos(theta)
        Z[:, 1::2] = np.sin(theta)
        return Z

    def sample(self, k, rng):
        theta = rng.uniform(-np.pi, np.pi, (k, self.factors))
        Z = np.empty((k, self.m))
        Z[:, 0::2] = np.cos(theta)
        Z[:, 1::2] = np.sin(theta)
        return Z


class CubeAtlas(ChartAtlas):
    """The cube ``[-1, 1]^m`` with the identity chart."""

    kind = "cube"

    def __init__(self, m: int):
        if m < 1:
            raise ValueError("cube atlas needs m >= 1")
        self.m = m
        self.d = m
        self.chart_count = 1
        self.half_width = 1.0

    def project(self, P):
        return np.clip(self._points(P), -1.0, 1.0)

    def margins(self, Z):
        Z = self._points(Z)
        return (1.0 - np.max(np.abs(Z), axis=1))[:, None]

    def to_params(self, Z, charts):
        Z = self._points(Z)
        self._charts(charts, Z.shape[0])
        return Z.copy()

    def from_params(self, X, charts):
        X = self._points(X, self.d)
        self._charts(charts, X.shape[0])
        return X.copy()

    def evaluable(self, X, charts):
        X = self._points(X, self.d)
        return np.max(np.abs(X), axis=1) <= 1.0

    def sample(self, k, rng):
        return rng.uniform(-1.0, 1.0, (k, self.m))


_ATLAS_KINDS = {"sphere": SphereAtlas, "torus": TorusAtlas, "cube": CubeAtlas}


def builtin_atlas(kind: str, m: int | None = None) -> ChartAtlas:
    """Construct a builtin atlas.

    Parameters
    ----------
    kind : str
        ``"sphere"``, ``"torus"`` or ``"cube"``, or a combined id such as
        ``"sphere-3"``. A ``"manifold:"`` prefix is accepted and ignored.
    m : int, optional
        Ambient dimension for spheres and cubes, number of circles for tori.
    """
    if isinstance(kind, ChartAtlas):
        return kind
    name = kind.removeprefix("manifold:")
    if m is None:
        base, sep, dim = name.rpartition("-")
        if not sep or not dim.isdigit():
            raise ValueError(f"atlas id {kind!r} needs a dimension, e.g. 'sphere-3'")
        name, m = base, int(dim)
    if name not in _ATLAS_KINDS:
        raise ValueError(f"unsupported atlas kind {name!r}")
    return _ATLAS_KINDS[name](int(m))


@dataclass(frozen=True)
class ManifoldPoint:
    """A manifold point together with its owning chart and chart coordinates."""

    ambient: np.ndarray
    chart_id: int
    parameters: np.ndarray


def snap_to_manifold(p, atlas: ChartAtlas, tol: float = SNAP_TOL) -> ManifoldPoint:
    """Nearest manifold point to ``p`` and the chart of largest margin there.

    Raises
    ------
    ValueError
        If ``p`` is farther than ``tol`` from the manifold.
    """
    atlas = builtin_atlas(atlas)
    P = atlas._points(np.asarray(p, dtype=float).reshape(1, -1))
    dist = float(atlas.distance(P)[0])
    if dist > tol:
        raise ValueError(f"point is {dist:.3e} away from the manifold (tolerance {tol:.1e})")
    z = atlas.project(P)
    chart = atlas.best_chart(z)
    if atlas.margin(z, chart)[0] < 0:
        raise ValueError("no chart covers the point")
    x = atlas.to_params(z, chart)
    return ManifoldPoint(z[0], int(chart[0]), x[0])


@dataclass(frozen=True, eq=False)
class ManifoldApproximant:
    """Result of :func:`manifold_cpma`.

    Per-eigenvector data (``points`` to ``charts``) refer to the columns of
    ``basis``; ``chart_assignment`` gives one chart per projector of
    ``decomp``.
    """

    ztilde: MatrixTuple
    H: MatrixTuple
    Htilde: MatrixTuple
    decomp: ProjectiveDecomposition
    chart_assignment: np.ndarray
    basis: np.ndarray
    points: np.ndarray
    params: np.ndarray
    labels: np.ndarray
    charts: np.ndarray
    nu: float


def manifold_cpma(
    Z, delta: float, atlas, tol: float = 1e-8, snap_tol: float = SNAP_TOL
) -> ManifoldApproximant:
    """Grid approximant of a commuting hermitian tuple with spectrum on a manifold.

    Every joint eigenvalue is written in the chart of largest margin, its chart
    coordinates are snapped to a grid of spacing ``nu = atlas.modulus(delta)``
    and mapped back, so the approximant keeps its spectrum on the manifold.

    Raises
    ------
    ValueError
        If the joint spectrum is off the manifold or not covered by a chart.
    BudgetInfeasible
        If a snapped parameter leaves the region where its chart is defined.
    """
    atlas = builtin_atlas(atlas)
    comps = as_components(Z, "Z")
    delta = check_positive(delta, "delta")
    if comps.shape[0] != atlas.m:
        raise ValueError(f"tuple has {comps.shape[0]} components, atlas expects {atlas.m}")
    scale = max(1.0, float(np.max(opnorm(comps))))
    if max_hermiticity_defect(comps) > tol * scale:
        raise ValueError("manifold tuples must be hermitian")
    Q, spec = joint_diagonalize(comps, tol)
    return manifold_cpma_from_spectrum(Q, np.real(spec.points), delta, atlas, snap_tol)


def manifold_cpma_from_spectrum(
    basis: np.ndarray, pts: np.ndarray, delta: float, atlas, snap_tol: float = SNAP_TOL
) -> ManifoldApproximant:
    """:func:`manifold_cpma` for a tuple given by its joint eigenbasis and points."""
    atlas = builtin_atlas(atlas)
    Q = basis
    dist = atlas.distance(pts)
    if np.max(dist) > snap_tol:
        raise ValueError(f"joint spectrum is {np.max(dist):.3e} off the manifold")
    amb = atlas.project(pts)
    charts = atlas.best_chart(amb)
    if np.min(atlas.margin(amb, charts)) < 0:
        raise ValueError("joint spectral point not covered by any chart")
    params = atlas.to_params(amb, charts)
    # spend what the projection used up before sizing the parameter grid
    budget = delta - float(np.max(np.max(np.abs(pts - amb), axis=1)))
    if budget <= 0:
        raise BudgetInfeasible(f"delta {delta} is below the snapping error")
    nu = atlas.modulus(budget)
    hw = atlas.half_width
    grid = build_grids(min(1.0, nu / hw))
    labels = hw * grid.snap(params / hw)
    if not np.all(atlas.evaluable(labels, charts)):
        raise BudgetInfeasible("snapped parameters leave the chart domain")
    snapped = atlas.from_params(labels, charts)
    keys = np.concatenate([labels, charts[:, None].astype(float)], axis=1)
    decomp = decomposition_from_labels(Q, snapped, keys)
    chart_assignment = np.array([charts[cols[0]] for cols in decomp.members], dtype=int)
    return ManifoldApproximant(
        ztilde=MatrixTuple(diagonal_tuple(Q, snapped, True), "none"),
        H=MatrixTuple(diagonal_tuple(Q, params, True), "cube"),
        Htilde=MatrixTuple(diagonal_tuple(Q, labels, True), "cube"),
        decomp=decomp,
        chart_assignment=chart_assignment,
        basis=Q,
        points=amb,
        params=params,
        labels=labels,
        charts=charts,
        nu=nu,
    )


@dataclass(frozen=True)
class ResidualReport:
    """Distances of a tuple from the defining conditions of a variety.

    Fields not meaningful for the variety are ``None``.
    """

    commutator: float
    normality: float
    norm_excess: float
    manifold_distance: float | None
    defining_eq: float | None

    def as_dict(self) -> dict:
        return {
            "commutator": self.commutator,
            "normality": self.normality,
            "norm_excess": self.norm_excess,
            "manifold_distance": self.manifold_distance,
            "defining_eq": self.defining_eq,
        }


def loose_joint_points(comps: np.ndarray) -> np.ndarray:
    """Approximate joint eigenvalues without any commutation check.

    Rayleigh quotients in the eigenbasis of a fixed generic combination of the
    hermitian parts; exact for commuting normal tuples with simple spectrum.
    """
    adj = dagger(comps)
    family = np.concatenate([0.5 * (comps + adj), -0.5j * (comps - adj)])
    rng = np.random.default_rng(0x9E3779B9)
    c = rng.standard_normal(family.shape[0]) + 2.0
    C = np.tensordot(c, family, axes=1)
    _, V = np.linalg.eigh(0.5 * (C + dagger(C)))
    D = dagger(V)[None] @ comps @ V[None]
    return np.diagonal(D, axis1=1, axis2=2).T


def variety_residuals(X, variety: str | None = None, atlas=None) -> ResidualReport:
    """Residuals of ``X`` against the defining conditions of ``variety``.

    Never raises on numerical grounds; non-finite input yields NaN fields.
    """
    comps = np.asarray(getattr(X, "components", X), dtype=complex)
    if comps.ndim == 2:
        comps = comps[None]
    if variety is None:
        variety = getattr(X, "variety", "none")
    n = comps.shape[1]
    eye = np.eye(n)
    hermitian_kind = variety in ("cube", "sphere") or variety.startswith("manifold:")
    try:
        commutator = max_commutator(comps)
        normality = max_hermiticity_defect(comps) if hermitian_kind else max_normality_defect(comps)
        norm_excess = max(0.0, float(np.max(opnorm(comps))) - 1.0)
        manifold_distance = None
        defining_eq = None
        if variety in ("sphere", "spherical-unitary", "torus") or variety.startswith("manifold:"):
            pts = loose_joint_points(comps)
            if variety == "sphere":
                manifold_distance = float(np.max(np.abs(np.linalg.norm(pts.real, axis=1) - 1.0)))
                defining_eq = opnorm(np.sum(comps @ comps, axis=0) - eye)
            elif variety == "spherical-unitary":
                manifold_distance = float(np.max(np.abs(np.linalg.norm(pts, axis=1) - 1.0)))
                defining_eq = opnorm(np.sum(comps @ dagger(comps), axis=0) - eye)
            elif variety == "torus":
                manifold_distance = float(np.max(np.abs(np.abs(pts) - 1.0)))
                defining_eq = float(np.max(opnorm(comps @ dagger(comps) - eye[None])))
            else:
                at = builtin_atlas(atlas if atlas is not None else variety)
                manifold_distance = float(np.max(at.distance(pts.real)))
        return ResidualReport(commutator, normality, norm_excess, manifold_distance, defining_eq)
    except (np.linalg.LinAlgError, ValueError):
        nan = float("nan")
        return ResidualReport(nan, nan, nan, nan, nan)
