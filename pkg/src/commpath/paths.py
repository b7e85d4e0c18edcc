"""Piecewise smooth paths between nearby commuting tuples on matrix varieties."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import schur

from ._validation import as_components, check_positive
from .interpolant import IsospectralInterpolant, build_interpolant, interpolant_from_targets
from .linalg import (
    BudgetInfeasible,
    MatrixTuple,
    conjugation_morphism,
    dagger,
    diagonal_tuple,
    hermitian_partition,
    hermitize,
    interleaved_juncture,
    interleaved_partition,
    joint_diagonalize,
    max_commutator,
    max_hermiticity_defect,
    max_normality_defect,
    metric_eth,
    opnorm,
)
from .manifold import ChartAtlas, builtin_atlas, manifold_cpma_from_spectrum

MAX_HALVINGS = 6
JUNCTION_TOL = 1e-10
COMMUTING_TOL = 1e-10
POST_MAPS = (None, "juncture", "juncture-retract", "interleaved")


# ---------------------------------------------------------------- segments


@dataclass(frozen=True, eq=False)
class HermitianLine:
    """``(1 - u) start + u end`` for componentwise commuting hermitian endpoints."""

    start: np.ndarray
    end: np.ndarray
    kind = "hermitian-linear"

    def evaluate(self, u: float) -> np.ndarray:
        return hermitize((1.0 - u) * self.start + u * self.end)


@dataclass(frozen=True, eq=False)
class Rotation:
    """``Ad[exp(i pi u H / 2)](xtilde)``."""

    xtilde: np.ndarray
    H: np.ndarray
    kind = "rotation"

    def __post_init__(self):
        object.__setattr__(self, "_eig", np.linalg.eigh(self.H))

    def evaluate(self, u: float) -> np.ndarray:
        w, V = self._eig
        U = (V * np.exp(0.5j * np.pi * u * w)) @ dagger(V)
        return hermitize(U[None] @ self.xtilde @ dagger(U)[None])


@dataclass(frozen=True, eq=False)
class ChartLine:
    """Straight lines in chart coordinates, one per basis vector.

    Column ``k`` of ``basis`` carries the joint eigenvalue
    ``phi_{c_k}((1 - u) x0_k + u x1_k) + (1 - u) off0_k + u off1_k``; the
    offsets absorb round-off between endpoints and the exact manifold.
    """

    atlas: ChartAtlas
    basis: np.ndarray
    x0: np.ndarray
    x1: np.ndarray
    charts: np.ndarray
    off0: np.ndarray
    off1: np.ndarray
    kind = "chart-linear"

    def points(self, u: float) -> np.ndarray:
        x = (1.0 - u) * self.x0 + u * self.x1
        return self.atlas.from_params(x, self.charts) + (1.0 - u) * self.off0 + u * self.off1

    def evaluate(self, u: float) -> np.ndarray:
        return diagonal_tuple(self.basis, self.points(u), hermitian=True)


@dataclass(frozen=True, eq=False)
class Constant:
    """The constant path at ``value``."""

    value: np.ndarray
    kind = "constant"

    def evaluate(self, u: float) -> np.ndarray:
        return self.value.copy()


def _retract_to_disk(comps: np.ndarray) -> np.ndarray:
    # z -> z / max(1, |z|) on the spectrum of each normal component
    out = comps.copy()
    for j, N in enumerate(comps):
        if opnorm(N) <= 1.0 + 1e-12:
            continue
        T, V = schur(N, output="complex")
        z = np.diag(T)
        z = z / np.maximum(1.0, np.abs(z))
        out[j] = (V * z) @ dagger(V)
    return out


def apply_post(post: str | None, comps: np.ndarray) -> np.ndarray:
    """Map a tuple from the working hermitian space to the output variety."""
    if post is None:
        return comps
    if post == "interleaved":
        return interleaved_juncture(comps)
    m = comps.shape[0] // 2
    joined = comps[:m] + 1j * comps[m:]
    if post == "juncture":
        return joined
    if post == "juncture-retract":
        return _retract_to_disk(joined)
    raise ValueError(f"unknown post map {post!r}")


# ---------------------------------------------------------------- paths


@dataclass(frozen=True, eq=False)
class MatrixPath:
    """Concatenation of segments, each running over a dyadic subinterval of [0, 1].

    Attributes
    ----------
    segments : tuple
        Segment objects evaluated on ``[0, 1]``.
    breaks : ndarray, shape (k, 2)
        Parameter interval of each segment.
    variety : str
    start, end : MatrixTuple
        Stored endpoints, returned bit-exactly by ``eval(0)`` and ``eval(1)``.
    epsilon : float
        Radius of the ball around ``start`` containing the path.
    budgets : dict or None
        Achieved ``delta`` and ``nu`` with ``epsilon <= 2 (nu + delta)``.
    post : str or None
        Map from the working (hermitian) space to the variety.
    atlas : str or None
        Atlas id of chart segments.
    """

    segments: tuple
    breaks: np.ndarray
    variety: str
    start: MatrixTuple
    end: MatrixTuple
    epsilon: float
    budgets: dict | None = None
    post: str | None = None
    atlas: str | None = None
    info: dict = field(default_factory=dict)

    @property
    def base(self) -> MatrixTuple:
        return self.start

    def eval(self, t: float) -> MatrixTuple:
        """Point of the path at parameter ``t`` in [0, 1]."""
        t = float(t)
        if not 0.0 <= t <= 1.0:
            raise ValueError(f"t must lie in [0, 1], got {t}")
        if t == 0.0:
            return self.start
        if t == 1.0:
            return self.end
        i = int(np.searchsorted(self.breaks[:, 1], t, side="left"))
        i = min(i, len(self.segments) - 1)
        s0, s1 = self.breaks[i]
        u = min(1.0, max(0.0, (t - s0) / (s1 - s0)))
        comps = apply_post(self.post, self.segments[i].evaluate(u))
        return MatrixTuple(comps, self.variety)

    __call__ = eval


def _nest_breaks(count: int) -> np.ndarray:
    # ((s1 * s2) * s3) * ... : each new segment takes the right half
    breaks = np.array([[0.0, 1.0]])
    for _ in range(count - 1):
        breaks = np.vstack([breaks / 2.0, [[0.5, 1.0]]])
    return breaks


def constant_path(X, variety: str | None = None) -> MatrixPath:
    """Constant path at ``X`` with radius 0."""
    comps = as_components(X, "X")
    variety = variety or getattr(X, "variety", "none")
    point = MatrixTuple(comps, variety)
    return MatrixPath(
        segments=(Constant(comps),),
        breaks=np.array([[0.0, 1.0]]),
        variety=variety,
        start=point,
        end=point,
        epsilon=0.0,
        budgets={"delta": 0.0, "nu": 0.0, "mu": 0.0},
        post=None,
    )


def concat(a: MatrixPath, b: MatrixPath) -> MatrixPath:
    """Run ``a`` on [0, 1/2] and ``b`` on [1/2, 1].

    Raises
    ------
    ValueError
        If ``a(1)`` and ``b(0)`` differ by more than ``1e-10`` or the paths
        live in different varieties.
    """
    if a.variety != b.variety or a.post != b.post:
        raise ValueError("paths live in different varieties")
    if a.end.components.shape != b.start.components.shape:
        raise ValueError("paths have different dimensions")
    gap = metric_eth(a.end, b.start)
    if gap > JUNCTION_TOL:
        raise ValueError(f"endpoint mismatch: d(a(1), b(0)) = {gap:.3e}")
    breaks = np.vstack([a.breaks / 2.0, 0.5 + b.breaks / 2.0])
    epsilon = max(a.epsilon, b.epsilon + metric_eth(b.start, a.start))
    return MatrixPath(
        segments=a.segments + b.segments,
        breaks=breaks,
        variety=a.variety,
        start=a.start,
        end=b.end,
        epsilon=epsilon,
        budgets=None,
        post=a.post,
        atlas=a.atlas or b.atlas,
    )


# ---------------------------------------------------------------- connect


@dataclass
class _Plan:
    segments: tuple
    epsilon: float
    budgets: dict
    interpolant: IsospectralInterpolant | None = None


def _check_hermitian_contractions(comps: np.ndarray, name: str, tol: float) -> None:
    scale = max(1.0, float(np.max(opnorm(comps))))
    if max_hermiticity_defect(comps) > tol * scale:
        raise ValueError(f"{name} is not a hermitian tuple")
    if float(np.max(opnorm(comps))) > 1.0 + 1e-12:
        raise ValueError(f"{name} has a component of norm above 1")


def _commute_jointly(xc: np.ndarray, yc: np.ndarray) -> bool:
    both = np.concatenate([xc, yc])
    scale = max(1.0, float(np.max(opnorm(both)))) ** 2
    return max_commutator(both) <= COMMUTING_TOL * scale


def _line_plan(xc, yc, epsilon, mu, segment, nu_line=0.0) -> _Plan:
    nu = max(mu, nu_line)
    if nu >= epsilon:
        raise BudgetInfeasible(f"d(X, Y) = {mu:.3e} is not below epsilon = {epsilon:.3e}")
    return _Plan((segment,), min(2.0 * nu, epsilon), {"delta": 0.0, "nu": nu, "mu": mu})


def _retry_schedule(epsilon: float, mu: float):
    delta = min(epsilon / 4.0, 1.0)
    for attempt in range(MAX_HALVINGS + 1):
        if delta < mu:
            return
        yield attempt, delta
        delta /= 2.0


def _infeasible(kind: str, epsilon: float, mu: float, best: dict | None) -> BudgetInfeasible:
    msg = f"{kind}: no certified path with epsilon = {epsilon:.3e} (d = {mu:.3e})"
    if best:
        msg += f"; best attempt delta = {best['grid_delta']:.3e}, epsilon = {best['epsilon']:.3e}"
    return BudgetInfeasible(msg)


def _cube_plan(xc: np.ndarray, yc: np.ndarray, epsilon: float, tol: float) -> _Plan:
    mu = metric_eth(xc, yc)
    if _commute_jointly(xc, yc):
        return _line_plan(xc, yc, epsilon, mu, HermitianLine(xc, yc))
    best = None
    for attempt, delta in _retry_schedule(epsilon, mu):
        try:
            interp = build_interpolant(xc, yc, delta, tol=tol)
        except BudgetInfeasible:
            continue
        conj = interp.conjugation
        nu1 = max(interp.nu, mu, conj.eth_to_y)
        eps_rep = 2.0 * (nu1 + interp.delta)
        budgets = {
            "delta": interp.delta,
            "nu": nu1,
            "mu": mu,
            "grid_delta": delta,
            "attempts": attempt + 1,
            "correction_residual": interp.correction_residual,
        }
        best = dict(budgets, epsilon=eps_rep)
        if eps_rep > epsilon:
            continue
        psi_x = conj.psi_x.components
        segments = (
            HermitianLine(xc, interp.Xtilde.components),
            Rotation(interp.Xtilde.components, interp.H),
            HermitianLine(interp.Ytilde.components, psi_x),
            HermitianLine(psi_x, yc),
        )
        return _Plan(segments, eps_rep, budgets, interp)
    raise _infeasible("cube", epsilon, mu, best)


def _common_charts(atlas: ChartAtlas, za: np.ndarray, zb: np.ndarray) -> np.ndarray:
    if hasattr(atlas, "_factor_margins"):
        F = np.minimum(atlas._factor_margins(za), atlas._factor_margins(zb))
        digits = np.argmax(F, axis=2)
        return np.sum(digits * (4 ** np.arange(digits.shape[1]))[None, :], axis=1)
    return np.argmax(np.minimum(atlas.margins(za), atlas.margins(zb)), axis=1)


def _line_speed(atlas, x0, x1, off0, off1) -> float:
    lip = atlas.line_lipschitz(x0, x1)
    move = np.max(lip * np.linalg.norm(x1 - x0, axis=1)) if len(x0) else 0.0
    return float(move + np.max(np.abs(off1 - off0)))


def _chart_bridge(atlas: ChartAtlas, basis: np.ndarray, a: np.ndarray, b: np.ndarray):
    za, zb = atlas.project(a), atlas.project(b)
    charts = _common_charts(atlas, za, zb)
    pa, pb = atlas.to_params(za, charts), atlas.to_params(zb, charts)
    if not (np.all(atlas.evaluable(pa, charts)) and np.all(atlas.evaluable(pb, charts))):
        raise BudgetInfeasible("joint spectra are not covered by common charts")
    off0 = a - atlas.from_params(pa, charts)
    off1 = b - atlas.from_params(pb, charts)
    seg = ChartLine(atlas, basis, pa, pb, charts, off0, off1)
    return seg, _line_speed(atlas, pa, pb, off0, off1)


def _manifold_plan(uc: np.ndarray, vc: np.ndarray, epsilon: float, atlas: ChartAtlas, tol: float) -> _Plan:
    mu = metric_eth(uc, vc)
    if _commute_jointly(uc, vc):
        m = uc.shape[0]
        Q, spec = joint_diagonalize(np.concatenate([uc, vc]), tol)
        pts = np.real(spec.points)
        seg, speed = _chart_bridge(atlas, Q, pts[:, :m], pts[:, m:])
        return _line_plan(uc, vc, epsilon, mu, seg, speed)
    best = None
    for attempt, delta in _retry_schedule(epsilon, mu):
        try:
            conj = conjugation_morphism(uc, vc, tol)
            a = np.real(conj.points)
            approx = manifold_cpma_from_spectrum(conj.basis, a, delta, atlas)
            interp = interpolant_from_targets(conj, approx.ztilde.components, approx.decomp, uc)
            bridge, speed4 = _chart_bridge(atlas, conj.basis, a, np.real(conj.target_points))
        except BudgetInfeasible:
            continue
        charts = approx.charts
        off = a - atlas.from_params(approx.params, charts)
        zero = np.zeros_like(off)
        moved_basis = dagger(conj.W) @ conj.basis
        s1 = ChartLine(atlas, moved_basis, approx.params, approx.labels, charts, off, zero)
        s3 = ChartLine(atlas, conj.basis, approx.labels, approx.params, charts, zero, off)
        speed1 = _line_speed(atlas, approx.params, approx.labels, off, zero)
        nu1 = max(interp.nu, mu, conj.eth_to_y)
        delta_b = max(interp.delta, speed1, speed4)
        eps_rep = 2.0 * (nu1 + delta_b)
        budgets = {
            "delta": delta_b,
            "nu": nu1,
            "mu": mu,
            "grid_delta": delta,
            "chart_nu": approx.nu,
            "attempts": attempt + 1,
            "correction_residual": interp.correction_residual,
        }
        best = dict(budgets, epsilon=eps_rep)
        if eps_rep > epsilon:
            continue
        segments = (s1, Rotation(interp.Xtilde.components, interp.H), s3, bridge)
        return _Plan(segments, eps_rep, budgets, interp)
    raise _infeasible(atlas.atlas_id, epsilon, mu, best)


def _assemble(plan: _Plan, start, end, variety, post=None, atlas=None, scale=1.0) -> MatrixPath:
    budgets = {k: (v * scale if k in ("delta", "nu", "mu") else v) for k, v in plan.budgets.items()}
    return MatrixPath(
        segments=plan.segments,
        breaks=_nest_breaks(len(plan.segments)),
        variety=variety,
        start=MatrixTuple(start, variety),
        end=MatrixTuple(end, variety),
        epsilon=plan.epsilon * scale,
        budgets=budgets,
        post=post,
        atlas=atlas,
    )


def connect_cube(X, Y, epsilon: float, tol: float = 1e-8) -> MatrixPath:
    """Path in the matrix cube from ``X`` to ``Y`` staying within ``epsilon`` of ``X``.

    Segments: line to the grid approximant of ``X``, isospectral rotation,
    line to the conjugate of ``X`` diagonal in ``Y``'s basis, line to ``Y``.
    Commuting endpoints are joined by a single line.

    Raises
    ------
    BudgetInfeasible
        If no certified path exists after halving the grid resolution
        ``MAX_HALVINGS`` times.
    """
    xc = as_components(X, "X")
    yc = as_components(Y, "Y")
    epsilon = check_positive(epsilon, "epsilon")
    if xc.shape != yc.shape:
        raise ValueError(f"dimension mismatch: {xc.shape} vs {yc.shape}")
    _check_hermitian_contractions(xc, "X", tol)
    _check_hermitian_contractions(yc, "Y", tol)
    if np.array_equal(xc, yc):
        return constant_path(xc, "cube")
    return _assemble(_cube_plan(xc, yc, epsilon, tol), xc, yc, "cube")


def _check_normal_tuple(comps: np.ndarray, name: str, tol: float) -> None:
    scale = max(1.0, float(np.max(opnorm(comps)))) ** 2
    if max_normality_defect(comps) > tol * scale:
        raise ValueError(f"{name} has a non-normal component")


def connect_disk(Z, S, epsilon: float, tol: float = 1e-8) -> MatrixPath:
    """Path in the matrix disk through the hermitian partition.

    The cube path between the partitions (at half the radius) is mapped back
    by the juncture, followed by a spectral retraction onto the unit disk
    where the juncture leaves it.
    """
    zc = as_components(Z, "Z")
    sc = as_components(S, "S")
    epsilon = check_positive(epsilon, "epsilon")
    if zc.shape != sc.shape:
        raise ValueError(f"dimension mismatch: {zc.shape} vs {sc.shape}")
    for name, comps in (("Z", zc), ("S", sc)):
        _check_normal_tuple(comps, name, tol)
        if float(np.max(opnorm(comps))) > 1.0 + 1e-12:
            raise ValueError(f"{name} has a component of norm above 1")
    if np.array_equal(zc, sc):
        return constant_path(zc, "disk")
    hz = hermitian_partition(zc, tol).components
    hs = hermitian_partition(sc, tol).components
    plan = _cube_plan(hz, hs, epsilon / 2.0, tol)
    return _assemble(plan, zc, sc, "disk", post="juncture-retract", scale=2.0)


def connect_manifold(U, V, epsilon: float, atlas, tol: float = 1e-8) -> MatrixPath:
    """Path between hermitian tuples whose joint spectra lie on an atlas manifold.

    Grid approximants are built in chart coordinates, so every point of the
    path keeps its joint spectrum on the manifold.
    """
    atlas = builtin_atlas(atlas)
    uc = as_components(U, "U")
    vc = as_components(V, "V")
    epsilon = check_positive(epsilon, "epsilon")
    if uc.shape != vc.shape:
        raise ValueError(f"dimension mismatch: {uc.shape} vs {vc.shape}")
    if uc.shape[0] != atlas.m:
        raise ValueError(f"tuples have {uc.shape[0]} components, atlas expects {atlas.m}")
    _check_hermitian_contractions(uc, "U", tol)
    _check_hermitian_contractions(vc, "V", tol)
    variety = f"manifold:{atlas.atlas_id}"
    if np.array_equal(uc, vc):
        path = constant_path(uc, variety)
        return replace(path, atlas=atlas.atlas_id)
    plan = _manifold_plan(uc, vc, epsilon, atlas, tol)
    return _assemble(plan, uc, vc, variety, atlas=atlas.atlas_id)


def _check_unitary(comps: np.ndarray, name: str, tol: float) -> None:
    eye = np.eye(comps.shape[1])
    if float(np.max(opnorm(comps @ dagger(comps) - eye[None]))) > tol:
        raise ValueError(f"{name} has a non-unitary component")


def connect_torus(U, V, epsilon: float, tol: float = 1e-8) -> MatrixPath:
    """Path between commuting unitary tuples via the interleaved real/imaginary lift."""
    uc = as_components(U, "U")
    vc = as_components(V, "V")
    epsilon = check_positive(epsilon, "epsilon")
    if uc.shape != vc.shape:
        raise ValueError(f"dimension mismatch: {uc.shape} vs {vc.shape}")
    _check_unitary(uc, "U", tol)
    _check_unitary(vc, "V", tol)
    if np.array_equal(uc, vc):
        return constant_path(uc, "torus")
    atlas = builtin_atlas("torus", uc.shape[0])
    hu, hv = interleaved_partition(uc), interleaved_partition(vc)
    plan = _manifold_plan(hu, hv, epsilon / 2.0, atlas, tol)
    return _assemble(plan, uc, vc, "torus", post="interleaved", atlas=atlas.atlas_id, scale=2.0)


def connect_sphere(H1, H2, epsilon: float, tol: float = 1e-8) -> MatrixPath:
    """Path between commuting hermitian tuples with ``sum H_k^2 = 1``."""
    h1 = as_components(H1, "H1")
    h2 = as_components(H2, "H2")
    epsilon = check_positive(epsilon, "epsilon")
    if h1.shape != h2.shape:
        raise ValueError(f"dimension mismatch: {h1.shape} vs {h2.shape}")
    if np.array_equal(h1, h2):
        _check_hermitian_contractions(h1, "H1", tol)
        return constant_path(h1, "sphere")
    path = connect_manifold(h1, h2, epsilon, builtin_atlas("sphere", h1.shape[0]), tol)
    return replace(
        path,
        variety="sphere",
        start=path.start.with_variety("sphere"),
        end=path.end.with_variety("sphere"),
    )


def connect_spherical_unitary(S, T, epsilon: float, tol: float = 1e-8) -> MatrixPath:
    """Path between commuting normal tuples with ``sum S_k S_k^* = 1``."""
    sc = as_components(S, "S")
    tc = as_components(T, "T")
    epsilon = check_positive(epsilon, "epsilon")
    if sc.shape != tc.shape:
        raise ValueError(f"dimension mismatch: {sc.shape} vs {tc.shape}")
    for name, comps in (("S", sc), ("T", tc)):
        _check_normal_tuple(comps, name, tol)
    if np.array_equal(sc, tc):
        return constant_path(sc, "spherical-unitary")
    atlas = builtin_atlas("sphere", 2 * sc.shape[0])
    hs, ht = interleaved_partition(sc), interleaved_partition(tc)
    plan = _manifold_plan(hs, ht, epsilon / 2.0, atlas, tol)
    return _assemble(
        plan, sc, tc, "spherical-unitary", post="interleaved", atlas=atlas.atlas_id, scale=2.0
    )


def connect(X, Y, variety: str, epsilon: float, tol: float = 1e-8) -> MatrixPath:
    """Dispatch to the ``connect_*`` routine for ``variety``."""
    if variety == "cube":
        return connect_cube(X, Y, epsilon, tol)
    if variety == "disk":
        return connect_disk(X, Y, epsilon, tol)
    if variety == "torus":
        return connect_torus(X, Y, epsilon, tol)
    if variety == "sphere":
        return connect_sphere(X, Y, epsilon, tol)
    if variety == "spherical-unitary":
        return connect_spherical_unitary(X, Y, epsilon, tol)
    if isinstance(variety, str) and variety.startswith("manifold:"):
        return connect_manifold(X, Y, epsilon, variety, tol)
    raise ValueError(f"no path construction for variety {variety!r}")
