"""Property-based checks of the invariants, driven by hypothesis."""

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from commpath.interpolant import build_interpolant, projection_exchange_unitary
from commpath.linalg import eigenvalue_assignment, hausdorff_distance, metric_eth
from commpath.manifold import builtin_atlas
from commpath.paths import connect
from commpath.pma import build_grids, cpma_md
from commpath.sampling import perturb_tuple, random_tuple
from commpath.serialize import dumps, loads, tuple_from_dict, tuple_to_dict
from commpath.verify import certify_path

from conftest import commuting_hermitian, expi, hermitian_unit, qr_unitary, spec_norm

SETTINGS = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
seeds = st.integers(0, 2**32 - 1)


@SETTINGS
@given(st.floats(1e-3, 1.0), st.floats(-1.0, 1.0))
def test_grid_snap_within_spacing(delta, x):
    g = build_grids(delta)
    assert abs(g.snap(x) - x) <= g.spacing + 1e-12
    assert g.spacing <= delta


@SETTINGS
@given(seeds, st.integers(1, 12), st.integers(1, 12))
def test_hausdorff_symmetric_and_bounded(seed, n, k):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    B = rng.standard_normal(k) + 1j * rng.standard_normal(k)
    d = hausdorff_distance(A, B)
    assert d == hausdorff_distance(B, A)
    assert hausdorff_distance(A, A) == 0
    assert d <= np.max(np.abs(A[:, None] - B[None, :])) + 1e-15


@SETTINGS
@given(seeds, st.integers(2, 24))
def test_hausdorff_below_norm_for_normal(seed, n):
    rng = np.random.default_rng(seed)
    Q1, Q2 = qr_unitary(rng, n), qr_unitary(rng, n)
    A = Q1 @ np.diag(rng.standard_normal(n) + 1j * rng.standard_normal(n)) @ Q1.conj().T
    B = Q2 @ np.diag(rng.standard_normal(n) + 1j * rng.standard_normal(n)) @ Q2.conj().T
    assert hausdorff_distance(np.linalg.eigvals(A), np.linalg.eigvals(B)) <= spec_norm(A - B) + 1e-10


@SETTINGS
@given(seeds, st.integers(1, 7))
def test_assignment_is_permutation(seed, n):
    rng = np.random.default_rng(seed)
    A, B = rng.standard_normal((n, 2)), rng.standard_normal((n, 2))
    perm = eigenvalue_assignment(A, B)
    assert sorted(perm.tolist()) == list(range(n))


@SETTINGS
@given(seeds, st.integers(1, 20), st.integers(1, 3), st.sampled_from([1.0, 0.5, 0.2, 0.05]))
def test_cpma_bounds(seed, n, m, delta):
    X, _, _ = commuting_hermitian(np.random.default_rng(seed), n, m)
    Xt, decomp = cpma_md(X, delta)
    assert metric_eth(X, Xt) <= delta + 1e-12
    assert spec_norm(decomp.projectors.sum(axis=0) - np.eye(n)) <= 1e-10
    for j in range(m):
        assert hausdorff_distance(np.linalg.eigvalsh(X[j]), np.linalg.eigvalsh(Xt[j])) <= delta + 1e-12


@SETTINGS
@given(seeds, st.integers(2, 10), st.floats(0.0, 0.2))
def test_exchange_unitary_bound(seed, n, eta):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, n))
    V = qr_unitary(rng, n)[:, :k]
    P = V @ V.conj().T
    W = expi(hermitian_unit(rng, n), eta)
    Q = W @ P @ W.conj().T
    U = projection_exchange_unitary(P, Q)
    assert spec_norm(U @ P @ U.conj().T - Q) <= 1e-10
    assert spec_norm(np.eye(n) - U) <= np.sqrt(2) * spec_norm(P - Q) + 1e-10


@SETTINGS
@given(seeds, st.integers(2, 10), st.integers(1, 3))
def test_interpolant_isospectral(seed, n, m):
    rng = np.random.default_rng(seed)
    X, _, _ = commuting_hermitian(rng, n, m)
    U = expi(hermitian_unit(rng, n), 0.002)
    Y = U[None] @ X @ U.conj().T[None]
    Y = 0.5 * (Y + Y.conj().transpose(0, 2, 1))
    itp = build_interpolant(X, Y, 0.1)
    xt = itp.Xtilde.components
    for t in (0.0, 0.5, 1.0):
        A = itp.apply(t)
        # nu can itself be round-off sized, so allow a conjugation round-off term
        assert metric_eth(A, xt) <= itp.nu + 1e-12
        for j in range(m):
            assert hausdorff_distance(np.linalg.eigvalsh(A[j]), np.linalg.eigvalsh(xt[j])) <= 1e-10


@SETTINGS
@given(st.sampled_from(["sphere-2", "sphere-3", "torus-1", "torus-2", "cube-2"]), seeds)
def test_atlas_round_trip(atlas_id, seed):
    atlas = builtin_atlas(atlas_id)
    Z = atlas.sample(16, np.random.default_rng(seed))
    c = atlas.best_chart(Z)
    assert np.max(np.abs(atlas.from_params(atlas.to_params(Z, c), c) - Z)) <= 1e-10


@settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.sampled_from(["cube", "disk", "torus", "sphere", "spherical-unitary"]), seeds, st.integers(1, 8))
def test_connect_certifies(variety, seed, n):
    m = 3 if variety == "sphere" else 2
    X = random_tuple(variety, n, m, seed=seed)
    Y, dist = perturb_tuple(X, 0.01, seed=seed + 1)
    assert dist <= 0.01
    path = connect(X, Y, variety, 0.5)
    cert = certify_path(path, expected_start=X, expected_end=Y)
    assert cert.passed, cert.failed_check


@SETTINGS
@given(seeds, st.integers(1, 5), st.integers(1, 3))
def test_serialize_round_trip(seed, n, m):
    rng = np.random.default_rng(seed)
    exps = rng.integers(-300, 300, (m, n, n))
    A = (rng.standard_normal((m, n, n)) + 1j * rng.standard_normal((m, n, n))) * 10.0 ** exps
    back = tuple_from_dict(loads(dumps(tuple_to_dict(A))))
    assert back.components.tobytes() == np.ascontiguousarray(A).tobytes()
