import numpy as np
import pytest
from scipy.linalg import expm

from commpath.interpolant import (
    BudgetInfeasible,
    almost_commuting_unitary_correction,
    build_interpolant,
    projection_exchange_unitary,
    unitary_log_generator,
)
from commpath.linalg import hausdorff_distance, metric_eth

from conftest import commuting_hermitian, expi, hermitian_unit, qr_unitary, spec_norm


def rank_projector(V):
    return V @ V.conj().T


def block_projectors(Q, sizes):
    out, start = [], 0
    for s in sizes:
        out.append(rank_projector(Q[:, start : start + s]))
        start += s
    return np.array(out)


class TestExchangeUnitary:
    def test_equal_projectors(self, rng):
        P = rank_projector(qr_unitary(rng, 5)[:, :2])
        assert np.allclose(projection_exchange_unitary(P, P), np.eye(5), atol=1e-12)

    def test_rotation_oracle(self):
        theta = 0.1
        c, s = np.cos(theta), np.sin(theta)
        P = np.diag([1.0, 0.0])
        v = np.array([[c], [s]])
        Q = v @ v.T
        U = projection_exchange_unitary(P, Q)
        # the polar factor of QP + (1-Q)(1-P) = cos(theta) R(theta) is R(theta)
        R = np.array([[c, -s], [s, c]])
        assert np.allclose(U, R, atol=1e-12)
        assert spec_norm(U @ P @ U.conj().T - Q) <= 1e-10
        assert spec_norm(np.eye(2) - U) <= np.sqrt(2) * s + 1e-10

    def test_random_close_pairs(self, rng):
        for _ in range(20):
            V = qr_unitary(rng, 8)[:, :3]
            W = expi(hermitian_unit(rng, 8), rng.uniform(0, 0.15))
            P = rank_projector(V)
            Q = W @ P @ W.conj().T
            if spec_norm(P - Q) > 0.3:
                continue
            U = projection_exchange_unitary(P, Q)
            assert spec_norm(U @ U.conj().T - np.eye(8)) <= 1e-10
            assert spec_norm(U @ P @ U.conj().T - Q) <= 1e-10
            assert spec_norm(np.eye(8) - U) <= np.sqrt(2) * spec_norm(P - Q) + 1e-10

    def test_far_apart(self):
        with pytest.raises(ValueError):
            projection_exchange_unitary(np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))


class TestCorrection:
    def test_commuting_unitary(self, rng):
        W = np.diag(np.exp(1j * rng.uniform(-1, 1, 4)))
        P = block_projectors(np.eye(4), [1, 3])
        res = almost_commuting_unitary_correction(W, P)
        assert np.allclose(res.Z, W.conj().T, atol=1e-14)
        assert spec_norm(np.eye(4) - W @ res.Z) <= 1e-14

    def test_two_by_two(self):
        eps = 0.05
        K = np.array([[0.0, 1.0], [1.0, 0.0]])
        W = expm(1j * eps * K)
        D = np.diag([1.0, -1.0])
        P = np.array([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])])
        res = almost_commuting_unitary_correction(W, P)
        # W e_k has a positive real k-th entry, so each direct rotation sends it back to e_k
        assert np.allclose(res.Z, np.eye(2), atol=1e-12)
        d = spec_norm(W @ P[0] @ W.conj().T - P[0])
        assert d == pytest.approx(np.sin(eps), abs=1e-12)
        assert spec_norm(res.Z @ D - D @ res.Z) <= 1e-10
        assert spec_norm(np.eye(2) - W @ res.Z) <= np.sqrt(2) * 2 * d + 1e-10
        assert res.residual == pytest.approx(2 * np.sin(eps / 2), abs=1e-12)

    def test_random_blocks(self, rng):
        Q = qr_unitary(rng, 16)
        P = block_projectors(Q, [3, 5, 2, 6])
        W = expi(hermitian_unit(rng, 16), 0.02)
        res = almost_commuting_unitary_correction(W, P)
        N = len(P)
        assert np.max(res.defects) < 1 / (np.sqrt(2) * N)
        assert spec_norm(res.Z @ res.Z.conj().T - np.eye(16)) <= 1e-10
        for p in P:
            assert spec_norm(res.Z @ p - p @ res.Z) <= 1e-10
        assert res.residual <= np.sqrt(2) * N * np.max(res.defects) + 1e-10
        # correction chain: ||W - Wtilde|| <= sum_j ||1 - W_j||
        moved = W[None] @ P @ W.conj().T[None]
        chain = sum(spec_norm(np.eye(16) - projection_exchange_unitary(m, p)) for m, p in zip(moved, P))
        assert spec_norm(W - res.Wtilde) <= chain + 1e-10

    def test_precondition(self, rng):
        Q = qr_unitary(rng, 8)
        P = block_projectors(Q, [2, 2, 2, 2])
        W = expi(hermitian_unit(rng, 8), 0.6)
        with pytest.raises(BudgetInfeasible, match="projector"):
            almost_commuting_unitary_correction(W, P)

    def test_nu_requirement(self, rng):
        P = block_projectors(qr_unitary(rng, 6), [3, 3])
        W = expi(hermitian_unit(rng, 6), 0.05)
        res = almost_commuting_unitary_correction(W, P)
        with pytest.raises(BudgetInfeasible):
            almost_commuting_unitary_correction(W, P, nu=res.residual / 2)


class TestLogGenerator:
    def test_identity(self):
        assert np.array_equal(unitary_log_generator(np.eye(3)), np.zeros((3, 3)))

    def test_scalar(self):
        H = unitary_log_generator(np.array([[np.exp(1j * np.pi / 4)]]))
        assert H[0, 0] == pytest.approx(0.5, abs=1e-15)

    def test_recover(self, rng):
        for n in (2, 5, 12):
            G = 0.9 * hermitian_unit(rng, n)
            Z = expm(0.5j * np.pi * G)
            H = unitary_log_generator(Z)
            assert spec_norm(H - G) <= 1e-10
            assert spec_norm(H - H.conj().T) == 0
            assert spec_norm(expm(0.5j * np.pi * H) - Z) <= 1e-10

    def test_too_far(self):
        with pytest.raises(ValueError):
            unitary_log_generator(-np.eye(2))


def rotated_pair(rng, n, m, eps):
    X, _, _ = commuting_hermitian(rng, n, m)
    U = expi(hermitian_unit(rng, n), eps)
    Y = U[None] @ X @ U.conj().T[None]
    return X, 0.5 * (Y + Y.conj().transpose(0, 2, 1))


class TestBuildInterpolant:
    def test_identical_diagonal(self):
        X = np.array([np.diag([0.3, -0.2, 0.9]), np.diag([0.1, 0.1, -0.5])])
        itp = build_interpolant(X, X, 0.25)
        assert spec_norm(itp.H) <= 1e-12
        assert spec_norm(np.abs(itp.W) - np.eye(3)) <= 1e-12
        for t in (0.0, 0.3, 1.0):
            assert np.allclose(itp.apply(t), itp.Xtilde.components, atol=1e-12)

    def test_small_rotation(self, rng):
        X, Y = rotated_pair(rng, 4, 2, 0.01)
        delta = max(metric_eth(X, Y), 0.1)
        itp = build_interpolant(X, Y, delta)
        xt = itp.Xtilde.components
        for t in (0.0, 0.25, 0.5, 0.75, 1.0):
            assert metric_eth(xt, itp.apply(t)) < itp.nu or itp.nu == 0

    @pytest.mark.parametrize("n,m", [(4, 1), (8, 2), (16, 3), (32, 2)])
    def test_invariants(self, n, m):
        rng = np.random.default_rng(100 + n + m)
        X, Y = rotated_pair(rng, n, m, 0.004)
        itp = build_interpolant(X, Y, 0.1)
        xt = itp.Xtilde.components
        W = itp.W
        # Ad[W](Xtilde) and psi_1(Xtilde) agree; Z = Wtilde^* W = exp(i pi H / 2)
        target = W[None] @ xt @ W.conj().T[None]
        assert metric_eth(itp.apply(1.0), target) <= 1e-8
        assert spec_norm(itp.unitary(1.0) - itp.Wtilde.conj().T @ W) <= 1e-10
        assert spec_norm(itp.H) <= 1 + 1e-12
        assert np.array_equal(itp.apply(0.0), xt)
        # Xtilde is a commuting grid approximant of X
        assert metric_eth(X, xt) <= 0.1 + 1e-12
        for j in range(m):
            ev0 = np.linalg.eigvalsh(xt[j])
            for t in np.linspace(0, 1, 9):
                A = itp.apply(t)
                assert spec_norm(A[j] - A[j].conj().T) == 0
                assert hausdorff_distance(np.linalg.eigvalsh(A[j]), ev0) <= 1e-10
                for k in range(m):
                    assert spec_norm(A[j] @ A[k] - A[k] @ A[j]) <= 1e-10
        # monotone path bound
        rot = spec_norm(np.eye(n) - itp.unitary(1.0))
        for t in np.linspace(0, 1, 9):
            step = spec_norm(np.eye(n) - itp.unitary(t))
            assert metric_eth(itp.apply(t), xt) <= 2 * step + 1e-12
            assert step <= rot + 1e-12

    def test_distance_above_delta(self, rng):
        X, _, _ = commuting_hermitian(rng, 4, 2)
        Y, _, _ = commuting_hermitian(rng, 4, 2)
        with pytest.raises(BudgetInfeasible):
            build_interpolant(X, Y, 0.01)

    def test_rejects_non_hermitian(self):
        X = np.array([[[0.0, 1.0], [0.0, 0.0]]])
        with pytest.raises(ValueError):
            build_interpolant(X, X, 0.5)
