import itertools

import numpy as np
import pytest

from commpath.linalg import (
    ConvergenceError,
    MatrixTuple,
    NotCommutingError,
    conjugation_morphism,
    eigenvalue_assignment,
    full_pinching,
    hausdorff_distance,
    hermitian_partition,
    interleaved_juncture,
    interleaved_partition,
    joint_diagonalize,
    juncture,
    metric_eth,
    pseudospectrum_member,
)

from conftest import commuting_hermitian, conj_diag, expi, hermitian_unit, qr_unitary, spec_norm


def brute_hausdorff(A, B):
    A = [np.atleast_1d(a) for a in A]
    B = [np.atleast_1d(b) for b in B]
    d = lambda a, b: float(np.sqrt(np.sum(np.abs(a - b) ** 2)))
    ab = max(min(d(a, b) for b in B) for a in A)
    ba = max(min(d(a, b) for a in A) for b in B)
    return max(ab, ba)


class TestMetric:
    def test_self_distance_zero(self, rng):
        X, _, _ = commuting_hermitian(rng, 5, 2)
        assert metric_eth(X, X) == 0.0

    def test_rank_one_difference(self):
        assert metric_eth([np.diag([1.0, 0.0])], [np.diag([0.0, 0.0])]) == pytest.approx(1.0)

    def test_two_component_example(self):
        S = [np.diag([0.3, -0.2]), np.diag([0.1, 0.4])]
        T = [np.diag([0.25, -0.2]), np.diag([0.1, 0.1])]
        # oracle: componentwise largest singular value by hand
        expected = max(max(abs(0.3 - 0.25), 0.0), max(0.0, abs(0.4 - 0.1)))
        assert metric_eth(S, T) == pytest.approx(expected, abs=1e-15)
        assert expected == pytest.approx(0.3)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            metric_eth(np.zeros((1, 2, 2)), np.zeros((2, 2, 2)))

    def test_metric_axioms(self, rng):
        for _ in range(20):
            A, B, C = (rng.standard_normal((2, 4, 4)) + 1j * rng.standard_normal((2, 4, 4)) for _ in range(3))
            assert metric_eth(A, B) == pytest.approx(metric_eth(B, A), rel=1e-14)
            assert metric_eth(A, C) <= metric_eth(A, B) + metric_eth(B, C) + 1e-12
            assert metric_eth(A, B) > 0


class TestPartitions:
    def test_imaginary_scalar(self):
        H = hermitian_partition([1j * np.eye(3)])
        assert np.allclose(H[0], 0) and np.allclose(H[1], np.eye(3))

    def test_hermitian_input(self):
        H = hermitian_partition([np.eye(3)])
        assert np.allclose(H[0], np.eye(3)) and np.allclose(H[1], 0)

    def test_diagonal_example(self):
        H = hermitian_partition([np.diag([0.6 + 0.8j, -1.0])])
        assert np.allclose(H[0], np.diag([0.6, -1.0]), atol=1e-15)
        assert np.allclose(H[1], np.diag([0.8, 0.0]), atol=1e-15)

    def test_juncture_examples(self):
        assert np.allclose(juncture([np.zeros((2, 2)), np.eye(2)])[0], 1j * np.eye(2))
        J = juncture([np.diag([0.6, -1.0]), np.diag([0.8, 0.0])])
        assert np.allclose(J[0], np.diag([0.6 + 0.8j, -1.0]), atol=1e-15)

    def test_odd_arity_rejected(self):
        with pytest.raises(ValueError):
            juncture(np.zeros((3, 2, 2)))

    def test_non_normal_rejected(self):
        with pytest.raises(NotCommutingError):
            hermitian_partition([np.array([[0.0, 1.0], [0.0, 0.0]])])

    def test_round_trip_and_hermiticity(self, rng):
        Q = qr_unitary(rng, 6)
        pts = rng.standard_normal((6, 3)) + 1j * rng.standard_normal((6, 3))
        X = np.array([conj_diag(Q, pts[:, j]) for j in range(3)])
        H = hermitian_partition(X)
        for C in H:
            assert spec_norm(C - C.conj().T) <= 1e-13 * max(spec_norm(C), 1.0)
        assert np.allclose(juncture(H).components, X, rtol=0, atol=1e-14)
        # commuting inputs give commuting parts
        for A, B in itertools.combinations(H, 2):
            assert spec_norm(A @ B - B @ A) < 1e-12

    def test_interleaved_round_trip(self, rng):
        Q = qr_unitary(rng, 4)
        U = np.array([conj_diag(Q, np.exp(1j * rng.uniform(-3, 3, 4))) for _ in range(2)])
        H = interleaved_partition(U)
        assert np.allclose(H[0], 0.5 * (U[0] + U[0].conj().T))
        assert np.allclose(H[1], -0.5j * (U[0] - U[0].conj().T))
        assert np.allclose(interleaved_juncture(H), U, atol=1e-14)


class TestPinching:
    def test_examples(self):
        assert np.array_equal(full_pinching(np.array([[1, 5], [7, 2]])), np.diag([1, 2]))
        d = np.diag([0.3, -2.0, 1j])
        assert np.array_equal(full_pinching(d), d)

    def test_idempotent_and_contractive(self, rng):
        for _ in range(100):
            A = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
            B = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
            DA = full_pinching(A)
            assert np.array_equal(full_pinching(DA), DA)
            assert spec_norm(DA - full_pinching(B)) <= spec_norm(A - B) + 1e-12


class TestJointDiagonalize:
    def test_already_diagonal(self):
        D = np.array([np.diag([0.2, -0.5, 0.7]), np.diag([1.0, 0.0, 0.3])])
        W, spec = joint_diagonalize(D)
        assert np.allclose(np.abs(W), np.eye(3)[:, np.argmax(np.abs(W), axis=0)])
        assert np.allclose(spec.points, np.stack([np.diag(D[0]), np.diag(D[1])], axis=1).real)

    def test_construct_then_recover(self, rng):
        X, Q, pts = commuting_hermitian(rng, 10, 2)
        W, spec = joint_diagonalize(X)
        assert spec_norm(W.conj().T @ W - np.eye(10)) < 1e-12
        for j in range(2):
            D = W.conj().T @ X[j] @ W
            assert np.max(np.abs(D - np.diag(np.diag(D)))) <= 1e-8 * spec_norm(X[j])
        got = sorted(map(tuple, np.round(spec.points, 10)))
        want = sorted(map(tuple, np.round(pts, 10)))
        assert np.allclose(got, want, atol=1e-10)

    def test_single_hermitian_matches_eigh(self, rng):
        X, _, _ = commuting_hermitian(rng, 7, 1)
        _, spec = joint_diagonalize(X)
        assert np.allclose(np.sort(spec.points[:, 0]), np.linalg.eigvalsh(X[0]), atol=1e-12)

    def test_degenerate_combination_uses_sweeps(self, rng):
        Q = qr_unitary(rng, 8)
        a = np.array([1, 1, 0, 0, 0.5, 0.5, 0.2, 0.2])
        b = np.array([0, 1, 1, 0, 0.3, 0.1, 0.2, 0.7])
        X = np.array([conj_diag(Q, a), conj_diag(Q, b)])
        # coefficients (1, 1) make the combination's spectrum collide
        W, spec = joint_diagonalize(X, coefficients=[1.0, 1.0])
        for j in range(2):
            D = W.conj().T @ X[j] @ W
            assert np.max(np.abs(D - np.diag(np.diag(D)))) <= 1e-8
        got = sorted(map(tuple, np.round(spec.points, 9)))
        want = sorted(zip(a, b))
        assert np.allclose(got, want, atol=1e-9)

    def test_normal_tuple(self, rng):
        Q = qr_unitary(rng, 6)
        pts = rng.standard_normal((6, 2)) + 1j * rng.standard_normal((6, 2))
        X = np.array([conj_diag(Q, pts[:, j]) for j in range(2)])
        _, spec = joint_diagonalize(X)
        assert brute_hausdorff(list(spec.points), list(pts)) < 1e-10

    def test_spectrum_preserved(self, rng):
        X, _, _ = commuting_hermitian(rng, 12, 3)
        W, _ = joint_diagonalize(X)
        for j in range(3):
            diag = np.diag(W.conj().T @ X[j] @ W).real
            assert brute_hausdorff(list(diag), list(np.linalg.eigvalsh(X[j]))) <= 1e-8

    def test_non_commuting_rejected(self, rng):
        A = hermitian_unit(rng, 4)
        B = hermitian_unit(rng, 4)
        with pytest.raises(NotCommutingError) as info:
            joint_diagonalize([A, B])
        assert info.value.residual > 1e-3

    def test_stalled_sweeps_raise(self, rng):
        Q = qr_unitary(rng, 6)
        X = np.array([conj_diag(Q, [1, 1, 0, 0, 0.5, 0.5]), conj_diag(Q, [0, 1, 1, 0, 0.3, 0.1])])
        with pytest.raises(ConvergenceError):
            joint_diagonalize(X, coefficients=[1.0, 1.0], max_sweeps=0)

    def test_scalar_case(self):
        W, spec = joint_diagonalize([np.array([[0.3]]), np.array([[-0.4]])])
        assert W.shape == (1, 1) and np.allclose(spec.points, [[0.3, -0.4]])


class TestAssignment:
    def test_identity_for_equal(self, rng):
        A = rng.standard_normal((6, 2))
        assert np.array_equal(eigenvalue_assignment(A, A), np.arange(6))

    def test_two_point_swap(self):
        perm = eigenvalue_assignment(np.array([[0.0], [1.0]]), np.array([[1.01], [-0.01]]))
        # exhaustive oracle over both permutations
        costs = {p: max(abs(np.array([0.0, 1.0])[list(p)] - np.array([1.01, -0.01]))) for p in [(0, 1), (1, 0)]}
        assert tuple(perm) == min(costs, key=costs.get) == (1, 0)

    def test_beats_random_permutations(self, rng):
        for _ in range(10):
            A = rng.standard_normal((5, 2))
            B = rng.standard_normal((5, 2))
            cost = lambda p: np.max(np.abs(A[p] - B))
            best = cost(eigenvalue_assignment(A, B))
            for _ in range(50):
                assert best <= cost(rng.permutation(5)) + 1e-15
            exhaustive = min(cost(list(p)) for p in itertools.permutations(range(5)))
            assert best == pytest.approx(exhaustive)

    def test_deterministic(self, rng):
        A = rng.standard_normal((30, 2))
        B = A + 0.01 * rng.standard_normal((30, 2))
        assert np.array_equal(eigenvalue_assignment(A, B), eigenvalue_assignment(A, B))

    def test_greedy_above_threshold(self, rng):
        A = rng.standard_normal((20, 1))
        B = A[::-1] + 1e-3
        perm = eigenvalue_assignment(A, B, greedy_above=10)
        assert np.max(np.abs(A[perm] - B)) < 2e-3


class TestConjugation:
    def test_equal_diagonal(self):
        D = np.array([np.diag([0.1, 0.5, -0.3])])
        c = conjugation_morphism(D, D)
        assert np.allclose(c.W, np.eye(3), atol=1e-14)
        assert np.allclose(c.psi_x.components, D, atol=1e-14)

    def test_exact_conjugate(self, rng):
        Y = np.array([np.diag(rng.uniform(-1, 1, 6)), np.diag(rng.uniform(-1, 1, 6))])
        R = expi(hermitian_unit(rng, 6), 0.01)
        X = R[None] @ Y @ R.conj().T[None]
        c = conjugation_morphism(X, Y)
        assert c.eth_to_y <= 1e-10
        assert np.allclose(c.W @ X[0] @ c.W.conj().T, c.psi_x[0], atol=1e-12)
        assert spec_norm(c.W.conj().T @ c.W - np.eye(6)) < 1e-12

    def test_psi_commutes_with_y(self, rng):
        X, _, _ = commuting_hermitian(rng, 8, 2)
        Y, _, _ = commuting_hermitian(rng, 8, 2)
        c = conjugation_morphism(X, Y)
        for A in c.psi_x:
            for B in Y:
                assert spec_norm(A @ B - B @ A) < 1e-10
        assert np.isfinite(c.eth_to_y)
        # bottleneck optimality of the reported distance
        achieved = np.max(np.abs(c.points - c.target_points))
        optimal = min(
            np.max(np.abs(c.points[list(p)] - c.target_points)) for p in itertools.permutations(range(8))
        )
        assert achieved == pytest.approx(optimal, abs=1e-12)


class TestHausdorffAndPseudospectrum:
    def test_examples(self):
        A = np.array([0.3 + 0.1j, -0.2j])
        assert hausdorff_distance(A, A) == 0.0
        assert hausdorff_distance(np.array([0.0]), np.array([1.0])) == 1.0
        assert hausdorff_distance(np.array([-1.0, 1.0]), np.array([0.0, 0.5])) == pytest.approx(
            brute_hausdorff([-1.0, 1.0], [0.0, 0.5])
        )
        assert brute_hausdorff([-1.0, 1.0], [0.0, 0.5]) == 1.0

    def test_against_brute_force(self, rng):
        for _ in range(20):
            A = rng.standard_normal((5, 2)) + 1j * rng.standard_normal((5, 2))
            B = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
            assert hausdorff_distance(A, B) == pytest.approx(brute_hausdorff(list(A), list(B)), rel=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            hausdorff_distance(np.array([]), np.array([1.0]))

    def test_pseudospectrum(self):
        X = np.diag([0.0, 1.0])
        assert pseudospectrum_member(X, 1.0, 0.0)
        assert pseudospectrum_member(X, 0.1, 0.2)
        assert not pseudospectrum_member(X, 0.5, 0.2)

    def test_pseudospectrum_nonnormal(self):
        J = np.array([[0.0, 1.0], [0.0, 0.0]])
        s_min = np.linalg.svd(J - 0.1 * np.eye(2), compute_uv=False)[-1]
        assert pseudospectrum_member(J, 0.1, s_min + 1e-9)
        assert not pseudospectrum_member(J, 0.1, 0.5 * s_min)


class TestMatrixTuple:
    def test_validation(self):
        with pytest.raises(ValueError):
            MatrixTuple(np.zeros((2, 3)))
        with pytest.raises(ValueError):
            MatrixTuple(np.full((1, 2, 2), np.nan))
        with pytest.raises(ValueError):
            MatrixTuple(np.eye(2), "klein-bottle")
        T = MatrixTuple(np.eye(2), "cube")
        assert (T.m, T.n, len(T)) == (1, 2, 1)
        assert MatrixTuple(np.eye(2), "manifold:sphere-2").variety == "manifold:sphere-2"
