import numpy as np
import pytest

from subface.errors import ContractError, DimensionError, RankError
from subface.numerics import (
    KernelSpec,
    center_kernel_test,
    center_kernel_train,
    default_rbf_sigma,
    eig_sym,
    kernel_matrix,
    snapshot_pca,
    whiten,
)


def random_symmetric(n, rng):
    A = rng.standard_normal((n, n))
    return 0.5 * (A + A.T)


class TestEigSym:
    def test_diagonal(self):
        decomp = eig_sym(np.diag([2.0, 1.0]))
        np.testing.assert_allclose(decomp.values, [2.0, 1.0])
        np.testing.assert_allclose(decomp.vectors, np.eye(2))

    def test_offdiagonal_hand_solution(self):
        # characteristic polynomial of [[0,1],[1,0]] gives eigenvalues +-1
        decomp = eig_sym(np.array([[0.0, 1.0], [1.0, 0.0]]))
        np.testing.assert_allclose(decomp.values, [1.0, -1.0], atol=1e-12)
        s = 1.0 / np.sqrt(2.0)
        np.testing.assert_allclose(decomp.vectors[:, 0], [s, s], atol=1e-12)
        np.testing.assert_allclose(decomp.vectors[:, 1], [s, -s], atol=1e-12)

    def test_reconstruction_oracle(self, rng):
        S = random_symmetric(5, rng)
        decomp = eig_sym(S)
        recon = decomp.vectors @ np.diag(decomp.values) @ decomp.vectors.T
        assert np.max(np.abs(recon - S)) <= 1e-8 * np.max(np.abs(S))

    @pytest.mark.parametrize("n", [2, 7, 20, 50])
    def test_reconstruction_up_to_50(self, n, rng):
        S = random_symmetric(n, rng)
        decomp = eig_sym(S)
        recon = decomp.vectors @ np.diag(decomp.values) @ decomp.vectors.T
        assert np.max(np.abs(recon - S)) <= 1e-8 * np.max(np.abs(S))

    def test_orthonormal_columns(self, rng):
        decomp = eig_sym(random_symmetric(12, rng))
        gram = decomp.vectors.T @ decomp.vectors
        assert np.max(np.abs(gram - np.eye(12))) < 1e-8

    def test_descending_and_eigenpair_residuals(self, rng):
        S = random_symmetric(10, rng)
        decomp = eig_sym(S)
        assert np.all(np.diff(decomp.values) <= 0)
        for j in range(10):
            resid = S @ decomp.vectors[:, j] - decomp.values[j] * decomp.vectors[:, j]
            assert np.max(np.abs(resid)) <= 1e-8 * (abs(decomp.values[j]) + 1)

    def test_sign_convention(self, rng):
        decomp = eig_sym(random_symmetric(9, rng))
        for j in range(9):
            col = decomp.vectors[:, j]
            lead = col[np.flatnonzero(np.abs(col) > 1e-12)[0]]
            assert lead > 0

    def test_rejects_asymmetric(self):
        with pytest.raises(ContractError):
            eig_sym(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_rejects_nonsquare(self):
        with pytest.raises(DimensionError):
            eig_sym(np.zeros((2, 3)))


class TestSnapshotPca:
    def test_antipodal_columns_single_direction(self):
        v = np.array([1.0, 1.0, 0.0])
        X = np.stack([v, -v], axis=1)  # already zero-mean
        basis, values = snapshot_pca(X, 1)
        np.testing.assert_allclose(basis[:, 0], v / np.sqrt(2), atol=1e-12)
        assert values[0] == pytest.approx(float(v @ v))  # covariance is v v^T

    def test_matches_direct_covariance_eig(self, rng):
        X = rng.standard_normal((6, 4))
        X -= X.mean(axis=1, keepdims=True)
        basis, values = snapshot_pca(X, 3)
        direct = eig_sym(X @ X.T / 4)
        np.testing.assert_allclose(values, direct.values[:3], atol=1e-10)
        np.testing.assert_allclose(basis, direct.vectors[:, :3], atol=1e-8)

    def test_degenerate_spectrum_same_subspace(self):
        # orthogonal equal-norm columns: eigenvalues tie, spans must agree
        X = np.array(
            [[2.0, 0.0, -2.0, 0.0],
             [0.0, 2.0, 0.0, -2.0],
             [0.0, 0.0, 0.0, 0.0]]
        )
        basis, values = snapshot_pca(X, 2)
        assert values[0] == pytest.approx(values[1])
        direct = eig_sym(X @ X.T / 4)
        P_snap = basis @ basis.T
        P_direct = direct.vectors[:, :2] @ direct.vectors[:, :2].T
        assert np.max(np.abs(P_snap - P_direct)) < 1e-8

    def test_snapshot_equals_direct_for_many_shapes(self, rng):
        for n, m in [(10, 5), (30, 8), (50, 12)]:
            X = rng.standard_normal((n, m))
            X -= X.mean(axis=1, keepdims=True)
            t = m - 1
            basis, _ = snapshot_pca(X, t)
            direct = eig_sym(X @ X.T / m)
            P_snap = basis @ basis.T
            P_direct = direct.vectors[:, :t] @ direct.vectors[:, :t].T
            assert np.max(np.abs(P_snap - P_direct)) < 1e-8

    def test_rank_error_reports_attainable(self, rng):
        v = rng.standard_normal(8)
        X = np.stack([v, -v, 2 * v, -2 * v], axis=1)  # rank 1
        with pytest.raises(RankError) as excinfo:
            snapshot_pca(X, 3)
        assert excinfo.value.attainable == 1

    def test_unit_norm_basis(self, rng):
        X = rng.standard_normal((12, 6))
        X -= X.mean(axis=1, keepdims=True)
        basis, _ = snapshot_pca(X, 4)
        np.testing.assert_allclose(np.linalg.norm(basis, axis=0), 1.0, atol=1e-10)


class TestKernelMatrix:
    def test_rbf_zero_distance(self):
        x = np.array([[1.0], [2.0]])
        K = kernel_matrix(x, x, KernelSpec(kind="rbf", sigma=0.7))
        assert K[0, 0] == pytest.approx(1.0)

    def test_poly2_hand_value(self):
        x = np.array([[1.0], [1.0]])
        K = kernel_matrix(x, x, KernelSpec(kind="poly2", offset=1.0))
        assert K[0, 0] == pytest.approx(9.0)  # (1*1 + 1*1 + 1)^2

    def test_linear_equals_gram(self, rng):
        X = rng.standard_normal((5, 7))
        K = kernel_matrix(X, X, KernelSpec(kind="linear"))
        assert np.max(np.abs(K - X.T @ X)) < 1e-10

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            kernel_matrix(np.zeros((3, 2)), np.zeros((4, 2)), KernelSpec(kind="linear"))

    @pytest.mark.parametrize("kind,kwargs", [
        ("linear", {}),
        ("rbf", {"sigma": 1.3}),
        ("poly2", {"offset": 0.5}),
    ])
    def test_symmetry(self, kind, kwargs, rng):
        X = rng.standard_normal((4, 9))
        K = kernel_matrix(X, X, KernelSpec(kind=kind, **kwargs))
        assert np.max(np.abs(K - K.T)) < 1e-12

    def test_rbf_range(self, rng):
        X = rng.standard_normal((4, 9))
        K = kernel_matrix(X, X, KernelSpec(kind="rbf", sigma=2.0))
        assert np.all(K > 0) and np.all(K <= 1.0)

    def test_poly2_self_value(self, rng):
        x = rng.standard_normal((6, 1))
        offset = 0.7
        K = kernel_matrix(x, x, KernelSpec(kind="poly2", offset=offset))
        expected = (float(x[:, 0] @ x[:, 0]) + offset) ** 2
        assert K[0, 0] == pytest.approx(expected, rel=1e-12)

    def test_rejects_bad_sigma(self):
        with pytest.raises(ContractError):
            KernelSpec(kind="rbf", sigma=0.0)


class TestKernelCentering:
    def test_all_ones_becomes_zero(self):
        K = np.ones((5, 5))
        assert np.max(np.abs(center_kernel_train(K))) == 0.0

    def test_linear_kernel_on_centered_data_unchanged(self, rng):
        X = rng.standard_normal((6, 8))
        X -= X.mean(axis=1, keepdims=True)
        K = kernel_matrix(X, X, KernelSpec(kind="linear"))
        assert np.max(np.abs(center_kernel_train(K) - K)) < 1e-10

    def test_row_means_vanish(self, rng):
        K = kernel_matrix(
            rng.standard_normal((4, 7)), rng.standard_normal((4, 7)),
            KernelSpec(kind="rbf", sigma=1.0),
        )
        K = 0.5 * (K + K.T)
        Kc = center_kernel_train(K)
        assert np.max(np.abs(Kc.mean(axis=0))) < 1e-10
        assert np.max(np.abs(Kc.mean(axis=1))) < 1e-10

    def test_test_centering_consistent_with_train(self, rng):
        X = rng.standard_normal((5, 6))
        K = kernel_matrix(X, X, KernelSpec(kind="rbf", sigma=1.5))
        Kc_train = center_kernel_train(K)
        Kc_test = center_kernel_test(K[2:4], K)
        assert np.max(np.abs(Kc_test - Kc_train[2:4])) < 1e-10

    def test_constant_test_rows(self):
        K_train = np.full((4, 4), 3.0)
        K_test = np.full((2, 4), 3.0)
        assert np.max(np.abs(center_kernel_test(K_test, K_train))) == 0.0

    def test_empty_test_matrix(self):
        K_train = np.eye(4)
        out = center_kernel_test(np.zeros((0, 4)), K_train)
        assert out.shape == (0, 4)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            center_kernel_test(np.zeros((2, 3)), np.eye(4))


class TestWhiten:
    def test_unit_covariance(self, rng):
        X = rng.standard_normal((10, 200)) * np.linspace(1, 5, 10)[:, None]
        X -= X.mean(axis=1, keepdims=True)
        w = whiten(X, 6)
        Z = w.projection @ X
        cov = Z @ Z.T / Z.shape[1]
        assert np.max(np.abs(cov - np.eye(6))) < 1e-6

    def test_white_input_gives_orthonormal_projection(self, rng):
        # construct data whose sample covariance is exactly identity
        A = rng.standard_normal((5, 400))
        A -= A.mean(axis=1, keepdims=True)
        C = A @ A.T / A.shape[1]
        vals, vecs = np.linalg.eigh(C)
        X = (vecs / np.sqrt(vals)) @ vecs.T @ A
        w = whiten(X, 5)
        assert np.max(np.abs(w.projection @ w.projection.T - np.eye(5))) < 1e-6

    def test_one_dimensional_scaling(self):
        X = np.array([[2.0, -2.0, 4.0, -4.0]])
        X = X - X.mean(axis=1, keepdims=True)
        w = whiten(X, 1)
        Z = w.projection @ X
        variance = (Z @ Z.T / 4).item()
        assert variance == pytest.approx(1.0, abs=1e-10)

    def test_inverse_roundtrip(self, rng):
        X = rng.standard_normal((8, 100))
        X -= X.mean(axis=1, keepdims=True)
        w = whiten(X, 8)
        recon = w.inverse @ (w.projection @ X)
        assert np.max(np.abs(recon - X)) < 1e-8

    def test_rank_deficiency(self, rng):
        v = rng.standard_normal(6)
        X = np.stack([v, -v], axis=1)
        with pytest.raises(RankError):
            whiten(X, 2)


def test_default_rbf_sigma_median(rng):
    X = rng.standard_normal((3, 20))
    sq = np.sum(X * X, axis=0)
    d = np.sqrt(np.maximum(sq[:, None] + sq[None, :] - 2 * X.T @ X, 0))
    expected = np.median(d[np.triu_indices(20, k=1)])
    assert default_rbf_sigma(X) == pytest.approx(expected)
