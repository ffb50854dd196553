"""Numerical primitives shared by every trainer.

Symmetric eigendecomposition with a deterministic sign convention, the
snapshot (Gram) trick for tall-thin data matrices, kernel matrices with
feature-space centering, and whitening.  Covariances use the population
1/M normalization throughout so spectral-energy fractions line up with
the dimensionality-selection heuristics downstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DimensionError, RankError

# Eigenvalues below RANK_TOL * lambda_max count as numerically zero.
RANK_TOL = 1e-12
# First eigenvector component larger than this decides the sign.
SIGN_TOL = 1e-12

KERNEL_KINDS = ("linear", "rbf", "poly2")


@dataclass(frozen=True)
class EigenDecomposition:
    """Full spectrum of a symmetric matrix, eigenvalues descending."""

    values: np.ndarray   # (n,) non-increasing
    vectors: np.ndarray  # (n, n) unit-norm columns aligned with values


@dataclass(frozen=True)
class KernelSpec:
    """Kernel choice plus its hyperparameters.

    sigma is the RBF width, offset the additive constant of the second
    degree polynomial kernel.  Both are ignored by kinds that do not use
    them.
    """

    kind: str = "linear"
    sigma: float = 1.0
    offset: float = 1.0

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ContractError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "rbf" and not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ContractError("rbf kernel needs finite sigma > 0")
        if self.kind == "poly2" and self.offset < 0:
            raise ContractError("poly2 offset must be >= 0")


@dataclass(frozen=True)
class WhiteningTransform:
    """Maps centered data to unit-covariance coordinates and back."""

    projection: np.ndarray  # (m, N)
    inverse: np.ndarray     # (N, m)


def fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip column signs so the first nonzero component is positive.

    The convention makes eigenvector output reproducible bit-for-bit
    across runs; components below SIGN_TOL are skipped when locating
    the leading entry.
    """
    vectors = np.array(vectors, copy=True)
    for j in range(vectors.shape[1]):
        col = vectors[:, j]
        nz = np.flatnonzero(np.abs(col) > SIGN_TOL)
        if nz.size and col[nz[0]] < 0:
            vectors[:, j] = -col
    return vectors


def eig_sym(S: np.ndarray) -> EigenDecomposition:
    """Eigendecompose a symmetric matrix, spectrum descending.

    Raises ContractError when the input is not symmetric within 1e-10
    relative asymmetry.
    """
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {S.shape}")
    scale = max(np.max(np.abs(S)), 1.0) if S.size else 1.0
    if S.size and np.max(np.abs(S - S.T)) > 1e-10 * scale:
        raise ContractError("matrix is not symmetric within 1e-10 relative asymmetry")
    values, vectors = np.linalg.eigh(0.5 * (S + S.T))
    order = np.argsort(values)[::-1]
    return EigenDecomposition(values=values[order], vectors=fix_signs(vectors[:, order]))


def snapshot_pca(X: np.ndarray, t: int) -> tuple[np.ndarray, np.ndarray]:
    """Top-t eigenpairs of X X^T / M computed via the M x M Gram matrix.

    X is a centered N x M matrix with one sample per column; the snapshot
    route never forms the N x N covariance, so N >> M stays cheap.  The
    returned basis columns are unit-norm and sign-normalized, making the
    result interchangeable with a direct covariance eigendecomposition.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionError("data matrix must be 2-D")
    n_rows, m = X.shape
    if t < 1:
        raise ContractError("t must be >= 1")
    gram = eig_sym(X.T @ X / m)
    values = np.maximum(gram.values, 0.0)
    lead = values[0] if values.size else 0.0
    attainable = int(np.sum(values > RANK_TOL * max(lead, RANK_TOL)))
    if t > attainable:
        raise RankError(
            f"requested t={t} exceeds numerical rank; attainable t={attainable}",
            attainable=attainable,
        )
    basis = X @ gram.vectors[:, :t] / np.sqrt(m * values[:t])
    return fix_signs(basis), values[:t]


def kernel_matrix(X: np.ndarray, Y: np.ndarray, spec: KernelSpec) -> np.ndarray:
    """Pairwise kernel values k(x_i, y_j) for column-sample matrices.

    X is N x p and Y is N x q; the result is p x q.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2:
        raise DimensionError("kernel inputs must be 2-D")
    if X.shape[0] != Y.shape[0]:
        raise DimensionError(
            f"row dimensions differ: {X.shape[0]} vs {Y.shape[0]}"
        )
    inner = X.T @ Y
    if spec.kind == "linear":
        return inner
    if spec.kind == "poly2":
        return (inner + spec.offset) ** 2
    sq = np.sum(X * X, axis=0)[:, None] + np.sum(Y * Y, axis=0)[None, :] - 2.0 * inner
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-sq / (2.0 * spec.sigma ** 2))


def center_kernel_train(K: np.ndarray) -> np.ndarray:
    """Center a training kernel matrix in feature space.

    Returns K' = K - 1K - K1 + 1K1 with 1 the matrix of entries 1/M;
    rows and columns of the result average to zero.
    """
    K = np.asarray(K, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise DimensionError("training kernel must be square")
    col_means = K.mean(axis=0)
    row_means = K.mean(axis=1)
    total = K.mean()
    return K - col_means[None, :] - row_means[:, None] + total


def center_kernel_test(K_test: np.ndarray, K_train: np.ndarray) -> np.ndarray:
    """Center probe-against-training kernel rows using training statistics.

    Feeding training rows back through this reproduces the corresponding
    rows of center_kernel_train(K_train).
    """
    K_test = np.asarray(K_test, dtype=np.float64)
    K_train = np.asarray(K_train, dtype=np.float64)
    if K_train.ndim != 2 or K_train.shape[0] != K_train.shape[1]:
        raise DimensionError("training kernel must be square")
    if K_test.ndim != 2 or K_test.shape[1] != K_train.shape[0]:
        raise DimensionError(
            f"test kernel has {K_test.shape[1]} columns, training kernel is "
            f"{K_train.shape[0]} x {K_train.shape[0]}"
        )
    col_means = K_train.mean(axis=0)
    total = K_train.mean()
    if K_test.shape[0] == 0:
        return K_test.copy()
    row_means = K_test.mean(axis=1)
    return K_test - col_means[None, :] - row_means[:, None] + total


def whiten(X: np.ndarray, m: int) -> WhiteningTransform:
    """Whitening transform from the top-m snapshot eigenpairs of X.

    X must be centered; projection @ X has identity sample covariance.
    """
    basis, values = snapshot_pca(X, m)
    scale = np.sqrt(values)
    return WhiteningTransform(
        projection=basis.T / scale[:, None],
        inverse=basis * scale[None, :],
    )


def default_rbf_sigma(X: np.ndarray) -> float:
    """Median pairwise distance between the columns of X.

    The usual heuristic when no empirically tuned width is available;
    falls back to 1.0 when all columns coincide.
    """
    X = np.asarray(X, dtype=np.float64)
    sq = np.sum(X * X, axis=0)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X.T @ X)
    iu = np.triu_indices(X.shape[1], k=1)
    if iu[0].size == 0:
        return 1.0
    med = float(np.median(np.sqrt(np.maximum(d2[iu], 0.0))))
    return med if med > 0 else 1.0
