"""Subspace trainers and projection.

PCA and LDA in their linear forms, kernel PCA, and kernel discriminant
analysis (KDA/GDA), together with the dimensionality-retention policies
used to pick how many axes each model keeps.  LDA follows the Fisherface
two-stage construction: PCA pre-projection to rank M - C, then the Fisher
criterion with ridge regularization on the within-class scatter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .data import DataMatrix
from .errors import (
    ContractError,
    DimensionError,
    DiscriminantError,
    RankError,
    SingularityError,
)
from .numerics import (
    RANK_TOL,
    KernelSpec,
    center_kernel_test,
    center_kernel_train,
    eig_sym,
    fix_signs,
    kernel_matrix,
    snapshot_pca,
)

LINEAR_KINDS = ("pca", "lda")
KERNEL_KINDS = ("kpca", "kda")
MODEL_KINDS = LINEAR_KINDS + KERNEL_KINDS

POLICY_MODES = ("feret_fraction", "fixed", "energy_target")


@dataclass(frozen=True)
class DimensionalityPolicy:
    """How many subspace axes to retain.

    feret_fraction keeps a fraction of the cap (default 0.4, the FERET
    rule of thumb), fixed pins an explicit t, energy_target keeps the
    smallest prefix of the spectrum holding the requested energy share.
    """

    mode: str = "feret_fraction"
    fraction: float = 0.4
    fixed_t: int | None = None
    energy: float | None = None

    def __post_init__(self):
        if self.mode not in POLICY_MODES:
            raise ContractError(f"unknown policy mode {self.mode!r}")
        if self.mode == "feret_fraction" and not (0.0 < self.fraction <= 1.0):
            raise ContractError("fraction must be in (0, 1]")
        if self.mode == "fixed" and (self.fixed_t is None or self.fixed_t < 1):
            raise ContractError("fixed mode needs fixed_t >= 1")
        if self.mode == "energy_target" and (
            self.energy is None or not (0.0 < self.energy <= 1.0)
        ):
            raise ContractError("energy_target mode needs energy in (0, 1]")


@dataclass
class SubspaceModel:
    """A trained projection, linear or kernel-expanded.

    Linear kinds carry a t x N basis (rows unit-norm, orthonormal for
    PCA).  Kernel kinds carry the training columns, the uncentered
    training kernel, and an M x t coefficient matrix; probes project by
    centering their kernel rows against the training statistics.
    training_coords stores the projected training set for gallery
    construction and self-consistency checks.
    """

    kind: str
    t: int
    mean: np.ndarray
    eigenvalues: np.ndarray
    linear_basis: np.ndarray | None = None
    kernel_spec: KernelSpec | None = None
    train_columns: np.ndarray | None = None
    train_kernel: np.ndarray | None = None
    coefficients: np.ndarray | None = None
    training_coords: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ContractError(f"unknown model kind {self.kind!r}")

    @property
    def is_kernel(self) -> bool:
        return self.kind in KERNEL_KINDS


def select_dimensionality(
    policy: DimensionalityPolicy,
    cap: int,
    spectrum: np.ndarray | None = None,
) -> int:
    """Resolve a policy into a concrete axis count within [1, cap]."""
    if cap < 1:
        raise ContractError("cap must be >= 1")
    if policy.mode == "fixed":
        return max(1, min(policy.fixed_t, cap))
    if policy.mode == "feret_fraction":
        # round-half-up keeps 0.4 * 219 -> 88 deterministic
        t = int(math.floor(policy.fraction * cap + 0.5))
        return max(1, min(t, cap))
    if spectrum is None or len(spectrum) == 0:
        raise ContractError("energy_target mode needs a nonempty spectrum")
    spectrum = np.asarray(spectrum, dtype=np.float64)
    total = spectrum.sum()
    if total <= 0:
        raise ContractError("energy_target mode needs positive spectral mass")
    fractions = np.cumsum(spectrum) / total
    t = int(np.searchsorted(fractions, policy.energy - 1e-15) + 1)
    return max(1, min(t, cap))


def retained_energy(model: SubspaceModel, full_spectrum: np.ndarray) -> float:
    """Share of spectral energy kept by the model's retained axes."""
    full_spectrum = np.asarray(full_spectrum, dtype=np.float64)
    return float(np.sum(model.eigenvalues) / np.sum(full_spectrum))


def _gram_spectrum(Xc: np.ndarray) -> np.ndarray:
    m = Xc.shape[1]
    return np.maximum(eig_sym(Xc.T @ Xc / m).values, 0.0)


def _numerical_rank(values: np.ndarray) -> int:
    lead = values[0] if values.size else 0.0
    return int(np.sum(values > RANK_TOL * max(lead, RANK_TOL)))


def _kernel_rank(values: np.ndarray, K: np.ndarray) -> int:
    # a centered kernel counts as zero relative to the *uncentered* kernel
    # magnitude, so sigma -> infinity degeneracies surface as rank errors
    lead = values[0] if values.size else 0.0
    scale = max(lead, K.shape[0] * float(np.max(np.abs(K))), RANK_TOL)
    return int(np.sum(values > RANK_TOL * scale))


def train_pca(X: DataMatrix, policy: DimensionalityPolicy) -> SubspaceModel:
    """Principal components of the training covariance via the snapshot trick."""
    Xc = X.centered_columns()
    m = Xc.shape[1]
    if m < 2:
        raise ContractError("PCA needs at least 2 training samples")
    spectrum = _gram_spectrum(Xc)
    t = select_dimensionality(policy, m - 1, spectrum)
    basis, values = snapshot_pca(Xc, t)
    linear_basis = basis.T
    return SubspaceModel(
        kind="pca",
        t=t,
        mean=X.mean.copy(),
        eigenvalues=values,
        linear_basis=linear_basis,
        training_coords=linear_basis @ Xc,
    )


def _class_partition(labels: np.ndarray) -> list[np.ndarray]:
    classes = np.unique(labels)
    return [np.flatnonzero(labels == c) for c in classes]


def _fisher_directions(
    Z: np.ndarray,
    labels: np.ndarray,
    ridge: float | None,
    policy: DimensionalityPolicy,
    cap: int,
):
    """Fisher criterion in an already-reduced coordinate space.

    Z is p x M with zero global mean.  Returns unit-norm discriminant
    columns (p x t) and their Fisher eigenvalues, descending.
    """
    p, m = Z.shape
    parts = _class_partition(labels)
    if len(parts) < 2:
        raise DiscriminantError("discriminant training needs at least 2 classes")
    Sw = np.zeros((p, p))
    Sb = np.zeros((p, p))
    for idx in parts:
        mu = Z[:, idx].mean(axis=1)
        D = Z[:, idx] - mu[:, None]
        Sw += D @ D.T
        Sb += idx.size * np.outer(mu, mu)
    Sw /= m
    Sb /= m
    if ridge is None:
        ridge = 1e-6 * np.trace(Sw) / p
    try:
        vals, vecs = scipy.linalg.eigh(Sb, Sw + ridge * np.eye(p))
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError) as exc:
        raise SingularityError(
            f"within-class scatter is singular and ridge={ridge} does not fix it"
        ) from exc
    order = np.argsort(vals)[::-1]
    vals = np.maximum(vals[order], 0.0)
    t = select_dimensionality(policy, cap, vals)
    rank = _numerical_rank(vals)
    if t > rank:
        raise RankError(
            f"requested t={t} exceeds discriminant rank; attainable t={rank}",
            attainable=rank,
        )
    W = vecs[:, order[:t]]
    W = W / np.linalg.norm(W, axis=0)[None, :]
    return fix_signs(W), vals[:t]


def train_lda(
    X: DataMatrix,
    policy: DimensionalityPolicy,
    ridge: float | None = None,
) -> SubspaceModel:
    """Fisherface discriminant: PCA to rank M - C, then the Fisher criterion."""
    Xc = X.centered_columns()
    m = Xc.shape[1]
    classes = np.unique(X.labels)
    if classes.size < 2:
        raise DiscriminantError("LDA needs at least 2 classes")
    spectrum = _gram_spectrum(Xc)
    rank = _numerical_rank(spectrum)
    p = min(m - classes.size, rank) if m > classes.size else rank
    p = max(p, 1)
    pca_basis, _ = snapshot_pca(Xc, p)
    Z = pca_basis.T @ Xc
    W, vals = _fisher_directions(Z, X.labels, ridge, policy, classes.size - 1)
    directions = pca_basis @ W
    directions /= np.linalg.norm(directions, axis=0)[None, :]
    linear_basis = fix_signs(directions).T
    return SubspaceModel(
        kind="lda",
        t=W.shape[1],
        mean=X.mean.copy(),
        eigenvalues=vals,
        linear_basis=linear_basis,
        training_coords=linear_basis @ Xc,
    )


def _kernel_eig(X: DataMatrix, spec: KernelSpec):
    raw = X.raw_columns()
    K = kernel_matrix(raw, raw, spec)
    Kc = center_kernel_train(K)
    decomp = eig_sym(Kc)
    values = np.maximum(decomp.values, 0.0)
    return raw, K, Kc, values, decomp.vectors


def train_kpca(
    X: DataMatrix,
    spec: KernelSpec,
    policy: DimensionalityPolicy,
) -> SubspaceModel:
    """Kernel PCA on the feature-space-centered training kernel.

    Coefficient columns are scaled by 1/sqrt(lambda) so the implicit
    feature-space eigenvectors are unit norm; stored eigenvalues are the
    feature-space covariance eigenvalues (kernel eigenvalues / M), which
    keeps the linear kernel numerically interchangeable with PCA.
    """
    m = X.n_samples
    if m < 2:
        raise ContractError("KPCA needs at least 2 training samples")
    raw, K, Kc, values, vectors = _kernel_eig(X, spec)
    rank = _kernel_rank(values, K)
    if rank < 1:
        raise RankError(
            "centered kernel matrix is numerically zero", attainable=0
        )
    t = select_dimensionality(policy, m - 1, values / m)
    if t > rank:
        raise RankError(
            f"requested t={t} exceeds kernel rank; attainable t={rank}",
            attainable=rank,
        )
    coeff = vectors[:, :t] / np.sqrt(values[:t])[None, :]
    return SubspaceModel(
        kind="kpca",
        t=t,
        mean=X.mean.copy(),
        eigenvalues=values[:t] / m,
        kernel_spec=spec,
        train_columns=raw.copy(),
        train_kernel=K,
        coefficients=coeff,
        training_coords=(Kc @ coeff).T,
    )


def train_kda(
    X: DataMatrix,
    spec: KernelSpec,
    policy: DimensionalityPolicy,
    ridge: float | None = None,
) -> SubspaceModel:
    """Generalized discriminant analysis in kernel feature space.

    KPCA-reduces to the full numerical rank of the centered kernel, then
    applies the ridge-regularized Fisher criterion there; the resulting
    directions compose back into kernel coefficients.
    """
    m = X.n_samples
    classes = np.unique(X.labels)
    if classes.size < 2:
        raise DiscriminantError("KDA needs at least 2 classes")
    raw, K, Kc, values, vectors = _kernel_eig(X, spec)
    rank = _kernel_rank(values, K)
    if rank < 1:
        raise RankError("centered kernel matrix is numerically zero", attainable=0)
    coeff_full = vectors[:, :rank] / np.sqrt(values[:rank])[None, :]
    Z = (Kc @ coeff_full).T  # rank x M, zero global mean
    W, vals = _fisher_directions(Z, X.labels, ridge, policy, classes.size - 1)
    coeff = fix_signs(coeff_full @ W)
    return SubspaceModel(
        kind="kda",
        t=W.shape[1],
        mean=X.mean.copy(),
        eigenvalues=vals,
        kernel_spec=spec,
        train_columns=raw.copy(),
        train_kernel=K,
        coefficients=coeff,
        training_coords=(Kc @ coeff).T,
    )


def _as_raw_columns(Y, n_features: int) -> np.ndarray:
    if isinstance(Y, DataMatrix):
        raw = Y.raw_columns()
    else:
        raw = np.asarray(Y, dtype=np.float64)
        if raw.ndim == 1:
            raw = raw[:, None]
    if raw.shape[0] != n_features:
        raise DimensionError(
            f"probe rows ({raw.shape[0]}) do not match model dimension ({n_features})"
        )
    return raw


def project(model: SubspaceModel, Y) -> np.ndarray:
    """Project raw probe columns into the trained subspace, t x q.

    Accepts a DataMatrix (centering undone via its own stored mean) or a
    plain N x q array of raw columns.  Linear kinds subtract the training
    mean and apply the basis; kernel kinds center the probe kernel rows
    against training statistics and apply the coefficients.
    """
    if model.is_kernel:
        raw = _as_raw_columns(Y, model.train_columns.shape[0])
        K_test = kernel_matrix(raw, model.train_columns, model.kernel_spec)
        return (center_kernel_test(K_test, model.train_kernel) @ model.coefficients).T
    raw = _as_raw_columns(Y, model.mean.shape[0])
    return model.linear_basis @ (raw - model.mean[:, None])


def truncate_model(model: SubspaceModel, t: int) -> SubspaceModel:
    """Keep the leading t axes of a PCA or KPCA model without retraining.

    Valid because those axes are a prefix of one fixed eigendecomposition;
    discriminant models change wholesale with t and must be retrained.
    """
    if model.kind not in ("pca", "kpca"):
        raise ContractError(f"truncation is not valid for kind {model.kind!r}")
    if t < 1 or t > model.t:
        raise ContractError(f"t must be in [1, {model.t}]")
    return SubspaceModel(
        kind=model.kind,
        t=t,
        mean=model.mean,
        eigenvalues=model.eigenvalues[:t],
        linear_basis=None if model.linear_basis is None else model.linear_basis[:t],
        kernel_spec=model.kernel_spec,
        train_columns=model.train_columns,
        train_kernel=model.train_kernel,
        coefficients=None if model.coefficients is None else model.coefficients[:, :t],
        training_coords=None if model.training_coords is None else model.training_coords[:t],
    )
