"""Independent component analysis for recognition.

FastICA (symmetric fixed-point) and InfoMax (natural-gradient) unmixing,
wrapped in the two face-recognition architectures: architecture 1 learns
statistically independent basis images by unmixing the PCA basis rows
over pixels, architecture 2 learns a factorial coefficient code by
unmixing the PCA coefficients over samples.  Either way the learned
representation is an invertible linear transform of the PCA coordinates,
so both architectures span exactly the PCA subspace.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import DataMatrix
from .errors import ContractError, ConvergenceError, DimensionError
from .subspace import DimensionalityPolicy, SubspaceModel, project, train_pca

ALGORITHMS = ("fastica", "infomax")
NONLINEARITIES = ("logistic", "tanh", "cube")
ARCHITECTURES = ("arch1", "arch2")

_DEFAULT_NONLINEARITY = {"fastica": "tanh", "infomax": "logistic"}
_DEFAULT_TOL = {"fastica": 1e-6, "infomax": 1e-5}


@dataclass(frozen=True)
class IcaConfig:
    """Algorithm choice plus iteration controls.

    nonlinearity and tol default per algorithm (tanh/1e-6 for FastICA,
    logistic/1e-5 for InfoMax).  pca_dims of None defers to the 40%
    retention policy on the training cap.  learning_rate only affects
    InfoMax; zero is allowed and degenerates to the initialization.
    """

    algorithm: str = "fastica"
    nonlinearity: str | None = None
    learning_rate: float = 0.01
    max_iters: int = 1000
    tol: float | None = None
    seed: int = 0
    pca_dims: int | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ContractError(f"unknown ICA algorithm {self.algorithm!r}")
        if self.nonlinearity is not None and self.nonlinearity not in NONLINEARITIES:
            raise ContractError(f"unknown nonlinearity {self.nonlinearity!r}")
        if self.learning_rate < 0:
            raise ContractError("learning_rate must be >= 0")
        if self.max_iters < 1:
            raise ContractError("max_iters must be >= 1")
        if self.tol is not None and self.tol <= 0:
            raise ContractError("tol must be > 0")
        if self.pca_dims is not None and self.pca_dims < 1:
            raise ContractError("pca_dims must be >= 1")

    def resolved_nonlinearity(self) -> str:
        return self.nonlinearity or _DEFAULT_NONLINEARITY[self.algorithm]

    def resolved_tol(self) -> float:
        return self.tol if self.tol is not None else _DEFAULT_TOL[self.algorithm]


@dataclass
class IcaModel:
    """Trained unmixing plus everything needed to project probes.

    unmixing is the raw algorithm output on whitened observations
    (orthogonal for FastICA); mixing is its inverse.  rep_matrix maps PCA
    coefficients straight to the architecture's representation, and
    basis_images holds the independent basis images (arch1, m x N rows)
    or the mixing composition back to pixel space (arch2, N x m columns).
    """

    architecture: str
    algorithm: str
    unmixing: np.ndarray        # (m, m)
    mixing: np.ndarray          # (m, m)
    pca_pre: SubspaceModel
    basis_images: np.ndarray
    rep_matrix: np.ndarray      # (m, m): representation = rep_matrix @ pca coeffs
    rep_rule: str
    training_representation: np.ndarray  # (m, M)

    @property
    def m(self) -> int:
        return self.unmixing.shape[0]


def random_orthogonal(m: int, seed: int) -> np.ndarray:
    """Seeded random orthogonal matrix (QR of a Gaussian draw)."""
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((m, m)))
    return q


def _check_whitened(Z: np.ndarray) -> np.ndarray:
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2:
        raise DimensionError("observations must be an m x M matrix")
    second = Z @ Z.T / Z.shape[1]
    if np.max(np.abs(second - np.eye(Z.shape[0]))) > 1e-3:
        raise ContractError(
            "observations are not whitened (sample covariance deviates "
            "from identity by more than 1e-3)"
        )
    return Z


def _sym_decorrelate(W: np.ndarray) -> np.ndarray:
    # W <- (W W^T)^(-1/2) W, the symmetric decorrelation step
    vals, vecs = np.linalg.eigh(W @ W.T)
    return (vecs / np.sqrt(vals)) @ vecs.T @ W


def _fastica_g(nonlinearity: str, U: np.ndarray):
    if nonlinearity == "tanh":
        G = np.tanh(U)
        return G, 1.0 - G * G
    if nonlinearity == "cube":
        return U ** 3, 3.0 * U * U
    # logistic score, expressed through tanh(u/2)
    G = np.tanh(U / 2.0)
    return G, 0.5 * (1.0 - G * G)


def fastica(Z: np.ndarray, config: IcaConfig) -> np.ndarray:
    """Symmetric fixed-point ICA on whitened observations.

    All rows update together via w+ = E[z g(w'z)] - E[g'(w'z)] w followed
    by symmetric decorrelation; convergence is declared when every new
    row aligns with its predecessor to within tol.  The output always
    satisfies W W^T = I.
    """
    Z = _check_whitened(Z)
    m, M = Z.shape
    tol = config.resolved_tol()
    nonlinearity = config.resolved_nonlinearity()
    W = random_orthogonal(m, config.seed)
    delta = np.inf
    for _ in range(config.max_iters):
        U = W @ Z
        G, Gp = _fastica_g(nonlinearity, U)
        W_new = (G @ Z.T) / M - Gp.mean(axis=1)[:, None] * W
        W_new = _sym_decorrelate(W_new)
        delta = float(np.max(1.0 - np.abs(np.diag(W_new @ W.T))))
        W = W_new
        if delta < tol:
            return W
    raise ConvergenceError(
        f"FastICA did not converge in {config.max_iters} iterations "
        f"(final delta {delta:.3e})",
        final_delta=delta,
    )


def _infomax_score(nonlinearity: str, U: np.ndarray) -> np.ndarray:
    # returns phi(U) for the update dW = eta (I - phi(U) U^T / M) W;
    # the logistic case is the classic (1 - 2 g(U)) = -tanh(U/2) form
    if nonlinearity == "logistic":
        return np.tanh(U / 2.0)
    if nonlinearity == "tanh":
        return np.tanh(U)
    return U ** 3


def infomax(Z: np.ndarray, config: IcaConfig) -> np.ndarray:
    """Natural-gradient ICA on whitened observations, full batch.

    The logistic default follows the classic entropy-maximization
    derivation and suits super-Gaussian sources; sub-Gaussian sources
    (e.g. uniform) need the cube score, which this update is provably
    unstable for under tanh-family scores.  The learning rate anneals by
    0.9 every 100 sweeps; iteration stops when the update norm drops
    below tol or max_iters is reached.
    """
    Z = _check_whitened(Z)
    m, M = Z.shape
    tol = config.resolved_tol()
    nonlinearity = config.resolved_nonlinearity()
    eta = config.learning_rate
    W = random_orthogonal(m, config.seed)
    eye = np.eye(m)
    for sweep in range(1, config.max_iters + 1):
        U = W @ Z
        phi = _infomax_score(nonlinearity, U)
        dW = eta * (eye - phi @ U.T / M) @ W
        W = W + dW
        if not np.all(np.isfinite(W)):
            raise ConvergenceError(
                f"InfoMax diverged at sweep {sweep}; "
                f"lower learning_rate (currently {config.learning_rate})",
            )
        if np.max(np.abs(dW)) < tol:
            break
        if sweep % 100 == 0:
            eta *= 0.9
    return W


def _run_algorithm(Z: np.ndarray, config: IcaConfig) -> np.ndarray:
    if config.algorithm == "fastica":
        return fastica(Z, config)
    return infomax(Z, config)


def train_ica(X: DataMatrix, architecture: str, config: IcaConfig) -> IcaModel:
    """PCA-reduce, then unmix per the requested architecture.

    arch1 treats the m PCA basis images as observations mixed over
    pixels; the unmixed rows are spatially localized independent basis
    images and each sample is represented by the coefficients that
    rebuild it from them.  arch2 unmixes the PCA coefficients across
    samples into a factorial code.  Both representations are linear in
    the PCA coordinates via rep_matrix.
    """
    if architecture not in ARCHITECTURES:
        raise ContractError(f"unknown architecture {architecture!r}")
    m_samples = X.n_samples
    if config.pca_dims is not None:
        m = config.pca_dims
        if m > m_samples - 1:
            raise ContractError(
                f"pca_dims={m} exceeds the training cap M-1={m_samples - 1}"
            )
        pca_policy = DimensionalityPolicy(mode="fixed", fixed_t=m)
    else:
        pca_policy = DimensionalityPolicy(mode="feret_fraction", fraction=0.4)
    pca = train_pca(X, pca_policy)
    m = pca.t
    P = pca.linear_basis          # (m, N)
    R = pca.training_coords       # (m, M)
    n_pixels = P.shape[1]

    if architecture == "arch1":
        # PCA basis rows are orthonormal, so scaling by sqrt(N) makes the
        # pixel-wise second moment exactly the identity: already white.
        Z = np.sqrt(n_pixels) * P
        W = _run_algorithm(Z, config)
        A = np.linalg.inv(W)
        basis_images = W @ Z                      # (m, N) independent images
        rep_matrix = (A / np.sqrt(n_pixels)).T    # rep = A_total^T @ r
        rep_rule = "basis-image-coefficients"
    else:
        # PCA coefficients are uncorrelated with variances lambda_i, so
        # whitening over samples is the diagonal rescale 1/sqrt(lambda).
        scale = 1.0 / np.sqrt(pca.eigenvalues)
        Z = R * scale[:, None]
        W = _run_algorithm(Z, config)
        A = np.linalg.inv(W)
        rep_matrix = W * scale[None, :]           # rep = W @ whiten @ r
        basis_images = P.T @ np.linalg.inv(rep_matrix)  # (N, m) mixing composition
        rep_rule = "factorial-code"

    return IcaModel(
        architecture=architecture,
        algorithm=config.algorithm,
        unmixing=W,
        mixing=A,
        pca_pre=pca,
        basis_images=basis_images,
        rep_matrix=rep_matrix,
        rep_rule=rep_rule,
        training_representation=rep_matrix @ R,
    )


def project_ica(model: IcaModel, Y) -> np.ndarray:
    """Representation of raw probe columns, m x q.

    Probes go through the stored PCA projection (centering included)
    and then the architecture's linear representation map.
    """
    return model.rep_matrix @ project(model.pca_pre, Y)


def amari_index(W: np.ndarray, mixing: np.ndarray) -> float:
    """Permutation- and scale-invariant unmixing error in [0, 1].

    Zero means W is a scaled permutation of the inverse mixing, i.e.
    perfect separation.
    """
    P = np.abs(W @ mixing)
    m = P.shape[0]
    if m < 2:
        return 0.0
    rows = float(np.sum(P.sum(axis=1) / P.max(axis=1) - 1.0))
    cols = float(np.sum(P.sum(axis=0) / P.max(axis=0) - 1.0))
    return (rows + cols) / (2.0 * m * (m - 1))
