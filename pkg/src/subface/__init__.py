"""Subspace face identification benchmark toolkit.

Linear and kernel PCA/LDA plus both ICA recognition architectures,
four similarity metrics, score-level fusion with two weighting schemes,
and the CMS + McNemar evaluation protocol, runnable as seeded batch
experiments.
"""

__version__ = "0.1.0"

from .data import (
    CATEGORIES,
    DataMatrix,
    ImageSample,
    ProbeSet,
    SyntheticSpec,
    build_data_matrix,
    load_image_dir,
    make_probe_subsets,
    synth_gaussian_classes,
)
from .evaluate import (
    CmsCurve,
    McNemarReport,
    OutcomeMatrix,
    cms_curve,
    mcnemar_across_ranks,
    mcnemar_exact,
    rank1_table,
    rank_of_truth,
)
from .fusion import (
    AccuracySummary,
    CategoryWinTable,
    FusionWeights,
    ScoreTable,
    fuse,
    minmax_normalize,
    to_similarity,
    weights_method1,
    weights_method2,
)
from .ica import IcaConfig, IcaModel, amari_index, fastica, infomax, project_ica, train_ica
from .matcher import GalleryIndex, Metric, RankedList, build_gallery, classify, distance, rank_classes
from .numerics import (
    EigenDecomposition,
    KernelSpec,
    WhiteningTransform,
    center_kernel_test,
    center_kernel_train,
    eig_sym,
    kernel_matrix,
    snapshot_pca,
    whiten,
)
from .subspace import (
    DimensionalityPolicy,
    SubspaceModel,
    project,
    select_dimensionality,
    train_kda,
    train_kpca,
    train_lda,
    train_pca,
)
