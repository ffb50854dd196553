"""Sample ingestion and dataset construction.

Turns image directories into labeled pixel vectors, stacks them into
column-wise data matrices, draws seeded gallery/probe splits, and
synthesizes Gaussian-class datasets used as verification oracles by the
test suites.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    ContractError,
    DimensionError,
    IngestionError,
    LabelingError,
    SplitError,
)

# Capture categories of the ingestion naming scheme
# s<subject>_<session>_<category>_<index>.<ext>
CATEGORIES = (
    "neutral",
    "expression",
    "illumination",
    "lower_occlusion",
    "upper_occlusion",
)

IMAGE_EXTENSIONS = {".pgm", ".ppm", ".png", ".bmp"}

_NAME_RE = re.compile(
    r"^s(?P<subject>\d+)_(?P<session>\d+)_(?P<category>%s)_(?P<index>\d+)\.\w+$"
    % "|".join(CATEGORIES)
)


@dataclass
class ImageSample:
    """One vectorized image with its identity labels."""

    subject_id: int
    session: int
    category: str
    pixels: np.ndarray

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64).ravel()
        if self.subject_id < 0:
            raise ContractError("subject_id must be >= 0")
        if self.session not in (1, 2):
            raise ContractError("session must be 1 or 2")
        if self.category not in CATEGORIES:
            raise ContractError(f"unknown category {self.category!r}")
        if not np.all(np.isfinite(self.pixels)):
            raise ContractError("pixel vector contains non-finite values")


@dataclass
class DataMatrix:
    """Column-wise sample matrix plus the statistics needed to undo it."""

    columns: np.ndarray  # (N, M)
    mean: np.ndarray     # (N,)
    labels: np.ndarray   # (M,)
    centered: bool

    def __post_init__(self):
        if self.columns.ndim != 2:
            raise DimensionError("columns must be a 2-D matrix")
        if self.labels.shape[0] != self.columns.shape[1]:
            raise DimensionError("labels length must equal the column count")

    @property
    def n_features(self) -> int:
        return self.columns.shape[0]

    @property
    def n_samples(self) -> int:
        return self.columns.shape[1]

    def raw_columns(self) -> np.ndarray:
        """Columns with any centering undone."""
        if self.centered:
            return self.columns + self.mean[:, None]
        return self.columns

    def centered_columns(self) -> np.ndarray:
        """Columns with the stored mean subtracted."""
        if self.centered:
            return self.columns
        return self.columns - self.mean[:, None]


@dataclass(frozen=True)
class ProbeSet:
    """Indices of one randomized probe draw."""

    subset_index: int  # 1-based
    sample_refs: np.ndarray
    seed: int


@dataclass(frozen=True)
class SyntheticSpec:
    """Gaussian class mixture used as a controllable verification oracle."""

    num_classes: int
    samples_per_class: int
    ambient_dim: int
    between_scale: float
    within_scale: float
    seed: int

    def __post_init__(self):
        if self.num_classes < 2:
            raise ContractError("need at least 2 classes")
        if self.samples_per_class < 1:
            raise ContractError("need at least 1 sample per class")
        if self.ambient_dim < 1:
            raise ContractError("ambient_dim must be >= 1")
        if self.between_scale <= 0 or self.within_scale <= 0:
            raise ContractError("scales must be > 0")
        if self.seed < 0:
            raise ContractError("seed must be unsigned")


def _to_grayscale(arr: np.ndarray) -> np.ndarray:
    # Color inputs collapse by plain channel average (alpha dropped).
    if arr.ndim == 3:
        return arr[..., :3].astype(np.float64).mean(axis=2)
    return arr.astype(np.float64)


def _resize_bilinear(arr: np.ndarray, rows: int, cols: int) -> np.ndarray:
    img = Image.fromarray(arr.astype(np.float32), mode="F")
    resized = img.resize((cols, rows), Image.BILINEAR)
    return np.asarray(resized, dtype=np.float64)


def _equalize(arr: np.ndarray) -> np.ndarray:
    # 256-bin histogram equalization on the [0, 255] range.
    hist, edges = np.histogram(arr.ravel(), bins=256, range=(0.0, 255.0))
    cdf = hist.cumsum().astype(np.float64)
    if cdf[-1] == 0:
        return arr
    cdf = 255.0 * cdf / cdf[-1]
    bin_idx = np.clip((arr / 255.0 * 255.999).astype(int), 0, 255)
    return cdf[bin_idx]


def parse_sample_name(name: str) -> tuple[int, int, str, int]:
    """Split s<subject>_<session>_<category>_<index>.<ext> into its parts."""
    m = _NAME_RE.match(name)
    if m is None:
        raise LabelingError(
            f"filename {name!r} does not match "
            "s<subject>_<session>_<category>_<index>.<ext>"
        )
    return (
        int(m.group("subject")),
        int(m.group("session")),
        m.group("category"),
        int(m.group("index")),
    )


def load_image_dir(
    path,
    rows: int,
    cols: int,
    equalize: bool = False,
    manifest_path=None,
) -> list[ImageSample]:
    """Ingest every image in a directory as raster-ordered pixel vectors.

    Filenames must follow s<subject>_<session>_<category>_<index>.<ext>.
    Color images are averaged across channels, sizes other than
    (rows, cols) are resized bilinearly, and samples come back in sorted
    filename order so ingestion is deterministic.  When manifest_path is
    given, a comma-separated manifest (filename, subject, session,
    category) is written alongside.
    """
    directory = Path(path)
    if not directory.is_dir():
        raise IngestionError(f"{directory} is not a directory")
    names = sorted(
        p.name for p in directory.iterdir()
        if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS
    )
    samples = []
    manifest_rows = []
    for name in names:
        subject, session, category, _ = parse_sample_name(name)
        try:
            with Image.open(directory / name) as img:
                arr = np.asarray(img)
        except Exception as exc:
            raise IngestionError(f"cannot read image file {name!r}: {exc}") from exc
        arr = _to_grayscale(arr)
        if arr.shape != (rows, cols):
            arr = _resize_bilinear(arr, rows, cols)
        if equalize:
            arr = _equalize(arr)
        samples.append(
            ImageSample(
                subject_id=subject,
                session=session,
                category=category,
                pixels=arr.ravel(),
            )
        )
        manifest_rows.append(f"{name},{subject},{session},{category}")
    if manifest_path is not None:
        Path(manifest_path).write_text("\n".join(manifest_rows) + "\n")
    return samples


def build_data_matrix(samples: list[ImageSample], center: bool) -> DataMatrix:
    """Stack samples into an N x M column matrix, optionally zero-mean."""
    if not samples:
        raise ContractError("sample list is empty")
    lengths = {s.pixels.shape[0] for s in samples}
    if len(lengths) != 1:
        raise DimensionError(f"mixed vector lengths in sample list: {sorted(lengths)}")
    columns = np.stack([s.pixels for s in samples], axis=1)
    mean = columns.mean(axis=1)
    if center:
        columns = columns - mean[:, None]
    labels = np.array([s.subject_id for s in samples], dtype=np.int64)
    return DataMatrix(columns=columns, mean=mean, labels=labels, centered=center)


def _indices_by_subject(samples: list[ImageSample]) -> dict[int, np.ndarray]:
    pools: dict[int, list[int]] = {}
    for i, s in enumerate(samples):
        pools.setdefault(s.subject_id, []).append(i)
    return {sid: np.array(idx, dtype=np.int64) for sid, idx in sorted(pools.items())}


def make_probe_subsets(
    samples: list[ImageSample],
    k_subsets: int,
    per_subject: int,
    seed: int,
) -> list[ProbeSet]:
    """Draw k probe subsets of per_subject random samples per subject.

    Each subset re-samples every subject independently and without
    replacement inside the subset; subsets may overlap each other, which
    is what allows 10 draws of 2 when only 6 images per subject exist.
    Deterministic for a fixed seed.
    """
    if k_subsets < 1 or per_subject < 1:
        raise ContractError("k_subsets and per_subject must be >= 1")
    pools = _indices_by_subject(samples)
    for sid, pool in pools.items():
        if pool.size < per_subject:
            raise SplitError(
                f"subject {sid} has only {pool.size} samples, "
                f"needs {per_subject} per subset"
            )
    rng = np.random.default_rng(seed)
    subsets = []
    for k in range(1, k_subsets + 1):
        refs = []
        for sid, pool in pools.items():
            chosen = rng.choice(pool, size=per_subject, replace=False)
            refs.append(np.sort(chosen))
        subsets.append(
            ProbeSet(
                subset_index=k,
                sample_refs=np.concatenate(refs),
                seed=seed,
            )
        )
    return subsets


def synth_gaussian_classes(spec: SyntheticSpec) -> list[ImageSample]:
    """Draw a labeled Gaussian class mixture.

    Class means come from an isotropic Gaussian with sd between_scale,
    samples scatter around their mean with sd within_scale.  Labels are
    0..C-1 in class-major order; everything is deterministic per seed.
    """
    rng = np.random.default_rng(spec.seed)
    means = rng.normal(0.0, spec.between_scale, size=(spec.num_classes, spec.ambient_dim))
    samples = []
    for c in range(spec.num_classes):
        offsets = rng.normal(
            0.0, spec.within_scale, size=(spec.samples_per_class, spec.ambient_dim)
        )
        for row in offsets:
            samples.append(
                ImageSample(
                    subject_id=c,
                    session=1,
                    category="neutral",
                    pixels=means[c] + row,
                )
            )
    return samples


def category_split(
    samples: list[ImageSample],
    gallery_categories,
    probe_categories,
) -> tuple[np.ndarray, np.ndarray]:
    """Index sets for gallery and probe pools, guaranteed disjoint.

    Samples whose category appears in both lists are kept on the gallery
    side only, so training and testing indices can never overlap.
    """
    gallery_categories = set(gallery_categories)
    probe_categories = set(probe_categories)
    for cat in gallery_categories | probe_categories:
        if cat not in CATEGORIES:
            raise ContractError(f"unknown category {cat!r}")
    gallery = [i for i, s in enumerate(samples) if s.category in gallery_categories]
    gallery_set = set(gallery)
    probe = [
        i for i, s in enumerate(samples)
        if s.category in probe_categories and i not in gallery_set
    ]
    return np.array(gallery, dtype=np.int64), np.array(probe, dtype=np.int64)
