"""Experiment configuration: YAML schema, validation, canonical hashing.

One structured file drives a whole batch run.  Every random choice in an
experiment derives from the single root seed through named substreams,
so adding an algorithm to the list never perturbs the existing streams.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .data import CATEGORIES, SyntheticSpec
from .errors import ConfigError
from .fusion import EVAL_CATEGORIES
from .ica import ARCHITECTURES, IcaConfig
from .matcher import METRIC_KINDS
from .numerics import KERNEL_KINDS
from .subspace import MODEL_KINDS, DimensionalityPolicy

SCHEMA_VERSION = 1

ALGORITHM_KINDS = MODEL_KINDS + ("ica",)
FUSION_METHODS = ("method1", "method2", "fixed")


@dataclass(frozen=True)
class KernelBlock:
    """Kernel request; sigma of None means "derive from the training data"."""

    kind: str
    sigma: float | None = None
    offset: float = 1.0

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ConfigError(f"unknown kernel kind {self.kind!r}")
        if self.sigma is not None and self.sigma <= 0:
            raise ConfigError("kernel sigma must be > 0 when given")
        if self.offset < 0:
            raise ConfigError("kernel offset must be >= 0")


@dataclass(frozen=True)
class ImageDataConfig:
    directory: str
    rows: int
    cols: int
    equalize: bool = False
    manifest: str | None = None
    gallery_categories: tuple[str, ...] = ("neutral",)
    probe_categories: tuple[str, ...] = (
        "expression",
        "illumination",
        "lower_occlusion",
        "upper_occlusion",
    )


@dataclass(frozen=True)
class SyntheticDataConfig:
    spec: SyntheticSpec
    train_fraction: float = 0.5


@dataclass(frozen=True)
class AlgorithmConfig:
    tag: str
    kind: str                  # pca | lda | kpca | kda | ica
    metric: str
    policy: DimensionalityPolicy
    kernel: KernelBlock | None = None
    ica: IcaConfig | None = None
    architecture: str | None = None
    ridge: float | None = None


@dataclass(frozen=True)
class ProbeConfig:
    k_subsets: int = 10
    per_subject: int = 2
    corruption_zero_fraction: float = 0.0


@dataclass(frozen=True)
class FusionConfig:
    enabled: bool = False
    members: tuple[str, ...] = ()
    method: str = "method2"
    wins: dict | None = None                   # method1: category -> member tag
    weights: tuple[float, ...] | None = None   # fixed: explicit weights
    normalization_scope: str = "per_probe"


@dataclass(frozen=True)
class EvaluationConfig:
    alpha: float = 0.05
    max_rank: int | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    output_dir: str
    algorithms: tuple[AlgorithmConfig, ...]
    synthetic: SyntheticDataConfig | None = None
    images: ImageDataConfig | None = None
    probes: ProbeConfig = field(default_factory=ProbeConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    threads: int = 1
    plots: bool = False
    raw: dict = field(default_factory=dict, compare=False)

    def config_hash(self) -> str:
        return hashlib.sha256(canonical_json(self.raw).encode()).hexdigest()


def canonical_json(d) -> str:
    return json.dumps(d, sort_keys=True, separators=(",", ":"))


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"missing {key!r} in {where}")
    return d[key]


def _parse_policy(d: dict | None) -> DimensionalityPolicy:
    if d is None:
        return DimensionalityPolicy()
    try:
        return DimensionalityPolicy(
            mode=d.get("mode", "feret_fraction"),
            fraction=float(d.get("fraction", 0.4)),
            fixed_t=int(d["fixed_t"]) if "fixed_t" in d else None,
            energy=float(d["energy"]) if "energy" in d else None,
        )
    except ValueError as exc:
        raise ConfigError(f"bad dimensionality policy: {exc}") from exc


def _parse_algorithm(d: dict) -> AlgorithmConfig:
    tag = _require(d, "tag", "algorithm block")
    kind = _require(d, "kind", f"algorithm {tag!r}")
    if kind not in ALGORITHM_KINDS:
        raise ConfigError(f"algorithm {tag!r} has unknown kind {kind!r}")
    metric = d.get("metric", "l2")
    if metric not in METRIC_KINDS:
        raise ConfigError(f"algorithm {tag!r} has unknown metric {metric!r}")

    kernel = None
    if kind in ("kpca", "kda"):
        kblock = d.get("kernel")
        if kblock is None:
            raise ConfigError(f"algorithm {tag!r} of kind {kind!r} needs a kernel block")
        kernel = KernelBlock(
            kind=_require(kblock, "kind", f"algorithm {tag!r} kernel block"),
            sigma=float(kblock["sigma"]) if kblock.get("sigma") is not None else None,
            offset=float(kblock.get("offset", 1.0)),
        )

    ica_cfg = None
    architecture = None
    if kind == "ica":
        iblock = d.get("ica", {})
        architecture = iblock.get("architecture", "arch1")
        if architecture not in ARCHITECTURES:
            raise ConfigError(
                f"algorithm {tag!r} has unknown architecture {architecture!r}"
            )
        try:
            ica_cfg = IcaConfig(
                algorithm=iblock.get("algorithm", "fastica"),
                nonlinearity=iblock.get("nonlinearity"),
                learning_rate=float(iblock.get("learning_rate", 0.01)),
                max_iters=int(iblock.get("max_iters", 1000)),
                tol=float(iblock["tol"]) if "tol" in iblock else None,
                seed=0,  # replaced by a named substream at run time
                pca_dims=int(iblock["pca_dims"]) if "pca_dims" in iblock else None,
            )
        except ValueError as exc:
            raise ConfigError(f"algorithm {tag!r} ICA block: {exc}") from exc

    return AlgorithmConfig(
        tag=tag,
        kind=kind,
        metric=metric,
        policy=_parse_policy(d.get("policy")),
        kernel=kernel,
        ica=ica_cfg,
        architecture=architecture,
        ridge=float(d["ridge"]) if "ridge" in d else None,
    )


def load_config(path) -> ExperimentConfig:
    """Parse and validate a YAML experiment file."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path} does not contain a configuration mapping")
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> ExperimentConfig:
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    if "seed" not in raw:
        raise ConfigError("a root seed is required (no unseeded randomness)")
    seed = int(raw["seed"])
    output_dir = str(_require(raw, "output_dir", "configuration"))

    data_block = _require(raw, "data", "configuration")
    synthetic = None
    images = None
    if "synthetic" in data_block:
        s = data_block["synthetic"]
        try:
            spec = SyntheticSpec(
                num_classes=int(_require(s, "num_classes", "synthetic block")),
                samples_per_class=int(
                    _require(s, "samples_per_class", "synthetic block")
                ),
                ambient_dim=int(_require(s, "ambient_dim", "synthetic block")),
                between_scale=float(s.get("between_scale", 10.0)),
                within_scale=float(s.get("within_scale", 1.0)),
                seed=0,  # replaced by a named substream at run time
            )
        except ValueError as exc:
            raise ConfigError(f"synthetic block: {exc}") from exc
        synthetic = SyntheticDataConfig(
            spec=spec,
            train_fraction=float(s.get("train_fraction", 0.5)),
        )
        if not (0.0 < synthetic.train_fraction < 1.0):
            raise ConfigError("train_fraction must be in (0, 1)")
    elif "images" in data_block:
        im = data_block["images"]
        gallery = tuple(im.get("gallery_categories", ["neutral"]))
        probe = tuple(
            im.get("probe_categories", [c for c in CATEGORIES if c != "neutral"])
        )
        for cat in gallery + probe:
            if cat not in CATEGORIES:
                raise ConfigError(f"unknown category {cat!r} in images block")
        images = ImageDataConfig(
            directory=str(_require(im, "directory", "images block")),
            rows=int(_require(im, "rows", "images block")),
            cols=int(_require(im, "cols", "images block")),
            equalize=bool(im.get("equalize", False)),
            manifest=im.get("manifest"),
            gallery_categories=gallery,
            probe_categories=probe,
        )
    else:
        raise ConfigError("data block needs either 'synthetic' or 'images'")

    algo_blocks = _require(raw, "algorithms", "configuration")
    if not algo_blocks:
        raise ConfigError("at least one algorithm is required")
    algorithms = []
    tags = set()
    for block in algo_blocks:
        algo = _parse_algorithm(block)
        if algo.tag in tags:
            raise ConfigError(f"duplicate algorithm tag {algo.tag!r}")
        tags.add(algo.tag)
        algorithms.append(algo)

    pblock = raw.get("probes", {})
    probes = ProbeConfig(
        k_subsets=int(pblock.get("k_subsets", 10)),
        per_subject=int(pblock.get("per_subject", 2)),
        corruption_zero_fraction=float(pblock.get("corruption_zero_fraction", 0.0)),
    )
    if not (0.0 <= probes.corruption_zero_fraction < 1.0):
        raise ConfigError("corruption_zero_fraction must be in [0, 1)")

    fblock = raw.get("fusion", {})
    fusion = FusionConfig(
        enabled=bool(fblock.get("enabled", False)),
        members=tuple(fblock.get("members", [])),
        method=fblock.get("method", "method2"),
        wins=fblock.get("wins"),
        weights=tuple(float(w) for w in fblock["weights"]) if "weights" in fblock else None,
        normalization_scope=fblock.get("normalization_scope", "per_probe"),
    )
    if fusion.enabled:
        if fusion.method not in FUSION_METHODS:
            raise ConfigError(f"unknown fusion method {fusion.method!r}")
        if len(fusion.members) < 2:
            raise ConfigError("fusion needs at least two member tags")
        for member in fusion.members:
            if member not in tags:
                raise ConfigError(
                    f"fusion member {member!r} is not a declared algorithm"
                )
        if fusion.method == "fixed":
            if fusion.weights is None or len(fusion.weights) != len(fusion.members):
                raise ConfigError("fixed fusion needs one weight per member")
        if fusion.method == "method1":
            if fusion.wins is None:
                raise ConfigError("method1 fusion needs a wins block")
            if set(fusion.wins) != set(EVAL_CATEGORIES):
                raise ConfigError(
                    f"method1 wins must cover exactly the categories {EVAL_CATEGORIES}"
                )
            for cat, member in fusion.wins.items():
                if member not in fusion.members:
                    raise ConfigError(
                        f"wins[{cat!r}] = {member!r} is not a fusion member"
                    )

    eblock = raw.get("evaluation", {})
    evaluation = EvaluationConfig(
        alpha=float(eblock.get("alpha", 0.05)),
        max_rank=int(eblock["max_rank"]) if "max_rank" in eblock else None,
    )
    if not (0.0 < evaluation.alpha < 1.0):
        raise ConfigError("alpha must be in (0, 1)")

    return ExperimentConfig(
        seed=seed,
        output_dir=output_dir,
        algorithms=tuple(algorithms),
        synthetic=synthetic,
        images=images,
        probes=probes,
        fusion=fusion,
        evaluation=evaluation,
        threads=int(raw.get("threads", 1)),
        plots=bool(raw.get("plots", False)),
        raw=raw,
    )
