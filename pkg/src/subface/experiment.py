"""Config-driven experiment runner.

Executes train -> project -> rank -> (fuse) -> evaluate for every
declared algorithm and probe subset, then persists all artifacts.  The
run is a pure function of its configuration: every random draw comes
from a named substream of the root seed, results assemble in a fixed
order regardless of thread count, and nothing in the report files
depends on wall-clock state (timings go to a separate file outside the
determinism contract).
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import data as data_mod
from .config import AlgorithmConfig, ExperimentConfig, canonical_json
from .errors import ConfigError, SplitError, StageError, SubfaceError
from .evaluate import (
    CmsCurve,
    McNemarReport,
    OutcomeMatrix,
    Rank1Table,
    cms_curve,
    mcnemar_across_ranks,
    rank1_table,
    rank_of_truth,
)
from .fusion import (
    AccuracySummary,
    FusionWeights,
    ScoreTable,
    fuse,
    normalize_table,
    ranked_lists_from_table,
    to_similarity,
    weights_method1,
    weights_method2,
    write_score_table,
)
from .ica import IcaModel, project_ica, train_ica
from .matcher import GalleryIndex, Metric, build_gallery, distances_to, rank_classes
from .numerics import KernelSpec, default_rbf_sigma
from .store import save_model
from .subspace import (
    DimensionalityPolicy,
    SubspaceModel,
    project,
    train_kda,
    train_kpca,
    train_lda,
    train_pca,
    truncate_model,
)

HYBRID_TAG = "hybrid"


def substream_seed(root_seed: int, name: str) -> int:
    """Derive an independent 63-bit seed for one named random stream."""
    digest = hashlib.sha256(f"{root_seed}|{name}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


@dataclass
class PreparedData:
    samples: list
    gallery_indices: np.ndarray
    probe_pools: dict           # category -> sample indices
    train_matrix: data_mod.DataMatrix


@dataclass
class ResultBundle:
    config: ExperimentConfig
    config_hash: str
    seeds: dict
    models: dict                # tag -> SubspaceModel | IcaModel
    galleries: dict             # tag -> GalleryIndex
    categories: tuple
    algorithm_tags: tuple       # constituents plus hybrid when fused
    n_classes: int
    prepared: PreparedData
    subsets: dict               # category -> list[ProbeSet]
    score_tables: dict          # (category, subset_index, tag) -> ScoreTable
    outcomes: dict              # category -> list[OutcomeMatrix]
    fusion_weights: FusionWeights | None
    rank1: Rank1Table
    cms: dict                   # (category, tag, subset_label) -> CmsCurve
    mcnemar: dict               # (category, tagA, tagB) -> McNemarReport
    timings: dict = field(default_factory=dict)


def _prepare_data(config: ExperimentConfig) -> PreparedData:
    if config.synthetic is not None:
        spec = replace(
            config.synthetic.spec,
            seed=substream_seed(config.seed, "synthetic-data"),
        )
        samples = data_mod.synth_gaussian_classes(spec)
        # deterministic per-class split: leading fraction trains, rest probes
        by_class: dict[int, list[int]] = {}
        for i, s in enumerate(samples):
            by_class.setdefault(s.subject_id, []).append(i)
        gallery, pool = [], []
        for c in sorted(by_class):
            idx = by_class[c]
            n_train = max(1, int(round(config.synthetic.train_fraction * len(idx))))
            n_train = min(n_train, len(idx) - 1)
            gallery.extend(idx[:n_train])
            pool.extend(idx[n_train:])
        pools = {"synthetic": np.array(pool, dtype=np.int64)}
        gallery_idx = np.array(gallery, dtype=np.int64)
    else:
        im = config.images
        samples = data_mod.load_image_dir(
            im.directory, im.rows, im.cols,
            equalize=im.equalize, manifest_path=im.manifest,
        )
        gallery_idx, _ = data_mod.category_split(
            samples, im.gallery_categories, im.probe_categories
        )
        if gallery_idx.size == 0:
            raise SplitError("no gallery samples match the gallery categories")
        pools = {}
        gallery_set = set(gallery_idx.tolist())
        for cat in im.probe_categories:
            idx = [
                i for i, s in enumerate(samples)
                if s.category == cat and i not in gallery_set
            ]
            if not idx:
                raise SplitError(f"no probe samples in category {cat!r}")
            pools[cat] = np.array(idx, dtype=np.int64)
    train_matrix = data_mod.build_data_matrix(
        [samples[i] for i in gallery_idx], center=True
    )
    return PreparedData(
        samples=samples,
        gallery_indices=gallery_idx,
        probe_pools=pools,
        train_matrix=train_matrix,
    )


def _resolve_kernel(algo: AlgorithmConfig, train_columns: np.ndarray) -> KernelSpec:
    block = algo.kernel
    sigma = block.sigma
    if block.kind == "rbf" and sigma is None:
        sigma = default_rbf_sigma(train_columns)
    return KernelSpec(kind=block.kind, sigma=sigma or 1.0, offset=block.offset)


def _train_algorithm(algo: AlgorithmConfig, X: data_mod.DataMatrix, root_seed: int):
    if algo.kind == "pca":
        return train_pca(X, algo.policy)
    if algo.kind == "lda":
        return train_lda(X, algo.policy, ridge=algo.ridge)
    if algo.kind == "kpca":
        return train_kpca(X, _resolve_kernel(algo, X.raw_columns()), algo.policy)
    if algo.kind == "kda":
        return train_kda(
            X, _resolve_kernel(algo, X.raw_columns()), algo.policy, ridge=algo.ridge
        )
    ica_cfg = replace(
        algo.ica, seed=substream_seed(root_seed, f"ica-init:{algo.tag}")
    )
    return train_ica(X, algo.architecture, ica_cfg)


def _project_model(model, Y) -> np.ndarray:
    if isinstance(model, IcaModel):
        return project_ica(model, Y)
    return project(model, Y)


def _metric_for(algo: AlgorithmConfig, model) -> Metric:
    if algo.metric != "mahalanobis":
        return Metric(kind=algo.metric)
    if isinstance(model, IcaModel):
        # representation variances play the role of the retained spectrum
        reps = model.training_representation
        lam = reps.var(axis=1)
    else:
        lam = np.asarray(model.eigenvalues, dtype=np.float64)
    lam = np.maximum(lam, np.max(lam) * 1e-12 if lam.size else 1.0)
    return Metric(kind="mahalanobis", eigenvalues=lam)


def _corrupt_columns(columns: np.ndarray, fraction: float, seed: int) -> np.ndarray:
    if fraction <= 0:
        return columns
    rng = np.random.default_rng(seed)
    out = columns.copy()
    n_zero = int(np.floor(fraction * columns.shape[0]))
    for j in range(columns.shape[1]):
        idx = rng.choice(columns.shape[0], size=n_zero, replace=False)
        out[idx, j] = 0.0
    return out


@dataclass
class _SubsetResult:
    category: str
    subset_index: int
    tables: dict              # tag -> normalized ScoreTable
    outcome: OutcomeMatrix


def _evaluate_subset(
    config: ExperimentConfig,
    prepared: PreparedData,
    trained: dict,
    galleries: dict,
    metrics: dict,
    category: str,
    probe_set,
) -> _SubsetResult:
    pool_samples = [prepared.samples[i] for i in probe_set.sample_refs]
    probe_ids = probe_set.sample_refs
    truths = np.array([s.subject_id for s in pool_samples], dtype=np.int64)
    columns = np.stack([s.pixels for s in pool_samples], axis=1)
    columns = _corrupt_columns(
        columns,
        config.probes.corruption_zero_fraction,
        substream_seed(config.seed, f"corrupt:{category}:{probe_set.subset_index}"),
    )
    probe_matrix = data_mod.DataMatrix(
        columns=columns,
        mean=columns.mean(axis=1),
        labels=truths,
        centered=False,
    )
    tables = {}
    ranks_by_tag = {}
    tags = tuple(a.tag for a in config.algorithms)
    for algo in config.algorithms:
        model = trained[algo.tag]
        gallery = galleries[algo.tag]
        metric = metrics[algo.tag]
        try:
            coords = _project_model(model, probe_matrix)
        except SubfaceError as exc:
            raise StageError("project", str(exc), algorithm=algo.tag) from exc
        dist = np.stack(
            [distances_to(gallery.centroids, coords[:, j], metric)
             for j in range(coords.shape[1])],
            axis=0,
        )  # (P, C)
        raw_table = ScoreTable(
            tag=algo.tag,
            probe_ids=probe_ids,
            class_ids=gallery.class_ids,
            scores=to_similarity(dist),
        )
        tables[algo.tag] = normalize_table(
            raw_table, scope=config.fusion.normalization_scope
        )
        ranks = np.empty(len(pool_samples), dtype=np.int64)
        for p in range(len(pool_samples)):
            ranked = rank_classes(
                gallery, coords[:, p], metric, probe_id=int(probe_ids[p])
            )
            ranks[p] = rank_of_truth(ranked, int(truths[p]))
        ranks_by_tag[algo.tag] = ranks
    outcome = OutcomeMatrix(
        probe_ids=probe_ids,
        algorithm_tags=tags,
        ranks=np.stack([ranks_by_tag[t] for t in tags], axis=1),
    )
    return _SubsetResult(
        category=category,
        subset_index=probe_set.subset_index,
        tables=tables,
        outcome=outcome,
    )


def _validation_accuracies(
    config: ExperimentConfig,
    prepared: PreparedData,
    trained: dict,
    galleries: dict,
    metrics: dict,
) -> AccuracySummary:
    """Rank-1 accuracies of the fusion members on a dedicated validation draw.

    Uses its own substream so the evaluation probe subsets stay untouched.
    """
    members = config.fusion.members
    correct = {tag: 0 for tag in members}
    total = 0
    for category, pool in prepared.probe_pools.items():
        pool_samples = [prepared.samples[i] for i in pool]
        val_sets = data_mod.make_probe_subsets(
            pool_samples,
            k_subsets=1,
            per_subject=config.probes.per_subject,
            seed=substream_seed(config.seed, f"validation-split:{category}"),
        )
        refs = val_sets[0].sample_refs
        columns = np.stack([pool_samples[i].pixels for i in refs], axis=1)
        columns = _corrupt_columns(
            columns,
            config.probes.corruption_zero_fraction,
            substream_seed(config.seed, f"corrupt-validation:{category}"),
        )
        truths = np.array([pool_samples[i].subject_id for i in refs])
        probe_matrix = data_mod.DataMatrix(
            columns=columns, mean=columns.mean(axis=1), labels=truths, centered=False
        )
        total += refs.size
        for tag in members:
            coords = _project_model(trained[tag], probe_matrix)
            gallery = galleries[tag]
            for p in range(refs.size):
                ranked = rank_classes(gallery, coords[:, p], metrics[tag])
                if int(ranked.class_ids[0]) == int(truths[p]):
                    correct[tag] += 1
    accuracies = np.array([100.0 * correct[tag] / total for tag in members])
    return AccuracySummary(tags=tuple(members), accuracies=accuracies)


def _fusion_weights(
    config: ExperimentConfig,
    prepared: PreparedData,
    trained: dict,
    galleries: dict,
    metrics: dict,
) -> FusionWeights:
    fcfg = config.fusion
    if fcfg.method == "fixed":
        return FusionWeights(
            weights=np.asarray(fcfg.weights, dtype=np.float64),
            tags=fcfg.members,
        )
    if fcfg.method == "method1":
        return weights_method1(fcfg.wins, fcfg.members)
    return weights_method2(
        _validation_accuracies(config, prepared, trained, galleries, metrics)
    )


def run_experiment(config: ExperimentConfig) -> ResultBundle:
    """Execute the full batch experiment described by a configuration."""
    timings = {}
    seeds = {"root": config.seed}

    start = time.perf_counter()
    try:
        prepared = _prepare_data(config)
    except SubfaceError as exc:
        raise StageError("data", str(exc)) from exc
    timings["data"] = time.perf_counter() - start

    trained, galleries, metrics = {}, {}, {}
    for algo in config.algorithms:
        start = time.perf_counter()
        try:
            model = _train_algorithm(algo, prepared.train_matrix, config.seed)
            trained[algo.tag] = model
            coords = (
                model.training_representation
                if isinstance(model, IcaModel)
                else model.training_coords
            )
            galleries[algo.tag] = build_gallery(
                coords, prepared.train_matrix.labels, source=algo.tag
            )
            metrics[algo.tag] = _metric_for(algo, model)
        except SubfaceError as exc:
            raise StageError("train", str(exc), algorithm=algo.tag) from exc
        timings[f"train:{algo.tag}"] = time.perf_counter() - start
        if algo.kind == "ica":
            seeds[f"ica-init:{algo.tag}"] = substream_seed(
                config.seed, f"ica-init:{algo.tag}"
            )

    start = time.perf_counter()
    subsets = {}
    for category, pool in prepared.probe_pools.items():
        pool_samples = [prepared.samples[i] for i in pool]
        seed = substream_seed(config.seed, f"probe-split:{category}")
        seeds[f"probe-split:{category}"] = seed
        try:
            local_sets = data_mod.make_probe_subsets(
                pool_samples,
                k_subsets=config.probes.k_subsets,
                per_subject=config.probes.per_subject,
                seed=seed,
            )
        except SubfaceError as exc:
            raise StageError("probe-split", str(exc)) from exc
        # sample_refs are local to the pool; lift them to global indices
        subsets[category] = [
            data_mod.ProbeSet(
                subset_index=ps.subset_index,
                sample_refs=pool[ps.sample_refs],
                seed=ps.seed,
            )
            for ps in local_sets
        ]
    timings["probe-split"] = time.perf_counter() - start

    start = time.perf_counter()
    jobs = [
        (category, ps)
        for category in prepared.probe_pools
        for ps in subsets[category]
    ]

    def run_job(job):
        category, ps = job
        return _evaluate_subset(
            config, prepared, trained, galleries, metrics, category, ps
        )

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(run_job, jobs))
    else:
        results = [run_job(job) for job in jobs]
    timings["evaluate"] = time.perf_counter() - start

    algorithm_tags = tuple(a.tag for a in config.algorithms)
    score_tables = {}
    fusion_weights = None
    if config.fusion.enabled:
        start = time.perf_counter()
        try:
            fusion_weights = _fusion_weights(
                config, prepared, trained, galleries, metrics
            )
            for res in results:
                members = [res.tables[tag] for tag in config.fusion.members]
                fused_table = fuse(members, fusion_weights, tag=HYBRID_TAG)
                res.tables[HYBRID_TAG] = fused_table
                truths = np.array(
                    [prepared.samples[i].subject_id for i in fused_table.probe_ids]
                )
                hybrid_ranks = np.array(
                    [
                        rank_of_truth(rl, int(truths[i]))
                        for i, rl in enumerate(ranked_lists_from_table(fused_table))
                    ],
                    dtype=np.int64,
                )
                res.outcome = OutcomeMatrix(
                    probe_ids=res.outcome.probe_ids,
                    algorithm_tags=res.outcome.algorithm_tags + (HYBRID_TAG,),
                    ranks=np.concatenate(
                        [res.outcome.ranks, hybrid_ranks[:, None]], axis=1
                    ),
                )
        except SubfaceError as exc:
            raise StageError("fusion", str(exc)) from exc
        timings["fusion"] = time.perf_counter() - start
        algorithm_tags = algorithm_tags + (HYBRID_TAG,)

    outcomes = {category: [] for category in prepared.probe_pools}
    for res in results:
        for tag, table in res.tables.items():
            score_tables[(res.category, res.subset_index, tag)] = table
        outcomes[res.category].append(res.outcome)

    start = time.perf_counter()
    n_classes = int(np.unique(prepared.train_matrix.labels).size)
    cms = {}
    mcnemar = {}
    rank1_input = {}
    for category in prepared.probe_pools:
        per_algo = {tag: [] for tag in algorithm_tags}
        pooled = {tag: [] for tag in algorithm_tags}
        for k, outcome in enumerate(outcomes[category], start=1):
            for tag in algorithm_tags:
                ranks = outcome.ranks_for(tag)
                per_algo[tag].append(ranks)
                pooled[tag].append(ranks)
                cms[(category, tag, str(k))] = cms_curve(
                    ranks, n_classes, algorithm=tag, probe_set=str(k)
                )
        for tag in algorithm_tags:
            cms[(category, tag, "pooled")] = cms_curve(
                np.concatenate(pooled[tag]), n_classes, algorithm=tag, probe_set="pooled"
            )
        rank1_input[category] = {tag: per_algo[tag] for tag in algorithm_tags}
        max_rank = config.evaluation.max_rank or n_classes
        max_rank = min(max_rank, n_classes)
        for i, tag_a in enumerate(algorithm_tags):
            for tag_b in algorithm_tags[i + 1:]:
                mcnemar[(category, tag_a, tag_b)] = mcnemar_across_ranks(
                    np.concatenate(pooled[tag_a]),
                    np.concatenate(pooled[tag_b]),
                    max_rank,
                    alpha=config.evaluation.alpha,
                )
    rank1 = rank1_table(rank1_input)
    timings["reports"] = time.perf_counter() - start

    return ResultBundle(
        config=config,
        config_hash=config.config_hash(),
        seeds=seeds,
        models=trained,
        galleries=galleries,
        categories=tuple(prepared.probe_pools),
        algorithm_tags=algorithm_tags,
        n_classes=n_classes,
        prepared=prepared,
        subsets=subsets,
        score_tables=score_tables,
        outcomes=outcomes,
        fusion_weights=fusion_weights,
        rank1=rank1,
        cms=cms,
        mcnemar=mcnemar,
        timings=timings,
    )


# ---------------------------------------------------------------------------
# Report emission


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _cms_csv(curve: CmsCurve) -> str:
    lines = ["rank,value"]
    for k, v in enumerate(curve.values, start=1):
        lines.append(f"{k},{repr(float(v))}")
    return "\n".join(lines) + "\n"


def _mcnemar_csv(report: McNemarReport) -> str:
    lines = ["rank,n01,n10,p,significant"]
    for i in range(report.ranks.size):
        lines.append(
            f"{report.ranks[i]},{report.n01[i]},{report.n10[i]},"
            f"{repr(float(report.p_values[i]))},{int(report.significant[i])}"
        )
    return "\n".join(lines) + "\n"


def _outcome_csv(outcomes: list[OutcomeMatrix], samples) -> str:
    tags = outcomes[0].algorithm_tags
    lines = ["subset,probe_id,truth," + ",".join(tags)]
    for k, outcome in enumerate(outcomes, start=1):
        for p in range(outcome.probe_ids.size):
            truth = samples[int(outcome.probe_ids[p])].subject_id
            row = ",".join(str(int(r)) for r in outcome.ranks[p])
            lines.append(f"{k},{int(outcome.probe_ids[p])},{truth},{row}")
    return "\n".join(lines) + "\n"


def _plot_category(bundle: ResultBundle, category: str, path: Path) -> None:
    import matplotlib
    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "subface"
    fig, ax = plt.subplots(figsize=(6, 4))
    ranks = np.arange(1, bundle.n_classes + 1)
    for tag in bundle.algorithm_tags:
        curve = bundle.cms[(category, tag, "pooled")]
        ax.plot(ranks, 100.0 * curve.values, label=tag)
    ax.set_xlabel("rank")
    ax.set_ylabel("cumulative match score (%)")
    ax.set_title(category)
    ax.legend(loc="lower right")
    ax.grid(True, alpha=0.4)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit_reports(bundle: ResultBundle, out_dir=None, plots: bool | None = None):
    """Write every artifact of a finished run below the output directory.

    Everything except timings.json is a deterministic function of the
    configuration; rerunning the same config reproduces identical bytes.
    """
    out = Path(out_dir if out_dir is not None else bundle.config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    _write(out / "rank1_table.csv", bundle.rank1.to_csv())
    _write(out / "rank1_table.txt", bundle.rank1.to_text())
    written += [out / "rank1_table.csv", out / "rank1_table.txt"]

    for tag, model in bundle.models.items():
        path = out / "models" / f"{tag}.model"
        path.parent.mkdir(parents=True, exist_ok=True)
        save_model(model, path)
        written.append(path)

    for (category, subset_index, tag), table in sorted(bundle.score_tables.items()):
        path = out / "scores" / category / f"subset_{subset_index:02d}" / f"{tag}.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        write_score_table(table, path)
        written.append(path)

    for (category, tag, label), curve in sorted(bundle.cms.items()):
        path = out / "cms" / category / f"{tag}_{label}.csv"
        _write(path, _cms_csv(curve))
        written.append(path)

    for (category, tag_a, tag_b), report in sorted(bundle.mcnemar.items()):
        path = out / "mcnemar" / category / f"{tag_a}__vs__{tag_b}.csv"
        _write(path, _mcnemar_csv(report))
        written.append(path)

    for category, outcome_list in sorted(bundle.outcomes.items()):
        path = out / "outcomes" / f"{category}.csv"
        _write(path, _outcome_csv(outcome_list, bundle.prepared.samples))
        written.append(path)

    summary = {
        "config_hash": bundle.config_hash,
        "config": bundle.config.raw,
        "seeds": bundle.seeds,
        "n_classes": bundle.n_classes,
        "categories": list(bundle.categories),
        "algorithms": list(bundle.algorithm_tags),
        "gallery_indices": [int(i) for i in bundle.prepared.gallery_indices],
        "probe_pools": {
            cat: [int(i) for i in pool]
            for cat, pool in bundle.prepared.probe_pools.items()
        },
        "probe_subsets": {
            cat: [[int(i) for i in ps.sample_refs] for ps in bundle.subsets[cat]]
            for cat in bundle.categories
        },
        "fusion_weights": (
            None
            if bundle.fusion_weights is None
            else {
                "tags": list(bundle.fusion_weights.tags),
                "weights": [float(w) for w in bundle.fusion_weights.weights],
            }
        ),
        "alpha": bundle.config.evaluation.alpha,
        "max_rank": min(
            bundle.config.evaluation.max_rank or bundle.n_classes, bundle.n_classes
        ),
        "rank1": {
            "categories": list(bundle.rank1.categories),
            "algorithms": list(bundle.rank1.algorithms),
            "percentages": [
                [round(float(v), 10) for v in row] for row in bundle.rank1.percentages
            ],
        },
    }
    _write(out / "summary.json", canonical_json(summary) + "\n")
    written.append(out / "summary.json")

    do_plots = bundle.config.plots if plots is None else plots
    if do_plots:
        for category in bundle.categories:
            path = out / "plots" / f"cms_{category}.svg"
            _plot_category(bundle, category, path)
            written.append(path)

    # timings are informational only and live outside the determinism contract
    _write(
        out / "timings.json",
        json.dumps({k: round(v, 6) for k, v in bundle.timings.items()}, sort_keys=True)
        + "\n",
    )
    return written


def re_emit_reports(bundle_dir, out_dir):
    """Regenerate the derived report files from a persisted bundle.

    Reads the outcome tables and summary back and rebuilds the rank-1
    table, CMS curves, and McNemar matrices; produces byte-identical
    files because every derivation is deterministic.
    """
    bundle_dir = Path(bundle_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = json.loads((bundle_dir / "summary.json").read_text())
    n_classes = summary["n_classes"]
    alpha = summary["alpha"]
    tags = tuple(summary["algorithms"])
    written = []

    rank1_input = {}
    pooled_all = {}
    for category in summary["categories"]:
        text = (bundle_dir / "outcomes" / f"{category}.csv").read_text().strip()
        lines = text.splitlines()[1:]
        by_subset: dict[int, list[list[int]]] = {}
        for line in lines:
            parts = line.split(",")
            by_subset.setdefault(int(parts[0]), []).append(
                [int(r) for r in parts[3:]]
            )
        per_algo = {tag: [] for tag in tags}
        for k in sorted(by_subset):
            ranks = np.array(by_subset[k], dtype=np.int64)
            for ai, tag in enumerate(tags):
                per_algo[tag].append(ranks[:, ai])
                curve = cms_curve(ranks[:, ai], n_classes, algorithm=tag, probe_set=str(k))
                path = out / "cms" / category / f"{tag}_{k}.csv"
                _write(path, _cms_csv(curve))
                written.append(path)
        pooled = {tag: np.concatenate(per_algo[tag]) for tag in tags}
        for tag in tags:
            path = out / "cms" / category / f"{tag}_pooled.csv"
            _write(path, _cms_csv(cms_curve(pooled[tag], n_classes, algorithm=tag,
                                            probe_set="pooled")))
            written.append(path)
        max_rank = min(summary.get("max_rank") or n_classes, n_classes)
        for i, tag_a in enumerate(tags):
            for tag_b in tags[i + 1:]:
                report = mcnemar_across_ranks(
                    pooled[tag_a], pooled[tag_b], max_rank, alpha=alpha
                )
                path = out / "mcnemar" / category / f"{tag_a}__vs__{tag_b}.csv"
                _write(path, _mcnemar_csv(report))
                written.append(path)
        rank1_input[category] = per_algo
        pooled_all[category] = pooled

    table = rank1_table(rank1_input)
    _write(out / "rank1_table.csv", table.to_csv())
    _write(out / "rank1_table.txt", table.to_text())
    written += [out / "rank1_table.csv", out / "rank1_table.txt"]
    return written


# ---------------------------------------------------------------------------
# Dimensionality sweep


def sweep_dimensionality(config: ExperimentConfig, t_values) -> list[dict]:
    """Rank-1 accuracy as a function of retained dimensionality.

    PCA and KPCA train once at the largest requested t and truncate down
    (their axes form a fixed prefix); LDA, KDA, and ICA retrain per t.
    Returns one row per (t, category, algorithm).
    """
    t_values = sorted(set(int(t) for t in t_values))
    if not t_values or t_values[0] < 1:
        raise ConfigError("sweep needs positive t values")
    prepared = _prepare_data(config)
    m = prepared.train_matrix.n_samples
    n_classes = int(np.unique(prepared.train_matrix.labels).size)
    t_max = t_values[-1]

    base_models = {}
    for algo in config.algorithms:
        cap = n_classes - 1 if algo.kind in ("lda", "kda") else m - 1
        if t_max > cap:
            raise ConfigError(
                f"sweep range exceeds cap {cap} for algorithm {algo.tag!r}"
            )
        if algo.kind in ("pca", "kpca"):
            full = replace(algo, policy=DimensionalityPolicy(mode="fixed", fixed_t=t_max))
            base_models[algo.tag] = _train_algorithm(full, prepared.train_matrix, config.seed)

    rows = []
    for t in t_values:
        for algo in config.algorithms:
            policy = DimensionalityPolicy(mode="fixed", fixed_t=t)
            if algo.kind in ("pca", "kpca"):
                model = truncate_model(base_models[algo.tag], t)
                coords = model.training_coords
            elif algo.kind == "ica":
                # the sweep drives the PCA pre-reduction for ICA
                ica_cfg = replace(
                    algo.ica,
                    pca_dims=t,
                    seed=substream_seed(config.seed, f"ica-init:{algo.tag}"),
                )
                model = train_ica(prepared.train_matrix, algo.architecture, ica_cfg)
                coords = model.training_representation
            else:
                model = _train_algorithm(
                    replace(algo, policy=policy), prepared.train_matrix, config.seed
                )
                coords = model.training_coords
            gallery = build_gallery(coords, prepared.train_matrix.labels, source=algo.tag)
            metric = _metric_for(algo, model)
            for category, pool in prepared.probe_pools.items():
                pool_samples = [prepared.samples[i] for i in pool]
                local_sets = data_mod.make_probe_subsets(
                    pool_samples,
                    k_subsets=config.probes.k_subsets,
                    per_subject=config.probes.per_subject,
                    seed=substream_seed(config.seed, f"probe-split:{category}"),
                )
                accs = []
                for ps in local_sets:
                    refs = ps.sample_refs
                    columns = np.stack(
                        [pool_samples[i].pixels for i in refs], axis=1
                    )
                    columns = _corrupt_columns(
                        columns,
                        config.probes.corruption_zero_fraction,
                        substream_seed(
                            config.seed, f"corrupt:{category}:{ps.subset_index}"
                        ),
                    )
                    truths = np.array([pool_samples[i].subject_id for i in refs])
                    probe_matrix = data_mod.DataMatrix(
                        columns=columns,
                        mean=columns.mean(axis=1),
                        labels=truths,
                        centered=False,
                    )
                    coords_p = _project_model(model, probe_matrix)
                    hits = 0
                    for p in range(refs.size):
                        ranked = rank_classes(gallery, coords_p[:, p], metric)
                        hits += int(ranked.class_ids[0]) == int(truths[p])
                    accs.append(100.0 * hits / refs.size)
                rows.append(
                    {
                        "t": t,
                        "category": category,
                        "algorithm": algo.tag,
                        "rank1": float(np.mean(accs)),
                    }
                )
    return rows


def sweep_csv(rows: list[dict]) -> str:
    lines = ["t,category,algorithm,rank1"]
    for row in rows:
        lines.append(
            f"{row['t']},{row['category']},{row['algorithm']},{row['rank1']:.4f}"
        )
    return "\n".join(lines) + "\n"
