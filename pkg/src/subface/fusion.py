"""Matching-score-level fusion by the weighted sum rule.

Classifier distances become similarities by negation, get mapped onto a
common [0, 100] range by MinMax normalization, and combine as a convex
weighted sum.  Weights come from either categorical wins (two fifths of
the weighting for two category wins out of five) or from the classifiers'
relative recognition accuracies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, ContractError, DimensionError
from .matcher import RankedList

# The five evaluation categories over which categorical wins are counted.
EVAL_CATEGORIES = (
    "expression",
    "illumination",
    "lower_occlusion",
    "upper_occlusion",
    "time_delay",
)


@dataclass
class ScoreTable:
    """Per-probe, per-class matching scores of one classifier."""

    tag: str
    probe_ids: np.ndarray  # (P,)
    class_ids: np.ndarray  # (C,)
    scores: np.ndarray     # (P, C)

    def __post_init__(self):
        if self.scores.shape != (self.probe_ids.shape[0], self.class_ids.shape[0]):
            raise DimensionError("scores must be probes x classes")
        if not np.all(np.isfinite(self.scores)):
            raise ContractError("scores must be finite")


@dataclass(frozen=True)
class FusionWeights:
    """Convex weights over the fused classifiers."""

    weights: np.ndarray
    tags: tuple[str, ...] = ()

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if np.any(w < 0):
            raise ContractError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ContractError("weights must sum to 1 within 1e-12")
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class AccuracySummary:
    """Rank-1 accuracies (percent) feeding the confidence weighting."""

    tags: tuple[str, ...]
    accuracies: np.ndarray

    def __post_init__(self):
        acc = np.asarray(self.accuracies, dtype=np.float64)
        if acc.shape[0] != len(self.tags):
            raise DimensionError("one accuracy per tag required")
        if np.any(acc < 0) or np.any(acc > 100):
            raise ContractError("accuracies must lie in [0, 100]")
        object.__setattr__(self, "accuracies", acc)

    @property
    def r_sum(self) -> float:
        return float(self.accuracies.sum())


@dataclass(frozen=True)
class CategoryWinTable:
    """Winning classifier per evaluation category, all five present."""

    wins: Mapping[str, str]

    def __post_init__(self):
        if set(self.wins) != set(EVAL_CATEGORIES):
            raise ContractError(
                "win table must name exactly the five evaluation categories "
                f"{EVAL_CATEGORIES}"
            )


def to_similarity(distances: np.ndarray) -> np.ndarray:
    """Order-reversing distance -> similarity map (plain negation)."""
    distances = np.asarray(distances, dtype=np.float64)
    if not np.all(np.isfinite(distances)):
        raise ContractError("distances must be finite")
    return -distances


def minmax_normalize(scores: np.ndarray) -> np.ndarray:
    """Affine map of one probe's scores onto [0, 100].

    An all-equal vector carries no ranking information and maps to the
    midpoint 50 instead of erroring, so one uninformative classifier
    cannot abort a fusion run.
    """
    scores = np.asarray(scores, dtype=np.float64)
    lo, hi = scores.min(), scores.max()
    if hi == lo:
        return np.full_like(scores, 50.0)
    # ratio first so the extremes land on exactly 0 and 100
    return 100.0 * ((scores - lo) / (hi - lo))


def normalize_table(table: ScoreTable, scope: str = "per_probe") -> ScoreTable:
    """MinMax-normalize a score table.

    per_probe rescales each probe row over its gallery scores (the
    default, self-contained choice); global uses one min/max over the
    whole table.
    """
    if scope == "per_probe":
        normalized = np.vstack([minmax_normalize(row) for row in table.scores])
    elif scope == "global":
        normalized = minmax_normalize(table.scores)
    else:
        raise ConfigError(f"unknown normalization scope {scope!r}")
    return ScoreTable(
        tag=table.tag,
        probe_ids=table.probe_ids,
        class_ids=table.class_ids,
        scores=normalized,
    )


def weights_method1(
    wins: CategoryWinTable | Mapping[str, str],
    tags: Sequence[str],
) -> FusionWeights:
    """Categorical weighting: each of the five category wins is worth 1/5."""
    if not isinstance(wins, CategoryWinTable):
        wins = CategoryWinTable(wins=dict(wins))
    counts = {tag: 0 for tag in tags}
    for category, winner in wins.wins.items():
        if winner not in counts:
            raise ConfigError(
                f"category {category!r} winner {winner!r} is not a fused classifier"
            )
        counts[winner] += 1
    weights = np.array([counts[tag] / 5.0 for tag in tags])
    return FusionWeights(weights=weights, tags=tuple(tags))


def weights_method2(acc: AccuracySummary) -> FusionWeights:
    """Confidence weighting: w_i = r_i / sum(r)."""
    if acc.r_sum <= 0:
        raise ConfigError("cannot weight by accuracy: all accuracies are zero")
    return FusionWeights(weights=acc.accuracies / acc.r_sum, tags=acc.tags)


def fuse(
    tables: Sequence[ScoreTable],
    weights: FusionWeights,
    tag: str = "hybrid",
) -> ScoreTable:
    """Weighted sum of identically indexed normalized score tables."""
    if len(tables) != weights.weights.shape[0]:
        raise DimensionError("one weight per table required")
    if not tables:
        raise ContractError("nothing to fuse")
    first = tables[0]
    for t in tables[1:]:
        if not np.array_equal(t.probe_ids, first.probe_ids) or not np.array_equal(
            t.class_ids, first.class_ids
        ):
            raise DimensionError(
                f"table {t.tag!r} indexing does not align with {first.tag!r}"
            )
    combined = np.zeros_like(first.scores)
    for w, t in zip(weights.weights, tables):
        combined = combined + w * t.scores
    return ScoreTable(
        tag=tag,
        probe_ids=first.probe_ids.copy(),
        class_ids=first.class_ids.copy(),
        scores=combined,
    )


def ranked_lists_from_table(table: ScoreTable) -> list[RankedList]:
    """Per-probe rankings by descending score, class-id tie-break.

    Negated scores stand in for distances so the ranked lists share the
    matcher's non-decreasing-distance convention.
    """
    out = []
    for pid, row in zip(table.probe_ids, table.scores):
        order = np.lexsort((table.class_ids, -row))
        out.append(
            RankedList(
                probe_id=int(pid),
                class_ids=table.class_ids[order],
                distances=-row[order],
            )
        )
    return out


def write_score_table(table: ScoreTable, path) -> None:
    """Comma-separated table: class-id header, one row per probe."""
    lines = ["probe_id," + ",".join(str(int(c)) for c in table.class_ids)]
    for pid, row in zip(table.probe_ids, table.scores):
        lines.append(str(int(pid)) + "," + ",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_score_table(path, tag: str | None = None) -> ScoreTable:
    """Inverse of write_score_table; tag defaults to the file stem."""
    path = Path(path)
    lines = path.read_text().strip().splitlines()
    if not lines:
        raise ConfigError(f"score table {path} is empty")
    header = lines[0].split(",")
    if header[0] != "probe_id":
        raise ConfigError(f"score table {path} lacks the probe_id header")
    class_ids = np.array([int(c) for c in header[1:]], dtype=np.int64)
    probe_ids = []
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        probe_ids.append(int(parts[0]))
        rows.append([float(v) for v in parts[1:]])
    return ScoreTable(
        tag=tag if tag is not None else path.stem,
        probe_ids=np.array(probe_ids, dtype=np.int64),
        class_ids=class_ids,
        scores=np.array(rows, dtype=np.float64),
    )
