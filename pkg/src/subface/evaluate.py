"""Identification evaluation: rank tables, CMS curves, McNemar tests.

The McNemar test is the exact two-sided binomial form (doubled tail,
clamped at 1) computed in rational arithmetic; probe subsets of a couple
hundred images routinely produce discordant counts small enough that the
chi-square approximation misleads.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb

import numpy as np
import scipy.stats

from .errors import ContractError, DimensionError, EvaluationError
from .matcher import RankedList


@dataclass
class OutcomeMatrix:
    """Rank of the true class for every probe, per algorithm."""

    probe_ids: np.ndarray       # (P,)
    algorithm_tags: tuple[str, ...]
    ranks: np.ndarray           # (P, A), 1-based

    def __post_init__(self):
        if self.ranks.shape != (self.probe_ids.shape[0], len(self.algorithm_tags)):
            raise DimensionError("ranks must be probes x algorithms")
        if self.ranks.size and np.min(self.ranks) < 1:
            raise ContractError("ranks are 1-based")

    def ranks_for(self, tag: str) -> np.ndarray:
        return self.ranks[:, self.algorithm_tags.index(tag)]


@dataclass
class CmsCurve:
    """Cumulative match scores over the whole rank spectrum."""

    values: np.ndarray
    algorithm: str = ""
    probe_set: str = ""


@dataclass
class McNemarReport:
    """Per-rank exact-test verdicts for one algorithm pair."""

    ranks: np.ndarray        # 1..C
    n01: np.ndarray          # A fails, B succeeds
    n10: np.ndarray          # A succeeds, B fails
    p_values: np.ndarray
    significant: np.ndarray
    alpha: float


def rank_of_truth(ranked: RankedList, truth: int) -> int:
    """1-based position of the true class in a ranked list."""
    hits = np.flatnonzero(ranked.class_ids == truth)
    if hits.size == 0:
        raise EvaluationError(f"true class {truth} is not in the ranked list")
    return int(hits[0]) + 1


def cms_curve(ranks, C: int, algorithm: str = "", probe_set: str = "") -> CmsCurve:
    """value(k) = fraction of probes whose true class sits within rank k."""
    ranks = np.asarray(ranks, dtype=np.int64)
    if ranks.size == 0:
        raise EvaluationError("cannot build a CMS curve from zero outcomes")
    if np.min(ranks) < 1 or np.max(ranks) > C:
        raise ContractError(f"ranks must lie in [1, {C}]")
    counts = np.bincount(ranks, minlength=C + 1)[1:]
    values = np.cumsum(counts) / ranks.size
    return CmsCurve(values=values, algorithm=algorithm, probe_set=probe_set)


def discordant_counts(successA, successB) -> tuple[int, int]:
    """(n01, n10): probes where exactly one of the two classifiers succeeds."""
    a = np.asarray(successA, dtype=bool)
    b = np.asarray(successB, dtype=bool)
    if a.shape != b.shape:
        raise EvaluationError("success vectors must pair the same probes")
    return int(np.sum(~a & b)), int(np.sum(a & ~b))


def _exact_p(n01: int, n10: int) -> float:
    # plain ints: numpy integers would overflow 2**n for large n
    n01, n10 = int(n01), int(n10)
    n = n01 + n10
    if n == 0:
        return 1.0
    k = min(n01, n10)
    tail = sum(comb(n, j) for j in range(k + 1))
    p = Fraction(2 * tail, 2 ** n)
    return float(min(p, Fraction(1)))


def mcnemar_exact(successA, successB) -> float:
    """Exact two-sided McNemar p-value on paired success vectors.

    p = min(1, 2 * sum_{k<=min(n01,n10)} C(n,k) / 2^n) with n the
    discordant count; n = 0 yields p = 1.
    """
    return _exact_p(*discordant_counts(successA, successB))


def mcnemar_across_ranks(
    ranksA,
    ranksB,
    C: int,
    alpha: float = 0.05,
) -> McNemarReport:
    """Exact McNemar verdicts at every rank threshold 1..C.

    Success at rank k means the true class appeared within the top k.
    """
    ranksA = np.asarray(ranksA, dtype=np.int64)
    ranksB = np.asarray(ranksB, dtype=np.int64)
    if ranksA.shape != ranksB.shape:
        raise EvaluationError("outcome vectors must pair the same probes")
    ks = np.arange(1, C + 1)
    n01 = np.empty(C, dtype=np.int64)
    n10 = np.empty(C, dtype=np.int64)
    p = np.empty(C)
    for i, k in enumerate(ks):
        n01[i], n10[i] = discordant_counts(ranksA <= k, ranksB <= k)
        p[i] = _exact_p(n01[i], n10[i])
    return McNemarReport(
        ranks=ks,
        n01=n01,
        n10=n10,
        p_values=p,
        significant=p < alpha,
        alpha=alpha,
    )


@dataclass
class Rank1Table:
    """Rank-1 percentages per (category, algorithm), subset-averaged."""

    categories: tuple[str, ...]
    algorithms: tuple[str, ...]
    percentages: np.ndarray  # (categories, algorithms)

    def to_text(self) -> str:
        width = max([len(a) for a in self.algorithms] + [6]) + 2
        cat_width = max([len(c) for c in self.categories] + [8]) + 2
        lines = [
            "CATEGORY".ljust(cat_width)
            + "".join(a.rjust(width) for a in self.algorithms)
        ]
        for ci, cat in enumerate(self.categories):
            row = cat.ljust(cat_width)
            row += "".join(
                f"{self.percentages[ci, ai]:.2f}%".rjust(width)
                for ai in range(len(self.algorithms))
            )
            lines.append(row)
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        lines = ["category," + ",".join(self.algorithms)]
        for ci, cat in enumerate(self.categories):
            lines.append(
                cat + "," + ",".join(f"{v:.2f}" for v in self.percentages[ci])
            )
        return "\n".join(lines) + "\n"


def rank1_table(outcomes: dict) -> Rank1Table:
    """Build the comparative rank-1 table.

    outcomes maps category -> algorithm -> list of per-subset rank
    vectors; each cell averages the subsets' rank-1 percentages.
    """
    if not outcomes:
        raise EvaluationError("no outcomes to tabulate")
    categories = tuple(outcomes)
    algorithms = tuple(next(iter(outcomes.values())))
    table = np.zeros((len(categories), len(algorithms)))
    for ci, cat in enumerate(categories):
        if tuple(outcomes[cat]) != algorithms:
            raise EvaluationError("categories disagree on their algorithm lists")
        for ai, algo in enumerate(algorithms):
            subsets = outcomes[cat][algo]
            if not subsets:
                raise EvaluationError(f"no probe subsets for {cat}/{algo}")
            percs = [100.0 * np.mean(np.asarray(r) == 1) for r in subsets]
            table[ci, ai] = float(np.mean(percs))
    return Rank1Table(categories=categories, algorithms=algorithms, percentages=table)


def clopper_pearson(successes: int, trials: int, alpha: float = 0.05):
    """Exact binomial confidence interval for a success fraction."""
    if trials <= 0:
        raise EvaluationError("trials must be positive")
    if successes == 0:
        lo = 0.0
    else:
        lo = float(scipy.stats.beta.ppf(alpha / 2, successes, trials - successes + 1))
    if successes == trials:
        hi = 1.0
    else:
        hi = float(scipy.stats.beta.ppf(1 - alpha / 2, successes + 1, trials - successes))
    return lo, hi
