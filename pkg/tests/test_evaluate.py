from fractions import Fraction

import numpy as np
import pytest

from subface.errors import ContractError, EvaluationError
from subface.evaluate import (
    CmsCurve,
    clopper_pearson,
    cms_curve,
    discordant_counts,
    mcnemar_across_ranks,
    mcnemar_exact,
    rank1_table,
    rank_of_truth,
)
from subface.matcher import RankedList


def ranked(class_ids, distances=None):
    class_ids = np.asarray(class_ids)
    if distances is None:
        distances = np.arange(class_ids.size, dtype=np.float64)
    return RankedList(probe_id=0, class_ids=class_ids, distances=np.asarray(distances))


def bruteforce_mcnemar(n01: int, n10: int) -> Fraction:
    """Exact doubled-tail p by enumerating all 2^n discordant patterns."""
    n = n01 + n10
    if n == 0:
        return Fraction(1)
    k = min(n01, n10)
    hits = sum(1 for pattern in range(2 ** n) if bin(pattern).count("1") <= k)
    return min(Fraction(1), 2 * Fraction(hits, 2 ** n))


class TestRankOfTruth:
    def test_first(self):
        assert rank_of_truth(ranked([3, 1, 2]), 3) == 1

    def test_last(self):
        assert rank_of_truth(ranked([3, 1, 2]), 2) == 3

    def test_matches_scan_oracle(self, rng):
        ids = rng.permutation(20)
        r = ranked(ids)
        for truth in ids:
            scan = next(i + 1 for i in range(20) if ids[i] == truth)
            assert rank_of_truth(r, truth) == scan

    def test_absent_truth(self):
        with pytest.raises(EvaluationError):
            rank_of_truth(ranked([0, 1]), 5)


class TestCmsCurve:
    def test_perfect_classifier(self):
        curve = cms_curve(np.ones(10, dtype=int), C=4)
        np.testing.assert_array_equal(curve.values, np.ones(4))

    def test_hand_counted_curve(self):
        curve = cms_curve([1, 2, 2, 5], C=5)
        np.testing.assert_allclose(curve.values, [0.25, 0.75, 0.75, 0.75, 1.0])

    def test_terminal_value_and_monotonicity(self, rng):
        for _ in range(10):
            C = 8
            ranks = rng.integers(1, C + 1, size=30)
            curve = cms_curve(ranks, C)
            assert np.all(np.diff(curve.values) >= 0)
            assert curve.values[-1] == 1.0

    def test_empty_rejected(self):
        with pytest.raises(EvaluationError):
            cms_curve([], C=3)

    def test_out_of_range_rejected(self):
        with pytest.raises(ContractError):
            cms_curve([0, 1], C=3)


class TestMcNemarExact:
    def test_fixture_2_8(self):
        a = np.concatenate([np.zeros(2, bool), np.ones(8, bool), np.ones(5, bool)])
        b = np.concatenate([np.ones(2, bool), np.zeros(8, bool), np.ones(5, bool)])
        assert mcnemar_exact(a, b) == pytest.approx(0.109375, abs=1e-12)

    def test_fixture_binomial_sum(self):
        # 2 * (C(10,0) + C(10,1) + C(10,2)) / 2^10 = 112/1024
        assert 2 * (1 + 10 + 45) / 1024 == 0.109375

    def test_symmetric_counts_clamp_to_one(self):
        a = np.array([True] * 3 + [False] * 3)
        b = np.array([False] * 3 + [True] * 3)
        assert mcnemar_exact(a, b) == 1.0

    def test_zero_twelve_tail(self):
        a = np.zeros(12, bool)
        b = np.ones(12, bool)
        assert mcnemar_exact(a, b) == pytest.approx(2 / 4096, rel=1e-12)

    def test_no_discordance_gives_one(self):
        a = np.array([True, False, True])
        assert mcnemar_exact(a, a) == 1.0

    def test_swap_symmetry(self, rng):
        for _ in range(20):
            a = rng.random(30) < 0.6
            b = rng.random(30) < 0.4
            assert mcnemar_exact(a, b) == mcnemar_exact(b, a)

    def test_bruteforce_enumeration_oracle(self):
        for n01 in range(0, 13):
            for n10 in range(0, 13 - n01):
                a = np.concatenate(
                    [np.zeros(n01, bool), np.ones(n10, bool), np.ones(4, bool)]
                )
                b = np.concatenate(
                    [np.ones(n01, bool), np.zeros(n10, bool), np.ones(4, bool)]
                )
                got = mcnemar_exact(a, b)
                want = float(bruteforce_mcnemar(n01, n10))
                assert abs(got - want) <= 1e-12, (n01, n10)

    def test_length_mismatch(self):
        with pytest.raises(EvaluationError):
            mcnemar_exact(np.ones(3, bool), np.ones(4, bool))

    def test_discordant_counts(self):
        a = np.array([True, True, False, False])
        b = np.array([True, False, True, False])
        assert discordant_counts(a, b) == (1, 1)


class TestMcNemarAcrossRanks:
    def test_identical_outcomes_all_ones(self):
        ranks = np.array([1, 2, 3, 1, 2])
        report = mcnemar_across_ranks(ranks, ranks, C=4)
        np.testing.assert_array_equal(report.p_values, np.ones(4))
        assert not report.significant.any()

    def test_perfect_vs_always_wrong(self):
        C = 5
        a = np.ones(12, dtype=int)       # always rank 1
        b = np.full(12, C)               # truth surfaces only at rank C
        report = mcnemar_across_ranks(a, b, C=C, alpha=0.05)
        assert report.significant[: C - 1].all()
        assert report.p_values[C - 1] == 1.0  # both succeed at rank C
        # per-rank oracle: n01=0, n10=12 all the way to C-1
        np.testing.assert_array_equal(report.n10[: C - 1], 12)
        np.testing.assert_allclose(report.p_values[: C - 1], 2 / 4096)

    def test_unpaired_rejected(self):
        with pytest.raises(EvaluationError):
            mcnemar_across_ranks([1, 2], [1, 2, 3], C=3)

    def test_alpha_threshold(self):
        a = np.array([1, 1, 1, 1, 1, 1])
        b = np.array([2, 2, 2, 2, 2, 1])
        strict = mcnemar_across_ranks(a, b, C=2, alpha=0.01)
        loose = mcnemar_across_ranks(a, b, C=2, alpha=0.10)
        # p at rank 1 = 2/2^5 = 0.0625
        assert not strict.significant[0]
        assert loose.significant[0]


class TestRank1Table:
    def test_all_correct(self):
        table = rank1_table({"cat": {"algo": [np.ones(10, int)]}})
        assert table.percentages[0, 0] == 100.0
        assert "100.00%" in table.to_text()

    def test_paper_style_percentage(self):
        ranks = np.concatenate([np.ones(198, int), np.full(22, 7)])
        table = rank1_table({"time_delay": {"pca": [ranks]}})
        assert table.percentages[0, 0] == pytest.approx(90.0)
        assert "90.00" in table.to_csv()

    def test_subset_averaging(self):
        subsets = [np.array([1, 1, 2, 2]), np.array([1, 1, 1, 1])]
        table = rank1_table({"cat": {"a": subsets}})
        assert table.percentages[0, 0] == pytest.approx(75.0)

    def test_constituents_plus_hybrid_layout(self):
        outcomes = {
            cat: {
                algo: [np.ones(4, int)]
                for algo in ("FA1", "FA2", "LDA", "hybrid")
            }
            for cat in ("expression", "illumination")
        }
        table = rank1_table(outcomes)
        assert table.algorithms == ("FA1", "FA2", "LDA", "hybrid")
        header = table.to_csv().splitlines()[0]
        assert header == "category,FA1,FA2,LDA,hybrid"

    def test_rank1_equals_cms_at_one(self, rng):
        ranks = rng.integers(1, 6, size=40)
        table = rank1_table({"c": {"a": [ranks]}})
        curve = cms_curve(ranks, C=6)
        assert table.percentages[0, 0] == 100.0 * curve.values[0]


def test_clopper_pearson_basic():
    lo, hi = clopper_pearson(5, 10)
    assert 0.0 < lo < 0.5 < hi < 1.0
    lo_all, hi_all = clopper_pearson(10, 10)
    assert hi_all == 1.0
    lo_none, hi_none = clopper_pearson(0, 10)
    assert lo_none == 0.0
