import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from modlevel.classifiers import classify_rck, classify_rcks
from modlevel.exact import (CompositionBudgetError, cumulative_chunks, ecdf_from_occupancy,
                            exact_confusion, exact_confusions, multinomial_pmf, n_compositions)


def compositions(total, parts):
    for cuts in itertools.combinations_with_replacement(range(total + 1), parts - 1):
        yield np.diff((0,) + cuts + (total,))


class TestPmf:
    def test_examples(self):
        assert multinomial_pmf([1, 1], 2, [0.5, 0.5]) == pytest.approx(0.5)
        assert multinomial_pmf([2, 0], 2, [0.5, 0.5]) == pytest.approx(0.25)
        assert multinomial_pmf([1, 2, 3], 6, [0.2, 0.3, 0.5]) == pytest.approx(
            60 * 0.2 * 0.09 * 0.125)

    def test_against_scipy(self, rng):
        p = rng.dirichlet(np.ones(5))
        for n in compositions(9, 5):
            assert multinomial_pmf(n, 9, p) == pytest.approx(stats.multinomial.pmf(n, 9, p),
                                                             rel=1e-10, abs=1e-300)

    def test_wrong_total_and_zero_cells(self):
        assert multinomial_pmf([1, 1], 3, [0.5, 0.5]) == 0.0
        assert multinomial_pmf([1, 1], 2, [1.0, 0.0]) == 0.0
        assert multinomial_pmf([2, 0], 2, [1.0, 0.0]) == 1.0

    def test_invalid(self):
        with pytest.raises(ValueError):
            multinomial_pmf([1, 1], 2, [1.0])
        with pytest.raises(ValueError):
            multinomial_pmf([3, -1], 2, [0.5, 0.5])

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 12), st.integers(1, 5), st.integers(0, 2 ** 32 - 1))
    def test_sums_to_one(self, total, parts, seed):
        p = np.random.default_rng(seed).dirichlet(np.ones(parts))
        assert math.fsum(multinomial_pmf(n, total, p) for n in compositions(total, parts)) \
            == pytest.approx(1.0, abs=1e-12)


class TestEnumeration:
    @pytest.mark.parametrize("total,length", [(0, 3), (1, 1), (5, 3), (7, 4), (10, 2)])
    def test_matches_itertools(self, total, length):
        got = np.vstack(list(cumulative_chunks(total, length)))
        want = np.array(list(itertools.combinations_with_replacement(range(total + 1), length)))
        assert sorted(map(tuple, got)) == sorted(map(tuple, want))
        assert got.shape[0] == n_compositions(total, length + 1)

    def test_small_chunks_same_rows(self):
        a = np.vstack(list(cumulative_chunks(9, 4)))
        chunks = list(cumulative_chunks(9, 4, max_rows=7))
        assert all(c.shape[0] <= 7 for c in chunks)
        b = np.vstack(chunks)
        assert sorted(map(tuple, a)) == sorted(map(tuple, b))

    def test_first_partition(self):
        total, length = 8, 3
        rows = [np.vstack(list(cumulative_chunks(total, length, first=f))) for f in range(total + 1)]
        assert all(np.all(r[:, 0] == f) for f, r in enumerate(rows))
        assert sum(r.shape[0] for r in rows) == n_compositions(total, length + 1)

    def test_count_for_paper_size(self):
        assert n_compositions(50, 7) == math.comb(56, 6) == 32_468_436

    def test_ecdf_from_occupancy(self):
        np.testing.assert_allclose(ecdf_from_occupancy([1, 0, 3, 1], 5), [0.2, 0.2, 0.8])


def replay_confusion(tps, rule, probs, n):
    """Enumerate occupancies, place samples inside each region and classify them."""
    edges = np.concatenate([[tps.points[0] - 1.0], tps.points, [tps.points[-1] + 1.0]])
    inside = np.array([(edges[l] + edges[l + 1]) / 2 for l in range(edges.size - 1)])
    classify = classify_rck if rule == "rck" else classify_rcks
    conf = np.zeros((probs.shape[0], tps.n_levels))
    for occ in compositions(n, tps.n_effective + 1):
        z = np.repeat(inside, occ)
        choice = classify(z, tps).choice
        for k in range(probs.shape[0]):
            conf[k, choice] += multinomial_pmf(occ, n, probs[k])
    return conf


class TestExactConfusion:
    @pytest.mark.parametrize("feature", ["mag", "quad"])
    @pytest.mark.parametrize("rule", ["rck", "rcks"])
    def test_matches_replay(self, bank12, feature, rule):
        tps = bank12.test_points(12.0, feature)
        got = exact_confusion(tps, rule, n_samples=6)
        want = replay_confusion(tps, rule, tps.region_probs, 6)
        np.testing.assert_allclose(got.confusion, want, atol=1e-13)
        np.testing.assert_allclose(got.mass, 1.0, atol=1e-12)

    def test_mismatched_probabilities(self, small_bank):
        tps = small_bank.test_points(12.0, "mag")
        from modlevel.testpoints import region_probabilities
        probs = np.vstack([region_probabilities(tps, m) for m in small_bank.models(6.0, "mag")])
        got = exact_confusion(tps, "rck", probs, n_samples=5)
        np.testing.assert_allclose(got.confusion, replay_confusion(tps, "rck", probs, 5),
                                   atol=1e-13)

    def test_both_rules_in_one_pass(self, bank12):
        tps = bank12.test_points(12.0, "mag")
        both = exact_confusions(tps, ("rck", "rcks"), n_samples=10)
        for rule in ("rck", "rcks"):
            np.testing.assert_allclose(both[rule].confusion,
                                       exact_confusion(tps, rule, n_samples=10).confusion)
        assert both["rck"].n_compositions == n_compositions(10, tps.n_effective + 1)

    def test_p_correct_improves_with_n(self, bank12):
        tps = bank12.test_points(12.0, "mag")
        acc = [exact_confusion(tps, "rck", n_samples=n).p_correct for n in (5, 10, 20)]
        assert acc[0] < acc[1] < acc[2]

    def test_workers_agree(self, bank12):
        tps = bank12.test_points(12.0, "mag")
        a = exact_confusion(tps, "rck", n_samples=8)
        b = exact_confusion(tps, "rck", n_samples=8, workers=2)
        np.testing.assert_allclose(a.confusion, b.confusion, atol=1e-15)

    def test_budget(self, bank12):
        tps = bank12.test_points(12.0, "mag")
        with pytest.raises(CompositionBudgetError):
            exact_confusion(tps, "rck", n_samples=50, max_compositions=10 ** 6)

    def test_rejects_full_rules_and_bad_probs(self, bank12):
        tps = bank12.test_points(12.0, "mag")
        with pytest.raises(ValueError):
            exact_confusion(tps, "ks", n_samples=3)
        with pytest.raises(ValueError):
            exact_confusion(tps, "rck", np.ones((3, 2)) / 2, n_samples=3)
