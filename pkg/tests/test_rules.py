import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import rankdata

from mixctl import RuleSpec, apply_lambda, criterion, map_rule, tau_star, thresholded_rule

from .helpers import dirichlet_posteriors

ROW = np.array([[0.2, 0.3, 0.5]])


def random_case(seed, n=40, P=4):
    rng = np.random.default_rng(seed)
    T = dirichlet_posteriors(rng, n, P, concentration=rng.choice([0.3, 1.0, 3.0]))
    K = int(rng.integers(1, P + 1))
    interest = tuple(sorted(rng.choice(np.arange(1, P + 1), size=K, replace=False).tolist()))
    risk = rng.choice(["mfdr", "mnpr"])
    alpha = float(rng.choice([0.01, 0.05, 0.1, 0.3]))
    return T, RuleSpec(risk, alpha, interest)


class TestTauStar:
    @pytest.mark.parametrize("interest, expected", [((1, 2, 3), 0.5), ((1, 3), 0.5), ((1,), 0.2)])
    def test_examples(self, interest, expected):
        assert tau_star(ROW, interest)[0] == expected

    def test_default_is_all(self):
        assert tau_star(ROW)[0] == 0.5

    def test_bad_interest(self):
        with pytest.raises(ValueError):
            tau_star(ROW, (4,))
        with pytest.raises(ValueError):
            tau_star(ROW, ())
        with pytest.raises(ValueError):
            tau_star(ROW, (1, 1))

    def test_rejects_non_probability_rows(self):
        with pytest.raises(ValueError):
            tau_star([[0.5, 0.6]])
        with pytest.raises(ValueError):
            tau_star([[1.2, -0.2]])


class TestMapRule:
    def test_examples(self):
        assert map_rule(ROW, (1, 2, 3)).tolist() == [3]
        assert map_rule([[0.4, 0.4, 0.2]], (1, 2)).tolist() == [1]
        assert map_rule(ROW, (1, 2)).tolist() == [2]

    def test_tie_goes_to_smallest_index_regardless_of_order(self):
        T = [[0.1, 0.45, 0.45]]
        assert map_rule(T, (3, 2)).tolist() == [2]

    def test_never_zero(self):
        T = dirichlet_posteriors(np.random.default_rng(0), 100, 3)
        assert np.all(map_rule(T) > 0)


class TestThresholdedRule:
    def test_strict_boundary(self):
        T = np.array([[0.96, 0.04, 0.0], [0.95, 0.05, 0.0], [0.94, 0.06, 0.0]])
        assert thresholded_rule(T, RuleSpec("mfdr", 0.05)).tolist() == [1, 0, 0]

    def test_alpha_one_classifies_everything(self):
        T = dirichlet_posteriors(np.random.default_rng(1), 50, 3)
        np.testing.assert_array_equal(thresholded_rule(T, RuleSpec("mfdr", 1.0)), map_rule(T))

    def test_restricted(self):
        T = np.array([[0.02, 0.97, 0.01]])
        assert thresholded_rule(T, RuleSpec("mfdr", 0.05, (1, 3))).tolist() == [0]
        assert thresholded_rule(T, RuleSpec("mfdr", 0.05, (2,))).tolist() == [2]


class TestCriterion:
    def test_mfdr_full(self):
        assert criterion([[0.95, 0.05, 0.0]], RuleSpec("mfdr", 0.05))[0] == pytest.approx(0.0, abs=1e-15)

    def test_mnpr_restricted(self):
        # (0.3 + 0.3) / (1 - 0.3)
        c = criterion([[0.3, 0.3, 0.4]], RuleSpec("mnpr", 0.05, (1, 2)))[0]
        assert c == pytest.approx(0.6 / 0.7, rel=1e-15)
        assert c == pytest.approx(0.857142, abs=1e-6)

    def test_mfdr_restricted(self):
        # (0.3 + 0.1 - 1) / 0.6
        c = criterion([[0.3, 0.3, 0.4]], RuleSpec("mfdr", 0.1, (1, 2)))[0]
        assert c == pytest.approx(-1.0, rel=1e-14)

    def test_mnpr_full_is_tau_star(self):
        T = dirichlet_posteriors(np.random.default_rng(2), 20, 3)
        np.testing.assert_array_equal(criterion(T, RuleSpec("mnpr", 0.1)), T.max(axis=1))

    def test_sentinels(self):
        T = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        assert criterion(T[:1], RuleSpec("mnpr", 0.1, (1, 2)))[0] == np.inf
        assert criterion(T[1:], RuleSpec("mfdr", 0.1, (1, 2)))[0] == -np.inf


class TestApplyLambda:
    def test_infinities(self):
        T = dirichlet_posteriors(np.random.default_rng(3), 30, 3)
        for spec in (RuleSpec("mfdr", 0.05), RuleSpec("mnpr", 0.05, (1, 3))):
            np.testing.assert_array_equal(apply_lambda(T, spec, -np.inf), map_rule(T, spec.resolve(3)))
            assert not apply_lambda(T, spec, np.inf).any()

    def test_plus_infinity_beats_infinite_criterion(self):
        T = np.array([[1.0, 0.0, 0.0]])
        assert apply_lambda(T, RuleSpec("mnpr", 0.05, (1, 2)), np.inf).tolist() == [0]

    def test_boundary_row_included_at_zero(self):
        T = np.array([[0.96, 0.04, 0.0], [0.95, 0.05, 0.0], [0.94, 0.06, 0.0]])
        # tau = 0.95 exactly: criterion is 0.95 + 0.05 - 1, which rounds to +0.0 in floats
        spec = RuleSpec("mfdr", 0.05)
        crit = criterion(T, spec)
        lam = crit[1]
        assert lam == pytest.approx(0.0, abs=1e-15)
        assert apply_lambda(T, spec, lam).tolist() == [1, 1, 0]
        assert thresholded_rule(T, spec).tolist() == [1, 0, 0]


class TestInvariants:
    @settings(max_examples=80, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), l1=st.floats(-3, 3), l2=st.floats(-3, 3))
    def test_nesting(self, seed, l1, l2):
        T, spec = random_case(seed)
        lo, hi = min(l1, l2), max(l1, l2)
        inner = apply_lambda(T, spec, hi) > 0
        outer = apply_lambda(T, spec, lo) > 0
        assert np.all(outer[inner])

    @settings(max_examples=80, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), lam=st.floats(-3, 3))
    def test_nonzero_labels_are_map(self, seed, lam):
        T, spec = random_case(seed)
        ref = map_rule(T, spec.resolve(T.shape[1]))
        for labels in (apply_lambda(T, spec, lam), thresholded_rule(T, spec)):
            nz = labels > 0
            np.testing.assert_array_equal(labels[nz], ref[nz])

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_mnpr_full_ranking_matches_tau_star(self, seed):
        T = dirichlet_posteriors(np.random.default_rng(seed), 30, 4)
        spec = RuleSpec("mnpr", 0.1)
        tmax = T.max(axis=1)
        # restricted formula with every class of interest: sum = 1, so 1 / (1 - tau*)
        restricted_form = T.sum(axis=1) / (1.0 - tmax)
        np.testing.assert_array_equal(rankdata(restricted_form), rankdata(criterion(T, spec)))

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), alpha=st.floats(0.001, 0.999))
    def test_thresholded_inside_zero_level_set(self, seed, alpha):
        T = dirichlet_posteriors(np.random.default_rng(seed), 50, 3, 0.3)
        spec = RuleSpec("mfdr", alpha)
        thr = thresholded_rule(T, spec) > 0
        opt = apply_lambda(T, spec, 0.0) > 0
        assert np.all(opt[thr])

    def test_interest_order_irrelevant(self):
        T = dirichlet_posteriors(np.random.default_rng(4), 40, 4)
        a = RuleSpec("mfdr", 0.2, (3, 1))
        b = RuleSpec("mfdr", 0.2, (1, 3))
        np.testing.assert_array_equal(criterion(T, a), criterion(T, b))
        np.testing.assert_array_equal(apply_lambda(T, a, -0.3), apply_lambda(T, b, -0.3))


class TestRuleSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            RuleSpec("fdr", 0.1)
        with pytest.raises(ValueError):
            RuleSpec("mfdr", 0.0)
        with pytest.raises(ValueError):
            RuleSpec("mfdr", 1.5)
        with pytest.raises(ValueError):
            RuleSpec("mfdr", 0.1, ())
        with pytest.raises(ValueError):
            RuleSpec("mfdr", 0.1, (0, 1))
