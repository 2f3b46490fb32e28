import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixctl import EvalReport, aggregate, evaluate


def report(mfdr=0.0, mnpr=0.0, mfnr=0.0):
    return EvalReport(mfdr, mnpr, mfnr, 1, 1, 1)


class TestEvaluate:
    def test_perfect(self):
        r = evaluate([1, 2, 3, 1], [1, 2, 3, 1], (1, 2, 3))
        assert (r.realized_mfdr, r.realized_mnpr, r.realized_mfnr) == (0.0, 0.0, 0.0)
        assert r.n_classified == 4 and not r.none_classified

    def test_nothing_classified(self):
        r = evaluate([0, 0, 0], [1, 2, 3], (1, 2, 3))
        assert (r.realized_mfdr, r.realized_mnpr, r.realized_mfnr) == (0.0, 0.0, 1.0)
        assert r.none_classified

    def test_counting_example(self):
        # 3 classified, one of them wrong; one abstention on a class of interest
        r = evaluate([1, 2, 2, 0], [1, 2, 1, 3], (1, 2, 3))
        assert r.realized_mfdr == pytest.approx(1 / 3, abs=1e-15)
        assert r.realized_mnpr == 0.25
        assert r.realized_mfnr == 0.25
        assert (r.n_classified, r.n_total, r.n_interest) == (3, 4, 4)

    def test_restricted_interest(self):
        r = evaluate([1, 0, 0, 3], [1, 2, 3, 2], (1, 3))
        assert r.realized_mfdr == 0.5
        assert r.realized_mfnr == 0.25  # only the class-3 abstention counts
        assert r.n_interest == 2

    def test_stray_label_rejected(self):
        with pytest.raises(ValueError):
            evaluate([2, 0], [1, 2], (1, 3))

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            evaluate([1, 0], [1], (1,))

    @settings(max_examples=100, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 60))
    def test_mnpr_identity_and_permutation(self, seed, n):
        rng = np.random.default_rng(seed)
        z = rng.integers(1, 4, size=n)
        pred = np.where(rng.random(n) < 0.4, 0, rng.integers(1, 4, size=n))
        r = evaluate(pred, z, (1, 2, 3))
        assert r.realized_mnpr == pytest.approx(r.realized_mfdr * r.n_classified / r.n_total, abs=1e-15)
        for rate in (r.realized_mfdr, r.realized_mnpr, r.realized_mfnr):
            assert 0.0 <= rate <= 1.0
        perm = rng.permutation(n)
        assert evaluate(pred[perm], z[perm], (1, 2, 3)) == r


class TestAggregate:
    def test_single(self):
        s = aggregate([report(mfdr=0.04)])["mfdr"]
        assert s.mean == 0.04 and s.sd == 0.0 and not s.sd_defined

    def test_two(self):
        s = aggregate([report(mfdr=0.04), report(mfdr=0.06)])["mfdr"]
        assert s.mean == pytest.approx(0.05, abs=1e-15)
        assert s.sd == pytest.approx(0.014142, abs=1e-6)
        assert s.sd == pytest.approx(np.sqrt(2) / 100, rel=1e-12)

    def test_identical(self):
        s = aggregate([report(mfnr=0.3)] * 100)["mfnr"]
        assert s.median == s.q25 == s.q75 == s.mean == 0.3
        assert s.sd == pytest.approx(0.0, abs=1e-15)

    def test_empty(self):
        with pytest.raises(ValueError):
            aggregate([])
