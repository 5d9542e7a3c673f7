import numpy as np
import pytest

from slidesieve import metrics as mx


def brute_force_auc(scores, truth):
    """Pair-counting oracle: P(pos > neg) + 0.5 P(tie)."""
    pos = [s for s, t in zip(scores, truth) if t]
    neg = [s for s, t in zip(scores, truth) if not t]
    if not pos or not neg:
        return None
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


class TestConfusion:
    def test_hand_count(self):
        c = mx.confusion([1, 0, 0, 0, 1], [1, 1, 0, 0, 0])
        assert (c.tp, c.fn, c.tn, c.fp) == (1, 1, 2, 1)
        assert mx.accuracy(c) == pytest.approx(0.6)
        assert mx.recall(c) == pytest.approx(0.5)
        assert mx.specificity(c) == pytest.approx(2 / 3)
        assert mx.precision(c) == pytest.approx(0.5)

    def test_perfect(self):
        c = mx.confusion([1, 0, 1], [1, 0, 1])
        assert c.fp == 0 and c.fn == 0
        assert mx.accuracy(c) == mx.recall(c) == mx.specificity(c) == mx.precision(c) == 1.0

    def test_all_negative(self):
        c = mx.confusion([0] * 5, [0] * 5)
        assert c.tn == 5
        assert mx.recall(c) is None
        assert mx.precision(c) is None

    def test_length_mismatch(self):
        with pytest.raises(mx.LengthMismatch):
            mx.confusion([1], [1, 0])

    def test_accuracy_integer_identity(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = int(rng.integers(1, 40))
            pred = rng.integers(0, 2, n).astype(bool)
            truth = rng.integers(0, 2, n).astype(bool)
            c = mx.confusion(pred, truth)
            assert mx.accuracy(c) * c.total == pytest.approx(c.tp + c.tn, abs=1e-12)


class TestRocAuc:
    def test_perfect_separation(self):
        assert mx.roc_auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0

    def test_all_ties(self):
        assert mx.roc_auc([0.5] * 6, [1, 0, 1, 0, 1, 0]) == 0.5

    def test_three_quarters(self):
        # brute force over the 4 pairs gives 3 wins / 4
        assert mx.roc_auc([0.8, 0.4, 0.6, 0.2], [1, 1, 0, 0]) == pytest.approx(0.75)

    def test_single_class_returns_none(self):
        assert mx.roc_auc([0.1, 0.2], [1, 1]) is None
        assert mx.roc_auc([0.1, 0.2], [0, 0]) is None

    def test_matches_brute_force(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            n = int(rng.integers(2, 64))
            scores = np.round(rng.random(n), 2)  # coarse grid forces ties
            truth = rng.integers(0, 2, n).astype(bool)
            expected = brute_force_auc(scores.tolist(), truth.tolist())
            got = mx.roc_auc(scores, truth)
            if expected is None:
                assert got is None
            else:
                assert got == pytest.approx(expected, abs=1e-9)

    def test_complement_symmetry(self):
        rng = np.random.default_rng(3)
        scores = rng.random(30)
        truth = rng.integers(0, 2, 30).astype(bool)
        if truth.any() and not truth.all():
            assert mx.roc_auc(scores, truth) == pytest.approx(1 - mx.roc_auc(scores, ~truth), abs=1e-12)

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(4)
        scores = rng.random(25)
        truth = np.array([True] * 10 + [False] * 15)
        assert mx.roc_auc(scores, truth) == pytest.approx(
            mx.roc_auc(np.exp(3 * scores), truth), abs=1e-12
        )


def random_spd(rng, d):
    a = rng.standard_normal((d, d))
    return a @ a.T + 0.1 * np.eye(d)


class TestFrechet:
    def test_identity(self):
        rng = np.random.default_rng(0)
        s = mx.GaussianStats(rng.standard_normal(4), random_spd(rng, 4), n=10)
        assert mx.frechet_distance(s, s) <= 1e-9

    def test_mean_shift_only(self):
        cov = np.array([[1.0, 0.2], [0.2, 2.0]])
        a = mx.GaussianStats(np.zeros(2), cov, n=10)
        b = mx.GaussianStats(np.array([3.0, 4.0]), cov.copy(), n=10)
        assert mx.frechet_distance(a, b) == pytest.approx(25.0, abs=1e-9)

    def test_1d_variance_case(self):
        a = mx.GaussianStats(np.zeros(1), np.array([[1.0]]), n=10)
        b = mx.GaussianStats(np.zeros(1), np.array([[4.0]]), n=10)
        # 1 + 4 - 2*sqrt(4) = 1
        assert mx.frechet_distance(a, b) == pytest.approx(1.0, abs=1e-9)

    def test_symmetry(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            d = int(rng.integers(1, 17))
            a = mx.GaussianStats(rng.standard_normal(d), random_spd(rng, d), n=20)
            b = mx.GaussianStats(rng.standard_normal(d), random_spd(rng, d), n=20)
            assert mx.frechet_distance(a, b) == pytest.approx(mx.frechet_distance(b, a), abs=1e-6)

    def test_commuting_closed_form(self):
        # diagonal covariances commute; FID has an exact elementwise form
        rng = np.random.default_rng(6)
        va = rng.random(5) + 0.1
        vb = rng.random(5) + 0.1
        mu_a, mu_b = rng.standard_normal(5), rng.standard_normal(5)
        a = mx.GaussianStats(mu_a, np.diag(va), n=10)
        b = mx.GaussianStats(mu_b, np.diag(vb), n=10)
        expected = float(np.sum((mu_a - mu_b) ** 2) + np.sum(va + vb - 2 * np.sqrt(va * vb)))
        assert mx.frechet_distance(a, b) == pytest.approx(expected, abs=1e-8)

    def test_dimension_mismatch(self):
        a = mx.GaussianStats(np.zeros(2), np.eye(2), n=5)
        b = mx.GaussianStats(np.zeros(3), np.eye(3), n=5)
        with pytest.raises(mx.DimensionMismatch):
            mx.frechet_distance(a, b)


class TestEstimateStats:
    def test_hand_case(self):
        s = mx.estimate_stats(np.array([[0.0, 0.0], [2.0, 0.0]]))
        assert s.mean == pytest.approx([1.0, 0.0])
        assert s.cov == pytest.approx(np.array([[2.0, 0.0], [0.0, 0.0]]))
        assert s.n == 2

    def test_identical_points_zero_cov(self):
        s = mx.estimate_stats(np.ones((5, 3)))
        assert np.allclose(s.cov, 0.0)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(8)
        x = rng.standard_normal((20, 4))
        perm = rng.permutation(20)
        s1, s2 = mx.estimate_stats(x), mx.estimate_stats(x[perm])
        assert s1.mean == pytest.approx(s2.mean)
        assert s1.cov == pytest.approx(s2.cov)

    def test_too_few_samples(self):
        with pytest.raises(mx.TooFewSamples):
            mx.estimate_stats(np.zeros((1, 3)))


class TestConditionalFid:
    def test_identical_groups_are_zero(self):
        rng = np.random.default_rng(9)
        groups = {"a": rng.standard_normal((12, 3)), "b": rng.standard_normal((12, 3))}
        out = mx.conditional_fid(groups, {k: v.copy() for k, v in groups.items()})
        assert all(v <= 1e-9 for v in out["per_condition"].values())
        assert out["mean"] <= 1e-9

    def test_single_shared_condition(self):
        rng = np.random.default_rng(10)
        gen = {"a": rng.standard_normal((10, 2)), "only_gen": rng.standard_normal((10, 2))}
        ref = {"a": rng.standard_normal((10, 2)) + 1.0}
        out = mx.conditional_fid(gen, ref)
        assert out["mean"] == out["per_condition"]["a"]
        assert out["skipped_conditions"] == ["only_gen"]

    def test_mean_is_average_of_closed_forms(self):
        rng = np.random.default_rng(11)
        gen = {"a": rng.standard_normal((15, 3)), "b": rng.standard_normal((15, 3))}
        ref = {"a": rng.standard_normal((15, 3)) + 2, "b": rng.standard_normal((15, 3)) - 1}
        out = mx.conditional_fid(gen, ref)
        expected = {
            k: mx.frechet_distance(mx.estimate_stats(gen[k]), mx.estimate_stats(ref[k]))
            for k in ("a", "b")
        }
        assert out["per_condition"] == pytest.approx(expected)
        assert out["mean"] == pytest.approx((expected["a"] + expected["b"]) / 2)

    def test_no_shared_conditions(self):
        with pytest.raises(mx.NoSharedConditions):
            mx.conditional_fid({"a": np.zeros((3, 2))}, {"b": np.zeros((3, 2))})
