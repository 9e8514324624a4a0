import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from softprune import (
    DataCorruptionError,
    InvalidArgumentError,
    OutOfRangeError,
    PrunePolicy,
    ScoreTable,
    TierSpec,
    dynamic_random_plan,
    expected_kept_fraction,
    mean_threshold,
    new_score_table,
    plan_epoch,
    quantile,
    reconstruct_mixup_scores,
    static_hard_plan,
    update_scores,
)

from oracles import naive_sum_mean, sort_quantile, sort_top_fraction

POLICY = PrunePolicy(kind="info_batch", r=0.5, delta=0.875, total_epochs=80)


class TestScoreTable:
    def test_fresh_table_is_all_ones(self):
        t = new_score_table(3)
        assert t.scores.tolist() == [1.0, 1.0, 1.0]
        assert t.epoch == 0

    def test_smallest_table(self):
        assert new_score_table(1).scores.tolist() == [1.0]

    def test_large_table_constant_fill(self):
        t = new_score_table(10**6)
        assert t.size == 10**6
        assert (t.scores == 1.0).all()

    def test_zero_size_rejected(self):
        with pytest.raises(InvalidArgumentError):
            new_score_table(0)


class TestMeanThreshold:
    def test_constant_vector(self):
        assert mean_threshold(new_score_table(3)) == 1.0

    def test_symmetric_values(self):
        t = ScoreTable(scores=np.array([0.2, 0.4, 0.6, 0.8]), epoch=0)
        assert mean_threshold(t) == pytest.approx(0.5, abs=1e-15)

    def test_matches_naive_sum_oracle(self):
        rng = np.random.default_rng(11)
        scores = rng.random(10**6)
        got = mean_threshold(ScoreTable(scores=scores, epoch=0))
        assert got == pytest.approx(naive_sum_mean(scores), rel=1e-9)

    def test_nonfinite_score_is_corruption(self):
        t = ScoreTable(scores=np.array([1.0, np.nan]), epoch=0)
        with pytest.raises(DataCorruptionError):
            mean_threshold(t)


class TestPlanEpoch:
    def test_zero_prune_probability_keeps_everything(self):
        t = ScoreTable(scores=np.random.default_rng(0).random(50), epoch=1)
        policy = PrunePolicy(kind="info_batch", r=0.0, delta=0.875, total_epochs=80)
        plan = plan_epoch(t, policy, seed=3)
        assert plan.kept_ids.tolist() == list(range(50))
        assert (plan.weights == 1.0).all()

    def test_annealing_epoch_keeps_everything(self):
        # delta*C = 70; epoch 70 is in the annealing window
        t = ScoreTable(scores=np.random.default_rng(1).random(100), epoch=70)
        plan = plan_epoch(t, POLICY, seed=5)
        assert plan.kept_ratio == 1.0
        assert (plan.weights == 1.0).all()

    def test_bimodal_scores_weights_and_kept_count(self):
        scores = np.concatenate([np.full(50, 0.1), np.full(50, 1.0)])
        kept_counts = []
        for seed in range(10_000):
            t = ScoreTable(scores=scores.copy(), epoch=1)
            plan = plan_epoch(t, POLICY, seed=seed)
            assert plan.threshold == pytest.approx(0.55)
            low = plan.kept_ids < 50
            assert (plan.weights[low] == 2.0).all()
            assert (plan.weights[~low] == 1.0).all()
            kept_counts.append(plan.kept_ids.size)
        # 50 always-kept + Binomial(50, 0.5): mean 75
        assert np.mean(kept_counts) == pytest.approx(75.0, abs=1.0)

    def test_fresh_table_prunes_nothing(self):
        t = new_score_table(64)
        plan = plan_epoch(t, POLICY, seed=9)
        assert plan.kept_ids.size == 64
        assert (plan.weights == 1.0).all()

    def test_bit_identical_determinism(self):
        scores = np.random.default_rng(2).random(200)
        plans = [
            plan_epoch(ScoreTable(scores=scores.copy(), epoch=3), POLICY, seed=77)
            for _ in range(2)
        ]
        assert np.array_equal(plans[0].kept_ids, plans[1].kept_ids)
        assert np.array_equal(plans[0].weights, plans[1].weights)
        assert plans[0].threshold == plans[1].threshold

    def test_epoch_out_of_range(self):
        t = ScoreTable(scores=np.ones(4), epoch=80)
        with pytest.raises(OutOfRangeError):
            plan_epoch(t, POLICY, seed=0)

    def test_global_rescale_mode_uniform_weights(self):
        scores = np.concatenate([np.full(50, 0.1), np.full(50, 1.0)])
        policy = PrunePolicy(
            kind="info_batch", r=0.5, delta=0.875, total_epochs=80, rescale_mode="global"
        )
        plan = plan_epoch(ScoreTable(scores=scores, epoch=1), policy, seed=4)
        assert np.allclose(plan.weights, 100 / plan.kept_ids.size)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32), st.integers(2, 120))
    def test_weight_identity_property(self, seed, n):
        rng = np.random.default_rng(seed)
        scores = rng.random(n) * 3
        policy = PrunePolicy(
            kind="info_batch", r=0.5, delta=0.875, total_epochs=80,
            tier=TierSpec(quantile=0.2, r_aggressive=0.75),
        )
        t = ScoreTable(scores=scores, epoch=1)
        plan = plan_epoch(t, policy, seed=seed)
        thr = plan.threshold
        boundary = quantile(scores, 0.2)
        for sid, w in zip(plan.kept_ids, plan.weights):
            s = scores[sid]
            if s >= thr:
                assert w == 1.0
            elif s <= boundary:
                assert w == 1.0 / (1.0 - 0.75)
            else:
                assert w == 1.0 / (1.0 - 0.5)

    def test_no_sort_reachable_from_planner(self, monkeypatch):
        def boom(*a, **k):
            raise AssertionError("comparison sort invoked in planner path")

        monkeypatch.setattr(np, "sort", boom)
        monkeypatch.setattr(np, "argsort", boom)
        monkeypatch.setattr(np, "lexsort", boom)
        scores = np.random.default_rng(3).random(1000)
        policy = PrunePolicy(
            kind="info_batch", r=0.5, delta=0.875, total_epochs=80,
            tier=TierSpec(quantile=0.2, r_aggressive=0.75),
        )
        t = ScoreTable(scores=scores, epoch=1)
        mean_threshold(t)
        plan_epoch(t, policy, seed=1)

    def test_planning_time_grows_linearly(self):
        import time

        def planning_time(n):
            scores = np.random.default_rng(5).random(n)
            t = ScoreTable(scores=scores, epoch=1)
            times = []
            for rep in range(9):
                t0 = time.perf_counter()
                plan_epoch(t, POLICY, seed=rep)
                times.append(time.perf_counter() - t0)
            return min(times)

        small = planning_time(10**5)
        big = min(planning_time(10**6) for _ in range(3))
        # 10x the data should cost far less than sorting's n log n blowup;
        # generous slack absorbs allocator and timer noise
        assert big <= 20 * small


class TestUpdateScores:
    def _planned(self, scores, seed=0):
        t = ScoreTable(scores=np.asarray(scores, dtype=float), epoch=1)
        return t, plan_epoch(t, POLICY, seed=seed)

    def test_pruned_sample_keeps_old_score(self):
        scores = np.concatenate([np.full(8, 0.42), np.full(8, 2.0)])
        t, plan = self._planned(scores, seed=12)
        pruned = sorted(set(range(16)) - set(plan.kept_ids.tolist()))
        assert pruned, "seed must prune something for this test"
        update_scores(t, plan, np.full(plan.kept_ids.size, 0.9))
        for sid in pruned:
            assert t.scores[sid] == 0.42

    def test_kept_sample_gets_latest_loss(self):
        t = new_score_table(5)
        plan = plan_epoch(t, POLICY, seed=0)
        losses = np.array([0.5, 0.4, 0.37, 0.2, 0.1])
        update_scores(t, plan, losses)
        assert t.scores[2] == 0.37
        assert t.epoch == 1

    def test_identity_plan_copies_loss_vector(self):
        t = new_score_table(32)
        plan = plan_epoch(t, POLICY, seed=1)  # fresh table: identity
        losses = np.random.default_rng(8).random(32)
        update_scores(t, plan, losses)
        assert np.array_equal(t.scores, losses)

    def test_length_mismatch(self):
        t = new_score_table(4)
        plan = plan_epoch(t, POLICY, seed=0)
        with pytest.raises(InvalidArgumentError):
            update_scores(t, plan, np.ones(3))

    def test_nan_loss_names_sample_id(self):
        t = new_score_table(4)
        plan = plan_epoch(t, POLICY, seed=0)
        losses = np.array([0.1, np.nan, 0.2, 0.3])
        with pytest.raises(DataCorruptionError, match="sample id 1"):
            update_scores(t, plan, losses)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32))
    def test_pruned_scores_persist_elementwise(self, seed):
        rng = np.random.default_rng(seed)
        scores = rng.random(60) * 2
        t = ScoreTable(scores=scores.copy(), epoch=1)
        plan = plan_epoch(t, POLICY, seed=seed)
        update_scores(t, plan, rng.random(plan.kept_ids.size))
        pruned = np.setdiff1d(np.arange(60), plan.kept_ids)
        assert np.array_equal(t.scores[pruned], scores[pruned])


class TestStaticHardPlan:
    def test_keep_everything_is_identity(self):
        plan = static_hard_plan(np.array([0.5, 0.1, 0.9]), 1.0)
        assert plan.kept_ids.tolist() == [0, 1, 2]
        assert (plan.weights == 1.0).all()

    def test_top_two_by_score(self):
        plan = static_hard_plan(np.array([3.0, 1.0, 2.0]), 2 / 3)
        assert plan.kept_ids.tolist() == [0, 2]

    def test_matches_sort_oracle(self):
        rng = np.random.default_rng(17)
        scores = rng.random(501)
        plan = static_hard_plan(scores, 0.5)
        assert plan.kept_ids.tolist() == sort_top_fraction(scores.tolist(), 0.5)

    def test_nonpositive_fraction_rejected(self):
        with pytest.raises(InvalidArgumentError):
            static_hard_plan(np.ones(3), 0.0)


class TestDynamicRandomPlan:
    def test_keep_prob_one_is_identity(self):
        plan = dynamic_random_plan(10, 1.0, 0, 0)
        assert plan.kept_ids.tolist() == list(range(10))

    def test_binomial_mean_kept_count(self):
        counts = [dynamic_random_plan(10**4, 0.7, 0, seed).kept_ids.size for seed in range(1000)]
        assert np.mean(counts) == pytest.approx(7000, abs=50)

    def test_determinism(self):
        a = dynamic_random_plan(1000, 0.7, 3, 42)
        b = dynamic_random_plan(1000, 0.7, 3, 42)
        assert np.array_equal(a.kept_ids, b.kept_ids)


class TestQuantile:
    def test_median_of_three(self):
        assert quantile(np.array([1.0, 2.0, 3.0]), 0.5) == 2.0

    def test_q_zero_is_minimum(self):
        assert quantile(np.array([4.0, 2.0, 9.0]), 0.0) == 2.0

    def test_matches_sort_oracle(self):
        rng = np.random.default_rng(23)
        values = rng.random(10**5)
        for q in (0.2, 0.5, 0.9, 1.0):
            assert quantile(values, q) == sort_quantile(values, q)

    def test_empty_rejected(self):
        with pytest.raises(InvalidArgumentError):
            quantile(np.array([]), 0.5)


class TestExpectedKeptFraction:
    def test_equal_scores_keep_all(self):
        assert expected_kept_fraction(np.ones(10), POLICY) == 1.0

    def test_half_below_mean(self):
        scores = np.concatenate([np.full(50, 0.1), np.full(50, 1.0)])
        assert expected_kept_fraction(scores, POLICY) == pytest.approx(0.75)


class TestMixupScores:
    def _perfect_batch(self, rng, b=12, k=5, alpha=0.3):
        half = rng.integers(0, k, b // 2)
        other = (half + rng.integers(1, k, b // 2)) % k
        labels = np.concatenate([half, other[::-1]])
        probs = np.zeros((b, k))
        probs[np.arange(b), labels] = alpha
        probs[np.arange(b), labels[::-1]] += 1.0 - alpha
        return probs, labels

    def test_perfect_prediction_identity(self):
        probs, labels = self._perfect_batch(np.random.default_rng(4))
        scores = reconstruct_mixup_scores(probs, labels, 0.3)
        assert np.allclose(scores, 1.0, atol=1e-12)

    def test_alpha_one_direct_substitution(self):
        rng = np.random.default_rng(5)
        probs = rng.random((6, 4))
        probs /= probs.sum(axis=1, keepdims=True)
        labels = rng.integers(0, 4, 6)
        scores = reconstruct_mixup_scores(probs, labels, 1.0)
        for i in range(6):
            assert scores[i] == probs[i, labels[i]] + probs[5 - i, labels[i]]

    def test_random_batch_matches_direct_formula(self):
        rng = np.random.default_rng(6)
        probs = rng.random((20, 7))
        probs /= probs.sum(axis=1, keepdims=True)
        labels = rng.integers(0, 7, 20)
        got = reconstruct_mixup_scores(probs, labels, 0.4)
        want = np.array([probs[i, labels[i]] + probs[19 - i, labels[i]] for i in range(20)])
        assert np.array_equal(got, want)

    def test_odd_batch_rejected(self):
        probs = np.full((3, 2), 0.5)
        with pytest.raises(InvalidArgumentError):
            reconstruct_mixup_scores(probs, np.zeros(3, dtype=int), 0.5)

    def test_unnormalized_probabilities_rejected(self):
        probs = np.full((2, 2), 0.6)
        with pytest.raises(DataCorruptionError):
            reconstruct_mixup_scores(probs, np.zeros(2, dtype=int), 0.5)


class TestPolicyValidation:
    def test_tier_must_be_more_aggressive(self):
        with pytest.raises(InvalidArgumentError):
            PrunePolicy(
                kind="info_batch", r=0.5, delta=0.875, total_epochs=10,
                tier=TierSpec(quantile=0.2, r_aggressive=0.25),
            )

    def test_unknown_kind_rejected(self):
        with pytest.raises(InvalidArgumentError):
            PrunePolicy(kind="magic")
