import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from glyphgame.game import ConfigError, GameConfig, compute_reward, sample_trial, sample_trials
from glyphgame.perception import generate_synthetic_dataset


@pytest.fixture(scope="module")
def ds10():
    # 10 items, one per class
    return generate_synthetic_dataset(10, 1, 4, 0.1, seed=1)


@pytest.fixture(scope="module")
def ds():
    return generate_synthetic_dataset(10, 20, 4, 0.1, seed=2)


def cfg(**kw):
    kw.setdefault("feature_dim", 4)
    return GameConfig(**kw)


def test_single_candidate_trial(ds10):
    t = sample_trial(ds10, cfg(num_candidates=1, allow_single_candidate=True), np.random.default_rng(0))
    assert t.distractors == () and t.target_position == 0
    assert t.permuted[0].item_id == t.target.item_id


def test_k1_rejected_for_training_configs():
    with pytest.raises(ConfigError):
        cfg(num_candidates=1)


@pytest.mark.parametrize("class_disjoint", [True, False])
def test_three_distinct_items(ds10, class_disjoint):
    rng = np.random.default_rng(3)
    for _ in range(50):
        t = sample_trial(ds10, cfg(num_candidates=3, class_disjoint=class_disjoint), rng)
        ids = [t.target.item_id] + [d.item_id for d in t.distractors]
        assert len(set(ids)) == 3
        assert t.target.item_id not in [d.item_id for d in t.distractors]
        assert sorted(p.item_id for p in t.permuted) == sorted(ids)
        assert t.permuted[t.target_position].item_id == t.target.item_id


def test_target_position_uniform(ds):
    trials = sample_trials(ds, cfg(num_candidates=3), 10_000, np.random.default_rng(4))
    counts = np.bincount(trials.target_position, minlength=3)
    assert stats.chisquare(counts).pvalue > 0.01


def test_class_disjoint_default(ds):
    trials = sample_trials(ds, cfg(num_candidates=3), 500, np.random.default_rng(5))
    classes = ds.class_ids[np.concatenate([trials.target[:, None], trials.distractors], axis=1)]
    assert all(len(set(row)) == 3 for row in classes)


def test_shared_classes_allowed_when_flag_off(ds):
    trials = sample_trials(ds, cfg(num_candidates=3, class_disjoint=False), 2000, np.random.default_rng(6))
    classes = ds.class_ids[np.concatenate([trials.target[:, None], trials.distractors], axis=1)]
    assert any(len(set(row)) < 3 for row in classes)


def test_dataset_too_small():
    tiny = generate_synthetic_dataset(2, 1, 4, 0.0, seed=0)
    with pytest.raises(ConfigError):
        sample_trial(tiny, cfg(num_candidates=3, class_disjoint=False), np.random.default_rng(0))


def test_batch_matches_single_draws(ds):
    a = sample_trials(ds, cfg(), 20, np.random.default_rng(7))
    rng = np.random.default_rng(7)
    for i in range(20):
        t = sample_trial(ds, cfg(), rng)
        assert t.target.item_id == ds.item_ids[a.target[i]]
        assert t.target_position == a.target_position[i]


@given(st.integers(0, 2**32 - 1), st.integers(2, 5), st.booleans())
@settings(max_examples=50, deadline=None)
def test_trial_invariants(seed, k, disjoint):
    ds = generate_synthetic_dataset(6, 3, 4, 0.1, seed=9)
    t = sample_trial(ds, cfg(num_candidates=k, class_disjoint=disjoint), np.random.default_rng(seed))
    cand = sorted([t.target.item_id] + [d.item_id for d in t.distractors])
    assert sorted(p.item_id for p in t.permuted) == cand
    assert len(set(cand)) == k
    assert t.permuted[t.target_position] is not None
    assert t.permuted[t.target_position].item_id == t.target.item_id


class TestReward:
    def test_hit(self):
        assert compute_reward(2, 2, True) == 1

    def test_miss(self):
        assert compute_reward(0, 2, True) == 0

    def test_not_final(self):
        assert compute_reward(2, 2, False) == 0

    def test_vectorized(self):
        np.testing.assert_array_equal(compute_reward(np.array([0, 1, 2]), np.array([0, 0, 2])), [1, 0, 1])

    def test_uniform_random_choice_is_chance(self, ds):
        rng = np.random.default_rng(10)
        for k in (2, 3, 4):
            trials = sample_trials(ds, cfg(num_candidates=k), 10_000, rng)
            choice = rng.integers(0, k, size=10_000)
            assert abs(compute_reward(choice, trials.target_position).mean() - 1 / k) <= 0.02
