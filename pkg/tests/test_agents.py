import numpy as np
import pytest

from glyphgame import nn
from glyphgame.agents import (
    ActMode,
    AgentConfig,
    ReceiverPolicy,
    SenderPolicy,
    receiver_choose,
    sender_contexts,
    sender_log_prob_entropy,
    sender_observe,
    sender_step,
)
from glyphgame.game import GameConfig, SenderMode, Trial, sample_trials
from glyphgame.perception import FeatureVec, generate_synthetic_dataset
from glyphgame.renderer import StrokeCache
from glyphgame.trainer import (
    PPOConfig,
    compute_advantages,
    receiver_loss,
    run_episodes,
    sender_loss,
)

from conftest import check_grads


def fv(values, item, cls=0):
    return FeatureVec(np.array(values, dtype=float), item, cls)


def zero_heads(policy: SenderPolicy):
    for k, t in policy.params.items():
        if k.startswith(("head", "flag")):
            t.data[...] = 0.0


class TestObserve:
    def trial(self):
        t = fv([1, 0], 0)
        d = (fv([0, 1], 1, 1), fv([0, 3], 2, 2))
        return Trial(t, d, (d[0], t, d[1]), 1)

    def test_agnostic_passes_target(self):
        np.testing.assert_array_equal(sender_observe(self.trial(), SenderMode.D_AGNOSTIC), [1, 0])

    def test_aware_hand_example(self):
        np.testing.assert_array_equal(sender_observe(self.trial(), SenderMode.D_AWARE), [1, 0, 0, 2, 0, 3])

    def test_aware_order_invariant(self):
        t = self.trial()
        flipped = Trial(t.target, t.distractors[::-1], t.permuted, t.target_position)
        np.testing.assert_array_equal(sender_observe(t, SenderMode.D_AWARE), sender_observe(flipped, SenderMode.D_AWARE))

    def test_batched_matches_single(self):
        ds = generate_synthetic_dataset(5, 4, 3, 0.1, seed=0)
        from glyphgame.game import trial_from_batch
        trials = sample_trials(ds, GameConfig(feature_dim=3), 10, np.random.default_rng(0))
        for mode in SenderMode:
            ctx = sender_contexts(ds, trials, mode)
            for i in range(10):
                np.testing.assert_array_equal(ctx[i], sender_observe(trial_from_batch(ds, trials, i), mode))


@pytest.fixture
def sender(tiny_agent_config):
    return SenderPolicy(8, 3, SenderMode.D_AWARE, tiny_agent_config, np.random.default_rng(0))


@pytest.fixture
def receiver(tiny_agent_config):
    return ReceiverPolicy(8, 3, tiny_agent_config, np.random.default_rng(1))


class TestSender:
    def test_param_budget(self, sender, receiver):
        assert sender.params.count() <= 1000 and receiver.params.count() <= 1000

    def test_greedy_ties_pick_bin_zero(self, sender):
        zero_heads(sender)
        n = 5
        step = sender_step(sender, np.zeros((n, 8, 8)), sender.initial_state(n), np.ones((n, 9)), None,
                           ActMode.GREEDY, step=0, max_strokes=2)
        assert not step.bins.any() and not step.flag.any()

    def test_sampled_bins_uniform(self):
        cfg = AgentConfig(hidden_dim=4, canvas_width=4, context_width=4, encoder_widths=(4,), bins=8)
        s = SenderPolicy(8, 3, SenderMode.D_AGNOSTIC, cfg, np.random.default_rng(2))
        zero_heads(s)
        n = 10_000
        step = sender_step(s, np.zeros((n, 8, 8)), s.initial_state(n), np.zeros((n, 3)),
                           np.random.default_rng(3), ActMode.SAMPLE, step=0, max_strokes=2)
        for i in range(8):
            freq = np.bincount(step.bins[:, i], minlength=8) / n
            assert np.abs(freq - 1 / 8).max() <= 0.02

    def test_log_prob_is_sum_of_heads(self, sender):
        n = 4
        canvas = np.random.default_rng(4).uniform(size=(n, 8, 8))
        state = sender.initial_state(n)
        ctx = np.random.default_rng(5).normal(size=(n, 9))
        rng = np.random.default_rng(6)
        step = sender_step(sender, canvas, state, ctx, rng, ActMode.SAMPLE, step=0, max_strokes=2)
        out = sender.forward(canvas, state, ctx)
        total = np.zeros(n)
        for i, h in enumerate(out.head_logits):
            total = total + nn.categorical_log_prob(h, step.bins[:, i]).data
        total = total + nn.categorical_log_prob(out.flag_logits, step.flag).data
        assert np.array_equal(step.log_prob, total)
        assert np.all(step.log_prob <= 0) and np.all(np.isfinite(step.log_prob))

    def test_last_step_forced_terminal(self, sender):
        step = sender_step(sender, np.zeros((3, 8, 8)), sender.initial_state(3), np.zeros((3, 9)),
                           np.random.default_rng(0), ActMode.SAMPLE, step=1, max_strokes=2)
        assert np.all(step.flag == 1)

    def test_head_entropies_bounded(self, sender):
        out = sender.forward(np.zeros((2, 8, 8)), sender.initial_state(2), np.zeros((2, 9)))
        for h in out.head_logits:
            e = nn.entropy(h).data
            assert np.all(e >= 0) and np.all(e <= np.log(3) + 1e-12)

    def test_dimension_mismatch(self, sender):
        with pytest.raises(ValueError):
            sender.forward(np.zeros((2, 16, 16)), sender.initial_state(2), np.zeros((2, 9)))
        with pytest.raises(ValueError):
            sender.forward(np.zeros((2, 8, 8)), sender.initial_state(2), np.zeros((2, 3)))

    def test_agnostic_ignores_distractors(self, tiny_agent_config):
        ds = generate_synthetic_dataset(6, 5, 3, 0.1, seed=1)
        game = GameConfig(feature_dim=3, canvas_size=8, sender_mode=SenderMode.D_AGNOSTIC)
        s = SenderPolicy(8, 3, SenderMode.D_AGNOSTIC, tiny_agent_config, np.random.default_rng(0))
        trials = sample_trials(ds, game, 20, np.random.default_rng(1))
        other = sample_trials(ds, game, 20, np.random.default_rng(2))
        other.target = trials.target
        ca, cb = sender_contexts(ds, trials, game.sender_mode), sender_contexts(ds, other, game.sender_mode)
        oa = s.forward(np.zeros((20, 8, 8)), s.initial_state(20), ca)
        ob = s.forward(np.zeros((20, 8, 8)), s.initial_state(20), cb)
        for ha, hb in zip(oa.head_logits, ob.head_logits):
            assert np.array_equal(ha.data, hb.data)


class TestReceiver:
    def test_single_candidate(self, receiver):
        r = receiver_choose(receiver, np.zeros((3, 8, 8)), np.ones((3, 1, 3)), np.random.default_rng(0))
        assert r.choice.tolist() == [0, 0, 0]
        np.testing.assert_array_equal(r.log_prob, 0.0)

    def test_duplicate_candidates_uniform(self, receiver):
        n = 10_000
        C = np.tile(np.array([0.3, -1.0, 2.0]), (n, 3, 1))
        canvas = np.tile(np.random.default_rng(1).uniform(size=(8, 8)), (n, 1, 1))
        r = receiver_choose(receiver, canvas, C, np.random.default_rng(2))
        freq = np.bincount(r.choice, minlength=3) / n
        assert np.abs(freq - 1 / 3).max() <= 0.02

    def test_permutation_equivariance(self, receiver):
        rng = np.random.default_rng(3)
        canvas = rng.uniform(size=(6, 8, 8))
        C = rng.normal(size=(6, 4, 3))
        base, _ = receiver.forward(canvas, C)
        for _ in range(5):
            perm = rng.permutation(4)
            logits, _ = receiver.forward(canvas, C[:, perm])
            assert np.array_equal(logits.data, base.data[:, perm])
            g0 = receiver_choose(receiver, canvas, C, None, ActMode.GREEDY).choice
            g1 = receiver_choose(receiver, canvas, C[:, perm], None, ActMode.GREEDY).choice
            np.testing.assert_array_equal(C[np.arange(6), g0], C[:, perm][np.arange(6), g1])

    def test_zero_candidates_rejected(self, receiver):
        with pytest.raises(ValueError):
            receiver.forward(np.zeros((1, 8, 8)), np.zeros((1, 0, 3)))


def tiny_batch(sender, receiver, n=6):
    ds = generate_synthetic_dataset(4, 3, 3, 0.1, seed=3)
    game = GameConfig(feature_dim=3, canvas_size=8, max_strokes=2)
    trials = sample_trials(ds, game, n, np.random.default_rng(4))
    cache = StrokeCache(8, sender.config.bin_counts)
    batch = run_episodes(ds, game, sender, receiver, trials, np.random.default_rng(5), cache)
    # move the behaviour log-probs off the current policy so ratios sit away from 1
    batch.s_logp = batch.s_logp + np.random.default_rng(6).uniform(-0.1, 0.1, size=batch.s_logp.shape)
    batch.r_logp = batch.r_logp + np.random.default_rng(7).uniform(-0.1, 0.1, size=batch.r_logp.shape)
    return batch


def test_full_sender_loss_gradients(sender, receiver):
    batch = tiny_batch(sender, receiver)
    cfg = PPOConfig(clip_eps=0.5)
    adv = compute_advantages(batch, 1.0, 0.95)
    check_grads(lambda: sender_loss(sender, batch, adv.sender, adv.sender_returns, cfg)[0], sender.params.values())


def test_full_receiver_loss_gradients(sender, receiver):
    batch = tiny_batch(sender, receiver)
    cfg = PPOConfig(clip_eps=0.5)
    adv = compute_advantages(batch, 1.0, 0.95)
    check_grads(lambda: receiver_loss(receiver, batch, adv.receiver, adv.receiver_returns, cfg)[0],
                receiver.params.values())


def test_sender_loss_log_prob_reproduces_rollout(sender, receiver):
    batch = tiny_batch(sender, receiver)
    out = sender.forward(batch.obs[:, 0], sender.initial_state(len(batch)), batch.context)
    lp, _ = sender_log_prob_entropy(out, batch.bins[:, 0], batch.flags[:, 0], True)
    assert np.all(np.isfinite(lp.data))
