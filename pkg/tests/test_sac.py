import ast
import math
import os

import numpy as np
import pytest
from scipy import stats

from core.environment import ACTION_SIZE, OBS_SIZE, EpisodeConfig
from core.errors import ConfigError, ReplayBufferError, TrainingFault
from core.netopt import check_gradients
from core.replay_buffer import ReplayBuffer, Transition
from core.sac_agent import SacAgent, SacConfig, soft_update, squashed_gaussian_log_prob
from core.trainer import METRIC_FIELDS, Trainer
from core.trajectory import generate_loop
from features.checkpoint import read_checkpoint, save_checkpoint


def _transition(value, done=False):
    return Transition(np.full(3, value), np.full(2, value), float(value), np.full(3, value + 1), done)


@pytest.fixture
def agent(tiny_sac):
    return SacAgent(OBS_SIZE, ACTION_SIZE, tiny_sac)


@pytest.fixture
def batch_arrays():
    rng = np.random.default_rng(17)
    obs = rng.uniform(0.0, 1.0, (4, OBS_SIZE))
    actions = rng.uniform(-0.9, 0.9, (4, ACTION_SIZE))
    noise = rng.standard_normal((4, ACTION_SIZE))
    return obs, actions, noise


class TestReplayBuffer:
    def test_evicts_oldest(self):
        buffer = ReplayBuffer(3, 3, 2)
        for value in range(4):
            buffer.push(_transition(value))
        assert len(buffer) == 3
        assert [t.reward for t in buffer.transitions()] == [1.0, 2.0, 3.0]

    def test_sample_shapes(self):
        buffer = ReplayBuffer(10, 3, 2)
        for value in range(5):
            buffer.push(_transition(value, done=value == 4))
        batch = buffer.sample(8, np.random.default_rng(0))
        assert batch.obs.shape == (8, 3)
        assert batch.actions.shape == (8, 2)
        assert set(batch.dones) <= {0.0, 1.0}

    def test_sample_needs_enough_transitions(self):
        buffer = ReplayBuffer(10, 3, 2)
        buffer.push(_transition(0))
        with pytest.raises(ReplayBufferError):
            buffer.sample(2, np.random.default_rng(0))

    def test_capacity_must_be_positive(self):
        with pytest.raises(ReplayBufferError):
            ReplayBuffer(0, 3, 2)

    def test_sampling_is_uniform(self):
        buffer = ReplayBuffer(16, 3, 2)
        for value in range(10):
            buffer.push(_transition(value))
        rng = np.random.default_rng(0)
        drawn = np.concatenate([buffer.sample(100, rng).rewards for _ in range(200)])
        counts = np.bincount(drawn.astype(int), minlength=10)
        assert counts.sum() == 20000
        assert stats.chisquare(counts).pvalue > 1e-3


class TestSacConfig:
    @pytest.mark.parametrize('overrides', [
        {'discount': 1.0},
        {'soft_update_rate': 0.0},
        {'lr_actor': 0.0},
        {'batch_size': 512, 'buffer_capacity': 256},
        {'hidden_dims': ()},
    ])
    def test_rejects(self, overrides):
        with pytest.raises(ConfigError):
            SacConfig(**overrides)

    def test_zero_discount_allowed(self):
        assert SacConfig(discount=0.0).discount == 0.0

    def test_from_mapping_rejects_unknown(self):
        with pytest.raises(ConfigError):
            SacConfig.from_mapping({'learning_rate': 0.1})

    def test_coerces_types(self):
        config = SacConfig(batch_size='32', hidden_dims=['16', '16'])
        assert config.batch_size == 32
        assert config.hidden_dims == (16, 16)


class TestAgent:
    def test_actions_inside_bounds(self, agent):
        obs = np.random.default_rng(0).uniform(0.0, 1.0, OBS_SIZE)
        for _ in range(20):
            action, log_prob = agent.select_action(obs)
            assert np.all(np.abs(action) < 1.0)
            assert math.isfinite(log_prob)

    def test_deterministic_action_repeats(self, agent):
        obs = np.full(OBS_SIZE, 0.5)
        np.testing.assert_array_equal(agent.act(obs), agent.act(obs))

    def test_same_seed_same_networks(self, tiny_sac):
        a = SacAgent(OBS_SIZE, ACTION_SIZE, tiny_sac)
        b = SacAgent(OBS_SIZE, ACTION_SIZE, tiny_sac)
        np.testing.assert_array_equal(a.policy.flat_parameters(), b.policy.flat_parameters())
        np.testing.assert_array_equal(a.q2.flat_parameters(), b.q2.flat_parameters())

    def test_targets_start_as_copies(self, agent):
        np.testing.assert_array_equal(agent.q1.flat_parameters(), agent.q1_target.flat_parameters())

    def test_parameter_count(self, agent):
        policy = 26 * 8 + 8 + 8 * 8 + 8 + 8 * 8 + 8
        critic = 30 * 8 + 8 + 8 * 8 + 8 + 8 * 1 + 1
        assert agent.parameter_count == policy + 2 * critic

    def test_log_prob_matches_change_of_variables(self):
        mean = np.array([[0.3, -0.2]])
        log_std = np.array([[-0.5, 0.1]])
        noise = np.array([[0.7, -1.1]])
        action, pre_tanh, log_prob = squashed_gaussian_log_prob(mean, log_std, noise)
        std = np.exp(log_std)
        gaussian = -0.5 * noise ** 2 - np.log(std) - 0.5 * np.log(2 * np.pi)
        expected = np.sum(gaussian - np.log(1.0 - np.tanh(pre_tanh) ** 2))
        assert log_prob[0] == pytest.approx(expected)
        np.testing.assert_allclose(action, np.tanh(mean + std * noise))

    @pytest.mark.parametrize('mean, log_std', [(0.3, -0.5), (-0.8, 0.2)])
    def test_squashed_density_integrates_to_one(self, mean, log_std):
        actions = np.linspace(-1.0 + 1e-7, 1.0 - 1e-7, 400_001)
        std = math.exp(log_std)
        noise = (np.arctanh(actions) - mean) / std
        _, _, log_prob = squashed_gaussian_log_prob(
            np.full((actions.size, 1), mean), np.full((actions.size, 1), log_std), noise[:, None])
        assert np.trapz(np.exp(log_prob), actions) == pytest.approx(1.0, abs=1e-3)


class TestTargets:
    def test_done_means_reward_only(self, agent, batch_arrays):
        obs, _, noise = batch_arrays
        rewards = np.array([0.1, -0.2, 0.3, 0.4])
        targets = agent.compute_critic_target(obs, rewards, np.ones(4), noise)
        np.testing.assert_allclose(targets, rewards)

    def test_zero_discount_means_reward_only(self, tiny_sac, batch_arrays):
        agent = SacAgent(OBS_SIZE, ACTION_SIZE, SacConfig(**{**tiny_sac.as_dict(), 'discount': 0.0}))
        obs, _, noise = batch_arrays
        rewards = np.array([0.5, 0.6, 0.7, 0.8])
        np.testing.assert_allclose(agent.compute_critic_target(obs, rewards, np.zeros(4), noise), rewards)

    def test_bootstrapped_target(self, tiny_sac, batch_arrays):
        agent = SacAgent(OBS_SIZE, ACTION_SIZE, SacConfig(**{**tiny_sac.as_dict(), 'discount': 0.99}))
        agent.q2_target.set_parameters([p + 0.1 for p in agent.q2_target.parameters()])
        agent.log_alpha = np.array([math.log(0.2)])
        next_obs, _, noise = batch_arrays
        rewards = np.array([0.1, -0.2, 0.3, 0.4])

        head = agent.policy.forward(next_obs)
        mean = head[:, :ACTION_SIZE]
        std = np.exp(np.clip(head[:, ACTION_SIZE:], -20.0, 2.0))
        pre_tanh = mean + std * noise
        next_actions = np.tanh(pre_tanh)
        log_prob = np.sum(stats.norm.logpdf(pre_tanh, mean, std) - np.log(1.0 - next_actions ** 2), axis=1)
        critic_in = np.concatenate([next_obs, next_actions], axis=1)
        q1 = agent.q1_target.forward(critic_in)[:, 0]
        q2 = agent.q2_target.forward(critic_in)[:, 0]
        assert not np.allclose(q1, q2)
        expected = rewards + 0.99 * (np.minimum(q1, q2) - 0.2 * log_prob)

        targets = agent.compute_critic_target(next_obs, rewards, np.zeros(4), noise)
        np.testing.assert_allclose(targets, expected, rtol=1e-12, atol=1e-12)

    def test_soft_update_twice(self, agent):
        online = agent.q1.flat_parameters()
        original_target = agent.q1_target.flat_parameters()
        agent.q1.set_parameters([p + 1.0 for p in agent.q1.parameters()])
        shifted = agent.q1.flat_parameters()
        soft_update(agent, 0.5)
        soft_update(agent, 0.5)
        np.testing.assert_allclose(agent.q1_target.flat_parameters(), 0.75 * shifted + 0.25 * original_target)
        assert not np.allclose(online, shifted)

    def test_soft_update_rejects_rho(self, agent):
        with pytest.raises(ValueError):
            soft_update(agent, 1.5)


class TestGradients:
    def test_critic_gradients(self, agent, batch_arrays):
        obs, actions, _ = batch_arrays
        targets = np.array([0.2, -0.1, 0.4, 0.0])
        _, grads = agent.critic_loss_and_grads(agent.q1, obs, actions, targets)

        def loss():
            return agent.critic_loss_and_grads(agent.q1, obs, actions, targets)[0]

        assert check_gradients(loss, agent.q1.parameters(), grads, tolerance=1e-4).passed

    def test_actor_gradients(self, agent, batch_arrays):
        obs, _, noise = batch_arrays
        _, grads, _ = agent.actor_loss_and_grads(obs, noise)

        def loss():
            return agent.actor_loss_and_grads(obs, noise)[0]

        assert check_gradients(loss, agent.policy.parameters(), grads, tolerance=1e-4).passed

    def test_temperature_gradient(self, agent):
        log_prob = np.array([-1.0, -3.0, -6.0])
        _, grad = agent.temperature_loss_and_grad(log_prob)

        def loss():
            return agent.temperature_loss_and_grad(log_prob)[0]

        assert check_gradients(loss, [agent.log_alpha], [grad], tolerance=1e-6).passed

    def test_update_returns_finite_losses(self, agent, batch_arrays):
        obs, actions, _ = batch_arrays
        buffer = ReplayBuffer(16, OBS_SIZE, ACTION_SIZE)
        for i in range(4):
            buffer.push(Transition(obs[i], actions[i], 0.1 * i, obs[(i + 1) % 4], False))
        alpha_before = agent.alpha
        losses = agent.update(buffer.sample(4, agent.rng))
        assert all(math.isfinite(v) for v in losses)
        assert agent.alpha != alpha_before


class NanRewardEnv:
    """Wraps an env and poisons every reward"""

    def __init__(self, env):
        self.env = env

    def reset(self, **kwargs):
        return self.env.reset(**kwargs)

    def step(self, action):
        return self.env.step(action)._replace(reward=float('nan'))


class TestTrainer:
    def test_emits_one_record_per_episode(self, hold_config, tiny_sac, oracle_env_class):
        seen = []
        agent, metrics = Trainer(oracle_env_class, tiny_sac, hold_config).train(45, callbacks=[seen.append])
        assert len(metrics) == 2
        assert seen == metrics
        assert [m['step'] for m in metrics] == [20, 40]
        assert tuple(metrics[0]) == METRIC_FIELDS
        assert metrics[1]['loss_q1'] is not None

    def test_zero_steps(self, hold_config, tiny_sac, oracle_env_class):
        agent, metrics = Trainer(oracle_env_class, tiny_sac, hold_config).train(0)
        assert metrics == []
        assert isinstance(agent, SacAgent)

    def test_deterministic(self, hold_config, tiny_sac, oracle_env_class):
        _, first = Trainer(oracle_env_class, tiny_sac, hold_config).train(40)
        _, second = Trainer(oracle_env_class, tiny_sac, hold_config).train(40)
        assert first == second

    def test_infeasible_maneuver_rejected(self, genjet, tiny_sac, oracle_env_class):
        config = EpisodeConfig(maneuver=generate_loop(), params=genjet, tau_range=(0.375, 0.375))
        with pytest.raises(ConfigError):
            Trainer(oracle_env_class, tiny_sac, config).train(10)

    def test_fault_runs_callback_before_raising(self, hold_config, tiny_sac, oracle_env_class, tmp_path):
        path = str(tmp_path / 'partial.amrl')
        calls = []

        def factory(config):
            return NanRewardEnv(oracle_env_class(config))

        def save_partial(agent, metrics_cursor):
            calls.append(metrics_cursor)
            save_checkpoint(agent, path, hold_config, metrics_cursor=metrics_cursor)

        trainer = Trainer(factory, tiny_sac, hold_config)
        with pytest.raises(TrainingFault) as excinfo:
            trainer.train(30, on_fault=save_partial)
        assert calls == [len(trainer.metrics)]
        assert excinfo.value.loss_name == 'critic1'
        assert os.path.exists(path)
        assert read_checkpoint(path).maneuver == 'hold'


def test_core_does_not_import_outer_packages():
    core_dir = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'core')
    for name in sorted(os.listdir(core_dir)):
        if not name.endswith('.py'):
            continue
        with open(os.path.join(core_dir, name)) as f:
            tree = ast.parse(f.read())
        imported = [node.module for node in ast.walk(tree) if isinstance(node, ast.ImportFrom) and node.module]
        imported += [alias.name for node in ast.walk(tree) if isinstance(node, ast.Import) for alias in node.names]
        outer = [m for m in imported if m.split('.')[0] in ('features', 'handlers', 'database')]
        assert outer == [], f"{name} imports {outer}"
