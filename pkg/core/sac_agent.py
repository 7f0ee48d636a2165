"""
File: core/sac_agent.py
Location: aerobatic_rl/core/sac_agent.py
Purpose: Soft actor-critic on top of core.netopt

Pieces:
- policy MLP: obs -> (mean, raw log-std) per action dim, log-std clipped to [-20, 2]
- twin critics Q1, Q2: (obs, action) -> value, plus slowly tracking target copies
- temperature alpha, stored as log(alpha)
- one Adam state per trainable block

Actions are tanh-squashed Gaussians; log-probabilities carry the tanh
correction. All gradients are written out by hand against netopt's
backward pass.
"""

import logging
import math
from dataclasses import asdict, dataclass, fields
from typing import NamedTuple

import numpy as np

from core.errors import ConfigError, TrainingFault
from core.netopt import AdamState, Mlp, adam_step

logger = logging.getLogger(__name__)

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
ACTION_BOUND = 1.0 - 1e-9
_HALF_LOG_TWO_PI = 0.5 * math.log(2.0 * math.pi)
_LOG_TWO = math.log(2.0)


@dataclass(frozen=True)
class SacConfig:
    discount: float = 0.99
    soft_update_rate: float = 0.005
    lr_actor: float = 3e-4
    lr_critic: float = 3e-4
    lr_temperature: float = 3e-4
    batch_size: int = 256
    buffer_capacity: int = 100_000
    warmup_steps: int = 1000
    updates_per_step: int = 1
    target_entropy: float = -4.0
    auto_temperature: bool = True
    initial_temperature: float = 0.2
    hidden_dims: tuple = (64, 64)
    seed: int = 0

    def __post_init__(self):
        for name in ('discount', 'soft_update_rate', 'lr_actor', 'lr_critic', 'lr_temperature',
                     'target_entropy', 'initial_temperature'):
            object.__setattr__(self, name, float(getattr(self, name)))
        for name in ('batch_size', 'buffer_capacity', 'warmup_steps', 'updates_per_step', 'seed'):
            object.__setattr__(self, name, int(getattr(self, name)))
        object.__setattr__(self, 'auto_temperature', bool(self.auto_temperature))
        object.__setattr__(self, 'hidden_dims', tuple(int(h) for h in self.hidden_dims))
        if not 0.0 <= self.discount < 1.0:
            raise ConfigError(f"discount must be within [0, 1), got {self.discount}")
        if not 0.0 < self.soft_update_rate <= 1.0:
            raise ConfigError(f"soft_update_rate must be within (0, 1], got {self.soft_update_rate}")
        for name in ('lr_actor', 'lr_critic', 'lr_temperature', 'initial_temperature'):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.batch_size < 1 or self.buffer_capacity < 1:
            raise ConfigError("batch_size and buffer_capacity must be >= 1")
        if self.batch_size > self.buffer_capacity:
            raise ConfigError(f"batch_size {self.batch_size} exceeds buffer_capacity {self.buffer_capacity}")
        if self.warmup_steps < 0 or self.updates_per_step < 0:
            raise ConfigError("warmup_steps and updates_per_step must be >= 0")
        if not self.hidden_dims or any(h < 1 for h in self.hidden_dims):
            raise ConfigError(f"hidden_dims must be positive, got {self.hidden_dims}")

    @classmethod
    def from_mapping(cls, mapping):
        """Build from {field: value}; unknown fields rejected"""
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(mapping) - known)
        if unknown:
            raise ConfigError(f"unknown SAC settings {unknown}")
        return cls(**mapping)

    def as_dict(self):
        record = asdict(self)
        record['hidden_dims'] = list(self.hidden_dims)
        return record


class UpdateLosses(NamedTuple):
    critic1: float
    critic2: float
    actor: float
    temperature: float
    alpha: float


# =============================================================================
# SQUASHED GAUSSIAN
# =============================================================================

def log_one_minus_tanh_sq(u):
    """log(1 - tanh(u)^2), stable for large |u|"""
    return 2.0 * (_LOG_TWO - u - np.logaddexp(0.0, -2.0 * u))


def squashed_gaussian_log_prob(mean, log_std, noise):
    """
    Reparameterized sample a = tanh(mean + exp(log_std) * noise)

    Returns:
        tuple: (action, pre-tanh value, log-probability summed over action dims)
    """
    pre_tanh = mean + np.exp(log_std) * noise
    action = np.tanh(pre_tanh)
    log_prob = np.sum(
        -0.5 * noise * noise - log_std - _HALF_LOG_TWO_PI - log_one_minus_tanh_sq(pre_tanh),
        axis=-1,
    )
    return action, pre_tanh, log_prob


# =============================================================================
# AGENT
# =============================================================================

class SacAgent:
    """
    Soft actor-critic agent

    Usage:
        agent = SacAgent(obs_dim=26, action_dim=4, config=SacConfig(seed=7))
        action, log_prob = agent.select_action(obs)
        losses = agent.update(buffer.sample(256, agent.rng))
    """

    def __init__(self, obs_dim, action_dim, config):
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.config = config

        seeds = np.random.SeedSequence(config.seed).generate_state(4)
        hidden = list(config.hidden_dims)
        self.policy = Mlp.init([obs_dim] + hidden + [2 * action_dim], int(seeds[0]))
        self.q1 = Mlp.init([obs_dim + action_dim] + hidden + [1], int(seeds[1]))
        self.q2 = Mlp.init([obs_dim + action_dim] + hidden + [1], int(seeds[2]))
        self.q1_target = self.q1.copy()
        self.q2_target = self.q2.copy()
        self.log_alpha = np.array([math.log(config.initial_temperature)])
        self.rng = np.random.default_rng(int(seeds[3]))

        self.policy_opt = AdamState.for_params(self.policy.parameters(), config.lr_actor)
        self.q1_opt = AdamState.for_params(self.q1.parameters(), config.lr_critic)
        self.q2_opt = AdamState.for_params(self.q2.parameters(), config.lr_critic)
        self.alpha_opt = AdamState.for_params([self.log_alpha], config.lr_temperature)

    @property
    def alpha(self):
        return float(math.exp(self.log_alpha[0]))

    @property
    def parameter_count(self):
        return self.policy.parameter_count + self.q1.parameter_count + self.q2.parameter_count

    # -------------------------------------------------------------------------
    # acting
    # -------------------------------------------------------------------------

    def _policy_head(self, obs):
        out = self.policy.forward(obs)
        mean = out[:, :self.action_dim]
        log_std = np.clip(out[:, self.action_dim:], LOG_STD_MIN, LOG_STD_MAX)
        return mean, log_std

    def select_action(self, obs, deterministic=False, rng=None):
        """
        Act on one observation

        Returns:
            tuple: (action in (-1, 1)^A, log-probability or None when deterministic)
        """
        mean, log_std = self._policy_head(np.asarray(obs, dtype=np.float64)[None, :])
        if deterministic:
            action = np.tanh(mean)
            log_prob = None
        else:
            noise = (rng or self.rng).standard_normal(mean.shape)
            action, _, log_prob = squashed_gaussian_log_prob(mean, log_std, noise)
            log_prob = float(log_prob[0])
        return np.clip(action[0], -ACTION_BOUND, ACTION_BOUND), log_prob

    def act(self, observation):
        """Deterministic action (evaluation policy)"""
        return self.select_action(observation, deterministic=True)[0]

    # -------------------------------------------------------------------------
    # losses and gradients
    # -------------------------------------------------------------------------

    def compute_critic_target(self, next_obs, rewards, dones, noise):
        """y = r + discount * (1 - done) * (min target Q(s', a') - alpha * log pi(a'|s'))"""
        mean, log_std = self._policy_head(next_obs)
        next_actions, _, next_log_prob = squashed_gaussian_log_prob(mean, log_std, noise)
        critic_in = np.concatenate([next_obs, next_actions], axis=1)
        next_q = np.minimum(self.q1_target.forward(critic_in), self.q2_target.forward(critic_in))[:, 0]
        return rewards + self.config.discount * (1.0 - dones) * (next_q - self.alpha * next_log_prob)

    def critic_loss_and_grads(self, critic, obs, actions, targets):
        """Mean squared error to the targets and its parameter gradients"""
        q, cache = critic.forward_with_cache(np.concatenate([obs, actions], axis=1))
        error = q[:, 0] - targets
        loss = float(np.mean(error * error))
        grads, _ = critic.backward(cache, (2.0 * error / len(error))[:, None])
        return loss, grads

    def actor_loss_and_grads(self, obs, noise):
        """
        mean(alpha * log pi(a|s) - min(Q1, Q2)(s, a)) with a reparameterized by noise

        Returns:
            tuple: (loss, policy gradients, per-row log-probabilities)
        """
        batch = obs.shape[0]
        out, cache = self.policy.forward_with_cache(obs)
        mean = out[:, :self.action_dim]
        raw_log_std = out[:, self.action_dim:]
        log_std = np.clip(raw_log_std, LOG_STD_MIN, LOG_STD_MAX)
        std = np.exp(log_std)
        actions, pre_tanh, log_prob = squashed_gaussian_log_prob(mean, log_std, noise)

        critic_in = np.concatenate([obs, actions], axis=1)
        q1, cache1 = self.q1.forward_with_cache(critic_in)
        q2, cache2 = self.q2.forward_with_cache(critic_in)
        use_q1 = q1[:, 0] <= q2[:, 0]
        q_min = np.where(use_q1, q1[:, 0], q2[:, 0])

        alpha = self.alpha
        loss = float(np.mean(alpha * log_prob - q_min))

        weight1 = use_q1.astype(np.float64)
        _, grad_in1 = self.q1.backward(cache1, (-weight1 / batch)[:, None])
        _, grad_in2 = self.q2.backward(cache2, (-(1.0 - weight1) / batch)[:, None])
        d_action = (grad_in1 + grad_in2)[:, self.obs_dim:]

        d_pre_tanh = d_action * (1.0 - np.tanh(pre_tanh) ** 2)
        d_mean = alpha * 2.0 * actions / batch + d_pre_tanh
        d_log_std = alpha * (-1.0 + 2.0 * actions * std * noise) / batch + d_pre_tanh * std * noise
        inside = (raw_log_std > LOG_STD_MIN) & (raw_log_std < LOG_STD_MAX)
        d_raw = np.where(inside, d_log_std, 0.0)

        grads, _ = self.policy.backward(cache, np.concatenate([d_mean, d_raw], axis=1))
        return loss, grads, log_prob

    def temperature_loss_and_grad(self, log_prob):
        """-alpha * mean(log pi + target_entropy), gradient w.r.t. log(alpha)"""
        alpha = self.alpha
        gap = float(np.mean(log_prob + self.config.target_entropy))
        loss = -alpha * gap
        return loss, np.array([-alpha * gap])

    # -------------------------------------------------------------------------
    # update
    # -------------------------------------------------------------------------

    def update(self, batch):
        """
        One gradient step on critics, actor and temperature, then target tracking

        Raises:
            TrainingFault: a loss became NaN/Inf (names the loss)
        """
        config = self.config
        size = len(batch.rewards)

        next_noise = self.rng.standard_normal((size, self.action_dim))
        targets = self.compute_critic_target(batch.next_obs, batch.rewards, batch.dones, next_noise)

        loss_q1, grads_q1 = self.critic_loss_and_grads(self.q1, batch.obs, batch.actions, targets)
        _check_finite('critic1', loss_q1)
        loss_q2, grads_q2 = self.critic_loss_and_grads(self.q2, batch.obs, batch.actions, targets)
        _check_finite('critic2', loss_q2)
        self.q1.set_parameters(adam_step(self.q1_opt, self.q1.parameters(), grads_q1))
        self.q2.set_parameters(adam_step(self.q2_opt, self.q2.parameters(), grads_q2))

        noise = self.rng.standard_normal((size, self.action_dim))
        loss_pi, grads_pi, log_prob = self.actor_loss_and_grads(batch.obs, noise)
        _check_finite('actor', loss_pi)
        self.policy.set_parameters(adam_step(self.policy_opt, self.policy.parameters(), grads_pi))

        loss_alpha, grad_alpha = self.temperature_loss_and_grad(log_prob)
        _check_finite('temperature', loss_alpha)
        if config.auto_temperature:
            self.log_alpha = adam_step(self.alpha_opt, [self.log_alpha], [grad_alpha])[0]

        soft_update(self, config.soft_update_rate)
        return UpdateLosses(loss_q1, loss_q2, loss_pi, loss_alpha, self.alpha)


def _check_finite(name, value):
    if not math.isfinite(value):
        raise TrainingFault(name, value)


def soft_update(agent, rho):
    """theta' <- rho * theta + (1 - rho) * theta' for both target critics"""
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must be within [0, 1], got {rho}")
    for target, source in ((agent.q1_target, agent.q1), (agent.q2_target, agent.q2)):
        target.set_parameters([
            rho * s + (1.0 - rho) * t
            for s, t in zip(source.parameters(), target.parameters())
        ])
