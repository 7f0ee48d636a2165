"""
File: core/trainer.py
Location: aerobatic_rl/core/trainer.py
Purpose: SAC training loop - warmup, act/store/update, per-episode metrics

Single worker: one environment, one agent, one buffer. Given the same seeds
the metrics stream is identical from run to run.
"""

import logging
import math

import numpy as np

from core.environment import ACTION_SIZE, OBS_SIZE, ManeuverEnv
from core.errors import ConfigError, OptimizerFault, TrainingFault
from core.replay_buffer import ReplayBuffer, Transition
from core.sac_agent import SacAgent

logger = logging.getLogger(__name__)

METRIC_FIELDS = ('step', 'episode', 'return', 'rmse_roll', 'rmse_gamma', 'rmse_yaw', 'rmse_mach',
                 'loss_q1', 'loss_q2', 'loss_pi', 'alpha')

TRACKED = ('roll', 'gamma', 'yaw', 'mach')


class EpisodeTally:
    """Running sums for one training episode"""

    def __init__(self):
        self.reward = 0.0
        self.steps = 0
        self.squared = {name: 0.0 for name in TRACKED}
        self.tracked_steps = 0
        self.losses = []

    def add_step(self, reward, breakdown):
        self.reward += reward
        self.steps += 1
        if breakdown is not None:
            self.tracked_steps += 1
            for name in TRACKED:
                self.squared[name] += breakdown.raw_errors[name] ** 2

    def rmse(self, name):
        if not self.tracked_steps:
            return None
        return math.sqrt(self.squared[name] / self.tracked_steps)

    def mean_loss(self, index):
        if not self.losses:
            return None
        return float(np.mean([loss[index] for loss in self.losses]))


class Trainer:
    """
    Runs SAC against a ManeuverEnv

    Usage:
        trainer = Trainer(ManeuverEnv, sac_config, episode_config)
        agent, metrics = trainer.train(total_steps=50_000, callbacks=[JsonLinesWriter(path)])
    """

    def __init__(self, env_factory, sac_config, episode_config, check_feasible=True):
        self.env_factory = env_factory
        self.sac_config = sac_config
        self.episode_config = episode_config
        self.check_feasible = check_feasible
        self.agent = None
        self.metrics = []

    def _check_feasibility(self):
        report = self.episode_config.feasibility()
        if not report.feasible:
            raise ConfigError(
                f"{self.episode_config.maneuver.kind} at tau {report.tau:g} is not flyable: "
                f"{', '.join(report.violations)}")

    def _emit(self, record, callbacks):
        self.metrics.append(record)
        for callback in callbacks:
            callback(record)

    def train(self, total_steps, callbacks=(), on_fault=None):
        """
        Train for total_steps environment steps

        Args:
            total_steps: environment steps (0 returns the untrained agent)
            callbacks: callables receiving each per-episode metrics record
            on_fault: called as on_fault(agent, metrics_cursor) before a fault propagates,
                typically to save a partial checkpoint

        Returns:
            tuple: (SacAgent, list of metrics records)

        Raises:
            TrainingFault / OptimizerFault: after on_fault has run
        """
        if self.check_feasible:
            self._check_feasibility()

        config = self.sac_config
        self.agent = agent = SacAgent(OBS_SIZE, ACTION_SIZE, config)
        self.metrics = []
        if total_steps <= 0:
            return agent, self.metrics

        env = self.env_factory(self.episode_config)
        buffer = ReplayBuffer(config.buffer_capacity, OBS_SIZE, ACTION_SIZE)

        logger.info(f"🚀 Training {self.episode_config.maneuver.kind} for {total_steps} steps "
                    f"(seed sac={config.seed}, env={self.episode_config.seed})")

        obs, _ = env.reset(seed=self.episode_config.seed)
        tally = EpisodeTally()
        episode = 0

        try:
            for step in range(1, total_steps + 1):
                if step <= config.warmup_steps:
                    action = agent.rng.uniform(-1.0, 1.0, size=ACTION_SIZE)
                else:
                    action, _ = agent.select_action(obs)

                next_obs, reward, terminated, truncated, info = env.step(action)
                # Truncation is a time limit, not a terminal state: keep bootstrapping
                buffer.push(Transition(obs, action, reward, next_obs, terminated))
                tally.add_step(reward, info['breakdown'])

                if step > config.warmup_steps and len(buffer) >= config.batch_size:
                    for _ in range(config.updates_per_step):
                        tally.losses.append(agent.update(buffer.sample(config.batch_size, agent.rng)))

                if terminated or truncated:
                    record = {
                        'step': step,
                        'episode': episode,
                        'return': tally.reward,
                        'rmse_roll': tally.rmse('roll'),
                        'rmse_gamma': tally.rmse('gamma'),
                        'rmse_yaw': tally.rmse('yaw'),
                        'rmse_mach': tally.rmse('mach'),
                        'loss_q1': tally.mean_loss(0),
                        'loss_q2': tally.mean_loss(1),
                        'loss_pi': tally.mean_loss(2),
                        'alpha': agent.alpha,
                    }
                    self._emit(record, callbacks)
                    logger.info(f"Episode {episode}: {tally.steps} steps, return {tally.reward:.3f}, "
                                f"rmse gamma {record['rmse_gamma'] or 0.0:.2f}"
                                + (f", fault in '{info['fault']}'" if info.get('fault') else ''))
                    episode += 1
                    tally = EpisodeTally()
                    obs, _ = env.reset()
                else:
                    obs = next_obs

        except (TrainingFault, OptimizerFault) as e:
            logger.error(f"❌ Training fault at step {step}: {e}", exc_info=True)
            if on_fault:
                on_fault(agent, len(self.metrics))
            raise

        logger.info(f"✅ Training finished: {episode} episodes, final alpha {agent.alpha:.4f}")
        return agent, self.metrics


def train(env_factory, sac_config, episode_config, total_steps, callbacks=(), on_fault=None):
    """Functional entry point around Trainer"""
    trainer = Trainer(env_factory, sac_config, episode_config)
    return trainer.train(total_steps, callbacks, on_fault)


def default_env_factory(episode_config):
    return ManeuverEnv(episode_config)
