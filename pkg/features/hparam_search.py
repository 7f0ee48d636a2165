"""
File: features/hparam_search.py
Location: aerobatic_rl/features/hparam_search.py
Purpose: Seeded random search over SAC hyper-parameters

Each trial trains for a fixed step budget and is scored by the mean return
of deterministic evaluation episodes. A trial that faults is recorded as
failed (score -inf) and the search moves on.
"""

import logging
import math
from dataclasses import fields, replace
from typing import NamedTuple

import numpy as np

from config import settings
from core.environment import ACTION_SIZE, OBS_SIZE, ManeuverEnv
from core.errors import AmrlError, ConfigError
from core.sac_agent import SacConfig
from core.trainer import Trainer
from features.evaluation import evaluate, summarize
from utils.validators import Choice, parse_key_value_lines, parse_space_value

logger = logging.getLogger(__name__)

# Short names accepted in space files
ALIASES = {
    'batch': 'batch_size',
    'hidden': 'hidden_dims',
    'gamma': 'discount',
    'tau': 'soft_update_rate',
    'rho': 'soft_update_rate',
}

_NOT_SEARCHABLE = ('seed',)


class TrialResult(NamedTuple):
    trial_index: int
    params: dict
    score: float
    n_parameters: int
    fault: str = None

    @property
    def failed(self):
        return self.fault is not None or not math.isfinite(self.score)


def parse_space(text, source='<space>'):
    """
    Parse a search-space file

    Example:
        lr_actor = log(1e-5, 1e-2)
        batch = {64,128,256}
        hidden = {64,128}          # one width, used for both hidden layers

    Returns:
        dict: SacConfig field name -> LogUniform / Uniform / Choice
    """
    searchable = {f.name for f in fields(SacConfig)} - set(_NOT_SEARCHABLE)
    space = {}
    for line_number, key, value in parse_key_value_lines(text, source):
        name = ALIASES.get(key, key)
        if name not in searchable:
            raise ConfigError(f"{source}:{line_number}: '{key}' is not a searchable SAC setting")
        if name in space:
            raise ConfigError(f"{source}:{line_number}: '{key}' duplicates '{name}'")
        try:
            space[name] = parse_space_value(value)
        except ConfigError as e:
            raise ConfigError(f"{source}:{line_number}: {e}")
        if name == 'hidden_dims' and not isinstance(space[name], Choice):
            raise ConfigError(f"{source}:{line_number}: hidden sizes need a choice set")
    return space


def load_space(path):
    with open(path, encoding='utf-8') as f:
        return parse_space(f.read(), source=path)


def _coerce(name, value):
    if name == 'hidden_dims':
        if isinstance(value, (int, float)):
            width = int(value)
            return (width, width)
        return tuple(int(v) for v in value)
    if name in ('batch_size', 'buffer_capacity', 'warmup_steps', 'updates_per_step'):
        return int(round(value))
    if name == 'auto_temperature':
        return bool(value)
    return float(value)


def sample_trials(space, trials, seed):
    """
    Draw `trials` parameter sets

    Continuous ranges are sampled from a Generator seeded with `seed`; choice
    sets are cycled through a seeded permutation so that n trials over an
    n-option set cover every option.
    """
    rng = np.random.default_rng(seed)
    names = sorted(space)
    orders = {name: rng.permutation(len(space[name].options))
              for name in names if isinstance(space[name], Choice)}

    drawn = []
    for index in range(trials):
        params = {}
        for name in names:
            rule = space[name]
            if isinstance(rule, Choice):
                order = orders[name]
                value = rule.options[int(order[index % len(order)])]
            else:
                value = rule.sample(rng)
            params[name] = _coerce(name, value)
        drawn.append(params)
    return drawn


def rank_trials(results):
    """Descending score; ties go to fewer parameters, then lower trial index"""
    def key(result):
        score = result.score if math.isfinite(result.score) else float('-inf')
        return (-score, result.n_parameters, result.trial_index)
    return sorted(results, key=key)


def _parameter_count(config):
    hidden = list(config.hidden_dims)
    policy = [OBS_SIZE] + hidden + [2 * ACTION_SIZE]
    critic = [OBS_SIZE + ACTION_SIZE] + hidden + [1]

    def count(dims):
        return sum(a * b + b for a, b in zip(dims[:-1], dims[1:]))
    return count(policy) + 2 * count(critic)


def run_trial(index, params, base_config, episode_config, budget_steps, seed, eval_episodes,
              env_factory=ManeuverEnv):
    """Train + evaluate one parameter set; AmrlError becomes a failed TrialResult"""
    try:
        config = replace(base_config, seed=seed + index, **params)
    except (ConfigError, TypeError, ValueError) as e:
        logger.warning(f"⚠️ Trial {index}: invalid parameters {params}: {e}")
        return TrialResult(index, params, float('-inf'), 0, type(e).__name__)

    n_parameters = _parameter_count(config)
    try:
        trainer = Trainer(env_factory, config, episode_config, check_feasible=False)
        agent, _ = trainer.train(budget_steps)
        reports = evaluate(agent, episode_config, eval_episodes, episode_config.seed, env_factory=env_factory)
        score = summarize(reports)['return']
    except AmrlError as e:
        logger.warning(f"⚠️ Trial {index} failed with {type(e).__name__}: {e}")
        return TrialResult(index, params, float('-inf'), n_parameters, type(e).__name__)

    if not math.isfinite(score):
        return TrialResult(index, params, float('-inf'), n_parameters, 'NonFiniteScore')
    logger.info(f"✅ Trial {index}: score {score:.4f} ({n_parameters} parameters) {params}")
    return TrialResult(index, params, float(score), n_parameters)


def hparam_search(space, trials, budget_steps, seed, episode_config, base_config=None,
                  eval_episodes=None, ledger=None, env_factory=ManeuverEnv):
    """
    Seeded random search

    Args:
        space: parsed space (parse_space)
        trials: number of trials
        budget_steps: training steps per trial
        seed: search seed (parameter draws and per-trial SAC seeds)
        episode_config: EpisodeConfig every trial trains and evaluates on
        base_config: SacConfig providing the values not searched over
        ledger: optional TrialsDB; every trial is recorded

    Returns:
        tuple: (ranked list of TrialResult, best SacConfig or None when all failed)
    """
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    base_config = base_config or SacConfig()
    eval_episodes = settings.HPARAM_EVAL_EPISODES if eval_episodes is None else eval_episodes

    report = episode_config.feasibility()
    if not report.feasible:
        raise ConfigError(f"{episode_config.maneuver.kind} is not flyable at tau {report.tau:g}: "
                          f"{', '.join(report.violations)}")

    logger.info(f"🔎 Random search: {trials} trials x {budget_steps} steps over {sorted(space)} (seed {seed})")
    if ledger is not None:
        ledger.clear_search(seed)

    results = []
    for index, params in enumerate(sample_trials(space, trials, seed)):
        result = run_trial(index, params, base_config, episode_config, budget_steps, seed,
                           eval_episodes, env_factory)
        results.append(result)
        if ledger is not None:
            ledger.record_trial(seed, index, _jsonable(params), result.n_parameters, result.score, result.fault)

    table = rank_trials(results)
    best = next((r for r in table if not r.failed), None)
    if best is None:
        logger.error("❌ Every trial failed")
        return table, None
    logger.info(f"🏆 Best trial {best.trial_index}: score {best.score:.4f}")
    return table, replace(base_config, seed=seed + best.trial_index, **best.params)


def _jsonable(params):
    return {k: list(v) if isinstance(v, tuple) else v for k, v in params.items()}


def format_table(table):
    """Plain-text ranking"""
    lines = ['rank  trial  score        params    status  settings']
    for rank, result in enumerate(table, 1):
        status = result.fault or 'ok'
        settings_text = ', '.join(f'{k}={v}' for k, v in sorted(result.params.items()))
        lines.append(f"{rank:<5} {result.trial_index:<6} {result.score:<12.4f} "
                     f"{result.n_parameters:<9} {status:<7} {settings_text}")
    return '\n'.join(lines)


def format_ledger_summary(ledger, search_seed):
    """One line on what the trial ledger holds for a search"""
    trials = ledger.get_trials(search_seed)
    failed = sum(1 for t in trials if t['status'] != 'ok')
    line = f"ledger: {len(trials)} trials for seed {search_seed}, {failed} failed"
    best = ledger.get_best(search_seed)
    if best is not None:
        line += f", best trial {best['trial_index']} (score {best['score']:.4f})"
    return line
