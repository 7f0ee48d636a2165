import math

import pytest

from core.environment import EpisodeConfig
from core.errors import ConfigError
from core.sac_agent import SacConfig
from core.trajectory import generate_loop
from database import DatabaseManager, TrialsDB
from features.hparam_search import (
    TrialResult, format_ledger_summary, format_table, hparam_search, parse_space, rank_trials, sample_trials,
)
from utils.validators import Choice, LogUniform

SPACE_TEXT = """
# learning rates
lr_actor = log(1e-4, 1e-2)
batch = {4, 8}
hidden = {8, 16}
"""


@pytest.fixture
def ledger(tmp_path):
    manager = DatabaseManager(str(tmp_path / 'trials.db'))
    manager.init_database()
    return TrialsDB(manager)


class TestSpace:
    def test_parse_aliases(self):
        space = parse_space(SPACE_TEXT)
        assert set(space) == {'lr_actor', 'batch_size', 'hidden_dims'}
        assert space['lr_actor'] == LogUniform(1e-4, 1e-2)
        assert space['batch_size'] == Choice((4, 8))

    def test_unknown_setting(self):
        with pytest.raises(ConfigError, match=':1:'):
            parse_space('momentum = {0.9}')

    def test_seed_not_searchable(self):
        with pytest.raises(ConfigError):
            parse_space('seed = {1, 2}')

    def test_alias_duplicate(self):
        with pytest.raises(ConfigError):
            parse_space('tau = {0.01}\nrho = {0.02}')

    def test_hidden_needs_choice(self):
        with pytest.raises(ConfigError):
            parse_space('hidden = uniform(8, 64)')


class TestSampling:
    def test_seeded(self):
        space = parse_space(SPACE_TEXT)
        assert sample_trials(space, 5, seed=9) == sample_trials(space, 5, seed=9)

    def test_choices_cover_every_option(self):
        space = parse_space('batch = {16, 32, 64, 128}')
        drawn = sorted(t['batch_size'] for t in sample_trials(space, 4, seed=1))
        assert drawn == [16, 32, 64, 128]

    def test_coercion(self):
        trial = sample_trials(parse_space(SPACE_TEXT), 1, seed=0)[0]
        assert isinstance(trial['batch_size'], int)
        assert trial['hidden_dims'] in ((8, 8), (16, 16))
        assert 1e-4 <= trial['lr_actor'] <= 1e-2


class TestRanking:
    def test_descending_score(self):
        table = rank_trials([TrialResult(0, {}, 0.1, 100), TrialResult(1, {}, 0.5, 100)])
        assert [r.trial_index for r in table] == [1, 0]

    def test_ties_prefer_fewer_parameters(self):
        table = rank_trials([TrialResult(0, {}, 0.5, 900), TrialResult(1, {}, 0.5, 100)])
        assert [r.trial_index for r in table] == [1, 0]

    def test_ties_then_lower_index(self):
        table = rank_trials([TrialResult(3, {}, 0.5, 100), TrialResult(2, {}, 0.5, 100)])
        assert [r.trial_index for r in table] == [2, 3]

    def test_failures_last(self):
        table = rank_trials([TrialResult(0, {}, float('-inf'), 10, 'TrainingFault'),
                             TrialResult(1, {}, -5.0, 10)])
        assert [r.trial_index for r in table] == [1, 0]
        assert table[1].failed
        assert 'TrainingFault' in format_table(table)


class TestLedger:
    def test_record_and_best(self, ledger):
        ledger.record_trial(7, 0, {'batch_size': 8}, 500, 0.2)
        ledger.record_trial(7, 1, {'batch_size': 16}, 400, 0.4)
        ledger.record_trial(7, 2, {'batch_size': 32}, 300, float('-inf'), 'OptimizerFault')
        trials = ledger.get_trials(7)
        assert [t['trial_index'] for t in trials] == [0, 1, 2]
        assert trials[2]['score'] == float('-inf')
        assert trials[2]['status'] == 'failed'
        assert ledger.get_best(7)['trial_index'] == 1
        assert ledger.get_best(7)['params'] == {'batch_size': 16}

    def test_clear_search(self, ledger):
        ledger.record_trial(1, 0, {}, 10, 0.1)
        ledger.record_trial(2, 0, {}, 10, 0.1)
        assert ledger.clear_search(1) == 1
        assert ledger.get_trials(1) == []
        assert len(ledger.get_trials(2)) == 1

    def test_ledger_summary(self, ledger):
        ledger.record_trial(7, 0, {'batch_size': 8}, 500, 0.2)
        ledger.record_trial(7, 1, {'batch_size': 16}, 400, 0.4)
        ledger.record_trial(7, 2, {'batch_size': 32}, 300, float('-inf'), 'OptimizerFault')
        assert format_ledger_summary(ledger, 7) == 'ledger: 3 trials for seed 7, 1 failed, best trial 1 (score 0.4000)'
        assert format_ledger_summary(ledger, 8) == 'ledger: 0 trials for seed 8, 0 failed'


class TestSearch:
    def test_rejects_infeasible_config(self, genjet):
        config = EpisodeConfig(maneuver=generate_loop(), params=genjet, tau_range=(0.375, 0.375))
        with pytest.raises(ConfigError):
            hparam_search(parse_space(SPACE_TEXT), 2, 10, 0, config)

    def test_rejects_zero_trials(self, hold_config):
        with pytest.raises(ConfigError):
            hparam_search(parse_space(SPACE_TEXT), 0, 10, 0, hold_config)

    @pytest.mark.slow
    def test_small_search(self, hold_config, oracle_env_class, ledger):
        base = SacConfig(buffer_capacity=64, warmup_steps=10, batch_size=4, hidden_dims=(8, 8))
        table, best = hparam_search(parse_space(SPACE_TEXT), 3, 30, 11, hold_config, base_config=base,
                                    eval_episodes=1, ledger=ledger, env_factory=oracle_env_class)
        assert len(table) == 3
        assert all(math.isfinite(r.score) for r in table)
        assert table == rank_trials(table)
        assert best.seed == 11 + table[0].trial_index
        assert best.batch_size == table[0].params['batch_size']
        assert len(ledger.get_trials(11)) == 3

    @pytest.mark.slow
    def test_search_is_reproducible(self, hold_config, oracle_env_class):
        base = SacConfig(buffer_capacity=64, warmup_steps=10, batch_size=4, hidden_dims=(8, 8))
        runs = [hparam_search(parse_space(SPACE_TEXT), 2, 25, 5, hold_config, base_config=base,
                              eval_episodes=1, env_factory=oracle_env_class)[0] for _ in range(2)]
        assert runs[0] == runs[1]
