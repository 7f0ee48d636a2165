import csv
import json
import os
import struct

import numpy as np
import pytest

from features.checkpoint import load_checkpoint
from handlers.cli import EXIT_FAULT, EXIT_OK, EXIT_USAGE, run

TINY_RUN = """
env.maneuver = hold
traj.duration_s = 1.0
sac.batch_size = 8
sac.buffer_capacity = 64
sac.warmup_steps = 10
sac.hidden_dims = 8, 8
eval.episodes = 1
"""


class TestUsage:
    def test_no_arguments(self, capsys):
        assert run([]) == EXIT_USAGE
        assert 'command is required' in capsys.readouterr().err

    def test_unknown_flag(self):
        assert run(['gen-traj', '--maneuver', 'loop', '--wings', '2']) == EXIT_USAGE

    def test_unknown_maneuver(self):
        assert run(['gen-traj', '--maneuver', 'spin', '--out', 'x.csv']) == EXIT_USAGE

    def test_out_required(self):
        assert run(['gen-traj', '--maneuver', 'loop']) == EXIT_USAGE

    def test_argument_not_used_by_maneuver(self, tmp_path):
        out = str(tmp_path / 'loop.csv')
        assert run(['gen-traj', '--maneuver', 'loop', '--roll-fraction', '0.5', '--out', out]) == EXIT_USAGE
        assert not os.path.exists(out)

    def test_help(self, capsys):
        assert run(['--help']) == EXIT_OK


class TestGenTraj:
    def test_loop_csv(self, tmp_path, capsys):
        out = tmp_path / 'loop.csv'
        assert run(['gen-traj', '--maneuver', 'loop', '--duration', '40', '--out', str(out)]) == EXIT_OK
        with open(out, newline='') as f:
            rows = list(csv.reader(f))
        assert len(rows) == 402
        assert '401 points' in capsys.readouterr().out

    def test_noise_is_seeded(self, tmp_path):
        paths = [tmp_path / 'a.csv', tmp_path / 'b.csv']
        for path in paths:
            run(['gen-traj', '--maneuver', 'hold', '--noise', '1.0', '--noise-seed', '4', '--out', str(path)])
        assert paths[0].read_bytes() == paths[1].read_bytes()


class TestFeasibility:
    def test_fast_loop_is_infeasible(self, capsys):
        assert run(['feasibility', '--maneuver', 'loop', '--tau', '0.375']) == EXIT_OK
        assert capsys.readouterr().out.startswith('infeasible')

    def test_report_file(self, tmp_path):
        out = tmp_path / 'report.txt'
        assert run(['feasibility', '--maneuver', 'loop', '--out', str(out)]) == EXIT_OK
        assert out.read_text().startswith('feasible')


class TestFaults:
    def test_missing_trajectory_file(self, tmp_path):
        assert run(['feasibility', '--traj', str(tmp_path / 'absent.csv')]) == EXIT_FAULT

    def test_missing_config(self, tmp_path):
        assert run(['feasibility', '--config', str(tmp_path / 'absent.cfg')]) == EXIT_FAULT

    def test_bad_config_key(self, tmp_path):
        config = tmp_path / 'bad.cfg'
        config.write_text('env.wings = 2\n')
        assert run(['feasibility', '--config', str(config)]) == EXIT_FAULT

    def test_export_without_traces(self, tmp_path):
        assert run(['export', '--out', str(tmp_path)]) == EXIT_FAULT

    def test_bad_checkpoint(self, tmp_path):
        checkpoint = tmp_path / 'junk.amrl'
        checkpoint.write_bytes(b'junk')
        out = str(tmp_path / 'run')
        assert run(['eval', '--checkpoint', str(checkpoint), '--out', out]) == EXIT_FAULT

    def test_checkpoint_header_missing_fields(self, tmp_path, capsys):
        checkpoint = tmp_path / 'bare.amrl'
        header = json.dumps({'format_version': 1, 'observation_layout': 'OBS-26-v1'}).encode('utf-8')
        checkpoint.write_bytes(b'AMRL1' + struct.pack('<I', len(header)) + header)
        out = str(tmp_path / 'run')
        assert run(['eval', '--checkpoint', str(checkpoint), '--out', out]) == EXIT_FAULT
        assert 'sac_config' in capsys.readouterr().err

    def test_concat_needs_segments(self, tmp_path):
        assert run(['concat-eval', '--out', str(tmp_path)]) == EXIT_USAGE


@pytest.mark.slow
def test_train_then_evaluate(tmp_path):
    config = tmp_path / 'tiny.cfg'
    config.write_text(TINY_RUN)
    train_dir = tmp_path / 'train'
    eval_dir = tmp_path / 'eval'
    checkpoint = train_dir / 'checkpoint.amrl'

    assert run(['train', '--config', str(config), '--seed', '3', '--steps', '30', '--out', str(train_dir)]) == EXIT_OK
    for name in ('config.snapshot', 'meta.txt', 'metrics.jsonl', 'checkpoint.amrl'):
        assert (train_dir / name).exists()
    records = [json.loads(line) for line in (train_dir / 'metrics.jsonl').read_text().splitlines()]
    steps = [r['step'] for r in records]
    assert steps and steps == sorted(steps) and steps[-1] <= 30
    meta = (train_dir / 'meta.txt').read_text()
    assert 'env_seed = 3' in meta
    assert 'sac_seed = 3' in meta

    assert run(['eval', '--config', str(config), '--checkpoint', str(checkpoint), '--export',
                '--out', str(eval_dir)]) == EXIT_OK
    assert (eval_dir / 'traces' / 'ep0.csv').exists()
    assert (eval_dir / 'plots' / 'ep0.csv').exists()
    assert len((eval_dir / 'eval.jsonl').read_text().splitlines()) == 1

    sweep_dir = tmp_path / 'sweep'
    assert run(['sweep-tau', '--config', str(config), '--checkpoint', str(checkpoint), '--taus', '1,2',
                '--out', str(sweep_dir)]) == EXIT_OK
    assert 'extrapolated' in (sweep_dir / 'sweep.txt').read_text()


@pytest.mark.slow
def test_train_is_reproducible(tmp_path):
    config = tmp_path / 'tiny.cfg'
    config.write_text(TINY_RUN)
    for name in ('a', 'b'):
        run(['train', '--config', str(config), '--steps', '20', '--out', str(tmp_path / name)])
    for name in ('metrics.jsonl', 'config.snapshot'):
        assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes()
    first, second = (load_checkpoint(str(tmp_path / name / 'checkpoint.amrl')) for name in ('a', 'b'))
    np.testing.assert_array_equal(first.policy.flat_parameters(), second.policy.flat_parameters())
