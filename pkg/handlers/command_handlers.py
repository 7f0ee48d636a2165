"""
File: handlers/command_handlers.py
Location: aerobatic_rl/handlers/command_handlers.py
Purpose: One handler per CLI subcommand (gen-traj, train, eval, ...)

Run directory layout (--out):
    config.snapshot     resolved run config
    meta.txt            timestamp, command line, seeds, versions
    metrics.jsonl       training metrics, one record per episode
    checkpoint.amrl     trained agent
    traces/ep<k>.csv    evaluation traces
    plots/ep<k>.csv     plot-ready export of the traces
"""

import logging
import os
import platform
import shlex

import gymnasium
import numpy as np

from config import settings
from config.clock import format_timestamp
from config.run_config import TRAJ_ARGUMENTS, RunConfig, format_value
from core.environment import OBS_LAYOUT_VERSION, ManeuverEnv
from core.errors import UsageError
from core.trainer import train
from core.trajectory import (MANEUVER_KINDS, add_pilot_noise, check_feasibility, generate,
                             load_pilot_csv, save_trajectory_csv)
from database import DatabaseManager, TrialsDB
from features.checkpoint import read_checkpoint, save_checkpoint
from features.evaluation import concat_eval, evaluate, format_sweep_table, summarize, tau_sweep
from features.export import export_run
from features.hparam_search import format_ledger_summary, format_table, hparam_search, load_space
from utils.helpers import JsonLinesWriter, atomic_write_text
from utils.validators import parse_float_list

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = 'checkpoint.amrl'


# =============================================================================
# SHARED HELPERS
# =============================================================================

def _run_config(args, **overrides):
    """Run config from --config plus --seed and subcommand overrides"""
    if args.seed is not None:
        overrides['env.seed'] = args.seed
        overrides['sac.seed'] = args.seed
    return RunConfig.load(args.config).with_overrides(overrides)


def _require_out(args):
    if not args.out:
        raise UsageError(f"{args.command}: --out is required")
    return args.out


def _prepare_run_dir(args, config):
    """Create the run directory and write config.snapshot + meta.txt"""
    out = _require_out(args)
    os.makedirs(out, exist_ok=True)
    atomic_write_text(os.path.join(out, 'config.snapshot'), config.snapshot())
    write_meta(out, args, config)
    return out


def write_meta(out_dir, args, config):
    """meta.txt: enough to reproduce the run"""
    sac_config = config.sac_config()
    entries = [
        ('created_at', format_timestamp()),
        ('command', 'amrl ' + shlex.join(getattr(args, 'argv', []) or [])),
        ('app_version', settings.APP_VERSION),
        ('python_version', platform.python_version()),
        ('numpy_version', np.__version__),
        ('gymnasium_version', gymnasium.__version__),
        ('observation_layout', OBS_LAYOUT_VERSION),
        ('env_seed', config.seed),
        ('sac_seed', sac_config.seed),
        ('maneuver', config.maneuver),
        ('workers', 'single'),
    ]
    text = ''.join(f'{key} = {format_value(value)}\n' for key, value in entries)
    atomic_write_text(os.path.join(out_dir, 'meta.txt'), text)


def _load_agent(path, episode_config):
    loaded = read_checkpoint(path, expected_layout=OBS_LAYOUT_VERSION)
    if loaded.maneuver and loaded.maneuver != episode_config.maneuver.kind:
        logger.warning(f"⚠️ Checkpoint was trained on {loaded.maneuver!r}, evaluating on "
                       f"{episode_config.maneuver.kind!r}")
    return loaded


def _segment_trajectory(spec):
    """Maneuver label or CSV path"""
    if spec.lower().endswith('.csv'):
        return load_pilot_csv(spec)
    if spec in MANEUVER_KINDS:
        return generate(spec)
    raise UsageError(f"segment trajectory must be a .csv file or one of {', '.join(MANEUVER_KINDS)}, got {spec!r}")


# =============================================================================
# SUBCOMMANDS
# =============================================================================

def gen_traj_command(args):
    """Write a handcrafted (optionally noisy) trajectory CSV"""
    out = _require_out(args)
    kwargs = {
        'duration_s': args.duration,
        'entry_mach': args.entry_mach,
        'mach_dip': args.mach_dip,
        'roll_fraction': args.roll_fraction,
        'pitch_amplitude_deg': args.pitch_amplitude,
        'yaw_amplitude_deg': args.yaw_amplitude,
        'dt_s': args.dt,
    }
    allowed = TRAJ_ARGUMENTS[args.maneuver]
    extra = sorted(name for name, value in kwargs.items() if value is not None and name not in allowed)
    if extra:
        raise UsageError(f"gen-traj: {', '.join(extra)} not used by maneuver {args.maneuver!r}")

    traj = generate(args.maneuver, entry_yaw_deg=args.entry_yaw, **kwargs)
    if args.noise:
        noise_seed = args.noise_seed if args.noise_seed is not None else (args.seed or 0)
        traj = add_pilot_noise(traj, seed=noise_seed, scale=args.noise)
    save_trajectory_csv(traj, out)
    print(f"{traj.kind}: {len(traj)} points, {traj.duration_s:g} s -> {out}")
    return 0


def feasibility_command(args):
    """Report peak pitch rate / load factor against the airframe limits"""
    config = _run_config(args)
    if args.traj:
        traj = load_pilot_csv(args.traj)
    elif args.maneuver:
        traj = generate(args.maneuver, duration_s=args.duration)
    else:
        traj = config.trajectory()

    report = check_feasibility(traj, args.tau, config.aircraft_params(), args.altitude)
    text = report.summary()
    print(text)
    if args.out:
        atomic_write_text(args.out, text + '\n')
    return 0


def train_command(args):
    """Train SAC and write metrics, checkpoint and run metadata"""
    overrides = {'env.maneuver': args.maneuver, 'traj.file': args.traj}
    config = _run_config(args, **overrides)
    episode_config = config.episode_config()
    sac_config = config.sac_config()
    out = _prepare_run_dir(args, config)

    checkpoint_path = os.path.join(out, CHECKPOINT_NAME)
    writer = JsonLinesWriter(os.path.join(out, 'metrics.jsonl'))

    def save_partial(agent, metrics_cursor):
        save_checkpoint(agent, checkpoint_path, episode_config, metrics_cursor=metrics_cursor)
        logger.info(f"Partial checkpoint written to {checkpoint_path}")

    agent, metrics = train(ManeuverEnv, sac_config, episode_config, args.steps,
                           callbacks=[writer], on_fault=save_partial)
    save_checkpoint(agent, checkpoint_path, episode_config, metrics_cursor=len(metrics))

    if metrics:
        last = metrics[-1]
        print(f"trained {args.steps} steps, {len(metrics)} episodes, last return {last['return']:.3f}")
    else:
        print(f"trained {args.steps} steps, no episode completed")
    logger.info(f"✅ Run written to {out}")
    return 0


def eval_command(args):
    """Deterministic evaluation with per-step traces"""
    overrides = {'env.maneuver': args.maneuver, 'traj.file': args.traj}
    config = _run_config(args, **overrides)
    episode_config = config.episode_config()
    out = _prepare_run_dir(args, config)

    loaded = _load_agent(args.checkpoint, episode_config)
    episodes = args.episodes if args.episodes is not None else config.eval_episodes
    reports = evaluate(loaded.agent, episode_config, episodes, config.seed,
                       trace_dir=os.path.join(out, 'traces'), tau=args.tau, layout=loaded.layout,
                       gamma_bound_deg=config.gamma_bound_deg, roll_bound_deg=config.roll_bound_deg)

    writer = JsonLinesWriter(os.path.join(out, 'eval.jsonl'))
    for report in reports:
        writer(report.summary())
    if args.export:
        export_run(out)

    summary = summarize(reports)
    print(f"{summary['episodes']} episodes: success rate {summary['success_rate']:.2f}, "
          f"terminations {summary['terminations']}, mean |gamma err| {summary['mean_abs_gamma']:.2f}, "
          f"mean |roll err| {summary['mean_abs_roll']:.2f}, return {summary['return']:.3f}")
    return 0


def sweep_tau_command(args):
    """Evaluate one checkpoint at several time scaling factors"""
    config = _run_config(args, **{'env.maneuver': args.maneuver, 'traj.file': args.traj})
    episode_config = config.episode_config()
    out = _prepare_run_dir(args, config)

    loaded = _load_agent(args.checkpoint, episode_config)
    rows = tau_sweep(loaded.agent, parse_float_list(args.taus), episode_config, config.seed,
                     episodes=args.episodes, force=args.force,
                     trace_dir=os.path.join(out, 'traces'), layout=loaded.layout)
    table = format_sweep_table(rows)
    atomic_write_text(os.path.join(out, 'sweep.txt'), table + '\n')
    print(table)
    return 0


def concat_eval_command(args):
    """Fly several maneuvers back to back"""
    if not args.segment:
        raise UsageError("concat-eval: at least one --segment CHECKPOINT TRAJECTORY is required")
    config = _run_config(args)
    segments = []
    layouts = set()
    for checkpoint_path, trajectory_spec in args.segment:
        loaded = read_checkpoint(checkpoint_path, expected_layout=OBS_LAYOUT_VERSION)
        layouts.add(loaded.layout)
        segments.append((loaded.agent, _segment_trajectory(trajectory_spec)))

    episode_config = config.episode_config()
    out = _prepare_run_dir(args, config)
    reports = concat_eval(segments, episode_config, config.seed, trace_dir=os.path.join(out, 'traces'),
                          gamma_bound_deg=config.gamma_bound_deg, roll_bound_deg=config.roll_bound_deg)

    writer = JsonLinesWriter(os.path.join(out, 'concat.jsonl'))
    for report in reports:
        writer(report.summary())
        status = 'ok' if not report.terminated_early else (report.fault or 'diverged')
        print(f"segment {report.segment}: {report.steps} steps, rmse gamma {report.rmse['gamma']:.2f}, "
              f"rmse roll {report.rmse['roll']:.2f}, {status}")
    if len(reports) < len(segments):
        print(f"stopped after segment {len(reports) - 1} of {len(segments)}")
    return 0


def hparam_search_command(args):
    """Random search; ranking table and best SAC settings written to --out"""
    config = _run_config(args, **{'env.maneuver': args.maneuver, 'traj.file': args.traj})
    episode_config = config.episode_config()
    out = _prepare_run_dir(args, config)

    db_manager = DatabaseManager(args.db)
    db_manager.init_database()
    ledger = TrialsDB(db_manager)

    table, best = hparam_search(load_space(args.space), args.trials, args.budget, config.seed,
                                episode_config, base_config=config.sac_config(), ledger=ledger)
    text = format_table(table)
    atomic_write_text(os.path.join(out, 'ranking.txt'), text + '\n')
    print(text)
    print(format_ledger_summary(ledger, config.seed))

    if best is None:
        print("every trial failed")
        return 0
    best_text = ''.join(f'sac.{key} = {format_value(value)}\n' for key, value in sorted(best.as_dict().items()))
    atomic_write_text(os.path.join(out, 'best.cfg'), best_text)
    print(f"best settings written to {os.path.join(out, 'best.cfg')}")
    return 0


def export_command(args):
    """Plot-ready CSVs for every trace of a run directory"""
    written = export_run(_require_out(args))
    for path in written:
        print(path)
    return 0


# =============================================================================
# REGISTRATION
# =============================================================================

def _add_trajectory_overrides(parser):
    parser.add_argument('--maneuver', choices=MANEUVER_KINDS, help='overrides env.maneuver')
    parser.add_argument('--traj', help='reference trajectory CSV (overrides traj.file)')


def register_command_handlers(subparsers, common):
    """Register every subcommand on an argparse subparsers object"""
    p = subparsers.add_parser('gen-traj', parents=[common], help='generate a handcrafted trajectory CSV')
    p.add_argument('--maneuver', required=True, choices=MANEUVER_KINDS)
    p.add_argument('--duration', type=float)
    p.add_argument('--entry-yaw', type=float, default=0.0)
    p.add_argument('--entry-mach', type=float)
    p.add_argument('--mach-dip', type=float)
    p.add_argument('--roll-fraction', type=float)
    p.add_argument('--pitch-amplitude', type=float)
    p.add_argument('--yaw-amplitude', type=float)
    p.add_argument('--dt', type=float)
    p.add_argument('--noise', type=float, default=0.0, help='pilot-like noise scale (deg)')
    p.add_argument('--noise-seed', type=int)
    p.set_defaults(handler=gen_traj_command)

    p = subparsers.add_parser('feasibility', parents=[common], help='check a trajectory against airframe limits')
    p.add_argument('--traj', help='trajectory CSV')
    p.add_argument('--maneuver', choices=MANEUVER_KINDS)
    p.add_argument('--duration', type=float)
    p.add_argument('--tau', type=float, default=1.0)
    p.add_argument('--altitude', type=float)
    p.set_defaults(handler=feasibility_command)

    p = subparsers.add_parser('train', parents=[common], help='train a SAC agent')
    p.add_argument('--steps', type=int, required=True)
    _add_trajectory_overrides(p)
    p.set_defaults(handler=train_command)

    p = subparsers.add_parser('eval', parents=[common], help='evaluate a checkpoint')
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--episodes', type=int)
    p.add_argument('--tau', type=float)
    p.add_argument('--export', action='store_true', help='also write plots/ep<k>.csv')
    _add_trajectory_overrides(p)
    p.set_defaults(handler=eval_command)

    p = subparsers.add_parser('sweep-tau', parents=[common], help='evaluate at several time scales')
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--taus', required=True, help='comma list, e.g. 0.5,1,1.5,2')
    p.add_argument('--episodes', type=int, default=1)
    p.add_argument('--force', action='store_true', help='evaluate infeasible taus too')
    _add_trajectory_overrides(p)
    p.set_defaults(handler=sweep_tau_command)

    p = subparsers.add_parser('concat-eval', parents=[common], help='fly maneuvers back to back')
    p.add_argument('--segment', nargs=2, action='append', metavar=('CHECKPOINT', 'TRAJECTORY'),
                   help='checkpoint and maneuver label or CSV; repeat per segment')
    p.set_defaults(handler=concat_eval_command)

    p = subparsers.add_parser('hparam-search', parents=[common], help='random search over SAC settings')
    p.add_argument('--space', required=True, help='search-space file')
    p.add_argument('--trials', type=int, default=10)
    p.add_argument('--budget', type=int, required=True, help='training steps per trial')
    p.add_argument('--db', default=settings.TRIALS_DB_PATH, help='trial ledger (SQLite)')
    _add_trajectory_overrides(p)
    p.set_defaults(handler=hparam_search_command)

    p = subparsers.add_parser('export', parents=[common], help='plot-ready CSVs from a run directory (--out)')
    p.set_defaults(handler=export_command)
