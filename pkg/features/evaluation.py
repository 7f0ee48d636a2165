"""
File: features/evaluation.py
Location: aerobatic_rl/features/evaluation.py
Purpose: Deterministic-policy rollouts - tracking metrics, tau sweeps,
         back-to-back maneuver concatenation
"""

import csv
import io
import logging
import os
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Protocol

import numpy as np

from config import settings
from core.environment import ManeuverEnv
from core.errors import LayoutMismatchError
from core.trajectory import check_feasibility
from utils.helpers import atomic_write_text, format_float

logger = logging.getLogger(__name__)

CHANNELS = ('roll', 'gamma', 'yaw', 'mach')
CONTROL_CHANNELS = ('aileron', 'elevator', 'rudder', 'throttle')

TRACE_HEADER = (
    'step', 't_s',
    'target_roll_deg', 'target_gamma_deg', 'target_yaw_deg', 'target_mach',
    'actual_roll_deg', 'actual_gamma_deg', 'actual_yaw_deg', 'actual_mach',
    'aileron', 'elevator', 'rudder', 'throttle',
    'reward', 'altitude_ft', 'north_m', 'east_m',
)


class Policy(Protocol):
    def act(self, observation): ...


@dataclass
class EvalReport:
    """
    Metrics of one evaluated episode (or one concatenation segment)

    Errors are target - actual with roll/yaw wrapped into (-180, 180].
    """
    rmse: dict
    max_abs: dict
    mean_abs: dict
    episode_return: float
    terminated_early: bool
    steps: int
    command_smoothness: dict
    success: bool
    fault: str = None
    segment: int = 0
    seed: int = None
    tau: float = 1.0
    trace: list = field(default_factory=list, repr=False)
    trace_path: str = None

    def summary(self):
        record = {'segment': self.segment, 'seed': self.seed, 'tau': self.tau, 'steps': self.steps,
                  'return': self.episode_return, 'terminated_early': self.terminated_early,
                  'fault': self.fault, 'success': self.success}
        for name in CHANNELS:
            record[f'rmse_{name}'] = self.rmse[name]
            record[f'max_abs_{name}'] = self.max_abs[name]
        for name in CONTROL_CHANNELS:
            record[f'smooth_{name}'] = self.command_smoothness[name]
        return record


class TauSweepRow(NamedTuple):
    tau: float
    feasibility: object
    extrapolated: bool
    skipped: bool
    summary: dict


# =============================================================================
# METRICS
# =============================================================================

def tracking_metrics(errors):
    """
    RMSE / max / mean of absolute error per channel

    Args:
        errors: {channel: sequence of signed (already wrapped) errors}
    """
    rmse, max_abs, mean_abs = {}, {}, {}
    for name in CHANNELS:
        values = np.abs(np.asarray(errors.get(name, ()), dtype=np.float64))
        if values.size == 0:
            rmse[name] = max_abs[name] = mean_abs[name] = 0.0
            continue
        rmse[name] = float(np.sqrt(np.mean(values ** 2)))
        max_abs[name] = float(values.max())
        mean_abs[name] = float(values.mean())
    return rmse, max_abs, mean_abs


def command_smoothness(commands):
    """Mean absolute change between consecutive commands, per control channel"""
    commands = np.asarray(commands, dtype=np.float64).reshape(-1, len(CONTROL_CHANNELS))
    if len(commands) < 2:
        return {name: 0.0 for name in CONTROL_CHANNELS}
    deltas = np.abs(np.diff(commands, axis=0)).mean(axis=0)
    return {name: float(d) for name, d in zip(CONTROL_CHANNELS, deltas)}


def is_success(report_fields, gamma_bound_deg, roll_bound_deg):
    return (not report_fields['terminated_early']
            and report_fields['fault'] is None
            and report_fields['mean_abs']['gamma'] <= gamma_bound_deg
            and report_fields['mean_abs']['roll'] <= roll_bound_deg)


def trace_to_csv_text(trace):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(TRACE_HEADER)
    for row in trace:
        writer.writerow([row['step']] + [format_float(row[name]) for name in TRACE_HEADER[1:]])
    return buffer.getvalue()


def _check_layout(env, layout):
    if layout is not None and layout != env.layout_version:
        raise LayoutMismatchError(layout, env.layout_version)


# =============================================================================
# ROLLOUTS
# =============================================================================

def _run_until_done(env, agent, observation, gamma_bound_deg, roll_bound_deg):
    """Roll the deterministic policy until the running segment ends; return report fields"""
    errors = {name: [] for name in CHANNELS}
    commands = []
    trace = []
    total = 0.0
    terminated = truncated = False
    fault = None

    while not (terminated or truncated):
        action = agent.act(observation)
        observation, reward, terminated, truncated, info = env.step(action)
        total += reward
        fault = info['fault']
        if fault:
            break

        controls = info['controls']
        target = info['target']
        state = info['state']
        for name in CHANNELS:
            errors[name].append(info['breakdown'].raw_errors[name])
        commands.append(controls.as_array())
        trace.append({
            'step': info['step'],
            't_s': state['time_s'],
            'target_roll_deg': target.roll_deg,
            'target_gamma_deg': target.gamma_deg,
            'target_yaw_deg': target.yaw_deg,
            'target_mach': target.mach,
            'actual_roll_deg': state['roll_deg'],
            'actual_gamma_deg': state['gamma_deg'],
            'actual_yaw_deg': state['yaw_deg'],
            'actual_mach': state['mach'],
            'aileron': controls.aileron_cmd,
            'elevator': controls.elevator_cmd,
            'rudder': controls.rudder_cmd,
            'throttle': controls.throttle_cmd,
            'reward': reward,
            'altitude_ft': state['altitude_ft'],
            'north_m': state['north_m'],
            'east_m': state['east_m'],
        })

    rmse, max_abs, mean_abs = tracking_metrics(errors)
    report = {
        'rmse': rmse,
        'max_abs': max_abs,
        'mean_abs': mean_abs,
        'episode_return': total,
        'terminated_early': bool(terminated),
        'steps': len(trace),
        'command_smoothness': command_smoothness(commands),
        'fault': fault,
        'trace': trace,
    }
    report['success'] = is_success(report, gamma_bound_deg, roll_bound_deg)
    return report


def _write_trace(report, trace_dir, index):
    if trace_dir is None:
        return
    path = os.path.join(trace_dir, f'ep{index}.csv')
    atomic_write_text(path, trace_to_csv_text(report.trace))
    report.trace_path = path


def evaluate(agent, episode_config, episodes, seed, trace_dir=None, tau=None, env_factory=ManeuverEnv,
             layout=None, gamma_bound_deg=None, roll_bound_deg=None):
    """
    Evaluate a policy over several episodes

    Args:
        agent: anything with act(observation) -> action (deterministic)
        episode_config: EpisodeConfig
        episodes: number of episodes; episode k resets with seed + k
        seed: base seed
        trace_dir: when set, writes ep<k>.csv per-step traces there
        tau: force one time scaling factor instead of drawing it
        layout: observation layout the agent was trained on (checked)

    Returns:
        list: EvalReport per episode

    Raises:
        LayoutMismatchError: layout differs from the environment's
    """
    gamma_bound_deg = settings.SUCCESS_GAMMA_BOUND_DEG if gamma_bound_deg is None else gamma_bound_deg
    roll_bound_deg = settings.SUCCESS_ROLL_BOUND_DEG if roll_bound_deg is None else roll_bound_deg

    env = env_factory(episode_config)
    _check_layout(env, layout)

    reports = []
    for k in range(episodes):
        options = {'tau': tau} if tau is not None else None
        observation, info = env.reset(seed=seed + k, options=options)
        fields_ = _run_until_done(env, agent, observation, gamma_bound_deg, roll_bound_deg)
        report = EvalReport(seed=seed + k, tau=info['episode'].tau, **fields_)
        _write_trace(report, trace_dir, k)
        reports.append(report)

        outcome = '✅' if report.success else '⚠️'
        logger.info(f"{outcome} Eval episode {k}: {report.steps} steps, return {report.episode_return:.3f}, "
                    f"rmse gamma {report.rmse['gamma']:.2f}, roll {report.rmse['roll']:.2f}"
                    + (f", fault '{report.fault}'" if report.fault else '')
                    + (' (diverged)' if report.terminated_early and not report.fault else ''))
    return reports


def concat_eval(segments, episode_config, seed, trace_dir=None, env_factory=ManeuverEnv, layout=None,
                gamma_bound_deg=None, roll_bound_deg=None):
    """
    Fly several maneuvers back to back without resetting the aircraft

    Args:
        segments: ordered (agent, trajectory) pairs
        episode_config: settings shared by every segment; its maneuver is
            replaced by the first segment's trajectory

    Returns:
        list: EvalReport per flown segment (stops after a segment ends early)
    """
    if not segments:
        return []
    gamma_bound_deg = settings.SUCCESS_GAMMA_BOUND_DEG if gamma_bound_deg is None else gamma_bound_deg
    roll_bound_deg = settings.SUCCESS_ROLL_BOUND_DEG if roll_bound_deg is None else roll_bound_deg

    first_agent, first_trajectory = segments[0]
    env = env_factory(replace(episode_config, maneuver=first_trajectory))
    _check_layout(env, layout)

    observation, info = env.reset(seed=seed)
    tau = info['episode'].tau
    reports = []
    for k, (agent, trajectory) in enumerate(segments):
        if k > 0:
            observation = env.begin_segment(trajectory)
        fields_ = _run_until_done(env, agent, observation, gamma_bound_deg, roll_bound_deg)
        report = EvalReport(segment=k, seed=seed, tau=tau, **fields_)
        _write_trace(report, trace_dir, k)
        reports.append(report)

        if report.terminated_early:
            reason = f"fault in '{report.fault}'" if report.fault else 'divergence'
            logger.error(f"❌ Segment {k} ({trajectory.kind}) ended early after {report.steps} steps: {reason}")
            break
        logger.info(f"✅ Segment {k} ({trajectory.kind}) completed: rmse gamma {report.rmse['gamma']:.2f}")

    for index, handoff in enumerate(env.episode.history, 1):
        logger.info(f"Handoff {index}: t={handoff['time_s']:.1f} s, alt={handoff['altitude_ft']:.0f} ft, "
                    f"roll={handoff['roll_deg']:.1f}, gamma={handoff['gamma_deg']:.1f}, "
                    f"yaw={handoff['yaw_deg']:.1f}, mach={handoff['mach']:.3f}")
    return reports


def summarize(reports):
    """Mean of the per-episode metrics"""
    if not reports:
        return {}
    summary = {'episodes': len(reports)}
    for name in CHANNELS:
        summary[f'rmse_{name}'] = float(np.mean([r.rmse[name] for r in reports]))
        summary[f'mean_abs_{name}'] = float(np.mean([r.mean_abs[name] for r in reports]))
    summary['return'] = float(np.mean([r.episode_return for r in reports]))
    summary['steps'] = int(reports[0].steps) if len(reports) == 1 else float(np.mean([r.steps for r in reports]))
    summary['terminations'] = sum(1 for r in reports if r.terminated_early)
    summary['success_rate'] = sum(1 for r in reports if r.success) / len(reports)
    return summary


def tau_sweep(agent, taus, episode_config, seed, episodes=1, force=False, trace_dir=None,
              env_factory=ManeuverEnv, layout=None):
    """
    Evaluate one agent at several time scaling factors

    Infeasible taus are marked and skipped unless force is set; taus outside
    the trained range are flagged as extrapolation.

    Returns:
        list: TauSweepRow per tau, in input order
    """
    tau_low, tau_high = episode_config.tau_range
    rows = []
    for tau in taus:
        tau = float(tau)
        feasibility = check_feasibility(episode_config.maneuver, tau, episode_config.params)
        extrapolated = not tau_low <= tau <= tau_high
        if extrapolated:
            logger.warning(f"⚠️ tau {tau:g} outside the trained range [{tau_low:g}, {tau_high:g}]")

        if not feasibility.feasible and not force:
            logger.warning(f"⚠️ Skipping tau {tau:g}: infeasible ({', '.join(feasibility.violations)})")
            rows.append(TauSweepRow(tau, feasibility, extrapolated, True, {}))
            continue

        directory = None if trace_dir is None else os.path.join(trace_dir, f'tau_{tau:g}')
        reports = evaluate(agent, episode_config, episodes, seed, trace_dir=directory, tau=tau,
                           env_factory=env_factory, layout=layout)
        rows.append(TauSweepRow(tau, feasibility, extrapolated, False, summarize(reports)))
    return rows


def format_sweep_table(rows):
    """Plain-text table of a tau sweep"""
    lines = ['tau     feasible  steps   rmse_gamma  rmse_roll   return      note']
    for row in rows:
        note = 'skipped' if row.skipped else ''
        if row.extrapolated:
            note = (note + ' extrapolated').strip()
        if row.skipped:
            lines.append(f"{row.tau:<7g} {'no':<9} {'-':<7} {'-':<11} {'-':<11} {'-':<11} {note}")
            continue
        s = row.summary
        feasible = 'yes' if row.feasibility.feasible else 'no'
        lines.append(f"{row.tau:<7g} {feasible:<9} {s['steps']:<7} {s['rmse_gamma']:<11.3f} "
                     f"{s['rmse_roll']:<11.3f} {s['return']:<11.3f} {note}")
    return '\n'.join(lines)
