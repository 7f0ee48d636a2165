"""
File: core/trajectory.py
Location: aerobatic_rl/core/trajectory.py
Purpose: 4-channel maneuver reference trajectories (roll, gamma, yaw, Mach)

Features:
- Handcrafted generators: loop, Immelmann, barrel roll, attitude hold
- Pilot CSV loading / saving (header `t_s,roll_deg,gamma_deg,yaw_deg,mach`)
- Yaw rebasing to any entry heading
- Time-scaled target sampling (index remapping, no interpolation)
- Feasibility check against the airframe pitch-rate and load-factor limits
- Band-limited "pilot" noise for smoothness comparisons

Inverted flight past the vertical is written as roll 180 / yaw + 180 with
gamma coming back down, so gamma never leaves [-90, 90].
"""

import csv
import io
import logging
import math
import os
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from config import settings
from core.errors import TrajectoryError, TrajectoryParseError
from core.flightdyn import G0, isa_atmosphere
from utils.helpers import atomic_write_text, format_float, wrap_180, wrap_360

logger = logging.getLogger(__name__)

CSV_HEADER = ('t_s', 'roll_deg', 'gamma_deg', 'yaw_deg', 'mach')
CHANNELS = ('roll', 'gamma', 'yaw', 'mach')
DT_TOLERANCE_S = 1e-6

MANEUVER_KINDS = ('loop', 'immelmann', 'barrel_roll', 'hold')


class TargetPoint(NamedTuple):
    roll_deg: float
    gamma_deg: float
    yaw_deg: float
    mach: float


@dataclass(frozen=True)
class FeasibilityReport:
    """Peak demands of a time-scaled trajectory vs the airframe limits"""
    required_peak_pitch_rate_dps: float
    required_peak_load_factor_g: float
    limit_pitch_rate_dps: float
    limit_load_factor_g: float
    violations: tuple = field(default_factory=tuple)
    tau: float = 1.0
    effective_duration_s: float = 0.0

    @property
    def feasible(self):
        return not self.violations

    def summary(self):
        verdict = 'feasible' if self.feasible else 'infeasible'
        lines = [
            f"{verdict} (tau={self.tau:g}, {self.effective_duration_s:.1f} s)",
            f"peak pitch rate: {self.required_peak_pitch_rate_dps:.2f} deg/s (limit {self.limit_pitch_rate_dps:g})",
            f"peak load factor: {self.required_peak_load_factor_g:.2f} g (limit {self.limit_load_factor_g:g})",
        ]
        if self.violations:
            lines.append(f"violations: {', '.join(self.violations)}")
        return '\n'.join(lines)


# =============================================================================
# TRAJECTORY CONTAINER
# =============================================================================

def _channel_problem(roll, gamma, yaw, mach):
    """Name of the first channel out of range, or None"""
    for name, value in zip(CHANNELS, (roll, gamma, yaw, mach)):
        if not math.isfinite(value):
            return name, f"{name} is not finite"
    if not -180.0 < roll <= 180.0:
        return 'roll', f"roll {roll} outside (-180, 180]"
    if not -90.0 <= gamma <= 90.0:
        return 'gamma', f"gamma {gamma} outside [-90, 90]"
    if not 0.0 <= yaw < 360.0:
        return 'yaw', f"yaw {yaw} outside [0, 360)"
    if not mach > 0.0:
        return 'mach', f"mach {mach} must be > 0"
    return None


class ManeuverTrajectory:
    """
    Uniform-dt series of TargetPoints

    Channel data lives in a read-only (N, 4) float64 array ordered
    roll, gamma, yaw, mach.
    """

    def __init__(self, dt_s, channels, kind, source='handcrafted'):
        channels = np.array(channels, dtype=np.float64)
        if channels.ndim != 2 or channels.shape[1] != 4:
            raise TrajectoryError(f"expected (N, 4) channel data, got shape {channels.shape}")
        if len(channels) < 2:
            raise TrajectoryError(f"trajectory needs at least 2 points, got {len(channels)}")
        if not dt_s > 0:
            raise TrajectoryError(f"dt_s must be > 0, got {dt_s}")
        if source not in ('handcrafted', 'loaded'):
            raise TrajectoryError(f"unknown trajectory source {source!r}")

        for index, row in enumerate(channels):
            problem = _channel_problem(*row)
            if problem:
                raise TrajectoryError(f"point {index}: {problem[1]}")

        channels.setflags(write=False)
        self._channels = channels
        self.dt_s = float(dt_s)
        self.kind = kind
        self.source = source

    def __len__(self):
        return len(self._channels)

    def __repr__(self):
        return (f"ManeuverTrajectory(kind={self.kind!r}, points={len(self)}, "
                f"dt_s={self.dt_s}, source={self.source!r})")

    @property
    def channels(self):
        return self._channels

    @property
    def duration_s(self):
        return (len(self) - 1) * self.dt_s

    @property
    def times(self):
        return np.arange(len(self)) * self.dt_s

    @property
    def roll(self):
        return self._channels[:, 0]

    @property
    def gamma(self):
        return self._channels[:, 1]

    @property
    def yaw(self):
        return self._channels[:, 2]

    @property
    def mach(self):
        return self._channels[:, 3]

    def point(self, index):
        return TargetPoint(*(float(v) for v in self._channels[index]))

    @property
    def points(self):
        return [self.point(i) for i in range(len(self))]

    def same_as(self, other):
        """Bit-equal channel data and timestep"""
        return self.dt_s == other.dt_s and np.array_equal(self._channels, other._channels)


def _assemble(dt_s, roll, gamma, yaw, mach, kind):
    channels = np.column_stack([
        wrap_180(np.asarray(roll, dtype=np.float64)),
        np.clip(gamma, -90.0, 90.0),
        wrap_360(np.asarray(yaw, dtype=np.float64)),
        mach,
    ])
    return ManeuverTrajectory(dt_s, channels, kind, source='handcrafted')


def _segment_count(duration_s, dt_s, minimum=4):
    if not duration_s > 0:
        raise TrajectoryError(f"duration_s must be > 0, got {duration_s}")
    if not dt_s > 0:
        raise TrajectoryError(f"dt_s must be > 0, got {dt_s}")
    count = int(round(duration_s / dt_s))
    if count < minimum:
        raise TrajectoryError(f"duration {duration_s} s too short for dt {dt_s} s")
    return count


# =============================================================================
# GENERATORS
# =============================================================================

def generate_loop(duration_s=None, entry_yaw_deg=0.0, entry_mach=None, mach_dip=None, dt_s=None):
    """
    Inside loop: four linear gamma phases

    0 -> 90 (upright), 90 -> 0 (inverted), 0 -> -90 (inverted), -90 -> 0 (upright).
    Mach dips as entry_mach - mach_dip * sin^2(pi t / T).
    """
    duration_s = settings.LOOP_DURATION_S if duration_s is None else duration_s
    entry_mach = settings.ENTRY_MACH if entry_mach is None else entry_mach
    mach_dip = settings.LOOP_MACH_DIP if mach_dip is None else mach_dip
    dt_s = settings.TRAJ_DT_S if dt_s is None else dt_s

    if not entry_mach - mach_dip > 0.1:
        raise TrajectoryError(f"entry_mach - mach_dip must exceed 0.1 ({entry_mach} - {mach_dip})")

    n = _segment_count(duration_s, dt_s)
    q1, q2, q3 = round(n / 4), round(n / 2), round(3 * n / 4)
    i = np.arange(n + 1, dtype=np.float64)

    gamma = np.select(
        [i <= q1, i <= q2, i <= q3],
        [90.0 * i / q1, 90.0 * (q2 - i) / (q2 - q1), -90.0 * (i - q2) / (q3 - q2)],
        default=-90.0 * (n - i) / (n - q3),
    )
    inverted = (i > q1) & (i <= q3)
    roll = np.where(inverted, 180.0, 0.0)
    yaw = entry_yaw_deg + np.where(inverted, 180.0, 0.0)
    mach = entry_mach - mach_dip * np.sin(np.pi * i / n) ** 2

    return _assemble(dt_s, roll, gamma, yaw, mach, 'loop')


def generate_immelmann(duration_s=None, entry_yaw_deg=0.0, entry_mach=None, mach_dip=None,
                       roll_fraction=None, dt_s=None):
    """
    Half loop, then a 180 degree roll to upright on the reciprocal heading

    Mach decays linearly over the half loop and then stays constant.
    """
    duration_s = settings.IMMELMANN_DURATION_S if duration_s is None else duration_s
    entry_mach = settings.IMMELMANN_ENTRY_MACH if entry_mach is None else entry_mach
    mach_dip = settings.IMMELMANN_MACH_DIP if mach_dip is None else mach_dip
    roll_fraction = settings.IMMELMANN_ROLL_FRACTION if roll_fraction is None else roll_fraction
    dt_s = settings.TRAJ_DT_S if dt_s is None else dt_s

    if not 0.1 < roll_fraction < 0.5:
        raise TrajectoryError(f"roll_fraction must be within (0.1, 0.5), got {roll_fraction}")
    if not entry_mach - mach_dip > 0.1:
        raise TrajectoryError(f"entry_mach - mach_dip must exceed 0.1 ({entry_mach} - {mach_dip})")

    n = _segment_count(duration_s, dt_s)
    roll_start = round((1.0 - roll_fraction) * n)
    apex = round(roll_start / 2)
    if apex < 1 or roll_start - apex < 1 or n - roll_start < 1:
        raise TrajectoryError(f"duration {duration_s} s too short for dt {dt_s} s")
    i = np.arange(n + 1, dtype=np.float64)

    gamma = np.select(
        [i <= apex, i <= roll_start],
        [90.0 * i / apex, 90.0 * (roll_start - i) / (roll_start - apex)],
        default=0.0,
    )
    roll = np.select(
        [i <= apex, i <= roll_start],
        [0.0, 180.0],
        default=180.0 + 180.0 * (i - roll_start) / (n - roll_start),
    )
    yaw = entry_yaw_deg + np.where(i <= apex, 0.0, 180.0)
    mach = entry_mach - mach_dip * np.minimum(i / roll_start, 1.0)

    return _assemble(dt_s, roll, gamma, yaw, mach, 'immelmann')


def generate_barrel_roll(duration_s=None, entry_yaw_deg=0.0, entry_mach=None,
                         pitch_amplitude_deg=None, yaw_amplitude_deg=None, dt_s=None):
    """
    Full roll while the flight path traces a helix

    roll = 360 t/T, gamma = A_p sin(2 pi t/T), yaw = yaw0 + A_y (1 - cos(2 pi t/T)).
    """
    duration_s = settings.BARREL_ROLL_DURATION_S if duration_s is None else duration_s
    entry_mach = settings.ENTRY_MACH if entry_mach is None else entry_mach
    pitch_amplitude_deg = (settings.BARREL_PITCH_AMPLITUDE_DEG
                           if pitch_amplitude_deg is None else pitch_amplitude_deg)
    yaw_amplitude_deg = (settings.BARREL_YAW_AMPLITUDE_DEG
                         if yaw_amplitude_deg is None else yaw_amplitude_deg)
    dt_s = settings.TRAJ_DT_S if dt_s is None else dt_s

    for name, value in (('pitch_amplitude_deg', pitch_amplitude_deg),
                        ('yaw_amplitude_deg', yaw_amplitude_deg)):
        if not 5.0 < value < 45.0:
            raise TrajectoryError(f"{name} must be within (5, 45), got {value}")
    if not entry_mach > 0.1:
        raise TrajectoryError(f"entry_mach must exceed 0.1, got {entry_mach}")

    n = _segment_count(duration_s, dt_s)
    phase = np.arange(n + 1, dtype=np.float64) / n

    roll = 360.0 * phase
    gamma = pitch_amplitude_deg * np.sin(2.0 * np.pi * phase)
    yaw = entry_yaw_deg + yaw_amplitude_deg * (1.0 - np.cos(2.0 * np.pi * phase))
    mach = np.full(n + 1, float(entry_mach))

    return _assemble(dt_s, roll, gamma, yaw, mach, 'barrel_roll')


def generate_hold(duration_s=None, entry_yaw_deg=0.0, entry_mach=None, dt_s=None):
    """Constant wings-level target (attitude-hold toy task)"""
    duration_s = settings.HOLD_DURATION_S if duration_s is None else duration_s
    entry_mach = settings.ENTRY_MACH if entry_mach is None else entry_mach
    dt_s = settings.TRAJ_DT_S if dt_s is None else dt_s

    n = _segment_count(duration_s, dt_s, minimum=1)
    zeros = np.zeros(n + 1)
    return _assemble(dt_s, zeros, zeros, zeros + entry_yaw_deg, zeros + entry_mach, 'hold')


_GENERATORS = {
    'loop': generate_loop,
    'immelmann': generate_immelmann,
    'barrel_roll': generate_barrel_roll,
    'hold': generate_hold,
}


def generate(kind, **kwargs):
    """
    Dispatch to a generator by maneuver label

    Keyword arguments left as None fall back to the configured defaults.
    """
    try:
        generator = _GENERATORS[kind]
    except KeyError:
        raise TrajectoryError(f"unknown maneuver {kind!r}; expected one of {', '.join(MANEUVER_KINDS)}")
    return generator(**{k: v for k, v in kwargs.items() if v is not None})


# =============================================================================
# CSV
# =============================================================================

def trajectory_to_csv_text(traj):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(CSV_HEADER)
    for index, row in enumerate(traj.channels):
        writer.writerow([format_float(index * traj.dt_s)] + [format_float(v) for v in row])
    return buffer.getvalue()


def save_trajectory_csv(traj, path):
    """Write a trajectory CSV atomically"""
    atomic_write_text(path, trajectory_to_csv_text(traj))
    logger.info(f"✅ Wrote {traj.kind} trajectory ({len(traj)} points) to {path}")


def load_pilot_csv(path, kind=None):
    """
    Load a recorded (or generator-written) trajectory

    Args:
        path: CSV with header exactly `t_s,roll_deg,gamma_deg,yaw_deg,mach`
        kind: maneuver label; defaults to the file stem

    Returns:
        ManeuverTrajectory with source 'loaded'

    Raises:
        TrajectoryParseError: names the 1-based data row and the column
    """
    if kind is None:
        kind = os.path.splitext(os.path.basename(path))[0]

    with open(path, encoding='utf-8', newline='') as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise TrajectoryParseError("empty file")

        header = [h.strip() for h in header]
        for column in CSV_HEADER:
            if column not in header:
                raise TrajectoryParseError("missing column", column=column)
        if tuple(header) != CSV_HEADER:
            raise TrajectoryParseError(f"header must be exactly {','.join(CSV_HEADER)}, got {','.join(header)}")

        times = []
        rows = []
        for row_number, cells in enumerate(reader, 1):
            if not cells or all(not c.strip() for c in cells):
                continue
            if len(cells) != len(CSV_HEADER):
                raise TrajectoryParseError(f"expected {len(CSV_HEADER)} fields, got {len(cells)}", row=row_number)

            values = []
            for column, cell in zip(CSV_HEADER, cells):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise TrajectoryParseError(f"not a number: {cell!r}", row=row_number, column=column)

            problem = _channel_problem(*values[1:])
            if problem:
                column = CSV_HEADER[1 + CHANNELS.index(problem[0])]
                raise TrajectoryParseError(problem[1], row=row_number, column=column)

            times.append(values[0])
            rows.append(values[1:])

    if len(rows) < 2:
        raise TrajectoryParseError(f"need at least 2 data rows, got {len(rows)}")

    dt_s = times[1] - times[0]
    if not dt_s > 0:
        raise TrajectoryParseError("time column must increase", row=2, column='t_s')
    for index in range(1, len(times)):
        if abs((times[index] - times[index - 1]) - dt_s) > DT_TOLERANCE_S:
            raise TrajectoryParseError(
                f"non-uniform dt: {times[index] - times[index - 1]:.6f} s vs {dt_s:.6f} s",
                row=index + 1, column='t_s')

    traj = ManeuverTrajectory(dt_s, rows, kind, source='loaded')
    logger.info(f"📂 Loaded trajectory {kind!r} from {path}: {len(traj)} points, dt={dt_s:g} s")
    return traj


# =============================================================================
# TRANSFORMS
# =============================================================================

def rebase_yaw(traj, new_initial_yaw_deg):
    """Shift the yaw channel so it starts at new_initial_yaw_deg"""
    channels = traj.channels.copy()
    channels[:, 2] = wrap_360(channels[:, 2] - channels[0, 2] + new_initial_yaw_deg)
    return ManeuverTrajectory(traj.dt_s, channels, traj.kind, traj.source)


def add_pilot_noise(traj, seed, scale=1.0, window=7):
    """
    Band-limited, endpoint-tapered noise emulating a recorded pilot trajectory

    Angles get noise with standard deviation about `scale` degrees, Mach about
    scale * 0.005. The taper keeps the first and last points untouched.
    """
    if scale < 0:
        raise TrajectoryError(f"noise scale must be >= 0, got {scale}")

    rng = np.random.default_rng(seed)
    n = len(traj)
    kernel = np.ones(window) / math.sqrt(window)
    taper = np.sin(np.pi * np.arange(n) / (n - 1))

    noise = np.empty((n, 4))
    for column in range(4):
        white = rng.standard_normal(n + window - 1)
        noise[:, column] = np.convolve(white, kernel, mode='valid') * taper
    noise *= scale * np.array([1.0, 1.0, 1.0, 0.005])

    channels = traj.channels + noise
    channels[:, 3] = np.maximum(channels[:, 3], 0.05)
    noisy = np.column_stack([
        wrap_180(channels[:, 0]),
        np.clip(channels[:, 1], -90.0, 90.0),
        wrap_360(channels[:, 2]),
        channels[:, 3],
    ])
    return ManeuverTrajectory(traj.dt_s, noisy, traj.kind, traj.source)


# =============================================================================
# TIME SCALING
# =============================================================================

def horizon_steps(duration_s, tau, agent_hz):
    """Agent steps needed to fly a maneuver of duration_s scaled by tau"""
    # Rounding first keeps 40 * 0.375 * 10 from becoming 150.00000000000003
    return int(math.ceil(round(duration_s * tau * agent_hz, 9)))


def sample_target(traj, agent_step_index, agent_hz, tau, hold=1):
    """
    Target for an agent step of a time-scaled maneuver

    Args:
        traj: ManeuverTrajectory
        agent_step_index: steps taken since the maneuver started
        agent_hz: agent decisions per second
        tau: time scaling factor (2 doubles the execution time)
        hold: observe targets every `hold` steps only (1 = every step)

    Returns:
        tuple: (TargetPoint, remaining_fraction, done)
    """
    if not tau > 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    if not agent_hz > 0:
        raise ValueError(f"agent_hz must be > 0, got {agent_hz}")

    # a tiny tau can round the horizon down to zero steps
    horizon = max(horizon_steps(traj.duration_s, tau, agent_hz), 1)
    step = min(agent_step_index, horizon)
    sampled = (step // hold) * hold if hold > 1 else step

    last = len(traj) - 1
    index = int(math.floor(sampled / horizon * last + 0.5))
    index = min(max(index, 0), last)

    remaining = max(0.0, 1.0 - agent_step_index / horizon)
    return traj.point(index), remaining, agent_step_index >= horizon


# =============================================================================
# FEASIBILITY
# =============================================================================

def check_feasibility(traj, tau, params, altitude_ft=None):
    """
    Peak pitch rate and load factor needed to fly traj at time scale tau

    Only the gamma channel drives the estimate, so the roll/yaw flip of the
    inverted-flight encoding never counts as a manoeuvre demand.
    """
    if not tau > 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    altitude_ft = settings.FEASIBILITY_ALTITUDE_FT if altitude_ft is None else altitude_ft
    _, sound_speed = isa_atmosphere(altitude_ft)

    scaled_dt = traj.dt_s * tau
    gamma_rate_dps = np.abs(np.diff(traj.gamma)) / scaled_dt
    speed = np.maximum(traj.mach[:-1], traj.mach[1:]) * sound_speed
    load_factor = 1.0 + speed * np.radians(gamma_rate_dps) / G0

    peak_rate = float(gamma_rate_dps.max())
    peak_load = float(load_factor.max())

    violations = []
    if peak_rate > params.pitch_rate_limit_dps:
        violations.append('pitch_rate')
    if peak_load > params.max_load_factor_g:
        violations.append('load_factor')

    return FeasibilityReport(
        required_peak_pitch_rate_dps=peak_rate,
        required_peak_load_factor_g=peak_load,
        limit_pitch_rate_dps=params.pitch_rate_limit_dps,
        limit_load_factor_g=params.max_load_factor_g,
        violations=tuple(violations),
        tau=float(tau),
        effective_duration_s=traj.duration_s * tau,
    )
