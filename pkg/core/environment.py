"""
File: core/environment.py
Location: aerobatic_rl/core/environment.py
Purpose: Episodic maneuver-tracking environment (gymnasium API)

One episode:
1. reset() draws initial yaw, altitude and tau from the seeded generator,
   trims the aircraft wings-level and rebases the reference yaw
2. step(action) denormalizes the action, holds it for 1/agent_hz seconds of
   simulator substeps, samples the time-scaled target, scores the post-step
   state and checks termination
3. the episode truncates after ceil(duration * tau * agent_hz) steps

Observation layout OBS-26-v1 (every slot min-max normalized into [0, 1]):
    0-3   tracking errors roll, gamma, yaw (wrapped), mach
    4     altitude
    5     true airspeed
    6-8   body velocities u, v, w
    9-12  sin/cos roll, sin/cos gamma
    13-15 body rates p, q, r
    16-19 previous action (aileron, elevator, rudder, throttle)
    20-23 achieved surface deflections + throttle
    24    remaining maneuver fraction
    25    time scaling factor within the episode's tau range
"""

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import gymnasium as gym
import numpy as np
from gymnasium import spaces

from config import settings
from core import flightdyn
from core.errors import ConfigError, SimulationFault, UndefinedGammaError
from core.flightdyn import ControlInputs, load_aircraft_params, measured_channels, trim_state
from core.reward import RewardConfig, compute_reward, reward_bounds, tracking_errors
from core.trajectory import check_feasibility, horizon_steps, rebase_yaw, sample_target

logger = logging.getLogger(__name__)

OBS_LAYOUT_VERSION = 'OBS-26-v1'
OBS_SIZE = 26
ACTION_SIZE = 4

TERMINATION_MODES = ('divergence', 'time_only')
DIVERGENCE_AXES = ('longitudinal', 'lateral')
GAMMA_DIVERGENCE_DEG = 30.0
LATERAL_DIVERGENCE_DEG = 60.0

# (slot name, low, high); actuator slots are rescaled per airframe
OBS_RANGES = (
    ('err_roll', -180.0, 180.0),
    ('err_gamma', -180.0, 180.0),
    ('err_yaw', -180.0, 180.0),
    ('err_mach', -0.5, 0.5),
    ('altitude_ft', 0.0, 20000.0),
    ('true_airspeed', 0.0, 400.0),
    ('u', 0.0, 400.0),
    ('v', -100.0, 100.0),
    ('w', -100.0, 100.0),
    ('sin_roll', -1.0, 1.0),
    ('cos_roll', -1.0, 1.0),
    ('sin_gamma', -1.0, 1.0),
    ('cos_gamma', -1.0, 1.0),
    ('p_dps', -180.0, 180.0),
    ('q_dps', -180.0, 180.0),
    ('r_dps', -180.0, 180.0),
    ('prev_aileron', -1.0, 1.0),
    ('prev_elevator', -1.0, 1.0),
    ('prev_rudder', -1.0, 1.0),
    ('prev_throttle', 0.0, 1.0),
    ('aileron_pos', -1.0, 1.0),
    ('elevator_pos', -1.0, 1.0),
    ('rudder_pos', -1.0, 1.0),
    ('throttle_pos', 0.0, 1.0),
    ('remaining', 0.0, 1.0),
    ('tau', 0.0, 1.0),
)
_OBS_LOW = np.array([r[1] for r in OBS_RANGES])
_OBS_SPAN = np.array([r[2] - r[1] for r in OBS_RANGES])

DEFAULT_DIVERGENCE_AXIS = {
    'loop': 'longitudinal',
    'immelmann': 'longitudinal',
    'barrel_roll': 'lateral',
    'hold': 'lateral',
}


# =============================================================================
# CONFIGURATION
# =============================================================================

@dataclass(frozen=True)
class EpisodeConfig:
    """
    Everything needed to reproduce an episode given a seed

    maneuver: reference ManeuverTrajectory (its yaw is rebased every reset)
    reward: RewardConfig; defaults to the preset matching maneuver.kind
    params: AircraftParams; defaults to the shipped airframe
    divergence_axis: defaults per maneuver (longitudinal for loop/Immelmann)
    """
    maneuver: object
    tau_range: tuple = (1.0, 1.0)
    initial_altitudes_ft: tuple = (settings.INITIAL_ALTITUDE_FT,)
    randomize_yaw: bool = True
    agent_hz: float = settings.AGENT_HZ
    sim_dt_s: float = settings.SIM_DT_S
    termination_mode: str = 'time_only'
    divergence_axis: str = None
    seed: int = 0
    reward: RewardConfig = None
    params: object = None
    target_sample_divisor: int = 1

    def __post_init__(self):
        tau_range = self.tau_range
        if isinstance(tau_range, (int, float)):
            tau_range = (tau_range, tau_range)
        tau_range = tuple(float(t) for t in tau_range)
        if len(tau_range) != 2 or not 0 < tau_range[0] <= tau_range[1]:
            raise ConfigError(f"tau_range must be 0 < min <= max, got {self.tau_range}")
        object.__setattr__(self, 'tau_range', tau_range)

        altitudes = tuple(float(a) for a in self.initial_altitudes_ft)
        if not altitudes:
            raise ConfigError("initial_altitudes_ft is empty")
        object.__setattr__(self, 'initial_altitudes_ft', altitudes)

        if self.termination_mode not in TERMINATION_MODES:
            raise ConfigError(f"termination_mode must be one of {TERMINATION_MODES}, got {self.termination_mode!r}")

        axis = self.divergence_axis
        if axis is None:
            axis = DEFAULT_DIVERGENCE_AXIS.get(self.maneuver.kind, 'longitudinal')
        if axis not in DIVERGENCE_AXES:
            raise ConfigError(f"divergence_axis must be one of {DIVERGENCE_AXES}, got {axis!r}")
        object.__setattr__(self, 'divergence_axis', axis)

        if not self.agent_hz > 0 or not self.sim_dt_s > 0:
            raise ConfigError("agent_hz and sim_dt_s must be > 0")
        ratio = 1.0 / (self.agent_hz * self.sim_dt_s)
        if round(ratio) < 1 or abs(ratio - round(ratio)) > 1e-9:
            raise ConfigError(
                f"1 / (agent_hz * sim_dt_s) must be a whole number of substeps, "
                f"got {ratio} for {self.agent_hz} Hz / {self.sim_dt_s} s")

        if int(self.target_sample_divisor) < 1:
            raise ConfigError(f"target_sample_divisor must be >= 1, got {self.target_sample_divisor}")
        object.__setattr__(self, 'target_sample_divisor', int(self.target_sample_divisor))

        if self.reward is None:
            kind = self.maneuver.kind
            if kind not in DEFAULT_DIVERGENCE_AXIS:
                logger.warning(f"⚠️ No reward preset for maneuver {kind!r}, using the loop weights")
                kind = 'loop'
            object.__setattr__(self, 'reward', RewardConfig.preset(kind))

        if self.params is None:
            object.__setattr__(self, 'params', load_aircraft_params(settings.DEFAULT_AIRCRAFT_FILE))

    @property
    def substeps(self):
        return int(round(1.0 / (self.agent_hz * self.sim_dt_s)))

    def episode_steps(self, tau):
        return horizon_steps(self.maneuver.duration_s, tau, self.agent_hz)

    def feasibility(self, altitude_ft=None):
        """Feasibility at the fastest configured time scale"""
        return check_feasibility(self.maneuver, self.tau_range[0], self.params, altitude_ft)

    def as_flat_dict(self):
        """Scalar settings (no trajectory or airframe data) for metadata"""
        return {
            'maneuver': self.maneuver.kind,
            'tau_min': self.tau_range[0],
            'tau_max': self.tau_range[1],
            'initial_altitudes_ft': list(self.initial_altitudes_ft),
            'randomize_yaw': self.randomize_yaw,
            'agent_hz': self.agent_hz,
            'sim_dt_s': self.sim_dt_s,
            'termination_mode': self.termination_mode,
            'divergence_axis': self.divergence_axis,
            'seed': self.seed,
            'target_sample_divisor': self.target_sample_divisor,
        }


@dataclass
class EpisodeState:
    """Mutable bookkeeping of the running episode"""
    trajectory: object
    aircraft: object
    prev_action: ControlInputs
    tau: float
    altitude_ft: float
    initial_yaw_deg: float
    horizon: int
    step_index: int = 0
    segment: int = 0
    finished: bool = False
    fault: str = None
    history: list = field(default_factory=list)


class StepResult(NamedTuple):
    observation: np.ndarray
    reward: float
    terminated: bool
    truncated: bool
    info: dict


# =============================================================================
# PURE HELPERS
# =============================================================================

def denormalize_action(policy_action):
    """
    Map a policy action in [-1, 1]^4 onto ControlInputs

    Sticks pass through; throttle goes through (a + 1) / 2.
    """
    a = [float(v) for v in policy_action]
    return ControlInputs(a[0], a[1], a[2], (a[3] + 1.0) / 2.0)


def normalize_controls(controls):
    """Inverse of denormalize_action"""
    return np.array([
        controls.aileron_cmd,
        controls.elevator_cmd,
        controls.rudder_cmd,
        2.0 * controls.throttle_cmd - 1.0,
    ])


def check_termination(errors, mode, axis):
    """
    Divergence test on wrapped (roll, gamma, yaw) errors

    longitudinal: |gamma error| > 30
    lateral: |roll error| > 60 and |yaw error| > 60
    time_only: never
    """
    if mode == 'time_only':
        return False
    roll_error, gamma_error, yaw_error = errors
    if axis == 'longitudinal':
        return abs(gamma_error) > GAMMA_DIVERGENCE_DEG
    return abs(roll_error) > LATERAL_DIVERGENCE_DEG and abs(yaw_error) > LATERAL_DIVERGENCE_DEG


def build_observation(state, target, prev_action, remaining_fraction, tau, tau_range, params):
    """Fill and normalize the 26-slot observation"""
    errors = tracking_errors(target, measured_channels(state))
    roll, _, _ = state.euler_deg()
    gamma = flightdyn.flight_path_angle(state)
    u, v, w = state.velocity_body
    p, q, r = np.degrees(state.body_rates)
    limits = params.max_deflection_rad
    actuators = state.actuator_positions

    tau_low, tau_high = tau_range
    tau_slot = 0.5 if tau_high <= tau_low else (tau - tau_low) / (tau_high - tau_low)

    raw = np.array([
        errors['roll'], errors['gamma'], errors['yaw'], errors['mach'],
        state.altitude_ft, state.true_airspeed,
        u, v, w,
        math.sin(math.radians(roll)), math.cos(math.radians(roll)),
        math.sin(math.radians(gamma)), math.cos(math.radians(gamma)),
        p, q, r,
        prev_action.aileron_cmd, prev_action.elevator_cmd, prev_action.rudder_cmd, prev_action.throttle_cmd,
        actuators[0] / limits[0], actuators[1] / limits[1], actuators[2] / limits[2], actuators[3],
        remaining_fraction,
        tau_slot,
    ])
    return np.clip((raw - _OBS_LOW) / _OBS_SPAN, 0.0, 1.0)


def state_snapshot(state):
    """Plain-number view of an AircraftState for step info and traces"""
    roll, pitch, yaw = state.euler_deg()
    snapshot = {
        'time_s': state.time_s,
        'altitude_ft': state.altitude_ft,
        'true_airspeed': state.true_airspeed,
        'roll_deg': roll,
        'pitch_deg': pitch,
        'yaw_deg': yaw,
        'mach': flightdyn.mach_of(state),
        'north_m': float(state.position_ned[0]),
        'east_m': float(state.position_ned[1]),
        'specific_energy': flightdyn.specific_energy(state),
    }
    try:
        snapshot['gamma_deg'] = flightdyn.flight_path_angle(state)
    except UndefinedGammaError:
        snapshot['gamma_deg'] = float('nan')
    return snapshot


# =============================================================================
# ENVIRONMENT
# =============================================================================

class ManeuverEnv(gym.Env):
    """
    Maneuver-tracking environment

    Usage:
        env = ManeuverEnv(EpisodeConfig(maneuver=generate_loop()))
        obs, info = env.reset(seed=42)
        obs, reward, terminated, truncated, info = env.step(action)
    """

    metadata = {'render_modes': []}

    def __init__(self, config):
        super().__init__()
        self.config = config
        self.observation_space = spaces.Box(0.0, 1.0, shape=(OBS_SIZE,), dtype=np.float64)
        self.action_space = spaces.Box(-1.0, 1.0, shape=(ACTION_SIZE,), dtype=np.float64)
        self.layout_version = OBS_LAYOUT_VERSION
        self.episode = None
        self._worst_reward = reward_bounds(config.reward)[0]

    # -------------------------------------------------------------------------
    # reset / step
    # -------------------------------------------------------------------------

    def reset(self, *, seed=None, options=None):
        """
        Start an episode

        options may force individual draws: initial_yaw_deg, altitude_ft, tau.
        """
        if seed is None and self._np_random is None:
            seed = self.config.seed
        super().reset(seed=seed)
        options = options or {}
        config = self.config
        rng = self.np_random

        # Draw order is fixed so a seed always yields the same episode
        drawn_yaw = float(rng.uniform(0.0, 360.0))
        drawn_altitude = config.initial_altitudes_ft[int(rng.integers(len(config.initial_altitudes_ft)))]
        tau_low, tau_high = config.tau_range
        drawn_tau = float(rng.uniform(tau_low, tau_high)) if tau_high > tau_low else tau_low

        reference = config.maneuver
        yaw = drawn_yaw if config.randomize_yaw else float(reference.yaw[0])
        yaw = float(options.get('initial_yaw_deg', yaw))
        altitude = float(options.get('altitude_ft', drawn_altitude))
        tau = float(options.get('tau', drawn_tau))

        aircraft, trim_controls = trim_state(altitude, float(reference.mach[0]), yaw, config.params)
        trajectory = rebase_yaw(reference, yaw)

        self.episode = EpisodeState(
            trajectory=trajectory,
            aircraft=aircraft,
            prev_action=trim_controls,
            tau=tau,
            altitude_ft=altitude,
            initial_yaw_deg=yaw,
            horizon=horizon_steps(trajectory.duration_s, tau, config.agent_hz),
        )

        target, remaining, _ = self._target(0)
        observation = build_observation(aircraft, target, trim_controls, remaining, tau,
                                        config.tau_range, config.params)
        logger.debug(f"Reset: yaw={yaw:.2f} alt={altitude:.0f} ft tau={tau:.3f} "
                     f"horizon={self.episode.horizon}")
        info = {
            'episode': self.episode,
            'target': target,
            'state': state_snapshot(aircraft),
            'trim_action': normalize_controls(trim_controls),
        }
        return observation, info

    def step(self, action):
        episode = self.episode
        if episode is None or episode.finished:
            raise RuntimeError("call reset() before step()")

        action = np.asarray(action, dtype=np.float64).reshape(ACTION_SIZE)
        if not np.all(np.isfinite(action)) or np.any(np.abs(action) > 1.0):
            logger.warning(f"⚠️ Action {action.tolist()} outside [-1, 1], clamping")
            action = np.clip(np.nan_to_num(action, nan=0.0), -1.0, 1.0)
        controls = denormalize_action(action)

        try:
            aircraft = self._simulate(controls)
            episode.step_index += 1
            target, remaining, done = self._target(episode.step_index)
            measured = measured_channels(aircraft)
        except (SimulationFault, UndefinedGammaError) as e:
            return self._fault_result(e, controls)

        config = self.config
        reward, breakdown = compute_reward(target, measured, controls, episode.prev_action, config.reward)
        errors = breakdown.raw_errors
        terminated = check_termination((errors['roll'], errors['gamma'], errors['yaw']),
                                       config.termination_mode, config.divergence_axis)
        truncated = done and not terminated

        observation = build_observation(aircraft, target, controls, remaining, episode.tau,
                                        config.tau_range, config.params)
        episode.aircraft = aircraft
        episode.prev_action = controls
        episode.finished = terminated or truncated

        info = {
            'breakdown': breakdown,
            'state': state_snapshot(aircraft),
            'target': target,
            'controls': controls,
            'step': episode.step_index,
            'segment': episode.segment,
            'fault': None,
        }
        return StepResult(observation, float(reward), bool(terminated), bool(truncated), info)

    # -------------------------------------------------------------------------
    # segments (maneuver concatenation)
    # -------------------------------------------------------------------------

    def begin_segment(self, trajectory):
        """
        Continue the running episode with a new reference

        The reference is rebased to the aircraft's current yaw; aircraft state
        and previous action carry over, the step counter restarts.
        """
        episode = self.episode
        if episode is None:
            raise RuntimeError("call reset() before begin_segment()")
        if episode.fault:
            raise RuntimeError(f"episode ended with simulation fault in '{episode.fault}'")

        _, _, yaw = episode.aircraft.euler_deg()
        episode.history.append(state_snapshot(episode.aircraft))
        episode.trajectory = rebase_yaw(trajectory, yaw)
        episode.horizon = horizon_steps(trajectory.duration_s, episode.tau, self.config.agent_hz)
        episode.step_index = 0
        episode.segment += 1
        episode.finished = False

        target, remaining, _ = self._target(0)
        logger.info(f"🔗 Segment {episode.segment} ({trajectory.kind}) handoff at "
                    f"t={episode.aircraft.time_s:.1f} s, yaw={yaw:.1f}, "
                    f"alt={episode.aircraft.altitude_ft:.0f} ft")
        return build_observation(episode.aircraft, target, episode.prev_action, remaining,
                                 episode.tau, self.config.tau_range, self.config.params)

    # -------------------------------------------------------------------------
    # internals
    # -------------------------------------------------------------------------

    def _target(self, step_index):
        episode = self.episode
        return sample_target(episode.trajectory, step_index, self.config.agent_hz, episode.tau,
                             hold=self.config.target_sample_divisor)

    def _simulate(self, controls):
        """Hold controls for one agent period of simulator substeps"""
        config = self.config
        aircraft = self.episode.aircraft
        for _ in range(config.substeps):
            aircraft = flightdyn.step(aircraft, controls, config.sim_dt_s, config.params)
        return aircraft

    def _fault_result(self, error, controls):
        episode = self.episode
        fault = getattr(error, 'field', 'velocity_body')
        logger.error(f"❌ Simulation fault in '{fault}' at step {episode.step_index}: {error}")
        episode.fault = fault
        episode.finished = True

        target, remaining, _ = self._target(episode.step_index)
        try:
            observation = build_observation(episode.aircraft, target, episode.prev_action, remaining,
                                             episode.tau, self.config.tau_range, self.config.params)
        except UndefinedGammaError:
            observation = np.full(OBS_SIZE, 0.5)
        info = {
            'breakdown': None,
            'state': None,
            'target': target,
            'controls': controls,
            'step': episode.step_index,
            'segment': episode.segment,
            'fault': fault,
        }
        return StepResult(observation, float(self._worst_reward), True, False, info)
