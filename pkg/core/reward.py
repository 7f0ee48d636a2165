"""
File: core/reward.py
Location: aerobatic_rl/core/reward.py
Purpose: Trajectory-tracking reward

Eight error components:
- 4 tracking errors (roll, gamma, yaw, mach), asymptotic: 1 / (1 + |e|/s)
- 4 command changes (d_aileron, d_elevator, d_rudder, d_throttle), linear: min(|d|/max, 1)

total = sum(w_i * c_i) / sum(|w_i|); command weights are negative.
"""

import logging
import math
from dataclasses import dataclass, replace

from core.errors import ConfigError
from utils.helpers import wrap_180

logger = logging.getLogger(__name__)

TRACKING_COMPONENTS = ('roll', 'gamma', 'yaw', 'mach')
COMMAND_COMPONENTS = ('d_aileron', 'd_elevator', 'd_rudder', 'd_throttle')
COMPONENT_NAMES = TRACKING_COMPONENTS + COMMAND_COMPONENTS

DEFAULT_SCALING = {
    'roll': 30.0,
    'gamma': 15.0,
    'yaw': 30.0,
    'mach': 0.05,
    # command max-deltas: full range of each command
    'd_aileron': 2.0,
    'd_elevator': 2.0,
    'd_rudder': 2.0,
    'd_throttle': 1.0,
}

COMMAND_WEIGHT = -0.025

PRESET_TRACKING_WEIGHTS = {
    'loop': {'gamma': 0.35, 'roll': 0.25, 'yaw': 0.20, 'mach': 0.10},
    'barrel_roll': {'roll': 0.35, 'gamma': 0.20, 'yaw': 0.25, 'mach': 0.10},
    'immelmann': {'gamma': 0.30, 'roll': 0.30, 'yaw': 0.20, 'mach': 0.10},
    'hold': {'gamma': 0.30, 'roll': 0.30, 'yaw': 0.20, 'mach': 0.10},
}


@dataclass(frozen=True)
class ErrorComponentSpec:
    name: str
    kind: str
    scaling: float
    weight: float

    def __post_init__(self):
        if self.name not in COMPONENT_NAMES:
            raise ConfigError(f"unknown reward component {self.name!r}")
        if not self.scaling > 0:
            raise ConfigError(f"reward component {self.name}: scaling must be > 0, got {self.scaling}")

        if self.name in TRACKING_COMPONENTS:
            if self.kind != 'asymptotic':
                raise ConfigError(f"reward component {self.name}: tracking components are asymptotic")
            if not self.weight > 0:
                raise ConfigError(f"reward component {self.name}: tracking weight must be > 0, got {self.weight}")
        else:
            if self.kind != 'linear':
                raise ConfigError(f"reward component {self.name}: command components are linear")
            if not self.weight < 0:
                raise ConfigError(f"reward component {self.name}: command weight must be < 0, got {self.weight}")


@dataclass(frozen=True)
class RewardConfig:
    """Exactly one ErrorComponentSpec per component name, in COMPONENT_NAMES order"""
    components: tuple
    maneuver: str = 'custom'

    def __post_init__(self):
        names = [c.name for c in self.components]
        if sorted(names) != sorted(COMPONENT_NAMES) or len(names) != len(COMPONENT_NAMES):
            raise ConfigError(f"reward config needs exactly the components {COMPONENT_NAMES}, got {names}")
        ordered = tuple(sorted(self.components, key=lambda c: COMPONENT_NAMES.index(c.name)))
        object.__setattr__(self, 'components', ordered)
        if not self.total_abs_weight > 0:
            raise ConfigError("reward weights sum to zero")

    @property
    def total_abs_weight(self):
        return sum(abs(c.weight) for c in self.components)

    def component(self, name):
        return self.components[COMPONENT_NAMES.index(name)]

    def with_component(self, name, scaling=None, weight=None):
        """Copy with one component's scaling and/or weight replaced"""
        current = self.component(name)
        updated = replace(
            current,
            scaling=current.scaling if scaling is None else float(scaling),
            weight=current.weight if weight is None else float(weight),
        )
        components = tuple(updated if c.name == name else c for c in self.components)
        return RewardConfig(components, self.maneuver)

    @classmethod
    def preset(cls, maneuver):
        """Default scaling factors and the maneuver's weight set"""
        try:
            tracking = PRESET_TRACKING_WEIGHTS[maneuver]
        except KeyError:
            raise ConfigError(f"no reward preset for maneuver {maneuver!r}")

        components = []
        for name in TRACKING_COMPONENTS:
            components.append(ErrorComponentSpec(name, 'asymptotic', DEFAULT_SCALING[name], tracking[name]))
        for name in COMMAND_COMPONENTS:
            components.append(ErrorComponentSpec(name, 'linear', DEFAULT_SCALING[name], COMMAND_WEIGHT))
        return cls(tuple(components), maneuver)


@dataclass(frozen=True)
class RewardBreakdown:
    """Per-component diagnostics; contributions sum to total * total_abs_weight"""
    raw_errors: dict
    normalized: dict
    contributions: dict
    total: float
    attenuation: float = 1.0

    def as_dict(self):
        record = {}
        for name in COMPONENT_NAMES:
            record[f"err_{name}"] = self.raw_errors[name]
            record[f"reward_{name}"] = self.contributions[name]
        record['attenuation'] = self.attenuation
        record['reward'] = self.total
        return record


# =============================================================================
# NORMALIZATION
# =============================================================================

def wrap_angle_error(target_deg, actual_deg):
    """Signed target - actual, wrapped into (-180, 180]"""
    return wrap_180(target_deg - actual_deg)


def asymptotic_component(raw_error, scaling):
    """1 - e'/(1 + e') = 1/(1 + e') with e' = |raw_error| / scaling"""
    if not scaling > 0:
        raise ValueError(f"scaling must be > 0, got {scaling}")
    return 1.0 / (1.0 + abs(raw_error) / scaling)


def linear_component(command_delta, max_delta):
    if not max_delta > 0:
        raise ValueError(f"max_delta must be > 0, got {max_delta}")
    return min(abs(command_delta) / max_delta, 1.0)


def vertical_attenuation(gamma_target_deg):
    """
    cos(gamma_target), exactly 0 at (and beyond) the vertical

    The factor multiplies the raw roll and yaw errors before they are
    normalized, not the weighted contributions.
    """
    if abs(gamma_target_deg) >= 90.0:
        return 0.0
    return math.cos(math.radians(gamma_target_deg))


# =============================================================================
# REWARD
# =============================================================================

def tracking_errors(target, measured):
    """
    Signed tracking errors (target - actual)

    Args:
        target: TargetPoint
        measured: (roll_deg, gamma_deg, yaw_deg, mach)

    Returns:
        dict: roll/yaw wrapped, gamma/mach plain differences
    """
    roll, gamma, yaw, mach = measured
    return {
        'roll': wrap_angle_error(target.roll_deg, roll),
        'gamma': target.gamma_deg - gamma,
        'yaw': wrap_angle_error(target.yaw_deg, yaw),
        'mach': target.mach - mach,
    }


def command_deltas(action, prev_action):
    """Change of each control command between consecutive agent steps"""
    return {
        'd_aileron': action.aileron_cmd - prev_action.aileron_cmd,
        'd_elevator': action.elevator_cmd - prev_action.elevator_cmd,
        'd_rudder': action.rudder_cmd - prev_action.rudder_cmd,
        'd_throttle': action.throttle_cmd - prev_action.throttle_cmd,
    }


def reward_from_errors(errors, config, attenuation=1.0):
    """
    Weighted average over the eight components

    Args:
        errors: {component name: raw error} for all eight components
        config: RewardConfig
        attenuation: factor applied to the roll and yaw errors

    Returns:
        tuple: (total, RewardBreakdown)
    """
    normalized = {}
    contributions = {}
    for spec in config.components:
        raw = errors[spec.name]
        if spec.kind == 'asymptotic':
            if spec.name in ('roll', 'yaw'):
                raw = raw * attenuation if attenuation else 0.0
            value = asymptotic_component(raw, spec.scaling)
        else:
            value = linear_component(raw, spec.scaling)
        normalized[spec.name] = value
        contributions[spec.name] = spec.weight * value

    total = sum(contributions[name] for name in COMPONENT_NAMES) / config.total_abs_weight
    breakdown = RewardBreakdown(
        raw_errors=dict(errors),
        normalized=normalized,
        contributions=contributions,
        total=total,
        attenuation=attenuation,
    )
    return total, breakdown


def compute_reward(target, measured, action, prev_action, config):
    """
    Scalar reward for one agent step

    Near the vertical the roll and yaw errors are scaled by cos(gamma_target),
    so the Euler flip at the loop apex does not register as an error.
    """
    errors = tracking_errors(target, measured)
    errors.update(command_deltas(action, prev_action))
    return reward_from_errors(errors, config, vertical_attenuation(target.gamma_deg))


def reward_bounds(config):
    """(lowest, highest) reachable total for a config"""
    positive = sum(c.weight for c in config.components if c.weight > 0)
    negative = sum(-c.weight for c in config.components if c.weight < 0)
    return -negative / config.total_abs_weight, positive / config.total_abs_weight
