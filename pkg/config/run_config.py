"""
File: config/run_config.py
Location: aerobatic_rl/config/run_config.py
Purpose: Flat `key = value` run configuration and the builders that turn it
         into EpisodeConfig / SacConfig / AircraftParams

Recognized keys:
    env.*                                   episode settings
    traj.*                                  generator parameters or traj.file
    reward.<maneuver>.<component>.scaling   reward overrides
    reward.<maneuver>.<component>.weight
    aircraft.file / aircraft.<field>        airframe file and field overrides
    sac.<field>                             SacConfig fields
    eval.*                                  evaluation settings
"""

import logging
import os
from dataclasses import fields

from config import settings
from core.errors import ConfigError
from utils.validators import parse_bool, parse_float_list, parse_key_value_lines, parse_scalar

logger = logging.getLogger(__name__)

# Defaults for the fixed sections; None means "use the module default"
ENV_DEFAULTS = {
    'maneuver': 'loop',
    'agent_hz': settings.AGENT_HZ,
    'sim_dt_s': settings.SIM_DT_S,
    'termination_mode': 'time_only',
    'divergence_axis': None,
    'initial_altitudes_ft': (settings.INITIAL_ALTITUDE_FT,),
    'tau_min': 1.0,
    'tau_max': 1.0,
    'randomize_yaw': True,
    'target_sample_divisor': 1,
    'seed': 0,
}

TRAJ_DEFAULTS = {
    'file': None,
    'duration_s': None,
    'entry_mach': None,
    'mach_dip': None,
    'roll_fraction': None,
    'pitch_amplitude_deg': None,
    'yaw_amplitude_deg': None,
    'dt_s': None,
    'noise': 0.0,
    'noise_seed': 0,
}

EVAL_DEFAULTS = {
    'episodes': settings.EVAL_EPISODES,
    'gamma_bound_deg': settings.SUCCESS_GAMMA_BOUND_DEG,
    'roll_bound_deg': settings.SUCCESS_ROLL_BOUND_DEG,
}

# Generator keyword arguments each maneuver accepts
TRAJ_ARGUMENTS = {
    'loop': ('duration_s', 'entry_mach', 'mach_dip', 'dt_s'),
    'immelmann': ('duration_s', 'entry_mach', 'mach_dip', 'roll_fraction', 'dt_s'),
    'barrel_roll': ('duration_s', 'entry_mach', 'pitch_amplitude_deg', 'yaw_amplitude_deg', 'dt_s'),
    'hold': ('duration_s', 'entry_mach', 'dt_s'),
}

_FIXED_SECTIONS = {
    'env': ENV_DEFAULTS,
    'traj': TRAJ_DEFAULTS,
    'eval': EVAL_DEFAULTS,
}


def _sac_fields():
    from core.sac_agent import SacConfig
    return {f.name for f in fields(SacConfig)}


def _aircraft_fields():
    from core.flightdyn import AircraftParams
    return {f.name for f in fields(AircraftParams)}


def _check_key(key):
    """Return None when key is recognized, else the reason it is not"""
    section, _, rest = key.partition('.')
    if not rest:
        return f"missing section in '{key}'"

    if section in _FIXED_SECTIONS:
        return None if rest in _FIXED_SECTIONS[section] else f"unknown {section} key '{rest}'"
    if section == 'sac':
        return None if rest in _sac_fields() else f"unknown sac key '{rest}'"
    if section == 'aircraft':
        return None if rest == 'file' or rest in _aircraft_fields() else f"unknown aircraft key '{rest}'"
    if section == 'reward':
        from core.reward import COMPONENT_NAMES, PRESET_TRACKING_WEIGHTS
        parts = rest.split('.')
        if len(parts) != 3:
            return f"reward keys look like reward.<maneuver>.<component>.<scaling|weight>, got '{key}'"
        maneuver, component, attribute = parts
        if maneuver not in PRESET_TRACKING_WEIGHTS:
            return f"unknown reward maneuver '{maneuver}'"
        if component not in COMPONENT_NAMES:
            return f"unknown reward component '{component}'"
        if attribute not in ('scaling', 'weight'):
            return f"unknown reward attribute '{attribute}'"
        return None
    return f"unknown section '{section}'"


def format_value(value):
    """Render a resolved value back into the config text format"""
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return ', '.join(format_value(v) for v in value)
    return str(value)


def _empty_to_none(value):
    return None if value == '' else value


class RunConfig:
    """
    Parsed run config

    Usage:
        config = RunConfig.load('runs/loop.cfg')
        config = config.with_overrides({'env.seed': 3})
        episode_config = config.episode_config()
        sac_config = config.sac_config()
    """

    def __init__(self, values=None, source='<defaults>'):
        self.values = dict(values or {})
        self.source = source

    # -------------------------------------------------------------------------
    # construction
    # -------------------------------------------------------------------------

    @classmethod
    def from_text(cls, text, source='<text>'):
        values = {}
        for line_number, key, raw in parse_key_value_lines(text, source):
            problem = _check_key(key)
            if problem:
                raise ConfigError(f"{source}:{line_number}: {problem}")
            values[key] = _empty_to_none(parse_scalar(raw))
        return cls(values, source)

    @classmethod
    def load(cls, path=None):
        """
        Load a run config file

        path None loads the shipped default config (or pure defaults when
        that file is missing).
        """
        if path is None:
            path = settings.DEFAULT_RUN_CONFIG
            if not os.path.exists(path):
                logger.debug(f"No default run config at {path}, using built-in defaults")
                return cls()
        try:
            with open(path, encoding='utf-8') as f:
                text = f.read()
        except OSError as e:
            raise ConfigError(f"cannot read run config {path}: {e}")
        config = cls.from_text(text, source=path)
        logger.info(f"Loaded run config {path} ({len(config.values)} keys)")
        return config

    def with_overrides(self, overrides):
        """Copy with extra keys set; None values are ignored"""
        values = dict(self.values)
        for key, value in overrides.items():
            if value is None:
                continue
            problem = _check_key(key)
            if problem:
                raise ConfigError(f"override: {problem}")
            values[key] = parse_scalar(value) if isinstance(value, str) else value
        return RunConfig(values, self.source)

    # -------------------------------------------------------------------------
    # lookups
    # -------------------------------------------------------------------------

    def get(self, key):
        if key in self.values:
            return self.values[key]
        section, _, rest = key.partition('.')
        return _FIXED_SECTIONS[section][rest]

    def section(self, name):
        prefix = name + '.'
        return {key[len(prefix):]: value for key, value in self.values.items() if key.startswith(prefix)}

    def _number(self, key, kind=float):
        value = self.get(key)
        try:
            return kind(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{key} must be a number, got {value!r}")

    @property
    def maneuver(self):
        return str(self.get('env.maneuver'))

    @property
    def seed(self):
        return self._number('env.seed', int)

    @property
    def eval_episodes(self):
        return self._number('eval.episodes', int)

    @property
    def gamma_bound_deg(self):
        return self._number('eval.gamma_bound_deg')

    @property
    def roll_bound_deg(self):
        return self._number('eval.roll_bound_deg')

    # -------------------------------------------------------------------------
    # builders
    # -------------------------------------------------------------------------

    def aircraft_params(self):
        from core.flightdyn import load_aircraft_params

        path = self.values.get('aircraft.file') or settings.DEFAULT_AIRCRAFT_FILE
        params = load_aircraft_params(path)
        overrides = {key: value for key, value in self.section('aircraft').items() if key != 'file'}
        if overrides:
            params = params.with_overrides(
                {k: v if isinstance(v, (str, tuple, list)) else float(v) for k, v in overrides.items()})
        return params

    def trajectory(self):
        """Reference trajectory: traj.file when set, else the maneuver generator"""
        from core.trajectory import add_pilot_noise, generate, load_pilot_csv

        maneuver = self.maneuver
        path = self.get('traj.file')
        if path:
            traj = load_pilot_csv(path, kind=maneuver)
        else:
            if maneuver not in TRAJ_ARGUMENTS:
                raise ConfigError(f"env.maneuver must be one of {sorted(TRAJ_ARGUMENTS)}, got {maneuver!r}")
            allowed = TRAJ_ARGUMENTS[maneuver]
            kwargs = {}
            for name in ('duration_s', 'entry_mach', 'mach_dip', 'roll_fraction',
                         'pitch_amplitude_deg', 'yaw_amplitude_deg', 'dt_s'):
                value = self.get(f'traj.{name}')
                if value is None:
                    continue
                if name not in allowed:
                    raise ConfigError(f"traj.{name} does not apply to maneuver {maneuver!r}")
                kwargs[name] = float(value)
            traj = generate(maneuver, **kwargs)

        noise = self._number('traj.noise')
        if noise > 0:
            traj = add_pilot_noise(traj, seed=self._number('traj.noise_seed', int), scale=noise)
        return traj

    def reward_config(self):
        from core.reward import PRESET_TRACKING_WEIGHTS, RewardConfig

        maneuver = self.maneuver
        preset = maneuver if maneuver in PRESET_TRACKING_WEIGHTS else 'loop'
        reward = RewardConfig.preset(preset)
        prefix = f'reward.{preset}.'
        for key, value in sorted(self.values.items()):
            if not key.startswith(prefix):
                continue
            component, attribute = key[len(prefix):].split('.')
            reward = reward.with_component(component, **{attribute: float(value)})
        return reward

    def sac_config(self):
        from core.sac_agent import SacConfig

        mapping = dict(self.section('sac'))
        if 'hidden_dims' in mapping:
            mapping['hidden_dims'] = tuple(int(h) for h in parse_float_list(mapping['hidden_dims']))
        mapping.setdefault('seed', self.seed)
        return SacConfig.from_mapping(mapping)

    def episode_config(self):
        from core.environment import EpisodeConfig

        return EpisodeConfig(
            maneuver=self.trajectory(),
            tau_range=(self._number('env.tau_min'), self._number('env.tau_max')),
            initial_altitudes_ft=tuple(parse_float_list(self.get('env.initial_altitudes_ft'))),
            randomize_yaw=parse_bool(self.get('env.randomize_yaw')),
            agent_hz=self._number('env.agent_hz'),
            sim_dt_s=self._number('env.sim_dt_s'),
            termination_mode=str(self.get('env.termination_mode')),
            divergence_axis=self.get('env.divergence_axis'),
            seed=self.seed,
            reward=self.reward_config(),
            params=self.aircraft_params(),
            target_sample_divisor=self._number('env.target_sample_divisor', int),
        )

    # -------------------------------------------------------------------------
    # snapshot
    # -------------------------------------------------------------------------

    def resolved(self):
        """Every setting with defaults filled in, as {key: value}"""
        resolved = {}
        for section, defaults in _FIXED_SECTIONS.items():
            for name in defaults:
                resolved[f'{section}.{name}'] = self.get(f'{section}.{name}')

        resolved['aircraft.file'] = self.values.get('aircraft.file') or settings.DEFAULT_AIRCRAFT_FILE
        params = self.aircraft_params()
        for field in fields(params):
            resolved[f'aircraft.{field.name}'] = getattr(params, field.name)

        for name, value in self.sac_config().as_dict().items():
            resolved[f'sac.{name}'] = value

        reward = self.reward_config()
        for component in reward.components:
            resolved[f'reward.{reward.maneuver}.{component.name}.scaling'] = component.scaling
            resolved[f'reward.{reward.maneuver}.{component.name}.weight'] = component.weight
        return resolved

    def snapshot(self):
        """Resolved config rendered as sorted `key = value` text"""
        lines = [f'{key} = {format_value(value)}' for key, value in sorted(self.resolved().items())]
        return '\n'.join(lines) + '\n'
