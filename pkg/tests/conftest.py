"""
Shared fixtures

Slow tests (short training runs, long rollouts) carry @pytest.mark.slow;
deselect them with `pytest -m "not slow"`.
"""

import pytest

from config import settings
from core.environment import EpisodeConfig, ManeuverEnv
from core.flightdyn import attitude_state, load_aircraft_params
from core.sac_agent import SacConfig
from core.trajectory import generate_hold, generate_loop


@pytest.fixture(scope='session')
def genjet():
    return load_aircraft_params(settings.DEFAULT_AIRCRAFT_FILE)


@pytest.fixture(scope='session')
def loop_40s():
    return generate_loop(40.0, 0.0, 0.6, 0.15, 0.1)


@pytest.fixture
def hold_config(genjet):
    """Two-second attitude hold: 20 agent steps, cheap enough for unit tests"""
    return EpisodeConfig(maneuver=generate_hold(duration_s=2.0), params=genjet, seed=3)


@pytest.fixture
def tiny_sac():
    return SacConfig(batch_size=8, buffer_capacity=64, warmup_steps=10, hidden_dims=(8, 8), seed=5)


class OracleEnv(ManeuverEnv):
    """Environment whose aircraft lands exactly on the next target every step"""

    def _simulate(self, controls):
        episode = self.episode
        target, _, _ = self._target(episode.step_index + 1)
        return attitude_state(target.roll_deg, target.gamma_deg, target.yaw_deg, target.mach,
                              episode.altitude_ft, self.config.params,
                              time_s=episode.aircraft.time_s + 1.0 / self.config.agent_hz)


@pytest.fixture
def oracle_env_class():
    return OracleEnv
