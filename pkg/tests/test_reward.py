import math

import pytest

from core.errors import ConfigError
from core.flightdyn import ControlInputs
from core.reward import (
    COMPONENT_NAMES, ErrorComponentSpec, RewardConfig, asymptotic_component, compute_reward,
    linear_component, reward_bounds, reward_from_errors, vertical_attenuation, wrap_angle_error,
)
from core.trajectory import TargetPoint

LEVEL = TargetPoint(0.0, 0.0, 90.0, 0.6)
NEUTRAL = ControlInputs(0.0, 0.0, 0.0, 0.5)


@pytest.fixture
def loop_preset():
    return RewardConfig.preset('loop')


@pytest.mark.parametrize('target, actual, expected', [
    (10.0, 350.0, 20.0),
    (180.0, -180.0, 0.0),
    (-90.0, 90.0, 180.0),
    (350.0, 10.0, -20.0),
])
def test_wrap_angle_error(target, actual, expected):
    assert wrap_angle_error(target, actual) == pytest.approx(expected)


@pytest.mark.parametrize('error, expected', [(0.0, 1.0), (15.0, 0.5), (45.0, 0.25), (-15.0, 0.5)])
def test_asymptotic_component(error, expected):
    assert asymptotic_component(error, 15.0) == pytest.approx(expected)


def test_asymptotic_flattens_with_scaling():
    assert asymptotic_component(10.0, 5.0) < asymptotic_component(10.0, 20.0)


@pytest.mark.parametrize('delta, expected', [(0.0, 0.0), (2.0, 1.0), (0.5, 0.25), (-3.0, 1.0)])
def test_linear_component(delta, expected):
    assert linear_component(delta, 2.0) == pytest.approx(expected)


class TestComputeReward:
    def test_perfect_tracking(self, loop_preset):
        total, _ = compute_reward(LEVEL, (0.0, 0.0, 90.0, 0.6), NEUTRAL, NEUTRAL, loop_preset)
        assert total == pytest.approx(0.90)

    def test_worst_case(self, loop_preset):
        errors = {'roll': math.inf, 'gamma': math.inf, 'yaw': math.inf, 'mach': math.inf,
                  'd_aileron': 2.0, 'd_elevator': 2.0, 'd_rudder': 2.0, 'd_throttle': 1.0}
        total, _ = reward_from_errors(errors, loop_preset)
        assert total == pytest.approx(-0.10)

    def test_gamma_error_at_scaling(self, loop_preset):
        total, breakdown = compute_reward(LEVEL, (0.0, -15.0, 90.0, 0.6), NEUTRAL, NEUTRAL, loop_preset)
        assert total == pytest.approx(0.725)
        assert breakdown.normalized['gamma'] == pytest.approx(0.5)

    def test_contributions_sum_to_total(self, loop_preset):
        action = ControlInputs(0.3, -0.2, 0.1, 0.9)
        total, breakdown = compute_reward(TargetPoint(20.0, 30.0, 10.0, 0.5), (5.0, 22.0, 350.0, 0.55),
                                          action, NEUTRAL, loop_preset)
        summed = sum(breakdown.contributions[name] for name in COMPONENT_NAMES)
        assert summed == pytest.approx(total * loop_preset.total_abs_weight, abs=1e-12)

    def test_inverted_representation_independent(self, loop_preset):
        target = TargetPoint(180.0, 45.0, 180.0, 0.5)
        first, _ = compute_reward(target, (180.0, 45.0, 180.0, 0.5), NEUTRAL, NEUTRAL, loop_preset)
        second, _ = compute_reward(target, (-180.0, 45.0, -180.0 + 360.0, 0.5), NEUTRAL, NEUTRAL, loop_preset)
        assert first == second

    def test_monotone_in_tracking_error(self, loop_preset):
        totals = [compute_reward(LEVEL, (0.0, g, 90.0, 0.6), NEUTRAL, NEUTRAL, loop_preset)[0]
                  for g in (0.0, 5.0, 20.0, 60.0)]
        assert totals == sorted(totals, reverse=True)

    def test_monotone_in_command_delta(self, loop_preset):
        totals = [compute_reward(LEVEL, (0.0, 0.0, 90.0, 0.6), ControlInputs(a, 0.0, 0.0, 0.5), NEUTRAL,
                                 loop_preset)[0]
                  for a in (0.0, 0.5, 1.0)]
        assert totals == sorted(totals, reverse=True)

    def test_vertical_attenuation_masks_roll_flip(self, loop_preset):
        apex = TargetPoint(0.0, 90.0, 0.0, 0.5)
        flipped, breakdown = compute_reward(apex, (180.0, 90.0, 180.0, 0.5), NEUTRAL, NEUTRAL, loop_preset)
        assert breakdown.attenuation == 0.0
        assert flipped == pytest.approx(0.90)

    def test_bounds(self, loop_preset):
        assert reward_bounds(loop_preset) == pytest.approx((-0.10, 0.90))


class TestRewardConfig:
    def test_presets_exist(self):
        for maneuver in ('loop', 'barrel_roll', 'immelmann', 'hold'):
            assert RewardConfig.preset(maneuver).maneuver == maneuver

    def test_barrel_roll_weights_roll_highest(self):
        preset = RewardConfig.preset('barrel_roll')
        assert preset.component('roll').weight > preset.component('gamma').weight

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            RewardConfig.preset('cuban_eight')

    def test_with_component(self, loop_preset):
        changed = loop_preset.with_component('gamma', scaling=5.0)
        assert changed.component('gamma').scaling == 5.0
        assert changed.component('gamma').weight == loop_preset.component('gamma').weight

    def test_tracking_weight_must_be_positive(self):
        with pytest.raises(ConfigError):
            ErrorComponentSpec('roll', 'asymptotic', 30.0, -0.1)

    def test_command_weight_must_be_negative(self):
        with pytest.raises(ConfigError):
            ErrorComponentSpec('d_rudder', 'linear', 2.0, 0.1)

    def test_missing_component(self, loop_preset):
        with pytest.raises(ConfigError):
            RewardConfig(loop_preset.components[:-1])


@pytest.mark.parametrize('gamma, expected', [(0.0, 1.0), (90.0, 0.0), (-90.0, 0.0), (60.0, 0.5)])
def test_vertical_attenuation(gamma, expected):
    assert vertical_attenuation(gamma) == pytest.approx(expected)


def test_attenuation_scales_errors_not_contributions(loop_preset):
    errors = dict.fromkeys(COMPONENT_NAMES, 0.0)
    errors['roll'] = 20.0
    _, breakdown = reward_from_errors(errors, loop_preset, attenuation=0.5)
    roll = loop_preset.component('roll')
    assert breakdown.normalized['roll'] == pytest.approx(asymptotic_component(10.0, roll.scaling))
    assert breakdown.contributions['roll'] == pytest.approx(roll.weight * breakdown.normalized['roll'])
