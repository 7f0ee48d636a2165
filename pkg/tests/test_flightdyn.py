import math

import numpy as np
import pytest

from core.errors import AtmosphereDomainError, InfeasibleTrimError, UndefinedGammaError
from core.flightdyn import (
    G0, AircraftState, ControlInputs, attitude_state, flight_path_angle, isa_atmosphere,
    isa_temperature, mach_of, measured_channels, step, trim_state,
)


def _state_with_velocity_ned(vel_ned, altitude_ft=4000.0):
    # identity attitude: body axes are the NED axes
    return AircraftState(
        position_ned=np.array([0.0, 0.0, -altitude_ft / 3.28084]),
        velocity_body=np.array(vel_ned, dtype=float),
        attitude_quat=np.array([1.0, 0.0, 0.0, 0.0]),
        body_rates=np.zeros(3),
        actuator_positions=np.zeros(4),
    )


class TestAtmosphere:
    def test_sea_level(self):
        density, sound_speed = isa_atmosphere(0.0)
        assert sound_speed == pytest.approx(340.29, abs=0.01)
        assert density == pytest.approx(1.225, abs=1e-3)

    def test_density_falls_with_altitude(self):
        assert isa_atmosphere(4000.0)[0] < isa_atmosphere(0.0)[0]

    def test_isothermal_layer(self):
        assert isa_temperature(36090.0) == pytest.approx(isa_temperature(40000.0), abs=0.01)

    @pytest.mark.parametrize('altitude_ft', [-1.0, 60001.0])
    def test_out_of_range(self, altitude_ft):
        with pytest.raises(AtmosphereDomainError):
            isa_atmosphere(altitude_ft)


class TestControlInputs:
    def test_rejects_stick_out_of_range(self):
        with pytest.raises(ValueError):
            ControlInputs(1.5, 0.0, 0.0, 0.5)

    def test_rejects_negative_throttle(self):
        with pytest.raises(ValueError):
            ControlInputs(0.0, 0.0, 0.0, -0.1)


class TestTrim:
    def test_level_trim(self, genjet):
        state, controls = trim_state(4000.0, 0.6, 0.0, genjet)
        roll, gamma, yaw, mach = measured_channels(state)
        assert roll == pytest.approx(0.0, abs=0.01)
        assert gamma == pytest.approx(0.0, abs=0.05)
        assert yaw == pytest.approx(0.0, abs=1e-6) or yaw == pytest.approx(360.0, abs=1e-6)
        assert mach == pytest.approx(0.6, abs=0.005)
        assert 0.0 <= controls.throttle_cmd <= 1.0

    def test_heading_symmetry(self, genjet):
        level, controls = trim_state(4000.0, 0.6, 0.0, genjet)
        turned, turned_controls = trim_state(4000.0, 0.6, 237.0, genjet)
        assert turned.euler_deg()[2] == pytest.approx(237.0, abs=1e-9)
        assert turned_controls == controls
        np.testing.assert_allclose(turned.velocity_body, level.velocity_body)
        assert turned.altitude_ft == pytest.approx(level.altitude_ft)

    def test_supersonic_is_infeasible(self, genjet):
        with pytest.raises(InfeasibleTrimError):
            trim_state(4000.0, 2.5, 0.0, genjet)

    def test_underpowered_airframe_has_no_trim(self, genjet):
        with pytest.raises(InfeasibleTrimError):
            trim_state(4000.0, 0.6, 0.0, genjet.with_overrides({'max_thrust': 100.0}))

    def test_trim_balances_forces(self, genjet):
        state, controls = trim_state(4000.0, 0.6, 0.0, genjet)
        after = step(state, controls, 0.01, genjet)
        np.testing.assert_allclose(after.velocity_body, state.velocity_body, atol=1e-4)
        np.testing.assert_allclose(after.body_rates, 0.0, atol=1e-9)

    @pytest.mark.slow
    def test_trim_holds_altitude(self, genjet):
        state, controls = trim_state(4000.0, 0.6, 0.0, genjet)
        start = state.altitude_ft
        for _ in range(100):
            state = step(state, controls, 0.01, genjet)
        assert abs(state.altitude_ft - start) < 0.5
        assert state.time_s == pytest.approx(1.0)


class TestStep:
    def test_deterministic(self, genjet):
        state, controls = trim_state(4000.0, 0.6, 45.0, genjet)
        first = step(state, controls, 0.01, genjet)
        second = step(state, controls, 0.01, genjet)
        assert first.same_as(second)

    def test_free_fall_without_lift_or_thrust(self, genjet):
        params = genjet.with_overrides({'cl0': 0.0})
        state = attitude_state(0.0, 0.0, 0.0, 0.5, 4000.0, params)
        after = step(state, ControlInputs(0.0, 0.0, 0.0, 0.0), 0.01, params)
        assert -after.climb_rate == pytest.approx(G0 * 0.01, rel=0.02)

    def test_pitch_rate_clamped(self, genjet):
        state, _ = trim_state(4000.0, 0.6, 0.0, genjet)
        full_down = ControlInputs(0.0, -1.0, 0.0, 0.5)
        limit = genjet.pitch_rate_limit_rad
        for _ in range(150):
            state = step(state, full_down, 0.01, genjet)
            assert abs(state.body_rates[1]) <= limit + 1e-12

    def test_quaternion_stays_unit(self, genjet):
        state, _ = trim_state(4000.0, 0.6, 0.0, genjet)
        rolling = ControlInputs(1.0, 0.3, 0.2, 0.8)
        for _ in range(50):
            state = step(state, rolling, 0.01, genjet)
        assert np.linalg.norm(state.attitude_quat) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.slow
    def test_quaternion_stays_unit_over_long_runs(self, genjet):
        state, controls = trim_state(20000.0, 0.6, 0.0, genjet)
        left = ControlInputs(-0.4, controls.elevator_cmd, 0.1, controls.throttle_cmd)
        right = ControlInputs(0.4, controls.elevator_cmd, -0.1, controls.throttle_cmd)
        for k in range(100_000):
            state = step(state, left if (k // 100) % 2 else right, 0.01, genjet)
        assert np.linalg.norm(state.attitude_quat) == pytest.approx(1.0, abs=1e-12)

    def test_energy_does_not_rise_without_thrust(self, genjet):
        trimmed, _ = trim_state(4000.0, 0.6, 0.0, genjet)
        idle = ControlInputs(0.0, 0.0, 0.0, 0.0)

        def energy_height(s):
            return s.altitude_ft / 3.28084 + s.true_airspeed ** 2 / (2.0 * G0)

        state = trimmed
        previous = energy_height(state)
        for _ in range(300):
            state = step(state, idle, 0.01, genjet)
            current = energy_height(state)
            assert current <= previous + 1e-6
            previous = current
        assert previous < energy_height(trimmed)

    def test_rejects_large_dt(self, genjet):
        state, controls = trim_state(4000.0, 0.6, 0.0, genjet)
        with pytest.raises(ValueError):
            step(state, controls, 0.1, genjet)


class TestDerivedQuantities:
    def test_level_gamma(self):
        assert flight_path_angle(_state_with_velocity_ned([200.0, 0.0, 0.0])) == pytest.approx(0.0)

    def test_vertical_climb(self):
        assert flight_path_angle(_state_with_velocity_ned([0.0, 0.0, -150.0])) == pytest.approx(90.0)

    def test_thirty_degree_climb(self):
        speed = 200.0
        vel = [speed * math.cos(math.radians(30.0)), 0.0, -speed / 2.0]
        assert flight_path_angle(_state_with_velocity_ned(vel)) == pytest.approx(30.0)

    def test_gamma_undefined_at_rest(self):
        with pytest.raises(UndefinedGammaError):
            flight_path_angle(_state_with_velocity_ned([0.5, 0.0, 0.0]))

    def test_mach_one(self):
        _, sound_speed = isa_atmosphere(4000.0)
        assert mach_of(_state_with_velocity_ned([sound_speed, 0.0, 0.0])) == pytest.approx(1.0)

    def test_mach_zero(self):
        assert mach_of(_state_with_velocity_ned([0.0, 0.0, 0.0])) == 0.0

    def test_mach_grows_with_altitude(self):
        low = mach_of(_state_with_velocity_ned([200.0, 0.0, 0.0], altitude_ft=0.0))
        high = mach_of(_state_with_velocity_ned([200.0, 0.0, 0.0], altitude_ft=20000.0))
        assert high > low

    def test_attitude_state_round_trips_channels(self, genjet):
        state = attitude_state(30.0, 10.0, 120.0, 0.5, 4000.0, genjet)
        roll, gamma, yaw, mach = measured_channels(state)
        assert roll == pytest.approx(30.0)
        assert gamma == pytest.approx(10.0)
        assert yaw == pytest.approx(120.0)
        assert mach == pytest.approx(0.5)
