"""
File: core/flightdyn.py
Location: aerobatic_rl/core/flightdyn.py
Purpose: Reduced-order 6-DOF fixed-wing jet simulator (ISA atmosphere, RK4, trim)

The model is deliberately small:
- linear lift/drag/side-force coefficients from (alpha, beta), lift curve
  flattened past alpha_stall
- first-order actuator lag toward the commanded deflections and throttle
- angular acceleration = effectiveness * deflection - damping * rate,
  with pitch rate clamped to the pitch rate limit
- quaternion attitude (body -> NED), renormalized after every step

Sign conventions: positive aileron rolls right, positive elevator pitches
nose up, positive rudder yaws nose right.
"""

import logging
import math
from dataclasses import dataclass, fields, replace

import numpy as np
from scipy import optimize

from core.errors import (
    AtmosphereDomainError,
    ConfigError,
    InfeasibleTrimError,
    SimulationFault,
    UndefinedGammaError,
)
from utils.helpers import wrap_180, wrap_360
from utils.validators import parse_float_list, parse_key_value_lines

logger = logging.getLogger(__name__)

# =============================================================================
# PHYSICAL CONSTANTS
# =============================================================================
FT_PER_M = 3.28084
G0 = 9.80665            # m/s^2
R_AIR = 287.05287       # J/(kg K)
GAMMA_AIR = 1.4
T0_K = 288.15
P0_PA = 101325.0
LAPSE_K_PER_M = 0.0065
TROPOPAUSE_M = 11000.0
T_STRATOSPHERE_K = T0_K - LAPSE_K_PER_M * TROPOPAUSE_M   # 216.65 K
_BARO_EXPONENT = G0 / (LAPSE_K_PER_M * R_AIR)
_P_TROPOPAUSE = P0_PA * (T_STRATOSPHERE_K / T0_K) ** _BARO_EXPONENT

MAX_ALTITUDE_FT = 60000.0
MAX_DT_S = 0.05

STATE_BLOCKS = (
    ('position_ned', slice(0, 3)),
    ('velocity_body', slice(3, 6)),
    ('attitude_quat', slice(6, 10)),
    ('body_rates', slice(10, 13)),
    ('actuator_positions', slice(13, 17)),
)
STATE_SIZE = 17


# =============================================================================
# ATMOSPHERE
# =============================================================================

def _isa_temperature_pressure(altitude_ft):
    h = altitude_ft / FT_PER_M
    if h <= TROPOPAUSE_M:
        temperature = T0_K - LAPSE_K_PER_M * h
        pressure = P0_PA * (temperature / T0_K) ** _BARO_EXPONENT
    else:
        temperature = T_STRATOSPHERE_K
        pressure = _P_TROPOPAUSE * math.exp(-G0 * (h - TROPOPAUSE_M) / (R_AIR * temperature))
    return temperature, pressure


def isa_temperature(altitude_ft):
    """Static temperature (K) at altitude - validated like isa_atmosphere"""
    if not 0.0 <= altitude_ft <= MAX_ALTITUDE_FT:
        raise AtmosphereDomainError(f"altitude {altitude_ft} ft outside 0-{MAX_ALTITUDE_FT:.0f} ft")
    return _isa_temperature_pressure(altitude_ft)[0]


def isa_atmosphere(altitude_ft):
    """
    International Standard Atmosphere, troposphere + lower stratosphere

    Args:
        altitude_ft: geometric altitude, 0 to 60000 ft

    Returns:
        tuple: (density kg/m^3, speed of sound m/s)

    Raises:
        AtmosphereDomainError: altitude out of range
    """
    if not 0.0 <= altitude_ft <= MAX_ALTITUDE_FT:
        raise AtmosphereDomainError(f"altitude {altitude_ft} ft outside 0-{MAX_ALTITUDE_FT:.0f} ft")
    temperature, pressure = _isa_temperature_pressure(altitude_ft)
    density = pressure / (R_AIR * temperature)
    sound_speed = math.sqrt(GAMMA_AIR * R_AIR * temperature)
    return density, sound_speed


def _atmosphere_clamped(altitude_ft):
    # The integrator may wander outside the table (dives, zoom climbs);
    # aero forces use the nearest valid altitude instead of faulting.
    return isa_atmosphere(min(max(altitude_ft, 0.0), MAX_ALTITUDE_FT))


# =============================================================================
# DOMAIN TYPES
# =============================================================================

@dataclass(frozen=True)
class AircraftParams:
    """
    Reduced-order airframe description

    Per-axis tuples are ordered (aileron/roll, elevator/pitch, rudder/yaw).
    """
    mass: float
    wing_area: float
    max_thrust: float
    cl0: float
    cl_alpha: float
    cd0: float
    k_induced: float
    cy_beta: float
    control_effectiveness: tuple
    rate_damping: tuple
    actuator_time_constant_s: float
    max_deflection_deg: tuple
    pitch_rate_limit_dps: float
    max_load_factor_g: float
    alpha_stall_deg: float

    def __post_init__(self):
        for name in ('mass', 'wing_area', 'max_thrust', 'actuator_time_constant_s',
                     'pitch_rate_limit_dps', 'alpha_stall_deg'):
            if not getattr(self, name) > 0:
                raise ConfigError(f"AircraftParams.{name} must be > 0, got {getattr(self, name)}")

        if self.max_load_factor_g < 1:
            raise ConfigError(f"AircraftParams.max_load_factor_g must be >= 1, got {self.max_load_factor_g}")

        for name in ('control_effectiveness', 'rate_damping', 'max_deflection_deg'):
            value = tuple(float(v) for v in getattr(self, name))
            if len(value) != 3:
                raise ConfigError(f"AircraftParams.{name} needs 3 values, got {len(value)}")
            object.__setattr__(self, name, value)

        if not all(v > 0 for v in self.max_deflection_deg):
            raise ConfigError("AircraftParams.max_deflection_deg limits must be > 0")

    @property
    def max_deflection_rad(self):
        return tuple(math.radians(v) for v in self.max_deflection_deg)

    @property
    def pitch_rate_limit_rad(self):
        return math.radians(self.pitch_rate_limit_dps)

    @classmethod
    def from_mapping(cls, mapping, source='<mapping>'):
        """
        Build params from a {field: value} mapping

        Values may be numbers, tuples or comma-list strings. Unknown and
        missing keys are rejected.
        """
        names = [f.name for f in fields(cls)]
        tuple_fields = ('control_effectiveness', 'rate_damping', 'max_deflection_deg')

        unknown = sorted(set(mapping) - set(names))
        if unknown:
            raise ConfigError(f"{source}: unknown aircraft keys {unknown}")
        missing = [n for n in names if n not in mapping]
        if missing:
            raise ConfigError(f"{source}: missing aircraft keys {missing}")

        values = {}
        for name in names:
            raw = mapping[name]
            if name in tuple_fields:
                values[name] = tuple(parse_float_list(raw) if isinstance(raw, str) else raw)
            else:
                try:
                    values[name] = float(raw)
                except (TypeError, ValueError):
                    raise ConfigError(f"{source}: {name} is not a number: {raw!r}")
        return cls(**values)

    def with_overrides(self, overrides):
        """Copy with some fields replaced (strings parsed like the params file)"""
        merged = {f.name: getattr(self, f.name) for f in fields(self)}
        merged.update(overrides)
        return AircraftParams.from_mapping(merged, source='overrides')


def load_aircraft_params(path):
    """
    Load an aircraft parameter file (flat `key = value`)

    Keys are exactly the AircraftParams field names.
    """
    with open(path, encoding='utf-8') as f:
        text = f.read()
    mapping = {key: value for _, key, value in parse_key_value_lines(text, source=path)}
    params = AircraftParams.from_mapping(mapping, source=path)
    logger.debug(f"Loaded aircraft params from {path}")
    return params


@dataclass(frozen=True, eq=False)
class ControlInputs:
    """Normalized stick commands in [-1, 1] and throttle in [0, 1]"""
    aileron_cmd: float
    elevator_cmd: float
    rudder_cmd: float
    throttle_cmd: float

    def __post_init__(self):
        for name in ('aileron_cmd', 'elevator_cmd', 'rudder_cmd'):
            value = getattr(self, name)
            if not -1.0 <= value <= 1.0:
                raise ValueError(f"{name} must be within [-1, 1], got {value}")
        if not 0.0 <= self.throttle_cmd <= 1.0:
            raise ValueError(f"throttle_cmd must be within [0, 1], got {self.throttle_cmd}")

    def as_array(self):
        return np.array([self.aileron_cmd, self.elevator_cmd, self.rudder_cmd, self.throttle_cmd])

    def __eq__(self, other):
        if not isinstance(other, ControlInputs):
            return NotImplemented
        return bool(np.array_equal(self.as_array(), other.as_array()))

    def __hash__(self):
        return hash(tuple(self.as_array()))


@dataclass(frozen=True, eq=False)
class AircraftState:
    """
    Full simulator state

    position_ned: m (north, east, down)
    velocity_body: m/s (u, v, w)
    attitude_quat: unit quaternion (w, x, y, z), body -> NED
    body_rates: rad/s (p, q, r)
    actuator_positions: aileron, elevator, rudder deflections (rad) + throttle fraction
    time_s: simulation time
    """
    position_ned: np.ndarray
    velocity_body: np.ndarray
    attitude_quat: np.ndarray
    body_rates: np.ndarray
    actuator_positions: np.ndarray
    time_s: float = 0.0

    def to_vector(self):
        return np.concatenate([
            self.position_ned, self.velocity_body, self.attitude_quat,
            self.body_rates, self.actuator_positions,
        ]).astype(np.float64)

    @classmethod
    def from_vector(cls, vector, time_s):
        vector = np.asarray(vector, dtype=np.float64)
        blocks = {name: vector[sl].copy() for name, sl in STATE_BLOCKS}
        return cls(time_s=float(time_s), **blocks)

    def same_as(self, other):
        """Bit-identical comparison (determinism checks)"""
        return self.time_s == other.time_s and np.array_equal(self.to_vector(), other.to_vector())

    @property
    def altitude_ft(self):
        return -float(self.position_ned[2]) * FT_PER_M

    @property
    def true_airspeed(self):
        return float(np.linalg.norm(self.velocity_body))

    @property
    def rotation_matrix(self):
        """Direction cosine matrix body -> NED"""
        return quat_to_dcm(self.attitude_quat)

    @property
    def velocity_ned(self):
        return self.rotation_matrix @ self.velocity_body

    @property
    def climb_rate(self):
        return -float(self.velocity_ned[2])

    def euler_deg(self):
        """(roll, pitch, yaw) in degrees, roll in (-180, 180], yaw in [0, 360)"""
        roll, pitch, yaw = quat_to_euler(self.attitude_quat)
        return (wrap_180(math.degrees(roll)), math.degrees(pitch), wrap_360(math.degrees(yaw)))


# =============================================================================
# QUATERNION HELPERS
# =============================================================================

def quat_to_dcm(quat):
    w, x, y, z = quat
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_to_euler(quat):
    """ZYX Euler angles (rad) from a body -> NED quaternion"""
    w, x, y, z = quat
    roll = math.atan2(2 * (w * x + y * z), 1 - 2 * (x * x + y * y))
    pitch = math.asin(max(-1.0, min(1.0, 2 * (w * y - z * x))))
    yaw = math.atan2(2 * (w * z + x * y), 1 - 2 * (y * y + z * z))
    return roll, pitch, yaw


def euler_to_quat(roll, pitch, yaw):
    """Body -> NED quaternion (w, x, y, z) from ZYX Euler angles (rad)"""
    cr, sr = math.cos(roll / 2), math.sin(roll / 2)
    cp, sp = math.cos(pitch / 2), math.sin(pitch / 2)
    cy, sy = math.cos(yaw / 2), math.sin(yaw / 2)
    return np.array([
        cr * cp * cy + sr * sp * sy,
        sr * cp * cy - cr * sp * sy,
        cr * sp * cy + sr * cp * sy,
        cr * cp * sy - sr * sp * cy,
    ])


# =============================================================================
# DYNAMICS
# =============================================================================

def _derivatives(x, commands, params):
    """
    Time derivative of the 17-element state vector

    commands: target deflections (rad) for the three surfaces + throttle fraction
    """
    _, _, down = x[0], x[1], x[2]
    u, v, w = x[3], x[4], x[5]
    qw, qx, qy, qz = x[6], x[7], x[8], x[9]
    p, q, r = x[10], x[11], x[12]
    act = x[13:17]

    # body -> NED rotation, only the rows we need
    r00 = 1 - 2 * (qy * qy + qz * qz)
    r01 = 2 * (qx * qy - qw * qz)
    r02 = 2 * (qx * qz + qw * qy)
    r10 = 2 * (qx * qy + qw * qz)
    r11 = 1 - 2 * (qx * qx + qz * qz)
    r12 = 2 * (qy * qz - qw * qx)
    r20 = 2 * (qx * qz - qw * qy)
    r21 = 2 * (qy * qz + qw * qx)
    r22 = 1 - 2 * (qx * qx + qy * qy)

    density, _ = _atmosphere_clamped(-down * FT_PER_M)
    airspeed = math.sqrt(u * u + v * v + w * w)
    if airspeed > 1e-6:
        alpha = math.atan2(w, u)
        beta = math.asin(max(-1.0, min(1.0, v / airspeed)))
    else:
        alpha = 0.0
        beta = 0.0

    stall = math.radians(params.alpha_stall_deg)
    alpha_eff = max(-stall, min(stall, alpha))
    cl = params.cl0 + params.cl_alpha * alpha_eff
    cd = params.cd0 + params.k_induced * cl * cl
    cy = params.cy_beta * beta

    qbar_s = 0.5 * density * airspeed * airspeed * params.wing_area
    lift = qbar_s * cl
    drag = qbar_s * cd
    side = qbar_s * cy
    thrust = act[3] * params.max_thrust

    ca, sa = math.cos(alpha), math.sin(alpha)
    fx = thrust - drag * ca + lift * sa
    fy = side
    fz = -drag * sa - lift * ca

    # gravity in body axes = third row of the body -> NED matrix
    m = params.mass
    udot = fx / m + G0 * r20 - (q * w - r * v)
    vdot = fy / m + G0 * r21 - (r * u - p * w)
    wdot = fz / m + G0 * r22 - (p * v - q * u)

    north_dot = r00 * u + r01 * v + r02 * w
    east_dot = r10 * u + r11 * v + r12 * w
    down_dot = r20 * u + r21 * v + r22 * w

    qw_dot = 0.5 * (-qx * p - qy * q - qz * r)
    qx_dot = 0.5 * (qw * p + qy * r - qz * q)
    qy_dot = 0.5 * (qw * q - qx * r + qz * p)
    qz_dot = 0.5 * (qw * r + qx * q - qy * p)

    eff = params.control_effectiveness
    damp = params.rate_damping
    p_dot = eff[0] * act[0] - damp[0] * p
    q_dot = eff[1] * act[1] - damp[1] * q
    r_dot = eff[2] * act[2] - damp[2] * r

    q_limit = params.pitch_rate_limit_rad
    if (q >= q_limit and q_dot > 0) or (q <= -q_limit and q_dot < 0):
        q_dot = 0.0

    act_dot = (commands - act) / params.actuator_time_constant_s

    dx = np.empty(STATE_SIZE)
    dx[0:3] = (north_dot, east_dot, down_dot)
    dx[3:6] = (udot, vdot, wdot)
    dx[6:10] = (qw_dot, qx_dot, qy_dot, qz_dot)
    dx[10:13] = (p_dot, q_dot, r_dot)
    dx[13:17] = act_dot

    if not np.all(np.isfinite(dx)):
        for name, sl in STATE_BLOCKS:
            if not np.all(np.isfinite(dx[sl])):
                raise SimulationFault(name)
    return dx


def commanded_targets(controls, params):
    """Actuator set-points (rad, rad, rad, fraction) for the given controls"""
    limits = params.max_deflection_rad
    return np.array([
        controls.aileron_cmd * limits[0],
        controls.elevator_cmd * limits[1],
        controls.rudder_cmd * limits[2],
        controls.throttle_cmd,
    ])


def step(state, controls, dt, params):
    """
    Advance the aircraft by one RK4 step

    Args:
        state: AircraftState
        controls: ControlInputs held over the step
        dt: step size, 0 < dt <= 0.05 s
        params: AircraftParams

    Returns:
        AircraftState: new state, time advanced by dt

    Raises:
        SimulationFault: non-finite derivative (field named)
    """
    if not 0.0 < dt <= MAX_DT_S:
        raise ValueError(f"dt must be within (0, {MAX_DT_S}], got {dt}")

    x = state.to_vector()
    commands = commanded_targets(controls, params)

    k1 = _derivatives(x, commands, params)
    k2 = _derivatives(x + 0.5 * dt * k1, commands, params)
    k3 = _derivatives(x + 0.5 * dt * k2, commands, params)
    k4 = _derivatives(x + dt * k3, commands, params)
    x_next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    if not np.all(np.isfinite(x_next)):
        for name, sl in STATE_BLOCKS:
            if not np.all(np.isfinite(x_next[sl])):
                raise SimulationFault(name)

    quat = x_next[6:10]
    x_next[6:10] = quat / math.sqrt(float(quat @ quat))

    q_limit = params.pitch_rate_limit_rad
    x_next[11] = min(max(x_next[11], -q_limit), q_limit)

    return AircraftState.from_vector(x_next, state.time_s + dt)


# =============================================================================
# DERIVED QUANTITIES
# =============================================================================

def flight_path_angle(state):
    """
    Flight path angle gamma in degrees, [-90, 90]

    Raises:
        UndefinedGammaError: true airspeed <= 1 m/s
    """
    airspeed = state.true_airspeed
    if airspeed <= 1.0:
        raise UndefinedGammaError(f"gamma undefined at airspeed {airspeed:.3f} m/s")
    ratio = max(-1.0, min(1.0, state.climb_rate / airspeed))
    return math.degrees(math.asin(ratio))


def mach_of(state):
    """True airspeed over the local speed of sound"""
    _, sound_speed = _atmosphere_clamped(state.altitude_ft)
    return state.true_airspeed / sound_speed


def measured_channels(state):
    """
    The four tracked channels of a state

    Returns:
        tuple: (roll_deg, gamma_deg, yaw_deg, mach)
    """
    roll, _, yaw = state.euler_deg()
    return roll, flight_path_angle(state), yaw, mach_of(state)


def specific_energy(state):
    """Total specific energy g*h + V^2/2 (J/kg)"""
    height_m = state.altitude_ft / FT_PER_M
    return G0 * height_m + 0.5 * state.true_airspeed ** 2


def attitude_state(roll_deg, gamma_deg, yaw_deg, mach, altitude_ft, params,
                   alpha_rad=0.0, elevator_rad=0.0, throttle=0.0, time_s=0.0):
    """
    Build a state flying at the given attitude and speed

    The velocity sits at alpha_rad in the body x-z plane; pitch = gamma + alpha,
    so gamma is exact when wings are level (and for any roll when alpha = 0).
    """
    _, sound_speed = isa_atmosphere(altitude_ft)
    airspeed = mach * sound_speed
    quat = euler_to_quat(math.radians(roll_deg),
                         math.radians(gamma_deg) + alpha_rad,
                         math.radians(yaw_deg))
    return AircraftState(
        position_ned=np.array([0.0, 0.0, -altitude_ft / FT_PER_M]),
        velocity_body=np.array([airspeed * math.cos(alpha_rad), 0.0, airspeed * math.sin(alpha_rad)]),
        attitude_quat=quat,
        body_rates=np.zeros(3),
        actuator_positions=np.array([0.0, elevator_rad, 0.0, throttle]),
        time_s=time_s,
    )


# =============================================================================
# TRIM
# =============================================================================

TRIM_INITIAL_GUESS = np.array([0.02, 0.0, 0.3])  # alpha rad, elevator rad, throttle


def _trim_residuals(unknowns, airspeed, density, params):
    alpha, elevator, throttle = unknowns
    weight = params.mass * G0
    qbar_s = 0.5 * density * airspeed * airspeed * params.wing_area
    stall = math.radians(params.alpha_stall_deg)
    cl = params.cl0 + params.cl_alpha * max(-stall, min(stall, alpha))
    lift = qbar_s * cl
    drag = qbar_s * (params.cd0 + params.k_induced * cl * cl)
    thrust = throttle * params.max_thrust
    return np.array([
        (thrust * math.cos(alpha) - drag) / weight,                 # along the path
        (lift + thrust * math.sin(alpha) - weight) / weight,        # normal to the path
        elevator,                                                   # pitch accel at q = 0 vanishes
    ])


def trim_state(altitude_ft, mach, heading_deg, params):
    """
    Wings-level, constant-altitude trim

    Solves the force and pitch-moment balance for (alpha, elevator, throttle)
    with scipy.optimize.fsolve.

    Returns:
        tuple: (AircraftState, ControlInputs)

    Raises:
        InfeasibleTrimError: Mach outside (0.1, 0.95) or no solution inside limits
        AtmosphereDomainError: altitude outside the atmosphere table
    """
    if not 0.1 < mach < 0.95:
        raise InfeasibleTrimError(f"Mach {mach} outside trim envelope (0.1, 0.95)")

    density, sound_speed = isa_atmosphere(altitude_ft)
    airspeed = mach * sound_speed

    solution, info, ier, message = optimize.fsolve(
        _trim_residuals, TRIM_INITIAL_GUESS, args=(airspeed, density, params),
        xtol=1e-12, full_output=True)
    # ier 5 can mean "no further progress" at machine precision; the residual decides then
    if ier != 1 and np.max(np.abs(info['fvec'])) > 1e-9:
        raise InfeasibleTrimError(f"trim did not converge at Mach {mach}, {altitude_ft} ft: {message}")

    alpha, elevator, throttle = (float(v) for v in solution)
    if not 0.0 <= throttle <= 1.0:
        raise InfeasibleTrimError(f"trim needs throttle {throttle:.3f} at Mach {mach}, {altitude_ft} ft")
    if abs(alpha) > math.radians(params.alpha_stall_deg):
        raise InfeasibleTrimError(f"trim needs alpha {math.degrees(alpha):.2f} deg beyond stall")
    if abs(elevator) > params.max_deflection_rad[1]:
        raise InfeasibleTrimError("trim needs elevator beyond its deflection limit")

    state = attitude_state(0.0, 0.0, wrap_360(heading_deg), mach, altitude_ft, params,
                           alpha_rad=alpha, elevator_rad=elevator, throttle=throttle)
    controls = ControlInputs(0.0, elevator / params.max_deflection_rad[1], 0.0, throttle)

    logger.debug(f"Trim at {altitude_ft:.0f} ft, M{mach:.3f}: alpha={math.degrees(alpha):.3f} deg, "
                 f"throttle={throttle:.3f}")
    return state, controls


def with_time(state, time_s):
    """Copy of state with a different clock reading"""
    return replace(state, time_s=float(time_s))
