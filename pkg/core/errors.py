"""
File: core/errors.py
Location: aerobatic_rl/core/errors.py
Purpose: Exception hierarchy shared by simulator, learner and harness
"""


class AmrlError(Exception):
    """Base class for every error raised by this toolkit"""


class ConfigError(AmrlError, ValueError):
    """Bad run config, aircraft params file or search-space file"""


class AtmosphereDomainError(AmrlError, ValueError):
    """Altitude outside the standard-atmosphere table"""


class SimulationFault(AmrlError):
    """Non-finite value produced while integrating the aircraft state"""

    def __init__(self, field, message=None):
        self.field = field
        super().__init__(message or f"non-finite derivative in '{field}'")


class InfeasibleTrimError(AmrlError):
    """No wings-level trim exists inside the deflection/throttle limits"""


class UndefinedGammaError(AmrlError, ValueError):
    """Flight path angle requested at (near) zero airspeed"""


class TrajectoryError(AmrlError, ValueError):
    """Trajectory values violate the 4-channel contract"""


class TrajectoryParseError(TrajectoryError):
    """Trajectory CSV could not be parsed; carries row and column"""

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column '{column}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(f"{prefix}{message}")


class ShapeError(AmrlError, ValueError):
    """Network dimensions or batch shapes do not line up"""


class OptimizerFault(AmrlError):
    """NaN or Inf gradient handed to the optimizer"""


class ReplayBufferError(AmrlError):
    """Replay buffer cannot serve the request"""


class TrainingFault(AmrlError):
    """A SAC loss became non-finite"""

    def __init__(self, loss_name, value=None):
        self.loss_name = loss_name
        self.value = value
        super().__init__(f"non-finite loss '{loss_name}' ({value})")


class CheckpointError(AmrlError):
    """Checkpoint file is malformed; carries the offending field"""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class LayoutMismatchError(CheckpointError):
    """Observation layout recorded in a checkpoint differs from the environment"""

    def __init__(self, found, expected):
        self.found = found
        self.expected = expected
        super().__init__(
            'observation_layout',
            f"checkpoint layout {found!r} does not match environment layout {expected!r}"
        )


class ExportError(AmrlError):
    """Run directory has nothing to export"""


class UsageError(AmrlError):
    """Command line could not be understood"""
