"""
File: core/__init__.py
Location: aerobatic_rl/core/__init__.py
Purpose: Simulation and learning package

Submodules are imported directly (core.flightdyn, core.environment, ...);
only the error hierarchy is re-exported here.
"""

from .errors import AmrlError, ConfigError, SimulationFault, TrainingFault

__all__ = ['AmrlError', 'ConfigError', 'SimulationFault', 'TrainingFault']
