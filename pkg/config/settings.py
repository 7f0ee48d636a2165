"""
File: config/settings.py
Purpose: Centralized configuration and constants
Dependencies: os, dotenv
"""

import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

_CONFIG_DIR = os.path.dirname(os.path.abspath(__file__))

APP_NAME = 'aerobatic-rl'
APP_VERSION = '1.0.0'

# =============================================================================
# LOGGING CONFIGURATION
# =============================================================================
LOG_LEVEL = os.environ.get('AMRL_LOG_LEVEL', 'INFO')
LOG_FILE = os.environ.get('AMRL_LOG_FILE', 'amrl.log')
LOG_FORMAT = '%(asctime)s - %(levelname)s - %(name)s - %(message)s'

# =============================================================================
# SIMULATION CONFIGURATION
# =============================================================================
AGENT_HZ = float(os.environ.get('AMRL_AGENT_HZ', 10))  # actions per second
SIM_DT_S = float(os.environ.get('AMRL_SIM_DT_S', 0.01))  # RK4 step
DEFAULT_AIRCRAFT_FILE = os.environ.get('AMRL_AIRCRAFT_FILE', os.path.join(_CONFIG_DIR, 'genjet.params'))
DEFAULT_RUN_CONFIG = os.environ.get('AMRL_RUN_CONFIG', os.path.join(_CONFIG_DIR, 'default.cfg'))
INITIAL_ALTITUDE_FT = 4000.0
FEASIBILITY_ALTITUDE_FT = 4000.0

# =============================================================================
# MANEUVER DEFAULTS (handcrafted trajectories)
# =============================================================================
TRAJ_DT_S = 0.1
LOOP_DURATION_S = float(os.environ.get('AMRL_LOOP_DURATION_S', 40))
IMMELMANN_DURATION_S = float(os.environ.get('AMRL_IMMELMANN_DURATION_S', 25))
BARREL_ROLL_DURATION_S = float(os.environ.get('AMRL_BARREL_ROLL_DURATION_S', 20))
HOLD_DURATION_S = float(os.environ.get('AMRL_HOLD_DURATION_S', 20))

ENTRY_MACH = 0.6
LOOP_MACH_DIP = 0.15
IMMELMANN_ENTRY_MACH = 0.7
IMMELMANN_MACH_DIP = 0.2
IMMELMANN_ROLL_FRACTION = 0.3
BARREL_PITCH_AMPLITUDE_DEG = 20.0
BARREL_YAW_AMPLITUDE_DEG = 20.0

# =============================================================================
# EVALUATION CONFIGURATION
# =============================================================================
EVAL_EPISODES = int(os.environ.get('AMRL_EVAL_EPISODES', 10))
HPARAM_EVAL_EPISODES = 5
SUCCESS_GAMMA_BOUND_DEG = 10.0  # mean |gamma error|
SUCCESS_ROLL_BOUND_DEG = 15.0   # mean |roll error|

# =============================================================================
# STORAGE CONFIGURATION
# =============================================================================
TRIALS_DB_PATH = os.environ.get('AMRL_TRIALS_DB', 'trials.db')
