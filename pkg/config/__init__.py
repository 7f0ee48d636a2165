from .settings import *
from .clock import UTC, utc_now, format_timestamp

__all__ = [
    'LOG_LEVEL', 'LOG_FILE', 'LOG_FORMAT',
    'AGENT_HZ', 'SIM_DT_S', 'DEFAULT_AIRCRAFT_FILE', 'DEFAULT_RUN_CONFIG',
    'EVAL_EPISODES', 'TRIALS_DB_PATH',
    'UTC', 'utc_now', 'format_timestamp'
]
