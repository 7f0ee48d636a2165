"""
Wall-clock helpers for run metadata

Only run metadata reads the wall clock.
"""

from datetime import datetime
import pytz

UTC = pytz.UTC


def utc_now():
    """Get current UTC time (aware datetime)"""
    return datetime.now(UTC)


def format_timestamp(dt=None):
    """
    Format a datetime as an ISO-8601 UTC stamp

    Args:
        dt: aware or naive (assumed UTC) datetime; defaults to now

    Returns:
        str: e.g. '2026-01-31T20:00:00Z'
    """
    if dt is None:
        dt = utc_now()
    aware = UTC.localize(dt) if dt.tzinfo is None else dt.astimezone(UTC)
    return aware.strftime('%Y-%m-%dT%H:%M:%SZ')
