"""
File: utils/__init__.py
Location: aerobatic_rl/utils/__init__.py
Purpose: Utilities package initialization
"""

from .helpers import (
    wrap_180,
    wrap_360,
    atomic_write_text,
    atomic_write_bytes,
    JsonLinesWriter
)
from .validators import parse_key_value_lines, parse_scalar, parse_space_value

__all__ = [
    'wrap_180',
    'wrap_360',
    'atomic_write_text',
    'atomic_write_bytes',
    'JsonLinesWriter',
    'parse_key_value_lines',
    'parse_scalar',
    'parse_space_value'
]
