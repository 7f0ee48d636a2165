"""
File: utils/validators.py
Location: aerobatic_rl/utils/validators.py
Purpose: Parsing and validation of the small text formats used across the toolkit
Reusable: YES - flat key = value files, comma lists, search-space ranges
"""

import math
import re
from dataclasses import dataclass

from core.errors import ConfigError


def parse_key_value_lines(text: str, source: str = '<text>'):
    """
    Parse flat `key = value` text

    Args:
        text: File contents
        source: Name used in error messages

    Returns:
        list: (line_number, key, value) tuples in file order

    Rules:
        - '#' starts a comment (whole line or trailing)
        - blank lines are ignored
        - duplicate keys are rejected
    """
    entries = []
    seen = set()

    for line_number, raw in enumerate(text.splitlines(), 1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue

        if '=' not in line:
            raise ConfigError(f"{source}:{line_number}: expected 'key = value', got {raw.strip()!r}")

        key, value = line.split('=', 1)
        key = key.strip()
        value = value.strip()

        if not key:
            raise ConfigError(f"{source}:{line_number}: empty key")
        if key in seen:
            raise ConfigError(f"{source}:{line_number}: duplicate key '{key}'")

        seen.add(key)
        entries.append((line_number, key, value))

    return entries


def parse_scalar(text: str):
    """
    Parse a config value into bool, int, float or str

    Examples:
        "true" → True
        "10" → 10
        "0.01" → 0.01
        "loop" → "loop"
    """
    lowered = text.strip().lower()
    if lowered in ('true', 'yes', 'on'):
        return True
    if lowered in ('false', 'no', 'off'):
        return False

    try:
        return int(lowered)
    except ValueError:
        pass

    try:
        return float(lowered)
    except ValueError:
        return text.strip()


def parse_bool(text) -> bool:
    """Strict boolean parsing for flags stored as text"""
    if isinstance(text, bool):
        return text
    value = parse_scalar(str(text))
    if not isinstance(value, bool):
        raise ConfigError(f"expected a boolean, got {text!r}")
    return value


def parse_float_list(text) -> list:
    """
    Parse a comma list of numbers

    Examples:
        "4000" → [4000.0]
        "4000, 6000,8000" → [4000.0, 6000.0, 8000.0]
        "0.5,1,1.5,2" → [0.5, 1.0, 1.5, 2.0]
    """
    if isinstance(text, (int, float)):
        return [float(text)]

    values = []
    for part in str(text).split(','):
        part = part.strip()
        if not part:
            continue
        try:
            values.append(float(part))
        except ValueError:
            raise ConfigError(f"Invalid number: {part}")

    if not values:
        raise ConfigError(f"Empty number list: {text!r}")
    return values


# =============================================================================
# SEARCH SPACE SYNTAX
# =============================================================================

@dataclass(frozen=True)
class LogUniform:
    """`name = log(low, high)` - sampled uniformly in log space"""
    low: float
    high: float

    def sample(self, rng):
        return float(math.exp(rng.uniform(math.log(self.low), math.log(self.high))))


@dataclass(frozen=True)
class Uniform:
    """`name = uniform(low, high)`"""
    low: float
    high: float

    def sample(self, rng):
        return float(rng.uniform(self.low, self.high))


@dataclass(frozen=True)
class Choice:
    """`name = {a, b, c}` - one of a finite set"""
    options: tuple


_RANGE_PATTERN = re.compile(r'^(log|uniform)\s*\(\s*([^,]+?)\s*,\s*([^)]+?)\s*\)$', re.IGNORECASE)


def parse_space_value(text: str):
    """
    Parse one search-space range

    Supports:
        - Log-uniform: "log(1e-5, 1e-2)"
        - Uniform: "uniform(0.95, 0.999)"
        - Choice set: "{64,128,256}"
        - Single value: "0.99" (treated as a one-element choice)
    """
    text = text.strip()

    match = _RANGE_PATTERN.match(text)
    if match:
        kind, low_text, high_text = match.groups()
        try:
            low = float(low_text)
            high = float(high_text)
        except ValueError:
            raise ConfigError(f"Invalid range bounds: {text}")

        if low >= high:
            raise ConfigError(f"Invalid range: {text} (low >= high)")

        if kind.lower() == 'log':
            if low <= 0:
                raise ConfigError(f"Log range must be positive: {text}")
            return LogUniform(low, high)
        return Uniform(low, high)

    if text.startswith('{') and text.endswith('}'):
        inner = text[1:-1]
        options = tuple(parse_scalar(part) for part in inner.split(',') if part.strip())
        if not options:
            raise ConfigError(f"Empty choice set: {text}")
        return Choice(options)

    if text.startswith('{') or text.startswith('log') or text.startswith('uniform'):
        raise ConfigError(f"Invalid range format: {text}")

    return Choice((parse_scalar(text),))
