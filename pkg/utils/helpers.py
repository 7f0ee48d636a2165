"""
File: utils/helpers.py
Location: aerobatic_rl/utils/helpers.py
Purpose: Small shared helpers - angle wrapping, atomic file writes, JSON-lines
"""

import json
import math
import os
import tempfile

import numpy as np


def wrap_180(angle_deg):
    """
    Wrap angle(s) into (-180, 180]

    Works on floats and numpy arrays.

    Examples:
        wrap_180(190) → -170
        wrap_180(-180) → 180
        wrap_180(360) → 0
    """
    if isinstance(angle_deg, np.ndarray):
        return angle_deg - 360.0 * np.ceil((angle_deg - 180.0) / 360.0)
    return angle_deg - 360.0 * math.ceil((angle_deg - 180.0) / 360.0)


def wrap_360(angle_deg):
    """
    Wrap angle(s) into [0, 360)

    Tiny negative inputs would round up to 360.0 under a plain modulo,
    those are folded back to 0.
    """
    if isinstance(angle_deg, np.ndarray):
        wrapped = np.mod(angle_deg, 360.0)
        wrapped[wrapped >= 360.0] = 0.0
        return wrapped
    wrapped = angle_deg % 360.0
    return 0.0 if wrapped >= 360.0 else wrapped


def atomic_write_text(path, text):
    """
    Write text to path via temp file + rename

    Readers never see a half-written file. Newlines are written as '\\n'.
    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix='.tmp-', suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='\n') as f:
            f.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def atomic_write_bytes(path, payload):
    """Binary counterpart of atomic_write_text"""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix='.tmp-', suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, 'wb') as f:
            f.write(payload)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def format_float(value):
    """Shortest round-trip text for a float (used in every CSV we write)"""
    return repr(float(value))


def to_json_line(record):
    """
    Serialize one metrics record

    Key order is the insertion order of the dict, floats use repr, so the
    same record always produces the same bytes.
    """
    return json.dumps(record, separators=(', ', ': '), allow_nan=True)


class JsonLinesWriter:
    """
    Append-only JSON-lines sink, usable as a training callback

    Usage:
        writer = JsonLinesWriter('run/metrics.jsonl')
        trainer.train(..., callbacks=[writer])
    """

    def __init__(self, path):
        self.path = path
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        # Truncate so a re-run reproduces the file byte for byte
        with open(self.path, 'w', encoding='utf-8', newline='\n'):
            pass
        self.count = 0

    def __call__(self, record):
        with open(self.path, 'a', encoding='utf-8', newline='\n') as f:
            f.write(to_json_line(record) + '\n')
        self.count += 1
