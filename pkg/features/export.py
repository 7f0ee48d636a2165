"""
File: features/export.py
Location: aerobatic_rl/features/export.py
Purpose: Turn evaluation traces into plot-ready CSVs (target vs actual per
         channel, plus the commands applied)
"""

import csv
import glob
import io
import logging
import os
import re

from core.errors import ExportError
from utils.helpers import atomic_write_text

logger = logging.getLogger(__name__)

PLOT_HEADER = (
    't_s',
    'target_roll_deg', 'actual_roll_deg',
    'target_gamma_deg', 'actual_gamma_deg',
    'target_yaw_deg', 'actual_yaw_deg',
    'target_mach', 'actual_mach',
    'aileron', 'elevator', 'rudder', 'throttle',
)

_TRACE_NAME = re.compile(r'^ep(\d+)\.csv$')


def _episode_index(path):
    return int(_TRACE_NAME.match(os.path.basename(path)).group(1))


def find_traces(run_dir):
    """traces/ep<k>.csv files of a run directory, ordered by k"""
    pattern = os.path.join(run_dir, 'traces', 'ep*.csv')
    paths = [p for p in glob.glob(pattern) if _TRACE_NAME.match(os.path.basename(p))]
    return sorted(paths, key=_episode_index)


def trace_to_plot_text(trace_path):
    """Re-project one trace CSV onto the plot columns (cells copied verbatim)"""
    with open(trace_path, encoding='utf-8', newline='') as f:
        reader = csv.DictReader(f)
        missing = [c for c in PLOT_HEADER if c not in (reader.fieldnames or ())]
        if missing:
            raise ExportError(f"{trace_path}: trace lacks columns {missing}")
        rows = [[row[c] for c in PLOT_HEADER] for row in reader]

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(PLOT_HEADER)
    writer.writerows(rows)
    return buffer.getvalue(), len(rows)


def export_run(run_dir):
    """
    Write plots/ep<k>.csv for every trace of a run

    Idempotent: a second call rewrites identical files.

    Returns:
        list: written paths

    Raises:
        ExportError: the run has no traces
    """
    traces = find_traces(run_dir)
    if not traces:
        raise ExportError(f"no traces found under {os.path.join(run_dir, 'traces')}")

    written = []
    for trace_path in traces:
        text, row_count = trace_to_plot_text(trace_path)
        out_path = os.path.join(run_dir, 'plots', os.path.basename(trace_path))
        atomic_write_text(out_path, text)
        written.append(out_path)
        logger.debug(f"Exported {trace_path} -> {out_path} ({row_count} rows)")

    logger.info(f"✅ Exported {len(written)} plot files to {os.path.join(run_dir, 'plots')}")
    return written
