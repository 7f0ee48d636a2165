"""
File: main.py
Location: aerobatic_rl/main.py
Purpose: Command-line entry point

Usage:
    python main.py gen-traj --maneuver loop --duration 40 --out loop.csv
    python main.py train --config my.cfg --steps 500000 --out runs/loop
    python main.py eval --checkpoint runs/loop/checkpoint.amrl --out runs/loop-eval --export
"""

import io
import logging
import sys

from config.settings import APP_NAME, APP_VERSION, LOG_FILE, LOG_FORMAT, LOG_LEVEL

# Setup logging
if sys.platform == 'win32':
    sys.stdout = io.TextIOWrapper(sys.stdout.buffer, encoding='utf-8')
    sys.stderr = io.TextIOWrapper(sys.stderr.buffer, encoding='utf-8')

logging.basicConfig(
    format=LOG_FORMAT,
    level=LOG_LEVEL,
    handlers=[
        logging.FileHandler(LOG_FILE, encoding='utf-8'),
        logging.StreamHandler(sys.stdout)
    ]
)
logger = logging.getLogger(__name__)

from handlers.cli import run


def main(argv=None):
    """Main entry point"""
    logger.debug(f"{APP_NAME} {APP_VERSION}")
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
