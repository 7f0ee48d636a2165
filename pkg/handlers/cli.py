"""
File: handlers/cli.py
Location: aerobatic_rl/handlers/cli.py
Purpose: Command-line parser and exit-code mapping

Exit codes:
    0  success
    1  usage problem (unknown flag, missing argument, no subcommand)
    2  runtime fault (any other toolkit error, unreadable file)
"""

import argparse
import logging
import sys

from config import settings
from core.errors import AmrlError, UsageError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAULT = 2


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError instead of exiting"""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def common_options():
    """Flags every subcommand accepts"""
    parent = CliParser(add_help=False)
    parent.add_argument('--config', help='run config file (key = value)')
    parent.add_argument('--seed', type=int, help='overrides env.seed and sac.seed')
    parent.add_argument('--out', help='output file or run directory')
    return parent


def build_parser():
    from handlers.command_handlers import register_command_handlers

    parser = CliParser(
        prog='amrl',
        description=f'{settings.APP_NAME} {settings.APP_VERSION} - aerobatic maneuver training toolkit',
    )
    subparsers = parser.add_subparsers(dest='command', metavar='command', parser_class=CliParser)
    register_command_handlers(subparsers, common_options())
    return parser


def run(argv=None):
    """
    Parse argv and dispatch to the subcommand handler

    Returns:
        int: exit code
    """
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()

    if not argv:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: a command is required", file=sys.stderr)
        return EXIT_USAGE

    try:
        args = parser.parse_args(argv)
        args.argv = argv
        if not getattr(args, 'handler', None):
            raise UsageError(f"{parser.prog}: a command is required")
        code = args.handler(args)
        return EXIT_OK if code is None else code

    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(str(e), file=sys.stderr)
        return EXIT_USAGE

    except SystemExit as e:
        # --help / --version
        return EXIT_OK if e.code in (None, 0) else EXIT_USAGE

    except AmrlError as e:
        logger.error(f"❌ {type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAULT

    except OSError as e:
        logger.error(f"❌ {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAULT
