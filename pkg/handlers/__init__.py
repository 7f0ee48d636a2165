"""
File: handlers/__init__.py
Location: aerobatic_rl/handlers/__init__.py
Purpose: Handlers package initialization
"""

from .cli import build_parser, run
from .command_handlers import register_command_handlers

__all__ = ['build_parser', 'run', 'register_command_handlers']
