"""
File: database/__init__.py
Location: aerobatic_rl/database/__init__.py
Purpose: Database package initialization
"""

from .db_manager import DatabaseManager
from .trials_db import TrialsDB

__all__ = ['DatabaseManager', 'TrialsDB']
