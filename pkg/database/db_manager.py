"""
File: database/db_manager.py
Location: aerobatic_rl/database/db_manager.py
Purpose: SQLite connection manager for the hyper-parameter trial ledger
"""

import logging
import os
import sqlite3
from contextlib import contextmanager

from config import settings

logger = logging.getLogger(__name__)


class DatabaseManager:
    """
    SQLite connection manager

    Features:
    - Context manager for safe connections
    - Table initialization
    - Dictionary-like row access
    """

    def __init__(self, db_path=None):
        self.db_path = db_path or settings.TRIALS_DB_PATH

    @contextmanager
    def get_db(self):
        """
        Context manager for database connections
        Returns rows as dictionary-like objects
        """
        directory = os.path.dirname(os.path.abspath(self.db_path))
        os.makedirs(directory, exist_ok=True)
        conn = sqlite3.connect(self.db_path)
        conn.row_factory = sqlite3.Row
        try:
            yield conn
        finally:
            conn.close()

    def init_database(self):
        """Create the trials table"""
        with self.get_db() as conn:
            c = conn.cursor()
            c.execute('''
                CREATE TABLE IF NOT EXISTS trials (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    search_seed INTEGER NOT NULL,
                    trial_index INTEGER NOT NULL,
                    params_json TEXT NOT NULL,
                    n_parameters INTEGER NOT NULL,
                    score REAL,
                    status TEXT NOT NULL,
                    fault TEXT,
                    created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
                )
            ''')
            c.execute('CREATE INDEX IF NOT EXISTS idx_trials_seed ON trials(search_seed, trial_index)')
            conn.commit()
            logger.info(f"✅ Trial ledger initialized ({self.db_path})")

