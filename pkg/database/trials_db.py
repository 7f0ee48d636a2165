"""
File: database/trials_db.py
Location: aerobatic_rl/database/trials_db.py
Purpose: Hyper-parameter trial ledger operations
"""

import json
import logging
import math

from config.clock import format_timestamp

logger = logging.getLogger(__name__)


class TrialsDB:
    """
    Trial ledger operations

    Failed trials are stored with a NULL score and their fault class name.
    """

    def __init__(self, db_manager):
        self.db = db_manager

    def _row_to_dict(self, row):
        if row is None:
            return None
        result = dict(row)
        result['params'] = json.loads(result.pop('params_json'))
        if result['score'] is None:
            result['score'] = float('-inf')
        return result

    def record_trial(self, search_seed, trial_index, params, n_parameters, score, fault=None):
        """
        Store one finished trial

        Returns:
            int: row id
        """
        failed = fault is not None or not math.isfinite(score)
        with self.db.get_db() as conn:
            c = conn.cursor()
            c.execute('''
                INSERT INTO trials (search_seed, trial_index, params_json, n_parameters, score,
                                    status, fault, created_at)
                VALUES (?, ?, ?, ?, ?, ?, ?, ?)
            ''', (search_seed, trial_index, json.dumps(params, sort_keys=True), n_parameters,
                  None if failed else float(score), 'failed' if failed else 'ok', fault,
                  format_timestamp()))
            conn.commit()
            row_id = c.lastrowid
        logger.debug(f"Recorded trial {trial_index} of search {search_seed} (id {row_id})")
        return row_id

    def get_trials(self, search_seed):
        """All trials of one search, in trial order"""
        with self.db.get_db() as conn:
            c = conn.cursor()
            c.execute('SELECT * FROM trials WHERE search_seed = ? ORDER BY trial_index, id', (search_seed,))
            return [self._row_to_dict(row) for row in c.fetchall()]

    def get_best(self, search_seed):
        """Best successful trial (ties: fewer parameters, then earlier trial)"""
        with self.db.get_db() as conn:
            c = conn.cursor()
            c.execute('''
                SELECT * FROM trials
                WHERE search_seed = ? AND status = 'ok'
                ORDER BY score DESC, n_parameters ASC, trial_index ASC
                LIMIT 1
            ''', (search_seed,))
            return self._row_to_dict(c.fetchone())

    def clear_search(self, search_seed):
        """Drop earlier results of a search so a re-run starts clean"""
        with self.db.get_db() as conn:
            c = conn.cursor()
            c.execute('DELETE FROM trials WHERE search_seed = ?', (search_seed,))
            conn.commit()
            return c.rowcount
