"""
Database Manager for the cGAN path planner
Handles SQLite storage of evaluation metrics, bench timings and dataset processing runs.
"""

import sqlite3
import logging
import pandas as pd
from typing import Dict, Optional
import os

import config

logger = logging.getLogger(__name__)

SCHEMA_PATH = os.path.join(os.path.dirname(os.path.abspath(__file__)), "database_schema.sql")


class DatabaseManager:
    """Manages SQLite database operations for experiment results."""

    def __init__(self, db_path: str = config.RESULTS_DB):
        """Initialize database manager.

        Args:
            db_path: Path to SQLite database file
        """
        self.db_path = db_path
        self.init_database()

    def init_database(self):
        """Initialize database with schema."""
        try:
            with sqlite3.connect(self.db_path) as conn:
                if os.path.exists(SCHEMA_PATH):
                    with open(SCHEMA_PATH, 'r') as f:
                        schema = f.read()
                    conn.executescript(schema)
                    logger.info(f"Database initialized: {self.db_path}")
                else:
                    logger.warning(f"Schema file not found: {SCHEMA_PATH}")
        except Exception as e:
            logger.error(f"Failed to initialize database: {e}")
            raise

    def get_connection(self):
        """Get database connection with proper configuration."""
        conn = sqlite3.connect(self.db_path)
        conn.row_factory = sqlite3.Row
        return conn

    def insert_evaluation_results(self, results: pd.DataFrame, run_id: str, dtheta: float,
                                  checkpoint: Optional[str] = None, config_hash: Optional[str] = None) -> int:
        """Insert per-condition evaluation rows.

        Args:
            results: DataFrame with fold, scenario_id, split, TP, FP, FN, IoU, Precision
            run_id: Identifier grouping one evaluation run
            dtheta: Evaluation grid resolution in degrees

        Returns:
            Number of records inserted
        """
        if results.empty:
            return 0

        try:
            with self.get_connection() as conn:
                cursor = conn.cursor()
                inserted = 0
                skipped = 0

                for record in results.to_dict(orient='records'):
                    cursor.execute("""
                        INSERT OR IGNORE INTO evaluation_results
                        (run_id, checkpoint, fold, scenario_id, split, dtheta, tp, fp, fn, iou, precision, config_hash)
                        VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
                    """, (
                        run_id, checkpoint, int(record['fold']), int(record['scenario_id']), record['split'],
                        float(dtheta), int(record['TP']), int(record['FP']), int(record['FN']),
                        float(record['IoU']), float(record['Precision']), config_hash
                    ))
                    if cursor.rowcount > 0:
                        inserted += 1
                    else:
                        skipped += 1

                conn.commit()
                logger.info(f"Evaluation results: {inserted} inserted, {skipped} skipped")
                return inserted

        except Exception as e:
            logger.error(f"Failed to insert evaluation results: {e}")
            raise

    def insert_bench_records(self, frame: pd.DataFrame, run_id: str, config_hash: Optional[str] = None) -> int:
        """Insert bench records (one row per scenario and method)."""
        if frame.empty:
            return 0

        try:
            with self.get_connection() as conn:
                cursor = conn.cursor()
                inserted = 0
                for record in frame.to_dict(orient='records'):
                    cursor.execute("""
                        INSERT OR IGNORE INTO bench_records
                        (run_id, scenario_id, obstacle_count, total_obstacle_area, method, seconds, ratio,
                         valid_fraction, queries, config_hash)
                        VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
                    """, (
                        run_id, int(record['scenario_id']), int(record['obstacle_count']),
                        float(record['total_obstacle_area']), record['method'], float(record['seconds']),
                        float(record['ratio']), float(record['valid_fraction']), int(record['queries']),
                        config_hash
                    ))
                    inserted += max(cursor.rowcount, 0)
                conn.commit()
                logger.info(f"Bench records: {inserted} inserted")
                return inserted

        except Exception as e:
            logger.error(f"Failed to insert bench records: {e}")
            raise

    def log_processing(self, filename: str, file_type: str, status: str,
                       records_processed: int = 0, records_added: int = 0,
                       records_skipped: int = 0, error_message: str = None):
        """Log file processing results.

        Args:
            filename: Name of processed file
            file_type: Type of file (e.g. 'scenarios')
            status: Processing status ('success', 'error')
            records_processed: Number of scenarios read
            records_added: Number of labeled grids written
            records_skipped: Number of scenarios skipped
            error_message: Error message if any
        """
        try:
            with self.get_connection() as conn:
                cursor = conn.cursor()
                cursor.execute("""
                    INSERT INTO processing_log
                    (filename, file_type, status, records_processed, records_added,
                     records_skipped, error_message)
                    VALUES (?, ?, ?, ?, ?, ?, ?)
                """, (filename, file_type, status, records_processed,
                      records_added, records_skipped, error_message))
                conn.commit()

        except Exception as e:
            logger.error(f"Failed to log processing: {e}")

    def get_evaluation_summary(self, run_id: Optional[str] = None) -> pd.DataFrame:
        """Per-run, per-split IoU/Precision summary."""
        try:
            with self.get_connection() as conn:
                if run_id:
                    return pd.read_sql_query(
                        "SELECT * FROM v_evaluation_summary WHERE run_id = ? ORDER BY split DESC",
                        conn, params=(run_id,))
                return pd.read_sql_query("SELECT * FROM v_evaluation_summary ORDER BY run_id, split DESC", conn)
        except Exception as e:
            logger.error(f"Failed to get evaluation summary: {e}")
            return pd.DataFrame()

    def get_bench_summary(self, run_id: Optional[str] = None) -> pd.DataFrame:
        """Per-run, per-method timing summary by obstacle count."""
        try:
            with self.get_connection() as conn:
                if run_id:
                    return pd.read_sql_query(
                        "SELECT * FROM v_bench_summary WHERE run_id = ? ORDER BY method, obstacle_count",
                        conn, params=(run_id,))
                return pd.read_sql_query(
                    "SELECT * FROM v_bench_summary ORDER BY run_id, method, obstacle_count", conn)
        except Exception as e:
            logger.error(f"Failed to get bench summary: {e}")
            return pd.DataFrame()

    def get_processing_log(self, limit: int = 50) -> pd.DataFrame:
        try:
            with self.get_connection() as conn:
                return pd.read_sql_query(
                    "SELECT * FROM processing_log ORDER BY id DESC LIMIT ?", conn, params=(limit,))
        except Exception as e:
            logger.error(f"Failed to get processing log: {e}")
            return pd.DataFrame()

    def export_to_excel(self, output_dir: str = "."):
        """Export evaluation and bench tables to an Excel workbook.

        Args:
            output_dir: Directory to save the workbook

        Returns:
            Path of the written workbook
        """
        try:
            os.makedirs(output_dir, exist_ok=True)
            path = os.path.join(output_dir, "Experiment_Results.xlsx")
            with self.get_connection() as conn:
                evaluation = pd.read_sql_query(
                    """SELECT run_id, fold, scenario_id, split, dtheta, tp, fp, fn, iou, precision
                       FROM evaluation_results ORDER BY run_id, fold, split, scenario_id""", conn)
                bench = pd.read_sql_query(
                    """SELECT run_id, scenario_id, obstacle_count, total_obstacle_area, method, seconds, ratio,
                              valid_fraction FROM bench_records ORDER BY run_id, method, obstacle_count""", conn)
                summary = pd.read_sql_query("SELECT * FROM v_evaluation_summary", conn)

            with pd.ExcelWriter(path, engine='openpyxl') as writer:
                summary.to_excel(writer, sheet_name='Summary', index=False)
                evaluation.to_excel(writer, sheet_name='Evaluation', index=False)
                bench.to_excel(writer, sheet_name='Bench', index=False)

            logger.info(f"Exported results to {path}")
            return path

        except Exception as e:
            logger.error(f"Failed to export to Excel: {e}")
            raise

    def get_database_stats(self) -> Dict:
        """Get database statistics.

        Returns:
            Dictionary with database statistics
        """
        try:
            with self.get_connection() as conn:
                cursor = conn.cursor()

                stats = {}

                for table in ['evaluation_results', 'bench_records', 'processing_log']:
                    cursor.execute(f"SELECT COUNT(*) FROM {table}")
                    stats[f"{table}_count"] = cursor.fetchone()[0]

                cursor.execute("SELECT COUNT(DISTINCT run_id) FROM evaluation_results")
                stats['evaluation_runs'] = cursor.fetchone()[0]

                cursor.execute("SELECT COUNT(DISTINCT run_id) FROM bench_records")
                stats['bench_runs'] = cursor.fetchone()[0]

                cursor.execute("SELECT MIN(created_at), MAX(created_at) FROM evaluation_results")
                date_range = cursor.fetchone()
                stats['evaluation_date_range'] = f"{date_range[0]} to {date_range[1]}" if date_range[0] else "No data"

                return stats

        except Exception as e:
            logger.error(f"Failed to get database stats: {e}")
            return {}
