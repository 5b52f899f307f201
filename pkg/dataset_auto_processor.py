#!/usr/bin/env python3
"""
Automatic dataset builder
Monitors the 'unprocessed' directory for scenario JSON files and labels each
one into a dataset directory as soon as it is dropped in.

Successful files move to 'processed/'; failed files stay where they are with
a '<name>.error' file next to them. Every attempt is recorded in the results
database processing log.
"""

import argparse
import logging
import os
import shutil
import time
from datetime import datetime

from watchdog.events import FileSystemEventHandler
from watchdog.observers import Observer

import config
from database_manager import DatabaseManager
from dataset import write_dataset
from scenarios import load_scenarios

logger = logging.getLogger(__name__)


class ScenarioFileHandler(FileSystemEventHandler):
    def __init__(self, unprocessed_dir, processed_dir, output_dir, db_path=config.RESULTS_DB,
                 seed=config.GLOBAL_SEED, n_folds=config.FOLD_COUNT, workers=config.DATASET_WORKERS,
                 settle_seconds=2.0):
        self.unprocessed_dir = unprocessed_dir
        self.processed_dir = processed_dir
        self.output_dir = output_dir
        self.db_manager = DatabaseManager(db_path)
        self.seed = seed
        self.n_folds = n_folds
        self.workers = workers
        self.settle_seconds = settle_seconds
        self.processing_files = set()

    @staticmethod
    def is_scenario_file(filename):
        return filename.endswith('.json') and not filename.startswith('.')

    def create_error_file(self, file_path, error_message):
        """Write failure details next to the input file."""
        error_file_path = f"{file_path}.error"
        try:
            with open(error_file_path, 'w') as f:
                f.write(f"Processing failed for: {os.path.basename(file_path)}\n")
                f.write(f"Timestamp: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}\n")
                f.write(f"Error: {error_message}\n")
            logger.info(f"Created error file: {error_file_path}")
        except Exception as e:
            logger.error(f"Failed to create error file: {e}")

    def on_created(self, event):
        if event.is_directory:
            return
        self._maybe_process(event.src_path)

    def on_moved(self, event):
        """Drag and drop arrives as a move."""
        if event.is_directory:
            return
        self._maybe_process(event.dest_path)

    def _maybe_process(self, file_path):
        filename = os.path.basename(file_path)
        if filename in self.processing_files or not self.is_scenario_file(filename):
            return
        logger.info(f"New scenario file detected: {filename}")
        self.process_file(file_path, filename)

    def process_file(self, file_path, filename):
        """Label one scenario file into <output_dir>/<stem>/; returns the dataset directory or None."""
        self.processing_files.add(filename)
        scenario_count = 0
        try:
            # file may still be being written
            time.sleep(self.settle_seconds)

            scenarios = load_scenarios(file_path)
            scenario_count = len(scenarios)
            out_dir = os.path.join(self.output_dir, os.path.splitext(filename)[0])
            metadata = config.artifact_metadata(self.seed, {'source': filename, 'folds': self.n_folds})
            dataset = write_dataset(out_dir, scenarios, file_path, self.seed, metadata,
                                    n_folds=self.n_folds, workers=self.workers)

            shutil.move(file_path, os.path.join(self.processed_dir, filename))
            self.db_manager.log_processing(filename, 'scenarios', 'success', records_processed=scenario_count,
                                           records_added=len(dataset.grids))
            logger.info(f"Processed {filename}: {len(dataset.grids)} labeled grids in {out_dir}")
            return out_dir

        except Exception as e:
            error_msg = f"Error processing {filename}: {e}"
            logger.error(error_msg)
            self.create_error_file(file_path, error_msg)
            self.db_manager.log_processing(filename, 'scenarios', 'error', records_processed=scenario_count,
                                           records_skipped=scenario_count, error_message=str(e))
            logger.info(f"File {filename} kept in unprocessed directory with error file")
            return None

        finally:
            self.processing_files.discard(filename)

    def process_existing_files(self):
        logger.info("Checking for existing files in unprocessed directory...")
        for filename in sorted(os.listdir(self.unprocessed_dir)):
            file_path = os.path.join(self.unprocessed_dir, filename)
            if os.path.isfile(file_path) and self.is_scenario_file(filename) \
                    and not os.path.exists(f"{file_path}.error"):
                logger.info(f"Processing existing file: {filename}")
                self.process_file(file_path, filename)


class DatasetAutoProcessor:
    def __init__(self, unprocessed_dir="unprocessed", processed_dir="processed", output_dir=config.DATA_DIRECTORY,
                 **handler_options):
        self.unprocessed_dir = unprocessed_dir
        self.processed_dir = processed_dir
        self.output_dir = output_dir
        self.handler_options = handler_options
        self.observer = None

    def start(self):
        """Start the file watcher; blocks until interrupted."""
        logger.info("Starting dataset auto processor")
        logger.info(f"Monitoring directory: {self.unprocessed_dir}")
        logger.info(f"Processed files directory: {self.processed_dir}")
        logger.info(f"Dataset output directory: {self.output_dir}")

        for directory in (self.unprocessed_dir, self.processed_dir, self.output_dir):
            os.makedirs(directory, exist_ok=True)

        event_handler = ScenarioFileHandler(self.unprocessed_dir, self.processed_dir, self.output_dir,
                                            **self.handler_options)
        event_handler.process_existing_files()

        self.observer = Observer()
        self.observer.schedule(event_handler, self.unprocessed_dir, recursive=False)
        self.observer.start()
        logger.info("File watcher started. Drop scenario JSON files into the 'unprocessed' directory.")

        try:
            while True:
                time.sleep(1)
        except KeyboardInterrupt:
            logger.info("Stopping dataset auto processor...")
            self.stop()

    def stop(self):
        if self.observer:
            self.observer.stop()
            self.observer.join()
            self.observer = None
            logger.info("File watcher stopped")


def main():
    logging.basicConfig(
        level=logging.INFO,
        format='%(asctime)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler('dataset_auto_processor.log'),
            logging.StreamHandler()
        ]
    )

    parser = argparse.ArgumentParser(description="Automatic dataset builder for scenario files")
    parser.add_argument('--unprocessed', default='unprocessed',
                        help='Directory to monitor for new files (default: unprocessed)')
    parser.add_argument('--processed', default='processed',
                        help='Directory for processed files (default: processed)')
    parser.add_argument('--output', default=config.DATA_DIRECTORY,
                        help=f'Directory for dataset directories (default: {config.DATA_DIRECTORY})')
    parser.add_argument('--db', default=config.RESULTS_DB, help='Results database for the processing log')
    parser.add_argument('--seed', type=int, default=config.GLOBAL_SEED, help='Fold shuffling seed')
    parser.add_argument('--folds', type=int, default=config.FOLD_COUNT, help='Cross-validation folds')
    args = parser.parse_args()

    processor = DatasetAutoProcessor(args.unprocessed, args.processed, args.output,
                                     db_path=args.db, seed=args.seed, n_folds=args.folds)
    processor.start()


if __name__ == "__main__":
    main()
