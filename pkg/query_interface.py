"""
Query Interface for the results database
Prints run statistics and summaries, and renders the cross-validation table to Excel or PDF.
"""

import argparse
import itertools
import logging
import math
import pandas as pd
from database_manager import DatabaseManager
from datetime import datetime
import os
from typing import List, Tuple
from reportlab.lib.pagesizes import landscape, letter
from reportlab.platypus import SimpleDocTemplate, Table, TableStyle, Paragraph, Spacer
from reportlab.lib.styles import getSampleStyleSheet
from reportlab.lib.units import inch
from reportlab.lib import colors

import config

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ['run_id', 'split', 'conditions', 'iou_mean', 'iou_min', 'iou_max',
                   'precision_mean', 'precision_min', 'precision_max']
METRIC_STATS = ('mean', 'min', 'max', 'std')
METRIC_LABELS = {'iou': 'IoU', 'precision': 'Precision'}


def _metric_group(column: str):
    """('IoU', 'mean') for 'iou_mean'; None for columns that are not metric statistics."""
    head, _, stat = column.rpartition('_')
    if head and stat in METRIC_STATS:
        return METRIC_LABELS.get(head, head), stat
    return None


def format_cell(value) -> str:
    if isinstance(value, float):
        return 'n/a' if math.isnan(value) else f"{value:.3f}"
    return str(value)


def pdf_table(df: pd.DataFrame) -> Tuple[List[List[str]], List[tuple]]:
    """Cell text and span/alignment commands for a summary frame.

    The first two rows are headers: ``<metric>_<stat>`` columns share one
    spanning metric label above their statistic names, other columns span
    both rows. Numeric columns are right-aligned.
    """
    groups = [_metric_group(col) for col in df.columns]
    top, bottom, commands = [], [], []

    j = 0
    for label, run in itertools.groupby(groups, key=lambda g: g[0] if g else None):
        width = len(list(run))
        for k in range(j, j + width):
            top.append(df.columns[k] if label is None else (label if k == j else ''))
        if label is not None and width > 1:
            commands.append(('SPAN', (j, 0), (j + width - 1, 0)))
        j += width

    for j, group in enumerate(groups):
        bottom.append('' if group is None else group[1])
        if group is None:
            commands.append(('SPAN', (j, 0), (j, 1)))
        if pd.api.types.is_numeric_dtype(df.iloc[:, j]):
            commands.append(('ALIGN', (j, 2), (j, -1), 'RIGHT'))

    body = [[format_cell(v) for v in row] for row in df.itertuples(index=False)]
    return [top, bottom] + body, commands


def _column_width(df: pd.DataFrame, column: str) -> float:
    if _metric_group(column):
        return 0.65 * inch
    longest = max([len(str(column))] + [len(format_cell(v)) for v in df[column]])
    return min(0.2 + 0.075 * longest, 2.0) * inch


class QueryInterface:
    """Reporting interface over the results database."""

    def __init__(self, db_path: str = config.RESULTS_DB):
        """Initialize query interface.

        Args:
            db_path: Path to SQLite database file
        """
        self.db_manager = DatabaseManager(db_path)

    def cross_validation_table(self, run_id: str = None) -> pd.DataFrame:
        """Evaluation summary rounded for reporting."""
        df = self.db_manager.get_evaluation_summary(run_id)
        if df.empty:
            logger.warning("No evaluation results found")
            return df
        df = df[SUMMARY_COLUMNS].copy()
        for col in SUMMARY_COLUMNS[3:]:
            df[col] = df[col].round(3)
        return df

    def show_database_stats(self):
        """Display database statistics."""
        stats = self.db_manager.get_database_stats()

        print("\n" + "=" * 50)
        print("RESULTS DATABASE STATISTICS")
        print("=" * 50)

        if stats:
            print(f"Evaluation Rows: {stats.get('evaluation_results_count', 0):,}")
            print(f"Bench Records: {stats.get('bench_records_count', 0):,}")
            print(f"Processing Log Entries: {stats.get('processing_log_count', 0):,}")
            print()
            print(f"Evaluation Runs: {stats.get('evaluation_runs', 0):,}")
            print(f"Bench Runs: {stats.get('bench_runs', 0):,}")
            print()
            print(f"Evaluation Date Range: {stats.get('evaluation_date_range', 'No data')}")
        else:
            print("No statistics available")

        print("=" * 50)

    def show_summaries(self, run_id: str = None):
        """Display evaluation and bench summaries."""
        print("\n" + "=" * 50)
        print("EVALUATION SUMMARY")
        print("=" * 50)
        evaluation = self.cross_validation_table(run_id)
        if not evaluation.empty:
            print(evaluation.to_string(index=False))
        else:
            print("No evaluation data available")

        print("\n" + "=" * 50)
        print("BENCH SUMMARY")
        print("=" * 50)
        bench = self.db_manager.get_bench_summary(run_id)
        if not bench.empty:
            print(bench.to_string(index=False))
        else:
            print("No bench data available")

    def export_data(self, output_dir: str = "."):
        """Export database tables to an Excel workbook."""
        logger.info(f"Exporting data to: {output_dir}")
        path = self.db_manager.export_to_excel(output_dir)
        print(f"Data exported to {path}")
        return path

    def custom_query(self, query: str):
        """Execute a custom SQL query.

        Args:
            query: SQL query to execute
        """
        try:
            with self.db_manager.get_connection() as conn:
                df = pd.read_sql_query(query, conn)
                if not df.empty:
                    print(f"\nQuery Results ({len(df)} rows):")
                    print("=" * 50)
                    print(df.to_string(index=False))
                else:
                    print("No results found")
        except Exception as e:
            logger.error(f"Query failed: {e}")
            print(f"Error: {e}")

    def export_to_pdf(self, df: pd.DataFrame, output_file: str, title: str = "Cross-Validation Summary"):
        """Render a summary frame as a landscape PDF table with grouped metric headers."""
        try:
            doc = SimpleDocTemplate(output_file, pagesize=landscape(letter))
            styles = getSampleStyleSheet()
            generated = datetime.now().strftime("%Y-%m-%d %H:%M")
            story = [Paragraph(title, styles['Title']),
                     Paragraph(f"{len(df)} rows, generated {generated}", styles['Italic']),
                     Spacer(1, 0.2 * inch)]

            if df.empty:
                story.append(Paragraph("No evaluation results in the database.", styles['Normal']))
            else:
                rows, commands = pdf_table(df)
                table = Table(rows, colWidths=[_column_width(df, col) for col in df.columns], repeatRows=2)
                style = [
                    ('FONTNAME', (0, 0), (-1, 1), 'Helvetica-Bold'),
                    ('FONTSIZE', (0, 0), (-1, -1), 8),
                    ('ALIGN', (0, 0), (-1, 1), 'CENTER'),
                    ('VALIGN', (0, 0), (-1, 1), 'MIDDLE'),
                    ('LINEABOVE', (0, 0), (-1, 0), 1.2, colors.black),
                    ('LINEBELOW', (0, 1), (-1, 1), 0.6, colors.black),
                    ('LINEBELOW', (0, -1), (-1, -1), 1.2, colors.black),
                ]
                if 'split' in df.columns:
                    for i, split in enumerate(df['split'], start=2):
                        if split == 'test':
                            style.append(('BACKGROUND', (0, i), (-1, i), colors.HexColor('#e8eef7')))
                table.setStyle(TableStyle(style + commands))
                story.append(table)

            doc.build(story)
            logger.info(f"PDF report generated: {output_file}")

        except Exception as e:
            logger.error(f"Failed to generate PDF: {e}")
            raise

    def report(self, output_dir: str = ".", run_id: str = None, output_format: str = 'excel'):
        """Write the cross-validation summary as Excel and/or PDF; returns written paths."""
        os.makedirs(output_dir, exist_ok=True)
        paths = []
        if output_format in ('excel', 'both'):
            paths.append(self.export_data(output_dir))
        if output_format in ('pdf', 'both'):
            path = os.path.join(output_dir, "Cross_Validation_Summary.pdf")
            self.export_to_pdf(self.cross_validation_table(run_id), path)
            paths.append(path)
        return paths


def build_parser(parser=None, parents=()):
    """Report subcommands; ``parents`` are shared option parsers attached to each of them."""
    parser = parser or argparse.ArgumentParser(description="Results Database Query Interface")
    parents = list(parents)
    parser.add_argument('--db', default=config.RESULTS_DB, help='Database file path')

    subparsers = parser.add_subparsers(dest='report_command', help='Available commands')
    subparsers.add_parser('stats', parents=parents, help='Show database statistics')

    summaries_parser = subparsers.add_parser('summaries', parents=parents,
                                             help='Show evaluation and bench summaries')
    summaries_parser.add_argument('--run-id', help='Restrict to one run')

    export_parser = subparsers.add_parser('export', parents=parents, help='Export results to Excel and/or PDF')
    export_parser.add_argument('--output-dir', default='.', help='Output directory')
    export_parser.add_argument('--run-id', help='Restrict the PDF summary to one run')
    export_parser.add_argument('--format', choices=['excel', 'pdf', 'both'], default='excel',
                               help='Output format (default: excel)')

    query_parser = subparsers.add_parser('query', parents=parents, help='Execute custom SQL query')
    query_parser.add_argument('sql', help='SQL query to execute')
    return parser


def run(args) -> int:
    interface = QueryInterface(args.db)
    if args.report_command == 'stats':
        interface.show_database_stats()
    elif args.report_command == 'summaries':
        interface.show_summaries(args.run_id)
    elif args.report_command == 'export':
        interface.report(args.output_dir, args.run_id, args.format)
    elif args.report_command == 'query':
        interface.custom_query(args.sql)
    else:
        interface.show_database_stats()
    return 0


def main():
    """Main function for command-line interface."""
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
    args = build_parser().parse_args()
    return run(args)


if __name__ == "__main__":
    main()
