#!/usr/bin/env python3
"""
Command-line entry point for the cGAN collision-free path planner.

Subcommands:
    gen-scenarios   random obstacle scenarios -> scenario JSON
    gen-dataset     scenario JSON -> labeled joint-grid dataset directory
    train           dataset fold -> checkpoint + training log CSV
    eval            checkpoint(s) -> metrics CSV/JSON + IoU histogram SVG
    plan            checkpoint + scenario + start/goal -> plan JSON + SVG triptych
    bench           checkpoint + scenarios -> bench CSV + scaling SVGs
    map             checkpoint + scenario -> latent-to-joint mapping SVG
    report          results database summaries, Excel and PDF export

Settings come from defaults, then --config FILE, then command-line flags.
Failures print a single 'error: <code>: <message>' line to stderr.
"""

import argparse
import logging
import os
import sys
import uuid
from typing import Dict, List, Optional

import pandas as pd

import bench
import config
import evaluation
import figures
import query_interface
from cgan import TrainConfig, load_generator, load_models, train, write_training_log
from database_manager import DatabaseManager
from dataset import build_collision_map, load_dataset, write_dataset
from errors import DataError, PlannerError, UsageError
from planner import plan, save_plan
from scenarios import GenerationParams, empty_scenario, generate_scenario_set, load_scenarios, save_scenarios

logger = logging.getLogger(__name__)


class CliParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors follow the 'error: <code>: <message>' convention."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(UsageError.exit_code, f"error: {UsageError.code}: {message}\n")


def setup_logging(level: str = 'INFO', log_file: Optional[str] = config.LOG_FILE):
    # console log on stdout; stderr carries only the 'error: <code>: <message>' line
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stdout)]
    if log_file:
        handlers.insert(0, logging.FileHandler(log_file))
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format='%(asctime)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )


def parse_pair(text: str, name: str):
    try:
        a, b = (float(v) for v in text.split(','))
    except ValueError:
        raise UsageError(f"{name} must be 'theta1,theta2' in degrees, got {text!r}")
    return a, b


def parse_int_list(text: str, name: str) -> List[int]:
    try:
        return [int(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise UsageError(f"{name} must be a comma-separated list of integers, got {text!r}")


def parse_assignments(items: Optional[List[str]]) -> Dict[str, str]:
    values = {}
    for item in items or []:
        if '=' not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, value = item.split('=', 1)
        values[key.strip()] = value.strip()
    return values


# Flags that shadow a dotted setting key
FLAG_SETTINGS = {
    'seed': 'seed',
    'count': 'dataset.scenario_count',
    'folds': 'dataset.folds',
    'workers': 'dataset.workers',
    'epochs': 'train.epochs',
    'batch_size': 'train.batch_size',
    'dtheta': 'eval.dtheta',
    'graph_size': 'planner.graph_size',
    'repetitions': 'bench.repetitions',
    'queries': 'bench.queries',
}


def build_settings(args) -> Dict:
    file_values = config.read_config_file(args.config) if args.config else {}
    flag_values = parse_assignments(getattr(args, 'set', None))
    for attr, key in FLAG_SETTINGS.items():
        value = getattr(args, attr, None)
        if value is not None:
            flag_values[key] = value
    return config.apply_overrides(config.default_settings(), file_values, flag_values)


def _scenario_by_id(scenarios, scenario_id: int):
    for scn in scenarios:
        if scn.id == scenario_id:
            return scn
    if scenario_id == 0:
        return empty_scenario()
    raise DataError(f"scenario {scenario_id} not found")


def _scenario_file(args, settings) -> str:
    return args.scenarios or os.path.join(settings['paths.data_dir'], 'scenarios.json')


def _with_suffix(path: str, suffix: str) -> str:
    return os.path.splitext(path)[0] + suffix


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_gen_scenarios(args, settings, metadata) -> int:
    params = GenerationParams.from_settings(settings)
    if args.obstacles is not None:
        params.min_obstacles = params.max_obstacles = args.obstacles
    scenarios = generate_scenario_set(settings['dataset.scenario_count'], settings['seed'], params)
    save_scenarios(args.out, scenarios, settings['seed'], metadata)
    return 0


def cmd_gen_dataset(args, settings, metadata) -> int:
    scenarios = load_scenarios(args.scenarios)
    write_dataset(args.out, scenarios, args.scenarios, settings['seed'], metadata,
                  n_folds=settings['dataset.folds'], workers=settings['dataset.workers'])
    return 0


def cmd_train(args, settings, metadata) -> int:
    dataset = load_dataset(args.data)
    train_ids = [0] if args.obstacle_free_only else dataset.fold(args.fold).train_ids
    missing = [i for i in train_ids if i not in dataset.grids]
    if missing:
        raise DataError(f"training scenarios without labeled grids: {missing[:5]}")

    ckpt_meta = {**metadata, 'fold': args.fold, 'train_ids': len(train_ids)}
    result = train(dataset, train_ids, TrainConfig.from_settings(settings), checkpoint_path=args.out,
                   metadata=ckpt_meta)
    log_path = args.log_csv or _with_suffix(args.out, '.log.csv')
    write_training_log(log_path, result.log, metadata)
    logger.info(f"Training log written to {log_path}")
    return 0


def cmd_eval(args, settings, metadata) -> int:
    dataset = load_dataset(args.data)
    cfg = evaluation.EvalConfig(settings['eval.dtheta'])
    frames = []
    for ckpt in args.ckpt:
        G, _, ckpt_meta = load_models(ckpt)
        fold = args.fold if args.fold is not None else int(ckpt_meta.get('fold', 0))
        frames.append(evaluation.evaluate_fold(G, dataset, fold, cfg))

    results = pd.concat(frames, ignore_index=True)
    document = evaluation.write_results(args.out, results, {**metadata, 'dtheta': cfg.dtheta})

    fold = document.get('best_fold', int(results['fold'].iloc[0]))
    test_ious = results[(results['fold'] == fold) & (results['split'] == 'test')]['IoU']
    histogram = evaluation.iou_histogram(test_ious if len(test_ious) else results['IoU'],
                                         settings['eval.histogram_bins'])
    histogram.to_csv(os.path.join(args.out, 'iou_histogram.csv'), index=False)
    figures.plot_iou_histogram(os.path.join(args.out, 'iou_histogram.svg'), histogram,
                               title=f'IoU (fold {fold}, test)', metadata=metadata)

    if args.db:
        run_id = args.run_id or uuid.uuid4().hex[:12]
        DatabaseManager(args.db).insert_evaluation_results(results, run_id, cfg.dtheta, ','.join(args.ckpt),
                                                           metadata['config_hash'])
        logger.info(f"Evaluation recorded as run {run_id}")

    for split, row in document['splits'].items():
        print(f"{split}: IoU {row['IoU_mean']:.3f} (std {row['IoU_std']:.3f}), "
              f"Precision {row['Precision_mean']:.3f} over {row['conditions']} conditions")
    return 0


def cmd_plan(args, settings, metadata) -> int:
    G = load_generator(args.ckpt)
    scenarios = load_scenarios(_scenario_file(args, settings)) if args.scenario != 0 or args.scenarios else []
    scenario = _scenario_by_id(scenarios, args.scenario)
    result = plan(G, scenario, parse_pair(args.start, '--start'), parse_pair(args.goal, '--goal'),
                  method=args.method, graph_size=settings['planner.graph_size'],
                  line_steps=settings['planner.line_steps'], densify=settings['planner.densify'])
    save_plan(args.out, result, metadata)
    figures.plot_plan(_with_suffix(args.out, '.svg'), scenario, result,
                      build_collision_map(scenario.obstacles, config.VALIDATION_STEP_DEG), metadata,
                      forbidden_radius=GenerationParams.from_settings(settings).forbidden_radius)
    print(f"valid={str(result.valid).lower()} joint_path_length_deg={result.joint_path_length_deg:.2f}")
    return 0


def cmd_map(args, settings, metadata) -> int:
    G = load_generator(args.ckpt)
    scenarios = load_scenarios(_scenario_file(args, settings)) if args.scenario != 0 or args.scenarios else []
    scenario = _scenario_by_id(scenarios, args.scenario)
    samples = evaluation.mapping_samples(G, scenario.mask, args.grid)
    radius = GenerationParams.from_settings(settings).forbidden_radius
    figures.plot_mapping(args.out, scenario, build_collision_map(scenario.obstacles, config.VALIDATION_STEP_DEG),
                         samples, metadata, forbidden_radius=radius)
    return 0


def cmd_bench(args, settings, metadata) -> int:
    G = load_generator(args.ckpt)
    if args.scenarios:
        scenarios = [s for s in load_scenarios(args.scenarios) if s.id != 0]
    else:
        scenarios = bench.bench_scenario_sets(parse_int_list(args.obstacle_counts, '--obstacle-counts'),
                                              args.per_count, settings['seed'])
    if not scenarios:
        raise DataError("no scenarios to benchmark")

    frame = bench.run_benchmark(G, scenarios, settings['bench.queries'], settings['bench.repetitions'],
                                settings['bench.grid_size'], settings['seed'])
    os.makedirs(args.out, exist_ok=True)
    frame.to_csv(os.path.join(args.out, 'bench.csv'), index=False, float_format='%.6f')
    bench.trend_summary(frame).to_csv(os.path.join(args.out, 'bench_summary.csv'), index=False,
                                      float_format='%.6f')
    figures.plot_bench(os.path.join(args.out, 'bench_obstacles.svg'), frame, 'obstacle_count', metadata)
    figures.plot_bench(os.path.join(args.out, 'bench_area.svg'), frame, 'total_obstacle_area', metadata)

    if args.db:
        run_id = args.run_id or uuid.uuid4().hex[:12]
        DatabaseManager(args.db).insert_bench_records(frame, run_id, metadata['config_hash'])
        logger.info(f"Bench recorded as run {run_id}")

    generator_times = frame[frame['method'] == bench.GENERATOR]['seconds']
    print(f"generator time CV: {bench.coefficient_of_variation(generator_times):.3f}")
    return 0


def cmd_report(args, settings, metadata) -> int:
    return query_interface.run(args)


COMMANDS = {
    'gen-scenarios': cmd_gen_scenarios,
    'gen-dataset': cmd_gen_dataset,
    'train': cmd_train,
    'eval': cmd_eval,
    'plan': cmd_plan,
    'bench': cmd_bench,
    'map': cmd_map,
    'report': cmd_report,
}


def common_options(nested: bool = False) -> argparse.ArgumentParser:
    """Options every subcommand accepts.

    ``nested`` parsers leave unset options out of the namespace so they do not
    overwrite values already parsed by the enclosing subcommand.
    """
    def default(value):
        return argparse.SUPPRESS if nested else value

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', default=default(None), help='Flat key = value settings file')
    common.add_argument('--seed', type=int, default=default(None), help='Global seed (default from config)')
    common.add_argument('--set', action='append', default=default(None), metavar='KEY=VALUE',
                        help='Override one setting')
    common.add_argument('--log-level', default=default('INFO'), help='Logging level (default: INFO)')
    common.add_argument('--log-file', default=default(config.LOG_FILE), help='Log file (empty to disable)')
    return common


def build_parser() -> argparse.ArgumentParser:
    common = common_options()

    parser = CliParser(description='Collision-free path planning with a conditional GAN')
    subparsers = parser.add_subparsers(dest='command', parser_class=CliParser)

    p = subparsers.add_parser('gen-scenarios', parents=[common], help='Generate obstacle scenarios')
    p.add_argument('--count', type=int, help='Number of random scenarios (ids 1..N)')
    p.add_argument('--obstacles', type=int, help='Fixed obstacle count per scenario')
    p.add_argument('--out', required=True, help='Scenario JSON file')

    p = subparsers.add_parser('gen-dataset', parents=[common], help='Build labeled joint-grid datasets')
    p.add_argument('--scenarios', required=True, help='Scenario JSON file')
    p.add_argument('--out', required=True, help='Dataset directory')
    p.add_argument('--folds', type=int, help='Cross-validation folds')
    p.add_argument('--workers', type=int, help='Labeling workers')

    p = subparsers.add_parser('train', parents=[common], help='Train the conditional GAN on one fold')
    p.add_argument('--data', required=True, help='Dataset directory')
    p.add_argument('--fold', type=int, default=0, help='Fold index (default: 0)')
    p.add_argument('--out', required=True, help='Checkpoint file')
    p.add_argument('--epochs', type=int, help='Training epochs')
    p.add_argument('--batch-size', type=int, help='Batch size')
    p.add_argument('--log-csv', help='Training log CSV (default: <out>.log.csv)')
    p.add_argument('--obstacle-free-only', action='store_true', help='Train on the empty scenario only')

    p = subparsers.add_parser('eval', parents=[common], help='Grid-based IoU/Precision evaluation')
    p.add_argument('--ckpt', required=True, nargs='+', help='Checkpoint file(s), one per fold')
    p.add_argument('--data', required=True, help='Dataset directory')
    p.add_argument('--dtheta', type=float, help='Evaluation grid step in degrees')
    p.add_argument('--fold', type=int, help='Fold to evaluate (default: from the checkpoint)')
    p.add_argument('--out', required=True, help='Output directory')
    p.add_argument('--db', help='Record results in this results database')
    p.add_argument('--run-id', help='Run identifier for the results database')

    p = subparsers.add_parser('plan', parents=[common], help='Plan a collision-free path')
    p.add_argument('--ckpt', required=True, help='Checkpoint file')
    p.add_argument('--scenario', type=int, required=True, help='Scenario id (0 = obstacle-free)')
    p.add_argument('--scenarios', help='Scenario JSON file (default: <data_dir>/scenarios.json)')
    p.add_argument('--start', required=True, help='Start joints "theta1,theta2" in degrees')
    p.add_argument('--goal', required=True, help='Goal joints "theta1,theta2" in degrees')
    p.add_argument('--method', choices=['line', 'astar'], default='astar', help='Latent path method')
    p.add_argument('--graph-size', type=int, help='Latent lattice side for A* and snapping')
    p.add_argument('--out', required=True, help='Plan JSON file (an SVG is written next to it)')

    p = subparsers.add_parser('bench', parents=[common], help='Planning-time scaling benchmark')
    p.add_argument('--ckpt', required=True, help='Checkpoint file')
    p.add_argument('--scenarios', help='Scenario JSON file (default: generated fixed-count sets)')
    p.add_argument('--obstacle-counts', default='1,2,4,8', help='Obstacle counts for generated sets')
    p.add_argument('--per-count', type=int, default=1, help='Generated scenarios per obstacle count')
    p.add_argument('--repetitions', type=int, help='Timed repetitions after warm-up')
    p.add_argument('--queries', type=int, help='Start/goal queries per scenario')
    p.add_argument('--out', required=True, help='Output directory')
    p.add_argument('--db', help='Record results in this results database')
    p.add_argument('--run-id', help='Run identifier for the results database')

    p = subparsers.add_parser('map', parents=[common], help='Plot how the latent square maps into joint space')
    p.add_argument('--ckpt', required=True, help='Checkpoint file')
    p.add_argument('--scenario', type=int, default=0, help='Scenario id (0 = obstacle-free)')
    p.add_argument('--scenarios', help='Scenario JSON file (default: <data_dir>/scenarios.json)')
    p.add_argument('--grid', type=int, default=21, help='Latent grid lines per axis')
    p.add_argument('--out', required=True, help='SVG file')

    p = subparsers.add_parser('report', parents=[common], help='Results database reports')
    query_interface.build_parser(p, parents=[common_options(nested=True)])

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return UsageError.exit_code

    setup_logging(args.log_level, args.log_file or None)
    try:
        settings = build_settings(args)
        metadata = config.artifact_metadata(settings['seed'], settings)
        logger.info(f"{args.command}: seed={settings['seed']} config_hash={metadata['config_hash']}")
        return COMMANDS[args.command](args, settings, metadata)
    except PlannerError as e:
        logger.error(f"{args.command} failed: {e.message}")
        print(f"error: {e.code}: {e.message}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.exception(f"{args.command} failed")
        print(f"error: internal: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
