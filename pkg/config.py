# Configuration for the cGAN collision-free path planner

import hashlib
import json
import logging
import os

from errors import ConfigError

logger = logging.getLogger(__name__)

TOOL_VERSION = "1.0.0"

# Input/Output settings
DATA_DIRECTORY = "data"  # Labeled dataset files
CHECKPOINT_DIRECTORY = "checkpoints"
OUTPUT_DIRECTORY = "output"  # Metrics, plans, figures
LOG_FILE = "cgan_planner.log"
RESULTS_DB = "results.db"

GLOBAL_SEED = 0

# Arm and workspace geometry
LINK_LENGTH = 1.0
THETA1_RANGE = (-90.0, 90.0)  # degrees
THETA2_RANGE = (5.0, 150.0)  # degrees
WORKSPACE_X = (-1.0, 2.0)
WORKSPACE_Y = (-2.0, 2.0)

# Condition mask: 32 rows over y, 24 columns over x
MASK_ROWS = 32
MASK_COLS = 24
MASK_CELL = 0.125

# Scenario generation
MIN_OBSTACLES = 1
MAX_OBSTACLES = 4
MIN_OBSTACLE_SIZE = 0.15
MAX_OBSTACLE_SIZE = 0.6
CIRCLE_PROBABILITY = 0.5
FORBIDDEN_RADIUS = 0.5  # disk around the arm base kept free of obstacles
POSITION_UNIT = 0.0  # 0 disables snapping of obstacle coordinates
MIN_FREE_FRACTION = 0.05
MAX_REJECTION_ATTEMPTS = 10000

# Dataset
GRID_STEP_DEG = 5.0
SCENARIO_COUNT = 100  # desk scale; the full experiment uses 1000
FOLD_COUNT = 5
DATASET_WORKERS = 4

# Network widths
COND_CHANNELS = (8, 16)
COND_FEATURES = 64
HIDDEN_UNITS = 128
LEAKY_SLOPE = 0.2
BN_MOMENTUM = 0.9

# Training
EPOCHS = 200
BATCH_SIZE = 64
MAX_STEPS_PER_EPOCH = 50
LAMBDA_IDENTITY = 10.0
LAMBDA_FEATURE_MATCH = 1.0
LEARNING_RATE = 2e-4
ADAM_BETA1 = 0.5
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
CHECKPOINT_EVERY = 50  # epochs; 0 disables periodic checkpoints

# Evaluation
EVAL_DTHETA = 1.0
HISTOGRAM_BINS = 10

# Planner
GRAPH_SIZE = 128
DENSIFY_STEPS = 10
LINE_STEPS = 50
VALIDATION_STEP_DEG = 1.0

# Bench
BENCH_REPETITIONS = 5
BENCH_QUERIES = 3
BENCH_GRID_SIZE = 128


def default_settings():
    """Flat dotted-key view of the defaults that a config file may override."""
    return {
        'seed': GLOBAL_SEED,
        'paths.data_dir': DATA_DIRECTORY,
        'paths.checkpoint_dir': CHECKPOINT_DIRECTORY,
        'paths.output_dir': OUTPUT_DIRECTORY,
        'scenario.min_obstacles': MIN_OBSTACLES,
        'scenario.max_obstacles': MAX_OBSTACLES,
        'scenario.min_size': MIN_OBSTACLE_SIZE,
        'scenario.max_size': MAX_OBSTACLE_SIZE,
        'scenario.circle_probability': CIRCLE_PROBABILITY,
        'scenario.forbidden_radius': FORBIDDEN_RADIUS,
        'scenario.position_unit': POSITION_UNIT,
        'scenario.min_free_fraction': MIN_FREE_FRACTION,
        'dataset.scenario_count': SCENARIO_COUNT,
        'dataset.folds': FOLD_COUNT,
        'dataset.workers': DATASET_WORKERS,
        'train.epochs': EPOCHS,
        'train.batch_size': BATCH_SIZE,
        'train.max_steps_per_epoch': MAX_STEPS_PER_EPOCH,
        'train.lambda_identity': LAMBDA_IDENTITY,
        'train.lambda_feature_match': LAMBDA_FEATURE_MATCH,
        'train.learning_rate': LEARNING_RATE,
        'train.beta1': ADAM_BETA1,
        'train.beta2': ADAM_BETA2,
        'train.checkpoint_every': CHECKPOINT_EVERY,
        'eval.dtheta': EVAL_DTHETA,
        'eval.histogram_bins': HISTOGRAM_BINS,
        'planner.graph_size': GRAPH_SIZE,
        'planner.densify': DENSIFY_STEPS,
        'planner.line_steps': LINE_STEPS,
        'bench.repetitions': BENCH_REPETITIONS,
        'bench.queries': BENCH_QUERIES,
        'bench.grid_size': BENCH_GRID_SIZE,
    }


def read_config_file(path):
    """Read a flat ``key = value`` config file.

    Blank lines and ``#`` comments are ignored. Values stay strings here;
    coercion happens against the defaults in ``apply_overrides``.
    """
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")

    values = {}
    with open(path, 'r') as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split('#', 1)[0].strip()
            if not line:
                continue
            if '=' not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split('=', 1)
            values[key.strip()] = value.strip()
    logger.info(f"Loaded {len(values)} settings from {path}")
    return values


def _coerce(key, value, default):
    if not isinstance(value, str):
        return value
    try:
        if isinstance(default, bool):
            return value.lower() in ('1', 'true', 'yes', 'on')
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
    except ValueError:
        raise ConfigError(f"invalid value for {key}: {value!r}")
    return value


def apply_overrides(defaults, file_values=None, flag_values=None):
    """Merge settings with precedence flags > file > defaults."""
    settings = dict(defaults)
    for source in (file_values or {}, flag_values or {}):
        for key, value in source.items():
            if value is None:
                continue
            if key not in defaults:
                raise ConfigError(f"unknown setting: {key}")
            settings[key] = _coerce(key, value, defaults[key])
    return settings


def config_hash(settings):
    """Short, stable hash of an effective configuration."""
    canonical = json.dumps(settings, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()[:16]


def artifact_metadata(seed, settings):
    """Reproducibility stamp embedded in every artifact."""
    return {
        'tool_version': TOOL_VERSION,
        'seed': int(seed),
        'config_hash': config_hash(settings),
    }
