"""
Labeled joint-grid datasets.

Each scenario yields 37x30 = 1110 joint configurations on a 5 degree grid,
labeled collision / non-collision against the scenario's obstacles and
min-max normalized onto [0, 1]^2. Datasets are stored one binary file per
scenario plus a JSON manifest and a copy of the scenario file.
"""

import json
import logging
import os
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

import config
from errors import ConfigError, DataError, RangeError
from geometry import JointAngles, collides_batch, joint_grid
from scenarios import ObstacleScenario, load_scenarios

logger = logging.getLogger(__name__)

DATASET_MAGIC = b"CFPDSET1"
GRID_POINTS = 37 * 30
NON_COLLISION = 0
COLLISION = 1

_RECORD = np.dtype([('t1', '<f4'), ('t2', '<f4'), ('label', 'u1')])
_LOW = np.array([config.THETA1_RANGE[0], config.THETA2_RANGE[0]])
_SPAN = np.array([config.THETA1_RANGE[1] - config.THETA1_RANGE[0],
                  config.THETA2_RANGE[1] - config.THETA2_RANGE[0]])


@dataclass
class LabeledGrid:
    scenario_id: int
    normalized: np.ndarray  # (1110, 2) float32
    labels: np.ndarray = field(repr=False)  # (1110,) uint8, 1 = collision

    @property
    def angles(self) -> np.ndarray:
        return denormalize_array(self.normalized.astype(np.float64))

    @property
    def free_points(self) -> np.ndarray:
        return self.normalized[self.labels == NON_COLLISION]

    @property
    def collision_points(self) -> np.ndarray:
        return self.normalized[self.labels == COLLISION]

    def counts(self) -> Tuple[int, int]:
        collision = int(self.labels.sum())
        return collision, len(self.labels) - collision


@dataclass
class FoldSplit:
    fold_index: int
    train_ids: List[int]
    test_ids: List[int]


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------

def normalize(q: JointAngles) -> Tuple[float, float]:
    q.check()
    u = (np.array(q.as_tuple()) - _LOW) / _SPAN
    return float(u[0]), float(u[1])


def denormalize(u: Sequence[float]) -> JointAngles:
    if not all(0.0 <= v <= 1.0 for v in u):
        raise RangeError(f"normalized point {tuple(u)} outside [0,1]^2")
    q = _LOW + np.asarray(u, dtype=np.float64) * _SPAN
    return JointAngles(float(q[0]), float(q[1]))


def normalize_array(q_deg: np.ndarray) -> np.ndarray:
    return (np.asarray(q_deg, dtype=np.float64) - _LOW) / _SPAN


def denormalize_array(u: np.ndarray) -> np.ndarray:
    return _LOW + np.asarray(u, dtype=np.float64) * _SPAN


# ---------------------------------------------------------------------------
# Labeling
# ---------------------------------------------------------------------------

def build_collision_map(obstacles, step_deg: float) -> np.ndarray:
    """Collision flags on the joint grid at ``step_deg``, shaped (n_theta1, n_theta2)."""
    angles = joint_grid(step_deg)
    n1 = len(np.unique(angles[:, 0]))
    return collides_batch(angles, obstacles).reshape(n1, -1)


def build_labeled_grid(scn: ObstacleScenario) -> LabeledGrid:
    angles = joint_grid(config.GRID_STEP_DEG)
    labels = collides_batch(angles, scn.obstacles).astype(np.uint8)
    return LabeledGrid(
        scenario_id=scn.id,
        normalized=normalize_array(angles).astype(np.float32),
        labels=labels,
    )


def build_labeled_grids(scenarios: Sequence[ObstacleScenario],
                        workers: int = config.DATASET_WORKERS) -> List[LabeledGrid]:
    """Label every scenario; scenarios are independent so they fan out across workers."""
    if workers <= 1:
        return [build_labeled_grid(s) for s in scenarios]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(build_labeled_grid, scenarios))


# ---------------------------------------------------------------------------
# Folds
# ---------------------------------------------------------------------------

def make_folds(ids: Sequence[int], seed: int, n_folds: int = config.FOLD_COUNT,
               expected_count: Optional[int] = None) -> List[FoldSplit]:
    """Deterministic shuffled partition of ``ids`` into ``n_folds`` equal test folds."""
    ids = list(ids)
    if expected_count is not None and len(ids) != expected_count:
        raise ConfigError(f"expected {expected_count} scenario ids, got {len(ids)}")
    if n_folds < 2 or len(ids) % n_folds != 0 or len(set(ids)) != len(ids):
        raise ConfigError(f"{len(ids)} ids cannot be split into {n_folds} equal folds")

    order = np.random.default_rng(seed).permutation(len(ids))
    shuffled = [ids[i] for i in order]
    size = len(ids) // n_folds
    folds = []
    for k in range(n_folds):
        test = sorted(shuffled[k * size:(k + 1) * size])
        test_set = set(test)
        train = sorted(i for i in ids if i not in test_set)
        folds.append(FoldSplit(fold_index=k, train_ids=train, test_ids=test))
    return folds


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def grid_filename(scenario_id: int) -> str:
    return f"scenario_{scenario_id:05d}.cfpd"


def save_labeled_grid(path: str, grid: LabeledGrid):
    records = np.empty(len(grid.labels), dtype=_RECORD)
    records['t1'] = grid.normalized[:, 0]
    records['t2'] = grid.normalized[:, 1]
    records['label'] = grid.labels
    with open(path, 'wb') as f:
        f.write(DATASET_MAGIC)
        f.write(np.array([grid.scenario_id], dtype='<u4').tobytes())
        f.write(records.tobytes())


def load_labeled_grid(path: str) -> LabeledGrid:
    try:
        with open(path, 'rb') as f:
            blob = f.read()
    except OSError as e:
        raise DataError(f"cannot read dataset file {path}: {e}")

    header = len(DATASET_MAGIC) + 4
    if blob[:len(DATASET_MAGIC)] != DATASET_MAGIC:
        raise DataError(f"{path}: bad magic")
    if len(blob) != header + GRID_POINTS * _RECORD.itemsize:
        raise DataError(f"{path}: expected {GRID_POINTS} records")

    scenario_id = int(np.frombuffer(blob, dtype='<u4', count=1, offset=len(DATASET_MAGIC))[0])
    records = np.frombuffer(blob, dtype=_RECORD, offset=header)
    normalized = np.stack([records['t1'], records['t2']], axis=1).astype(np.float32)
    return LabeledGrid(scenario_id=scenario_id, normalized=normalized, labels=records['label'].copy())


@dataclass
class LabeledDataset:
    """Scenarios, their labeled grids and the cross-validation folds of one dataset directory."""
    scenarios: Dict[int, ObstacleScenario]
    grids: Dict[int, LabeledGrid]
    folds: List[FoldSplit]
    manifest: Dict = field(default_factory=dict)

    def fold(self, index: int) -> FoldSplit:
        for f in self.folds:
            if f.fold_index == index:
                return f
        raise ConfigError(f"fold {index} not in dataset (have {len(self.folds)})")

    def obstacle_ids(self) -> List[int]:
        return sorted(i for i in self.scenarios if i != 0)


def write_dataset(out_dir: str, scenarios: Sequence[ObstacleScenario], scenario_file: str,
                  seed: int, metadata: Dict, n_folds: int = config.FOLD_COUNT,
                  workers: int = config.DATASET_WORKERS) -> LabeledDataset:
    """Label all scenarios and write the dataset directory."""
    os.makedirs(out_dir, exist_ok=True)
    grids = build_labeled_grids(scenarios, workers)
    for grid in grids:
        save_labeled_grid(os.path.join(out_dir, grid_filename(grid.scenario_id)), grid)

    obstacle_ids = sorted(s.id for s in scenarios if s.id != 0)
    folds = make_folds(obstacle_ids, seed, n_folds)
    # the obstacle-free condition trains in every fold
    if any(s.id == 0 for s in scenarios):
        for f in folds:
            f.train_ids = [0] + f.train_ids

    shutil.copyfile(scenario_file, os.path.join(out_dir, 'scenarios.json'))
    manifest = {
        **metadata,
        'seed': seed,
        'scenario_source': os.path.basename(scenario_file),
        'files': [grid_filename(g.scenario_id) for g in grids],
        'folds': [{'fold': f.fold_index, 'train': f.train_ids, 'test': f.test_ids} for f in folds],
    }
    with open(os.path.join(out_dir, 'manifest.json'), 'w') as f:
        json.dump(manifest, f, indent=1, sort_keys=True)

    collision_total = sum(g.counts()[0] for g in grids)
    logger.info(f"Wrote {len(grids)} labeled grids to {out_dir} "
                f"({collision_total} collision / {len(grids) * GRID_POINTS - collision_total} free points)")
    return LabeledDataset(scenarios={s.id: s for s in scenarios},
                          grids={g.scenario_id: g for g in grids},
                          folds=folds, manifest=manifest)


def load_dataset(data_dir: str) -> LabeledDataset:
    manifest_path = os.path.join(data_dir, 'manifest.json')
    if not os.path.exists(manifest_path):
        raise DataError(f"no manifest.json in {data_dir}")
    with open(manifest_path, 'r') as f:
        manifest = json.load(f)

    scenarios = {s.id: s for s in load_scenarios(os.path.join(data_dir, 'scenarios.json'))}
    grids = {}
    for name in manifest['files']:
        grid = load_labeled_grid(os.path.join(data_dir, name))
        if grid.scenario_id not in scenarios:
            raise DataError(f"{name}: scenario {grid.scenario_id} missing from scenarios.json")
        grids[grid.scenario_id] = grid
    folds = [FoldSplit(fold_index=f['fold'], train_ids=f['train'], test_ids=f['test'])
             for f in manifest['folds']]
    logger.info(f"Loaded dataset {data_dir}: {len(grids)} grids, {len(folds)} folds")
    return LabeledDataset(scenarios=scenarios, grids=grids, folds=folds, manifest=manifest)
