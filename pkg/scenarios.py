"""
Random obstacle scenarios and their 32x24 condition masks.

Mask rows run over y from -2 upward, columns over x from -1 rightward,
with square 0.125 cells.
"""

import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

import config
from errors import DataError, GenerationError, RangeError
from geometry import (Circle, Obstacle, Rectangle, check_obstacle, collides_batch,
                      joint_grid, obstacle_from_dict)

logger = logging.getLogger(__name__)

SCENARIO_FORMAT_VERSION = 1

# cell edges along each axis
_ROW_EDGES = config.WORKSPACE_Y[0] + config.MASK_CELL * np.arange(config.MASK_ROWS + 1)
_COL_EDGES = config.WORKSPACE_X[0] + config.MASK_CELL * np.arange(config.MASK_COLS + 1)


@dataclass
class GenerationParams:
    min_obstacles: int = config.MIN_OBSTACLES
    max_obstacles: int = config.MAX_OBSTACLES
    min_size: float = config.MIN_OBSTACLE_SIZE
    max_size: float = config.MAX_OBSTACLE_SIZE
    circle_probability: float = config.CIRCLE_PROBABILITY
    forbidden_radius: float = config.FORBIDDEN_RADIUS
    position_unit: float = config.POSITION_UNIT
    min_free_fraction: float = config.MIN_FREE_FRACTION
    max_attempts: int = config.MAX_REJECTION_ATTEMPTS

    @classmethod
    def from_settings(cls, settings: Dict):
        return cls(
            min_obstacles=settings['scenario.min_obstacles'],
            max_obstacles=settings['scenario.max_obstacles'],
            min_size=settings['scenario.min_size'],
            max_size=settings['scenario.max_size'],
            circle_probability=settings['scenario.circle_probability'],
            forbidden_radius=settings['scenario.forbidden_radius'],
            position_unit=settings['scenario.position_unit'],
            min_free_fraction=settings['scenario.min_free_fraction'],
        )


@dataclass
class ObstacleScenario:
    id: int
    obstacles: List[Obstacle]
    mask: np.ndarray = field(repr=False)

    @property
    def obstacle_count(self):
        return len(self.obstacles)

    @property
    def total_area(self):
        return float(sum(ob.area for ob in self.obstacles))


def rasterize(obs: Sequence[Obstacle]) -> np.ndarray:
    """Binary occupancy mask; a cell is set when an obstacle overlaps it with positive area."""
    mask = np.zeros((config.MASK_ROWS, config.MASK_COLS), dtype=np.uint8)
    y_lo, y_hi = _ROW_EDGES[:-1, None], _ROW_EDGES[1:, None]
    x_lo, x_hi = _COL_EDGES[None, :-1], _COL_EDGES[None, 1:]

    for ob in obs:
        if isinstance(ob, Rectangle):
            hit = (ob.x0 < x_hi) & (ob.x1 > x_lo) & (ob.y0 < y_hi) & (ob.y1 > y_lo)
        else:
            # distance from the disk center to the closest point of each cell
            dx = np.clip(ob.cx, x_lo, x_hi) - ob.cx
            dy = np.clip(ob.cy, y_lo, y_hi) - ob.cy
            hit = dx ** 2 + dy ** 2 < ob.r ** 2
        mask |= hit.astype(np.uint8)
    return mask


def intersects_forbidden_zone(ob: Obstacle, radius: float) -> bool:
    if isinstance(ob, Circle):
        return math.hypot(ob.cx, ob.cy) <= ob.r + radius
    nx = min(max(0.0, ob.x0), ob.x1)
    ny = min(max(0.0, ob.y0), ob.y1)
    return math.hypot(nx, ny) <= radius


def _snap(value: float, unit: float) -> float:
    return round(value / unit) * unit if unit > 0 else value


def _draw_obstacle(rng: np.random.Generator, params: GenerationParams) -> Obstacle:
    (xmin, xmax), (ymin, ymax) = config.WORKSPACE_X, config.WORKSPACE_Y
    unit = params.position_unit
    if rng.random() < params.circle_probability:
        r = rng.uniform(params.min_size, params.max_size) / 2.0
        cx = _snap(rng.uniform(xmin + r, xmax - r), unit)
        cy = _snap(rng.uniform(ymin + r, ymax - r), unit)
        return Circle(float(cx), float(cy), float(r))

    w = rng.uniform(params.min_size, params.max_size)
    h = rng.uniform(params.min_size, params.max_size)
    x0 = _snap(rng.uniform(xmin, xmax - w), unit)
    y0 = _snap(rng.uniform(ymin, ymax - h), unit)
    return Rectangle(float(x0), float(y0), float(x0 + w), float(y0 + h))


def free_fraction(obs: Sequence[Obstacle]) -> float:
    angles = joint_grid(config.GRID_STEP_DEG)
    return 1.0 - float(collides_batch(angles, obs).mean())


def sample_scenario(rng_seed: int, params: Optional[GenerationParams] = None,
                    scenario_id: int = 0) -> ObstacleScenario:
    """Draw one scenario; deterministic for a given (seed, params)."""
    params = params or GenerationParams()
    if params.min_obstacles < 0 or params.max_obstacles < params.min_obstacles:
        raise RangeError(f"bad obstacle count range {params.min_obstacles}..{params.max_obstacles}")

    rng = np.random.default_rng(rng_seed)
    attempts = 0
    while attempts < params.max_attempts:
        count = int(rng.integers(params.min_obstacles, params.max_obstacles + 1))
        obstacles = []
        while len(obstacles) < count and attempts < params.max_attempts:
            attempts += 1
            ob = _draw_obstacle(rng, params)
            try:
                check_obstacle(ob, params.min_size)
            except RangeError:
                continue
            if intersects_forbidden_zone(ob, params.forbidden_radius):
                continue
            obstacles.append(ob)

        if len(obstacles) < count:
            break
        if free_fraction(obstacles) >= params.min_free_fraction:
            return ObstacleScenario(id=scenario_id, obstacles=obstacles, mask=rasterize(obstacles))
        logger.warning(f"Scenario {scenario_id}: free space below quota, redrawing")

    raise GenerationError(f"scenario {scenario_id}: no valid placement after {params.max_attempts} attempts")


def empty_scenario() -> ObstacleScenario:
    return ObstacleScenario(id=0, obstacles=[], mask=rasterize([]))


def scenario_seed(seed: int, scenario_id: int) -> int:
    return int(np.random.SeedSequence([seed, scenario_id]).generate_state(1)[0])


def generate_scenario_set(count: int, seed: int,
                          params: Optional[GenerationParams] = None) -> List[ObstacleScenario]:
    """The empty scenario (id 0) followed by ``count`` random scenarios (ids 1..count)."""
    scenarios = [empty_scenario()]
    for scenario_id in range(1, count + 1):
        scenarios.append(sample_scenario(scenario_seed(seed, scenario_id), params, scenario_id))
    logger.info(f"Generated {count} scenarios (seed={seed})")
    return scenarios


# ---------------------------------------------------------------------------
# Scenario files
# ---------------------------------------------------------------------------

def mask_to_rows(mask: np.ndarray) -> List[str]:
    return [''.join('1' if v else '0' for v in row) for row in mask]


def mask_from_rows(rows: Sequence[str]) -> np.ndarray:
    if len(rows) != config.MASK_ROWS or any(len(r) != config.MASK_COLS for r in rows):
        raise DataError(f"mask must be {config.MASK_ROWS} rows of {config.MASK_COLS} characters")
    return np.array([[c == '1' for c in row] for row in rows], dtype=np.uint8)


def scenarios_to_document(scenarios: Sequence[ObstacleScenario], seed: int, metadata: Dict) -> Dict:
    return {
        'version': SCENARIO_FORMAT_VERSION,
        'seed': seed,
        **{k: v for k, v in metadata.items() if k != 'seed'},
        'scenarios': [
            {
                'id': s.id,
                'obstacles': [ob.to_dict() for ob in s.obstacles],
                'mask': mask_to_rows(s.mask),
            }
            for s in scenarios
        ],
    }


def save_scenarios(path: str, scenarios: Sequence[ObstacleScenario], seed: int, metadata: Dict):
    document = scenarios_to_document(scenarios, seed, metadata)
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w') as f:
        json.dump(document, f, indent=1, sort_keys=True)
        f.write('\n')
    logger.info(f"Wrote {len(scenarios)} scenarios to {path}")


def load_scenarios(path: str) -> List[ObstacleScenario]:
    """Load and verify a scenario file; the stored mask must match the obstacles."""
    try:
        with open(path, 'r') as f:
            document = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"cannot read scenario file {path}: {e}")

    if document.get('version') != SCENARIO_FORMAT_VERSION:
        raise DataError(f"unsupported scenario file version: {document.get('version')}")

    scenarios = []
    for entry in document.get('scenarios', []):
        try:
            obstacles = [obstacle_from_dict(o) for o in entry['obstacles']]
            mask = mask_from_rows(entry['mask'])
        except (KeyError, TypeError, RangeError) as e:
            raise DataError(f"malformed scenario entry in {path}: {e}")
        if not np.array_equal(mask, rasterize(obstacles)):
            raise DataError(f"scenario {entry['id']}: stored mask does not match its obstacles")
        scenarios.append(ObstacleScenario(id=int(entry['id']), obstacles=obstacles, mask=mask))
    logger.info(f"Loaded {len(scenarios)} scenarios from {path}")
    return scenarios
