"""
Planning-time scaling: collision-checked joint-space A* versus Generator-based latent A*.

Each method answers the same start/goal queries per scenario. Timed regions
are run once to warm up and then repeated; the median is reported and every
series is divided by its own time on the simplest scenario (fewest obstacles,
then smallest total area).
"""

import logging
import statistics
import time
from dataclasses import asdict, dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

import config
from dataset import build_collision_map
from errors import PlanningFailure
from geometry import joint_axes
from planner import (LatentPath, astar, build_graph, joint_space_graph, locate_latent, map_to_joint_trajectory,
                     validate_trajectory)
from scenarios import GenerationParams, ObstacleScenario, sample_scenario, scenario_seed

logger = logging.getLogger(__name__)

BASELINE = 'baseline-collision-check'
GENERATOR = 'generator-inference'
BENCH_COLUMNS = ['scenario_id', 'obstacle_count', 'total_obstacle_area', 'method', 'seconds', 'ratio',
                 'valid_fraction', 'queries']

Query = Tuple[Tuple[float, float], Tuple[float, float]]


@dataclass
class BenchRecord:
    scenario_id: int
    obstacle_count: int
    total_obstacle_area: float
    method: str
    seconds: float
    ratio: float = 1.0
    valid_fraction: float = 0.0
    queries: int = 0


def median_time(fn: Callable[[], object], repetitions: int = config.BENCH_REPETITIONS) -> Tuple[float, object]:
    """Warm-up call, then the median wall time of ``repetitions`` calls; returns (seconds, last result)."""
    result = fn()
    times = []
    for _ in range(max(1, repetitions)):
        start = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - start)
    return statistics.median(times), result


def make_bench_queries(scenario: ObstacleScenario, count: int, seed: int) -> List[Query]:
    """Start/goal pairs drawn from the scenario's collision-free 5-degree grid points."""
    collision_map = build_collision_map(scenario.obstacles, config.GRID_STEP_DEG)
    t1, t2 = joint_axes(config.GRID_STEP_DEG)
    free = np.argwhere(~collision_map)
    rng = np.random.default_rng(scenario_seed(seed, scenario.id))
    queries = []
    for _ in range(count):
        a, b = free[rng.choice(len(free), size=2, replace=False)]
        queries.append(((float(t1[a[0]]), float(t2[a[1]])), (float(t1[b[0]]), float(t2[b[1]]))))
    return queries


def _nearest_free_node(graph, q) -> int:
    d = np.hypot(*(graph.coords - np.asarray(q)).T)
    d[graph.blocked] = np.inf
    return int(np.argmin(d))


def _solve_all(graph, queries: Sequence[Query], locate) -> List[Optional[List[int]]]:
    paths = []
    for start, goal in queries:
        try:
            paths.append(astar(graph, locate(graph, start), locate(graph, goal)).nodes)
        except PlanningFailure:
            paths.append(None)
    return paths


def run_baseline(scenario: ObstacleScenario, queries: Sequence[Query], grid_size: int = config.BENCH_GRID_SIZE,
                 repetitions: int = config.BENCH_REPETITIONS) -> BenchRecord:
    """Times labeling a joint-space lattice with live collision checks plus A* for every query."""
    def run():
        graph = joint_space_graph(scenario.obstacles, grid_size)
        return graph, _solve_all(graph, queries, _nearest_free_node)

    seconds, (graph, paths) = median_time(run, repetitions)
    valid = [p is not None and validate_trajectory(graph.coords[p], scenario.obstacles).valid for p in paths]
    return BenchRecord(scenario.id, scenario.obstacle_count, scenario.total_area, BASELINE, seconds,
                       valid_fraction=float(np.mean(valid)) if valid else 0.0, queries=len(queries))


def run_generator(G, scenario: ObstacleScenario, queries: Sequence[Query], grid_size: int = config.GRAPH_SIZE,
                  repetitions: int = config.BENCH_REPETITIONS) -> BenchRecord:
    """Times the n*n-node batched inference plus latent A* for every query; no collision checks inside."""
    def run():
        graph = build_graph(G, scenario.mask, grid_size)
        return graph, _solve_all(graph, queries, locate_latent)

    seconds, (graph, paths) = median_time(run, repetitions)
    valid = []
    for p in paths:
        if p is None:
            valid.append(False)
            continue
        trajectory = map_to_joint_trajectory(G, scenario.mask, LatentPath(graph.positions(p)))
        valid.append(validate_trajectory(trajectory, scenario.obstacles).valid)
    return BenchRecord(scenario.id, scenario.obstacle_count, scenario.total_area, GENERATOR, seconds,
                       valid_fraction=float(np.mean(valid)) if valid else 0.0, queries=len(queries))


def normalize_ratios(frame: pd.DataFrame) -> pd.DataFrame:
    """Divide each method's times by its simplest-condition time."""
    frame = frame.copy()
    for method, group in frame.groupby('method'):
        simplest = group.sort_values(['obstacle_count', 'total_obstacle_area', 'scenario_id']).iloc[0]
        frame.loc[group.index, 'ratio'] = group['seconds'] / simplest['seconds']
    return frame


def coefficient_of_variation(values: Sequence[float]) -> float:
    values = np.asarray(values, dtype=np.float64)
    mean = values.mean()
    return float(values.std() / mean) if mean > 0 else 0.0


def bench_scenario_sets(obstacle_counts: Sequence[int] = (1, 2, 4, 8), per_count: int = 1,
                        seed: int = config.GLOBAL_SEED) -> List[ObstacleScenario]:
    """Scenarios with a fixed number of obstacles each, ids numbered from 1."""
    scenarios = []
    for count in obstacle_counts:
        params = GenerationParams(min_obstacles=count, max_obstacles=count)
        for _ in range(per_count):
            scenario_id = len(scenarios) + 1
            scenarios.append(sample_scenario(scenario_seed(seed, 10_000 + scenario_id), params, scenario_id))
    logger.info(f"Bench scenarios: {len(scenarios)} with obstacle counts {list(obstacle_counts)}")
    return scenarios


def run_benchmark(G, scenarios: Sequence[ObstacleScenario], queries_per_scenario: int = config.BENCH_QUERIES,
                  repetitions: int = config.BENCH_REPETITIONS, grid_size: int = config.BENCH_GRID_SIZE,
                  seed: int = config.GLOBAL_SEED) -> pd.DataFrame:
    records = []
    for scn in scenarios:
        queries = make_bench_queries(scn, queries_per_scenario, seed)
        base = run_baseline(scn, queries, grid_size, repetitions)
        gen = run_generator(G, scn, queries, grid_size, repetitions)
        logger.info(f"Scenario {scn.id} ({scn.obstacle_count} obstacles): baseline {base.seconds:.3f}s, "
                    f"generator {gen.seconds:.3f}s")
        records.extend([base, gen])
    frame = pd.DataFrame([asdict(r) for r in records], columns=BENCH_COLUMNS)
    return normalize_ratios(frame)


def trend_summary(frame: pd.DataFrame) -> pd.DataFrame:
    """Median time and ratio per (method, obstacle_count)."""
    return (frame.groupby(['method', 'obstacle_count'])
            .agg(seconds=('seconds', 'median'), ratio=('ratio', 'median'),
                 total_obstacle_area=('total_obstacle_area', 'mean'),
                 valid_fraction=('valid_fraction', 'mean'))
            .reset_index())
