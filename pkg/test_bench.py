"""
Tests for the planning-time benchmark helpers.
"""

import numpy as np
import pandas as pd
import pytest

from bench import (BASELINE, BENCH_COLUMNS, GENERATOR, bench_scenario_sets, coefficient_of_variation,
                   make_bench_queries, median_time, normalize_ratios, run_baseline, run_benchmark, run_generator,
                   trend_summary)
from cgan import Generator
from dataset import build_collision_map
from geometry import JointAngles, collides
from scenarios import empty_scenario


def test_median_time_warms_up_first():
    calls = []
    seconds, result = median_time(lambda: calls.append(1) or len(calls), repetitions=3)
    assert len(calls) == 4
    assert result == 4
    assert seconds >= 0.0


def test_normalize_ratios_per_method():
    frame = pd.DataFrame([
        (1, 1, 0.5, BASELINE, 2.0),
        (2, 4, 1.0, BASELINE, 8.0),
        (1, 1, 0.5, GENERATOR, 0.5),
        (2, 4, 1.0, GENERATOR, 0.5),
    ], columns=['scenario_id', 'obstacle_count', 'total_obstacle_area', 'method', 'seconds'])
    frame['ratio'] = 1.0
    ratios = normalize_ratios(frame)
    assert ratios['ratio'].tolist() == pytest.approx([1.0, 4.0, 1.0, 1.0])
    assert frame['ratio'].tolist() == [1.0] * 4


def test_simplest_condition_breaks_ties_on_area():
    frame = pd.DataFrame({
        'scenario_id': [1, 2], 'obstacle_count': [2, 2], 'total_obstacle_area': [0.9, 0.3],
        'method': [BASELINE, BASELINE], 'seconds': [3.0, 1.5], 'ratio': [1.0, 1.0],
    })
    assert normalize_ratios(frame)['ratio'].tolist() == pytest.approx([2.0, 1.0])


def test_coefficient_of_variation():
    assert coefficient_of_variation([1.0, 1.0, 1.0]) == 0.0
    assert coefficient_of_variation([1.0, 3.0]) == pytest.approx(0.5)
    assert coefficient_of_variation([0.0, 0.0]) == 0.0


def test_bench_scenario_sets_have_fixed_counts():
    scenarios = bench_scenario_sets((1, 3), per_count=2, seed=5)
    assert [s.id for s in scenarios] == [1, 2, 3, 4]
    assert [s.obstacle_count for s in scenarios] == [1, 1, 3, 3]
    again = bench_scenario_sets((1, 3), per_count=2, seed=5)
    assert all(a.obstacles == b.obstacles for a, b in zip(scenarios, again))


def test_bench_queries_start_and_end_free(small_scenarios):
    scenario = small_scenarios[2]
    queries = make_bench_queries(scenario, 4, seed=0)
    assert len(queries) == 4
    assert queries == make_bench_queries(scenario, 4, seed=0)
    for start, goal in queries:
        assert start != goal
        assert not collides(JointAngles(*start), scenario.obstacles)
        assert not collides(JointAngles(*goal), scenario.obstacles)


def test_baseline_on_empty_scenario_is_always_valid():
    scenario = empty_scenario()
    queries = make_bench_queries(scenario, 2, seed=1)
    record = run_baseline(scenario, queries, grid_size=10, repetitions=1)
    assert record.method == BASELINE
    assert record.valid_fraction == 1.0
    assert record.queries == 2
    assert build_collision_map(scenario.obstacles, 5.0).sum() == 0


def test_generator_run_on_empty_scenario(identity_generator):
    scenario = empty_scenario()
    queries = make_bench_queries(scenario, 2, seed=1)
    record = run_generator(identity_generator, scenario, queries, grid_size=12, repetitions=1)
    assert record.method == GENERATOR
    assert record.obstacle_count == 0
    assert record.valid_fraction == 1.0
    assert record.seconds >= 0.0


def test_generator_run_with_real_network(small_arch, blocking_scenario):
    G = Generator(small_arch, np.random.default_rng(0))
    queries = make_bench_queries(blocking_scenario, 2, seed=3)
    record = run_generator(G, blocking_scenario, queries, grid_size=8, repetitions=1)
    assert record.method == GENERATOR
    assert record.obstacle_count == 1
    assert record.queries == 2
    assert 0.0 <= record.valid_fraction <= 1.0


def test_small_benchmark_run(identity_generator, blocking_scenario):
    scenarios = [empty_scenario(), blocking_scenario]
    frame = run_benchmark(identity_generator, scenarios, queries_per_scenario=1, repetitions=1, grid_size=12,
                          seed=0)
    assert list(frame.columns) == BENCH_COLUMNS
    assert len(frame) == 4
    assert set(frame['method']) == {BASELINE, GENERATOR}
    simplest = frame[frame['scenario_id'] == 0]
    assert simplest['ratio'].tolist() == pytest.approx([1.0, 1.0])
    assert frame[(frame['scenario_id'] == 0) & (frame['method'] == GENERATOR)]['valid_fraction'].iloc[0] == 1.0

    trend = trend_summary(frame)
    assert set(trend['obstacle_count']) == {0, 1}
    assert len(trend) == 4
