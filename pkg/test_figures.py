"""
Tests for the SVG figures.
"""

import pandas as pd

from bench import BASELINE, GENERATOR
from dataset import build_collision_map
from evaluation import iou_histogram, mapping_samples
from figures import plot_bench, plot_iou_histogram, plot_mapping, plot_plan
from planner import plan


def test_plan_figure_is_byte_stable(identity_generator, blocking_scenario, tmp_path, metadata):
    result = plan(identity_generator, blocking_scenario, (-60.0, 30.0), (60.0, 120.0), method='line',
                  graph_size=9, line_steps=10, densify=2)
    collision_map = build_collision_map(blocking_scenario.obstacles, 5.0)
    first, second = tmp_path / "a.svg", tmp_path / "b.svg"
    plot_plan(str(first), blocking_scenario, result, collision_map, metadata)
    plot_plan(str(second), blocking_scenario, result, collision_map, metadata)

    content = first.read_bytes()
    assert content.startswith(b'<?xml')
    assert content == second.read_bytes()
    assert metadata['config_hash'].encode() in content


def test_mapping_histogram_and_bench_figures(identity_generator, blocking_scenario, tmp_path):
    samples = mapping_samples(identity_generator, blocking_scenario.mask, n=5)
    plot_mapping(str(tmp_path / "maps" / "mapping.svg"), blocking_scenario,
                 build_collision_map(blocking_scenario.obstacles, 5.0), samples)
    assert (tmp_path / "maps" / "mapping.svg").stat().st_size > 0

    plot_iou_histogram(str(tmp_path / "hist.svg"), iou_histogram([0.2, 0.8, 0.85]), title='test IoU')
    assert b'test IoU' in (tmp_path / "hist.svg").read_bytes()

    frame = pd.DataFrame({
        'scenario_id': [1, 2, 1, 2], 'obstacle_count': [1, 4, 1, 4], 'total_obstacle_area': [0.1, 0.5, 0.1, 0.5],
        'method': [BASELINE, BASELINE, GENERATOR, GENERATOR], 'seconds': [1.0, 3.0, 0.2, 0.2],
        'ratio': [1.0, 3.0, 1.0, 1.0],
    })
    plot_bench(str(tmp_path / "bench.svg"), frame, 'total_obstacle_area')
    assert BASELINE.encode() in (tmp_path / "bench.svg").read_bytes()


def test_workspace_panel_draws_the_configured_forbidden_zone(identity_generator, blocking_scenario, tmp_path):
    samples = mapping_samples(identity_generator, blocking_scenario.mask, n=3)
    collision_map = build_collision_map(blocking_scenario.obstacles, 5.0)
    default, wide = tmp_path / "default.svg", tmp_path / "wide.svg"
    plot_mapping(str(default), blocking_scenario, collision_map, samples)
    plot_mapping(str(wide), blocking_scenario, collision_map, samples, forbidden_radius=0.6)
    assert default.read_bytes() != wide.read_bytes()
