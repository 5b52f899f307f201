"""
Tests for latent paths, lattice graphs, A*, trajectory validation and the plan facade.
"""

import json
import math

import numpy as np
import pytest
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from dataset import denormalize_array
from errors import PlanningFailure, RangeError, UsageError
from geometry import JointAngles, collides
from planner import (GridGraph, LatentPath, astar, build_graph, densify_path, joint_path_length, joint_space_graph,
                     latent_astar, locate_latent, map_to_joint_trajectory, plan, polyline_path, save_plan,
                     straight_line_path, validate_trajectory)
from scenarios import empty_scenario


def _identity_graph(n):
    lattice = np.linspace(0.0, 1.0, n)
    g1, g2 = np.meshgrid(lattice, lattice, indexing='ij')
    return GridGraph(n=n, coords=denormalize_array(np.stack([g1.ravel(), g2.ravel()], axis=1)))


def _dijkstra_cost(graph, start, goal):
    rows, cols, weights = zip(*graph.edges())
    matrix = csr_matrix((weights, (rows, cols)), shape=(graph.node_count, graph.node_count))
    return dijkstra(matrix, directed=False, indices=start)[goal]


def test_straight_line_path():
    path = straight_line_path([0.1, 0.2], [0.9, 0.6], steps=5)
    assert len(path) == 5
    assert path.waypoints[0].tolist() == [0.1, 0.2]
    assert path.waypoints[-1].tolist() == [0.9, 0.6]
    assert np.allclose(np.diff(path.waypoints, axis=0), [0.2, 0.1])
    with pytest.raises(RangeError):
        straight_line_path([0.1, 0.2], [1.1, 0.6])
    with pytest.raises(UsageError):
        straight_line_path([0.1, 0.2], [0.3, 0.6], steps=1)


def test_polyline_passes_through_points():
    points = [[0.0, 0.0], [0.5, 1.0], [1.0, 0.0]]
    path = polyline_path(points, steps_per_segment=4)
    assert len(path) == 7
    assert path.waypoints[3].tolist() == [0.5, 1.0]
    assert path.waypoints[-1].tolist() == [1.0, 0.0]


def test_two_by_two_lattice_has_six_edges():
    graph = _identity_graph(2)
    assert len(graph.edges()) == 6
    assert graph.node_count == 4
    assert graph.position(3).tolist() == [1.0, 1.0]


def test_lattice_node_indexing():
    graph = _identity_graph(5)
    assert graph.nearest_node([0.0, 0.0]) == 0
    assert graph.nearest_node([0.26, 0.74]) == 1 * 5 + 3
    assert graph.position(8).tolist() == [0.25, 0.75]
    assert sorted(k for k, _ in graph.neighbors(0)) == [1, 5, 6]
    assert len(list(graph.neighbors(12))) == 8


def test_astar_matches_dijkstra_on_random_weights():
    rng = np.random.default_rng(0)
    n = 8
    graph = GridGraph(n=n, coords=rng.uniform(0.0, 100.0, (n * n, 2)))
    queries = [(0, n * n - 1), (17, 17)] + [tuple(int(k) for k in rng.integers(0, n * n, 2)) for _ in range(98)]
    for start, goal in queries:
        result = astar(graph, start, goal)
        assert result.cost == pytest.approx(_dijkstra_cost(graph, start, goal))
        assert result.nodes[0] == start and result.nodes[-1] == goal
        assert sum(graph.distance(a, b) for a, b in zip(result.nodes[:-1], result.nodes[1:])) \
            == pytest.approx(result.cost)


def test_astar_on_a_unit_lattice_costs_the_octile_distance():
    n = 9
    i, j = np.divmod(np.arange(n * n), n)
    graph = GridGraph(n=n, coords=np.stack([i, j], axis=1).astype(float))
    rng = np.random.default_rng(3)
    for start, goal in rng.integers(0, n * n, (50, 2)):
        di, dj = sorted(abs(v) for v in np.subtract(divmod(int(start), n), divmod(int(goal), n)))
        result = astar(graph, int(start), int(goal))
        assert result.cost == pytest.approx(dj + (math.sqrt(2.0) - 1.0) * di)
        assert result.cost == pytest.approx(_dijkstra_cost(graph, int(start), int(goal)))


def test_astar_with_blocked_nodes():
    rng = np.random.default_rng(1)
    n = 10
    blocked = rng.random(n * n) < 0.25
    blocked[[0, n * n - 1]] = False
    graph = GridGraph(n=n, coords=rng.uniform(0.0, 50.0, (n * n, 2)), blocked=blocked)
    expected = _dijkstra_cost(graph, 0, n * n - 1)
    if math.isinf(expected):
        with pytest.raises(PlanningFailure):
            astar(graph, 0, n * n - 1)
    else:
        result = astar(graph, 0, n * n - 1)
        assert result.cost == pytest.approx(expected)
        assert not blocked[result.nodes].any()


def test_astar_rejects_blocked_endpoints_and_walls():
    n = 4
    blocked = np.zeros(n * n, dtype=bool)
    blocked[[2, 6, 10, 14]] = True  # full column j=2
    graph = GridGraph(n=n, coords=_identity_graph(n).coords, blocked=blocked)
    with pytest.raises(PlanningFailure):
        astar(graph, 0, 2)
    with pytest.raises(PlanningFailure):
        astar(graph, 0, 3)


def test_identity_lattice_path_is_straight():
    graph = _identity_graph(11)
    path, cost = latent_astar(graph, [0.0, 0.0], [1.0, 1.0])
    assert len(path) == 11
    assert cost == pytest.approx(math.hypot(180.0, 145.0))


def test_locate_latent_finds_nearest_configuration():
    graph = _identity_graph(21)
    for q in [(-90.0, 5.0), (12.0, 77.0), (89.0, 149.0)]:
        node = locate_latent(graph, q)
        best = int(np.argmin(np.hypot(*(graph.coords - np.array(q)).T)))
        assert node == best


def test_locate_latent_falls_back_to_global_search():
    rng = np.random.default_rng(2)
    base = _identity_graph(15)
    graph = GridGraph(n=15, coords=base.coords[rng.permutation(15 * 15)])
    for q in [(-30.0, 40.0), (45.0, 120.0)]:
        node = locate_latent(graph, q)
        distances = np.hypot(*(graph.coords - np.array(q)).T)
        assert distances[node] <= 5.0 or node == int(np.argmin(distances))


def test_densify_and_map(identity_generator):
    path = LatentPath([[0.0, 0.0], [0.5, 0.5], [1.0, 0.5]])
    dense = densify_path(path, 4)
    assert len(dense) == 9
    assert dense[4].tolist() == [0.5, 0.5]
    trajectory = map_to_joint_trajectory(identity_generator, empty_scenario().mask, path, densify=4)
    assert trajectory[0].tolist() == [-90.0, 5.0]
    assert trajectory[-1].tolist() == pytest.approx([90.0, 77.5])
    with pytest.raises(UsageError):
        densify_path(path, 0)


def test_joint_path_length():
    assert joint_path_length(np.array([[0.0, 10.0], [3.0, 14.0], [3.0, 20.0]])) == pytest.approx(11.0)
    assert joint_path_length(np.zeros((1, 2))) == 0.0


def test_validate_free_trajectory():
    trajectory = np.array([[-60.0, 30.0], [0.0, 60.0], [60.0, 120.0]])
    report = validate_trajectory(trajectory, [])
    assert report.valid
    assert report.checked_configs >= 121
    assert report.first_violation_deg is None


def test_validate_catches_collision_between_waypoints(blocking_scenario):
    trajectory = np.array([[-60.0, 5.0], [60.0, 5.0]])
    report = validate_trajectory(trajectory, blocking_scenario.obstacles)
    assert not report.valid
    assert not report.waypoint_collisions.any()
    assert report.first_violation_segment == 0
    t1, t2 = report.first_violation_deg
    assert -60.0 < t1 < 0.0
    assert collides(JointAngles(t1, t2), blocking_scenario.obstacles)
    assert not collides(JointAngles(t1 - 1.0, t2), blocking_scenario.obstacles)
    assert report.boundary_contact


def test_joint_space_graph_blocks_colliding_nodes(blocking_scenario):
    graph = joint_space_graph(blocking_scenario.obstacles, n=12)
    expected = [collides(JointAngles(*q), blocking_scenario.obstacles) for q in graph.coords]
    assert graph.blocked.tolist() == expected
    assert graph.blocked.any()


def test_plan_on_identity_generator(identity_generator, tmp_path, metadata):
    scenario = empty_scenario()
    result = plan(identity_generator, scenario, (-60.0, 30.0), (60.0, 120.0), method='astar', graph_size=33,
                  densify=5)
    assert result.valid
    assert np.allclose(result.joint_trajectory_deg[0], (-60.0, 30.0), atol=3.0)
    assert np.allclose(result.joint_trajectory_deg[-1], (60.0, 120.0), atol=3.0)
    assert len(result.joint_trajectory_deg) == (len(result.latent_waypoints) - 1) * 5 + 1
    assert result.graph_cost_deg == pytest.approx(result.joint_path_length_deg)
    assert result.graph_cost_deg >= math.hypot(120.0, 90.0) - 6.0

    line = plan(identity_generator, scenario, (-60.0, 30.0), (60.0, 120.0), method='line', graph_size=33,
                line_steps=20)
    assert line.valid
    assert line.graph_cost_deg is None
    assert len(line.latent_waypoints) == 20

    path = tmp_path / "plan.json"
    save_plan(str(path), result, metadata)
    document = json.loads(path.read_text())
    assert document['valid'] is True
    assert document['config_hash'] == metadata['config_hash']
    assert document['method'] == 'astar'


def test_validator_rejects_a_generator_that_ignores_obstacles(identity_generator, blocking_scenario):
    result = plan(identity_generator, blocking_scenario, (-60.0, 5.0), (60.0, 5.0), method='line', graph_size=25)
    assert not result.valid
    assert result.to_dict()['first_violation_deg'] is not None


def test_plan_rejects_bad_requests(identity_generator):
    scenario = empty_scenario()
    with pytest.raises(UsageError):
        plan(identity_generator, scenario, (0.0, 30.0), (10.0, 40.0), method='rrt', graph_size=5)
    with pytest.raises(RangeError):
        plan(identity_generator, scenario, (-95.0, 30.0), (10.0, 40.0), graph_size=5)


def test_build_graph_uses_generator_outputs(identity_generator):
    graph = build_graph(identity_generator, empty_scenario().mask, n=3)
    assert graph.coords[0].tolist() == [-90.0, 5.0]
    assert graph.coords[-1].tolist() == [90.0, 150.0]
    assert graph.coords[4].tolist() == [0.0, 77.5]
