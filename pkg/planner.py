"""
Path planning in the Generator's latent space.

Any curve in [0,1]^2 maps through the Generator to a collision-free joint
trajectory, so a straight latent line is already a valid plan. A* over a
latent lattice whose edges are weighted by the joint-space distance between
neighbouring generated configurations gives the shortest such path.
The same GridGraph also carries the collision-checked joint-space baseline.
"""

import heapq
import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

import config
from dataset import denormalize_array, normalize_array
from errors import PlanningFailure, RangeError, UsageError
from geometry import JointAngles, collides, collides_batch

logger = logging.getLogger(__name__)

# 8-connected lattice steps
NEIGHBOR_OFFSETS = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


@dataclass
class LatentPath:
    waypoints: np.ndarray  # (K, 2) latent points

    def __post_init__(self):
        self.waypoints = np.asarray(self.waypoints, dtype=np.float64).reshape(-1, 2)
        check_latent(self.waypoints)

    def __len__(self):
        return len(self.waypoints)


def check_latent(z: np.ndarray):
    z = np.asarray(z, dtype=np.float64)
    if np.any(z < 0.0) or np.any(z > 1.0) or not np.all(np.isfinite(z)):
        raise RangeError("latent point outside [0,1]^2")
    return z


def straight_line_path(z_start, z_goal, steps: int = config.LINE_STEPS) -> LatentPath:
    z_start, z_goal = check_latent(z_start), check_latent(z_goal)
    if steps < 2:
        raise UsageError("a line path needs at least 2 steps")
    t = np.linspace(0.0, 1.0, steps)[:, None]
    waypoints = np.clip(z_start + t * (z_goal - z_start), 0.0, 1.0)
    waypoints[-1] = z_goal
    return LatentPath(waypoints)


def polyline_path(points: Sequence, steps_per_segment: int = config.LINE_STEPS) -> LatentPath:
    """Piecewise-linear latent path through ``points`` (inclusive)."""
    points = check_latent(np.asarray(points, dtype=np.float64).reshape(-1, 2))
    if len(points) < 2:
        raise UsageError("a polyline needs at least 2 points")
    pieces = [straight_line_path(a, b, steps_per_segment).waypoints[:-1] for a, b in zip(points[:-1], points[1:])]
    return LatentPath(np.concatenate(pieces + [points[-1:]]))


# ---------------------------------------------------------------------------
# Lattice graph
# ---------------------------------------------------------------------------

@dataclass
class GridGraph:
    """n x n lattice over [0,1]^2; node i*n + j sits at (lattice[i], lattice[j]).

    ``coords`` are the nodes' joint configurations in degrees; edge weights
    are Euclidean distances between them. ``blocked`` nodes are never entered.
    """
    n: int
    coords: np.ndarray  # (n*n, 2) degrees
    blocked: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.n < 2:
            raise UsageError("graph lattice needs n >= 2")
        self.coords = np.asarray(self.coords, dtype=np.float64)
        if self.coords.shape != (self.n * self.n, 2):
            raise UsageError(f"coords shape {self.coords.shape} does not match n={self.n}")
        if self.blocked is None:
            self.blocked = np.zeros(self.n * self.n, dtype=bool)
        self._xy = self.coords.tolist()

    def distance(self, a: int, b: int) -> float:
        (x0, y0), (x1, y1) = self._xy[a], self._xy[b]
        return math.hypot(x1 - x0, y1 - y0)

    @property
    def node_count(self) -> int:
        return self.n * self.n

    @property
    def lattice(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n)

    def position(self, idx: int) -> np.ndarray:
        i, j = divmod(int(idx), self.n)
        lat = self.lattice
        return np.array([lat[i], lat[j]])

    def positions(self, nodes: Sequence[int]) -> np.ndarray:
        return np.stack([self.position(k) for k in nodes]) if len(nodes) else np.zeros((0, 2))

    def nearest_node(self, p) -> int:
        """Lattice node closest to the point ``p`` in [0,1]^2."""
        i, j = (int(round(float(v) * (self.n - 1))) for v in check_latent(p))
        return i * self.n + j

    def neighbors(self, idx: int):
        i, j = divmod(idx, self.n)
        for di, dj in NEIGHBOR_OFFSETS:
            a, b = i + di, j + dj
            if 0 <= a < self.n and 0 <= b < self.n:
                k = a * self.n + b
                if not self.blocked[k]:
                    yield k, self.distance(idx, k)

    def edges(self) -> List[Tuple[int, int, float]]:
        """Undirected edge list (i < j) between unblocked nodes."""
        out = []
        for idx in range(self.node_count):
            if self.blocked[idx]:
                continue
            out.extend((idx, k, w) for k, w in self.neighbors(idx) if k > idx)
        return out


def build_graph(G, mask: np.ndarray, n: int = config.GRAPH_SIZE) -> GridGraph:
    """Latent lattice whose nodes carry G's joint configurations under ``mask``."""
    lattice = np.linspace(0.0, 1.0, n)
    z1, z2 = np.meshgrid(lattice, lattice, indexing='ij')
    z = np.stack([z1.ravel(), z2.ravel()], axis=1)
    coords = denormalize_array(G.generate_batch(z, mask))
    return GridGraph(n=n, coords=coords)


def joint_space_graph(obstacles, n: int = config.BENCH_GRID_SIZE) -> GridGraph:
    """Joint-space lattice with every node collision-checked by the scalar geometry test."""
    lattice = np.linspace(0.0, 1.0, n)
    u1, u2 = np.meshgrid(lattice, lattice, indexing='ij')
    coords = denormalize_array(np.stack([u1.ravel(), u2.ravel()], axis=1))
    blocked = np.fromiter((collides(JointAngles(float(a), float(b)), obstacles) for a, b in coords),
                          dtype=bool, count=len(coords))
    return GridGraph(n=n, coords=coords, blocked=blocked)


# ---------------------------------------------------------------------------
# Search
# ---------------------------------------------------------------------------

@dataclass
class SearchResult:
    nodes: List[int]
    cost: float
    expanded: int = 0


def astar(graph: GridGraph, start: int, goal: int) -> SearchResult:
    """Shortest node path between two lattice nodes.

    Heuristic is the Euclidean joint distance to the goal's configuration,
    consistent with Euclidean edge weights. Heap ties fall to the smaller node index.
    """
    if graph.blocked[start] or graph.blocked[goal]:
        raise PlanningFailure(f"start or goal node is blocked ({start} -> {goal})")

    def heuristic(k):
        return graph.distance(k, goal)

    open_set = [(heuristic(start), start)]
    g_score = {start: 0.0}
    came_from: Dict[int, int] = {}
    closed = set()

    while open_set:
        _, current = heapq.heappop(open_set)
        if current in closed:
            continue
        if current == goal:
            path = [current]
            while current in came_from:
                current = came_from[current]
                path.append(current)
            path.reverse()
            return SearchResult(nodes=path, cost=g_score[goal], expanded=len(closed) + 1)
        closed.add(current)

        for k, w in graph.neighbors(current):
            if k in closed:
                continue
            tentative = g_score[current] + w
            if tentative < g_score.get(k, math.inf):
                g_score[k] = tentative
                came_from[k] = current
                heapq.heappush(open_set, (tentative + heuristic(k), k))

    raise PlanningFailure(f"no path between nodes {start} and {goal}")


def locate_latent(graph: GridGraph, q_deg, tolerance_deg: float = 5.0) -> int:
    """Node whose configuration is closest to ``q_deg``.

    Starts from the node at normalize(q) (G is trained towards the identity
    there) and descends over lattice neighbours; a local minimum farther than
    ``tolerance_deg`` falls back to the global nearest node.
    """
    q = np.asarray(q_deg, dtype=np.float64)
    guess = np.clip(normalize_array(q), 0.0, 1.0)
    current = graph.nearest_node(guess)
    best = float(np.hypot(*(graph.coords[current] - q)))
    while True:
        i, j = divmod(current, graph.n)
        step = None
        for di, dj in NEIGHBOR_OFFSETS:
            a, b = i + di, j + dj
            if 0 <= a < graph.n and 0 <= b < graph.n:
                k = a * graph.n + b
                d = float(np.hypot(*(graph.coords[k] - q)))
                if d < best:
                    best, step = d, k
        if step is None:
            break
        current = step

    if best > tolerance_deg:
        distances = np.hypot(*(graph.coords - q).T)
        current = int(np.argmin(distances))
        logger.debug(f"Latent snap fell back to global search ({best:.2f} deg local)")
    return current


def latent_astar(graph: GridGraph, z_start, z_goal) -> Tuple[LatentPath, float]:
    result = astar(graph, graph.nearest_node(z_start), graph.nearest_node(z_goal))
    return LatentPath(graph.positions(result.nodes)), result.cost


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------

def densify_path(path: LatentPath, densify: int) -> np.ndarray:
    if densify < 1:
        raise UsageError("densify must be at least 1")
    w = path.waypoints
    if len(w) == 1:
        return w.copy()
    t = np.linspace(0.0, 1.0, densify + 1)[:-1]
    pieces = [a + t[:, None] * (b - a) for a, b in zip(w[:-1], w[1:])]
    return np.concatenate(pieces + [w[-1:]])


def map_to_joint_trajectory(G, mask: np.ndarray, path: LatentPath,
                            densify: int = config.DENSIFY_STEPS) -> np.ndarray:
    """(K, 2) joint trajectory in degrees for the densified latent path."""
    return denormalize_array(G.generate_batch(densify_path(path, densify), mask))


def joint_path_length(trajectory: np.ndarray) -> float:
    trajectory = np.asarray(trajectory, dtype=np.float64)
    if len(trajectory) < 2:
        return 0.0
    return float(np.sum(np.hypot(*np.diff(trajectory, axis=0).T)))


@dataclass
class ValidationReport:
    valid: bool
    waypoint_collisions: np.ndarray = field(repr=False)
    checked_configs: int = 0
    first_violation_segment: Optional[int] = None
    first_violation_deg: Optional[Tuple[float, float]] = None
    boundary_contact: bool = False


def _interpolate(trajectory: np.ndarray, step_deg: float) -> Tuple[np.ndarray, np.ndarray]:
    """Configs at most ``step_deg`` apart along every segment, with their segment index."""
    configs, segment = [trajectory[:1]], [np.zeros(1, dtype=int)]
    for k, (a, b) in enumerate(zip(trajectory[:-1], trajectory[1:])):
        n = max(1, int(math.ceil(np.max(np.abs(b - a)) / step_deg)))
        t = np.arange(1, n + 1) / n
        configs.append(a + t[:, None] * (b - a))
        segment.append(np.full(n, k))
    return np.concatenate(configs), np.concatenate(segment)


def _near_free(q: np.ndarray, obstacles, radius_deg: float) -> bool:
    offsets = np.array([(a, b) for a in (-radius_deg, 0.0, radius_deg) for b in (-radius_deg, 0.0, radius_deg)])
    low = (config.THETA1_RANGE[0], config.THETA2_RANGE[0])
    high = (config.THETA1_RANGE[1], config.THETA2_RANGE[1])
    candidates = np.clip(q + offsets, low, high)
    return bool(not np.all(collides_batch(candidates, obstacles)))


def validate_trajectory(trajectory: np.ndarray, obstacles,
                        step_deg: float = config.VALIDATION_STEP_DEG) -> ValidationReport:
    """Check waypoints and 1-degree interpolation against the geometry oracle only."""
    trajectory = np.asarray(trajectory, dtype=np.float64).reshape(-1, 2)
    waypoint_hits = collides_batch(trajectory, obstacles)
    if len(trajectory) == 0:
        return ValidationReport(valid=True, waypoint_collisions=waypoint_hits)

    configs, segment = _interpolate(trajectory, step_deg)
    hits = collides_batch(configs, obstacles)
    if not hits.any():
        return ValidationReport(valid=True, waypoint_collisions=waypoint_hits, checked_configs=len(configs))

    first = int(np.argmax(hits))
    q = configs[first]
    return ValidationReport(
        valid=False,
        waypoint_collisions=waypoint_hits,
        checked_configs=len(configs),
        first_violation_segment=int(segment[first]),
        first_violation_deg=(float(q[0]), float(q[1])),
        boundary_contact=_near_free(q, obstacles, step_deg),
    )


# ---------------------------------------------------------------------------
# Facade
# ---------------------------------------------------------------------------

@dataclass
class PlanResult:
    scenario_id: int
    method: str
    start_deg: Tuple[float, float]
    goal_deg: Tuple[float, float]
    latent_waypoints: np.ndarray
    joint_trajectory_deg: np.ndarray
    validation: ValidationReport
    graph_cost_deg: Optional[float] = None

    @property
    def valid(self) -> bool:
        return self.validation.valid

    @property
    def joint_path_length_deg(self) -> float:
        return joint_path_length(self.joint_trajectory_deg)

    def to_dict(self, metadata: Optional[Dict] = None) -> Dict:
        v = self.validation
        return {
            **(metadata or {}),
            'scenario_id': self.scenario_id,
            'method': self.method,
            'start_deg': list(self.start_deg),
            'goal_deg': list(self.goal_deg),
            'latent_waypoints': np.round(self.latent_waypoints, 8).tolist(),
            'joint_trajectory_deg': np.round(self.joint_trajectory_deg, 6).tolist(),
            'valid': bool(self.valid),
            'joint_path_length_deg': round(self.joint_path_length_deg, 6),
            'graph_cost_deg': None if self.graph_cost_deg is None else round(self.graph_cost_deg, 6),
            'first_violation_deg': None if v.first_violation_deg is None else list(v.first_violation_deg),
            'boundary_contact': bool(v.boundary_contact),
        }


PLAN_METHODS = ('line', 'astar')


def plan(G, scenario, start_deg, goal_deg, method: str = 'astar', graph: Optional[GridGraph] = None,
         graph_size: int = config.GRAPH_SIZE, line_steps: int = config.LINE_STEPS,
         densify: int = config.DENSIFY_STEPS) -> PlanResult:
    """Plan from ``start_deg`` to ``goal_deg`` under ``scenario``'s mask and validate the result."""
    if method not in PLAN_METHODS:
        raise UsageError(f"unknown plan method {method!r} (choose from {', '.join(PLAN_METHODS)})")
    start, goal = JointAngles(*start_deg).check(), JointAngles(*goal_deg).check()
    graph = graph or build_graph(G, scenario.mask, graph_size)
    s_node = locate_latent(graph, start.as_tuple())
    g_node = locate_latent(graph, goal.as_tuple())

    cost = None
    if method == 'line':
        path = straight_line_path(graph.position(s_node), graph.position(g_node), line_steps)
    else:
        result = astar(graph, s_node, g_node)
        path, cost = LatentPath(graph.positions(result.nodes)), result.cost

    trajectory = map_to_joint_trajectory(G, scenario.mask, path, densify)
    report = validate_trajectory(trajectory, scenario.obstacles)
    logger.info(f"Plan ({method}) scenario {scenario.id}: {len(path)} latent waypoints, "
                f"{joint_path_length(trajectory):.1f} deg, valid={report.valid}")
    return PlanResult(scenario_id=scenario.id, method=method, start_deg=start.as_tuple(),
                      goal_deg=goal.as_tuple(), latent_waypoints=path.waypoints,
                      joint_trajectory_deg=trajectory, validation=report, graph_cost_deg=cost)


def save_plan(path: str, result: PlanResult, metadata: Dict):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w') as f:
        json.dump(result.to_dict(metadata), f, indent=1, sort_keys=True)
        f.write('\n')
