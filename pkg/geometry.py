"""
Two-link planar arm kinematics and exact segment/obstacle collision tests.

Angles are in degrees, measured counter-clockwise: theta1 from the +x axis,
theta2 relative to the first link. The base sits at the origin and both
links have length 1.
"""

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple, Union

import numpy as np

from config import LINK_LENGTH, THETA1_RANGE, THETA2_RANGE, WORKSPACE_X, WORKSPACE_Y
from errors import RangeError

Point = Tuple[float, float]
Segment = Tuple[Point, Point]


@dataclass(frozen=True)
class JointAngles:
    theta1: float
    theta2: float

    def check(self):
        if not (THETA1_RANGE[0] <= self.theta1 <= THETA1_RANGE[1]):
            raise RangeError(f"theta1={self.theta1} outside {THETA1_RANGE}")
        if not (THETA2_RANGE[0] <= self.theta2 <= THETA2_RANGE[1]):
            raise RangeError(f"theta2={self.theta2} outside {THETA2_RANGE}")
        return self

    def as_tuple(self):
        return (self.theta1, self.theta2)


@dataclass(frozen=True)
class ArmPose:
    base: Point
    elbow: Point
    tip: Point

    def links(self) -> Tuple[Segment, Segment]:
        return (self.base, self.elbow), (self.elbow, self.tip)


@dataclass(frozen=True)
class Circle:
    cx: float
    cy: float
    r: float

    @property
    def area(self):
        return math.pi * self.r ** 2

    def bounds(self):
        return (self.cx - self.r, self.cy - self.r, self.cx + self.r, self.cy + self.r)

    def to_dict(self):
        return {'type': 'circle', 'cx': self.cx, 'cy': self.cy, 'r': self.r}


@dataclass(frozen=True)
class Rectangle:
    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def area(self):
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def bounds(self):
        return (self.x0, self.y0, self.x1, self.y1)

    def to_dict(self):
        return {'type': 'rect', 'x0': self.x0, 'y0': self.y0, 'x1': self.x1, 'y1': self.y1}


Obstacle = Union[Circle, Rectangle]


def obstacle_from_dict(data) -> Obstacle:
    kind = data.get('type')
    if kind == 'circle':
        return Circle(float(data['cx']), float(data['cy']), float(data['r']))
    if kind == 'rect':
        return Rectangle(float(data['x0']), float(data['y0']), float(data['x1']), float(data['y1']))
    raise RangeError(f"unknown obstacle type: {kind!r}")


def check_obstacle(ob: Obstacle, min_size: float = 0.15):
    """Validate the size and workspace-containment invariants of an obstacle."""
    x0, y0, x1, y1 = ob.bounds()
    if isinstance(ob, Circle):
        if 2 * ob.r < min_size:
            raise RangeError(f"circle diameter {2 * ob.r:.4f} below {min_size}")
    elif (x1 - x0) < min_size or (y1 - y0) < min_size:
        raise RangeError(f"rectangle {x1 - x0:.4f}x{y1 - y0:.4f} below {min_size}")
    eps = 1e-9
    if x0 < WORKSPACE_X[0] - eps or x1 > WORKSPACE_X[1] + eps or \
            y0 < WORKSPACE_Y[0] - eps or y1 > WORKSPACE_Y[1] + eps:
        raise RangeError(f"obstacle {ob} leaves the workspace")
    return ob


def forward_kinematics(q: JointAngles) -> ArmPose:
    q.check()
    t1 = math.radians(q.theta1)
    t12 = math.radians(q.theta1 + q.theta2)
    elbow = (LINK_LENGTH * math.cos(t1), LINK_LENGTH * math.sin(t1))
    tip = (elbow[0] + LINK_LENGTH * math.cos(t12), elbow[1] + LINK_LENGTH * math.sin(t12))
    return ArmPose(base=(0.0, 0.0), elbow=elbow, tip=tip)


def forward_kinematics_batch(q_deg: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Elbow and tip positions for an (N, 2) array of joint angles in degrees."""
    q = np.radians(np.asarray(q_deg, dtype=np.float64))
    t1 = q[:, 0]
    t12 = q[:, 0] + q[:, 1]
    elbow = LINK_LENGTH * np.stack([np.cos(t1), np.sin(t1)], axis=1)
    tip = elbow + LINK_LENGTH * np.stack([np.cos(t12), np.sin(t12)], axis=1)
    return elbow, tip


# ---------------------------------------------------------------------------
# Scalar tests
# ---------------------------------------------------------------------------

def _cross(o: Point, a: Point, b: Point) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _on_segment(p: Point, q: Point, r: Point) -> bool:
    """q lies within the bounding box of p-r (collinearity checked by caller)."""
    return (min(p[0], r[0]) <= q[0] <= max(p[0], r[0]) and
            min(p[1], r[1]) <= q[1] <= max(p[1], r[1]))


def segments_intersect(a: Segment, b: Segment) -> bool:
    """Closed segment/segment intersection, touching included."""
    p1, p2 = a
    p3, p4 = b
    d1 = _cross(p3, p4, p1)
    d2 = _cross(p3, p4, p2)
    d3 = _cross(p1, p2, p3)
    d4 = _cross(p1, p2, p4)

    if ((d1 > 0 > d2) or (d1 < 0 < d2)) and ((d3 > 0 > d4) or (d3 < 0 < d4)):
        return True
    if d1 == 0 and _on_segment(p3, p1, p4):
        return True
    if d2 == 0 and _on_segment(p3, p2, p4):
        return True
    if d3 == 0 and _on_segment(p1, p3, p2):
        return True
    if d4 == 0 and _on_segment(p1, p4, p2):
        return True
    return False


def point_in_obstacle(p: Point, ob: Obstacle) -> bool:
    if isinstance(ob, Circle):
        return math.hypot(p[0] - ob.cx, p[1] - ob.cy) <= ob.r
    return ob.x0 <= p[0] <= ob.x1 and ob.y0 <= p[1] <= ob.y1


def point_segment_distance(p: Point, seg: Segment) -> float:
    (ax, ay), (bx, by) = seg
    dx, dy = bx - ax, by - ay
    length_sq = dx * dx + dy * dy
    if length_sq == 0.0:
        return math.hypot(p[0] - ax, p[1] - ay)
    t = ((p[0] - ax) * dx + (p[1] - ay) * dy) / length_sq
    t = max(0.0, min(1.0, t))
    return math.hypot(p[0] - (ax + t * dx), p[1] - (ay + t * dy))


def rectangle_edges(ob: Rectangle) -> Sequence[Segment]:
    corners = [(ob.x0, ob.y0), (ob.x1, ob.y0), (ob.x1, ob.y1), (ob.x0, ob.y1)]
    return [(corners[i], corners[(i + 1) % 4]) for i in range(4)]


def segment_intersects_obstacle(seg: Segment, ob: Obstacle) -> bool:
    """True iff the segment touches, crosses or lies inside the obstacle."""
    if isinstance(ob, Circle):
        return point_segment_distance((ob.cx, ob.cy), seg) <= ob.r

    if seg[0] == seg[1]:
        return point_in_obstacle(seg[0], ob)
    # containment covers links lying wholly inside a large rectangle
    if point_in_obstacle(seg[0], ob) or point_in_obstacle(seg[1], ob):
        return True
    return any(segments_intersect(seg, edge) for edge in rectangle_edges(ob))


def collides(q: JointAngles, obs: Iterable[Obstacle]) -> bool:
    pose = forward_kinematics(q)
    for ob in obs:
        for link in pose.links():
            if segment_intersects_obstacle(link, ob):
                return True
    return False


# ---------------------------------------------------------------------------
# Vectorized tests
# ---------------------------------------------------------------------------

def _segments_hit_rectangle(p0: np.ndarray, p1: np.ndarray, ob: Rectangle) -> np.ndarray:
    """Closed-box clipping of many segments at once (slab method)."""
    d = p1 - p0
    t_lo = np.zeros(len(p0))
    t_hi = np.ones(len(p0))
    hit = np.ones(len(p0), dtype=bool)
    for axis, lo, hi in ((0, ob.x0, ob.x1), (1, ob.y0, ob.y1)):
        da = d[:, axis]
        pa = p0[:, axis]
        parallel = da == 0.0
        hit &= ~parallel | ((pa >= lo) & (pa <= hi))
        with np.errstate(divide='ignore', invalid='ignore'):
            ta = (lo - pa) / da
            tb = (hi - pa) / da
        t_near = np.where(parallel, -np.inf, np.minimum(ta, tb))
        t_far = np.where(parallel, np.inf, np.maximum(ta, tb))
        t_lo = np.maximum(t_lo, t_near)
        t_hi = np.minimum(t_hi, t_far)
    return hit & (t_lo <= t_hi)


def _segments_hit_circle(p0: np.ndarray, p1: np.ndarray, ob: Circle) -> np.ndarray:
    c = np.array([ob.cx, ob.cy])
    d = p1 - p0
    length_sq = np.einsum('ij,ij->i', d, d)
    with np.errstate(divide='ignore', invalid='ignore'):
        t = np.einsum('ij,ij->i', c - p0, d) / length_sq
    t = np.clip(np.nan_to_num(t, nan=0.0, posinf=0.0, neginf=0.0), 0.0, 1.0)
    closest = p0 + t[:, None] * d
    return np.hypot(closest[:, 0] - c[0], closest[:, 1] - c[1]) <= ob.r


def segments_intersect_obstacle(p0: np.ndarray, p1: np.ndarray, ob: Obstacle) -> np.ndarray:
    if isinstance(ob, Circle):
        return _segments_hit_circle(p0, p1, ob)
    return _segments_hit_rectangle(p0, p1, ob)


def collides_batch(q_deg: np.ndarray, obs: Iterable[Obstacle]) -> np.ndarray:
    """Collision flags for an (N, 2) array of joint angles in degrees."""
    q_deg = np.asarray(q_deg, dtype=np.float64).reshape(-1, 2)
    elbow, tip = forward_kinematics_batch(q_deg)
    base = np.zeros_like(elbow)
    result = np.zeros(len(q_deg), dtype=bool)
    for ob in obs:
        result |= segments_intersect_obstacle(base, elbow, ob)
        result |= segments_intersect_obstacle(elbow, tip, ob)
    return result


def total_area(obs: Iterable[Obstacle]) -> float:
    return float(sum(ob.area for ob in obs))


def joint_axes(step_deg: float) -> Tuple[np.ndarray, np.ndarray]:
    """Grid values along each joint, inclusive of the lower bound and, when it falls on the step, the upper one."""
    t1 = np.arange(THETA1_RANGE[0], THETA1_RANGE[1] + 1e-9, step_deg)
    t2 = np.arange(THETA2_RANGE[0], THETA2_RANGE[1] + 1e-9, step_deg)
    return t1, t2


def joint_grid(step_deg: float) -> np.ndarray:
    """(n1 * n2, 2) joint angles, theta1-major (index = i * n2 + j)."""
    t1, t2 = joint_axes(step_deg)
    g1, g2 = np.meshgrid(t1, t2, indexing='ij')
    return np.stack([g1.ravel(), g2.ravel()], axis=1)
