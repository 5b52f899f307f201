"""
SVG figures: plan triptych, latent-to-joint mapping, IoU histogram and bench scaling chart.

Output is byte-stable for identical inputs (fixed SVG id salt, no date stamp).
"""

import logging
import os
from typing import Dict, Optional

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from matplotlib.patches import Circle as CirclePatch, Rectangle as RectanglePatch  # noqa: E402

import config  # noqa: E402
from geometry import Circle, forward_kinematics_batch  # noqa: E402

logger = logging.getLogger(__name__)

plt.rcParams['svg.hashsalt'] = 'cgan-planner'
plt.rcParams['svg.fonttype'] = 'none'

JOINT_EXTENT = (config.THETA2_RANGE[0], config.THETA2_RANGE[1], config.THETA1_RANGE[0], config.THETA1_RANGE[1])


def save_svg(fig, path: str, metadata: Optional[Dict] = None):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    svg_meta = {'Date': None}
    if metadata:
        svg_meta['Description'] = ' '.join(f"{k}={metadata[k]}" for k in sorted(metadata))
    fig.savefig(path, format='svg', metadata=svg_meta)
    plt.close(fig)
    logger.info(f"Figure written: {path}")


def _draw_collision_map(ax, collision_map: np.ndarray):
    ax.imshow(collision_map, origin='lower', extent=JOINT_EXTENT, aspect='auto',
              cmap='Greys', vmin=0, vmax=1.6, interpolation='nearest')
    ax.set_xlabel('theta2 [deg]')
    ax.set_ylabel('theta1 [deg]')


def _draw_obstacles(ax, obstacles, forbidden_radius: float):
    for ob in obstacles:
        if isinstance(ob, Circle):
            ax.add_patch(CirclePatch((ob.cx, ob.cy), ob.r, color='tab:gray'))
        else:
            ax.add_patch(RectanglePatch((ob.x0, ob.y0), ob.x1 - ob.x0, ob.y1 - ob.y0, color='tab:gray'))
    ax.add_patch(CirclePatch((0.0, 0.0), forbidden_radius, fill=False, linestyle=':', color='tab:red'))
    ax.set_xlim(*config.WORKSPACE_X)
    ax.set_ylim(*config.WORKSPACE_Y)
    ax.set_aspect('equal')
    ax.set_xlabel('x')
    ax.set_ylabel('y')


def plot_plan(path: str, scenario, result, collision_map: np.ndarray, metadata: Optional[Dict] = None,
              arm_poses: int = 8, forbidden_radius: float = config.FORBIDDEN_RADIUS):
    """Latent path, joint trajectory over the collision map, and arm poses in the workspace."""
    fig, (ax_z, ax_q, ax_xy) = plt.subplots(1, 3, figsize=(13, 4.2))

    z = result.latent_waypoints
    ax_z.plot(z[:, 1], z[:, 0], '-', color='tab:blue')
    ax_z.plot(z[0, 1], z[0, 0], 'o', color='tab:green')
    ax_z.plot(z[-1, 1], z[-1, 0], 's', color='tab:red')
    ax_z.set_xlim(0, 1)
    ax_z.set_ylim(0, 1)
    ax_z.set_aspect('equal')
    ax_z.set_xlabel('z2')
    ax_z.set_ylabel('z1')
    ax_z.set_title(f'latent ({result.method})')

    traj = result.joint_trajectory_deg
    _draw_collision_map(ax_q, collision_map)
    ax_q.plot(traj[:, 1], traj[:, 0], '-', color='tab:blue')
    ax_q.plot(traj[0, 1], traj[0, 0], 'o', color='tab:green')
    ax_q.plot(traj[-1, 1], traj[-1, 0], 's', color='tab:red')
    ax_q.set_title('joint space' + ('' if result.valid else ' (invalid)'))

    _draw_obstacles(ax_xy, scenario.obstacles, forbidden_radius)
    picks = np.unique(np.linspace(0, len(traj) - 1, arm_poses).round().astype(int))
    elbow, tip = forward_kinematics_batch(traj[picks])
    shades = np.linspace(0.25, 1.0, len(picks))
    for e, t, s in zip(elbow, tip, shades):
        ax_xy.plot([0.0, e[0], t[0]], [0.0, e[1], t[1]], '-o', color=(0.1, 0.3, 0.8, s), markersize=2)
    ax_xy.set_title(f'workspace (scenario {scenario.id})')

    fig.tight_layout()
    save_svg(fig, path, metadata)


def plot_mapping(path: str, scenario, collision_map: np.ndarray, samples: Dict, metadata: Optional[Dict] = None,
                 forbidden_radius: float = config.FORBIDDEN_RADIUS):
    """Image of a latent grid in joint space; grid lines show how the square is folded."""
    fig, (ax_q, ax_xy) = plt.subplots(1, 2, figsize=(9, 4.2))
    _draw_collision_map(ax_q, collision_map)
    n = samples['n']
    theta = samples['theta_deg'].reshape(n, n, 2)
    for k in range(n):
        ax_q.plot(theta[k, :, 1], theta[k, :, 0], '-', color='tab:blue', linewidth=0.6)
        ax_q.plot(theta[:, k, 1], theta[:, k, 0], '-', color='tab:orange', linewidth=0.6)
    ax_q.set_title('latent grid mapped by G')
    _draw_obstacles(ax_xy, scenario.obstacles, forbidden_radius)
    ax_xy.set_title(f'scenario {scenario.id}')
    fig.tight_layout()
    save_svg(fig, path, metadata)


def plot_iou_histogram(path: str, histogram: pd.DataFrame, title: str = 'IoU', metadata: Optional[Dict] = None):
    fig, ax = plt.subplots(figsize=(5, 3.6))
    width = histogram['bin_high'] - histogram['bin_low']
    ax.bar(histogram['bin_low'], histogram['frequency'], width=width, align='edge',
           edgecolor='black', color='tab:blue')
    ax.set_xlim(0, 1)
    ax.set_xlabel('IoU')
    ax.set_ylabel('relative frequency')
    ax.set_title(title)
    fig.tight_layout()
    save_svg(fig, path, metadata)


def plot_bench(path: str, frame: pd.DataFrame, x: str = 'obstacle_count', metadata: Optional[Dict] = None):
    """Time ratio vs ``x`` for each method (medians per x value)."""
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    for method, group in frame.groupby('method'):
        series = group.groupby(x)['ratio'].median().sort_index()
        ax.plot(series.index, series.values, 'o-', label=method)
    ax.set_xlabel(x.replace('_', ' '))
    ax.set_ylabel('time ratio vs simplest condition')
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    save_svg(fig, path, metadata)
