"""
Grid-based coverage metrics for a trained Generator.

The joint space is cut into a grid at resolution dtheta and the latent
square into a grid of the same dimensions. Every latent cell center is
mapped through G; a joint cell counts as generated when at least one
sample lands in it. Against the collision map:
    TP = generated and free, FP = generated and colliding, FN = free and not generated
    IoU = TP / (TP + FP + FN), Precision = TP / (TP + FP)
"""

import json
import logging
import os
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd

import config
from dataset import LabeledDataset, build_collision_map, denormalize_array, normalize_array
from errors import ConfigError, UsageError
from geometry import joint_axes

logger = logging.getLogger(__name__)

RESULT_COLUMNS = ['fold', 'scenario_id', 'split', 'TP', 'FP', 'FN', 'IoU', 'Precision']


@dataclass(frozen=True)
class EvalCounts:
    tp: int
    fp: int
    fn: int

    @property
    def iou(self) -> float:
        denominator = self.tp + self.fp + self.fn
        return self.tp / denominator if denominator else 0.0

    @property
    def precision(self) -> float:
        denominator = self.tp + self.fp
        return self.tp / denominator if denominator else 0.0


@dataclass(frozen=True)
class EvalConfig:
    dtheta: float = config.EVAL_DTHETA

    @property
    def grid_shape(self):
        t1, t2 = joint_axes(self.dtheta)
        return len(t1), len(t2)

    @property
    def sample_count(self) -> int:
        n1, n2 = self.grid_shape
        return n1 * n2

    def latent_centers(self) -> np.ndarray:
        """One latent point per latent cell, at the cell center; (n1 * n2, 2)."""
        n1, n2 = self.grid_shape
        z1 = (np.arange(n1) + 0.5) / n1
        z2 = (np.arange(n2) + 0.5) / n2
        g1, g2 = np.meshgrid(z1, z2, indexing='ij')
        return np.stack([g1.ravel(), g2.ravel()], axis=1)


@dataclass
class ConditionResult:
    scenario_id: int
    counts: EvalCounts

    @property
    def iou(self):
        return self.counts.iou

    @property
    def precision(self):
        return self.counts.precision


def generated_cells(theta_deg: np.ndarray, dtheta: float) -> np.ndarray:
    """Boolean (n1, n2) map of joint cells hit by at least one sample (nearest grid point)."""
    n1, n2 = EvalConfig(dtheta).grid_shape
    theta_deg = np.asarray(theta_deg, dtype=np.float64).reshape(-1, 2)
    i = np.clip(np.rint((theta_deg[:, 0] - config.THETA1_RANGE[0]) / dtheta).astype(int), 0, n1 - 1)
    j = np.clip(np.rint((theta_deg[:, 1] - config.THETA2_RANGE[0]) / dtheta).astype(int), 0, n2 - 1)
    hit = np.zeros((n1, n2), dtype=bool)
    hit[i, j] = True
    return hit


def count_cells(generated: np.ndarray, collision_map: np.ndarray) -> EvalCounts:
    if generated.shape != collision_map.shape:
        raise UsageError(f"generated map {generated.shape} does not match collision map {collision_map.shape}")
    free = ~collision_map
    return EvalCounts(
        tp=int(np.sum(generated & free)),
        fp=int(np.sum(generated & collision_map)),
        fn=int(np.sum(free & ~generated)),
    )


def evaluate_samples(theta_deg: np.ndarray, collision_map: np.ndarray, dtheta: float) -> EvalCounts:
    return count_cells(generated_cells(theta_deg, dtheta), collision_map)


def evaluate_condition(G, scenario, cfg: Optional[EvalConfig] = None,
                       collision_map: Optional[np.ndarray] = None) -> ConditionResult:
    cfg = cfg or EvalConfig()
    if collision_map is None:
        collision_map = build_collision_map(scenario.obstacles, cfg.dtheta)
    theta = denormalize_array(G.generate_batch(cfg.latent_centers(), scenario.mask))
    return ConditionResult(scenario.id, evaluate_samples(theta, collision_map, cfg.dtheta))


def evaluate_scenarios(G, scenarios: Iterable, split: str, cfg: Optional[EvalConfig] = None,
                       fold: int = 0) -> pd.DataFrame:
    cfg = cfg or EvalConfig()
    rows = []
    for scn in scenarios:
        r = evaluate_condition(G, scn, cfg)
        rows.append({'fold': fold, 'scenario_id': scn.id, 'split': split,
                     'TP': r.counts.tp, 'FP': r.counts.fp, 'FN': r.counts.fn,
                     'IoU': r.iou, 'Precision': r.precision})
    return pd.DataFrame(rows, columns=RESULT_COLUMNS)


def evaluate_fold(G, dataset: LabeledDataset, fold_index: int, cfg: Optional[EvalConfig] = None) -> pd.DataFrame:
    fold = dataset.fold(fold_index)
    frames = [
        evaluate_scenarios(G, [dataset.scenarios[i] for i in fold.train_ids], 'train', cfg, fold_index),
        evaluate_scenarios(G, [dataset.scenarios[i] for i in fold.test_ids], 'test', cfg, fold_index),
    ]
    results = pd.concat(frames, ignore_index=True)
    for split, group in results.groupby('split'):
        logger.info(f"Fold {fold_index} {split}: IoU {group['IoU'].mean():.3f}, "
                    f"Precision {group['Precision'].mean():.3f} over {len(group)} conditions")
    return results


def summarize(results: pd.DataFrame) -> pd.DataFrame:
    """Mean/std/min/max of IoU and Precision per split (population std)."""
    rows = []
    for split in ('train', 'test'):
        group = results[results['split'] == split]
        if group.empty:
            continue
        row = {'split': split, 'conditions': len(group)}
        for metric in ('IoU', 'Precision'):
            values = group[metric].to_numpy(dtype=np.float64)
            row.update({f'{metric}_mean': values.mean(), f'{metric}_std': values.std(),
                        f'{metric}_min': values.min(), f'{metric}_max': values.max()})
        rows.append(row)
    return pd.DataFrame(rows)


def cross_validate(models: Dict[int, object], dataset: LabeledDataset,
                   cfg: Optional[EvalConfig] = None) -> Dict:
    """Evaluate one Generator per fold on that fold's train and test conditions."""
    missing = [f.fold_index for f in dataset.folds if f.fold_index not in models]
    if missing:
        raise ConfigError(f"no trained model for fold(s) {missing}")
    results = pd.concat([evaluate_fold(models[f.fold_index], dataset, f.fold_index, cfg) for f in dataset.folds],
                        ignore_index=True)
    return {'results': results, 'summary': summarize(results)}


def best_fold(results: pd.DataFrame, split: str = 'test') -> int:
    """Fold with the highest mean IoU on ``split``."""
    subset = results[results['split'] == split]
    if subset.empty:
        raise UsageError(f"no {split} results to rank")
    return int(subset.groupby('fold')['IoU'].mean().idxmax())


def iou_histogram(ious: Sequence[float], bins: int = config.HISTOGRAM_BINS) -> pd.DataFrame:
    """Relative frequency of IoU values over equal bins of [0, 1]."""
    ious = np.asarray(list(ious), dtype=np.float64)
    if ious.size == 0:
        raise UsageError("histogram needs at least one IoU value")
    counts, edges = np.histogram(np.clip(ious, 0.0, 1.0), bins=bins, range=(0.0, 1.0))
    return pd.DataFrame({'bin_low': edges[:-1], 'bin_high': edges[1:], 'frequency': counts / ious.size})


def iou_by_resolution(G, scenario, dthetas: Sequence[float] = (5.0, 2.0, 1.0)) -> Dict[float, float]:
    """IoU of one condition at several evaluation resolutions."""
    return {d: evaluate_condition(G, scenario, EvalConfig(d)).iou for d in dthetas}


def mapping_samples(G, mask: np.ndarray, n: int = 21) -> Dict[str, np.ndarray]:
    """An n x n latent grid and its joint-space image under ``mask``."""
    axis = np.linspace(0.0, 1.0, n)
    g1, g2 = np.meshgrid(axis, axis, indexing='ij')
    z = np.stack([g1.ravel(), g2.ravel()], axis=1)
    return {'z': z, 'theta_deg': denormalize_array(G.generate_batch(z, mask)), 'n': n}


def identity_error(G, mask: np.ndarray, n: int = 21) -> float:
    """Mean normalized distance between G(z) and z over an n x n latent grid."""
    samples = mapping_samples(G, mask, n)
    out = normalize_array(samples['theta_deg'])
    return float(np.mean(np.linalg.norm(out - samples['z'], axis=1)))


def write_results(out_dir: str, results: pd.DataFrame, metadata: Dict) -> Dict:
    """Per-condition CSV plus a JSON summary; returns the summary document."""
    os.makedirs(out_dir, exist_ok=True)
    results.to_csv(os.path.join(out_dir, 'metrics.csv'), index=False, float_format='%.6f')
    summary = summarize(results)
    document = {
        **metadata,
        'dtheta': metadata.get('dtheta', config.EVAL_DTHETA),
        'splits': {row['split']: {k: v for k, v in row.items() if k != 'split'}
                   for row in summary.to_dict(orient='records')},
    }
    if results['fold'].nunique() > 1:
        document['best_fold'] = best_fold(results)
    with open(os.path.join(out_dir, 'summary.json'), 'w') as f:
        json.dump(document, f, indent=1, sort_keys=True, default=float)
        f.write('\n')
    return document


def folds_with_models(dataset: LabeledDataset, available: Iterable[int]) -> List[int]:
    have = set(available)
    skipped = [f.fold_index for f in dataset.folds if f.fold_index not in have]
    if skipped:
        logger.warning(f"Skipping folds without checkpoints: {skipped}")
    return [f.fold_index for f in dataset.folds if f.fold_index in have]
