"""
Conditional GAN mapping the latent square [0,1]^2 onto the collision-free
joint space of the two-link arm, conditioned on an obstacle mask.

The Discriminator objective is
    -E[log D(theta_free, c)] - E[log(1 - D(G(z, c), c))] - E[log(1 - D(theta_collision, c))]
and the Generator objective is the non-saturating adversarial term plus
weighted identity (G(z=theta) = theta on free joints) and feature-matching
terms. Both networks are trained alternately, one step each.
"""

import copy
import logging
import math
import os
import time
from dataclasses import asdict, dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

import config
from dataset import LabeledDataset
from errors import ModelError, RangeError, TrainingError, UsageError
from neuralnet import (Adam, BatchNorm, Conv2D, Dense, Flatten, LeakyReLU, Sequential, Sigmoid,
                       load_checkpoint, save_checkpoint)

logger = logging.getLogger(__name__)

LATENT_DIM = 2  # one latent coordinate per joint
LOG_COLUMNS = ['epoch', 'd_loss', 'g_loss', 'collision_loss', 'identity_loss', 'fm_loss', 'wall_seconds']


@dataclass
class ArchConfig:
    mask_shape: Tuple[int, int] = (config.MASK_ROWS, config.MASK_COLS)
    channels: Tuple[int, int] = config.COND_CHANNELS
    cond_features: int = config.COND_FEATURES
    hidden: int = config.HIDDEN_UNITS
    leaky_slope: float = config.LEAKY_SLOPE
    bn_momentum: float = config.BN_MOMENTUM

    @classmethod
    def from_dict(cls, data: Dict):
        return cls(mask_shape=tuple(data['mask_shape']), channels=tuple(data['channels']),
                   cond_features=int(data['cond_features']), hidden=int(data['hidden']),
                   leaky_slope=float(data['leaky_slope']), bn_momentum=float(data['bn_momentum']))


@dataclass
class TrainConfig:
    epochs: int = config.EPOCHS
    batch_size: int = config.BATCH_SIZE
    max_steps_per_epoch: int = config.MAX_STEPS_PER_EPOCH
    lambda_identity: float = config.LAMBDA_IDENTITY
    lambda_feature_match: float = config.LAMBDA_FEATURE_MATCH
    learning_rate: float = config.LEARNING_RATE
    beta1: float = config.ADAM_BETA1
    beta2: float = config.ADAM_BETA2
    eps: float = config.ADAM_EPS
    checkpoint_every: int = config.CHECKPOINT_EVERY
    seed: int = config.GLOBAL_SEED

    def check(self):
        if self.batch_size < 2:
            raise UsageError("batch size must be at least 2")
        if self.lambda_identity < 0 or self.lambda_feature_match < 0:
            raise UsageError("loss weights must be non-negative")
        if self.epochs < 1:
            raise UsageError("epochs must be positive")
        return self

    @classmethod
    def from_settings(cls, settings: Dict):
        return cls(
            epochs=settings['train.epochs'],
            batch_size=settings['train.batch_size'],
            max_steps_per_epoch=settings['train.max_steps_per_epoch'],
            lambda_identity=settings['train.lambda_identity'],
            lambda_feature_match=settings['train.lambda_feature_match'],
            learning_rate=settings['train.learning_rate'],
            beta1=settings['train.beta1'],
            beta2=settings['train.beta2'],
            checkpoint_every=settings['train.checkpoint_every'],
            seed=settings['seed'],
        )


# ---------------------------------------------------------------------------
# Networks
# ---------------------------------------------------------------------------

def _condition_branch(arch: ArchConfig, rng: np.random.Generator, dtype) -> Sequential:
    c1, c2 = arch.channels
    conv1 = Conv2D(1, c1, 3, rng, stride=2, padding=1, dtype=dtype)
    conv2 = Conv2D(c1, c2, 3, rng, stride=2, padding=1, dtype=dtype)
    h, w = conv2.output_shape(*conv1.output_shape(*arch.mask_shape))
    return Sequential([
        conv1, BatchNorm(c1, arch.bn_momentum, dtype=dtype), LeakyReLU(arch.leaky_slope),
        conv2, BatchNorm(c2, arch.bn_momentum, dtype=dtype), LeakyReLU(arch.leaky_slope),
        Flatten(),
        Dense(c2 * h * w, arch.cond_features, rng, dtype=dtype), LeakyReLU(arch.leaky_slope),
    ])


def _as_mask_batch(masks: np.ndarray, dtype) -> np.ndarray:
    masks = np.asarray(masks, dtype=dtype)
    if masks.ndim == 3:
        masks = masks[:, None]
    return masks


class ConditionalNet:
    """Shared plumbing: a condition branch whose features are concatenated with a 2-D input."""

    prefix = ''

    def __init__(self, arch: ArchConfig):
        self.arch = arch
        self.cond: Sequential = None
        self._sections: Dict[str, Sequential] = {}

    def _cond_features(self, masks: np.ndarray) -> np.ndarray:
        return self.cond.forward(_as_mask_batch(masks, self.dtype))

    @property
    def dtype(self):
        return self.cond.layers[0].params['W'].dtype

    def set_training(self, training: bool):
        for section in self._sections.values():
            section.set_training(training)

    def zero_grad(self):
        for section in self._sections.values():
            section.zero_grad()

    def parameters(self) -> Dict[str, np.ndarray]:
        return {name: p for key, section in self._sections.items()
                for name, p, _ in section.named_parameters(f"{self.prefix}{key}.")}

    def gradients(self) -> Dict[str, np.ndarray]:
        return {name: g for key, section in self._sections.items()
                for name, _, g in section.named_parameters(f"{self.prefix}{key}.")}

    def state_dict(self) -> Dict[str, np.ndarray]:
        state = {}
        for key, section in self._sections.items():
            state.update(section.state_dict(f"{self.prefix}{key}."))
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray]):
        for key, section in self._sections.items():
            section.load_state_dict(state, f"{self.prefix}{key}.")

    def recalibrate(self, masks: np.ndarray):
        """Replace the condition branch's running statistics by those of ``masks``.

        Batches that share one mask have zero variance per channel, and the
        running averages then trail the batch statistics used in training.
        """
        self.cond.recalibrate(_as_mask_batch(masks, self.dtype))

    def astype(self, dtype):
        clone = copy.deepcopy(self)
        for section in clone._sections.values():
            section._cast(dtype)
        return clone


class Generator(ConditionalNet):
    """(z, c) -> normalized joint angles in (0, 1)^2."""

    prefix = 'generator.'

    def __init__(self, arch: ArchConfig, rng: np.random.Generator, dtype=np.float32):
        super().__init__(arch)
        self.cond = _condition_branch(arch, rng, dtype)
        self.trunk = Sequential([
            Dense(LATENT_DIM + arch.cond_features, arch.hidden, rng, dtype=dtype), LeakyReLU(arch.leaky_slope),
            Dense(arch.hidden, arch.hidden, rng, dtype=dtype), LeakyReLU(arch.leaky_slope),
            Dense(arch.hidden, 2, rng, dtype=dtype), Sigmoid(),
        ])
        self._sections = {'cond': self.cond, 'trunk': self.trunk}

    def forward(self, z: np.ndarray, masks: np.ndarray) -> np.ndarray:
        features = self._cond_features(masks)
        return self.trunk.forward(np.concatenate([np.asarray(z, dtype=self.dtype), features], axis=1))

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        grad_in = self.trunk.backward(grad_out)
        self.cond.backward(grad_in[:, LATENT_DIM:])
        return grad_in[:, :LATENT_DIM]

    def generate_batch(self, z: np.ndarray, mask: np.ndarray) -> np.ndarray:
        """Inference for many latent points under one condition mask."""
        self.set_training(False)
        z = np.asarray(z, dtype=self.dtype).reshape(-1, LATENT_DIM)
        features = self._cond_features(np.asarray(mask)[None])
        inputs = np.concatenate([z, np.repeat(features, len(z), axis=0)], axis=1)
        return self.trunk.forward(inputs)


class Discriminator(ConditionalNet):
    """(theta, c) -> logit of 'collision-free and real'; exposes the penultimate features."""

    prefix = 'discriminator.'

    def __init__(self, arch: ArchConfig, rng: np.random.Generator, dtype=np.float32):
        super().__init__(arch)
        self.cond = _condition_branch(arch, rng, dtype)
        self.body = Sequential([
            Dense(2 + arch.cond_features, arch.hidden, rng, dtype=dtype, spectral_norm=True),
            LeakyReLU(arch.leaky_slope),
            Dense(arch.hidden, arch.hidden, rng, dtype=dtype, spectral_norm=True),
            LeakyReLU(arch.leaky_slope),
        ])
        self.head = Sequential([Dense(arch.hidden, 1, rng, dtype=dtype, spectral_norm=True)])
        self._sections = {'cond': self.cond, 'body': self.body, 'head': self.head}
        self.features: Optional[np.ndarray] = None

    def forward(self, theta: np.ndarray, masks: np.ndarray) -> np.ndarray:
        cond = self._cond_features(masks)
        self.features = self.body.forward(np.concatenate([np.asarray(theta, dtype=self.dtype), cond], axis=1))
        return self.head.forward(self.features)[:, 0]

    def backward(self, grad_logits: np.ndarray, grad_features: Optional[np.ndarray] = None) -> np.ndarray:
        grad_feat = self.head.backward(np.asarray(grad_logits, dtype=self.dtype)[:, None])
        if grad_features is not None:
            grad_feat = grad_feat + grad_features
        grad_in = self.body.backward(grad_feat)
        self.cond.backward(grad_in[:, 2:])
        return grad_in[:, :2]

    def predict(self, theta: np.ndarray, masks: np.ndarray) -> np.ndarray:
        return sigmoid(self.forward(theta, masks))

    def set_power_iteration(self, enabled: bool):
        self.body.set_power_iteration(enabled)
        self.head.set_power_iteration(enabled)

    def set_running_updates(self, enabled: bool):
        self.cond.set_running_updates(enabled)


def sigmoid(x: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -x))


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


# ---------------------------------------------------------------------------
# Loss terms (value only)
# ---------------------------------------------------------------------------
# All log terms are evaluated from logits through softplus, which equals the
# epsilon-clamped log form whenever D lies in [eps, 1 - eps].

def loss_gan(D, G, real: np.ndarray, real_masks: np.ndarray, z: np.ndarray,
             z_masks: Optional[np.ndarray] = None) -> Tuple[float, float]:
    """(d_term, g_term) of the adversarial loss; g_term is the non-saturating form."""
    z_masks = real_masks if z_masks is None else z_masks
    fake = G.forward(z, z_masks)
    l_real = D.forward(real, real_masks)
    l_fake = D.forward(fake, z_masks)
    d_term = float(np.mean(_softplus(-l_real)) + np.mean(_softplus(l_fake)))
    g_term = float(np.mean(_softplus(-l_fake)))
    return d_term, g_term


def loss_collision(D, collision: np.ndarray, collision_masks: np.ndarray) -> float:
    if len(collision) == 0:
        return 0.0
    return float(np.mean(_softplus(D.forward(collision, collision_masks))))


def loss_identity(G, real: np.ndarray, real_masks: np.ndarray) -> float:
    out = G.forward(real, real_masks)
    return float(np.mean(np.sum((out - real) ** 2, axis=1)))


def loss_feature_match(D, real: np.ndarray, real_masks: np.ndarray,
                       fake: np.ndarray, fake_masks: np.ndarray) -> float:
    if len(real) == 0 or len(fake) == 0:
        raise UsageError("feature matching needs non-empty real and fake batches")
    D.forward(real, real_masks)
    f_real = D.features.mean(axis=0)
    D.forward(fake, fake_masks)
    f_fake = D.features.mean(axis=0)
    return float(np.sum((f_real - f_fake) ** 2))


# ---------------------------------------------------------------------------
# Objectives with gradients
# ---------------------------------------------------------------------------

@dataclass
class Batch:
    real: np.ndarray  # (B, 2) normalized free joints
    masks: np.ndarray  # (B, H, W) conditions for real, z and identity samples
    z: np.ndarray  # (B, 2)
    collision: np.ndarray  # (M, 2) normalized colliding joints
    collision_masks: np.ndarray  # (M, H, W)


def discriminator_objective(D, G, batch: Batch, backward: bool = True) -> Dict[str, float]:
    """D terms on one batch; accumulates D gradients when ``backward``."""
    fake = G.forward(batch.z, batch.masks)
    b, m = len(batch.real), len(batch.collision)
    theta = np.concatenate([batch.real, fake, batch.collision]) if m else np.concatenate([batch.real, fake])
    masks = np.concatenate([batch.masks, batch.masks, batch.collision_masks]) if m else \
        np.concatenate([batch.masks, batch.masks])

    logits = D.forward(theta, masks).astype(np.float64)
    l_real, l_fake, l_col = logits[:b], logits[b:2 * b], logits[2 * b:]
    d_term = float(np.mean(_softplus(-l_real)) + np.mean(_softplus(l_fake)))
    collision = float(np.mean(_softplus(l_col))) if m else 0.0

    if backward:
        grad = np.concatenate([
            (sigmoid(l_real) - 1.0) / b,
            sigmoid(l_fake) / b,
            sigmoid(l_col) / m if m else np.zeros(0),
        ])
        D.backward(grad)
    return {'d_term': d_term, 'collision': collision, 'd_total': d_term + collision}


def generator_objective(D, G, batch: Batch, lambda_identity: float, lambda_feature_match: float,
                        backward: bool = True) -> Dict[str, float]:
    """G terms on one batch; accumulates G gradients when ``backward`` (D gradients are discarded)."""
    b = len(batch.real)
    out = G.forward(np.concatenate([batch.z, batch.real]), np.concatenate([batch.masks, batch.masks]))
    fake, ident = out[:b], out[b:]

    logits = D.forward(np.concatenate([batch.real, fake]), np.concatenate([batch.masks, batch.masks]))
    logits = logits.astype(np.float64)
    l_fake = logits[b:]
    g_term = float(np.mean(_softplus(-l_fake)))

    diff = D.features[:b].mean(axis=0) - D.features[b:].mean(axis=0)
    fm = float(np.sum(diff.astype(np.float64) ** 2))
    residual = (ident - batch.real).astype(np.float64)
    identity = float(np.mean(np.sum(residual ** 2, axis=1)))

    if backward:
        grad_logits = np.concatenate([np.zeros(b), (sigmoid(l_fake) - 1.0) / b])
        grad_features = np.zeros_like(D.features)
        grad_features[b:] = -2.0 * lambda_feature_match * diff / b
        grad_theta = D.backward(grad_logits, grad_features)
        D.zero_grad()
        grad_out = np.concatenate([grad_theta[b:], lambda_identity * 2.0 * residual / b]).astype(out.dtype)
        G.backward(grad_out)

    total = g_term + lambda_identity * identity + lambda_feature_match * fm
    return {'g_term': g_term, 'identity': identity, 'feature_match': fm, 'g_total': total}


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

class BatchSampler:
    """Draws per-step batches of (condition, joint) pairs from the training scenarios."""

    def __init__(self, dataset: LabeledDataset, scenario_ids: Sequence[int], rng: np.random.Generator):
        self.rng = rng
        self.ids = list(scenario_ids)
        if not self.ids:
            raise UsageError("no training scenarios")
        self.masks = np.stack([dataset.scenarios[i].mask for i in self.ids]).astype(np.float32)

        free = [dataset.grids[i].free_points for i in self.ids]
        col = [dataset.grids[i].collision_points for i in self.ids]
        self.free_all = np.concatenate(free)
        self.free_counts = np.array([len(f) for f in free])
        self.free_offsets = np.concatenate([[0], np.cumsum(self.free_counts)[:-1]])
        self.col_all = np.concatenate(col) if any(len(c) for c in col) else np.zeros((0, 2), np.float32)
        self.col_counts = np.array([len(c) for c in col])
        self.col_offsets = np.concatenate([[0], np.cumsum(self.col_counts)[:-1]])
        self.col_scenarios = np.flatnonzero(self.col_counts > 0)
        if np.any(self.free_counts == 0):
            raise UsageError("every training scenario needs at least one collision-free point")

    @property
    def free_total(self) -> int:
        return int(self.free_counts.sum())

    def sample(self, batch_size: int) -> Batch:
        rng = self.rng
        s = rng.integers(0, len(self.ids), batch_size)
        pick = self.free_offsets[s] + (rng.random(batch_size) * self.free_counts[s]).astype(int)
        z = rng.random((batch_size, LATENT_DIM)).astype(np.float32)

        if len(self.col_scenarios):
            cs = self.col_scenarios[rng.integers(0, len(self.col_scenarios), batch_size)]
            cpick = self.col_offsets[cs] + (rng.random(batch_size) * self.col_counts[cs]).astype(int)
            collision, collision_masks = self.col_all[cpick], self.masks[cs]
        else:
            collision = np.zeros((0, 2), np.float32)
            collision_masks = np.zeros((0,) + self.masks.shape[1:], np.float32)

        return Batch(real=self.free_all[pick], masks=self.masks[s], z=z,
                     collision=collision, collision_masks=collision_masks)


@dataclass
class TrainingResult:
    generator: Generator
    discriminator: Discriminator
    log: pd.DataFrame
    arch: ArchConfig
    config: TrainConfig
    metadata: Dict = field(default_factory=dict)


def model_tensors(G: Generator, D: Discriminator) -> Dict[str, np.ndarray]:
    tensors = G.state_dict()
    tensors.update(D.state_dict())
    return tensors


def save_models(path: str, G: Generator, D: Discriminator, arch: ArchConfig, metadata: Dict,
                optimizers: Optional[Tuple[Adam, Adam]] = None):
    meta = {**metadata, 'arch': asdict(arch)}
    optimizer_state, step = None, 0
    if optimizers is not None:
        g_opt, d_opt = optimizers
        optimizer_state = {f"g.{k}": v for k, v in g_opt.state_dict().items()}
        optimizer_state.update({f"d.{k}": v for k, v in d_opt.state_dict().items()})
        step = g_opt.t
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    save_checkpoint(path, model_tensors(G, D), meta, optimizer_state, step)


def load_models(path: str) -> Tuple[Generator, Discriminator, Dict]:
    tensors, metadata, _, _ = load_checkpoint(path)
    if 'arch' not in metadata:
        raise ModelError(f"{path}: checkpoint has no architecture record")
    arch = ArchConfig.from_dict(metadata['arch'])
    rng = np.random.default_rng(0)
    G = Generator(arch, rng)
    D = Discriminator(arch, rng)
    G.load_state_dict(tensors)
    D.load_state_dict(tensors)
    G.set_training(False)
    D.set_training(False)
    return G, D, metadata


def load_generator(path: str) -> Generator:
    return load_models(path)[0]


def generate(G: Optional[Generator], z: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Normalized joint angles for latent point(s) ``z`` under condition ``mask``."""
    if G is None:
        raise ModelError("no generator loaded")
    z = np.asarray(z, dtype=np.float64)
    if np.any(z < 0.0) or np.any(z > 1.0):
        raise RangeError("latent points must lie in [0,1]^2")
    out = G.generate_batch(z, mask)
    return out[0] if z.ndim == 1 else out


class CGANTrainer:
    """Alternating D/G training, deterministic for a given seed."""

    def __init__(self, dataset: LabeledDataset, train_ids: Sequence[int], train_config: TrainConfig,
                 arch: Optional[ArchConfig] = None, checkpoint_path: Optional[str] = None,
                 metadata: Optional[Dict] = None):
        self.dataset = dataset
        self.train_ids = list(train_ids)
        self.cfg = train_config.check()
        self.arch = arch or ArchConfig()
        self.checkpoint_path = checkpoint_path
        self.metadata = metadata or {}

        self.rng = np.random.default_rng(self.cfg.seed)
        self.G = Generator(self.arch, self.rng)
        self.D = Discriminator(self.arch, self.rng)
        opt = dict(lr=self.cfg.learning_rate, beta1=self.cfg.beta1, beta2=self.cfg.beta2, eps=self.cfg.eps)
        self.g_opt = Adam(**opt)
        self.d_opt = Adam(**opt)
        self.sampler = BatchSampler(dataset, self.train_ids, self.rng)

    def full_pass_steps(self) -> int:
        return max(1, math.ceil(self.sampler.free_total / self.cfg.batch_size))

    def steps_per_epoch(self) -> int:
        return max(1, min(self.cfg.max_steps_per_epoch, self.full_pass_steps()))

    def train_step(self) -> Dict[str, float]:
        batch = self.sampler.sample(self.cfg.batch_size)

        self.G.set_training(True)
        self.D.set_training(True)
        self.D.set_power_iteration(True)
        self.D.set_running_updates(True)
        self.D.zero_grad()
        d_terms = discriminator_objective(self.D, self.G, batch)
        self.d_opt.step(self.D.parameters(), self.D.gradients())

        self.D.set_power_iteration(False)
        self.D.set_running_updates(False)
        self.G.zero_grad()
        g_terms = generator_objective(self.D, self.G, batch, self.cfg.lambda_identity,
                                      self.cfg.lambda_feature_match)
        self.g_opt.step(self.G.parameters(), self.G.gradients())
        return {**d_terms, **g_terms}

    def recalibrate(self):
        """Inference-mode batch-norm statistics from the training masks, one row per scenario."""
        self.G.recalibrate(self.sampler.masks)
        self.D.recalibrate(self.sampler.masks)
        self.G.set_training(False)
        self.D.set_training(False)

    def _abort(self, epoch: int, reason: str):
        if self.checkpoint_path:
            path = f"{self.checkpoint_path}.nan-epoch{epoch}"
            try:
                save_models(path, self.G, self.D, self.arch, {**self.metadata, 'aborted_epoch': epoch})
                logger.error(f"Diagnostic checkpoint written to {path}")
            except Exception as e:
                logger.error(f"Could not write diagnostic checkpoint: {e}")
        raise TrainingError(f"training diverged at epoch {epoch}: {reason}")

    def train(self) -> TrainingResult:
        steps = self.steps_per_epoch()
        logger.info(f"Training on {len(self.train_ids)} scenarios: {self.cfg.epochs} epochs x {steps} steps, "
                    f"batch {self.cfg.batch_size}")
        if steps < self.full_pass_steps():
            logger.warning(f"Epochs capped at {steps} steps by train.max_steps_per_epoch; one pass over "
                           f"{self.sampler.free_total} free points takes {self.full_pass_steps()}")
        rows = []
        start = time.perf_counter()
        for epoch in range(1, self.cfg.epochs + 1):
            totals = {'d_term': 0.0, 'g_term': 0.0, 'collision': 0.0, 'identity': 0.0, 'feature_match': 0.0}
            for _ in range(steps):
                try:
                    terms = self.train_step()
                except ModelError as e:
                    self._abort(epoch, str(e))
                if not all(math.isfinite(v) for v in terms.values()):
                    self._abort(epoch, f"non-finite loss {terms}")
                for key in totals:
                    totals[key] += terms[key] / steps

            rows.append({
                'epoch': epoch,
                'd_loss': totals['d_term'] + totals['collision'],
                'g_loss': totals['g_term'],
                'collision_loss': totals['collision'],
                'identity_loss': totals['identity'],
                'fm_loss': totals['feature_match'],
                'wall_seconds': time.perf_counter() - start,
            })
            if epoch == 1 or epoch % 10 == 0 or epoch == self.cfg.epochs:
                r = rows[-1]
                logger.info(f"Epoch {epoch}: d={r['d_loss']:.4f} g={r['g_loss']:.4f} "
                            f"col={r['collision_loss']:.4f} id={r['identity_loss']:.5f} fm={r['fm_loss']:.5f}")
            if self.checkpoint_path and self.cfg.checkpoint_every and epoch % self.cfg.checkpoint_every == 0 \
                    and epoch != self.cfg.epochs:
                self.recalibrate()
                save_models(f"{self.checkpoint_path}.epoch{epoch:04d}", self.G, self.D, self.arch,
                            {**self.metadata, 'epoch': epoch}, (self.g_opt, self.d_opt))

        self.recalibrate()
        log = pd.DataFrame(rows, columns=LOG_COLUMNS)
        if self.checkpoint_path:
            save_models(self.checkpoint_path, self.G, self.D, self.arch,
                        {**self.metadata, 'epoch': self.cfg.epochs}, (self.g_opt, self.d_opt))
        return TrainingResult(self.G, self.D, log, self.arch, self.cfg, self.metadata)


def train(dataset: LabeledDataset, train_ids: Sequence[int], train_config: TrainConfig,
          arch: Optional[ArchConfig] = None, checkpoint_path: Optional[str] = None,
          metadata: Optional[Dict] = None) -> TrainingResult:
    return CGANTrainer(dataset, train_ids, train_config, arch, checkpoint_path, metadata).train()


def write_training_log(path: str, log: pd.DataFrame, metadata: Dict):
    """CSV training log preceded by '#'-comment lines carrying the reproducibility stamp."""
    with open(path, 'w') as f:
        for key in sorted(metadata):
            f.write(f"# {key}: {metadata[key]}\n")
        log.to_csv(f, index=False, float_format='%.8g')
