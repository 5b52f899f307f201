"""
Tests for the conditional GAN: loss terms, objective gradients, training and checkpoints.
"""

import math

import numpy as np
import pandas as pd
import pytest

from cgan import (LOG_COLUMNS, BatchSampler, CGANTrainer, Discriminator, Generator, TrainConfig,
                  discriminator_objective, generate, generator_objective, load_models, loss_collision,
                  loss_feature_match, loss_gan, loss_identity, save_models, train, write_training_log)
from errors import ModelError, RangeError, TrainingError, UsageError
from neuralnet import gradient_relative_error, numerical_gradient, save_checkpoint

LOG2 = math.log(2.0)


class _ShiftGenerator:
    def __init__(self, shift):
        self.shift = shift

    def forward(self, z, masks):
        return np.asarray(z, dtype=np.float64) + self.shift


class _FeatureDiscriminator:
    """Logit 0 everywhere; features are the inputs themselves."""

    def __init__(self):
        self.features = None

    def forward(self, theta, masks):
        self.features = np.asarray(theta, dtype=np.float64)
        return np.zeros(len(theta))


def _zero_head(D):
    head = D.head.layers[0]
    head.sn = None
    head.params['W'][:] = 0.0
    head.params['b'][:] = 0.0


def _float64_pair(arch, seed=0):
    rng = np.random.default_rng(seed)
    G = Generator(arch, rng).astype(np.float64)
    D = Discriminator(arch, rng).astype(np.float64)
    return G, D


def _freeze_spectral_norm(D, batch):
    """One forward to settle the power-iteration vectors, then hold them fixed."""
    D.forward(batch.real, batch.masks)
    D.set_power_iteration(False)
    D.set_running_updates(False)


# ---------------------------------------------------------------------------
# Loss terms
# ---------------------------------------------------------------------------

def test_losses_at_half_probability(tiny_arch, tiny_batch):
    G, D = _float64_pair(tiny_arch)
    _zero_head(D)
    d_term, g_term = loss_gan(D, G, tiny_batch.real, tiny_batch.masks, tiny_batch.z)
    assert d_term == pytest.approx(2 * LOG2)
    assert g_term == pytest.approx(LOG2)
    assert loss_collision(D, tiny_batch.collision, tiny_batch.collision_masks) == pytest.approx(LOG2)
    assert loss_collision(D, np.zeros((0, 2)), np.zeros((0, 8, 6))) == 0.0


def test_identity_and_feature_match_closed_form():
    real = np.array([[0.1, 0.2], [0.5, 0.5], [0.9, 0.4]])
    masks = np.zeros((3, 8, 6))
    assert loss_identity(_ShiftGenerator(0.0), real, masks) == 0.0
    assert loss_identity(_ShiftGenerator(0.1), real, masks) == pytest.approx(0.02)

    D = _FeatureDiscriminator()
    fake = real + np.array([0.3, -0.4])
    assert loss_feature_match(D, real, masks, fake, masks) == pytest.approx(0.25)
    assert loss_feature_match(D, real, masks, real[::-1], masks) == pytest.approx(0.0)
    with pytest.raises(UsageError):
        loss_feature_match(D, real[:0], masks[:0], fake, masks)


def test_objectives_compose_their_terms(tiny_arch, tiny_batch):
    G, D = _float64_pair(tiny_arch, seed=1)
    G.set_training(False)
    D.set_training(False)
    _freeze_spectral_norm(D, tiny_batch)
    b = tiny_batch

    d = discriminator_objective(D, G, b, backward=False)
    d_term, g_term = loss_gan(D, G, b.real, b.masks, b.z)
    assert d['d_term'] == pytest.approx(d_term, rel=1e-10)
    assert d['collision'] == pytest.approx(loss_collision(D, b.collision, b.collision_masks), rel=1e-10)
    assert d['d_total'] == pytest.approx(d['d_term'] + d['collision'])

    g = generator_objective(D, G, b, 10.0, 1.0, backward=False)
    assert g['g_term'] == pytest.approx(g_term, rel=1e-10)
    assert g['identity'] == pytest.approx(loss_identity(G, b.real, b.masks), rel=1e-10)
    fake = G.forward(b.z, b.masks)
    assert g['feature_match'] == pytest.approx(loss_feature_match(D, b.real, b.masks, fake, b.masks), rel=1e-8)
    assert g['g_total'] == pytest.approx(g['g_term'] + 10.0 * g['identity'] + g['feature_match'])


# ---------------------------------------------------------------------------
# Gradients
# ---------------------------------------------------------------------------

D_PARAMS = ['discriminator.head.0.W', 'discriminator.body.2.W', 'discriminator.body.0.b',
            'discriminator.cond.0.W', 'discriminator.cond.1.gamma', 'discriminator.cond.7.W']
G_PARAMS = ['generator.trunk.4.W', 'generator.trunk.0.W', 'generator.trunk.2.b',
            'generator.cond.0.W', 'generator.cond.4.beta', 'generator.cond.7.b']


def test_discriminator_objective_gradients(tiny_arch, tiny_batch):
    G, D = _float64_pair(tiny_arch, seed=2)
    G.set_training(True)
    D.set_training(True)
    _freeze_spectral_norm(D, tiny_batch)

    D.zero_grad()
    discriminator_objective(D, G, tiny_batch)
    analytic = {k: v.copy() for k, v in D.gradients().items()}
    params = D.parameters()

    def objective():
        return discriminator_objective(D, G, tiny_batch, backward=False)['d_total']

    for name in D_PARAMS:
        numeric = numerical_gradient(objective, params[name], 1e-5)
        assert gradient_relative_error(analytic[name], numeric) < 1e-4, name


def test_generator_objective_gradients(tiny_arch, tiny_batch):
    G, D = _float64_pair(tiny_arch, seed=3)
    G.set_training(True)
    D.set_training(True)
    _freeze_spectral_norm(D, tiny_batch)

    G.zero_grad()
    generator_objective(D, G, tiny_batch, 10.0, 1.0)
    analytic = {k: v.copy() for k, v in G.gradients().items()}
    assert all(not np.any(g) for g in D.gradients().values())
    params = G.parameters()

    def objective():
        return generator_objective(D, G, tiny_batch, 10.0, 1.0, backward=False)['g_total']

    for name in G_PARAMS:
        numeric = numerical_gradient(objective, params[name], 1e-5)
        assert gradient_relative_error(analytic[name], numeric) < 1e-4, name


def test_objective_without_collision_samples(tiny_arch, tiny_batch):
    G, D = _float64_pair(tiny_arch, seed=4)
    tiny_batch.collision = np.zeros((0, 2))
    tiny_batch.collision_masks = np.zeros((0, 8, 6))
    D.zero_grad()
    terms = discriminator_objective(D, G, tiny_batch)
    assert terms['collision'] == 0.0
    assert terms['d_total'] == terms['d_term']


# ---------------------------------------------------------------------------
# Inference and checkpoints
# ---------------------------------------------------------------------------

def test_generate_single_and_batched(small_arch, small_scenarios):
    G = Generator(small_arch, np.random.default_rng(0))
    mask = small_scenarios[2].mask
    z = np.random.default_rng(1).random((5, 2))
    batched = generate(G, z, mask)
    assert batched.shape == (5, 2)
    assert np.all((batched > 0.0) & (batched < 1.0))
    for k in range(5):
        assert np.allclose(generate(G, z[k], mask), batched[k], atol=1e-6)


def test_generate_rejects_bad_input(small_arch, small_scenarios):
    G = Generator(small_arch, np.random.default_rng(0))
    with pytest.raises(RangeError):
        generate(G, np.array([1.2, 0.5]), small_scenarios[0].mask)
    with pytest.raises(ModelError):
        generate(None, np.array([0.5, 0.5]), small_scenarios[0].mask)


def test_checkpoint_round_trip(tmp_path, small_arch, small_scenarios):
    rng = np.random.default_rng(5)
    G, D = Generator(small_arch, rng), Discriminator(small_arch, rng)
    z = rng.random((4, 2))
    mask = small_scenarios[1].mask
    D.forward(z, np.repeat(mask[None], 4, axis=0))
    G.set_training(False)
    D.set_training(False)

    path = tmp_path / "model.ckpt"
    save_models(str(path), G, D, small_arch, {'fold': 2, 'seed': 5})
    G2, D2, meta = load_models(str(path))
    assert meta['fold'] == 2
    assert meta['arch']['hidden'] == small_arch.hidden
    assert np.array_equal(G2.generate_batch(z, mask), G.generate_batch(z, mask))
    masks = np.repeat(mask[None], 4, axis=0)
    assert np.allclose(D2.predict(z, masks), D.predict(z, masks), atol=1e-6)


def test_checkpoint_without_arch_is_rejected(tmp_path):
    path = tmp_path / "bare.ckpt"
    save_checkpoint(str(path), {'x': np.zeros(1, np.float32)}, {})
    with pytest.raises(ModelError):
        load_models(str(path))


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

def test_train_config_checks():
    with pytest.raises(UsageError):
        TrainConfig(batch_size=1).check()
    with pytest.raises(UsageError):
        TrainConfig(lambda_identity=-1.0).check()
    with pytest.raises(UsageError):
        TrainConfig(epochs=0).check()


def test_batch_sampler_balances_collision_samples(small_dataset):
    ids = small_dataset.fold(0).train_ids
    sampler = BatchSampler(small_dataset, ids, np.random.default_rng(0))
    batch = sampler.sample(16)
    assert batch.real.shape == (16, 2)
    assert batch.collision.shape == (16, 2)
    assert batch.masks.shape == (16, 32, 24)
    # the empty condition has no collision points, so it never conditions a collision sample
    assert all(m.any() for m in batch.collision_masks)

    free_only = BatchSampler(small_dataset, [0], np.random.default_rng(0))
    assert free_only.free_total == 1110
    assert len(free_only.sample(8).collision) == 0


def test_steps_per_epoch(small_dataset, small_arch):
    trainer = CGANTrainer(small_dataset, [0], TrainConfig(batch_size=64, max_steps_per_epoch=50), small_arch)
    assert trainer.steps_per_epoch() == 18
    trainer = CGANTrainer(small_dataset, [0], TrainConfig(batch_size=64, max_steps_per_epoch=5), small_arch)
    assert trainer.steps_per_epoch() == 5


def test_training_is_deterministic(small_dataset, small_arch):
    cfg = TrainConfig(epochs=2, batch_size=8, max_steps_per_epoch=3, seed=11)
    ids = small_dataset.fold(1).train_ids
    first = train(small_dataset, ids, cfg, small_arch)
    second = train(small_dataset, ids, cfg, small_arch)
    losses = LOG_COLUMNS[:-1]
    assert list(first.log.columns) == LOG_COLUMNS
    pd.testing.assert_frame_equal(first.log[losses], second.log[losses])

    other = train(small_dataset, ids, TrainConfig(epochs=2, batch_size=8, max_steps_per_epoch=3, seed=12),
                  small_arch)
    assert not np.allclose(other.log['d_loss'], first.log['d_loss'])


def test_identity_term_decreases_on_free_condition(small_dataset, small_arch):
    cfg = TrainConfig(epochs=25, batch_size=32, max_steps_per_epoch=20, learning_rate=1e-3, seed=0,
                      checkpoint_every=0)
    result = train(small_dataset, [0], cfg, small_arch)
    identity = result.log['identity_loss']
    assert identity.iloc[-1] < 0.75 * identity.iloc[0]
    assert np.all(np.isfinite(result.log[LOG_COLUMNS].to_numpy()))


def test_inference_matches_training_on_a_single_mask(small_dataset, small_arch):
    cfg = TrainConfig(epochs=3, batch_size=16, max_steps_per_epoch=10, learning_rate=1e-3, seed=0,
                      checkpoint_every=0)
    G = train(small_dataset, [0], cfg, small_arch).generator
    mask = small_dataset.scenarios[0].mask
    z = np.random.default_rng(1).random((16, 2))

    inferred = G.generate_batch(z, mask)
    G.set_training(True)
    G.cond.set_running_updates(False)
    trained = G.forward(z, np.repeat(mask[None], len(z), axis=0))
    G.set_training(False)
    assert np.abs(inferred - trained).max() < 1e-3


def test_recalibrate_uses_exact_mask_statistics(small_arch, small_scenarios):
    G = Generator(small_arch, np.random.default_rng(0))
    masks = np.stack([s.mask for s in small_scenarios]).astype(np.float32)
    G.recalibrate(masks)
    conv, norm = G.cond.layers[0], G.cond.layers[1]
    conv.training = False
    out = conv.forward(masks[:, None])
    assert norm.buffers['running_mean'] == pytest.approx(out.mean(axis=(0, 2, 3)), abs=1e-6)
    assert norm.buffers['running_var'] == pytest.approx(out.var(axis=(0, 2, 3)), abs=1e-6)
    assert not norm.training


def test_capped_epochs_are_logged(small_dataset, small_arch, caplog):
    cfg = TrainConfig(epochs=1, batch_size=8, max_steps_per_epoch=2, checkpoint_every=0)
    with caplog.at_level('WARNING'):
        train(small_dataset, [0], cfg, small_arch)
    assert 'capped at 2 steps' in caplog.text
    assert '1110 free points takes 139' in caplog.text


def test_training_writes_checkpoints_and_log(tmp_path, small_dataset, small_arch, metadata):
    ckpt = tmp_path / "fold0.ckpt"
    cfg = TrainConfig(epochs=2, batch_size=8, max_steps_per_epoch=2, checkpoint_every=1)
    result = train(small_dataset, small_dataset.fold(0).train_ids, cfg, small_arch, str(ckpt), metadata)
    assert ckpt.exists()
    assert (tmp_path / "fold0.ckpt.epoch0001").exists()
    assert load_models(str(ckpt))[2]['epoch'] == 2

    log_path = tmp_path / "train.csv"
    write_training_log(str(log_path), result.log, metadata)
    assert log_path.read_text().startswith("# config_hash:")
    log = pd.read_csv(log_path, comment='#')
    assert list(log.columns) == LOG_COLUMNS
    assert log['epoch'].tolist() == [1, 2]


def test_divergence_aborts_with_diagnostic_checkpoint(tmp_path, small_dataset, small_arch):
    ckpt = tmp_path / "fold0.ckpt"
    trainer = CGANTrainer(small_dataset, [0], TrainConfig(epochs=3, batch_size=8, max_steps_per_epoch=1),
                          small_arch, str(ckpt))
    trainer.train_step = lambda: {'d_term': float('nan'), 'g_term': 0.0, 'collision': 0.0,
                                  'identity': 0.0, 'feature_match': 0.0}
    with pytest.raises(TrainingError):
        trainer.train()
    assert (tmp_path / "fold0.ckpt.nan-epoch1").exists()
    assert not ckpt.exists()
