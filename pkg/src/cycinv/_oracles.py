"""Hand-evaluated references for the three training losses.

These re-derive each loss from the raw parameter arrays in float64 NumPy
with no use of the autodiff engine or the kernel backends, so a bug in
either cannot hide. Models are one-pixel, single-layer, batch 1.
"""

import numpy as np

from . import model as model_mod
from . import rng, train
from .config import TrainConfig

_TOL = 1e-5


def _sigmoid(t):
    return 1.0 / (1.0 + np.exp(-t))


def _log_softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _layer(mlp, i):
    return (
        mlp.layers[i].weight.value.astype(np.float64),
        mlp.layers[i].bias.value.astype(np.float64),
    )


def _encode64(models, x):
    w, b = _layer(models.encoder, 0)
    head = x @ w + b
    d = models.d_z
    return head[:, :d], head[:, d : 2 * d]


def _decode64(models, z, code):
    w, b = _layer(models.decoder, 0)
    return _sigmoid(np.concatenate([z, code], axis=1) @ w + b)


def _discriminate64(models, x):
    w, b = _layer(models.discriminator, 0)
    return x @ w + b


def _tiny_setup():
    models = model_mod.build_models(d_z=1, n_s=2, side=1, seed=321, hidden=())
    x = np.array([[0.6]], dtype=np.float32)
    y = np.array([0], dtype=np.int64)
    y_fake = np.array([1], dtype=np.int64)
    cfg = TrainConfig(
        lambda_g1=0.7,
        lambda_g2=2.5,
        lambda_g3=0.3,
        lambda_d1=1.1,
        lambda_d2=0.9,
        lambda_bw1=1.3,
        lambda_bw2=2.0,
        latent_dim=1,
        side=1,
        n_classes=2,
        batch_size=1,
    )
    return models, cfg, x, y, y_fake


def _one_hot64(labels, n_s):
    return np.eye(n_s, dtype=np.float64)[labels]


def run_loss_oracles():
    from .selfcheck import CheckResult

    models, cfg, x, y, y_fake = _tiny_setup()
    x64 = x.astype(np.float64)
    results = []

    # Discriminator loss: -l1 * log D_y(x) - l2 * log D_fake(G(x, c(y')))
    loss, _ = train.discriminator_loss(models, cfg, x, y, y_fake)
    mu, _lv = _encode64(models, x64)
    fake = _decode64(models, mu, _one_hot64(y_fake, 2))
    want = -cfg.lambda_d1 * _log_softmax(_discriminate64(models, x64))[0, y[0]]
    want += -cfg.lambda_d2 * _log_softmax(_discriminate64(models, fake))[0, 2]
    diff = abs(float(loss.value) - want)
    results.append(
        CheckResult("oracle.discriminator_loss", diff <= _TOL, f"|diff| = {diff:.2e}")
    )

    # Forward generator loss: -l1 * log D_y'(G(x, c(y'))) + l2 * ||x - G(x, c(y))||^2
    #                         + l3 * KL(p(z|x) || N(0, I)), one shared encoding
    seed = 777
    loss, _ = train.forward_generator_loss(models, cfg, x, y, y_fake, rng.stream(seed))
    eps = rng.stream(seed).standard_normal((1, 1), dtype=np.float32).astype(np.float64)
    mu, lv = _encode64(models, x64)
    z = mu + np.exp(0.5 * lv) * eps
    adv = -_log_softmax(_discriminate64(models, _decode64(models, z, _one_hot64(y_fake, 2))))[
        0, y_fake[0]
    ]
    rec = float(((x64 - _decode64(models, z, _one_hot64(y, 2))) ** 2).sum())
    kl = 0.5 * float((mu**2 + np.exp(lv) - lv - 1).sum())
    want = cfg.lambda_g1 * adv + cfg.lambda_g2 * rec + cfg.lambda_g3 * kl
    diff = abs(float(loss.value) - want)
    results.append(
        CheckResult("oracle.forward_generator_loss", diff <= _TOL, f"|diff| = {diff:.2e}")
    )

    # Backward cycle loss: l1 * ||mu - mu''||_1 + l2 * ||x - G(x'', c(y))||^2
    seed = 888
    y_swap = np.array([1], dtype=np.int64)
    loss, _ = train.backward_cycle_loss(
        models, cfg, x, y, None, rng.stream(seed), y_swap=y_swap
    )
    replay = rng.stream(seed)
    eps1 = replay.standard_normal((1, 1), dtype=np.float32).astype(np.float64)
    eps2 = replay.standard_normal((1, 1), dtype=np.float32).astype(np.float64)
    mu1, lv1 = _encode64(models, x64)
    z1 = mu1 + np.exp(0.5 * lv1) * eps1
    swapped = _decode64(models, z1, _one_hot64(y_swap, 2))
    mu2, lv2 = _encode64(models, swapped)
    z2 = mu2 + np.exp(0.5 * lv2) * eps2
    zterm = float(np.abs(mu1 - mu2).sum())
    xterm = float(((x64 - _decode64(models, z2, _one_hot64(y, 2))) ** 2).sum())
    want = cfg.lambda_bw1 * zterm + cfg.lambda_bw2 * xterm
    diff = abs(float(loss.value) - want)
    results.append(
        CheckResult("oracle.backward_cycle_loss", diff <= _TOL, f"|diff| = {diff:.2e}")
    )
    return results
