"""Cyclic adversarial training.

Each step runs up to three optimizer updates in a fixed order: the
discriminator on its real/fake classification loss, then the generator on
the forward-cycle loss (adversarial class-targeting + reconstruction + KL),
then the generator again on the backward-cycle loss (latent agreement
between an image and its class-swapped synthesis, plus reconstruction back
through the swap). A loss term whose weight is zero is skipped entirely,
including its random draws.
"""

import io
import struct
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import model as model_mod
from . import nn, rng
from .config import TrainConfig, parse_config, serialize_config
from .serialize import (
    FormatError,
    expect_eof,
    read_array_blocks,
    read_exact,
    read_u64_section,
    write_array_blocks,
    write_u64_section,
)

CHECKPOINT_MAGIC = b"CYCC"
CHECKPOINT_VERSION = 1

METRIC_COLUMNS = (
    "loss_d",
    "loss_g_adv",
    "loss_g_rec",
    "loss_g_kl",
    "loss_bw_z",
    "loss_bw_x",
)
CSV_HEADER = "epoch,step," + ",".join(METRIC_COLUMNS)


def sample_code(gen, n_s):
    """Uniform class label in {0, ..., n_s - 1}."""
    if n_s < 1:
        raise ValueError("n_s must be >= 1")
    return int(gen.integers(n_s))


def sample_code_excluding(gen, n_s, y):
    """Uniform label over the n_s - 1 classes other than y."""
    if n_s < 2:
        raise ValueError("excluding a class requires n_s >= 2")
    r = int(gen.integers(n_s - 1))
    return r + 1 if r >= y else r


def _sample_codes(gen, n_s, size):
    return gen.integers(n_s, size=size)


def _sample_codes_excluding(gen, n_s, ys):
    if n_s < 2:
        raise ValueError("excluding a class requires n_s >= 2")
    r = gen.integers(n_s - 1, size=ys.shape[0])
    return r + (r >= ys)


def _zero_scalar():
    return ad.constant(np.zeros((), dtype=np.float32))


def _weighted_total(terms):
    total = None
    for term in terms:
        total = term if total is None else ad.add(total, term)
    return total if total is not None else _zero_scalar()


def discriminator_loss(models, cfg, x, y, y_fake):
    """Quantity minimized by the discriminator: classify real images by
    label, synthesized images as the extra fake class. The synthesized batch
    is detached, so the generator receives no gradient here."""
    x_node = ad.constant(x)
    comps = {"loss_d": 0.0}
    terms = []
    if cfg.lambda_d1 != 0.0:
        real_ce = ad.softmax_cross_entropy(model_mod.discriminate(models, x_node), y)
        terms.append(ad.scalar_mul(real_ce, cfg.lambda_d1))
    if cfg.lambda_d2 != 0.0:
        latent = model_mod.encode(models, x_node, "deterministic")
        fake = model_mod.decode(models, latent.z, model_mod.codes_matrix(y_fake, models.n_s))
        fake_logits = model_mod.discriminate(models, ad.detach(fake))
        fake_targets = np.full(x.shape[0], models.n_s, dtype=np.int64)
        fake_ce = ad.softmax_cross_entropy(fake_logits, fake_targets)
        terms.append(ad.scalar_mul(fake_ce, cfg.lambda_d2))
    loss = _weighted_total(terms)
    comps["loss_d"] = float(loss.value)
    return loss, comps


def forward_generator_loss(models, cfg, x, y, y_fake, reparam_gen):
    """Forward-cycle generator loss: fool the discriminator into the drawn
    class, reconstruct the input under its own class code, and keep the
    posterior near the prior. One stochastic encoding is shared by both
    decoder passes; the discriminator parameters receive no gradient."""
    x_node = ad.constant(x)
    comps = dict.fromkeys(("loss_g_adv", "loss_g_rec", "loss_g_kl"), 0.0)
    terms = []
    if cfg.lambda_g1 or cfg.lambda_g2 or cfg.lambda_g3:
        latent = model_mod.encode(models, x_node, "stochastic", reparam_gen)
        if cfg.lambda_g1 != 0.0:
            synth = model_mod.decode(
                models, latent.z, model_mod.codes_matrix(y_fake, models.n_s)
            )
            adv = ad.softmax_cross_entropy(model_mod.discriminate(models, synth), y_fake)
            term = ad.scalar_mul(adv, cfg.lambda_g1)
            comps["loss_g_adv"] = float(term.value)
            terms.append(term)
        if cfg.lambda_g2 != 0.0:
            recon = model_mod.decode(models, latent.z, model_mod.codes_matrix(y, models.n_s))
            term = ad.scalar_mul(ad.mse(x_node, recon), cfg.lambda_g2)
            comps["loss_g_rec"] = float(term.value)
            terms.append(term)
        if cfg.lambda_g3 != 0.0:
            term = ad.scalar_mul(nn.gaussian_kl(latent.mu, latent.logvar), cfg.lambda_g3)
            comps["loss_g_kl"] = float(term.value)
            terms.append(term)
    return _weighted_total(terms), comps


def backward_cycle_loss(models, cfg, x, y, codes_gen, reparam_gen, y_swap=None):
    """Backward-cycle generator loss on a class-swapped synthesis x'' of x:
    an L1 penalty between the encoding means of x and x'', and a pixel
    reconstruction of x decoded from x'' under the true class code. The
    whole composite is differentiated into encoder and decoder."""
    comps = {"loss_bw_z": 0.0, "loss_bw_x": 0.0}
    use_z = cfg.enable_z_cycle and cfg.lambda_bw1 != 0.0
    use_x = cfg.enable_x_cycle and cfg.lambda_bw2 != 0.0
    if not (use_z or use_x):
        return _zero_scalar(), comps
    if models.n_s < 2:
        raise ValueError("the backward cycle needs at least two classes")
    y = np.asarray(y, dtype=np.int64)
    if y_swap is None:
        y_swap = _sample_codes_excluding(codes_gen, models.n_s, y)
    x_node = ad.constant(x)
    first = model_mod.encode(models, x_node, "stochastic", reparam_gen)
    swapped = model_mod.decode(
        models, first.z, model_mod.codes_matrix(y_swap, models.n_s)
    )
    second = model_mod.encode(models, swapped, "stochastic", reparam_gen)
    terms = []
    if use_z:
        term = ad.scalar_mul(ad.l1(first.mu, second.mu), cfg.lambda_bw1)
        comps["loss_bw_z"] = float(term.value)
        terms.append(term)
    if use_x:
        back = model_mod.decode(models, second.z, model_mod.codes_matrix(y, models.n_s))
        term = ad.scalar_mul(ad.mse(x_node, back), cfg.lambda_bw2)
        comps["loss_bw_x"] = float(term.value)
        terms.append(term)
    return _weighted_total(terms), comps


def train_step(models, opt_g, opt_d, x, y, cfg, codes_gen, reparam_gen):
    """One batch: discriminator update, forward-cycle generator update, and
    (when enabled) backward-cycle generator update, in that order."""
    metrics = dict.fromkeys(METRIC_COLUMNS, 0.0)
    gen_params = models.generator_parameters()
    dis_params = models.discriminator_parameters()

    if cfg.lambda_d1 or cfg.lambda_d2:
        y_fake = _sample_codes(codes_gen, models.n_s, x.shape[0]) if cfg.lambda_d2 else None
        loss, comps = discriminator_loss(models, cfg, x, y, y_fake)
        ad.backward(loss, wrt=dis_params)
        opt_d.step()
        metrics.update(comps)

    if cfg.lambda_g1 or cfg.lambda_g2 or cfg.lambda_g3:
        y_fake = _sample_codes(codes_gen, models.n_s, x.shape[0]) if cfg.lambda_g1 else None
        loss, comps = forward_generator_loss(models, cfg, x, y, y_fake, reparam_gen)
        ad.backward(loss, wrt=gen_params)
        opt_g.step()
        metrics.update(comps)

    bw_active = cfg.enable_backward_cycle and (
        (cfg.enable_z_cycle and cfg.lambda_bw1) or (cfg.enable_x_cycle and cfg.lambda_bw2)
    )
    if bw_active:
        loss, comps = backward_cycle_loss(models, cfg, x, y, codes_gen, reparam_gen)
        ad.backward(loss, wrt=gen_params)
        opt_g.step()
        metrics.update(comps)

    return metrics


@dataclass
class Checkpoint:
    models: model_mod.ModelSet
    opt_g: nn.Adam
    opt_d: nn.Adam
    epoch: int  # completed epochs
    config: TrainConfig
    streams: dict  # live generators: data, codes, reparam


def _fresh_state(cfg):
    models = model_mod.build_models(
        d_z=cfg.latent_dim, n_s=cfg.n_classes, side=cfg.side, seed=rng.stream(cfg.seed_init)
    )
    opt_g = nn.Adam(models.generator_parameters(), cfg.lr, cfg.beta1, cfg.beta2)
    opt_d = nn.Adam(models.discriminator_parameters(), cfg.lr, cfg.beta1, cfg.beta2)
    streams = {
        "data": rng.stream(cfg.seed_data),
        "codes": rng.stream(cfg.seed_codes),
        "reparam": rng.stream(cfg.seed_reparam),
    }
    return Checkpoint(models, opt_g, opt_d, 0, cfg, streams)


def _check_resumable(cfg, ckpt):
    old, new = vars(ckpt.config).copy(), vars(cfg).copy()
    old.pop("epochs")
    new.pop("epochs")
    if old != new:
        raise ValueError("resume config differs from the checkpoint's (beyond epochs)")


def train(dataset, cfg, resume=None):
    """Run cfg.epochs epochs over the dataset (seeded reshuffle each epoch,
    partial trailing batch dropped); returns the final checkpoint and one
    metrics row per step."""
    cfg.validate()
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    if dataset.n_s != cfg.n_classes or dataset.side != cfg.side:
        raise ValueError(
            f"dataset geometry ({dataset.n_s} classes, side {dataset.side}) does not "
            f"match config ({cfg.n_classes}, {cfg.side})"
        )
    if cfg.batch_size > len(dataset):
        raise ValueError("batch_size exceeds dataset size")

    if resume is not None:
        _check_resumable(cfg, resume)
        state = Checkpoint(
            resume.models, resume.opt_g, resume.opt_d, resume.epoch, cfg, resume.streams
        )
    else:
        state = _fresh_state(cfg)

    x_all = dataset.flat_images()
    y_all = np.asarray(dataset.labels, dtype=np.int64)
    n = len(dataset)
    steps_per_epoch = n // cfg.batch_size

    rows = []
    step = state.epoch * steps_per_epoch
    for epoch in range(state.epoch, cfg.epochs):
        perm = state.streams["data"].permutation(n)
        for s in range(steps_per_epoch):
            idx = perm[s * cfg.batch_size : (s + 1) * cfg.batch_size]
            metrics = train_step(
                state.models,
                state.opt_g,
                state.opt_d,
                x_all[idx],
                y_all[idx],
                cfg,
                state.streams["codes"],
                state.streams["reparam"],
            )
            rows.append({"epoch": epoch, "step": step, **metrics})
            step += 1
        state.epoch = epoch + 1
    return state, rows


def _moment_arrays(ckpt):
    out = {}
    for opt in (ckpt.opt_g, ckpt.opt_d):
        for p in opt.params:
            out[f"{p.name}.adam_m"] = opt.m[id(p)]
            out[f"{p.name}.adam_v"] = opt.v[id(p)]
    return out


def save_checkpoint(path, ckpt):
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<II", CHECKPOINT_VERSION, ckpt.epoch))
    arrays = ckpt.models.named_arrays()
    arrays.update(_moment_arrays(ckpt))
    write_array_blocks(buf, arrays)
    cfg_text = serialize_config(ckpt.config).encode("utf-8")
    buf.write(struct.pack("<I", len(cfg_text)))
    buf.write(cfg_text)
    u64s = {"opt.steps": np.array([ckpt.opt_d.t, ckpt.opt_g.t], dtype=np.uint64)}
    for name, gen in ckpt.streams.items():
        for part, arr in rng.state_arrays(gen).items():
            u64s[f"rng.{name}.{part}"] = arr
    write_u64_section(buf, u64s)
    with open(path, "wb") as f:
        f.write(buf.getvalue())


def _restore_stream(u64s, name):
    parts = {}
    for part in ("counter", "key", "buffer", "misc"):
        key = f"rng.{name}.{part}"
        if key not in u64s:
            raise FormatError(f"checkpoint is missing RNG state {key}")
        parts[part] = u64s[key]
    return rng.restore(parts)


def load_checkpoint(path):
    with open(path, "rb") as f:
        magic = read_exact(f, 4)
        if magic != CHECKPOINT_MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {CHECKPOINT_MAGIC!r}")
        version, epoch = struct.unpack("<II", read_exact(f, 8))
        if version != CHECKPOINT_VERSION:
            raise FormatError(f"unsupported checkpoint version {version}")
        arrays = read_array_blocks(f)
        (cfg_len,) = struct.unpack("<I", read_exact(f, 4))
        cfg = parse_config(read_exact(f, cfg_len).decode("utf-8"))
        u64s = read_u64_section(f)
        expect_eof(f, "checkpoint")

    params = {k: v for k, v in arrays.items() if not k.endswith((".adam_m", ".adam_v"))}
    models = model_mod.models_from_arrays(params)
    opt_g = nn.Adam(models.generator_parameters(), cfg.lr, cfg.beta1, cfg.beta2)
    opt_d = nn.Adam(models.discriminator_parameters(), cfg.lr, cfg.beta1, cfg.beta2)
    if "opt.steps" not in u64s or u64s["opt.steps"].size != 2:
        raise FormatError("checkpoint is missing optimizer step counters")
    opt_d.t, opt_g.t = (int(v) for v in u64s["opt.steps"])
    for opt in (opt_g, opt_d):
        for p in opt.params:
            try:
                opt.m[id(p)][:] = arrays[f"{p.name}.adam_m"].reshape(p.value.shape)
                opt.v[id(p)][:] = arrays[f"{p.name}.adam_v"].reshape(p.value.shape)
            except KeyError as exc:
                raise FormatError(f"checkpoint is missing moment array {exc}") from None
    streams = {name: _restore_stream(u64s, name) for name in ("data", "codes", "reparam")}
    return Checkpoint(models, opt_g, opt_d, epoch, cfg, streams)


def write_metrics_csv(path, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(CSV_HEADER + "\n")
        for r in rows:
            vals = ",".join(format(r[c], ".8g") for c in METRIC_COLUMNS)
            f.write(f"{r['epoch']},{r['step']},{vals}\n")
