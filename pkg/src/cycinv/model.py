"""The three networks and their composition: encoder, class-conditional
decoder, and a multi-class discriminator whose last class marks synthesized
images. The generator is decode(encode(x), code): conditioning enters only
as a one-hot code concatenated to the latent at the decoder input.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import nn, rng
from .serialize import FormatError, expect_eof, read_array_blocks, write_array_blocks

DEFAULT_HIDDEN = (512, 256)
MODES = ("stochastic", "deterministic")


@dataclass
class ModelSet:
    encoder: nn.Mlp
    decoder: nn.Mlp
    discriminator: nn.Mlp
    d_z: int
    n_s: int
    side: int

    def generator_parameters(self):
        return self.encoder.parameters() + self.decoder.parameters()

    def discriminator_parameters(self):
        return self.discriminator.parameters()

    def named_arrays(self):
        out = {}
        for net in (self.encoder, self.decoder, self.discriminator):
            for p in net.parameters():
                out[p.name] = p.value
        return out


def build_models(d_z=16, n_s=4, side=32, seed=0, hidden=DEFAULT_HIDDEN):
    """Fresh networks; all three are initialized from one init stream in a
    fixed order (encoder, decoder, discriminator)."""
    gen = seed if isinstance(seed, np.random.Generator) else rng.stream(seed)
    pixels = side * side
    hidden = tuple(hidden)
    enc = nn.init_mlp(nn.MlpSpec((pixels, *hidden, 2 * d_z)), gen, name="enc")
    dec = nn.init_mlp(
        nn.MlpSpec((d_z + n_s, *reversed(hidden), pixels), output="sigmoid"),
        gen,
        name="dec",
    )
    dis = nn.init_mlp(nn.MlpSpec((pixels, *hidden, n_s + 1)), gen, name="dis")
    return ModelSet(enc, dec, dis, d_z=d_z, n_s=n_s, side=side)


def one_hot(y, n_s):
    """Unit vector with 1 at index y (labels are 0-based)."""
    y = int(y)
    if not 0 <= y < n_s:
        raise ValueError(f"label {y} out of range for {n_s} classes")
    code = np.zeros(n_s, dtype=np.float32)
    code[y] = 1.0
    return code


def codes_matrix(ys, n_s):
    """Stack of one-hot rows for integer labels ys."""
    ys = np.asarray(ys, dtype=np.int64).reshape(-1)
    if ys.size and (ys.min() < 0 or ys.max() >= n_s):
        raise ValueError(f"labels out of range for {n_s} classes")
    return np.eye(n_s, dtype=np.float32)[ys]


@dataclass
class LatentDist:
    """Encoder output: mean, log-variance, and the latent actually used
    downstream (a reparameterized sample, or mu itself in deterministic mode)."""

    mu: ad.Node
    logvar: ad.Node
    z: ad.Node


def _as_node(x):
    return x if isinstance(x, ad.Node) else ad.constant(x)


def encode(models, x, mode, gen=None):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    x = _as_node(x)
    head = nn.forward_mlp(models.encoder, x)
    mu = ad.slice_cols(head, 0, models.d_z)
    logvar = ad.slice_cols(head, models.d_z, 2 * models.d_z)
    if mode == "stochastic":
        if gen is None:
            raise ValueError("stochastic encoding needs a random stream")
        z = nn.reparameterize(mu, logvar, gen)
    else:
        z = mu
    return LatentDist(mu=mu, logvar=logvar, z=z)


def decode(models, z, codes):
    codes = _as_node(codes)
    if codes.value.ndim != 2 or codes.value.shape[1] != models.n_s:
        raise ValueError(f"expected codes [B, {models.n_s}], got {codes.value.shape}")
    return nn.forward_mlp(models.decoder, ad.concat(z, codes, axis=1))


def discriminate(models, x):
    return nn.forward_mlp(models.discriminator, _as_node(x))


def generate(models, x, y, mode, gen=None):
    """decode(encode(x), one_hot(y)); y may be a single label or one per row."""
    x = _as_node(x)
    b = x.value.shape[0]
    ys = np.full(b, int(y), dtype=np.int64) if np.isscalar(y) else y
    latent = encode(models, x, mode, gen)
    return decode(models, latent.z, codes_matrix(ys, models.n_s))


def save_weights(path, models):
    with open(path, "wb") as f:
        write_array_blocks(f, models.named_arrays())


def _collect_net(named, prefix):
    layers = []
    i = 0
    while f"{prefix}.{i}.weight" in named:
        layers.append((named[f"{prefix}.{i}.weight"], named[f"{prefix}.{i}.bias"]))
        i += 1
    if not layers:
        raise FormatError(f"weights file has no {prefix!r} arrays")
    return layers


def _rebuild_net(layer_arrays, output, name):
    widths = [layer_arrays[0][0].shape[0]] + [w.shape[1] for w, _ in layer_arrays]
    spec = nn.MlpSpec(tuple(widths), output=output)
    layers = [
        nn.DenseLayer(
            ad.Variable(w.copy(), name=f"{name}.{i}.weight"),
            ad.Variable(b.copy(), name=f"{name}.{i}.bias"),
        )
        for i, (w, b) in enumerate(layer_arrays)
    ]
    return nn.Mlp(spec=spec, layers=layers)


def models_from_arrays(named):
    """Reconstruct a ModelSet from the canonical array names; the geometry
    (d_z, n_s, side) is implied by the layer shapes."""
    enc = _rebuild_net(_collect_net(named, "enc"), "linear", "enc")
    dec = _rebuild_net(_collect_net(named, "dec"), "sigmoid", "dec")
    dis = _rebuild_net(_collect_net(named, "dis"), "linear", "dis")
    pixels = enc.spec.widths[0]
    side = math.isqrt(pixels)
    d_z = enc.spec.widths[-1] // 2
    n_s = dis.spec.widths[-1] - 1
    if side * side != pixels or enc.spec.widths[-1] != 2 * d_z:
        raise FormatError("inconsistent encoder geometry in weights file")
    if dec.spec.widths[0] != d_z + n_s or dec.spec.widths[-1] != pixels:
        raise FormatError("decoder geometry does not match encoder/discriminator")
    return ModelSet(enc, dec, dis, d_z=d_z, n_s=n_s, side=side)


def load_weights(path):
    with open(path, "rb") as f:
        named = read_array_blocks(f)
        expect_eof(f, "weights")
    return models_from_arrays(named)
