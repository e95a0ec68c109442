"""Dense layers, He-uniform init, Adam, and the Gaussian-VAE primitives."""

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import backend, rng

OUTPUT_ACTIVATIONS = ("linear", "sigmoid")


@dataclass(frozen=True)
class MlpSpec:
    """Fully-connected network shape: widths[0] inputs through widths[-1] outputs."""

    widths: tuple
    hidden_slope: float = 0.2
    output: str = "linear"

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if len(self.widths) < 2:
            raise ValueError("an MLP needs at least one layer (two widths)")
        if any(w <= 0 for w in self.widths):
            raise ValueError(f"widths must be positive, got {self.widths}")
        if self.output not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"output activation must be one of {OUTPUT_ACTIVATIONS}")


@dataclass
class DenseLayer:
    weight: ad.Variable  # [fan_in, fan_out]
    bias: ad.Variable  # [fan_out]


@dataclass
class Mlp:
    spec: MlpSpec
    layers: list

    def parameters(self):
        out = []
        for layer in self.layers:
            out.append(layer.weight)
            out.append(layer.bias)
        return out


def init_mlp(spec, seed, name="mlp"):
    """He-uniform weights (bound sqrt(6 / fan_in)), zero biases.

    `seed` may be an int or an already-constructed Generator (the init
    stream), so several networks can be initialized from one stream.
    """
    gen = seed if isinstance(seed, np.random.Generator) else rng.stream(seed)
    layers = []
    for i in range(len(spec.widths) - 1):
        fan_in, fan_out = spec.widths[i], spec.widths[i + 1]
        bound = math.sqrt(6.0 / fan_in)
        w = gen.uniform(-bound, bound, size=(fan_in, fan_out)).astype(np.float32)
        b = np.zeros(fan_out, dtype=np.float32)
        layers.append(
            DenseLayer(
                weight=ad.Variable(w, name=f"{name}.{i}.weight"),
                bias=ad.Variable(b, name=f"{name}.{i}.bias"),
            )
        )
    return Mlp(spec=spec, layers=layers)


def forward_mlp(mlp, x):
    """Alternate affine and leaky-relu layers; spec.output applies last."""
    if x.value.ndim != 2 or x.value.shape[1] != mlp.spec.widths[0]:
        raise ValueError(
            f"expected input [B, {mlp.spec.widths[0]}], got {x.value.shape}"
        )
    h = x
    last = len(mlp.layers) - 1
    for i, layer in enumerate(mlp.layers):
        h = ad.bias_add(ad.matmul(h, layer.weight), layer.bias)
        if i < last:
            h = ad.leaky_relu(h, mlp.spec.hidden_slope)
    if mlp.spec.output == "sigmoid":
        h = ad.sigmoid(h)
    return h


class Adam:
    """Adam with bias correction; moments are held per parameter, so the
    update is independent of parameter order."""

    def __init__(self, params, lr=2e-4, beta1=0.5, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self.m = {id(p): np.zeros_like(p.value) for p in self.params}
        self.v = {id(p): np.zeros_like(p.value) for p in self.params}

    def step(self, grads=None):
        """Apply one update; grads defaults to each parameter's .grad
        (missing gradients count as zero)."""
        if grads is None:
            grads = [p.grad for p in self.params]
        if len(grads) != len(self.params):
            raise ValueError("one gradient per parameter required")
        self.t += 1
        k = backend.kernels
        for p, g in zip(self.params, grads):
            if g is None:
                g = np.zeros_like(p.value)
            if g.shape != p.value.shape:
                raise ValueError(f"gradient shape {g.shape} != parameter {p.value.shape}")
            k.adam_update(
                p.value.reshape(-1),
                np.ascontiguousarray(g, dtype=p.value.dtype).reshape(-1),
                self.m[id(p)].reshape(-1),
                self.v[id(p)].reshape(-1),
                self.t,
                self.lr,
                self.beta1,
                self.beta2,
                self.eps,
            )


def gaussian_kl(mu, logvar):
    """KL(N(mu, exp(logvar)) || N(0, I)) in closed form, averaged over the batch."""
    if mu.value.shape != logvar.value.shape or mu.value.ndim != 2:
        raise ValueError("gaussian_kl expects matching [B, d] nodes")
    k = backend.kernels
    vm = np.ascontiguousarray(mu.value)
    vl = np.ascontiguousarray(logvar.value)
    loss = k.kl_gauss_fwd(vm, vl)

    def bw(g):
        dmu, dlogvar = k.kl_gauss_bwd(vm, vl, float(g))
        ad._accum(mu, dmu)
        ad._accum(logvar, dlogvar)

    return ad.Node(np.asarray(loss, dtype=vm.dtype), (mu, logvar), "gaussian_kl", bw)


def reparameterize(mu, logvar, gen):
    """z = mu + exp(logvar / 2) * eps with eps ~ N(0, I) from the given stream.

    eps enters the graph as a constant: gradients flow to mu and logvar only.
    """
    if mu.value.shape != logvar.value.shape:
        raise ValueError("mu and logvar must share a shape")
    eps = gen.standard_normal(mu.value.shape, dtype=np.float32)
    eps_node = ad.constant(eps, dtype=mu.value.dtype)
    return ad.add(mu, ad.mul(ad.exp(ad.scalar_mul(logvar, 0.5)), eps_node))
