"""NumPy implementations of the compute kernels.

This module mirrors the interface of the compiled extension ``cycinv._core``
and is used as the fallback backend when the extension is not built. Every
function accepts C-contiguous float32 or float64 arrays and preserves the
input dtype; reductions accumulate in float64 regardless of input dtype.
"""

import math

import numpy as np


def leaky_relu_fwd(x, slope):
    return np.where(x > 0, x, x * np.asarray(slope, dtype=x.dtype))


def leaky_relu_bwd(x, g, slope):
    return np.where(x > 0, g, g * np.asarray(slope, dtype=x.dtype))


def sigmoid_fwd(x):
    return 1.0 / (1.0 + np.exp(-x))


def sigmoid_bwd(y, g):
    # y is the cached forward output
    return g * y * (1.0 - y)


def tanh_fwd(x):
    return np.tanh(x)


def tanh_bwd(y, g):
    return g * (1.0 - y * y)


def exp_fwd(x):
    return np.exp(x)


def exp_bwd(y, g):
    return g * y


def log_fwd(x):
    return np.log(x)


def log_bwd(x, g):
    return g / x


def softmax_ce_fwd(logits, targets):
    """Mean cross-entropy over rows; returns (loss, softmax probabilities)."""
    m = logits.max(axis=1, keepdims=True)
    e = np.exp(logits - m)
    probs = e / e.sum(axis=1, keepdims=True)
    rows = np.arange(logits.shape[0])
    picked = probs[rows, targets]
    loss = -np.sum(np.log(picked.astype(np.float64))) / logits.shape[0]
    return loss, probs


def softmax_ce_bwd(probs, targets, gscale):
    b = probs.shape[0]
    d = probs * np.asarray(gscale / b, dtype=probs.dtype)
    rows = np.arange(b)
    d[rows, targets] -= np.asarray(gscale / b, dtype=probs.dtype)
    return d


def logsoftmax_pick_fwd(logits, targets):
    """Per-row log-probability of the target class; returns (values, probs)."""
    m = logits.max(axis=1, keepdims=True)
    shifted = logits - m
    e = np.exp(shifted)
    z = e.sum(axis=1, keepdims=True)
    probs = e / z
    rows = np.arange(logits.shape[0])
    vals = shifted[rows, targets] - np.log(z[:, 0])
    return vals, probs


def logsoftmax_pick_bwd(probs, targets, g):
    # d log p_t / d logit_j = delta_tj - p_j, scaled per row by g
    d = -probs * g[:, None]
    rows = np.arange(probs.shape[0])
    d[rows, targets] += g
    return d


def mse_fwd(a, b):
    d = (a - b).astype(np.float64, copy=False)
    return float(np.sum(d * d)) / a.shape[0]


def mse_bwd(a, b, gscale):
    return (a - b) * np.asarray(2.0 * gscale / a.shape[0], dtype=a.dtype)


def l1_fwd(a, b):
    d = (a - b).astype(np.float64, copy=False)
    return float(np.sum(np.abs(d))) / a.shape[0]


def l1_bwd(a, b, gscale):
    return np.sign(a - b) * np.asarray(gscale / a.shape[0], dtype=a.dtype)


def kl_gauss_fwd(mu, logvar):
    """Mean over rows of 0.5 * sum_d(mu^2 + exp(logvar) - logvar - 1)."""
    mu64 = mu.astype(np.float64, copy=False)
    lv64 = logvar.astype(np.float64, copy=False)
    total = np.sum(mu64 * mu64 + np.exp(lv64) - lv64 - 1.0)
    return 0.5 * float(total) / mu.shape[0]


def kl_gauss_bwd(mu, logvar, gscale):
    k = np.asarray(gscale / mu.shape[0], dtype=mu.dtype)
    dmu = mu * k
    dlogvar = (np.exp(logvar) - 1.0) * (0.5 * k)
    return dmu, dlogvar


def adam_update(p, g, m, v, t, lr, beta1, beta2, eps):
    """One Adam update with bias correction, in place on p, m, v."""
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * (g * g)
    c1 = 1.0 / (1.0 - beta1**t)
    c2 = 1.0 / (1.0 - beta2**t)
    p -= lr * (m * c1) / (np.sqrt(v * c2) + eps)


def rasterize(shape_class, cx, cy, scale, rotation, brightness, side):
    """Render one shape on a 2x2-supersampled grid; returns float32 [side, side].

    shape_class: 0 square, 1 circle, 2 equilateral triangle, 3 cross. The
    point-in-shape test runs in float64 at subpixel centers (j + 0.5) / (2 * side);
    each pixel is the mean of its four subsamples times brightness.
    """
    n = 2 * side
    pos = (np.arange(n, dtype=np.float64) + 0.5) / n
    dx = pos[None, :] - cx
    dy = pos[:, None] - cy
    if shape_class == 1:
        mask = dx * dx + dy * dy <= scale * scale
    else:
        c = math.cos(rotation)
        s = math.sin(rotation)
        rx = c * dx + s * dy
        ry = -s * dx + c * dy
        if shape_class == 0:
            mask = (np.abs(rx) <= scale) & (np.abs(ry) <= scale)
        elif shape_class == 2:
            vx = [scale * math.cos(math.radians(90.0 + 120.0 * k)) for k in range(3)]
            vy = [scale * math.sin(math.radians(90.0 + 120.0 * k)) for k in range(3)]
            crosses = []
            for k in range(3):
                j = (k + 1) % 3
                ex = vx[j] - vx[k]
                ey = vy[j] - vy[k]
                crosses.append(ex * (ry - vy[k]) - ey * (rx - vx[k]))
            pos_all = (crosses[0] >= 0) & (crosses[1] >= 0) & (crosses[2] >= 0)
            neg_all = (crosses[0] <= 0) & (crosses[1] <= 0) & (crosses[2] <= 0)
            mask = pos_all | neg_all
        elif shape_class == 3:
            third = scale / 3.0
            mask = ((np.abs(rx) <= scale) & (np.abs(ry) <= third)) | (
                (np.abs(rx) <= third) & (np.abs(ry) <= scale)
            )
        else:
            raise ValueError(f"unknown shape class {shape_class}")
    cover = mask.reshape(side, 2, side, 2).mean(axis=(1, 3))
    return (cover * brightness).astype(np.float32)
