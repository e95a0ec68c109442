"""Benchmark the compiled kernels against the NumPy fallback.

Times each kernel at training-realistic sizes, then one full training step
per backend at the default desk-scale geometry. Run as:

    python benchmarks/bench_backends.py
"""

import time

import numpy as np

from cycinv import _kernels_py, backend, data
from cycinv import train as train_mod
from cycinv.config import TrainConfig

try:
    from cycinv import _core
except ImportError:
    _core = None


def best_of(fn, repeats=7, inner=20):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn()
        times.append((time.perf_counter() - t0) / inner)
    return min(times)


def kernel_cases(gen):
    act = gen.standard_normal((64, 512)).astype(np.float32)
    grad = gen.standard_normal((64, 512)).astype(np.float32)
    logits = gen.standard_normal((64, 5)).astype(np.float32)
    targets = gen.integers(5, size=64)
    imgs_a = gen.random((64, 1024), dtype=np.float32)
    imgs_b = gen.random((64, 1024), dtype=np.float32)
    mu = gen.standard_normal((64, 16)).astype(np.float32)
    lv = gen.uniform(-2, 1, (64, 16)).astype(np.float32)
    p = gen.standard_normal(512 * 256).astype(np.float32)
    g = gen.standard_normal(512 * 256).astype(np.float32)
    m = np.zeros_like(p)
    v = np.zeros_like(p)
    flat = act.reshape(-1)
    return [
        ("leaky_relu_fwd 32k", lambda k: k.leaky_relu_fwd(flat, 0.2)),
        ("sigmoid_fwd 32k", lambda k: k.sigmoid_fwd(flat)),
        ("sigmoid_bwd 32k", lambda k: k.sigmoid_bwd(flat, grad.reshape(-1))),
        ("tanh_fwd 32k", lambda k: k.tanh_fwd(flat)),
        ("exp_fwd 32k", lambda k: k.exp_fwd(flat)),
        ("softmax_ce_fwd 64x5", lambda k: k.softmax_ce_fwd(logits, targets)),
        ("mse_fwd 64x1024", lambda k: k.mse_fwd(imgs_a, imgs_b)),
        ("mse_bwd 64x1024", lambda k: k.mse_bwd(imgs_a, imgs_b, 1.0)),
        ("l1_fwd 64x1024", lambda k: k.l1_fwd(imgs_a, imgs_b)),
        ("kl_gauss_fwd 64x16", lambda k: k.kl_gauss_fwd(mu, lv)),
        ("adam_update 131k", lambda k: k.adam_update(p, g, m, v, 3, 1e-3, 0.9, 0.999, 1e-8)),
        ("rasterize side 32", lambda k: k.rasterize(3, 0.4, 0.6, 0.3, 1.1, 0.8, 32)),
    ]


def bench_kernels():
    gen = np.random.default_rng(0)
    cases = kernel_cases(gen)
    print(f"{'kernel':26s} {'python':>10s} {'ext':>10s} {'speedup':>8s}")
    for name, call in cases:
        t_py = best_of(lambda: call(_kernels_py))
        if _core is None:
            print(f"{name:26s} {t_py * 1e6:9.1f}u {'n/a':>10s}")
            continue
        t_ext = best_of(lambda: call(_core))
        print(f"{name:26s} {t_py * 1e6:9.1f}u {t_ext * 1e6:9.1f}u {t_py / t_ext:7.2f}x")


def bench_train_step():
    ds = data.generate_dataset(256, 4, 32, seed=0)
    cfg = TrainConfig(batch_size=64, epochs=1)
    names = ("python",) if _core is None else ("ext", "python")
    print(f"\nfull training step (side 32, batch 64, forward + backward cycles):")
    original = backend.backend_name()
    try:
        for name in names:
            backend.set_backend(name)
            t0 = time.perf_counter()
            train_mod.train(ds, cfg)
            dt = (time.perf_counter() - t0) / (256 // 64)
            print(f"  {name:7s} {dt * 1e3:8.1f} ms/step")
    finally:
        backend.set_backend(original)


if __name__ == "__main__":
    name = backend.backend_name()
    print(f"active backend: {name}; available: {backend.available_backends()}\n")
    bench_kernels()
    bench_train_step()
