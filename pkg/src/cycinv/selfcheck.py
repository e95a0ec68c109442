"""Built-in verification: finite-difference checks for every differentiable
op and hand-computed oracles for the three training losses.

Each check returns a named pass/fail record so the CLI can print one line
per check; the same battery backs the test suite.
"""

from collections import namedtuple

import numpy as np

from . import autodiff as ad
from . import nn, rng

CheckResult = namedtuple("CheckResult", ["name", "passed", "detail"])

TOL_OP = 1e-4
TOL_COMPOSITE = 1e-3


def _const(rngen, shape, lo=-1.0, hi=1.0):
    return ad.constant(rngen.uniform(lo, hi, size=shape).astype(np.float32))


def _away_from(rngen, shape, margin=0.1):
    """Offsets with magnitude >= margin, for kinked ops (l1, leaky_relu)."""
    sign = np.where(rngen.random(shape) < 0.5, -1.0, 1.0)
    return (sign * rngen.uniform(margin, 1.0, size=shape)).astype(np.float32)


def _op_cases():
    """(name, tolerance, sampler) triples; sampler(rng) -> (x0, graph builder)."""

    def add_case(r):
        c = _const(r, (6,))
        return r.standard_normal(6), lambda v: ad.sum(ad.add(v, c))

    def sub_left(r):
        c = _const(r, (6,))
        return r.standard_normal(6), lambda v: ad.sum(ad.sub(v, c))

    def sub_right(r):
        c = _const(r, (6,))
        return r.standard_normal(6), lambda v: ad.sum(ad.sub(c, v))

    def mul_case(r):
        c = _const(r, (6,))
        return r.standard_normal(6), lambda v: ad.sum(ad.mul(v, c))

    def mul_square(r):
        return r.standard_normal(6), lambda v: ad.sum(ad.mul(v, v))

    def scalar_mul_case(r):
        k = float(r.uniform(-2, 2))
        return r.standard_normal(6), lambda v: ad.sum(ad.scalar_mul(v, k))

    def bias_add_bias(r):
        c = _const(r, (3, 4))
        return r.standard_normal(4), lambda v: ad.sum(ad.mul(ad.bias_add(c, v), c))

    def bias_add_mat(r):
        c = _const(r, (4,))
        w = _const(r, (3, 4))
        return r.standard_normal(12), lambda v: ad.sum(
            ad.mul(ad.bias_add(ad.reshape(v, (3, 4)), c), w)
        )

    def matmul_left(r):
        c = _const(r, (3, 3))
        return r.standard_normal(9), lambda v: ad.mean(ad.matmul(ad.reshape(v, (3, 3)), c))

    def matmul_right(r):
        c = _const(r, (3, 3))
        return r.standard_normal(9), lambda v: ad.mean(ad.matmul(c, ad.reshape(v, (3, 3))))

    def leaky_case(r):
        c = _const(r, (8,))
        x0 = _away_from(r, (8,), margin=0.05)
        return x0, lambda v: ad.sum(ad.mul(ad.leaky_relu(v, 0.2), c))

    def sigmoid_case(r):
        c = _const(r, (8,))
        return r.standard_normal(8), lambda v: ad.sum(ad.mul(ad.sigmoid(v), c))

    def tanh_case(r):
        c = _const(r, (8,))
        return r.standard_normal(8), lambda v: ad.sum(ad.mul(ad.tanh(v), c))

    def exp_case(r):
        c = _const(r, (8,))
        return r.uniform(-2, 2, 8), lambda v: ad.sum(ad.mul(ad.exp(v), c))

    def log_case(r):
        c = _const(r, (8,))
        return r.uniform(0.5, 2.5, 8), lambda v: ad.sum(ad.mul(ad.log(v), c))

    def mean_case(r):
        c = _const(r, (8,))
        return r.standard_normal(8), lambda v: ad.mean(ad.mul(v, c))

    def concat_slice(r):
        c = _const(r, (2, 4))
        return r.standard_normal(8), lambda v: ad.mean(
            ad.mul(
                ad.concat(
                    ad.slice_cols(ad.reshape(v, (2, 4)), 0, 2),
                    ad.slice_cols(ad.reshape(v, (2, 4)), 2, 4),
                    axis=1,
                ),
                c,
            )
        )

    def reshape_case(r):
        c = _const(r, (4, 2))
        return r.standard_normal(8), lambda v: ad.sum(ad.mul(ad.reshape(v, (4, 2)), c))

    def softmax_ce_case(r):
        t = r.integers(5, size=2)
        return r.standard_normal(10), lambda v: ad.softmax_cross_entropy(
            ad.reshape(v, (2, 5)), t
        )

    def log_softmax_case(r):
        t = r.integers(5, size=2)
        c = _const(r, (2,))
        return r.standard_normal(10), lambda v: ad.mean(
            ad.mul(ad.log_softmax_prob(ad.reshape(v, (2, 5)), t), c)
        )

    def mse_case(r):
        c = _const(r, (2, 4))
        return r.standard_normal(8), lambda v: ad.mse(ad.reshape(v, (2, 4)), c)

    def l1_case(r):
        base = r.standard_normal((2, 4)).astype(np.float32)
        x0 = base + _away_from(r, (2, 4))
        c = ad.constant(base)
        return x0.reshape(-1), lambda v: ad.l1(ad.reshape(v, (2, 4)), c)

    def kl_case(r):
        return r.standard_normal(12), lambda v: nn.gaussian_kl(
            ad.slice_cols(ad.reshape(v, (2, 6)), 0, 3),
            ad.slice_cols(ad.reshape(v, (2, 6)), 3, 6),
        )

    def reparam_case(r):
        seed = int(r.integers(2**31))
        c = _const(r, (2, 3))
        return r.standard_normal(12), lambda v: ad.sum(
            ad.mul(
                nn.reparameterize(
                    ad.slice_cols(ad.reshape(v, (2, 6)), 0, 3),
                    ad.slice_cols(ad.reshape(v, (2, 6)), 3, 6),
                    rng.stream(seed),
                ),
                c,
            )
        )

    return [
        ("add", TOL_OP, add_case),
        ("sub.left", TOL_OP, sub_left),
        ("sub.right", TOL_OP, sub_right),
        ("mul", TOL_OP, mul_case),
        ("mul.square", TOL_OP, mul_square),
        ("scalar_mul", TOL_OP, scalar_mul_case),
        ("bias_add.bias", TOL_OP, bias_add_bias),
        ("bias_add.matrix", TOL_OP, bias_add_mat),
        ("matmul.left", TOL_OP, matmul_left),
        ("matmul.right", TOL_OP, matmul_right),
        ("leaky_relu", TOL_OP, leaky_case),
        ("sigmoid", TOL_OP, sigmoid_case),
        ("tanh", TOL_OP, tanh_case),
        ("exp", TOL_OP, exp_case),
        ("log", TOL_OP, log_case),
        ("mean", TOL_OP, mean_case),
        ("concat+slice", TOL_OP, concat_slice),
        ("reshape", TOL_OP, reshape_case),
        ("softmax_cross_entropy", TOL_OP, softmax_ce_case),
        ("log_softmax_prob", TOL_OP, log_softmax_case),
        ("mse", TOL_OP, mse_case),
        ("l1", TOL_OP, l1_case),
        ("gaussian_kl", TOL_OP, kl_case),
        ("reparameterize", TOL_COMPOSITE, reparam_case),
    ]


def _mlp_cases():
    """Gradient checks through full MLPs, wrt input and wrt a weight."""
    cases = []
    for width in (4, 8, 16):

        def input_case(r, width=width):
            spec = nn.MlpSpec((6, width, width, 3))
            mlp = nn.init_mlp(spec, int(r.integers(2**31)))
            c = _const(r, (2, 3))
            return r.standard_normal(12), lambda v: ad.mean(
                ad.mul(nn.forward_mlp(mlp, ad.reshape(v, (2, 6))), c)
            )

        cases.append((f"mlp.w{width}.input", TOL_COMPOSITE, input_case))

    def weight_case(r):
        spec = nn.MlpSpec((4, 5, 3), output="sigmoid")
        mlp = nn.init_mlp(spec, int(r.integers(2**31)))
        x = _const(r, (2, 4), lo=0.0, hi=1.0)
        c = _const(r, (2, 3))
        w0 = mlp.layers[0].weight.value.copy()

        def f(v):
            probe = nn.Mlp(
                spec,
                [
                    nn.DenseLayer(ad.reshape(v, (4, 5)), mlp.layers[0].bias),
                    mlp.layers[1],
                ],
            )
            return ad.mean(ad.mul(nn.forward_mlp(probe, x), c))

        return w0.reshape(-1), f

    cases.append(("mlp.weight", TOL_COMPOSITE, weight_case))
    return cases


def gradient_checks(seed=20240, points=10):
    """Run every op and MLP gradient check at `points` random in-domain points."""
    results = []
    for idx, (name, tol, sampler) in enumerate(_op_cases() + _mlp_cases()):
        r = rng.stream(seed, idx)
        worst = 0.0
        for _ in range(points):
            x0, f = sampler(r)
            err = ad.grad_check(f, np.asarray(x0, dtype=np.float32))
            worst = max(worst, err)
        results.append(
            CheckResult(
                f"grad.{name}",
                worst <= tol,
                f"max rel err {worst:.3e} (tol {tol:g}, {points} points)",
            )
        )
    return results


def loss_oracle_checks():
    """Compare the three training losses against hand-evaluated formulas on
    fixed one-pixel images and single-layer networks."""
    from . import _oracles

    return _oracles.run_loss_oracles()


def run_all(seed=20240, points=10):
    return gradient_checks(seed=seed, points=points) + loss_oracle_checks()


def format_results(results):
    lines = []
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        lines.append(f"[{status}] {res.name}: {res.detail}")
    return "\n".join(lines)
