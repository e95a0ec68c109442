import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_allclose, assert_array_equal

from cycinv import autodiff as ad
from cycinv import nn, rng


class TestInitMlp:
    def test_invalid_width_rejected(self):
        with pytest.raises(ValueError):
            nn.MlpSpec((4, 0, 2))

    def test_same_seed_same_parameters(self):
        spec = nn.MlpSpec((5, 7, 2))
        a = nn.init_mlp(spec, 99)
        b = nn.init_mlp(spec, 99)
        for la, lb in zip(a.layers, b.layers):
            assert_array_equal(la.weight.value, lb.weight.value)
            assert_array_equal(la.bias.value, lb.bias.value)

    def test_he_uniform_bound(self):
        # fan_in 6 gives bound sqrt(6/6) = 1
        mlp = nn.init_mlp(nn.MlpSpec((6, 50)), 3)
        w = mlp.layers[0].weight.value
        assert np.all(np.abs(w) <= 1.0)
        assert np.abs(w).max() > 0.5  # not degenerate
        assert_array_equal(mlp.layers[0].bias.value, np.zeros(50, dtype=np.float32))


class TestForwardMlp:
    def test_identity_linear_layer(self):
        mlp = nn.init_mlp(nn.MlpSpec((3, 3)), 0)
        mlp.layers[0].weight.value[:] = np.eye(3, dtype=np.float32)
        x = np.random.default_rng(1).standard_normal((4, 3)).astype(np.float32)
        out = nn.forward_mlp(mlp, ad.constant(x))
        assert_array_equal(out.value, x)

    def test_sigmoid_output_in_unit_interval(self):
        mlp = nn.init_mlp(nn.MlpSpec((4, 8, 2), output="sigmoid"), 5)
        x = np.random.default_rng(2).standard_normal((6, 4)).astype(np.float32)
        y = nn.forward_mlp(mlp, ad.constant(x)).value
        assert np.all(y > 0) and np.all(y < 1)

    def test_width_mismatch(self):
        mlp = nn.init_mlp(nn.MlpSpec((4, 2)), 0)
        with pytest.raises(ValueError):
            nn.forward_mlp(mlp, ad.constant(np.ones((2, 5), dtype=np.float32)))


class TestAdam:
    def test_zero_gradient_leaves_fresh_parameters(self):
        p = ad.Variable(np.array([1.0, -2.0], dtype=np.float32))
        opt = nn.Adam([p], lr=0.1)
        opt.step(grads=[np.zeros(2, dtype=np.float32)])
        assert_array_equal(p.value, np.array([1.0, -2.0], dtype=np.float32))

    def test_first_step_matches_hand_evaluation(self):
        # m_hat = v_hat = 1 on the first unit-gradient step, so p -> p - lr
        p = ad.Variable(np.array([1.0], dtype=np.float32))
        opt = nn.Adam([p], lr=0.1, beta1=0.9, beta2=0.999, eps=1e-8)
        opt.step(grads=[np.ones(1, dtype=np.float32)])
        assert float(p.value[0]) == pytest.approx(0.9, abs=1e-6)

    def test_constant_gradient_decreases_parameter(self):
        p = ad.Variable(np.array([1.0], dtype=np.float32))
        opt = nn.Adam([p], lr=0.01)
        prev = 1.0
        for _ in range(2):
            opt.step(grads=[np.ones(1, dtype=np.float32)])
            assert float(p.value[0]) < prev
            prev = float(p.value[0])
        assert opt.t == 2

    def test_lr_zero_is_fixed_point(self):
        p = ad.Variable(np.array([3.0, -1.0], dtype=np.float32))
        opt = nn.Adam([p], lr=0.0)
        for _ in range(3):
            opt.step(grads=[np.full(2, 0.7, dtype=np.float32)])
        assert_array_equal(p.value, np.array([3.0, -1.0], dtype=np.float32))

    def test_update_independent_of_parameter_order(self):
        gen = np.random.default_rng(8)
        vals = [gen.standard_normal(4).astype(np.float32) for _ in range(3)]
        grads = [gen.standard_normal(4).astype(np.float32) for _ in range(3)]
        pa = [ad.Variable(v.copy()) for v in vals]
        pb = [ad.Variable(v.copy()) for v in vals]
        nn.Adam(pa, lr=0.05).step(grads=grads)
        nn.Adam(list(reversed(pb)), lr=0.05).step(grads=list(reversed(grads)))
        for a, b in zip(pa, pb):
            assert_array_equal(a.value, b.value)

    def test_gradient_shape_mismatch(self):
        p = ad.Variable(np.ones(2, dtype=np.float32))
        opt = nn.Adam([p])
        with pytest.raises(ValueError):
            opt.step(grads=[np.ones(3, dtype=np.float32)])


class TestGaussianKl:
    def test_standard_normal_gives_zero(self):
        mu = ad.constant(np.zeros((2, 3), dtype=np.float32))
        lv = ad.constant(np.zeros((2, 3), dtype=np.float32))
        assert float(nn.gaussian_kl(mu, lv).value) == pytest.approx(0.0, abs=1e-7)

    def test_unit_mean_one_dim(self):
        mu = ad.constant(np.ones((1, 1), dtype=np.float32))
        lv = ad.constant(np.zeros((1, 1), dtype=np.float32))
        assert float(nn.gaussian_kl(mu, lv).value) == pytest.approx(0.5, abs=1e-7)

    def test_matches_monte_carlo_estimate(self):
        gen = np.random.default_rng(123)
        mu = gen.uniform(-1, 1, size=(1, 3)).astype(np.float32)
        lv = gen.uniform(-1, 1, size=(1, 3)).astype(np.float32)
        closed = float(nn.gaussian_kl(ad.constant(mu), ad.constant(lv)).value)

        # E_z~p [log p(z) - log r(z)] with 1e6 samples
        n = 1_000_000
        std = np.exp(0.5 * lv.astype(np.float64))
        z = mu + std * gen.standard_normal((n, 3))
        logp = -0.5 * (((z - mu) / std) ** 2 + lv + np.log(2 * np.pi)).sum(axis=1)
        logr = -0.5 * (z**2 + np.log(2 * np.pi)).sum(axis=1)
        mc = float((logp - logr).mean())
        assert closed == pytest.approx(mc, rel=0.01)

    @settings(deadline=None, max_examples=30)
    @given(
        arrays(np.float32, (2, 3), elements=st.floats(-5, 5, width=32)),
        arrays(np.float32, (2, 3), elements=st.floats(-5, 5, width=32)),
    )
    def test_nonnegative(self, mu, lv):
        val = float(nn.gaussian_kl(ad.constant(mu), ad.constant(lv)).value)
        assert val >= -1e-6


class TestReparameterize:
    def test_collapses_to_mu_at_tiny_variance(self):
        mu = ad.constant(np.array([[0.3, -0.7]], dtype=np.float32))
        lv = ad.constant(np.full((1, 2), -40.0, dtype=np.float32))
        z = nn.reparameterize(mu, lv, rng.stream(0)).value
        assert_allclose(z, mu.value, atol=1e-6)

    def test_fixed_seed_reproduces(self):
        mu = ad.constant(np.zeros((2, 3), dtype=np.float32))
        lv = ad.constant(np.zeros((2, 3), dtype=np.float32))
        z1 = nn.reparameterize(mu, lv, rng.stream(42)).value
        z2 = nn.reparameterize(mu, lv, rng.stream(42)).value
        assert_array_equal(z1, z2)

    def test_sample_mean_near_zero(self):
        n = 100_000
        mu = ad.constant(np.zeros((n, 2), dtype=np.float32))
        lv = ad.constant(np.zeros((n, 2), dtype=np.float32))
        z = nn.reparameterize(mu, lv, rng.stream(7)).value
        assert np.all(np.abs(z.mean(axis=0)) <= 0.02)

    def test_gradient_reaches_mu_and_logvar_not_eps(self):
        mu = ad.Variable(np.zeros((1, 2), dtype=np.float32))
        lv = ad.Variable(np.zeros((1, 2), dtype=np.float32))
        z = nn.reparameterize(mu, lv, rng.stream(3))
        ad.backward(ad.sum(ad.mul(z, z)))
        assert mu.grad is not None and lv.grad is not None
