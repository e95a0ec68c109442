import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from cycinv import autodiff as ad
from cycinv import selfcheck


class TestConstructors:
    def test_zeros(self):
        assert_array_equal(ad.zeros([2, 2]), np.zeros((2, 2), dtype=np.float32))

    def test_zeros_rejects_nonpositive_extent(self):
        with pytest.raises(ValueError):
            ad.zeros([2, 0])

    def test_randn_is_deterministic_per_seed(self):
        a = ad.randn([4], seed=7)
        b = ad.randn([4], seed=7)
        assert_array_equal(a, b)
        assert a.dtype == np.float32
        assert not np.array_equal(a, ad.randn([4], seed=8))

    def test_build_and_length_mismatch(self):
        assert_array_equal(ad.build([2], [1, 2]), np.array([1, 2], dtype=np.float32))
        with pytest.raises(ValueError):
            ad.build([3], [1, 2])


class TestElementwise:
    def test_add_values(self):
        out = ad.add(ad.constant([1.0, 2.0]), ad.constant([3.0, 4.0]))
        assert_array_equal(out.value, np.array([4.0, 6.0], dtype=np.float32))

    def test_mul_gradient_is_other_operand(self):
        a = ad.Variable(np.array([2.0], dtype=np.float32))
        b = ad.constant([5.0])
        ad.backward(ad.sum(ad.mul(a, b)))
        assert_array_equal(a.grad, np.array([5.0], dtype=np.float32))

    def test_shape_mismatch_raises(self):
        with pytest.raises(ValueError):
            ad.add(ad.constant([1.0]), ad.constant([1.0, 2.0]))

    def test_scalar_mul(self):
        out = ad.scalar_mul(ad.constant([1.0, -2.0]), 3.0)
        assert_array_equal(out.value, np.array([3.0, -6.0], dtype=np.float32))


class TestMatmul:
    def test_identity(self):
        eye = ad.constant(np.eye(2, dtype=np.float32))
        m = ad.constant([[1.0, 2.0], [3.0, 4.0]])
        assert_array_equal(ad.matmul(eye, m).value, m.value)

    def test_row_times_column(self):
        out = ad.matmul(ad.constant([[1.0, 2.0]]), ad.constant([[3.0], [4.0]]))
        assert_array_equal(out.value, np.array([[11.0]], dtype=np.float32))

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            ad.matmul(ad.constant(np.ones((2, 3))), ad.constant(np.ones((2, 3))))


class TestNonlinearities:
    def test_sigmoid_at_zero(self):
        assert ad.sigmoid(ad.constant([0.0])).value[0] == pytest.approx(0.5)

    def test_sigmoid_range(self):
        # keep |x| below the float32 saturation point (~17) so (0, 1) stays open
        y = ad.sigmoid(ad.constant(np.linspace(-14, 14, 41, dtype=np.float32))).value
        assert np.all(y > 0) and np.all(y < 1)

    def test_leaky_relu_negative_side(self):
        y = ad.leaky_relu(ad.constant([-1.0, 2.0]), slope=0.2).value
        assert_allclose(y, [-0.2, 2.0], rtol=1e-6)

    def test_log_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            ad.log(ad.constant([1.0, 0.0]))


class TestReductionsAndShape:
    def test_concat_vectors(self):
        out = ad.concat(ad.constant([1.0, 2.0]), ad.constant([3.0]), axis=0)
        assert_array_equal(out.value, np.array([1.0, 2.0, 3.0], dtype=np.float32))

    def test_concat_shape_error(self):
        with pytest.raises(ValueError):
            ad.concat(ad.constant(np.ones((2, 2))), ad.constant(np.ones((3, 3))), axis=1)

    def test_mean(self):
        assert float(ad.mean(ad.constant([2.0, 4.0])).value) == pytest.approx(3.0)

    def test_reshape_element_count(self):
        with pytest.raises(ValueError):
            ad.reshape(ad.constant(np.ones(6)), (2, 2))

    def test_slice_cols_range(self):
        with pytest.raises(ValueError):
            ad.slice_cols(ad.constant(np.ones((2, 4))), 2, 6)

    def test_sum_of_concat_matches_sum_of_parts(self):
        gen = np.random.default_rng(3)
        a = ad.constant(gen.standard_normal((5, 3)).astype(np.float32))
        b = ad.constant(gen.standard_normal((5, 3)).astype(np.float32))
        joint = float(ad.sum(ad.concat(a, b, axis=0)).value)
        parts = float(ad.sum(a).value) + float(ad.sum(b).value)
        tol = np.finfo(np.float32).eps * 30 * max(abs(joint), 1.0)
        assert abs(joint - parts) <= tol


class TestSoftmaxLosses:
    def test_uniform_logits_gives_log_c(self):
        logits = ad.constant(np.zeros((3, 4), dtype=np.float32))
        loss = ad.softmax_cross_entropy(logits, [0, 1, 2])
        assert float(loss.value) == pytest.approx(np.log(4.0), abs=1e-6)

    def test_saturated_logits_near_zero_loss(self):
        loss = ad.softmax_cross_entropy(ad.constant([[10.0, -10.0]]), [0])
        assert float(loss.value) < 1e-4

    def test_target_out_of_range(self):
        with pytest.raises(ValueError):
            ad.softmax_cross_entropy(ad.constant(np.zeros((1, 3))), [3])

    def test_log_softmax_prob_matches_ce(self):
        gen = np.random.default_rng(11)
        logits = gen.standard_normal((4, 5)).astype(np.float32)
        t = gen.integers(5, size=4)
        lsp = ad.log_softmax_prob(ad.constant(logits), t).value
        ce = float(ad.softmax_cross_entropy(ad.constant(logits), t).value)
        assert ce == pytest.approx(-lsp.mean(), rel=1e-5)


class TestPixelLosses:
    def test_mse_of_identical_is_zero(self):
        x = ad.constant(np.random.default_rng(0).random((3, 7), dtype=np.float32))
        assert float(ad.mse(x, x).value) == 0.0

    def test_l1_single_example(self):
        # 1-D operands count as one example: sum of |diffs| / 1
        out = ad.l1(ad.constant([1.0, 2.0]), ad.constant([2.0, 0.0]))
        assert float(out.value) == pytest.approx(3.0)

    def test_mse_batch_normalization(self):
        a = ad.constant(np.zeros((4, 3), dtype=np.float32))
        b = ad.constant(np.ones((4, 3), dtype=np.float32))
        assert float(ad.mse(a, b).value) == pytest.approx(3.0)


class TestBackward:
    def test_sum_gradient_is_ones(self):
        x = ad.Variable(np.arange(6, dtype=np.float32).reshape(2, 3))
        ad.backward(ad.sum(x))
        assert_array_equal(x.grad, np.ones((2, 3), dtype=np.float32))

    def test_diamond_accumulates_across_paths(self):
        a = ad.Variable(np.array([1.5, -0.5], dtype=np.float32))
        y = ad.add(ad.mul(a, a), ad.mul(a, a))
        ad.backward(ad.sum(y))
        assert_allclose(a.grad, 4.0 * a.value, rtol=1e-6)

    def test_backward_rejects_non_scalar(self):
        x = ad.Variable(np.ones(3, dtype=np.float32))
        with pytest.raises(ValueError):
            ad.backward(ad.mul(x, x))

    def test_each_node_runs_exactly_once(self):
        a = ad.Variable(np.array([2.0], dtype=np.float32))
        sq = ad.mul(a, a)
        reused = ad.add(sq, sq)
        loss = ad.sum(reused)
        ad.backward(loss)
        for node in (sq, reused, loss):
            assert node._backward_runs == 1

    def test_wrt_filters_other_leaves(self):
        a = ad.Variable(np.ones(2, dtype=np.float32))
        b = ad.Variable(np.ones(2, dtype=np.float32))
        ad.backward(ad.sum(ad.mul(a, b)), wrt=[a])
        assert a.grad is not None
        assert b.grad is None

    def test_forward_is_deterministic(self):
        gen = np.random.default_rng(5)
        x = gen.standard_normal((4, 4)).astype(np.float32)
        w = gen.standard_normal((4, 4)).astype(np.float32)

        def run():
            return ad.sigmoid(ad.matmul(ad.constant(x), ad.constant(w))).value

        assert_array_equal(run(), run())


class TestGradCheck:
    def test_quadratic_is_nearly_exact(self):
        err = ad.grad_check(
            lambda v: ad.sum(ad.mul(v, v)), np.array([1.0, 2.0, 3.0], dtype=np.float32)
        )
        assert err < 1e-6

    def test_constant_function_reports_zero(self):
        err = ad.grad_check(
            lambda v: ad.sum(ad.mul(ad.constant([1.0]), ad.constant([2.0]))),
            np.array([1.0], dtype=np.float32),
        )
        assert err == 0.0

    def test_eps_bounds(self):
        with pytest.raises(ValueError):
            ad.grad_check(lambda v: ad.sum(v), np.ones(2), eps=0.5)


def test_gradient_check_battery():
    results = selfcheck.gradient_checks(points=10)
    failures = [r for r in results if not r.passed]
    assert not failures, "\n".join(f"{r.name}: {r.detail}" for r in failures)
