import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from echoxkit.errors import DegenerateVector, DimensionMismatch, InvalidInput, InvalidTarget
from echoxkit.losses import (
    DEFAULT_LAMBDA,
    AdapterParams,
    combined_loss,
    cross_entropy,
    cross_entropy_grad,
    denoising_loss,
    echo_loss,
    grad_check,
    log_softmax,
    s2t_loss,
)


def identity_adapter(d):
    eye = np.eye(d)
    return AdapterParams(eye.copy(), np.zeros(d), eye.copy(), np.zeros(d))


def denoise_fn(H, E, template):
    def f(flat):
        loss, grad = denoising_loss(H, template.with_flat(flat), E)
        return loss, grad.flatten()
    return f


def ce_fn(targets, kernel=cross_entropy):
    def f(flat):
        logits = flat.reshape(len(targets), -1)
        return kernel(logits, targets), cross_entropy_grad(logits, targets).reshape(-1)
    return f


class TestCrossEntropy:
    def test_uniform(self):
        assert echo_loss(np.zeros((3, 4)), [0, 1, 3]) == pytest.approx(3 * math.log(4), abs=1e-12)
        assert s2t_loss(np.zeros((1, 2)), [1]) == pytest.approx(math.log(2), abs=1e-12)

    def test_perfect_prediction(self):
        logits = np.full((4, 6), -50.0)
        targets = [5, 0, 2, 2]
        logits[np.arange(4), targets] = 50.0
        assert echo_loss(logits, targets) < 1e-30
        assert s2t_loss(logits, targets) < 1e-30

    def test_matches_high_precision_log_sum_exp(self):
        rng = np.random.default_rng(2)
        logits = rng.normal(scale=3.0, size=(2, 5))
        targets = [4, 1]
        mpmath.mp.dps = 50
        expected = mpmath.mpf(0)
        for row, t in zip(logits.tolist(), targets):
            expected += mpmath.log(mpmath.fsum(mpmath.exp(mpmath.mpf(v)) for v in row)) - row[t]
        assert echo_loss(logits, targets) == pytest.approx(float(expected), rel=1e-14)

    def test_echo_and_s2t_share_the_kernel(self):
        rng = np.random.default_rng(0)
        logits, targets = rng.normal(size=(6, 9)), rng.integers(0, 9, size=6)
        assert echo_loss(logits, targets) == s2t_loss(logits, targets)

    def test_large_logits_stay_finite(self):
        logits = np.array([[1000.0, 0.0, -1000.0]])
        assert cross_entropy(logits, [1]) == pytest.approx(1000.0)
        np.testing.assert_allclose(np.exp(log_softmax(logits)).sum(axis=1), 1.0, atol=1e-9)

    def test_mean_reduction(self):
        logits = np.zeros((4, 2))
        assert cross_entropy(logits, [0, 1, 0, 1], reduction="mean") == pytest.approx(math.log(2))

    @pytest.mark.parametrize("targets", [[0, 7], [-1, 0]])
    def test_bad_targets(self, targets):
        with pytest.raises(InvalidTarget):
            echo_loss(np.zeros((2, 7)), targets)

    def test_length_mismatch(self):
        with pytest.raises(DimensionMismatch):
            s2t_loss(np.zeros((2, 3)), [0])

    @settings(max_examples=40)
    @given(st.integers(1, 6), st.integers(2, 8), st.integers(0, 2**32 - 1))
    def test_non_negative(self, m, V, seed):
        rng = np.random.default_rng(seed)
        assert echo_loss(rng.normal(scale=5, size=(m, V)), rng.integers(0, V, size=m)) >= 0.0


class TestDenoising:
    def test_identity_on_one_hot_rows(self):
        H = np.diag([0.3, -1.2, 2.0, 0.7])
        loss, _ = denoising_loss(H, identity_adapter(4), H)
        assert loss == pytest.approx(0.0, abs=1e-12)

    def test_identity_in_linear_region(self):
        rng = np.random.default_rng(1)
        H = 1e-4 * rng.normal(size=(5, 4))
        loss, _ = denoising_loss(H, identity_adapter(4), H)
        assert abs(loss) < 1e-7

    def test_orthogonal_rows(self):
        H = np.eye(3)
        E = np.roll(np.eye(3), 1, axis=1)
        loss, _ = denoising_loss(H, identity_adapter(3), E)
        assert loss == pytest.approx(3.0, abs=1e-12)

    def test_opposite_rows_reach_upper_bound(self):
        H = np.eye(2)
        loss, _ = denoising_loss(H, identity_adapter(2), -H)
        assert loss == pytest.approx(4.0, abs=1e-12)

    def test_scale_invariance(self):
        rng = np.random.default_rng(4)
        H, E = rng.normal(size=(5, 6)), rng.normal(size=(5, 3))
        adapter = AdapterParams.init(6, 3, hidden=7, seed=2)
        scaled = E * rng.uniform(0.1, 10.0, size=(5, 1))
        assert denoising_loss(H, adapter, scaled)[0] == pytest.approx(denoising_loss(H, adapter, E)[0], abs=1e-12)

    @settings(max_examples=40)
    @given(st.integers(1, 6), st.integers(0, 2**32 - 1))
    def test_bounds(self, n, seed):
        rng = np.random.default_rng(seed)
        adapter = AdapterParams.init(4, 3, hidden=5, seed=seed % 1000)
        loss, _ = denoising_loss(rng.normal(size=(n, 4)), adapter, rng.normal(size=(n, 3)))
        assert -1e-12 <= loss <= 2 * n + 1e-12

    def test_degenerate_rows(self):
        adapter = identity_adapter(2)
        with pytest.raises(DegenerateVector):
            denoising_loss(np.eye(2), adapter, np.array([[1.0, 0.0], [0.0, 0.0]]))
        with pytest.raises(DegenerateVector):
            denoising_loss(np.array([[0.0, 0.0]]), adapter, np.array([[1.0, 0.0]]))

    def test_shape_errors(self):
        adapter = identity_adapter(2)
        with pytest.raises(DimensionMismatch):
            denoising_loss(np.eye(2), adapter, np.ones((3, 2)))
        with pytest.raises(DimensionMismatch):
            denoising_loss(np.ones((2, 3)), adapter, np.ones((2, 2)))


class TestGradients:
    def test_quadratic(self):
        p = np.random.default_rng(0).normal(size=10)
        assert grad_check(lambda q: (float(q @ q), 2 * q), p) <= 1e-8

    def test_denoising_3x4(self):
        rng = np.random.default_rng(3)
        H, E = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
        adapter = AdapterParams.init(4, 4, hidden=5, seed=3)
        assert grad_check(denoise_fn(H, E, adapter), adapter.flatten(), 1e-5) <= 1e-4

    def test_denoising_4x6(self):
        rng = np.random.default_rng(6)
        H, E = rng.normal(size=(4, 6)), rng.normal(size=(4, 6))
        adapter = AdapterParams.init(6, 6, hidden=8, seed=6)
        assert grad_check(denoise_fn(H, E, adapter), adapter.flatten(), 1e-5) <= 1e-4

    def test_echo_logits_3x7(self):
        rng = np.random.default_rng(7)
        logits, targets = rng.normal(size=(3, 7)), rng.integers(0, 7, size=3)
        assert grad_check(ce_fn(targets, echo_loss), logits.reshape(-1), 1e-5) <= 1e-6

    def test_closed_form(self):
        logits = np.array([[0.0, math.log(3.0)]])
        np.testing.assert_allclose(cross_entropy_grad(logits, [0]), [[-0.75, 0.75]], atol=1e-15)

    def test_mean_gradient_scales(self):
        rng = np.random.default_rng(9)
        H, E = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
        adapter = AdapterParams.init(3, 3, hidden=4, seed=1)
        _, g_sum = denoising_loss(H, adapter, E)
        _, g_mean = denoising_loss(H, adapter, E, reduction="mean")
        np.testing.assert_allclose(g_mean.flatten() * 4, g_sum.flatten(), rtol=1e-12)

    def test_step_and_finiteness_guards(self):
        with pytest.raises(InvalidInput):
            grad_check(lambda q: (0.0, q), np.ones(2), step=0.1)
        with pytest.raises(InvalidInput):
            with np.errstate(invalid="ignore"):
                grad_check(lambda q: (float(np.log(q[0])), 1 / q), np.array([5e-6]), step=1e-5)


class TestCombined:
    def test_example(self):
        out = combined_loss(2.0, 0.5, 1.0, 0.2)
        assert out.total == pytest.approx(3.1, abs=1e-15)
        assert out.to_dict() == {"echo": 2.0, "denoising": 0.5, "s2t": 1.0, "lambda": 0.2, "total": out.total}

    def test_ablation_and_zero(self):
        assert combined_loss(2.0, 9.0, 1.0, 0.0).total == 3.0
        assert combined_loss(0.0, 0.0, 0.0).total == 0.0

    def test_default_lambda(self):
        assert DEFAULT_LAMBDA == 0.2
        assert combined_loss(1.0, 1.0, 1.0).lam == 0.2

    @given(st.floats(0, 100), st.floats(0, 2), st.floats(0, 100), st.floats(0, 1))
    def test_linear_in_each_term(self, e, d, s, lam):
        base = combined_loss(e, d, s, lam).total
        assert combined_loss(e + 1, d, s, lam).total - base == pytest.approx(1.0, abs=1e-9)
        assert combined_loss(e, d + 1, s, lam).total - base == pytest.approx(lam, abs=1e-9)
        assert combined_loss(e, d, s + 1, lam).total - base == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("bad", [math.nan, math.inf])
    def test_non_finite(self, bad):
        with pytest.raises(InvalidInput):
            combined_loss(bad, 0.0, 0.0)


class TestAdapter:
    def test_flat_round_trip(self):
        a = AdapterParams.init(5, 3, hidden=4, seed=8)
        b = a.with_flat(a.flatten())
        for x, y in zip(a.to_dict().values(), b.to_dict().values()):
            np.testing.assert_array_equal(x, y)
        assert a.flatten().size == 5 * 4 + 4 + 4 * 3 + 3
        c = AdapterParams.from_dict(a.to_dict())
        np.testing.assert_array_equal(c.flatten(), a.flatten())
