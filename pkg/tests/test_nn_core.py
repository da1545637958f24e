import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fluidport.nn import (
    ModelSpec,
    backward_gradients,
    init_weights,
    ltc_step,
    model_forward,
    param_layout,
    predict_top_indices,
)
from fluidport.nn.core import loss_value
from fluidport._validation import rng_from

TINY = ModelSpec(input_dim=3, ltc_units=3, dense_layers=(4,), output_dim=6, activation="tanh")


def scalar_ltc_weights(amp, tau):
    return {
        "ltc/w_in": np.zeros((1, 1)),
        "ltc/w_rec": np.zeros((1, 1)),
        "ltc/bias": np.zeros(1),
        "ltc/amp": np.array([float(amp)]),
        "ltc/tau": np.array([float(tau)]),
    }


class TestLtcStep:
    def test_zero_dt_is_identity(self):
        w = scalar_ltc_weights(amp=2.0, tau=1.0)
        h = np.array([0.37])
        assert ltc_step(h, np.array([1.0]), w, dt=0.0)[0] == pytest.approx(0.37, abs=1e-15)

    def test_scalar_hand_value(self):
        # f = sigmoid(0) = 0.5; (1 + 1*0.5*2) / (1 + 1*(1/1 + 0.5)) = 0.8
        w = scalar_ltc_weights(amp=2.0, tau=1.0)
        got = ltc_step(np.array([1.0]), np.array([0.0]), w, dt=1.0)
        assert got[0] == pytest.approx(0.8, abs=1e-12)

    def test_zero_state_zero_amp_fixed_point(self):
        w = scalar_ltc_weights(amp=0.0, tau=2.0)
        assert ltc_step(np.array([0.0]), np.array([3.0]), w)[0] == 0.0

    def test_rejects_non_finite(self):
        w = scalar_ltc_weights(amp=1.0, tau=1.0)
        with pytest.raises(ValueError):
            ltc_step(np.array([np.nan]), np.array([0.0]), w)

    @given(
        arrays(float, 4, elements=st.floats(-50, 50)),
        arrays(float, 2, elements=st.floats(-50, 50)),
        st.integers(min_value=0, max_value=2**31 - 1),
    )
    @settings(max_examples=100, deadline=None)
    def test_contraction_with_zero_amplitude(self, h, x, seed):
        rng = rng_from(seed)
        w = {
            "ltc/w_in": rng.normal(size=(2, 4)),
            "ltc/w_rec": rng.normal(size=(4, 4)),
            "ltc/bias": rng.normal(size=4),
            "ltc/amp": np.zeros(4),
            "ltc/tau": rng.uniform(0.1, 5.0, size=4),
        }
        h_next = ltc_step(h, x, w, dt=1.0)
        assert np.max(np.abs(h_next)) <= np.max(np.abs(h)) + 1e-12


class TestForward:
    def test_zero_weights_give_half(self):
        w = {name: np.zeros(shape) for name, shape in param_layout(TINY)}
        w["ltc/tau"] = np.ones(3)
        probs = model_forward(TINY, w, np.zeros((2, 4, 3)))
        assert np.allclose(probs, 0.5)

    def test_outputs_in_open_unit_interval(self):
        rng = rng_from(1)
        w = init_weights(TINY, rng)
        probs = model_forward(TINY, w, rng.normal(size=(8, 4, 3)))
        assert np.all(probs > 0.0) and np.all(probs < 1.0)

    def test_hidden_unit_permutation_invariance(self):
        spec = ModelSpec(input_dim=2, ltc_units=2, dense_layers=(), output_dim=3)
        rng = rng_from(2)
        w = init_weights(spec, rng)
        for name in ("ltc/bias", "ltc/amp", "ltc/tau"):
            w[name] = rng.normal(size=2)
        x = rng.normal(size=(5, 3, 2))
        base = model_forward(spec, w, x)
        perm = [1, 0]
        swapped = {
            "ltc/w_in": w["ltc/w_in"][:, perm],
            "ltc/w_rec": w["ltc/w_rec"][np.ix_(perm, perm)],
            "ltc/bias": w["ltc/bias"][perm],
            "ltc/amp": w["ltc/amp"][perm],
            "ltc/tau": w["ltc/tau"][perm],
            "out/kernel": w["out/kernel"][perm, :],
            "out/bias": w["out/bias"],
        }
        assert np.allclose(model_forward(spec, swapped, x), base, atol=1e-12)

    def test_dense_baseline_requires_single_step(self):
        spec = ModelSpec(input_dim=4, ltc_units=0, dense_layers=(5,), output_dim=3)
        w = init_weights(spec, rng_from(3))
        probs = model_forward(spec, w, np.ones((2, 1, 4)))
        assert probs.shape == (2, 3)
        with pytest.raises(ValueError, match="single-step"):
            model_forward(spec, w, np.ones((2, 2, 4)))

    def test_shape_mismatch(self):
        w = init_weights(TINY, rng_from(4))
        with pytest.raises(ValueError):
            model_forward(TINY, w, np.ones((2, 4, 99)))


class TestLoss:
    def test_perfect_bce_below_clamp_floor(self):
        y = np.array([[1.0, 0.0, 1.0]])
        assert loss_value(y, y, "bce") <= 1e-6

    def test_uniform_half_is_ln2(self):
        p = np.full((3, 5), 0.5)
        y = (rng_from(0).random((3, 5)) < 0.5).astype(float)
        assert loss_value(p, y, "bce") == pytest.approx(np.log(2.0), abs=1e-12)

    def test_perfect_soft_f1_near_zero(self):
        y = np.array([[1.0, 0.0, 1.0, 0.0]])
        assert loss_value(y, y, "soft_f1") <= 1e-6

    def test_losses_non_negative(self):
        rng = rng_from(6)
        for _ in range(50):
            p = rng.uniform(1e-6, 1 - 1e-6, size=(4, 7))
            y = (rng.random((4, 7)) < 0.3).astype(float)
            assert loss_value(p, y, "bce") >= 0.0
            assert loss_value(p, y, "soft_f1") >= 0.0

    def test_shape_mismatch_and_unknown_kind(self):
        with pytest.raises(ValueError):
            loss_value(np.ones((2, 2)), np.ones((2, 3)), "bce")
        with pytest.raises(ValueError):
            loss_value(np.ones((2, 2)), np.ones((2, 2)), "mse")


def finite_difference_check(spec, kind, seed, step=1e-5, tol=1e-4):
    rng = rng_from(seed)
    w = init_weights(spec, rng)
    x = rng.normal(size=(4, 4, spec.input_dim))
    y = (rng.random((4, spec.output_dim)) < 0.3).astype(float)
    _, grads = backward_gradients(spec, w, x, y, kind)
    worst, count = 0.0, 0
    for name, _ in param_layout(spec):
        flat = w[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = loss_value(model_forward(spec, w, x), y, kind)
            flat[i] = orig - step
            down = loss_value(model_forward(spec, w, x), y, kind)
            flat[i] = orig
            fd = (up - down) / (2 * step)
            ga = grads[name].reshape(-1)[i]
            worst = max(worst, abs(ga - fd) / max(abs(ga), abs(fd), 1e-7))
            count += 1
    return worst, count


class TestGradients:
    @pytest.mark.parametrize("kind", ["bce", "soft_f1"])
    def test_matches_finite_differences(self, kind):
        worst, count = finite_difference_check(TINY, kind, seed=8)
        assert count >= 60
        assert worst <= 1e-4

    def test_bce_bias_gradient_identity(self):
        # d(mean bce)/d(out bias) = mean_batch(p - y) / N for sigmoid outputs.
        rng = rng_from(9)
        w = init_weights(TINY, rng)
        x = rng.normal(size=(6, 4, 3))
        y = (rng.random((6, 6)) < 0.4).astype(float)
        probs = model_forward(TINY, w, x)
        _, grads = backward_gradients(TINY, w, x, y, "bce")
        expected = (probs - y).mean(axis=0) / TINY.output_dim
        assert np.allclose(grads["out/bias"], expected, atol=1e-12)

    def test_zero_gradient_at_saturated_stationary_point(self):
        # Saturated logits reproduce the labels past the clamp, so the loss
        # plateau has (near) zero gradient.
        spec = ModelSpec(input_dim=2, ltc_units=0, dense_layers=(), output_dim=4)
        w = {name: np.zeros(shape) for name, shape in param_layout(spec)}
        y = np.array([[1.0, 0.0, 1.0, 0.0]])
        w["out/bias"] = np.where(y[0] > 0, 40.0, -40.0)
        _, grads = backward_gradients(spec, w, np.zeros((1, 1, 2)), y, "bce")
        assert max(np.max(np.abs(g)) for g in grads.values()) <= 1e-6


class TestPredictTopIndices:
    def test_examples(self):
        spec = ModelSpec(input_dim=2, ltc_units=0, dense_layers=(), output_dim=3)
        w = {name: np.zeros(shape) for name, shape in param_layout(spec)}
        w["out/bias"] = np.log(np.array([0.1, 0.8, 0.3]) / (1 - np.array([0.1, 0.8, 0.3])))
        idx = predict_top_indices(spec, w, np.zeros((1, 1, 2)), 1)
        assert idx.tolist() == [[1]]
        all_idx = predict_top_indices(spec, w, np.zeros((1, 1, 2)), 3)
        assert all_idx.tolist() == [[1, 2, 0]]

    def test_consistent_with_top_m_labels(self):
        from fluidport import top_m_labels

        rng = rng_from(10)
        w = init_weights(TINY, rng)
        x = rng.normal(size=(5, 4, 3))
        probs = model_forward(TINY, w, x)
        idx = predict_top_indices(TINY, w, x, 2)
        for row, top in zip(probs, idx):
            assert np.array_equal(np.sort(np.flatnonzero(top_m_labels(row, 2))), np.sort(top))
