import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from fluidport import FeatureNormalizer, LiquidPortClassifier, top_m_labels
from fluidport.nn import (
    AdamConfig,
    AdamState,
    ModelSpec,
    PortPredictor,
    TrainConfig,
    adam_update,
    load_model,
    load_predictor,
    save_model,
    train,
)
from fluidport.nn.core import loss_value, model_forward
from fluidport._validation import rng_from


def memorization_problem(n=50, n_ports=20, seq=4, m=3, seed=0):
    rng = rng_from(seed)
    x = rng.normal(size=(n, seq, 2))
    sinr = rng.random((n, n_ports))
    y = top_m_labels(sinr, m).astype(float)
    return x, y


class TestAdam:
    def test_first_step_identity(self):
        w = {"a": np.full(4, 10.0)}
        g = {"a": np.ones(4)}
        adam_update(w, g, AdamState(), AdamConfig(learning_rate=1e-3))
        assert np.allclose(w["a"], 10.0 - 1e-3, atol=1e-9)

    def test_zero_gradient_leaves_weights(self):
        w = {"a": np.array([1.0, -2.0])}
        adam_update(w, {"a": np.zeros(2)}, AdamState(), AdamConfig())
        assert np.array_equal(w["a"], np.array([1.0, -2.0]))

    def test_deterministic_sequence(self):
        rng = rng_from(1)
        grads = [{"a": rng.normal(size=3)} for _ in range(10)]
        results = []
        for _ in range(2):
            w = {"a": np.ones(3)}
            state = AdamState()
            for g in grads:
                adam_update(w, g, state, AdamConfig())
            results.append(w["a"].copy())
        assert np.array_equal(results[0], results[1])


class TestTrainLoop:
    def test_memorizes_small_task(self):
        x, y = memorization_problem()
        spec = ModelSpec(input_dim=2, ltc_units=16, dense_layers=(32,), output_dim=20)
        config = TrainConfig(learning_rate=1e-2, epochs=500, batch_size=16, patience=500, seed=3)
        weights, history = train(spec, (x, y), (x, y), config)
        initial = history["train_loss"][0]
        assert min(history["train_loss"]) < 0.1 * initial

    def test_returned_weights_are_best_checkpoint(self):
        x, y = memorization_problem(n=60, seed=5)
        x_val, y_val = x[:20], y[:20]
        spec = ModelSpec(input_dim=2, ltc_units=8, dense_layers=(16,), output_dim=20)
        config = TrainConfig(epochs=25, batch_size=16, patience=30, seed=4)
        weights, history = train(spec, (x[20:], y[20:]), (x_val, y_val), config)
        returned = loss_value(model_forward(spec, weights, x_val), y_val, "bce")
        assert returned <= min(history["val_loss"]) + 1e-12

    def test_fixed_seed_identical_history(self):
        x, y = memorization_problem(n=40, seed=6)
        spec = ModelSpec(input_dim=2, ltc_units=6, dense_layers=(8,), output_dim=20)
        config = TrainConfig(epochs=10, batch_size=8, seed=9)
        _, h1 = train(spec, (x, y), (x, y), config)
        _, h2 = train(spec, (x, y), (x, y), config)
        assert h1["train_loss"] == h2["train_loss"]
        assert h1["val_loss"] == h2["val_loss"]

    def test_divergence_aborts_with_last_checkpoint(self):
        x, y = memorization_problem(n=30, seed=7)
        x_bad = x.copy()
        x_bad[5, 0, 0] = np.nan
        spec = ModelSpec(input_dim=2, ltc_units=4, dense_layers=(), output_dim=20)
        config = TrainConfig(epochs=5, batch_size=8, seed=2)
        weights, history = train(spec, (x_bad, y), (x, y), config)
        assert history["diverged"] is True
        assert all(np.all(np.isfinite(w)) for w in weights.values())

    def test_early_stopping_respects_patience(self):
        # Validation labels are unrelated to the training task, so validation
        # loss degrades as the model memorizes and patience must trip.
        x, y = memorization_problem(n=40, seed=8)
        x_val, y_val = memorization_problem(n=20, seed=99)
        spec = ModelSpec(input_dim=2, ltc_units=4, dense_layers=(), output_dim=20)
        config = TrainConfig(epochs=200, batch_size=8, patience=2, seed=1, learning_rate=1e-2)
        _, history = train(spec, (x, y), (x_val, y_val), config)
        assert len(history["val_loss"]) < 200


class TestClassifier:
    def test_fit_predict_shapes(self):
        x, y = memorization_problem(n=60, seed=10)
        clf = LiquidPortClassifier(ltc_units=8, dense_layers=(16,), epochs=5, m_labels=3, seed=0)
        clf.fit(x, y)
        probs = clf.predict_proba(x)
        assert probs.shape == (60, 20)
        masks = clf.predict(x)
        assert np.all(masks.sum(axis=1) == 3)
        idx = clf.predict_top_indices(x, 4)
        assert idx.shape == (60, 4)

    def test_sklearn_protocol(self):
        clf = LiquidPortClassifier(ltc_units=4, epochs=2)
        params = clf.get_params()
        assert params["ltc_units"] == 4
        cloned = clone(clf)
        assert cloned.get_params() == params
        cloned.set_params(learning_rate=0.01)
        assert cloned.learning_rate == 0.01

    def test_not_fitted_error(self):
        with pytest.raises(NotFittedError):
            LiquidPortClassifier().predict_proba(np.ones((1, 2, 2)))

    def test_validation_split_carved_deterministically(self):
        x, y = memorization_problem(n=50, seed=11)
        a = LiquidPortClassifier(ltc_units=4, epochs=3, seed=5).fit(x, y)
        b = LiquidPortClassifier(ltc_units=4, epochs=3, seed=5).fit(x, y)
        assert a.history_["val_loss"] == b.history_["val_loss"]


class TestModelFiles:
    def test_roundtrip_and_predictor(self, tmp_path):
        x, y = memorization_problem(n=40, seed=12, n_ports=12)
        clf = LiquidPortClassifier(ltc_units=6, dense_layers=(8,), epochs=4, seed=1).fit(x, y)
        observed = np.array([0, 4, 8, 11])
        norm = FeatureNormalizer().fit(x)
        predictor = PortPredictor.from_classifier(clf, [norm], observed, 12)
        path = tmp_path / "model.fpwt"
        save_model(
            path,
            clf.spec_,
            clf.weights_,
            pipeline={
                "normalizers": [norm.state_dict()],
                "observed_indices": observed.tolist(),
                "n_ports": 12,
                "m_labels": 3,
            },
            seed=1,
            training={"best_val_loss": clf.history_["best_val_loss"]},
        )
        spec, weights, pipeline, header = load_model(path)
        assert spec == clf.spec_
        for name in weights:
            assert np.array_equal(weights[name], clf.weights_[name])
        loaded = load_predictor(path)
        obs_sinr = rng_from(3).random((5, 4))
        assert np.allclose(loaded.port_scores(obs_sinr), predictor.port_scores(obs_sinr))

    def test_checksum_guard(self, tmp_path):
        from fluidport import DatasetFormatError

        x, y = memorization_problem(n=40, seed=13, n_ports=12)
        clf = LiquidPortClassifier(ltc_units=4, epochs=2, seed=1).fit(x, y)
        path = tmp_path / "model.fpwt"
        save_model(path, clf.spec_, clf.weights_, pipeline={"normalizers": []})
        blob = bytearray(path.read_bytes())
        blob[-3] ^= 0x01
        path.write_bytes(bytes(blob))
        with pytest.raises(DatasetFormatError, match="checksum"):
            load_model(path)
