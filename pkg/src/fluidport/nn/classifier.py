"""Scikit-learn style wrapper around the LTC port classifier."""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .._validation import check_int, rng_from
from ..dataset import sequence_features
from .core import ModelSpec, model_forward, predict_top_indices
from .train import TrainConfig, train

__all__ = ["LiquidPortClassifier", "PortPredictor"]


class LiquidPortClassifier(BaseEstimator):
    """Multi-label port classifier: LTC recurrent stage plus a dense stack.

    ``fit`` consumes sequence inputs X of shape (B, T, F) and multi-hot label
    masks y of shape (B, N).  ``ltc_units = 0`` yields the dense baseline and
    requires single-step sequences (T = 1).
    """

    def __init__(
        self,
        ltc_units=32,
        dense_layers=(64,),
        activation="tanh",
        dt=1.0,
        learning_rate=1e-3,
        epochs=60,
        batch_size=64,
        loss="bce",
        patience=8,
        m_labels=3,
        validation_fraction=0.15,
        seed=0,
    ):
        self.ltc_units = ltc_units
        self.dense_layers = dense_layers
        self.activation = activation
        self.dt = dt
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.loss = loss
        self.patience = patience
        self.m_labels = m_labels
        self.validation_fraction = validation_fraction
        self.seed = seed

    def fit(self, X, y, X_val=None, y_val=None):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim != 3:
            raise ValueError(f"X must be (B, T, F), got shape {X.shape}")
        if y.ndim != 2 or y.shape[0] != X.shape[0]:
            raise ValueError(f"y must be (B, N) aligned with X, got shape {y.shape}")
        if X_val is None:
            # Carve a validation tail out of a seeded shuffle.
            n_val = max(1, int(round(X.shape[0] * self.validation_fraction)))
            order = rng_from(self.seed, 99).permutation(X.shape[0])
            val_idx, train_idx = order[:n_val], order[n_val:]
            X, X_val = X[train_idx], X[val_idx]
            y, y_val = y[train_idx], y[val_idx]
        else:
            X_val = np.asarray(X_val, dtype=float)
            y_val = np.asarray(y_val, dtype=float)

        self.spec_ = ModelSpec(
            input_dim=X.shape[2],
            ltc_units=check_int("ltc_units", self.ltc_units, minimum=0),
            dense_layers=tuple(self.dense_layers),
            output_dim=y.shape[1],
            activation=self.activation,
            dt=self.dt,
        )
        config = TrainConfig(
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            loss=self.loss,
            patience=self.patience,
            seed=self.seed,
        )
        self.weights_, self.history_ = train(self.spec_, (X, y), (X_val, y_val), config)
        self.n_features_in_ = X.shape[2]
        return self

    def _check_fitted(self):
        if not hasattr(self, "weights_"):
            raise NotFittedError("LiquidPortClassifier must be fit before predicting")

    def predict_proba(self, X):
        self._check_fitted()
        return model_forward(self.spec_, self.weights_, np.asarray(X, dtype=float))

    def predict_top_indices(self, X, m_labels=None):
        self._check_fitted()
        m = self.m_labels if m_labels is None else m_labels
        return predict_top_indices(self.spec_, self.weights_, np.asarray(X, dtype=float), m)

    def predict(self, X):
        """Multi-hot mask of the top ``m_labels`` ports per sample."""
        idx = self.predict_top_indices(X)
        proba_shape = (np.asarray(X).shape[0], self.spec_.output_dim)
        masks = np.zeros(proba_shape, dtype=np.uint8)
        np.put_along_axis(masks, idx, 1, axis=1)
        return masks


class PortPredictor:
    """Feature pipeline + trained model, exposed to the selection policies.

    Consumes linear SINR values of the observed ports and returns one
    probability per port; the policies never see the model internals.
    """

    def __init__(self, spec, weights, normalizers, observed, n_ports, m_labels=3):
        self.spec = spec
        self.weights = weights
        self.normalizers = list(normalizers)
        self.observed = np.asarray(observed, dtype=int)
        self.n_ports = int(n_ports)
        self.m_labels = int(m_labels)

    @classmethod
    def from_classifier(cls, clf, normalizers, observed, n_ports):
        return cls(clf.spec_, clf.weights_, normalizers, observed, n_ports, clf.m_labels)

    def transform(self, features):
        for norm in self.normalizers:
            features = norm.transform(features)
        return features

    def port_scores(self, observed_sinr):
        """(B, m) linear SINR of the observed ports -> (B, N) probabilities."""
        feats = sequence_features(observed_sinr, self.observed, self.n_ports)
        return model_forward(self.spec, self.weights, self.transform(feats))
