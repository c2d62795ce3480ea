"""scikit-learn compatible front ends for the solver and its neural surrogate.

Both estimators map the seven operating-point features
``[i_out1, i_out2, i_out3, d1, d2, d3, v_in]`` to two relative shifts
``[(s2 - s1)/360, (s3 - s1)/360]`` in [0, 1).
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import mlp
from .dsss import targets_for
from .harmonics import OperatingPoint, reference_system
from .mlp import N_FEATURES, N_OUTPUTS, TrainConfig


def check_features(X) -> np.ndarray:
    X = check_array(X, dtype=np.float64, ensure_all_finite=True)
    if X.shape[1] != N_FEATURES:
        raise ValueError(f"expected {N_FEATURES} features (i_out x3, d x3, v_in), got {X.shape[1]}")
    return X


def check_targets(X, y):
    X, y = check_X_y(X, y, dtype=np.float64, multi_output=True, y_numeric=True)
    y = np.asarray(y, dtype=np.float64).reshape(len(y), -1)
    if X.shape[1] != N_FEATURES:
        raise ValueError(f"expected {N_FEATURES} features, got {X.shape[1]}")
    if y.shape[1] != N_OUTPUTS:
        raise ValueError(f"expected {N_OUTPUTS} targets per row, got {y.shape[1]}")
    if np.any(y < 0) or np.any(y >= 1):
        raise ValueError("targets are fractions of a period and must lie in [0, 1)")
    return X, y


class PhaseShiftRegressor(RegressorMixin, BaseEstimator):
    """Neural surrogate of the optimum phase-shift solver.

    Parameters mirror :class:`phaseshift.mlp.TrainConfig`; defaults follow
    :meth:`TrainConfig.tuned`. ``wrap_targets``
    moves the 0/1 seam of each circular target into the widest gap of the
    training data before fitting. When no validation set is passed to
    :meth:`fit`, ``validation_fraction`` of the training rows is held out.

    Attributes
    ----------
    model_ : MlpModel
        Trained, unfused network (best validation epoch).
    history_ : History
        Per-epoch train/validation MSE.
    """

    def __init__(self, hidden_layers=3, width=20, dropout=0.0, batch_size=32, learning_rate=1e-3,
                 max_epochs=8000, patience=500, lr_patience=100, lr_factor=0.5, min_lr=1e-6,
                 validation_fraction=0.1, wrap_targets=True, random_state=0):
        self.hidden_layers = hidden_layers
        self.width = width
        self.dropout = dropout
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.max_epochs = max_epochs
        self.patience = patience
        self.lr_patience = lr_patience
        self.lr_factor = lr_factor
        self.min_lr = min_lr
        self.validation_fraction = validation_fraction
        self.wrap_targets = wrap_targets
        self.random_state = random_state

    def _config(self) -> TrainConfig:
        return TrainConfig(
            hidden_layers=self.hidden_layers, width=self.width, dropout=self.dropout,
            batch_size=self.batch_size, learning_rate=self.learning_rate,
            max_epochs=self.max_epochs, patience=self.patience, seed=self.random_state,
            lr_patience=self.lr_patience, lr_factor=self.lr_factor, min_lr=self.min_lr,
        )

    def fit(self, X, y, X_val=None, y_val=None):
        X, y = check_targets(X, y)
        cfg = self._config()
        if X_val is None:
            rng = np.random.default_rng(self.random_state)
            perm = rng.permutation(len(X))
            n_val = max(1, int(round(self.validation_fraction * len(X))))
            X_val, y_val = X[perm[:n_val]], y[perm[:n_val]]
            X, y = X[perm[n_val:]], y[perm[n_val:]]
        else:
            X_val, y_val = check_targets(X_val, y_val)

        self.model_, self.history_ = mlp.fit(X, y, X_val, y_val, cfg, wrap_targets=self.wrap_targets)
        self.n_features_in_ = N_FEATURES
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        return mlp.predict(self.model_, check_features(X))

    def predict_shifts(self, X):
        """Shifts ``[0, s2 - s1, s3 - s1]`` in degrees, one row per operating point."""
        rel = self.predict(X) * 360.0
        return np.column_stack([np.zeros(len(rel)), rel])

    def score(self, X, y, sample_weight=None):
        """Negative circular mean absolute error in degrees (higher is better)."""
        X, y = check_targets(X, y)
        err = mlp.circular_error_deg(self.predict(X) * 360.0, y * 360.0).mean(axis=1)
        return -float(np.average(err, weights=sample_weight))

    def evaluate(self, X, y, counter_ratio=120) -> mlp.EvalReport:
        X, y = check_targets(X, y)
        return mlp.evaluate(self.predict(X), None, y, counter_ratio=counter_ratio)

    def fused_model(self) -> mlp.MlpModel:
        check_is_fitted(self, "model_")
        return mlp.fuse_normalization(self.model_)

    @classmethod
    def from_model(cls, model: mlp.MlpModel, **params) -> "PhaseShiftRegressor":
        """Wrap an already trained (fused or unfused) network."""
        est = cls(hidden_layers=len(model.layers) - 1, width=model.layers[0].n_out, **params)
        est.model_ = model
        est.n_features_in_ = model.layers[0].n_in
        return est


class AnalyticPhaseShifter(BaseEstimator):
    """The closed-form solver behind the same predict() interface.

    Nothing is learned; ``fit`` only validates input. ``system`` defaults to
    the three-phase reference prototype.
    """

    def __init__(self, system=None):
        self.system = system

    def fit(self, X, y=None):
        check_features(X)
        self.system_ = self.system if self.system is not None else reference_system()
        self.n_features_in_ = N_FEATURES
        return self

    def predict(self, X):
        check_is_fitted(self, "system_")
        X = check_features(X)
        out = np.empty((len(X), N_OUTPUTS))
        for r, row in enumerate(X):
            op = OperatingPoint(tuple(row[0:3]), tuple(row[3:6]), float(row[6]))
            out[r] = targets_for(self.system_, op)
        return out
