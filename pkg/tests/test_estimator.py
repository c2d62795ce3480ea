import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from phaseshift import AnalyticPhaseShifter, PhaseShiftRegressor, fuse_normalization, forward
from phaseshift.estimator import check_features, check_targets


@pytest.fixture(scope="module")
def small(desk_data):
    train, test, val = desk_data
    return train.subset(slice(0, None, 12)), test.subset(slice(0, 400))


def test_params_round_trip():
    est = PhaseShiftRegressor(hidden_layers=2, width=8, random_state=3)
    params = est.get_params()
    assert params["hidden_layers"] == 2 and params["random_state"] == 3
    twin = clone(est)
    assert twin.get_params() == params
    twin.set_params(width=16)
    assert twin.width == 16 and est.width == 8


def test_not_fitted():
    with pytest.raises(NotFittedError):
        PhaseShiftRegressor().predict(np.zeros((1, 7)))
    with pytest.raises(NotFittedError):
        AnalyticPhaseShifter().predict(np.zeros((1, 7)))


def test_validation_helpers():
    with pytest.raises(ValueError):
        check_features(np.zeros((3, 6)))
    with pytest.raises(ValueError):
        check_features(np.array([[np.nan] * 7]))
    with pytest.raises(ValueError):
        check_targets(np.zeros((2, 7)), np.zeros((2, 3)))
    with pytest.raises(ValueError):
        check_targets(np.zeros((2, 7)), np.full((2, 2), 1.0))
    X, y = check_targets([[0.0] * 7], [[0.1, 0.2]])
    assert X.shape == (1, 7) and y.shape == (1, 2)


def test_fit_predict(small):
    train, test = small
    est = PhaseShiftRegressor(max_epochs=40, patience=40, batch_size=64, random_state=0)
    est.fit(train.features, train.targets)
    pred = est.predict(test.features)
    assert pred.shape == (len(test), 2) and np.all((pred >= 0) & (pred < 1))
    shifts = est.predict_shifts(test.features[:3])
    assert np.all(shifts[:, 0] == 0) and np.allclose(shifts[:, 1:], pred[:3] * 360)
    assert est.score(test.features, test.targets) == pytest.approx(-est.evaluate(test.features,
                                                                                 test.targets).mae_deg)
    fused = est.fused_model()
    assert np.allclose(forward(fused, test.features), forward(est.model_, test.features), atol=1e-9)
    assert est.n_features_in_ == 7


def test_explicit_validation_set(small, desk_data):
    train, _ = small
    _, _, val = desk_data
    est = PhaseShiftRegressor(max_epochs=3, patience=3, random_state=1)
    est.fit(train.features, train.targets, val.features, val.targets)
    assert len(est.history_.val_mse) == 3


def test_from_model(small):
    train, test = small
    est = PhaseShiftRegressor(max_epochs=5, patience=5).fit(train.features, train.targets)
    wrapped = PhaseShiftRegressor.from_model(fuse_normalization(est.model_))
    assert np.allclose(wrapped.predict(test.features), est.predict(test.features), atol=1e-9)


def test_analytic_matches_labels(desk_data):
    _, test, _ = desk_data
    rows = test.subset(slice(0, 200))
    est = AnalyticPhaseShifter().fit(rows.features)
    assert np.array_equal(est.predict(rows.features), rows.targets)
