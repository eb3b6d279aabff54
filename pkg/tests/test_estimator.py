import pickle

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import FunctionTransformer

from qneuron import QuantumNeuron


@pytest.fixture(scope="module")
def data():
    rng = np.random.default_rng(0)
    X = rng.uniform(-1, 1, (20, 2))
    teacher = QuantumNeuron(j=1.0)
    teacher.coef_ = np.array([0.01, 0.03])
    teacher.n_features_in_ = 2
    return X, teacher.predict(X)


def test_params_round_trip():
    est = QuantumNeuron(j=0.5, eta=1e-4)
    params = est.get_params()
    assert params["j"] == 0.5 and params["eta"] == 1e-4
    assert clone(est).get_params() == params
    est.set_params(max_iter=7)
    assert est.max_iter == 7


def test_init_stores_parameters_only():
    est = QuantumNeuron()
    assert not [k for k in vars(est) if k.endswith("_")]


def test_unfitted_predict():
    with pytest.raises(NotFittedError):
        QuantumNeuron().predict([[0.1, 0.2]])


def test_fit_recovers_teacher(data):
    X, y = data
    est = QuantumNeuron(j=1.0, eta=1e-4, max_iter=3000, tol=1e-10)
    assert est.fit(X, y) is est
    assert est.n_features_in_ == 2
    assert est.n_iter_ == len(est.history_) - 1
    # only the coupling ratio is identifiable
    assert est.coef_[1] / est.coef_[0] == pytest.approx(3.0, rel=1e-2)
    assert est.score(X, y) > 0.9999
    costs = [s.cost for s in est.history_]
    assert np.all(np.diff(costs) <= 0)


def test_fit_is_idempotent_and_deterministic(data):
    X, y = data
    a = QuantumNeuron(eta=1e-4, max_iter=50).fit(X, y)
    b = QuantumNeuron(eta=1e-4, max_iter=50).fit(X, y)
    np.testing.assert_array_equal(a.coef_, b.coef_)
    np.testing.assert_array_equal(a.predict(X), a.fit(X, y).predict(X))


def test_numeric_gradient_for_higher_spin(data):
    X, y = data
    est = QuantumNeuron(j=1.5, eta=1e-4, max_iter=5).fit(X[:4], y[:4])
    assert est.coef_.shape == (2,)
    costs = [s.cost for s in est.history_]
    assert costs[-1] <= costs[0]
    with pytest.raises(ValueError):
        QuantumNeuron(j=1.5, gradient="analytic").fit(X, y)


def test_input_validation(data):
    X, y = data
    with pytest.raises(ValueError):
        QuantumNeuron().fit(X * 2, y)
    with pytest.raises(ValueError):
        QuantumNeuron().fit(X, y * 3)
    with pytest.raises(ValueError):
        QuantumNeuron().fit(X[:5], y[:4])
    with pytest.raises(ValueError):
        QuantumNeuron(j=0.3).fit(X, y)
    with pytest.raises(ValueError):
        QuantumNeuron(init_couplings=[0.1]).fit(X, y)
    est = QuantumNeuron(max_iter=2).fit(X, y)
    with pytest.raises(ValueError):
        est.predict(X[:, :1])
    with pytest.raises(ValueError):
        est.predict(X[0])


def test_integer_and_list_inputs():
    est = QuantumNeuron(max_iter=2).fit([[1, -1], [0, 1]], [0.5, 0.2])
    assert est.predict([[1, 0]]).shape == (1,)


def test_pickle_round_trip(data):
    X, y = data
    est = QuantumNeuron(max_iter=3).fit(X, y)
    again = pickle.loads(pickle.dumps(est))
    np.testing.assert_array_equal(again.predict(X), est.predict(X))


def test_pipeline(data):
    X, y = data
    pipe = make_pipeline(FunctionTransformer(np.clip, kw_args={"a_min": -1, "a_max": 1}),
                         QuantumNeuron(max_iter=3))
    assert pipe.fit(X, y).predict(X).shape == (len(X),)
