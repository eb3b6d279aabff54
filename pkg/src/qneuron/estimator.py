"""scikit-learn wrapper around the dissipative neuron."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .collision import ReservoirSpec
from .learning import (
    TrainState,
    actual_magnetization,
    analytic_available,
    cost,
    descend,
    grad_cost_analytic,
    grad_cost_numeric,
)
from .master_eq import LindbladSpec
from .spin import check_spin


def _check_unit_interval(a, name):
    if np.any(a < -1.0) or np.any(a > 1.0):
        raise ValueError(f"{name} must lie in [-1, 1]")


class QuantumNeuron(RegressorMixin, BaseEstimator):
    """Spin-J probe whose steady magnetization is the neuron output.

    Each column of ``X`` is one information reservoir, given by the
    ``<sigma_z>`` of its (phase-averaged) units; ``y`` is the desired
    normalized magnetization. ``fit`` learns one coupling per reservoir by
    full-batch gradient descent on the mean of the per-sample costs.

    Parameters
    ----------
    j : float
        Spin of the probe.
    eta : float
        Learning rate.
    max_iter : int
        Maximum number of coupling updates.
    tol : float
        Stop once the mean cost falls below this value.
    init_couplings : array-like or None
        Starting couplings; ``None`` gives 0.02 for every reservoir.
    gradient : {"auto", "analytic", "numeric"}
        ``auto`` uses the closed-form gradient when J <= 1 and there are
        two reservoirs.
    tau : float
        Interaction time used by the numeric steady-state solver.

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
        Trained couplings.
    history_ : list of TrainState
    n_iter_ : int
    """

    def __init__(self, j=1.0, eta=1.2e-5, max_iter=10_000, tol=1e-8, init_couplings=None, gradient="auto", tau=3.0):
        self.j = j
        self.eta = eta
        self.max_iter = max_iter
        self.tol = tol
        self.init_couplings = init_couplings
        self.gradient = gradient
        self.tau = tau

    def _spec(self, row, g) -> LindbladSpec:
        res = tuple(ReservoirSpec.from_sigma_z(float(s), float(gi)) for s, gi in zip(row, g))
        return LindbladSpec(self.j, res, self.tau, 1.0, phase_averaged=True)

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float, y_numeric=True)
        _check_unit_interval(X, "reservoir <sigma_z>")
        _check_unit_interval(y, "target magnetization")
        check_spin(self.j)
        n_features = X.shape[1]
        if self.init_couplings is None:
            g0 = np.full(n_features, 0.02)
        else:
            g0 = np.asarray(self.init_couplings, dtype=float)
            if g0.shape != (n_features,):
                raise ValueError(f"init_couplings must have shape ({n_features},)")
        mode = self.gradient
        if mode == "auto":
            mode = "analytic" if analytic_available(self.j, n_features) else "numeric"
        elif mode == "analytic" and not analytic_available(self.j, n_features):
            raise ValueError("analytic gradient needs J in {1/2, 1} and exactly two reservoirs")

        def objective(g):
            costs, grads, m = [], [], []
            for row, target in zip(X, y):
                spec = self._spec(row, g)
                m_act = actual_magnetization(g, spec, closed_form=(mode == "analytic"))
                if mode == "analytic":
                    grads.append(grad_cost_analytic(g, spec, target))
                else:
                    grads.append(grad_cost_numeric(g, spec, target))
                costs.append(cost(target, m_act))
                m.append(m_act)
            return float(np.mean(costs)), np.mean(grads, axis=0), np.array(m)

        self.history_: list[TrainState] = descend(objective, g0, self.eta, self.max_iter, self.tol)
        self.coef_ = self.history_[-1].couplings
        self.n_iter_ = len(self.history_) - 1
        self.n_features_in_ = n_features
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        _check_unit_interval(X, "reservoir <sigma_z>")
        closed = check_spin(self.j) in (0.5, 1.0)
        return np.array([actual_magnetization(self.coef_, self._spec(row, self.coef_), closed) for row in X])
