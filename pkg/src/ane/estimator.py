"""scikit-learn compatible regressors built on the adaptive training loop.

``fit(X, y)`` treats the rows of ``X`` as quadrature points with weights
``sample_weight`` (uniform ``1/N`` by default), so the fitted network
minimizes the weighted least-squares error over the sample.  The hinge
initialization uses the bounding box of ``X`` as the domain.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import _check_sample_weight, check_is_fitted, validate_data

from .driver import AneConfig, ane_fixed_mesh, ane_full, fixed_network
from .network import evaluate_batch
from .optimize import TrainConfig
from .quadrature import Domain, WeightedPoints, uniform_mesh

__all__ = ["AdaptiveReLURegressor", "ReLUNetworkRegressor"]


class _ReluBase(RegressorMixin, BaseEstimator):
    def _train_config(self):
        return TrainConfig(
            learning_rate=self.learning_rate,
            plateau_window=self.plateau_window,
            plateau_rel=self.plateau_rel,
            max_iters=self.max_iter,
            seed=self.random_state,
        )

    def _points(self, X, y, sample_weight):
        X, y = validate_data(self, X, y, y_numeric=True, dtype=np.float64)
        w = _check_sample_weight(sample_weight, X, dtype=np.float64)
        if np.any(w < 0):
            raise ValueError("sample_weight must be nonnegative")
        keep = w > 0  # zero-weight rows would still move the bounding box
        if not keep.any():
            raise ValueError("sample_weight has no positive entry")
        return WeightedPoints(X[keep], w[keep] / w[keep].sum()), y[keep]

    def _store(self, report):
        self.model_ = report.model
        self.report_ = report
        self.n_neurons_ = report.model.n_neurons
        self.estimator_ = report.final.estimator
        self.converged_ = report.converged
        self.n_iter_ = int(sum(r.train_iterations for r in report.records))
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = validate_data(self, X, reset=False, dtype=np.float64)
        return evaluate_batch(self.model_, X)

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.input_tags.sparse = False
        return tags


class AdaptiveReLURegressor(_ReluBase):
    """Two-layer ReLU regressor whose width grows until a relative error
    target is met.

    Parameters
    ----------
    epsilon : float
        Target for the relative weighted residual ``||y - v|| / ||y||``.
    enhancement : {"local_average", "local_bulk", "global"}
        How new neurons are chosen after each training round.
    gamma1 : float
        Share of the squared error that bulk marking must cover.
    alpha2 : float
        Convergence-rate guess used by global growth before two rounds exist.
    global_init : {"uniform", "random"}
        Placement of neurons added by global growth.
    initial_m0 : int
        The starting network has ``m0 + 1`` axis-parallel hinges per feature.
    max_outer_iters, max_neurons : int
        Budget on enhancement rounds and on the final width.
    learning_rate, plateau_window, plateau_rel, max_iter :
        Adam step size and stopping rule for each training round.
    random_state : int
        Seed for random neuron placement.
    """

    def __init__(
        self,
        epsilon=0.005,
        enhancement="local_average",
        gamma1=0.7,
        alpha2=1.0,
        global_init="uniform",
        initial_m0=9,
        max_outer_iters=10,
        max_neurons=None,
        learning_rate=1e-3,
        plateau_window=2000,
        plateau_rel=1e-3,
        max_iter=200_000,
        random_state=0,
    ):
        self.epsilon = epsilon
        self.enhancement = enhancement
        self.gamma1 = gamma1
        self.alpha2 = alpha2
        self.global_init = global_init
        self.initial_m0 = initial_m0
        self.max_outer_iters = max_outer_iters
        self.max_neurons = max_neurons
        self.learning_rate = learning_rate
        self.plateau_window = plateau_window
        self.plateau_rel = plateau_rel
        self.max_iter = max_iter
        self.random_state = random_state

    def _config(self, **extra):
        return AneConfig(
            epsilon=self.epsilon,
            enhancement=self.enhancement,
            gamma1=self.gamma1,
            alpha2=self.alpha2,
            global_init=self.global_init,
            initial_m0=self.initial_m0,
            max_outer_iters=self.max_outer_iters,
            max_neurons=self.max_neurons,
            train=self._train_config(),
            seed=self.random_state,
            **extra,
        )

    def fit(self, X, y, sample_weight=None):
        pts, y = self._points(X, y, sample_weight)
        return self._store(ane_fixed_mesh(y, pts, self._config(amr=False)))

    def fit_function(self, f, domain, mesh_counts, amr=False, gamma2=0.9):
        """Fit a vectorized callable ``f`` on a midpoint mesh over ``domain``.

        With ``amr=True`` the mesh is also refined where the residual
        concentrates.
        """
        if not isinstance(domain, Domain):
            lower, upper = np.asarray(domain, dtype=float)
            domain = Domain(tuple(np.atleast_1d(lower)), tuple(np.atleast_1d(upper)))
        mesh = uniform_mesh(domain, mesh_counts)
        cfg = self._config(amr=amr, gamma2=gamma2, initial_mesh_counts=tuple(np.broadcast_to(mesh_counts, (domain.dim,))))
        report = ane_full(f, cfg, mesh=mesh) if amr else ane_fixed_mesh(f, mesh, cfg)
        self.n_features_in_ = domain.dim
        return self._store(report)


class ReLUNetworkRegressor(_ReluBase):
    """Fixed-width two-layer ReLU regressor.

    ``n_neurons`` axis-parallel hinges are spread uniformly over the
    bounding box of the data (it must be a multiple of the number of
    features); output weights come from the linear least-squares solve and
    then all parameters are trained with Adam.
    """

    def __init__(
        self,
        n_neurons=20,
        learning_rate=1e-3,
        plateau_window=2000,
        plateau_rel=1e-3,
        max_iter=200_000,
        random_state=0,
    ):
        self.n_neurons = n_neurons
        self.learning_rate = learning_rate
        self.plateau_window = plateau_window
        self.plateau_rel = plateau_rel
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y, sample_weight=None):
        pts, y = self._points(X, y, sample_weight)
        cfg = AneConfig(epsilon=np.finfo(float).tiny, amr=False, train=self._train_config(), seed=self.random_state)
        return self._store(fixed_network(y, pts, self.n_neurons, cfg))
