"""scikit-learn style wrapper around the generalized incomplete U-statistic."""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .core import Dataset, EnsembleConfig, make_design
from .ensemble import generalized_incomplete_u
from .exceptions import InvalidArgs
from .generators import Empirical
from .inference import build_ci
from .learners import KINDS, KernelSpec, make_kernel
from .variance import estimate_components


class GeneralizedUStatisticRegressor(RegressorMixin, BaseEstimator):
    """Subsampled ensemble regressor.

    Each prediction averages a base learner over a random design of
    size-``subsample_size`` subsamples, with optional per-subsample
    auxiliary randomness. One design is drawn at ``fit`` and shared by all
    prediction points.

    Parameters
    ----------
    kernel : str, default="knn"
        Base learner: ``knn``, ``cart``, ``rp_tree``, ``ols``, ``mean``,
        ``variance`` or ``random_k``.
    k : int, default=1
        Neighbour count, terminal-node cap or selection size.
    mtry : int, default=0
        Features per split for ``cart`` (0 = all).
    subsample_size : int or None, default=None
        Subsample size s; ``None`` uses ⌈√n⌉.
    n_subsamples : int, default=500
        Target number of subsamples N.
    scheme : {"bernoulli", "fixedn", "complete"}, default="bernoulli"
    random_state : int, default=0
        Master seed for the design and the ω streams.
    n_jobs : int, default=1
        Threads used to evaluate subsamples.
    """

    def __init__(self, kernel="knn", k=1, mtry=0, subsample_size=None,
                 n_subsamples=500, scheme="bernoulli", random_state=0, n_jobs=1):
        self.kernel = kernel
        self.k = k
        self.mtry = mtry
        self.subsample_size = subsample_size
        self.n_subsamples = n_subsamples
        self.scheme = scheme
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _spec(self, target=None) -> KernelSpec:
        return KernelSpec(self.kernel, self.k, self.mtry,
                          None if target is None else tuple(target))

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        if self.kernel not in KINDS:
            raise InvalidArgs(f"unknown kernel {self.kernel!r}")
        n, p = X.shape
        s = self.subsample_size or int(math.ceil(math.sqrt(n)))
        if not 1 <= s <= n:
            raise InvalidArgs(f"subsample_size={s} must lie in [1, {n}]")
        self._spec(np.zeros(p) if self._spec_needs_target() else None).check(s, p)
        self.dataset_ = Dataset(X, y)
        self.config_ = EnsembleConfig(s, self.n_subsamples, self.scheme,
                                      int(self.random_state))
        self.design_ = make_design(n, self.config_)
        self.subsample_size_ = s
        self.realized_n_subsamples_ = self.design_.realized_N
        self.n_features_in_ = p
        return self

    def _predict_one(self, x):
        spec = self._spec(x if self._spec_needs_target() else None)
        res = generalized_incomplete_u(self.dataset_, make_kernel(spec), self.config_,
                                       threads=self.n_jobs, design=self.design_)
        return res.theta_hat

    def _spec_needs_target(self) -> bool:
        return self.kernel in ("ols", "knn", "cart", "rp_tree")

    def predict(self, X):
        check_is_fitted(self, "design_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise InvalidArgs(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return np.array([self._predict_one(x) for x in X])

    def predict_interval(self, X, level=0.95, zeta1=None, zeta_s=None,
                         M_outer=500, M_s=2000):
        """Normal-approximation intervals, one row ``(lower, upper)`` per target.

        Without supplied ``zeta1``/``zeta_s`` the components are estimated by
        resampling the training data, which describes the empirical
        distribution rather than the population and is therefore biased.
        """
        check_is_fitted(self, "design_")
        X = check_array(X, dtype=np.float64)
        centers = self.predict(X)
        s, n = self.subsample_size_, self.dataset_.n
        N = None if self.scheme == "complete" else self.n_subsamples
        out = np.empty((X.shape[0], 2))
        for i, x in enumerate(X):
            z1, zs = zeta1, zeta_s
            if z1 is None or zs is None:
                spec = self._spec(x if self._spec_needs_target() else None)
                comp = estimate_components(spec, Empirical(self.dataset_), s, M_outer,
                                           M_s=M_s, seed=int(self.random_state) + i)
                z1 = comp.zeta1_omega if z1 is None else z1
                zs = comp.zeta_s if zs is None else zs
            ci = build_ci(centers[i], max(z1, 0.0), max(zs, 0.0), n, s, N, level)
            out[i] = ci.lower, ci.upper
        return out
