"""scikit-learn style front ends.

:class:`HarmonicEstimator` predicts a harmonic function ``h(x) = E^x f(X_tau)``
at query points; :class:`HolderExponentRegressor` fits the power law
``|dh| ~ exp(intercept) * rho0**beta``. Both follow the usual
``get_params`` / ``fit`` / ``predict`` conventions, so they clone and
compose like any other estimator.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .constants import fit_empirical_beta
from .exit_measure import HarmonicSpec, harmonic_values
from .geometry import Ball, as_points
from .kernel import KernelSpec, radial_sampler
from .simulator import SimConfig
from .stats import normal_ci

__all__ = ["HarmonicEstimator", "HolderExponentRegressor"]


class HarmonicEstimator(BaseEstimator):
    """Monte Carlo estimate of the harmonic function of a payoff on a ball.

    Parameters
    ----------
    kernel : KernelSpec
        Jump kernel of the process.
    payoff : HarmonicSpec
        Bounded payoff on the complement of the ball.
    radius : float
        Radius of the ball, centred at ``center`` (origin by default).
    n_paths : int
        Paths per query point. All points share path ids (common random numbers).
    seed : int
        Master seed.
    epsilon : float or None
        Jump cutoff; ``None`` means ``1e-3 * radius``.
    """

    def __init__(self, kernel: KernelSpec | None = None, payoff: HarmonicSpec | None = None,
                 radius: float = 1.0, center=None, n_paths: int = 10_000, seed: int = 0,
                 epsilon: float | None = None):
        self.kernel = kernel
        self.payoff = payoff
        self.radius = radius
        self.center = center
        self.n_paths = n_paths
        self.seed = seed
        self.epsilon = epsilon

    def fit(self, X=None, y=None):
        """Validate the set-up and build the jump sampler; ``X`` and ``y`` are ignored."""
        if self.kernel is None or self.payoff is None:
            raise ValueError("kernel and payoff are required")
        d = self.kernel.d
        c = tuple(np.zeros(d)) if self.center is None else tuple(self.center)
        self.ball_ = Ball(c, self.radius)
        self.config_ = SimConfig(epsilon=self.epsilon, master_seed=self.seed, n_paths=self.n_paths)
        self.eps_ = self.config_.eps_for(self.kernel, self.radius)
        self.sampler_ = radial_sampler(self.kernel, self.eps_)
        self.n_features_in_ = d
        return self

    def _values(self, X):
        check_is_fitted(self, "ball_")
        pts = as_points(X, self.kernel.d)
        vals, _ = harmonic_values(self.kernel, [self.payoff], self.ball_, pts, self.n_paths,
                                  self.seed, config=self.config_, eps=self.eps_)
        return vals[:, 0, :]

    def predict(self, X) -> np.ndarray:
        """``h`` at each row of ``X``."""
        return self._values(X).mean(axis=1)

    def predict_interval(self, X):
        """``(h, lower, upper)`` with 99% normal intervals."""
        v = self._values(X)
        mean = v.mean(axis=1)
        se = v.std(axis=1, ddof=1) / np.sqrt(v.shape[1])
        lo, hi = normal_ci(mean, se)
        return mean, lo, hi


class HolderExponentRegressor(RegressorMixin, BaseEstimator):
    """Least-squares fit of ``ln y = intercept + beta ln x`` on the points above a noise floor.

    ``X`` holds ``rho0`` (one column) and ``y`` the absolute differences
    ``|h(x) - h(x0)|``. ``floor`` is a scalar; per-sample floors may be
    passed to :meth:`fit` as ``sample_floor``.
    """

    def __init__(self, floor: float = 0.0):
        self.floor = floor

    def fit(self, X, y, sample_floor=None):
        X = np.asarray(X, dtype=float).reshape(len(y), -1)
        y = np.asarray(y, dtype=float)
        floor = self.floor if sample_floor is None else sample_floor
        res = fit_empirical_beta(np.column_stack([X[:, 0], y]), floor)
        if not res.available:
            raise ValueError(f"fit unavailable: {res.reason}")
        self.coef_ = np.array([res.beta])
        self.intercept_ = res.intercept
        self.stderr_ = res.stderr
        self.n_used_ = res.n_used
        self.n_features_in_ = 1
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "coef_")
        X = np.asarray(X, dtype=float).reshape(-1, 1)
        return np.exp(self.intercept_) * X[:, 0] ** self.coef_[0]
