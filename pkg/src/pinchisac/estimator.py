"""Scikit-learn style front end: one row of ``X`` is one user/target instance."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .experiments import ALGORITHMS, ConfigError, ScenarioConfig, solve_instance


class PinchingISAC(TransformerMixin, BaseEstimator):
    """Joint TPA placement and beamforming for rows ``[x_u, y_u, x_t, y_t]``.

    Nothing is learned from data: ``fit`` validates the hyperparameters and
    the feature layout, ``transform`` returns the TPA positions chosen for
    each row, ``predict`` the achieved rate (0 when the radar requirement
    cannot be met) and ``score`` the mean rate.
    """

    def __init__(self, algorithm="pinching", n_tx=4, n_rx=4, length=40.0, width=20.0,
                 height=3.0, p_max=10.0, sigma_u_dbm=-60.0, sigma_s_dbm=-80.0, gamma_req=4.0,
                 pfa=0.01, alpha=1.0, wavelength=0.05, n_eff=1.4, exhaustive_step=0.5):
        self.algorithm = algorithm
        self.n_tx = n_tx
        self.n_rx = n_rx
        self.length = length
        self.width = width
        self.height = height
        self.p_max = p_max
        self.sigma_u_dbm = sigma_u_dbm
        self.sigma_s_dbm = sigma_s_dbm
        self.gamma_req = gamma_req
        self.pfa = pfa
        self.alpha = alpha
        self.wavelength = wavelength
        self.n_eff = n_eff
        self.exhaustive_step = exhaustive_step

    def _config(self):
        algorithm = self.algorithm.replace("_", "-")
        if algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        try:
            return ScenarioConfig(
                length_m=self.length, width_m=self.width, height_m=self.height,
                wavelength_m=self.wavelength, n_eff=self.n_eff, n_tx=self.n_tx,
                n_rx=self.n_rx, p_max_watts=self.p_max, sigma_u_dbm=self.sigma_u_dbm,
                sigma_s_dbm=self.sigma_s_dbm, gamma_req=self.gamma_req, pfa=self.pfa,
                alpha_abs=self.alpha, algorithms=(algorithm,),
                exhaustive_step_m=self.exhaustive_step)
        except ConfigError as exc:
            raise ValueError(str(exc)) from None

    def _validate(self, X, reset):
        X = check_array(X, dtype=float, ensure_all_finite=True)
        if X.shape[1] != 4:
            raise ValueError(f"expected 4 columns [x_u, y_u, x_t, y_t], got {X.shape[1]}")
        if not reset and X.shape[1] != self.n_features_in_:
            raise ValueError("feature count differs from fit")
        half = self.length / 2
        xs, ys = X[:, [0, 2]], X[:, [1, 3]]
        if np.any(np.abs(xs) > half) or np.any(ys < 0) or np.any(ys > self.width):
            raise ValueError("user or target outside the serving area")
        return X

    def fit(self, X, y=None):
        self.config_ = self._config()
        X = self._validate(X, reset=True)
        self.n_features_in_ = X.shape[1]
        return self

    def solve(self, X):
        """One :class:`TrialResult` per row."""
        check_is_fitted(self, "config_")
        X = self._validate(X, reset=False)
        rows = []
        for i, (xu, yu, xt, yt) in enumerate(X):
            rows += solve_instance(self.config_, (xu, yu), (xt, yt), trial=i)
        return rows

    def transform(self, X):
        """TPA positions per row; NaN where no feasible design exists."""
        out = np.full((len(X), self.n_tx), np.nan)
        for i, r in enumerate(self.solve(X)):
            if r.feasible:
                out[i] = r.x
        return out

    def predict(self, X):
        return np.array([r.rate for r in self.solve(X)])

    def score(self, X, y=None):
        return float(np.mean(self.predict(X)))
