"""scikit-learn style wrapper around metric estimation and the s chart."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_points, check_times
from .harness import ChartConfig, build_chart
from .trajectory import FeatureTrajectory


class DynamicRescaler(TransformerMixin, BaseEstimator):
    """Map samples of a trajectory to chart coordinates ``s``.

    ``fit`` estimates the metric from the time-ordered rows of ``X`` and
    anchors a chart at ``reference_times``; ``transform`` returns ``s`` for
    arbitrary points (rows that cannot be mapped are NaN) and
    ``inverse_transform`` walks back from ``s`` to ``x``.

    Parameters
    ----------
    grid_counts : tuple of int
        Metric grid nodes per axis.
    grid_box : (lo, hi), optional
        Fixed grid box; default covers the central ``mass_fraction`` of the data.
    mass_fraction : float
    radius_factor : float
        Neighborhood half-width in grid spacings.
    min_samples : int, optional
        Minimum samples per node (default ``4 * n_features``).
    cond_max : float
    reference_times : sequence of float, optional
        ``(t0, t_1, ..., t_N)``; picked automatically when omitted.
    reference_scale : float
        Multiplies the reference velocities (sets the unit of ``s``).
    sample_interval : float
        Time between rows when ``fit`` is called without ``times``.
    tol_x, max_iter, step_fraction
        Solver settings of the chart.
    self_test : bool
        Run the round-trip self-test during ``fit`` and raise on failure.
    random_state : int
        Seed of the self-test sample.

    Attributes
    ----------
    chart_ : ScaleChart
    reference_times_ : tuple of float
    self_test_ : SelfTestResult or None
    n_features_in_ : int
    """

    def __init__(self, grid_counts=(7, 9), grid_box=None, mass_fraction=0.95, radius_factor=1.0,
                 min_samples=None, cond_max=1e6, reference_times=None, reference_scale=1.0,
                 sample_interval=1.0, tol_x=None, max_iter=50, step_fraction=0.05,
                 self_test=True, random_state=0):
        self.grid_counts = grid_counts
        self.grid_box = grid_box
        self.mass_fraction = mass_fraction
        self.radius_factor = radius_factor
        self.min_samples = min_samples
        self.cond_max = cond_max
        self.reference_times = reference_times
        self.reference_scale = reference_scale
        self.sample_interval = sample_interval
        self.tol_x = tol_x
        self.max_iter = max_iter
        self.step_fraction = step_fraction
        self.self_test = self_test
        self.random_state = random_state

    def fit(self, X, y=None, times=None):
        X = check_points(X, min_samples=3)
        if times is None:
            times = np.arange(len(X)) * float(self.sample_interval)
        times = check_times(times, len(X))
        cfg = ChartConfig(
            counts=tuple(self.grid_counts),
            mass_fraction=self.mass_fraction,
            box=None if self.grid_box is None else (tuple(self.grid_box[0]), tuple(self.grid_box[1])),
            radius_factor=self.radius_factor,
            min_samples=self.min_samples,
            cond_max=self.cond_max,
            reference_scale=self.reference_scale,
            tol_x=self.tol_x,
            max_iter=self.max_iter,
            step_fraction=self.step_fraction,
        )
        refs = None if self.reference_times is None else tuple(self.reference_times)
        self.chart_ = build_chart(FeatureTrajectory(times, X), refs, cfg)
        self.reference_times_ = tuple(self.chart_.frame.source_times)
        self.self_test_ = self.chart_.check(seed=self.random_state) if self.self_test else None
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "chart_")
        X = check_points(X, n_features=self.n_features_in_)
        r = self.chart_.transform_points(X)
        return np.where(r.ok[:, None], r.s, np.nan)

    def inverse_transform(self, S):
        check_is_fitted(self, "chart_")
        S = check_points(S, n_features=self.n_features_in_)
        x, failed, _ = self.chart_._forward(S)
        return np.where((failed < 0)[:, None], x, np.nan)
