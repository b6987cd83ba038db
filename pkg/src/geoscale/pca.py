"""Principal component reduction of feature trajectories."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_points
from .exceptions import DimensionMismatch, InputError, RankDeficient, ValidationError
from .trajectory import FeatureTrajectory, _frozen


@dataclass(frozen=True, eq=False)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", _frozen(self.mean))
        object.__setattr__(self, "components", _frozen(np.atleast_2d(self.components)))
        object.__setattr__(self, "explained_variance", _frozen(self.explained_variance))
        k, n = self.components.shape
        if self.mean.shape != (n,) or self.explained_variance.shape != (k,):
            raise DimensionMismatch("inconsistent PCA model shapes")

    def to_json(self) -> str:
        return json.dumps(
            {
                "mean": self.mean.tolist(),
                "components": self.components.tolist(),
                "explained_variance": self.explained_variance.tolist(),
            },
            indent=1,
        )

    @classmethod
    def from_json(cls, text: str) -> "PcaModel":
        try:
            d = json.loads(text)
            return cls(np.array(d["mean"]), np.array(d["components"]), np.array(d["explained_variance"]))
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise InputError(f"malformed PCA model JSON: {exc}") from exc


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    # largest |entry| positive; argmax returns the lowest index on ties
    lead = np.argmax(np.abs(vectors), axis=1)
    signs = np.sign(vectors[np.arange(len(vectors)), lead])
    signs[signs == 0] = 1.0
    return vectors * signs[:, None]


def fit_pca(traj: FeatureTrajectory, k: int) -> PcaModel:
    """Top-``k`` eigenvectors of the (population) sample covariance."""
    x = traj.points
    t, n = x.shape
    if not 0 < k <= n or t <= k:
        raise ValidationError("need 0 < k <= N and T > k", k=k, N=n, T=t)
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / t
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    tol = max(evals[0], 0.0) * n * np.finfo(float).eps * 10
    if np.count_nonzero(evals > tol) < k or evals[0] <= 0:
        raise RankDeficient("fewer than k non-zero covariance eigenvalues", k=k)
    return PcaModel(mean, _fix_signs(evecs[:, :k].T), np.maximum(evals[:k], 0.0))


def project(traj: FeatureTrajectory, model: PcaModel) -> FeatureTrajectory:
    if traj.dim != model.mean.size:
        raise DimensionMismatch("trajectory dimension does not match PCA model", got=traj.dim, expected=model.mean.size)
    return FeatureTrajectory(traj.times, (traj.points - model.mean) @ model.components.T)


class TrajectoryPCA(TransformerMixin, BaseEstimator):
    """Estimator wrapper around :func:`fit_pca` / :func:`project`.

    Parameters
    ----------
    n_components : int
        Number of principal components to keep.
    """

    def __init__(self, n_components: int = 2):
        self.n_components = n_components

    def fit(self, X, y=None):
        X = check_points(X, min_samples=self.n_components + 1)
        times = np.arange(len(X), dtype=float)
        self.model_ = fit_pca(FeatureTrajectory(times, X), self.n_components)
        self.components_ = self.model_.components
        self.mean_ = self.model_.mean
        self.explained_variance_ = self.model_.explained_variance
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        X = check_points(X, n_features=self.n_features_in_)
        return (X - self.mean_) @ self.components_.T

    def inverse_transform(self, X):
        check_is_fitted(self, "model_")
        return np.asarray(X, dtype=float) @ self.components_ + self.mean_
