"""Metric estimation and the Levi-Civita connection on a sampled metric."""

from .connection import (
    GeodesicState,
    christoffel,
    curvature_scalar,
    integrate_geodesic,
    parallel_transport,
)
from .interp import TensorCubic
from .metric import (
    METRIC_FORMAT,
    GridSpec,
    MetricField,
    VelocitySeries,
    auto_grid,
    estimate_metric_grid,
    estimate_velocities,
)


def metric_at(field: MetricField, point):
    """Interpolated covariant metric at ``point``."""
    return field.metric_at(point)


__all__ = [
    "METRIC_FORMAT",
    "GeodesicState",
    "GridSpec",
    "MetricField",
    "TensorCubic",
    "VelocitySeries",
    "auto_grid",
    "christoffel",
    "curvature_scalar",
    "estimate_metric_grid",
    "estimate_velocities",
    "integrate_geodesic",
    "metric_at",
    "parallel_transport",
]
