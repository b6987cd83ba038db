"""Invariant signal representations by dynamic rescaling.

A trajectory's velocity statistics define a Riemannian metric on feature
space; parallel transport of reference vectors then builds coordinates
``s`` that do not change when the signal is subjected to an invertible
transformation.
"""

__version__ = "0.1.0"

from .audio import (
    AudioClip,
    CepstraConfig,
    ChannelFilterSpec,
    Spectrogram,
    apply_channel_filter,
    cepstra,
    load_wav,
    stft,
    write_wav,
)
from .chart import (
    ReferenceFrame,
    ScaleChart,
    choose_reference_times,
    find_curvature_extremum,
    forward_map,
    inverse_map,
    rescale_trajectory,
    select_reference,
    trace_isoclines,
)
from .estimator import DynamicRescaler
from .exceptions import GeoscaleError, InputError, NumericalError, ValidationError
from .geometry import (
    GeodesicState,
    GridSpec,
    MetricField,
    VelocitySeries,
    christoffel,
    curvature_scalar,
    estimate_metric_grid,
    estimate_velocities,
    integrate_geodesic,
    metric_at,
    parallel_transport,
)
from .harness import (
    ChartConfig,
    ComparisonReport,
    SyntheticSpec,
    TransformSpec,
    apply_transform,
    build_chart,
    compare_representations,
    generate_synthetic,
    run_invariance_experiment,
)
from .pca import PcaModel, TrajectoryPCA, fit_pca, project
from .trajectory import FeatureTrajectory, read_trajectory_csv, trajectory_from_csv, trajectory_to_csv

__all__ = sorted(
    name for name, obj in globals().items()
    if not name.startswith("_") and getattr(obj, "__module__", "").startswith("geoscale")
)
