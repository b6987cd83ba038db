"""Synthetic trajectories, invertible transforms, and representation comparisons."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.signal import lfilter

from ._validation import check_box
from .chart import ReferenceFrame, ScaleChart, choose_reference_times, select_reference
from .exceptions import NoOverlap, OutOfBox, ValidationError
from .geometry.metric import GridSpec, auto_grid, estimate_metric_grid, estimate_velocities
from .trajectory import FeatureTrajectory

_INCOMMENSURATE = np.sqrt([2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0, 23.0, 29.0, 31.0, 37.0])


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a dense synthetic trajectory.

    ``speed`` is the per-axis RMS velocity (box units per second);
    ``persistence`` is the one-sample autocorrelation of the noise-walk
    velocity.
    """

    kind: str = "noise-walk"
    duration_s: float = 100.0
    sample_rate_hz: float = 100.0
    box_lo: tuple = (0.0, 0.0)
    box_hi: tuple = (1.0, 1.0)
    seed: int = 0
    speed: float = 1.0
    persistence: float = 0.5

    def __post_init__(self):
        if self.kind == "filtered-noise-walk":
            object.__setattr__(self, "kind", "noise-walk")
        if self.kind not in ("lissajous", "noise-walk"):
            raise ValidationError("unknown synthetic kind", kind=self.kind)
        check_box(self.box_lo, self.box_hi, len(self.box_lo))
        if self.duration_s <= 0 or self.sample_rate_hz <= 0 or self.speed <= 0:
            raise ValidationError("duration, sample rate and speed must be positive")
        if not 0 <= self.persistence < 1:
            raise ValidationError("persistence must be in [0, 1)")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s * self.sample_rate_hz))

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError("unknown synthetic spec keys", keys=sorted(unknown))
        d = dict(d)
        for k in ("box_lo", "box_hi"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)


def generate_synthetic(spec: SyntheticSpec) -> FeatureTrajectory:
    rng = np.random.default_rng(spec.seed)
    lo, hi = (np.asarray(b, dtype=float) for b in (spec.box_lo, spec.box_hi))
    n, dim = spec.n_samples, lo.size
    dt = 1.0 / spec.sample_rate_hz
    times = np.arange(n) * dt
    if spec.kind == "lissajous":
        center, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        weights = np.array([0.6, 0.3, 0.08])
        points = np.empty((n, dim))
        for d in range(dim):
            ratios = _INCOMMENSURATE[3 * d: 3 * d + 3] / _INCOMMENSURATE[0]
            phases = rng.uniform(0, 2 * np.pi, size=3)
            # scale frequencies so the RMS axis velocity is about spec.speed
            rms_unit = half[d] * np.sqrt(0.5 * np.sum((weights * 2 * np.pi * ratios) ** 2))
            base = spec.speed / rms_unit
            arg = 2 * np.pi * base * ratios[None, :] * times[:, None] + phases[None, :]
            points[:, d] = center[d] + half[d] * (np.sin(arg) @ weights)
        return FeatureTrajectory(times, points)

    rho = spec.persistence
    # central differences of x see (v_i + v_{i+1}) / 2 whose variance is sigma^2 (1 + rho) / 2
    sigma = spec.speed * np.sqrt(2.0 / (1.0 + rho))
    noise = rng.standard_normal((n, dim))
    noise[1:] *= np.sqrt(1 - rho * rho)
    v = lfilter([sigma], [1.0, -rho], noise, axis=0)
    start = rng.uniform(lo, hi)
    free = start + np.concatenate([np.zeros((1, dim)), np.cumsum(v[1:] * dt, axis=0)])
    # reflecting walls: fold the free walk into the box (triangle wave)
    width = hi - lo
    u = np.mod(free - lo, 2 * width)
    points = lo + np.where(u <= width, u, 2 * width - u)
    return FeatureTrajectory(times, points)


@dataclass(frozen=True)
class TransformSpec:
    """Invertible map ``y = warp(A x + b)``.

    The warp acts per axis on ``u = (z - center) / scale`` as
    ``cubic u^3 + alpha u + beta tanh(gamma u)``, which is strictly
    increasing for ``cubic >= 0``, ``alpha > 0`` and ``beta gamma >= 0``.
    """

    kind: str = "linear"
    matrix: tuple | None = None
    offset: tuple | None = None
    center: tuple | None = None
    scale: tuple | None = None
    cubic: tuple | None = None
    alpha: tuple | None = None
    beta: tuple | None = None
    gamma: tuple | None = None
    box_lo: tuple | None = None
    box_hi: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("identity", "linear", "monotone-warp", "composite"):
            raise ValidationError("unknown transform kind", kind=self.kind)
        if self.uses_matrix:
            a = np.asarray(self.matrix, dtype=float)
            if a.ndim != 2 or a.shape[0] != a.shape[1] or abs(np.linalg.det(a)) < 1e-8:
                raise ValidationError("transform matrix must be square and invertible")
        if self.uses_warp:
            cubic, alpha, beta, gamma = (np.asarray(getattr(self, k), dtype=float) for k in ("cubic", "alpha", "beta", "gamma"))
            if np.any(cubic < 0) or np.any(alpha <= 0) or np.any(beta * gamma < 0) or np.any(np.asarray(self.scale) <= 0):
                raise ValidationError("warp parameters do not give a strictly increasing map")

    @property
    def uses_matrix(self) -> bool:
        return self.kind in ("linear", "composite")

    @property
    def uses_warp(self) -> bool:
        return self.kind in ("monotone-warp", "composite")

    def _warp_params(self, dim):
        return [np.broadcast_to(np.asarray(getattr(self, k), dtype=float), (dim,))
                for k in ("center", "scale", "cubic", "alpha", "beta", "gamma")]

    def _warp(self, z):
        center, scale, c3, a, b, g = self._warp_params(z.shape[1])
        u = (z - center) / scale
        return center + scale * (c3 * u**3 + a * u + b * np.tanh(g * u))

    def _warp_jac(self, z):
        center, scale, c3, a, b, g = self._warp_params(z.shape[1])
        u = (z - center) / scale
        return 3 * c3 * u**2 + a + b * g / np.cosh(g * u) ** 2

    def _unwarp(self, y, tol=1e-14, max_iter=200):
        """Bisection on each axis; the forward warp is strictly increasing."""
        center, scale, c3, a, b, g = self._warp_params(y.shape[1])
        target = (y - center) / scale

        def f(u):
            return c3 * u**3 + a * u + b * np.tanh(g * u)

        # |f(u)| >= a |u| - |b|, so |u| <= (|target| + |b|) / a brackets the root
        span = (np.abs(target) + np.abs(b)) / a + 1.0
        lo, hi = -span, span
        for _ in range(max_iter):
            mid = 0.5 * (lo + hi)
            above = f(mid) > target
            hi = np.where(above, mid, hi)
            lo = np.where(above, lo, mid)
            if np.all(hi - lo <= tol * (1 + np.abs(mid))):
                break
        return center + scale * 0.5 * (lo + hi)

    def apply(self, points) -> np.ndarray:
        x = np.atleast_2d(np.asarray(points, dtype=float))
        if self.box_lo is not None:
            lo, hi = np.asarray(self.box_lo), np.asarray(self.box_hi)
            if np.any(x < lo) or np.any(x > hi):
                raise OutOfBox("points outside the transform's valid box")
        z = x
        if self.uses_matrix:
            z = z @ np.asarray(self.matrix, dtype=float).T
            if self.offset is not None:
                z = z + np.asarray(self.offset, dtype=float)
        if self.uses_warp:
            z = self._warp(z)
        return z

    def invert(self, points) -> np.ndarray:
        y = np.atleast_2d(np.asarray(points, dtype=float))
        z = self._unwarp(y) if self.uses_warp else y
        if self.uses_matrix:
            if self.offset is not None:
                z = z - np.asarray(self.offset, dtype=float)
            z = np.linalg.solve(np.asarray(self.matrix, dtype=float), z.T).T
        return z

    def jacobian(self, points) -> np.ndarray:
        x = np.atleast_2d(np.asarray(points, dtype=float))
        dim = x.shape[1]
        a = np.asarray(self.matrix, dtype=float) if self.uses_matrix else np.eye(dim)
        z = x @ a.T + (np.asarray(self.offset, dtype=float) if self.uses_matrix and self.offset is not None else 0.0)
        d = self._warp_jac(z) if self.uses_warp else np.ones_like(z)
        return d[:, :, None] * a[None]

    def max_condition(self, lo, hi, n: int = 9) -> float:
        axes = [np.linspace(a, b, n) for a, b in zip(lo, hi)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(lo))
        return float(np.max(np.linalg.cond(self.jacobian(pts))))

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}

    @classmethod
    def from_dict(cls, d: dict) -> "TransformSpec":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError("unknown transform keys", keys=sorted(unknown))
        return cls(**{k: _tupled(v) for k, v in d.items()})


def _tupled(v):
    if isinstance(v, list):
        return tuple(_tupled(e) for e in v)
    return v


def apply_transform(traj: FeatureTrajectory, t: TransformSpec) -> FeatureTrajectory:
    if t.kind == "identity":
        return FeatureTrajectory(traj.times, traj.points)
    return FeatureTrajectory(traj.times, t.apply(traj.points))


@dataclass
class ComparisonReport:
    rms_diff: list
    normalized_rms: list
    correlation: list
    fraction_compared: float
    n_compared: int
    only_in_a: int
    only_in_b: int

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    denom = np.sqrt(np.dot(a, a) * np.dot(b, b))
    if denom == 0:
        return 1.0 if np.allclose(a, b) else 0.0
    return float(np.clip(np.dot(a, b) / denom, -1.0, 1.0))


def compare_representations(a: FeatureTrajectory, b: FeatureTrajectory) -> ComparisonReport:
    """Per-dimension RMS difference and correlation over shared timestamps.

    ``normalized_rms`` divides by the range of ``a`` on the shared samples.
    """
    if a.dim != b.dim:
        raise ValidationError("trajectories differ in dimension", a=a.dim, b=b.dim)
    common, ia, ib = np.intersect1d(a.times, b.times, assume_unique=True, return_indices=True)
    if common.size == 0:
        raise NoOverlap("trajectories share no timestamps")
    pa, pb = a.points[ia], b.points[ib]
    diff = pa - pb
    rms = np.sqrt(np.mean(diff**2, axis=0))
    span = np.ptp(pa, axis=0)
    norm = np.divide(rms, span, out=np.where(rms == 0, 0.0, np.inf), where=span > 0)
    union = len(a) + len(b) - common.size
    return ComparisonReport(
        rms_diff=rms.tolist(),
        normalized_rms=norm.tolist(),
        correlation=[_pearson(pa[:, d], pb[:, d]) for d in range(a.dim)],
        fraction_compared=common.size / union,
        n_compared=int(common.size),
        only_in_a=int(len(a) - common.size),
        only_in_b=int(len(b) - common.size),
    )


@dataclass(frozen=True)
class ChartConfig:
    """How a chart is fitted to a trajectory.

    ``box`` (lo, hi) fixes the grid; otherwise it covers the central
    ``mass_fraction`` of the samples per axis.
    """

    counts: tuple = (7, 9)
    mass_fraction: float = 0.95
    box: tuple | None = None
    radius_factor: float = 1.0
    min_samples: int | None = None
    cond_max: float = 1e6
    reference_scale: float = 1.0
    history_window_s: float | None = None
    tol_x: float | None = None
    max_iter: int = 50
    step_fraction: float = 0.05


def build_chart(traj: FeatureTrajectory, reference_times, config: ChartConfig = ChartConfig()) -> ScaleChart:
    """Estimate the metric of ``traj`` and anchor a chart at ``reference_times``.

    ``reference_times`` is ``(t0, t_1, ..., t_N)``: the reference point time
    followed by one time per reference vector; ``None`` picks them with
    :func:`choose_reference_times`.
    """
    vel = estimate_velocities(traj)
    history = traj
    hist_vel = vel
    if config.history_window_s is not None:
        start = traj.times[-1] - config.history_window_s
        keep = traj.times >= start
        history = FeatureTrajectory(traj.times[keep], traj.points[keep])
        hist_vel = type(vel)(vel.times[keep], vel.velocities[keep])
    if config.box is not None:
        grid = GridSpec.from_box(config.box[0], config.box[1], config.counts)
    else:
        grid = auto_grid(history, config.counts, config.mass_fraction)
    field = estimate_metric_grid(history, hist_vel, grid, radius=config.radius_factor * grid.spacing,
                                 min_samples=config.min_samples, cond_max=config.cond_max)
    if reference_times is None:
        reference_times = choose_reference_times(traj, vel, field)
    t0, *vec_times = reference_times
    frame = select_reference(traj, vel, t0, *vec_times, scale=config.reference_scale)
    return ScaleChart(field, frame, tol_x=config.tol_x, max_iter=config.max_iter, step_fraction=config.step_fraction)


def run_invariance_experiment(traj: FeatureTrajectory, t: TransformSpec, reference_times,
                              config: ChartConfig = ChartConfig(), config_b: ChartConfig | None = None,
                              subsample: int = 1):
    """Charts on ``traj`` and on its transform with the same reference times.

    Both charts are fitted on every sample; only every ``subsample``-th
    sample is rescaled and compared. Returns ``(report_x, report_s)``.
    """
    if subsample < 1:
        raise ValidationError("subsample must be a positive integer", subsample=subsample)
    other = apply_transform(traj, t)
    chart_a = build_chart(traj, reference_times, config)
    chart_b = build_chart(other, reference_times, config if config_b is None else config_b)
    xa = FeatureTrajectory(traj.times[::subsample], traj.points[::subsample])
    xb = FeatureTrajectory(other.times[::subsample], other.points[::subsample])
    sa, _ = chart_a.rescale_trajectory(xa)
    sb, _ = chart_b.rescale_trajectory(xb)
    if sa is None or sb is None:
        raise NoOverlap("one of the rescaled trajectories is empty")
    return compare_representations(xa, xb), compare_representations(sa, sb)
