"""Time-ordered feature trajectories and their CSV form."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import DimensionMismatch, InputError, ValidationError


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FeatureTrajectory:
    """Sequence of feature points ``points[i]`` observed at ``times[i]``.

    ``times`` is strictly increasing; ``points`` has shape ``(T, N)``.
    """

    times: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        times = _frozen(self.times)
        points = _frozen(self.points)
        if points.ndim == 1:
            points = _frozen(points[:, None])
        if times.ndim != 1 or points.ndim != 2 or len(times) != len(points):
            raise DimensionMismatch(
                "times and points must have matching length",
                times_shape=list(times.shape), points_shape=list(points.shape),
            )
        if len(times) < 1:
            raise ValidationError("trajectory is empty")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(points))):
            raise ValidationError("trajectory contains non-finite values")
        if np.any(np.diff(times) <= 0):
            raise ValidationError("trajectory times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "points", points)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def window(self, start: float | None = None, end: float | None = None) -> "FeatureTrajectory":
        """Samples with ``start <= t <= end``."""
        keep = np.ones(len(self), dtype=bool)
        if start is not None:
            keep &= self.times >= start
        if end is not None:
            keep &= self.times <= end
        if not keep.any():
            raise ValidationError("time window selects no samples", start=start, end=end)
        return FeatureTrajectory(self.times[keep], self.points[keep])

    def shifted(self, dt: float) -> "FeatureTrajectory":
        return FeatureTrajectory(self.times + dt, self.points)


def trajectory_to_csv(traj: FeatureTrajectory, prefix: str = "x") -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t"] + [f"{prefix}{k + 1}" for k in range(traj.dim)])
    for t, row in zip(traj.times, traj.points):
        writer.writerow([repr(float(t))] + [repr(float(v)) for v in row])
    return buf.getvalue()


def trajectory_from_csv(text: str) -> tuple[FeatureTrajectory, str]:
    """Parse CSV text; returns the trajectory and its column prefix."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise InputError("empty trajectory CSV")
    header = rows[0]
    if len(header) < 2 or header[0] != "t":
        raise InputError("trajectory CSV header must start with 't'", header=header)
    prefix = header[1].rstrip("0123456789")
    expected = ["t"] + [f"{prefix}{k + 1}" for k in range(len(header) - 1)]
    if header != expected:
        raise InputError("malformed trajectory CSV header", header=header)
    body = [r for r in rows[1:] if r]
    try:
        data = np.array([[float(v) for v in r] for r in body], dtype=float)
    except ValueError as exc:
        raise InputError(f"non-numeric value in trajectory CSV: {exc}") from exc
    if data.ndim != 2 or data.shape[0] == 0 or data.shape[1] != len(header):
        raise InputError("trajectory CSV has no rows or ragged rows")
    return FeatureTrajectory(data[:, 0], data[:, 1:]), prefix


def read_trajectory_csv(path) -> FeatureTrajectory:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}", path=str(path)) from exc
    return trajectory_from_csv(text)[0]
