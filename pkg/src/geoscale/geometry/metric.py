"""Metric estimation from trajectory velocities and its smooth interpolation."""

from __future__ import annotations

import itertools
import json
import threading
from dataclasses import dataclass

import numpy as np

from .._validation import check_box
from ..exceptions import (
    DimensionMismatch,
    InputError,
    NoValidNodes,
    NonMonotonicTimes,
    OutOfDomain,
    ValidationError,
)
from ..trajectory import FeatureTrajectory, _frozen
from .interp import TensorCubic

METRIC_FORMAT = "geoscale-metric-v1"


@dataclass(frozen=True, eq=False)
class GridSpec:
    """Evenly spaced rectangular lattice of ``prod(counts)`` nodes."""

    origin: np.ndarray
    spacing: np.ndarray
    counts: tuple

    def __post_init__(self):
        origin = _frozen(np.atleast_1d(self.origin))
        spacing = _frozen(np.atleast_1d(self.spacing))
        counts = tuple(int(c) for c in np.atleast_1d(self.counts))
        if not (origin.shape == spacing.shape == (len(counts),)):
            raise DimensionMismatch("origin, spacing and counts must share a dimension")
        if np.any(spacing <= 0) or any(c < 2 for c in counts):
            raise ValidationError("grid needs positive spacing and at least 2 nodes per axis")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_box(cls, lo, hi, counts) -> "GridSpec":
        counts = tuple(int(c) for c in counts)
        if any(c < 2 for c in counts):
            raise ValidationError("grid needs at least 2 nodes per axis", counts=list(counts))
        lo, hi = check_box(lo, hi, len(counts))
        return cls(lo, (hi - lo) / (np.array(counts) - 1), counts)

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def axes(self) -> list[np.ndarray]:
        return [o + h * np.arange(c) for o, h, c in zip(self.origin, self.spacing, self.counts)]

    @property
    def upper(self) -> np.ndarray:
        return self.origin + self.spacing * (np.array(self.counts) - 1)

    def nodes(self) -> np.ndarray:
        """Node coordinates, shape ``counts + (N,)``."""
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)

    def to_dict(self) -> dict:
        return {"origin": self.origin.tolist(), "spacing": self.spacing.tolist(), "counts": list(self.counts)}


@dataclass(frozen=True, eq=False)
class VelocitySeries:
    times: np.ndarray
    velocities: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "times", _frozen(self.times))
        object.__setattr__(self, "velocities", _frozen(self.velocities))
        if len(self.times) != len(self.velocities):
            raise DimensionMismatch("times and velocities differ in length")

    def at(self, t: float) -> np.ndarray:
        return self.velocities[int(np.argmin(np.abs(self.times - t)))]


def estimate_velocities(traj: FeatureTrajectory) -> VelocitySeries:
    """Central differences inside, one-sided differences at the two ends."""
    t, x = traj.times, traj.points
    if len(t) < 3:
        raise ValidationError("need at least 3 samples to estimate velocities", T=len(t))
    if np.any(np.diff(t) <= 0):
        raise NonMonotonicTimes("times must be strictly increasing")
    v = np.empty_like(x)
    v[1:-1] = (x[2:] - x[:-2]) / (t[2:] - t[:-2])[:, None]
    v[0] = (x[1] - x[0]) / (t[1] - t[0])
    v[-1] = (x[-1] - x[-2]) / (t[-1] - t[-2])
    return VelocitySeries(t, v)


def _largest_valid_box(valid: np.ndarray) -> tuple[slice, ...] | None:
    """Biggest axis-aligned index box of all-valid nodes, >= 2 nodes per axis.

    Ties go to the lexicographically smallest (start, stop) tuple.
    """
    ranges = [[(a, b) for a in range(n) for b in range(a + 2, n + 1)] for n in valid.shape]
    best, best_size = None, 0
    for combo in itertools.product(*ranges):
        size = int(np.prod([b - a for a, b in combo]))
        if size <= best_size:
            continue
        box = tuple(slice(a, b) for a, b in combo)
        if valid[box].all():
            best, best_size = box, size
    return best


class MetricField:
    """Sampled covariant metric on a grid, plus its cubic interpolant.

    ``g_samples`` has shape ``counts + (N, N)``; invalid nodes hold NaN and
    are ``False`` in ``valid``. Queries are restricted to the largest
    all-valid sub-box of the grid and never extrapolate.
    """

    def __init__(self, grid: GridSpec, g_samples, valid=None, eig_floor: float = 1e-9):
        g = np.array(g_samples, dtype=float)
        n = grid.dim
        if g.shape != grid.counts + (n, n):
            raise DimensionMismatch("metric samples do not match grid", shape=list(g.shape))
        if valid is None:
            valid = np.all(np.isfinite(g), axis=(-2, -1))
        valid = np.array(valid, dtype=bool)
        g[~valid] = np.nan
        g = 0.5 * (g + np.swapaxes(g, -1, -2))
        if valid.any() and np.any(np.linalg.eigvalsh(g[valid])[:, 0] <= 0):
            raise ValidationError("valid metric samples must be positive definite")
        box = _largest_valid_box(valid)
        if box is None:
            raise NoValidNodes("no 2x2 block of valid metric nodes", n_valid=int(valid.sum()))
        self.grid = grid
        self.g_samples = _frozen(g)
        self.valid = _frozen(valid, dtype=bool)
        self.eig_floor = eig_floor
        self.index_box = box
        axes = [ax[s] for ax, s in zip(grid.axes, box)]
        sub = g[box]
        self._interp = TensorCubic(axes, sub.reshape(sub.shape[:n] + (n * n,)))
        self.lo = self._interp.lo.copy()
        self.hi = self._interp.hi.copy()
        self._eps = 1e-9 * grid.spacing
        self._lock = threading.Lock()
        self.clamp_count = 0

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def min_spacing(self) -> float:
        return float(np.min(self.grid.spacing))

    def contains(self, points) -> np.ndarray:
        p = np.atleast_2d(points)
        return np.all((p >= self.lo - self._eps) & (p <= self.hi + self._eps), axis=1)

    def _require_inside(self, points):
        if not np.all(self.contains(points)):
            raise OutOfDomain(
                "point outside the metric's valid region",
                point=np.asarray(points).tolist(), lo=self.lo.tolist(), hi=self.hi.tolist(),
            )

    def _clamp(self, g):
        n = self.dim
        tr = np.trace(g, axis1=-2, axis2=-1)
        floor = self.eig_floor * tr
        if n == 2:
            a, b, c = g[:, 0, 0], g[:, 0, 1], g[:, 1, 1]
            lam_min = 0.5 * (a + c) - np.sqrt(0.25 * (a - c) ** 2 + b * b)
        else:
            lam_min = np.linalg.eigvalsh(g)[:, 0]
        bad = lam_min < floor
        if np.any(bad):
            w, q = np.linalg.eigh(g[bad])
            w = np.maximum(w, floor[bad][:, None])
            g = g.copy()
            g[bad] = np.einsum("mij,mj,mkj->mik", q, w, q)
            with self._lock:
                self.clamp_count += int(bad.sum())
        return g

    def metric_batch(self, points, grad: bool = False):
        """Metric ``(M, N, N)`` and optionally ``dg[m, i, j, l] = d_l g_ij``.

        No domain check; use :meth:`metric_at` for guarded single queries.
        """
        n = self.dim
        pts = np.atleast_2d(points)
        if grad:
            val, dval = self._interp.evaluate(pts, grad=True)
            dg = dval.reshape(-1, n, n, n)
            dg = 0.5 * (dg + np.swapaxes(dg, 1, 2))
        else:
            val = self._interp.evaluate(pts)
        g = val.reshape(-1, n, n)
        g = self._clamp(0.5 * (g + np.swapaxes(g, 1, 2)))
        return (g, dg) if grad else g

    def metric_at(self, point) -> np.ndarray:
        p = np.asarray(point, dtype=float).reshape(1, -1)
        if p.shape[1] != self.dim:
            raise DimensionMismatch("point dimension does not match metric", got=p.shape[1], expected=self.dim)
        self._require_inside(p)
        return self.metric_batch(p)[0]

    # serialization -----------------------------------------------------
    def to_dict(self) -> dict:
        n = self.dim
        flat = self.g_samples.reshape(-1, n * n)
        return {
            "format": METRIC_FORMAT,
            "grid": self.grid.to_dict(),
            "g": [None if not np.all(np.isfinite(r)) else r.tolist() for r in flat],
            "valid": self.valid.reshape(-1).astype(int).tolist(),
            "eig_floor": self.eig_floor,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricField":
        if d.get("format") != METRIC_FORMAT:
            raise InputError("not a metric field document", format=d.get("format"))
        grid = GridSpec(np.array(d["grid"]["origin"]), np.array(d["grid"]["spacing"]), tuple(d["grid"]["counts"]))
        n = grid.dim
        g = np.array([[np.nan] * (n * n) if r is None else r for r in d["g"]], dtype=float)
        valid = np.array(d["valid"], dtype=bool).reshape(grid.counts)
        return cls(grid, g.reshape(grid.counts + (n, n)), valid, eig_floor=d.get("eig_floor", 1e-9))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_json(cls, text: str) -> "MetricField":
        try:
            return cls.from_dict(json.loads(text))
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise InputError(f"malformed metric JSON: {exc}") from exc

    @classmethod
    def from_function(cls, grid: GridSpec, fn) -> "MetricField":
        """Sample a metric given as ``fn(points (M, N)) -> (M, N, N)``."""
        nodes = grid.nodes().reshape(-1, grid.dim)
        g = np.asarray(fn(nodes), dtype=float)
        return cls(grid, g.reshape(grid.counts + (grid.dim, grid.dim)))


def estimate_metric_grid(
    traj: FeatureTrajectory,
    vel: VelocitySeries,
    grid: GridSpec,
    radius=None,
    min_samples: int | None = None,
    cond_max: float = 1e6,
    ridge: float = 1e-6,
) -> MetricField:
    """Invert the mean velocity outer product over a box neighborhood of each node.

    ``radius`` defaults to the grid spacing and ``min_samples`` to ``4 N``.
    Nodes with too few samples or an ill-conditioned average are invalid.
    """
    x, v = traj.points, vel.velocities
    n = grid.dim
    if x.shape[1] != n or v.shape != x.shape:
        raise DimensionMismatch("trajectory, velocities and grid dimensions disagree")
    radius = grid.spacing if radius is None else np.broadcast_to(np.asarray(radius, dtype=float), (n,))
    if np.any(radius <= 0):
        raise ValidationError("neighborhood radius must be positive")
    min_samples = 4 * n if min_samples is None else int(min_samples)
    if min_samples < n:
        raise ValidationError("min_samples must be at least the dimension", min_samples=min_samples)

    nodes = grid.nodes().reshape(-1, n)
    outer = v[:, :, None] * v[:, None, :]
    g = np.full((len(nodes), n, n), np.nan)
    # per-axis candidate masks keep the per-node cost linear in T
    axis_hits = []
    for d, ax in enumerate(grid.axes):
        axis_hits.append(np.abs(x[:, d][None, :] - ax[:, None]) <= radius[d])
    for flat, idx in enumerate(np.ndindex(*grid.counts)):
        mask = axis_hits[0][idx[0]].copy()
        for d in range(1, n):
            mask &= axis_hits[d][idx[d]]
        count = int(mask.sum())
        if count < min_samples:
            continue
        contra = outer[mask].mean(axis=0)
        w = np.linalg.eigvalsh(contra)
        if w[0] <= 0 or w[-1] / w[0] > cond_max:
            continue
        contra = contra + ridge * (np.trace(contra) / n) * np.eye(n)
        cov = np.linalg.inv(contra)
        g[flat] = 0.5 * (cov + cov.T)
    g = g.reshape(grid.counts + (n, n))
    valid = np.all(np.isfinite(g), axis=(-2, -1))
    if not valid.any():
        raise NoValidNodes("every grid node lacks data or is ill-conditioned")
    return MetricField(grid, g, valid)


def auto_grid(traj: FeatureTrajectory, counts, mass_fraction: float = 0.95) -> GridSpec:
    """Grid over the per-axis central ``mass_fraction`` of the samples."""
    if not 0 < mass_fraction <= 1:
        raise ValidationError("mass_fraction must be in (0, 1]")
    tail = 0.5 * (1 - mass_fraction)
    lo = np.quantile(traj.points, tail, axis=0)
    hi = np.quantile(traj.points, 1 - tail, axis=0)
    return GridSpec.from_box(lo, hi, counts)
