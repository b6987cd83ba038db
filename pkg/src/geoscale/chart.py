"""Coordinates built by transporting reference vectors along themselves.

A point's coordinates ``s`` say how far to follow each reference direction,
in turn, from the reference point: leg ``a`` is the geodesic whose initial
velocity is the (already transported) ``h_a``, followed for affine
parameter ``s_a``, with the remaining frame vectors carried along.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_box
from .exceptions import (
    DependentVectors,
    DimensionMismatch,
    InputError,
    LeftDomain,
    NoConvergence,
    OutOfDomain,
    SelfTestFailed,
    TimeOutOfRange,
    UnsupportedDimension,
    ValidationError,
)
from .geometry.connection import STEP_FRACTION, _scalar_batch, default_steps, geodesic_batch
from .geometry.metric import MetricField, VelocitySeries
from .trajectory import FeatureTrajectory, _frozen

CHART_FORMAT = "geoscale-chart-v1"
MAX_FRAME_COND = 1e6


@dataclass(frozen=True, eq=False)
class ReferenceFrame:
    """Reference point ``x0`` and reference vectors ``h`` (one per row)."""

    x0: np.ndarray
    h: np.ndarray
    source_times: tuple | None = None

    def __post_init__(self):
        x0 = _frozen(np.asarray(self.x0, dtype=float).reshape(-1))
        h = _frozen(np.atleast_2d(self.h))
        if h.shape != (x0.size, x0.size):
            raise DimensionMismatch("need N reference vectors of dimension N", shape=list(h.shape))
        if not np.all(np.isfinite(h)) or np.any(np.linalg.norm(h, axis=1) == 0):
            raise DependentVectors("reference vectors must be finite and non-zero")
        cond = np.linalg.cond(h)
        if not cond < MAX_FRAME_COND:
            raise DependentVectors("reference vectors are (nearly) linearly dependent", condition=float(cond))
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "h", h)
        if self.source_times is not None:
            object.__setattr__(self, "source_times", tuple(float(t) for t in self.source_times))

    def to_dict(self) -> dict:
        return {
            "x0": self.x0.tolist(),
            "h": self.h.tolist(),
            "source_times": None if self.source_times is None else list(self.source_times),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReferenceFrame":
        return cls(np.array(d["x0"]), np.array(d["h"]), d.get("source_times"))


def _nearest_index(times: np.ndarray, t: float) -> int:
    if not times[0] <= t <= times[-1]:
        raise TimeOutOfRange("reference time outside the trajectory", time=t, span=[float(times[0]), float(times[-1])])
    return int(np.argmin(np.abs(times - t)))


def select_reference(traj: FeatureTrajectory, vel: VelocitySeries, t0: float, *vector_times: float, scale: float = 1.0) -> ReferenceFrame:
    """Reference point at ``t0`` and reference vectors from velocities at ``vector_times``.

    Samples nearest each requested time are used. ``scale`` multiplies the
    velocities, which only changes the unit of ``s``.
    """
    if len(vector_times) != traj.dim:
        raise ValidationError("need one vector time per dimension", given=len(vector_times), N=traj.dim)
    i0 = _nearest_index(traj.times, t0)
    idx = [_nearest_index(vel.times, t) for t in vector_times]
    h = scale * vel.velocities[idx]
    return ReferenceFrame(traj.points[i0], h, source_times=(t0,) + tuple(vector_times))


def choose_reference_times(traj: FeatureTrajectory, vel: VelocitySeries, field: MetricField | None = None,
                           neighborhood: float = 0.25) -> tuple:
    """Pick ``(t0, t_1, ..., t_N)`` giving a well-conditioned frame.

    ``t0`` is the sample closest to the centre of the metric domain (or of
    the data) among samples moving at least at median speed. The first
    vector is the velocity at ``t0``; the others are velocities of later
    or earlier passes within ``neighborhood`` (in units of the per-axis
    standard deviation) of the reference point, chosen greedily to
    maximize the volume spanned by the unit-normalized vectors. The choice
    only depends on time stamps once made, so it can be reused for a
    transformed copy of the same recording.
    """
    x = traj.points
    scale = x.std(axis=0)
    scale[scale == 0] = 1.0
    z = x / scale
    w = vel.velocities / scale
    speed = np.linalg.norm(w, axis=1)
    moving = speed >= np.median(speed)
    if field is not None:
        moving &= field.contains(x)
        center = 0.5 * (field.lo + field.hi)
    else:
        center = np.median(x, axis=0)
    if not moving.any():
        raise ValidationError("no moving samples inside the metric domain")
    cand = np.flatnonzero(moving)
    i0 = cand[np.argmin(np.linalg.norm(z[cand] - center / scale, axis=1))]
    near = cand[np.linalg.norm(z[cand] - z[i0], axis=1) <= neighborhood]
    unit = w / np.maximum(speed, 1e-300)[:, None]
    chosen = [i0]
    for _ in range(traj.dim - 1):
        gram = [np.linalg.det(unit[chosen + [j]] @ unit[chosen + [j]].T) for j in near]
        chosen.append(int(near[int(np.argmax(gram))]))
    t = traj.times
    return (float(t[i0]),) + tuple(float(t[j]) for j in chosen)


@dataclass
class SelfTestResult:
    n_points: int
    n_attempted: int
    max_error: float
    rms_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.n_points > 0 and self.max_error <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "n_points": self.n_points,
            "n_attempted": self.n_attempted,
            "max_error": self.max_error,
            "rms_error": self.rms_error,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


@dataclass
class Exclusion:
    index: int
    time: float
    reason: str


@dataclass
class Isocline:
    component: int
    level: float
    vertices: np.ndarray


@dataclass
class InverseResult:
    s: np.ndarray
    ok: np.ndarray
    residual: np.ndarray
    reason: list = field(default_factory=list)


class ScaleChart:
    """Invariant coordinates from a metric field and a reference frame.

    Parameters
    ----------
    field : MetricField
    frame : ReferenceFrame
    transport_order : sequence of int, optional
        Order in which the legs are walked (default ``0, 1, ..., N-1``).
    tol_x : float, optional
        Inverse-map residual tolerance in x units (default ``1e-6`` of the
        smallest grid spacing).
    max_iter : int
        Newton iteration cap for the inverse map.
    step_fraction : float
        RK4 step as a fraction of the smallest grid spacing.
    """

    def __init__(self, field: MetricField, frame: ReferenceFrame, transport_order=None,
                 tol_x: float | None = None, max_iter: int = 50, step_fraction: float = STEP_FRACTION):
        n = field.dim
        if frame.x0.size != n:
            raise DimensionMismatch("frame dimension does not match metric")
        field._require_inside(frame.x0[None])
        order = tuple(range(n)) if transport_order is None else tuple(int(a) for a in transport_order)
        if sorted(order) != list(range(n)):
            raise ValidationError("transport_order must be a permutation of 0..N-1", order=list(order))
        self.field = field
        self.frame = frame
        self.transport_order = order
        self.tol_x = 1e-6 * field.min_spacing if tol_x is None else float(tol_x)
        self.max_iter = int(max_iter)
        self.step_fraction = float(step_fraction)
        self.max_halvings = 12
        self.stall_ratio = 0.99
        self._seeds = None
        self._seed_lock = threading.Lock()

    @property
    def dim(self) -> int:
        return self.field.dim

    # forward -------------------------------------------------------------
    def _forward(self, s, n_steps=None):
        """Batched forward map; returns ``(x, failed_leg, n_steps)``.

        ``failed_leg`` is -1 where all legs stayed inside the domain.
        ``n_steps`` (M, N) may be passed back in to reuse step counts.
        """
        s = np.atleast_2d(np.asarray(s, dtype=float))
        m, n = s.shape
        x = np.repeat(self.frame.x0[None], m, axis=0)
        frame = np.repeat(self.frame.h[None], m, axis=0)
        failed = np.full(m, -1)
        steps_out = np.zeros((m, n), dtype=int)
        for a in self.transport_order:
            sa = s[:, a]
            live = np.flatnonzero((sa != 0) & (failed < 0))
            if live.size == 0:
                continue
            sign = np.sign(sa[live])[:, None]
            v = sign * frame[live, a]
            length = np.abs(sa[live])
            if n_steps is None:
                steps = default_steps(self.field, v, length, self.step_fraction)
            else:
                steps = np.asarray(n_steps)[live, a]
            steps_out[live, a] = steps
            xe, _, fe, exit_param = geodesic_batch(self.field, x[live], v, frame[live], length, steps)
            x[live], frame[live] = xe, fe
            failed[live[np.isfinite(exit_param)]] = a
        return x, failed, steps_out

    def forward_map(self, s) -> np.ndarray:
        """Point reached from ``x0`` by the legs ``s`` (shape ``(N,)``)."""
        s = np.asarray(s, dtype=float).reshape(-1)
        if s.size != self.dim:
            raise DimensionMismatch("s has the wrong dimension", got=s.size, expected=self.dim)
        x, failed, _ = self._forward(s[None])
        if failed[0] >= 0:
            raise LeftDomain("transport left the metric domain", leg=int(failed[0]), s=s.tolist())
        return x[0]

    # inverse -------------------------------------------------------------
    def _linear_guess(self, x):
        return np.linalg.solve(self.frame.h.T, (x - self.frame.x0).T).T

    def _seed_table(self):
        """Forward images of an s-lattice, used when the linear guess is poor.

        Returns ``(s, x, regular)``; ``regular`` marks seeds where the forward
        map has the orientation of the reference frame (not past a fold).
        """
        with self._seed_lock:
            if self._seeds is None:
                n = self.dim
                # reach the far side of the domain along every reference vector
                extent = np.linalg.norm(self.field.hi - self.field.lo) / np.linalg.norm(self.frame.h, axis=1)
                res = {1: 65, 2: 41, 3: 13}.get(n, 7)
                axes = [np.linspace(-e, e, res) for e in extent]
                grid_s = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, n)
                xs, failed, steps = self._forward(grid_s)
                keep = failed < 0
                grid_s, xs, steps = grid_s[keep], xs[keep], steps[keep]
                regular = self._orientation(self._jacobian(grid_s, xs, steps)) > 0
                self._seeds = (grid_s, xs, regular)
            return self._seeds

    def _orientation(self, jac) -> np.ndarray:
        """+1 where ``det(dx/ds)`` has the sign of ``det(h)``, -1 where it flips."""
        return np.sign(np.linalg.det(jac)) * np.sign(np.linalg.det(self.frame.h.T))

    def _inverse(self, x) -> InverseResult:
        """Damped Newton shooting on ``forward(s) = x`` for a batch of points.

        Starts from the linear frame solve; points whose linear guess exits
        the domain or lands farther than half a cell away restart from the
        nearest forward-mapped lattice seed instead. A root past a fold of
        the forward map (where it reverses orientation) is not accepted:
        such points restart from the nearest seed on the unfolded side.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        m, n = x.shape
        inside = self.field.contains(x)
        s = np.zeros((m, n))
        res = np.full(m, np.inf)
        fx = np.zeros((m, n))
        steps = np.zeros((m, n), dtype=int)
        jac_last = np.full((m, n, n), np.nan)

        def take(idx, trial):
            fxt, failed, st = self._forward(trial)
            good = failed < 0
            rt = np.where(good, np.linalg.norm(fxt - x[idx], axis=1), np.inf)
            better = rt < res[idx]
            i = idx[better]
            s[i], fx[i], steps[i], res[i] = trial[better], fxt[better], st[better], rt[better]

        def nearest_seed(idx, regular_only=False):
            seed_s, seed_x, regular = self._seed_table()
            if regular_only:
                seed_s, seed_x = seed_s[regular], seed_x[regular]
            if len(seed_s):
                d2 = ((x[idx, None, :] - seed_x[None]) ** 2).sum(-1)
                take(idx, seed_s[np.argmin(d2, axis=1)])

        def newton(active):
            for _ in range(self.max_iter):
                act = np.flatnonzero(active)
                if act.size == 0:
                    break
                jac = self._jacobian(s[act], fx[act], steps[act])
                jac_last[act] = jac
                rhs = (fx[act] - x[act])[..., None]
                try:
                    delta = -np.linalg.solve(jac, rhs)[..., 0]
                except np.linalg.LinAlgError:
                    delta = -(np.linalg.pinv(jac) @ rhs)[..., 0]
                start_res = res[act].copy()
                pending = np.arange(act.size)
                alpha = 1.0
                for _ in range(self.max_halvings):
                    i = act[pending]
                    before = res[i].copy()
                    take(i, s[i] + alpha * delta[pending])
                    pending = pending[res[i] >= before]
                    if pending.size == 0:
                        break
                    alpha *= 0.5
                # no damped step helps these points: stop iterating on them
                active[act[pending]] = False
                # nor do points that barely move (stuck near a fold or an edge)
                active[act[res[act] > self.stall_ratio * start_res]] = False
                active &= res > self.tol_x
            # chord polish with the last Jacobian: cheap, usually gains digits
            conv = np.flatnonzero((res <= self.tol_x) & np.isfinite(jac_last[:, 0, 0]))
            if conv.size:
                delta = -np.linalg.solve(jac_last[conv], (fx[conv] - x[conv])[..., None])[..., 0]
                take(conv, s[conv] + delta)

        def folded():
            conv = np.flatnonzero(inside & (res <= self.tol_x))
            flip = np.zeros(m, dtype=bool)
            if conv.size:
                missing = ~np.isfinite(jac_last[conv, 0, 0])
                if missing.any():
                    c = conv[missing]
                    jac_last[c] = self._jacobian(s[c], fx[c], steps[c])
                flip[conv] = self._orientation(jac_last[conv]) < 0
            return flip

        idx = np.flatnonzero(inside)
        if idx.size:
            take(idx, self._linear_guess(x[idx]))
        poor = np.flatnonzero(inside & (res > 0.5 * self.field.min_spacing))
        if poor.size:
            nearest_seed(poor)
        newton(inside & np.isfinite(res) & (res > self.tol_x))

        flip = folded()
        retried = flip.copy()
        if flip.any():
            again = np.flatnonzero(flip)
            res[again] = np.inf
            jac_last[again] = np.nan
            nearest_seed(again, regular_only=True)
            newton(np.isin(np.arange(m), again) & np.isfinite(res) & (res > self.tol_x))
            flip = folded()

        ok = inside & (res <= self.tol_x) & ~flip
        reason = []
        for i in range(m):
            if ok[i]:
                reason.append("")
            elif not inside[i]:
                reason.append("out_of_domain")
            elif flip[i] or retried[i]:
                reason.append("folded")
            elif not np.isfinite(res[i]):
                reason.append("left_domain")
            else:
                reason.append("no_convergence")
        return InverseResult(s, ok, res, reason)

    def _jacobian(self, s, fx, steps):
        m, n = s.shape
        eps = 1e-6 * (1.0 + np.abs(s))
        pert = np.repeat(s[:, None, :], n, axis=1) + eps[:, None, :] * np.eye(n)[None]
        pert_steps = np.repeat(steps[:, None, :], n, axis=1)
        # a perturbed zero-length leg is a single tiny step
        diag = np.arange(n)
        pert_steps[:, diag, diag] = np.maximum(pert_steps[:, diag, diag], 1)
        pert_steps = pert_steps.reshape(-1, n)
        fp, failed, _ = self._forward(pert.reshape(-1, n), pert_steps)
        fp = fp.reshape(m, n, n)
        bad = (failed.reshape(m, n) >= 0)
        if np.any(bad):
            # fall back to a backward difference for perturbations that exit
            back = np.repeat(s[:, None, :], n, axis=1) - eps[:, None, :] * np.eye(n)[None]
            fb, _, _ = self._forward(back.reshape(-1, n), pert_steps)
            fb = fb.reshape(m, n, n)
            fp = np.where(bad[..., None], 2 * fx[:, None, :] - fb, fp)
        # jac[m, i, a] = d x_i / d s_a
        return ((fp - fx[:, None, :]) / eps[:, :, None]).transpose(0, 2, 1)

    def inverse_map(self, x) -> np.ndarray:
        """Coordinates ``s`` of the point ``x``."""
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.dim:
            raise DimensionMismatch("x has the wrong dimension", got=x.size, expected=self.dim)
        if np.allclose(x, self.frame.x0, rtol=0, atol=0):
            return np.zeros(self.dim)
        r = self._inverse(x[None])
        if r.ok[0]:
            return r.s[0]
        if r.reason[0] == "out_of_domain":
            raise OutOfDomain("point outside the metric's valid region", point=x.tolist())
        if r.reason[0] == "folded":
            raise NoConvergence("only root found lies past a fold of the chart", residual=float(r.residual[0]),
                                point=x.tolist(), s=r.s[0].tolist())
        raise NoConvergence("inverse map did not converge", residual=float(r.residual[0]), point=x.tolist())

    def transform_points(self, points) -> InverseResult:
        """Batched inverse map; failures are reported, never raised."""
        return self._inverse(points)

    # trajectories and level sets ----------------------------------------
    def rescale_trajectory(self, traj: FeatureTrajectory) -> tuple[FeatureTrajectory | None, list[Exclusion]]:
        """Map every sample to ``s``; failing samples go to the exclusion list."""
        if traj.dim != self.dim:
            raise DimensionMismatch("trajectory dimension does not match chart")
        r = self._inverse(traj.points)
        exclusions = [Exclusion(int(i), float(traj.times[i]), r.reason[i]) for i in np.flatnonzero(~r.ok)]
        if not r.ok.any():
            return None, exclusions
        return FeatureTrajectory(traj.times[r.ok], r.s[r.ok]), exclusions

    def coordinate_lattice(self, region, resolution: int):
        lo, hi = check_box(region[0], region[1], self.dim)
        if not (self.field.contains(lo[None])[0] and self.field.contains(hi[None])[0]):
            raise OutOfDomain("region extends past the metric domain", lo=lo.tolist(), hi=hi.tolist())
        axes = [np.linspace(a, b, resolution) for a, b in zip(lo, hi)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
        r = self._inverse(pts)
        s = np.where(r.ok[:, None], r.s, np.nan)
        return axes, s.reshape((resolution,) * self.dim + (self.dim,))

    def trace_isoclines(self, region, levels_1, levels_2, resolution: int = 41) -> list[Isocline]:
        """Level curves of ``s_1`` and ``s_2`` over ``region = (lo, hi)``."""
        if self.dim != 2:
            raise UnsupportedDimension("isoclines are drawn for N = 2", N=self.dim)
        axes, s = self.coordinate_lattice(region, resolution)
        return contour_lattice(axes, s, levels_1, levels_2)

    # self-test -----------------------------------------------------------
    def working_box(self, fraction: float = 0.5) -> np.ndarray:
        """Symmetric-ish s box: ``fraction`` of how far each straight ``h_a`` ray stays inside."""
        box = np.zeros((2, self.dim))
        for a, h in enumerate(self.frame.h):
            for side, sign in ((0, -1.0), (1, 1.0)):
                with np.errstate(divide="ignore"):
                    lim = np.where(sign * h > 0, (self.field.hi - self.frame.x0) / (sign * h),
                                   np.where(sign * h < 0, (self.field.lo - self.frame.x0) / (sign * h), np.inf))
                box[side, a] = sign * fraction * np.min(lim)
        return box

    def regular_box(self, fraction: float = 0.5, resolution: int = 9, shrink: float = 0.8,
                    max_shrinks: int = 20) -> np.ndarray:
        """Working box shrunk until the chart is unfolded on a lattice over it.

        Every lattice point must map inside the domain with the orientation
        of the reference frame; the box is scaled by ``shrink`` about s = 0
        until that holds.
        """
        box = self.working_box(fraction)
        res = {1: 4 * resolution, 2: resolution}.get(self.dim, 5)
        for _ in range(max_shrinks):
            axes = [np.linspace(a, b, res) for a, b in zip(*box)]
            lattice = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, self.dim)
            x, failed, steps = self._forward(lattice)
            if np.all(failed < 0) and np.all(self._orientation(self._jacobian(lattice, x, steps)) > 0):
                return box
            box = box * shrink
        return box

    def self_test(self, n: int = 100, seed: int = 0, tol: float = 1e-5, max_attempts: int = 2000) -> SelfTestResult:
        """Round-trip ``inverse(forward(s))`` for ``n`` random ``s``.

        Samples come from :meth:`regular_box`; those whose legs leave the
        domain or that lie past a fold of the forward map are redrawn.
        """
        rng = np.random.default_rng(seed)
        box = self.regular_box()
        accepted_s, accepted_x, attempted = [], [], 0
        while len(accepted_s) < n and attempted < max_attempts:
            batch = rng.uniform(box[0], box[1], size=(n, self.dim))
            attempted += n
            x, failed, steps = self._forward(batch)
            keep = np.flatnonzero(failed < 0)
            if keep.size:
                regular = self._orientation(self._jacobian(batch[keep], x[keep], steps[keep])) > 0
                keep = keep[regular]
            accepted_s.extend(batch[keep])
            accepted_x.extend(x[keep])
        s = np.array(accepted_s[:n]).reshape(-1, self.dim)
        x = np.array(accepted_x[:n]).reshape(-1, self.dim)
        if len(s) == 0:
            return SelfTestResult(0, attempted, np.inf, np.inf, tol)
        r = self._inverse(x)
        err = np.where(r.ok, np.linalg.norm(r.s - s, axis=1), np.inf)
        return SelfTestResult(len(s), attempted, float(err.max()), float(np.sqrt(np.mean(err**2))), tol)

    def check(self, **kwargs) -> SelfTestResult:
        result = self.self_test(**kwargs)
        if not result.passed:
            raise SelfTestFailed("chart round-trip self-test failed", **result.to_dict())
        return result

    # serialization -------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "format": CHART_FORMAT,
            "metric": self.field.to_dict(),
            "frame": self.frame.to_dict(),
            "transport_order": list(self.transport_order),
            "solver": {"tol_x": self.tol_x, "max_iter": self.max_iter, "step_fraction": self.step_fraction},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScaleChart":
        if d.get("format") != CHART_FORMAT:
            raise InputError("not a chart document", format=d.get("format"))
        try:
            solver = d["solver"]
            return cls(MetricField.from_dict(d["metric"]), ReferenceFrame.from_dict(d["frame"]),
                       d["transport_order"], solver["tol_x"], solver["max_iter"], solver["step_fraction"])
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed chart JSON: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_json(cls, text: str) -> "ScaleChart":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise InputError(f"malformed chart JSON: {exc}") from exc


def contour_lattice(axes, s, levels_1, levels_2) -> list[Isocline]:
    """Marching-squares level sets of a 2-D lattice of ``s`` values.

    Lattice nodes where ``s`` is undefined (NaN) are masked out, so lines
    stop at holes instead of bending around them.
    """
    from skimage.measure import find_contours

    finite = np.all(np.isfinite(s), axis=-1)
    out = []
    for comp, levels in ((0, levels_1), (1, levels_2)):
        values = np.where(finite, s[..., comp], 0.0)
        for level in levels:
            for c in find_contours(values, float(level), mask=finite):
                verts = np.stack([np.interp(c[:, d], np.arange(len(axes[d])), axes[d]) for d in range(2)], axis=1)
                out.append(Isocline(comp, float(level), verts))
    return out


def forward_map(chart: ScaleChart, s) -> np.ndarray:
    return chart.forward_map(s)


def inverse_map(chart: ScaleChart, x) -> np.ndarray:
    return chart.inverse_map(x)


def rescale_trajectory(chart: ScaleChart, traj: FeatureTrajectory):
    return chart.rescale_trajectory(traj)


def trace_isoclines(chart: ScaleChart, region, levels_1, levels_2, resolution: int = 41) -> list[Isocline]:
    return chart.trace_isoclines(region, levels_1, levels_2, resolution)


def find_curvature_extremum(field: MetricField, region=None) -> np.ndarray:
    """Lattice point of largest ``|R|`` at grid resolution; ties pick the first.

    The lattice starts at the region's lower corner and steps by the grid
    spacing, inset slightly so the finite-difference stencil stays inside.
    """
    if field.dim != 2:
        raise UnsupportedDimension("curvature scan is implemented for N = 2", N=field.dim)
    if region is None:
        lo, hi = field.lo, field.hi
    else:
        lo, hi = check_box(region[0], region[1], 2)
    if not (field.contains(lo[None])[0] and field.contains(hi[None])[0]):
        raise OutOfDomain("region extends past the metric domain", lo=lo.tolist(), hi=hi.tolist())
    inset = 2e-3 * field.min_spacing
    lo_in, hi_in = lo + inset, hi - inset
    axes = [np.arange(a, b + 1e-12, h) for a, b, h in zip(lo_in, hi_in, field.grid.spacing)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 2)
    r = np.abs(_scalar_batch(field, pts))
    best = r.max()
    first = int(np.flatnonzero(r >= best - 1e-9 * (1.0 + best))[0])
    return pts[first]
