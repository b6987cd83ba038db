"""Levi-Civita connection of a :class:`MetricField`: geodesics, transport, curvature."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import DimensionMismatch, LeftDomain, UnsupportedDimension, ValidationError
from .metric import MetricField

#: Default RK4 step as a fraction of the smallest grid spacing (coordinate length).
STEP_FRACTION = 0.05


def inverse_spd(g: np.ndarray) -> np.ndarray:
    """Batched inverse; closed form for 2x2."""
    if g.shape[-1] != 2:
        return np.linalg.inv(g)
    a, b, c = g[:, 0, 0], g[:, 0, 1], g[:, 1, 1]
    det = a * c - b * b
    out = np.empty_like(g)
    out[:, 0, 0], out[:, 1, 1] = c / det, a / det
    out[:, 0, 1] = out[:, 1, 0] = -b / det
    return out


def christoffel_batch(field: MetricField, points) -> np.ndarray:
    """``gamma[m, k, l, j]`` = Γ^k_{lj} at each point (no domain check)."""
    g, dg = field.metric_batch(points, grad=True)
    ginv = inverse_spd(g)
    # dg[m, n, j, l] = d_l g_nj ; lowered symbol Γ_{n l j}
    lowered = dg.transpose(0, 1, 3, 2) + dg - dg.transpose(0, 3, 2, 1)
    gamma = 0.5 * np.einsum("mkn,mnlj->mklj", ginv, lowered)
    return 0.5 * (gamma + gamma.transpose(0, 1, 3, 2))


def christoffel(field: MetricField, point) -> np.ndarray:
    """Christoffel symbols ``Γ[k, l, m]`` of the interpolated metric at ``point``."""
    p = np.asarray(point, dtype=float).reshape(1, -1)
    if p.shape[1] != field.dim:
        raise DimensionMismatch("point dimension does not match metric")
    field._require_inside(p)
    return christoffel_batch(field, p)[0]


@dataclass(frozen=True, eq=False)
class GeodesicState:
    position: np.ndarray
    velocity: np.ndarray
    carried_frame: np.ndarray | None = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).copy())
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float).copy())
        if self.carried_frame is not None:
            object.__setattr__(self, "carried_frame", np.atleast_2d(np.asarray(self.carried_frame, dtype=float)).copy())


def default_steps(field: MetricField, velocity, length, step_fraction: float = STEP_FRACTION) -> np.ndarray:
    """RK4 step count so each step moves ~``step_fraction`` of a cell."""
    speed = np.linalg.norm(np.atleast_2d(velocity), axis=-1)
    length = np.abs(np.asarray(length, dtype=float))
    n = np.ceil(length * speed / (step_fraction * field.min_spacing))
    return np.where(length > 0, np.maximum(n, 1), 0).astype(int)


def geodesic_batch(field: MetricField, x, v, frame, length, n_steps):
    """Integrate many geodesics at once with classical RK4.

    ``x``, ``v``: (M, N); ``frame``: (M, K, N) vectors co-transported along
    the path; ``length``: (M,) affine parameter span; ``n_steps``: (M,)
    step counts. Returns ``(x, v, frame, exit_param)`` where ``exit_param``
    is NaN for paths that stayed inside and the parameter at which the
    path left the valid region otherwise.
    """
    x = np.array(x, dtype=float)
    v = np.array(v, dtype=float)
    frame = np.array(frame, dtype=float)
    length = np.asarray(length, dtype=float)
    n_steps = np.asarray(n_steps, dtype=int)
    h = np.divide(length, n_steps, out=np.zeros_like(length), where=n_steps > 0)
    exit_param = np.full(len(x), np.nan)
    alive = n_steps > 0

    def deriv(xs, vs, fs):
        gam = christoffel_batch(field, xs)
        dv = -np.einsum("mklj,ml,mj->mk", gam, vs, vs)
        df = -np.einsum("mklj,ml,mfj->mfk", gam, vs, fs)
        return vs, dv, df

    for k in range(int(n_steps.max(initial=0))):
        act = np.flatnonzero(alive & (k < n_steps))
        if act.size == 0:
            break
        hs = h[act][:, None]
        x0, v0, f0 = x[act], v[act], frame[act]
        ok = field.contains(x0)
        k1 = deriv(x0, v0, f0)
        x1 = x0 + 0.5 * hs * k1[0]
        ok &= field.contains(x1)
        k2 = deriv(x1, v0 + 0.5 * hs * k1[1], f0 + 0.5 * hs[:, :, None] * k1[2])
        x2 = x0 + 0.5 * hs * k2[0]
        ok &= field.contains(x2)
        k3 = deriv(x2, v0 + 0.5 * hs * k2[1], f0 + 0.5 * hs[:, :, None] * k2[2])
        x3 = x0 + hs * k3[0]
        ok &= field.contains(x3)
        k4 = deriv(x3, v0 + hs * k3[1], f0 + hs[:, :, None] * k3[2])
        xn = x0 + hs / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        ok &= field.contains(xn)
        vn = v0 + hs / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        fn = f0 + hs[:, :, None] / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        good, bad = act[ok], act[~ok]
        x[good], v[good], frame[good] = xn[ok], vn[ok], fn[ok]
        exit_param[bad] = k * h[bad]
        alive[bad] = False
    return x, v, frame, exit_param


def integrate_geodesic(field: MetricField, start: GeodesicState, s: float, step: float | None = None) -> GeodesicState:
    """Follow the geodesic from ``start`` for affine parameter ``s``.

    Negative ``s`` runs the geodesic backwards. ``step`` is the RK4 step in
    affine parameter; the default moves about 5% of a grid cell per step.
    """
    x = start.position.reshape(1, -1)
    if x.shape[1] != field.dim:
        raise DimensionMismatch("state dimension does not match metric")
    field._require_inside(x)
    if step is not None and step <= 0:
        raise ValidationError("step must be positive", step=step)
    sign = -1.0 if s < 0 else 1.0
    v = sign * start.velocity.reshape(1, -1)
    frame = start.carried_frame if start.carried_frame is not None else np.zeros((0, field.dim))
    length = abs(float(s))
    if step is None:
        n = default_steps(field, v, [length])
    else:
        n = np.array([math.ceil(length / step) if length > 0 else 0])
    xe, ve, fe, exit_param = geodesic_batch(field, x, v, frame[None], [length], n)
    if np.isfinite(exit_param[0]):
        raise LeftDomain("geodesic left the metric domain", exit_parameter=float(sign * exit_param[0]))
    return GeodesicState(xe[0], sign * ve[0], fe[0] if start.carried_frame is not None else None)


def parallel_transport(field: MetricField, path, v, step_fraction: float = STEP_FRACTION) -> np.ndarray:
    """Transport tangent vector(s) ``v`` along a polyline; returns the end value.

    ``v`` may be a single vector ``(N,)`` or a stack ``(K, N)``.
    """
    path = np.atleast_2d(np.asarray(path, dtype=float))
    vecs = np.atleast_2d(np.asarray(v, dtype=float)).copy()
    if path.shape[1] != field.dim or vecs.shape[1] != field.dim:
        raise DimensionMismatch("path/vector dimension does not match metric")
    field._require_inside(path)

    def rate(p, seg, w):
        gam = christoffel_batch(field, p[None])[0]
        return -np.einsum("klj,l,fj->fk", gam, seg, w)

    for a, b in zip(path[:-1], path[1:]):
        seg = b - a
        n = max(1, math.ceil(np.linalg.norm(seg) / (step_fraction * field.min_spacing)))
        h = 1.0 / n
        for i in range(n):
            p = a + i * h * seg
            k1 = rate(p, seg, vecs)
            k2 = rate(p + 0.5 * h * seg, seg, vecs + 0.5 * h * k1)
            k3 = rate(p + 0.5 * h * seg, seg, vecs + 0.5 * h * k2)
            k4 = rate(p + h * seg, seg, vecs + h * k3)
            vecs = vecs + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return vecs[0] if np.ndim(v) == 1 else vecs


def curvature_scalar(field: MetricField, point, fd_step: float | None = None) -> float:
    """Ricci scalar ``R`` (= twice the Gaussian curvature) of a 2-D metric.

    Derivatives of the Christoffel symbols use central differences with
    step ``fd_step`` (default ``1e-3`` of the smallest grid spacing); the
    whole stencil must lie inside the valid region.
    """
    if field.dim != 2:
        raise UnsupportedDimension("curvature scalar is implemented for N = 2", N=field.dim)
    p = np.asarray(point, dtype=float).reshape(-1)
    return float(_scalar_batch(field, p[None], fd_step)[0])


def _scalar_batch(field: MetricField, pts, fd_step=None):
    n = field.dim
    delta = 1e-3 * field.min_spacing if fd_step is None else fd_step
    offsets = delta * np.eye(n)
    stencil = np.concatenate([pts[:, None, :] + offsets[None], pts[:, None, :] - offsets[None]], axis=1)
    field._require_inside(stencil.reshape(-1, n))
    gam = christoffel_batch(field, pts)
    gs = christoffel_batch(field, stencil.reshape(-1, n)).reshape(len(pts), 2 * n, n, n, n)
    # dgam[m, mu, rho, nu, sigma] = d_mu Γ^rho_{nu sigma}
    dgam = (gs[:, :n] - gs[:, n:]) / (2 * delta)
    # Ricci_{sigma nu} = d_rho Γ^rho_{nu sigma} - d_nu Γ^rho_{rho sigma}
    #                  + Γ^rho_{rho lam} Γ^lam_{nu sigma} - Γ^rho_{nu lam} Γ^lam_{rho sigma}
    ricci = (
        np.einsum("mrrns->msn", dgam)
        - np.einsum("mnrrs->msn", dgam)
        + np.einsum("mrrl,mlns->msn", gam, gam)
        - np.einsum("mrnl,mlrs->msn", gam, gam)
    )
    ginv = inverse_spd(field.metric_batch(pts))
    return np.einsum("msn,msn->m", ginv, ricci)
