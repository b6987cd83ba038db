"""Tensor-product cubic spline on a rectangular grid with analytic gradients.

Per-cell polynomial coefficients are built by applying a 1-D not-a-knot
cubic spline along each axis in turn; the 1-D interpolation operators are
linear and act on separate axes, so the result is the tensor-product spline.
Axes with two or three nodes degrade to linear or quadratic.
"""

from __future__ import annotations

import numpy as np
from scipy.interpolate import CubicSpline


class TensorCubic:
    """Interpolate ``values[i0, ..., iN-1, c]`` sampled at ``axes``.

    Evaluation is vectorized over points. Points outside the grid are
    evaluated with the polynomial of the nearest boundary cell; callers
    are expected to guard the domain themselves.
    """

    def __init__(self, axes, values):
        self.axes = [np.asarray(a, dtype=float) for a in axes]
        self.ndim = len(self.axes)
        values = np.asarray(values, dtype=float)
        if values.shape[: self.ndim] != tuple(len(a) for a in self.axes):
            raise ValueError("values shape does not match axes")
        if any(len(a) < 2 for a in self.axes):
            raise ValueError("every axis needs at least two nodes")
        self.n_out = values.shape[self.ndim]
        # layout during construction: grid dims..., degree dims..., channel
        coef = values
        for d, x in enumerate(self.axes):
            c = CubicSpline(x, coef, axis=d, bc_type="not-a-knot").c
            # c: (4, cells_d, <coef dims without axis d>)
            c = np.moveaxis(c, 1, d + 1)  # (4, grid dims..., degree dims..., channel)
            coef = np.moveaxis(c, 0, self.ndim + d)
        self.coef = np.ascontiguousarray(coef)
        self.lo = np.array([a[0] for a in self.axes])
        self.hi = np.array([a[-1] for a in self.axes])

    def _locate(self, pts):
        idx, dx = [], []
        for d, x in enumerate(self.axes):
            i = np.searchsorted(x, pts[:, d], side="right") - 1
            i = np.clip(i, 0, len(x) - 2)
            idx.append(i)
            dx.append(pts[:, d] - x[i])
        return tuple(idx), dx

    def evaluate(self, points, grad: bool = False):
        """Values ``(M, C)``; with ``grad`` also gradients ``(M, C, N)``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        idx, dx = self._locate(pts)
        out = self.coef[idx]  # (M, 4, ..., 4, C)
        m = len(pts)
        for u in dx:
            u2 = u * u
            basis = np.empty((m, 2 if grad else 1, 4))
            basis[:, 0, 0], basis[:, 0, 1], basis[:, 0, 2], basis[:, 0, 3] = u2 * u, u2, u, 1.0
            if grad:
                basis[:, 1, 0], basis[:, 1, 1], basis[:, 1, 2], basis[:, 1, 3] = 3 * u2, 2 * u, 1.0, 0.0
            # contract the leading degree axis, append a (value, derivative) axis
            out = np.einsum("mi...,mai->m...a", out, basis)
        # out: (M, C, k_0, ..., k_{N-1}); k_d = 1 selects the derivative along d
        zero = (0,) * self.ndim
        val = out[(slice(None), slice(None)) + zero]
        if not grad:
            return val
        grads = []
        for d in range(self.ndim):
            sel = list(zero)
            sel[d] = 1
            grads.append(out[(slice(None), slice(None)) + tuple(sel)])
        return val, np.stack(grads, axis=-1)
