"""Tensor-product uniform cubic B-spline interpolation on rectangular grids.

Periodic axes use the cyclic interpolation system (solved by FFT). Non-periodic
axes extend the knot sequence by one cell on each side and close the system
with a vanishing fourth difference of the coefficients at both ends, the
uniform-knot analogue of the not-a-knot condition. Both variants reproduce
cubic polynomials exactly and give a C2 interpolant, which keeps fourth-order
time integrators at their design order.
"""

from functools import lru_cache

import numpy as np
from scipy.linalg import solve_banded


@lru_cache(maxsize=64)
def _periodic_symbol(n):
    m = np.arange(n)
    return (4.0 + 2.0 * np.cos(2.0 * np.pi * m / n)) / 6.0


@lru_cache(maxsize=64)
def _clamped_band(n):
    # rows: [-8 5 -4 1 ...], (1 4 1) interior, mirrored last row; bandwidth (3, 3)
    ab = np.zeros((7, n))
    u = 3

    def put(i, j, v):
        ab[u + i - j, j] = v

    put(0, 0, -8.0)
    put(0, 1, 5.0)
    put(0, 2, -4.0)
    put(0, 3, 1.0)
    for i in range(1, n - 1):
        put(i, i - 1, 1.0)
        put(i, i, 4.0)
        put(i, i + 1, 1.0)
    put(n - 1, n - 1, -8.0)
    put(n - 1, n - 2, 5.0)
    put(n - 1, n - 3, -4.0)
    put(n - 1, n - 4, 1.0)
    return ab


def _coefficients_periodic(f, axis):
    n = f.shape[axis]
    shape = [1] * f.ndim
    shape[axis] = n
    sym = _periodic_symbol(n).reshape(shape)
    out = np.fft.ifft(np.fft.fft(f, axis=axis) / sym, axis=axis)
    if np.isrealobj(f):
        out = out.real
    return out


def _coefficients_clamped(f, axis):
    f = np.moveaxis(f, axis, 0)
    n = f.shape[0]
    rest = f.shape[1:]
    flat = f.reshape(n, -1)
    rhs = 6.0 * flat
    rhs[0] = -6.0 * flat[0]
    rhs[-1] = -6.0 * flat[-1]
    c = solve_banded((3, 3), _clamped_band(n), rhs)
    full = np.empty((n + 2,) + c.shape[1:], dtype=c.dtype)
    full[1:-1] = c
    full[0] = 6.0 * flat[0] - 4.0 * c[0] - c[1]
    full[-1] = 6.0 * flat[-1] - 4.0 * c[-1] - c[-2]
    full = full.reshape((n + 2,) + rest)
    return np.moveaxis(full, 0, axis)


def _weights(f):
    g = 1.0 - f
    f2 = f * f
    f3 = f2 * f
    w0 = g * g * g / 6.0
    w3 = f3 / 6.0
    w1 = 0.5 * f3 - f2 + 2.0 / 3.0
    return [w0, w1, 1.0 - w0 - w1 - w3, w3]


def _dweights(f):
    g = 1.0 - f
    f2 = f * f
    return [-0.5 * g * g, 1.5 * f2 - 2.0 * f, -1.5 * f2 + f + 0.5, 0.5 * f2]


class GridSpline:
    """Cubic spline through samples on a uniform grid.

    ``values`` has the grid shape, optionally followed by trailing component
    axes (e.g. the components of a vector field). Coordinates passed to
    :meth:`__call__` are in grid units (physical coordinates), shape
    ``(npts, dims)``.
    """

    def __init__(self, values, lower, spacing, periodic):
        values = np.asarray(values)
        self.dims = len(lower)
        self.lower = np.asarray(lower, dtype=float)
        self.spacing = np.asarray(spacing, dtype=float)
        self.periodic = tuple(bool(p) for p in periodic)
        self.npoints = values.shape[: self.dims]
        c = values.astype(np.result_type(values.dtype, np.float64), copy=True)
        for ax in range(self.dims):
            if self.periodic[ax]:
                c = _coefficients_periodic(c, ax)
            else:
                c = _coefficients_clamped(c, ax)
        self.coef = c
        shape = c.shape[: self.dims]
        self._strides = [int(np.prod(shape[ax + 1:])) for ax in range(self.dims)]
        self._flat = np.ascontiguousarray(c.reshape((-1,) + c.shape[self.dims:]))

    def _axis_taps(self, u, ax, derivative):
        n = self.npoints[ax]
        fl = np.floor(u)
        if self.periodic[ax]:
            f = u - fl
            i = fl.astype(np.int64)
            if n & (n - 1) == 0:
                idx = [(i + k) & (n - 1) for k in (-1, 0, 1, 2)]
            else:
                idx = [(i + k) % n for k in (-1, 0, 1, 2)]
        else:
            i = np.clip(fl, 0, n - 2).astype(np.int64)
            f = u - i
            idx = [i + k for k in range(4)]
        if derivative:
            w = [wk / self.spacing[ax] for wk in _dweights(f)]
        else:
            w = _weights(f)
        return idx, w

    def __call__(self, points, derivative=None):
        """Evaluate at ``points``; ``derivative`` optionally names an axis."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[-1] != self.dims:
            raise ValueError(f"expected points with {self.dims} coordinates")
        taps = []
        for ax in range(self.dims):
            u = (pts[:, ax] - self.lower[ax]) / self.spacing[ax]
            taps.append(self._axis_taps(u, ax, derivative == ax))
        extra = self.coef.ndim - self.dims
        out = None
        # accumulate over the 4**dims neighbouring coefficients
        for combo in np.ndindex(*(4,) * self.dims):
            w = taps[0][1][combo[0]]
            for ax in range(1, self.dims):
                w = w * taps[ax][1][combo[ax]]
            lin = taps[0][0][combo[0]] * self._strides[0]
            for ax in range(1, self.dims):
                lin = lin + taps[ax][0][combo[ax]] * self._strides[ax]
            c = np.take(self._flat, lin, axis=0)
            term = c * w.reshape(w.shape + (1,) * extra)
            out = term if out is None else out + term
        return out
