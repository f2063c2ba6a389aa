"""Wave functions and fields sampled on uniform rectangular grids.

Periodic axes hold ``n`` nodes ``lower + j*L/n`` (the node at ``upper`` is
the image of ``lower``). Reflecting axes hold ``n`` nodes spanning
``[lower, upper]`` inclusively, spacing ``L/(n-1)``; the wave function is
taken to vanish outside. Units: hbar = 1.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import GridError, GridMismatch, OutOfDomain
from .spline import GridSpline

PERIODIC = "periodic"
REFLECTING = "reflecting"

_FD1_INTERIOR = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_FD1_EDGE0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
_FD1_EDGE1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0


@dataclass(frozen=True)
class GridSpec:
    lower: tuple
    upper: tuple
    points: tuple
    boundary: tuple

    def __post_init__(self):
        for name in ("lower", "upper", "points", "boundary"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "lower", tuple(float(v) for v in self.lower))
        object.__setattr__(self, "upper", tuple(float(v) for v in self.upper))
        object.__setattr__(self, "points", tuple(int(v) for v in self.points))
        d = len(self.points)
        if not 1 <= d <= 3:
            raise GridError(f"grids have 1 to 3 axes, got {d}")
        if not (len(self.lower) == len(self.upper) == len(self.boundary) == d):
            raise GridError("lower/upper/points/boundary lengths differ")
        for ax in range(d):
            n = self.points[ax]
            if n < 8:
                raise GridError(f"axis {ax}: need at least 8 points, got {n}")
            if not self.upper[ax] > self.lower[ax]:
                raise GridError(f"axis {ax}: upper bound must exceed lower bound")
            if self.boundary[ax] not in (PERIODIC, REFLECTING):
                raise GridError(f"axis {ax}: unknown boundary {self.boundary[ax]!r}")
            if self.boundary[ax] == PERIODIC and n & (n - 1):
                raise GridError(f"axis {ax}: periodic axes need a power-of-two size, got {n}")

    @classmethod
    def uniform(cls, lower, upper, points, boundary=PERIODIC, dims=1):
        return cls((lower,) * dims, (upper,) * dims, (points,) * dims, (boundary,) * dims)

    @property
    def dims(self):
        return len(self.points)

    @property
    def shape(self):
        return self.points

    @property
    def size(self):
        return int(np.prod(self.points))

    def is_periodic(self, axis):
        return self.boundary[axis] == PERIODIC

    @property
    def periodic(self):
        return tuple(b == PERIODIC for b in self.boundary)

    def length(self, axis):
        return self.upper[axis] - self.lower[axis]

    @cached_property
    def spacing(self):
        out = []
        for ax in range(self.dims):
            n = self.points[ax]
            out.append(self.length(ax) / (n if self.is_periodic(ax) else n - 1))
        return tuple(out)

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    def axis(self, ax):
        return self.lower[ax] + self.spacing[ax] * np.arange(self.points[ax])

    def mesh(self):
        return np.meshgrid(*[self.axis(ax) for ax in range(self.dims)], indexing="ij")

    def wavenumbers(self, ax):
        n = self.points[ax]
        return 2.0 * np.pi * np.fft.fftfreq(n, d=self.spacing[ax])

    def contains(self, q, axis):
        """Whether coordinate ``q`` lies inside a reflecting axis (always True if periodic)."""
        if self.is_periodic(axis):
            return np.ones_like(np.asarray(q, dtype=float), dtype=bool)
        tol = 1e-12 * self.length(axis)
        return (q >= self.lower[axis] - tol) & (q <= self.upper[axis] + tol)

    def wrap(self, q):
        """Map configurations into the fundamental domain of periodic axes."""
        q = np.array(q, dtype=float, copy=True)
        for ax in range(self.dims):
            if self.is_periodic(ax):
                L = self.length(ax)
                q[..., ax] = self.lower[ax] + np.mod(q[..., ax] - self.lower[ax], L)
        return q


def _readonly(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class WaveFunction:
    grid: GridSpec
    values: np.ndarray = field(repr=False)
    time: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != self.grid.shape:
            raise GridError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise GridError("wave function has non-finite amplitudes")
        object.__setattr__(self, "values", _readonly(v))
        object.__setattr__(self, "time", float(self.time))

    def replace(self, values=None, time=None):
        return WaveFunction(
            self.grid,
            self.values if values is None else values,
            self.time if time is None else time,
        )

    def __add__(self, other):
        _check_same_grid(self, other)
        return self.replace(self.values + other.values)

    def __mul__(self, c):
        return self.replace(self.values * c)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class RealField:
    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise GridError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise GridError("field has non-finite entries")
        object.__setattr__(self, "values", _readonly(v))


@dataclass(frozen=True, eq=False)
class VectorField:
    """Per-point vectors; ``values`` has shape ``grid.shape + (dims,)``."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape + (self.grid.dims,):
            raise GridError("vector field needs one component per grid axis")
        if not np.all(np.isfinite(v)):
            raise GridError("field has non-finite entries")
        object.__setattr__(self, "values", _readonly(v))

    def component(self, axis):
        return RealField(self.grid, self.values[..., axis])


def _check_same_grid(a, b):
    if a.grid != b.grid:
        raise GridMismatch("operands live on different grids")


def normalize(psi):
    n = norm(psi)
    if n == 0.0:
        raise GridError("cannot normalize the zero wave function")
    return psi.replace(psi.values / n)


def norm(psi):
    return float(np.sqrt(np.sum(np.abs(psi.values) ** 2) * psi.grid.cell_volume))


def overlap(psi, phi):
    _check_same_grid(psi, phi)
    return complex(np.vdot(psi.values, phi.values) * psi.grid.cell_volume)


def _fd_gradient(f, h, axis):
    f = np.moveaxis(f, axis, 0)
    g = np.empty_like(f)
    n = f.shape[0]
    c = _FD1_INTERIOR
    g[2:n - 2] = c[0] * f[:n - 4] + c[1] * f[1:n - 3] + c[3] * f[3:n - 1] + c[4] * f[4:]
    e0, e1 = _FD1_EDGE0, _FD1_EDGE1
    g[0] = np.tensordot(e0, f[:5], axes=1)
    g[1] = np.tensordot(e1, f[:5], axes=1)
    g[-1] = -np.tensordot(e0, f[::-1][:5], axes=1)
    g[-2] = -np.tensordot(e1, f[::-1][:5], axes=1)
    return np.moveaxis(g / h, 0, axis)


def spectral_derivative(values, grid, axis, order=1):
    k = grid.wavenumbers(axis)
    n = grid.points[axis]
    factor = (1j * k) ** order
    if order % 2 == 1:
        factor[n // 2] = 0.0  # Nyquist mode has no odd derivative
    shape = [1] * values.ndim
    shape[axis] = n
    out = np.fft.ifft(np.fft.fft(values, axis=axis) * factor.reshape(shape), axis=axis)
    return out.real if np.isrealobj(values) else out


def derivative_array(values, grid, axis):
    """d/dq_axis of raw grid samples (spectral if periodic, 4th-order FD otherwise)."""
    if axis >= grid.dims:
        raise GridError(f"axis {axis} out of range for a {grid.dims}-d grid")
    if grid.is_periodic(axis):
        return spectral_derivative(values, grid, axis)
    return _fd_gradient(np.asarray(values), grid.spacing[axis], axis)


def gradient(psi, axis):
    """Complex array of d(psi)/dq_axis on the grid."""
    return derivative_array(psi.values, psi.grid, axis)


def density(psi):
    return RealField(psi.grid, np.abs(psi.values) ** 2)


def _as_masses(masses, dims):
    m = np.broadcast_to(np.asarray(masses, dtype=float), (dims,))
    if np.any(m <= 0):
        raise ValueError("masses must be positive")
    return m


def current_array(psi, masses):
    m = _as_masses(masses, psi.grid.dims)
    # Im(psi* d psi) = Re psi d(Im psi) - Im psi d(Re psi); exactly zero for real psi
    re, im = psi.values.real, psi.values.imag
    comps = [(re * derivative_array(im, psi.grid, ax) - im * derivative_array(re, psi.grid, ax)) / m[ax]
             for ax in range(psi.grid.dims)]
    return np.stack(comps, axis=-1)


def current(psi, masses):
    """Probability current j_k = Im(psi* d_k psi) / m_k."""
    return VectorField(psi.grid, current_array(psi, masses))


def spline_of(values, grid):
    return GridSpline(values, grid.lower, grid.spacing, grid.periodic)


def check_inside(grid, q):
    q = np.atleast_2d(q)
    for ax in range(grid.dims):
        if not grid.is_periodic(ax) and not np.all(grid.contains(q[:, ax], ax)):
            raise OutOfDomain(f"configuration outside reflecting axis {ax}")


def interpolate(fieldlike, q):
    """Cubic-spline value of a grid field at configuration(s) ``q``.

    Accepts a WaveFunction, RealField or VectorField. A single configuration
    returns a scalar (or a vector for VectorField); an ``(n, dims)`` array
    returns one value per row.
    """
    grid = fieldlike.grid
    q = np.asarray(q, dtype=float)
    single = q.ndim <= 1
    pts = q.reshape(-1, grid.dims) if q.ndim else q.reshape(1, 1)
    check_inside(grid, pts)
    out = spline_of(fieldlike.values, grid)(grid.wrap(pts))
    return out[0] if single else out
