"""Time-dependent Schrödinger propagation and stationary states (hbar = 1).

Fully periodic grids use Strang splitting (potential half-kick, exact kinetic
step in Fourier space, potential half-kick). Grids with a reflecting axis use
Crank-Nicolson with a fourth-order finite-difference Laplacian. Both are
unitary with respect to the grid inner product.
"""

from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import GridError, NoConvergence, StabilityFailure
from .grid import RealField, WaveFunction, norm, normalize

SPLIT = "split"
CRANK_NICOLSON = "crank-nicolson"


@dataclass(frozen=True)
class Window:
    """Named time window g(t) gating an interaction term.

    kinds: ``constant`` (amplitude), ``box`` (amplitude on [t_on, t_off)),
    ``smooth`` (box with sin^2 ramps of length ``ramp``), ``gaussian``
    (amplitude * exp(-(t - center)^2 / (2 width^2))).
    """

    kind: str = "constant"
    amplitude: float = 1.0
    t_on: float = 0.0
    t_off: float = np.inf
    ramp: float = 0.0
    center: float = 0.0
    width: float = 1.0

    def __call__(self, t):
        a = self.amplitude
        if self.kind == "constant":
            return a
        if self.kind == "box":
            return a if self.t_on <= t < self.t_off else 0.0
        if self.kind == "smooth":
            if t < self.t_on or t >= self.t_off:
                return 0.0
            r = self.ramp
            if r > 0.0 and t < self.t_on + r:
                return a * np.sin(0.5 * np.pi * (t - self.t_on) / r) ** 2
            if r > 0.0 and t > self.t_off - r:
                return a * np.sin(0.5 * np.pi * (self.t_off - t) / r) ** 2
            return a
        if self.kind == "gaussian":
            return a * np.exp(-0.5 * ((t - self.center) / self.width) ** 2)
        raise ValueError(f"unknown window kind {self.kind!r}")

    def integral(self, t0, t1, samples=4001):
        ts = np.linspace(t0, t1, samples)
        return float(np.trapezoid([self(t) for t in ts], ts))


@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    """H = sum_k p_k^2 / (2 m_k) + V(q) [+ g(t) W(q)]."""

    masses: tuple
    potential: RealField
    coupling: RealField = None
    window: Window = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        m = tuple(float(v) for v in np.broadcast_to(self.masses, (self.grid.dims,)))
        if any(v <= 0 for v in m):
            raise ValueError("masses must be positive")
        object.__setattr__(self, "masses", m)
        if self.coupling is not None:
            if self.coupling.grid != self.grid:
                raise GridError("coupling lives on a different grid")
            if self.window is None:
                object.__setattr__(self, "window", Window())

    @property
    def grid(self):
        return self.potential.grid

    @property
    def time_dependent(self):
        return self.coupling is not None and self.window.kind != "constant"

    @property
    def scheme(self):
        return SPLIT if all(self.grid.periodic) else CRANK_NICOLSON

    def potential_at(self, t):
        V = self.potential.values
        if self.coupling is None:
            return V
        return V + self.window(t) * self.coupling.values


# ---------------------------------------------------------------- presets


def free(grid, mass=1.0):
    return HamiltonianSpec((mass,) * grid.dims, RealField(grid, np.zeros(grid.shape)), name="free",
                           params={"mass": mass})


def harmonic(grid, mass=1.0, omega=1.0, center=0.0):
    q = grid.mesh()
    c = np.broadcast_to(np.asarray(center, dtype=float), (grid.dims,))
    V = sum(0.5 * mass * omega ** 2 * (q[a] - c[a]) ** 2 for a in range(grid.dims))
    return HamiltonianSpec((mass,) * grid.dims, RealField(grid, V), name="harmonic",
                           params={"mass": mass, "omega": omega})


def double_well(grid, mass=1.0, a=2.0, scale=0.125):
    """V = scale * (x^2 - a^2)^2 along axis 0."""
    x = grid.mesh()[0]
    V = scale * (x ** 2 - a ** 2) ** 2
    return HamiltonianSpec((mass,) * grid.dims, RealField(grid, V), name="double_well",
                           params={"mass": mass, "a": a, "scale": scale})


def double_slit_barrier(grid, mass=1.0, height=50.0, wall=0.0, thickness=0.4, separation=4.0,
                        slit_width=1.0, smoothing=0.1):
    """2-d screen at y = ``wall`` (axis 1) with slits centred at x = +-separation/2."""
    if grid.dims != 2:
        raise GridError("double_slit_barrier needs a 2-d grid")
    x, y = grid.mesh()

    def step(u):
        return 0.5 * (1.0 + np.tanh(u / smoothing))

    in_wall = step(thickness / 2 - np.abs(y - wall))
    s = separation / 2
    hole = step(slit_width / 2 - np.abs(x - s)) + step(slit_width / 2 - np.abs(x + s))
    V = height * in_wall * (1.0 - np.clip(hole, 0.0, 1.0))
    return HamiltonianSpec((mass, mass), RealField(grid, V), name="double_slit_barrier",
                           params={"height": height, "separation": separation, "slit_width": slit_width})


# ---------------------------------------------------------------- operators


def _kinetic_symbol(grid, masses):
    ks = np.meshgrid(*[grid.wavenumbers(a) for a in range(grid.dims)], indexing="ij")
    return sum(ks[a] ** 2 / (2.0 * masses[a]) for a in range(grid.dims))


def _fd2_matrix(n, h, periodic):
    c = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12.0 * h * h)
    offsets = [-2, -1, 0, 1, 2]
    if periodic:
        m = sp.lil_matrix((n, n))
        for i in range(n):
            for o, v in zip(offsets, c):
                m[i, (i + o) % n] += v
        return m.tocsr()
    return sp.diags([np.full(n - abs(o), v) for o, v in zip(offsets, c)], offsets, format="csr")


def hamiltonian_matrix(H, t=0.0):
    """Sparse matrix of the finite-difference Hamiltonian (Crank-Nicolson scheme)."""
    g = H.grid
    eye = [sp.identity(n, format="csr") for n in g.shape]
    K = sp.csr_matrix((g.size, g.size))
    for a in range(g.dims):
        mats = list(eye)
        mats[a] = _fd2_matrix(g.shape[a], g.spacing[a], g.is_periodic(a))
        term = mats[0]
        for m in mats[1:]:
            term = sp.kron(term, m, format="csr")
        K = K - term / (2.0 * H.masses[a])
    return (K + sp.diags(H.potential_at(t).ravel())).tocsr()


def apply_hamiltonian(psi_values, H, t=0.0):
    g = H.grid
    if H.scheme == SPLIT:
        T = _kinetic_symbol(g, H.masses)
        kin = np.fft.ifftn(T * np.fft.fftn(psi_values))
        return kin + H.potential_at(t) * psi_values
    return (hamiltonian_matrix(H, t) @ psi_values.ravel()).reshape(g.shape)


def energy(psi, H, t=None):
    """<psi|H|psi> / <psi|psi>."""
    t = psi.time if t is None else t
    Hpsi = apply_hamiltonian(psi.values, H, t)
    return float(np.real(np.vdot(psi.values, Hpsi)) / np.real(np.vdot(psi.values, psi.values)))


def dense_hamiltonian(H, t=0.0):
    g = H.grid
    if H.scheme == CRANK_NICOLSON:
        return hamiltonian_matrix(H, t).toarray()
    T = _kinetic_symbol(g, H.masses)
    eye = np.eye(g.size).reshape((g.size,) + g.shape)
    axes = tuple(range(1, g.dims + 1))
    K = np.fft.ifftn(T * np.fft.fftn(eye, axes=axes), axes=axes).real.reshape(g.size, g.size)
    K = 0.5 * (K + K.T)
    return K + np.diag(H.potential_at(t).ravel())


# ---------------------------------------------------------------- propagation


class Propagator:
    """Reusable stepper for a fixed (H, dt) pair."""

    def __init__(self, H, dt):
        if not dt > 0:
            raise ValueError("dt must be positive")
        self.H = H
        self.dt = float(dt)
        self.grid = H.grid
        if H.scheme == SPLIT:
            self._kin = np.exp(-1j * self.dt * _kinetic_symbol(self.grid, H.masses))
            self._half = None
        else:
            self._lu = None
        self._cached_t = None

    def _split_step(self, v, t):
        H = self.H
        if self._half is None or H.time_dependent:
            self._half = np.exp(-0.5j * self.dt * H.potential_at(t + 0.5 * self.dt))
        v = self._half * v
        v = np.fft.ifftn(self._kin * np.fft.fftn(v))
        return self._half * v

    def _cn_step(self, v, t):
        H = self.H
        if self._lu is None or H.time_dependent:
            M = hamiltonian_matrix(H, t + 0.5 * self.dt)
            eye = sp.identity(self.grid.size, format="csc")
            self._lu = spla.splu((eye + 0.5j * self.dt * M).tocsc())
            self._rhs = (eye - 0.5j * self.dt * M).tocsr()
        return self._lu.solve(self._rhs @ v.ravel()).reshape(self.grid.shape)

    def advance(self, psi, steps=1):
        v = np.array(psi.values)
        t = psi.time
        step = self._split_step if self.H.scheme == SPLIT else self._cn_step
        cell = self.grid.cell_volume
        n0 = np.sqrt(np.sum(np.abs(v) ** 2) * cell)
        for s in range(int(steps)):
            v = step(v, t + s * self.dt)
            n1 = np.sqrt(np.sum(np.abs(v) ** 2) * cell)
            if not np.isfinite(n1) or abs(n1 - n0) > 1e-6 * max(n0, 1e-300):
                raise StabilityFailure(f"norm drifted from {n0!r} to {n1!r} in one step")
            n0 = n1
        return WaveFunction(self.grid, v, t + int(steps) * self.dt)


def propagate(psi, H, dt, steps):
    """Advance ``psi`` by ``steps`` steps of size ``dt``."""
    if psi.grid != H.grid:
        raise GridError("wave function and Hamiltonian grids differ")
    return Propagator(H, dt).advance(psi, steps)


def conservation_check(H, psi0, dt, t1, checkpoints=20):
    """Largest |norm change| and relative energy change over [t0, t1].

    Energy is only reported for time-independent Hamiltonians (None otherwise).
    """
    nsteps = max(1, int(round((t1 - psi0.time) / dt)))
    prop = Propagator(H, (t1 - psi0.time) / nsteps)
    marks = np.unique(np.linspace(0, nsteps, checkpoints + 1).round().astype(int))
    n0 = norm(psi0)
    e0 = None if H.time_dependent else energy(psi0, H)
    dn, de = 0.0, 0.0
    psi, done = psi0, 0
    for m in marks[1:]:
        psi = prop.advance(psi, m - done)
        done = m
        dn = max(dn, abs(norm(psi) - n0))
        if e0 is not None:
            de = max(de, abs(energy(psi, H) - e0) / max(abs(e0), 1e-300))
    return {"norm_drift": dn, "energy_drift": de if e0 is not None else None,
            "t": float(t1 - psi0.time)}


class WaveHistory:
    """ψ(t) on demand, advancing in steps of ``dt/2`` from ``psi0``.

    Guidance RK4 needs ψ at t, t + dt/2, t + dt; those are served from a
    short sliding cache. Off-lattice times (step-shrink sub-stages) are
    reached by one partial step from the preceding lattice point.
    """

    def __init__(self, psi0, H, dt, keep=8):
        self.psi0 = psi0
        self.H = H
        self.h = 0.5 * float(dt)
        self.t0 = psi0.time
        self._prop = Propagator(H, self.h)
        self._cache = OrderedDict({0: psi0})
        self._latest = (0, psi0)
        self._keep = keep
        self._offgrid = OrderedDict()

    def _lattice(self, k):
        if k in self._cache:
            self._cache.move_to_end(k)
            return self._cache[k]
        k0, psi = self._latest
        if k < k0:
            k0, psi = 0, self.psi0
        while k0 < k:
            psi = self._prop.advance(psi, 1)
            k0 += 1
        self._latest = (k, psi)
        self._cache[k] = psi
        while len(self._cache) > self._keep:
            self._cache.popitem(last=False)
        return psi

    def __call__(self, t):
        x = (t - self.t0) / self.h
        k = int(np.floor(x + 1e-9))
        if abs(x - k) <= 1e-9 * max(1.0, abs(x)):
            return self._lattice(k)
        key = round(float(t), 15)
        if key not in self._offgrid:
            base = self._lattice(k)
            psi = propagate(base, self.H, t - base.time, 1)
            self._offgrid[key] = psi
            while len(self._offgrid) > self._keep:
                self._offgrid.popitem(last=False)
        return self._offgrid[key]


class EigenSuperposition:
    """Exact evolution of a finite superposition of stationary states."""

    def __init__(self, states, energies, coefficients, t0=0.0):
        self.states = [s.values for s in states]
        self.grid = states[0].grid
        self.energies = np.asarray(energies, dtype=float)
        c = np.asarray(coefficients, dtype=complex)
        self.coefficients = c / np.sqrt(np.sum(np.abs(c) ** 2))
        self.t0 = float(t0)

    def __call__(self, t):
        ph = self.coefficients * np.exp(-1j * self.energies * (t - self.t0))
        v = sum(p * s for p, s in zip(ph, self.states))
        return WaveFunction(self.grid, v, t)


# ---------------------------------------------------------------- eigenstates


def _phase_fix(v):
    i = np.argmax(np.abs(v))
    return v * (np.abs(v[np.unravel_index(i, v.shape)]) / v[np.unravel_index(i, v.shape)])


def _residual(H, v, E):
    r = apply_hamiltonian(v, H) - E * v
    return float(np.sqrt(np.sum(np.abs(r) ** 2) * H.grid.cell_volume))


def stationary_state(H, n=0, method="auto", tol=1e-6, max_iter=2000, dtau=0.5):
    """n-th eigenpair (energy, WaveFunction) of a time-independent Hamiltonian.

    ``method``: ``dense`` diagonalizes the discrete Hamiltonian (default for
    grids up to 2048 points); ``relax`` runs implicit imaginary-time steps
    (I + dtau (H - s))^-1 with Gram-Schmidt deflation against lower states.
    """
    g = H.grid
    if method == "auto":
        method = "dense" if g.size <= 2048 else "relax"
    if method == "dense":
        Hd = dense_hamiltonian(H)
        w, vecs = scipy.linalg.eigh(Hd, subset_by_index=[n, n])
        v = vecs[:, 0].reshape(g.shape) / np.sqrt(g.cell_volume)
        E = float(w[0])
    elif method == "relax":
        E, v = _relax(H, n, tol, max_iter, dtau)
    else:
        raise ValueError(f"unknown method {method!r}")
    v = _phase_fix(v.astype(complex))
    psi = normalize(WaveFunction(g, v, 0.0))
    res = _residual(H, psi.values, E)
    if res > tol:
        raise NoConvergence(f"eigenpair residual {res:.3e} exceeds {tol:.1e}")
    return E, psi


def _relax(H, n, tol, max_iter, dtau):
    g = H.grid
    cell = g.cell_volume
    shift = float(np.min(H.potential.values))
    N = g.size

    def apply(x):
        x = x.reshape(g.shape)
        return (x + dtau * (apply_hamiltonian(x, H) - shift * x)).ravel()

    op = spla.LinearOperator((N, N), matvec=apply, dtype=complex)
    q = g.mesh()
    lower = []
    for level in range(n + 1):
        # deterministic start with the right number of sign changes along axis 0
        v = np.exp(-0.5 * sum(((q[a] - np.mean(g.axis(a))) / (0.15 * g.length(a))) ** 2
                              for a in range(g.dims))).astype(complex)
        v = v * (q[0] - np.mean(g.axis(0))) ** level
        converged = False
        for _ in range(max_iter):
            for u in lower:
                v = v - np.vdot(u, v) * cell * u
            v = v / np.sqrt(np.sum(np.abs(v) ** 2) * cell)
            Hv = apply_hamiltonian(v, H)
            E = float(np.real(np.vdot(v, Hv)) * cell)
            r = Hv - E * v
            if np.sqrt(np.sum(np.abs(r) ** 2) * cell) < 0.1 * tol:
                converged = True
                break
            x, info = spla.cg(op, v.ravel(), x0=v.ravel(), rtol=1e-13, atol=0.0, maxiter=10 * N)
            v = x.reshape(g.shape)
        if not converged:
            raise NoConvergence(f"imaginary-time relaxation did not converge for level {level}")
        lower.append(v)
    return E, v
