"""Bohmian velocity fields and trajectory integration.

The velocity of configuration coordinate k is Im(d_k psi / psi) / m_k, which
equals j_k / rho. Off-grid evaluation interpolates the current and the density
with C2 cubic splines and divides; where the interpolated density falls below
the node floor (1e-12 of the snapshot maximum) the point is flagged and the
integrator applies the step-shrink policy instead of inventing a velocity.
"""

import threading
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import NodeEncounter, OutOfDomain
from .grid import GridError, current_array, spline_of

NODE_FLOOR = 1e-12
MAX_HALVINGS = 20

OK, NODE, OUTSIDE = 0, 1, 2
COMPLETED, NODE_ABORT, OUT_OF_DOMAIN = "completed", "node_abort", "out_of_domain"
STATUS_NAMES = {OK: COMPLETED, NODE: NODE_ABORT, OUTSIDE: OUT_OF_DOMAIN}
STATUS_FLAGS = {COMPLETED: 0, NODE_ABORT: 1, OUT_OF_DOMAIN: 2}


@dataclass(frozen=True, eq=False)
class VelocityField:
    """Velocity on the grid; flagged (sub-floor) points hold NaN."""

    grid: object
    values: np.ndarray = field(repr=False)
    flagged: np.ndarray = field(repr=False)
    floor: float = 0.0

    def component(self, axis):
        return self.values[..., axis]


def velocity_field(psi, masses, floor=NODE_FLOOR):
    rho = np.abs(psi.values) ** 2
    eps = floor * rho.max()
    flagged = rho < eps
    j = current_array(psi, masses)
    with np.errstate(divide="ignore", invalid="ignore"):
        v = j / rho[..., None]
    v[flagged] = np.nan
    v.setflags(write=False)
    return VelocityField(psi.grid, v, flagged, eps)


class FieldSampler:
    """Velocity at arbitrary configurations for one wave-function snapshot."""

    def __init__(self, psi, masses, floor=NODE_FLOOR):
        g = psi.grid
        self.grid = g
        rho = np.abs(psi.values) ** 2
        self.eps = floor * rho.max()
        # one spline over stacked (rho, j_0, ..., j_d-1) shares the tap work
        stacked = np.concatenate([rho[..., None], current_array(psi, masses)], axis=-1)
        self._spline = spline_of(stacked, g)

    def __call__(self, Q):
        """Return (velocity (n, d), code (n,)) with codes OK/NODE/OUTSIDE."""
        g = self.grid
        n = Q.shape[0]
        code = np.zeros(n, dtype=np.int8)
        finite = np.all(np.isfinite(Q), axis=1)
        code[~finite] = NODE
        inside = finite.copy()
        for ax in range(g.dims):
            if not g.is_periodic(ax):
                inside &= g.contains(np.where(finite, Q[:, ax], g.lower[ax]), ax)
        code[finite & ~inside] = OUTSIDE
        v = np.zeros_like(Q)
        live = np.flatnonzero(code == OK)
        if live.size:
            P = g.wrap(Q[live])
            vals = self._spline(P)
            rho = vals[:, 0]
            j = vals[:, 1:]
            good = rho >= self.eps
            code[live[~good]] = NODE
            keep = live[good]
            v[keep] = j[good] / rho[good, None]
        return v, code


class ParticleFlow:
    """dQ/dt for particles guided by a time-dependent wave function.

    ``provider(t)`` returns the wave function at time t. Snapshot samplers are
    produced under a lock and then only read, so several threads may share one
    flow. ``keep=None`` retains every sampler (needed when threads advance
    out of step); otherwise a sliding window of the most recent ones is kept.
    """

    def __init__(self, provider, masses, floor=NODE_FLOOR, keep=16):
        self.provider = provider
        self.masses = masses
        self.floor = floor
        self.keep = keep
        self._samplers = OrderedDict()
        self._lock = threading.Lock()

    def sampler(self, t):
        key = round(float(t), 12)
        s = self._samplers.get(key)
        if s is not None:
            return s
        with self._lock:
            s = self._samplers.get(key)
            if s is None:
                s = FieldSampler(self.provider(t), self.masses, self.floor)
                self._samplers[key] = s
                if self.keep is not None:
                    while len(self._samplers) > self.keep:
                        self._samplers.popitem(last=False)
        return s

    def __call__(self, t, Q):
        return self.sampler(t)(Q)


def _rk4(rhs, Q, t, dt):
    k1, c1 = rhs(t, Q)
    k2, c2 = rhs(t + 0.5 * dt, Q + 0.5 * dt * k1)
    k3, c3 = rhs(t + 0.5 * dt, Q + 0.5 * dt * k2)
    k4, c4 = rhs(t + dt, Q + dt * k3)
    code = np.maximum(np.maximum(c1, c2), np.maximum(c3, c4))
    # a member leaving the domain at any stage is reported as such
    outside = (c1 == OUTSIDE) | (c2 == OUTSIDE) | (c3 == OUTSIDE) | (c4 == OUTSIDE)
    code = np.where(outside, OUTSIDE, code)
    Qn = Q + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return Qn, code.astype(np.int8)


def advance(rhs, Q, t, dt, depth=0):
    """One RK4 step with the node step-shrink policy.

    Members whose stages hit a node are retried as two half steps,
    recursively, up to ``MAX_HALVINGS`` levels; beyond that they are returned
    with code NODE. Members leaving a reflecting boundary return OUTSIDE.
    """
    Qn, code = _rk4(rhs, Q, t, dt)
    retry = np.flatnonzero(code == NODE)
    if retry.size and depth < MAX_HALVINGS:
        h = 0.5 * dt
        q1, c1 = advance(rhs, Q[retry], t, h, depth + 1)
        fine = c1 == OK
        q2 = q1.copy()
        c2 = c1.copy()
        if fine.any():
            q2[fine], c2[fine] = advance(rhs, q1[fine], t + h, h, depth + 1)
        Qn[retry] = q2
        code[retry] = c2
    return Qn, code


def step(provider, Q, t, dt, masses):
    """Advance a single configuration by one RK4 step of size ``dt``."""
    flow = ParticleFlow(provider, masses)
    Q = np.atleast_1d(np.asarray(Q, dtype=float))
    Qn, code = advance(flow, Q[None, :], t, dt)
    if code[0] == NODE:
        raise NodeEncounter(f"density below the node floor near {Q.tolist()} at t={t}")
    if code[0] == OUTSIDE:
        raise OutOfDomain(f"trajectory left the grid near {Q.tolist()} at t={t}")
    return Qn[0]


@dataclass
class Trajectory:
    times: np.ndarray
    positions: np.ndarray
    status: str = COMPLETED

    @property
    def samples(self):
        return [(float(t), tuple(float(c) for c in q)) for t, q in zip(self.times, self.positions)]

    @property
    def final(self):
        return self.positions[-1]


@dataclass
class TrajectoryBundle:
    """Trajectories of many members recorded on a common clock.

    ``positions`` has shape (records, members, dims); entries after a member
    terminates are NaN. ``codes`` holds OK/NODE/OUTSIDE per member.
    """

    times: np.ndarray
    positions: np.ndarray
    codes: np.ndarray
    extra: dict = field(default_factory=dict)

    @property
    def size(self):
        return self.positions.shape[1]

    def status(self, i):
        return STATUS_NAMES[int(self.codes[i])]

    def trajectory(self, i):
        p = self.positions[:, i, :]
        valid = np.all(np.isfinite(p), axis=1)
        return Trajectory(self.times[valid], p[valid], self.status(i))

    @property
    def final(self):
        return self.positions[-1]


def integrate_many(rhs, Q0, t0, t1, dt, stride=1, threads=1):
    """Co-advance all members of ``Q0`` (shape (n, k)) from t0 to t1."""
    if not t1 > t0:
        raise ValueError("t1 must exceed t0")
    Q0 = np.array(np.atleast_2d(Q0), dtype=float)
    nsteps = max(1, int(round((t1 - t0) / dt)))
    h = (t1 - t0) / nsteps
    if threads > 1 and Q0.shape[0] > 1:
        parts = np.array_split(np.arange(Q0.shape[0]), threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(
                lambda idx: _integrate_block(rhs, Q0[idx], t0, h, nsteps, stride), parts))
        times = results[0][0]
        pos = np.concatenate([r[1] for r in results], axis=1)
        codes = np.concatenate([r[2] for r in results])
        return TrajectoryBundle(times, pos, codes)
    times, pos, codes = _integrate_block(rhs, Q0, t0, h, nsteps, stride)
    return TrajectoryBundle(times, pos, codes)


def _integrate_block(rhs, Q0, t0, h, nsteps, stride):
    n, k = Q0.shape
    rec_steps = list(range(0, nsteps + 1, stride))
    if rec_steps[-1] != nsteps:
        rec_steps.append(nsteps)
    times = np.array([t0 + s * h for s in rec_steps])
    pos = np.full((len(rec_steps), n, k), np.nan)
    codes = np.zeros(n, dtype=np.int8)
    Q = Q0.copy()
    pos[0] = Q
    r = 1
    live = np.arange(n)
    for s in range(1, nsteps + 1):
        if live.size:
            Qn, c = advance(rhs, Q[live], t0 + (s - 1) * h, h)
            Q[live] = Qn
            dead = c != OK
            if dead.any():
                codes[live[dead]] = c[dead]
                Q[live[dead]] = np.nan
                live = live[~dead]
        if r < len(rec_steps) and s == rec_steps[r]:
            pos[r] = Q
            r += 1
    return times, pos, codes


@dataclass
class ParticleScenario:
    """A wave function, its Hamiltonian and the shared clock step.

    ``provider`` optionally supplies psi(t) directly (e.g. an exact
    eigen-superposition); otherwise the propagator history is used.
    """

    name: str
    hamiltonian: object
    psi0: object
    dt: float
    t1: float
    stride: int = 1
    provider: object = None

    @property
    def grid(self):
        return self.psi0.grid

    @property
    def masses(self):
        return self.hamiltonian.masses

    def history(self):
        if self.provider is not None:
            return self.provider
        from .schrodinger import WaveHistory

        return WaveHistory(self.psi0, self.hamiltonian, self.dt)

    def flow(self, keep=16):
        return ParticleFlow(self.history(), self.masses, keep=keep)

    def psi_at(self, t):
        return self.history()(t)


def integrate(scenario_or_flow, Q0, t0, t1, dt, stride=1, masses=None):
    """Integrate one configuration; returns a :class:`Trajectory`.

    The first argument is a :class:`ParticleScenario`, a flow ``rhs(t, Q)``
    or a wave-function provider (then ``masses`` is required). Step failures end the trajectory and are
    reported through ``Trajectory.status``.
    """
    rhs = scenario_or_flow
    if isinstance(rhs, ParticleScenario):
        rhs = rhs.flow()
    elif masses is not None:
        rhs = ParticleFlow(scenario_or_flow, masses)
    bundle = integrate_many(rhs, np.atleast_1d(np.asarray(Q0, dtype=float))[None, :], t0, t1, dt, stride)
    return bundle.trajectory(0)


def no_crossing_violations(bundle, margin=0.0, axis=0):
    """Count recorded times where the 1-d ordering of start points is broken
    by more than ``margin``."""
    x0 = bundle.positions[0, :, axis]
    order = np.argsort(x0, kind="stable")
    bad = 0
    for r in range(bundle.positions.shape[0]):
        x = bundle.positions[r, order, axis]
        x = x[np.isfinite(x)]
        if x.size > 1 and np.any(np.diff(x) < -margin):
            bad += 1
    return bad


def write_trajectory_csv(path, traj):
    from .io import fmt

    d = traj.positions.shape[1]
    flag = STATUS_FLAGS[traj.status]
    with open(path, "w") as fh:
        fh.write(",".join(["t"] + [f"q{a}" for a in range(d)] + ["status_flag"]) + "\n")
        last = len(traj.times) - 1
        for i, (t, q) in enumerate(zip(traj.times, traj.positions)):
            f = flag if i == last else 0
            fh.write(",".join([fmt(t)] + [fmt(c) for c in q] + [str(f)]) + "\n")


__all__ = [
    "GridError", "velocity_field", "FieldSampler", "ParticleFlow", "advance", "step",
    "integrate", "integrate_many", "Trajectory", "TrajectoryBundle", "ParticleScenario",
]
