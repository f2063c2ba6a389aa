"""Conditional wave functions, branch decompositions and effective dynamics.

Composite scenarios live on a 2-d grid with axis 0 the subsystem coordinate x
and axis 1 the environment coordinate y. The conditional wave function is the
normalized slice x -> Psi(x, Y) at the actual environment position Y, with its
phase fixed so that the amplitude at the density maximum is real-positive.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientSeparation, NoBranches, NullSlice, OutOfDomain
from .grid import GridSpec, RealField, WaveFunction, normalize, overlap
from .guidance import OK, STATUS_NAMES, ParticleFlow, advance
from .schrodinger import HamiltonianSpec, Propagator, Window, WaveHistory
from .spline import GridSpline

DISJOINT = 1e-6
NULL_NORM = 1e-10
_WINDOW = 20


def axis_grid(grid, axis):
    """The 1-d grid of a single axis of ``grid``."""
    return GridSpec((grid.lower[axis],), (grid.upper[axis],), (grid.points[axis],),
                    (grid.boundary[axis],))


def fidelity(a, b):
    na = np.sqrt(abs(overlap(a, a)))
    nb = np.sqrt(abs(overlap(b, b)))
    return abs(overlap(a, b)) / (na * nb)


def phase_distance(a, b):
    """min over global phase of ||a - e^{i theta} b|| for normalized a, b."""
    c = overlap(b, a)
    ph = c / abs(c) if abs(c) > 0 else 1.0
    d = a.values - ph * b.values
    return float(np.sqrt(np.sum(np.abs(d) ** 2) * a.grid.cell_volume))


def _slice(Psi, Y, env_axis):
    g = Psi.grid
    vals = np.moveaxis(Psi.values, env_axis, 0)
    ax = env_axis
    if not g.contains(np.asarray(Y, dtype=float), ax):
        raise OutOfDomain(f"Y = {Y!r} outside the environment axis")
    y = np.array([[Y]], dtype=float)
    if g.is_periodic(ax):
        y = g.lower[ax] + np.mod(y - g.lower[ax], g.length(ax))
        sp = GridSpline(vals, (g.lower[ax],), (g.spacing[ax],), (True,))
        return sp(y)[0]
    # spline weights decay by ~0.27 per node, so a local window suffices
    n = g.points[ax]
    i = int(np.clip(np.floor((Y - g.lower[ax]) / g.spacing[ax]), 0, n - 1))
    lo, hi = max(0, i - _WINDOW), min(n, i + _WINDOW + 2)
    sp = GridSpline(vals[lo:hi], (g.lower[ax] + lo * g.spacing[ax],), (g.spacing[ax],), (False,))
    return sp(y)[0]


def _fix_phase(v):
    i = int(np.argmax(np.abs(v)))
    return v * (abs(v[i]) / v[i])


def conditional_wavefunction(Psi, Y, env_axis=1):
    """Normalized slice of ``Psi`` at environment coordinate ``Y``."""
    g = Psi.grid
    if g.dims != 2:
        raise ValueError("conditional wave functions need a 2-d grid")
    sys_axis = 1 - env_axis
    sub = axis_grid(g, sys_axis)
    v = _slice(Psi, Y, env_axis)
    n = np.sqrt(np.sum(np.abs(v) ** 2) * sub.cell_volume)
    if n < NULL_NORM:
        raise NullSlice(f"slice norm {n:.3e} at Y = {Y!r}")
    return WaveFunction(sub, _fix_phase(v / n), Psi.time)


# ---------------------------------------------------------------- branches


@dataclass
class Branch:
    psi: WaveFunction  # x-state, normalized
    phi: WaveFunction  # y-profile restricted to its region; |phi|^2 integrates to the weight
    weight: float
    region: tuple  # inclusive index range of y columns assigned to this branch


@dataclass
class BranchDecomposition:
    branches: list
    residual: float
    max_overlap: float
    marginal: np.ndarray = field(repr=False)
    env_grid: GridSpec = None
    owner: np.ndarray = field(default=None, repr=False)

    @property
    def weights(self):
        return [b.weight for b in self.branches]

    def __len__(self):
        return len(self.branches)

    def branch_of(self, Y):
        """Index of the branch whose y-region contains ``Y``."""
        g = self.env_grid
        u = (Y - g.lower[0]) / g.spacing[0]
        n = g.points[0]
        j = int(np.round(u)) % n if g.is_periodic(0) else int(np.clip(np.round(u), 0, n - 1))
        return int(self.owner[j])


def _clusters(mask, periodic):
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(idx) > 1)
    starts = np.concatenate([[idx[0]], idx[breaks + 1]])
    ends = np.concatenate([idx[breaks], [idx[-1]]])
    runs = [[int(s), int(e)] for s, e in zip(starts, ends)]
    n = mask.size
    if periodic and len(runs) > 1 and runs[0][0] == 0 and runs[-1][1] == n - 1:
        last = runs.pop()
        runs[0] = [last[0] - n, runs[0][1]]  # wrapped run, start may be negative
    return runs


def detect_branches(Psi, threshold=1e-6, require_split=False, env_axis=1):
    """Decompose ``Psi`` into products over disjoint environment regions.

    The y-marginal is clustered into connected regions above
    ``threshold * max``; every y column is then assigned to its nearest
    cluster. Within each region the dominant singular pair of the amplitude
    matrix gives the branch. ``max_overlap`` is the largest pairwise
    integral of |phi_a||phi_b| over y, using full-line y-profiles obtained
    by least-squares projection of Psi onto the branch x-states.
    """
    g = Psi.grid
    sys_axis = 1 - env_axis
    M = np.moveaxis(Psi.values, (sys_axis, env_axis), (0, 1))
    xg, yg = axis_grid(g, sys_axis), axis_grid(g, env_axis)
    dx, dy = xg.cell_volume, yg.cell_volume
    marg = np.sum(np.abs(M) ** 2, axis=0) * dx
    runs = _clusters(marg > threshold * marg.max(), yg.is_periodic(0))
    if not runs:
        raise NoBranches("environment marginal has no mass above threshold")
    if len(runs) == 1 and require_split:
        raise NoBranches("environment marginal forms a single cluster")
    n = yg.points[0]
    cols = np.arange(n)
    dist = np.empty((len(runs), n))
    for k, (s, e) in enumerate(runs):
        d = np.maximum(s - cols, 0) + np.maximum(cols - e, 0)
        if yg.is_periodic(0):
            d = np.minimum(d, np.maximum(s - (cols - n), 0) + np.maximum((cols - n) - e, 0))
            d = np.minimum(d, np.maximum(s - (cols + n), 0) + np.maximum((cols + n) - e, 0))
        dist[k] = d
    owner = np.argmin(dist, axis=0)
    branches = []
    approx = np.zeros_like(M)
    for k, run in enumerate(runs):
        sel = owner == k
        sub = M[:, sel]
        u, s, vh = np.linalg.svd(sub, full_matrices=False)
        u0 = u[:, 0]
        i = int(np.argmax(np.abs(u0)))
        p = abs(u0[i]) / u0[i]
        ux = u0 * p / np.sqrt(dx)
        prof = np.zeros(n, dtype=complex)
        prof[sel] = s[0] * vh[0] * np.sqrt(dx) / p
        approx += np.outer(ux, prof)
        weight = float(np.sum(np.abs(prof) ** 2) * dy)
        branches.append(Branch(WaveFunction(xg, ux, Psi.time), WaveFunction(yg, prof, Psi.time),
                               weight, tuple(run)))
    residual = float(np.sqrt(np.sum(np.abs(M - approx) ** 2) * dx * dy))
    max_ov = 0.0
    if len(branches) > 1:
        X = np.stack([b.psi.values for b in branches], axis=1) * np.sqrt(dx)
        coef, *_ = np.linalg.lstsq(X, M * np.sqrt(dx), rcond=1e-10)
        prof = np.abs(coef)
        for a in range(len(branches)):
            for b in range(a + 1, len(branches)):
                max_ov = max(max_ov, float(np.sum(prof[a] * prof[b]) * dy))
    return BranchDecomposition(branches, residual, max_ov, marg, yg, owner)


# ---------------------------------------------------------------- scenarios


@dataclass
class CompositeScenario:
    """Two-coordinate scenario: subsystem x (axis 0), environment y (axis 1).

    ``reference`` is the subsystem Hamiltonian H_x alone (1-d). When the full
    Hamiltonian carries a coupling g(t) W(x, y), the effective subsystem
    potential adds g(t) W(x, Y(t)).
    """

    name: str
    hamiltonian: HamiltonianSpec
    psi0: WaveFunction
    reference: HamiltonianSpec
    Y0: float
    X0: float = None
    dt: float = 1e-3
    t1: float = 1.0
    stride: int = 10
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.psi0.grid.dims != 2:
            raise ValueError("composite scenarios need a 2-d grid")
        if self.X0 is None:
            slice_ = np.abs(_slice(self.psi0, self.Y0, 1))
            self.X0 = float(self.psi0.grid.axis(0)[int(np.argmax(slice_))])

    @property
    def grid(self):
        return self.psi0.grid

    @property
    def interacting(self):
        return self.hamiltonian.coupling is not None

    def coupling_slice(self, Y):
        """W(x, Y) on the subsystem grid."""
        W = self.hamiltonian.coupling.values
        return np.real(_slice(WaveFunction(self.grid, W.astype(complex)), Y, 1))

    def history(self):
        return WaveHistory(self.psi0, self.hamiltonian, self.dt)


@dataclass
class ErrorCurve:
    t: np.ndarray
    delta: np.ndarray
    branch_overlap_max: np.ndarray
    branch_id_of_Y: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    status: str = "completed"
    decomposition: object = field(default=None, repr=False)
    final_psi: object = field(default=None, repr=False)
    final_conditional: object = field(default=None, repr=False)

    def valid_until(self, overlap_threshold=DISJOINT):
        """Mask of samples before the first branch-overlap event."""
        bad = self.branch_overlap_max >= overlap_threshold
        first = np.argmax(bad) if bad.any() else bad.size
        return np.arange(bad.size) < first


def effective_evolution_error(s, t1=None, dt=None, stride=None, threshold=1e-6):
    """Co-evolve Psi, the configuration (X, Y) and the 1-d reference psi_ref.

    Returns an :class:`ErrorCurve` with delta(t) = ||psi_t - psi_ref(t)||
    modulo global phase, the largest branch overlap and the branch holding Y.
    """
    t1 = s.t1 if t1 is None else t1
    dt = s.dt if dt is None else dt
    stride = s.stride if stride is None else stride
    t0 = s.psi0.time
    nsteps = max(1, int(round((t1 - t0) / dt)))
    dt = (t1 - t0) / nsteps
    hist = WaveHistory(s.psi0, s.hamiltonian, dt)
    flow = ParticleFlow(hist, s.hamiltonian.masses)
    Q = np.array([[s.X0, s.Y0]], dtype=float)
    ref = conditional_wavefunction(s.psi0, s.Y0)
    ref_prop = None if s.interacting else Propagator(s.reference, dt)
    window = s.hamiltonian.window or Window()
    rows = []
    status = "completed"
    dec = None
    psi_t = s.psi0
    cond = ref

    def record(t, psi, Y, X, ref):
        nonlocal dec, cond
        cond = conditional_wavefunction(psi, Y)
        delta = phase_distance(cond, ref)
        try:
            dec = detect_branches(psi, threshold)
            ov, bid = dec.max_overlap, dec.branch_of(Y)
        except NoBranches:
            ov, bid = float("nan"), -1
        rows.append((t, delta, ov, bid, X, Y))

    record(t0, s.psi0, s.Y0, s.X0, ref)
    for k in range(1, nsteps + 1):
        t = t0 + (k - 1) * dt
        Qn, code = advance(flow, Q, t, dt)
        if code[0] != OK:
            status = STATUS_NAMES[int(code[0])]
            break
        if ref_prop is None:
            ymid = 0.5 * (Q[0, 1] + Qn[0, 1])
            V = s.reference.potential.values + window(t + 0.5 * dt) * s.coupling_slice(ymid)
            Hr = HamiltonianSpec(s.reference.masses, RealField(s.reference.grid, V))
            ref = Propagator(Hr, dt).advance(ref, 1)
        else:
            ref = ref_prop.advance(ref, 1)
        Q = Qn
        if k % stride == 0 or k == nsteps:
            psi_t = hist(t + dt)
            record(t + dt, psi_t, float(Q[0, 1]), float(Q[0, 0]), ref)
    a = np.array(rows, dtype=float)
    return ErrorCurve(a[:, 0], a[:, 1], a[:, 2], a[:, 3].astype(int), a[:, 4], a[:, 5],
                      status, dec, psi_t, cond)


def write_error_curve_csv(path, curve):
    from .io import fmt

    with open(path, "w") as fh:
        fh.write("t,delta,branch_overlap_max,branch_id_of_Y\n")
        for t, d, o, b in zip(curve.t, curve.delta, curve.branch_overlap_max, curve.branch_id_of_Y):
            fh.write(f"{fmt(t)},{fmt(d)},{fmt(o)},{int(b)}\n")


# ---------------------------------------------------------------- presets


def _gauss(x, x0, sigma, k=0.0):
    return np.exp(-((x - x0) ** 2) / (4.0 * sigma**2) + 1j * k * x)


def _composite_grid(x, y):
    return GridSpec((x[0], y[0]), (x[1], y[1]), (x[2], y[2]), ("periodic", "periodic"))


def _separable(grid, masses, vx=None, vy=None, coupling=None, window=None, name="composite"):
    X, Y = grid.mesh()
    V = np.zeros(grid.shape)
    if vx is not None:
        V = V + vx(X)
    if vy is not None:
        V = V + vy(Y)
    return HamiltonianSpec(masses, RealField(grid, V), coupling, window, name)


def _reference(grid, mass, vx=None):
    xg = axis_grid(grid, 0)
    x = xg.axis(0)
    V = vx(x) if vx is not None else np.zeros_like(x)
    return HamiltonianSpec((mass,), RealField(xg, V))


def product_scenario(t1=2.0, dt=1e-3, stride=50, x=(-8.0, 8.0, 64), y=(-16.0, 16.0, 128)):
    """Non-interacting product state: HO packet in x times a moving y packet."""
    g = _composite_grid(x, y)
    X, Y = g.mesh()
    ho = lambda q: 0.5 * q**2  # noqa: E731
    H = _separable(g, (1.0, 1.0), vx=ho, name="cwf-product")
    psi = normalize(WaveFunction(g, _gauss(X, 1.0, 0.7071067811865476) * _gauss(Y, -2.0, 1.0, 1.0)))
    return CompositeScenario("cwf-product", H, psi, _reference(g, 1.0, ho), Y0=-1.5,
                             dt=dt, t1=t1, stride=stride)


def branches_scenario(t1=2.0, dt=1e-3, stride=50, k=6.0, sigma=0.5, separation=6.0,
                      x=(-8.0, 8.0, 64), y=(-40.0, 40.0, 512), Y0=None):
    """Two branches: HO ground/first-excited x-states tied to y-packets moving apart."""
    g = _composite_grid(x, y)
    X, Y = g.mesh()
    ho = lambda q: 0.5 * q**2  # noqa: E731
    H = _separable(g, (1.0, 1.0), vx=ho, name="cwf-branches")
    phi0 = np.pi**-0.25 * np.exp(-X**2 / 2)
    phi1 = np.sqrt(2.0) * X * phi0
    ya = _gauss(Y, -separation / 2, sigma, -k)
    yb = _gauss(Y, separation / 2, sigma, k)
    psi = normalize(WaveFunction(g, phi0 * ya + phi1 * yb))
    Y0 = -separation / 2 + 0.25 * sigma if Y0 is None else Y0
    return CompositeScenario("cwf-branches", H, psi, _reference(g, 1.0, ho), Y0=Y0, X0=0.3,
                             dt=dt, t1=t1, stride=stride,
                             info={"k": k, "sigma": sigma, "separation": separation})


def measurement_scenario(coupling=12.0, duration=2.0, amplitudes=(2.0, 1.0), pointer_mass=4.0,
                         pointer_width=1.0, system_mass=100.0, gate_width=0.5, dt=2e-3,
                         x=(-8.0, 8.0, 64), y=(-16.0, 16.0, 512), Y0=None, stride=50):
    """Pointer measurement of which x-packet (at -4 or +4) the system occupies.

    W(x, y) = g(t) lambda tanh(x / w) y pushes the pointer packet in opposite
    directions for the two x-packets during a box window of length
    ``duration``. The pointer packets end up separated by lambda T^2 / M
    with momenta +-lambda T, which the y grid must resolve.
    """
    sep = coupling * duration**2 / pointer_mass
    if sep < 5.0 * pointer_width:
        raise InsufficientSeparation(
            f"pointer separation {sep:.3g} below 5 pointer widths ({5 * pointer_width:.3g})")
    g = _composite_grid(x, y)
    X, Y = g.mesh()
    W = RealField(g, coupling * np.tanh(X / gate_width) * Y)
    window = Window("box", 1.0, 0.0, duration)
    H = _separable(g, (system_mass, pointer_mass), coupling=W, window=window, name="cwf-measurement")
    ca, cb = amplitudes
    xg = axis_grid(g, 0)
    xa = normalize(WaveFunction(xg, _gauss(xg.axis(0), -4.0, 0.5)))
    xb = normalize(WaveFunction(xg, _gauss(xg.axis(0), 4.0, 0.5)))
    chi = _gauss(Y, 0.0, pointer_width)
    psi = normalize(WaveFunction(g, (ca * xa.values[:, None] + cb * xb.values[:, None]) * chi))
    w = np.array([abs(ca) ** 2, abs(cb) ** 2])
    return CompositeScenario("cwf-measurement", H, psi, _reference(g, system_mass), Y0=0.0 if Y0 is None else Y0,
                             dt=dt, t1=duration, stride=stride,
                             info={"states": (xa, xb), "weights": tuple(w / w.sum()),
                                   "separation": sep})


def semiclassical_env_scenario(coupling=0.1, heavy_mass=1000.0, velocity=0.1, sigma_y=0.1,
                               dt=5e-3, stride=40, x=(-8.0, 8.0, 64), y=(-4.0, 4.0, 512)):
    """Light HO subsystem coupled by lambda x y to a heavy, slowly moving y packet.

    The run covers one transit: the packet travels 8 sigma_y.
    """
    g = _composite_grid(x, y)
    X, Y = g.mesh()
    ho = lambda q: 0.5 * q**2  # noqa: E731
    W = RealField(g, X * Y)
    H = _separable(g, (1.0, heavy_mass), vx=ho, coupling=W,
                   window=Window("constant", coupling), name="cwf-semiclassical-env")
    y0 = -4.0 * sigma_y
    kx = heavy_mass * velocity
    psi = normalize(WaveFunction(g, _gauss(X, 1.0, 0.7071067811865476) * _gauss(Y, y0, sigma_y, kx)))
    t1 = 8.0 * sigma_y / velocity
    return CompositeScenario("cwf-semiclassical-env", H, psi, _reference(g, 1.0, ho), Y0=y0,
                             dt=dt, t1=t1, stride=stride,
                             info={"coupling": coupling, "mass_ratio": heavy_mass})


# ---------------------------------------------------------------- measurement runs


def born_runs(s, runs=200, seed=0, threshold=1e-6):
    """Sample (X0, Y0) from |Psi0|^2, evolve all runs through the window, and
    classify each by the branch containing its final Y.

    Returns a dict with the decomposition weights, per-run branch ids and
    conditional fidelities with that branch's x-state.
    """
    from .equilibrium import sample
    from .guidance import integrate_many

    ens = sample(s.psi0, runs, seed)
    hist = WaveHistory(s.psi0, s.hamiltonian, s.dt)
    flow = ParticleFlow(hist, s.hamiltonian.masses)
    bundle = integrate_many(flow, ens.members, s.psi0.time, s.t1, s.dt, stride=10**9)
    psi_end = hist(s.t1)
    dec = detect_branches(psi_end, threshold, require_split=True)
    ids, fids, other = [], [], []
    for i in range(runs):
        if bundle.codes[i] != OK:
            ids.append(-1)
            fids.append(float("nan"))
            other.append(float("nan"))
            continue
        Yf = float(bundle.final[i, 1])
        b = dec.branch_of(Yf)
        cond = conditional_wavefunction(psi_end, Yf)
        ids.append(b)
        fids.append(fidelity(cond, dec.branches[b].psi))
        other.append(max(fidelity(cond, dec.branches[j].psi) for j in range(len(dec)) if j != b))
    return {"decomposition": dec, "branch_ids": np.array(ids), "fidelity": np.array(fids),
            "other_fidelity": np.array(other), "aborts": int((bundle.codes != OK).sum()),
            "psi": psi_end, "final": bundle.final}
