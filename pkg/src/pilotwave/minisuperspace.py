"""Homogeneous minisuperspace: Wheeler-DeWitt solutions and Bohmian cosmologies.

Variables are alpha = ln a and a homogeneous scalar phi. With the
gravitational scale kappa_eff playing the role of hbar, the classical
constraint and Hamiltonian are

    h = -P_alpha^2 + P_phi^2 + U(alpha, phi),    H = N e^{-3 alpha} h / 12,
    U = u0 + 12 Lambda e^{6 alpha} - 36 k e^{4 alpha} + 12 V_m(phi) e^{6 alpha}.

The DeWitt metric is conformally flat, diag(-1, +1) up to the factor
e^{-3 alpha} / 12, and the Laplace-Beltrami ordering in two dimensions is the
flat wave operator, giving

    [d_alpha^2 - d_phi^2 + U / kappa^2] Psi = 0.

With S = kappa arg Psi the guidance law reads

    d alpha / d tau = -N e^{-3 alpha} / 6 * d_alpha S,
    d phi / d tau   = +N e^{-3 alpha} / 6 * d_phi S,

and proper time is T = int N d tau. Expanding universes have d_alpha S < 0.
Grids put alpha on axis 0 (reflecting) and phi on axis 1 (periodic).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .errors import (ConstraintViolation, InsufficientOverlap, StiffnessFailure,
                     TurningPointInDomain)
from .grid import (GridSpec, RealField, VectorField, WaveFunction, _fd_gradient,
                   spectral_derivative, spline_of)
from .guidance import NODE, NODE_FLOOR, OK, OUTSIDE, STATUS_FLAGS, STATUS_NAMES, integrate_many

TOL_EQUIV = 1e-2
VALIDITY_LIMIT = 0.1

# Yoshida triple-jump weights
_W1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_W0 = -(2.0 ** (1.0 / 3.0)) * _W1


# ---------------------------------------------------------------- model


@dataclass(frozen=True)
class MatterPotential:
    """V_m(phi): ``none``, ``constant`` (value) or ``harmonic`` (mass, center)."""

    kind: str = "none"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("none", "constant", "harmonic"):
            raise ValueError(f"unknown matter potential {self.kind!r}")

    @property
    def constant(self):
        return self.kind in ("none", "constant")

    def __call__(self, phi):
        phi = np.asarray(phi, dtype=float)
        if self.kind == "none":
            return np.zeros_like(phi)
        if self.kind == "constant":
            return np.full_like(phi, float(self.params.get("value", 0.0)))
        mu = float(self.params.get("mass", 1.0))
        c = float(self.params.get("center", 0.0))
        return 0.5 * mu**2 * (phi - c) ** 2

    def derivative(self, phi):
        phi = np.asarray(phi, dtype=float)
        if self.kind != "harmonic":
            return np.zeros_like(phi)
        mu = float(self.params.get("mass", 1.0))
        return mu**2 * (phi - float(self.params.get("center", 0.0)))


@dataclass(frozen=True)
class MinisuperspaceModel:
    lam: float = 0.0
    curvature: int = 0
    matter: MatterPotential = field(default_factory=MatterPotential)
    kappa: float = 1.0
    u0: float = 0.0  # constant offset, used for test models

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("Lambda must be non-negative")
        if self.curvature not in (-1, 0, 1):
            raise ValueError("curvature must be -1, 0 or +1")
        if not self.kappa > 0:
            raise ValueError("kappa_eff must be positive")

    @property
    def trivial(self):
        """True for the free model (U identically zero)."""
        return (self.lam == 0 and self.curvature == 0 and self.u0 == 0
                and (self.matter.kind == "none"
                     or (self.matter.kind == "constant" and self.matter.params.get("value", 0.0) == 0)))

    @property
    def alpha_only(self):
        return self.matter.constant

    def U(self, alpha, phi=0.0):
        a = np.asarray(alpha, dtype=float)
        e6 = np.exp(6.0 * a)
        return (self.u0 + 12.0 * self.lam * e6 - 36.0 * self.curvature * np.exp(4.0 * a)
                + 12.0 * self.matter(phi) * e6)

    def dU(self, alpha, phi=0.0):
        a = np.asarray(alpha, dtype=float)
        e6 = np.exp(6.0 * a)
        du_a = 72.0 * self.lam * e6 - 144.0 * self.curvature * np.exp(4.0 * a) + 72.0 * self.matter(phi) * e6
        du_p = 12.0 * self.matter.derivative(phi) * e6
        return du_a, du_p

    def constraint(self, alpha, phi, p_alpha, p_phi):
        return -p_alpha**2 + p_phi**2 + self.U(alpha, phi)

    def hubble(self):
        """de Sitter rate sqrt(Lambda/3)."""
        return math.sqrt(self.lam / 3.0)


@dataclass
class LapseFunction:
    """Positive lapse N(alpha, phi, tau).

    kinds: ``unit``; ``scaled`` (constant ``scale``); ``trajectory_dependent``
    with ``form`` ``tanh_phi`` (1 + amplitude tanh(phi)) or a callable.
    """

    kind: str = "unit"
    scale: float = 1.0
    amplitude: float = 0.5
    form: object = "tanh_phi"

    def __post_init__(self):
        if self.kind not in ("unit", "scaled", "trajectory_dependent"):
            raise ValueError(f"unknown lapse kind {self.kind!r}")
        if self.kind == "scaled" and not self.scale > 0:
            raise ValueError("lapse scale must be positive")
        if self.kind == "trajectory_dependent" and self.form == "tanh_phi" and abs(self.amplitude) >= 1:
            raise ValueError("1 + a tanh(phi) needs |a| < 1 to stay positive")

    def __call__(self, alpha, phi, tau=0.0):
        shape = np.broadcast(np.asarray(alpha), np.asarray(phi)).shape
        if self.kind == "unit":
            return np.ones(shape)
        if self.kind == "scaled":
            return np.full(shape, float(self.scale))
        if callable(self.form):
            n = np.asarray(self.form(alpha, phi, tau), dtype=float)
        else:
            n = 1.0 + self.amplitude * np.tanh(phi)
        return np.broadcast_to(n, shape)

    def gradient(self, alpha, phi, tau=0.0, eps=1e-6):
        if self.kind != "trajectory_dependent":
            return 0.0, 0.0
        if self.form == "tanh_phi":
            return 0.0, self.amplitude / np.cosh(phi) ** 2
        da = (self(alpha + eps, phi, tau) - self(alpha - eps, phi, tau)) / (2 * eps)
        dp = (self(alpha, phi + eps, tau) - self(alpha, phi - eps, tau)) / (2 * eps)
        return da, dp


def unit_lapse():
    return LapseFunction("unit")


def scaled_lapse(c):
    return LapseFunction("scaled", scale=c)


def tanh_lapse(amplitude=0.5):
    return LapseFunction("trajectory_dependent", amplitude=amplitude)


def cosmo_grid(alpha, phi):
    """Grid from (lower, upper, points) triples; alpha reflecting, phi periodic."""
    return GridSpec((alpha[0], phi[0]), (alpha[1], phi[1]), (alpha[2], phi[2]),
                    ("reflecting", "periodic"))


# ---------------------------------------------------------------- classical


@dataclass
class CosmoTrajectory:
    tau: np.ndarray
    alpha: np.ndarray
    phi: np.ndarray
    T: np.ndarray
    status: str = "completed"
    extra: dict = field(default_factory=dict)

    @property
    def samples(self):
        return list(zip(self.tau, self.alpha, self.phi, self.T))

    def alpha_of_T(self, T):
        return CubicSpline(self.T, self.alpha)(T)

    def phi_of_T(self, T):
        return CubicSpline(self.T, self.phi)(T)


def constraint_momentum(model, alpha, phi, p_phi=0.0, expanding=True):
    """P_alpha on the constraint surface; negative for an expanding universe."""
    s = p_phi**2 + float(model.U(alpha, phi))
    if s < 0:
        raise ConstraintViolation("no real P_alpha: configuration is classically forbidden")
    p = math.sqrt(s)
    return -p if expanding else p


def _constraint_scale(model, alpha, phi, pa, pp):
    return pa**2 + pp**2 + abs(float(model.U(alpha, phi))) + 1e-300


def classical_solution(model, q0, momenta, tau_span, lapse=None, samples=2001, rtol=1e-12,
                       atol=1e-14, events=None):
    """Integrate the canonical equations of H = N e^{-3 alpha} h / 12 (DOP853).

    ``momenta`` = (P_alpha, P_phi) must satisfy the constraint h = 0 to 1e-8
    relative. Returns a CosmoTrajectory with ``extra['constraint_drift']``.
    """
    lapse = lapse or unit_lapse()
    a0, f0 = q0
    pa0, pp0 = momenta
    h0 = model.constraint(a0, f0, pa0, pp0)
    if abs(h0) > 1e-8 * _constraint_scale(model, a0, f0, pa0, pp0):
        raise ConstraintViolation(f"initial data violate the constraint: h = {h0:.3e}")

    def rhs(tau, y):
        a, f, pa, pp, _ = y
        n = float(lapse(a, f, tau))
        dna, dnf = lapse.gradient(a, f, tau)
        e = math.exp(-3.0 * a) / 12.0
        h = model.constraint(a, f, pa, pp)
        dua, duf = model.dU(a, f)
        return [
            -2.0 * n * e * pa,
            2.0 * n * e * pp,
            -(float(dna) * e * h - 3.0 * n * e * h + n * e * float(dua)),
            -(float(dnf) * e * h + n * e * float(duf)),
            n,
        ]

    ts = np.linspace(tau_span[0], tau_span[1], samples)
    sol = solve_ivp(rhs, tau_span, [a0, f0, pa0, pp0, 0.0], method="DOP853", t_eval=ts,
                    rtol=rtol, atol=atol, dense_output=True, events=events)
    a, f, pa, pp, T = sol.y
    h = model.constraint(a, f, pa, pp)
    scale = pa**2 + pp**2 + np.abs(model.U(a, f)) + 1e-300
    drift = float(np.max(np.abs(h) / scale))
    status = "completed" if sol.success else "failed"
    return CosmoTrajectory(sol.t, a, f, T, status,
                           {"p_alpha": pa, "p_phi": pp, "constraint_drift": drift,
                            "dense": sol.sol, "events": sol.t_events})


def bounce_alpha(model, alpha0, tau_max=20.0):
    """alpha at the turning point of a contracting closed de Sitter universe."""
    pa = constraint_momentum(model, alpha0, 0.0, 0.0, expanding=False)

    def turn(tau, y):
        return y[2]

    turn.terminal = True
    sol = classical_solution(model, (alpha0, 0.0), (pa, 0.0), (0.0, tau_max), events=turn)
    taus = sol.extra["events"][0]
    if taus.size == 0:
        raise ConstraintViolation("no bounce within the integration span")
    return float(sol.extra["dense"](taus[0])[0]), sol


# ---------------------------------------------------------------- WKB


_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def _cumulative_integral(f, x):
    """Cumulative integral of callable f on the nodes x (8-point Gauss per cell)."""
    a, b = x[:-1], x[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    pts = mid[:, None] + half[:, None] * _GL_X[None, :]
    cell = half * (f(pts) @ _GL_W)
    return np.concatenate([[0.0], np.cumsum(cell)])


def wkb_slope(model, alpha, k_phi=0.0, branch=1):
    """d_alpha S for the branch (+1 expanding, -1 contracting)."""
    s = k_phi**2 + model.U(alpha, 0.0)
    return -branch * np.sqrt(np.maximum(s, 0.0))


def wkb_phase(model, alpha, k_phi=0.0, branch=1, gravity_only=False):
    """S_alpha(alpha) with S = 0 at alpha[0], integrated from the EHJ slope."""
    if not (model.alpha_only or gravity_only):
        raise ValueError("the WKB constructor needs a phi-independent potential")
    m = model
    if gravity_only:
        m = MinisuperspaceModel(model.lam, model.curvature, MatterPotential(), model.kappa, model.u0)
    alpha = np.asarray(alpha, dtype=float)
    s = k_phi**2 + m.U(alpha)
    if np.any(s < 0):
        raise TurningPointInDomain("the classically allowed region ends inside the grid")
    return _cumulative_integral(lambda a: wkb_slope(m, a, k_phi, branch), alpha)


def de_sitter_phase(model, alpha):
    """Closed-form expanding-branch phase for Lambda > 0 (up to a constant)."""
    lam, k = model.lam, model.curvature
    return -((12.0 * lam * np.exp(2.0 * alpha) - 36.0 * k) ** 1.5) / (36.0 * lam)


def wkb_validity(model, alpha, k_phi=0.0):
    """kappa |S''| / S'^2, small where the WKB form is trustworthy."""
    s = k_phi**2 + model.U(alpha)
    du, _ = model.dU(alpha)
    slope = np.sqrt(np.maximum(s, 1e-300))
    second = 0.5 * du / slope
    return model.kappa * np.abs(second) / slope**2


@dataclass
class WkbState:
    psi: WaveFunction
    phase: np.ndarray  # S_alpha along the alpha axis (expanding branch)
    validity: RealField
    kappa: float
    k_phi: float


def construct_wkb(model, grid, k_phi=0.0, branch=1, superposition=False, weights=(1.0, 1.0),
                  amplitude=True):
    """Psi = A exp(i (S_alpha + k_phi phi) / kappa) on ``grid``.

    ``branch`` +1 is expanding, -1 contracting; ``superposition`` adds both
    with ``weights``. A = |S_alpha'|^{-1/2} is the transport amplitude. The
    result is normalized on the first alpha slice.
    """
    alpha = grid.axis(0)
    phi = grid.axis(1)
    kap = model.kappa
    if grid.is_periodic(1):
        m = k_phi * grid.length(1) / (2.0 * np.pi * kap)
        if abs(m - round(m)) > 1e-9:
            raise ValueError("k_phi / kappa must lie on the phi wavenumber lattice")
    S = wkb_phase(model, alpha, k_phi, 1)
    slope = np.abs(wkb_slope(model, alpha, k_phi, 1))
    step = max(np.max(slope) * grid.spacing[0], abs(k_phi) * grid.spacing[1]) / kap
    if step >= np.pi:
        raise ValueError(f"grid under-resolves the WKB phase ({step:.2f} rad per cell)")
    A = slope**-0.5 if amplitude else np.ones_like(slope)
    ph = np.exp(1j * k_phi * phi / kap)[None, :]
    plus = (A * np.exp(1j * S / kap))[:, None] * ph
    minus = (A * np.exp(-1j * S / kap))[:, None] * ph
    if superposition:
        v = weights[0] * plus + weights[1] * minus
    else:
        v = plus if branch == 1 else minus
    n0 = np.sqrt(np.sum(np.abs(v[0]) ** 2) * grid.spacing[1])
    val = RealField(grid, np.broadcast_to(wkb_validity(model, alpha, k_phi)[:, None], grid.shape))
    return WkbState(WaveFunction(grid, v / n0), S, val, kap, k_phi)


# ---------------------------------------------------------------- WDW solver


def _kick(psi_hat_pair, alpha, model, h, phi):
    psi, pi = psi_hat_pair
    U = model.U(alpha, phi) / model.kappa**2
    x = np.fft.ifft(psi)
    pi = pi - h * np.fft.fft(U * x)
    return psi, pi


def _drift(pair, h, omega):
    psi, pi = pair
    c = np.cos(omega * h)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(omega > 0, np.sin(omega * h) / np.where(omega > 0, omega, 1.0), h)
    return c * psi + s * pi, -omega * np.sin(omega * h) * psi + c * pi


def solve_wdw(model, grid, psi0, dpsi0, substeps=1, stiffness_bound=1.0, diagnostics=False):
    """March [d_alpha^2 - d_phi^2 + U / kappa^2] Psi = 0 along alpha.

    Spectral in phi (free part solved exactly per Fourier mode, alpha
    advanced with it) and a Yoshida fourth-order composition of
    kick-drift-kick steps. ``psi0``/``dpsi0`` are the values of Psi and
    d_alpha Psi on the first alpha node. Psi is stored on every alpha node;
    ``substeps`` internal steps are taken between nodes.
    """
    if grid.is_periodic(0) or not grid.is_periodic(1):
        raise ValueError("expected a reflecting alpha axis and a periodic phi axis")
    alpha = grid.axis(0)
    phi = grid.axis(1)
    h = grid.spacing[0] / int(substeps)
    Umax = float(np.max(np.abs(model.U(alpha[:, None], phi[None, :]))))
    if Umax * h * h / model.kappa**2 > stiffness_bound:
        raise StiffnessFailure(
            f"U h^2 / kappa^2 = {Umax * h * h / model.kappa**2:.3g} exceeds {stiffness_bound}")
    omega = np.abs(grid.wavenumbers(1))
    pair = (np.fft.fft(np.asarray(psi0, dtype=complex)), np.fft.fft(np.asarray(dpsi0, dtype=complex)))
    out = np.empty(grid.shape, dtype=complex)
    out[0] = psi0
    a = alpha[0]
    for i in range(1, grid.points[0]):
        for _ in range(int(substeps)):
            for w in (_W1, _W0, _W1):
                hw = w * h
                pair = _kick(pair, a, model, 0.5 * hw, phi)
                pair = _drift(pair, hw, omega)
                a = a + hw
                pair = _kick(pair, a, model, 0.5 * hw, phi)
        a = alpha[i]  # remove accumulated round-off
        out[i] = np.fft.ifft(pair[0])
        if not np.all(np.isfinite(out[i])):
            raise StiffnessFailure(f"non-finite amplitudes at alpha = {a:.4g}")
    psi = WaveFunction(grid, out)
    if not diagnostics:
        return psi
    rho = np.abs(out) ** 2
    edge = max(rho[:, 0].max(), rho[:, -1].max()) / rho.max()
    return psi, {"boundary_density": float(edge), "boundary_contaminated": bool(edge > 1e-8)}


def wdw_residual(model, Psi):
    """Normalized constraint residual per alpha slice (interior nodes).

    r(alpha) = ||R|| / (||d_a^2 Psi|| + ||d_phi^2 Psi|| + ||U Psi / kappa^2||)
    with R the WDW operator applied by 4th-order differences in alpha and
    spectrally in phi. Returns mean (per unit alpha) and max of r.
    """
    g = Psi.grid
    v = Psi.values
    h = g.spacing[0]
    d2a = (-v[:-4] + 16 * v[1:-3] - 30 * v[2:-2] + 16 * v[3:-1] - v[4:]) / (12 * h * h)
    core = v[2:-2]
    d2p = spectral_derivative(core, g, 1, order=2)
    alpha = g.axis(0)[2:-2]
    Uk = model.U(alpha[:, None], g.axis(1)[None, :]) / model.kappa**2
    R = d2a - d2p + Uk * core
    nr = np.linalg.norm(R, axis=1)
    scale = np.linalg.norm(d2a, axis=1) + np.linalg.norm(d2p, axis=1) + np.linalg.norm(Uk * core, axis=1)
    r = nr / np.maximum(scale, 1e-300)
    span = alpha[-1] - alpha[0]
    return {"mean": float(np.trapezoid(r, alpha) / span), "max": float(r.max()), "profile": r,
            "alpha": alpha}


# ---------------------------------------------------------------- guidance


def phase_gradient(Psi):
    """(d_alpha theta, d_phi theta) of theta = arg Psi from unwrapped phase steps.

    Valid while the phase changes by less than pi per cell; the result is
    fourth-order in alpha and spectral in phi.
    """
    g = Psi.grid
    v = Psi.values
    da = np.angle(v[1:] * np.conj(v[:-1]))
    theta = np.concatenate([np.zeros((1, g.points[1])), np.cumsum(da, axis=0)], axis=0)
    ga = _fd_gradient(theta, g.spacing[0], 0)
    dp = np.angle(np.roll(v, -1, axis=1) * np.conj(v))
    wind = dp.sum(axis=1, keepdims=True)
    tp = np.concatenate([np.zeros((g.points[0], 1)), np.cumsum(dp[:, :-1], axis=1)], axis=1)
    slope = wind / g.length(1)
    x = (g.axis(1) - g.lower[1])[None, :]
    gp = spectral_derivative(tp - slope * x, g, 1) + slope
    return ga, gp


def _unit_velocity(Psi, model):
    ga, gp = phase_gradient(Psi)
    e = (np.exp(-3.0 * Psi.grid.axis(0)) / 6.0)[:, None] * model.kappa
    return np.stack([-e * ga, e * gp], axis=-1)


def bohmian_velocity(Psi, lapse, model, tau=0.0, floor=NODE_FLOOR):
    """dq/dtau on the grid for lapse N; sub-floor points are NaN sentinels."""
    v = _unit_velocity(Psi, model)
    A, P = Psi.grid.mesh()
    v = v * lapse(A, P, tau)[..., None]
    rho = np.abs(Psi.values) ** 2
    v[rho < floor * rho.max()] = np.nan
    return v


class CosmoFlow:
    """Right-hand side for (alpha, phi, T) driven by a static Psi and lapse N."""

    def __init__(self, Psi, model, lapse, floor=NODE_FLOOR):
        self.grid = Psi.grid
        self.lapse = lapse
        rho = np.abs(Psi.values) ** 2
        self.eps = floor * rho.max()
        v = _unit_velocity(Psi, model)
        v[rho < self.eps] = 0.0
        self._spline = spline_of(np.concatenate([rho[..., None], v], axis=-1), self.grid)

    def __call__(self, tau, Q):
        g = self.grid
        n = Q.shape[0]
        code = np.zeros(n, dtype=np.int8)
        finite = np.all(np.isfinite(Q), axis=1)
        code[~finite] = NODE
        inside = finite & g.contains(np.where(finite, Q[:, 0], g.lower[0]), 0)
        code[finite & ~inside] = OUTSIDE
        out = np.zeros_like(Q)
        live = np.flatnonzero(code == OK)
        if live.size:
            P = g.wrap(Q[live, :2])
            vals = self._spline(P)
            good = vals[:, 0] >= self.eps
            code[live[~good]] = NODE
            keep = live[good]
            N = self.lapse(Q[keep, 0], Q[keep, 1], tau)
            out[keep, 0] = N * vals[good, 1]
            out[keep, 1] = N * vals[good, 2]
            out[keep, 2] = N
        return out, code


def integrate_cosmology(model, Psi, lapse, q0, tau_span, dtau, stride=1, flow=None):
    """RK4 integration of the guidance law with proper time T accumulated."""
    flow = flow or CosmoFlow(Psi, model, lapse)
    Q0 = np.array([[q0[0], q0[1], 0.0]])
    b = integrate_many(flow, Q0, tau_span[0], tau_span[1], dtau, stride=stride)
    p = b.positions[:, 0, :]
    ok = np.all(np.isfinite(p), axis=1)
    return CosmoTrajectory(b.times[ok], p[ok, 0], p[ok, 1], p[ok, 2], STATUS_NAMES[int(b.codes[0])])


def write_cosmo_csv(path, traj):
    from .io import fmt

    flag = STATUS_FLAGS.get(traj.status, 1)
    with open(path, "w") as fh:
        fh.write("tau,alpha,phi,proper_time,status_flag\n")
        last = len(traj.tau) - 1
        for i, (t, a, f, T) in enumerate(zip(traj.tau, traj.alpha, traj.phi, traj.T)):
            fh.write(f"{fmt(t)},{fmt(a)},{fmt(f)},{fmt(T)},{flag if i == last else 0}\n")


# ---------------------------------------------------------------- reports


def compare_classical(traj, classical):
    """Max relative error of a(T) = e^alpha against a classical run (same T)."""
    lo = max(traj.T[0], classical.T[0])
    hi = min(traj.T[-1], classical.T[-1])
    sel = (traj.T >= lo) & (traj.T <= hi)
    a_cl = classical.alpha_of_T(traj.T[sel])
    rel = np.abs(np.expm1(traj.alpha[sel] - a_cl))
    return float(rel.max()), (float(lo), float(hi))


def lapse_dependence_report(model, Psi, N1, N2, q0, tau_span, dtau, tol_equiv=TOL_EQUIV,
                            min_overlap=0.1, name="lapse"):
    """Integrate under two lapses and compare alpha on the shared proper-time range."""
    t1 = integrate_cosmology(model, Psi, N1, q0, tau_span, dtau)
    t2 = integrate_cosmology(model, Psi, N2, q0, tau_span, dtau)
    for t in (t1, t2):
        if t.status != "completed":
            raise InsufficientOverlap(f"a run ended early with status {t.status}")
    lo = max(t1.T[0], t2.T[0])
    hi = min(t1.T[-1], t2.T[-1])
    span = max(t1.T[-1] - t1.T[0], t2.T[-1] - t2.T[0])
    if hi - lo < min_overlap * span:
        raise InsufficientOverlap(f"proper-time ranges overlap on {hi - lo:.3g} of {span:.3g}")
    Ts = t1.T[(t1.T >= lo) & (t1.T <= hi)]
    D = float(np.max(np.abs(t1.alpha_of_T(Ts) - t2.alpha_of_T(Ts))))
    Dphi = float(np.max(np.abs(t1.phi_of_T(Ts) - t2.phi_of_T(Ts))))
    return {
        "scenario": name,
        "D": D,
        "D_phi": Dphi,
        "tol_equiv": tol_equiv,
        "classification": "gauge-equivalent" if D < tol_equiv else "gauge-dependent",
        "overlap": [float(lo), float(hi)],
        "phi_range": [float(min(t1.phi.min(), t2.phi.min())), float(max(t1.phi.max(), t2.phi.max()))],
        "lapse_range": [float(np.min(N2(t2.alpha, t2.phi, t2.tau))), float(np.max(N2(t2.alpha, t2.phi, t2.tau)))],
        "trajectories": (t1, t2),
    }


# ---------------------------------------------------------------- semiclassical matter


def _reference_step(chi, alpha_mid, dT, model, phi, k):
    """Strang step of i kappa d_T chi = [e^{-3a} P^2 / 12 + V_m e^{3a}] chi."""
    kap = model.kappa
    half = np.exp(-0.5j * dT * model.matter(phi) * np.exp(3.0 * alpha_mid) / kap)
    kin = np.exp(-1j * dT * kap * np.exp(-3.0 * alpha_mid) * k**2 / 12.0)
    chi = half * chi
    chi = np.fft.ifft(kin * np.fft.fft(chi))
    return half * chi


def _reference_generator(chi, alpha, model, phi, k):
    """(H_T chi) / kappa, so that d_T chi = -i (H_T chi) / kappa."""
    kap = model.kappa
    kin = np.fft.ifft(kap * np.exp(-3.0 * alpha) * k**2 / 12.0 * np.fft.fft(chi))
    return kin + model.matter(phi) * np.exp(3.0 * alpha) / kap * chi


def coherent_state(model, alpha, phi_grid, displacement=1.0):
    """Ground state of the matter oscillator at ``alpha``, shifted by ``displacement`` widths."""
    mu = float(model.matter.params.get("mass", 1.0))
    c = float(model.matter.params.get("center", 0.0))
    M = 6.0 * math.exp(3.0 * alpha) / model.kappa
    w = mu / math.sqrt(6.0)
    sigma = math.sqrt(1.0 / (2.0 * M * w))
    phi = phi_grid.axis(0)
    v = np.exp(-((phi - c - displacement * sigma) ** 2) / (4.0 * sigma**2)).astype(complex)
    v /= np.sqrt(np.sum(np.abs(v) ** 2) * phi_grid.spacing[0])
    return WaveFunction(phi_grid, v), sigma


def banks_initial_data(model, alpha0, chi):
    """Psi and d_alpha Psi on the alpha0 slice for A e^{i S0 / kappa} chi(phi)."""
    g = chi.grid
    phi = g.axis(0)
    k = g.wavenumbers(0)
    kap = model.kappa
    grav = MinisuperspaceModel(model.lam, model.curvature, MatterPotential(), kap, model.u0)
    s1 = float(wkb_slope(grav, alpha0))
    du, _ = grav.dU(alpha0)
    s2 = -0.5 * du / abs(s1)  # S0'' for the expanding branch
    A = abs(s1) ** -0.5
    dA = -0.5 * s2 / s1 * A
    x = chi.values
    # d_alpha chi from the first-order equation along the classical flow
    dchi = (-6.0 * math.exp(3.0 * alpha0) / s1) * (-1j) * _reference_generator(x, alpha0, model, phi, k)
    psi = A * x
    dpsi = (dA + 1j * s1 / kap * A) * x + A * dchi
    return psi, dpsi


def semiclassical_matter_report(model, alpha_span=(0.3, 1.4), alpha_points=5501,
                                phi=(-0.6, 0.6, 256), displacement=1.0, efolds=1.0, dT=5e-3,
                                substeps=4, validity_limit=VALIDITY_LIMIT, product_ansatz=False,
                                name="semiclassical-matter"):
    """Bohmian (alpha, phi) evolution versus matter Schrodinger evolution on de Sitter.

    The WDW solution starts from Banks initial data A e^{i S0/kappa} chi0 on
    the first alpha slice. The conditional wave function of phi along the
    Bohmian alpha(T) is compared with chi evolved by the effective matter
    Schrodinger equation along the classical alpha_cl(T) = alpha0 + H T.
    With ``product_ansatz`` Psi is the exact product built from that
    reference and the configuration follows alpha_cl (the kappa -> 0 limit).
    """
    from .conditional import conditional_wavefunction, phase_distance

    if model.lam <= 0 or model.curvature != 0 or model.matter.kind != "harmonic":
        raise ValueError("expected a flat de Sitter model with harmonic matter")
    a0 = alpha_span[0]
    H = model.hubble()
    T1 = efolds / H
    grav = MinisuperspaceModel(model.lam, 0, MatterPotential(), model.kappa)
    a_cl = lambda T: a0 + H * T  # noqa: E731
    validity = wkb_validity(grav, np.array([a0, a_cl(T1)]))
    vmax = float(validity.max())
    report = {
        "scenario": name,
        "kappa_eff": model.kappa,
        "validity_max": vmax,
        "validity_limit": validity_limit,
        "validity_violation": bool(vmax > validity_limit),
        "efolds": efolds,
    }
    if report["validity_violation"]:
        report.update({"pass": False, "max_delta": None,
                       "note": "WKB validity violated; no agreement asserted"})
        return report
    pg = GridSpec((phi[0],), (phi[1],), (phi[2],), ("periodic",))
    chi0, sigma = coherent_state(model, a0, pg, displacement)
    pv = pg.axis(0)
    kk = pg.wavenumbers(0)
    kap = model.kappa
    grid = cosmo_grid((a0, alpha_span[1], alpha_points), phi)
    if product_ansatz:
        hA = grid.spacing[0]
        dTn = hA / H
        n_nodes = grid.points[0]
        chis = [chi0.values]
        x = chi0.values
        for i in range(1, n_nodes):
            x = _reference_step(x, a_cl((i - 0.5) * dTn), dTn, model, pv, kk)
            chis.append(x)
        S0 = wkb_phase(grav, grid.axis(0), gravity_only=True)
        A = np.abs(wkb_slope(grav, grid.axis(0))) ** -0.5
        Psi = WaveFunction(grid, (A * np.exp(1j * S0 / kap))[:, None] * np.array(chis))
        Ts = np.arange(n_nodes) * dTn
        sel = Ts <= T1 + 1e-12
        deltas = []
        for i in np.flatnonzero(sel):
            cond = conditional_wavefunction(Psi, a_cl(Ts[i]), env_axis=0)
            deltas.append(phase_distance(cond, WaveFunction(pg, chis[i] / np.sqrt(
                np.sum(np.abs(chis[i]) ** 2) * pg.spacing[0]))))
        deltas = np.array(deltas)
        report.update({"T": Ts[sel].tolist(), "delta": deltas.tolist(),
                       "max_delta": float(deltas.max()), "mode": "product-ansatz",
                       "pass": bool(deltas.max() < 1e-6)})
        return report
    psi_a0, dpsi_a0 = banks_initial_data(model, a0, chi0)
    Psi, diag = solve_wdw(model, grid, psi_a0, dpsi_a0, substeps=substeps, diagnostics=True)
    traj = integrate_cosmology(model, Psi, unit_lapse(), (a0, float(pv[np.argmax(np.abs(chi0.values))])),
                               (0.0, T1), dT)
    nT = len(traj.T)
    x = chi0.values
    deltas = []
    for j in range(nT):
        if j > 0:
            x = _reference_step(x, a_cl(0.5 * (traj.T[j - 1] + traj.T[j])), traj.T[j] - traj.T[j - 1],
                                model, pv, kk)
        cond = conditional_wavefunction(Psi, float(traj.alpha[j]), env_axis=0)
        deltas.append(phase_distance(cond, WaveFunction(pg, x)))
    deltas = np.array(deltas)
    res = wdw_residual(model, Psi)
    report.update({
        "mode": "bohmian",
        "T": traj.T.tolist(),
        "delta": deltas.tolist(),
        "alpha": traj.alpha.tolist(),
        "alpha_classical": [a_cl(t) for t in traj.T],
        "validity_along": wkb_validity(grav, traj.alpha).tolist(),
        "max_delta": float(deltas.max()),
        "wdw_residual_mean": res["mean"],
        "boundary_contaminated": diag["boundary_contaminated"],
        "status": traj.status,
        "sigma0": sigma,
        "pass": bool(deltas.max() < 5e-2 and traj.status == "completed"),
    })
    return report
