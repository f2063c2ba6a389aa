import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pilotwave import guidance as G
from pilotwave import schrodinger as S
from pilotwave.errors import NodeEncounter, OutOfDomain
from pilotwave.grid import GridSpec, WaveFunction, current, density, normalize

from conftest import gaussian

PG = GridSpec.uniform(-10.0, 10.0, 256)
STARTS = (1.2, 1.5, 1.8, 2.2)


def plane_provider(grid, k, m=1.0):
    x = grid.axis(0)
    return lambda t: WaveFunction(grid, np.exp(1j * (k * x - k * k * t / (2 * m))), t)


def superposition(ho_states):
    (E0, p0), (E1, p1) = ho_states[:2]
    return S.EigenSuperposition([p0, p1], [E0, E1], [1, 1])


def endpoint_errors(flow, dts, t1=5.0):
    Q0 = np.array(STARTS)[:, None]
    ref = G.integrate_many(flow, Q0, 0.0, t1, dts[-1] / 16, stride=10**9).final[:, 0]
    errs = []
    for dt in dts:
        end = G.integrate_many(flow, Q0, 0.0, t1, dt, stride=10**9).final[:, 0]
        errs.append(np.max(np.abs(end - ref)))
    return errs


# ---------------------------------------------------------------- velocity field


def test_velocity_plane_wave():
    k = 2 * np.pi * 3 / PG.length(0)
    v = G.velocity_field(plane_provider(PG, k)(0.0), 1.0)
    assert np.allclose(v.values[:, 0], k, atol=1e-11)


def test_velocity_real_state_zero(ho_states):
    v = G.velocity_field(ho_states[0][1], 1.0)
    ok = ~v.flagged
    assert np.max(np.abs(v.values[ok])) < 1e-14


def test_velocity_equals_current_over_density(ho_states):
    p0, p1 = ho_states[0][1], ho_states[1][1]
    psi = normalize(p0 + p1 * 1j)
    v = G.velocity_field(psi, 1.0)
    j = current(psi, 1.0).values[:, 0]
    rho = density(psi).values
    ok = ~v.flagged
    assert np.max(np.abs(v.values[ok, 0] - j[ok] / rho[ok])) < 1e-10


def test_velocity_flags_nodes(ho_states):
    x = PG.axis(0)
    v = G.velocity_field(ho_states[0][1], 1.0)
    # the Gaussian tails at |x| ~ 10 drop below 1e-12 of the peak
    assert v.flagged[np.abs(x) > 8].all()
    assert np.isnan(v.values[v.flagged]).all()


# ---------------------------------------------------------------- step


def test_step_plane_wave_exact():
    g = GridSpec.uniform(0.0, 2 * np.pi, 64)
    q = G.step(plane_provider(g, 2.0), [0.0], 0.0, 0.1, (1.0,))
    assert abs(q[0] - 0.2) < 1e-13


def test_step_stationary_state(ho_states):
    E0, p0 = ho_states[0]
    prov = S.EigenSuperposition([p0], [E0], [1.0])
    q = G.step(prov, [0.7], 0.0, 0.1, (1.0,))
    assert abs(q[0] - 0.7) < 1e-14


def test_free_packet_center_rides_peak():
    g = GridSpec.uniform(-20.0, 20.0, 512)
    psi0 = gaussian(g, 0.0, 1.0, 1.0)
    sc = G.ParticleScenario("free", S.free(g), psi0, 1e-3, 1.0)
    tr = G.integrate(sc, [0.0], 0.0, 1.0, 1e-3)
    assert abs(tr.final[0] - 1.0) < 1e-4


def test_step_at_node_raises(ho_states):
    # first excited state vanishes at x = 0: no velocity there
    E1, p1 = ho_states[1]
    prov = S.EigenSuperposition([p1], [E1], [1.0])
    with pytest.raises(NodeEncounter):
        G.step(prov, [0.0], 0.0, 0.1, (1.0,))


def test_step_out_of_domain():
    g = GridSpec.uniform(0.0, 1.0, 65, "reflecting")
    with pytest.raises(OutOfDomain):
        G.step(plane_provider(g, 2.0), [0.95], 0.0, 0.1, (1.0,))


def test_node_abort_is_a_status(ho_states):
    E1, p1 = ho_states[1]
    prov = S.EigenSuperposition([p1], [E1], [1.0])
    tr = G.integrate(prov, [0.0], 0.0, 1.0, 0.1, masses=(1.0,))
    assert tr.status == G.NODE_ABORT


# ---------------------------------------------------------------- integrate


def test_plane_wave_uniform_motion():
    g = GridSpec.uniform(0.0, 2 * np.pi, 64)
    tr = G.integrate(plane_provider(g, 3.0), [0.5], 0.0, 2.0, 0.05, masses=(1.0,))
    assert tr.status == G.COMPLETED
    assert np.max(np.abs(tr.positions[:, 0] - (0.5 + 3.0 * tr.times))) < 1e-12


def test_superposition_period(ho_states):
    flow = G.ParticleFlow(superposition(ho_states), (1.0,))
    b = G.integrate_many(flow, [[1.0]], 0.0, 15.0, 0.01)
    x = b.positions[:, 0, 0]
    t = b.times
    # maxima of the trajectory (interior local maxima)
    i = np.flatnonzero((x[1:-1] > x[:-2]) & (x[1:-1] >= x[2:])) + 1
    assert i.size >= 2
    period = np.mean(np.diff(t[i]))
    assert abs(period / (2 * np.pi) - 1) < 1e-2


def test_superposition_period_against_fine_reference(ho_states):
    flow = G.ParticleFlow(superposition(ho_states), (1.0,))
    coarse = G.integrate_many(flow, [[1.5]], 0.0, 2 * np.pi, 2 * np.pi / 200, stride=10**9).final[0, 0]
    fine = G.integrate_many(flow, [[1.5]], 0.0, 2 * np.pi, 2 * np.pi / 3200, stride=10**9).final[0, 0]
    assert abs(coarse - fine) < 1e-6
    assert abs(fine - 1.5) < 1e-6  # back to the start after one Bohr period


def test_fourth_order(ho_states):
    flow = G.ParticleFlow(superposition(ho_states), (1.0,))
    e = endpoint_errors(flow, [0.1, 0.05, 0.025])
    ratios = [e[0] / e[1], e[1] / e[2]]
    assert all(abs(r / 16 - 1) < 0.2 for r in ratios), (e, ratios)


def test_thread_count_does_not_change_results(ho_states):
    flow = G.ParticleFlow(superposition(ho_states), (1.0,), keep=None)
    Q0 = np.linspace(-2, 2, 17)[:, None]
    a = G.integrate_many(flow, Q0, 0.0, 1.0, 0.01, stride=10)
    b = G.integrate_many(flow, Q0, 0.0, 1.0, 0.01, stride=10, threads=3)
    assert np.array_equal(a.positions, b.positions)
    assert np.array_equal(a.codes, b.codes)


def test_trajectory_csv(tmp_path, ho_states):
    flow = G.ParticleFlow(superposition(ho_states), (1.0,))
    tr = G.integrate(flow, [0.5], 0.0, 0.5, 0.1)
    p = tmp_path / "t.csv"
    G.write_trajectory_csv(p, tr)
    lines = p.read_text().splitlines()
    assert lines[0] == "t,q0,status_flag"
    assert len(lines) == len(tr.times) + 1
    assert lines[-1].endswith(",0")


# ---------------------------------------------------------------- invariants


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(-2.5, 2.5), min_size=2, max_size=6, unique=True))
def test_no_crossing(ho_states, starts):
    flow = G.ParticleFlow(superposition(ho_states), (1.0,))
    b = G.integrate_many(flow, np.array(starts)[:, None], 0.0, 3.0, 0.02, stride=5)
    margin = PG.spacing[0]
    assert G.no_crossing_violations(b, margin=margin) == 0


@settings(max_examples=10, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(0.3, 2.0))
def test_reflection_equivariance(q0, k):
    # even |psi|, odd phase: psi(-x) = conj(psi(x)) up to the k -> -k mirror
    g = GridSpec.uniform(-20.0, 20.0, 256)
    x = g.axis(0)
    v = np.exp(-((x - 3) ** 2) / 2 - 1j * k * x) + np.exp(-((x + 3) ** 2) / 2 + 1j * k * x)
    psi0 = normalize(WaveFunction(g, v))
    assert np.allclose(np.abs(psi0.values[1:]), np.abs(psi0.values[1:][::-1]), atol=1e-14)
    sc = G.ParticleScenario("mirror", S.free(g), psi0, 0.01, 1.0)
    b = G.integrate_many(sc.flow(), [[q0], [-q0]], 0.0, 1.0, 0.01, stride=10)
    plus = b.positions[:, 0, 0]
    minus = b.positions[:, 1, 0]
    ok = np.isfinite(plus) & np.isfinite(minus)
    assert np.max(np.abs(plus[ok] + minus[ok])) < 1e-8
