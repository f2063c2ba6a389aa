import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pilotwave import equilibrium as Q
from pilotwave import guidance as G
from pilotwave import schrodinger as S
from pilotwave.errors import AbortFractionExceeded, RejectionStall
from pilotwave.grid import GridSpec, WaveFunction, normalize

from conftest import gaussian


def plane_scenario(k=2.0, m=1.0):
    g = GridSpec.uniform(0.0, 2 * np.pi, 64)
    x = g.axis(0)
    psi0 = WaveFunction(g, np.exp(1j * k * x) / np.sqrt(2 * np.pi))
    prov = lambda t: WaveFunction(g, psi0.values * np.exp(-1j * k * k * t / (2 * m)), t)  # noqa: E731
    return G.ParticleScenario("plane", S.free(g, m), psi0, 0.05, 1.0, provider=prov)


# ---------------------------------------------------------------- sampling


def test_uniform_sample_mean():
    g = GridSpec.uniform(-3.0, 5.0, 128)
    psi = WaveFunction(g, np.full(128, 1 / np.sqrt(8.0)))
    n = 10000
    e = Q.sample(psi, n, 11)
    sigma = 8.0 / np.sqrt(12.0)
    assert abs(e.members[:, 0].mean() - 1.0) < 4 * sigma / np.sqrt(n)
    assert e.members.min() >= -3.0 and e.members.max() < 5.0


def test_uniform_sample_mean_2d():
    g = GridSpec.uniform(-2.0, 2.0, 32, dims=2)
    psi = WaveFunction(g, np.full(g.shape, 0.25))
    n = 10000
    e = Q.sample(psi, n, 5)
    sigma = 4.0 / np.sqrt(12.0)
    assert np.all(np.abs(e.members.mean(axis=0)) < 4 * sigma / np.sqrt(n))


def test_ground_state_variance(ho_states):
    e = Q.sample(ho_states[0][1], 100000, 3)
    assert abs(e.members[:, 0].var() / 0.5 - 1) < 0.02


def test_single_member(ho_states):
    e = Q.sample(ho_states[0][1], 1, 9)
    assert e.size == 1 and -10.0 <= e.members[0, 0] < 10.0
    assert e.seed == 9


def test_rejection_stall():
    g = GridSpec.uniform(-1.0, 1.0, 256, dims=2)
    v = np.zeros(g.shape)
    v[128, 128] = 1.0
    with pytest.raises(RejectionStall):
        Q.sample(WaveFunction(g, v), 10, 1)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**64 - 1), st.integers(1, 500))
def test_sampling_deterministic(seed, n):
    psi = gaussian(GridSpec.uniform(-10.0, 10.0, 256), 1.0, 1.3, 0.4)
    a = Q.sample(psi, n, seed)
    b = Q.sample(psi, n, seed)
    assert a.members.tobytes() == b.members.tobytes()


# ---------------------------------------------------------------- KS / chi-square


def test_ks_null_distribution_over_seeds(ho_states):
    psi = normalize(ho_states[0][1] + ho_states[1][1])
    n = 10000
    crit = Q.critical_value(n)
    passed = sum(Q.ks_distance(Q.sample(psi, n, s), psi) < crit for s in range(20))
    assert passed >= 19


def test_ks_disjoint_support():
    g = GridSpec.uniform(-10.0, 10.0, 256)
    left = gaussian(g, -5.0, 0.3)
    right = gaussian(g, 5.0, 0.3)
    assert Q.ks_distance(Q.sample(left, 1000, 1), right) > 0.99


def test_ks_large_sample(ho_states):
    psi = ho_states[0][1]
    n = 1_000_000
    assert Q.ks_distance(Q.sample(psi, n, 42), psi) < Q.critical_value(n)


def test_ks_pvalue_consistent():
    n = 10000
    assert abs(Q.ks_pvalue(Q.critical_value(n), n) - 0.01) < 2e-3


def test_chi_square_on_own_samples(ho_states):
    psi = normalize(ho_states[0][1] + ho_states[2][1])
    stat, p, bins = Q.chi_square(Q.sample(psi, 10000, 4), psi, 50)
    assert bins == 50 and p > 0.01


def test_chi_square_2d():
    g = GridSpec.uniform(-6.0, 6.0, 64, dims=2)
    X, Y = g.mesh()
    psi = normalize(WaveFunction(g, np.exp(-(X**2 + 2 * Y**2) / 2) * (1 + 0.5 * X)))
    _, p, _ = Q.chi_square(Q.sample(psi, 20000, 8), psi, 8)
    assert p > 0.01


# ---------------------------------------------------------------- evolution


def test_plane_wave_ensemble_translates():
    sc = plane_scenario(k=2.0, m=1.0)
    e = Q.sample(sc.psi0, 200, 1)
    res = Q.evolve_ensemble(sc, e, 1.0)
    moved = res.ensemble.members[:, 0] - e.members[:, 0]
    assert np.max(np.abs(moved - 2.0)) < 1e-12
    assert res.ensemble.time == 1.0


def test_stationary_ensemble_unchanged(ho_states):
    E0, p0 = ho_states[0]
    sc = G.ParticleScenario("ground", S.harmonic(p0.grid), p0, 0.05, 1.0,
                            provider=S.EigenSuperposition([p0], [E0], [1.0]))
    e = Q.sample(p0, 200, 2)
    res = Q.evolve_ensemble(sc, e, 1.0)
    assert np.max(np.abs(res.ensemble.members - e.members)) < 1e-13


def test_bimodal_lobe_fractions():
    g = GridSpec.uniform(-40.0, 40.0, 1024)
    x = g.axis(0)
    v = np.exp(-x**2 / 2) * (np.exp(2j * x) + 0.6 * np.exp(-2j * x))
    psi0 = normalize(WaveFunction(g, v))
    sc = G.ParticleScenario("lobes", S.free(g), psi0, 0.01, 4.0)
    n = 10000
    res = Q.evolve_ensemble(sc, Q.sample(psi0, n, 17), 4.0)
    psi1 = S.propagate(psi0, S.free(g), 0.01, 400)
    right = float(np.sum(np.abs(psi1.values[x > 0]) ** 2) * g.cell_volume)
    frac = np.mean(res.ensemble.members[:, 0] > 0)
    assert abs(frac - right) < 3 * np.sqrt(right * (1 - right) / n)


def test_exclusion_accounting_and_abort_limit(ho_states):
    E1, p1 = ho_states[1]
    sc = G.ParticleScenario("excited", S.harmonic(p1.grid), p1, 0.05, 0.5,
                            provider=S.EigenSuperposition([p1], [E1], [1.0]))
    members = np.array([[-1.0], [0.0], [0.5], [1.5]])
    e = Q.Ensemble(members, 0, "manual", 0.0)
    res = Q._evolve(sc, e, 0.5)
    assert res.ensemble.size + res.aborts == e.size
    assert res.node_aborts == 1
    assert list(res.ensemble.ids) == [0, 2, 3]
    with pytest.raises(AbortFractionExceeded):
        Q.evolve_ensemble(sc, e, 0.5)


def test_report_fields_and_small_n_warning(ho_states):
    E0, p0 = ho_states[0]
    sc = G.ParticleScenario("ground", S.harmonic(p0.grid), p0, 0.05, 1.0,
                            provider=S.EigenSuperposition([p0], [E0], [1.0]))
    rep = Q.equivariance_report(sc, 10, [1, 2], 1.0)
    assert rep["warning"] is True
    run = rep["runs"][0]
    assert set(run) >= {"scenario", "n", "seed", "ks", "critical_value", "aborts", "pass"}
    assert set(run["ks"]["0"]) == {"t0", "t1"}
    assert run["rng"] == Q.RNG_NAME


def test_ensemble_csv(tmp_path, ho_states):
    e = Q.sample(ho_states[0][1], 5, 3)
    p = tmp_path / "e.csv"
    Q.write_ensemble_csv(p, e)
    lines = p.read_text().splitlines()
    assert lines[0] == "member_id,q0" and len(lines) == 6
