import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pilotwave import conditional as C
from pilotwave.errors import InsufficientSeparation, NoBranches, NullSlice
from pilotwave.grid import GridSpec, WaveFunction, normalize
from pilotwave.schrodinger import WaveHistory

G2 = GridSpec((-8.0, -20.0), (8.0, 20.0), (64, 256), ("periodic", "periodic"))
XG = C.axis_grid(G2, 0)


def packet(x, x0, sigma, k=0.0):
    return np.exp(-((x - x0) ** 2) / (4 * sigma**2) + 1j * k * x)


def x_states():
    x = XG.axis(0)
    a = normalize(WaveFunction(XG, packet(x, 0.0, 0.7071067811865476)))
    b = normalize(WaveFunction(XG, x * packet(x, 0.0, 0.7071067811865476)))
    return a, b


def two_branch(separation=16.0, sigma=1.0, ca=1.0, cb=1.0):
    X, Y = G2.mesh()
    a, b = x_states()
    ya = packet(Y, -separation / 2, sigma)
    yb = packet(Y, separation / 2, sigma)
    v = ca * a.values[:, None] * ya + cb * b.values[:, None] * yb
    return normalize(WaveFunction(G2, v)), a, b


# ---------------------------------------------------------------- conditional wave function


@settings(max_examples=20, deadline=None)
@given(st.floats(-6.0, 6.0))
def test_product_state_conditional_independent_of_Y(Y):
    X, Yg = G2.mesh()
    a, _ = x_states()
    Psi = normalize(WaveFunction(G2, a.values[:, None] * packet(Yg, 0.0, 2.0, 0.7)))
    assert C.fidelity(C.conditional_wavefunction(Psi, Y), a) > 1 - 1e-10


def test_two_branch_conditional_picks_branch():
    Psi, a, b = two_branch()
    assert C.fidelity(C.conditional_wavefunction(Psi, -8.3), a) > 1 - 1e-6
    assert C.fidelity(C.conditional_wavefunction(Psi, 7.6), b) > 1 - 1e-6


def test_conditional_is_normalized():
    Psi, _, _ = two_branch()
    c = C.conditional_wavefunction(Psi, -7.0)
    assert abs(np.sum(np.abs(c.values) ** 2) * XG.cell_volume - 1) < 1e-12


def test_null_slice():
    Psi, _, _ = two_branch(sigma=0.5)
    with pytest.raises(NullSlice):
        C.conditional_wavefunction(Psi, 0.0)


def test_phase_distance_ignores_global_phase():
    a, b = x_states()
    assert C.phase_distance(a, a * np.exp(0.7j)) < 1e-12
    assert abs(C.phase_distance(a, b) - np.sqrt(2)) < 1e-12  # orthogonal states


# ---------------------------------------------------------------- branch detection


def test_detect_two_branches():
    Psi, a, b = two_branch()
    dec = C.detect_branches(Psi)
    assert len(dec) == 2
    assert np.allclose(dec.weights, [0.5, 0.5], atol=1e-6)
    assert dec.residual < 1e-6
    assert dec.max_overlap < 1e-6
    assert C.fidelity(dec.branches[0].psi, a) > 1 - 1e-10
    assert dec.branch_of(-8.0) == 0 and dec.branch_of(8.0) == 1


def test_detect_unequal_weights():
    Psi, _, _ = two_branch(ca=2.0, cb=1.0)
    assert np.allclose(C.detect_branches(Psi).weights, [0.8, 0.2], atol=1e-6)


def test_product_state_single_branch():
    X, Y = G2.mesh()
    a, _ = x_states()
    Psi = normalize(WaveFunction(G2, a.values[:, None] * packet(Y, 1.0, 1.5)))
    dec = C.detect_branches(Psi)
    assert len(dec) == 1 and dec.residual < 1e-8
    with pytest.raises(NoBranches):
        C.detect_branches(Psi, require_split=True)


def test_overlapping_branches_leave_residual():
    # packets two widths apart form one cluster that is not a product
    Psi, _, _ = two_branch(separation=2.0)
    dec = C.detect_branches(Psi)
    assert len(dec) == 1 and dec.residual > 1e-2


# ---------------------------------------------------------------- scenarios


def test_product_scenario_error_stays_small():
    s = C.product_scenario()
    curve = C.effective_evolution_error(s, t1=0.5)
    assert curve.status == "completed"
    assert np.max(curve.delta) < 1e-6
    assert np.all(curve.branch_id_of_Y == 0)


def test_symmetric_measurement_weights():
    s = C.measurement_scenario(amplitudes=(1.0, 1.0))
    psi = WaveHistory(s.psi0, s.hamiltonian, s.dt)(s.t1)
    dec = C.detect_branches(psi, require_split=True)
    assert len(dec) == 2
    assert np.allclose(dec.weights, [0.5, 0.5], atol=1e-4)


def test_insufficient_separation():
    with pytest.raises(InsufficientSeparation):
        C.measurement_scenario(coupling=1.0)


def test_error_curve_csv(tmp_path):
    s = C.product_scenario()
    curve = C.effective_evolution_error(s, t1=0.1, stride=50)
    p = tmp_path / "c.csv"
    C.write_error_curve_csv(p, curve)
    lines = p.read_text().splitlines()
    assert lines[0] == "t,delta,branch_overlap_max,branch_id_of_Y"
    assert len(lines) == len(curve.t) + 1
