"""Registry of runnable scenarios with their default parameter blocks.

Every scenario declares a nested ``defaults`` dict (the config schema: keys
and value types), the tolerances it asserts, and a runner. A runner receives
the resolved parameters and a :class:`RunContext` and returns a
:class:`RunResult`: a JSON-ready report plus named artifact writers. The CLI
is the single writer of all artifacts.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import conditional as C
from . import equilibrium as Q
from . import guidance as G
from . import minisuperspace as M
from . import schrodinger as S
from .grid import GridSpec, WaveFunction, normalize
from .io import fmt, write_grid_csv, write_snapshot


@dataclass
class RunContext:
    seed: int = 0
    threads: int = 1
    format: str = "csv"


@dataclass
class RunResult:
    report: dict
    files: list = field(default_factory=list)  # (name, writer(path))
    plot: tuple = None  # (csv name, x column, y column) for the gnuplot script


@dataclass(frozen=True)
class Scenario:
    name: str
    description: str
    defaults: dict
    tolerances: dict
    runner: object


def jsonable(obj):
    """Convert numpy scalars/arrays and tuples into plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(obj):
    return json.dumps(jsonable(obj), sort_keys=True, indent=2) + "\n"


def _json_writer(obj):
    def write(path):
        with open(path, "w") as fh:
            fh.write(dumps(obj))
    return write


def _psi_files(psi, fmt_name, stem="psi_final"):
    if fmt_name == "snapshot":
        return [(f"{stem}.pwl", lambda p: write_snapshot(p, psi))]
    if fmt_name == "json":
        g = psi.grid
        obj = {"grid": {"lower": g.lower, "upper": g.upper, "points": g.points,
                        "boundary": g.boundary},
               "time": psi.time, "re": psi.values.real.ravel(), "im": psi.values.imag.ravel()}
        return [(f"{stem}.json", _json_writer(obj))]
    return [(f"{stem}.csv", lambda p: write_grid_csv(p, psi))]


def _bundle_csv(bundle):
    def write(path):
        with open(path, "w") as fh:
            d = bundle.positions.shape[2]
            fh.write(",".join(["member_id", "t"] + [f"q{a}" for a in range(d)] + ["status_flag"]) + "\n")
            for i in range(bundle.size):
                tr = bundle.trajectory(i)
                flag = G.STATUS_FLAGS[tr.status]
                last = len(tr.times) - 1
                for j, (t, q) in enumerate(zip(tr.times, tr.positions)):
                    fh.write(",".join([str(i), fmt(t)] + [fmt(c) for c in q]
                                      + [str(flag if j == last else 0)]) + "\n")
    return write


def _grid1(block):
    return GridSpec((block["lower"],), (block["upper"],), (block["points"],), ("periodic",))


# ---------------------------------------------------------------- harmonic scenarios


def _ho(params):
    g = _grid1(params["grid"])
    h = params["hamiltonian"]
    return g, S.harmonic(g, h["mass"], h["omega"])


def _starts(psi, count):
    """Start points at the equally spaced interior quantiles of |psi|^2."""
    dens = Q.PiecewiseLinearDensity(np.abs(psi.values) ** 2, psi.grid, 0)
    u = (np.arange(count) + 0.5) / count
    return dens.ppf(u)[:, None]


def run_ho_ground(params, ctx):
    g, H = _ho(params)
    r = params["run"]
    E0, psi0 = S.stationary_state(H, 0)
    cons = S.conservation_check(H, psi0, r["dt"], r["t1"])
    # exact stationary evolution: psi(t) = exp(-i E0 t) phi0
    sc = G.ParticleScenario("ho-ground", H, psi0, r["dt"], r["t1"],
                            provider=S.EigenSuperposition([psi0], [E0], [1.0]))
    b = G.integrate_many(sc.flow(), _starts(psi0, r["trajectories"]), 0.0, r["t1"], r["dt"],
                         stride=r["stride"])
    moved = float(np.nanmax(np.abs(b.positions - b.positions[:1])))
    exact = 0.5 * params["hamiltonian"]["omega"]
    report = {"scenario": "ho-ground", "energy": E0, "energy_exact": exact,
              "energy_error": abs(E0 - exact), "max_displacement": moved, **cons,
              "pass": bool(abs(E0 - exact) < 1e-6 and moved < 1e-6 and cons["norm_drift"] < 1e-8 * r["t1"]
                           and cons["energy_drift"] < 1e-6)}
    files = [("trajectories.csv", _bundle_csv(b))]
    files += _psi_files(psi0.replace(time=r["t1"]), ctx.format)
    return RunResult(report, files, ("trajectories.csv", 2, 3))


def _superposition(H, states, coefficients):
    pairs = [S.stationary_state(H, n) for n in states]
    c = np.asarray(coefficients, dtype=complex)
    psi0 = normalize(WaveFunction(H.grid, sum(ci * p.values for ci, (_, p) in zip(c, pairs))))
    exact = S.EigenSuperposition([p for _, p in pairs], [e for e, _ in pairs], c)
    return psi0, exact


def run_ho_superposition(params, ctx):
    g, H = _ho(params)
    r = params["run"]
    psi0, exact = _superposition(H, params["state"]["levels"], params["state"]["coefficients"])
    cons = S.conservation_check(H, psi0, r["dt"], r["t1"])
    sc = G.ParticleScenario("ho-superposition", H, psi0, r["dt"], r["t1"])
    flow = sc.flow()
    b = G.integrate_many(flow, _starts(psi0, r["trajectories"]), 0.0, r["t1"], r["dt"], stride=r["stride"])
    psi1 = flow.provider(r["t1"])
    err = C.phase_distance(psi1, exact(r["t1"]))
    report = {"scenario": "ho-superposition", "propagation_error": err, **cons,
              "aborts": int((b.codes != G.OK).sum()),
              "pass": bool(cons["norm_drift"] < 1e-8 * r["t1"] and cons["energy_drift"] < 1e-6)}
    files = [("trajectories.csv", _bundle_csv(b))] + _psi_files(psi1, ctx.format)
    return RunResult(report, files, ("trajectories.csv", 1, 2))


def two_slit_state(params):
    g = _grid1(params["grid"])
    p = params["packets"]
    x = g.axis(0)
    d, s = 0.5 * p["separation"], p["sigma"]
    v = np.exp(-((x - d) ** 2) / (4 * s * s)) + np.exp(-((x + d) ** 2) / (4 * s * s))
    return normalize(WaveFunction(g, v)), S.free(g, p["mass"])


def run_two_slit(params, ctx):
    psi0, H = two_slit_state(params)
    r = params["run"]
    cons = S.conservation_check(H, psi0, r["dt"], r["t1"])
    sc = G.ParticleScenario("two-slit", H, psi0, r["dt"], r["t1"])
    ens = Q.sample(psi0, r["n"], ctx.seed)
    flow = sc.flow(keep=None if ctx.threads > 1 else 16)
    b = G.integrate_many(flow, ens.members, 0.0, r["t1"], r["dt"], stride=r["stride"], threads=ctx.threads)
    psi1 = flow.provider(r["t1"])
    ok = b.codes == G.OK
    final = Q.Ensemble(b.final[ok], ctx.seed, "two-slit", r["t1"])
    stat, p, used = Q.chi_square(final, psi1, r["bins"])
    ks = Q.ks_distance(final, psi1)
    crossings = G.no_crossing_violations(b)
    x0 = b.positions[0, :, 0]
    live = np.isfinite(b.positions[..., 0])
    side = np.where(live, np.sign(b.positions[..., 0]) != np.sign(x0)[None, :], False)
    axis_cross = int(np.any(side & (x0 != 0)[None, :], axis=0).sum())
    aborts = int((~ok).sum())
    report = {"scenario": "two-slit", "n": r["n"], "seed": ctx.seed, "rng": Q.RNG_NAME,
              "chi2": {"statistic": stat, "p_value": p, "bins": used}, "ks": ks,
              "critical_value": Q.critical_value(final.members.shape[0]),
              "crossing_violations": crossings, "axis_crossings": axis_cross, "aborts": aborts, **cons,
              "pass": bool(p > 0.01 and crossings == 0 and axis_cross == 0 and aborts <= 1e-3 * r["n"])}
    keep = np.linspace(0, r["n"] - 1, min(r["n"], r["record"])).astype(int)
    sub = G.TrajectoryBundle(b.times, b.positions[:, keep], b.codes[keep])
    files = [("trajectories.csv", _bundle_csv(sub)),
             ("final_ensemble.csv", lambda path: Q.write_ensemble_csv(path, final))]
    files += _psi_files(psi1, ctx.format)
    return RunResult(report, files, ("trajectories.csv", 2, 3))


def run_equilibrium(params, ctx):
    g, H = _ho(params)
    r = params["run"]
    psi0, _ = _superposition(H, params["state"]["levels"], params["state"]["coefficients"])
    sc = G.ParticleScenario("equilibrium", H, psi0, r["dt"], r["t1"])
    seeds = [ctx.seed + i for i in range(r["seeds"])]
    rep = Q.equivariance_report(sc, r["n"], seeds, r["t1"], threads=ctx.threads)
    rep["required"] = r["min_pass"]
    rep["pass"] = bool(rep["passed"] >= r["min_pass"])
    return RunResult(rep, [])


# ---------------------------------------------------------------- conditional scenarios


def _curve_result(curve, s, report, ctx):
    files = [("error_curve.csv", lambda p: C.write_error_curve_csv(p, curve))]
    files += _psi_files(curve.final_psi, ctx.format)
    return RunResult(report, files, ("error_curve.csv", 1, 2))


def _curve_summary(curve, name):
    valid = curve.valid_until()
    ov = curve.branch_overlap_max
    return {
        "scenario": name,
        "status": curve.status,
        "max_delta": float(np.max(curve.delta)),
        "max_delta_while_disjoint": float(np.max(curve.delta[valid])) if valid.any() else None,
        "max_branch_overlap": float(np.nanmax(ov)) if np.isfinite(ov).any() else None,
        "first_overlap_event": float(curve.t[~valid][0]) if (~valid).any() else None,
        "branch_ids": sorted(set(int(b) for b in curve.branch_id_of_Y)),
        "Y_final": float(curve.Y[-1]),
        "t1": float(curve.t[-1]),
    }


def run_cwf_product(params, ctx):
    r = params["run"]
    s = C.product_scenario(t1=r["t1"], dt=r["dt"], stride=r["stride"])
    curve = C.effective_evolution_error(s)
    rep = _curve_summary(curve, "cwf-product")
    rep["threshold"] = 1e-6
    rep["pass"] = bool(curve.status == "completed" and rep["max_delta"] < 1e-6)
    return _curve_result(curve, s, rep, ctx)


def run_cwf_branches(params, ctx):
    r = params["run"]
    p = params["packets"]
    s = C.branches_scenario(t1=r["t1"], dt=r["dt"], stride=r["stride"], k=p["k"], sigma=p["sigma"],
                            separation=p["separation"])
    curve = C.effective_evolution_error(s)
    rep = _curve_summary(curve, "cwf-branches")
    rep["threshold"] = 1e-3
    md = rep["max_delta_while_disjoint"]
    rep["pass"] = bool(curve.status == "completed" and md is not None and md < 1e-3
                       and len(rep["branch_ids"]) == 1)
    return _curve_result(curve, s, rep, ctx)


def run_cwf_semiclassical_env(params, ctx):
    r = params["run"]
    p = params["coupling"]
    s = C.semiclassical_env_scenario(coupling=p["lambda"], heavy_mass=p["heavy_mass"],
                                     velocity=p["velocity"], sigma_y=p["sigma_y"],
                                     dt=r["dt"], stride=r["stride"])
    curve = C.effective_evolution_error(s)
    rep = _curve_summary(curve, "cwf-semiclassical-env")
    rep["threshold"] = 1e-2
    rep["pass"] = bool(curve.status == "completed" and rep["max_delta"] < 1e-2)
    return _curve_result(curve, s, rep, ctx)


def run_cwf_measurement(params, ctx):
    p = params["measurement"]
    r = params["run"]
    s = C.measurement_scenario(coupling=p["coupling"], duration=p["duration"],
                               amplitudes=tuple(p["amplitudes"]), dt=r["dt"])
    out = C.born_runs(s, runs=r["runs"], seed=ctx.seed)
    dec = out["decomposition"]
    xa, xb = s.info["states"]
    # match branches to the input x-states by fidelity
    order = [int(np.argmax([C.fidelity(b.psi, xa), C.fidelity(b.psi, xb)])) for b in dec.branches]
    expected = np.array(s.info["weights"])[order]
    weights = np.array(dec.weights)
    ids = out["branch_ids"]
    valid = ids >= 0
    counts = np.bincount(ids[valid], minlength=len(dec))
    nrun = int(valid.sum())
    freq = counts / max(nrun, 1)
    sigma = np.sqrt(weights * (1 - weights) / max(nrun, 1))
    fid = out["fidelity"][valid]
    rep = {
        "scenario": "cwf-measurement",
        "weights": weights,
        "expected_weights": expected,
        "weight_error": float(np.max(np.abs(weights - expected))),
        "residual": dec.residual,
        "max_branch_overlap": dec.max_overlap,
        "runs": r["runs"],
        "seed": ctx.seed,
        "counts": counts,
        "frequencies": freq,
        "sigma": sigma,
        "min_fidelity": float(np.min(fid)) if fid.size else None,
        "max_other_fidelity": float(np.nanmax(out["other_fidelity"])) if fid.size else None,
        "aborts": out["aborts"],
        "separation": s.info["separation"],
    }
    rep["pass"] = bool(rep["weight_error"] < 1e-3 and fid.size and rep["min_fidelity"] > 1 - 1e-4
                       and np.all(np.abs(freq - weights) <= 3 * sigma))

    def write_runs(path):
        with open(path, "w") as fh:
            fh.write("run,X,Y,branch_id,fidelity\n")
            for i, (q, b, f) in enumerate(zip(out["final"], ids, out["fidelity"])):
                fh.write(f"{i},{fmt(q[0])},{fmt(q[1])},{int(b)},{fmt(f)}\n")

    files = [("runs.csv", write_runs)] + _psi_files(out["psi"], ctx.format)
    return RunResult(rep, files, ("runs.csv", 3, 4))


# ---------------------------------------------------------------- cosmology


def model_from(block):
    mp = block["matter_potential"]
    return M.MinisuperspaceModel(lam=block["lambda"], curvature=block["curvature"],
                                 matter=M.MatterPotential(mp["kind"], dict(mp["params"])),
                                 kappa=block["kappa_eff"])


def _cosmo_grid(block):
    g = block["grid"]
    return M.cosmo_grid(tuple(g["alpha"]), tuple(g["phi"]))


def _cosmo_files(trajs, psi, ctx):
    files = [(name, (lambda t: lambda p: M.write_cosmo_csv(p, t))(t)) for name, t in trajs]
    if ctx.format == "snapshot":
        files += _psi_files(psi, "snapshot", "psi_wdw")
    return files


def run_frw_wkb(params, ctx):
    model = model_from(params["model"])
    grid = _cosmo_grid(params["model"])
    r = params["run"]
    wkb = M.construct_wkb(model, grid)
    H = model.hubble()
    tau1 = r["efolds"] / H
    traj = M.integrate_cosmology(model, wkb.psi, M.unit_lapse(), (r["alpha0"], r["phi0"]),
                                 (0.0, tau1), r["dtau"])
    pa = M.constraint_momentum(model, r["alpha0"], r["phi0"])
    cl = M.classical_solution(model, (r["alpha0"], r["phi0"]), (pa, 0.0), (0.0, tau1))
    err, span = M.compare_classical(traj, cl)
    desitter = float(np.max(np.abs(np.expm1(traj.alpha - (r["alpha0"] + H * traj.T)))))
    rep = {"scenario": "frw-wkb", "kappa_eff": model.kappa, "hubble": H,
           "max_relative_a_error": err, "de_sitter_closed_form_error": desitter,
           "efolds_covered": float(traj.alpha[-1] - traj.alpha[0]), "T_range": span,
           "constraint_drift": cl.extra["constraint_drift"], "status": traj.status,
           "validity_at_start": float(M.wkb_validity(model, np.array([r["alpha0"]]))[0]),
           "pass": bool(traj.status == "completed" and err < 1e-2
                        and cl.extra["constraint_drift"] < 1e-6
                        and traj.alpha[-1] - traj.alpha[0] >= r["efolds"] - 1e-9)}
    files = _cosmo_files([("cosmo_trajectory.csv", traj), ("classical_trajectory.csv", cl)], wkb.psi, ctx)
    return RunResult(rep, files, ("cosmo_trajectory.csv", 4, 2))


def _lapse_run(params, ctx, name, superposition):
    model = model_from(params["model"])
    grid = _cosmo_grid(params["model"])
    r = params["run"]
    k_phi = 2 * np.pi * r["phi_quanta"] * model.kappa / grid.length(1)
    wkb = M.construct_wkb(model, grid, k_phi=k_phi, superposition=superposition,
                          weights=tuple(params["state"]["weights"]))
    N2 = M.tanh_lapse(params["lapse"]["amplitude"])
    rep = M.lapse_dependence_report(model, wkb.psi, M.unit_lapse(), N2, (r["alpha0"], r["phi0"]),
                                    (0.0, r["tau1"]), r["dtau"], tol_equiv=r["tol_equiv"], name=name)
    t1, t2 = rep.pop("trajectories")
    rep["k_phi"] = k_phi
    if superposition:
        rep["required"] = "D > 10 tol_equiv"
        rep["pass"] = bool(rep["D"] > 10 * r["tol_equiv"])
    else:
        rep["required"] = "D < tol_equiv"
        rep["pass"] = bool(rep["D"] < r["tol_equiv"])
    files = _cosmo_files([("cosmo_trajectory_N1.csv", t1), ("cosmo_trajectory_N2.csv", t2)], wkb.psi, ctx)
    return RunResult(rep, files, ("cosmo_trajectory_N1.csv", 4, 2))


def run_frw_lapse(params, ctx):
    return _lapse_run(params, ctx, "frw-lapse", False)


def run_frw_superposition_lapse(params, ctx):
    return _lapse_run(params, ctx, "frw-superposition-lapse", True)


def run_semiclassical_matter(params, ctx):
    model = model_from(params["model"])
    g = params["model"]["grid"]
    r = params["run"]
    rep = M.semiclassical_matter_report(model, alpha_span=tuple(g["alpha"][:2]), alpha_points=g["alpha"][2],
                                        phi=tuple(g["phi"]), displacement=r["displacement"],
                                        efolds=r["efolds"], dT=r["dT"], substeps=r["substeps"],
                                        validity_limit=r["validity_limit"],
                                        product_ansatz=r["product_ansatz"])
    files = []
    if rep.get("delta") is not None:
        cols = [k for k in ("T", "delta", "alpha", "alpha_classical", "validity_along") if k in rep]
        curves = [rep[c] for c in cols]

        def write(path):
            with open(path, "w") as fh:
                fh.write(",".join(cols) + "\n")
                for row in zip(*curves):
                    fh.write(",".join(fmt(v) for v in row) + "\n")

        files.append(("delta_curve.csv", write))
        short = {k: v for k, v in rep.items() if k not in cols}
        short["samples"] = len(rep["delta"])
        rep = short
    return RunResult(rep, files, ("delta_curve.csv", 1, 2) if files else None)


# ---------------------------------------------------------------- registry


_HO_GRID = {"lower": -10.0, "upper": 10.0, "points": 256}
_HO_H = {"mass": 1.0, "omega": 1.0}
_SUP = {"levels": [0, 1], "coefficients": [1.0, 1.0]}

_FRW_WKB_MODEL = {"lambda": 100.0 / 12.0, "curvature": 0, "kappa_eff": 1.0,
                  "matter_potential": {"kind": "none", "params": {}},
                  "grid": {"alpha": [0.0, 3.2, 262144], "phi": [-math.pi, math.pi, 8]}}
_FRW_LAPSE_MODEL = {"lambda": 100.0 / 12.0, "curvature": 0, "kappa_eff": 1.0,
                    "matter_potential": {"kind": "none", "params": {}},
                    "grid": {"alpha": [0.0, 1.6, 2048], "phi": [-1.0, 1.0, 32]}}
_LAPSE_RUN = {"alpha0": 0.1, "phi0": 0.0, "phi_quanta": 3, "tau1": 0.5, "dtau": 1e-3,
              "tol_equiv": M.TOL_EQUIV}

_ACCEPT = {"ks_coefficient": Q.KS_COEFFICIENT, "norm_drift_per_time": 1e-8, "energy_drift": 1e-6}

REGISTRY = {s.name: s for s in [
    Scenario("ho-ground", "harmonic ground state: static trajectories, conserved norm and energy",
             {"grid": dict(_HO_GRID), "hamiltonian": dict(_HO_H),
              "run": {"dt": 0.01, "t1": 5.0, "trajectories": 9, "stride": 10}},
             {**_ACCEPT, "energy_error": 1e-6, "displacement": 1e-6}, run_ho_ground),
    Scenario("ho-superposition", "two-level harmonic superposition: oscillating trajectories",
             {"grid": dict(_HO_GRID), "hamiltonian": dict(_HO_H), "state": dict(_SUP),
              "run": {"dt": 0.01, "t1": 5.0, "trajectories": 9, "stride": 10}},
             dict(_ACCEPT), run_ho_superposition),
    Scenario("two-slit", "two coherent packets interfering: Born histogram and no-crossing",
             {"grid": {"lower": -64.0, "upper": 64.0, "points": 1024},
              "packets": {"separation": 5.0, "sigma": 0.5, "mass": 1.0},
              "run": {"dt": 0.01, "t1": 10.0, "n": 10000, "bins": 50, "stride": 20, "record": 200}},
             {**_ACCEPT, "chi2_p_value": 0.01, "abort_fraction": 1e-3}, run_two_slit),
    Scenario("equilibrium", "equivariance of |psi|^2 for the harmonic superposition (KS, 10 seeds)",
             {"grid": dict(_HO_GRID), "hamiltonian": dict(_HO_H), "state": dict(_SUP),
              "run": {"dt": 0.01, "t1": 5.0, "n": 10000, "seeds": 10, "min_pass": 9}},
             {"ks_coefficient": Q.KS_COEFFICIENT, "abort_fraction": 1e-3}, run_equilibrium),
    Scenario("cwf-product", "non-interacting product state: exact conditional dynamics",
             {"run": {"t1": 2.0, "dt": 1e-3, "stride": 50}},
             {"delta": 1e-6}, run_cwf_product),
    Scenario("cwf-branches", "separating y-branches: conditional wave function follows one branch",
             {"packets": {"k": 6.0, "sigma": 0.5, "separation": 6.0},
              "run": {"t1": 2.0, "dt": 1e-3, "stride": 50}},
             {"delta": 1e-3, "disjoint": C.DISJOINT}, run_cwf_branches),
    Scenario("cwf-measurement", "pointer measurement with 2:1 amplitudes: effective collapse statistics",
             {"measurement": {"coupling": 12.0, "duration": 2.0, "amplitudes": [2.0, 1.0]},
              "run": {"dt": 2e-3, "runs": 200}},
             {"weights": 1e-3, "fidelity": 1e-4, "frequency_sigmas": 3.0}, run_cwf_measurement),
    Scenario("cwf-semiclassical-env", "light oscillator driven by a heavy passing packet",
             {"coupling": {"lambda": 0.1, "heavy_mass": 1000.0, "velocity": 0.1, "sigma_y": 0.1},
              "run": {"dt": 5e-3, "stride": 40}},
             {"delta": 1e-2}, run_cwf_semiclassical_env),
    Scenario("frw-wkb", "de Sitter WKB universe: Bohmian a(T) versus the classical solution",
             {"model": _FRW_WKB_MODEL,
              "run": {"alpha0": 0.1, "phi0": 0.0, "efolds": 3.0, "dtau": 2e-3}},
             {"relative_a_error": 1e-2, "constraint_drift": 1e-6}, run_frw_wkb),
    Scenario("frw-lapse", "single-branch WKB with matter momentum: N = 1 versus N = 1 + 0.5 tanh(phi)",
             {"model": _FRW_LAPSE_MODEL, "state": {"weights": [1.0, 0.0]},
              "lapse": {"amplitude": 0.5}, "run": dict(_LAPSE_RUN)},
             {"tol_equiv": M.TOL_EQUIV}, run_frw_lapse),
    Scenario("frw-superposition-lapse", "expanding plus contracting branch under the same two lapses",
             {"model": _FRW_LAPSE_MODEL, "state": {"weights": [1.0, 0.5]},
              "lapse": {"amplitude": 0.5}, "run": dict(_LAPSE_RUN)},
             {"tol_equiv": M.TOL_EQUIV, "required_factor": 10.0}, run_frw_superposition_lapse),
    Scenario("semiclassical-matter", "matter oscillator on de Sitter: Bohmian conditional vs Schrodinger",
             {"model": {"lambda": 1.0 / 3.0, "curvature": 0, "kappa_eff": 0.05,
                        "matter_potential": {"kind": "harmonic", "params": {"mass": 1.0}},
                        "grid": {"alpha": [0.3, 1.4, 5501], "phi": [-0.6, 0.6, 256]}},
              "run": {"displacement": 1.0, "efolds": 1.0, "dT": 5e-3, "substeps": 4,
                      "validity_limit": M.VALIDITY_LIMIT, "product_ansatz": False}},
             {"delta": 5e-2, "validity_limit": M.VALIDITY_LIMIT}, run_semiclassical_matter),
]}


def listing():
    return [{"name": s.name, "description": s.description} for s in REGISTRY.values()]


def get(name):
    if name not in REGISTRY:
        raise KeyError(f"unknown scenario {name!r}; known: {', '.join(REGISTRY)}")
    return REGISTRY[name]
