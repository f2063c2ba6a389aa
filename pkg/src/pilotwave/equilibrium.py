"""Sampling from |psi|^2, ensemble evolution and goodness-of-fit statistics.

The reference density between grid nodes is the linear (multilinear in 2-d
and 3-d) interpolant of the nodal |psi|^2. Samples are drawn from exactly
that model and KS distances are measured against its exact CDF, so the KS
null distribution applies without discretisation bias. On periodic axes the
wrap cell between the last node and ``upper`` is included.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import AbortFractionExceeded, RejectionStall
from .guidance import NODE, OK, OUTSIDE, ParticleScenario, integrate_many

RNG_NAME = "numpy.random.PCG64"
KS_COEFFICIENT = 1.63  # 1% two-sided asymptotic critical value
SMALL_N = 100


@dataclass(frozen=True, eq=False)
class Ensemble:
    members: np.ndarray = field(repr=False)
    seed: int
    source: str
    time: float
    ids: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        m = np.array(np.atleast_2d(self.members), dtype=float)
        if m.shape[0] < 1:
            raise ValueError("an ensemble needs at least one member")
        m.setflags(write=False)
        object.__setattr__(self, "members", m)
        ids = np.arange(m.shape[0]) if self.ids is None else np.asarray(self.ids, dtype=np.int64)
        object.__setattr__(self, "ids", ids)

    @property
    def size(self):
        return self.members.shape[0]


def rng_for(seed):
    return np.random.Generator(np.random.PCG64(int(seed) & (2**64 - 1)))


# ---------------------------------------------------------------- densities


def _cells(grid, axis):
    """Cell count along ``axis`` (including the wrap cell on periodic axes)."""
    n = grid.points[axis]
    return n if grid.is_periodic(axis) else n - 1


def _extended(values, grid, axis):
    # append the image of node 0 on periodic axes so that cells are [i, i+1]
    if grid.is_periodic(axis):
        first = np.take(values, [0], axis=axis)
        return np.concatenate([values, first], axis=axis)
    return values


def marginal(rho, grid, axis):
    """Nodal values of the marginal of the multilinear density along ``axis``."""
    out = np.asarray(rho, dtype=float)
    for ax in reversed(range(grid.dims)):
        if ax == axis:
            continue
        h = grid.spacing[ax]
        if grid.is_periodic(ax):
            out = out.sum(axis=ax) * h
        else:
            out = np.trapezoid(out, dx=h, axis=ax)
    return out


class PiecewiseLinearDensity:
    """1-d density linear between nodes, with exact CDF and inverse CDF."""

    def __init__(self, values, grid, axis=0):
        f = np.clip(np.asarray(values, dtype=float), 0.0, None)
        self.lower = grid.lower[axis]
        self.h = grid.spacing[axis]
        if grid.is_periodic(axis):
            f = np.append(f, f[0])
        self.a = f[:-1]
        self.b = f[1:]
        mass = 0.5 * self.h * (self.a + self.b)
        self.total = float(mass.sum())
        if not self.total > 0:
            raise ValueError("density has zero mass")
        self.edges = np.concatenate([[0.0], np.cumsum(mass)]) / self.total
        self.a = self.a / self.total
        self.b = self.b / self.total
        self.ncell = self.a.size
        self.upper = self.lower + self.ncell * self.h

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        u = np.clip((x - self.lower) / self.h, 0.0, self.ncell)
        i = np.minimum(np.floor(u).astype(np.int64), self.ncell - 1)
        s = (u - i) * self.h
        a, b = self.a[i], self.b[i]
        part = a * s + 0.5 * (b - a) * s * s / self.h
        return np.clip(self.edges[i] + part, 0.0, 1.0)

    def ppf(self, p):
        p = np.asarray(p, dtype=float)
        i = np.searchsorted(self.edges, p, side="right") - 1
        i = np.clip(i, 0, self.ncell - 1)
        # skip empty cells that share an edge value
        u = np.maximum(p - self.edges[i], 0.0)
        a, b = self.a[i], self.b[i]
        disc = np.sqrt(np.maximum(a * a + 2.0 * (b - a) * u / self.h, 0.0))
        denom = a + disc
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(denom > 0, 2.0 * u / denom, 0.0)
        s = np.clip(s, 0.0, self.h)
        return self.lower + i * self.h + s


def _multilinear(rho_ext, grid, Q):
    """Multilinear interpolation of node-extended density at points ``Q``."""
    d = grid.dims
    idx0 = []
    frac = []
    for ax in range(d):
        u = (Q[:, ax] - grid.lower[ax]) / grid.spacing[ax]
        i = np.clip(np.floor(u).astype(np.int64), 0, _cells(grid, ax) - 1)
        idx0.append(i)
        frac.append(u - i)
    out = np.zeros(Q.shape[0])
    for corner in np.ndindex(*(2,) * d):
        w = np.ones(Q.shape[0])
        idx = []
        for ax, c in enumerate(corner):
            w = w * (frac[ax] if c else 1.0 - frac[ax])
            idx.append(idx0[ax] + c)
        out += w * rho_ext[tuple(idx)]
    return out


# ---------------------------------------------------------------- sampling


def sample(psi, n, seed, min_acceptance=1e-4, batch=None):
    """Draw ``n`` configurations from |psi|^2 (deterministic given ``seed``)."""
    n = int(n)
    if n < 1:
        raise ValueError("n must be at least 1")
    g = psi.grid
    rng = rng_for(seed)
    rho = np.abs(psi.values) ** 2
    if g.dims == 1:
        dens = PiecewiseLinearDensity(rho, g)
        members = dens.ppf(rng.random(n))[:, None]
    else:
        members = _rejection(rho, g, n, rng, min_acceptance, batch)
    return Ensemble(members, int(seed), f"|psi|^2 at t={psi.time!r}", psi.time)


def _rejection(rho, grid, n, rng, min_acceptance, batch):
    ext = rho
    for ax in range(grid.dims):
        ext = _extended(ext, grid, ax)
    top = float(ext.max())
    if not top > 0:
        raise ValueError("density has zero mass")
    lo = np.array(grid.lower)
    span = np.array([_cells(grid, ax) * grid.spacing[ax] for ax in range(grid.dims)])
    batch = batch or max(1024, 4 * n)
    out = []
    have = 0
    tried = 0
    while have < n:
        Q = lo + span * rng.random((batch, grid.dims))
        r = rng.random(batch) * top
        keep = Q[r < _multilinear(ext, grid, Q)]
        tried += batch
        out.append(keep)
        have += keep.shape[0]
        if tried >= 1e5 and have / tried < min_acceptance:
            raise RejectionStall(f"acceptance rate {have / tried:.2e} below {min_acceptance:.0e}")
    return np.concatenate(out)[:n]


# ---------------------------------------------------------------- statistics


def critical_value(n, coefficient=KS_COEFFICIENT):
    return coefficient / np.sqrt(n)


def ks_distance(ens, psi, axis=0):
    """Exact KS statistic of the ensemble marginal against |psi|^2."""
    g = psi.grid
    x = g.wrap(_members(ens))[:, axis]
    n = x.size
    dens = PiecewiseLinearDensity(marginal(np.abs(psi.values) ** 2, g, axis), g, axis)
    F = np.sort(dens.cdf(x))
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def ks_pvalue(d, n):
    return float(stats.kstwo.sf(d, n))


def _members(ens):
    return ens.members if isinstance(ens, Ensemble) else np.atleast_2d(np.asarray(ens, dtype=float))


def chi_square(ens, psi, bins=50, axis=None, min_expected=5.0):
    """Pearson chi-square of member counts against |psi|^2.

    1-d (or a single ``axis``): equal-probability bins from the exact
    marginal CDF. 2-d: blocks of whole grid cells, ``bins`` per axis. Bins
    with expected count below ``min_expected`` are merged with neighbours.
    Returns (statistic, p-value, bins used).
    """
    g = psi.grid
    Q = g.wrap(_members(ens))
    n = Q.shape[0]
    rho = np.abs(psi.values) ** 2
    if g.dims == 1 or axis is not None:
        ax = 0 if axis is None else axis
        dens = PiecewiseLinearDensity(marginal(rho, g, ax), g, ax)
        u = dens.cdf(Q[:, ax])
        observed = np.bincount(np.minimum((u * bins).astype(np.int64), bins - 1), minlength=bins)
        expected = np.full(bins, n / bins)
    else:
        ext = rho
        for a in range(g.dims):
            ext = _extended(ext, g, a)
        # exact cell masses of the multilinear density
        cell = ext
        for a in range(g.dims):
            cell = 0.5 * (np.take(cell, range(cell.shape[a] - 1), axis=a)
                          + np.take(cell, range(1, cell.shape[a]), axis=a))
        cell = cell * g.cell_volume
        cell = cell / cell.sum()
        edges = [np.linspace(0, _cells(g, a), bins + 1).astype(np.int64) for a in range(g.dims)]
        expected = np.add.reduceat(cell, edges[0][:-1], axis=0)
        for a in range(1, g.dims):
            expected = np.add.reduceat(expected, edges[a][:-1], axis=a)
        expected = expected.ravel() * n
        cidx = []
        for a in range(g.dims):
            c = np.clip(np.floor((Q[:, a] - g.lower[a]) / g.spacing[a]).astype(np.int64), 0, _cells(g, a) - 1)
            cidx.append(np.searchsorted(edges[a], c, side="right") - 1)
        flat = np.ravel_multi_index(cidx, (bins,) * g.dims)
        observed = np.bincount(flat, minlength=bins ** g.dims)
    obs, exp = _merge_small(observed.astype(float), expected.astype(float), min_expected)
    exp = exp * obs.sum() / exp.sum()
    res = stats.chisquare(obs, exp)
    return float(res.statistic), float(res.pvalue), int(obs.size)


def _merge_small(obs, exp, min_expected):
    o_out, e_out = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(obs, exp):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            o_out.append(acc_o)
            e_out.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0 or acc_o > 0:
        if e_out:
            o_out[-1] += acc_o
            e_out[-1] += acc_e
        else:
            o_out.append(acc_o)
            e_out.append(acc_e)
    return np.array(o_out), np.array(e_out)


# ---------------------------------------------------------------- evolution


@dataclass
class EvolutionResult:
    ensemble: Ensemble
    aborts: int
    node_aborts: int
    out_of_domain: int
    bundle: object = field(default=None, repr=False)


def _evolve(scenario, ens, t1, threads=1, stride=None, flow=None):
    if abs(ens.time - scenario.psi0.time) > 1e-12 * max(1.0, abs(ens.time)):
        raise ValueError("ensemble time does not match the scenario start")
    if flow is None:
        flow = scenario.flow(keep=None if threads > 1 else 16)
    nsteps = max(1, int(round((t1 - ens.time) / scenario.dt)))
    bundle = integrate_many(flow, ens.members, ens.time, t1, scenario.dt,
                            stride=stride or nsteps, threads=threads)
    ok = bundle.codes == OK
    out = Ensemble(bundle.final[ok], ens.seed, ens.source, t1, ens.ids[ok])
    return EvolutionResult(out, int((~ok).sum()), int((bundle.codes == NODE).sum()),
                           int((bundle.codes == OUTSIDE).sum()), bundle)


def evolve_ensemble(scenario, ens, t1, threads=1, max_abort_fraction=1e-3):
    """Integrate every member to ``t1``; aborted members are dropped and counted.

    Returns an :class:`EvolutionResult`; raises AbortFractionExceeded when
    more than ``max_abort_fraction`` of the members abort.
    """
    res = _evolve(scenario, ens, t1, threads)
    if res.aborts > max_abort_fraction * ens.size:
        raise AbortFractionExceeded(f"{res.aborts} of {ens.size} members aborted")
    return res


def equivariance_report(scenario, n, seeds, t1, threads=1, coefficient=KS_COEFFICIENT,
                        max_abort_fraction=1e-3, chi2_bins=None):
    """Sample per seed, co-evolve all ensembles with psi, and KS-test at t0 and t1.

    All seeds share one wave-function history; their members are advanced as
    one batch (results do not depend on batching). Returns a JSON-ready dict.
    """
    seeds = [int(s) for s in seeds]
    g = scenario.grid
    psi0 = scenario.psi0
    samples = [sample(psi0, n, s) for s in seeds]
    allm = np.concatenate([e.members for e in samples])
    big = Ensemble(allm, seeds[0], "merged", psi0.time)
    flow = scenario.flow(keep=None if threads > 1 else 16)
    res = _evolve(scenario, big, t1, threads, flow=flow)
    psi1 = flow.provider(t1)
    crit = float(critical_value(n, coefficient))
    runs = []
    codes = res.bundle.codes
    final = res.bundle.final
    for k, (s, e0) in enumerate(zip(seeds, samples)):
        sl = slice(k * n, (k + 1) * n)
        ok = codes[sl] == OK
        e1 = Ensemble(final[sl][ok], s, e0.source, t1) if ok.any() else None
        aborts = int((~ok).sum())
        ks = {}
        passed = True
        for ax in range(g.dims):
            d0 = ks_distance(e0, psi0, ax)
            d1 = ks_distance(e1, psi1, ax) if e1 is not None else 1.0
            ks[str(ax)] = {"t0": d0, "t1": d1}
            passed &= d0 < crit and d1 < crit
        passed &= aborts <= max_abort_fraction * n
        run = {
            "scenario": scenario.name,
            "n": int(n),
            "seed": s,
            "rng": RNG_NAME,
            "ks": ks,
            "critical_value": crit,
            "aborts": aborts,
            "pass": bool(passed),
        }
        if chi2_bins and e1 is not None:
            stat, p, used = chi_square(e1, psi1, chi2_bins)
            run["chi2"] = {"statistic": stat, "p_value": p, "bins": used}
        if n < SMALL_N:
            run["warning"] = f"n = {n} is small; KS critical value is only asymptotic"
        runs.append(run)
    return {
        "scenario": scenario.name,
        "n": int(n),
        "seeds": seeds,
        "t1": float(t1),
        "critical_value": crit,
        "rng": RNG_NAME,
        "runs": runs,
        "passed": int(sum(r["pass"] for r in runs)),
        "pass": bool(all(r["pass"] for r in runs)),
        "warning": n < SMALL_N,
    }


def write_ensemble_csv(path, ens):
    from .io import fmt

    d = ens.members.shape[1]
    with open(path, "w") as fh:
        fh.write(",".join(["member_id"] + [f"q{a}" for a in range(d)]) + "\n")
        for i, q in zip(ens.ids, ens.members):
            fh.write(",".join([str(int(i))] + [fmt(c) for c in q]) + "\n")


__all__ = [
    "Ensemble", "sample", "ks_distance", "ks_pvalue", "chi_square", "critical_value",
    "evolve_ensemble", "equivariance_report", "marginal", "PiecewiseLinearDensity",
    "ParticleScenario", "write_ensemble_csv", "RNG_NAME",
]
