"""Monte Carlo harness: survival estimation, exponential-tail fits, the
K-tail, subadditivity residuals, sigma-vs-t gaps, directional growth norm
estimates, and shape snapshots.

Every estimator is a deterministic function of (master seed, arguments):
trial i runs on its own derived stream seed, results are consumed in trial
order (including the early-stop rules), and rows are emitted in trial order,
so reruns reproduce byte-identical tables no matter how many worker
processes executed them.  "On survival" always means the alive-at-cap proxy;
each result carries the caps it was computed with.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from .engine import StaticRegion, Trajectory, evolve, richardson_evolve
from .lattice import Box, Config, Site, centered_box
from .observables import SigmaTrace, essential_hitting_multi
from .omega import ModelParams, Omega, derive_seed
from .stats import BernoulliEstimate, LogLinearFit, mean_ci


# ---------------------------------------------------------------------------
# run plumbing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunBudget:
    """Confinement and pregeneration policy for one family of runs.

    conf_speed is the configured hard speed bound (calibrated against the
    pure-growth fit); the run box has radius ceil(conf_speed * horizon) +
    margin and a birth attempt beyond it flags the trajectory.  pregen_speed
    is the typical-front-speed hint used to size the eagerly materialized
    box; streams beyond it fall back to lazy generation.
    """

    conf_speed: float = 4.0
    margin: int = 6
    pregen_speed: float | None = None
    probe_time: float = 8.0

    def region(self, d: int, horizon: float) -> StaticRegion:
        return StaticRegion(centered_box(int(math.ceil(self.conf_speed * horizon))
                                         + self.margin, d))

    def pregen_box(self, d: int, horizon: float) -> Box | None:
        if self.pregen_speed is None:
            return None
        r = int(math.ceil(self.pregen_speed * horizon)) + self.margin
        r = min(r, int(math.ceil(self.conf_speed * horizon)) + self.margin)
        return centered_box(r, d)


def survival_run(params: ModelParams, seed: int, t_end: float,
                 budget: RunBudget, f: Config | None = None,
                 **evolve_kw) -> tuple[Omega, Trajectory]:
    """One probed run from f (default: origin, age 1) to t_end.

    A short throwaway probe decides whether to pay for eager stream
    materialization; the full run then replays the cached streams, so the
    result is identical either way.
    """
    d = params.dimension
    f = {(0,) * d: 1} if f is None else f
    om = Omega(seed=seed, params=params, horizon=t_end + 1.0)
    region = budget.region(d, t_end)
    t_probe = min(budget.probe_time, t_end)
    probe = evolve(om, f, t_probe, region=region, record=False,
                   stop_when_empty=True)
    if probe.final:
        box = budget.pregen_box(d, t_end)
        if box is not None:
            om.pregenerate(box, t_end + 1.0)
    traj = evolve(om, f, t_end, region=region, stop_when_empty=True, **evolve_kw)
    return om, traj


def map_trials(worker: Callable, args: Sequence, threads: int = 1) -> Iterator:
    """Run worker over args, yielding results in order; pool when threads>1."""
    if threads <= 1:
        for a in args:
            yield worker(a)
        return
    with ProcessPoolExecutor(max_workers=threads) as pool:
        yield from pool.map(worker, args, chunksize=max(1, len(args) // (8 * threads)))


# ---------------------------------------------------------------------------
# survival probability
# ---------------------------------------------------------------------------

@dataclass
class SurvivalResult:
    estimate: BernoulliEstimate
    t_max: float
    rows: list[tuple[int, int, int]]  # trial, seed, alive_at_Tmax
    boundary_hits: int = 0

    @property
    def rho_hat(self) -> float:
        return self.estimate.p_hat


def _surv_worker(a):
    i, seed, params, f, t_max, budget = a
    _, traj = survival_run(params, seed, t_max, budget, f, record=False)
    return (i, seed, int(bool(traj.final)), int(traj.boundary_hit),
            traj.extinction_time)


def estimate_survival(params: ModelParams, f: Config | None, trials: int,
                      t_max: float, *, seed: int = 0, threads: int = 1,
                      budget: RunBudget | None = None) -> SurvivalResult:
    """Fraction of runs alive at t_max (the survival proxy), Wilson interval."""
    if trials < 1:
        raise ValueError("trials >= 1")
    budget = budget or RunBudget()
    args = [(i, derive_seed(seed, i), params, f, t_max, budget)
            for i in range(trials)]
    rows, alive, bhits = [], 0, 0
    for i, s, ok, bh, _ext in map_trials(_surv_worker, args, threads):
        alive += ok
        bhits += bh
        rows.append((i, s, ok))
    return SurvivalResult(BernoulliEstimate(alive, trials), t_max, rows, bhits)


# ---------------------------------------------------------------------------
# tail fits
# ---------------------------------------------------------------------------

@dataclass
class TailFit:
    grid: list[float]
    survival_freq: list[float]
    counts: list[int]
    rate_b: float
    prefactor_a: float
    r_squared: float
    n_trials: int
    t_max: float
    warnings: list[str] = field(default_factory=list)

    @classmethod
    def from_counts(cls, grid, counts, denom, t_max, min_count=50) -> "TailFit":
        freqs = [c / denom if denom else 0.0 for c in counts]
        fit = LogLinearFit.from_points(grid, freqs)
        warns = [f"count {c} < {min_count} at t={t}"
                 for t, c in zip(grid, counts) if c < min_count]
        return cls(list(grid), freqs, list(counts), fit.rate_b, fit.prefactor_a,
                   fit.r_squared, denom, t_max, warns)


def fit_conditioned_extinction_tail(params: ModelParams, f: Config | None,
                                    trials: int, t_grid: Sequence[float],
                                    t_max: float, *, seed: int = 0,
                                    threads: int = 1,
                                    budget: RunBudget | None = None) -> TailFit:
    """Log-linear fit of P(t < lifetime < t_max) over the grid."""
    budget = budget or RunBudget()
    grid = sorted(t_grid)
    if len(grid) < 2:
        raise ValueError("need at least two grid points")
    args = [(i, derive_seed(seed, i), params, f, t_max, budget)
            for i in range(trials)]
    ext_times = [r[4] for r in map_trials(_surv_worker, args, threads)
                 if r[4] is not None]
    ext = np.asarray(ext_times)
    counts = [int(((ext > t) & (ext < t_max)).sum()) for t in grid]
    return TailFit.from_counts(grid, counts, trials, t_max)


@dataclass
class HittingTailResult:
    fits: dict  # C -> TailFit
    best_c: float | None
    per_x_mean_t: dict  # x -> (mean of t(x)/||x||, ci, count)
    survivors: int
    t_max: float

    def relative_spread(self) -> float:
        """(max - min) / mean of the per-site mean normalized hitting times."""
        vals = [m for (m, _ci, _n) in self.per_x_mean_t.values()]
        if not vals:
            return float("nan")
        return (max(vals) - min(vals)) / float(np.mean(vals))


def _norm_inf(x: Site) -> int:
    return max(abs(c) for c in x)


def _hit_worker(a):
    i, seed, params, x_list, t_max, budget = a
    _, traj = survival_run(params, seed, t_max, budget, None, record=False,
                           track_sites=set(x_list))
    if not traj.final:
        return (i, None)
    row = {}
    for x in x_list:
        iv = traj.alive_intervals(x)
        row[x] = iv[0][0] if iv else math.inf
    return (i, row)


def fit_hitting_tail(params: ModelParams, x_list: Sequence[Site],
                     c_candidates: Sequence[float], trials: int,
                     t_grid: Sequence[float], t_max: float, *, seed: int = 0,
                     threads: int = 1,
                     budget: RunBudget | None = None) -> HittingTailResult:
    """P(t(x) >= C||x|| + t, alive at t_max) pooled over x, per candidate C.

    Unhit sites on surviving runs enter as right-censored at t_max; grids
    are validated so censoring cannot bend the fit (C*||x|| + t stays below
    t_max).  Reports the smallest C whose fit is exponential (R^2 >= 0.9
    with positive rate).
    """
    budget = budget or RunBudget()
    grid = sorted(t_grid)
    x_list = [tuple(x) for x in x_list]
    max_norm = max(_norm_inf(x) for x in x_list)
    for c in c_candidates:
        if c * max_norm + grid[-1] > t_max:
            raise ValueError(f"C={c}: grid reaches beyond the observation window")
    args = [(i, derive_seed(seed, i), params, tuple(x_list), t_max, budget)
            for i in range(trials)]
    hit_data = [row for _i, row in map_trials(_hit_worker, args, threads)
                if row is not None]
    survivors = len(hit_data)
    fits = {}
    best = None
    for c in sorted(c_candidates):
        counts = []
        for t in grid:
            k = sum(1 for row in hit_data for x in x_list
                    if row[x] >= c * _norm_inf(x) + t)
            counts.append(k)
        fit = TailFit.from_counts(grid, counts, survivors * len(x_list), t_max,
                                  min_count=1)
        fits[c] = fit
        if best is None and fit.r_squared >= 0.9 and fit.rate_b > 0:
            best = c
    per_x = {}
    for x in x_list:
        ts = [row[x] / _norm_inf(x) for row in hit_data if math.isfinite(row[x])]
        m, ci = mean_ci(ts)
        per_x[x] = (m, ci, len(ts))
    return HittingTailResult(fits, best, per_x, survivors, t_max)


# ---------------------------------------------------------------------------
# sigma-based experiments
# ---------------------------------------------------------------------------

def _sigma_worker(a):
    i, seed, params, xs, t_origin, t_surv, budget = a
    d = params.dimension
    horizon = t_origin + t_surv + 1.0
    region = budget.region(d, horizon)
    box = budget.pregen_box(d, horizon)
    om = Omega(seed=seed, params=params, horizon=horizon)
    probe = evolve(om, {(0,) * d: 1}, min(budget.probe_time, t_origin),
                   region=region, record=False, stop_when_empty=True)
    if probe.final and box is not None:
        om.pregenerate(box, horizon)
    traces = essential_hitting_multi(om, list(xs), t_origin, t_surv=t_surv,
                                     region=region)
    return (i, seed, traces)


def sigma_trial_args(params, xs, trials, t_origin, t_surv, seed, budget):
    xs = tuple(tuple(x) for x in xs)
    return [(i, derive_seed(seed, i), params, xs, t_origin, t_surv, budget)
            for i in range(trials)]


@dataclass
class KTailResult:
    ks: list[int]
    tail_freq: list[float]          # P(K(x) > k | survived)
    surviving: int
    trials_run: int
    rho_hat: float
    t_max: float
    rows: list[str] = field(default_factory=list)


def measure_k_tail(params: ModelParams, x: Site, trials: int, t_max: float, *,
                   max_k: int = 5, seed: int = 0, rho_hat: float,
                   threads: int = 1, budget: RunBudget | None = None,
                   t_surv: float | None = None,
                   min_surviving: int = 0) -> KTailResult:
    """Empirical tail of K(x) over surviving runs, against (1-rho)^k."""
    from .observables import sigma_csv_header
    budget = budget or RunBudget()
    res = KTailResult(list(range(1, max_k + 1)), [], 0, 0, rho_hat, t_max)
    res.rows.append(sigma_csv_header(params.dimension))
    kvals = []
    args = sigma_trial_args(params, [x], trials, t_max,
                            t_max if t_surv is None else t_surv, seed, budget)
    for i, s, traces in map_trials(_sigma_worker, args, threads):
        tr = traces[tuple(x)]
        res.trials_run += 1
        res.rows.append(tr.csv_row(i, s))
        if tr.survived and not tr.degenerate:
            res.surviving += 1
            kvals.append(tr.K)
        if min_surviving and res.surviving >= min_surviving:
            break
    kv = np.asarray(kvals)
    res.tail_freq = [float((kv > k).mean()) if len(kv) else 0.0 for k in res.ks]
    return res


@dataclass
class ResidualResult:
    x: Site
    y: Site
    rows: list[tuple]               # trial, seed, sigma_x, sigma_y_shift, sigma_xy, r
    grid: list[float]
    tail_freq: list[float]
    correlation: float
    used: int
    excluded: int
    t_max: float


def _residual_worker(a):
    i, seed, params, x, y, t_max, budget = a
    xy = tuple(p + q for p, q in zip(x, y))
    d = params.dimension
    horizon = 3.0 * t_max + 2.0
    region = budget.region(d, horizon)
    # the shifted recursion rarely reads past sigma(x) + 2 t_max; streams
    # beyond the pregenerated span fall back to the identical lazy path
    pregen_t = 2.0 * t_max + 2.0
    box = budget.pregen_box(d, pregen_t)
    om = Omega(seed=seed, params=params, horizon=horizon)
    probe = evolve(om, {(0,) * d: 1}, budget.probe_time, region=region,
                   record=False, stop_when_empty=True)
    if probe.final and box is not None:
        om.pregenerate(box, pregen_t)
    traces = essential_hitting_multi(om, [x, xy], t_max, t_surv=t_max,
                                     region=region)
    tx, txy = traces[x], traces[xy]
    if not (tx.survived and not tx.degenerate and not txy.degenerate):
        return (i, seed, None)
    shifted = om.shift_time(tx.sigma).shift_space(x)
    ty = essential_hitting_multi(shifted, [y], t_max, t_surv=t_max,
                                 region=region)[y]
    if ty.degenerate or not ty.survived:
        return (i, seed, None)
    r = max(0.0, txy.sigma - tx.sigma - ty.sigma)
    return (i, seed, (tx.sigma, ty.sigma, txy.sigma, r))


def measure_subadditivity_residual(params: ModelParams, x: Site, y: Site,
                                   trials: int, t_max: float, *,
                                   grid: Sequence[float] = (0.25, 0.5, 1, 2, 4),
                                   seed: int = 0, threads: int = 1,
                                   budget: RunBudget | None = None,
                                   min_used: int = 0) -> ResidualResult:
    """Distribution of r(x,y) = (sigma(x+y) - sigma(x) - sigma(y) o shift)^+.

    Per surviving trial: sigma(x) and sigma(x+y) under the base outcome
    (shared origin run), then sigma(y) under the outcome shifted by sigma(x)
    in time and x in space.  Trials whose traces are degenerate or whose
    shifted origin dies (censoring artifacts) are excluded and counted.
    """
    budget = budget or RunBudget()
    x, y = tuple(x), tuple(y)
    args = [(i, derive_seed(seed, i), params, x, y, t_max, budget)
            for i in range(trials)]
    rows, pairs, rs = [], [], []
    excluded = 0
    for i, s, payload in map_trials(_residual_worker, args, threads):
        if payload is None:
            excluded += 1
            continue
        sx, sy, sxy, r = payload
        rows.append((i, s, sx, sy, sxy, r))
        pairs.append((sx, sy))
        rs.append(r)
        if min_used and len(rs) >= min_used:
            break
    rs_a = np.asarray(rs)
    tail = [float((rs_a >= t).mean()) if len(rs_a) else 0.0 for t in grid]
    if len(pairs) >= 3:
        a = np.asarray(pairs)
        sd = a.std(axis=0)
        corr = (float(np.corrcoef(a[:, 0], a[:, 1])[0, 1])
                if sd.min() > 1e-12 else 0.0)
    else:
        corr = float("nan")
    return ResidualResult(x, y, rows, list(grid), tail, corr, len(rs),
                          excluded, t_max)


@dataclass
class GapResult:
    direction: Site
    n_list: list[int]
    medians: dict                    # n -> median |sigma - t| / n
    q90: dict
    counts: dict
    rows: list[tuple]                # trial, seed, n, sigma, t, gap_over_n
    t_max: float


def measure_sigma_t_gap(params: ModelParams, direction: Site,
                        n_list: Sequence[int], trials: int, t_max: float, *,
                        seed: int = 0, threads: int = 1,
                        budget: RunBudget | None = None,
                        t_surv: float | None = None,
                        min_per_n: int = 0) -> GapResult:
    """Per-n distribution of |sigma(n x) - t(n x)| / n on surviving runs."""
    budget = budget or RunBudget()
    xs = {n: tuple(n * c for c in direction) for n in n_list}
    gaps: dict[int, list[float]] = {n: [] for n in n_list}
    rows = []
    args = sigma_trial_args(params, list(xs.values()), trials, t_max,
                            t_max if t_surv is None else t_surv, seed, budget)
    for i, s, traces in map_trials(_sigma_worker, args, threads):
        for n, x in xs.items():
            tr = traces[x]
            if _usable_trace(tr):
                gap = tr.sigma - tr.t_hit
                gaps[n].append(gap / n)
                rows.append((i, s, n, tr.sigma, tr.t_hit, gap / n))
        if min_per_n and all(len(v) >= min_per_n for v in gaps.values()):
            break
    med = {n: float(np.median(v)) if v else float("nan") for n, v in gaps.items()}
    q90 = {n: float(np.quantile(v, 0.9)) if v else float("nan")
           for n, v in gaps.items()}
    cnt = {n: len(v) for n, v in gaps.items()}
    return GapResult(tuple(direction), list(n_list), med, q90, cnt, rows, t_max)


def _usable_trace(tr: SigmaTrace) -> bool:
    """Survival-conditioned, resolved trace: the essential time was pinned."""
    return (tr.survived and not tr.degenerate and tr.t_hit is not None
            and not (tr.censored and tr.K == 0))


@dataclass
class MuResult:
    direction: Site
    n_list: list[int]
    sigma_over_n: dict               # n -> (mean, ci, count)
    t_over_n: dict
    sigma_over_n_neg: dict           # same for the opposite direction
    mu_hat: float
    mu_hat_neg: float
    t_max: float

    def symmetric_within_ci(self) -> bool:
        ns = sorted(self.n_list)[-2:]
        for n in ns:
            m1, c1, _ = self.sigma_over_n[n]
            m2, c2, _ = self.sigma_over_n_neg[n]
            if abs(m1 - m2) > c1 + c2:
                return False
        return True


def estimate_mu(params: ModelParams, direction: Site, n_list: Sequence[int],
                trials: int, t_max: float, *, seed: int = 0, threads: int = 1,
                budget: RunBudget | None = None,
                t_surv: float | None = None) -> MuResult:
    """sigma(n x)/n and t(n x)/n per n, with the plateau estimate mu_hat."""
    budget = budget or RunBudget()
    n_list = sorted(n_list)
    pos = {n: tuple(n * c for c in direction) for n in n_list}
    neg = {n: tuple(-n * c for c in direction) for n in n_list}
    xs = list(pos.values()) + list(neg.values())
    sig: dict[Site, list[float]] = {x: [] for x in xs}
    hit: dict[Site, list[float]] = {x: [] for x in xs}
    args = sigma_trial_args(params, xs, trials, t_max,
                            t_max if t_surv is None else t_surv, seed, budget)
    for i, s, traces in map_trials(_sigma_worker, args, threads):
        for x in xs:
            tr = traces[x]
            if _usable_trace(tr):
                sig[x].append(tr.sigma)
                hit[x].append(tr.t_hit)

    def summarize(tab, n, x):
        vals = [v / n for v in tab[x]]
        m, ci = mean_ci(vals)
        return (m, ci, len(vals))

    s_pos = {n: summarize(sig, n, pos[n]) for n in n_list}
    t_pos = {n: summarize(hit, n, pos[n]) for n in n_list}
    s_neg = {n: summarize(sig, n, neg[n]) for n in n_list}

    def plateau(tab):
        ns = n_list[-2:]
        w = [tab[n][2] for n in ns]
        if sum(w) == 0:
            return float("nan")
        return float(sum(tab[n][0] * tab[n][2] for n in ns) / sum(w))

    return MuResult(tuple(direction), list(n_list), s_pos, t_pos, s_neg,
                    plateau(s_pos), plateau(s_neg), t_max)


# ---------------------------------------------------------------------------
# shape snapshot (d = 2)
# ---------------------------------------------------------------------------

DIRECTIONS_16 = ((1, 0), (2, 1), (1, 1), (1, 2), (0, 1), (-1, 2), (-1, 1),
                 (-2, 1), (-1, 0), (-2, -1), (-1, -1), (-1, -2), (0, -1),
                 (1, -2), (1, -1), (2, -1))


@dataclass
class ShapeResult:
    t: float
    directions: tuple
    radii: dict                      # unit direction -> (mean extent/t, ci, count)
    mu_hat: dict                     # direction -> 1 / radius (time per unit length)
    surviving: int
    trials_run: int
    inclusion_fractions: dict        # eps -> (inner_frac, outer_frac)
    cloud: list[tuple]               # (trial, x0, x1) normalized sample
    boundary_hits: int

    def polygon(self, scale: float = 1.0) -> np.ndarray:
        units = _unit_dirs(self.directions)
        r = np.array([self.radii[d][0] for d in self.directions])
        return units * (r * scale)[:, None]

    def symmetric_within_ci(self) -> bool:
        """Opposite-direction radius estimates agree within their CIs."""
        by_dir = {d: self.radii[d] for d in self.directions}
        for d in self.directions:
            nd = tuple(-c for c in d)
            m1, c1, _ = by_dir[d]
            m2, c2, _ = by_dir[nd]
            if abs(m1 - m2) > c1 + c2:
                return False
        return True


def _polygon_gauge(points: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """Gauge (Minkowski functional) of the star polygon at each query point."""
    angles = np.arctan2(points[:, 1], points[:, 0])
    order = np.argsort(angles)
    pts = points[order]
    angs = angles[order]
    qa = np.arctan2(queries[:, 1], queries[:, 0])
    idx = (np.searchsorted(angs, qa, side="right") - 1) % len(pts)
    a = pts[idx]
    b = pts[(idx + 1) % len(pts)]
    # q/s on segment a-b: s = cross(q, b-a) / cross(a, b)
    cross_ab = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    num = (queries[:, 0] * b[:, 1] - queries[:, 1] * b[:, 0]
           + a[:, 0] * queries[:, 1] - a[:, 1] * queries[:, 0])
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(np.abs(cross_ab) > 1e-300, num / cross_ab, np.inf)
    return np.abs(np.where((queries == 0).all(axis=1), 0.0, s))


def _unit_dirs(dirs) -> np.ndarray:
    arr = np.array(dirs, dtype=float)
    return arr / np.linalg.norm(arr, axis=1)[:, None]


def _shape_worker(a):
    i, seed, params, t, t_max, budget, dirs = a
    _, traj = survival_run(params, seed, t_max, budget, None, record=False,
                           track_first_hits=True)
    if not traj.final:
        return (i, int(traj.boundary_hit), None, None)
    hits = sorted(x for x, ft in traj.first_hits().items() if ft <= t)
    pts = np.array(hits, dtype=float)
    units = _unit_dirs(dirs)
    ang = np.arctan2(pts[:, 1], pts[:, 0])
    dir_ang = np.arctan2(units[:, 1], units[:, 0])
    dd = np.abs((ang[:, None] - dir_ang[None, :] + np.pi) % (2 * np.pi) - np.pi)
    sector = dd.argmin(axis=1)
    proj = pts @ units.T
    extents = []
    for j in range(len(dirs)):
        m = sector == j
        extents.append(float(proj[m, j].max() / t) if m.any() else 0.0)
    return (i, int(traj.boundary_hit), extents, hits)


def shape_snapshot(params: ModelParams, t: float, trials: int, *,
                   seed: int = 0, threads: int = 1, t_max: float | None = None,
                   budget: RunBudget | None = None,
                   eps_grid: Sequence[float] = (0.15, 0.25, 0.4),
                   cloud_sample: int = 12,
                   min_surviving: int = 0) -> ShapeResult:
    """Normalized reached-set clouds and directional radius estimates in d=2.

    Per surviving trial (alive at t_max, default t), H~_t = H_t + [0,1]^2 is
    rescaled by t.  Each direction's radius is the mean over trials of the
    maximal projection onto it among the reached sites of its angular sector
    (sector extents fill lattice-ray holes); the ball estimate interpolates
    these over the 16 directions.  Outer inclusion: the far corner of every
    reached cell has gauge <= 1+eps.  Inner inclusion: every cell whose
    center lies in the (1-eps)-scaled ball was reached.
    """
    if params.dimension != 2:
        raise ValueError("shape snapshots are a d=2 experiment")
    budget = budget or RunBudget()
    t_max = t if t_max is None else t_max
    if t_max < t:
        raise ValueError("t_max below the snapshot time")
    dirs = DIRECTIONS_16
    units = _unit_dirs(dirs)
    ext_rows: list[list[float]] = []
    per_trial: list[tuple[int, list]] = []
    cloud = []
    bhits = 0
    surviving = 0
    trials_run = 0
    args = [(i, derive_seed(seed, i), params, t, t_max, budget, dirs)
            for i in range(trials)]
    for i, bh, extents, hits in map_trials(_shape_worker, args, threads):
        trials_run += 1
        bhits += bh
        if extents is None:
            continue
        surviving += 1
        ext_rows.append(extents)
        per_trial.append((i, hits))
        if surviving <= cloud_sample:
            cloud.extend((i, x[0] / t, x[1] / t) for x in hits)
        if min_surviving and surviving >= min_surviving:
            break

    ext = np.array(ext_rows) if ext_rows else np.zeros((0, len(dirs)))
    radii = {}
    mu_hat = {}
    for j, u in enumerate(dirs):
        m, ci = mean_ci(ext[:, j]) if len(ext) else (float("nan"), float("nan"))
        radii[u] = (m, ci, len(ext))
        mu_hat[u] = 1.0 / m if m and m > 0 else float("inf")

    poly = units * np.array([radii[u][0] if len(ext) else 0.01
                             for u in dirs])[:, None]
    fractions = {}
    for eps in eps_grid:
        inner_ok = 0
        outer_ok = 0
        lim = int(math.ceil(max(np.abs(poly).max(), 0.01) * t)) + 2
        gx, gy = np.meshgrid(np.arange(-lim, lim + 1), np.arange(-lim, lim + 1),
                             indexing="ij")
        centers = np.stack([(gx.ravel() + 0.5) / t, (gy.ravel() + 0.5) / t],
                           axis=1)
        g = _polygon_gauge(poly, centers)
        need_sites = {(int(math.floor(c[0] * t)), int(math.floor(c[1] * t)))
                      for c in centers[g <= (1.0 - eps)]}
        for _i, hits in per_trial:
            hs = set(hits)
            if need_sites <= hs:
                inner_ok += 1
            far = np.array([[(x[0] + (1 if x[0] >= 0 else 0)) / t,
                             (x[1] + (1 if x[1] >= 0 else 0)) / t]
                            for x in hits])
            if len(far) == 0 or _polygon_gauge(poly, far).max() <= 1.0 + eps:
                outer_ok += 1
        denom = max(1, len(per_trial))
        fractions[eps] = (inner_ok / denom, outer_ok / denom)
    return ShapeResult(t, dirs, radii, mu_hat, surviving, trials_run,
                       fractions, cloud, bhits)


# ---------------------------------------------------------------------------
# FKG spot check
# ---------------------------------------------------------------------------

@dataclass
class FkgResult:
    covariance: float
    std_err: float
    trials: int
    u: Site
    v: Site
    t: float


def fkg_spot_check(params: ModelParams, u: Site, v: Site, t: float,
                   trials: int, *, seed: int = 0, threads: int = 1,
                   budget: RunBudget | None = None,
                   f: Config | None = None) -> FkgResult:
    """Empirical covariance of the alive indicators at u and v at time t."""
    budget = budget or RunBudget()
    args = [(i, derive_seed(seed, i), params, f, t, budget, tuple(u), tuple(v))
            for i in range(trials)]
    xs, ys = [], []
    for _i, _s, ok_u, ok_v in map_trials(_fkg_worker, args, threads):
        xs.append(ok_u)
        ys.append(ok_v)
    xs_a, ys_a = np.asarray(xs, float), np.asarray(ys, float)
    cov = float(np.mean(xs_a * ys_a) - xs_a.mean() * ys_a.mean())
    prod = (xs_a - xs_a.mean()) * (ys_a - ys_a.mean())
    se = float(prod.std(ddof=1) / math.sqrt(trials)) if trials > 1 else float("inf")
    return FkgResult(cov, se, trials, tuple(u), tuple(v), t)


def _fkg_worker(a):
    i, seed, params, f, t, budget, u, v = a
    _, traj = survival_run(params, seed, t, budget, f, record=False)
    fin = traj.final
    return (i, seed, int(u in fin), int(v in fin))


# ---------------------------------------------------------------------------
# calibration
# ---------------------------------------------------------------------------

@dataclass
class Calibration:
    params: ModelParams
    rho_hat: float
    rho_interval: tuple[float, float]
    front_speed: float              # typical front speed (pregen hint)
    growth_speed: float             # pure-growth (hard bound) fitted speed
    table: list[tuple]              # (lam, gamma, rho_hat)
    t_max: float

    def budget(self, probe_time: float = 8.0) -> RunBudget:
        return RunBudget(conf_speed=max(1.0, self.growth_speed * 1.3),
                         margin=8, pregen_speed=self.front_speed * 1.35 + 0.1,
                         probe_time=probe_time)

    def meta(self) -> dict:
        return {"lambda": self.params.profile.tail, "gamma": self.params.gamma,
                "profile_head": list(self.params.profile.head),
                "rho_hat": self.rho_hat, "front_speed": self.front_speed,
                "growth_speed": self.growth_speed, "t_max": self.t_max,
                "table": self.table}


def calibrate(pairs: Sequence[tuple[float, float]], dimension: int,
              trials: int, t_max: float, *, seed: int = 0, threads: int = 1,
              rho_min: float = 0.3) -> Calibration:
    """Survival scan over two-stage (lam, gamma) pairs; pick the cheapest
    pair reaching rho_min (grid order = cost order), then measure the
    typical front speed and the pure-growth speed bound on the winner."""
    from .engine import krone_params
    table = []
    chosen = None
    chosen_rho = None
    for lam, gamma in pairs:
        params = krone_params(lam, gamma, dimension=dimension)
        res = estimate_survival(params, None, trials, t_max, seed=seed,
                                threads=threads,
                                budget=RunBudget(conf_speed=max(2.0, lam)))
        table.append((lam, gamma, res.rho_hat))
        if chosen is None and res.rho_hat >= rho_min:
            chosen = params
            chosen_rho = res.estimate
    if chosen is None:
        lam, gamma, best = max(table, key=lambda r: r[2])
        chosen = krone_params(lam, gamma, dimension=dimension)
        chosen_rho = BernoulliEstimate(int(round(best * trials)), trials)
    d = dimension
    t_probe = min(t_max, 30.0)
    reaches = []
    for i in range(60):
        s = derive_seed(seed ^ 0xFACE, i)
        budget = RunBudget(conf_speed=max(2.0, chosen.profile.tail))
        _, traj = survival_run(chosen, s, t_probe, budget, None, record=False,
                               track_first_hits=True)
        if traj.final:
            hits = traj.first_hits()
            reaches.append(max(_norm_inf(x) for x in hits) / t_probe)
    front = float(np.quantile(reaches, 0.95)) if reaches else 1.0
    growth = []
    for i in range(20):
        s = derive_seed(seed ^ 0xBEEF, i)
        om = Omega(seed=s, params=chosen, horizon=11.0)
        tr = richardson_evolve(om, [(0,) * d], 10.0, record=False,
                               track_first_hits=True)
        growth.append(max(_norm_inf(x) for x in tr.first_hits()) / 10.0)
    return Calibration(chosen, chosen_rho.p_hat, chosen_rho.interval,
                       front, float(np.quantile(growth, 0.99)), table, t_max)
