"""Block renormalization: good sites, the finite space-time block event, the
dynamic macroscopic percolation field with its anchor points, the restart
procedure, and a generic oriented-percolation simulator.

Geometry conventions (percolation axis = first coordinate, the other
coordinates confined to [-a, a]):

  target zone   S_{j,k}  = [a(2j-1), a(2j+1)] x [-a,a]^{d-1} x [5bk, 5bk+b]
  search zone   A_{j,k}  = [a(2j-5), a(2j+5)] x [-a,a]^{d-1} x [5bk, 5bk+6b]
  diagonal      S6_{j,k} = S_{6j,6k};  A6/~A6 = unions of six stacked A zones

so one macroscopic level spans 30b of time and the anchors of level k live in
[30bk, 30bk+b].  A macroscopic edge (j,k) -> (j+-1, k+1) is open when a
region-restricted evolution started from the anchor's fully occupied cube
(all ages 1) delivers a fully occupied cube centered in the next S6 zone; by
attractivity each delivery certifies the ambient process, which is what makes
"open path to level k implies the process is alive at 30bk" a pathwise
statement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .engine import (EV_BIRTH, Region, StaircaseRegion, StaticRegion,
                     Trajectory, box_region, evolve)
from .lattice import Box, Config, Site, cube, pack_site, unpack_site
from .omega import ModelParams, Omega, derive_seed
from .stats import BernoulliEstimate

DAGGER = None  # anchor value for "no open macro path delivered a cube"


@dataclass(frozen=True)
class BlockGeometry:
    """Cube radius n, spatial block scale a, temporal block scale b (n < a)."""

    n: int
    a: int
    b: int

    def __post_init__(self) -> None:
        if not (0 < self.n < self.a) or self.b < 1:
            raise ValueError(f"need 0 < n < a and b >= 1, got {self}")

    @property
    def level_height(self) -> float:
        return 30.0 * self.b


def _slab_box(x1_lo: int, x1_hi: int, a: int, d: int) -> Box:
    lo = (x1_lo,) + (-a,) * (d - 1)
    hi = (x1_hi,) + (a,) * (d - 1)
    return Box(lo, hi)


def _zone_s(g: BlockGeometry, j: int, k: int, d: int) -> tuple[Box, float, float]:
    box = _slab_box(g.a * (2 * j - 1), g.a * (2 * j + 1), g.a, d)
    return box, 5.0 * g.b * k, 5.0 * g.b * k + g.b


def _zone_a(g: BlockGeometry, j: int, k: int, d: int) -> tuple[Box, float, float]:
    box = _slab_box(g.a * (2 * j - 5), g.a * (2 * j + 5), g.a, d)
    return box, 5.0 * g.b * k, 5.0 * g.b * k + 6.0 * g.b


def _staircase(g: BlockGeometry, j: int, k: int, d: int,
               direction: int) -> StaircaseRegion:
    """A6 (direction=+1) or tilde-A6 (direction=-1) for macro site (j, k)."""
    slabs = [_zone_a(g, 6 * j + direction * i, 6 * k + i, d) for i in range(6)]
    return StaircaseRegion(slabs)


# ---------------------------------------------------------------------------
# good sites (the survival comparison of the crude renormalization)
# ---------------------------------------------------------------------------

def good_site_bound(T: float, m: int, gamma: float, lambda_next: float,
                    d: int) -> float:
    """Closed-form lower bound for the probability that a site is good."""
    if T <= 0 or gamma <= 0 or lambda_next < 0:
        raise ValueError("need T > 0, gamma > 0, lambda_next >= 0")
    mat = (1.0 - math.exp(-gamma * T / (2 * m))) ** m if m > 0 else 1.0
    return (math.exp(-1.5 * T) * mat
            * (1.0 - math.exp(-lambda_next * T / 2)) ** (2 * d))


def good_site_indicator(omega, x: Site, nT: float, T: float, m: int) -> bool:
    """No death on [nT, nT+3T/2], >= m maturations on [nT+T/2, nT+T], and at
    least one base arrow on every incident edge during [nT+T, nT+3T/2]."""
    if len(omega.death_times(x, (nT, nT + 1.5 * T))):
        return False
    if m > 0 and len(omega.maturation_times(x, (nT + 0.5 * T, nT + T))) < m:
        return False
    for i in range(len(x)):
        for dlt in (-1, 1):
            y = x[:i] + (x[i] + dlt,) + x[i + 1:]
            if not omega.arrow_events((x, y), (nT + T, nT + 1.5 * T)):
                return False
    return True


# ---------------------------------------------------------------------------
# cube-delivery detection
# ---------------------------------------------------------------------------

def find_cube_delivery(traj: Trajectory, centers: Box, t_lo: float, t_hi: float,
                       n: int) -> tuple[Site, float] | None:
    """Earliest (y, t) with t in [t_lo, t_hi] and cube(y, n) fully alive.

    y ranges over the centers box.  The occupied set changes only at events,
    so scanning the window's birth events (plus the state at its opening) is
    exact.  Ties at one event time resolve to the lexicographically smallest
    center.
    """
    d = traj.dimension
    t_hi = min(t_hi, traj.t_end)
    if t_lo > t_hi:
        return None
    state = {pack_site(s): a for s, a in traj.config_at(t_lo).items()}

    def cube_codes(y: Site):
        return (pack_site(s) for s in cube(y, n).sites())

    def full_cubes_around(z: Site):
        hits = []
        for y in cube(z, n).sites():
            if centers.contains(y) and all(c in state for c in cube_codes(y)):
                hits.append(y)
        return hits

    best = None
    for y in centers.sites():
        if all(c in state for c in cube_codes(y)):
            best = y if best is None or y < best else best
    if best is not None:
        return best, t_lo

    ts, kinds, sites, after = traj._ts, traj._kinds, traj._sites, traj._after
    i0 = np.searchsorted(ts, t_lo, side="right")
    for i in range(int(i0), len(ts)):
        t = ts[i]
        if t > t_hi:
            break
        code = sites[i]
        if after[i] == 0:
            state.pop(code, None)
            continue
        state[code] = after[i]
        if kinds[i] == EV_BIRTH:
            hits = full_cubes_around(unpack_site(code, d))
            if hits:
                return min(hits), t
    return None


# ---------------------------------------------------------------------------
# finite space-time condition (B1) and the staircase block event
# ---------------------------------------------------------------------------

def check_block_B1(omega, g: BlockGeometry, x: Site | None = None,
                   s: float = 0.0) -> bool:
    """One realization of the block event from start (x, s).

    Runs the region-restricted process from the fully occupied cube
    x + [-n,n]^d (all ages 1) inside [-5a,5a]^d x [0,6b] and reports whether
    some cube centered in [a,3a] x [-a,a]^{d-1} is fully alive at one time in
    [5b, 6b].
    """
    d = omega.params.dimension
    x = (0,) * d if x is None else x
    g_ok = all(abs(c) <= g.a for c in x)
    if not g_ok or not 0 <= s <= g.b:
        raise ValueError(f"start ({x}, {s}) outside [-a,a]^d x [0,b]")
    region = StaticRegion(_slab_box(-5 * g.a, 5 * g.a, 5 * g.a, d))
    init = {site: 1 for site in cube(x, g.n).sites()}
    traj = evolve(omega, init, 6.0 * g.b, region=region, t_start=s,
                  stop_when_empty=True)
    centers = _slab_box(g.a, 3 * g.a, g.a, d)
    return find_cube_delivery(traj, centers, 5.0 * g.b, 6.0 * g.b, g.n) is not None


def explore_macro_edge(omega, g: BlockGeometry, anchor: tuple[Site, float],
                       j: int, k: int, direction: int) -> tuple[Site, float] | None:
    """Attempt the staircase block event from an anchor of macro site (j, k).

    direction +1 targets S6_{j+1,k+1} through A6_{j,k}; -1 targets
    S6_{j-1,k+1} through the mirrored staircase.  Returns the delivered cube
    center and its time, or None.
    """
    d = omega.params.dimension
    y, t_y = anchor
    region = _staircase(g, j, k, d, direction)
    t_close = 30.0 * g.b * (k + 1) + g.b
    init = {site: 1 for site in cube(y, g.n).sites()}
    traj = evolve(omega, init, t_close, region=region, t_start=t_y,
                  stop_when_empty=True)
    tgt_box, tgt_lo, tgt_hi = _zone_s(g, 6 * (j + direction), 6 * (k + 1), d)
    return find_cube_delivery(traj, tgt_box, tgt_lo, tgt_hi, g.n)


def estimate_block_success(params: ModelParams, g: BlockGeometry, trials: int,
                           *, worst_case: bool = False, seed: int = 0,
                           staircase: bool = False) -> BernoulliEstimate:
    """MC estimate of the block event over fresh outcomes.

    worst_case scans the start (x, s) over the corner/center grid of
    [-a,a]^d x [0,b] and reports the minimum frequency (the condition
    quantifies over every start).  staircase estimates the six-block
    diagonal event used by the macroscopic field instead of the elementary
    one; its (1 - estimate) is the consistent Bernoulli padding level.
    """
    if trials < 1:
        raise ValueError("trials >= 1 required")
    d = params.dimension
    starts: list[tuple[Site, float]]
    if worst_case:
        from itertools import product
        grid = [x for x in product((-g.a, 0, g.a), repeat=d)]
        starts = [(x, s) for x in grid for s in (0.0, g.b / 2.0, float(g.b))]
    else:
        starts = [((0,) * d, 0.0)]
    horizon = (30.0 * g.b + g.b + 1.0) if staircase else (6.0 * g.b + 1.0)
    per = trials // len(starts) if worst_case else trials
    best: BernoulliEstimate | None = None
    for si, (x, s) in enumerate(starts):
        succ = 0
        for i in range(per):
            om = Omega(seed=_trial_seed(seed, si * per + i), params=params,
                       horizon=horizon)
            if staircase:
                hit = explore_macro_edge(om, g, (x, s), 0, 0, +1)
            else:
                hit = check_block_B1(om, g, x, s)
            succ += bool(hit)
        est = BernoulliEstimate(succ, per)
        if best is None or est.p_hat < best.p_hat:
            best = est
    return best


def estimate_B1(params: ModelParams, g: BlockGeometry, trials: int, *,
                worst_case: bool = False, seed: int = 0) -> BernoulliEstimate:
    """The finite space-time condition's probability, with Wilson interval."""
    return estimate_block_success(params, g, trials, worst_case=worst_case,
                                  seed=seed, staircase=False)


def _trial_seed(master: int, i: int) -> int:
    return derive_seed(master, i)


# ---------------------------------------------------------------------------
# the dynamic macroscopic field (W, Y)
# ---------------------------------------------------------------------------

@dataclass
class MacroField:
    """Renormalized bits W^k_e and microscopic anchors Y_{j,k}.

    anchors[(j,k)] is (site, time) or None (the cemetery); bits[(k, j, dir)]
    is (bit, source) for the level-k edge leaving macro site (j, k-1) in
    direction dir, with source "explored" or "bernoulli".
    """

    geometry: BlockGeometry
    levels: int
    epsilon_pad: float
    anchors: dict = field(default_factory=dict)
    bits: dict = field(default_factory=dict)
    origin: tuple[Site, float] = ((0,), 0.0)

    def cluster(self) -> list[set[int]]:
        """Macro sites reachable from (0,0) through open bits, per level."""
        reach = [{0}]
        for k in range(1, self.levels + 1):
            cur: set[int] = set()
            for j in reach[-1]:
                if self.bits.get((k, j, +1), (0,))[0]:
                    cur.add(j + 1)
                if self.bits.get((k, j, -1), (0,))[0]:
                    cur.add(j - 1)
            reach.append(cur)
        return reach

    def survival_level(self) -> int:
        """Last level with a nonempty reachable set."""
        reach = self.cluster()
        for k, s in enumerate(reach):
            if not s:
                return k - 1
        return self.levels


def build_macro_field(omega, g: BlockGeometry, k_levels: int,
                      epsilon_pad: float, *, pad_seed: int = 0,
                      origin: tuple[Site, float] | None = None,
                      cluster_only: bool = False) -> MacroField:
    """Inductive construction of the macroscopic field on one outcome.

    Level 0 holds the single live anchor at the origin (the fully occupied
    cube there).  At each level every live anchor explores both diagonal
    staircases; a dagger anchor contributes independent Bernoulli(1-eps) bits
    instead.  cluster_only prunes exploration to anchors reachable from the
    origin, which cannot change reachability (dagger anchors are never
    reachable) and is what the restart procedure uses.
    """
    d = omega.params.dimension
    if origin is None:
        origin = ((0,) * d, 0.0)
    y0, t0 = origin
    fld = MacroField(geometry=g, levels=k_levels, epsilon_pad=epsilon_pad,
                     origin=origin)
    fld.anchors[(0, 0)] = origin
    pad_rng = np.random.default_rng(_trial_seed(pad_seed ^ 0x5ADBEEF, 0))
    frame = omega if not (t0 or any(y0)) else omega.shift_time(t0).shift_space(y0)

    def pad_bit() -> int:
        return int(pad_rng.random() < 1.0 - epsilon_pad)

    reach = {0}
    for k in range(k_levels):
        deliveries: dict[int, list[tuple[float, Site]]] = {}
        sources = [j for j in range(-k, k + 1)
                   if (j + k) % 2 == 0 and (not cluster_only or j in reach)]
        for j in sources:
            anchor = fld.anchors.get((j, k))
            for direction in (+1, -1):
                key = (k + 1, j, direction)
                if anchor is None:
                    fld.bits[key] = (pad_bit(), "bernoulli")
                    continue
                hit = explore_macro_edge(frame, g, _to_relative(anchor, origin),
                                         j, k, direction)
                if hit is None:
                    fld.bits[key] = (0, "explored")
                else:
                    fld.bits[key] = (1, "explored")
                    deliveries.setdefault(j + direction, []).append(
                        _to_absolute(hit, origin))
        for j2, cands in deliveries.items():
            t_best, site_best = max(cands)
            fld.anchors[(j2, k + 1)] = (site_best, t_best)
        for j2 in range(-(k + 1), k + 2):
            if (j2 + k + 1) % 2 == 0:
                fld.anchors.setdefault((j2, k + 1), DAGGER)
        if cluster_only:
            new_reach = set()
            for j in reach:
                if fld.bits.get((k + 1, j, +1), (0,))[0]:
                    new_reach.add(j + 1)
                if fld.bits.get((k + 1, j, -1), (0,))[0]:
                    new_reach.add(j - 1)
            reach = new_reach
            if not reach:
                break
    return fld


def _to_relative(anchor: tuple[Site, float], origin: tuple[Site, float]):
    y0, t0 = origin
    site, t = anchor
    return (tuple(a - b for a, b in zip(site, y0)), t - t0)


def _to_absolute(hit: tuple[Site, float], origin: tuple[Site, float]):
    y0, t0 = origin
    site, t = hit
    return (t + t0, tuple(a + b for a, b in zip(site, y0)))


# ---------------------------------------------------------------------------
# restart procedure
# ---------------------------------------------------------------------------

@dataclass
class RestartOutcome:
    sigma_restart: float
    y: Site | None
    iterations: int
    waits: list[int]           # N_i
    macro_lifetimes: list[int]  # M_i
    censored: bool
    lifetime: float | None     # ambient extinction time if observed


def run_restart(omega, f: Config, g: BlockGeometry, t_max: float, *,
                k_levels: int = 40, epsilon_pad: float = 0.5,
                region: Region | None = None) -> RestartOutcome:
    """Alternate "wait for a fully occupied slab cube" and "launch a block
    percolation from it" until one percolation survives or the process dies.

    Survival of the macroscopic percolation is operationalized as reaching
    k_levels; when it dies at level M instead, the wait resumes at the
    corresponding microscopic time N+1+30bM.
    """
    d = omega.params.dimension
    waits: list[int] = []
    lifetimes: list[int] = []
    t_cursor = 0.0
    sigma = 0.0
    state = dict(f)

    def find_slab_cube(conf: Config) -> Site | None:
        support = set(conf)
        cands = set()
        for s in support:
            for y in cube(s, g.n).sites():
                if all(abs(c) <= g.a for c in y[1:]):
                    cands.add(y)
        full = [y for y in sorted(cands)
                if all(site in support for site in cube(y, g.n).sites())]
        return full[0] if full else None

    while True:
        # wait phase: integer ticks until extinction or a full slab cube
        m = 0
        cube_at: Site | None = None
        while True:
            if t_cursor + m + 1 > t_max:
                return RestartOutcome(sigma + m + 1, None, len(waits) + 1,
                                      waits + [m], lifetimes + [0], True, None)
            traj = evolve(omega, state, t_cursor + m + 1, t_start=t_cursor + m,
                          region=region, record=False, stop_when_empty=True)
            state = traj.final
            if not state:
                ext = traj.extinction_time
                waits.append(m)
                lifetimes.append(0)
                return RestartOutcome(sigma + m + 1, None, len(waits),
                                      waits, lifetimes, False, ext)
            cube_at = find_slab_cube(state)
            if cube_at is not None:
                break
            m += 1
        waits.append(m)
        t_cube = t_cursor + m + 1
        fld = build_macro_field(omega, g, k_levels, epsilon_pad,
                                origin=(cube_at, t_cube), cluster_only=True)
        level = fld.survival_level()
        if level >= k_levels:
            lifetimes.append(0)
            return RestartOutcome(sigma + m + 1, cube_at, len(waits),
                                  waits, lifetimes, False, None)
        lifetimes.append(level + 1)
        u_i = m + 1 + g.level_height * (level + 1)
        sigma += u_i
        t_next = t_cube + g.level_height * (level + 1)
        if t_next > t_max:
            return RestartOutcome(sigma, None, len(waits), waits, lifetimes,
                                  True, None)
        traj = evolve(omega, state, t_next, t_start=t_cube, region=region,
                      record=False, stop_when_empty=True)
        state = traj.final
        t_cursor = t_next
        if not state:
            return RestartOutcome(sigma, None, len(waits), waits, lifetimes,
                                  False, traj.extinction_time)
        # otherwise restart the whole procedure from the current state


# ---------------------------------------------------------------------------
# generic oriented percolation on L = {(j,k): j+k even}
# ---------------------------------------------------------------------------

@dataclass
class PercoResult:
    survived: bool
    tau: int | None                 # extinction level, None if survived
    eta_sizes: list[int]            # |cluster level k|
    reached: dict                   # per-level reachable sets
    hit_counts: dict                # site j -> number of levels reaching it


def oriented_percolation(p: float, levels: int, *, dependence: str = "iid",
                         mode: str = "site", seed: int = 0) -> PercoResult:
    """Oriented site or edge percolation from the origin on the even lattice.

    dependence "one-dependent" uses a synthetic field sharing uniforms
    between macro neighbors (open iff three shared uniforms all fall below
    p^(1/3)), which keeps the marginal at p with finite-range dependence.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be a probability")
    if mode not in ("site", "edge"):
        raise ValueError("mode must be site or edge")
    if dependence not in ("iid", "one-dependent"):
        raise ValueError("dependence must be iid or one-dependent")
    rng = np.random.default_rng(_trial_seed(seed, 8_888))
    u_site: dict[tuple[int, int], float] = {}

    def site_u(j: int, k: int) -> float:
        key = (j, k)
        if key not in u_site:
            u_site[key] = float(rng.random())
        return u_site[key]

    def site_open(j: int, k: int) -> bool:
        if dependence == "iid":
            return site_u(j, k) <= p
        q = p ** (1.0 / 3.0)
        return all(site_u(j + off, k) <= q for off in (-2, 0, 2))

    reach = {0: {0}}
    eta = [1]
    hits = {0: 1}
    tau = None
    for k in range(1, levels + 1):
        cur: set[int] = set()
        for j in reach[k - 1]:
            for direction in (+1, -1):
                j2 = j + direction
                if mode == "edge":
                    ok = rng.random() <= p
                else:
                    ok = site_open(j2, k)
                if ok:
                    cur.add(j2)
        reach[k] = cur
        eta.append(len(cur))
        for j in cur:
            hits[j] = hits.get(j, 0) + 1
        if not cur:
            tau = k
            break
    return PercoResult(survived=tau is None, tau=tau, eta_sizes=eta,
                       reached=reach, hit_counts=hits)
