"""Event-driven evolution of the aging contact process from its event substrate.

The evolution merges, in time order, the death/maturation streams of live
sites and the marked arrow streams of their incident edges, applying:

  * death time at a living x        -> x dies;
  * maturation time at a living x   -> age(x) += 1;
  * arrow on {x,y} with mark u      -> if exactly one endpoint lives with age
    k, the other is dead and u <= lambda_k / lambda_base, the dead endpoint
    is born with age 1 (no effect when both live or both dead).

Only streams of currently relevant objects are kept in the pending-event
heap: a site's clocks go dormant while it is dead, an edge's arrows while
its endpoints are both dead or both alive (either way the arrow is a no-op),
and they are re-armed by the birth or death that makes them relevant again.
Ties (probability zero) are broken by (time, death < maturation < arrow,
object) so replay is deterministic bit for bit.

A region confines every transition to its site set: vertical events are read
only at region sites and an arrow fires only if both endpoints are inside at
that moment.  Regions may be static boxes or staircase schedules of boxes;
at a schedule breakpoint, live sites falling outside the new slice are culled
(recorded as cull transitions).  A birth attempt whose target lies outside
the region raises the trajectory's boundary_hit flag, which is the
diagnostic for "the cluster touched its confinement box".
"""

from __future__ import annotations

import heapq
from bisect import bisect_right
from typing import Iterable, Sequence

import numpy as np

from .lattice import (Box, COORD_BITS, COORD_MASK, COORD_OFF, Config, Site,
                      pack_site, unpack_site, validate_config)
from .omega import (ARROW0, DEATH, MATURATION, HorizonExceededError,
                    ModelParams, AgeProfile, Omega)

# transition codes in trajectory records
EV_DEATH = 0
EV_MATURATION = 1
EV_BIRTH = 2
EV_CULL = 3

EVENT_NAMES = {EV_DEATH: "death", EV_MATURATION: "maturation",
               EV_BIRTH: "birth", EV_CULL: "cull"}

_KEYFRAME_EVERY = 16384


# ---------------------------------------------------------------------------
# regions
# ---------------------------------------------------------------------------

class StaticRegion:
    """A fixed spatial box; the usual truncation _L xi of the process."""

    def __init__(self, box: Box):
        self.box = box
        self.dimension = box.dimension
        self.breakpoints: tuple[float, ...] = ()
        self._lo = tuple(l + COORD_OFF for l in box.lo)
        self._hi = tuple(h + COORD_OFF for h in box.hi)

    def contains_packed(self, code: int, t: float) -> bool:
        for i in range(self.dimension):
            c = (code >> (COORD_BITS * i)) & COORD_MASK
            if c < self._lo[i] or c > self._hi[i]:
                return False
        return True

    def contains(self, x: Site, t: float = 0.0) -> bool:
        return self.box.contains(x)

    def translate(self, x: Site) -> "StaticRegion":
        return StaticRegion(self.box.translate(x))


class StaircaseRegion:
    """A union of spatial boxes, each active on its own time window [t0, t1)."""

    def __init__(self, slabs: Sequence[tuple[Box, float, float]]):
        if not slabs:
            raise ValueError("empty staircase")
        self.slabs = [(box, float(t0), float(t1)) for box, t0, t1 in slabs]
        self.dimension = self.slabs[0][0].dimension
        self.breakpoints = tuple(sorted({t for _, t0, t1 in self.slabs
                                         for t in (t0, t1)}))

    def contains(self, x: Site, t: float) -> bool:
        for box, t0, t1 in self.slabs:
            if t0 <= t < t1 and box.contains(x):
                return True
        return False

    def contains_packed(self, code: int, t: float) -> bool:
        return self.contains(unpack_site(code, self.dimension), t)

    def translate(self, x: Site) -> "StaircaseRegion":
        return StaircaseRegion([(box.translate(x), t0, t1)
                                for box, t0, t1 in self.slabs])

    def shift_time(self, dt: float) -> "StaircaseRegion":
        return StaircaseRegion([(box, t0 + dt, t1 + dt)
                                for box, t0, t1 in self.slabs])


Region = StaticRegion | StaircaseRegion


def box_region(lo: Sequence[int], hi: Sequence[int]) -> StaticRegion:
    return StaticRegion(Box(tuple(lo), tuple(hi)))


# ---------------------------------------------------------------------------
# trajectory
# ---------------------------------------------------------------------------

class Trajectory:
    """Applied transitions of one evolution, with piecewise-constant replay.

    Events are stored as parallel arrays (time, kind, site, age_before,
    age_after, source); `config_at` replays them from periodic keyframes.
    Trajectories built with record=False only carry the summary fields
    (final state, extinction time, optionally per-site first hits and the
    transitions at explicitly tracked sites).
    """

    def __init__(self, dimension: int, initial: Config, t_start: float, t_end: float):
        self.dimension = dimension
        self.initial = dict(initial)
        self.t_start = t_start
        self.t_end = t_end
        self.final: Config = {}
        self.extinction_time: float | None = None
        self.boundary_hit = False
        self.recorded = False
        self._ts: list[float] = []
        self._kinds: list[int] = []
        self._sites: list[int] = []
        self._before: list[int] = []
        self._after: list[int] = []
        self._src: list[int] = []
        self._keyframes: list[tuple[int, dict]] = []
        self._first_hits: dict[int, float] | None = None
        self._tracked: dict[int, list[tuple[float, int, int, int]]] | None = None

    @property
    def n_events(self) -> int:
        return len(self._ts)

    def alive_at_end(self) -> bool:
        return bool(self.final)

    def events(self):
        """Yield (t, kind_name, site, age_before, age_after, source|None)."""
        if not self.recorded:
            raise ValueError("trajectory was built without event recording")
        d = self.dimension
        for i in range(len(self._ts)):
            src = self._src[i]
            yield (self._ts[i], EVENT_NAMES[self._kinds[i]],
                   unpack_site(self._sites[i], d), self._before[i],
                   self._after[i], None if src < 0 else unpack_site(src, d))

    def config_at(self, t: float) -> Config:
        """State at time t (t_start <= t <= t_end), replayed from keyframes."""
        if not self.recorded:
            raise ValueError("trajectory was built without event recording")
        if not self.t_start - 1e-9 <= t <= self.t_end + 1e-9:
            raise ValueError(f"time {t} outside [{self.t_start}, {self.t_end}]")
        n = bisect_right(self._ts, t)
        start_idx = 0
        state = {pack_site(x): a for x, a in self.initial.items()}
        for idx, frame in self._keyframes:
            if idx <= n:
                start_idx, state = idx, dict(frame)
            else:
                break
        kinds, sites, after = self._kinds, self._sites, self._after
        for i in range(start_idx, n):
            a = after[i]
            if a == 0:
                state.pop(sites[i], None)
            else:
                state[sites[i]] = a
        d = self.dimension
        return {unpack_site(c, d): a for c, a in state.items()}

    def support_at(self, t: float) -> set[Site]:
        return set(self.config_at(t).keys())

    def first_hits(self) -> dict[Site, float]:
        """Earliest time each site was alive (initial sites at t_start)."""
        d = self.dimension
        if self._first_hits is not None:
            return {unpack_site(c, d): t for c, t in self._first_hits.items()}
        if not self.recorded:
            raise ValueError("needs event recording or track_first_hits")
        out = {pack_site(x): self.t_start for x in self.initial}
        for i in range(len(self._ts)):
            if self._kinds[i] == EV_BIRTH:
                out.setdefault(self._sites[i], self._ts[i])
        return {unpack_site(c, d): t for c, t in out.items()}

    def alive_intervals(self, x: Site) -> list[tuple[float, float]]:
        """Maximal intervals [birth, death) during which x is alive.

        The last interval is closed at t_end when x is alive at the end.
        """
        code = pack_site(x)
        if self._tracked is not None and code in self._tracked:
            recs = [(t, k) for t, k, _b, _a in self._tracked[code]]
        elif self.recorded:
            recs = [(self._ts[i], self._kinds[i]) for i in range(len(self._ts))
                    if self._sites[i] == code]
        else:
            raise ValueError(f"site {x} was not tracked and events not recorded")
        out = []
        t_open = self.t_start if x in self.initial else None
        for t, k in recs:
            if k == EV_BIRTH and t_open is None:
                t_open = t
            elif k in (EV_DEATH, EV_CULL) and t_open is not None:
                out.append((t_open, t))
                t_open = None
        if t_open is not None:
            out.append((t_open, self.t_end))
        return out


def export_trajectory_csv(traj: Trajectory, path) -> None:
    """Write the documented event-log schema: t,kind,x...,age_before,age_after,src..."""
    d = traj.dimension
    site_cols = ",".join(f"x{i}" for i in range(d))
    src_cols = ",".join(f"src{i}" for i in range(d))
    with open(path, "w") as fh:
        fh.write(f"t,kind,{site_cols},age_before,age_after,{src_cols}\n")
        for t, kind, site, before, after, src in traj.events():
            s = ",".join(str(c) for c in site)
            sc = ",".join("" for _ in range(d)) if src is None else \
                ",".join(str(c) for c in src)
            fh.write(f"{t:.12g},{kind},{s},{before},{after},{sc}\n")


# ---------------------------------------------------------------------------
# lazy event feeds
# ---------------------------------------------------------------------------

class _Feed:
    __slots__ = ("kind", "code", "axis", "x_code", "y_code", "times", "marks",
                 "pos", "next_pane", "in_heap", "done")

    def __init__(self, kind: int, code: int, first_pane: int,
                 axis: int = -1, x_code: int = 0, y_code: int = 0):
        self.kind = kind          # DEATH / MATURATION / ARROW0+axis
        self.code = code          # packed site, or packed smaller endpoint
        self.axis = axis
        self.x_code = x_code
        self.y_code = y_code
        self.times: list[float] = []
        self.marks: list[float] = []
        self.pos = 0
        self.next_pane = first_pane
        self.in_heap = False
        self.done = False


def _resolve_frame(omega, region: Region | None):
    """Map a possibly shifted omega plus view-frame region to the base frame."""
    base, t_off, x_off = omega.resolve()
    if region is not None:
        if any(x_off):
            region = region.translate(x_off)
        if t_off and region.breakpoints:
            region = region.shift_time(t_off)
    delta = pack_site(x_off) - pack_site((0,) * base.params.dimension)
    return base, t_off, delta, region


def evolve(omega, f: Config, t_end: float, *, region: Region | None = None,
           t_start: float = 0.0, record: bool = True,
           track_sites: Iterable[Site] = (), track_first_hits: bool = False,
           stop_when_empty: bool = False, _pure_growth: bool = False) -> Trajectory:
    """Run the graphical construction from configuration f on [t_start, t_end).

    omega may be a base Omega or any time/space translate of one; f, the
    region and the returned trajectory all live in the coordinates of the
    view passed in.  Restarting from trajectory.final at t_end reproduces an
    uninterrupted run exactly (trajectorial Markov property).
    """
    if t_end < t_start:
        raise ValueError("t_end before t_start")
    base, t_off, delta, abs_region = _resolve_frame(omega, region)
    params: ModelParams = base.params
    d = params.dimension
    validate_config(f, d)
    abs_start, abs_end = t_start + t_off, t_end + t_off
    if abs_end > base.horizon + 1e-9:
        raise HorizonExceededError(
            f"evolution to {abs_end} exceeds horizon {base.horizon}")

    ages: dict[int, int] = {}
    for x, age in f.items():
        code = pack_site(x) + delta
        if abs_region is not None and not abs_region.contains_packed(code, abs_start):
            raise ValueError(f"initial site {x} outside the region")
        ages[code] = age

    traj = Trajectory(d, f, t_start, t_end)
    traj.recorded = record
    tracked = None
    if track_sites:
        tracked = {pack_site(x): [] for x in track_sites}
        traj._tracked = tracked
    first_hits = None
    if track_first_hits:
        first_hits = {c - delta: t_start for c in ages}
        traj._first_hits = first_hits

    pane = base.pane_length
    last_pane = int(np.ceil(abs_end / pane - 1e-12))
    mat_accept = base._mat_accept
    span_from = base._span_from
    thr = params.profile.thresholds(params.base_rate).tolist()
    m_cap = len(thr) - 1
    axis_delta = [1 << (COORD_BITS * i) for i in range(d)]

    feeds: list[_Feed] = []
    heap: list = []
    site_feeds: dict[int, tuple[int, ...]] = {}
    edge_feeds: dict[int, int] = {}
    heappop, heappush = heapq.heappop, heapq.heappush

    ts_l, kinds_l, sites_l = traj._ts, traj._kinds, traj._sites
    before_l, after_l, src_l = traj._before, traj._after, traj._src
    keyframes = traj._keyframes

    def rec(t: float, kind: int, code: int, before: int, after: int, src: int) -> None:
        # call only after the ages mutation so keyframes see the post state
        if record:
            ts_l.append(t - t_off)
            kinds_l.append(kind)
            sites_l.append(code - delta)
            before_l.append(before)
            after_l.append(after)
            src_l.append(src - delta if src >= 0 else -1)
            if len(ts_l) % _KEYFRAME_EVERY == 0:
                keyframes.append((len(ts_l),
                                  {c - delta: a for c, a in ages.items()}))
        if tracked is not None:
            rel = code - delta
            if rel in tracked:
                tracked[rel].append((t - t_off, kind, before, after))

    def refill(fd: _Feed) -> None:
        # pull whole generation blocks at a time
        while fd.pos >= len(fd.times) and not fd.done:
            if fd.next_pane > last_pane:
                fd.done = True
                return
            k = fd.kind
            t_arr, m_arr, block_end = span_from(k, fd.code, fd.next_pane)
            if k == MATURATION:
                if mat_accept < 1.0 and len(t_arr):
                    t_arr = t_arr[m_arr <= mat_accept]
                m_arr = None
            elif k == DEATH:
                m_arr = None
            fd.next_pane = block_end
            if len(t_arr):
                if fd.pos and fd.pos == len(fd.times):
                    fd.times = []
                    fd.marks = []
                    fd.pos = 0
                fd.times.extend(t_arr.tolist())
                if m_arr is not None:
                    fd.marks.extend(m_arr.tolist())

    def fast_forward(fd: _Feed, t: float, strict: bool) -> None:
        while True:
            if fd.pos < len(fd.times):
                tv = fd.times[fd.pos]
                if tv > t or (not strict and tv == t):
                    return
                fd.pos += 1
                continue
            refill(fd)
            if fd.done or fd.pos >= len(fd.times):
                return

    def push(fd: _Feed, seq: int) -> None:
        if fd.in_heap or fd.done:
            return
        if fd.pos >= len(fd.times):
            refill(fd)
            if fd.done or fd.pos >= len(fd.times):
                return
        t = fd.times[fd.pos]
        if t >= abs_end:
            return
        k = fd.kind
        kprio = 0 if k == DEATH else (1 if k == MATURATION else 2)
        heappush(heap, (t, kprio, fd.code, seq))
        fd.in_heap = True

    def new_feed(kind: int, code: int, t: float, strict: bool,
                 axis: int = -1, x_code: int = 0, y_code: int = 0) -> int:
        fd = _Feed(kind, code, max(0, int(t / pane)), axis, x_code, y_code)
        feeds.append(fd)
        seq = len(feeds) - 1
        fast_forward(fd, t, strict)
        push(fd, seq)
        return seq

    def wake_edge(ecode: int, axis: int, t: float, strict: bool) -> None:
        key = ecode * 4 + axis
        seq = edge_feeds.get(key)
        if seq is None:
            edge_feeds[key] = new_feed(ARROW0 + axis, ecode, t, strict,
                                       axis=axis, x_code=ecode,
                                       y_code=ecode + axis_delta[axis])
        else:
            fd = feeds[seq]
            if not fd.in_heap and not fd.done:
                fast_forward(fd, t, strict)
                push(fd, seq)

    def activate_site(code: int, t: float, strict: bool) -> None:
        seqs = site_feeds.get(code)
        if seqs is None:
            if _pure_growth:
                site_feeds[code] = ()
            else:
                site_feeds[code] = (new_feed(DEATH, code, t, strict),
                                    new_feed(MATURATION, code, t, strict))
        else:
            for seq in seqs:
                fd = feeds[seq]
                if not fd.in_heap and not fd.done:
                    fast_forward(fd, t, strict)
                    push(fd, seq)
        # arrow clocks matter only while exactly one endpoint is alive; for
        # the pure-growth variant: only toward a dead target
        for axis in range(d):
            dx = axis_delta[axis]
            if (code + dx) not in ages:
                wake_edge(code, axis, t, strict)
            if (code - dx) not in ages:
                wake_edge(code - dx, axis, t, strict)

    live = len(ages)
    if live == 0:
        traj.extinction_time = t_start
    for code in list(ages):
        activate_site(code, abs_start, strict=False)

    contains = abs_region.contains_packed if abs_region is not None else None
    bps = [b for b in (abs_region.breakpoints if abs_region is not None else ())
           if abs_start < b <= abs_end]
    bp_i = 0

    def wake_edges(code: int, t: float) -> None:
        # edges sleeping as saturated (both endpoints alive) become relevant
        # again the moment one endpoint dies
        for axis in range(d):
            dx = axis_delta[axis]
            if (code + dx) in ages:
                wake_edge(code, axis, t, strict=False)
            if (code - dx) in ages:
                wake_edge(code - dx, axis, t, strict=False)

    def cull(at: float) -> None:
        nonlocal live
        doomed = [c for c in ages if not contains(c, at)]
        for c in doomed:
            age = ages.pop(c)
            live -= 1
            rec(at, EV_CULL, c, age, 0, -1)
        for c in doomed:
            wake_edges(c, at)
        if live == 0 and doomed and traj.extinction_time is None:
            traj.extinction_time = at - t_off

    while heap:
        t, kprio, code, seq = heappop(heap)
        if t >= abs_end:
            break
        fd = feeds[seq]
        fd.in_heap = False
        while bp_i < len(bps) and bps[bp_i] <= t:
            cull(bps[bp_i])
            bp_i += 1
        fd.pos += 1
        k = fd.kind
        if k == DEATH:
            age = ages.get(code)
            if age is None:
                continue  # dormant until rebirth
            del ages[code]
            live -= 1
            rec(t, EV_DEATH, code, age, 0, -1)
            if live == 0:
                if traj.extinction_time is None:
                    traj.extinction_time = t - t_off
                if stop_when_empty:
                    break
            wake_edges(code, t)
            continue  # site dead: clocks sleep
        if k == MATURATION:
            age = ages.get(code)
            if age is None:
                continue
            ages[code] = age + 1
            rec(t, EV_MATURATION, code, age, age + 1, -1)
            push(fd, seq)
            continue
        # arrow on {x_code, y_code}
        xc, yc = fd.x_code, fd.y_code
        ax_ = ages.get(xc)
        ay_ = ages.get(yc)
        if ax_ is None and ay_ is None:
            continue  # dormant until an endpoint is reborn
        if _pure_growth:
            if ax_ is not None and ay_ is not None:
                continue  # interior edge never matters again
            src, tgt = (xc, yc) if ay_ is None else (yc, xc)
            if contains is None or contains(tgt, t):
                ages[tgt] = 1
                live += 1
                rec(t, EV_BIRTH, tgt, 0, 1, src)
                if first_hits is not None:
                    first_hits.setdefault(tgt - delta, t - t_off)
                activate_site(tgt, t, strict=True)
            else:
                traj.boundary_hit = True
                push(fd, seq)
            continue
        if ax_ is not None and ay_ is not None:
            continue  # saturated: sleeps until an endpoint dies
        if ax_ is not None:
            src, tgt, k_age = xc, yc, ax_
        else:
            src, tgt, k_age = yc, xc, ay_
        u = fd.marks[fd.pos - 1]
        if u <= thr[k_age if k_age < m_cap else m_cap]:
            if contains is None or contains(tgt, t):
                ages[tgt] = 1
                live += 1
                rec(t, EV_BIRTH, tgt, 0, 1, src)
                if first_hits is not None:
                    first_hits.setdefault(tgt - delta, t - t_off)
                activate_site(tgt, t, strict=True)
                continue  # edge just saturated: sleeps until a death
            traj.boundary_hit = True
        push(fd, seq)

    while bp_i < len(bps) and bps[bp_i] < abs_end:
        cull(bps[bp_i])
        bp_i += 1
    traj.final = {unpack_site(c - delta, d): a for c, a in ages.items()}
    return traj


def richardson_evolve(omega, A0: Iterable[Site], t_end: float, *,
                      region: Region | None = None, t_start: float = 0.0,
                      record: bool = True, track_first_hits: bool = False) -> Trajectory:
    """Pure-growth domination process: every arrow counts, nothing ever dies."""
    f = {tuple(x): 1 for x in A0}
    return evolve(omega, f, t_end, region=region, t_start=t_start,
                  record=record, track_first_hits=track_first_hits,
                  _pure_growth=True)


def krone_params(lam: float, gamma: float, dimension: int = 1,
                 base_rate: float | None = None) -> ModelParams:
    """Two-stage parameters: age 1 is sterile young, ages >= 2 breed at lam."""
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    return ModelParams(dimension=dimension,
                       profile=AgeProfile(head=(0.0, lam), tail=lam),
                       gamma=gamma, base_rate=base_rate)


def hold_semigroup_check(omega, f: Config, s: float, t: float,
                         region: Region | None = None) -> bool:
    """Trajectorial semigroup identity: evolving t+s equals restart at t."""
    direct = evolve(omega, f, t + s, region=region, record=False).final
    mid = evolve(omega, f, t, region=region, record=False).final
    stage = region
    if region is not None and region.breakpoints:
        stage = region.shift_time(-t)
    replay = evolve(omega.shift_time(t), mid, s, region=stage, record=False).final
    return direct == replay


# ---------------------------------------------------------------------------
# direct (generator-driven) engine for cross-validation
# ---------------------------------------------------------------------------

def evolve_direct(params: ModelParams, f: Config, t_end: float, seed: int, *,
                  region: Region | None = None, record: bool = True,
                  stop_when_empty: bool = False) -> Trajectory:
    """Next-event (Gillespie) sampling of the same Markov dynamics.

    Independent of the graphical construction: transition rates come straight
    from the generator (deaths at 1, maturations at gamma, a dead site is
    born at the sum of lambda_age over its living neighbors) and each event
    is drawn from a PCG64 stream.  Distributionally equal to `evolve` at any
    fixed time; meant for cross-checks on small systems, not large runs.
    """
    validate_config(f, params.dimension)
    rng = np.random.default_rng(seed)
    d = params.dimension
    gamma = params.gamma
    rate = params.profile.rate
    traj = Trajectory(d, f, 0.0, t_end)
    traj.recorded = record

    inside = (lambda x: True) if region is None else (lambda x: region.contains(x, 0.0))
    if any(not inside(x) for x in f):
        raise ValueError("initial support outside region")
    ages: dict[Site, int] = dict(f)

    def neighbors_of(x: Site):
        for i in range(d):
            yield x[:i] + (x[i] - 1,) + x[i + 1:]
            yield x[:i] + (x[i] + 1,) + x[i + 1:]

    def rec(t, kind, site, before, after):
        if record:
            traj._ts.append(t)
            traj._kinds.append(kind)
            traj._sites.append(pack_site(site))
            traj._before.append(before)
            traj._after.append(after)
            traj._src.append(-1)

    t = 0.0
    if not ages:
        traj.extinction_time = 0.0
    while ages:
        alive = sorted(ages)
        frontier: list[tuple[Site, float]] = []
        seen = set()
        for x in alive:
            for nb in neighbors_of(x):
                if nb not in ages and nb not in seen and inside(nb):
                    seen.add(nb)
                    r = sum(rate(ages.get(z, 0)) for z in neighbors_of(nb))
                    if r > 0:
                        frontier.append((nb, r))
        n = len(alive)
        total = n * (1.0 + gamma) + sum(r for _, r in frontier)
        t += rng.exponential(1.0 / total)
        if t >= t_end:
            break
        u = rng.random() * total
        if u < n:
            x = alive[int(u)]
            age = ages.pop(x)
            rec(t, EV_DEATH, x, age, 0)
            if not ages:
                traj.extinction_time = t
                if stop_when_empty:
                    break
        elif u < n * (1.0 + gamma):
            x = alive[int((u - n) / gamma)]
            ages[x] += 1
            rec(t, EV_MATURATION, x, ages[x] - 1, ages[x])
        else:
            u -= n * (1.0 + gamma)
            for nb, r in frontier:
                if u < r:
                    ages[nb] = 1
                    rec(t, EV_BIRTH, nb, 0, 1)
                    break
                u -= r
    traj.final = dict(ages)
    return traj
