"""Measurement layer: lifetimes, hitting times, reached sets, and the
essential hitting time recursion.

The essential hitting time machinery follows the two interleaved sequences
u_0 = v_0 = 0,
    u_{k+1} = first time >= v_k at which the origin process holds x alive,
    v_k     = u_k + extinction time of a fresh single-site process started
              from x (age 1) at time u_k and driven by the same outcome via
              the time shift;
K is the first index whose v_K or u_{K+1} is declared infinite, and
sigma(x) = u_K.  "Infinite" is operationalized as "alive at the survival
window cap": the conditional extinction tail decays exponentially, so the
misclassification rate is controlled by the cap and every trace records
whether any such declaration was made (censored flag).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .engine import Region, Trajectory, evolve
from .lattice import Config, Site
from .omega import HorizonExceededError


@dataclass(frozen=True)
class LifetimeResult:
    """Extinction time if observed within the window, else censored at it."""

    extinct: bool
    time: float  # extinction time, or the censoring horizon

    @property
    def censored(self) -> bool:
        return not self.extinct


def lifetime(traj: Trajectory, t_max: float | None = None) -> LifetimeResult:
    """First time the configuration is empty, censored at t_max (or t_end)."""
    cap = traj.t_end if t_max is None else t_max
    ext = traj.extinction_time
    if ext is not None and ext <= cap:
        return LifetimeResult(True, ext)
    return LifetimeResult(False, cap)


def hitting_time(traj: Trajectory, x: Site) -> float | None:
    """First time x is alive; 0 for initially alive x; None if never seen."""
    if x in traj.initial:
        return traj.t_start
    iv = traj.alive_intervals(x)
    return iv[0][0] if iv else None


def occupied_region(traj: Trajectory, t: float) -> tuple[set[Site], set[Site]]:
    """(A_t, H_t): the living set at t and everything reached by time t."""
    if not traj.t_start <= t <= traj.t_end + 1e-9:
        raise ValueError(f"time {t} outside trajectory window")
    hits = traj.first_hits()
    h_t = {x for x, s in hits.items() if s <= t}
    return traj.support_at(t), h_t


@dataclass
class SigmaTrace:
    """One evaluation of the essential hitting time recursion at site x."""

    x: Site
    u: list[float] = field(default_factory=list)
    v: list[float] = field(default_factory=list)
    K: int = 0
    sigma: float = 0.0
    censored: bool = False
    degenerate: bool = False       # origin died without ever holding x
    survived: bool = False         # origin alive at its cap
    t_hit: float | None = None     # plain hitting time of x

    def csv_row(self, trial: int, seed: int) -> str:
        xs = ",".join(str(c) for c in self.x)
        th = "" if self.t_hit is None else f"{self.t_hit:.10g}"
        return (f"{trial},{seed},{xs},{self.K},{self.sigma:.10g},{th},"
                f"{int(self.censored)},{int(self.degenerate)}")


def sigma_csv_header(d: int) -> str:
    xs = ",".join(f"x{i}" for i in range(d))
    return f"trial,seed,{xs},K,sigma,t_x,censored,degenerate"


def _first_alive_at_or_after(intervals: Sequence[tuple[float, float]],
                             t: float) -> float | None:
    for a, b in intervals:
        if t < b:
            return t if t >= a else a
    return None


def essential_hitting(omega, x: Site, t_max: float, *,
                      t_surv: float | None = None,
                      region: Region | None = None,
                      origin: Trajectory | None = None) -> SigmaTrace:
    """Run the u/v recursion for one site on one outcome."""
    return essential_hitting_multi(omega, [x], t_max, t_surv=t_surv,
                                   region=region, origin=origin)[x]


def origin_run(omega, t_max: float, xs: Iterable[Site],
               region: Region | None = None) -> Trajectory:
    """The origin process (single site, age 1) with the given sites tracked."""
    d = omega.params.dimension
    zero = (0,) * d
    return evolve(omega, {zero: 1}, t_max, region=region, record=False,
                  track_sites=set(xs), stop_when_empty=True)


def essential_hitting_multi(omega, xs: Sequence[Site], t_max: float, *,
                            t_surv: float | None = None,
                            region: Region | None = None,
                            origin: Trajectory | None = None) -> dict[Site, SigmaTrace]:
    """u/v recursions for several sites sharing one origin trajectory.

    t_max caps the origin observation window; t_surv (default t_max) is the
    duration of each survival determination.  The omega horizon must cover
    t_max + t_surv.
    """
    t_surv = t_max if t_surv is None else t_surv
    if t_max + t_surv > omega.horizon + 1e-9:
        raise HorizonExceededError(
            f"recursion needs horizon {t_max + t_surv}, have {omega.horizon}")
    if origin is None:
        origin = origin_run(omega, t_max, xs, region=region)
    survived = origin.alive_at_end()
    ext = origin.extinction_time

    out: dict[Site, SigmaTrace] = {}
    for x in xs:
        intervals = origin.alive_intervals(x)
        trace = SigmaTrace(x=x, u=[0.0], v=[0.0], survived=survived)
        trace.t_hit = intervals[0][0] if intervals else None
        k = 0
        while True:
            u_next = _first_alive_at_or_after(intervals, trace.v[k])
            if u_next is None or trace.v[k] > t_max:
                # u_{k+1} infinite: genuinely so if the origin died, else
                # undetermined within the window
                trace.K = k
                trace.sigma = trace.u[k]
                if ext is None:
                    trace.censored = True
                elif k == 0:
                    trace.degenerate = True
                break
            trace.u.append(u_next)
            k += 1
            vrun = evolve(omega.shift_time(u_next), {x: 1}, t_surv,
                          region=region, record=False, stop_when_empty=True)
            if vrun.extinction_time is not None:
                trace.v.append(u_next + vrun.extinction_time)
            else:
                # survival determination hit its cap: v_k declared infinite
                trace.v.append(math.inf)
                trace.K = k
                trace.sigma = u_next
                trace.censored = True
                break
        out[x] = trace
    return out
