"""Pathwise structural test suite on randomized scenarios.

Each scenario draws parameters, initial configurations, nested truncation
boxes, a translation vector and a time split on one shared outcome, then
checks every coupling identity the graphical construction promises:
attractivity, additivity, pure-growth domination, truncation monotonicity,
profile monotonicity under a shared base rate, translation covariance, and
the trajectorial semigroup identity.  All comparisons are exact (integer
ages, shared event streams); any violation is a bug, never noise.

Scenarios run inside a common ambient box (the couplings are pathwise
statements under any shared region), which keeps a thousand of them within
the runtime target.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .engine import (StaticRegion, evolve, hold_semigroup_check,
                     richardson_evolve)
from .lattice import Config, Site, centered_box, join, leq
from .omega import AgeProfile, ModelParams, Omega, derive_seed


@dataclass
class ValidationReport:
    scenarios: int = 0
    checks: int = 0
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _random_profile(rng) -> AgeProfile:
    style = rng.integers(0, 3)
    if style == 0:
        lam = float(rng.uniform(0.5, 3.0))
        return AgeProfile(head=(), tail=lam)
    if style == 1:
        lam = float(rng.uniform(1.0, 3.0))
        return AgeProfile(head=(0.0, lam), tail=lam)
    a = float(rng.uniform(0.2, 1.5))
    b = a + float(rng.uniform(0.0, 1.5))
    return AgeProfile(head=(a, b), tail=b + float(rng.uniform(0.0, 1.0)))


def _random_config(rng, d: int, radius: int = 3) -> Config:
    n = int(rng.integers(1, 5))
    f: Config = {}
    for _ in range(n):
        x = tuple(int(rng.integers(-radius, radius + 1)) for _ in range(d))
        f[x] = int(rng.integers(1, 4))
    return f


def _translate(f: Config, x: Site) -> Config:
    return {tuple(a + b for a, b in zip(s, x)): age for s, age in f.items()}


def run_structural_suite(n_scenarios: int, *, seed: int = 0,
                         dims=(1, 2), t_cap: float = 20.0,
                         progress=None) -> ValidationReport:
    rep = ValidationReport()
    for sc in range(n_scenarios):
        rng = np.random.default_rng(derive_seed(seed ^ 0x5CE7A210, sc))
        d = int(dims[rng.integers(0, len(dims))])
        profile = _random_profile(rng)
        if d == 2:  # denser neighborhoods: keep the event volume comparable
            profile = AgeProfile(head=tuple(0.75 * v for v in profile.head),
                                 tail=0.75 * profile.tail)
        gamma = float(rng.uniform(0.5, 2.0))
        base_rate = profile.tail * float(rng.uniform(1.0, 1.5)) + 1e-9
        params = ModelParams(dimension=d, profile=profile, gamma=gamma,
                             base_rate=base_rate)
        t_end = float(rng.uniform(2.0, t_cap if d == 1 else min(t_cap, 9.0)))
        om_seed = derive_seed(seed ^ 0xABCD, sc)
        om = Omega(seed=om_seed, params=params, horizon=t_end + 1.0)
        ambient_r = 10 if d == 1 else 4
        ambient = StaticRegion(centered_box(ambient_r, d))
        f = _random_config(rng, d, radius=3)
        g = _random_config(rng, d, radius=3)
        fg = join(f, g)
        times = sorted(float(rng.uniform(0, t_end)) for _ in range(3)) + [t_end]

        def fail(prop: str, detail: str = "") -> None:
            rep.violations.append(f"scenario {sc} (d={d}, seed={om_seed}): "
                                  f"{prop} {detail}")

        tf = evolve(om, f, t_end, region=ambient)
        tg = evolve(om, g, t_end, region=ambient)
        tfg = evolve(om, fg, t_end, region=ambient)

        # attractivity and additivity at sampled times
        for t in times:
            cf, cg, cfg_ = tf.config_at(t), tg.config_at(t), tfg.config_at(t)
            rep.checks += 2
            if not (leq(cf, cfg_) and leq(cg, cfg_)):
                fail("attractivity", f"at t={t:.3f}")
            if join(cf, cg) != cfg_:
                fail("additivity", f"at t={t:.3f}")

        # pure-growth domination
        tr = richardson_evolve(om, list(f.keys()), t_end, region=ambient)
        for t in times:
            rep.checks += 1
            if not set(tf.config_at(t)) <= set(tr.config_at(t)):
                fail("growth domination", f"at t={t:.3f}")

        # truncation monotonicity on nested boxes inside the ambient
        r1 = 3
        r2 = int(rng.integers(r1 + 1, ambient_r + 1))
        reg1 = StaticRegion(centered_box(r1, d))
        reg2 = StaticRegion(centered_box(r2, d))
        t1 = evolve(om, f, t_end, region=reg1)
        t2 = evolve(om, f, t_end, region=reg2)
        for t in times:
            rep.checks += 2
            c1, c2, c3 = t1.config_at(t), t2.config_at(t), tf.config_at(t)
            if not leq(c1, c2):
                fail("truncation monotonicity (L <= L')", f"at t={t:.3f}")
            if not leq(c2, c3):
                fail("truncation monotonicity (L' <= ambient)", f"at t={t:.3f}")

        # profile monotonicity under a shared base rate
        shrink = float(rng.uniform(0.3, 0.9))
        low = AgeProfile(head=tuple(v * shrink for v in profile.head),
                         tail=profile.tail * shrink)
        params_low = ModelParams(dimension=d, profile=low, gamma=gamma,
                                 base_rate=base_rate)
        om_low = Omega(seed=om_seed, params=params_low, horizon=t_end + 1.0)
        t_low = evolve(om_low, f, t_end, region=ambient)
        for t in times:
            rep.checks += 1
            if not leq(t_low.config_at(t), tf.config_at(t)):
                fail("profile monotonicity", f"at t={t:.3f}")

        # translation covariance
        x_shift = tuple(int(rng.integers(-4, 5)) for _ in range(d))
        ta = evolve(om.shift_space(x_shift), f, t_end, region=ambient,
                    record=False)
        tb = evolve(om, _translate(f, x_shift), t_end,
                    region=StaticRegion(ambient.box.translate(x_shift)),
                    record=False)
        rep.checks += 1
        if _translate(ta.final, x_shift) != tb.final:
            fail("translation covariance")

        # trajectorial semigroup identity (restart replay; direct leg = tf)
        t_mid = float(rng.uniform(0.0, t_end))
        mid = tf.config_at(t_mid)
        replay = evolve(om.shift_time(t_mid), mid, t_end - t_mid,
                        region=ambient, record=False)
        rep.checks += 1
        if replay.final != tf.final:
            fail("semigroup identity", f"split at {t_mid:.3f}")

        rep.scenarios += 1
        if progress and (sc + 1) % progress == 0:
            print(f"  validated {sc + 1}/{n_scenarios} scenarios, "
                  f"{len(rep.violations)} violations")
    return rep
