"""Batch entry point: config parsing, experiment dispatch, CSV emission.

Exit codes: 0 success, 2 configuration/usage error, 3 validation-suite
failure.  Every emitted table carries a JSON sidecar with the seed, the
model parameters, the caps, and a hash of the configuration text; outputs
are byte-identical across reruns and across --threads settings.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .engine import evolve, krone_params, export_trajectory_csv
from .lattice import centered_box
from .observables import sigma_csv_header
from .omega import Omega, derive_seed
from .reporting import config_hash, fmt, params_meta, write_csv
from .stats import wilson_self_test

COMMANDS = ("validate", "survive", "tails", "K", "sigma", "residual", "mu",
            "shape", "block", "macro", "restart", "perco", "oracle", "krone",
            "trace")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="agecp",
        description="Monte Carlo lab for the contact process with aging")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI-style run configuration")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--trials", type=int, default=None)
    common.add_argument("--threads", type=int, default=None)
    common.add_argument("--out", default=None, help="output directory")

    sub.add_parser("validate", parents=[common],
                   help="pathwise invariant suite").add_argument(
        "--quick", action="store_true", help="100 scenarios instead of 1000")
    for name, hlp in [
            ("survive", "survival probability at t_max"),
            ("tails", "conditioned extinction tail fit"),
            ("K", "essential hitting recursion depth tail"),
            ("sigma", "sigma vs hitting-time gap per distance"),
            ("residual", "subadditivity residual r(x, y)"),
            ("mu", "directional growth norm estimates"),
            ("shape", "d=2 shape snapshot"),
            ("block", "finite space-time block event estimates"),
            ("macro", "macroscopic percolation field builds"),
            ("restart", "restart procedure outcomes"),
            ("perco", "generic oriented percolation"),
            ("krone", "two-stage specialization checks")]:
        sub.add_parser(name, parents=[common], help=hlp)
    orc = sub.add_parser("oracle", parents=[common],
                         help="exact uniformization oracle on a small path")
    orc.add_argument("--sites", type=int, default=3)
    orc.add_argument("--cap", type=int, default=2)
    orc.add_argument("--at", type=float, default=1.0)
    trc = sub.add_parser("trace", parents=[common],
                         help="event-log export of one trajectory")
    trc.add_argument("--t", type=float, default=5.0)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command is None:
        _parser().print_usage()
        return 2
    try:
        overrides = {"seed": args.seed, "trials": args.trials,
                     "threads": args.threads,
                     "out_dir": Path(args.out) if args.out else None}
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return _dispatch(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


def _meta(cfg: RunConfig, **extra) -> dict:
    meta = {"seed": cfg.seed, "trials": cfg.trials, "t_max": cfg.t_max,
            "config_hash": config_hash(cfg.raw_text),
            "params": params_meta(cfg.params),
            "conf_speed": cfg.budget.conf_speed,
            "pregen_speed": cfg.budget.pregen_speed}
    meta.update(extra)
    return meta


def _dispatch(args, cfg: RunConfig) -> int:
    out = cfg.out_dir
    cmd = args.command
    if cmd == "validate":
        from .validation import run_structural_suite
        n = 100 if getattr(args, "quick", False) else 1000
        ok_w, cov = wilson_self_test(seed=cfg.seed)
        print(f"wilson self-test coverage: {cov:.3f} ({'ok' if ok_w else 'FAIL'})")
        rep = run_structural_suite(n, seed=cfg.seed, progress=max(50, n // 10))
        print(f"{rep.scenarios} scenarios, {rep.checks} checks, "
              f"{len(rep.violations)} violations")
        for v in rep.violations[:20]:
            print("  violation:", v)
        return 0 if (rep.ok and ok_w) else 3

    if cmd == "survive":
        from .experiments import estimate_survival
        res = estimate_survival(cfg.params, None, cfg.trials, cfg.t_max,
                                seed=cfg.seed, threads=cfg.threads,
                                budget=cfg.budget)
        write_csv(out / "survival.csv", "trial,seed,alive_at_Tmax", res.rows,
                  _meta(cfg, rho_hat=res.rho_hat, interval=res.estimate.interval,
                        boundary_hits=res.boundary_hits, schema="survival"))
        print(f"rho_hat = {res.rho_hat:.4f}  wilson {res.estimate.interval}")
        return 0

    if cmd == "tails":
        from .experiments import fit_conditioned_extinction_tail
        fit = fit_conditioned_extinction_tail(
            cfg.params, None, cfg.trials, cfg.t_grid, cfg.t_max,
            seed=cfg.seed, threads=cfg.threads, budget=cfg.budget)
        rows = list(zip(fit.grid, fit.survival_freq, fit.counts))
        write_csv(out / "tails.csv", "t,freq,count", rows,
                  _meta(cfg, rate_b=fit.rate_b, prefactor_a=fit.prefactor_a,
                        r_squared=fit.r_squared, warnings=fit.warnings,
                        schema="tail"))
        print(f"B = {fit.rate_b:.4f}, A = {fit.prefactor_a:.4f}, "
              f"R^2 = {fit.r_squared:.4f}, warnings: {len(fit.warnings)}")
        return 0

    if cmd == "K":
        from .experiments import estimate_survival, measure_k_tail
        rho = estimate_survival(cfg.params, None, max(400, cfg.trials // 4),
                                cfg.t_max, seed=cfg.seed ^ 0xA11CE,
                                threads=cfg.threads, budget=cfg.budget).rho_hat
        res = measure_k_tail(cfg.params, cfg.x_site, cfg.trials, cfg.t_max,
                             max_k=cfg.k_max, seed=cfg.seed, rho_hat=rho,
                             threads=cfg.threads, budget=cfg.budget)
        write_csv(out / "k_traces.csv", res.rows[0], res.rows[1:],
                  _meta(cfg, rho_hat=rho, schema="sigma-trace"))
        rows = [(k, f, (1 - rho) ** k)
                for k, f in zip(res.ks, res.tail_freq)]
        write_csv(out / "k_tail.csv", "k,freq,geom_bound", rows,
                  _meta(cfg, rho_hat=rho, surviving=res.surviving,
                        schema="k-tail"))
        print(f"surviving {res.surviving}/{res.trials_run}; "
              f"tail {['%.3f' % f for f in res.tail_freq]}")
        return 0

    if cmd == "sigma":
        from .experiments import measure_sigma_t_gap
        res = measure_sigma_t_gap(cfg.params, cfg.direction, cfg.n_list,
                                  cfg.trials, cfg.t_max, seed=cfg.seed,
                                  threads=cfg.threads, budget=cfg.budget)
        write_csv(out / "sigma_gap.csv", "trial,seed,n,sigma,t,gap_over_n",
                  res.rows, _meta(cfg, medians=res.medians, q90=res.q90,
                                  counts=res.counts, schema="sigma-gap"))
        print("medians:", {n: round(v, 4) for n, v in res.medians.items()})
        return 0

    if cmd == "residual":
        from .experiments import measure_subadditivity_residual
        res = measure_subadditivity_residual(
            cfg.params, cfg.x_site, cfg.y_site, cfg.trials, cfg.t_max,
            seed=cfg.seed, threads=cfg.threads, budget=cfg.budget)
        write_csv(out / "residual.csv",
                  "trial,seed,sigma_x,sigma_y_shifted,sigma_xy,r", res.rows,
                  _meta(cfg, grid=res.grid, tail=res.tail_freq,
                        correlation=res.correlation, used=res.used,
                        excluded=res.excluded, schema="residual"))
        print(f"used {res.used} (excluded {res.excluded}); "
              f"corr = {res.correlation:.4f}; tail {res.tail_freq}")
        return 0

    if cmd == "mu":
        from .experiments import estimate_mu
        res = estimate_mu(cfg.params, cfg.direction, cfg.n_list, cfg.trials,
                          cfg.t_max, seed=cfg.seed, threads=cfg.threads,
                          budget=cfg.budget)
        rows = []
        for n in res.n_list:
            sm, sc_, sn = res.sigma_over_n[n]
            tm, tc, tn = res.t_over_n[n]
            gm, gc, gn = res.sigma_over_n_neg[n]
            rows.append((n, sm, sc_, sn, tm, tc, tn, gm, gc, gn))
        write_csv(out / "mu.csv",
                  "n,sigma_over_n,sigma_ci,sigma_count,t_over_n,t_ci,t_count,"
                  "sigma_neg_over_n,sigma_neg_ci,sigma_neg_count", rows,
                  _meta(cfg, mu_hat=res.mu_hat, mu_hat_neg=res.mu_hat_neg,
                        schema="mu"))
        print(f"mu_hat = {res.mu_hat:.4f} (opposite {res.mu_hat_neg:.4f})")
        return 0

    if cmd == "shape":
        from .experiments import shape_snapshot
        if cfg.params.dimension != 2:
            raise ConfigError("shape requires dimension = 2")
        res = shape_snapshot(cfg.params, cfg.shape_t, cfg.trials,
                             seed=cfg.seed, threads=cfg.threads,
                             budget=cfg.budget, eps_grid=cfg.eps_grid)
        write_csv(out / "shape_cloud.csv", "trial,x0,x1", res.cloud,
                  _meta(cfg, t=res.t, surviving=res.surviving,
                        schema="shape-cloud"))
        dir_rows = [(u[0], u[1], *res.radii[u][:2], res.radii[u][2],
                     res.mu_hat[u]) for u in res.directions]
        write_csv(out / "shape_directions.csv",
                  "d0,d1,radius,radius_ci,count,mu_hat", dir_rows,
                  _meta(cfg, t=res.t, schema="shape-directions"))
        inc_rows = [(eps, *res.inclusion_fractions[eps])
                    for eps in sorted(res.inclusion_fractions)]
        write_csv(out / "shape_inclusions.csv", "eps,inner_frac,outer_frac",
                  inc_rows, _meta(cfg, t=res.t, surviving=res.surviving,
                                  schema="shape-inclusions"))
        print(f"surviving {res.surviving}/{res.trials_run}; inclusions "
              f"{res.inclusion_fractions}")
        return 0

    if cmd == "block":
        from .renormalization import estimate_B1
        schedule = cfg.schedule or (cfg.geometry,)
        rows = []
        for g in schedule:
            est = estimate_B1(cfg.params, g, cfg.trials, seed=cfg.seed,
                              worst_case=cfg.worst_case)
            lo, hi = est.interval
            rows.append((g.n, g.a, g.b, est.p_hat, lo, hi, est.trials))
            print(f"(n={g.n},a={g.a},b={g.b}): {est.p_hat:.4f} "
                  f"[{lo:.4f},{hi:.4f}]")
        write_csv(out / "block.csv", "n,a,b,p_hat,wilson_lo,wilson_hi,trials",
                  rows, _meta(cfg, worst_case=cfg.worst_case, schema="block"))
        return 0

    if cmd == "macro":
        return _run_macro(cfg)

    if cmd == "restart":
        return _run_restart_cmd(cfg)

    if cmd == "perco":
        from .renormalization import oriented_percolation
        rows = []
        # reuse t_grid as the p grid when provided in (0,1]
        ps = [p for p in cfg.t_grid if 0 <= p <= 1] or [0.7, 0.8, 0.9]
        for p in ps:
            surv = 0
            taus = []
            for i in range(cfg.trials):
                r = oriented_percolation(p, int(cfg.t_max),
                                         seed=derive_seed(cfg.seed, i))
                surv += r.survived
                if r.tau is not None:
                    taus.append(r.tau)
                rows.append((p, i, int(r.survived),
                             -1 if r.tau is None else r.tau,
                             r.eta_sizes[-1]))
            print(f"p={p}: survival {surv}/{cfg.trials}")
        write_csv(out / "perco.csv", "p,trial,survived,tau,eta_last", rows,
                  _meta(cfg, levels=int(cfg.t_max), schema="perco"))
        return 0

    if cmd == "oracle":
        from .oracle import OracleSpec, p_nonempty, site_marginals
        d = cfg.params.dimension
        if d != 1:
            raise ConfigError("the oracle path is one-dimensional")
        k = args.sites
        sites = tuple((i - k // 2,) for i in range(k))
        spec = OracleSpec(sites=sites, age_cap=args.cap, params=cfg.params)
        mid = {(0,): min(args.cap, 2)}
        pn, err = p_nonempty(spec, mid, args.at)
        marg = site_marginals(spec, mid, args.at)
        rows = [(str(x[0]), marg[x]) for x in sites]
        write_csv(out / "oracle.csv", "site,p_alive", rows,
                  _meta(cfg, p_nonempty=pn, error_bound=err, t=args.at,
                        age_cap=args.cap, schema="oracle"))
        print(f"P(nonempty at {args.at}) = {pn:.10f} (err <= {err:.2e})")
        return 0

    if cmd == "krone":
        return _run_krone(cfg)

    if cmd == "trace":
        om = Omega(seed=cfg.seed, params=cfg.params, horizon=args.t + 1.0)
        region = cfg.budget.region(cfg.params.dimension, args.t)
        traj = evolve(om, {(0,) * cfg.params.dimension: 1}, args.t,
                      region=region)
        out.mkdir(parents=True, exist_ok=True)
        path = out / "trace.csv"
        export_trajectory_csv(traj, path)
        sidecar = _meta(cfg, t=args.t, n_events=traj.n_events, schema="trace")
        write_csv(out / "trace_summary.csv", "n_events,extinct_at",
                  [(traj.n_events, traj.extinction_time)], sidecar)
        print(f"wrote {path} ({traj.n_events} events)")
        return 0

    print(f"unknown command {cmd}", file=sys.stderr)
    return 2


def _run_macro(cfg: RunConfig) -> int:
    from .renormalization import build_macro_field, estimate_block_success
    from .experiments import RunBudget
    g = cfg.geometry
    eps = cfg.epsilon_pad
    if eps is None:
        pilot = estimate_block_success(cfg.params, g, cfg.pilot_trials,
                                       seed=cfg.seed ^ 0xF00D, staircase=True)
        eps = max(1e-6, 1.0 - pilot.p_hat)
        print(f"pilot staircase success {pilot.p_hat:.3f} -> epsilon_pad {eps:.3f}")
    anchor_rows = []
    bit_rows = []
    horizon = g.level_height * cfg.k_levels + g.b + 2.0
    for i in range(cfg.trials):
        s = derive_seed(cfg.seed, i)
        om = Omega(seed=s, params=cfg.params, horizon=horizon)
        fld = build_macro_field(om, g, cfg.k_levels, eps, pad_seed=s)
        for (j, k), anc in sorted(fld.anchors.items()):
            if anc is None:
                anchor_rows.append((i, k, j, *("",) * cfg.params.dimension, "", 1))
            else:
                site, t = anc
                anchor_rows.append((i, k, j, *site, t, 0))
        for (k, j, direction), (bit, source) in sorted(fld.bits.items()):
            bit_rows.append((i, k, j, "+" if direction > 0 else "-", bit, source))
    d = cfg.params.dimension
    ycols = ",".join(f"y{i}" for i in range(d))
    write_csv(cfg.out_dir / "macro_anchors.csv",
              f"trial,level,j,{ycols},t,dagger", anchor_rows,
              _meta(cfg, geometry=(g.n, g.a, g.b), epsilon_pad=eps,
                    k_levels=cfg.k_levels, schema="macro-anchors"))
    write_csv(cfg.out_dir / "macro_bits.csv", "trial,level,j,dir,bit,source",
              bit_rows, _meta(cfg, geometry=(g.n, g.a, g.b), epsilon_pad=eps,
                              schema="macro-bits"))
    print(f"built {cfg.trials} fields at (n={g.n},a={g.a},b={g.b}), "
          f"epsilon_pad={eps:.3f}")
    return 0


def _run_restart_cmd(cfg: RunConfig) -> int:
    from .renormalization import estimate_block_success, run_restart
    g = cfg.geometry
    eps = cfg.epsilon_pad
    if eps is None:
        pilot = estimate_block_success(cfg.params, g, cfg.pilot_trials,
                                       seed=cfg.seed ^ 0xF00D, staircase=True)
        eps = max(1e-6, 1.0 - pilot.p_hat)
    d = cfg.params.dimension
    horizon = cfg.t_max + g.level_height * (cfg.k_levels + 1) + 2.0
    region = cfg.budget.region(d, horizon)
    rows = []
    for i in range(cfg.trials):
        s = derive_seed(cfg.seed, i)
        om = Omega(seed=s, params=cfg.params, horizon=horizon)
        out = run_restart(om, {(0,) * d: 1}, g, cfg.t_max,
                          k_levels=cfg.k_levels, epsilon_pad=eps,
                          region=region)
        ystr = "" if out.y is None else ";".join(str(c) for c in out.y)
        rows.append((i, s, out.sigma_restart, ystr, out.iterations,
                     int(out.censored),
                     "" if out.lifetime is None else out.lifetime))
    write_csv(cfg.out_dir / "restart.csv",
              "trial,seed,sigma_restart,y,iterations,censored,lifetime", rows,
              _meta(cfg, geometry=(g.n, g.a, g.b), k_levels=cfg.k_levels,
                    epsilon_pad=eps, schema="restart"))
    certified = sum(1 for r in rows if r[3] != "")
    print(f"{certified}/{cfg.trials} runs certified by a surviving percolation")
    return 0


def _run_krone(cfg: RunConfig) -> int:
    """Two-stage specialization: sterile young, collapse to {young, adult}."""
    lam = cfg.params.profile.tail
    params = krone_params(lam, cfg.params.gamma, cfg.params.dimension)
    d = params.dimension
    rows = []
    violations = 0
    for i in range(max(10, cfg.trials // 20)):
        s = derive_seed(cfg.seed, i)
        om = Omega(seed=s, params=params, horizon=cfg.t_max + 1.0)
        region = cfg.budget.region(d, cfg.t_max)
        traj = evolve(om, {(0,) * d: 2}, cfg.t_max, region=region,
                      stop_when_empty=True)
        # sequential replay: every birth must come from an adult (age >= 2)
        state = {x: a for x, a in traj.initial.items()}
        for t, kind, site, before, after, src in traj.events():
            if kind == "birth" and state.get(src, 0) < 2:
                violations += 1
            if after == 0:
                state.pop(site, None)
            else:
                state[site] = after
        final = traj.final
        young = sum(1 for a in final.values() if a == 1)
        adult = sum(1 for a in final.values() if a >= 2)
        rows.append((i, s, young, adult, traj.n_events))
    write_csv(cfg.out_dir / "krone.csv", "trial,seed,young,adult,n_events",
              rows, _meta(cfg, sterile_young_violations=violations,
                          schema="krone"))
    print(f"sterile-young violations: {violations} (must be 0)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
