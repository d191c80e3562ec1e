"""The five figure kinds rendered from simulator CSV output.

Rendering never touches simulator internals: every figure is a pure function
of the documented CSV schemas (plus the JSON sidecars for fit annotations),
and rerunning on identical inputs produces identical image bytes.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .schemas import SchemaError, floats, load_csv, load_sidecar

_SAVE = dict(dpi=130, metadata={"Software": "cpa-plots"})

AGE_COLORS = ["#bdbdbd", "#9ecae1", "#4292c6", "#08519c", "#08306b"]


def _age_color(age: int) -> str:
    return AGE_COLORS[min(age, len(AGE_COLORS) - 1)]


def render_spacetime(in_path: str, out_path: str, title: str | None = None) -> None:
    """Space-time diagram of one d=1 trajectory event log.

    Vertical segments show occupation colored by age, crosses mark deaths,
    dots maturations, horizontal arrows births (source to target).
    """
    rows = load_csv(in_path, ("t", "kind", "x0", "age_before", "age_after"))
    d2 = rows and "x1" in rows[0] and rows[0].get("x1") not in ("", None)
    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    if d2:
        # planar trajectory: birth locations colored by time
        xs = [int(r["x0"]) for r in rows if r["kind"] == "birth"]
        ys = [int(r["x1"]) for r in rows if r["kind"] == "birth"]
        ts = [float(r["t"]) for r in rows if r["kind"] == "birth"]
        sc = ax.scatter(xs, ys, c=ts, s=8, cmap="viridis")
        fig.colorbar(sc, ax=ax, label="birth time")
        ax.set_xlabel("x0")
        ax.set_ylabel("x1")
    else:
        t_end = max((float(r["t"]) for r in rows), default=1.0)
        open_at: dict[int, tuple[float, int]] = {}
        segments = []
        for r in rows:
            t, kind, x = float(r["t"]), r["kind"], int(r["x0"])
            before = int(r["age_before"])
            after = int(r["age_after"])
            if kind == "birth":
                open_at[x] = (t, 1)
                src = r.get("src0")
                if src not in ("", None):
                    ax.annotate("", xy=(x, t), xytext=(int(src), t),
                                arrowprops=dict(arrowstyle="->", lw=0.7,
                                                color="#888888"))
            elif kind == "maturation":
                if x in open_at:
                    t0, age = open_at[x]
                    segments.append((x, t0, t, age))
                open_at[x] = (t, after)
                ax.plot([x], [t], marker="o", ms=2.5, color="#444444")
            elif kind in ("death", "cull"):
                if x in open_at:
                    t0, age = open_at[x]
                    segments.append((x, t0, t, age))
                    del open_at[x]
                if kind == "death":
                    ax.plot([x], [t], marker="x", ms=5, color="#b30000")
        for x, (t0, age) in open_at.items():
            segments.append((x, t0, t_end, age))
        for x, t0, t1, age in segments:
            ax.plot([x, x], [t0, t1], lw=2.6, color=_age_color(age),
                    solid_capstyle="butt")
        ax.set_xlabel("site")
        ax.set_ylabel("time")
    ax.set_title(title or "space-time diagram")
    fig.tight_layout()
    fig.savefig(out_path, **_SAVE)
    plt.close(fig)


def render_tail(in_path: str, out_path: str, title: str | None = None) -> None:
    """Log-scale tail curve with the fitted exponential slope annotated."""
    rows = load_csv(in_path, ("t", "freq"))
    ts = np.array(floats(rows, "t"))
    freqs = np.array(floats(rows, "freq"))
    meta = load_sidecar(in_path)
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    pos = freqs > 0
    ax.semilogy(ts[pos], freqs[pos], "o-", ms=5, lw=1.2, color="#08519c",
                label="empirical")
    if "rate_b" in meta and "prefactor_a" in meta:
        b, a = float(meta["rate_b"]), float(meta["prefactor_a"])
        r2 = float(meta.get("r_squared", float("nan")))
    elif pos.sum() >= 2:
        slope, inter = np.polyfit(ts[pos], np.log(freqs[pos]), 1)
        b, a, r2 = -slope, math.exp(inter), float("nan")
    else:
        b = a = r2 = float("nan")
    if math.isfinite(b):
        grid = np.linspace(ts.min(), ts.max(), 50)
        ax.semilogy(grid, a * np.exp(-b * grid), "--", color="#b30000",
                    label=f"fit: {a:.3g} exp(-{b:.3g} t), R2={r2:.3f}")
    ax.set_xlabel("t")
    ax.set_ylabel("frequency")
    ax.legend(fontsize=8)
    ax.set_title(title or "tail fit")
    fig.tight_layout()
    fig.savefig(out_path, **_SAVE)
    plt.close(fig)


def render_mu(in_path: str, out_path: str, title: str | None = None) -> None:
    """Per-distance normalized essential-hitting and hitting time curves."""
    rows = load_csv(in_path, ("n", "sigma_over_n", "sigma_ci", "t_over_n",
                              "t_ci"))
    ns = np.array(floats(rows, "n"))
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for col, ci_col, label, color in [
            ("sigma_over_n", "sigma_ci", "sigma(nx)/n", "#08519c"),
            ("t_over_n", "t_ci", "t(nx)/n", "#41ab5d"),
            ("sigma_neg_over_n", "sigma_neg_ci", "sigma(-nx)/n", "#ef6548")]:
        if rows and col in rows[0]:
            vals = np.array(floats(rows, col))
            cis = np.array(floats(rows, ci_col))
            if len(vals) == len(ns):
                ax.errorbar(ns, vals, yerr=cis, fmt="o-", ms=4, lw=1.0,
                            capsize=3, label=label, color=color)
    meta = load_sidecar(in_path)
    if "mu_hat" in meta:
        ax.axhline(float(meta["mu_hat"]), ls=":", color="#666666",
                   label=f"mu_hat = {float(meta['mu_hat']):.3f}")
    ax.set_xlabel("n")
    ax.set_ylabel("time per step")
    ax.legend(fontsize=8)
    ax.set_title(title or "growth norm convergence")
    fig.tight_layout()
    fig.savefig(out_path, **_SAVE)
    plt.close(fig)


def render_shape(in_path: str, out_path: str, directions_path: str | None = None,
                 inclusions_path: str | None = None, eps: float = 0.25,
                 title: str | None = None) -> None:
    """Normalized reached-set cloud with the (1 +- eps) fitted ball overlay."""
    rows = load_csv(in_path, ("trial", "x0", "x1"))
    base = Path(in_path)
    if directions_path is None:
        cand = base.with_name("shape_directions.csv")
        directions_path = str(cand) if cand.exists() else None
    if inclusions_path is None:
        cand = base.with_name("shape_inclusions.csv")
        inclusions_path = str(cand) if cand.exists() else None
    fig, ax = plt.subplots(figsize=(5.8, 5.8))
    if rows:
        xs = np.array(floats(rows, "x0"))
        ys = np.array(floats(rows, "x1"))
        ax.scatter(xs, ys, s=2.0, alpha=0.25, color="#4292c6", linewidths=0,
                   label="normalized cloud")
    if directions_path:
        drows = load_csv(directions_path, ("d0", "d1", "radius"))
        pts = np.array([[float(r["d0"]), float(r["d1"])] for r in drows])
        radii = np.array(floats(drows, "radius"))
        units = pts / np.linalg.norm(pts, axis=1)[:, None]
        poly = units * radii[:, None]
        order = np.argsort(np.arctan2(poly[:, 1], poly[:, 0]))
        loop = np.vstack([poly[order], poly[order][:1]])
        for scale, style, color in [(1.0, "-", "#000000"),
                                    (1.0 + eps, "--", "#b30000"),
                                    (1.0 - eps, "--", "#b30000")]:
            ax.plot(loop[:, 0] * scale, loop[:, 1] * scale, style, lw=1.2,
                    color=color)
    label = f"ball x (1 +- {eps})"
    if inclusions_path:
        irows = load_csv(inclusions_path, ("eps", "inner_frac", "outer_frac"))
        for r in irows:
            if abs(float(r["eps"]) - eps) < 1e-9:
                label += (f"; inner {float(r['inner_frac']):.2f}, "
                          f"outer {float(r['outer_frac']):.2f}")
    ax.plot([], [], "--", color="#b30000", label=label)
    ax.set_aspect("equal")
    ax.set_xlabel("x/t")
    ax.set_ylabel("y/t")
    ax.legend(fontsize=7, loc="upper right")
    ax.set_title(title or "asymptotic shape snapshot")
    fig.tight_layout()
    fig.savefig(out_path, **_SAVE)
    plt.close(fig)


def render_macro(in_path: str, out_path: str, bits_path: str | None = None,
                 trial: int = 0, title: str | None = None) -> None:
    """Macroscopic lattice: anchors per level with open/closed edges."""
    rows = load_csv(in_path, ("trial", "level", "j", "dagger"))
    rows = [r for r in rows if int(r["trial"]) == trial]
    base = Path(in_path)
    if bits_path is None:
        cand = base.with_name("macro_bits.csv")
        bits_path = str(cand) if cand.exists() else None
    fig, ax = plt.subplots(figsize=(6.4, 4.6))
    if bits_path:
        brows = [r for r in load_csv(bits_path,
                                     ("trial", "level", "j", "dir", "bit"))
                 if int(r["trial"]) == trial]
        for r in brows:
            k, j = int(r["level"]), int(r["j"])
            j2 = j + (1 if r["dir"] == "+" else -1)
            is_open = r["bit"] == "1"
            ax.plot([j, j2], [k - 1, k],
                    "-" if is_open else ":",
                    lw=1.4 if is_open else 0.7,
                    color="#08519c" if is_open else "#bbbbbb", zorder=1)
    alive_j, alive_k, dead_j, dead_k = [], [], [], []
    for r in rows:
        (alive_j, alive_k) if r["dagger"] == "0" else (dead_j, dead_k)
        if r["dagger"] == "0":
            alive_j.append(int(r["j"]))
            alive_k.append(int(r["level"]))
        else:
            dead_j.append(int(r["j"]))
            dead_k.append(int(r["level"]))
    ax.scatter(alive_j, alive_k, s=34, color="#238b45", zorder=2,
               label="anchor delivered")
    ax.scatter(dead_j, dead_k, s=26, facecolors="none", edgecolors="#999999",
               zorder=2, label="dagger")
    ax.set_xlabel("macro site j")
    ax.set_ylabel("level")
    ax.legend(fontsize=8)
    ax.set_title(title or f"macroscopic percolation field (trial {trial})")
    fig.tight_layout()
    fig.savefig(out_path, **_SAVE)
    plt.close(fig)


RENDERERS = {
    "spacetime": render_spacetime,
    "tail": render_tail,
    "mu": render_mu,
    "shape": render_shape,
    "macro": render_macro,
}
