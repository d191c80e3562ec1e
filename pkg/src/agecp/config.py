"""Run configuration: flat key = value files with section headers.

The format is INI-style (configparser) because experiments carry ~15 knobs;
see README for the documented sections.  Missing sections fall back to
defaults; every value used downstream is validated here so config errors
surface before any simulation starts.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .engine import krone_params
from .experiments import RunBudget
from .omega import AgeProfile, ModelParams
from .renormalization import BlockGeometry


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    params: ModelParams
    seed: int = 0
    trials: int = 1000
    t_max: float = 40.0
    threads: int = 1
    out_dir: Path = Path("out")
    budget: RunBudget = field(default_factory=RunBudget)
    # grids
    t_grid: tuple[float, ...] = (2.0, 3.0, 4.0, 5.0, 7.0)
    n_list: tuple[int, ...] = (10, 20, 30, 40)
    direction: tuple[int, ...] = (1,)
    x_site: tuple[int, ...] = (1,)
    y_site: tuple[int, ...] = (1,)
    c_grid: tuple[float, ...] = (1.0, 1.5, 2.0, 2.5, 3.0)
    eps_grid: tuple[float, ...] = (0.15, 0.25, 0.4)
    k_max: int = 5
    shape_t: float = 40.0
    # block geometry
    geometry: BlockGeometry = field(default_factory=lambda: BlockGeometry(1, 2, 1))
    k_levels: int = 40
    epsilon_pad: float | None = None
    pilot_trials: int = 200
    schedule: tuple[BlockGeometry, ...] = ()
    worst_case: bool = False
    # bookkeeping
    raw_text: str = ""


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(v) for v in s.replace(";", ",").split(",") if v.strip())


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(v) for v in s.replace(";", ",").split(",") if v.strip())


def _geometry(token: str) -> BlockGeometry:
    parts = [int(v) for v in token.strip().split(":")]
    if len(parts) != 3:
        raise ConfigError(f"geometry must be n:a:b, got {token!r}")
    return BlockGeometry(*parts)


def load_config(path: str | Path | None, overrides: dict | None = None) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    text = ""
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file {p} not found")
        text = p.read_text()
        cp.read_string(text)
    try:
        return _build(cp, text, overrides or {})
    except (ValueError, KeyError, configparser.Error) as exc:
        raise ConfigError(str(exc)) from exc


def _build(cp: configparser.ConfigParser, text: str, overrides: dict) -> RunConfig:
    m = cp["model"] if cp.has_section("model") else {}
    d = int(m.get("dimension", 1))
    if "profile_head" in m or "profile_tail" in m:
        head = _floats(m.get("profile_head", "")) if m.get("profile_head") else ()
        tail = float(m.get("profile_tail", head[-1] if head else 0.0))
        profile = AgeProfile(head=head, tail=tail)
        params = ModelParams(
            dimension=d, profile=profile, gamma=float(m.get("gamma", 1.0)),
            base_rate=float(m["base_rate"]) if m.get("base_rate") else None,
            gamma_base=float(m["gamma_base"]) if m.get("gamma_base") else None)
    else:
        params = krone_params(float(m.get("lambda", 4.0)),
                              float(m.get("gamma", 2.0)), dimension=d)

    r = cp["run"] if cp.has_section("run") else {}
    budget = RunBudget(
        conf_speed=float(r.get("conf_speed", max(4.0, 1.5 * params.base_rate))),
        margin=int(r.get("margin", 8)),
        pregen_speed=float(r["pregen_speed"]) if r.get("pregen_speed") else None,
        probe_time=float(r.get("probe_time", 8.0)))
    cfg = RunConfig(
        params=params,
        seed=int(r.get("seed", 0)),
        trials=int(r.get("trials", 1000)),
        t_max=float(r.get("t_max", 40.0)),
        threads=int(r.get("threads", 1)),
        out_dir=Path(r.get("out_dir", "out")),
        budget=budget,
        raw_text=text)

    g = cp["grid"] if cp.has_section("grid") else {}
    if g:
        if g.get("t_grid"):
            cfg.t_grid = _floats(g["t_grid"])
        if g.get("n_list"):
            cfg.n_list = _ints(g["n_list"])
        if g.get("direction"):
            cfg.direction = _ints(g["direction"])
        if g.get("x"):
            cfg.x_site = _ints(g["x"])
        if g.get("y"):
            cfg.y_site = _ints(g["y"])
        if g.get("c_grid"):
            cfg.c_grid = _floats(g["c_grid"])
        if g.get("eps_grid"):
            cfg.eps_grid = _floats(g["eps_grid"])
        if g.get("k_max"):
            cfg.k_max = int(g["k_max"])
        if g.get("shape_t"):
            cfg.shape_t = float(g["shape_t"])

    b = cp["block"] if cp.has_section("block") else {}
    if b:
        if b.get("n") or b.get("a") or b.get("b"):
            cfg.geometry = BlockGeometry(int(b.get("n", 1)), int(b.get("a", 2)),
                                         int(b.get("b", 1)))
        if b.get("levels"):
            cfg.k_levels = int(b["levels"])
        if b.get("epsilon_pad"):
            cfg.epsilon_pad = float(b["epsilon_pad"])
        if b.get("pilot_trials"):
            cfg.pilot_trials = int(b["pilot_trials"])
        if b.get("schedule"):
            cfg.schedule = tuple(_geometry(tok) for tok in b["schedule"].split(","))
        if b.get("worst_case"):
            cfg.worst_case = b["worst_case"].strip().lower() in ("1", "true", "yes")

    for key, val in overrides.items():
        if val is not None:
            setattr(cfg, key, val)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.trials < 1:
        raise ConfigError("trials must be >= 1")
    if cfg.t_max <= 0:
        raise ConfigError("t_max must be positive")
    if cfg.threads < 1:
        raise ConfigError("threads must be >= 1")
    for name in ("t_grid", "n_list", "c_grid", "eps_grid"):
        if not getattr(cfg, name):
            raise ConfigError(f"{name} must be nonempty")
    if len(cfg.direction) != cfg.params.dimension:
        raise ConfigError("direction has wrong dimension")
    for site_name in ("x_site", "y_site"):
        if len(getattr(cfg, site_name)) != cfg.params.dimension:
            raise ConfigError(f"{site_name} has wrong dimension")
