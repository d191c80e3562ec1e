"""Exact transient solver for small age-capped systems (validation oracle).

A finite site set with absorbing-dead boundary and ages collapsed at a cap c
(legitimate once the birth profile is constant beyond its head) is a finite
continuous-time Markov chain on (c+1)^{|sites|} states.  Its transient
distribution is computed by uniformization with an explicit truncation bound,
and the derived scalars (survival probability, per-site marginals) serve as
frozen reference values for both simulation engines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import sparse

from .lattice import Config, Site
from .omega import ModelParams

_MAX_STATES = 1_000_000


@dataclass(frozen=True)
class OracleSpec:
    """Explicit site set, age cap, and model parameters of the small chain."""

    sites: tuple[Site, ...]
    age_cap: int
    params: ModelParams

    def __post_init__(self) -> None:
        if self.age_cap < 1:
            raise ValueError("age cap must be >= 1")
        if self.age_cap < self.params.profile.saturation_age:
            raise ValueError("age cap below the profile head: rates would be wrong")
        if (self.age_cap + 1) ** len(self.sites) > _MAX_STATES:
            raise ValueError("state space too large for the oracle")
        for x in self.sites:
            if len(x) != self.params.dimension:
                raise ValueError(f"site {x} has wrong dimension")

    @property
    def n_states(self) -> int:
        return (self.age_cap + 1) ** len(self.sites)

    def state_index(self, ages: Sequence[int]) -> int:
        idx = 0
        for a in ages:
            idx = idx * (self.age_cap + 1) + min(a, self.age_cap)
        return idx

    def config_index(self, f: Config) -> int:
        return self.state_index([f.get(x, 0) for x in self.sites])


def build_generator(spec: OracleSpec) -> sparse.csr_matrix:
    """Sparse rate matrix over capped-age states; rows sum to zero."""
    sites = spec.sites
    n = len(sites)
    cap = spec.age_cap
    gamma = spec.params.gamma
    rate = spec.params.profile.rate
    nbr_idx: list[list[int]] = []
    pos = {x: i for i, x in enumerate(sites)}
    for x in sites:
        nbr_idx.append([pos[y] for y in
                        (x[:i] + (x[i] + dlt,) + x[i + 1:]
                         for i in range(len(x)) for dlt in (-1, 1))
                        if y in pos])

    rows, cols, vals = [], [], []
    radix = cap + 1
    total = radix ** n

    def decode(s: int) -> list[int]:
        out = [0] * n
        for i in range(n - 1, -1, -1):
            out[i] = s % radix
            s //= radix
        return out

    for s in range(total):
        ages = decode(s)
        diag = 0.0
        for i, a in enumerate(ages):
            if a >= 1:
                t = s - a * radix ** (n - 1 - i)  # death: age -> 0
                rows.append(s), cols.append(t), vals.append(1.0)
                diag += 1.0
                if a < cap:  # maturation within the cap; at the cap it is silent
                    t = s + radix ** (n - 1 - i)
                    rows.append(s), cols.append(t), vals.append(gamma)
                    diag += gamma
            else:
                b = sum(rate(ages[j]) for j in nbr_idx[i])
                if b > 0:
                    t = s + radix ** (n - 1 - i)  # birth at age 1
                    rows.append(s), cols.append(t), vals.append(b)
                    diag += b
        if diag:
            rows.append(s), cols.append(s), vals.append(-diag)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(total, total))


@dataclass(frozen=True)
class TransientResult:
    probs: np.ndarray
    error_bound: float

    def p_state(self, spec: OracleSpec, f: Config) -> float:
        return float(self.probs[spec.config_index(f)])


def transient_distribution(spec: OracleSpec, f: Config, t: float,
                           tol: float = 1e-8) -> TransientResult:
    """Distribution at time t by uniformization, truncated below tol."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    Q = build_generator(spec)
    U = float(-Q.diagonal().min())
    pi = np.zeros(spec.n_states)
    pi[spec.config_index(f)] = 1.0
    if t == 0 or U == 0:
        return TransientResult(pi, 0.0)
    a = U * t
    if a > 500.0:
        raise ValueError(f"uniformization constant U*t={a:.1f} too large")
    P = sparse.eye(spec.n_states, format="csr") + Q.multiply(1.0 / U)
    w = math.exp(-a)
    acc = w * pi
    mass = w
    vk = pi
    k = 0
    while 1.0 - mass > tol and k < 100_000:
        k += 1
        vk = vk @ P
        w *= a / k
        acc = acc + w * vk
        mass += w
    return TransientResult(acc, max(0.0, 1.0 - mass))


def p_nonempty(spec: OracleSpec, f: Config, t: float,
               tol: float = 1e-8) -> tuple[float, float]:
    """(P(nonempty at t), truncation error bound)."""
    res = transient_distribution(spec, f, t, tol)
    return 1.0 - float(res.probs[0]), res.error_bound


def site_marginals(spec: OracleSpec, f: Config, t: float,
                   tol: float = 1e-8) -> dict[Site, float]:
    """P(site alive at t) for each oracle site."""
    res = transient_distribution(spec, f, t, tol)
    radix = spec.age_cap + 1
    n = len(spec.sites)
    out = {}
    states = np.arange(spec.n_states)
    for i, x in enumerate(spec.sites):
        digit = (states // radix ** (n - 1 - i)) % radix
        out[x] = float(res.probs[digit >= 1].sum())
    return out
