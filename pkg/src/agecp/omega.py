"""Reproducible Poisson event substrate and its time/space translations.

One `Omega` value is a lazily materialized outcome of the whole event
environment: a rate-1 death process and a rate-gamma maturation process per
site, and a rate-lambda_base arrow process with independent uniform marks per
edge.  Every stream is a pure function of (seed, object identity, pane index):
pane p of an object owns a fixed slot block [p*B, (p+1)*B) of a counter-based
random stream keyed by (seed, kind, packed coordinates), so windows
concatenate consistently, two queries of the same window agree bit for bit,
and time/space shifts are plain re-indexing.  The raw stream is a
splitmix64-style avalanche of a strided counter, which vectorizes with no
per-object generator state; `pregenerate` materializes a whole box x horizon
in a few array passes and produces the identical events the lazy path would.

Window convention: a window [a, b] yields events with a <= t < b.

Maturation and arrow streams are generated at configurable base rates
(gamma_base >= gamma, base_rate >= lambda_infinity) and thinned by their
marks, which is what makes monotone couplings across different parameter
sequences pathwise statements on a shared outcome.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence, Tuple

import numpy as np

from .lattice import (Box, Site, check_dimension, edge_axis, edge_key,
                      pack_box_codes, pack_site)

PANE_LENGTH = 1.0

# stream kinds; arrows use kind ARROW0 + axis
DEATH = 1
MATURATION = 2
ARROW0 = 3

_PHI = 0x9E3779B97F4A7C15
_OBJ_SALT = 0xD1342543DE82EF95
_U64 = 0xFFFFFFFFFFFFFFFF
_TAIL_EPS = 1e-18  # per-pane probability of overflowing the event-count budget


def _mix64(x: int) -> int:
    """splitmix64 finalizer on a python int."""
    x &= _U64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _U64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _U64
    return x ^ (x >> 31)


_NP_M1 = np.uint64(0xBF58476D1CE4E5B9)
_NP_M2 = np.uint64(0x94D049BB133111EB)
_NP_PHI = np.uint64(_PHI)
_NP_OBJ_SALT = np.uint64(_OBJ_SALT)
_S30, _S27, _S31, _S11 = (np.uint64(s) for s in (30, 27, 31, 11))
_INV53 = 1.0 / (1 << 53)


def _mix_u01(x: np.ndarray) -> np.ndarray:
    """Vector splitmix64 finalizer mapped to uniforms in [0, 1)."""
    x ^= x >> _S30
    x *= _NP_M1
    x ^= x >> _S27
    x *= _NP_M2
    x ^= x >> _S31
    return (x >> _S11) * _INV53


def _uniforms(base: int, start: int, count: int) -> np.ndarray:
    """Uniforms at slots [start, start+count) of the stream with this base."""
    return _mix_u01(np.uint64(base) +
                    _NP_PHI * np.arange(start, start + count, dtype=np.uint64))


def derive_seed(master: int, i: int) -> int:
    """Stream seed of trial i under a master seed; trials share nothing."""
    return _mix64(((master & _U64) << 1) ^ _mix64(i * _PHI) ^ master)


class HorizonExceededError(RuntimeError):
    """A query or shift reached beyond the materialized time horizon."""


class ArrowEvent(NamedTuple):
    time: float
    mark: float


@dataclass(frozen=True)
class AgeProfile:
    """Birth-rate sequence: head (lambda_1..lambda_m) then constant tail.

    lambda_0 = 0 is implicit; the sequence must be nondecreasing and the tail
    is its finite limit.
    """

    head: Tuple[float, ...]
    tail: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "head", tuple(float(v) for v in self.head))
        object.__setattr__(self, "tail", float(self.tail))
        seq = self.head + (self.tail,)
        if any(v < 0 for v in seq):
            raise ValueError("birth rates must be nonnegative")
        if any(a > b for a, b in zip(seq, seq[1:])):
            raise ValueError(f"birth rates must be nondecreasing, got {seq}")

    @property
    def saturation_age(self) -> int:
        return len(self.head)

    def rate(self, age: int) -> float:
        if age <= 0:
            return 0.0
        if age <= len(self.head):
            return self.head[age - 1]
        return self.tail

    def thresholds(self, base_rate: float) -> np.ndarray:
        """thresholds[min(age, m+1)] = lambda_age / base_rate."""
        seq = (0.0,) + self.head + (self.tail,)
        if base_rate <= 0.0:
            return np.zeros(len(seq))
        return np.asarray(seq) / base_rate


def constant_profile(lam: float) -> AgeProfile:
    """Every living age breeds at rate lam (the classical contact process)."""
    return AgeProfile(head=(), tail=lam)


@dataclass(frozen=True)
class ModelParams:
    """Full parameter set of one run of the aging contact process."""

    dimension: int
    profile: AgeProfile
    gamma: float
    base_rate: float | None = None
    gamma_base: float | None = None

    def __post_init__(self) -> None:
        check_dimension(self.dimension)
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.base_rate is None:
            object.__setattr__(self, "base_rate", self.profile.tail)
        if self.base_rate < self.profile.tail:
            raise ValueError("base_rate must dominate the profile tail")
        if self.gamma_base is None:
            object.__setattr__(self, "gamma_base", self.gamma)
        if self.gamma_base < self.gamma:
            raise ValueError("gamma_base must dominate gamma")


def _poisson_cdf(lam: float) -> np.ndarray:
    """CDF array long enough that the tail mass beyond it is < _TAIL_EPS.

    Terminates on the term size, not the accumulated mass (which saturates at
    float resolution): past the mode the tail is below p_k / (1 - lam/k).
    """
    if lam <= 0.0:
        return np.array([1.0])
    probs = [math.exp(-lam)]
    k = 0
    while k < 400:
        k += 1
        probs.append(probs[-1] * lam / k)
        if k > lam + 1 and probs[-1] < _TAIL_EPS * (1.0 - lam / k):
            break
    return np.minimum(np.cumsum(probs), 1.0)


class _StreamSpec:
    """Per-kind pane layout: fixed slot budget and the Poisson count CDF.

    A pane with n events reads slot 0 for the count, slots 1..n+1 for the
    n+1 exponential spacings whose normalized partial sums are the (already
    sorted) event positions, and slots 2+n_max..2+n_max+n for the marks.
    """

    __slots__ = ("rate", "cdf", "n_max", "block")

    def __init__(self, rate: float, pane_length: float):
        self.rate = float(rate)
        self.cdf = _poisson_cdf(self.rate * pane_length)
        self.n_max = len(self.cdf) - 1
        self.block = 2 + 2 * self.n_max


_EMPTY = np.empty(0)


class Omega:
    """Deterministic event environment for one (seed, params, horizon)."""

    is_view = False

    def __init__(self, seed: int, params: ModelParams, horizon: float,
                 pane_length: float = PANE_LENGTH):
        if horizon <= 0:
            raise ValueError("horizon must be positive")
        self.seed = int(seed) & _U64
        self.params = params
        self.horizon = float(horizon)
        self.pane_length = float(pane_length)
        self._specs = {
            DEATH: _StreamSpec(1.0, pane_length),
            MATURATION: _StreamSpec(params.gamma_base, pane_length),
        }
        arrow_spec = _StreamSpec(params.base_rate, pane_length)
        for axis in range(params.dimension):
            self._specs[ARROW0 + axis] = arrow_spec
        self._mat_accept = (1.0 if params.gamma_base <= params.gamma
                            else params.gamma / params.gamma_base)
        # (kind, packed) -> list of blocks (p_lo, p_hi, offsets, times, marks)
        self._cache: dict = {}
        # kind -> list of bulk blocks from pregenerate()
        self._bulk_blocks: dict = {}
        self._bulk_codes: dict = {}
        self._chunk = 16

    # -- generation -----------------------------------------------------------

    def _stream_base(self, kind: int, packed: int) -> int:
        return _mix64(self.seed ^ _mix64(kind * _PHI)
                      ^ _mix64((packed * _OBJ_SALT + kind) & _U64))

    def _stream_bases_vec(self, kind: int, packed: np.ndarray) -> np.ndarray:
        def mixv(x):
            x = x.copy()
            x ^= x >> _S30
            x *= _NP_M1
            x ^= x >> _S27
            x *= _NP_M2
            x ^= x >> _S31
            return x
        inner = mixv(packed.astype(np.uint64) * _NP_OBJ_SALT + np.uint64(kind))
        k = np.uint64(_mix64(kind * _PHI))
        return mixv(np.uint64(self.seed) ^ k ^ inner)

    def _gen_block(self, kind: int, packed: int, p0: int):
        """Materialize panes [p0, p0+chunk) of one stream as a block."""
        spec = self._specs[kind]
        n_panes = self._chunk
        base = self._stream_base(kind, packed)
        u = _uniforms(base, p0 * spec.block,
                      n_panes * spec.block).reshape(n_panes, spec.block)
        counts = np.searchsorted(spec.cdf, u[:, 0], side="right")
        starts = np.zeros(n_panes + 1, dtype=np.int64)
        np.cumsum(counts, out=starts[1:])
        total = int(starts[-1])
        if total == 0:
            block = (p0, p0 + n_panes, starts, _EMPTY, _EMPTY)
        else:
            if counts.max() > spec.n_max:
                raise RuntimeError("pane event budget exceeded")
            # normalized partial sums of exponential spacings: sorted uniforms
            cs = np.cumsum(-np.log1p(-u[:, 1:2 + spec.n_max]), axis=1)
            tot = cs[np.arange(n_panes), counts]
            rows = np.repeat(np.arange(n_panes), counts)
            within = np.arange(total) - starts[rows]
            times = (cs[rows, within] / tot[rows] + (p0 + rows)) * self.pane_length
            marks = u[rows, 2 + spec.n_max + within]
            block = (p0, p0 + n_panes, starts, times, marks)
        self._cache.setdefault((kind, packed), []).append(block)
        return block

    def _span_from(self, kind: int, packed: int, pane: int):
        """Events of panes [pane, block_end): (times, marks, block_end)."""
        blocks = self._cache.get((kind, packed))
        if blocks is not None:
            for p_lo, p_hi, off, t, m in blocks:
                if p_lo <= pane < p_hi:
                    i = pane - p_lo
                    return t[off[i]:], m[off[i]:], p_hi
        for sorted_codes, order, P, offsets, obj_starts, times, marks in \
                self._bulk_blocks.get(kind, ()):
            if pane < P:
                pos = np.searchsorted(sorted_codes, packed)
                if pos < len(sorted_codes) and sorted_codes[pos] == packed:
                    row = order[pos]
                    s = obj_starts[row] + offsets[row, pane]
                    e = obj_starts[row + 1]
                    return times[s:e], marks[s:e], P
        p0 = (pane // self._chunk) * self._chunk
        p_lo, p_hi, off, t, m = self._gen_block(kind, packed, p0)
        i = pane - p_lo
        return t[off[i]:], m[off[i]:], p_hi

    def pregenerate(self, box: Box, t_hi: float,
                    maturations: bool = True) -> None:
        """Materialize the box's streams for panes [0, ceil(t_hi)) in bulk.

        Produces exactly the events the lazy path would, in a few vectorized
        passes; meant to be called once per run on its confinement box.
        Arrow streams are generated for every edge with an endpoint in the
        box (keyed by the smaller endpoint, so the box is padded by one).
        """
        if t_hi > self.horizon + 1e-9:
            raise HorizonExceededError(f"pregenerate to {t_hi} beyond horizon")
        d = self.params.dimension
        if box.dimension != d:
            raise ValueError("box dimension mismatch")
        P = -(-int(math.ceil(t_hi / self.pane_length)) // self._chunk) * self._chunk
        site_codes = pack_box_codes(box)
        pad = Box(tuple(l - 1 for l in box.lo), box.hi)
        edge_codes = pack_box_codes(pad)
        kinds = (DEATH, MATURATION) if maturations else (DEATH,)
        for kind in kinds:
            self._bulk(kind, site_codes, P)
        for axis in range(d):
            self._bulk(ARROW0 + axis, edge_codes, P)

    def _bulk(self, kind: int, codes: np.ndarray, P: int) -> None:
        spec = self._specs[kind]
        seen = self._bulk_codes.setdefault(kind, set())
        if seen:
            codes = codes[np.fromiter((int(c) not in seen for c in codes),
                                      dtype=bool, count=len(codes))]
        seen.update(int(c) for c in codes)
        n = len(codes)
        if n == 0:
            return
        bases = self._stream_bases_vec(kind, codes)
        blk = np.uint64(spec.block)
        pane_idx = np.arange(P, dtype=np.uint64)
        u0 = _mix_u01((bases[:, None] + _NP_PHI * (pane_idx * blk)[None, :]).ravel())
        counts = np.searchsorted(spec.cdf, u0, side="right").reshape(n, P)
        if counts.max(initial=0) > spec.n_max:
            raise RuntimeError("pane event budget exceeded")
        offsets = np.zeros((n, P + 1), dtype=np.int64)
        np.cumsum(counts, axis=1, out=offsets[:, 1:])
        totals = offsets[:, -1]
        cell_counts = counts.ravel()
        cell_starts = np.concatenate(([0], np.cumsum(cell_counts)))
        total = int(cell_starts[-1])
        if total:
            nz = np.flatnonzero(cell_counts)
            nz_counts = cell_counts[nz]
            nz_panes = (nz % P).astype(np.uint64)
            nz_bases = bases[nz // P]
            # spacing draws: n_c + 1 per nonzero pane, at slots 1..n_c+1
            dstarts = np.concatenate(([0], np.cumsum(nz_counts + 1)))
            drow = np.repeat(np.arange(len(nz)), nz_counts + 1)
            dwithin = np.arange(int(dstarts[-1])) - dstarts[drow]
            dslot = nz_panes[drow] * blk + np.uint64(1) + dwithin.astype(np.uint64)
            spacings = -np.log1p(-_mix_u01(nz_bases[drow] + _NP_PHI * dslot))
            # row-fresh prefix sums, matching the lazy path bit for bit
            pad = np.zeros((len(nz), spec.n_max + 1))
            pad[drow, dwithin] = spacings
            cs = np.cumsum(pad, axis=1)
            tot = cs[np.arange(len(nz)), nz_counts]
            estarts = np.concatenate(([0], np.cumsum(nz_counts)))
            erow = np.repeat(np.arange(len(nz)), nz_counts)
            ewithin = np.arange(total) - estarts[erow]
            mslot = (nz_panes[erow] * blk + np.uint64(2 + spec.n_max)
                     + ewithin.astype(np.uint64))
            times = (cs[erow, ewithin] / tot[erow]
                     + nz_panes[erow].astype(np.float64)) * self.pane_length
            marks = _mix_u01(nz_bases[erow] + _NP_PHI * mslot)
        else:
            times = marks = _EMPTY
        obj_starts = np.concatenate(([0], np.cumsum(totals)))
        order = np.argsort(codes, kind="stable")
        self._bulk_blocks.setdefault(kind, []).append(
            (codes[order].copy(), order, P, offsets, obj_starts, times, marks))

    def _window(self, kind: int, packed: int, a: float, b: float,
                with_marks: bool = False):
        if a < -1e-9 or b > self.horizon + 1e-9:
            raise HorizonExceededError(
                f"window [{a}, {b}] outside [0, {self.horizon}]")
        if b <= a:
            return (_EMPTY, _EMPTY) if with_marks else _EMPTY
        L = self.pane_length
        p_lo = max(0, int(math.floor(a / L + 1e-12)))
        p_hi = int(math.ceil(b / L - 1e-12))
        ts, ms = [], []
        p = p_lo
        while p < p_hi:
            t, m, p = self._span_from(kind, packed, p)
            ts.append(t)
            ms.append(m)
        if not ts:
            return (_EMPTY, _EMPTY) if with_marks else _EMPTY
        t = np.concatenate(ts) if len(ts) > 1 else ts[0]
        m = np.concatenate(ms) if len(ms) > 1 else ms[0]
        keep = (t >= a) & (t < b)
        if not keep.all():
            t, m = t[keep], m[keep]
        return (t, m) if with_marks else t

    # -- packed fast paths used by the engine ----------------------------------

    def _site_deaths(self, packed: int, a: float, b: float) -> np.ndarray:
        return self._window(DEATH, packed, a, b)

    def _site_maturations(self, packed: int, a: float, b: float) -> np.ndarray:
        t, m = self._window(MATURATION, packed, a, b, with_marks=True)
        if self._mat_accept >= 1.0 or len(t) == 0:
            return t
        return t[m <= self._mat_accept]

    def _edge_arrows(self, packed_min: int, axis: int, a: float, b: float):
        return self._window(ARROW0 + axis, packed_min, a, b, with_marks=True)

    # -- public, tuple-typed API -----------------------------------------------

    def death_times(self, x: Site, window: Sequence[float]) -> np.ndarray:
        """Arrival times of the rate-1 death clock of x inside the window."""
        self._check_site(x)
        return self._site_deaths(pack_site(x), float(window[0]), float(window[1]))

    def maturation_times(self, x: Site, window: Sequence[float]) -> np.ndarray:
        """Arrival times of the rate-gamma maturation clock of x."""
        self._check_site(x)
        return self._site_maturations(pack_site(x), float(window[0]), float(window[1]))

    def arrow_events(self, e: Tuple[Site, Site], window: Sequence[float]) -> list[ArrowEvent]:
        """Marked arrow arrivals on the (canonically oriented) edge e."""
        a, b = edge_key(*e)
        self._check_site(a)
        t, m = self._edge_arrows(pack_site(a), edge_axis(a, b),
                                 float(window[0]), float(window[1]))
        return [ArrowEvent(float(tt), float(mm)) for tt, mm in zip(t, m)]

    def shift_time(self, t: float) -> "OmegaView":
        return OmegaView(self, 0.0, None).shift_time(t)

    def shift_space(self, x: Site) -> "OmegaView":
        return OmegaView(self, 0.0, None).shift_space(x)

    def _check_site(self, x: Site) -> None:
        if len(x) != self.params.dimension:
            raise ValueError(f"site {x} has wrong dimension")

    def resolve(self):
        """(base omega, time offset, space offset) of this value."""
        return self, 0.0, (0,) * self.params.dimension


class OmegaView:
    """A time/space translate of a base Omega; queries delegate by offset.

    The view on window [a, b] at object o equals the base at object o + x_off
    on [a + t_off, b + t_off], times shifted back and marks preserved, so
    shift composition is exact arithmetic on the offsets.
    """

    is_view = True

    def __init__(self, base: Omega, t_off: float, x_off: Site | None):
        self.base = base
        self.t_off = float(t_off)
        self.x_off = x_off if x_off is not None else (0,) * base.params.dimension
        if not 0 <= self.t_off <= base.horizon:
            raise HorizonExceededError(f"time shift {self.t_off} beyond horizon")

    @property
    def params(self) -> ModelParams:
        return self.base.params

    @property
    def seed(self) -> int:
        return self.base.seed

    @property
    def horizon(self) -> float:
        return self.base.horizon - self.t_off

    def shift_time(self, t: float) -> "OmegaView":
        if t < 0:
            raise ValueError("time shifts run forward only")
        return OmegaView(self.base, self.t_off + t, self.x_off)

    def shift_space(self, x: Site) -> "OmegaView":
        if len(x) != self.base.params.dimension:
            raise ValueError("shift vector has wrong dimension")
        return OmegaView(self.base, self.t_off,
                         tuple(a + b for a, b in zip(self.x_off, x)))

    def _translate(self, x: Site) -> Site:
        return tuple(a + b for a, b in zip(x, self.x_off))

    def death_times(self, x: Site, window: Sequence[float]) -> np.ndarray:
        t = self.base.death_times(self._translate(x),
                                  (window[0] + self.t_off, window[1] + self.t_off))
        return t - self.t_off if self.t_off else t

    def maturation_times(self, x: Site, window: Sequence[float]) -> np.ndarray:
        t = self.base.maturation_times(self._translate(x),
                                       (window[0] + self.t_off, window[1] + self.t_off))
        return t - self.t_off if self.t_off else t

    def arrow_events(self, e: Tuple[Site, Site], window: Sequence[float]) -> list[ArrowEvent]:
        ev = self.base.arrow_events((self._translate(e[0]), self._translate(e[1])),
                                    (window[0] + self.t_off, window[1] + self.t_off))
        if not self.t_off:
            return ev
        return [ArrowEvent(e.time - self.t_off, e.mark) for e in ev]

    def resolve(self):
        return self.base, self.t_off, self.x_off


def thin(events: Sequence[ArrowEvent], age: int, profile: AgeProfile,
         base_rate: float) -> list[float]:
    """Keep the arrow times usable by a parent of the given age.

    An event at time t with mark u survives iff u <= lambda_age / base_rate;
    by monotonicity of the profile the result for age i is a subset of the
    result for age j whenever i <= j, and age 0 keeps nothing.
    """
    if age < 0:
        raise ValueError("age must be nonnegative")
    if base_rate <= 0:
        return []
    thr = profile.rate(age) / base_rate
    return [e.time for e in events if e.mark <= thr]
