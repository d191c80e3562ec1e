"""Integer-lattice geometry and finite-support age configurations.

Sites are coordinate tuples on Z^d (d in {1,2,3}); a configuration is a dict
mapping a site to an integer age >= 1.  Dead sites are never stored, so the
support of the map is exactly the set of living sites.  Internally the engine
packs sites into single ints (21 bits per signed coordinate); the packing
helpers live here so every module agrees on the encoding.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterator, Sequence, Tuple

Site = Tuple[int, ...]
Config = Dict[Site, int]

MAX_DIM = 3
COORD_BITS = 21
COORD_OFF = 1 << (COORD_BITS - 1)
COORD_MASK = (1 << COORD_BITS) - 1
COORD_LIMIT = COORD_OFF - 1  # |coordinate| must stay below this


def check_dimension(d: int) -> int:
    if d not in (1, 2, 3):
        raise ValueError(f"dimension must be 1, 2 or 3, got {d}")
    return d


def pack_site(x: Site) -> int:
    """Pack a coordinate tuple into one int key (21 signed bits per axis)."""
    code = 0
    for i, c in enumerate(x):
        if not -COORD_LIMIT <= c <= COORD_LIMIT:
            raise ValueError(f"coordinate {c} out of packable range")
        code |= (c + COORD_OFF) << (COORD_BITS * i)
    return code


def unpack_site(code: int, d: int) -> Site:
    return tuple(((code >> (COORD_BITS * i)) & COORD_MASK) - COORD_OFF for i in range(d))


def neighbors(x: Site) -> list[Site]:
    """The 2d nearest neighbors, axis by axis, minus offset before plus."""
    out = []
    for i in range(len(x)):
        out.append(x[:i] + (x[i] - 1,) + x[i + 1:])
        out.append(x[:i] + (x[i] + 1,) + x[i + 1:])
    return out


def edge_key(a: Site, b: Site) -> Tuple[Site, Site]:
    """Canonical identity of an edge: lexicographically smaller endpoint first."""
    if len(a) != len(b) or sum(abs(u - v) for u, v in zip(a, b)) != 1:
        raise ValueError(f"{a}-{b} is not a nearest-neighbor edge")
    return (a, b) if a <= b else (b, a)


def edge_axis(a: Site, b: Site) -> int:
    for i, (u, v) in enumerate(zip(a, b)):
        if u != v:
            return i
    raise ValueError("degenerate edge")


def validate_config(f: Config, d: int) -> Config:
    for x, age in f.items():
        if len(x) != d:
            raise ValueError(f"site {x} does not have dimension {d}")
        if age < 1:
            raise ValueError(f"stored age must be >= 1, got {age} at {x}")
    return f


def join(f: Config, g: Config) -> Config:
    """Pointwise maximum of two age configurations."""
    out = dict(f)
    for x, age in g.items():
        if out.get(x, 0) < age:
            out[x] = age
    return out


def leq(f: Config, g: Config) -> bool:
    """True iff f(x) <= g(x) for every site."""
    return all(g.get(x, 0) >= age for x, age in f.items())


def support(f: Config) -> set[Site]:
    return set(f.keys())


@dataclass(frozen=True)
class Box:
    """Product of closed integer intervals [lo_i, hi_i]."""

    lo: Site
    hi: Site

    def __post_init__(self) -> None:
        if len(self.lo) != len(self.hi):
            raise ValueError("lo/hi dimension mismatch")
        if any(l > h for l, h in zip(self.lo, self.hi)):
            raise ValueError(f"empty box {self.lo}..{self.hi}")

    @property
    def dimension(self) -> int:
        return len(self.lo)

    def contains(self, x: Site) -> bool:
        return all(l <= c <= h for c, l, h in zip(x, self.lo, self.hi))

    def sites(self) -> Iterator[Site]:
        def rec(i: int, prefix: Tuple[int, ...]) -> Iterator[Site]:
            if i == len(self.lo):
                yield prefix
                return
            for c in range(self.lo[i], self.hi[i] + 1):
                yield from rec(i + 1, prefix + (c,))

        return rec(0, ())

    def translate(self, x: Site) -> "Box":
        return Box(tuple(l + c for l, c in zip(self.lo, x)),
                   tuple(h + c for h, c in zip(self.hi, x)))


def centered_box(radius: Sequence[int] | int, d: int) -> Box:
    """[-r, r]^d, or a per-axis radius product."""
    if isinstance(radius, int):
        radius = [radius] * d
    if len(radius) != d:
        raise ValueError("radius/dimension mismatch")
    return Box(tuple(-r for r in radius), tuple(r for r in radius))


def cube(center: Site, n: int) -> Box:
    """center + [-n, n]^d."""
    return Box(tuple(c - n for c in center), tuple(c + n for c in center))


def pack_box_codes(box: Box):
    """Packed codes of every site of the box, as one int64 array."""
    import numpy as np

    axes = [np.arange(lo + COORD_OFF, hi + COORD_OFF + 1, dtype=np.int64)
            for lo, hi in zip(box.lo, box.hi)]
    code = axes[0]
    for i, ax in enumerate(axes[1:], start=1):
        code = (code[:, None] + (ax << (COORD_BITS * i))[None, :]).ravel()
    return code


@dataclass(frozen=True)
class SpaceTimeBox:
    """Spatial box crossed with a time interval [t0, t1]."""

    spatial: Box
    t0: float
    t1: float

    def __post_init__(self) -> None:
        if not 0 <= self.t0 <= self.t1:
            raise ValueError(f"bad time window [{self.t0}, {self.t1}]")
