"""CSV emission with JSON metadata sidecars.

Every table written by the CLI gets a `<name>.meta.json` sidecar next to it
carrying the seed, model parameters, caps, and a content hash of the run
configuration, so any output file can be traced back to the exact run that
produced it.  Float formatting is fixed so identical runs are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Iterable, Mapping

from .omega import ModelParams

FLOAT_FMT = "{:.10g}"


def fmt(value) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return FLOAT_FMT.format(value)
    if value is None:
        return ""
    return str(value)


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def params_meta(params: ModelParams) -> dict:
    return {
        "dimension": params.dimension,
        "profile_head": list(params.profile.head),
        "profile_tail": params.profile.tail,
        "gamma": params.gamma,
        "base_rate": params.base_rate,
        "gamma_base": params.gamma_base,
    }


def write_csv(path: Path, header: str, rows: Iterable[Iterable],
              meta: Mapping) -> Path:
    """Write rows (already ordered) plus the metadata sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(header.rstrip("\n") + "\n")
        for row in rows:
            if isinstance(row, str):
                fh.write(row.rstrip("\n") + "\n")
            else:
                fh.write(",".join(fmt(v) for v in row) + "\n")
    sidecar = path.with_suffix(path.suffix + ".meta.json")
    with open(sidecar, "w") as fh:
        json.dump(dict(meta), fh, indent=1, sort_keys=True, default=_jsonable)
        fh.write("\n")
    return path


def _jsonable(v):
    try:
        import numpy as np
        if isinstance(v, (np.integer,)):
            return int(v)
        if isinstance(v, (np.floating,)):
            return float(v)
        if isinstance(v, np.ndarray):
            return v.tolist()
    except ImportError:
        pass
    if isinstance(v, tuple):
        return list(v)
    return str(v)
