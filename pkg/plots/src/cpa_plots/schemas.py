"""CSV loading with explicit schema checks.

Figures consume only the simulator's documented CSV schemas; a missing
column is a usage error reported with the offending names, never a crash
deeper in the plotting code.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path


class SchemaError(ValueError):
    pass


def load_csv(path: str | Path, required: tuple[str, ...]) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"input file {path} not found")
    with open(path) as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise SchemaError(
                f"{path.name}: missing column(s) {', '.join(missing)}; "
                f"have {', '.join(header)}")
        return list(reader)


def load_sidecar(path: str | Path) -> dict:
    side = Path(str(path) + ".meta.json")
    if side.exists():
        return json.loads(side.read_text())
    return {}


def floats(rows: list[dict], col: str) -> list[float]:
    return [float(r[col]) for r in rows if r[col] not in ("", None)]
