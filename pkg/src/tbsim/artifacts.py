"""Deterministic CSV/JSON artifact output.

Every experiment writes one CSV (data) and one JSON sidecar (metadata) under
a common basename ``<experiment>_<device>_<variant>``.  Floats are printed in
full double precision scientific notation with a fixed C locale format so
repeated runs are byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Mapping, Sequence

SCHEMA_VERSION = "1"


def format_value(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return f"{value:.17e}"
    if isinstance(value, int):
        return str(value)
    return str(value)


def artifact_base(out_dir, experiment: str, device_name: str,
                  variant: str = "base") -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out / f"{experiment}_{device_name}_{variant}"


def write_csv(base: Path, header: Sequence[str],
              rows: Iterable[Sequence]) -> Path:
    path = Path(str(base) + ".csv")
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_value(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def write_sidecar(base: Path, metadata: Mapping) -> Path:
    path = Path(str(base) + ".json")
    payload = dict(metadata)
    payload.setdefault("schema_version", SCHEMA_VERSION)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    """Header and raw string rows of an artifact CSV."""
    lines = Path(path).read_text().strip().split("\n")
    header = lines[0].split(",")
    return header, [line.split(",") for line in lines[1:]]
