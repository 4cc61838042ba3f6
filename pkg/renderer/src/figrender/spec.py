"""Plot specification: a small JSON contract between pipeline and renderer."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

KINDS = ("line", "heatmap", "triangular-matrix", "trajectory")
SCALES = ("linear", "log")


class SpecError(ValueError):
    """Malformed plot spec or input artifact that does not match it."""


@dataclass(frozen=True)
class PlotSpec:
    kind: str
    csv: Path
    out: Path
    x: str | None = None            # line/trajectory abscissa column
    y: tuple[str, ...] = ()         # line/trajectory ordinate column(s)
    columns: tuple[str, ...] = ()   # heatmap (x, y, value) / matrix (row, col, value)
    xlabel: str = ""
    ylabel: str = ""
    title: str = ""
    xscale: str = "linear"
    yscale: str = "linear"
    vscale: str = "linear"          # heatmap / matrix color scale
    absolute: bool = False          # plot |y| (with the log-|value| styles)
    mask_blank: bool = True         # non-finite heatmap cells stay blank


_REQUIRED = {"kind", "csv", "out"}
_OPTIONAL = {"x", "y", "columns", "xlabel", "ylabel", "title",
             "xscale", "yscale", "vscale", "absolute", "mask_blank"}


def load_spec(path) -> PlotSpec:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise SpecError(f"plot spec not found: {path}")
    except json.JSONDecodeError as exc:
        raise SpecError(f"plot spec is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise SpecError("plot spec must be a JSON object")
    missing = _REQUIRED - raw.keys()
    if missing:
        raise SpecError(f"plot spec missing fields: {sorted(missing)}")
    unknown = raw.keys() - _REQUIRED - _OPTIONAL
    if unknown:
        raise SpecError(f"plot spec has unknown fields: {sorted(unknown)}")
    if raw["kind"] not in KINDS:
        raise SpecError(f"kind must be one of {KINDS}, got {raw['kind']!r}")
    for scale_key in ("xscale", "yscale", "vscale"):
        if raw.get(scale_key, "linear") not in SCALES:
            raise SpecError(f"{scale_key} must be one of {SCALES}")
    y = raw.get("y", ())
    if isinstance(y, str):
        y = (y,)
    spec = PlotSpec(
        kind=raw["kind"],
        csv=(path.parent / raw["csv"]).resolve()
        if not Path(raw["csv"]).is_absolute() else Path(raw["csv"]),
        out=(path.parent / raw["out"]).resolve()
        if not Path(raw["out"]).is_absolute() else Path(raw["out"]),
        x=raw.get("x"),
        y=tuple(y),
        columns=tuple(raw.get("columns", ())),
        xlabel=raw.get("xlabel", ""),
        ylabel=raw.get("ylabel", ""),
        title=raw.get("title", ""),
        xscale=raw.get("xscale", "linear"),
        yscale=raw.get("yscale", "linear"),
        vscale=raw.get("vscale", "linear"),
        absolute=bool(raw.get("absolute", False)),
        mask_blank=bool(raw.get("mask_blank", True)),
    )
    _check_shape(spec)
    return spec


def _check_shape(spec: PlotSpec) -> None:
    if spec.kind in ("line", "trajectory"):
        if not spec.x or not spec.y:
            raise SpecError(f"{spec.kind} plots need 'x' and at least one 'y'")
    else:
        if len(spec.columns) != 3:
            raise SpecError(
                f"{spec.kind} plots need 'columns' = [x, y, value] "
                "(or [row, col, value])")


@dataclass(frozen=True)
class Table:
    """A CSV held as verbatim strings: header plus string rows."""
    header: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]
    index: dict = field(hash=False, default_factory=dict)

    def column(self, name: str) -> list[str]:
        return [row[self.index[name]] for row in self.rows]


def read_table(spec: PlotSpec) -> Table:
    try:
        with open(spec.csv, newline="") as fh:
            reader = csv.reader(fh)
            records = [tuple(r) for r in reader if r]
    except FileNotFoundError:
        raise SpecError(f"input CSV not found: {spec.csv}")
    if not records:
        raise SpecError(f"input CSV is empty: {spec.csv}")
    header, rows = records[0], records[1:]
    if not rows:
        raise SpecError(f"input CSV has no data rows: {spec.csv}")
    needed = ((spec.x,) + spec.y) if spec.kind in ("line", "trajectory") \
        else spec.columns
    absent = [c for c in needed if c not in header]
    if absent:
        raise SpecError(
            f"columns {absent} not in CSV header {list(header)}: {spec.csv}")
    short = [i for i, row in enumerate(rows) if len(row) != len(header)]
    if short:
        raise SpecError(f"CSV rows {short[:5]} do not match the header width")
    return Table(header=header, rows=tuple(rows),
                 index={name: i for i, name in enumerate(header)})
