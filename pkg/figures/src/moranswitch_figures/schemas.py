"""Parsing and validation of the simulation CLI's CSV/JSON artifacts.

The renderers never recompute any mathematics: they consume exactly the
files the `moranswitch` CLI writes (17-significant-digit CSV with a header
row, JSON with an embedded config).  This module owns the schema knowledge:
which columns each figure kind expects, plus a lossless table round-trip
(read -> write -> read reproduces the same values bit for bit).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

KINDS = ("heatmap", "bifurcation", "quasi_compare", "moments_overlay", "mfpt_overlay")

# fixed column schemas; heatmap is special-cased (x + one column per mu)
REQUIRED_COLUMNS = {
    "bifurcation": ["branch_id", "mu", "x", "stability"],
    "quasi_compare": ["x", "phi", "psi", "diff", "q"],
    "moments_overlay": ["mu", "basin", "x_star", "mean_sim", "var_sim", "var_lna",
                        "mean_corrected", "var_corrected", "single_equilibrium"],
}


class SchemaError(ValueError):
    """Input does not match the CLI schema; lists the offending columns."""

    def __init__(self, path, missing=(), found=()):
        self.path = str(path)
        self.missing = list(missing)
        self.found = list(found)
        super().__init__(
            f"{path}: missing columns {self.missing} (found {self.found})")


@dataclass
class Table:
    """A parsed CSV: header order plus one numpy column per name.

    Numeric cells become floats; anything unparseable stays a string, so
    label columns (stability, basin, method) survive the round trip.
    """

    header: list
    columns: dict

    @property
    def n_rows(self) -> int:
        return 0 if not self.header else len(self.columns[self.header[0]])

    def column(self, name: str) -> np.ndarray:
        return self.columns[name]


def _parse_cell(cell: str):
    try:
        return float(cell)
    except ValueError:
        return cell


def read_table(path) -> Table:
    text = Path(path).read_text(encoding="utf-8")
    lines = [line for line in text.splitlines() if line]
    if not lines:
        raise SchemaError(path, missing=["<header>"])
    header = lines[0].split(",")
    raw = [line.split(",") for line in lines[1:]]
    for row in raw:
        if len(row) != len(header):
            raise SchemaError(path, missing=[f"<row with {len(row)} cells>"],
                              found=header)
    columns = {}
    for j, name in enumerate(header):
        cells = [_parse_cell(row[j]) for row in raw]
        if all(isinstance(c, float) for c in cells):
            columns[name] = np.asarray(cells, dtype=float)
        else:
            columns[name] = np.asarray([str(c) for c in cells], dtype=object)
    return Table(header, columns)


def write_table(table: Table, path) -> None:
    lines = [",".join(table.header)]
    for i in range(table.n_rows):
        cells = []
        for name in table.header:
            value = table.columns[name][i]
            if isinstance(value, float):
                cells.append(f"{value:.17g}")
            else:
                cells.append(str(value))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def tables_equal(a: Table, b: Table) -> bool:
    if a.header != b.header or a.n_rows != b.n_rows:
        return False
    for name in a.header:
        ca, cb = a.columns[name], b.columns[name]
        if ca.dtype != cb.dtype:
            return False
        if ca.dtype == object:
            if not all(x == y for x, y in zip(ca, cb)):
                return False
        elif not np.array_equal(ca, cb):
            return False
    return True


def validate_columns(table: Table, kind: str, path) -> None:
    if kind == "heatmap":
        if not table.header or table.header[0] != "x" or len(table.header) < 2:
            raise SchemaError(path, missing=["x", "<mu columns>"], found=table.header)
        return
    required = REQUIRED_COLUMNS[kind]
    missing = [c for c in required if c not in table.header]
    if missing:
        raise SchemaError(path, missing=missing, found=table.header)


def read_mfpt_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if "results" not in payload:
        raise SchemaError(path, missing=["results"], found=list(payload))
    for entry in payload["results"]:
        missing = [k for k in ("mu", "reports") if k not in entry]
        if missing:
            raise SchemaError(path, missing=missing, found=list(entry))
        for report in entry["reports"]:
            missing = [k for k in ("method", "tau_minus_rounds") if k not in report]
            if missing:
                raise SchemaError(path, missing=missing, found=list(report))
    return payload


def read_bifurcation_summary(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    missing = [k for k in ("folds", "transcritical") if k not in payload]
    if missing:
        raise SchemaError(path, missing=missing, found=list(payload))
    return payload


@dataclass
class FigureSpec:
    """What to render: a kind, named input paths, and the output image path."""

    kind: str
    inputs: dict
    output: str
    title: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r} (choose from {KINDS})")
        for name, p in self.inputs.items():
            if not Path(p).exists():
                raise FileNotFoundError(f"input {name!r}: no such file {p}")

    @classmethod
    def from_json(cls, path) -> "FigureSpec":
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        try:
            return cls(kind=obj["kind"], inputs=dict(obj["inputs"]),
                       output=obj["output"], title=obj.get("title", ""))
        except KeyError as exc:
            raise SchemaError(path, missing=[str(exc)], found=list(obj)) from exc
