"""Tabular results and their CSV / JSON serialization with a provenance header."""

from __future__ import annotations

import json
import math
import platform
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

SIG_DIGITS = 12


@dataclass
class Table:
    columns: tuple[str, ...]
    rows: list[tuple]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.columns = tuple(self.columns)
        for r in self.rows:
            if len(r) != len(self.columns):
                raise ValueError(f"row of length {len(r)} for {len(self.columns)} columns")

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]


def format_value(v: Any) -> str:
    """12 significant digits; infinities as inf / -inf; integers and strings verbatim."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return f"{v:.{SIG_DIGITS}g}"
    if isinstance(v, (complex, np.complexfloating)):
        raise TypeError("complex values cannot be serialized to CSV")
    return str(v)


def module_versions() -> dict[str, str]:
    import matplotlib
    import numba
    import scipy

    from . import __version__
    return {"qbattery": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__, "matplotlib": matplotlib.__version__}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return format_value(f) if not math.isfinite(f) else f
    return obj


def provenance_lines(prov: dict) -> list[str]:
    lines = []
    for key, value in prov.items():
        text = value if isinstance(value, str) else json.dumps(_jsonable(value), sort_keys=True)
        lines.append(f"# {key}: {text}")
    return lines


def to_csv(table: Table) -> str:
    lines = provenance_lines(table.provenance)
    lines.append(",".join(table.columns))
    lines.extend(",".join(format_value(v) for v in row) for row in table.rows)
    return "\n".join(lines) + "\n"


def to_json(table: Table) -> str:
    doc = {
        "provenance": _jsonable(table.provenance),
        "columns": list(table.columns),
        "rows": [[_jsonable(v) for v in row] for row in table.rows],
    }
    return json.dumps(doc, indent=1) + "\n"


def serialize(table: Table, fmt: str = "csv") -> str:
    if fmt == "csv":
        return to_csv(table)
    if fmt == "json":
        return to_json(table)
    raise ValueError(f"unknown output format {fmt!r}")


def read_csv(text: str) -> tuple[dict[str, str], list[str], list[list[str]]]:
    """Parse a file written by ``to_csv`` into (provenance, header, rows of strings)."""
    prov, header, rows = {}, None, []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition(": ")
            prov[key] = value
        elif header is None:
            header = line.split(",")
        elif line:
            rows.append(line.split(","))
    return prov, header or [], rows


def table_from_rows(columns: Sequence[str], rows, provenance: dict | None = None) -> Table:
    return Table(tuple(columns), [tuple(r) for r in rows], provenance or {})
