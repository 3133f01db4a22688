"""CSV field dumps, report serialization and their readers.

Field CSV layout::

    # grid_hash=<16 hex digits>
    kind,direction,i,j[,k],value
    face,0,0,0,0
    ...
    cell,,0,0,1.25

``direction`` is the 0-based velocity component for ``face`` rows and empty
for ``cell`` rows.  Values use 17 significant digits, so a dump reloads to
the same binary64 numbers.  Lines end with LF.
"""
from __future__ import annotations

import csv
import io as _io
from pathlib import Path

import numpy as np

from .fields import PressureField, VelocityField
from .macgrid import MacGrid

_INDEX = ("i", "j", "k")


class FieldFormatError(ValueError):
    pass


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def field_csv(f) -> str:
    grid = f.grid
    out = _io.StringIO()
    out.write(f"# grid_hash={grid.hash()}\n")
    out.write(",".join(("kind", "direction") + _INDEX[:grid.dim] + ("value",)) + "\n")
    if isinstance(f, PressureField):
        for idx in np.ndindex(grid.cell_shape):
            out.write("cell,," + ",".join(map(str, idx)) + "," + _fmt(f.values[idx]) + "\n")
    elif isinstance(f, VelocityField):
        for i, c in enumerate(f.components):
            for idx in np.ndindex(c.shape):
                out.write(f"face,{i}," + ",".join(map(str, idx)) + "," + _fmt(c[idx]) + "\n")
    else:
        raise TypeError(f"cannot dump {type(f).__name__}")
    return out.getvalue()


def write_field_csv(f, path) -> Path:
    path = Path(path)
    path.write_text(field_csv(f), encoding="utf-8", newline="\n")
    return path


def parse_field_csv(text: str, grid: MacGrid):
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# grid_hash="):
        raise FieldFormatError("line 1: missing '# grid_hash=' header")
    stored = lines[0].split("=", 1)[1].strip()
    if stored != grid.hash():
        raise FieldFormatError(f"line 1: grid hash {stored} does not match grid {grid.hash()}")
    reader = csv.reader(lines[1:])
    header = next(reader, None)
    expected = ["kind", "direction", *_INDEX[:grid.dim], "value"]
    if header != expected:
        raise FieldFormatError(f"line 2: expected header {','.join(expected)}")
    comps = [np.zeros(grid.face_shape(i)) for i in range(grid.dim)]
    cells = np.zeros(grid.cell_shape)
    kinds = set()
    for lineno, row in enumerate(reader, start=3):
        if len(row) != len(expected):
            raise FieldFormatError(f"line {lineno}: expected {len(expected)} columns")
        try:
            idx = tuple(int(v) for v in row[2:-1])
            value = float(row[-1])
            if row[0] == "face":
                comps[int(row[1])][idx] = value
            elif row[0] == "cell":
                cells[idx] = value
            else:
                raise FieldFormatError(f"line {lineno}: unknown kind {row[0]!r}")
        except (ValueError, IndexError) as exc:
            if isinstance(exc, FieldFormatError):
                raise
            raise FieldFormatError(f"line {lineno}: {exc}") from None
        kinds.add(row[0])
    if kinds == {"cell"}:
        return PressureField(grid, cells)
    if kinds == {"face"}:
        return VelocityField(grid, tuple(comps))
    raise FieldFormatError("a field file must contain only face rows or only cell rows")


def read_field_csv(path, grid: MacGrid):
    return parse_field_csv(Path(path).read_text(encoding="utf-8"), grid)


# ----------------------------------------------------------------- reports
def _value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return _fmt(float(v))
    return str(v)


def report_text(report) -> str:
    return "".join(f"{k}={_value(v)}\n" for k, v in report.scalars().items())


def parse_report_text(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if "=" not in line:
            raise FieldFormatError(f"line {lineno}: expected key=value")
        k, v = line.split("=", 1)
        out[k] = v
    return out


def write_report(report, path) -> Path:
    path = Path(path)
    path.write_text(report_text(report), encoding="utf-8", newline="\n")
    return path


def rows_csv(rows: list[dict], columns: list[str] | None = None) -> str:
    if columns is None:
        columns = list(rows[0]) if rows else []
    out = _io.StringIO()
    out.write(",".join(columns) + "\n")
    for r in rows:
        out.write(",".join(_value(r.get(c, "")) for c in columns) + "\n")
    return out.getvalue()


def write_rows_csv(rows: list[dict], path, columns: list[str] | None = None) -> Path:
    path = Path(path)
    path.write_text(rows_csv(rows, columns), encoding="utf-8", newline="\n")
    return path


def residual_history_csv(report) -> str:
    return rows_csv(report.residual_history,
                    ["stage", "iteration", "h1_increment", "relative_increment"])


def energy_history_csv(report, dt: float | None = None) -> str:
    rows = [{"step": n, "time": (n * dt if dt is not None else ""), "energy": e}
            for n, e in enumerate(report.energy_history)]
    return rows_csv(rows, ["step", "time", "energy"])
