"""CSV/JSON serialization of nodal fields and piecewise-constant BD fields.

Floats are written with 17 significant digits so a round trip is exact.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .grid import GridDomain, GridError, VectorField
from .relaxation import DiscreteBDField, bd_measure


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _header_path(path: Path) -> Path:
    return path.with_suffix(".json")


def _domain_header(dom: GridDomain) -> dict:
    return {"nx": dom.nx, "ny": dom.ny, "h": dom.h, "origin": list(dom.origin)}


def _domain_from_header(meta: dict) -> GridDomain:
    return GridDomain(int(meta["nx"]), int(meta["ny"]), float(meta["h"]), tuple(meta.get("origin", (0.0, 0.0))))


def _write_rows(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([c if isinstance(c, (str, int, np.integer)) else fmt(c) for c in r])


def _point_rows(X, Y, values):
    for i in range(X.shape[0]):
        for j in range(X.shape[1]):
            for c in range(values.shape[-1]):
                yield X[i, j], Y[i, j], c, values[i, j, c]


def write_field(path, u: VectorField) -> Path:
    """Nodal field as rows (x, y, component, value) plus a JSON header next to it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    X, Y = u.domain.coords()
    _write_rows(path, ["x", "y", "component", "value"], _point_rows(X, Y, u.values))
    _header_path(path).write_text(json.dumps(_domain_header(u.domain), indent=1) + "\n")
    return path


def _read_point_csv(path: Path, shape) -> np.ndarray:
    vals = np.full((*shape, 2), np.nan)
    with path.open() as fh:
        rows = list(csv.DictReader(fh))
    if len(rows) != shape[0] * shape[1] * 2:
        raise GridError(f"{path}: expected {shape[0] * shape[1] * 2} rows, found {len(rows)}")
    for k, r in enumerate(rows):
        node, c = divmod(k, 2)
        i, j = divmod(node, shape[1])
        if int(r["component"]) != c:
            raise GridError(f"{path}: rows out of order at line {k + 2}")
        vals[i, j, c] = float(r["value"])
    return vals


def read_field(path) -> VectorField:
    path = Path(path)
    dom = _domain_from_header(json.loads(_header_path(path).read_text()))
    return VectorField(dom, _read_point_csv(path, dom.node_shape))


def write_bd_field(prefix, u: DiscreteBDField) -> dict[str, Path]:
    """Cell CSV, face-jump CSV, optional nodal smooth part, and a JSON header.

    The jump file lists every interior face with a nonzero jump:
    face midpoint, normal axis and the jump density (e11, e12, e22).
    """
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    dom = u.domain
    out = {"cells": prefix.with_name(prefix.name + "_cells.csv"),
           "jumps": prefix.with_name(prefix.name + "_jumps.csv")}
    Xc, Yc = dom.cell_centers()
    _write_rows(out["cells"], ["x", "y", "component", "value"], _point_rows(Xc, Yc, u.cell_values))

    m = bd_measure(u)
    x0, y0 = dom.origin
    rows = []
    for axis, J in ((0, m.jumps_x), (1, m.jumps_y)):
        for i in range(J.shape[0]):
            for j in range(J.shape[1]):
                if not np.any(J[i, j]):
                    continue
                if axis == 0:
                    fx, fy = x0 + (i + 1) * dom.h, y0 + (j + 0.5) * dom.h
                else:
                    fx, fy = x0 + (i + 0.5) * dom.h, y0 + (j + 1) * dom.h
                rows.append((fx, fy, axis, *J[i, j]))
    _write_rows(out["jumps"], ["x", "y", "normal_axis", "e11", "e12", "e22"], rows)

    meta = _domain_header(dom)
    meta["has_smooth_part"] = u.smooth_part is not None
    if u.smooth_part is not None:
        out["smooth"] = write_field(prefix.with_name(prefix.name + "_smooth.csv"), u.smooth_part)
    out["header"] = prefix.with_name(prefix.name + ".json")
    out["header"].write_text(json.dumps(meta, indent=1) + "\n")
    return out


def read_bd_field(prefix) -> DiscreteBDField:
    """Inverse of :func:`write_bd_field`; jumps are recomputed from the cell values."""
    prefix = Path(prefix)
    meta = json.loads(prefix.with_name(prefix.name + ".json").read_text())
    dom = _domain_from_header(meta)
    cells = _read_point_csv(prefix.with_name(prefix.name + "_cells.csv"), dom.cell_shape)
    smooth = read_field(prefix.with_name(prefix.name + "_smooth.csv")) if meta.get("has_smooth_part") else None
    return DiscreteBDField(dom, cells, smooth)


def write_table(path, rows: list[dict]) -> Path:
    """List of flat dicts as CSV with a header taken from the first row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = list(rows[0].keys()) if rows else []
    _write_rows(path, cols, ([r.get(c, "") if r.get(c) is not None else "" for c in cols] for r in rows))
    return path
