"""Legacy ASCII VTK, CSV and JSON writers.  Floats use 17 significant digits."""
from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .fem import Mesh

FLOAT_FMT = "{:.17g}"


def fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return FLOAT_FMT.format(x)


def _json_value(v, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(v, dict):
        if not v:
            return "{}"
        items = [f'{pad}{json.dumps(str(k))}: {_json_value(val, indent, level + 1)}'
                 for k, val in v.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(v, (list, tuple, np.ndarray)):
        v = list(v)
        if not v:
            return "[]"
        if all(not isinstance(x, (dict, list, tuple, np.ndarray)) for x in v):
            return "[" + ", ".join(_json_value(x, indent, level + 1) for x in v) + "]"
        return "[\n" + ",\n".join(pad + _json_value(x, indent, level + 1) for x in v) + "\n" + end + "]"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if v is None:
        return "null"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        x = float(v)
        return json.dumps(fmt(x)) if not math.isfinite(x) else fmt(x)
    return json.dumps(str(v))


def dumps_json(obj, indent: int = 2) -> str:
    """JSON text with 17-significant-digit floats; non-finite floats become strings."""
    return _json_value(obj, indent, 0) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps_json(obj))
    return path


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(x) if isinstance(x, (float, np.floating)) else x for x in r])
    return path


def read_csv(path):
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_vtk(path, mesh: Mesh, point_data: dict | None = None, cell_data: dict | None = None,
              title: str = "plastopt") -> Path:
    """Unstructured grid of quads.  Arrays of shape (N,) are scalars, (N, 2) vectors."""
    path = Path(path)
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {mesh.n_nodes} double"]
    lines += [f"{fmt(x)} {fmt(y)} 0" for x, y in mesh.nodes]
    lines.append(f"CELLS {mesh.n_cells} {5 * mesh.n_cells}")
    lines += ["4 " + " ".join(str(int(a)) for a in c) for c in mesh.cells]
    lines.append(f"CELL_TYPES {mesh.n_cells}")
    lines += ["9"] * mesh.n_cells

    def block(kind, n, data):
        if not data:
            return
        lines.append(f"{kind} {n}")
        for name, arr in data.items():
            arr = np.asarray(arr, dtype=float)
            if arr.shape[0] != n:
                raise ValueError(f"field {name!r} has {arr.shape[0]} entries, expected {n}")
            if arr.ndim == 1:
                lines.append(f"SCALARS {name} double 1")
                lines.append("LOOKUP_TABLE default")
                lines.extend(fmt(v) for v in arr)
            else:
                lines.append(f"VECTORS {name} double")
                lines.extend(f"{fmt(a)} {fmt(b)} 0" for a, b in arr[:, :2])

    block("POINT_DATA", mesh.n_nodes, point_data)
    block("CELL_DATA", mesh.n_cells, cell_data)
    path.write_text("\n".join(lines) + "\n")
    return path


def write_field_csv(path, mesh: Mesh, fields: dict) -> Path:
    """One row per node: id, coordinates, then every component of every field."""
    header = ["node", "x", "y"]
    cols = []
    for name, arr in fields.items():
        arr = np.asarray(arr, dtype=float).reshape(mesh.n_nodes, -1)
        if arr.shape[1] == 1:
            header.append(name)
        else:
            header += [f"{name}_{c}" for c in range(arr.shape[1])]
        cols.append(arr)
    data = np.hstack([mesh.nodes] + cols)
    rows = [[i] + [float(v) for v in row] for i, row in enumerate(data)]
    return write_csv(path, header, rows)


def cell_average(mesh: Mesh, qfield: np.ndarray) -> np.ndarray:
    return np.asarray(qfield).reshape(mesh.n_cells, 4, *np.shape(qfield)[1:]).mean(axis=1)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()
