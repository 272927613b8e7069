"""File formats: domain JSON, raster grids, point CSVs and fixed-precision output."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from lpdens.domain import AxisBox, ConvexPolygon2D, Domain, PolySector, RasterDomain


def fmt_float(x) -> str:
    """Seventeen significant digits, enough to round-trip any double."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _json_text(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return "null" if not math.isfinite(x) else fmt_float(x)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_json_text(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in seq):
            return "[" + ", ".join(_json_text(v, indent, level + 1) for v in seq) + "]"
        items = [pad + _json_text(v, indent, level + 1) for v in seq]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps_json(obj, indent: int = 2) -> str:
    """JSON text with floats at 17 significant digits and non-finite values as null."""
    return _json_text(obj, indent, 0) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps_json(obj), encoding="utf-8")


def write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


# --------------------------------------------------------------------------
# inputs
# --------------------------------------------------------------------------

def read_sample_csv(path) -> np.ndarray:
    """Points from a CSV file, one per row; a non-numeric first row is a header."""
    text = Path(path).read_text(encoding="utf-8")
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    try:
        [float(c) for c in rows[0]]
    except ValueError:
        rows = rows[1:]
    try:
        X = np.array([[float(c) for c in r] for r in rows], dtype=np.float64)
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric value in data rows") from exc
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError(f"{path}: rows have inconsistent lengths or no data")
    return X


def parse_raster(text: str) -> RasterDomain:
    """Raster format: header ``d nx ny xmin xmax ymin ymax`` then ``ny`` rows of ``nx`` 0/1 values.

    The first data row is the bottom row (smallest y).  Values in a row may
    be separated by whitespace or written as a contiguous bit string.
    """
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    head = lines[0].split()
    if len(head) != 7:
        raise ValueError("raster header must be: d nx ny xmin xmax ymin ymax")
    d, nx, ny = (int(v) for v in head[:3])
    if d != 2:
        raise ValueError("raster domains are planar (d = 2)")
    xmin, xmax, ymin, ymax = (float(v) for v in head[3:])
    body = lines[1:]
    if len(body) != ny:
        raise ValueError(f"raster declares {ny} rows, found {len(body)}")
    bits = []
    for ln in body:
        tokens = ln.split() if len(ln.split()) > 1 else list(ln)
        if len(tokens) != nx or any(tok not in ("0", "1") for tok in tokens):
            raise ValueError(f"raster row must hold {nx} values in {{0,1}}: {ln!r}")
        bits.append([tok == "1" for tok in tokens])
    return RasterDomain(np.array(bits, dtype=bool), xmin, xmax, ymin, ymax)


def format_raster(dom: RasterDomain) -> str:
    ny, nx = dom.bits.shape
    head = f"2 {nx} {ny} {fmt_float(dom.xmin)} {fmt_float(dom.xmax)} {fmt_float(dom.ymin)} {fmt_float(dom.ymax)}"
    rows = [" ".join("1" if b else "0" for b in row) for row in dom.bits]
    return "\n".join([head] + rows) + "\n"


def domain_from_dict(desc: dict, base_dir=None) -> Domain:
    """Build a domain from its JSON description.

    Kinds: ``axis_box`` (``lower``, ``upper``), ``poly_sector`` (``k``),
    ``convex_polygon`` (``vertices``), ``implicit_grid`` (either ``raster``
    text, ``raster_file`` path, or inline ``bits`` with ``xmin``..``ymax``).
    """
    kind = desc.get("kind")
    if kind == "axis_box":
        return AxisBox(desc["lower"], desc["upper"])
    if kind == "poly_sector":
        return PolySector(float(desc["k"]))
    if kind == "convex_polygon":
        return ConvexPolygon2D(np.asarray(desc["vertices"], dtype=np.float64))
    if kind == "implicit_grid":
        if "raster" in desc:
            return parse_raster(desc["raster"])
        if "raster_file" in desc:
            p = Path(desc["raster_file"])
            if base_dir is not None and not p.is_absolute():
                p = Path(base_dir) / p
            return parse_raster(p.read_text(encoding="utf-8"))
        return RasterDomain(np.asarray(desc["bits"], dtype=bool), float(desc["xmin"]),
                            float(desc["xmax"]), float(desc["ymin"]), float(desc["ymax"]))
    raise ValueError(f"unknown domain kind {kind!r}")


def read_domain(path) -> Domain:
    path = Path(path)
    return domain_from_dict(json.loads(path.read_text(encoding="utf-8")), base_dir=path.parent)


def write_domain(path, domain: Domain) -> None:
    write_json(path, domain.to_dict())
