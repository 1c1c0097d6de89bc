"""CSV/JSON readers and writers for curves, coefficients, scores and models.

Curve CSV: header ``u,u_1,...,u_r`` followed by rows ``t,x_t(u_1),...``.
Coefficient CSV: header ``t,c_1,...,c_d`` followed by rows ``t,c_1,...``.
All floats are written with 17 significant digits so they round-trip exactly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .basis import FunctionalSeries, build_fourier_basis, project_curves
from .errors import DataError

FMT = "{:.17g}"


def _fmt_row(values) -> list:
    return [FMT.format(float(v)) for v in values]


def _read_rows(path):
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh)]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from exc
    rows = [[c.strip() for c in r] for r in rows]
    numbered = [(i + 1, r) for i, r in enumerate(rows) if r and any(r)]
    if len(numbered) < 2:
        raise DataError(f"{path}: need a header line and at least one data line")
    return numbered


def _floats(cells: Sequence[str], path, lineno: int) -> np.ndarray:
    try:
        return np.array([float(c) for c in cells])
    except ValueError as exc:
        raise DataError(f"{path}, line {lineno}: non-numeric field ({exc})") from exc


def read_series(path, d: Optional[int] = None) -> FunctionalSeries:
    """Load a curve CSV (projected onto a Fourier basis with ``d`` functions)
    or a coefficient CSV (``d`` is taken from the header)."""
    rows = _read_rows(path)
    (hline, header), body = rows[0], rows[1:]
    kind = header[0].lower()
    width = len(header)
    values = []
    for lineno, r in body:
        if len(r) != width:
            raise DataError(f"{path}, line {lineno}: expected {width} fields, found {len(r)}")
        values.append(_floats(r[1:], path, lineno))
    data = np.vstack(values)
    if not np.all(np.isfinite(data)):
        raise DataError(f"{path}: non-finite values")
    if kind == "t":
        dd = width - 1
        if d is not None and d != dd:
            raise DataError(f"{path}: file has {dd} coefficients but d={d} was requested")
        try:
            basis = build_fourier_basis(dd)
        except ValueError as exc:
            raise DataError(f"{path}: {exc}") from exc
        return FunctionalSeries(data, basis)
    if kind == "u":
        grid = _floats(header[1:], path, hline)
        basis = build_fourier_basis(15 if d is None else d)
        try:
            return project_curves(data, grid, basis)
        except ValueError as exc:
            raise DataError(f"{path}: {exc}") from exc
    raise DataError(f"{path}, line {hline}: header must start with 'u' (curves) or 't' (coefficients)")


def write_coeffs(path, series: FunctionalSeries) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"c_{k + 1}" for k in range(series.d)])
        for t, row in enumerate(series.coeffs, start=1):
            w.writerow([t] + _fmt_row(row))


def write_curves(path, series: FunctionalSeries, points=None, uncentered: bool = True) -> None:
    from .basis import evaluate

    u = series.basis.grid if points is None else np.asarray(points, dtype=float)
    vals = evaluate(series, u, uncentered=uncentered)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["u"] + _fmt_row(u))
        for t, row in enumerate(vals, start=1):
            w.writerow([t] + _fmt_row(row))


def write_scores(path, scores) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"Y_{m + 1}" for m in range(scores.p)] + ["valid"])
        for t in range(scores.n):
            w.writerow([t + 1] + _fmt_row(scores.scores[t]) + [int(scores.valid[t])])


def read_scores(path, kind: str = "dynamic", L: int = 0):
    from .dpca import ScoreSeries

    rows = _read_rows(path)
    header, body = rows[0][1], rows[1:]
    if header[0].lower() != "t" or header[-1].lower() != "valid":
        raise DataError(f"{path}: expected header 't,Y_1,...,Y_p,valid'")
    vals, valid = [], []
    for lineno, r in body:
        if len(r) != len(header):
            raise DataError(f"{path}, line {lineno}: expected {len(header)} fields, found {len(r)}")
        vals.append(_floats(r[1:-1], path, lineno))
        valid.append(r[-1] in ("1", "true", "True"))
    return ScoreSeries(np.vstack(vals), L, np.array(valid), kind)


def write_table(path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([FMT.format(v) if isinstance(v, (float, np.floating)) else v for v in r])


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}, line {exc.lineno}: invalid JSON ({exc.msg})") from exc
