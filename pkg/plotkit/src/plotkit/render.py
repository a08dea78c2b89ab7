"""CSV to image: deterministic rendering of sweep result curves.

Series order, colors and markers are functions of the sorted group keys,
never of row order or completion time, so the same inputs always produce
the same bytes. Inputs are only ever read.
"""

from __future__ import annotations

import csv
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .spec import FigureSpec, SpecError  # noqa: E402

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f"]
_MARKERS = ["o", "s", "^", "v", "D", "P", "*", "X", "<", ">"]


def read_rows(path) -> tuple:
    """Header and data rows of one delimited results file."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            rows = [row for row in reader if row]
    except FileNotFoundError:
        raise SpecError(f"input not found: {path}") from None
    return header, rows


def _column_indices(header, path, spec: FigureSpec) -> dict:
    for col in spec.columns_needed():
        if col not in header:
            have = ", ".join(header) if header else "file has no header row"
            raise SpecError(f"column '{col}' not found in {path} ({have})")
    return {col: header.index(col) for col in spec.columns_needed()}


def _numeric(row, idx, col, path) -> float:
    try:
        return float(row[idx])
    except (ValueError, IndexError):
        value = row[idx] if idx < len(row) else "<missing>"
        raise SpecError(
            f"{path}: column '{col}' has non-numeric value {value!r}") from None


def _collect_series(spec: FigureSpec) -> dict:
    """Group key tuple -> list of (x, y, y_err) points, x-sorted."""
    series: dict = {}
    for path in spec.inputs:
        header, rows = read_rows(path)
        if header is None:
            raise SpecError(
                f"column '{spec.x}' not found in {path} (file is empty)")
        idx = _column_indices(header, path, spec)
        for row in rows:
            key = tuple(row[idx[k]] for k in spec.group_by)
            x = _numeric(row, idx[spec.x], spec.x, path)
            y = _numeric(row, idx[spec.y], spec.y, path)
            err = (_numeric(row, idx[spec.y_err], spec.y_err, path)
                   if spec.y_err else 0.0)
            series.setdefault(key, []).append((x, y, err))
    for points in series.values():
        points.sort()
    return series


def _label(key: tuple, group_by: list) -> str:
    if len(key) == 1:
        return key[0]
    return ", ".join(f"{k}={v}" for k, v in zip(group_by, key))


def strip_metadata(data: bytes) -> bytes:
    """PNG bytes minus text and timestamp chunks, for byte comparisons."""
    magic = b"\x89PNG\r\n\x1a\n"
    if not data.startswith(magic):
        return data
    out = [magic]
    off = len(magic)
    while off + 8 <= len(data):
        length = int.from_bytes(data[off:off + 4], "big")
        ctype = data[off + 4:off + 8]
        end = off + 12 + length
        if ctype not in (b"tEXt", b"zTXt", b"iTXt", b"tIME"):
            out.append(data[off:end])
        off = end
    return b"".join(out)


def render(spec: FigureSpec) -> Path:
    """Draw the spec's figure and return the written image path."""
    series = _collect_series(spec)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    try:
        if not series:
            print(f"warning: no data rows in "
                  f"{', '.join(str(p) for p in spec.inputs)}; "
                  f"rendering empty axes", file=sys.stderr)
        for i, key in enumerate(sorted(series)):
            xs, ys, errs = zip(*series[key])
            style = dict(color=_COLORS[i % len(_COLORS)],
                         marker=_MARKERS[i % len(_MARKERS)],
                         markersize=4, linewidth=1.4,
                         label=_label(key, spec.group_by) or spec.y)
            if spec.y_err:
                ax.errorbar(xs, ys, yerr=errs, capsize=3, **style)
            else:
                ax.plot(xs, ys, **style)
        ax.set_xlabel(spec.x_label or spec.x)
        ax.set_ylabel(spec.y_label or spec.y)
        if spec.title:
            ax.set_title(spec.title)
        ax.grid(True, alpha=0.4)
        if series:
            ax.legend()
        spec.output.parent.mkdir(parents=True, exist_ok=True)
        save_kwargs = {"dpi": 120}
        if spec.output.suffix.lower() == ".png":
            save_kwargs["metadata"] = {"Software": None}
        fig.savefig(spec.output, **save_kwargs)
    finally:
        plt.close(fig)
    return spec.output
