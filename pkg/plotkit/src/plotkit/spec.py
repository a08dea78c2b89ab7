"""Figure spec files: what to read, how to group rows, where to draw.

Specs use the same structured key/value text format as the simulator's
sweep configs. Unknown keys are rejected rather than ignored, so a typo
never silently produces a default figure.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib


class SpecError(Exception):
    """Unreadable or invalid figure spec, or inputs that do not match it."""


_FIGURE_KEYS = {"inputs", "group_by", "x", "y", "y_err",
                "x_label", "y_label", "title", "output"}
_REQUIRED_KEYS = ("inputs", "y", "output")


@dataclass
class FigureSpec:
    """One figure: rows from `inputs`, one line per distinct `group_by` tuple.

    Relative paths resolve against the directory holding the spec file, so
    a spec can travel together with the CSVs it reads. An empty `group_by`
    plots all rows as a single series.
    """

    inputs: list
    group_by: list
    y: str
    output: Path
    x: str = "lambda"
    y_err: str = ""  # optional error-bar column; empty means none
    x_label: str = ""
    y_label: str = ""
    title: str = ""

    def columns_needed(self) -> list:
        cols = [self.x, self.y, *self.group_by]
        if self.y_err:
            cols.append(self.y_err)
        return cols


def _string_list(value, key: str) -> list:
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise SpecError(f"'{key}' must be a list of strings")
    return list(value)


def load_spec(path) -> FigureSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise SpecError(f"spec file not found: {path}") from None
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise SpecError(f"{path}: {exc}") from None

    unknown = set(raw) - {"figure"}
    if unknown:
        raise SpecError(f"{path}: unknown section(s) {sorted(unknown)}")
    fig = raw.get("figure")
    if not isinstance(fig, dict):
        raise SpecError(f"{path}: missing [figure] section")
    unknown = set(fig) - _FIGURE_KEYS
    if unknown:
        raise SpecError(f"{path}: unknown key(s) in [figure]: {sorted(unknown)}")
    for key in _REQUIRED_KEYS:
        if key not in fig:
            raise SpecError(f"{path}: [figure] is missing required key '{key}'")

    inputs = _string_list(fig["inputs"], "inputs")
    if not inputs:
        raise SpecError(f"{path}: 'inputs' must name at least one file")
    group_by = _string_list(fig.get("group_by", []), "group_by")
    for key in ("x", "y", "y_err", "x_label", "y_label", "title", "output"):
        if key in fig and not isinstance(fig[key], str):
            raise SpecError(f"{path}: '{key}' must be a string")

    base = path.parent
    return FigureSpec(
        inputs=[base / p for p in inputs],
        group_by=group_by,
        y=fig["y"],
        output=base / fig["output"],
        x=fig.get("x", "lambda"),
        y_err=fig.get("y_err", ""),
        x_label=fig.get("x_label", ""),
        y_label=fig.get("y_label", ""),
        title=fig.get("title", ""),
    )
