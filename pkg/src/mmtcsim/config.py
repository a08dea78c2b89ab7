"""Sweep configuration files: parsing, validation, override plumbing.

A sweep file is TOML with four sections. `[sweep]` fixes the grid (lambda
points, seeds, horizon, output name), `[arq]` and `[traffic]` optionally
override framework timing, and each `[[runs]]` table names one scheme
variant with its parameter block. ARQ settings resolve in layers: the
scheme's own default (the multi-stage baseline ships special timing), then
the file-level `[arq]` table, then the per-run `[runs.arq]` table, most
specific last.

Unknown keys are rejected everywhere so a typo cannot silently fall back
to a default. Schemes whose parameters include `mean_arrivals` (signature
access dimensions its frame from the expected load) get the sweep point's
lambda injected automatically unless the run pins a value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

try:
    import tomllib
except ImportError:  # Python 3.10
    import tomli as tomllib

from .core import ArqConfig, TrafficConfig
from .resources import check_resource_plan
from .schemes import SCHEME_REGISTRY

_SWEEP_KEYS = {"lambdas", "seeds", "horizon_ttis", "output"}
_ARQ_KEYS = {"ack_delay_ttis", "backoff_min_ttis", "backoff_max_ttis",
             "max_retransmissions"}
_TRAFFIC_KEYS = {"packet_size_bytes", "mean_waiting_time_ms"}
_RUN_KEYS = {"scheme", "label", "params", "arq", "resources"}
_RESOURCE_KEYS = {"total_prbs", "control_prbs", "data_prbs", "spatial_layers"}
_TOP_KEYS = {"sweep", "arq", "traffic", "runs"}


class ConfigError(Exception):
    """A sweep file that cannot be used; message says where and why."""


@dataclass
class SweepRun:
    """One scheme variant inside a sweep."""

    scheme: str
    label: str
    params: dict = field(default_factory=dict)
    arq_overrides: dict = field(default_factory=dict)
    resources: Optional[dict] = None  # declared PRB split, checked not consumed


@dataclass
class SweepConfig:
    """Parsed sweep file: grid x variants, plus framework overrides."""

    path: str
    lambdas: list
    seeds: list
    horizon_ttis: int
    output: str
    runs: list
    arq_overrides: dict = field(default_factory=dict)
    traffic_kwargs: dict = field(default_factory=dict)


def _reject_unknown(table: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ConfigError(
            f"{where}: unknown key(s) {', '.join(unknown)} "
            f"(allowed: {', '.join(sorted(allowed))})")


def _require_table(value, where: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{where}: expected a table")
    return value


def parse_override(text: str) -> tuple:
    """Split a --override argument into (dotted key path, parsed value).

    The value is parsed as a TOML literal so lists and numbers work
    (`lambdas=[0,5]`, `horizon_ttis=500`); anything unparseable stays a
    string. A path without dots targets the [sweep] table.
    """
    if "=" not in text:
        raise ConfigError(f"override '{text}' is not of the form key=value")
    key, raw_value = text.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError(f"override '{text}' has an empty key")
    try:
        value = tomllib.loads(f"v = {raw_value}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw_value
    path = key.split(".")
    if len(path) == 1:
        path = ["sweep", path[0]]
    return tuple(path), value


def _apply_override(raw: dict, path: tuple, value) -> None:
    node = raw
    for part in path[:-1]:
        nxt = node.setdefault(part, {})
        if not isinstance(nxt, dict):
            raise ConfigError(
                f"override path '{'.'.join(path)}' crosses the non-table "
                f"key '{part}'")
        node = nxt
    node[path[-1]] = value


def _as_lambda_grid(value, where: str) -> list:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        value = [value]
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{where}: lambdas must be a non-empty list")
    grid = []
    for v in value:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or v < 0:
            raise ConfigError(f"{where}: bad arrival rate {v!r}")
        grid.append(float(v))
    return grid


def _as_seed_list(value, where: str) -> list:
    # An integer n is shorthand for seeds 1..n.
    if isinstance(value, int) and not isinstance(value, bool):
        if value < 1:
            raise ConfigError(f"{where}: seed count must be positive")
        return list(range(1, value + 1))
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{where}: seeds must be a list or a count")
    seeds = []
    for v in value:
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"{where}: bad seed {v!r}")
        seeds.append(v)
    if len(set(seeds)) != len(seeds):
        raise ConfigError(f"{where}: duplicate seeds")
    return seeds


def load_config(path, overrides=()) -> SweepConfig:
    """Parse a sweep file, applying --override entries before validation."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        # tomllib messages carry line and column positions.
        raise ConfigError(f"{path}: {exc}") from exc

    for text in overrides:
        key_path, value = parse_override(text)
        _apply_override(raw, key_path, value)

    _reject_unknown(raw, _TOP_KEYS, str(path))
    sweep = _require_table(raw.get("sweep", {}), f"{path} [sweep]")
    _reject_unknown(sweep, _SWEEP_KEYS, f"{path} [sweep]")
    if "lambdas" not in sweep:
        raise ConfigError(f"{path} [sweep]: missing lambdas")
    lambdas = _as_lambda_grid(sweep["lambdas"], f"{path} [sweep]")
    seeds = _as_seed_list(sweep.get("seeds", 1), f"{path} [sweep]")
    horizon = sweep.get("horizon_ttis", 10_000)
    if isinstance(horizon, bool) or not isinstance(horizon, int) or horizon <= 0:
        raise ConfigError(f"{path} [sweep]: horizon_ttis must be a positive "
                          f"integer")

    arq_over = _require_table(raw.get("arq", {}), f"{path} [arq]")
    _reject_unknown(arq_over, _ARQ_KEYS, f"{path} [arq]")
    traffic = _require_table(raw.get("traffic", {}), f"{path} [traffic]")
    _reject_unknown(traffic, _TRAFFIC_KEYS, f"{path} [traffic]")

    raw_runs = raw.get("runs", [])
    if not isinstance(raw_runs, list) or not raw_runs:
        raise ConfigError(f"{path}: needs at least one [[runs]] table")
    runs, labels = [], set()
    for i, entry in enumerate(raw_runs):
        where = f"{path} [[runs]] #{i + 1}"
        entry = _require_table(entry, where)
        _reject_unknown(entry, _RUN_KEYS, where)
        if "scheme" not in entry:
            raise ConfigError(f"{where}: missing scheme")
        scheme = entry["scheme"]
        if scheme not in SCHEME_REGISTRY:
            known = ", ".join(sorted(SCHEME_REGISTRY))
            raise ConfigError(f"{where}: unknown scheme '{scheme}' "
                              f"(known: {known})")
        label = entry.get("label", scheme)
        if label in labels:
            raise ConfigError(f"{where}: duplicate label '{label}'")
        labels.add(label)
        run_arq = _require_table(entry.get("arq", {}), f"{where} arq")
        _reject_unknown(run_arq, _ARQ_KEYS, f"{where} arq")
        resources = entry.get("resources")
        if resources is not None:
            resources = _require_table(resources, f"{where} resources")
            _reject_unknown(resources, _RESOURCE_KEYS, f"{where} resources")
        runs.append(SweepRun(
            scheme=scheme, label=label,
            params=dict(_require_table(entry.get("params", {}),
                                       f"{where} params")),
            arq_overrides=dict(run_arq), resources=resources))

    default_name = getattr(path, "stem", None) or str(path).rsplit("/", 1)[-1]
    if default_name.endswith(".toml"):
        default_name = default_name[:-5]
    return SweepConfig(
        path=str(path), lambdas=lambdas, seeds=seeds, horizon_ttis=horizon,
        output=sweep.get("output", f"{default_name}.csv"), runs=runs,
        arq_overrides=dict(arq_over), traffic_kwargs=dict(traffic))


def arq_for(run: SweepRun, cfg: SweepConfig) -> ArqConfig:
    """Resolve the ARQ layers: scheme default, file [arq], run arq."""
    cls = SCHEME_REGISTRY[run.scheme]
    base = cls.default_arq() if hasattr(cls, "default_arq") else ArqConfig()
    merged = {
        "ack_delay_ttis": base.ack_delay_ttis,
        "backoff_min_ttis": base.backoff_min_ttis,
        "backoff_max_ttis": base.backoff_max_ttis,
        "max_retransmissions": base.max_retransmissions,
    }
    merged.update(cfg.arq_overrides)
    merged.update(run.arq_overrides)
    return ArqConfig(**merged)


def params_for(run: SweepRun, lam: float) -> dict:
    """Per-point parameters, injecting lambda where dimensioning needs it."""
    params = dict(run.params)
    if ("mean_arrivals" in SCHEME_REGISTRY[run.scheme].DEFAULTS
            and params.get("mean_arrivals") is None):
        params["mean_arrivals"] = lam
    return params


def validate_config(cfg: SweepConfig) -> list:
    """Semantic diagnostics; empty list means the sweep is runnable.

    Every variant is instantiated at every lambda point (construction is
    where plan invariants live), without simulating anything.
    """
    from .schemes import make_scheme

    problems = []
    for run in cfg.runs:
        where = f"run '{run.label}'"
        if run.resources is not None:
            r = {"total_prbs": 50, "control_prbs": 0, "data_prbs": 50,
                 "spatial_layers": 1, **run.resources}
            problems += [f"{where}: {msg}" for msg in check_resource_plan(
                r["total_prbs"], r["control_prbs"], r["data_prbs"],
                r["spatial_layers"])]
        try:
            arq = arq_for(run, cfg)
        except (ValueError, TypeError) as exc:
            problems.append(f"{where}: bad ARQ settings: {exc}")
            continue
        for lam in cfg.lambdas:
            try:
                TrafficConfig(lam, **cfg.traffic_kwargs)
                make_scheme(run.scheme, params_for(run, lam), arq, seed=0)
            except (ValueError, KeyError, TypeError) as exc:
                problems.append(f"{where} at lambda={lam:g}: {exc}")
                break
    return problems
