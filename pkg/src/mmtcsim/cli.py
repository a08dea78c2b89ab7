"""Command-line front end: run sweeps, validate configs, list presets.

`run` executes the full (variant x lambda x seed) grid of a sweep file,
reduces each (variant, lambda) cell to one KPI row, and writes the CSV
next to a plain-text manifest recording everything needed to reproduce
the bytes: config hash, applied overrides, seeds, and library versions.
Points are independent, so `--jobs N` fans them out over processes; the
merge order is fixed by the grid position, never by completion order, so
output is identical at any parallelism.

Config arguments resolve first as file paths, then as names of bundled
presets (`mmtcsim run ostsap-throughput`).
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources as importlib_resources
from pathlib import Path

from . import __version__
from .config import (
    ConfigError,
    SweepConfig,
    arq_for,
    load_config,
    params_for,
    validate_config,
)
from .core import ArqConfig, ScenarioConfig, TrafficConfig, run_scenario
from .metrics import KpiReport, write_reports_csv

OUT_DIR_ENV = "MMTCSIM_OUT"


def preset_dir():
    return importlib_resources.files("mmtcsim.presets")


def preset_names() -> list:
    return sorted(p.name[:-5] for p in preset_dir().iterdir()
                  if p.name.endswith(".toml"))


def resolve_config_path(arg: str):
    """A real file wins; otherwise fall back to the bundled preset name."""
    path = Path(arg)
    if path.is_file():
        return path
    candidate = preset_dir() / f"{arg}.toml"
    if candidate.is_file():
        return candidate
    raise ConfigError(
        f"no config file '{arg}' and no preset of that name "
        f"(presets: {', '.join(preset_names())})")


def _run_point(job):
    (key, scheme, params, arq_fields, lam, seed, horizon, traffic_kwargs) = job
    scenario = ScenarioConfig(
        scheme=scheme,
        traffic=TrafficConfig(lam, **traffic_kwargs),
        seed=seed,
        horizon_ttis=horizon,
        arq=ArqConfig(*arq_fields),
        scheme_params=params)
    return key, run_scenario(scenario)


def execute_sweep(cfg: SweepConfig, jobs: int = 1) -> list:
    """All grid points reduced to KpiReports in config order."""
    point_jobs = []
    for run_idx, run in enumerate(cfg.runs):
        arq = arq_for(run, cfg)
        arq_fields = (arq.ack_delay_ttis, arq.backoff_min_ttis,
                      arq.backoff_max_ttis, arq.max_retransmissions)
        for lam_idx, lam in enumerate(cfg.lambdas):
            params = params_for(run, lam)
            for seed in cfg.seeds:
                point_jobs.append(((run_idx, lam_idx, seed), run.scheme,
                                   params, arq_fields, lam, seed,
                                   cfg.horizon_ttis, cfg.traffic_kwargs))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = dict(pool.map(_run_point, point_jobs))
    else:
        results = dict(map(_run_point, point_jobs))

    reports = []
    for run_idx, run in enumerate(cfg.runs):
        for lam_idx, lam in enumerate(cfg.lambdas):
            traces = [results[(run_idx, lam_idx, seed)] for seed in cfg.seeds]
            reports.append(KpiReport.from_traces(run.label, lam, traces))
    return reports


def write_manifest(path, cfg: SweepConfig, overrides, csv_name: str) -> None:
    digest = hashlib.sha256(Path(cfg.path).read_bytes()).hexdigest()
    lines = [
        f"config = {cfg.path}",
        f"config_sha256 = {digest}",
        f"overrides = {' '.join(overrides) if overrides else '(none)'}",
        f"output = {csv_name}",
        f"schemes = {', '.join(r.label for r in cfg.runs)}",
        f"lambdas = {', '.join(f'{x:g}' for x in cfg.lambdas)}",
        f"seeds = {', '.join(str(s) for s in cfg.seeds)}",
        f"horizon_ttis = {cfg.horizon_ttis}",
        f"mmtcsim_version = {__version__}",
        f"python = {sys.version.split()[0]}",
    ]
    import numpy
    lines.append(f"numpy = {numpy.__version__}")
    Path(path).write_text("\n".join(lines) + "\n")


def cmd_run(args) -> int:
    path = resolve_config_path(args.config)
    cfg = load_config(path, overrides=args.override)
    problems = validate_config(cfg)
    if problems:
        for p in problems:
            print(f"error: {p}", file=sys.stderr)
        return 1
    out_dir = Path(args.out or os.environ.get(OUT_DIR_ENV, "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    reports = execute_sweep(cfg, jobs=args.jobs)
    csv_path = out_dir / cfg.output
    write_reports_csv(csv_path, reports)
    manifest_path = csv_path.with_suffix(".manifest")
    write_manifest(manifest_path, cfg, args.override, cfg.output)
    print(f"wrote {csv_path}")
    print(f"wrote {manifest_path}")
    return 0


def cmd_validate(args) -> int:
    path = resolve_config_path(args.config)
    cfg = load_config(path, overrides=args.override)
    problems = validate_config(cfg)
    for p in problems:
        print(f"error: {p}", file=sys.stderr)
    if problems:
        return 1
    points = len(cfg.runs) * len(cfg.lambdas) * len(cfg.seeds)
    print(f"{path}: ok ({len(cfg.runs)} variant(s), "
          f"{len(cfg.lambdas)} lambda point(s), {len(cfg.seeds)} seed(s), "
          f"{points} runs)")
    return 0


def cmd_list_presets(_args) -> int:
    for name in preset_names():
        cfg = load_config(preset_dir() / f"{name}.toml")
        labels = ", ".join(r.label for r in cfg.runs)
        print(f"{name}: {labels}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmtcsim",
        description="Slotted-TTI simulator for massive machine-type "
                    "random access schemes")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a sweep and write CSV + "
                                       "manifest")
    run_p.add_argument("config", help="sweep file path or bundled preset name")
    run_p.add_argument("--override", action="append", default=[],
                       metavar="KEY=VALUE",
                       help="override a config key (dotted path; bare keys "
                            "target [sweep])")
    run_p.add_argument("--jobs", type=int, default=1,
                       help="worker processes for independent grid points")
    run_p.add_argument("--out", default=None,
                       help=f"output directory (default ${OUT_DIR_ENV} "
                            f"or the working directory)")
    run_p.set_defaults(func=cmd_run)

    val_p = sub.add_parser("validate", help="check a sweep file without "
                                            "running it")
    val_p.add_argument("config", help="sweep file path or bundled preset name")
    val_p.add_argument("--override", action="append", default=[],
                       metavar="KEY=VALUE")
    val_p.set_defaults(func=cmd_validate)

    lp = sub.add_parser("list-presets", help="bundled sweep files")
    lp.set_defaults(func=cmd_list_presets)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
