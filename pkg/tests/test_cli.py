"""Sweep config parsing, validation diagnostics, and the CLI surface."""

import csv

import pytest

from mmtcsim.cli import main, preset_names, resolve_config_path
from mmtcsim.config import (
    ConfigError,
    arq_for,
    load_config,
    params_for,
    parse_override,
    validate_config,
)
from mmtcsim.core import ArqConfig

MINIMAL = """
[sweep]
lambdas = [5.0]
seeds = 2
horizon_ttis = 100

[[runs]]
scheme = "slotted-aloha"
"""


def write_cfg(tmp_path, text, name="sweep.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_minimal_config_defaults(tmp_path):
    cfg = load_config(write_cfg(tmp_path, MINIMAL))
    assert cfg.lambdas == [5.0]
    assert cfg.seeds == [1, 2]
    assert cfg.output == "sweep.csv"
    assert cfg.runs[0].label == "slotted-aloha"


def test_unknown_sweep_key_rejected(tmp_path):
    bad = MINIMAL.replace("horizon_ttis = 100", "horizon_tti = 100")
    with pytest.raises(ConfigError, match="horizon_tti"):
        load_config(write_cfg(tmp_path, bad))


def test_unknown_top_level_section_rejected(tmp_path):
    with pytest.raises(ConfigError, match="extras"):
        load_config(write_cfg(tmp_path, MINIMAL + "\n[extras]\nx = 1\n"))


def test_toml_syntax_error_carries_position(tmp_path):
    with pytest.raises(ConfigError, match="line"):
        load_config(write_cfg(tmp_path, "[sweep\nlambdas = [1]\n"))


def test_unknown_scheme_rejected_with_known_list(tmp_path):
    bad = MINIMAL.replace("slotted-aloha", "carrier-pigeon")
    with pytest.raises(ConfigError, match="ccra"):
        load_config(write_cfg(tmp_path, bad))


def test_duplicate_labels_rejected(tmp_path):
    dup = MINIMAL + "\n[[runs]]\nscheme = \"slotted-aloha\"\n"
    with pytest.raises(ConfigError, match="duplicate label"):
        load_config(write_cfg(tmp_path, dup))


def test_scalar_lambda_listified_and_negatives_rejected(tmp_path):
    cfg = load_config(write_cfg(tmp_path, MINIMAL.replace("[5.0]", "7")))
    assert cfg.lambdas == [7.0]
    with pytest.raises(ConfigError, match="arrival rate"):
        load_config(write_cfg(tmp_path, MINIMAL.replace("[5.0]", "[-1]")))


def test_duplicate_seeds_rejected(tmp_path):
    bad = MINIMAL.replace("seeds = 2", "seeds = [3, 3]")
    with pytest.raises(ConfigError, match="duplicate seeds"):
        load_config(write_cfg(tmp_path, bad))


def test_parse_override_forms():
    assert parse_override("horizon_ttis=500") == (
        ("sweep", "horizon_ttis"), 500)
    path, value = parse_override("lambdas=[0, 5]")
    assert path == ("sweep", "lambdas") and value == [0, 5]
    assert parse_override("traffic.packet_size_bytes=16") == (
        ("traffic", "packet_size_bytes"), 16)
    with pytest.raises(ConfigError):
        parse_override("no-equals-sign")


def test_override_applies_before_validation(tmp_path):
    cfg = load_config(write_cfg(tmp_path, MINIMAL),
                      overrides=["lambdas=[1, 2]", "horizon_ttis=50"])
    assert cfg.lambdas == [1.0, 2.0]
    assert cfg.horizon_ttis == 50


def test_mean_arrivals_injection(tmp_path):
    text = MINIMAL.replace("slotted-aloha", "sbaia")
    cfg = load_config(write_cfg(tmp_path, text))
    assert params_for(cfg.runs[0], 24.0)["mean_arrivals"] == 24.0
    cfg.runs[0].params["mean_arrivals"] = 16.0
    assert params_for(cfg.runs[0], 24.0)["mean_arrivals"] == 16.0
    # Schemes without the parameter stay untouched.
    plain = load_config(write_cfg(tmp_path, MINIMAL, "p.toml"))
    assert "mean_arrivals" not in params_for(plain.runs[0], 24.0)


def test_arq_resolution_layers(tmp_path):
    text = MINIMAL + """
[arq]
backoff_max_ttis = 30

[[runs]]
scheme = "multi-stage-baseline"

[[runs]]
scheme = "notaft"
label = "notaft-tight"
arq = { backoff_max_ttis = 4 }
"""
    cfg = load_config(write_cfg(tmp_path, text))
    by_label = {r.label: r for r in cfg.runs}
    # Plain scheme takes the file-level override over framework defaults.
    assert arq_for(by_label["slotted-aloha"], cfg).backoff_max_ttis == 30
    # The baseline starts from its own timing, then applies the file layer.
    base = arq_for(by_label["multi-stage-baseline"], cfg)
    assert base.max_retransmissions == 9
    assert base.backoff_max_ttis == 30
    # Run-level table wins over both.
    assert arq_for(by_label["notaft-tight"], cfg).backoff_max_ttis == 4


def test_baseline_keeps_shipped_timing_without_overrides(tmp_path):
    text = MINIMAL.replace("slotted-aloha", "multi-stage-baseline")
    cfg = load_config(write_cfg(tmp_path, text))
    assert arq_for(cfg.runs[0], cfg) == ArqConfig(3, 0, 20, 9)


def test_validate_reports_bad_scheme_params(tmp_path):
    text = MINIMAL + "params = { opportunitees = 50 }\n"
    problems = validate_config(load_config(write_cfg(tmp_path, text)))
    assert any("opportunitees" in p for p in problems)


def test_validate_reports_frame_violation(tmp_path):
    text = MINIMAL.replace('scheme = "slotted-aloha"',
                           'scheme = "craplnc"\nparams = { replicas = 12 }')
    problems = validate_config(load_config(write_cfg(tmp_path, text)))
    assert any("replica" in p for p in problems)


def test_validate_reports_partition_violation(tmp_path):
    text = MINIMAL + "resources = { control_prbs = 10, data_prbs = 30 }\n"
    problems = validate_config(load_config(write_cfg(tmp_path, text)))
    assert any("50-PRB grid" in p for p in problems)


def test_all_presets_validate_clean():
    for name in preset_names():
        cfg = load_config(resolve_config_path(name))
        assert validate_config(cfg) == [], name


def test_unknown_preset_errors_with_choices():
    with pytest.raises(ConfigError, match="sa-baseline"):
        resolve_config_path("no-such-preset")


def test_run_writes_csv_and_manifest(tmp_path):
    cfg_path = write_cfg(tmp_path, MINIMAL)
    rc = main(["run", str(cfg_path), "--out", str(tmp_path / "out")])
    assert rc == 0
    csv_path = tmp_path / "out" / "sweep.csv"
    manifest = tmp_path / "out" / "sweep.manifest"
    assert csv_path.is_file() and manifest.is_file()
    assert "config_sha256 = " in manifest.read_text()
    with open(csv_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1
    assert rows[0]["scheme"] == "slotted-aloha"


def test_rerun_is_byte_identical(tmp_path):
    cfg_path = write_cfg(tmp_path, MINIMAL)
    for d in ("a", "b"):
        assert main(["run", str(cfg_path), "--out", str(tmp_path / d)]) == 0
    assert ((tmp_path / "a" / "sweep.csv").read_bytes()
            == (tmp_path / "b" / "sweep.csv").read_bytes())


def test_parallel_jobs_match_sequential(tmp_path):
    text = MINIMAL.replace("lambdas = [5.0]", "lambdas = [5.0, 15.0]")
    cfg_path = write_cfg(tmp_path, text)
    assert main(["run", str(cfg_path), "--out", str(tmp_path / "s")]) == 0
    assert main(["run", str(cfg_path), "--jobs", "3",
                 "--out", str(tmp_path / "p")]) == 0
    assert ((tmp_path / "s" / "sweep.csv").read_bytes()
            == (tmp_path / "p" / "sweep.csv").read_bytes())


def test_zero_lambda_override_zeroes_throughput(tmp_path):
    cfg_path = write_cfg(tmp_path, MINIMAL)
    rc = main(["run", str(cfg_path), "--override", "lambdas=0",
               "--out", str(tmp_path / "z")])
    assert rc == 0
    with open(tmp_path / "z" / "sweep.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert all(float(r["throughput_mean"]) == 0.0 for r in rows)


def test_out_dir_env_var(tmp_path, monkeypatch):
    monkeypatch.setenv("MMTCSIM_OUT", str(tmp_path / "envout"))
    cfg_path = write_cfg(tmp_path, MINIMAL)
    assert main(["run", str(cfg_path)]) == 0
    assert (tmp_path / "envout" / "sweep.csv").is_file()


def test_validate_command_flags_bad_config(tmp_path, capsys):
    bad = MINIMAL + "params = { oportunities = 50 }\n"
    rc = main(["validate", str(write_cfg(tmp_path, bad))])
    assert rc == 1
    assert "oportunities" in capsys.readouterr().err


def test_missing_config_exits_with_error(capsys):
    assert main(["run", "definitely-missing"]) == 2
    assert "presets" in capsys.readouterr().err


def test_list_presets_names_all(capsys):
    assert main(["list-presets"]) == 0
    out = capsys.readouterr().out
    for name in ("ostsap-throughput", "ccra-throughput", "sa-baseline"):
        assert name in out
