import random

import pytest

from plotkit import SpecError, load_spec, render, strip_metadata

HEADER = ("scheme,lambda,seed_count,throughput_mean,throughput_ci,"
          "latency_mean_ms,latency_p50_ms,latency_p95_ms,latency_ci,"
          "drop_rate,pending")


def result_row(scheme, lam, thr):
    return (f"{scheme},{lam},5,{thr},0.12,4.5,3.5,9.5,0.3,0.01,2")


def write_csv(path, rows):
    path.write_text("\n".join([HEADER, *rows]) + "\n")


def write_spec(tmp_path, body, name="fig.toml"):
    path = tmp_path / name
    path.write_text(body)
    return path


SPEC = """
[figure]
inputs = ["results.csv"]
group_by = ["scheme"]
y = "throughput_mean"
y_err = "throughput_ci"
x_label = "arrival rate (devices/TTI)"
y_label = "served devices/TTI"
output = "fig.png"
"""


def test_renders_multi_series_png(tmp_path):
    write_csv(tmp_path / "results.csv",
              [result_row("aloha", 10, 8.1), result_row("aloha", 20, 12.9),
               result_row("coded", 10, 9.7), result_row("coded", 20, 18.2)])
    out = render(load_spec(write_spec(tmp_path, SPEC)))
    assert out == tmp_path / "fig.png"
    assert out.read_bytes().startswith(b"\x89PNG")
    assert out.stat().st_size > 1000


def test_row_order_does_not_change_output(tmp_path):
    rows = [result_row(s, lam, lam * 0.4 + i)
            for i, s in enumerate(["a", "b", "c"])
            for lam in (30, 10, 20)]
    images = []
    for shuffle_seed in (1, 2):
        random.Random(shuffle_seed).shuffle(rows)
        write_csv(tmp_path / "results.csv", rows)
        out = render(load_spec(write_spec(tmp_path, SPEC)))
        images.append(strip_metadata(out.read_bytes()))
    assert images[0] == images[1]


def test_rerender_is_byte_identical_metadata_stripped(tmp_path):
    write_csv(tmp_path / "results.csv", [result_row("aloha", 10, 8.0)])
    spec = load_spec(write_spec(tmp_path, SPEC))
    first = strip_metadata(render(spec).read_bytes())
    second = strip_metadata(render(spec).read_bytes())
    assert first == second


def test_missing_column_names_column_and_file(tmp_path):
    (tmp_path / "results.csv").write_text(
        "scheme,lambda,throughput_mean\naloha,10,8.0\n")
    with pytest.raises(SpecError, match=r"'throughput_ci'.*results\.csv"):
        render(load_spec(write_spec(tmp_path, SPEC)))


def test_headerless_file_reports_missing_column(tmp_path):
    (tmp_path / "results.csv").write_text("")
    with pytest.raises(SpecError, match="lambda"):
        render(load_spec(write_spec(tmp_path, SPEC)))


def test_missing_input_file(tmp_path):
    with pytest.raises(SpecError, match="not found"):
        render(load_spec(write_spec(tmp_path, SPEC)))


def test_empty_body_warns_and_writes_empty_axes(tmp_path, capsys):
    (tmp_path / "results.csv").write_text(HEADER + "\n")
    out = render(load_spec(write_spec(tmp_path, SPEC)))
    assert out.exists()
    assert "no data rows" in capsys.readouterr().err


def test_non_numeric_value_rejected(tmp_path):
    write_csv(tmp_path / "results.csv",
              ["aloha,ten,5,8.0,0.1,4.5,3.5,9.5,0.3,0.0,0"])
    with pytest.raises(SpecError, match="'lambda'.*'ten'"):
        render(load_spec(write_spec(tmp_path, SPEC)))


def test_nan_values_render_as_gaps(tmp_path):
    # A degenerate sweep cell reports nan latency; rendering must not fail.
    write_csv(tmp_path / "results.csv",
              ["aloha,10,5,8.0,0.1,nan,nan,nan,nan,0.0,0",
               "aloha,20,5,12.0,0.1,5.5,4.5,9.5,0.2,0.0,0"])
    spec_text = SPEC.replace('y = "throughput_mean"', 'y = "latency_mean_ms"')
    spec_text = spec_text.replace('y_err = "throughput_ci"',
                                  'y_err = "latency_ci"')
    out = render(load_spec(write_spec(tmp_path, spec_text)))
    assert out.exists()


def test_inputs_never_mutated(tmp_path):
    csv_path = tmp_path / "results.csv"
    write_csv(csv_path, [result_row("aloha", 10, 8.0)])
    before = csv_path.read_bytes()
    render(load_spec(write_spec(tmp_path, SPEC)))
    assert csv_path.read_bytes() == before


def test_multiple_inputs_concatenate(tmp_path):
    write_csv(tmp_path / "a.csv", [result_row("aloha", 10, 8.0)])
    write_csv(tmp_path / "b.csv", [result_row("coded", 10, 9.0)])
    text = SPEC.replace('inputs = ["results.csv"]',
                        'inputs = ["a.csv", "b.csv"]')
    out = render(load_spec(write_spec(tmp_path, text)))
    assert out.exists()


def test_ungrouped_spec_plots_single_series(tmp_path):
    write_csv(tmp_path / "results.csv",
              [result_row("aloha", 10, 8.0), result_row("aloha", 20, 12.0)])
    text = SPEC.replace('group_by = ["scheme"]\n', "")
    out = render(load_spec(write_spec(tmp_path, text)))
    assert out.exists()


def test_strip_metadata_removes_text_chunks(tmp_path):
    write_csv(tmp_path / "results.csv", [result_row("aloha", 10, 8.0)])
    out = render(load_spec(write_spec(tmp_path, SPEC)))
    data = out.read_bytes()
    stripped = strip_metadata(data)
    assert stripped.startswith(b"\x89PNG")
    assert b"tEXt" not in stripped
    assert strip_metadata(b"not a png") == b"not a png"
