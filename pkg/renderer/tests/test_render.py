import csv
import hashlib
import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from figrender import SpecError, extract, load_spec, render
from figrender.cli import main


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def make_spec(tmp_path: Path, name: str, **fields) -> Path:
    path = tmp_path / name
    path.write_text(json.dumps(fields))
    return path


@pytest.fixture
def sweep_csv(tmp_path):
    path = tmp_path / "zz_sweep_dev_base.csv"
    rows = [[f"{5.2 + 0.01 * i:.17e}", f"{(1e-3 * (i - 3)):.17e}",
             f"{(1.1e-3 * (i - 3)):.17e}"] for i in range(8)]
    write_csv(path, ["omega_tb_GHz", "zz_numeric_GHz", "zz_pert_GHz"], rows)
    return path


@pytest.fixture
def map_csv(tmp_path):
    path = tmp_path / "zz_map_dev_base.csv"
    rows = []
    for i in range(4):
        for j in range(5):
            val = "nan" if (i, j) == (1, 2) else f"{(1e-4 * (i + j + 1)):.17e}"
            rows.append([f"{-0.1 + 0.05 * i:.17e}", f"{0.3 + 0.1 * j:.17e}",
                         val])
    write_csv(path, ["delta_GHz", "bus_detuning_GHz", "zz_GHz"], rows)
    return path


@pytest.fixture
def matrix_csv(tmp_path):
    path = tmp_path / "x_error_matrix_dev_base.csv"
    labels = ["Q0", "Q1", "Q2"]
    rows = []
    for i, a in enumerate(labels):
        for j, b in enumerate(labels):
            if abs(i - j) == 2:
                continue  # incompatible pair: hole in the matrix
            rows.append([a, b, f"{1e-6 * (1 + i + 2 * j):.17e}"])
    write_csv(path, ["row", "col", "error"], rows)
    return path


def test_extract_is_verbatim(tmp_path, sweep_csv):
    spec = load_spec(make_spec(
        tmp_path, "s.json", kind="line", csv=str(sweep_csv), out="fig.png",
        x="omega_tb_GHz", y=["zz_numeric_GHz", "zz_pert_GHz"]))
    out = tmp_path / "extract.csv"
    extract(spec, out)
    with open(sweep_csv, newline="") as fh:
        original = list(csv.reader(fh))
    with open(out, newline="") as fh:
        extracted = list(csv.reader(fh))
    assert extracted == original  # same columns, same order, same strings


def test_extract_subset_and_order(tmp_path, sweep_csv):
    spec = load_spec(make_spec(
        tmp_path, "s.json", kind="line", csv=str(sweep_csv), out="fig.png",
        x="omega_tb_GHz", y="zz_pert_GHz"))
    out = tmp_path / "extract.csv"
    extract(spec, out)
    with open(out, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["omega_tb_GHz", "zz_pert_GHz"]
    with open(sweep_csv, newline="") as fh:
        original = list(csv.reader(fh))
    assert [r[1] for r in rows[1:]] == [r[2] for r in original[1:]]


def test_line_render(tmp_path, sweep_csv):
    spec = load_spec(make_spec(
        tmp_path, "s.json", kind="line", csv=str(sweep_csv),
        out="line.png", x="omega_tb_GHz", y=["zz_numeric_GHz"],
        yscale="log", absolute=True, xlabel="bus frequency (GHz)",
        ylabel="|ZZ| (GHz)"))
    out = render(spec)
    assert out.exists() and out.stat().st_size > 0


def test_trajectory_render(tmp_path):
    path = tmp_path / "gate_time_sweep_dev_base.csv"
    write_csv(path, ["duration_ns", "leak_population"],
              [[f"{50 + 5 * i:.17e}", f"{1e-4 * (1 + (i % 3)):.17e}"]
               for i in range(13)])
    spec = load_spec(make_spec(
        tmp_path, "s.json", kind="trajectory", csv=str(path),
        out="traj.png", x="duration_ns", y=["leak_population"],
        yscale="log"))
    assert render(spec).stat().st_size > 0


def test_heatmap_render_with_masked_cells(tmp_path, map_csv):
    spec = load_spec(make_spec(
        tmp_path, "s.json", kind="heatmap", csv=str(map_csv), out="map.png",
        columns=["delta_GHz", "bus_detuning_GHz", "zz_GHz"], vscale="log"))
    assert render(spec).stat().st_size > 0


def test_matrix_render(tmp_path, matrix_csv):
    spec = load_spec(make_spec(
        tmp_path, "s.json", kind="triangular-matrix", csv=str(matrix_csv),
        out="mat.png", columns=["row", "col", "error"], vscale="log"))
    assert render(spec).stat().st_size > 0


def test_render_does_not_mutate_input(tmp_path, map_csv):
    before = hashlib.sha256(map_csv.read_bytes()).hexdigest()
    spec = load_spec(make_spec(
        tmp_path, "s.json", kind="heatmap", csv=str(map_csv), out="map.png",
        columns=["delta_GHz", "bus_detuning_GHz", "zz_GHz"]))
    render(spec)
    assert hashlib.sha256(map_csv.read_bytes()).hexdigest() == before


def test_empty_csv_is_schema_error(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    spec_path = make_spec(tmp_path, "s.json", kind="line", csv=str(empty),
                          out="fig.png", x="a", y="b")
    with pytest.raises(SpecError, match="empty"):
        render(load_spec(spec_path))
    assert main([str(spec_path)]) == 2


def test_header_only_csv_is_schema_error(tmp_path):
    path = tmp_path / "h.csv"
    path.write_text("a,b\n")
    spec_path = make_spec(tmp_path, "s.json", kind="line", csv=str(path),
                          out="fig.png", x="a", y="b")
    with pytest.raises(SpecError, match="no data rows"):
        render(load_spec(spec_path))


def test_missing_column_is_schema_error(tmp_path, sweep_csv):
    spec_path = make_spec(tmp_path, "s.json", kind="line", csv=str(sweep_csv),
                          out="fig.png", x="omega_tb_GHz", y="nonexistent")
    with pytest.raises(SpecError, match="nonexistent"):
        render(load_spec(spec_path))


def test_bad_spec_fields_rejected(tmp_path, sweep_csv):
    with pytest.raises(SpecError, match="kind"):
        load_spec(make_spec(tmp_path, "a.json", kind="pie",
                            csv=str(sweep_csv), out="f.png", x="a", y="b"))
    with pytest.raises(SpecError, match="unknown"):
        load_spec(make_spec(tmp_path, "b.json", kind="line",
                            csv=str(sweep_csv), out="f.png", x="a", y="b",
                            bogus=1))
    with pytest.raises(SpecError, match="missing"):
        load_spec(make_spec(tmp_path, "c.json", kind="line", x="a", y="b"))
    with pytest.raises(SpecError, match="columns"):
        load_spec(make_spec(tmp_path, "d.json", kind="heatmap",
                            csv=str(sweep_csv), out="f.png"))


def test_cli_renders_batch(tmp_path, sweep_csv, matrix_csv):
    s1 = make_spec(tmp_path, "s1.json", kind="line", csv=str(sweep_csv),
                   out="one.png", x="omega_tb_GHz", y="zz_numeric_GHz")
    s2 = make_spec(tmp_path, "s2.json", kind="triangular-matrix",
                   csv=str(matrix_csv), out="two.png",
                   columns=["row", "col", "error"])
    assert main([str(s1), str(s2)]) == 0
    assert (tmp_path / "one.png").exists() and (tmp_path / "two.png").exists()


def test_cli_extract_golden(tmp_path, sweep_csv):
    s = make_spec(tmp_path, "s.json", kind="line", csv=str(sweep_csv),
                  out="fig.png", x="omega_tb_GHz",
                  y=["zz_numeric_GHz", "zz_pert_GHz"])
    out = tmp_path / "golden.csv"
    assert main(["--extract", str(out), str(s)]) == 0
    with open(sweep_csv, newline="") as fh:
        original = list(csv.reader(fh))
    with open(out, newline="") as fh:
        assert list(csv.reader(fh)) == original


@pytest.mark.skipif(shutil.which("tbsim") is None,
                    reason="producing CLI not installed")
def test_against_producing_pipeline(tmp_path):
    """End-to-end: consume a real sweep artifact and reproduce it exactly."""
    subprocess.run(
        ["tbsim", "zz-sweep", "--device", "fig1pair", "--start", "5.40",
         "--stop", "5.55", "--step", "0.01", "--out", str(tmp_path)],
        check=True)
    csv_path = next(tmp_path.glob("zz-sweep_*.csv"))
    s = make_spec(tmp_path, "s.json", kind="line", csv=str(csv_path),
                  out="sweep.png", x="omega_tb_GHz",
                  y=["zz_numeric_GHz", "zz_pert_GHz"], yscale="log",
                  absolute=True)
    assert main([str(s)]) == 0
    out = tmp_path / "golden.csv"
    assert main(["--extract", str(out), str(s)]) == 0
    with open(csv_path, newline="") as fh:
        original = list(csv.reader(fh))
    with open(out, newline="") as fh:
        assert list(csv.reader(fh)) == original
