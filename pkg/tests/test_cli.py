import csv

import numpy as np
import pytest

from ietistokes.cli import (
    BENCH_COLUMNS,
    STUDY_COLUMNS,
    ConfigError,
    RunConfig,
    channel_inlet,
    main,
    parse_config,
    problem_data,
)
from ietistokes.domains import rectangle_with_hole_domain


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def strip_timing(header, rows):
    keep = [j for j, name in enumerate(header) if name != "seconds"]
    return [[row[j] for j in keep] for row in rows]


def test_config_validation():
    ok = RunConfig("solve", "grid(1,1)", [1], [1])
    assert ok.tol == 1e-6 and ok.max_iter == 500 and ok.seed == 42
    with pytest.raises(ConfigError):
        RunConfig("solve", "grid(1,1)", [], [1])
    with pytest.raises(ConfigError):
        RunConfig("solve", "grid(1,1)", [1], [])
    with pytest.raises(ConfigError):
        RunConfig("solve", "grid(1,1)", [1], [1], tol=1.5)
    with pytest.raises(ConfigError):
        RunConfig("solve", "grid(1,1)", [1], [1], tol=0.0)
    with pytest.raises(ConfigError):
        RunConfig("solve", "grid(1,1)", [1], [1], threads=0)


def test_invalid_domain_exits_2(capsys):
    assert main(["solve", "--domain", "trefoil(3)"]) == 2
    assert "error" in capsys.readouterr().err


def test_missing_domain_exits_2(capsys):
    assert main(["bench-ieti"]) == 2


def test_threads_env_override(monkeypatch):
    monkeypatch.setenv("IETISTOKES_THREADS", "3")
    config = parse_config(["study-infsup", "--domain", "grid(1,1)", "--threads", "1"])
    assert config.threads == 3
    monkeypatch.delenv("IETISTOKES_THREADS")
    config = parse_config(["study-infsup", "--domain", "grid(1,1)", "--threads", "2"])
    assert config.threads == 2


def test_channel_inlet_profile():
    pts = np.array([[-2.0, 0.0], [-2.0, 2.0], [5.0, 0.3]])
    vals = channel_inlet(pts)
    assert abs(vals[0, 0] - 1.0) < 1e-14
    assert abs(vals[1, 0]) < 1e-14
    assert np.abs(vals[:, 1]).max() == 0.0
    assert np.abs(vals[2]).max() == 0.0


def test_problem_data_modes():
    config = RunConfig("solve", "rectangle_with_hole", [2], [2])
    mp = rectangle_with_hole_domain()
    rhs, dirichlet, use_mean, manufactured = problem_data(mp, config)
    # a Neumann outlet fixes the pressure level, so the mean constraint drops
    assert rhs is None and dirichlet is channel_inlet
    assert use_mean is False and manufactured is False


def test_bench_csv_schema_and_determinism(tmp_path, capsys):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["bench-ieti", "--domain", "grid(2,1)", "--degrees", "1",
            "--levels", "1,2"]
    assert main(args + ["--output", str(out1)]) == 0
    assert main(args + ["--output", str(out2)]) == 0
    header1, rows1 = read_csv(out1)
    header2, rows2 = read_csv(out2)
    assert header1 == list(BENCH_COLUMNS)
    assert strip_timing(header1, rows1) == strip_timing(header2, rows2)
    table = capsys.readouterr().out
    assert "p=1:iterations" in table and "p=1:kappa" in table


def test_study_csv_schema(tmp_path):
    out = tmp_path / "study.csv"
    assert main(["study-infsup", "--domain", "grid(2,1)", "--degrees", "1",
                 "--levels", "1", "--output", str(out)]) == 0
    header, rows = read_csv(out)
    assert header == list(STUDY_COLUMNS)
    assert len(rows) == 1
    row = dict(zip(header, rows[0]))
    assert float(row["kappa"]) >= 1.0
    assert 0.0 < float(row["beta"]) <= np.sqrt(2.0)
    assert float(row["delta_h"]) <= 2.0
    assert int(row["dofs"]) > 0


def test_solve_zero_data_exports_zero_fields(tmp_path, capsys):
    out = tmp_path / "fields.txt"
    assert main(["solve", "--domain", "grid(2,1)", "--degrees", "1",
                 "--levels", "1", "--zero-data", "--output", str(out)]) == 0
    text = out.read_text().splitlines()
    in_samples = False
    coeff_max = 0.0
    for line in text:
        if line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] in ("patch", "velocity_coefficients", "pressure_coefficients"):
            in_samples = False
            continue
        if parts[0] == "samples":
            in_samples = True
            continue
        vals = [float(v) for v in parts]
        if in_samples:
            # u v x y ux uy p: the field columns must vanish, positions not
            assert max(abs(v) for v in vals[4:]) == 0.0
        else:
            coeff_max = max(coeff_max, max(abs(v) for v in vals))
    assert coeff_max == 0.0


def test_solve_export_matches_exact_solution(tmp_path, capsys):
    out = tmp_path / "fields.txt"
    assert main(["solve", "--domain", "grid(1,1)", "--degrees", "2",
                 "--levels", "3", "--output", str(out), "--samples", "5"]) == 0
    printed = capsys.readouterr().out
    assert "H1 velocity error" in printed
    lines = out.read_text().splitlines()
    start = lines.index("samples 5 5") + 1
    worst = 0.0
    for line in lines[start : start + 25]:
        u, v, x, y, ux, uy, p = map(float, line.split())
        worst = max(worst,
                    abs(ux + np.sin(np.pi * x) * np.cos(np.pi * y)),
                    abs(uy - np.cos(np.pi * x) * np.sin(np.pi * y)))
    assert worst < 5e-4


def test_solve_nonconvergence_exits_1(tmp_path, capsys):
    code = main(["solve", "--domain", "grid(2,2)", "--degrees", "1",
                 "--levels", "1", "--max-iter", "1", "--tol", "1e-12"])
    assert code == 1


def test_bench_nonconvergence_flagged(tmp_path, capsys):
    out = tmp_path / "bench.csv"
    code = main(["bench-ieti", "--domain", "grid(2,2)", "--degrees", "1",
                 "--levels", "1", "--max-iter", "1", "--tol", "1e-12",
                 "--output", str(out)])
    assert code == 1
    header, rows = read_csv(out)
    row = dict(zip(header, rows[0]))
    assert row["converged"] == "False"
    assert "not converged" in capsys.readouterr().out


def test_verify_suite_filter(capsys):
    assert main(["verify", "--suite", "supmat"]) == 0
    printed = capsys.readouterr().out
    assert "supmat" in printed
    assert "lemma3" not in printed
    assert "0 failed" in printed


def test_verify_lemma3_small(capsys):
    assert main(["verify", "--suite", "lemma3", "--degrees", "1",
                 "--levels", "1"]) == 0
    printed = capsys.readouterr().out
    assert "unit square" in printed and "quarter annulus" in printed


def test_bench_threaded_matches_serial(tmp_path):
    serial, threaded = tmp_path / "s.csv", tmp_path / "t.csv"
    args = ["bench-ieti", "--domain", "grid(2,1)", "--degrees", "1,2",
            "--levels", "1"]
    assert main(args + ["--output", str(serial)]) == 0
    assert main(args + ["--threads", "2", "--output", str(threaded)]) == 0
    h1, r1 = read_csv(serial)
    h2, r2 = read_csv(threaded)
    assert strip_timing(h1, r1) == strip_timing(h2, r2)
