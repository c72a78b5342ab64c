import json
import subprocess
import sys

import numpy as np

from epidp.cli import main, resolve_config, run_config, validate_config
from epidp.valuefn import Grid1D, ValueFn1D, value_fn_to_csv


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


INFINITE_POINTMASS = """
[experiment]
kind = infinite

[model]
price = pointmass(0.0)
beta = 0.5

[grid]
x_knots = 21

[schedule]
nu = 10
seeds = 1
"""


# ---------------------------------------------------------------------------
# config resolution
# ---------------------------------------------------------------------------


def test_resolve_applies_defaults_and_reports_them():
    settings, diagnostics, errors = resolve_config(INFINITE_POINTMASS)
    assert not errors
    assert settings["solver"]["vi_tolerance"] == 1e-8
    assert any("(default)" in d for d in diagnostics)
    assert settings["grid"]["x_max"] == 2.0  # derived from x1


def test_unknown_keys_and_sections_rejected_with_lines():
    bad = INFINITE_POINTMASS + "\n[mystery]\nfoo = 1\n"
    _, _, errors = resolve_config(bad)
    assert any("unknown section" in e and "line" in e for e in errors)
    bad2 = INFINITE_POINTMASS + "\nwidgets = 3\n"
    _, _, errors2 = resolve_config(bad2)
    assert any("unknown key" in e for e in errors2)


def test_beta_outside_unit_interval_rejected():
    cfg = INFINITE_POINTMASS.replace("beta = 0.5", "beta = 1.0")
    _, _, errors = resolve_config(cfg)
    assert any("strictly inside (0,1)" in e for e in errors)


def test_levy_reference_request_rejected():
    cfg = """
[experiment]
kind = consistency

[model]
price = levy(0, 1)

[schedule]
nu = 10, 100
seeds = 1
"""
    _, _, errors = resolve_config(cfg)
    assert any("no finite mean" in e for e in errors)


def test_empty_schedule_rejected():
    cfg = INFINITE_POINTMASS.replace("kind = infinite", "kind = consistency").replace(
        "nu = 10", "nu ="
    )
    _, _, errors = resolve_config(cfg)
    assert any("nonempty" in e for e in errors)


def test_seed_env_override(monkeypatch):
    monkeypatch.setenv("EPIDP_SEED", "777")
    settings, diagnostics, errors = resolve_config(INFINITE_POINTMASS)
    assert not errors
    assert settings["schedule"]["seeds"] == [777]
    assert any("EPIDP_SEED" in d for d in diagnostics)


# ---------------------------------------------------------------------------
# validate / run round trips
# ---------------------------------------------------------------------------


def test_validate_exit_codes(tmp_path, capsys):
    good = write(tmp_path, "good.cfg", INFINITE_POINTMASS)
    assert validate_config(good) == 0
    out = capsys.readouterr().out
    assert "[solver] vi_tolerance" in out
    bad = write(tmp_path, "bad.cfg", INFINITE_POINTMASS.replace("0.5", "2.5"))
    assert validate_config(bad) == 1
    assert "rejected" in capsys.readouterr().out


def test_run_infinite_pointmass(tmp_path):
    cfg = write(tmp_path, "run.cfg", INFINITE_POINTMASS)
    out = tmp_path / "out"
    assert run_config(cfg, str(out)) == 0
    summary = (out / "summary.txt").read_text()
    assert "iterations = 1" in summary
    assert "converged = True" in summary
    values = (out / "value.csv").read_text().splitlines()
    assert values[0] == "x,value"
    assert all(line.endswith(",0") for line in values[1:])
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["kind"] == "infinite"
    assert manifest["cells"][0]["status"] == "ok"


def test_run_finite_writes_stage_files(tmp_path):
    cfg = write(
        tmp_path,
        "fin.cfg",
        INFINITE_POINTMASS.replace("kind = infinite", "kind = finite")
        + "\nhorizon = 3\n",
    )
    out = tmp_path / "out"
    assert run_config(cfg, str(out)) == 0
    names = sorted(p.name for p in out.glob("value_stage_*.csv"))
    assert names == [f"value_stage_{t:02d}.csv" for t in range(1, 5)]
    # terminal stage is identically zero
    last = (out / "value_stage_04.csv").read_text().splitlines()[1:]
    assert all(line.endswith(",0") for line in last)


def test_run_rejects_bad_config_with_exit_1(tmp_path, capsys):
    cfg = write(tmp_path, "bad.cfg", "[experiment]\nkind = warp\n")
    assert run_config(cfg, str(tmp_path / "o")) == 1


def test_run_missing_file_is_config_error(tmp_path):
    assert run_config(str(tmp_path / "nope.cfg"), None) == 1


def test_run_consistency_sweep_csv(tmp_path):
    cfg = write(
        tmp_path,
        "sweep.cfg",
        """
[experiment]
kind = consistency

[model]
price = exponential(1.0)
beta = 0.9

[grid]
x_knots = 41

[schedule]
nu = 20, 50
seeds = 1, 2

[solver]
vi_tolerance = 1e-6

[aw]
rho_steps = 32
ball_samples = 32
reference_nodes = 32
""",
    )
    out = tmp_path / "out"
    assert run_config(cfg, str(out)) == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0] == (
        "nu,seed,aw_to_ref,decision_probe_1,min_bound_margin,iterations,residual,clip_events"
    )
    assert len(lines) == 1 + 4
    first = lines[1].split(",")
    assert int(first[0]) == 20 and int(first[1]) == 1
    assert float(first[2]) >= 0.0  # aw distance present
    assert float(first[4]) >= -1e-6  # margin not badly violated


def test_run_levy_fig1_and_determinism(tmp_path):
    cfg = write(
        tmp_path,
        "levy.cfg",
        """
[experiment]
kind = levy-fig1

[model]
beta = 0.99

[grid]
x_knots = 51

[schedule]
nu = 10, 50
seeds = 1, 2

[solver]
vi_tolerance = 1e-6
""",
    )
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    assert run_config(cfg, str(out1)) == 0
    assert run_config(cfg, str(out2)) == 0
    for name in ("fig1.csv", "fig1_median.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    med = (out1 / "fig1_median.csv").read_text().splitlines()
    assert med[0] == "nu,median_decision"
    assert [int(r.split(",")[0]) for r in med[1:]] == [10, 50]


def test_run_tail_diagnostics_files(tmp_path):
    cfg = write(
        tmp_path,
        "tail.cfg",
        """
[experiment]
kind = tail-diagnostics

[model]
price = exponential(1.0)
beta = 0.9

[grid]
x_knots = 31

[schedule]
nu = 20
seeds = 3

[solver]
vi_tolerance = 1e-6

[probes]
tail_states = 1.0
tail_alphas = -100, -10, 0, 10
""",
    )
    out = tmp_path / "out"
    assert run_config(cfg, str(out)) == 0
    tail = (out / "tail_nu20_seed3_probe0.csv").read_text().splitlines()
    assert tail[0] == "alpha,lower,upper"
    assert len(tail) == 5


def test_run_ar1_kind(tmp_path):
    cfg = write(
        tmp_path,
        "ar1.cfg",
        """
[experiment]
kind = ar1

[model]
noise = normal(0.0, 0.1)
alpha = 0.8
beta = 0.9

[grid]
x_knots = 21
ell_knots = 9

[schedule]
nu = 50, 120
seeds = 1

[solver]
vi_tolerance = 1e-5

[aw]
rho_steps = 16
ball_samples = 16
reference_nodes = 16
""",
    )
    out = tmp_path / "out"
    assert run_config(cfg, str(out)) == 0
    lines = (out / "ar1_sweep.csv").read_text().splitlines()
    assert lines[0].startswith("nu,seed,alpha_hat,alpha_err,aw_to_ref,saddle_convex_defect")
    assert len(lines) == 3
    bounds = (out / "bounds_nu120_seed1.csv").read_text().splitlines()
    assert bounds[0] == "x,ell,lower,value,upper,margin"
    assert len(bounds) == 1 + 21 * 9


def test_run_consistency_writes_bound_tables(tmp_path):
    cfg = write(
        tmp_path,
        "b.cfg",
        """
[experiment]
kind = consistency

[model]
price = exponential(1.0)
beta = 0.9

[grid]
x_knots = 21

[schedule]
nu = 10, 30
seeds = 4

[solver]
vi_tolerance = 1e-6

[aw]
rho_steps = 16
ball_samples = 16
reference_nodes = 16
""",
    )
    out = tmp_path / "out"
    assert run_config(cfg, str(out)) == 0
    rows = (out / "bounds_nu30_seed4.csv").read_text().splitlines()
    assert rows[0] == "x,lower,value,upper,margin"
    assert len(rows) == 22
    # lower <= value <= upper at every knot
    for row in rows[1:]:
        x, lo, v, hi, margin = map(float, row.split(","))
        assert lo - 1e-9 <= v <= hi + 1e-9
        assert abs(margin - min(v - lo, hi - v)) < 1e-12


def test_run_partial_cell_failure_exits_2(tmp_path):
    # nu = 1 gives too few prices for the regression: that cell fails,
    # the sibling cell still runs, and the run exits 2
    cfg = write(
        tmp_path,
        "partial.cfg",
        """
[experiment]
kind = ar1

[model]
noise = normal(0.0, 0.1)
alpha = 0.8
beta = 0.9

[grid]
x_knots = 11
ell_knots = 7

[schedule]
nu = 1, 40
seeds = 1

[solver]
vi_tolerance = 1e-5

[aw]
rho_steps = 16
ball_samples = 16
reference_nodes = 8
""",
    )
    out = tmp_path / "out"
    assert run_config(cfg, str(out)) == 2
    manifest = json.loads((out / "manifest.json").read_text())
    statuses = {c["nu"]: c["status"] for c in manifest["cells"]}
    assert statuses[1] == "failed"
    assert statuses[40] == "ok"


def test_aw_distance_subcommand(tmp_path, capsys):
    grid = Grid1D.uniform(0.0, 5.0, 11)
    f = ValueFn1D(grid, np.zeros(11))
    g = ValueFn1D(grid, np.ones(11))
    fp = tmp_path / "f.csv"
    gp = tmp_path / "g.csv"
    value_fn_to_csv(f, fp)
    value_fn_to_csv(g, gp)
    rc = main(
        [
            "aw-distance", "--f", str(fp), "--g", str(gp),
            "--zctr", "0,0", "--rho-max", "12", "--rho-steps", "48",
            "--ball-samples", "32",
        ]
    )
    assert rc == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "value,err_quadrature,err_ball,err_tail"
    value = float(out[1].split(",")[0])
    assert 0.5 < value < 1.1


def test_aw_distance_as_config_kind(tmp_path):
    grid = Grid1D.uniform(0.0, 5.0, 11)
    value_fn_to_csv(ValueFn1D(grid, np.zeros(11)), tmp_path / "f.csv")
    value_fn_to_csv(ValueFn1D(grid, np.ones(11)), tmp_path / "g.csv")
    cfg = write(
        tmp_path,
        "aw.cfg",
        f"""
[experiment]
kind = aw-distance

[aw]
f = {tmp_path / 'f.csv'}
g = {tmp_path / 'g.csv'}
rho_max = 12
rho_steps = 48
ball_samples = 32
""",
    )
    out = tmp_path / "out"
    assert run_config(cfg, str(out)) == 0
    assert (out / "aw.csv").exists()


def test_cli_process_entry(tmp_path):
    cfg = write(tmp_path, "c.cfg", INFINITE_POINTMASS)
    proc = subprocess.run(
        [sys.executable, "-m", "epidp.cli", "run", "--config", cfg, "--out", str(tmp_path / "o")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr


def test_run_jobs_parallel_matches_serial(tmp_path):
    base = """
[experiment]
kind = consistency

[model]
price = exponential(1.0)
beta = 0.9

[grid]
x_knots = 31

[schedule]
nu = 10, 30
seeds = 1, 2

[solver]
vi_tolerance = 1e-6

[aw]
rho_steps = 16
ball_samples = 16
reference_nodes = 16
"""
    cfg = write(tmp_path, "par.cfg", base)
    out1 = tmp_path / "serial"
    out2 = tmp_path / "parallel"
    assert run_config(cfg, str(out1), jobs=1) == 0
    assert run_config(cfg, str(out2), jobs=2) == 0
    assert (out1 / "sweep.csv").read_bytes() == (out2 / "sweep.csv").read_bytes()
