"""Configuration-driven experiment runner.

Subcommands:

* ``epidp run --config FILE [--out DIR] [--jobs N]``: execute an experiment,
  write plot-ready CSVs plus a JSON run manifest. Exit 0 when every cell
  succeeded, 2 when some cells failed (their errors are in the manifest),
  1 on configuration errors.
* ``epidp validate --config FILE``: resolve and echo every setting (with
  defaults applied) and list all rejections, without running anything.
* ``epidp aw-distance --f A.csv --g B.csv [--zctr 0,0] [--rho-max 20] ...``:
  distance between two serialized value functions, printed as the CSV line
  ``value,err_quadrature,err_ball,err_tail``.

Config files are plain-text key-value with sections::

    [experiment]
    kind = levy-fig1
    out = runs/fig1

    [schedule]
    nu = 10, 100, 1000, 10000
    seeds = 1, 2, 3, 4, 5

Unknown sections or keys are rejected (fail-closed) with line numbers. The
environment variable ``EPIDP_SEED`` overrides the seed list with a single
seed. Identical configs and seeds reproduce output files byte for byte.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .aw import AWConfig, aw_distance, aw_distance_2d
from .bellman import tail_diagnostics
from .econ import (
    Ar1ModelSpec,
    QuadraticStorageCost,
    RevenueModelSpec,
    ar1_experiment,
    build_revenue_model,
    fig1_series,
    levy_experiment,
    revenue_bound_envelope,
)
from .errors import EpidpError
from .measures import EmpiricalMeasure, SampleStream, parse_distribution
from .solvers import SolveConfig, consistency_sweep, solve_finite, solve_infinite
from .valuefn import (
    EpigraphPoint,
    Grid1D,
    ValueFn2D,
    value_fn_from_csv,
    value_fn_to_csv,
)

_KINDS = (
    "finite",
    "infinite",
    "consistency",
    "levy-fig1",
    "ar1",
    "aw-distance",
    "tail-diagnostics",
)


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------


def _parse_config_text(text: str):
    """Sectioned key-value lines -> {section: {key: (value, line)}} plus errors."""
    sections: dict[str, dict[str, tuple[str, int]]] = {}
    errors: list[str] = []
    current: str | None = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        if current is None:
            errors.append(f"line {lineno}: key outside any [section]")
            continue
        key, _, value = line.partition("=")
        key = key.strip().lower()
        if key in sections[current]:
            errors.append(f"line {lineno}: duplicate key {key!r} in [{current}]")
            continue
        sections[current][key] = (value.strip(), lineno)
    return sections, errors


def _to_bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _to_int_list(s: str) -> list[int]:
    return [int(tok.strip()) for tok in s.split(",") if tok.strip()]


def _to_float_list(s: str) -> list[float]:
    return [float(tok.strip()) for tok in s.split(",") if tok.strip()]


# key -> (parser, default); defaults of None mean "derived later"
_SCHEMA: dict[str, dict[str, tuple]] = {
    "experiment": {
        "kind": (str, None),
        "out": (str, "epidp-out"),
    },
    "model": {
        "price": (parse_distribution, parse_distribution("exponential(1.0)")),
        "noise": (parse_distribution, parse_distribution("normal(0.0, 0.1)")),
        "beta": (float, 0.9),
        "storage_quad": (float, 0.5),
        "storage_lin": (float, 0.0),
        "x1": (float, 1.0),
        "alpha": (float, 0.8),
    },
    "grid": {
        "x_knots": (int, 201),
        "x_max": (float, None),
        "ell_knots": (int, 61),
        "ell_min": (float, None),
        "ell_max": (float, None),
    },
    "schedule": {
        "nu": (_to_int_list, [1000]),
        "seeds": (_to_int_list, [1]),
        "horizon": (int, 5),
    },
    "solver": {
        "vi_tolerance": (float, 1e-8),
        "vi_max_iters": (int, 50_000),
    },
    "aw": {
        "z_x": (float, 0.0),
        "z_ell": (float, 0.0),
        "z_alpha": (float, 0.0),
        "rho_max": (float, 20.0),
        "rho_steps": (int, 256),
        "ball_samples": (int, 256),
        "f": (str, None),
        "g": (str, None),
        "reference_nodes": (int, 64),
    },
    "probes": {
        "decision_x": (_to_float_list, [1.0]),
        "decision_xi": (_to_float_list, [1.0]),
        "tail_states": (_to_float_list, [1.0]),
        "tail_alphas": (_to_float_list, [-10000.0, -1000.0, -100.0, -10.0, -1.0, 0.0, 1.0, 10.0, 100.0]),
    },
    "run": {
        "jobs": (int, 1),
    },
}


def resolve_config(text: str):
    """Parse, type-check, apply defaults, and cross-validate a config.

    Returns (settings, diagnostics, errors); ``errors`` nonempty means the
    config is rejected.
    """
    sections, errors = _parse_config_text(text)
    diagnostics: list[str] = []
    settings: dict[str, dict] = {}

    for section, entries in sections.items():
        if section not in _SCHEMA:
            line = min(line for _, line in entries.values()) if entries else 0
            errors.append(f"line {line}: unknown section [{section}]")
            continue
        for key, (value, line) in entries.items():
            if key not in _SCHEMA[section]:
                errors.append(f"line {line}: unknown key {key!r} in [{section}]")

    for section, keys in _SCHEMA.items():
        settings[section] = {}
        for key, (parser, default) in keys.items():
            entry = sections.get(section, {}).get(key)
            if entry is None:
                settings[section][key] = default
                if default is not None:
                    diagnostics.append(f"[{section}] {key} = {_fmt(default)} (default)")
                continue
            value, line = entry
            try:
                settings[section][key] = parser(value)
                diagnostics.append(f"[{section}] {key} = {value}")
            except (ValueError, EpidpError) as exc:
                errors.append(f"line {line}: bad value for {key!r}: {exc}")

    if not errors:
        errors.extend(_cross_validate(settings, diagnostics))
    return settings, diagnostics, errors


def _cross_validate(settings, diagnostics) -> list[str]:
    errors: list[str] = []
    kind = settings["experiment"]["kind"]
    if kind is None:
        errors.append("missing required key: [experiment] kind")
        return errors
    if kind not in _KINDS:
        errors.append(f"unknown experiment kind {kind!r}; expected one of {', '.join(_KINDS)}")
        return errors

    model = settings["model"]
    if not 0.0 < model["beta"] < 1.0:
        errors.append("beta must lie strictly inside (0,1)")
    if kind == "ar1" and not 0.0 < model["alpha"] < 1.0:
        errors.append("alpha must lie strictly inside (0,1)")
    if model["storage_quad"] < 0.0 or model["storage_lin"] < 0.0:
        errors.append("storage cost coefficients must be nonnegative")

    sched = settings["schedule"]
    if kind in ("consistency", "levy-fig1", "ar1", "tail-diagnostics"):
        nus = sched["nu"]
        if not nus:
            errors.append("nu schedule must be nonempty")
        elif any(b <= a for a, b in zip(nus, nus[1:])):
            errors.append("nu schedule must be strictly increasing")
    if not sched["seeds"]:
        errors.append("seed list must be nonempty")

    if kind == "consistency" and model["price"].kind == "levy":
        errors.append(
            "consistency reference requested for a heavy-tailed price law: "
            "it has no finite mean, so no reference solution exists; "
            "use kind = levy-fig1 instead"
        )
    if kind == "aw-distance":
        if not settings["aw"]["f"] or not settings["aw"]["g"]:
            errors.append("kind aw-distance needs [aw] f = ... and g = ... file paths")

    if settings["grid"]["x_max"] is None:
        settings["grid"]["x_max"] = 2.0 * model["x1"]
        diagnostics.append(f"[grid] x_max = {_fmt(settings['grid']['x_max'])} (derived: 2*x1)")
    if settings["run"]["jobs"] < 1:
        errors.append("jobs must be >= 1")

    env_seed = os.environ.get("EPIDP_SEED")
    if env_seed is not None:
        try:
            sched["seeds"] = [int(env_seed)]
            diagnostics.append(f"[schedule] seeds = {env_seed} (EPIDP_SEED override)")
        except ValueError:
            errors.append(f"EPIDP_SEED must be an integer, got {env_seed!r}")
    return errors


# ---------------------------------------------------------------------------
# experiment execution
# ---------------------------------------------------------------------------


def _revenue_pieces(settings):
    model_cfg = settings["model"]
    spec = RevenueModelSpec(
        price_dist=model_cfg["price"],
        beta=model_cfg["beta"],
        storage_cost=QuadraticStorageCost(model_cfg["storage_quad"], model_cfg["storage_lin"]),
        x1=model_cfg["x1"],
    )
    grid = Grid1D.uniform(0.0, settings["grid"]["x_max"], settings["grid"]["x_knots"])
    solve_cfg = SolveConfig(
        grid=grid,
        vi_tolerance=settings["solver"]["vi_tolerance"],
        vi_max_iters=settings["solver"]["vi_max_iters"],
    )
    return spec, build_revenue_model(spec), solve_cfg


def _aw_config(settings, two_d=False) -> AWConfig:
    aw = settings["aw"]
    if two_d:
        z = EpigraphPoint((aw["z_x"], aw["z_ell"]), aw["z_alpha"])
    else:
        z = EpigraphPoint((aw["z_x"],), aw["z_alpha"])
    return AWConfig(
        z_ctr=z,
        rho_max=aw["rho_max"],
        rho_steps=aw["rho_steps"],
        ball_samples=aw["ball_samples"],
    )


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _sample_measure(settings, nu: int, seed: int) -> EmpiricalMeasure:
    stream = SampleStream(seed, settings["model"]["price"])
    return EmpiricalMeasure.from_samples(stream.draw(nu))


def _run_infinite(settings, out: Path):
    spec, model, cfg = _revenue_pieces(settings)
    nu = settings["schedule"]["nu"][0]
    seed = settings["schedule"]["seeds"][0]
    measure = _sample_measure(settings, nu, seed)
    small = nu * len(cfg.grid) <= 200_000
    report = solve_infinite(model, measure, cfg, extract_policy_table=small)
    value_fn_to_csv(report.value, out / "value.csv")
    outputs = ["value.csv"]
    if report.policy is not None:
        report.policy.to_csv(out / "policy.csv")
        outputs.append("policy.csv")
    summary = [
        "kind = infinite",
        f"nu = {nu}, seed = {seed}",
        f"iterations = {report.iterations}",
        f"residual = {_fmt(report.residual)}",
        f"error_bound = {_fmt(report.error_bound)}",
        f"converged = {report.converged}",
    ]
    (out / "summary.txt").write_text("\n".join(summary) + "\n")
    outputs.append("summary.txt")
    cells = [
        {
            "nu": nu,
            "seed": seed,
            "status": "ok" if report.converged else "not_converged",
        }
    ]
    return outputs, cells


def _run_finite(settings, out: Path):
    spec, model, cfg = _revenue_pieces(settings)
    T = settings["schedule"]["horizon"]
    nu = settings["schedule"]["nu"][0]
    seed = settings["schedule"]["seeds"][0]
    measure = _sample_measure(settings, nu, seed)
    small = nu * len(cfg.grid) <= 200_000
    report = solve_finite(model, measure, T, cfg.grid, extract_policies=small)
    outputs = []
    for t, fn in enumerate(report.value_fns, start=1):
        name = f"value_stage_{t:02d}.csv"
        value_fn_to_csv(fn, out / name)
        outputs.append(name)
    if report.policy is not None:
        report.policy.to_csv(out / "policy_stage_01.csv")
        outputs.append("policy_stage_01.csv")
    (out / "summary.txt").write_text(
        f"kind = finite\nstages = {T}\nnu = {nu}, seed = {seed}\n"
        f"terminal_is_zero = {bool(np.all(report.value_fns[-1].values == 0.0))}\n"
    )
    outputs.append("summary.txt")
    return outputs, [{"nu": nu, "seed": seed, "status": "ok"}]


def _sweep_one_seed(args):
    settings, seed, out_dir = args
    spec, model, cfg = _revenue_pieces(settings)
    kappas = settings["schedule"]["nu"]
    out = Path(out_dir)
    bound_files: list[str] = []

    def margin(nu, measure, report):
        env = revenue_bound_envelope(spec, [measure.prefix(k) for k in kappas if k <= nu])
        margins = env.margins(report.value)
        report.bound_checks = margins.tolist()
        name = f"bounds_nu{nu}_seed{seed}.csv"
        _write_csv(out / name, ["x", "lower", "value", "upper", "margin"],
                   env.table(report.value))
        bound_files.append(name)
        return float(margins.min())

    probes = list(
        zip(settings["probes"]["decision_x"], settings["probes"]["decision_xi"])
    )
    records = consistency_sweep(
        model_family=lambda nu, measure: model,
        true_dist=spec.price_dist,
        nu_schedule=kappas,
        seeds=[seed],
        cfg=cfg,
        aw_cfg=_aw_config(settings),
        decision_probes=probes,
        bound_margin_fn=margin,
        reference_nodes=settings["aw"]["reference_nodes"],
    )
    return records, bound_files


def _run_consistency(settings, out: Path):
    seeds = settings["schedule"]["seeds"]
    jobs = settings["run"]["jobs"]
    args = [(settings, s, str(out)) for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_seed = list(pool.map(_sweep_one_seed, args))
    else:
        per_seed = [_sweep_one_seed(a) for a in args]
    records = [rec for chunk, _ in per_seed for rec in chunk]
    bound_files = [name for _, names in per_seed for name in names]

    n_probes = len(settings["probes"]["decision_x"])
    header = (
        ["nu", "seed", "aw_to_ref"]
        + [f"decision_probe_{i + 1}" for i in range(n_probes)]
        + ["min_bound_margin", "iterations", "residual", "clip_events"]
    )
    rows = []
    for rec in records:
        probes = rec.decision_probes + [math.nan] * (n_probes - len(rec.decision_probes))
        rows.append(
            [rec.nu, rec.seed, rec.aw_to_ref if rec.aw_to_ref is not None else math.nan]
            + probes
            + [
                rec.bound_margin if rec.bound_margin is not None else math.nan,
                rec.iterations,
                rec.residual,
                rec.clip_events,
            ]
        )
    _write_csv(out / "sweep.csv", header, rows)
    cells = [
        {"nu": r.nu, "seed": r.seed, "status": r.status, "wall_clock": r.wall_clock,
         **({"error": r.error} if r.error else {})}
        for r in records
    ]
    return ["sweep.csv"] + bound_files, cells


def _run_levy(settings, out: Path):
    model_cfg = settings["model"]
    records = levy_experiment(
        nu_schedule=settings["schedule"]["nu"],
        seeds=settings["schedule"]["seeds"],
        probe=(settings["probes"]["decision_x"][0], settings["probes"]["decision_xi"][0]),
        beta=model_cfg["beta"],
        storage_cost=QuadraticStorageCost(model_cfg["storage_quad"], model_cfg["storage_lin"]),
        x1=model_cfg["x1"],
        knots=settings["grid"]["x_knots"],
        vi_tolerance=settings["solver"]["vi_tolerance"],
        vi_max_iters=settings["solver"]["vi_max_iters"],
    )
    _write_csv(
        out / "fig1.csv",
        ["nu", "seed", "decision"],
        [
            [r.nu, r.seed, r.decision_probes[0] if r.decision_probes else math.nan]
            for r in records
        ],
    )
    _write_csv(out / "fig1_median.csv", ["nu", "median_decision"], fig1_series(records))
    cells = [
        {"nu": r.nu, "seed": r.seed, "status": r.status, "wall_clock": r.wall_clock,
         **({"error": r.error} if r.error else {})}
        for r in records
    ]
    return ["fig1.csv", "fig1_median.csv"], cells


def _run_ar1(settings, out: Path):
    model_cfg = settings["model"]
    grid_cfg = settings["grid"]
    ell_range = None
    if grid_cfg["ell_min"] is not None and grid_cfg["ell_max"] is not None:
        ell_range = (grid_cfg["ell_min"], grid_cfg["ell_max"])
    spec = Ar1ModelSpec(
        noise_dist=model_cfg["noise"],
        alpha=model_cfg["alpha"],
        beta=model_cfg["beta"],
        storage_cost=QuadraticStorageCost(model_cfg["storage_quad"], model_cfg["storage_lin"]),
        x1=model_cfg["x1"],
        ell_range=ell_range,
    )
    records = ar1_experiment(
        true_alpha=model_cfg["alpha"],
        noise_dist=model_cfg["noise"],
        nu_schedule=settings["schedule"]["nu"],
        seeds=settings["schedule"]["seeds"],
        spec=spec,
        x_knots=grid_cfg["x_knots"],
        ell_knots=grid_cfg["ell_knots"],
        vi_tolerance=settings["solver"]["vi_tolerance"],
        vi_max_iters=settings["solver"]["vi_max_iters"],
        aw_cfg=_aw_config(settings, two_d=True),
        reference_nodes=settings["aw"]["reference_nodes"],
    )
    header = [
        "nu", "seed", "alpha_hat", "alpha_err", "aw_to_ref",
        "saddle_convex_defect", "saddle_concave_defect", "min_bound_margin",
        "series_ratio_max", "lipschitz_modulus", "iterations", "residual",
        "clip_events",
    ]
    rows = [
        [
            r.nu, r.seed, r.alpha_hat, r.alpha_err,
            r.aw_to_ref if r.aw_to_ref is not None else math.nan,
            r.saddle_convex_defect, r.saddle_concave_defect,
            r.bound_margin if r.bound_margin is not None else math.nan,
            r.series_ratio_max,
            max(r.lipschitz_moduli) if r.lipschitz_moduli else math.nan,
            r.iterations, r.residual, r.clip_events,
        ]
        for r in records
    ]
    _write_csv(out / "ar1_sweep.csv", header, rows)
    outputs = ["ar1_sweep.csv"]
    for r in records:
        if r.value_fn is not None and r.envelope is not None:
            name = f"bounds_nu{r.nu}_seed{r.seed}.csv"
            _write_csv(
                out / name,
                ["x", "ell", "lower", "value", "upper", "margin"],
                r.envelope.table(r.value_fn),
            )
            outputs.append(name)
    cells = [
        {"nu": r.nu, "seed": r.seed, "status": r.status,
         **({"error": r.error} if r.error else {})}
        for r in records
    ]
    return outputs, cells


def _run_tail(settings, out: Path):
    spec, model, cfg = _revenue_pieces(settings)
    outputs = []
    cells = []
    for seed in settings["schedule"]["seeds"]:
        stream = SampleStream(seed, spec.price_dist)
        draws = stream.draw(settings["schedule"]["nu"][-1])
        for nu in settings["schedule"]["nu"]:
            measure = EmpiricalMeasure.from_samples(draws[:nu])
            report = solve_infinite(model, measure, cfg)
            diags = tail_diagnostics(
                model,
                report.value,
                measure,
                settings["probes"]["tail_states"],
                settings["probes"]["tail_alphas"],
            )
            for k, diag in enumerate(diags):
                name = f"tail_nu{nu}_seed{seed}_probe{k}.csv"
                diag.to_csv(out / name)
                outputs.append(name)
            cells.append({"nu": nu, "seed": seed, "status": "ok"})
    return outputs, cells


def _run_aw_distance(settings, out: Path):
    f = value_fn_from_csv(settings["aw"]["f"])
    g = value_fn_from_csv(settings["aw"]["g"])
    two_d = isinstance(f, ValueFn2D)
    cfg = _aw_config(settings, two_d=two_d)
    res = aw_distance_2d(f, g, cfg) if two_d else aw_distance(f, g, cfg)
    line = res.csv_row()
    print("value,err_quadrature,err_ball,err_tail")
    print(line)
    (out / "aw.csv").write_text("value,err_quadrature,err_ball,err_tail\n" + line + "\n")
    return ["aw.csv"], [{"status": "ok"}]


_RUNNERS = {
    "infinite": _run_infinite,
    "finite": _run_finite,
    "consistency": _run_consistency,
    "levy-fig1": _run_levy,
    "ar1": _run_ar1,
    "tail-diagnostics": _run_tail,
    "aw-distance": _run_aw_distance,
}


def run_config(config_path: str, out_dir: str | None = None, jobs: int | None = None) -> int:
    """Execute a config file; returns the process exit code."""
    try:
        text = Path(config_path).read_text()
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    settings, diagnostics, errors = resolve_config(text)
    if errors:
        for err in errors:
            print(f"config error: {err}", file=sys.stderr)
        return 1
    if out_dir is not None:
        settings["experiment"]["out"] = out_dir
    if jobs is not None:
        settings["run"]["jobs"] = jobs

    out = Path(settings["experiment"]["out"])
    out.mkdir(parents=True, exist_ok=True)
    kind = settings["experiment"]["kind"]
    start = time.perf_counter()
    outputs, cells = _RUNNERS[kind](settings, out)

    manifest = {
        "version": __version__,
        "kind": kind,
        "config_sha256": hashlib.sha256(text.encode()).hexdigest(),
        "resolved": _jsonable(settings),
        "outputs": outputs,
        "cells": cells,
        "wall_clock_total": time.perf_counter() - start,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    failed = [c for c in cells if c.get("status") == "failed"]
    if failed:
        print(f"{len(failed)} of {len(cells)} cells failed; see manifest.json", file=sys.stderr)
        return 2
    return 0


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (str, int, float, bool)) or obj is None:
        return obj
    return repr(obj)


def validate_config(config_path: str) -> int:
    try:
        text = Path(config_path).read_text()
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    _, diagnostics, errors = resolve_config(text)
    for line in diagnostics:
        print(line)
    for err in errors:
        print(f"rejected: {err}")
    return 1 if errors else 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="epidp", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None, help="output directory (overrides config)")
    p_run.add_argument("--jobs", type=int, default=None, help="parallel sweep cells")

    p_val = sub.add_parser("validate", help="resolve and check a config without running")
    p_val.add_argument("--config", required=True)

    p_aw = sub.add_parser("aw-distance", help="distance between two value-function CSVs")
    p_aw.add_argument("--f", required=True)
    p_aw.add_argument("--g", required=True)
    p_aw.add_argument("--zctr", default=None, help="center point, e.g. 0,0 or 0,0,0")
    p_aw.add_argument("--rho-max", type=float, default=20.0)
    p_aw.add_argument("--rho-steps", type=int, default=256)
    p_aw.add_argument("--ball-samples", type=int, default=256)

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return run_config(args.config, args.out, args.jobs)
        if args.command == "validate":
            return validate_config(args.config)
        if args.command == "aw-distance":
            f = value_fn_from_csv(args.f)
            g = value_fn_from_csv(args.g)
            two_d = isinstance(f, ValueFn2D)
            if args.zctr is not None:
                parts = [float(t) for t in args.zctr.split(",")]
                z = EpigraphPoint(tuple(parts[:-1]), parts[-1])
            else:
                z = EpigraphPoint((0.0, 0.0) if two_d else (0.0,), 0.0)
            cfg = AWConfig(
                z_ctr=z,
                rho_max=args.rho_max,
                rho_steps=args.rho_steps,
                ball_samples=args.ball_samples,
            )
            res = aw_distance_2d(f, g, cfg) if two_d else aw_distance(f, g, cfg)
            print("value,err_quadrature,err_ball,err_tail")
            print(res.csv_row())
            return 0
    except EpidpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
