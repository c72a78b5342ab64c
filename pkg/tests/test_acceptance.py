"""End-to-end acceptance suite.

One test per criterion, each printing a single PASS/FAIL line (run with
``pytest -v -s tests/test_acceptance.py`` to watch them stream). Tolerances
are pinned here, not configured elsewhere.
"""

from contextlib import contextmanager

import numpy as np

from epidp import (
    Exponential,
    Levy,
    Normal,
    PointMass,
    SampleStream,
    ar1_ols_fit,
    ar1_simulate,
    bounded_lipschitz_distance,
    empirical_from_samples,
)
from epidp.aw import AWConfig, aw_distance
from epidp.bellman import apply_bellman, monotone_trend, tail_diagnostics
from epidp.econ import (
    Ar1ModelSpec,
    RevenueModelSpec,
    ar1_bound_envelope,
    ar1_grid,
    build_ar1_model,
    build_revenue_model,
    fig1_series,
    levy_experiment,
    revenue_bound_envelope,
    revenue_grid,
)
from epidp.solvers import SolveConfig, consistency_sweep, solve_finite, solve_infinite
from epidp.valuefn import (
    Grid1D,
    ValueFn1D,
    convexity_defect,
    epigraph_distance,
    saddle_defect,
    sup_norm_diff,
)
from epidp.cli import run_config

from test_aw import brute_force_constant_pair


@contextmanager
def criterion(num: int, label: str):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {num:02d} {label}: FAIL")
        raise
    print(f"ACCEPTANCE {num:02d} {label}: PASS")


def random_convex_pair(rng, grid, scale=2.0):
    slopes = np.sort(rng.uniform(-scale, scale, len(grid) - 1))
    v = np.concatenate([[0.0], np.cumsum(slopes * np.diff(grid.knots))])
    bump = rng.uniform(0.0, 1.0, len(grid))
    return ValueFn1D(grid, v), ValueFn1D(grid, v + bump)


def test_criterion_01_figure_reproduction():
    with criterion(1, "heavy-tail decision drift (figure reproduction)"):
        records = levy_experiment(
            nu_schedule=[10, 100, 1000, 10000],
            seeds=[1, 2, 3, 4, 5],
            probe=(1.0, 1.0),
            beta=0.99,
            knots=401,
            vi_tolerance=1e-8,
        )
        assert all(r.status == "ok" for r in records)
        series = fig1_series(records)
        assert [nu for nu, _ in series] == [10, 100, 1000, 10000]
        medians = [m for _, m in series]
        inversions = [
            max(0.0, a - b) for a, b in zip(medians, medians[1:]) if b < a - 1e-12
        ]
        assert len(inversions) <= 1
        assert all(gap <= 0.02 for gap in inversions)
        assert medians[-1] >= 0.9


def test_criterion_02_bound_suite():
    with criterion(2, "solved values inside the policy-bound envelope"):
        spec = RevenueModelSpec(price_dist=Exponential(1.0), beta=0.9)
        model = build_revenue_model(spec)
        grid = revenue_grid(spec, 201)
        cfg = SolveConfig(grid=grid, vi_tolerance=1e-8)
        kappas = [10, 100, 1000]
        for seed in (1, 2, 3):
            draws = SampleStream(seed, spec.price_dist).draw(1000)
            measure = empirical_from_samples(draws)
            report = solve_infinite(model, measure, cfg)
            assert report.converged
            env = revenue_bound_envelope(spec, [measure.prefix(k) for k in kappas])
            assert env.min_margin(report.value) >= -(report.error_bound + 1e-9)


def test_criterion_03_oracle_equivalence():
    with criterion(3, "fixed point matches 10x-resolution brute-force solver"):
        model = build_revenue_model(RevenueModelSpec(price_dist=PointMass(1.0), beta=0.5))
        grid = Grid1D.uniform(0.0, 2.0, 201)
        cfg = SolveConfig(grid=grid, vi_tolerance=1e-9)
        measure = empirical_from_samples([1.0])
        report = solve_infinite(model, measure, cfg)
        assert report.converged

        # independent oracle: grid-restricted value iteration on 2001 knots
        fine = np.linspace(0.0, 2.0, 2001)
        V = np.zeros(fine.size)
        p = 1.0
        for _ in range(200):
            obj = 0.5 * fine[None, :] ** 2 + p * fine[None, :] + 0.5 * V[None, :]
            obj = np.where(fine[None, :] > fine[:, None], np.inf, obj)
            V_new = obj.min(axis=1) - p * fine
            if np.max(np.abs(V_new - V)) < 1e-13:
                V = V_new
                break
            V = V_new
        assert np.max(np.abs(report.value(fine) - V)) < 1e-3
        assert abs(report.value(0.0)) <= report.error_bound


def test_criterion_04_operator_laws():
    with criterion(4, "operator laws (monotone, contraction, shift, convexity)"):
        rng = np.random.default_rng(42)
        spec = RevenueModelSpec(price_dist=Exponential(1.0), beta=0.9)
        model = build_revenue_model(spec)
        grid = Grid1D.uniform(0.0, 2.0, 31)
        measure = empirical_from_samples(SampleStream(11, spec.price_dist).draw(100))
        for _ in range(100):
            V, W = random_convex_pair(rng, grid)
            assert convexity_defect(V) <= 1e-12
            BV = apply_bellman(model, V, measure)
            BW = apply_bellman(model, W, measure)
            # monotonicity
            assert np.all(BV.values <= BW.values + 1e-12)
            # beta-contraction
            gap = sup_norm_diff(V, W)
            assert sup_norm_diff(BV, BW) <= model.beta * gap + 1e-10
            # constant shift
            c = float(rng.uniform(-3.0, 3.0))
            BVc = apply_bellman(model, V.with_values(V.values + c), measure)
            assert np.max(np.abs(BVc.values - (BV.values + model.beta * c))) <= 1e-12
            # convexity preservation
            assert convexity_defect(BV) <= 1e-9


def test_criterion_05_finite_infinite_consistency():
    with criterion(5, "finite horizon equals iterated operator; geometric gap"):
        spec = RevenueModelSpec(price_dist=Exponential(1.0), beta=0.5)
        model = build_revenue_model(spec)
        grid = Grid1D.uniform(0.0, 2.0, 51)
        measure = empirical_from_samples(SampleStream(21, spec.price_dist).draw(100))
        for T in (1, 5, 20):
            fin = solve_finite(model, measure, T=T, grid=grid, extract_policies=False)
            V = ValueFn1D.zeros(grid)
            for _ in range(T):
                V = apply_bellman(model, V, measure)
            assert np.max(np.abs(fin.value.values - V.values)) <= 1e-12
        # horizon gap to the fixed point contracts at rate <= beta + 0.01
        inf_rep = solve_infinite(model, measure, SolveConfig(grid=grid, vi_tolerance=1e-13))
        gaps = []
        for T in range(3, 12):
            fin = solve_finite(model, measure, T=T, grid=grid, extract_policies=False)
            gaps.append(sup_norm_diff(fin.value, inf_rep.value))
        ratios = [b / a for a, b in zip(gaps, gaps[1:]) if a > 1e-14]
        assert ratios and max(ratios) <= model.beta + 0.01


def test_criterion_06_aw_metric_suite():
    with criterion(6, "Attouch-Wets metric properties and integrand oracle"):
        rng = np.random.default_rng(7)
        grid = Grid1D.uniform(0.0, 4.0, 9)
        quick = AWConfig(rho_max=12.0, rho_steps=48, ball_samples=64)

        def rand_fn():
            return ValueFn1D(grid, rng.normal(size=9) * 2.0)

        for _ in range(10):
            f = rand_fn()
            assert aw_distance(f, f, quick).value <= 1e-9
        for _ in range(10):
            f, g = rand_fn(), rand_fn()
            assert aw_distance(f, g, quick).value == aw_distance(g, f, quick).value
        for _ in range(50):
            f, g, h = rand_fn(), rand_fn(), rand_fn()
            assert (
                aw_distance(f, h, quick).value
                <= aw_distance(f, g, quick).value + aw_distance(g, h, quick).value + 1e-6
            )
        for _ in range(50):
            f, g = rand_fn(), rand_fn()
            res = aw_distance(f, g, quick)
            c = max(
                epigraph_distance((0.0, 0.0), f), epigraph_distance((0.0, 0.0), g)
            )
            assert res.value <= 1.0 + c + res.err_quadrature + 1e-9

        cfg = AWConfig()  # production defaults
        span = Grid1D.uniform(0.0, 20.0, 41)
        f0 = ValueFn1D(span, np.zeros(41))
        g1 = ValueFn1D(span, np.ones(41))
        ours = aw_distance(f0, g1, cfg)
        oracle = brute_force_constant_pair(
            0.0, 1.0, 0.0, 20.0, cfg.rho_max, 10 * cfg.rho_steps, 96
        )
        assert abs(ours.value - oracle) / oracle < 1e-3


def test_criterion_07_consistency_decay():
    with criterion(7, "distance to reference halves across the sample schedule"):
        spec = RevenueModelSpec(price_dist=Exponential(1.0), beta=0.9)
        model = build_revenue_model(spec)
        cfg = SolveConfig(grid=revenue_grid(spec, 201), vi_tolerance=1e-7)
        records = consistency_sweep(
            model_family=lambda nu, measure: model,
            true_dist=spec.price_dist,
            nu_schedule=[100, 1000, 10000],
            seeds=[1, 2, 3, 4, 5],
            cfg=cfg,
            aw_cfg=AWConfig(),
            reference_nodes=64,
        )
        assert all(r.status == "ok" for r in records)
        medians = [
            float(np.median([r.aw_to_ref for r in records if r.nu == nu]))
            for nu in (100, 1000, 10000)
        ]
        assert medians[0] > medians[1] > medians[2]
        assert medians[2] <= medians[0] / 2.0


def test_criterion_08_ar1_suite():
    with criterion(8, "autoregressive estimation, saddle shape, envelope, ratios"):
        true_alpha = 0.8
        noise = Normal(0.0, 0.1)
        beta = 0.9  # pinned here: the suite leaves it free

        # estimation accuracy at the largest sample count
        prices = ar1_simulate(true_alpha, 0.0, noise, 10_000, seed=1)
        fit = ar1_ols_fit(prices)
        assert abs(fit.alpha_hat - true_alpha) <= 0.02

        # residual distance to a true-noise empirical decreases in median
        medians = []
        for nu in (100, 1000, 10000):
            dists = []
            for seed in range(5):
                path = ar1_simulate(true_alpha, 0.0, noise, nu, seed)
                resid = ar1_ols_fit(path).residuals
                truth = empirical_from_samples(
                    SampleStream(seed + 1000, noise).draw(nu)
                )
                dists.append(bounded_lipschitz_distance(resid, truth))
            medians.append(float(np.median(dists)))
        assert medians[0] >= medians[1] >= medians[2]

        # solve on the 101x61 grid from the nu = 10^4 fit
        spec = Ar1ModelSpec(noise_dist=noise, alpha=true_alpha, beta=beta)
        model = build_ar1_model(spec, alpha_override=fit.alpha_hat)
        grid = ar1_grid(spec, x_knots=101, ell_knots=61)
        report = solve_infinite(
            model, fit.residuals, SolveConfig(grid=grid, vi_tolerance=1e-7)
        )
        assert report.converged
        V = report.value
        value_range = float(V.values.max() - V.values.min())
        cx, cl = saddle_defect(V)
        assert cx <= 1e-6 * value_range
        assert cl <= 1e-6 * value_range

        envelope = ar1_bound_envelope(spec, [fit])
        assert envelope.min_margin(V) >= -(report.error_bound + 1e-9)

        ratios = [
            r
            for rs in envelope.running_inf_terms["series_ratios"].values()
            for r in rs[len(rs) // 2 :]
        ]
        assert ratios and max(ratios) <= beta + 0.01


def test_criterion_09_tail_contrast():
    with criterion(9, "tail mass: integrable decays, heavy tail grows"):
        alpha_grid = np.array([-1e4, -1e3, -1e2, -10.0, -1.0, 0.0])

        # integrable side: the lower curve dies out as the level drops
        spec = RevenueModelSpec(price_dist=Exponential(1.0), beta=0.9)
        model = build_revenue_model(spec)
        cfg = SolveConfig(grid=revenue_grid(spec, 201), vi_tolerance=1e-7)
        measure = empirical_from_samples(SampleStream(1, spec.price_dist).draw(1000))
        report = solve_infinite(model, measure, cfg)
        diag = tail_diagnostics(model, report.value, measure, [1.0], alpha_grid)[0]
        mass = np.abs(diag.lower_curve)
        assert np.all(np.diff(mass) >= -1e-15)  # shrinks as alpha drops
        assert mass[0] == 0.0 and mass[1] == 0.0  # gone by alpha = -1e3

        # heavy-tailed side: mass at a fixed deep level grows with the sample count
        lspec = RevenueModelSpec(price_dist=Levy(0.0, 1.0), beta=0.99)
        lmodel = build_revenue_model(lspec)
        lcfg = SolveConfig(grid=revenue_grid(lspec, 201), vi_tolerance=1e-8)
        level = -100.0
        medians = []
        for nu in (100, 1000, 10000):
            vals = []
            for seed in (1, 2, 3, 4, 5):
                draws = SampleStream(seed, lspec.price_dist).draw(nu)
                m = empirical_from_samples(draws)
                rep = solve_infinite(lmodel, m, lcfg)
                d = tail_diagnostics(lmodel, rep.value, m, [1.0], [level])[0]
                vals.append(abs(float(d.lower_curve[0])))
            medians.append(float(np.median(vals)))
        assert monotone_trend(medians) == "increasing"
        assert medians[-1] > 10.0 * max(medians[0], 1.0)


def test_criterion_10_determinism(tmp_path):
    with criterion(10, "reruns reproduce output bytes"):
        cfg_text = """
[experiment]
kind = consistency

[model]
price = exponential(1.0)
beta = 0.9

[grid]
x_knots = 101

[schedule]
nu = 50, 200
seeds = 1, 2, 3

[solver]
vi_tolerance = 1e-7

[aw]
rho_steps = 64
ball_samples = 64
reference_nodes = 32
"""
        cfg_file = tmp_path / "determinism.cfg"
        cfg_file.write_text(cfg_text)
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert run_config(str(cfg_file), str(out)) == 0
            outs.append(out)
        csvs = sorted(p.name for p in outs[0].glob("*.csv"))
        assert csvs
        for name in csvs:
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()

        levy_cfg = tmp_path / "levy.cfg"
        levy_cfg.write_text(
            """
[experiment]
kind = levy-fig1

[model]
beta = 0.99

[grid]
x_knots = 101

[schedule]
nu = 10, 100
seeds = 1, 2

[solver]
vi_tolerance = 1e-7
"""
        )
        la, lb = tmp_path / "la", tmp_path / "lb"
        assert run_config(str(levy_cfg), str(la)) == 0
        assert run_config(str(levy_cfg), str(lb)) == 0
        for name in ("fig1.csv", "fig1_median.csv"):
            assert (la / name).read_bytes() == (lb / name).read_bytes()
