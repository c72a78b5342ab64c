import math

import mpmath
import numpy as np
import pytest

from epidp import (
    Exponential,
    Normal,
    PointMass,
    SampleStream,
    SpecError,
    empirical_from_samples,
)
from epidp.bellman import inner_min, monotone_trend
from epidp.econ import (
    Ar1ModelSpec,
    QuadraticStorageCost,
    RevenueModelSpec,
    ar1_bound_envelope,
    ar1_experiment,
    ar1_grid,
    build_ar1_model,
    build_revenue_model,
    fig1_series,
    hold_everything_objective,
    levy_experiment,
    revenue_bound_envelope,
    revenue_grid,
)
from epidp.measures import ar1_ols_fit, ar1_simulate
from epidp.solvers import SolveConfig, solve_infinite
from epidp.valuefn import Grid1D, ValueFn1D, convexity_defect


# ---------------------------------------------------------------------------
# revenue model construction
# ---------------------------------------------------------------------------


def test_revenue_stage_cost_examples():
    spec = RevenueModelSpec(price_dist=PointMass(1.0), beta=0.5)
    model = build_revenue_model(spec)
    assert model.stage_cost(1.0, 0.0, 2.0) == -2.0
    assert model.stage_cost(1.0, 1.0, 5.0) == 0.5
    assert model.feasible(0.7, 99.0) == (0.0, 0.7)


def test_revenue_model_rejects_bad_storage():
    concave = lambda y: math.sqrt(y)
    spec = RevenueModelSpec(price_dist=PointMass(1.0), beta=0.5, storage_cost=concave)
    with pytest.raises(SpecError):
        build_revenue_model(spec)
    with pytest.raises(SpecError):
        RevenueModelSpec(price_dist=PointMass(1.0), beta=1.0)
    with pytest.raises(SpecError):
        QuadraticStorageCost(-0.1)


def test_revenue_model_generic_storage_cost_still_works():
    # non-quadratic convex cost drops to the generic (knot-restricted) path
    quartic = lambda y: y**4
    spec = RevenueModelSpec(price_dist=PointMass(1.0), beta=0.5, storage_cost=quartic)
    model = build_revenue_model(spec)
    assert model.fast_form is None
    grid = Grid1D.uniform(0.0, 2.0, 201)
    V = ValueFn1D.zeros(grid)
    value, y = inner_min(model, V, 1.0, 1.0)
    # min y^4 - (1 - y): derivative 4y^3 + 1 > 0, so sell all
    assert y == 0.0 and value == -1.0


# ---------------------------------------------------------------------------
# revenue envelope
# ---------------------------------------------------------------------------


def test_revenue_envelope_zero_prices():
    spec = RevenueModelSpec(price_dist=PointMass(0.0), beta=0.5)
    env = revenue_bound_envelope(spec, [empirical_from_samples([0.0, 0.0])])
    assert env.lower(1.5) == 0.0
    assert env.upper(1.5) == 2.0 * 0.5 * 1.5**2


def test_revenue_envelope_unit_prices_closed_form():
    spec = RevenueModelSpec(price_dist=PointMass(1.0), beta=0.5)
    env = revenue_bound_envelope(spec, [empirical_from_samples([1.0])])
    assert env.lower(1.0) == -2.0
    assert env.lower(2.0) == -4.0
    assert env.upper(2.0) == 4.0
    assert env.lower(0.0) == env.upper(0.0) == 0.0


def test_solved_value_sits_inside_envelope():
    spec = RevenueModelSpec(price_dist=Exponential(1.0), beta=0.9)
    model = build_revenue_model(spec)
    grid = revenue_grid(spec, 101)
    draws = SampleStream(5, spec.price_dist).draw(1000)
    measure = empirical_from_samples(draws)
    report = solve_infinite(model, measure, SolveConfig(grid=grid, vi_tolerance=1e-8))
    env = revenue_bound_envelope(
        spec, [measure.prefix(k) for k in (10, 100, 1000)]
    )
    assert env.min_margin(report.value) >= -(report.error_bound + 1e-9)
    # solved fixed point is convex and pinned at zero
    assert convexity_defect(report.value) <= 1e-9
    assert abs(report.value(0.0)) <= report.error_bound + 1e-12


def test_hold_everything_objective_value():
    spec = RevenueModelSpec(price_dist=PointMass(1.0), beta=0.99, x1=1.0)
    assert abs(hold_everything_objective(spec) - 50.0) < 1e-12
    # independent route: finite sum plus geometric tail
    c = spec.storage_cost(1.0)
    finite = sum(0.99 ** (t - 1) * c for t in range(1, 201))
    tail = 0.99**200 / (1 - 0.99) * c
    assert abs(hold_everything_objective(spec) - (finite + tail)) < 1e-9


# ---------------------------------------------------------------------------
# heavy-tailed experiment (desk scale)
# ---------------------------------------------------------------------------


def test_levy_tail_mass_at_coupled_level_does_not_vanish():
    # truncating at minus the sample mean price: for a heavy-tailed law the
    # retained mass stays away from zero as the sample count grows
    from epidp import Levy, SampleStream
    from epidp.bellman import tail_diagnostics
    from epidp.econ import RevenueModelSpec, build_revenue_model, revenue_grid
    from epidp.solvers import SolveConfig, solve_infinite

    spec = RevenueModelSpec(price_dist=Levy(0.0, 1.0), beta=0.99)
    model = build_revenue_model(spec)
    cfg = SolveConfig(grid=revenue_grid(spec, 101), vi_tolerance=1e-7)
    medians = []
    for nu in (100, 1000, 10000):
        vals = []
        for seed in (1, 2, 3, 4, 5):
            draws = SampleStream(seed, spec.price_dist).draw(nu)
            m = empirical_from_samples(draws)
            rep = solve_infinite(model, m, cfg)
            level = -float(np.dot(m.atoms, m.weights))  # minus the mean price
            diag = tail_diagnostics(model, rep.value, m, [1.0], [level])[0]
            vals.append(abs(float(diag.lower_curve[0])))
        medians.append(float(np.median(vals)))
    assert monotone_trend(medians) == "increasing"
    assert min(medians) > 1.0


def test_truncated_dual_path_oracle_on_inner_values():
    # the alpha-sweep of inner values under heavy-tailed prices, with the
    # deep-tail point recomputed by an independent sorted prefix sum
    import math

    from epidp import Levy, SampleStream, truncated_lower_expectation
    from epidp.bellman import b_values
    from epidp.econ import RevenueModelSpec, build_revenue_model, revenue_grid
    from epidp.solvers import SolveConfig, solve_infinite

    spec = RevenueModelSpec(price_dist=Levy(0.0, 1.0), beta=0.99)
    model = build_revenue_model(spec)
    cfg = SolveConfig(grid=revenue_grid(spec, 101), vi_tolerance=1e-7)
    measure = empirical_from_samples(SampleStream(2, spec.price_dist).draw(1000))
    rep = solve_infinite(model, measure, cfg)
    bv = b_values(model, rep.value, 1.0, measure)
    lookup = {float(a): float(v) for a, v in zip(measure.atoms, bv)}
    f = lambda a: lookup[a]
    sweep = [truncated_lower_expectation(measure, f, a) for a in (-1e6, -1e3, -1.0)]
    assert sweep[0] >= sweep[1] >= sweep[2]  # more mass as the level rises

    alpha = -1e3
    direct = truncated_lower_expectation(measure, f, alpha)
    order = np.argsort(bv)
    oracle = math.fsum(
        bv[i] * measure.weights[i] for i in order if bv[i] <= alpha
    )
    assert abs(direct - oracle) <= 1e-12 * max(1.0, abs(oracle))


def test_levy_experiment_probe_feasible_and_trending():
    records = levy_experiment(
        nu_schedule=[10, 100, 1000],
        seeds=[1, 2, 3],
        knots=101,
        vi_tolerance=1e-6,
    )
    assert all(r.status == "ok" for r in records)
    assert all(0.0 <= r.decision_probes[0] <= 1.0 for r in records)
    assert all(r.aw_to_ref is None for r in records)  # no reference exists
    series = fig1_series(records)
    assert [nu for nu, _ in series] == [10, 100, 1000]
    meds = [m for _, m in series]
    assert monotone_trend(meds, tol=0.02) in ("increasing", "flat")
    assert meds[-1] > 0.5


# ---------------------------------------------------------------------------
# autoregressive model
# ---------------------------------------------------------------------------


def test_ar1_model_embeds_revenue_form():
    spec = Ar1ModelSpec(noise_dist=PointMass(0.0), alpha=0.5, beta=0.5)
    model = build_ar1_model(spec)
    # xi = 0, ell = 0: price factor exp(0) = 1, matching the 1-d stage cost
    assert model.stage_cost((1.0, 0.0), 0.0, 0.0) == -1.0
    assert model.stage_cost((1.0, 2.0), 0.0, -1.0) == -1.0  # eta = 0, price 1
    assert model.exogenous_transition(2.0, -1.0) == 0.0
    with pytest.raises(SpecError):
        build_ar1_model(spec, alpha_override=1.5)
    with pytest.raises(SpecError):
        Ar1ModelSpec(noise_dist=PointMass(0.0), alpha=0.0)


def test_ar1_resolved_ell_range():
    spec = Ar1ModelSpec(noise_dist=Normal(0.0, 0.1), alpha=0.8)
    lo, hi = spec.resolved_ell_range()
    std = 0.1 / math.sqrt(1 - 0.64)
    assert abs(hi - 6 * std) < 1e-12 and abs(lo + 6 * std) < 1e-12
    fixed = Ar1ModelSpec(noise_dist=Normal(0.0, 0.1), alpha=0.8, ell_range=(-2.0, 3.0))
    assert fixed.resolved_ell_range() == (-2.0, 3.0)


def test_ar1_series_pointmass_geometric():
    # zero noise, alpha=0.5, beta=0.5, ell=0: plain geometric series
    spec = Ar1ModelSpec(noise_dist=PointMass(0.0), alpha=0.5, beta=0.5)
    fit = ar1_ols_fit(ar1_simulate(0.5, 1.0, PointMass(0.0), 30, seed=0))
    env = ar1_bound_envelope(spec, [fit])
    assert abs(env.lower(1.0, 0.0) + 2.0) < 1e-9
    assert env.lower(0.0, 0.3) == 0.0
    assert env.upper(0.0, 0.3) == 0.0


def test_ar1_series_matches_high_precision_oracle():
    # independent oracle: mpmath summation at 50 digits
    spec = Ar1ModelSpec(noise_dist=Normal(0.0, 0.1), alpha=0.8, beta=0.9)
    rng = np.random.default_rng(3)
    atoms = rng.normal(0.0, 0.1, size=40)
    measure = empirical_from_samples(atoms)
    fit_like = ar1_ols_fit(ar1_simulate(0.8, 0.0, Normal(0.0, 0.1), 40, seed=1))
    from epidp.econ import _ar1_series

    for ell in (-0.5, 0.0, 0.7):
        total, ratios = _ar1_series(0.9, 0.8, measure, ell)
        with mpmath.workdps(50):
            matoms = [mpmath.mpf(float(a)) for a in atoms]
            w = mpmath.mpf(1) / len(matoms)

            def moment(s):
                return w * mpmath.fsum(mpmath.e ** (s * a) for a in matoms)

            acc = mpmath.mpf(0)
            pi = moment(mpmath.mpf(1))
            a_t = mpmath.mpf("0.8")
            for t in range(1, 400):
                acc += mpmath.mpf("0.9") ** (t - 1) * mpmath.e ** (a_t * ell) * pi
                pi *= moment(a_t)
                a_t *= mpmath.mpf("0.8")
            oracle = float(acc)
        assert abs(total - oracle) <= 1e-9 * abs(oracle)
        # ratio-test diagnostic: past burn-in the ratios settle at the
        # discount factor (early terms carry the decaying exp(alpha^t ell))
        settled = ratios[len(ratios) // 2 :]
        assert max(settled) <= 0.9 + 0.01


def test_ar1_series_lower_bound_negative_ell_small():
    # far below the mean log price, the bound is a small-magnitude multiple of x
    spec = Ar1ModelSpec(noise_dist=PointMass(0.0), alpha=0.5, beta=0.5)
    fit = ar1_ols_fit(ar1_simulate(0.5, 1.0, PointMass(0.0), 30, seed=0))
    env = ar1_bound_envelope(spec, [fit])
    deep = env.lower(1.0, -30.0)
    assert -2.0 < deep < 0.0
    assert abs(deep) < abs(env.lower(1.0, 0.0))


def test_ar1_envelope_contains_solved_value():
    spec = Ar1ModelSpec(noise_dist=Normal(0.0, 0.1), alpha=0.8, beta=0.9)
    prices = ar1_simulate(0.8, 0.0, spec.noise_dist, 500, seed=7)
    fit = ar1_ols_fit(prices)
    model = build_ar1_model(spec, alpha_override=fit.alpha_hat)
    grid = ar1_grid(spec, x_knots=41, ell_knots=21)
    report = solve_infinite(
        model, fit.residuals, SolveConfig(grid=grid, vi_tolerance=1e-7)
    )
    env = ar1_bound_envelope(spec, [fit])
    assert env.min_margin(report.value) >= -(report.error_bound + 1e-9)


def test_ar1_fixed_point_embeds_revenue_fixed_point():
    # persistence ~ 0 and shocks = log prices: the 2-d fixed point restricted
    # to the zero log-price slice reproduces the 1-d fixed point
    prices = np.array([0.6, 0.9, 1.4])
    rev_spec = RevenueModelSpec(price_dist=PointMass(1.0), beta=0.7)
    rev_model = build_revenue_model(rev_spec)
    rev_grid = Grid1D.uniform(0.0, 2.0, 41)
    rev = solve_infinite(
        rev_model,
        empirical_from_samples(prices),
        SolveConfig(grid=rev_grid, vi_tolerance=1e-10),
    )

    ar_spec = Ar1ModelSpec(
        noise_dist=PointMass(0.0), alpha=1e-9, beta=0.7, ell_range=(-1.0, 1.0)
    )
    ar_model = build_ar1_model(ar_spec)
    grid2 = ar1_grid(ar_spec, x_knots=41, ell_knots=41)
    ar = solve_infinite(
        ar_model,
        empirical_from_samples(np.log(prices)),
        SolveConfig(grid=grid2, vi_tolerance=1e-10),
    )
    j0 = int(np.argmin(np.abs(grid2.ell_knots)))
    assert abs(grid2.ell_knots[j0]) < 1e-12
    gap = np.max(np.abs(ar.value.values[:, j0] - rev.value.values))
    assert gap < 1e-6


def test_ar1_experiment_zero_noise_degenerate_chain():
    records = ar1_experiment(
        true_alpha=0.8,
        noise_dist=PointMass(0.0),
        nu_schedule=[30],
        seeds=[0],
        x_knots=31,
        ell_knots=11,
        vi_tolerance=1e-9,
        compute_aw=True,
        aw_cfg=None,
        ell1=1.0,
    )
    rec = records[0]
    assert rec.status == "ok"
    assert rec.alpha_err < 1e-9
    # residual measure collapses to the zero atom: matches the reference
    assert rec.aw_to_ref is not None and rec.aw_to_ref <= 1e-6


def test_ar1_experiment_records_diagnostics():
    records = ar1_experiment(
        true_alpha=0.8,
        noise_dist=Normal(0.0, 0.1),
        nu_schedule=[100, 400],
        seeds=[1, 2],
        x_knots=31,
        ell_knots=15,
        vi_tolerance=1e-6,
        compute_aw=False,
    )
    assert len(records) == 4
    for rec in records:
        assert rec.status == "ok"
        assert rec.alpha_err < 0.2
        assert rec.saddle_convex_defect >= 0.0
        assert rec.bound_margin is not None
        assert rec.series_ratio_max <= 0.9 + 0.01
