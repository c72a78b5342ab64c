"""Backward recursion, fixed-point iteration, references, and sweeps.

Finite horizons run the operator backward from a zero terminal function.
Infinite horizons iterate the operator from zero until successive sweeps
differ by at most a tolerance in sup norm; the discount factor then certifies
``beta / (1 - beta) * residual`` as the distance to the grid fixed point.

Reference solutions replace Monte Carlo sampling with deterministic Gauss
quadrature atoms (Laguerre for exponential weights, Hermite for normal and
log-normal, Legendre for uniform), so convergence measurements against the
reference are not polluted by reference noise. Heavy-tailed prices have no
finite-mean reference; asking for one is refused rather than approximated.

Consistency sweeps draw nested samples (one stream per seed, prefix reuse
across the sample-count schedule), solve per cell, and record the
Attouch-Wets distance to the reference plus decision probes, bound margins,
and tail diagnostics. Failed cells are recorded, not fatal.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import roots_hermite, roots_laguerre, roots_legendre

from .aw import AWConfig, AWResult, aw_distance, aw_distance_2d
from .bellman import (
    DecisionTable,
    StageModel,
    TailDiagnostic,
    _apply_bellman_impl,
    extract_policy,
    inner_min,
    tail_diagnostics,
)
from .errors import DomainError, NonIntegrableReferenceError, ParameterError
from .measures import (
    DistributionSpec,
    Empirical,
    EmpiricalMeasure,
    Exponential,
    Levy,
    LogNormal,
    Normal,
    PointMass,
    SampleStream,
    Uniform,
)
from .valuefn import Grid1D, Grid2D, ValueFn1D, ValueFn2D, sup_norm_diff

__all__ = [
    "SolveConfig",
    "SolveReport",
    "ConsistencyRecord",
    "solve_finite",
    "solve_infinite",
    "quadrature_measure",
    "reference_solution",
    "consistency_sweep",
]


@dataclass(frozen=True)
class SolveConfig:
    """Grid, stopping rule, and horizon marker (None means infinite)."""

    grid: Grid1D | Grid2D
    horizon: int | None = None
    vi_tolerance: float = 1e-8
    vi_max_iters: int = 50_000

    def __post_init__(self):
        if not self.vi_tolerance > 0.0:
            raise ParameterError(f"vi_tolerance must be > 0, got {self.vi_tolerance}")
        if self.vi_max_iters < 1:
            raise ParameterError(f"vi_max_iters must be >= 1, got {self.vi_max_iters}")
        if self.horizon is not None and self.horizon < 1:
            raise ParameterError(f"horizon must be >= 1, got {self.horizon}")


@dataclass
class SolveReport:
    """Everything a solve produced, including its convergence certificate."""

    value_fns: list
    residual: float
    iterations: int
    error_bound: float
    converged: bool
    residual_history: list[float] = field(default_factory=list)
    policy: DecisionTable | None = None
    clip_events: int = 0
    bound_checks: list | None = None

    @property
    def value(self):
        """The stage-1 (finite) or fixed-point (infinite) value function."""
        return self.value_fns[0]


def _zeros_like_grid(grid):
    if isinstance(grid, Grid2D):
        return ValueFn2D.zeros(grid)
    return ValueFn1D.zeros(grid)


def solve_finite(
    model: StageModel,
    measure_per_stage,
    T: int,
    grid,
    extract_policies: bool = True,
) -> SolveReport:
    """Backward recursion over T stages from a zero terminal function.

    ``measure_per_stage`` is either one measure shared by all stages or a
    list of length T indexed by stage. Returns value functions for stages
    1..T+1 (the last identically zero) and, optionally, a policy per stage.
    """
    if T < 1:
        raise ParameterError(f"horizon must be >= 1, got {T}")
    if isinstance(measure_per_stage, EmpiricalMeasure):
        measures = [measure_per_stage] * T
    else:
        measures = list(measure_per_stage)
        if len(measures) != T:
            raise DomainError(f"expected {T} stage measures, got {len(measures)}")

    terminal = _zeros_like_grid(grid)
    fns = [terminal]
    policies: list[DecisionTable | None] = []
    clip_total = 0
    workspace: dict = {}
    for t in range(T - 1, -1, -1):
        try:
            updated, clips = _apply_bellman_impl(model, fns[0], measures[t], workspace)
        except Exception as exc:
            raise type(exc)(f"stage {t + 1}: {exc}") from exc
        clip_total += clips
        if extract_policies:
            policies.insert(0, extract_policy(model, fns[0], measures[t]))
        fns.insert(0, updated)

    residual = sup_norm_diff(fns[0], fns[1]) if T >= 1 else 0.0
    return SolveReport(
        value_fns=fns,
        residual=residual,
        iterations=T,
        error_bound=model.beta / (1.0 - model.beta) * residual,
        converged=True,
        policy=policies[0] if extract_policies and policies else None,
        clip_events=clip_total,
    )


def solve_infinite(
    model: StageModel,
    measure: EmpiricalMeasure,
    cfg: SolveConfig,
    v0=None,
    extract_policy_table: bool = False,
) -> SolveReport:
    """Iterate the operator from zero until successive sweeps settle.

    On success the report's ``error_bound`` = beta/(1-beta) * residual is a
    certified sup-norm distance to the fixed point on the grid. Hitting the
    iteration cap returns the partial result flagged ``converged=False``.
    """
    V = v0 if v0 is not None else _zeros_like_grid(cfg.grid)
    history: list[float] = []
    clip_total = 0
    converged = False
    workspace: dict = {}
    iterations = 0
    for iterations in range(1, cfg.vi_max_iters + 1):
        updated, clips = _apply_bellman_impl(model, V, measure, workspace)
        clip_total += clips
        residual = sup_norm_diff(V, updated)
        history.append(residual)
        V = updated
        if residual <= cfg.vi_tolerance:
            converged = True
            break

    residual = history[-1] if history else 0.0
    policy = extract_policy(model, V, measure) if extract_policy_table else None
    return SolveReport(
        value_fns=[V],
        residual=residual,
        iterations=iterations,
        error_bound=model.beta / (1.0 - model.beta) * residual,
        converged=converged,
        residual_history=history,
        policy=policy,
        clip_events=clip_total,
    )


# ---------------------------------------------------------------------------
# Deterministic references
# ---------------------------------------------------------------------------


def quadrature_measure(dist: DistributionSpec, nodes: int = 64) -> EmpiricalMeasure:
    """Deterministic atomic stand-in for an integrable distribution.

    Gauss rules adapted to each family; weights renormalized to sum exactly
    to one. Refused for the heavy-tailed family: no finite-mean reference
    exists (the associated control problem has value minus infinity).
    """
    if nodes < 1:
        raise ParameterError(f"node count must be >= 1, got {nodes}")
    if nodes > 256:
        # Gauss weights underflow double precision beyond this
        raise ParameterError(f"node count must be <= 256, got {nodes}")
    if isinstance(dist, Levy):
        raise NonIntegrableReferenceError(
            "refusing a deterministic reference for the heavy-tailed price law: "
            "it has no finite mean, so no finite-valued reference solution exists"
        )
    if isinstance(dist, PointMass):
        return EmpiricalMeasure(np.array([dist.value]), np.array([1.0]))
    if isinstance(dist, Empirical):
        return dist.measure
    if isinstance(dist, Exponential):
        x, w = roots_laguerre(nodes)
        atoms = x / dist.rate
    elif isinstance(dist, Normal):
        x, w = roots_hermite(nodes)
        atoms = dist.mu + math.sqrt(2.0) * dist.sigma * x
    elif isinstance(dist, LogNormal):
        x, w = roots_hermite(nodes)
        atoms = np.exp(dist.mu + math.sqrt(2.0) * dist.sigma * x)
    elif isinstance(dist, Uniform):
        x, w = roots_legendre(nodes)
        atoms = 0.5 * (dist.lo + dist.hi) + 0.5 * (dist.hi - dist.lo) * x
    else:
        raise ParameterError(f"no quadrature rule for distribution {dist!r}")
    weights = w / w.sum()
    return EmpiricalMeasure(atoms, weights)


def reference_solution(
    model: StageModel,
    true_dist: DistributionSpec,
    quadrature_nodes: int,
    cfg: SolveConfig,
) -> SolveReport:
    """Fixed point under the deterministic quadrature measure of ``true_dist``."""
    return solve_infinite(model, quadrature_measure(true_dist, quadrature_nodes), cfg)


# ---------------------------------------------------------------------------
# Consistency sweeps
# ---------------------------------------------------------------------------


@dataclass
class ConsistencyRecord:
    """One sweep cell: sample count, seed, and everything measured there."""

    nu: int
    seed: int
    status: str = "ok"
    aw_to_ref: float | None = None
    aw_result: AWResult | None = None
    decision_probes: list[float] = field(default_factory=list)
    bound_margin: float | None = None
    iterations: int = 0
    residual: float = math.nan
    clip_events: int = 0
    tail: list[TailDiagnostic] | None = None
    wall_clock: float = 0.0
    error: str | None = None


def consistency_sweep(
    model_family: Callable[[int | None, EmpiricalMeasure], StageModel],
    true_dist: DistributionSpec,
    nu_schedule: Sequence[int],
    seeds: Sequence[int],
    cfg: SolveConfig,
    aw_cfg: AWConfig | None = None,
    decision_probes: Sequence[tuple[float, float]] = (),
    tail_probe_states: Sequence[float] = (),
    tail_alpha_grid: Sequence[float] = (),
    bound_margin_fn: Callable | None = None,
    reference_nodes: int = 64,
) -> list[ConsistencyRecord]:
    """Solve per (sample count, seed) cell and measure drift to the reference.

    ``model_family(nu, measure)`` builds the stage model for a cell (nu=None
    for the reference), letting stage costs co-vary with the sample count.
    Samples nest: each seed owns one stream and larger counts extend smaller
    ones. ``bound_margin_fn(nu, measure, report)`` may attach an envelope
    margin. Heavy-tailed truths get no reference column (refused), matching
    the non-integrable setting; everything else is still recorded.
    """
    schedule = [int(n) for n in nu_schedule]
    if any(b <= a for a, b in zip(schedule, schedule[1:])) or not schedule:
        raise ParameterError("nu schedule must be nonempty and strictly increasing")
    aw_cfg = aw_cfg or AWConfig()

    ref_report = None
    try:
        ref_measure = quadrature_measure(true_dist, reference_nodes)
        ref_model = model_family(None, ref_measure)
        ref_report = solve_infinite(ref_model, ref_measure, cfg)
    except NonIntegrableReferenceError:
        ref_report = None

    records: list[ConsistencyRecord] = []
    for seed in seeds:
        stream = SampleStream(int(seed), true_dist)
        draws = stream.draw(schedule[-1])
        for nu in schedule:
            rec = ConsistencyRecord(nu=nu, seed=int(seed))
            start = time.perf_counter()
            try:
                measure = EmpiricalMeasure.from_samples(draws[:nu])
                model = model_family(nu, measure)
                report = solve_infinite(model, measure, cfg)
                rec.iterations = report.iterations
                rec.residual = report.residual
                rec.clip_events = report.clip_events
                if not report.converged:
                    rec.status = "not_converged"
                V = report.value
                if ref_report is not None:
                    if isinstance(V, ValueFn2D):
                        rec.aw_result = aw_distance_2d(V, ref_report.value, aw_cfg)
                    else:
                        rec.aw_result = aw_distance(V, ref_report.value, aw_cfg)
                    rec.aw_to_ref = rec.aw_result.value
                for x, xi in decision_probes:
                    rec.decision_probes.append(inner_min(model, V, x, xi).argmin)
                if tail_probe_states and len(tail_alpha_grid):
                    rec.tail = tail_diagnostics(
                        model, V, measure, tail_probe_states, tail_alpha_grid
                    )
                if bound_margin_fn is not None:
                    rec.bound_margin = bound_margin_fn(nu, measure, report)
            except Exception as exc:  # cell failures are data, not crashes
                rec.status = "failed"
                rec.error = f"{type(exc).__name__}: {exc}"
            rec.wall_clock = time.perf_counter() - start
            records.append(rec)
    return records
