"""The one-step value update: inner minimization and its expectation.

For a value function V, a stage model, and an outcome xi, the inner function
is

    b(V)(x, xi) = min_{y in feasible(x, xi)} { cost(x, y, xi) + beta * V(y) },

and applying the operator takes the expectation of b over an atomic measure,
knot by knot. The example models have costs that are quadratic in the
decision, and V is piecewise linear, so each inter-knot segment's minimum is
a clamped quadratic vertex: the minimization is segment-exact, not restricted
to grid points (policy probes need sub-grid argmin resolution). Ties break
toward the smallest decision so runs are reproducible.

Models whose feasible set is the sell-down interval [0, x] additionally get a
prefix-scan fast path (see ``_kernels``); the generic path here is the
reference implementation and the two are cross-checked in tests.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import _kernels
from .errors import DomainError, EvaluationError, ModelError, ParameterError
from .measures import EmpiricalMeasure
from .valuefn import ValueFn1D, ValueFn2D

__all__ = [
    "StageModel",
    "SellDownQuadratic1D",
    "SellDownQuadratic2D",
    "InnerMin",
    "DecisionTable",
    "TailDiagnostic",
    "inner_min",
    "apply_bellman",
    "extract_policy",
    "tail_diagnostics",
    "monotone_trend",
]


@dataclass(frozen=True)
class SellDownQuadratic1D:
    """Structure tag: cost q2 y^2 + q1 y - xi (x - y), feasible [0, x]."""

    q2: float
    q1: float = 0.0


@dataclass(frozen=True)
class SellDownQuadratic2D:
    """Structure tag: cost q2 y^2 + q1 y - exp(alpha ell + xi) (x - y), feasible [0, x]."""

    q2: float
    q1: float = 0.0
    alpha: float = 0.0


@dataclass(frozen=True)
class StageModel:
    """One stage of the control problem.

    ``stage_cost(x, y, xi)`` is authoritative. ``cost_quad_y`` optionally
    provides the exact quadratic-in-y coefficients (c0, c1, c2) at (x, xi),
    enabling segment-exact minimization; without it the minimization falls
    back to grid knots plus interval endpoints (exact only for costs that are
    linear between knots). ``fast_form`` tags models with sell-down structure
    for the compiled sweep. For 2-d states, x is the pair (inventory, ell) and
    ``exogenous_transition(ell, xi)`` gives the next exogenous coordinate.
    """

    stage_cost: Callable[..., float]
    feasible: Callable[..., tuple[float, float]]
    beta: float
    exogenous_transition: Callable[[float, float], float] | None = None
    cost_quad_y: Callable[..., tuple[float, float, float]] | None = None
    fast_form: SellDownQuadratic1D | SellDownQuadratic2D | None = None

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ParameterError(f"beta must lie strictly inside (0, 1), got {self.beta}")


class InnerMin(NamedTuple):
    value: float
    argmin: float


def _segment_exact_min(
    yknots: np.ndarray,
    yvals: np.ndarray,
    lo: float,
    hi: float,
    quad: tuple[float, float, float],
    beta: float,
) -> InnerMin:
    """Exact minimum of c0 + c1 y + c2 y^2 + beta * PWL(y) over [lo, hi].

    Candidates are the clipped segment endpoints plus interior quadratic
    vertices, scanned in ascending y with strict improvement, so ties resolve
    to the smallest minimizer.
    """
    c0, c1, c2 = quad
    if lo < yknots[0] - 1e-12 or hi > yknots[-1] + 1e-12:
        raise DomainError(
            f"feasible interval [{lo}, {hi}] exceeds the value grid span "
            f"[{yknots[0]}, {yknots[-1]}]"
        )
    lo = max(lo, float(yknots[0]))
    hi = min(hi, float(yknots[-1]))
    best_y = math.nan
    best_v = math.inf
    if lo == hi:
        v = c0 + c1 * lo + c2 * lo * lo + beta * float(np.interp(lo, yknots, yvals))
        return InnerMin(v, lo)

    start = max(0, int(np.searchsorted(yknots, lo, side="right")) - 1)
    for s in range(start, len(yknots) - 1):
        a = float(yknots[s])
        b = float(yknots[s + 1])
        if a >= hi:
            break
        ca = max(a, lo)
        cb = min(b, hi)
        if cb < ca:
            continue
        va = float(yvals[s])
        vb = float(yvals[s + 1])
        m = (vb - va) / (b - a)
        lin = c1 + beta * m
        const = c0 + beta * (va - m * a)
        candidates = [ca, cb]
        if c2 > 0.0:
            yv = -lin / (2.0 * c2)
            if ca < yv < cb:
                candidates.insert(1, yv)
        for y in candidates:
            v = c2 * y * y + lin * y + const
            if v < best_v:
                best_v = v
                best_y = y
    return InnerMin(best_v, best_y)


def _candidate_scan_min(
    obj: Callable[[float], float], yknots: np.ndarray, lo: float, hi: float
) -> InnerMin:
    """Minimum of obj over knots in [lo, hi] plus the endpoints (ascending scan)."""
    ys = [lo] + [float(k) for k in yknots if lo < k < hi] + ([hi] if hi > lo else [])
    best_y = math.nan
    best_v = math.inf
    for y in ys:
        v = obj(y)
        if v < best_v:
            best_v = v
            best_y = y
    return InnerMin(best_v, best_y)


def _feasible_interval(model: StageModel, x, xi) -> tuple[float, float]:
    lo, hi = model.feasible(x, xi)
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
        raise ModelError(f"empty or unbounded feasible interval [{lo}, {hi}] at ({x}, {xi})")
    return float(lo), float(hi)


def inner_min(model: StageModel, V, x, xi) -> InnerMin:
    """Exact minimum and minimizer of the one-step objective at (x, xi)."""
    if isinstance(V, ValueFn2D):
        xv, ell = x
        if model.exogenous_transition is None:
            raise ModelError("2-d value function needs a model with an exogenous transition")
        eta = model.exogenous_transition(ell, xi)
        lo, hi = _feasible_interval(model, x, xi)
        yknots = V.grid.x_knots
        lk = V.grid.ell_knots
        eta_c = min(max(eta, float(lk[0])), float(lk[-1]))
        jc = min(max(int(np.searchsorted(lk, eta_c, side="right")) - 1, 0), lk.size - 2)
        th = (eta_c - lk[jc]) / (lk[jc + 1] - lk[jc])
        yvals = (1.0 - th) * V.values[:, jc] + th * V.values[:, jc + 1]
        if model.cost_quad_y is not None:
            quad = model.cost_quad_y(x, xi)
            return _segment_exact_min(yknots, yvals, lo, hi, quad, model.beta)
        obj = lambda y: model.stage_cost(x, y, xi) + model.beta * float(
            np.interp(y, yknots, yvals)
        )
        return _candidate_scan_min(obj, yknots, lo, hi)

    lo, hi = _feasible_interval(model, x, xi)
    yknots = V.grid.knots
    if model.cost_quad_y is not None:
        quad = model.cost_quad_y(x, xi)
        return _segment_exact_min(yknots, V.values, lo, hi, quad, model.beta)
    obj = lambda y: model.stage_cost(x, y, xi) + model.beta * V(y)
    return _candidate_scan_min(obj, yknots, lo, hi)


# ---------------------------------------------------------------------------
# Operator application
# ---------------------------------------------------------------------------


def _apply_1d(model: StageModel, V: ValueFn1D, measure: EmpiricalMeasure, workspace):
    knots = V.grid.knots
    form = model.fast_form
    if isinstance(form, SellDownQuadratic1D) and knots[0] == 0.0:
        out = np.empty(knots.size)
        slopes = np.diff(V.values) / np.diff(knots)
        if np.all(np.diff(slopes) >= 0.0):
            # exactly convex values admit the bucketed threshold sweep
            _kernels.sell_down_bellman_1d_convex(
                knots, V.values, model.beta, form.q2, form.q1,
                measure.atoms, measure.weights, out,
            )
        else:
            _kernels.sell_down_bellman_1d(
                knots, V.values, model.beta, form.q2, form.q1,
                measure.atoms, measure.weights, out,
            )
        if not np.all(np.isfinite(out)):
            k = int(np.flatnonzero(~np.isfinite(out))[0])
            bv = b_values(model, V, float(knots[k]), measure)
            bad = np.flatnonzero(~np.isfinite(bv))
            atom = measure.atoms[int(bad[0])] if bad.size else math.nan
            raise EvaluationError(
                f"non-finite inner value at (knot {knots[k]!r}, atom {atom!r})"
            )
        return V.with_values(out), 0

    values = np.empty(knots.size)
    for k, x in enumerate(knots):
        terms = []
        for a, w in zip(measure.atoms, measure.weights):
            v = inner_min(model, V, float(x), float(a)).value
            if not math.isfinite(v):
                raise EvaluationError(f"non-finite inner value at (knot {x!r}, atom {a!r})")
            terms.append(w * v)
        values[k] = math.fsum(terms)
    return V.with_values(values), 0


def _apply_2d(model: StageModel, V: ValueFn2D, measure: EmpiricalMeasure, workspace):
    xk = V.grid.x_knots
    lk = V.grid.ell_knots
    form = model.fast_form
    if isinstance(form, SellDownQuadratic2D) and xk[0] == 0.0:
        out = np.empty((xk.size, lk.size))
        clips = np.zeros(lk.size, dtype=np.int64)
        vt = np.ascontiguousarray(V.values.T)
        _kernels.sell_down_bellman_2d(
            xk, lk, vt, model.beta, form.q2, form.q1, form.alpha,
            measure.atoms, measure.weights, out, clips,
        )
        if not np.all(np.isfinite(out)):
            i, j = map(int, np.argwhere(~np.isfinite(out))[0])
            state = (float(xk[i]), float(lk[j]))
            atom = math.nan
            for a in measure.atoms:
                if not math.isfinite(inner_min(model, V, state, float(a)).value):
                    atom = float(a)
                    break
            raise EvaluationError(
                f"non-finite inner value at (knot {state!r}, atom {atom!r})"
            )
        return V.with_values(out), int(clips.sum())

    values = np.empty((xk.size, lk.size))
    clip_events = 0
    for j, ell in enumerate(lk):
        for i, x in enumerate(xk):
            terms = []
            for a, w in zip(measure.atoms, measure.weights):
                eta = model.exogenous_transition(float(ell), float(a))
                # transitions depend on (ell, atom) only: count once per pair
                if (eta < lk[0] or eta > lk[-1]) and i == 0:
                    clip_events += 1
                v = inner_min(model, V, (float(x), float(ell)), float(a)).value
                if not math.isfinite(v):
                    raise EvaluationError(
                        f"non-finite inner value at (knot ({x!r}, {ell!r}), atom {a!r})"
                    )
                terms.append(w * v)
            values[i, j] = math.fsum(terms)
    return V.with_values(values), clip_events


def _apply_bellman_impl(model, V, measure, workspace=None):
    if isinstance(V, ValueFn2D):
        return _apply_2d(model, V, measure, workspace)
    return _apply_1d(model, V, measure, workspace)


def apply_bellman(model: StageModel, V, measure: EmpiricalMeasure, grid=None):
    """Expectation of the inner minimum at every knot: one operator sweep.

    ``grid`` optionally re-targets the output grid (defaults to V's own).
    """
    if grid is not None:
        if isinstance(V, ValueFn1D) and not np.array_equal(grid.knots, V.grid.knots):
            V = ValueFn1D(grid, V(grid.knots))
        elif isinstance(V, ValueFn2D):
            same = np.array_equal(grid.x_knots, V.grid.x_knots) and np.array_equal(
                grid.ell_knots, V.grid.ell_knots
            )
            if not same:
                xx, ll = np.meshgrid(grid.x_knots, grid.ell_knots, indexing="ij")
                V = ValueFn2D(grid, V(xx.ravel(), ll.ravel()).reshape(grid.shape))
    updated, _ = _apply_bellman_impl(model, V, measure)
    return updated


# ---------------------------------------------------------------------------
# Policies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecisionTable:
    """Argmin decision per (state, atom); entries lie in their feasible intervals."""

    states: tuple
    atoms: np.ndarray
    decisions: np.ndarray  # shape (len(states), len(atoms))

    def decision(self, state_index: int, atom_index: int) -> float:
        return float(self.decisions[state_index, atom_index])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            two_d = isinstance(self.states[0], tuple)
            writer.writerow(["x", "ell", "xi", "y"] if two_d else ["x", "xi", "y"])
            for si, state in enumerate(self.states):
                for ai, atom in enumerate(self.atoms):
                    y = self.decisions[si, ai]
                    if two_d:
                        row = [state[0], state[1], atom, y]
                    else:
                        row = [state, atom, y]
                    writer.writerow([format(v, ".17g") for v in row])


def extract_policy(
    model: StageModel,
    V,
    measure: EmpiricalMeasure,
    grid=None,
    states: Sequence | None = None,
) -> DecisionTable:
    """Decision table over ``states`` x atoms (default: all grid states)."""
    if states is None:
        if isinstance(V, ValueFn2D):
            states = [
                (float(x), float(ell))
                for x in V.grid.x_knots
                for ell in V.grid.ell_knots
            ]
        else:
            g = grid if grid is not None else V.grid
            states = [float(x) for x in g.knots]
    states = tuple(states)
    decisions = np.empty((len(states), len(measure)))
    for si, state in enumerate(states):
        for ai, atom in enumerate(measure.atoms):
            decisions[si, ai] = inner_min(model, V, state, float(atom)).argmin
    return DecisionTable(states, measure.atoms.copy(), decisions)


# ---------------------------------------------------------------------------
# Tail diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TailDiagnostic:
    """Truncated expectations of inner values at one probe state.

    lower_curve[k] = E[b ; b <= alpha_k] and upper_curve[k] = E[b ; b >= alpha_k].
    Integrable models push both curves to zero at extreme truncation levels;
    heavy-tailed ones keep mass in the lower curve however negative alpha goes.
    """

    probe_state: float
    alpha_grid: np.ndarray
    lower_curve: np.ndarray
    upper_curve: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["alpha", "lower", "upper"])
            for a, l, u in zip(self.alpha_grid, self.lower_curve, self.upper_curve):
                writer.writerow([format(a, ".17g"), format(l, ".17g"), format(u, ".17g")])


def b_values(model: StageModel, V, x, measure: EmpiricalMeasure) -> np.ndarray:
    """Inner values b(V)(x, xi) across all atoms (vectorized on the fast path)."""
    form = model.fast_form
    if isinstance(form, SellDownQuadratic1D) and isinstance(V, ValueFn1D):
        knots = V.grid.knots
        lo, hi = _feasible_interval(model, x, float(measure.atoms[0]))
        p = measure.atoms
        ys = np.unique(np.concatenate([[lo, hi], knots[(knots > lo) & (knots < hi)]]))
        slopes = np.diff(V.values) / np.diff(knots)
        seg = np.clip(np.searchsorted(knots, ys[:-1], side="right") - 1, 0, knots.size - 2)
        # per segment between consecutive candidate points, add the interior vertex
        vals_at = np.interp(ys, knots, V.values)
        base = form.q2 * ys * ys + form.q1 * ys + model.beta * vals_at
        # objective per atom at candidate y: base + p*y; vertex per (segment, atom)
        cand = base[None, :] + p[:, None] * ys[None, :]
        best = cand.min(axis=1)
        if form.q2 > 0.0 and ys.size >= 2:
            m = slopes[seg]
            lin = form.q1 + p[:, None] + model.beta * m[None, :]
            yv = -lin / (2.0 * form.q2)
            a = ys[:-1][None, :]
            b = ys[1:][None, :]
            inside = (yv > a) & (yv < b)
            va = np.interp(ys[:-1], knots, V.values)
            const = model.beta * (va - m * ys[:-1])
            gv = form.q2 * yv * yv + lin * yv + const[None, :]
            gv = np.where(inside, gv, np.inf)
            best = np.minimum(best, gv.min(axis=1))
        return best - p * x
    out = np.empty(len(measure))
    for i, a in enumerate(measure.atoms):
        out[i] = inner_min(model, V, x, float(a)).value
    return out


def tail_diagnostics(
    model: StageModel,
    V,
    measure: EmpiricalMeasure,
    probe_states: Sequence[float],
    alpha_grid: Sequence[float],
) -> list[TailDiagnostic]:
    """Per probe state, the truncation-level sweep of E[b; b<=a] and E[b; b>=a]."""
    alpha_grid = np.asarray(alpha_grid, dtype=np.float64)
    out = []
    for x in probe_states:
        bv = b_values(model, V, float(x), measure)
        if not np.all(np.isfinite(bv)):
            bad = measure.atoms[int(np.flatnonzero(~np.isfinite(bv))[0])]
            raise EvaluationError(f"non-finite inner value at (probe {x!r}, atom {bad!r})")
        lower = np.array(
            [
                math.fsum(w * v for w, v in zip(measure.weights, bv) if v <= a)
                for a in alpha_grid
            ]
        )
        upper = np.array(
            [
                math.fsum(w * v for w, v in zip(measure.weights, bv) if v >= a)
                for a in alpha_grid
            ]
        )
        out.append(TailDiagnostic(float(x), alpha_grid.copy(), lower, upper))
    return out


def monotone_trend(values: Sequence[float], tol: float = 0.0) -> str:
    """Classify a series as 'decreasing', 'increasing', 'flat', or 'mixed'.

    Strict directions allow one-sided wobble up to ``tol``. Used as the trend
    detector over sample-size schedules; no rate is inferred.
    """
    v = list(values)
    if len(v) < 2:
        return "flat"
    diffs = [b - a for a, b in zip(v, v[1:])]
    if all(abs(d) <= tol for d in diffs):
        return "flat"
    if all(d <= tol for d in diffs):
        return "decreasing"
    if all(d >= -tol for d in diffs):
        return "increasing"
    return "mixed"
