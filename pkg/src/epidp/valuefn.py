"""Grid-sampled value functions and epigraph geometry.

Value functions live on interval grids: piecewise-linear interpolation in one
dimension, bilinear on a rectangle in two. Piecewise-linear interpolation
preserves convexity; bilinear interpolation preserves neither convexity nor
concavity exactly, so the saddle probe below measures the defect instead of
assuming it away.

The epigraph of a 1-d grid function is bounded by its graph segments plus two
vertical rays; its point-to-set distance is computed analytically (projection
onto those pieces), which matters because the Attouch-Wets integral evaluates
it at thousands of points per call. The 2-d variant minimizes over bilinear
cells with a pruned multistart pattern search and is an upper-bounding
heuristic, not exact.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeMismatchError

__all__ = [
    "Grid1D",
    "Grid2D",
    "ValueFn1D",
    "ValueFn2D",
    "EpigraphPoint",
    "evaluate",
    "sup_norm_diff",
    "convexity_defect",
    "saddle_defect",
    "epigraph_distance",
    "epigraph_distance_2d",
    "lipschitz_moduli",
    "value_fn_to_csv",
    "value_fn_from_csv",
]


def _check_knots(knots: np.ndarray, label: str) -> np.ndarray:
    knots = np.ascontiguousarray(np.asarray(knots, dtype=np.float64))
    if knots.ndim != 1 or knots.size < 2:
        raise DomainError(f"{label} needs at least 2 knots")
    if not np.all(np.isfinite(knots)):
        raise DomainError(f"{label} knots must be finite")
    if not np.all(np.diff(knots) > 0.0):
        raise DomainError(f"{label} knots must be strictly increasing")
    knots.setflags(write=False)
    return knots


@dataclass(frozen=True)
class Grid1D:
    knots: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "knots", _check_knots(self.knots, "grid"))

    @classmethod
    def uniform(cls, lo: float, hi: float, n: int) -> "Grid1D":
        if n < 2:
            raise DomainError("uniform grid needs at least 2 knots")
        return cls(np.linspace(lo, hi, n))

    @property
    def lo(self) -> float:
        return float(self.knots[0])

    @property
    def hi(self) -> float:
        return float(self.knots[-1])

    def __len__(self) -> int:
        return int(self.knots.size)


@dataclass(frozen=True)
class Grid2D:
    """Inventory knots crossed with exogenous (log-price) knots."""

    x_knots: np.ndarray
    ell_knots: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x_knots", _check_knots(self.x_knots, "x grid"))
        object.__setattr__(self, "ell_knots", _check_knots(self.ell_knots, "ell grid"))

    @property
    def shape(self) -> tuple[int, int]:
        return (int(self.x_knots.size), int(self.ell_knots.size))


@dataclass(frozen=True)
class ValueFn1D:
    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if values.shape != self.grid.knots.shape:
            raise ShapeMismatchError("values must have one entry per knot")
        if not np.all(np.isfinite(values)):
            raise DomainError("value functions must be finite at every knot")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: Grid1D) -> "ValueFn1D":
        return cls(grid, np.zeros(len(grid)))

    def with_values(self, values: np.ndarray) -> "ValueFn1D":
        return ValueFn1D(self.grid, values)

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        knots = self.grid.knots
        if np.any((x < knots[0]) | (x > knots[-1])):
            raise DomainError(
                f"evaluation point outside grid span [{knots[0]}, {knots[-1]}]"
            )
        out = np.interp(x, knots, self.values)
        return float(out) if out.ndim == 0 else out

    def restrict(self, x_hi: float) -> "ValueFn1D":
        """The same function truncated to [lo, x_hi] (x_hi becomes a knot)."""
        knots = self.grid.knots
        if not knots[0] < x_hi <= knots[-1]:
            raise DomainError(f"restriction cap {x_hi} outside ({knots[0]}, {knots[-1]}]")
        keep = knots < x_hi
        new_knots = np.append(knots[keep], x_hi)
        new_values = np.append(self.values[keep], self(x_hi))
        return ValueFn1D(Grid1D(new_knots), new_values)


@dataclass(frozen=True)
class ValueFn2D:
    """Bilinear interpolant; the exogenous coordinate is clipped to its span.

    Clipping (rather than erroring) reflects that the exogenous state is
    unbounded in the underlying model; callers that care count clip events at
    the point where transitions are computed.
    """

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if values.shape != self.grid.shape:
            raise ShapeMismatchError(
                f"values shape {values.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise DomainError("value functions must be finite at every knot")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: Grid2D) -> "ValueFn2D":
        return cls(grid, np.zeros(grid.shape))

    def with_values(self, values: np.ndarray) -> "ValueFn2D":
        return ValueFn2D(self.grid, values)

    def __call__(self, x, ell):
        xk = self.grid.x_knots
        lk = self.grid.ell_knots
        x = np.asarray(x, dtype=np.float64)
        ell = np.asarray(ell, dtype=np.float64)
        if np.any((x < xk[0]) | (x > xk[-1])):
            raise DomainError(f"inventory outside grid span [{xk[0]}, {xk[-1]}]")
        ell = np.clip(ell, lk[0], lk[-1])
        ix = np.clip(np.searchsorted(xk, x, side="right") - 1, 0, xk.size - 2)
        il = np.clip(np.searchsorted(lk, ell, side="right") - 1, 0, lk.size - 2)
        tx = (x - xk[ix]) / (xk[ix + 1] - xk[ix])
        tl = (ell - lk[il]) / (lk[il + 1] - lk[il])
        v00 = self.values[ix, il]
        v01 = self.values[ix, il + 1]
        v10 = self.values[ix + 1, il]
        v11 = self.values[ix + 1, il + 1]
        out = (1 - tx) * ((1 - tl) * v00 + tl * v01) + tx * ((1 - tl) * v10 + tl * v11)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class EpigraphPoint:
    """A point (state, cost-level) in the space the epigraphs live in."""

    x: tuple[float, ...]
    alpha: float

    def __post_init__(self):
        x = self.x
        if isinstance(x, (int, float)):
            x = (float(x),)
        else:
            x = tuple(float(c) for c in x)
        if not all(math.isfinite(c) for c in x) or not math.isfinite(self.alpha):
            raise DomainError("epigraph points must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "alpha", float(self.alpha))


def evaluate(f, x, ell=None):
    """Interpolated value of ``f`` at a state (exact at knots)."""
    if isinstance(f, ValueFn2D):
        if ell is None:
            x, ell = x
        return f(x, ell)
    return f(x)


def sup_norm_diff(f, g) -> float:
    """Max absolute knotwise difference; requires identical grids."""
    if isinstance(f, ValueFn1D) and isinstance(g, ValueFn1D):
        if not np.array_equal(f.grid.knots, g.grid.knots):
            raise ShapeMismatchError("sup_norm_diff requires identical grids")
    elif isinstance(f, ValueFn2D) and isinstance(g, ValueFn2D):
        if not (
            np.array_equal(f.grid.x_knots, g.grid.x_knots)
            and np.array_equal(f.grid.ell_knots, g.grid.ell_knots)
        ):
            raise ShapeMismatchError("sup_norm_diff requires identical grids")
    else:
        raise ShapeMismatchError("sup_norm_diff requires two functions of the same kind")
    return float(np.max(np.abs(f.values - g.values)))


def _second_differences(knots: np.ndarray, values: np.ndarray) -> np.ndarray:
    # slope increments scaled by the mean spacing: reduces to
    # v[i-1] - 2 v[i] + v[i+1] on uniform grids and keeps the sign of
    # convexity on any grid
    slopes = np.diff(values) / np.diff(knots)
    hbar = 0.5 * (knots[2:] - knots[:-2])
    return hbar * np.diff(slopes)


def convexity_defect(f: ValueFn1D) -> float:
    """0 when the knot values are convex; otherwise the worst violation."""
    if len(f.grid) < 3:
        return 0.0
    d = _second_differences(f.grid.knots, f.values)
    return float(max(0.0, -d.min()))


def saddle_defect(f: ValueFn2D) -> tuple[float, float]:
    """(convexity defect along inventory, concavity defect along log-price)."""
    xk = f.grid.x_knots
    lk = f.grid.ell_knots
    convex_x = 0.0
    if xk.size >= 3:
        d = np.apply_along_axis(lambda col: _second_differences(xk, col).min(), 0, f.values)
        convex_x = max(0.0, -float(d.min()))
    concave_l = 0.0
    if lk.size >= 3:
        d = np.apply_along_axis(lambda row: _second_differences(lk, row).max(), 1, f.values)
        concave_l = max(0.0, float(d.max()))
    return convex_x, concave_l


def lipschitz_moduli(f, radii) -> list[float]:
    """Largest knot-pair difference quotients within each radius.

    Finite-scale probe of local Lipschitz behaviour: modulus(r) is the max of
    |f(xi) - f(xj)| / |xi - xj| over knot pairs with |xi - xj| <= r. For 2-d
    functions the probe runs along both knot axes (all slices) and takes the
    larger quotient. No limiting modulus is inferred; only these finite
    curves are reported.
    """
    if isinstance(f, ValueFn2D):
        out = [0.0] * len(list(radii))
        radii = list(radii)
        for j in range(f.grid.ell_knots.size):
            col = ValueFn1D(Grid1D(f.grid.x_knots), f.values[:, j])
            out = [max(a, b) for a, b in zip(out, lipschitz_moduli(col, radii))]
        for i in range(f.grid.x_knots.size):
            row = ValueFn1D(Grid1D(f.grid.ell_knots), f.values[i, :])
            out = [max(a, b) for a, b in zip(out, lipschitz_moduli(row, radii))]
        return out
    knots = f.grid.knots
    values = f.values
    out = []
    for r in radii:
        if r <= 0:
            raise DomainError("radii must be positive")
        best = 0.0
        for i in range(knots.size - 1):
            j = i + 1
            while j < knots.size and knots[j] - knots[i] <= r:
                best = max(best, abs(values[j] - values[i]) / (knots[j] - knots[i]))
                j += 1
        out.append(best)
    return out


# ---------------------------------------------------------------------------
# Epigraph distances
# ---------------------------------------------------------------------------


def _epi_dist_1d(zx: np.ndarray, za: np.ndarray, knots: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Exact distances from points (zx, za) to the epigraph of a PWL function.

    The epigraph (over the grid span) is closed with boundary equal to the
    graph segments plus the two upward rays above the span endpoints, so the
    distance is the minimum over projections onto those pieces; points inside
    map to zero.
    """
    zx = np.atleast_1d(np.asarray(zx, dtype=np.float64))
    za = np.atleast_1d(np.asarray(za, dtype=np.float64))
    ax, bx = knots[:-1], knots[1:]
    ay, by = values[:-1], values[1:]
    dx = bx - ax
    dy = by - ay
    seg_len2 = dx * dx + dy * dy

    px = zx[:, None] - ax[None, :]
    py = za[:, None] - ay[None, :]
    t = (px * dx[None, :] + py * dy[None, :]) / seg_len2[None, :]
    t = np.clip(t, 0.0, 1.0)
    ex = px - t * dx[None, :]
    ey = py - t * dy[None, :]
    d2 = np.min(ex * ex + ey * ey, axis=1)

    for xb, yb in ((knots[0], values[0]), (knots[-1], values[-1])):
        rx = zx - xb
        ry = np.minimum(za - yb, 0.0)
        d2 = np.minimum(d2, rx * rx + ry * ry)

    inside = (zx >= knots[0]) & (zx <= knots[-1])
    if np.any(inside):
        fx = np.interp(zx[inside], knots, values)
        hit = za[inside] >= fx
        d2[np.flatnonzero(inside)[hit]] = 0.0
    return np.sqrt(d2)


def epigraph_distance(z, f: ValueFn1D, domain_cap: float | None = None) -> float:
    """Euclidean distance from ``z`` to the epigraph of ``f`` on [lo, cap]."""
    if isinstance(z, EpigraphPoint):
        zx, za = z.x[0], z.alpha
    else:
        zx, za = float(z[0]), float(z[1])
    if domain_cap is not None:
        f = f.restrict(domain_cap)
    return float(_epi_dist_1d(np.array([zx]), np.array([za]), f.grid.knots, f.values)[0])


def _epi_dist_2d(zs: np.ndarray, f: ValueFn2D, shrink_rounds: int = 30) -> np.ndarray:
    """Distances from points (x, ell, alpha) to the epigraph of a bilinear fn.

    For fixed (x, ell) the nearest epigraph point directly above costs
    g = (x-zx)^2 + (ell-zl)^2 + max(0, F(x,ell) - za)^2, and minimizing g over
    the rectangle also covers the epigraph's side walls. Cells that cannot
    beat the best knot value are pruned; survivors run a shrinking 3x3 pattern
    search (multistart at cell centers), vectorized over all surviving
    (point, cell) pairs. Upper-bounding heuristic: bilinear patches can hide
    non-convex minima from the pattern search, so the result may slightly
    overestimate the true distance.
    """
    xk = f.grid.x_knots
    lk = f.grid.ell_knots
    V = f.values
    zs = np.asarray(zs, dtype=np.float64)
    n_pts = zs.shape[0]
    out = np.empty(n_pts)

    # bilinear extrema sit at cell corners, giving per-cell vertical bounds
    cmin = np.minimum(np.minimum(V[:-1, :-1], V[1:, :-1]), np.minimum(V[:-1, 1:], V[1:, 1:]))
    X0, X1 = xk[:-1], xk[1:]
    L0, L1 = lk[:-1], lk[1:]
    flat_knots_x = np.repeat(xk, lk.size)
    flat_knots_l = np.tile(lk, xk.size)
    flat_v = V.ravel()

    chunk = max(1, int(2e6 // max(1, flat_v.size)))
    for lo_i in range(0, n_pts, chunk):
        sel = slice(lo_i, min(lo_i + chunk, n_pts))
        zx = zs[sel, 0][:, None]
        zl = zs[sel, 1][:, None]
        za = zs[sel, 2][:, None]
        g_knots = (
            (flat_knots_x[None, :] - zx) ** 2
            + (flat_knots_l[None, :] - zl) ** 2
            + np.maximum(flat_v[None, :] - za, 0.0) ** 2
        )
        best = g_knots.min(axis=1)

        # lower bound per (point, cell): squared distance to the cell
        # rectangle plus the smallest possible vertical gap
        ddx = np.maximum(np.maximum(X0[None, :] - zx, zx - X1[None, :]), 0.0)
        ddl = np.maximum(np.maximum(L0[None, :] - zl, zl - L1[None, :]), 0.0)
        vert = np.maximum(cmin.ravel()[None, :] - za, 0.0)
        lower = (
            (ddx**2)[:, :, None] + (ddl**2)[:, None, :]
        ).reshape(zx.size, -1) + vert**2
        pid, cell = np.nonzero(lower < best[:, None])
        if pid.size:
            ci, cj = np.unravel_index(cell, cmin.shape)
            pzx = zs[sel, 0][pid]
            pzl = zs[sel, 1][pid]
            pza = zs[sel, 2][pid]
            x0, x1 = X0[ci], X1[ci]
            l0, l1 = L0[cj], L1[cj]
            v00, v01 = V[ci, cj], V[ci, cj + 1]
            v10, v11 = V[ci + 1, cj], V[ci + 1, cj + 1]
            cx = 0.5 * (x0 + x1)
            cl = 0.5 * (l0 + l1)
            hx = 0.5 * (x1 - x0)
            hl = 0.5 * (l1 - l0)
            pair_best = np.full(pid.shape, np.inf)
            for _ in range(shrink_rounds):
                gb = None
                for ox in (-1.0, 0.0, 1.0):
                    for ol in (-1.0, 0.0, 1.0):
                        px = np.clip(cx + ox * hx, x0, x1)
                        pl = np.clip(cl + ol * hl, l0, l1)
                        tx = (px - x0) / (x1 - x0)
                        tl = (pl - l0) / (l1 - l0)
                        fv = (1 - tx) * ((1 - tl) * v00 + tl * v01) + tx * (
                            (1 - tl) * v10 + tl * v11
                        )
                        g = (px - pzx) ** 2 + (pl - pzl) ** 2 + np.maximum(fv - pza, 0.0) ** 2
                        if gb is None:
                            gb, pxb, plb = g, px, pl
                        else:
                            hit = g < gb
                            gb = np.where(hit, g, gb)
                            pxb = np.where(hit, px, pxb)
                            plb = np.where(hit, pl, plb)
                cx, cl = pxb, plb
                hx = hx * 0.5
                hl = hl * 0.5
                pair_best = np.minimum(pair_best, gb)
            np.minimum.at(best, pid, pair_best)
        out[sel] = np.sqrt(best)
    return out


def epigraph_distance_2d(z, f: ValueFn2D) -> float:
    """Distance from ``z = (x, ell, alpha)`` to the epigraph of ``f``."""
    if isinstance(z, EpigraphPoint):
        if len(z.x) != 2:
            raise DomainError("2-d epigraph distance needs a 2-d state")
        zarr = np.array([[z.x[0], z.x[1], z.alpha]])
    else:
        zarr = np.array([[float(z[0]), float(z[1]), float(z[2])]])
    return float(_epi_dist_2d(zarr, f)[0])


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def value_fn_to_csv(f, path) -> None:
    """1-d as ``x,value``; 2-d as ``x,ell,value`` in row-major knot order."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if isinstance(f, ValueFn1D):
            writer.writerow(["x", "value"])
            for x, v in zip(f.grid.knots, f.values):
                writer.writerow([format(x, ".17g"), format(v, ".17g")])
        elif isinstance(f, ValueFn2D):
            writer.writerow(["x", "ell", "value"])
            for i, x in enumerate(f.grid.x_knots):
                for j, ell in enumerate(f.grid.ell_knots):
                    writer.writerow(
                        [format(x, ".17g"), format(ell, ".17g"), format(f.values[i, j], ".17g")]
                    )
        else:
            raise ShapeMismatchError(f"cannot serialize {type(f).__name__}")


def value_fn_from_csv(path):
    """Read back a value function written by :func:`value_fn_to_csv`."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DomainError(f"{path}: empty file")
    header = rows[0]
    body = rows[1:]
    if header == ["x", "value"]:
        knots = np.array([float(r[0]) for r in body])
        values = np.array([float(r[1]) for r in body])
        return ValueFn1D(Grid1D(knots), values)
    if header == ["x", "ell", "value"]:
        xs = np.array([float(r[0]) for r in body])
        ells = np.array([float(r[1]) for r in body])
        vals = np.array([float(r[2]) for r in body])
        x_knots = np.unique(xs)
        ell_knots = np.unique(ells)
        if xs.size != x_knots.size * ell_knots.size:
            raise DomainError(f"{path}: rows do not form a full grid")
        values = vals.reshape(x_knots.size, ell_knots.size)
        return ValueFn2D(Grid2D(x_knots, ell_knots), values)
    raise DomainError(f"{path}: unrecognized header {header}")
