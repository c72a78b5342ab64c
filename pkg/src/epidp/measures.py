"""Distributions, seeded sampling, and finite atomic probability measures.

Everything downstream (Bellman sweeps, consistency experiments) integrates
against an :class:`EmpiricalMeasure`, a finite list of atoms with weights,
built either from seeded samples or from a deterministic quadrature rule.
This module provides:

* a small family of scalar distributions with exact inverse CDFs,
* a counter-based 64-bit sample stream (any draw is re-derivable from
  ``(seed, counter)``, and streams split by disjoint counter ranges),
* expectations and truncated (tail) expectations over atomic measures,
* a finite bounded-Lipschitz surrogate distance between atomic measures,
* AR(1) simulation and ordinary-least-squares estimation with the residual
  empirical measure.

All sums over atoms run in atom-insertion order through ``math.fsum``
(exactly rounded), so results do not depend on chunking or thread count.
"""

from __future__ import annotations

import math
import csv
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, Union

import numpy as np

from .errors import (
    DomainError,
    EvaluationError,
    ParameterError,
    SingularRegressorError,
)

__all__ = [
    "PointMass",
    "Uniform",
    "Exponential",
    "LogNormal",
    "Levy",
    "Normal",
    "Empirical",
    "DistributionSpec",
    "parse_distribution",
    "EmpiricalMeasure",
    "SampleStream",
    "sample",
    "empirical_from_samples",
    "expectation",
    "truncated_lower_expectation",
    "truncated_upper_expectation",
    "default_bl_family",
    "bounded_lipschitz_distance",
    "Ar1Fit",
    "ar1_ols_fit",
    "ar1_simulate",
    "normal_quantile",
]


# ---------------------------------------------------------------------------
# Normal quantile (Acklam's rational approximation)
# ---------------------------------------------------------------------------

# Peter Acklam's inverse normal CDF approximation: two rational tails plus a
# central rational form, maximum relative error ~1.15e-9. Kept explicit (rather
# than a library call) so sampled atoms are bit-reproducible from (seed,
# counter) under any runtime, and so tests can check it against an independent
# high-accuracy route.
_ACKLAM_A = (
    -3.969683028665376e01,
    2.209460984245205e02,
    -2.759285104469687e02,
    1.383577518672690e02,
    -3.066479806614716e01,
    2.506628277459239e00,
)
_ACKLAM_B = (
    -5.447609879822406e01,
    1.615858368580409e02,
    -1.556989798598866e02,
    6.680131188771972e01,
    -1.328068155288572e01,
)
_ACKLAM_C = (
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e00,
    -2.549732539343734e00,
    4.374664141464968e00,
    2.938163982698783e00,
)
_ACKLAM_D = (
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e00,
    3.754408661907416e00,
)
_ACKLAM_PLOW = 0.02425


def normal_quantile(u):
    """Standard normal quantile of ``u`` in (0,1), vectorized, ~1e-9 accurate."""
    u = np.asarray(u, dtype=np.float64)
    if np.any((u <= 0.0) | (u >= 1.0)):
        raise DomainError("normal_quantile requires arguments strictly inside (0, 1)")
    out = np.empty_like(u)

    a, b, c, d = _ACKLAM_A, _ACKLAM_B, _ACKLAM_C, _ACKLAM_D
    low = u < _ACKLAM_PLOW
    high = u > 1.0 - _ACKLAM_PLOW
    mid = ~(low | high)

    if np.any(mid):
        q = u[mid] - 0.5
        r = q * q
        num = ((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]
        den = ((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0
        out[mid] = num * q / den
    if np.any(low):
        q = np.sqrt(-2.0 * np.log(u[low]))
        num = ((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]
        den = (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
        out[low] = num / den
    if np.any(high):
        q = np.sqrt(-2.0 * np.log(1.0 - u[high]))
        num = ((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]
        den = (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
        out[high] = -num / den
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PointMass:
    value: float

    kind = "pointmass"
    integrable = True

    def quantile(self, u: np.ndarray) -> np.ndarray:
        return np.full_like(np.asarray(u, dtype=np.float64), self.value)

    def mean(self) -> float:
        return self.value

    def std(self) -> float:
        return 0.0


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    kind = "uniform"
    integrable = True

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ParameterError(f"uniform requires lo < hi, got ({self.lo}, {self.hi})")

    def quantile(self, u: np.ndarray) -> np.ndarray:
        return self.lo + np.asarray(u, dtype=np.float64) * (self.hi - self.lo)

    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def std(self) -> float:
        return (self.hi - self.lo) / math.sqrt(12.0)


@dataclass(frozen=True)
class Exponential:
    rate: float

    kind = "exponential"
    integrable = True

    def __post_init__(self):
        if not self.rate > 0.0:
            raise ParameterError(f"exponential rate must be > 0, got {self.rate}")

    def quantile(self, u: np.ndarray) -> np.ndarray:
        return -np.log1p(-np.asarray(u, dtype=np.float64)) / self.rate

    def mean(self) -> float:
        return 1.0 / self.rate

    def std(self) -> float:
        return 1.0 / self.rate


@dataclass(frozen=True)
class LogNormal:
    mu: float
    sigma: float

    kind = "lognormal"
    integrable = True

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise ParameterError(f"lognormal sigma must be > 0, got {self.sigma}")

    def quantile(self, u: np.ndarray) -> np.ndarray:
        return np.exp(self.mu + self.sigma * normal_quantile(u))

    def mean(self) -> float:
        return math.exp(self.mu + 0.5 * self.sigma**2)

    def std(self) -> float:
        s2 = self.sigma**2
        return math.sqrt((math.exp(s2) - 1.0)) * math.exp(self.mu + 0.5 * s2)


@dataclass(frozen=True)
class Normal:
    mu: float
    sigma: float

    kind = "normal"
    integrable = True

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise ParameterError(f"normal sigma must be > 0, got {self.sigma}")

    def quantile(self, u: np.ndarray) -> np.ndarray:
        return self.mu + self.sigma * normal_quantile(u)

    def mean(self) -> float:
        return self.mu

    def std(self) -> float:
        return self.sigma


@dataclass(frozen=True)
class Levy:
    """Heavy-tailed one-sided stable law; no finite mean.

    Sampling uses the exact inverse CDF x = location + scale / Q(1 - u/2)^2
    with Q the standard normal quantile, so the tail is reproduced exactly
    rather than truncated by a rejection scheme.
    """

    location: float = 0.0
    scale: float = 1.0

    kind = "levy"
    integrable = False

    def __post_init__(self):
        if not self.scale > 0.0:
            raise ParameterError(f"levy scale must be > 0, got {self.scale}")

    def quantile(self, u: np.ndarray) -> np.ndarray:
        q = normal_quantile(1.0 - 0.5 * np.asarray(u, dtype=np.float64))
        return self.location + self.scale / (q * q)

    def mean(self) -> float:
        return math.inf

    def std(self) -> float:
        return math.inf


@dataclass(frozen=True)
class Empirical:
    """Resampling distribution backed by an existing atomic measure."""

    measure: "EmpiricalMeasure"

    kind = "empirical"
    integrable = True

    def quantile(self, u: np.ndarray) -> np.ndarray:
        cum = np.cumsum(self.measure.weights)
        cum[-1] = 1.0
        idx = np.searchsorted(cum, np.asarray(u, dtype=np.float64), side="left")
        return self.measure.atoms[idx]

    def mean(self) -> float:
        return expectation(self.measure, lambda x: x)

    def std(self) -> float:
        m = self.mean()
        return math.sqrt(max(0.0, expectation(self.measure, lambda x: (x - m) ** 2)))


DistributionSpec = Union[PointMass, Uniform, Exponential, LogNormal, Normal, Levy, Empirical]

_DIST_BY_NAME = {
    "pointmass": (PointMass, ("value",)),
    "uniform": (Uniform, ("lo", "hi")),
    "exponential": (Exponential, ("rate",)),
    "lognormal": (LogNormal, ("mu", "sigma")),
    "normal": (Normal, ("mu", "sigma")),
    "levy": (Levy, ("location", "scale")),
}


def parse_distribution(text: str) -> DistributionSpec:
    """Parse a config string such as ``exponential(rate=1.0)`` or ``levy(0,1)``."""
    text = text.strip()
    open_paren = text.find("(")
    if open_paren < 0 or not text.endswith(")"):
        raise ParameterError(f"cannot parse distribution {text!r}: expected name(args)")
    name = text[:open_paren].strip().lower()
    if name not in _DIST_BY_NAME:
        known = ", ".join(sorted(_DIST_BY_NAME))
        raise ParameterError(f"unknown distribution {name!r}; known kinds: {known}")
    cls, fields = _DIST_BY_NAME[name]
    body = text[open_paren + 1 : -1].strip()
    args: list[float] = []
    kwargs: dict[str, float] = {}
    if body:
        for part in body.split(","):
            part = part.strip()
            if "=" in part:
                key, _, val = part.partition("=")
                key = key.strip().lower()
                if key not in fields:
                    raise ParameterError(
                        f"distribution {name!r} has no parameter {key!r} (has {fields})"
                    )
                kwargs[key] = _parse_float(val, text)
            else:
                args.append(_parse_float(part, text))
    if len(args) > len(fields):
        raise ParameterError(f"too many positional parameters in {text!r}")
    for key, val in zip(fields, args):
        if key in kwargs:
            raise ParameterError(f"parameter {key!r} given twice in {text!r}")
        kwargs[key] = val
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ParameterError(f"bad parameters in {text!r}: {exc}") from None


def _parse_float(token: str, context: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise ParameterError(f"bad number {token!r} in distribution {context!r}") from None


# ---------------------------------------------------------------------------
# Empirical measures
# ---------------------------------------------------------------------------

_WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Finite atomic probability measure; atom order is stable (insertion order)."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.ascontiguousarray(np.asarray(self.atoms, dtype=np.float64))
        weights = np.ascontiguousarray(np.asarray(self.weights, dtype=np.float64))
        if atoms.ndim != 1 or atoms.size == 0:
            raise DomainError("empirical measure needs a nonempty 1-d atom list")
        if weights.shape != atoms.shape:
            raise DomainError("atoms and weights must have identical length")
        if not np.all(np.isfinite(atoms)):
            raise DomainError("atoms must be finite")
        if np.any(weights < 0.0):
            raise DomainError("weights must be nonnegative")
        total = math.fsum(weights.tolist())
        if abs(total - 1.0) > _WEIGHT_TOL:
            raise DomainError(f"weights must sum to 1 within {_WEIGHT_TOL}, got {total!r}")
        atoms.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return int(self.atoms.size)

    @classmethod
    def from_samples(cls, values: Sequence[float]) -> "EmpiricalMeasure":
        values = np.asarray(values, dtype=np.float64)
        if values.size == 0:
            raise DomainError("cannot build an empirical measure from zero samples")
        weights = np.full(values.shape, 1.0 / values.size)
        return cls(values, weights)

    def prefix(self, n: int) -> "EmpiricalMeasure":
        """Uniform measure on the first ``n`` atoms (nested-sample sweeps)."""
        if not 1 <= n <= len(self):
            raise DomainError(f"prefix length {n} outside [1, {len(self)}]")
        return EmpiricalMeasure.from_samples(self.atoms[:n])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["atom", "weight"])
            for a, w in zip(self.atoms, self.weights):
                writer.writerow([format(a, ".17g"), format(w, ".17g")])

    @classmethod
    def read_csv(cls, path) -> "EmpiricalMeasure":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0] != ["atom", "weight"]:
            raise DomainError(f"{path}: expected header 'atom,weight'")
        atoms = [float(r[0]) for r in rows[1:]]
        weights = [float(r[1]) for r in rows[1:]]
        return cls(np.asarray(atoms), np.asarray(weights))


def empirical_from_samples(values: Sequence[float]) -> EmpiricalMeasure:
    """Uniform atomic measure on ``values`` (in order, weights all 1/n)."""
    return EmpiricalMeasure.from_samples(values)


# ---------------------------------------------------------------------------
# Counter-based sampling
# ---------------------------------------------------------------------------

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _uniforms(seed: int, start: int, n: int) -> np.ndarray:
    """Open-interval uniforms for counters start..start+n-1 (SplitMix64 stream).

    Each counter maps independently through the SplitMix64 finalizer, so the
    stream is random-access: parallel workers may consume disjoint counter
    ranges and reproduce any atom later from (seed, counter) alone.
    """
    seed64 = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    idx = np.arange(start + 1, start + n + 1, dtype=np.uint64)
    z = seed64 + idx * _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    z = z ^ (z >> np.uint64(31))
    # (z >> 11) has 53 random bits; the half-step keeps u strictly inside (0,1)
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * (2.0**-53)


class SampleStream:
    """Seeded, counter-based sample source for one distribution.

    The (seed, counter, distribution) triple determines the next draw
    bit-exactly. Advancement is the only mutation; split work across workers
    by giving each a copy positioned at a disjoint counter range (``at``).
    """

    __slots__ = ("seed", "distribution", "counter")

    def __init__(self, seed: int, distribution: DistributionSpec, counter: int = 0):
        if counter < 0:
            raise ParameterError(f"counter must be nonnegative, got {counter}")
        self.seed = int(seed)
        self.distribution = distribution
        self.counter = int(counter)

    def draw(self, n: int) -> np.ndarray:
        """Return ``n`` draws and advance the counter by ``n``."""
        if n < 1:
            raise ParameterError(f"sample count must be >= 1, got {n}")
        u = _uniforms(self.seed, self.counter, n)
        values = self.distribution.quantile(u)
        self.counter += n
        return np.asarray(values, dtype=np.float64)

    def at(self, counter: int) -> "SampleStream":
        """A new stream over the same (seed, distribution) at ``counter``."""
        return SampleStream(self.seed, self.distribution, counter)


def sample(stream: SampleStream, n: int) -> np.ndarray:
    """Draw ``n`` values from ``stream``, advancing its counter by ``n``."""
    return stream.draw(n)


# ---------------------------------------------------------------------------
# Expectations
# ---------------------------------------------------------------------------


def _atom_values(m: EmpiricalMeasure, f: Callable[[float], float]) -> np.ndarray:
    values = np.empty(len(m))
    for i, a in enumerate(m.atoms):
        v = f(float(a))
        if not math.isfinite(v):
            raise EvaluationError(f"integrand returned non-finite value {v!r} at atom {a!r}")
        values[i] = v
    return values


def expectation(m: EmpiricalMeasure, f: Callable[[float], float]) -> float:
    """Sum of weights*f(atoms) in atom order, exactly-rounded accumulation."""
    values = _atom_values(m, f)
    return math.fsum((w * v for w, v in zip(m.weights, values)))


def truncated_lower_expectation(m: EmpiricalMeasure, f: Callable[[float], float], alpha: float) -> float:
    """E[f; f <= alpha]: the lower-tail part of the expectation."""
    values = _atom_values(m, f)
    return math.fsum(w * v for w, v in zip(m.weights, values) if v <= alpha)


def truncated_upper_expectation(m: EmpiricalMeasure, f: Callable[[float], float], alpha: float) -> float:
    """E[f; f >= alpha]: the upper-tail part of the expectation."""
    values = _atom_values(m, f)
    return math.fsum(w * v for w, v in zip(m.weights, values) if v >= alpha)


# ---------------------------------------------------------------------------
# Bounded-Lipschitz surrogate distance
# ---------------------------------------------------------------------------


def default_bl_family(p: EmpiricalMeasure, q: EmpiricalMeasure) -> list[Callable[[float], float]]:
    """Deterministic finite family of bounded 1-Lipschitz ramps.

    Centers sit on a 21-point grid spanning the pooled support; widths are
    {0.5, 1, 2}. Members with width w < 1 are scaled by w so every member has
    Lipschitz constant exactly 1 and sup-norm at most 1, which makes the max
    over the family a valid lower bound on the bounded-Lipschitz metric.
    """
    lo = min(float(p.atoms.min()), float(q.atoms.min()))
    hi = max(float(p.atoms.max()), float(q.atoms.max()))
    if hi <= lo:
        hi = lo + 1.0
    centers = np.linspace(lo, hi, 21)
    family = []
    for w in (0.5, 1.0, 2.0):
        scale = min(w, 1.0)
        for c in centers:
            def ramp(x, c=float(c), w=float(w), scale=float(scale)):
                return scale * min(1.0, max(-1.0, (x - c) / w))

            family.append(ramp)
    return family


def bounded_lipschitz_distance(
    p: EmpiricalMeasure,
    q: EmpiricalMeasure,
    testfns: Iterable[Callable[[float], float]] | None = None,
) -> float:
    """Max over a finite test family of |E_p[f] - E_q[f]|.

    A lower bound on the true bounded-Lipschitz metric when every member is
    bounded by 1 and 1-Lipschitz (the caller's obligation for custom families;
    the default family satisfies it by construction).
    """
    family = list(testfns) if testfns is not None else default_bl_family(p, q)
    if not family:
        raise DomainError("bounded_lipschitz_distance needs a nonempty test family")
    return max(abs(expectation(p, f) - expectation(q, f)) for f in family)


# ---------------------------------------------------------------------------
# AR(1) estimation and simulation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Ar1Fit:
    """Least-squares fit of log-price persistence plus residual measure."""

    alpha_hat: float
    mu_hat: float
    residuals: EmpiricalMeasure
    n: int


def ar1_ols_fit(log_prices: Sequence[float], residuals_include_intercept: bool = False) -> Ar1Fit:
    """Regress each log price on its predecessor (with intercept).

    Residuals are computed without the intercept by default, i.e. as
    ``l[t+1] - alpha_hat * l[t]``; set ``residuals_include_intercept`` to also
    subtract ``mu_hat``.
    """
    ell = np.asarray(log_prices, dtype=np.float64)
    if ell.ndim != 1 or ell.size < 3:
        raise DomainError(f"need at least 3 log prices, got {ell.size}")
    x = ell[:-1]
    y = ell[1:]
    if np.ptp(x) == 0.0:
        raise SingularRegressorError("regressor sequence is constant; slope not identified")
    design = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    alpha_hat, mu_hat = float(coef[0]), float(coef[1])
    resid = y - alpha_hat * x
    if residuals_include_intercept:
        resid = resid - mu_hat
    return Ar1Fit(alpha_hat, mu_hat, EmpiricalMeasure.from_samples(resid), int(x.size))


def ar1_simulate(
    alpha: float,
    ell1: float,
    noise: DistributionSpec,
    n: int,
    seed: int,
    counter: int = 0,
) -> np.ndarray:
    """Simulate ``n`` autoregressive steps: returns [l1, ..., l{n+1}]."""
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie strictly inside (0, 1), got {alpha}")
    if n < 1:
        raise ParameterError(f"step count must be >= 1, got {n}")
    shocks = SampleStream(seed, noise, counter).draw(n)
    ell = np.empty(n + 1)
    ell[0] = ell1
    for t in range(n):
        ell[t + 1] = alpha * ell[t] + shocks[t]
    return ell
