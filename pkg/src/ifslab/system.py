"""Finite map families with selection weights, metrics, and admissibility.

An :class:`IfsSystem` bundles k monotone interval maps with a probability
vector and the boundary window beta on which every map must be C1.  The
module provides the strong metric (weights + sup norms of maps, inverses,
and window derivatives), the weak pseudo-metric (weights + map sup norms
only), an admissibility report with exact gap margins for piecewise
linear families, and number-theoretic/orbit heuristics for minimality.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import floor, log

import numpy as np

from .interval_maps import (
    MoebiusMap,
    PiecewiseLinearMap,
    crossing_points,
    diagonal_tangency_points,
    sup_abs_deriv_diff,
    sup_abs_diff,
    validate_cbeta,
)

__all__ = [
    "DEFAULT_BETA",
    "NotAdmissibleError",
    "IfsSystem",
    "AdmissibilityReport",
    "admissibility_check",
    "metric_d",
    "metric_d0",
    "ContinuedFractionReport",
    "irrationality_heuristic",
    "MinimalityHeuristics",
    "minimality_heuristics",
]

DEFAULT_BETA = 0.05


class NotAdmissibleError(ValueError):
    """The system fails one of the admissibility requirements."""


class IfsSystem:
    """A finite family of monotone interval maps with selection weights.

    Parameters
    ----------
    maps : sequence of PiecewiseLinearMap / MoebiusMap
    probs : probability vector, nonnegative, summing to 1 within 1e-12
    beta : boundary window in (0, 1/2); every map must be C1 on
        [0, beta] and [1 - beta, 1]
    """

    __slots__ = ("_maps", "_probs", "_beta")

    def __init__(self, maps, probs, beta: float = DEFAULT_BETA):
        maps = tuple(maps)
        if not maps:
            raise ValueError("need at least one map")
        p = np.asarray(probs, dtype=float).copy()
        if p.shape != (len(maps),):
            raise ValueError(f"probs must have length {len(maps)}, got {p.shape}")
        if np.any(p < 0.0):
            raise ValueError("weights must be nonnegative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {p.sum()!r}, not 1")
        if not (0.0 < beta < 0.5):
            raise ValueError(f"beta must lie in (0, 1/2), got {beta}")
        for i, m in enumerate(maps):
            report = validate_cbeta(m, beta)
            if not report.valid:
                raise ValueError(f"maps[{i}] violates the C1 window: {report.violations}")
        p.flags.writeable = False
        self._maps = maps
        self._probs = p
        self._beta = float(beta)

    @property
    def maps(self):
        return self._maps

    @property
    def probs(self) -> np.ndarray:
        return self._probs

    @property
    def beta(self) -> float:
        return self._beta

    @property
    def k(self) -> int:
        return len(self._maps)

    @property
    def is_homeomorphic(self) -> bool:
        return all(m.is_homeomorphism for m in self._maps)

    def with_map(self, index: int, new_map) -> "IfsSystem":
        maps = list(self._maps)
        maps[index] = new_map
        return IfsSystem(maps, self._probs, self._beta)

    def reflected(self) -> "IfsSystem":
        return IfsSystem([m.reflected() for m in self._maps], self._probs, self._beta)

    def lyapunov_exponents(self):
        """(sum p_i log g_i'(0), sum p_i log g_i'(1)), exact endpoint slopes."""
        d0 = np.array([m.derivative_at_zero() for m in self._maps])
        d1 = np.array([m.derivative_at_one() for m in self._maps])
        return float(np.dot(self._probs, np.log(d0))), float(np.dot(self._probs, np.log(d1)))

    def __eq__(self, other):
        return (
            isinstance(other, IfsSystem)
            and self._beta == other._beta
            and len(self._maps) == len(other._maps)
            and all(a == b for a, b in zip(self._maps, other._maps))
            and bool(np.all(self._probs == other._probs))
        )

    __hash__ = None

    def __repr__(self):
        return f"IfsSystem(k={self.k}, beta={self._beta!r})"


# ---------------------------------------------------------------------------
# Gap envelopes.  margin(x) = min(x - min_i g_i(x), max_i g_i(x) - x) must be
# positive on the interior for admissibility.  For piecewise linear families
# the minimum over an interval is attained at a knot, a pairwise crossing, or
# an interval endpoint; Moebius maps additionally contribute their unique
# point of unit slope.  Enumerating those candidates is exact.
# ---------------------------------------------------------------------------


def _margin_candidates(system: IfsSystem, lo: float, hi: float, grid_n: int) -> np.ndarray:
    cands = [lo, hi]
    g = np.arange(1, grid_n)
    grid = g / grid_n
    cands.extend(grid[(grid > lo) & (grid < hi)].tolist())
    maps = system.maps
    for m in maps:
        if isinstance(m, PiecewiseLinearMap):
            xs = m.knot_xs
            cands.extend(xs[(xs > lo) & (xs < hi)].tolist())
        cands.extend(diagonal_tangency_points(m, lo, hi))
    for i in range(len(maps)):
        for j in range(i + 1, len(maps)):
            cands.extend(crossing_points(maps[i], maps[j], lo, hi))
    return np.unique(np.asarray(cands, dtype=float))


def _margin_over(system: IfsSystem, lo: float, hi: float, grid_n: int) -> float:
    xs = _margin_candidates(system, lo, hi, grid_n)
    vals = np.stack([m(xs) for m in system.maps])
    below = xs - vals.min(axis=0)
    above = vals.max(axis=0) - xs
    return float(np.minimum(below, above).min())


def _stabilized_margin(system: IfsSystem, lo: float, hi: float, grid_n: int) -> float:
    """Refine the grid until two successive refinements agree within 1e-9.

    Exact on the first pass for piecewise linear families; the refinement
    loop is the certificate convention for Moebius-containing systems.
    """
    margin = _margin_over(system, lo, hi, grid_n)
    if all(isinstance(m, PiecewiseLinearMap) for m in system.maps):
        return margin
    stable = 0
    n = grid_n
    while stable < 2 and n <= (1 << 22):
        n *= 2
        refined = _margin_over(system, lo, hi, n)
        stable = stable + 1 if abs(refined - margin) <= 1e-9 else 0
        margin = refined
    return margin


def _lyapunov_margin_value(system: IfsSystem, tol: float = 1e-9):
    """Largest delta keeping both shifted exponent sums positive (bisection)."""
    p = system.probs
    d0 = np.array([m.derivative_at_zero() for m in system.maps])
    d1 = np.array([m.derivative_at_one() for m in system.maps])

    def shifted(delta):
        return min(float(np.dot(p, np.log(d0 - delta))), float(np.dot(p, np.log(d1 - delta))))

    if shifted(0.0) <= 0.0:
        raise NotAdmissibleError("Lyapunov exponents are not both positive")
    hi = min(d0.min(), d1.min()) * (1.0 - 1e-12)
    lo = 0.0
    if shifted(hi) > 0.0:
        return float(hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if shifted(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return float(lo)


@dataclass
class AdmissibilityReport:
    """Margins and exponents backing the admissibility verdict.

    condition1_margin is the smallest certified gap min(x - min_i g_i(x),
    max_i g_i(x) - x) over the interior test set; lyap0/lyap1 are the
    endpoint exponent sums; delta0 is the gap margin away from the
    endpoints and delta2 the derivative slack keeping both exponents
    positive (None when undefined); ratio_cf is the continued-fraction
    heuristic for the endpoint log-derivative ratio.
    """

    condition1_margin: float
    lyap0: float
    lyap1: float
    positive_weights: bool
    grid_n: int
    margin_n: int
    delta0: float | None = None
    delta2: float | None = None
    ratio_cf: "ContinuedFractionReport | None" = None

    @property
    def admissible(self) -> bool:
        return (
            self.positive_weights
            and self.condition1_margin > 0.0
            and self.lyap0 > 0.0
            and self.lyap1 > 0.0
        )


def admissibility_check(
    system: IfsSystem,
    grid_n: int = 4096,
    margin_n: int = 10,
    cf_depth: int = 20,
) -> AdmissibilityReport:
    """Verify positive weights, interior gaps, and endpoint expansion.

    The gap margin is exact for piecewise linear families (knot, crossing
    and tangency enumeration) and grid-refined to stability otherwise.
    Raises DegenerateDerivativeError when a map is flat at an endpoint.
    """
    if margin_n < 2:
        raise ValueError("margin_n must be at least 2")
    lyap0, lyap1 = system.lyapunov_exponents()
    margin = _stabilized_margin(system, 1.0 / grid_n, 1.0 - 1.0 / grid_n, grid_n)
    positive = bool(np.all(system.probs > 0.0))
    report = AdmissibilityReport(
        condition1_margin=margin,
        lyap0=lyap0,
        lyap1=lyap1,
        positive_weights=positive,
        grid_n=grid_n,
        margin_n=margin_n,
    )
    if report.admissible:
        report.delta0 = _stabilized_margin(
            system, 1.0 / margin_n, 1.0 - 1.0 / margin_n, max(grid_n, 2 * margin_n)
        )
        report.delta2 = _lyapunov_margin_value(system)
    d0 = np.array([m.derivative_at_zero() for m in system.maps])
    if d0.max() > 1.0 > d0.min():
        report.ratio_cf = irrationality_heuristic(float(d0.max()), float(d0.min()), cf_depth)
    return report


def _require_same_shape(sys1: IfsSystem, sys2: IfsSystem):
    if sys1.k != sys2.k:
        raise ValueError(f"systems have different sizes: {sys1.k} vs {sys2.k}")


def metric_d(sys1: IfsSystem, sys2: IfsSystem) -> float:
    """Strong metric: weights + sup norms of maps, inverses, window derivatives.

    Only defined for homeomorphic families (the inverse term needs
    injectivity) sharing the boundary window.
    """
    _require_same_shape(sys1, sys2)
    if sys1.beta != sys2.beta:
        raise ValueError(f"systems have different beta: {sys1.beta} vs {sys2.beta}")
    if not (sys1.is_homeomorphic and sys2.is_homeomorphic):
        raise ValueError("metric_d needs homeomorphic maps (no flat segments)")
    beta = sys1.beta
    windows = [(0.0, beta), (1.0 - beta, 1.0)]
    total = float(np.sum(np.abs(sys1.probs - sys2.probs)))
    for g, h in zip(sys1.maps, sys2.maps):
        total += sup_abs_diff(g, h)
        total += sup_abs_diff(g.inverse_map(), h.inverse_map())
        total += sup_abs_deriv_diff(g, h, windows)
    return total


def metric_d0(sys1: IfsSystem, sys2: IfsSystem) -> float:
    """Weak pseudo-metric: weights + map sup norms; plateau maps allowed."""
    _require_same_shape(sys1, sys2)
    total = float(np.sum(np.abs(sys1.probs - sys2.probs)))
    for g, h in zip(sys1.maps, sys2.maps):
        total += sup_abs_diff(g, h)
    return total


@dataclass
class ContinuedFractionReport:
    """Continued-fraction expansion of |log a / log b| with a resonance flag."""

    ratio: float
    terms: list
    convergents: list
    best_error: float
    resonant: bool


def irrationality_heuristic(a: float, b: float, depth: int = 20) -> ContinuedFractionReport:
    """Continued-fraction test of the endpoint log-derivative ratio.

    Expands |log a / log b| to ``depth`` terms; the system is flagged
    "resonant" when the ratio coincides (to float precision) with a
    rational of denominator at most ``depth``.  Irrationality itself is
    not decidable from floating-point data, so this is a heuristic only.
    """
    if not (a > 1.0 > b > 0.0):
        raise ValueError(f"need a > 1 > b > 0, got a={a}, b={b}")
    ratio = abs(log(a) / log(b))
    terms = []
    convergents = []
    p_prev, q_prev = 1, 0
    p_cur, q_cur = 0, 1
    x = ratio
    best_error = float("inf")
    resonant = False
    for _ in range(int(depth)):
        term = floor(x)
        terms.append(int(term))
        p_prev, p_cur = p_cur, term * p_cur + p_prev
        q_prev, q_cur = q_cur, term * q_cur + q_prev
        err = abs(ratio - p_cur / q_cur)
        best_error = min(best_error, err)
        if err <= 1e-12 and q_cur <= depth:
            resonant = True
        convergents.append((int(p_cur), int(q_cur)))
        frac = x - term
        if frac <= 1e-12 * max(1.0, abs(x)):
            break
        x = 1.0 / frac
    return ContinuedFractionReport(
        ratio=ratio,
        terms=terms,
        convergents=convergents,
        best_error=best_error,
        resonant=resonant,
    )


@dataclass
class MinimalityHeuristics:
    """Evidence (never proof) that the induced action is minimal."""

    ratio_cf: ContinuedFractionReport | None
    orbit_coverage: float
    orbit_cells: int
    orbit_length: int


def minimality_heuristics(
    system: IfsSystem,
    seed: int = 0,
    orbit_length: int = 100_000,
    cells: int = 1024,
    cf_depth: int = 20,
) -> MinimalityHeuristics:
    """Continued-fraction report plus fraction of uniform cells an orbit visits."""
    d0 = np.array([m.derivative_at_zero() for m in system.maps])
    cf = None
    if d0.max() > 1.0 > d0.min():
        cf = irrationality_heuristic(float(d0.max()), float(d0.min()), cf_depth)
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    cum = np.cumsum(system.probs)
    symbols = np.searchsorted(cum, rng.random(orbit_length), side="right")
    x = 0.5
    visited = np.zeros(cells, dtype=bool)
    maps = system.maps
    for s in symbols:
        x = float(maps[s](x))
        visited[min(int(x * cells), cells - 1)] = True
    return MinimalityHeuristics(
        ratio_cf=cf,
        orbit_coverage=float(visited.mean()),
        orbit_cells=cells,
        orbit_length=orbit_length,
    )
