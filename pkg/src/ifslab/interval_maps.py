"""Parametric nondecreasing self-maps of [0, 1] that fix both endpoints.

Two closed-form families are provided: piecewise linear maps given by a
knot list, and Moebius maps x -> lam*x / (1 + (lam - 1)*x).  Both expose
exact evaluation, generalized inverses, and one-sided endpoint
derivatives, so metric and certificate computations downstream never
have to fall back on numerical root finding.  Maps are immutable after
construction and all operations are pure.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DegenerateDerivativeError",
    "PiecewiseLinearMap",
    "MoebiusMap",
    "identity_map",
    "word_eval",
    "validate_cbeta",
    "CbetaReport",
    "sup_abs_diff",
    "sup_abs_deriv_diff",
    "crossing_points",
    "diagonal_tangency_points",
]

_DOMAIN_SLACK = 1e-12


class DegenerateDerivativeError(ValueError):
    """Endpoint derivative is zero or undefined (flat boundary segment)."""


def _check_domain(x, name):
    arr = np.asarray(x, dtype=float)
    if arr.size and (np.nanmin(arr) < -_DOMAIN_SLACK or np.nanmax(arr) > 1.0 + _DOMAIN_SLACK):
        raise ValueError(f"{name} outside [0, 1]: range [{np.nanmin(arr)}, {np.nanmax(arr)}]")
    if np.any(~np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return np.clip(arr, 0.0, 1.0)


def _unwrap(value, like):
    if np.isscalar(like) or getattr(like, "ndim", 0) == 0:
        return float(value)
    return value


class PiecewiseLinearMap:
    """Nondecreasing piecewise linear map through (0, 0) and (1, 1).

    Parameters
    ----------
    knots : sequence of (x, y) pairs
        x strictly increasing from 0 to 1, y nondecreasing from 0 to 1.
        Endpoints must be pinned exactly.  Equal consecutive y values
        produce a flat segment, in which case the map is not injective
        (a "plateau" map).
    """

    __slots__ = ("_xs", "_ys")

    def __init__(self, knots):
        pts = np.asarray(knots, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise ValueError("knots must be a sequence of at least two (x, y) pairs")
        xs, ys = pts[:, 0].copy(), pts[:, 1].copy()
        if xs[0] != 0.0 or ys[0] != 0.0 or xs[-1] != 1.0 or ys[-1] != 1.0:
            raise ValueError("knot endpoints must be exactly (0, 0) and (1, 1)")
        if np.any(np.diff(xs) <= 0.0):
            raise ValueError("knot x coordinates must be strictly increasing")
        if np.any(np.diff(ys) < 0.0):
            raise ValueError("knot y coordinates must be nondecreasing")
        xs.flags.writeable = False
        ys.flags.writeable = False
        self._xs = xs
        self._ys = ys

    @property
    def knots(self) -> np.ndarray:
        return np.column_stack([self._xs, self._ys])

    @property
    def knot_xs(self) -> np.ndarray:
        return self._xs

    @property
    def knot_ys(self) -> np.ndarray:
        return self._ys

    @property
    def is_homeomorphism(self) -> bool:
        return bool(np.all(np.diff(self._ys) > 0.0))

    def flat_segments(self):
        """Maximal intervals [u, v] on which the map is constant."""
        flats = []
        xs, ys = self._xs, self._ys
        i = 0
        while i < len(ys) - 1:
            if ys[i + 1] == ys[i]:
                j = i
                while j < len(ys) - 1 and ys[j + 1] == ys[j]:
                    j += 1
                flats.append((float(xs[i]), float(xs[j]), float(ys[i])))
                i = j
            else:
                i += 1
        return flats

    def __call__(self, x):
        arr = _check_domain(x, "x")
        return _unwrap(np.interp(arr, self._xs, self._ys), x)

    def inverse(self, y):
        """Generalized inverse sup{t : g(t) <= y} (right end of the preimage)."""
        arr = _check_domain(y, "y")
        xs, ys = self._xs, self._ys
        j = np.searchsorted(ys, arr, side="right") - 1
        j = np.clip(j, 0, len(xs) - 1)
        nxt = np.minimum(j + 1, len(xs) - 1)
        y0, y1 = ys[j], ys[nxt]
        denom = y1 - y0
        safe = np.where(denom > 0.0, denom, 1.0)
        t = np.where(denom > 0.0, (arr - y0) / safe, 0.0)
        out = xs[j] + t * (xs[nxt] - xs[j])
        return _unwrap(out, y)

    def inverse_left(self, y):
        """Generalized inverse inf{t : g(t) >= y} (left end of the preimage)."""
        arr = _check_domain(y, "y")
        xs, ys = self._xs, self._ys
        j = np.searchsorted(ys, arr, side="left")
        j = np.clip(j, 0, len(xs) - 1)
        prev = np.maximum(j - 1, 0)
        y0, y1 = ys[prev], ys[j]
        denom = y1 - y0
        safe = np.where(denom > 0.0, denom, 1.0)
        t = np.where(denom > 0.0, (arr - y0) / safe, 0.0)
        interp = xs[prev] + t * (xs[j] - xs[prev])
        out = np.where(ys[j] == arr, xs[j], interp)
        return _unwrap(out, y)

    def derivative(self, x):
        """One-sided slope (right derivative, left derivative at x = 1)."""
        arr = _check_domain(x, "x")
        xs, ys = self._xs, self._ys
        i = np.searchsorted(xs, arr, side="right") - 1
        i = np.clip(i, 0, len(xs) - 2)
        out = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])
        return _unwrap(out, x)

    def derivative_at_zero(self) -> float:
        s = (self._ys[1] - self._ys[0]) / (self._xs[1] - self._xs[0])
        if s <= 0.0:
            raise DegenerateDerivativeError("flat first segment, derivative at 0 is zero")
        return float(s)

    def derivative_at_one(self) -> float:
        s = (self._ys[-1] - self._ys[-2]) / (self._xs[-1] - self._xs[-2])
        if s <= 0.0:
            raise DegenerateDerivativeError("flat last segment, derivative at 1 is zero")
        return float(s)

    def inverse_map(self) -> "PiecewiseLinearMap":
        if not self.is_homeomorphism:
            raise ValueError("map is not injective, no inverse map exists")
        return PiecewiseLinearMap(np.column_stack([self._ys, self._xs]))

    def reflected(self) -> "PiecewiseLinearMap":
        """Conjugation by x -> 1 - x (swaps the roles of the endpoints)."""
        return PiecewiseLinearMap(np.column_stack([1.0 - self._xs[::-1], 1.0 - self._ys[::-1]]))

    def __eq__(self, other):
        return (
            isinstance(other, PiecewiseLinearMap)
            and self._xs.shape == other._xs.shape
            and bool(np.all(self._xs == other._xs))
            and bool(np.all(self._ys == other._ys))
        )

    __hash__ = None

    def __repr__(self):
        pts = ", ".join(f"({x!r}, {y!r})" for x, y in zip(self._xs, self._ys))
        return f"PiecewiseLinearMap([{pts}])"


class MoebiusMap:
    """Moebius map x -> lam*x / (1 + (lam - 1)*x) with parameter lam > 0.

    Fixes 0 and 1, derivative lam at 0 and 1/lam at 1; the inverse is the
    Moebius map with parameter 1/lam.
    """

    __slots__ = ("_lam",)

    def __init__(self, lam: float):
        lam = float(lam)
        if not np.isfinite(lam) or lam <= 0.0:
            raise ValueError(f"lam must be a positive finite number, got {lam}")
        self._lam = lam

    @property
    def lam(self) -> float:
        return self._lam

    @property
    def is_homeomorphism(self) -> bool:
        return True

    def flat_segments(self):
        return []

    def __call__(self, x):
        arr = _check_domain(x, "x")
        lam = self._lam
        return _unwrap(lam * arr / (1.0 + (lam - 1.0) * arr), x)

    def inverse(self, y):
        arr = _check_domain(y, "y")
        lam = self._lam
        return _unwrap(arr / (lam - (lam - 1.0) * arr), y)

    inverse_left = inverse

    def derivative(self, x):
        arr = _check_domain(x, "x")
        lam = self._lam
        d = 1.0 + (lam - 1.0) * arr
        return _unwrap(lam / (d * d), x)

    def derivative_at_zero(self) -> float:
        return self._lam

    def derivative_at_one(self) -> float:
        return 1.0 / self._lam

    def inverse_map(self) -> "MoebiusMap":
        return MoebiusMap(1.0 / self._lam)

    def reflected(self) -> "MoebiusMap":
        # 1 - g(1 - x) simplifies to the Moebius map with parameter 1/lam
        return MoebiusMap(1.0 / self._lam)

    def __eq__(self, other):
        return isinstance(other, MoebiusMap) and self._lam == other._lam

    __hash__ = None

    def __repr__(self):
        return f"MoebiusMap({self._lam!r})"


def identity_map() -> PiecewiseLinearMap:
    return PiecewiseLinearMap([(0.0, 0.0), (1.0, 1.0)])


def word_eval(maps, word, x, order: str = "forward"):
    """Apply the composition selected by a word of 1-based map indices.

    order="forward" applies the first symbol first (the orbit
    convention); order="backward" applies the last symbol first, so the
    first symbol acts outermost.
    """
    k = len(maps)
    seq = list(word)
    for i in seq:
        if not (isinstance(i, (int, np.integer)) and 1 <= i <= k):
            raise ValueError(f"word symbol {i!r} outside 1..{k}")
    if order == "forward":
        pass
    elif order == "backward":
        seq = seq[::-1]
    else:
        raise ValueError(f"order must be 'forward' or 'backward', got {order!r}")
    for i in seq:
        x = maps[i - 1](x)
    return x


@dataclass
class CbetaReport:
    """Outcome of the boundary-window smoothness check."""

    beta: float
    valid: bool
    violations: list = field(default_factory=list)


def _collinear(xs, ys, j) -> bool:
    left = (ys[j] - ys[j - 1]) * (xs[j + 1] - xs[j])
    right = (ys[j + 1] - ys[j]) * (xs[j] - xs[j - 1])
    scale = max(abs(left), abs(right), 1e-300)
    return abs(left - right) <= 1e-12 * scale


def validate_cbeta(m, beta: float) -> CbetaReport:
    """Check that a map is admissible data for boundary window beta.

    Confirms monotonicity and endpoint fixing, and that the map is C1 on
    [0, beta] and [1 - beta, 1].  For piecewise linear maps this means no
    non-collinear knot strictly inside either window; Moebius maps are
    smooth everywhere.  Violations are returned, not raised.
    """
    if not (0.0 < beta < 0.5):
        raise ValueError(f"beta must lie in (0, 1/2), got {beta}")
    violations = []
    if isinstance(m, MoebiusMap):
        return CbetaReport(beta=beta, valid=True, violations=violations)
    xs, ys = m.knot_xs, m.knot_ys
    if xs[0] != 0.0 or ys[0] != 0.0 or xs[-1] != 1.0 or ys[-1] != 1.0:
        violations.append("endpoints not fixed")
    if np.any(np.diff(ys) < 0.0):
        violations.append("not nondecreasing")
    for j in range(1, len(xs) - 1):
        x = xs[j]
        if (0.0 < x < beta or 1.0 - beta < x < 1.0) and not _collinear(xs, ys, j):
            side = "(0, beta)" if x < beta else "(1 - beta, 1)"
            violations.append(f"knot at x={x} inside boundary window {side}")
    return CbetaReport(beta=beta, valid=not violations, violations=violations)


# ---------------------------------------------------------------------------
# Exact sup-norm machinery for pairs of maps.
#
# |f - g| restricted to any interval is piecewise smooth with breakpoints at
# the knots; between breakpoints the difference is affine, Moebius-affine, or
# Moebius-Moebius, and in each case the interior critical points have closed
# forms.  Enumerating knots + critical points therefore gives the exact sup.
# ---------------------------------------------------------------------------


def _interior_knots(m, lo, hi):
    if isinstance(m, PiecewiseLinearMap):
        xs = m.knot_xs
        return xs[(xs > lo) & (xs < hi)]
    return np.empty(0)


def _moebius_affine_critical(lam, slope):
    """x with d/dx [moebius_lam(x) - slope*x] = 0, or None."""
    if slope <= 0.0 or lam == 1.0:
        return None
    r = np.sqrt(lam / slope)
    return (r - 1.0) / (lam - 1.0)


def _pieces(m, lo, hi):
    """Breakpoints of m inside [lo, hi], including the interval ends."""
    cuts = [lo, hi]
    cuts.extend(float(x) for x in _interior_knots(m, lo, hi))
    return np.unique(np.asarray(cuts, dtype=float))


def _piece_slope(m, a, b):
    return m.derivative(0.5 * (a + b))


def _diff_candidates(f, g, lo, hi):
    cands = [lo, hi]
    cands.extend(float(x) for x in _interior_knots(f, lo, hi))
    cands.extend(float(x) for x in _interior_knots(g, lo, hi))
    fm = isinstance(f, MoebiusMap)
    gm = isinstance(g, MoebiusMap)
    if fm and gm:
        x = 1.0 / (1.0 + np.sqrt(f.lam * g.lam))
        if lo < x < hi:
            cands.append(float(x))
    elif fm != gm:
        moeb = f if fm else g
        pwl = g if fm else f
        cuts = np.unique(np.concatenate([_pieces(pwl, lo, hi), np.asarray([lo, hi])]))
        for a, b in zip(cuts[:-1], cuts[1:]):
            x = _moebius_affine_critical(moeb.lam, _piece_slope(pwl, a, b))
            if x is not None and a < x < b:
                cands.append(float(x))
    return np.unique(np.asarray(cands, dtype=float))


def sup_abs_diff(f, g, lo: float = 0.0, hi: float = 1.0) -> float:
    """Exact sup of |f - g| over [lo, hi] for the supported map families."""
    if hi <= lo:
        return 0.0
    xs = _diff_candidates(f, g, lo, hi)
    return float(np.max(np.abs(f(xs) - g(xs))))


def _deriv_diff_critical(f, g, a, b):
    """Interior critical points of f' - g' on (a, b) for Moebius pairs."""
    if not (isinstance(f, MoebiusMap) and isinstance(g, MoebiusMap)):
        return []
    la, mu = f.lam, g.lam
    A = la * (la - 1.0)
    B = mu * (mu - 1.0)
    if A == 0.0 or B == 0.0 or (A > 0.0) != (B > 0.0):
        return []
    r = np.cbrt(B / A)
    denom = (mu - 1.0) - r * (la - 1.0)
    if abs(denom) < 1e-300:
        return []
    x = (r - 1.0) / denom
    return [float(x)] if a < x < b else []


def sup_abs_deriv_diff(f, g, windows) -> float:
    """Exact sup of |f' - g'| over a union of closed windows.

    Piecewise linear derivatives are taken one-sided per linear piece, so
    the value is the essential sup (jumps at shared knots do not count
    twice).
    """
    best = 0.0
    for w0, w1 in windows:
        if w1 <= w0:
            continue
        cuts = np.unique(np.concatenate([_pieces(f, w0, w1), _pieces(g, w0, w1)]))
        for a, b in zip(cuts[:-1], cuts[1:]):
            sf = _piece_slope(f, a, b) if isinstance(f, PiecewiseLinearMap) else None
            sg = _piece_slope(g, a, b) if isinstance(g, PiecewiseLinearMap) else None
            xs = [a, b] + _deriv_diff_critical(f, g, a, b)
            for x in xs:
                df = sf if sf is not None else f.derivative(x)
                dg = sg if sg is not None else g.derivative(x)
                best = max(best, abs(df - dg))
    return float(best)


def crossing_points(f, g, lo: float = 0.0, hi: float = 1.0):
    """Interior solutions of f(x) = g(x) on (lo, hi), exhaustive per family.

    Distinct Moebius maps agree only at the endpoints, so Moebius pairs
    contribute nothing; affine pieces give linear or quadratic equations.
    """
    fm = isinstance(f, MoebiusMap)
    gm = isinstance(g, MoebiusMap)
    out = []
    if fm and gm:
        return out
    if not fm and not gm:
        cuts = np.unique(np.concatenate([_pieces(f, lo, hi), _pieces(g, lo, hi)]))
        for a, b in zip(cuts[:-1], cuts[1:]):
            da, db = f(a) - g(a), f(b) - g(b)
            if da == 0.0 and lo < a < hi:
                out.append(float(a))
            if da * db < 0.0:
                out.append(float(a + (b - a) * da / (da - db)))
        return sorted(set(out))
    moeb = f if fm else g
    pwl = g if fm else f
    lam = moeb.lam
    cuts = _pieces(pwl, lo, hi)
    for a, b in zip(cuts[:-1], cuts[1:]):
        s = _piece_slope(pwl, a, b)
        c = pwl(a) - s * a
        # lam*x/(1+(lam-1)x) = c + s*x  =>  quadratic in x
        qa = s * (lam - 1.0)
        qb = c * (lam - 1.0) + s - lam
        qc = c
        if abs(qa) < 1e-300:
            if abs(qb) > 1e-300:
                roots = [-qc / qb]
            else:
                roots = []
        else:
            disc = qb * qb - 4.0 * qa * qc
            if disc < 0.0:
                roots = []
            else:
                sq = np.sqrt(disc)
                roots = [(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)]
        for x in roots:
            if a < x < b and lo < x < hi:
                out.append(float(x))
    return sorted(set(out))


def diagonal_tangency_points(m, lo: float = 0.0, hi: float = 1.0):
    """Points where m'(x) = 1, the interior extrema of m(x) - x."""
    if isinstance(m, MoebiusMap):
        x = _moebius_affine_critical(m.lam, 1.0)
        if x is not None and lo < x < hi:
            return [float(x)]
    return []
