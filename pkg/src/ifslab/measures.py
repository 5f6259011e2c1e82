"""Finite measures on [0, 1] represented by their CDF on a uniform grid.

A :class:`GridMeasure` with ``n_cells = N`` stores ``cdf[j] = mu([0, j/N])``
for ``j = 0..N``.  Cell ``j`` is the half-open interval ``((j-1)/N, j/N]``
and any mass at 0 lives in ``cdf[0]``.  Equivalently the measure is the
atomic measure placing mass ``cdf[j] - cdf[j-1]`` at node ``j/N`` (and
``cdf[0]`` at 0); that embedding is what the Fortet-Mourier distance and
the resampler operate on.  Atoms and singular measures are represented
without loss, which is the point of the CDF-on-grid choice.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .ioutil import atomic_write_text

__all__ = [
    "DEFAULT_N",
    "GridMeasure",
    "uniform",
    "from_atoms",
    "from_samples",
    "dirac",
    "combine",
    "reflect",
    "resample",
    "integrate",
    "fm_distance",
    "fm_from_cdfs",
    "fm_signed_atoms",
    "fm_oracle",
    "tail_check",
    "ConcentrationProfile",
    "concentration_profile",
    "M1EpsilonResult",
    "m1_epsilon_membership",
    "write_measure_csv",
    "read_measure_csv",
]

DEFAULT_N = 4096
PROBABILITY_TOL = 1e-12


class GridMeasure:
    """Finite measure on [0, 1] given by its CDF sampled on a uniform grid."""

    __slots__ = ("_n", "_cdf")

    def __init__(self, n_cells: int, cdf):
        n = int(n_cells)
        if n < 1:
            raise ValueError("n_cells must be positive")
        arr = np.asarray(cdf, dtype=float).copy()
        if arr.shape != (n + 1,):
            raise ValueError(f"cdf must have length n_cells + 1 = {n + 1}, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("cdf contains non-finite values")
        if arr[0] < -1e-12:
            raise ValueError(f"cdf[0] = {arr[0]} is negative")
        diffs = np.diff(arr)
        if diffs.size and np.min(diffs) < -1e-10:
            raise ValueError(f"cdf decreases by {-np.min(diffs):.3e}, not a valid CDF")
        # scrub float roundoff so downstream cumsums stay monotone
        arr[0] = max(arr[0], 0.0)
        np.maximum.accumulate(arr, out=arr)
        arr.flags.writeable = False
        self._n = n
        self._cdf = arr

    @property
    def n_cells(self) -> int:
        return self._n

    @property
    def cdf(self) -> np.ndarray:
        return self._cdf

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self._n + 1)

    @property
    def total_mass(self) -> float:
        return float(self._cdf[-1])

    @property
    def is_probability(self) -> bool:
        return abs(self.total_mass - 1.0) <= PROBABILITY_TOL

    def node_masses(self) -> np.ndarray:
        """Mass at each grid node under the atomic embedding (length N + 1)."""
        out = np.empty(self._n + 1)
        out[0] = self._cdf[0]
        out[1:] = np.diff(self._cdf)
        return out

    def cell_masses(self) -> np.ndarray:
        """Per-cell masses (length N); any mass at 0 is folded into cell 1."""
        out = np.diff(self._cdf)
        out = out.copy()
        out[0] += self._cdf[0]
        return out

    def __eq__(self, other):
        return (
            isinstance(other, GridMeasure)
            and self._n == other._n
            and bool(np.all(self._cdf == other._cdf))
        )

    __hash__ = None

    def __repr__(self):
        return f"GridMeasure(n_cells={self._n}, mass={self.total_mass!r})"


def uniform(n_cells: int = DEFAULT_N) -> GridMeasure:
    """Lebesgue measure on [0, 1]."""
    n = int(n_cells)
    return GridMeasure(n, np.linspace(0.0, 1.0, n + 1))


def _jump_nodes(locations, n_cells):
    pos = np.asarray(locations, dtype=float) * n_cells
    near = np.rint(pos)
    pos = np.where(np.abs(pos - near) < 1e-9, near, pos)
    return np.ceil(pos).astype(np.int64)


def from_atoms(atoms, n_cells: int = DEFAULT_N) -> GridMeasure:
    """Atomic measure from (location, weight) pairs.

    An atom at x > 0 jumps the CDF at node ceil(x*N), the right boundary
    of the cell ((j-1)/N, j/N] containing it, so cdf[j] = mu([0, j/N])
    holds exactly; an atom at 0 contributes to cdf[0].
    """
    pts = np.asarray(list(atoms), dtype=float)
    if pts.size == 0:
        pts = pts.reshape(0, 2)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("atoms must be (location, weight) pairs")
    locs, wts = pts[:, 0], pts[:, 1]
    if np.any(wts < 0.0):
        raise ValueError("atom weights must be nonnegative")
    if pts.size and (np.min(locs) < 0.0 or np.max(locs) > 1.0):
        raise ValueError("atom locations must lie in [0, 1]")
    n = int(n_cells)
    jumps = np.bincount(_jump_nodes(locs, n), weights=wts, minlength=n + 1)
    return GridMeasure(n, np.cumsum(jumps))


def from_samples(positions, n_cells: int = DEFAULT_N) -> GridMeasure:
    """Empirical probability measure of a sample vector."""
    xs = np.asarray(positions, dtype=float)
    if xs.size == 0:
        raise ValueError("empty sample")
    n = int(n_cells)
    jumps = np.bincount(_jump_nodes(xs, n), minlength=n + 1).astype(float)
    return GridMeasure(n, np.cumsum(jumps) / xs.size)


def dirac(x: float, n_cells: int = DEFAULT_N) -> GridMeasure:
    return from_atoms([(x, 1.0)], n_cells)


def combine(measures, weights) -> GridMeasure:
    """Weighted combination sum_i w_i * mu_i on a common grid."""
    ms = list(measures)
    ws = np.asarray(list(weights), dtype=float)
    if len(ms) != ws.size or not ms:
        raise ValueError("need matching, nonempty measures and weights")
    n = ms[0].n_cells
    if any(m.n_cells != n for m in ms):
        raise ValueError("measures must share a grid")
    cdf = np.zeros(n + 1)
    for w, m in zip(ws, ms):
        cdf += w * m.cdf
    return GridMeasure(n, cdf)


def reflect(mu: GridMeasure) -> GridMeasure:
    """Pushforward under x -> 1 - x of the node-atomic embedding."""
    masses = mu.node_masses()[::-1]
    return GridMeasure(mu.n_cells, np.cumsum(masses))


def resample(mu: GridMeasure, n_cells: int) -> GridMeasure:
    """Re-grid by sampling the step CDF of the node-atomic embedding.

    Exact (mass preserving, no interpolation) whenever the grids are
    nested, e.g. any power-of-two coarsening or refinement.
    """
    n_new = int(n_cells)
    if n_new == mu.n_cells:
        return mu
    # node j' of the new grid sits at j'/N'; floor(j' * N / N') indexes the
    # old CDF value there, in exact integer arithmetic
    idx = (np.arange(n_new + 1, dtype=np.int64) * mu.n_cells) // n_new
    return GridMeasure(n_new, mu.cdf[idx])


def integrate(values, mu: GridMeasure) -> float:
    """Integral of a grid function against the node-atomic embedding."""
    f = np.asarray(values, dtype=float)
    if f.shape != (mu.n_cells + 1,):
        raise ValueError("grid function length must match the measure grid")
    return float(np.dot(f, mu.node_masses()))


def fm_from_cdfs(cdf_a, cdf_b) -> float:
    """Integral of |F_a - F_b| for step CDFs sampled on a common grid."""
    a = np.asarray(cdf_a, dtype=float)
    b = np.asarray(cdf_b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("CDF grids differ")
    return float(np.mean(np.abs(a[:-1] - b[:-1])))


def fm_distance(mu: GridMeasure, nu: GridMeasure) -> float:
    """Fortet-Mourier (bounded-Lipschitz) distance between equal-mass measures.

    For equal total mass on [0, 1] the sup over functions bounded by 1 with
    Lipschitz constant 1 is attained by 1-Lipschitz functions recentered
    into [-1/2, 1/2], so it equals the L1 distance between the CDFs.  That
    integral is computed exactly for the step CDFs of the grid embedding.
    Unequal masses are rejected because the recentering identity fails.
    """
    if nu.n_cells != mu.n_cells:
        nu = resample(nu, mu.n_cells)
    if abs(mu.total_mass - nu.total_mass) > 1e-9:
        raise ValueError(
            f"fm_distance requires equal total mass, got {mu.total_mass} vs {nu.total_mass}"
        )
    return fm_from_cdfs(mu.cdf, nu.cdf)


def fm_signed_atoms(positions, weights) -> float:
    """FM norm of a zero-net-mass signed atomic measure, exactly.

    Sorts the atoms and integrates |cumulative weight| between consecutive
    positions; used as the grid-free path in operator inequality checks.
    """
    pos = np.asarray(positions, dtype=float)
    wts = np.asarray(weights, dtype=float)
    if pos.shape != wts.shape:
        raise ValueError("positions and weights differ in shape")
    if abs(wts.sum()) > 1e-9:
        raise ValueError("signed measure must have zero net mass")
    order = np.argsort(pos, kind="stable")
    pos = pos[order]
    wts = wts[order]
    cum = np.cumsum(wts)
    gaps = np.empty_like(pos)
    gaps[:-1] = np.diff(pos)
    gaps[-1] = 1.0 - pos[-1]
    return float(np.dot(np.abs(cum), gaps))


def fm_oracle(mu: GridMeasure, nu: GridMeasure, grid_m: int = 4096) -> float:
    """Independent FM value by direct maximization over discretized test functions.

    Maximizes sum_j f(x_j) * (mu - nu)({x_j}) over grid functions with
    |f| <= 1 and |f(x_{j+1}) - f(x_j)| <= 1/m via linear programming.
    Only intended as a test oracle for :func:`fm_distance`.
    """
    from scipy import sparse
    from scipy.optimize import linprog

    m = int(grid_m)
    a = resample(mu, m)
    b = resample(nu, m)
    if abs(a.total_mass - b.total_mass) > 1e-9:
        raise ValueError("fm_oracle requires equal total mass")
    w = a.node_masses() - b.node_masses()
    ones = np.ones(m)
    step = sparse.diags([-ones, np.ones(m)], offsets=[0, 1], shape=(m, m + 1), format="csr")
    a_ub = sparse.vstack([step, -step], format="csr")
    b_ub = np.full(2 * m, 1.0 / m)
    res = linprog(-w, A_ub=a_ub, b_ub=b_ub, bounds=(-1.0, 1.0), method="highs")
    if not res.success:
        raise RuntimeError(f"oracle LP failed: {res.message}")
    return float(-res.fun)


def tail_check(mu: GridMeasure, bound_m: float, alpha: float, slack: float = 0.0) -> bool:
    """Two-sided power tail bound mu([0, x]) <= M x^a and mu([1-x, 1]) <= M x^a.

    Checked at every grid node; ``slack`` loosens both sides uniformly to
    absorb one-cell discretization effects.
    """
    if bound_m <= 0.0 or not (0.0 < alpha < 1.0):
        raise ValueError("need bound_m > 0 and alpha in (0, 1)")
    x = mu.nodes
    cdf = mu.cdf
    left_ok = np.all(cdf <= bound_m * np.power(x, alpha) + slack)
    right_ok = np.all(cdf[-1] - cdf <= bound_m * np.power(1.0 - x, alpha) + slack)
    return bool(left_ok and right_ok)


@dataclass
class ConcentrationProfile:
    """Minimal Lebesgue size of greedy cell unions reaching given mass levels."""

    n_cells: int
    levels: np.ndarray
    sizes: np.ndarray

    def size_at(self, q: float) -> float:
        idx = int(np.argmin(np.abs(self.levels - q)))
        if abs(self.levels[idx] - q) > 1e-12:
            raise KeyError(f"level {q} not in profile")
        return float(self.sizes[idx])


def _greedy_cells(mu: GridMeasure):
    masses = mu.cell_masses()
    order = np.argsort(masses, kind="stable")[::-1]
    return order, np.cumsum(masses[order])


def concentration_profile(mu: GridMeasure, levels) -> ConcentrationProfile:
    """L(q) = (number of greedily chosen cells)/N to accumulate mass q.

    Greedy selection of cells in decreasing mass order is optimal for
    cell unions (an exchange argument), so L(q) is the honest grid
    surrogate of "smallest Lebesgue size carrying mass q".
    """
    qs = np.asarray(list(levels), dtype=float)
    if np.any(qs <= 0.0) or np.any(qs >= 1.0):
        raise ValueError("levels must lie in (0, 1)")
    _, cum = _greedy_cells(mu)
    total = mu.total_mass
    sizes = np.empty_like(qs)
    for i, q in enumerate(qs):
        k = int(np.searchsorted(cum, q * total - 1e-12)) + 1
        sizes[i] = min(k, mu.n_cells) / mu.n_cells
    return ConcentrationProfile(n_cells=mu.n_cells, levels=qs, sizes=sizes)


@dataclass
class M1EpsilonResult:
    """Witnessed membership in the near-singular class at tolerance eps."""

    member: bool
    epsilon: float
    lebesgue_size: float
    mass: float
    cells: np.ndarray


def m1_epsilon_membership(mu: GridMeasure, eps: float) -> M1EpsilonResult:
    """Does some cell union of Lebesgue size < eps carry mass > 1 - eps/2?

    Uses the greedy profile, which is optimal over cell unions; the
    witness is the selected cell index set (1-based cells).
    """
    if not (0.0 < eps < 1.0):
        raise ValueError("eps must lie in (0, 1)")
    n = mu.n_cells
    k_max = int(np.ceil(eps * n)) - 1
    if k_max <= 0:
        return M1EpsilonResult(False, eps, 0.0, 0.0, np.empty(0, dtype=np.int64))
    order, cum = _greedy_cells(mu)
    k_max = min(k_max, n)
    mass = float(cum[k_max - 1])
    member = mass > 1.0 - eps / 2.0 - 1e-12
    # shrink the witness to the smallest prefix that still qualifies
    k = k_max
    if member:
        k = int(np.searchsorted(cum, 1.0 - eps / 2.0 - 1e-12)) + 1
        k = min(k, k_max)
        mass = float(cum[k - 1])
    cells = np.sort(order[:k]) + 1
    return M1EpsilonResult(member, eps, k / n, mass, cells)


def write_measure_csv(mu: GridMeasure, path) -> None:
    """Measure file: header x,cdf with N + 1 rows, shortest round-trip floats."""
    lines = ["x,cdf"]
    n = mu.n_cells
    for j, c in enumerate(mu.cdf):
        lines.append(f"{float(j) / n!r},{float(c)!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_measure_csv(path) -> GridMeasure:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["x", "cdf"]:
        raise ValueError(f"{path}: expected header 'x,cdf'")
    body = [r for r in rows[1:] if r]
    n = len(body) - 1
    if n < 1:
        raise ValueError(f"{path}: need at least two data rows")
    xs = np.array([float(r[0]) for r in body])
    cdf = np.array([float(r[1]) for r in body])
    if np.max(np.abs(xs - np.linspace(0.0, 1.0, n + 1))) > 1e-12:
        raise ValueError(f"{path}: x column is not the uniform grid j/{n}")
    return GridMeasure(n, cdf)
