"""Stochastic estimators: forward orbits, backward interval sampling, traces.

All randomness flows through counter-based Philox streams keyed by
(seed, trial), so ensembles are reproducible bit for bit regardless of
batching, and a single trial rerun in isolation matches its row in the
ensemble output.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import measures as ms
from .measures import GridMeasure
from .system import IfsSystem

__all__ = [
    "trial_rng",
    "OrbitRun",
    "forward_orbit",
    "BackwardSample",
    "backward_sample",
    "backward_ensemble",
    "DiameterStats",
    "diameter_stats",
    "martingale_trace",
    "martingale_traces",
]

_CHUNK = 128


def trial_rng(seed: int, trial: int = 0) -> np.random.Generator:
    """Independent counter-based stream for one (seed, trial) pair."""
    if not (0 <= trial < 2**64):
        raise ValueError("trial index out of range")
    key = (int(seed) % 2**64) * 2**64 + int(trial)
    return np.random.Generator(np.random.Philox(key=key))


def _symbol_cdf(system: IfsSystem) -> np.ndarray:
    return np.cumsum(system.probs)


@dataclass
class OrbitRun:
    """Forward chaos-game run with its empirical measure."""

    seed: int
    x0: float
    length: int
    burn_in: int
    word: np.ndarray
    measure: GridMeasure


def forward_orbit(
    system: IfsSystem,
    x0: float,
    n: int,
    burn: int = 0,
    seed: int = 0,
    n_cells: int = ms.DEFAULT_N,
) -> OrbitRun:
    """Empirical measure of x_t = g_{i_t}(x_{t-1}) for t = burn+1 .. n."""
    if not (0.0 < x0 < 1.0):
        raise ValueError("x0 must lie in (0, 1)")
    if n <= burn:
        raise ValueError("n must exceed burn")
    rng = trial_rng(seed, 0)
    cum = _symbol_cdf(system)
    symbols = np.searchsorted(cum, rng.random(n), side="right")
    maps = system.maps
    xs = np.empty(n - burn)
    x = x0
    for t, s in enumerate(symbols):
        x = float(maps[s](x))
        if t >= burn:
            xs[t - burn] = x
    return OrbitRun(
        seed=seed,
        x0=x0,
        length=n,
        burn_in=burn,
        word=(symbols + 1).astype(np.int64),
        measure=ms.from_samples(xs, n_cells),
    )


@dataclass
class BackwardSample:
    """One tolerance-stopped backward interval run."""

    v: float
    n_stop: int
    final_diameter: float
    converged: bool


def _apply_symbols(maps, symbols, lo, hi):
    for i in range(len(maps)):
        rows = np.nonzero(symbols == i)[0]
        if rows.size:
            lo[rows] = maps[i](lo[rows])
            hi[rows] = maps[i](hi[rows])


def backward_sample(
    system: IfsSystem,
    a: float = 0.01,
    b: float = 0.99,
    tol: float = 1e-8,
    max_n: int = 100_000,
    seed: int = 0,
    trial: int = 0,
) -> BackwardSample:
    """Sample one point whose law approximates the stationary measure.

    Draws symbols one at a time and prepends each as the new outermost
    map, so the tracked interval is the image of [a, b] under the
    composition read left to right; the two endpoints form a pair of
    forward orbits driven by common noise.  Stops once the interval
    diameter falls below tol and reports the midpoint (bias at most
    tol/2).  Nonconvergence within max_n steps is reported, which is the
    expected outcome for non-contracting systems.
    """
    if not (0.0 < a < b < 1.0):
        raise ValueError("need 0 < a < b < 1")
    rng = trial_rng(seed, trial)
    cum = _symbol_cdf(system)
    maps = system.maps
    lo, hi = a, b
    steps = 0
    diam = hi - lo
    while diam >= tol and steps < max_n:
        need = min(_CHUNK, max_n - steps)
        symbols = np.searchsorted(cum, rng.random(need), side="right")
        for s in symbols:
            m = maps[s]
            lo = float(m(lo))
            hi = float(m(hi))
            if hi < lo:
                raise AssertionError("monotone maps crossed the interval endpoints")
            steps += 1
            diam = hi - lo
            if diam < tol:
                break
    return BackwardSample(
        v=0.5 * (lo + hi),
        n_stop=steps,
        final_diameter=diam,
        converged=diam < tol,
    )


def backward_ensemble(
    system: IfsSystem,
    trials: int,
    a: float = 0.01,
    b: float = 0.99,
    tol: float = 1e-8,
    max_n: int = 100_000,
    seed: int = 0,
):
    """Vectorized backward sampling over per-trial Philox streams.

    Returns arrays (v, n_stop, final_diameter, converged); row t is
    identical to backward_sample(..., trial=t).
    """
    if not (0.0 < a < b < 1.0):
        raise ValueError("need 0 < a < b < 1")
    if trials < 1:
        raise ValueError("trials must be positive")
    cum = _symbol_cdf(system)
    maps = system.maps
    gens = [trial_rng(seed, t) for t in range(trials)]
    v = np.empty(trials)
    n_stop = np.full(trials, max_n, dtype=np.int64)
    final_diam = np.empty(trials)
    converged = np.zeros(trials, dtype=bool)
    active = np.arange(trials)
    lo = np.full(trials, float(a))
    hi = np.full(trials, float(b))
    done_steps = 0
    if b - a < tol:
        v[:] = 0.5 * (a + b)
        n_stop[:] = 0
        final_diam[:] = b - a
        converged[:] = True
        return v, n_stop, final_diam, converged
    while active.size and done_steps < max_n:
        need = min(_CHUNK, max_n - done_steps)
        uniforms = np.empty((active.size, need))
        for row, t in enumerate(active):
            uniforms[row] = gens[t].random(need)
        cur_lo = lo[active]
        cur_hi = hi[active]
        alive = np.ones(active.size, dtype=bool)
        for step in range(need):
            rows = np.nonzero(alive)[0]
            symbols = np.searchsorted(cum, uniforms[rows, step], side="right")
            for i in range(len(maps)):
                sel = rows[symbols == i]
                if sel.size:
                    cur_lo[sel] = maps[i](cur_lo[sel])
                    cur_hi[sel] = maps[i](cur_hi[sel])
            diam = cur_hi[rows] - cur_lo[rows]
            if np.any(diam < 0.0):
                raise AssertionError("monotone maps crossed the interval endpoints")
            hit = rows[diam < tol]
            if hit.size:
                ids = active[hit]
                v[ids] = 0.5 * (cur_lo[hit] + cur_hi[hit])
                n_stop[ids] = done_steps + step + 1
                final_diam[ids] = cur_hi[hit] - cur_lo[hit]
                converged[ids] = True
                alive[hit] = False
            if not alive.any():
                break
        lo[active] = cur_lo
        hi[active] = cur_hi
        done_steps += need
        active = active[alive]
    if active.size:
        v[active] = 0.5 * (lo[active] + hi[active])
        final_diam[active] = hi[active] - lo[active]
    return v, n_stop, final_diam, converged


@dataclass
class DiameterStats:
    """Stopping-time spread of the backward sampler."""

    trials: int
    tol: float
    max_n: int
    q50: float
    q90: float
    q99: float
    frac_nonconverged: float


def diameter_stats(
    system: IfsSystem,
    a: float = 0.01,
    b: float = 0.99,
    tol: float = 1e-8,
    trials: int = 1000,
    max_n: int = 100_000,
    seed: int = 0,
) -> DiameterStats:
    """Quantiles of the backward stopping time plus the nonconverged fraction."""
    _, n_stop, _, converged = backward_ensemble(system, trials, a, b, tol, max_n, seed)
    stopped = n_stop[converged]
    if stopped.size:
        q50, q90, q99 = (float(np.quantile(stopped, q)) for q in (0.5, 0.9, 0.99))
    else:
        q50 = q90 = q99 = float("nan")
    return DiameterStats(
        trials=trials,
        tol=tol,
        max_n=max_n,
        q50=q50,
        q90=q90,
        q99=q99,
        frac_nonconverged=float(1.0 - converged.mean()),
    )


def _precompute_images(system: IfsSystem, n: int):
    nodes = np.linspace(0.0, 1.0, n + 1)
    pos = []
    for m in system.maps:
        img = np.asarray(m(nodes), dtype=float) * n
        idx = np.clip(np.floor(img).astype(np.int64), 0, n - 1)
        pos.append((idx, img - idx))
    return pos


def martingale_trace(
    system: IfsSystem,
    values,
    mu: GridMeasure,
    n: int,
    seed: int = 0,
    trial: int = 0,
) -> np.ndarray:
    """Trace xi_t = integral of f(g_{i_1..i_t}(x)) d mu for one symbol draw.

    Each new symbol composes innermost, so the grid samples of the running
    composite f o g_{i_1..i_t} update by one interpolation pass per step.
    With mu stationary the trace is a bounded martingale over the draw.
    """
    f = np.asarray(values, dtype=float)
    if f.shape != (mu.n_cells + 1,):
        raise ValueError("grid function length must match the measure grid")
    if not np.all(np.isfinite(f)):
        raise ValueError("grid function must be finite")
    rng = trial_rng(seed, trial)
    cum = _symbol_cdf(system)
    symbols = np.searchsorted(cum, rng.random(n), side="right")
    images = _precompute_images(system, mu.n_cells)
    masses = mu.node_masses()
    h = f.copy()
    out = np.empty(n)
    for t, s in enumerate(symbols):
        idx, w = images[s]
        h = (1.0 - w) * h[idx] + w * h[idx + 1]
        out[t] = np.dot(h, masses)
    return out


def martingale_traces(
    system: IfsSystem,
    values,
    mu: GridMeasure,
    n: int,
    trials: int,
    seed: int = 0,
) -> np.ndarray:
    """Ensemble of traces, shape (trials, n); row t matches trial t."""
    f = np.asarray(values, dtype=float)
    if f.shape != (mu.n_cells + 1,):
        raise ValueError("grid function length must match the measure grid")
    cum = _symbol_cdf(system)
    words = np.empty((trials, n), dtype=np.int64)
    for t in range(trials):
        words[t] = np.searchsorted(cum, trial_rng(seed, t).random(n), side="right")
    images = _precompute_images(system, mu.n_cells)
    masses = mu.node_masses()
    h = np.tile(f, (trials, 1))
    out = np.empty((trials, n))
    for step in range(n):
        col = words[:, step]
        for i in range(len(system.maps)):
            rows = np.nonzero(col == i)[0]
            if rows.size:
                idx, w = images[i]
                h[rows] = (1.0 - w) * h[np.ix_(rows, idx)] + w * h[np.ix_(rows, idx + 1)]
        out[:, step] = h @ masses
    return out
