"""Flattening one map toward a plateau while staying close in the strong metric.

Replacing a branch by a map constant on [u, v] inside (beta, 1 - beta)
forces the stationary measure to carry an atom at the plateau height.
The homeomorphic family below interpolates toward that limit: member m
has slope 1/m across [u, v], stays equal to the original branch outside
a collar, and converges to the plateau system in the weak metric at rate
1/m while keeping a uniform distance budget in the strong metric.  The
boundary windows are never touched, so one tail certificate covers the
base system, every family member, and the plateau limit.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import measures as ms
from .interval_maps import PiecewiseLinearMap
from .measures import GridMeasure
from .system import IfsSystem, admissibility_check, metric_d, metric_d0
from .transfer import (
    TailBoundCert,
    fixed_point,
    push_forward,
    sample_tail_measure,
    tail_bound_certificate,
)

__all__ = [
    "PlateauSpec",
    "PlateauConstructionError",
    "collar_width",
    "plateau_limit_system",
    "perturbed_family",
    "DensityConstructionReport",
    "verify_density_construction",
]


class PlateauConstructionError(ValueError):
    """The requested plateau is incompatible with monotonicity."""


@dataclass(frozen=True)
class PlateauSpec:
    """Where to flatten which map, and the allowed strong-metric budget.

    The flat interval [flat_lo, flat_hi] must sit strictly inside
    (beta, 1 - beta) and be shorter than twice the budget; map_index is
    1-based.
    """

    flat_lo: float
    flat_hi: float
    height: float
    budget: float
    map_index: int = 1

    def validate(self, system: IfsSystem) -> None:
        beta = system.beta
        if not (1 <= self.map_index <= system.k):
            raise ValueError(f"map_index {self.map_index} outside 1..{system.k}")
        if not (beta < self.flat_lo < self.flat_hi < 1.0 - beta):
            raise ValueError(
                f"[{self.flat_lo}, {self.flat_hi}] must sit strictly inside "
                f"({beta}, {1.0 - beta})"
            )
        if not (0.0 < self.height < 1.0):
            raise ValueError("plateau height must lie in (0, 1)")
        if self.flat_hi - self.flat_lo >= 2.0 * self.budget:
            raise ValueError("flat interval length must be below twice the budget")


def collar_width(system: IfsSystem, spec: PlateauSpec) -> float:
    """Half the slack between the flat interval, the windows, and itself.

    Keeps every modification strictly inside (beta, 1 - beta) and leaves
    room for the monotone reconnection on both sides.
    """
    beta = system.beta
    return 0.5 * min(
        spec.flat_lo - beta,
        (1.0 - beta) - spec.flat_hi,
        spec.flat_hi - spec.flat_lo,
    )


def _splice_knots(base: PiecewiseLinearMap, lo, hi, inner_knots):
    """Base knots outside (lo, hi) plus anchors at lo/hi plus new interior knots."""
    knots = [(float(x), float(y)) for x, y in base.knots if x <= lo or x >= hi]
    anchors = [(lo, float(base(lo))), (hi, float(base(hi)))]
    merged = {x: y for x, y in knots}
    for x, y in anchors + list(inner_knots):
        merged[float(x)] = float(y)
    pts = sorted(merged.items())
    return PiecewiseLinearMap(pts)


def _target_map(system: IfsSystem, spec: PlateauSpec) -> PiecewiseLinearMap:
    m = system.maps[spec.map_index - 1]
    if not isinstance(m, PiecewiseLinearMap):
        raise PlateauConstructionError(
            "plateau construction needs a piecewise linear target map "
            "(the modified map must agree with the original outside the collar)"
        )
    if not m.is_homeomorphism:
        raise PlateauConstructionError("target map already has a flat segment")
    return m


def _check_height(base, spec, w):
    lo_bound = float(base(spec.flat_lo - w))
    hi_bound = float(base(spec.flat_hi + w))
    if not (lo_bound <= spec.height <= hi_bound):
        raise PlateauConstructionError(
            f"height {spec.height} outside the monotone range "
            f"[{lo_bound}, {hi_bound}] available at the collar"
        )


def plateau_limit_system(system: IfsSystem, spec: PlateauSpec) -> IfsSystem:
    """Replace the target map by its plateau limit (not injective).

    The new map equals the original outside the collar around
    [flat_lo, flat_hi], is constant at the requested height on the flat
    interval, and reconnects monotonically across the collar.  Endpoint
    derivatives are untouched, so the operator machinery and the tail
    certificate still apply even though the map is no longer injective.
    """
    spec.validate(system)
    base = _target_map(system, spec)
    w = collar_width(system, spec)
    _check_height(base, spec, w)
    flat = [(spec.flat_lo, spec.height), (spec.flat_hi, spec.height)]
    new_map = _splice_knots(base, spec.flat_lo - w, spec.flat_hi + w, flat)
    return system.with_map(spec.map_index - 1, new_map)


def perturbed_family(system: IfsSystem, spec: PlateauSpec, m: int) -> IfsSystem:
    """Homeomorphic member m: slope 1/m across the flat interval.

    The segment is centered so the midpoint of [flat_lo, flat_hi] maps to
    the plateau height.  Asserts the strong-metric distance to the base
    system stays below the budget; the weak distance to the plateau limit
    is (flat_hi - flat_lo) / (2 m) by construction.
    """
    if m < 1:
        raise ValueError("m must be a positive integer")
    spec.validate(system)
    base = _target_map(system, spec)
    w = collar_width(system, spec)
    _check_height(base, spec, w)
    half_rise = 0.5 * (spec.flat_hi - spec.flat_lo) / m
    y_lo = spec.height - half_rise
    y_hi = spec.height + half_rise
    if y_lo <= float(base(spec.flat_lo - w)) or y_hi >= float(base(spec.flat_hi + w)):
        raise PlateauConstructionError(
            f"slope-1/{m} segment does not reconnect monotonically inside the collar"
        )
    inner = [(spec.flat_lo, y_lo), (spec.flat_hi, y_hi)]
    new_map = _splice_knots(base, spec.flat_lo - w, spec.flat_hi + w, inner)
    member = system.with_map(spec.map_index - 1, new_map)
    dist = metric_d(system, member)
    if dist >= spec.budget:
        raise PlateauConstructionError(
            f"member m={m} exceeds the budget: d = {dist!r} >= {spec.budget!r}"
        )
    return member


@dataclass
class DensityConstructionReport:
    """Joint evidence that the family converges onto a singular limit."""

    spec: PlateauSpec
    m_ladder: tuple
    cert: TailBoundCert
    cert_valid: dict
    d_to_base: dict
    d0_to_limit: dict
    member_admissible: dict
    fm_to_limit: dict
    m1_result: object
    limit_atom_cell_mass: float
    notes: list = field(default_factory=list)

    def summary(self) -> str:
        lines = [f"plateau [{self.spec.flat_lo}, {self.spec.flat_hi}] at {self.spec.height}"]
        lines.append(f"limit atom cell mass: {self.limit_atom_cell_mass:.4f}")
        for m in self.m_ladder:
            lines.append(
                f"m={m:>4}  d={self.d_to_base[m]:.6f}  d0*m={self.d0_to_limit[m] * m:.6f}  "
                f"fm_to_limit={self.fm_to_limit[m]:.6f}  cert_ok={self.cert_valid[m]}  "
                f"admissible={self.member_admissible[m]}"
            )
        lines.append(
            f"m1_epsilon({self.m1_result.epsilon}) for largest m: {self.m1_result.member}"
        )
        return "\n".join(lines)


def _certificate_holds(system: IfsSystem, cert: TailBoundCert, rng, mc_trials: int,
                       n_cells: int) -> bool:
    """Check the branch inequality on a dense grid plus tail propagation by MC."""
    ys = np.linspace(cert.x0 / 512, cert.x0, 512)
    for m, lam in zip(system.maps, cert.lambdas):
        if np.any(np.asarray(m.inverse(ys)) > ys / lam + 1e-12):
            return False
    mirrored = system.reflected()
    ys_r = np.linspace(cert.x0_right / 512, cert.x0_right, 512)
    for m, lam in zip(mirrored.maps, cert.lambdas_right):
        if np.any(np.asarray(m.inverse(ys_r)) > ys_r / lam + 1e-12):
            return False
    slack = 2.0 * cert.M / n_cells**cert.alpha
    for _ in range(mc_trials):
        mu = sample_tail_measure(cert.M, cert.alpha, n_cells, rng)
        if not ms.tail_check(mu, cert.M, cert.alpha):
            continue
        if not ms.tail_check(push_forward(system, mu), cert.M, cert.alpha, slack=slack):
            return False
    return True


def verify_density_construction(
    system: IfsSystem,
    spec: PlateauSpec,
    m_ladder=(4, 16, 64, 256),
    eps: float = 0.1,
    n_cells: int = ms.DEFAULT_N,
    tol: float = 1e-6,
    max_iter: int = 10_000,
    mc_trials: int = 100,
    seed: int = 0,
) -> DensityConstructionReport:
    """Build the family, reuse one tail certificate, and track convergence.

    Because all members agree with the base system on the boundary
    windows, the base certificate is expected to validate for every
    member and for the plateau limit; the report records that check, the
    strong/weak distances, stationary-measure convergence toward the
    limit, and near-singular membership of the last member.
    """
    limit_sys = plateau_limit_system(system, spec)
    members = {m: perturbed_family(system, spec, m) for m in m_ladder}
    cert = tail_bound_certificate(system)
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    cert_valid = {}
    member_admissible = {}
    d_to_base = {}
    d0_to_limit = {}
    base_lyap = system.lyapunov_exponents()
    notes = []
    for m, member in members.items():
        cert_valid[m] = _certificate_holds(member, cert, rng, mc_trials, n_cells)
        rep = admissibility_check(member)
        member_admissible[m] = rep.admissible
        if abs(rep.lyap0 - base_lyap[0]) > 1e-12 or abs(rep.lyap1 - base_lyap[1]) > 1e-12:
            notes.append(f"member m={m} changed an endpoint exponent")
        d_to_base[m] = metric_d(system, member)
        d0_to_limit[m] = metric_d0(member, limit_sys)
    cert_valid["limit"] = _certificate_holds(limit_sys, cert, rng, mc_trials, n_cells)
    limit_fp = fixed_point(limit_sys, tol=tol, max_iter=max_iter, n_cells=n_cells)
    if not limit_fp.converged:
        raise RuntimeError(f"plateau limit solve did not converge (residual {limit_fp.residual:.3e})")
    mu_limit = limit_fp.measure
    atom_node = int(np.ceil(spec.height * n_cells - 1e-9))
    limit_atom_mass = float(mu_limit.cdf[atom_node] - mu_limit.cdf[atom_node - 1])
    fm_to_limit = {}
    last_mu = None
    for m, member in members.items():
        res = fixed_point(member, tol=tol, max_iter=max_iter, n_cells=n_cells)
        if not res.converged:
            raise RuntimeError(f"member m={m} solve did not converge (residual {res.residual:.3e})")
        fm_to_limit[m] = ms.fm_distance(res.measure, mu_limit)
        last_mu = res.measure
    m1 = ms.m1_epsilon_membership(last_mu, eps)
    return DensityConstructionReport(
        spec=spec,
        m_ladder=tuple(m_ladder),
        cert=cert,
        cert_valid=cert_valid,
        d_to_base=d_to_base,
        d0_to_limit=d0_to_limit,
        member_admissible=member_admissible,
        fm_to_limit=fm_to_limit,
        m1_result=m1,
        limit_atom_cell_mass=limit_atom_mass,
        notes=notes,
    )
