"""Energies, distance statistics and runtime certificates.

Energy conventions (sums run over all ordered pairs, diagonal included)::

    e_kin = 1/2 sum_i |v_i|^2
    e_pot = K2/(8N) sum_{i,j} (r_ij - 2R)^2
    dissipation = K1/(2N) sum_{i,j} psi(r_ij) |v_i - v_j|^2

The diagonal of ``e_pot`` contributes the constant ``K2 R^2 / 2``; keeping it
makes a total collapse cost exactly ``K2 N R^2 / 2``, which is the threshold
used by :func:`collapse_threshold`.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterable

import numpy as np

from .model import (
    DEFAULT_R_FLOOR,
    ModelParams,
    SimState,
    SingularityError,
    Variant,
    _pairs,
    acceleration,
)


@dataclass(frozen=True)
class EnergyReport:
    e_kin: float
    e_pot: float
    e_tot: float
    dissipation: float

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DistanceReport:
    r_min: float
    r_max: float
    ratio: float
    agg_r: float
    v_max: float
    max_radius: float

    def as_dict(self) -> dict:
        return asdict(self)


def collapse_threshold(params: ModelParams) -> float:
    """Energy of a total collapse, ``K2 N R^2 / 2``."""
    return 0.5 * params.k2 * params.n * params.big_r**2


def distance_bound(e0: float, n: int, k2: float, big_r: float) -> float:
    """Uniform bound on pair distances, ``2R + sqrt(8 N E(0) / K2)``."""
    if k2 == 0.0:
        return math.inf
    return 2.0 * big_r + math.sqrt(8.0 * n * max(e0, 0.0) / k2)


def energy_report(state: SimState, params: ModelParams, r_floor: float = DEFAULT_R_FLOOR) -> EnergyReport:
    pairs = _pairs(state.x, state.v)
    n = state.n
    r = pairs.r
    off = ~np.eye(n, dtype=bool)

    e_kin = 0.5 * float(np.einsum("ij,ij->", state.v, state.v))
    e_pot = params.k2 / (8.0 * n) * float(np.sum((r - 2.0 * params.big_r) ** 2))

    kernel = params.kernel
    if kernel.singular:
        close = off & (r <= r_floor)
        if close.any():
            i, j = np.argwhere(close)[0]
            raise SingularityError(i, j, r[i, j], state.t)
        psi = np.where(off, kernel(np.where(off, r, 1.0)), 0.0)
    else:
        psi = np.where(off, kernel(r), 0.0)
    speed2 = np.einsum("ijk,ijk->ij", pairs.vij, pairs.vij)
    dissipation = params.k1 / (2.0 * n) * float(np.sum(psi * speed2))
    return EnergyReport(e_kin, e_pot, e_kin + e_pot, dissipation)


def distance_report(state: SimState) -> DistanceReport:
    pairs = _pairs(state.x, state.v)
    i, j, r_min = pairs.closest_pair()
    r_max = pairs.r_max
    ratio = math.inf if r_min == 0.0 else r_max / r_min
    agg_r = math.sqrt(float(np.sum(pairs.r**2)))
    v_max = float(np.sqrt(np.einsum("ij,ij->i", state.v, state.v)).max())
    max_radius = float(np.sqrt(np.einsum("ij,ij->i", state.x, state.x)).max())
    return DistanceReport(r_min, r_max, ratio, agg_r, v_max, max_radius)


def equilibrium_residual(state: SimState, params: ModelParams) -> float:
    """``max_i |sum_j [x_j - x_i - (2R / r_ij)(x_j - x_i)]|``; zero at a bonded rest state."""
    pairs = _pairs(state.x, state.v)
    r = pairs.r
    live = r > 0.0
    coef = np.where(live, 1.0 - 2.0 * params.big_r / np.where(live, r, 1.0), 0.0)
    # xij = x_i - x_j, so x_j - x_i = -xij
    resid = -(coef[:, :, None] * pairs.xij).sum(axis=1)
    return float(np.sqrt(np.einsum("ij,ij->i", resid, resid)).max())


@dataclass
class ContainmentResult:
    ok: bool
    radial: list[int] = field(default_factory=list)
    pairs: list[tuple[int, int]] = field(default_factory=list)


def containment_check(state: SimState, params: ModelParams, slack: float) -> ContainmentResult:
    """Late-time check of ``|x_i| <= 2R + slack`` and ``r_ij <= 4R + 2 slack``.

    Assumes a centered state (center of mass at the origin).
    """
    radius = np.sqrt(np.einsum("ij,ij->i", state.x, state.x))
    radial = [int(i) for i in np.flatnonzero(radius > 2.0 * params.big_r + slack)]
    r = _pairs(state.x, state.v).r
    iu, ju = np.triu_indices(state.n, k=1)
    far = r[iu, ju] > 4.0 * params.big_r + 2.0 * slack
    pair_list = [(int(a), int(b)) for a, b in zip(iu[far], ju[far])]
    return ContainmentResult(not radial and not pair_list, radial, pair_list)


def min_distance_over(samples) -> tuple[float, float]:
    """Smallest sampled ``r_min`` and the time it occurs (first occurrence)."""
    samples = getattr(samples, "samples", samples)
    if not samples:
        raise ValueError("empty trajectory")
    best = min(samples, key=lambda s: s.distance.r_min)
    return best.distance.r_min, best.t


@dataclass
class DissipationCheck:
    lhs: float
    rhs: float
    gap: float


def _rk4_flow(x, v, params, h, substeps, r_floor):
    y = np.stack([x, v])

    def f(y):
        return np.stack([y[1], acceleration(y[0], y[1], params, r_floor)])

    dt = h / substeps
    for _ in range(substeps):
        k1 = f(y)
        k2 = f(y + 0.5 * dt * k1)
        k3 = f(y + 0.5 * dt * k2)
        k4 = f(y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return SimState(0.0, y[0], y[1])


def check_dissipation_identity(
    state: SimState,
    params: ModelParams,
    h: float = 1e-4,
    substeps: int = 4,
    r_floor: float = DEFAULT_R_FLOOR,
    extrapolate: bool = True,
) -> DissipationCheck:
    """Compare a centered difference of the total energy with ``-dissipation``.

    The state is flowed forward and backward by ``h`` with fine RK4 steps.
    A plain centered difference has an O(h^2) error, which near a close
    singular pair can exceed 1e-6 at h = 1e-4. With ``extrapolate`` the
    differences over widths ``h`` and ``h/2`` are combined (one Richardson
    step), leaving O(h^4). For the simplified variant ``gap = lhs - rhs``
    then vanishes to that order; the original variant has an extra
    dissipative term, so there ``gap <= 0`` up to the same error.
    """

    def centered(width):
        forward = _rk4_flow(state.x, state.v, params, width, substeps, r_floor)
        backward = _rk4_flow(state.x, state.v, params, -width, substeps, r_floor)
        e_plus = energy_report(forward, params, r_floor).e_tot
        e_minus = energy_report(backward, params, r_floor).e_tot
        return (e_plus - e_minus) / (2.0 * width)

    lhs = centered(h)
    if extrapolate:
        lhs = (4.0 * centered(0.5 * h) - lhs) / 3.0
    rhs = -energy_report(state, params, r_floor).dissipation
    return DissipationCheck(lhs, rhs, lhs - rhs)


def projection_dissipation(state: SimState, params: ModelParams) -> float:
    """Extra energy loss rate of the original variant, ``K~/(4N) sum (v_ij.x_ij)^2 / r_ij^2``."""
    if params.variant is not Variant.ORIGINAL:
        return 0.0
    pairs = _pairs(state.x, state.v)
    live = pairs.r > 0.0
    proj = np.einsum("ijk,ijk->ij", pairs.vij, pairs.xij)
    r2 = np.where(live, pairs.r**2, 1.0)
    return params.k_tilde / (4.0 * state.n) * float(np.sum(np.where(live, proj**2 / r2, 0.0)))


@dataclass
class Certificates:
    e0: float
    d_m: float
    psi_m: float
    collapse_threshold: float
    velocity_integral: float
    threshold_crossing_time: float | None
    equilibrium_residual: float
    sup_r_max: float
    max_ratio: float
    global_min: float
    t_at_min: float
    t_last: float

    def as_dict(self) -> dict:
        return asdict(self)


def velocity_integral_bound(cert: Certificates, params: ModelParams) -> float:
    """``E(0) / (K1 psi_m)``, the ceiling on the time integral of ``||v||^2``."""
    if params.k1 == 0.0:
        return math.inf
    return cert.e0 / (params.k1 * cert.psi_m)


class CertificateTracker:
    """Single-writer fold of certificates over samples, in time order.

    Works from per-sample scalars so it can be replayed from saved series.
    """

    def __init__(self, params: ModelParams):
        self.params = params
        self.count = 0
        self.e0 = math.nan
        self._t_last = math.nan
        self._e_kin_last = math.nan
        self.velocity_integral = 0.0
        self.threshold_crossing_time = None
        self.sup_r_max = 0.0
        self.max_ratio = 1.0
        self.global_min = math.inf
        self.t_at_min = math.nan
        self.last_state = None

    def update_values(self, t, e_kin, e_tot, r_min, r_max, state=None) -> None:
        if self.count == 0:
            self.e0 = e_tot
        else:
            # ||v||^2 = sum_i |v_i|^2 = 2 e_kin, trapezoid rule
            self.velocity_integral += (t - self._t_last) * (self._e_kin_last + e_kin)
        self.count += 1
        self._t_last, self._e_kin_last = t, e_kin
        if self.threshold_crossing_time is None and e_tot < collapse_threshold(self.params):
            self.threshold_crossing_time = t
        self.sup_r_max = max(self.sup_r_max, r_max)
        self.max_ratio = max(self.max_ratio, math.inf if r_min == 0.0 else r_max / r_min)
        if r_min < self.global_min:
            self.global_min, self.t_at_min = r_min, t
        if state is not None:
            self.last_state = state

    def update(self, sample) -> None:
        e, d = sample.energy, sample.distance
        self.update_values(sample.t, e.e_kin, e.e_tot, d.r_min, d.r_max, sample.state)

    def result(self) -> Certificates:
        if self.count == 0:
            raise ValueError("no samples")
        p = self.params
        d_m = distance_bound(self.e0, p.n, p.k2, p.big_r)
        residual = math.nan if self.last_state is None else equilibrium_residual(self.last_state, p)
        return Certificates(
            e0=self.e0,
            d_m=d_m,
            psi_m=float(p.kernel(d_m)),
            collapse_threshold=collapse_threshold(p),
            velocity_integral=self.velocity_integral,
            threshold_crossing_time=self.threshold_crossing_time,
            equilibrium_residual=residual,
            sup_r_max=self.sup_r_max,
            max_ratio=self.max_ratio,
            global_min=self.global_min,
            t_at_min=self.t_at_min,
            t_last=self._t_last,
        )


def certificates(samples: Iterable, params: ModelParams) -> Certificates:
    """Fold the certificates over a trajectory (or any iterable of samples)."""
    tracker = CertificateTracker(params)
    for sample in getattr(samples, "samples", samples):
        tracker.update(sample)
    return tracker.result()
