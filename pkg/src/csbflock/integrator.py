"""Time integration: adaptive Dormand-Prince 5(4) plus a fixed-step RK4 oracle.

The phase-space vector is stored as a ``(2, N, d)`` array: ``y[0]`` holds
positions and ``y[1]`` velocities.

Besides the usual embedded error control, a step is capped by a time-to-contact
estimate ``proximity_factor * min r_ij / |v_ij|`` when the communication
kernel is singular, so close encounters are resolved step by step instead of
being jumped over.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import DistanceReport, EnergyReport, collapse_threshold, distance_report, energy_report
from .model import DEFAULT_R_FLOOR, ModelParams, SimState, SingularityError, _pairs, acceleration

# Dormand & Prince (1980), coefficients as in Hairer, Norsett & Wanner, vol. I, p. 178.
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40)
_E = tuple(b5 - b4 for b5, b4 in zip(_B5, _B4))

_SAFETY = 0.9
_SHRINK_MIN = 0.2
_GROW_MAX = 5.0


class IntegrationAbort(RuntimeError):
    """Base class for conditions that stop a trajectory."""

    kind = "abort"

    def __init__(self, message: str, t: float, r_min: float):
        super().__init__(message)
        self.t = float(t)
        self.r_min = float(r_min)


class StepSizeUnderflow(IntegrationAbort):
    """The controller needed a step below ``dt_min``."""

    kind = "step_underflow"


class CollisionAbort(IntegrationAbort):
    """A pair distance reached ``r_floor``."""

    kind = "collision"

    def __init__(self, t: float, i: int, j: int, r: float):
        super().__init__(f"pair ({i}, {j}) reached r={r!r} at t={t!r}", t, r)
        self.i, self.j = int(i), int(j)


@dataclass(frozen=True)
class StepControl:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    dt_init: float = 1e-2
    dt_min: float = 1e-14
    dt_max: float = 0.5
    proximity_factor: float = 0.1
    r_floor: float = DEFAULT_R_FLOOR
    near_collision: float = 1e-3

    def __post_init__(self):
        for name in ("abs_tol", "rel_tol", "dt_init", "dt_min", "dt_max", "r_floor", "near_collision"):
            value = float(getattr(self, name))
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"{name} must be positive, got {value!r}")
            object.__setattr__(self, name, value)
        if not self.dt_min <= self.dt_init <= self.dt_max:
            raise ValueError("require dt_min <= dt_init <= dt_max")
        factor = float(self.proximity_factor)
        if not 0.0 < factor <= 1.0:
            raise ValueError(f"proximity_factor must lie in (0, 1], got {factor!r}")
        object.__setattr__(self, "proximity_factor", factor)


@dataclass
class StepResult:
    state: SimState
    dt_used: float
    dt_next: float
    err_est: float
    rejections: int = 0


@dataclass
class Sample:
    t: float
    state: SimState
    energy: EnergyReport
    distance: DistanceReport


@dataclass
class Trajectory:
    params: ModelParams
    samples: list[Sample] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)
    steps_accepted: int = 0
    steps_rejected: int = 0

    @property
    def aborted(self) -> bool:
        return any(e["kind"] in ("collision", "step_underflow") for e in self.events)

    @property
    def final(self) -> Sample:
        return self.samples[-1]

    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    def series(self, name: str) -> np.ndarray:
        """Per-sample diagnostic, e.g. ``"e_tot"`` or ``"r_min"``."""
        first = self.samples[0]
        source = "energy" if hasattr(first.energy, name) else "distance"
        return np.array([getattr(getattr(s, source), name) for s in self.samples])


def _stack(state: SimState) -> np.ndarray:
    return np.stack([state.x, state.v])


def _deriv(y: np.ndarray, params: ModelParams, r_floor: float) -> np.ndarray:
    return np.stack([y[1], acceleration(y[0], y[1], params, r_floor)])


def proximity_cap(x: np.ndarray, v: np.ndarray, factor: float) -> float:
    """``factor * min_{i != j} r_ij / |v_ij|``, or ``inf`` when nothing moves relative to anything."""
    pairs = _pairs(x, v)
    speed = np.sqrt(np.einsum("ijk,ijk->ij", pairs.vij, pairs.vij))
    moving = speed > 0.0
    if not moving.any():
        return math.inf
    return factor * float((pairs.r[moving] / speed[moving]).min())


def _dopri_attempt(y, k1, dt, params, r_floor):
    ks = [k1]
    for stage in range(1, 7):
        incr = sum(a * k for a, k in zip(_A[stage], ks) if a != 0.0)
        ks.append(_deriv(y + dt * incr, params, r_floor))
    # row 6 of A equals B5, so the last stage point is the new solution (FSAL)
    y_new = y + dt * sum(b * k for b, k in zip(_B5, ks) if b != 0.0)
    err = dt * sum(e * k for e, k in zip(_E, ks) if e != 0.0)
    return y_new, ks[-1], float(np.abs(err).max())


def _step(y, k1, t, dt_try, params, ctl):
    """Core adaptive step on raw arrays.

    Returns ``(y_new, k_new, dt_used, dt_next, err, rejections, closest)``
    where ``closest`` is ``(i, j, r_min)`` at the new point.
    """
    dt = min(dt_try, ctl.dt_max)
    if params.kernel.singular:
        dt = min(dt, proximity_cap(y[0], y[1], ctl.proximity_factor))
    rejections = 0
    while True:
        if dt < ctl.dt_min:
            r_min = _pairs(y[0], y[1]).r_min
            raise StepSizeUnderflow(f"step size {dt!r} below dt_min at t={t!r} (min r={r_min!r})", t, r_min)
        try:
            y_new, k_new, err = _dopri_attempt(y, k1, dt, params, ctl.r_floor)
        except SingularityError:
            # a stage point landed on the singularity: the step is far too long
            dt *= _SHRINK_MIN
            rejections += 1
            continue
        tol = ctl.abs_tol + ctl.rel_tol * max(float(np.abs(y).max()), float(np.abs(y_new).max()))
        if err <= tol:
            break
        dt *= max(_SHRINK_MIN, _SAFETY * (tol / err) ** 0.2)
        rejections += 1

    pairs = _pairs(y_new[0], y_new[1])
    i, j, r_min = pairs.closest_pair()
    if r_min <= ctl.r_floor:
        raise CollisionAbort(t + dt, i, j, r_min)
    factor = _GROW_MAX if err == 0.0 else min(_GROW_MAX, max(_SHRINK_MIN, _SAFETY * (tol / err) ** 0.2))
    return y_new, k_new, dt, min(dt * factor, ctl.dt_max), err, rejections, (i, j, r_min)


def step(state: SimState, params: ModelParams, ctl: StepControl, dt_try: float) -> StepResult:
    """One accepted Dormand-Prince step (rejected attempts are retried internally)."""
    y = _stack(state)
    k1 = _deriv(y, params, ctl.r_floor)
    y_new, _, dt, dt_next, err, rejections, _ = _step(y, k1, state.t, dt_try, params, ctl)
    return StepResult(SimState(state.t + dt, y_new[0], y_new[1]), dt, dt_next, err, rejections)


def _make_sample(t, y, params, ctl) -> Sample:
    state = SimState(t, y[0].copy(), y[1].copy())
    return Sample(t, state, energy_report(state, params, ctl.r_floor), distance_report(state))


def integrate(
    state0: SimState,
    params: ModelParams,
    ctl: StepControl,
    t_end: float,
    sample_every: float,
) -> Trajectory:
    """Integrate to ``t_end`` recording a sample every ``sample_every`` time units.

    Steps are truncated to land exactly on sample times. Aborts are not
    raised; they end the run and are recorded in ``Trajectory.events``.
    """
    if sample_every <= 0:
        raise ValueError("sample_every must be positive")
    traj = Trajectory(params)
    t0 = state0.t
    y = _stack(state0)
    traj.samples.append(_make_sample(t0, y, params, ctl))
    if t_end <= t0:
        return traj

    threshold = collapse_threshold(params)
    if traj.samples[0].energy.e_tot < threshold:
        traj.events.append({"kind": "below_collapse_threshold", "t": t0, "e_tot": traj.samples[0].energy.e_tot})
    below = traj.samples[0].energy.e_tot < threshold
    near = None  # open near-collision episode

    t = t0
    k = 1
    dt = ctl.dt_init
    try:
        k1 = _deriv(y, params, ctl.r_floor)
    except SingularityError as exc:
        traj.events.append({"kind": "collision", "t": t, "i": exc.i, "j": exc.j, "r": exc.r})
        return traj
    while True:
        t_sample = min(t0 + k * sample_every, t_end)
        remaining = t_sample - t
        # also absorbs the sliver that would otherwise precede a sample time
        truncated = dt > 0.99 * remaining
        dt_try = remaining if truncated else dt
        try:
            y, k1, dt_used, dt_next, _, rejections, closest = _step(y, k1, t, dt_try, params, ctl)
        except CollisionAbort as exc:
            traj.events.append({"kind": exc.kind, "t": exc.t, "i": exc.i, "j": exc.j, "r": exc.r_min})
            break
        except StepSizeUnderflow as exc:
            traj.events.append({"kind": exc.kind, "t": exc.t, "r": exc.r_min})
            break
        traj.steps_accepted += 1
        traj.steps_rejected += rejections
        landed = truncated and dt_used == dt_try
        if landed:
            t = t_sample
            # a clipped step says little about the natural step size
            dt = max(dt, dt_next)
        else:
            t += dt_used
            dt = dt_next

        i, j, r_min = closest
        if r_min < ctl.near_collision:
            if near is None:
                near = {"kind": "near_collision", "t": t, "i": i, "j": j, "r": r_min}
                traj.events.append(near)
            elif r_min < near["r"]:
                near.update(t=t, i=i, j=j, r=r_min)
        else:
            near = None

        if landed:
            sample = _make_sample(t, y, params, ctl)
            traj.samples.append(sample)
            if not below and sample.energy.e_tot < threshold:
                below = True
                traj.events.append({"kind": "below_collapse_threshold", "t": t, "e_tot": sample.energy.e_tot})
            if t >= t_end:
                break
            k += 1
    return traj


def reference_integrate(
    state0: SimState,
    params: ModelParams,
    t_end: float,
    dt_fixed: float,
    r_floor: float = DEFAULT_R_FLOOR,
) -> SimState:
    """Classical fixed-step RK4, the last step shortened to hit ``t_end``."""
    y = _stack(state0)
    t = state0.t
    n_steps = max(0, math.ceil((t_end - t) / dt_fixed - 1e-9))
    for s in range(n_steps):
        h = min(dt_fixed, t_end - t) if s == n_steps - 1 else dt_fixed
        k1 = _deriv(y, params, r_floor)
        k2 = _deriv(y + 0.5 * h * k1, params, r_floor)
        k3 = _deriv(y + 0.5 * h * k2, params, r_floor)
        k4 = _deriv(y + h * k3, params, r_floor)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = state0.t + (s + 1) * dt_fixed if s < n_steps - 1 else t_end
        i, j, r_min = _pairs(y[0], y[1]).closest_pair()
        if r_min <= r_floor:
            raise CollisionAbort(t, i, j, r_min)
    return SimState(t, y[0], y[1])
