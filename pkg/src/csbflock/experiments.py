"""Named, seed-fixed scenarios and their acceptance criteria.

Constants the source study leaves open default to ``K1 = K2 = K~ = 1`` and
``alpha = 1``; the target half-distance is ``R = 2`` throughout. Every
scenario uses seed 42 unless told otherwise.

Scenario families:

``fig1-n{N}``
    Simplified model, singular kernel, d=2, N in {10, 15, 20, 25}, positions
    and velocities uniform on [-5, 5]^2, horizon 500. Checks containment in
    the ball of radius 2R (5 % slack) at the final time.
``fig2-{variant}-{kernel}``
    The 2x2 grid of model variants and kernels on the N=10 fig1 data;
    checks energy monotonicity and kinetic energy decay.
``fig3-{kernel}``
    d=1, N=10, positions on [-5, 5], velocities on [-2, 2], horizon 20.
    Singular kernel must keep particles apart; regular kernel lets them pass
    through each other.
``fig5``
    The N=10 fig1 run; checks that ``t**1.5 * v_max`` stays bounded and
    decays.

Criteria only look at a :class:`~csbflock.output.RunRecord`, so they give the
same verdicts on a live run and on its saved results directory.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .config import RunConfig
from .diagnostics import (
    CertificateTracker,
    Certificates,
    containment_check,
    distance_report,
    energy_report,
    velocity_integral_bound,
)
from .initial import InitConfig, initial_state
from .integrator import StepControl, integrate
from .model import KernelKind, KernelSpec, ModelParams, Variant
from .output import RunRecord

DEFAULT_SEED = 42
SMOKE_SEEDS = (1, 2, 3, 4, 5)
FIG1_SIZES = (10, 15, 20, 25)
BIG_R = 2.0

ENERGY_SLACK = 1e-8
MOMENTUM_TOL = 1e-9
KINETIC_DECAY = 1e-3
QUADRATURE_SLACK = 1e-2
CONTAINMENT_SLACK = 0.05
RESIDUAL_LEVEL = 1e-2
COLLAPSE_FLOOR = 1e-6
CROSSING_LEVEL = 1e-3


@dataclass(frozen=True)
class CriterionResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def __post_init__(self):
        object.__setattr__(self, "passed", bool(self.passed))
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "threshold", float(self.threshold))

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "value": self.value,
            "threshold": self.threshold,
            "detail": self.detail,
        }


Criterion = Callable[[RunRecord, Certificates], CriterionResult]


@dataclass(frozen=True)
class Scenario:
    name: str
    init: InitConfig
    params: ModelParams
    ctl: StepControl
    t_end: float
    sample_every: float
    acceptance: tuple[Criterion, ...] = ()

    def config(self, output_dir: str = "results") -> RunConfig:
        return RunConfig(self.init, self.params, self.ctl, self.t_end, self.sample_every, output_dir, self.name)


# -- certificates over emitted series ---------------------------------------


def record_certificates(record: RunRecord) -> Certificates:
    tracker = CertificateTracker(record.params)
    d = record.diag
    for k in range(len(record.t)):
        tracker.update_values(record.t[k], d["e_kin"][k], d["e_tot"][k], d["r_min"][k], d["r_max"][k])
    tracker.last_state = record.state(len(record.t) - 1)
    return tracker.result()


# -- criteria -----------------------------------------------------------------


def energy_monotone(record: RunRecord, cert: Certificates) -> CriterionResult:
    e_tot = record.diag["e_tot"]
    rise = float(np.diff(e_tot).max()) if len(e_tot) > 1 else 0.0
    limit = ENERGY_SLACK * max(1.0, cert.e0)
    return CriterionResult("energy_monotone", rise <= limit, rise, limit, "largest increase of e_tot between samples")


def distance_bound_holds(record: RunRecord, cert: Certificates) -> CriterionResult:
    return CriterionResult("distance_bound", cert.sup_r_max < cert.d_m, cert.sup_r_max, cert.d_m, "sup r_max < d_M")


def momentum_conserved(record: RunRecord, cert: Certificates) -> CriterionResult:
    n = record.params.n
    scale = max(1.0, float(np.abs(record.x[0]).max()), float(np.abs(record.v[0]).max()))
    drift_x = np.linalg.norm(record.x.sum(axis=1), axis=1)
    drift_v = np.linalg.norm(record.v.sum(axis=1), axis=1)
    worst = float((np.maximum(drift_x, drift_v) / (1.0 + record.t)).max())
    limit = MOMENTUM_TOL * math.sqrt(n) * scale
    return CriterionResult("momentum", worst <= limit, worst, limit, "max_t max(|sum x|, |sum v|) / (1 + t)")


def no_abort(record: RunRecord, cert: Certificates) -> CriterionResult:
    aborts = [e for e in record.events if e["kind"] in ("collision", "step_underflow")]
    detail = "" if not aborts else f"{aborts[0]['kind']} at t={float(aborts[0]['t'])!r}"
    return CriterionResult("no_abort", not aborts, float(len(aborts)), 0.0, detail)


def reached_horizon(record: RunRecord, cert: Certificates) -> CriterionResult:
    t_end = record.config.t_end
    return CriterionResult("reached_horizon", bool(record.t[-1] >= t_end), float(record.t[-1]), float(t_end))


def collapse_certificate(record: RunRecord, cert: Certificates) -> CriterionResult:
    """Once E < K2 N R^2 / 2, no later sample may come close to a collapse."""
    t_cross = cert.threshold_crossing_time
    if t_cross is None:
        return CriterionResult("collapse_certificate", True, math.inf, COLLAPSE_FLOOR, "threshold never crossed")
    later = record.t >= t_cross
    worst = float(record.diag["r_min"][later].min())
    ok = worst >= COLLAPSE_FLOOR and not record.aborted
    return CriterionResult("collapse_certificate", ok, worst, COLLAPSE_FLOOR, f"crossed at t={float(t_cross)!r}")


def velocity_integral(record: RunRecord, cert: Certificates) -> CriterionResult:
    bound = velocity_integral_bound(cert, record.params) * (1.0 + QUADRATURE_SLACK)
    return CriterionResult("velocity_integral", cert.velocity_integral <= bound, cert.velocity_integral, bound)


def diagnostics_consistent(record: RunRecord, cert: Certificates) -> CriterionResult:
    """Stored diagnostics must match what the stored states imply."""
    worst = 0.0
    for k in range(len(record.t)):
        state = record.state(k)
        fresh = {**energy_report(state, record.params, record.config.ctl.r_floor).as_dict(),
                 **distance_report(state).as_dict()}
        for name, series in record.diag.items():
            a, b = fresh[name], series[k]
            if a == b:
                continue
            worst = max(worst, abs(a - b) / max(1.0, abs(a)))
    return CriterionResult("diagnostics_consistent", worst <= 1e-12, worst, 1e-12)


def containment(record: RunRecord, cert: Certificates) -> CriterionResult:
    params = record.params
    slack = CONTAINMENT_SLACK * 2.0 * params.big_r
    result = containment_check(record.state(len(record.t) - 1), params, slack)
    value = float(record.diag["max_radius"][-1])
    detail = f"radial violations {result.radial}, pair violations {len(result.pairs)}"
    return CriterionResult("containment", result.ok, value, 2.0 * params.big_r + slack, detail)


def equilibrium_residual_small(record: RunRecord, cert: Certificates) -> CriterionResult:
    limit = RESIDUAL_LEVEL * record.params.n * record.params.big_r
    return CriterionResult("equilibrium_residual", cert.equilibrium_residual <= limit, cert.equilibrium_residual, limit)


def kinetic_decay(record: RunRecord, cert: Certificates) -> CriterionResult:
    e_kin = record.diag["e_kin"]
    limit = KINETIC_DECAY * e_kin[0]
    return CriterionResult("kinetic_decay", bool(e_kin[-1] <= limit), float(e_kin[-1]), float(limit))


def separated(record: RunRecord, cert: Certificates) -> CriterionResult:
    ok = cert.global_min > 0.0 and not record.aborted
    return CriterionResult("separated", ok, cert.global_min, 0.0, f"minimum at t={float(cert.t_at_min)!r}")


def crossing_observed(record: RunRecord, cert: Certificates) -> CriterionResult:
    lowest = float(record.diag["r_min"].min())
    return CriterionResult("crossing_observed", lowest < CROSSING_LEVEL, lowest, CROSSING_LEVEL)


def speed_envelope(record: RunRecord, cert: Certificates) -> CriterionResult:
    """``t^1.5 v_max`` over the second half of [0, 500] must not exceed its peak over [10, 50]."""
    t, v_max = record.t, record.diag["v_max"]
    scaled = t**1.5 * v_max
    early = (t >= 10.0) & (t <= 50.0)
    late = (t >= 250.0) & (t <= 500.0)
    if not early.any() or not late.any():
        return CriterionResult("speed_envelope", False, math.nan, math.nan, "run too short")
    late_peak, early_peak = float(scaled[late].max()), float(scaled[early].max())
    return CriterionResult("speed_envelope", late_peak <= early_peak, late_peak, early_peak)


COMMON = (
    no_abort,
    reached_horizon,
    energy_monotone,
    distance_bound_holds,
    momentum_conserved,
    collapse_certificate,
    velocity_integral,
    diagnostics_consistent,
)
FAMILY_CRITERIA = {
    "fig1": (containment, equilibrium_residual_small),
    "fig2": (kinetic_decay,),
    "fig3-singular": (separated,),
    "fig3-regular": (crossing_observed,),
    "fig5": (speed_envelope,),
}


def criteria_for(name: str | None) -> tuple[Criterion, ...]:
    if not name:
        return COMMON
    for prefix, extra in FAMILY_CRITERIA.items():
        if name == prefix or name.startswith(prefix + "-"):
            return COMMON + extra
    return COMMON


# -- scenario construction ---------------------------------------------------


def _planar_init(n: int, seed: int) -> InitConfig:
    return InitConfig(n=n, dim=2, pos_box=(-5.0, 5.0), vel_box=(-5.0, 5.0), seed=seed)


def fig1_scenario(n: int = 10, seed: int = DEFAULT_SEED) -> Scenario:
    params = ModelParams(n=n, dim=2, variant=Variant.SIMPLIFIED, kernel=KernelSpec(KernelKind.SINGULAR, 1.0), big_r=BIG_R)
    name = f"fig1-n{n}"
    return Scenario(name, _planar_init(n, seed), params, StepControl(), 500.0, 0.5, criteria_for(name))


def fig2_scenario(variant, kernel_kind, seed: int = DEFAULT_SEED, n: int = 10) -> Scenario:
    variant, kind = Variant(variant), KernelKind(kernel_kind)
    params = ModelParams(n=n, dim=2, variant=variant, kernel=KernelSpec(kind, 1.0), big_r=BIG_R)
    name = f"fig2-{variant.value}-{kind.value}"
    return Scenario(name, _planar_init(n, seed), params, StepControl(), 500.0, 0.5, criteria_for(name))


def fig3_scenario(kernel_kind, seed: int = DEFAULT_SEED, n: int = 10) -> Scenario:
    kind = KernelKind(kernel_kind)
    init = InitConfig(n=n, dim=1, pos_box=(-5.0, 5.0), vel_box=(-2.0, 2.0), seed=seed)
    params = ModelParams(n=n, dim=1, variant=Variant.SIMPLIFIED, kernel=KernelSpec(kind, 1.0), big_r=BIG_R)
    name = f"fig3-{kind.value}"
    return Scenario(name, init, params, StepControl(), 20.0, 0.01, criteria_for(name))


def fig5_scenario(seed: int = DEFAULT_SEED, n: int = 10) -> Scenario:
    base = fig1_scenario(n, seed)
    return Scenario("fig5", base.init, base.params, base.ctl, 500.0, 0.5, criteria_for("fig5"))


def scenario_names() -> list[str]:
    names = [f"fig1-n{n}" for n in FIG1_SIZES]
    names += [f"fig2-{v.value}-{k.value}" for v in Variant for k in KernelKind]
    names += [f"fig3-{k.value}" for k in KernelKind]
    names.append("fig5")
    return names


GROUPS = {
    "fig1": [f"fig1-n{n}" for n in FIG1_SIZES],
    "fig2": [f"fig2-{v.value}-{k.value}" for v in Variant for k in KernelKind],
    "fig3": [f"fig3-{k.value}" for k in KernelKind],
    "fig5": ["fig5"],
}


def expand(name: str) -> list[str]:
    """Group names (``fig1``, ``all``, ...) to concrete scenario names."""
    if name == "all":
        return scenario_names()
    if name in GROUPS:
        return list(GROUPS[name])
    if name in scenario_names():
        return [name]
    raise KeyError(f"unknown scenario {name!r}; choose from {['all', *GROUPS, *scenario_names()]}")


def build_scenario(name: str, seed: int = DEFAULT_SEED) -> Scenario:
    if name.startswith("fig1-n"):
        return fig1_scenario(int(name[len("fig1-n"):]), seed)
    if name.startswith("fig2-"):
        _, variant, kind = name.split("-")
        return fig2_scenario(variant, kind, seed)
    if name.startswith("fig3-"):
        return fig3_scenario(name.split("-")[1], seed)
    if name == "fig5":
        return fig5_scenario(seed)
    raise KeyError(f"unknown scenario {name!r}")


# -- running -----------------------------------------------------------------


@dataclass
class ScenarioResult:
    name: str
    record: RunRecord
    certificates: Certificates
    verdicts: list[CriterionResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    @property
    def aborted(self) -> bool:
        return self.record.aborted

    def verdict(self, name: str) -> CriterionResult:
        return next(v for v in self.verdicts if v.name == name)

    def energy_series(self) -> np.ndarray:
        """Columns t, e_kin, e_pot, e_tot."""
        d = self.record.diag
        return np.column_stack([self.record.t, d["e_kin"], d["e_pot"], d["e_tot"]])

    def speed_series(self) -> np.ndarray:
        """Columns t, v_max, t^1.5 v_max."""
        t, v_max = self.record.t, self.record.diag["v_max"]
        return np.column_stack([t, v_max, t**1.5 * v_max])

    def summary(self) -> dict:
        cert = self.certificates
        d = self.record.diag
        final = {name: float(d[name][-1]) for name in ("e_kin", "e_pot", "e_tot", "dissipation")}
        out = {
            "scenario": self.name,
            "seed": self.record.config.init.seed,
            "passed": self.passed,
            "aborted": self.aborted,
            "certificates": cert.as_dict(),
            "criteria": [v.as_dict() for v in self.verdicts],
            "final_energy": final,
            "min_distance": {"global_min": cert.global_min, "t_at_min": cert.t_at_min},
        }
        near = [e for e in self.record.events if e["kind"] == "near_collision"]
        out["near_collisions"] = {"count": len(near), "closest": min((e["r"] for e in near), default=None)}
        if self.record.params.dim == 1:
            order = np.argsort(self.record.x[:, :, 0], axis=1, kind="stable")
            out["order_changes"] = int(np.count_nonzero(np.any(order[1:] != order[:-1], axis=1)))
        return out


def evaluate(record: RunRecord) -> tuple[Certificates, list[CriterionResult]]:
    cert = record_certificates(record)
    return cert, [criterion(record, cert) for criterion in criteria_for(record.config.scenario)]


def run_config(config: RunConfig) -> ScenarioResult:
    state0 = initial_state(config.init, config.ctl.r_floor)
    traj = integrate(state0, config.params, config.ctl, config.t_end, config.sample_every)
    record = RunRecord.from_trajectory(config, traj)
    cert, verdicts = evaluate(record)
    return ScenarioResult(config.scenario or "simulate", record, cert, verdicts)


def run_scenario(scenario: Scenario) -> ScenarioResult:
    return run_config(scenario.config())


def run_fig1(n: int = 10, seed: int = DEFAULT_SEED) -> ScenarioResult:
    return run_scenario(fig1_scenario(n, seed))


def run_fig2(variant, kernel_kind, seed: int = DEFAULT_SEED) -> ScenarioResult:
    return run_scenario(fig2_scenario(variant, kernel_kind, seed))


def run_fig3(kernel_kind, seed: int = DEFAULT_SEED) -> ScenarioResult:
    return run_scenario(fig3_scenario(kernel_kind, seed))


def run_fig5(seed: int = DEFAULT_SEED) -> ScenarioResult:
    return run_scenario(fig5_scenario(seed))


def _run_named(args) -> ScenarioResult:
    name, seed = args
    return run_scenario(build_scenario(name, seed))


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("CSBFLOCK_THREADS", "1")))
    except ValueError:
        return 1


def run_suite(names, seed: int = DEFAULT_SEED, workers: int | None = None) -> list[ScenarioResult]:
    """Run scenarios, one process per scenario when ``workers > 1``."""
    jobs = [(name, seed) for name in names]
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(jobs) <= 1:
        return [_run_named(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_named, jobs))
