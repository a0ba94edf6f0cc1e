from dataclasses import replace

import numpy as np
import pytest

from csbflock import experiments
from csbflock.integrator import StepControl, integrate
from csbflock.model import SimState

from conftest import make_params, random_state


def test_scenario_names_and_groups():
    names = experiments.scenario_names()
    assert len(names) == 11
    assert experiments.expand("all") == names
    assert experiments.expand("fig3") == ["fig3-singular", "fig3-regular"]
    with pytest.raises(KeyError):
        experiments.expand("fig4")


def test_fig3_pair_shares_initial_data():
    a = experiments.build_scenario("fig3-singular", 9)
    b = experiments.build_scenario("fig3-regular", 9)
    assert a.init == b.init
    assert a.params.kernel.singular and not b.params.kernel.singular


def test_scenario_config_round_trips_name():
    cfg = experiments.build_scenario("fig2-original-regular").config()
    assert cfg.scenario == "fig2-original-regular"
    names = [c.__name__ for c in experiments.criteria_for(cfg.scenario)]
    assert "kinetic_decay" in names and "containment" not in names


def test_conservative_system_keeps_energy():
    # no alignment and no projection: the bonding force alone conserves energy
    p = make_params(5, 2, kernel="regular", k1=0.0, k_tilde=0.0)
    s = random_state(np.random.default_rng(4), 5, 2, spread=2.0)
    traj = integrate(s, p, StepControl(), 20.0, 1.0)
    e = traj.series("e_tot")
    assert np.abs(e - e[0]).max() <= 1e-7 * e[0]


def test_symmetric_head_on_pair_stays_apart():
    p = make_params(2, 1, "original", "singular", big_r=0.25)
    s = SimState(0.0, np.array([[-1.0], [1.0]]), np.array([[4.0], [-4.0]]))
    traj = integrate(s, p, StepControl(), 10.0, 0.1)
    x = np.array([smp.state.x[:, 0] for smp in traj.samples])
    assert not traj.aborted
    np.testing.assert_allclose(x[:, 0], -x[:, 1], rtol=0, atol=1e-12)
    assert (x[:, 0] < 0).all()


@pytest.mark.parametrize("seed", experiments.SMOKE_SEEDS)
def test_smoke_sweep_dichotomy(seed):
    singular = experiments.run_fig3("singular", seed)
    regular = experiments.run_fig3("regular", seed)
    assert not singular.aborted
    assert singular.certificates.global_min > 0
    assert singular.verdict("separated").passed
    assert regular.verdict("crossing_observed").passed


def test_suite_is_deterministic_across_workers():
    names = ["fig3-singular", "fig3-regular"]
    serial = experiments.run_suite(names, seed=3, workers=1)
    parallel = experiments.run_suite(names, seed=3, workers=2)
    for a, b in zip(serial, parallel):
        np.testing.assert_array_equal(a.record.x, b.record.x)
        assert [v.as_dict() for v in a.verdicts] == [v.as_dict() for v in b.verdicts]


def test_short_run_criteria_report_too_short():
    cfg = replace(experiments.build_scenario("fig5").config(), t_end=5.0)
    result = experiments.run_config(cfg)
    verdict = result.verdict("speed_envelope")
    assert not verdict.passed and verdict.detail == "run too short"
