import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csbflock.model import (
    KernelDomainError,
    KernelKind,
    KernelSpec,
    SimState,
    SingularityError,
    acceleration,
    kernel_eval,
    pairwise_geometry,
    rhs,
    rhs_original,
    rhs_simplified,
)

from conftest import make_params, random_state


def loop_acceleration(x, v, p):
    """Straight double loop over pairs; the oracle for the vectorised force."""
    n, d = x.shape
    acc = np.zeros((n, d))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            xij = x[j] - x[i]
            vij = v[j] - v[i]
            r = math.sqrt(float(xij @ xij))
            psi = p.kernel(r)
            term = p.k1 * psi * vij + p.k2 / 2 * (r - 2 * p.big_r) * xij / r
            if p.variant.value == "original":
                term = term + p.k_tilde / 2 * float(vij @ xij) / r**2 * xij
            acc[i] += term / n
    return acc


def test_kernel_values():
    assert kernel_eval(KernelSpec(KernelKind.SINGULAR, 1.0), 2.0) == 0.5
    assert kernel_eval(KernelSpec(KernelKind.SINGULAR, 2.0), 4.0) == 1 / 16
    assert kernel_eval(KernelSpec(KernelKind.REGULAR, 1.0), 1.0) == 0.5
    assert kernel_eval(KernelSpec(KernelKind.REGULAR, 0.5), 3.0) == 0.5


def test_kernel_domain():
    with pytest.raises(ValueError):
        KernelSpec(KernelKind.SINGULAR, 0.5)
    with pytest.raises(ValueError):
        KernelSpec(KernelKind.REGULAR, 0.0)
    for kind in KernelKind:
        for s in (0.0, -1.0):
            with pytest.raises(KernelDomainError):
                kernel_eval(KernelSpec(kind, 1.0), s)


@settings(max_examples=100, deadline=None)
@given(
    st.sampled_from(list(KernelKind)),
    st.floats(1.0, 4.0),
    st.floats(1e-6, 1e3),
    st.floats(1e-6, 1e3),
)
def test_kernel_positive_and_nonincreasing(kind, alpha, s1, s2):
    spec = KernelSpec(kind, alpha)
    lo, hi = sorted((s1, s2))
    assert kernel_eval(spec, lo) >= kernel_eval(spec, hi) > 0


def test_pairwise_geometry_example():
    st_ = SimState(0.0, np.array([[0.0, 0.0], [3.0, 4.0]]), np.array([[1.0, 0.0], [0.0, 0.0]]))
    pairs = pairwise_geometry(st_)
    assert pairs.r[0, 1] == 5.0 and pairs.r[1, 0] == 5.0
    assert pairs.closest_pair() == (0, 1, 5.0)
    np.testing.assert_array_equal(pairs.r, pairs.r.T)


def test_two_particles_at_bond_length_are_at_rest():
    p = make_params(2, 1, big_r=0.5)
    s = SimState(0.0, np.array([[-0.5], [0.5]]), np.zeros((2, 1)))
    np.testing.assert_array_equal(rhs(s, p).dv, 0.0)


def test_head_on_pair_hand_value():
    # x = -/+1, v = +/-1, R = 2, K = 1, psi(2) = 1/2
    p = make_params(2, 1, big_r=2.0)
    s = SimState(0.0, np.array([[-1.0], [1.0]]), np.array([[1.0], [-1.0]]))
    # particle 0: (1/2)[psi*(v1-v0) + (1/2)(r-2R)(x1-x0)/r] = (1/2)[-1 + (1/2)(-2)(1)] = -1
    np.testing.assert_allclose(rhs_simplified(s, p).dv, [[-1.0], [1.0]], rtol=1e-15)
    # projection adds (1/2)(1/2)(v01.x01)/r^2 x01 = (1/4)(-4/4)(2) = -1/2
    np.testing.assert_allclose(rhs_original(s, p).dv, [[-1.5], [1.5]], rtol=1e-15)


@pytest.mark.parametrize("variant", ["simplified", "original"])
@pytest.mark.parametrize("kernel", ["singular", "regular"])
def test_matches_loop_oracle(rng, variant, kernel):
    for n, d in [(2, 1), (3, 2), (7, 3)]:
        s = random_state(rng, n, d)
        p = make_params(n, d, variant, kernel, alpha=1.5, k1=0.7, k2=1.3, k_tilde=0.4, big_r=1.1)
        np.testing.assert_allclose(acceleration(s.x, s.v, p), loop_acceleration(s.x, s.v, p), rtol=1e-12, atol=1e-12)


def test_no_projection_means_identical_variants(rng):
    s = random_state(rng, 6, 2)
    a = rhs(s, make_params(6, 2, "original", k_tilde=0.0)).dv
    b = rhs(s, make_params(6, 2, "simplified")).dv
    np.testing.assert_array_equal(a, b)


def test_singular_floor_raises():
    p = make_params(3, 2)
    s = SimState(0.0, np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]), np.zeros((3, 2)))
    with pytest.raises(SingularityError) as info:
        rhs(s, p)
    assert {info.value.i, info.value.j} == {0, 1}


def test_regular_coincident_pair_keeps_only_alignment():
    p = make_params(2, 2, kernel="regular")
    s = SimState(0.0, np.zeros((2, 2)), np.array([[1.0, 0.0], [-1.0, 0.0]]))
    dv = rhs(s, p).dv
    assert np.isfinite(dv).all()
    # only the alignment term survives: psi(0) = 1, (1/2)(v1 - v0)
    np.testing.assert_allclose(dv, [[-1.0, 0.0], [1.0, 0.0]])


def test_state_rejects_nonfinite():
    with pytest.raises(ValueError):
        SimState(0.0, np.array([[np.nan, 0.0], [1.0, 1.0]]), np.zeros((2, 2)))


coords = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


@st.composite
def states(draw):
    n = draw(st.integers(2, 6))
    d = draw(st.integers(1, 3))
    x = np.array(draw(st.lists(coords, min_size=n * d, max_size=n * d))).reshape(n, d)
    v = np.array(draw(st.lists(coords, min_size=n * d, max_size=n * d))).reshape(n, d)
    return SimState(0.0, x, v)


def well_separated(s, floor=1e-3):
    return pairwise_geometry(s).r_min > floor


@settings(max_examples=60, deadline=None)
@given(states(), st.sampled_from(["simplified", "original"]), st.sampled_from(["singular", "regular"]))
def test_forces_sum_to_zero(s, variant, kernel):
    if not well_separated(s):
        return
    dv = rhs(s, make_params(s.n, s.dim, variant, kernel)).dv
    scale = max(1.0, float(np.abs(dv).max()))
    assert np.abs(dv.sum(axis=0)).max() <= 1e-12 * s.n * scale


@settings(max_examples=60, deadline=None)
@given(states(), st.floats(-10, 10), st.floats(-10, 10))
def test_translation_and_boost_invariance(s, shift, boost):
    if not well_separated(s):
        return
    p = make_params(s.n, s.dim, "original", "singular")
    a = rhs(s, p).dv
    b = rhs(SimState(0.0, s.x + shift, s.v + boost), p).dv
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-9 * max(1.0, float(np.abs(a).max())))
