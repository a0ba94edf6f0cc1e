import numpy as np
import pytest

from csbflock.model import KernelKind, KernelSpec, ModelParams, SimState, Variant


def random_state(rng, n, dim, spread=3.0):
    x = rng.uniform(-spread, spread, size=(n, dim))
    v = rng.uniform(-spread, spread, size=(n, dim))
    return SimState(0.0, x - x.mean(axis=0), v - v.mean(axis=0))


def make_params(n, dim, variant="simplified", kernel="singular", alpha=1.0, **kw):
    return ModelParams(n=n, dim=dim, variant=Variant(variant), kernel=KernelSpec(KernelKind(kernel), alpha), **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
