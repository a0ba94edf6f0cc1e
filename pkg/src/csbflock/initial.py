"""Seeded initial conditions, Galilean normalization and collision screening.

Random draws use numpy's Philox4x64 counter-based bit generator
(``numpy.random.Philox``), which has a published reference stream and gives
the same numbers on every platform for a given seed. Positions are drawn
first, row-major ``(N, d)``, then velocities.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import SimState, _pairs


@dataclass(frozen=True)
class InitConfig:
    n: int = 10
    dim: int = 2
    pos_box: tuple[float, float] = (-5.0, 5.0)
    vel_box: tuple[float, float] = (-5.0, 5.0)
    seed: int = 0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"n must be an integer >= 2, got {self.n!r}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be an integer >= 1, got {self.dim!r}")
        for name in ("pos_box", "vel_box"):
            lo, hi = (float(b) for b in getattr(self, name))
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValueError(f"{name} must be a nonempty finite interval, got ({lo!r}, {hi!r})")
            object.__setattr__(self, name, (lo, hi))
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "seed", int(self.seed))


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def sample_initial(config: InitConfig) -> SimState:
    rng = make_rng(config.seed)
    shape = (config.n, config.dim)
    x = rng.uniform(*config.pos_box, size=shape)
    v = rng.uniform(*config.vel_box, size=shape)
    return SimState(0.0, x, v)


def galilean_normalize(state: SimState) -> SimState:
    """Shift to the center-of-mass frame (zero mean position and velocity)."""
    x = state.x - state.x.mean(axis=0)
    v = state.v - state.v.mean(axis=0)
    return SimState(state.t, x, v)


@dataclass(frozen=True)
class Violation:
    i: int
    j: int
    r: float


def assert_noncollisional(state: SimState, floor: float) -> Violation | None:
    """``None`` if every distinct pair is farther apart than ``floor``, else the closest pair."""
    i, j, r = _pairs(state.x, state.v).closest_pair()
    if r > floor:
        return None
    return Violation(i, j, r)


def initial_state(config: InitConfig, floor: float) -> SimState:
    """Sample, center, and screen; raises ``ValueError`` on a collisional draw."""
    state = galilean_normalize(sample_initial(config))
    hit = assert_noncollisional(state, floor)
    if hit is not None:
        raise ValueError(f"initial pair ({hit.i}, {hit.j}) at distance {hit.r!r} <= {floor!r}")
    return state
