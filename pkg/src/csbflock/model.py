"""State, parameters, communication kernels and force evaluation.

Two flavours of the Cucker-Smale system with bonding force are supported:

* ``Variant.SIMPLIFIED``: alignment plus the radial bonding term.
* ``Variant.ORIGINAL``: the above plus the velocity-projection term scaled
  by ``k_tilde``.

All forces are pairwise and antisymmetric, so the per-pair contributions are
built from a single :class:`PairTable` and reduced over ``j`` in index order.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

DEFAULT_R_FLOOR = 1e-12


class KernelKind(str, Enum):
    SINGULAR = "singular"
    REGULAR = "regular"


class Variant(str, Enum):
    ORIGINAL = "original"
    SIMPLIFIED = "simplified"


class KernelDomainError(ValueError):
    """A kernel was evaluated at a non-positive distance."""


class SingularityError(ArithmeticError):
    """A pair distance fell to (or below) the singularity floor.

    Carries the offending pair as zero-based indices together with the
    distance, and the time if known.
    """

    def __init__(self, i: int, j: int, r: float, t: float | None = None):
        self.i, self.j, self.r, self.t = int(i), int(j), float(r), t
        where = "" if t is None else f" at t={t!r}"
        super().__init__(f"pair ({self.i}, {self.j}) at distance {self.r!r}{where}")


@dataclass(frozen=True)
class KernelSpec:
    """Communication weight ``psi``.

    ``SINGULAR`` is ``s**-alpha`` (alpha >= 1), ``REGULAR`` is
    ``(1 + s)**-alpha`` (alpha > 0).
    """

    kind: KernelKind = KernelKind.SINGULAR
    alpha: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", KernelKind(self.kind))
        alpha = float(self.alpha)
        if not np.isfinite(alpha):
            raise ValueError("alpha must be finite")
        if self.kind is KernelKind.SINGULAR and alpha < 1.0:
            raise ValueError(f"singular kernel requires alpha >= 1, got {alpha!r}")
        if self.kind is KernelKind.REGULAR and alpha <= 0.0:
            raise ValueError(f"regular kernel requires alpha > 0, got {alpha!r}")
        object.__setattr__(self, "alpha", alpha)

    @property
    def singular(self) -> bool:
        return self.kind is KernelKind.SINGULAR

    def __call__(self, s):
        """Vectorised evaluation; no domain checks."""
        s = np.asarray(s, dtype=float)
        if self.singular:
            return s ** -self.alpha
        return (1.0 + s) ** -self.alpha


def kernel_eval(spec: KernelSpec, s: float) -> float:
    if not s > 0:
        raise KernelDomainError(f"kernel evaluated at s={s!r}; distances must be positive")
    return float(spec(s))


@dataclass(frozen=True)
class ModelParams:
    n: int
    dim: int
    variant: Variant = Variant.SIMPLIFIED
    kernel: KernelSpec = field(default_factory=KernelSpec)
    k1: float = 1.0
    k2: float = 1.0
    k_tilde: float = 1.0
    big_r: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"n must be an integer >= 2, got {self.n!r}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be an integer >= 1, got {self.dim!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "dim", int(self.dim))
        for name in ("k1", "k2", "k_tilde"):
            value = float(getattr(self, name))
            if not (np.isfinite(value) and value >= 0.0):
                raise ValueError(f"{name} must be a finite nonnegative number, got {value!r}")
            object.__setattr__(self, name, value)
        big_r = float(self.big_r)
        if not (np.isfinite(big_r) and big_r > 0.0):
            raise ValueError(f"big_r must be positive, got {big_r!r}")
        object.__setattr__(self, "big_r", big_r)

    @property
    def uses_projection(self) -> bool:
        return self.variant is Variant.ORIGINAL and self.k_tilde != 0.0


@dataclass
class SimState:
    """Positions ``x`` and velocities ``v`` (both ``(N, d)``) at time ``t``."""

    t: float
    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.t = float(self.t)
        self.x = np.array(self.x, dtype=float)
        self.v = np.array(self.v, dtype=float)
        if self.x.ndim == 1:
            self.x = self.x[:, None]
        if self.v.ndim == 1:
            self.v = self.v[:, None]
        if self.x.shape != self.v.shape or self.x.ndim != 2:
            raise ValueError(f"x and v must both be (N, d); got {self.x.shape} and {self.v.shape}")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.v)) and np.isfinite(self.t)):
            raise ValueError("state contains non-finite entries")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def copy(self) -> "SimState":
        return SimState(self.t, self.x.copy(), self.v.copy())

    def is_centered(self, tol: float) -> bool:
        return bool(
            np.linalg.norm(self.x.sum(axis=0)) <= tol and np.linalg.norm(self.v.sum(axis=0)) <= tol
        )


@dataclass
class Derivative:
    dx: np.ndarray
    dv: np.ndarray


@dataclass
class PairTable:
    """Pair differences ``xij[i, j] = x_i - x_j``, ``vij`` likewise, and ``r = |xij|``."""

    xij: np.ndarray
    vij: np.ndarray
    r: np.ndarray

    @property
    def n(self) -> int:
        return self.r.shape[0]

    def off_diagonal(self) -> np.ndarray:
        return ~np.eye(self.n, dtype=bool)

    def closest_pair(self) -> tuple[int, int, float]:
        """(i, j, r_ij) of the closest distinct pair, with i < j."""
        masked = np.where(self.off_diagonal(), self.r, np.inf)
        flat = int(np.argmin(masked))
        i, j = divmod(flat, self.n)
        if i > j:
            i, j = j, i
        return i, j, float(masked[i, j])

    @property
    def r_min(self) -> float:
        return self.closest_pair()[2]

    @property
    def r_max(self) -> float:
        return float(self.r.max())

    @property
    def collisional(self) -> bool:
        return self.r_min == 0.0


def _pairs(x: np.ndarray, v: np.ndarray) -> PairTable:
    xij = x[:, None, :] - x[None, :, :]
    vij = v[:, None, :] - v[None, :, :]
    # a - b == -(b - a) exactly in IEEE arithmetic, so r is exactly symmetric.
    r = np.sqrt(np.einsum("ijk,ijk->ij", xij, xij))
    return PairTable(xij, vij, r)


def pairwise_geometry(state: SimState) -> PairTable:
    return _pairs(state.x, state.v)


def acceleration(
    x: np.ndarray,
    v: np.ndarray,
    params: ModelParams,
    r_floor: float = DEFAULT_R_FLOOR,
    pairs: PairTable | None = None,
) -> np.ndarray:
    """Acceleration of every particle, shape ``(N, d)``.

    Raises :class:`SingularityError` if the kernel is singular and some
    distinct pair sits at or below ``r_floor``. For the regular kernel a
    coincident pair (``r_ij == 0``) contributes no bonding or projection
    force; its alignment term is finite and kept.
    """
    if pairs is None:
        pairs = _pairs(x, v)
    n = x.shape[0]
    xij, vij, r = pairs.xij, pairs.vij, pairs.r
    off = ~np.eye(n, dtype=bool)
    kernel = params.kernel

    if kernel.singular:
        close = off & (r <= r_floor)
        if close.any():
            i, j = np.argwhere(close)[0]
            raise SingularityError(i, j, r[i, j])
        r_safe = np.where(off, r, 1.0)
        psi = kernel(r_safe)
    else:
        psi = kernel(r)
        r_safe = np.where(r > 0.0, r, 1.0)
    live = r > 0.0  # excludes the diagonal and coincident pairs

    coef_x = np.where(live, params.k2 * (r_safe - 2.0 * params.big_r) / (2.0 * r_safe), 0.0)
    if params.uses_projection:
        proj = np.einsum("ijk,ijk->ij", vij, xij)
        coef_x = coef_x + np.where(live, params.k_tilde * proj / (2.0 * r_safe * r_safe), 0.0)

    # per-pair force on i from j, antisymmetric in (i, j)
    pair_force = (params.k1 * psi)[:, :, None] * vij + coef_x[:, :, None] * xij
    return -pair_force.sum(axis=1) / n


def rhs_simplified(state: SimState, params: ModelParams, r_floor: float = DEFAULT_R_FLOOR) -> Derivative:
    if params.variant is not Variant.SIMPLIFIED:
        params = _with_variant(params, Variant.SIMPLIFIED)
    return Derivative(state.v.copy(), acceleration(state.x, state.v, params, r_floor))


def rhs_original(state: SimState, params: ModelParams, r_floor: float = DEFAULT_R_FLOOR) -> Derivative:
    if params.variant is not Variant.ORIGINAL:
        params = _with_variant(params, Variant.ORIGINAL)
    return Derivative(state.v.copy(), acceleration(state.x, state.v, params, r_floor))


def rhs(state: SimState, params: ModelParams, r_floor: float = DEFAULT_R_FLOOR) -> Derivative:
    """Dispatch on ``params.variant``."""
    return Derivative(state.v.copy(), acceleration(state.x, state.v, params, r_floor))


def _with_variant(params: ModelParams, variant: Variant) -> ModelParams:
    return replace(params, variant=variant)
