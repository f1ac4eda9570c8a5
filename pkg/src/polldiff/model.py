"""Shared domain types: model parameters, spatial domains, initial profiles,
space-time grids, and solution field containers.

All types are immutable after construction and safe to share across threads.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class ValidationError(ValueError):
    """Raised when a domain object is constructed with invalid data."""


@dataclass(frozen=True)
class ModelParams:
    """Economic and environmental constants of the pollution control model.

    Parameters
    ----------
    eta : float
        Emission rate per unit of output growth (1/time). Must be > 0.
    delta : float
        Natural pollution decay rate (1/time). Must be > 0.
    rho : float
        Discount rate (1/time). Must be > 0.
    theta : float
        Social-loss weight in (0, 1]; (1-theta)/theta weights the
        end-of-horizon damage term.
    horizon_T : float
        Planning horizon (time). Must be > 0.
    diffusivity_d : float
        Pollution diffusion coefficient (space^2/time). Must be >= 0.
    """

    eta: float
    delta: float
    rho: float
    theta: float
    horizon_T: float
    diffusivity_d: float = 0.0

    def __post_init__(self):
        if not (self.eta > 0):
            raise ValidationError(f"eta must be > 0, got {self.eta}")
        if not (self.delta > 0):
            raise ValidationError(f"delta must be > 0, got {self.delta}")
        if not (self.rho > 0):
            raise ValidationError(f"rho must be > 0, got {self.rho}")
        if not (0 < self.theta <= 1):
            raise ValidationError(f"theta must lie in (0, 1], got {self.theta}")
        if not (self.horizon_T > 0):
            raise ValidationError(f"horizon_T must be > 0, got {self.horizon_T}")
        if not (self.diffusivity_d >= 0):
            raise ValidationError(f"diffusivity_d must be >= 0, got {self.diffusivity_d}")

    @property
    def terminal_ratio(self) -> float:
        """Terminal control/state coupling eta*(1-theta)/theta."""
        return self.eta * (1.0 - self.theta) / self.theta


#: Calibration used throughout the numerical illustrations: CO2-based rates
#: and a 2015 concentration of 400.23 ppm.
PAPER_2015 = ModelParams(eta=0.051, delta=0.05, rho=0.04, theta=0.5,
                         horizon_T=30.0, diffusivity_d=0.01)
PAPER_P0 = 400.23


@dataclass(frozen=True)
class Bounded:
    """Compact interval [x_a, x_b] with no-flux (Neumann) boundaries."""

    x_a: float
    x_b: float

    def __post_init__(self):
        if not (self.x_b > self.x_a):
            raise ValidationError(f"need x_a < x_b, got [{self.x_a}, {self.x_b}]")

    @property
    def length(self) -> float:
        return self.x_b - self.x_a


@dataclass(frozen=True)
class Unbounded:
    """The real line; window_halfwidth sets the reporting/truncation window."""

    window_halfwidth: float

    def __post_init__(self):
        if not (self.window_halfwidth > 0):
            raise ValidationError(
                f"window_halfwidth must be > 0, got {self.window_halfwidth}")

    @property
    def x_a(self) -> float:
        return -self.window_halfwidth

    @property
    def x_b(self) -> float:
        return self.window_halfwidth


SpatialDomain = Bounded | Unbounded


@dataclass(frozen=True)
class Constant:
    """Spatially homogeneous initial concentration p0 > 0."""

    p0: float

    def __post_init__(self):
        if not (self.p0 > 0):
            raise ValidationError(f"constant profile needs p0 > 0, got {self.p0}")

    def __call__(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.p0)


@dataclass(frozen=True)
class CenteredBump:
    """Heterogeneous profile (3/4)p0 + (1/2)p0*exp(-x^2): a concentration
    peak at x=0 decaying toward (3/4)p0 away from the center."""

    p0: float

    def __post_init__(self):
        if not (self.p0 > 0):
            raise ValidationError(f"bump profile needs p0 > 0, got {self.p0}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return 0.75 * self.p0 + 0.5 * self.p0 * np.exp(-x * x)


@dataclass(frozen=True)
class Tabulated:
    """Sampled profile; evaluation interpolates linearly and continues the
    edge values as constants beyond the sample range."""

    positions: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        val = np.asarray(self.values, dtype=float)
        if pos.size < 3:
            raise ValidationError(
                f"tabulated profile needs at least 3 samples, got {pos.size}")
        if pos.size != val.size:
            raise ValidationError("positions and values must have equal length")
        if not np.all(np.diff(pos) > 0):
            raise ValidationError("tabulated positions must be strictly increasing")
        if not np.all(val > 0):
            raise ValidationError("tabulated values must be strictly positive")
        object.__setattr__(self, "positions", tuple(float(p) for p in pos))
        object.__setattr__(self, "values", tuple(float(v) for v in val))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.interp(x, self.positions, self.values)


InitialProfile = Constant | CenteredBump | Tabulated

#: Relative non-uniformity tolerated in grid spacings.
GRID_UNIFORMITY_RTOL = 1e-12


def _check_uniform(samples: np.ndarray, name: str) -> None:
    steps = np.diff(samples)
    if samples.size < 2 or np.any(steps <= 0):
        raise ValidationError(f"{name} must be strictly increasing")
    h = steps.mean()
    if np.max(np.abs(steps - h)) > GRID_UNIFORMITY_RTOL * max(abs(h), 1.0):
        raise ValidationError(f"{name} must be uniformly spaced")


@dataclass(frozen=True)
class Grid:
    """Uniform space-time grid; times span [0, T], positions span the domain
    (or the reporting window in the unbounded case)."""

    times: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        positions = np.asarray(self.positions, dtype=float)
        _check_uniform(times, "times")
        _check_uniform(positions, "positions")
        if times[0] != 0.0:
            raise ValidationError(f"times must start at 0, got {times[0]}")
        times.setflags(write=False)
        positions.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "positions", positions)

    @property
    def nt(self) -> int:
        return self.times.size

    @property
    def nx(self) -> int:
        return self.positions.size

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def dx(self) -> float:
        return float(self.positions[1] - self.positions[0])


def make_grid(domain: SpatialDomain, params: ModelParams, nx: int, nt: int) -> Grid:
    """Build the uniform grid covering the domain (or window) and [0, T].

    nx >= 3 and nt >= 2 are required; bounded endpoints are hit exactly.
    """
    if nx < 3:
        raise ValidationError(f"nx must be >= 3, got {nx}")
    if nt < 2:
        raise ValidationError(f"nt must be >= 2, got {nt}")
    positions = np.linspace(domain.x_a, domain.x_b, nx)
    times = np.linspace(0.0, params.horizon_T, nt)
    return Grid(times=times, positions=positions)


class Provenance(enum.Enum):
    """Which solver produced a SolutionField."""

    ASPATIAL_CLOSED_FORM = "aspatial_closed_form"
    SPECTRAL_LOCAL = "spectral_local"
    SPECTRAL_GLOBAL = "spectral_global"
    GREENS_LOCAL = "greens_local"
    GREENS_GLOBAL = "greens_global"
    FD_ORACLE_LOCAL = "fd_oracle_local"
    FD_ORACLE_GLOBAL = "fd_oracle_global"


#: Pollution below this fraction of the initial scale makes tau = u/p
#: meaningless; such entries are reported as NaN and masked.
TAU_FLOOR_FRACTION = 1e-12


@dataclass(frozen=True)
class SolutionField:
    """Space-time surfaces of pollution p, control u and the implied tax
    tau = u/p, stored time-major: array[j, i] is (times[j], positions[i]).

    tau is NaN (and tau_defined False) wherever p has fallen below
    TAU_FLOOR_FRACTION of the initial scale.
    """

    grid: Grid
    domain: SpatialDomain
    p: np.ndarray
    u: np.ndarray
    tau: np.ndarray
    tau_defined: np.ndarray
    provenance: Provenance
    meta: dict = field(default_factory=dict)

    @staticmethod
    def from_pu(grid: Grid, domain: SpatialDomain, p: np.ndarray, u: np.ndarray,
                provenance: Provenance, meta: dict | None = None) -> "SolutionField":
        p = np.asarray(p, dtype=float)
        u = np.asarray(u, dtype=float)
        shape = (grid.nt, grid.nx)
        if p.shape != shape or u.shape != shape:
            raise ValidationError(
                f"field arrays must have shape {shape}, got {p.shape} and {u.shape}")
        floor = TAU_FLOOR_FRACTION * float(np.max(np.abs(p[0])))
        defined = p > floor
        tau = np.full(shape, np.nan)
        np.divide(u, p, out=tau, where=defined)
        for a in (p, u, tau, defined):
            a.setflags(write=False)
        return SolutionField(grid=grid, domain=domain, p=p, u=u, tau=tau,
                             tau_defined=defined, provenance=provenance,
                             meta=dict(meta or {}))
