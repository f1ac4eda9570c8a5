"""Bounded-domain closed forms: Neumann cosine series for the local solution
(a-spatial tax, diffusive state) and the global solution (full spatial
optimum), plus the verbatim published-series diagnostic.

Mode structure of the global optimum: writing the pair (p, u) as a cosine
series, the amplitude vector of frequency mu obeys the a-spatial two-point
system with delta -> delta + d*mu^2 (the diffusion enters the forward
equation with +d and the control equation with -d, which is exactly a decay
shift on the symmetric coefficient matrix).  Each mode is therefore
propagated by `matexp.mode_paths` with its own terminal coupling.

The published global display instead applies the mu = 0 propagator e^{Theta
t} to heat-decayed series, which is not a solution of the optimality system
(the matrices do not commute); it is kept here as `paper_series_field` for
gap reporting only.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from . import matexp
from .aspatial import growth_factor, tau_star
from .model import (Bounded, Grid, InitialProfile, ModelParams, Provenance,
                    SolutionField, Tabulated, ValidationError)


class CosineBasis(enum.Enum):
    """Neumann cosine families on [x_a, x_b] of length L.

    PAPER_EVEN uses frequencies 2n*pi/L (the family printed in the bounded
    closed forms): complete only for profiles symmetric about the midpoint.
    FULL_NEUMANN uses n*pi/L (the family used in the upper-bound appendix):
    complete on the interval.  Both have zero normal derivative at both
    endpoints.  Default everywhere is FULL_NEUMANN; for midpoint-symmetric
    profiles the two agree (asserted in tests).
    """

    PAPER_EVEN = "paper_even"
    FULL_NEUMANN = "full_neumann"


@dataclass(frozen=True)
class CosineSeries:
    """Cosine coefficients of an initial profile on a bounded domain.

    coefficients[n] multiplies cos(mu_n (x - x_a)) with mu_0 = 0 carrying
    the conventional 1/2 weight (value = A_0/2 + sum A_n cos).
    recon_error is the sup-norm reconstruction error against the profile.
    """

    domain: Bounded
    basis: CosineBasis
    coefficients: np.ndarray
    recon_error: float

    @property
    def n_modes(self) -> int:
        return self.coefficients.size - 1

    def frequencies(self) -> np.ndarray:
        L = self.domain.length
        n = np.arange(self.coefficients.size, dtype=float)
        step = 2.0 * np.pi / L if self.basis is CosineBasis.PAPER_EVEN else np.pi / L
        return n * step

    def reconstruct(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        mu = self.frequencies()
        w = np.ones_like(self.coefficients)
        w[0] = 0.5
        return (w * self.coefficients) @ np.cos(np.outer(mu, x - self.domain.x_a))


def cosine_coeffs(profile: InitialProfile, domain: Bounded,
                  basis: CosineBasis = CosineBasis.FULL_NEUMANN,
                  n_modes: int = 64, nx_quad: int | None = None) -> CosineSeries:
    """Cosine coefficients A_0..A_N of the initial profile by composite
    Simpson quadrature (at least 801 abscissae, >= 8 per retained mode).

    A_n = (2/L) int p0(x) cos(mu_n (x - x_a)) dx.
    """
    if not isinstance(domain, Bounded):
        raise ValidationError("cosine series requires a bounded domain")
    if n_modes < 1:
        raise ValidationError(f"n_modes must be >= 1, got {n_modes}")
    if isinstance(profile, Tabulated) and len(profile.positions) < 3:
        raise ValidationError("tabulated profile needs at least 3 samples")
    nx = nx_quad or max(801, 8 * n_modes + 1)
    if nx % 2 == 0:
        nx += 1
    xq = np.linspace(domain.x_a, domain.x_b, nx)
    fq = profile(xq)
    L = domain.length
    step = 2.0 * np.pi / L if basis is CosineBasis.PAPER_EVEN else np.pi / L
    coeffs = np.empty(n_modes + 1)
    for n in range(n_modes + 1):
        coeffs[n] = (2.0 / L) * simpson(fq * np.cos(n * step * (xq - domain.x_a)), x=xq)
    # quadrature noise below machine epsilon of the leading coefficient is
    # snapped to zero so exactly representable profiles stay exact
    coeffs[np.abs(coeffs) < 1e-14 * np.max(np.abs(coeffs))] = 0.0
    series = CosineSeries(domain=domain, basis=basis, coefficients=coeffs,
                          recon_error=0.0)
    err = float(np.max(np.abs(series.reconstruct(xq) - fq)))
    return CosineSeries(domain=domain, basis=basis, coefficients=coeffs,
                        recon_error=err)


class HeatSeriesEvaluator:
    """Pure-diffusion Neumann solution h(x, t) built on a cosine series.

    At t = 0 the profile itself is returned (the infinite series sums to it;
    the truncated series is only used for t > 0, where the e^{-d mu^2 t}
    factors make the truncation spectrally small).
    """

    def __init__(self, profile, series: CosineSeries, diffusivity: float):
        self.profile = profile
        self.series = series
        self.d = float(diffusivity)
        self._mu = series.frequencies()
        w = np.ones_like(series.coefficients)
        w[0] = 0.5
        self._wa = w * series.coefficients

    def value(self, t: float, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if t == 0.0 or self.d == 0.0:
            return np.asarray(self.profile(x), dtype=float)
        decay = np.exp(-self.d * self._mu**2 * t)
        return (self._wa * decay) @ np.cos(
            np.outer(self._mu, x - self.series.domain.x_a))

    def derivative(self, t: float, x) -> np.ndarray:
        """Spatial derivative of the (truncated) series, term-wise."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        decay = np.exp(-self.d * self._mu**2 * t) if t > 0 else np.ones_like(self._mu)
        return -(self._wa * decay * self._mu) @ np.sin(
            np.outer(self._mu, x - self.series.domain.x_a))


def heat_solution_bounded(profile: InitialProfile, domain: Bounded,
                          diffusivity: float,
                          basis: CosineBasis = CosineBasis.FULL_NEUMANN,
                          n_modes: int = 64) -> HeatSeriesEvaluator:
    """Neumann heat-equation solution with initial data p0 (used by the
    local solution and by the pollution upper bound)."""
    series = cosine_coeffs(profile, domain, basis=basis, n_modes=n_modes)
    return HeatSeriesEvaluator(profile, series, diffusivity)


class LocalBoundedEvaluator:
    """Local solution: a-spatial optimal tax, diffusive pollution.

    p(x,t) = exp(int_0^t eta-delta-eta tau*_s ds) * h(x,t) with h the pure
    Neumann heat solution; u = tau*_t p.
    """

    def __init__(self, params: ModelParams, heat: HeatSeriesEvaluator):
        self.params = params
        self.heat = heat

    def p_at(self, t: float, x) -> np.ndarray:
        g = growth_factor(self.params, np.array([t]), substeps=4)[0]
        return g * self.heat.value(t, x)

    def u_at(self, t: float, x) -> np.ndarray:
        return float(tau_star(self.params, t)) * self.p_at(t, x)

    def sample(self, grid: Grid) -> SolutionField:
        g = growth_factor(self.params, grid.times, substeps=4)
        taus = tau_star(self.params, grid.times)
        p = np.empty((grid.nt, grid.nx))
        for j, t in enumerate(grid.times):
            p[j] = g[j] * self.heat.value(float(t), grid.positions)
        u = taus[:, None] * p
        return SolutionField.from_pu(grid, self.heat.series.domain, p, u,
                                     Provenance.SPECTRAL_LOCAL,
                                     meta={"n_modes": self.heat.series.n_modes,
                                           "basis": self.heat.series.basis.value})


def local_solution_bounded(params: ModelParams, domain: Bounded,
                           profile: InitialProfile, grid: Grid,
                           basis: CosineBasis = CosineBasis.FULL_NEUMANN,
                           n_modes: int = 64) -> SolutionField:
    """Sample the bounded local solution on the grid."""
    ev = local_evaluator_bounded(params, domain, profile, basis=basis,
                                 n_modes=n_modes)
    return ev.sample(grid)


def local_evaluator_bounded(params: ModelParams, domain: Bounded,
                            profile: InitialProfile,
                            basis: CosineBasis = CosineBasis.FULL_NEUMANN,
                            n_modes: int = 64) -> LocalBoundedEvaluator:
    heat = heat_solution_bounded(profile, domain, params.diffusivity_d,
                                 basis=basis, n_modes=n_modes)
    return LocalBoundedEvaluator(params, heat)


class GlobalBoundedEvaluator:
    """Global (spatial-optimum) solution as per-mode two-point paths.

    Mode n of the cosine series evolves under the a-spatial system with
    delta -> delta + d mu_n^2 and its own terminal coupling; p(x, 0)
    reproduces the profile exactly and u(x, T) = eta(1-theta)/theta p(x, T)
    holds mode by mode.
    """

    def __init__(self, params: ModelParams, profile, series: CosineSeries):
        self.params = params
        self.profile = profile
        self.series = series
        self._mu = series.frequencies()
        w = np.ones_like(series.coefficients)
        w[0] = 0.5
        self._wa = w * series.coefficients

    def _paths(self, times) -> tuple[np.ndarray, np.ndarray]:
        return matexp.mode_paths(self.params, self._mu**2, times)

    def pu_at(self, t: float, x) -> tuple[np.ndarray, np.ndarray]:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.params.diffusivity_d == 0.0:
            # no coupling across positions: every x is its own a-spatial problem
            P, U = matexp.aspatial_pair_path(self.params, np.array([t]))
            prof = np.asarray(self.profile(x), dtype=float)
            return prof * P[0], prof * U[0]
        P, U = self._paths(np.array([t]))
        cosmat = np.cos(np.outer(self._mu, x - self.series.domain.x_a))
        p = (self._wa * P[0]) @ cosmat
        u = (self._wa * U[0]) @ cosmat
        if t == 0.0:
            p = np.asarray(self.profile(x), dtype=float)
        return p, u

    def p_at(self, t: float, x) -> np.ndarray:
        return self.pu_at(t, x)[0]

    def u_at(self, t: float, x) -> np.ndarray:
        return self.pu_at(t, x)[1]

    def sample(self, grid: Grid) -> SolutionField:
        if self.params.diffusivity_d == 0.0:
            P, U = matexp.aspatial_pair_path(self.params, grid.times)
            prof = np.asarray(self.profile(grid.positions), dtype=float)
            return SolutionField.from_pu(
                grid, self.series.domain, np.outer(P, prof), np.outer(U, prof),
                Provenance.SPECTRAL_GLOBAL,
                meta={"n_modes": self.series.n_modes,
                      "basis": self.series.basis.value})
        P, U = self._paths(grid.times)
        cosmat = np.cos(np.outer(self._mu, grid.positions - self.series.domain.x_a))
        p = (self._wa * P) @ cosmat
        u = (self._wa * U) @ cosmat
        p[grid.times == 0.0] = self.profile(grid.positions)
        return SolutionField.from_pu(grid, self.series.domain, p, u,
                                     Provenance.SPECTRAL_GLOBAL,
                                     meta={"n_modes": self.series.n_modes,
                                           "basis": self.series.basis.value})


def global_evaluator_bounded(params: ModelParams, domain: Bounded,
                             profile: InitialProfile,
                             basis: CosineBasis = CosineBasis.FULL_NEUMANN,
                             n_modes: int = 64) -> GlobalBoundedEvaluator:
    series = cosine_coeffs(profile, domain, basis=basis, n_modes=n_modes)
    return GlobalBoundedEvaluator(params, profile, series)


def global_solution_bounded(params: ModelParams, domain: Bounded,
                            profile: InitialProfile, grid: Grid,
                            basis: CosineBasis = CosineBasis.FULL_NEUMANN,
                            n_modes: int = 64) -> SolutionField:
    """Sample the bounded global solution on the grid."""
    ev = global_evaluator_bounded(params, domain, profile, basis=basis,
                                  n_modes=n_modes)
    return ev.sample(grid)


def paper_series_field(params: ModelParams, domain: Bounded,
                       profile: InitialProfile, grid: Grid,
                       basis: CosineBasis = CosineBasis.PAPER_EVEN,
                       n_modes: int = 64) -> SolutionField:
    """The published global display, verbatim: e^{Theta t} applied to the
    forward-decayed A-series and backward-decayed B-series with
    B_n = kappa A_n e^{-d mu_n^2 T}.

    Diagnostic only: this field does not satisfy the optimality system for
    d > 0 and heterogeneous profiles (the decomposition assumes Theta
    commutes with diag(d, -d)); its gap against `global_solution_bounded`
    is what the scenario reports quantify.
    """
    series = cosine_coeffs(profile, domain, basis=basis, n_modes=n_modes)
    kap = matexp.kappa(params)
    mu = series.frequencies()
    w = np.ones_like(series.coefficients)
    w[0] = 0.5
    wa = w * series.coefficients
    d = params.diffusivity_d
    T = params.horizon_T
    e11, e12, e21, e22 = matexp.theta_exp(params, grid.times)
    cosmat = np.cos(np.outer(mu, grid.positions - domain.x_a))
    p = np.empty((grid.nt, grid.nx))
    u = np.empty((grid.nt, grid.nx))
    for j, t in enumerate(grid.times):
        z0 = (wa * np.exp(-d * mu**2 * t)) @ cosmat
        z1 = kap * (wa * np.exp(-d * mu**2 * T) * np.exp(-d * mu**2 * (T - t))) @ cosmat
        p[j] = e11[j] * z0 + e12[j] * z1
        u[j] = e21[j] * z0 + e22[j] * z1
    return SolutionField.from_pu(grid, domain, p, u, Provenance.SPECTRAL_GLOBAL,
                                 meta={"variant": "paper_printed_series",
                                       "n_modes": n_modes, "basis": basis.value})
