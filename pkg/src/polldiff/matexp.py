"""Closed-form 2x2 state/control propagator and the coupled two-point mode
paths built from it.

The state/control pair z = (p, u) of the linear-quadratic problem evolves by
dz/dt = Theta z with

    Theta = [[eta - delta, -eta], [-eta, rho - eta + delta]].

Theta is symmetric with eigenvalues (rho +- xi)/2, xi = sqrt(b^2 + 4 eta^2),
b = 2(delta - eta) + rho, which gives the cosh/sinh closed form implemented
here.  A spatial cosine mode of frequency mu obeys the same system with
delta replaced by delta + d*mu^2, so every solver in the package reduces to
these functions.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .model import ModelParams

#: Below this value of xi*t the ratio sinh(xi t/2)/xi is evaluated by its
#: Taylor limit t/2 to avoid 0/0 amplification.
XI_T_TAYLOR_CUTOFF = 1e-8


class DegenerateCouplingError(ArithmeticError):
    """Terminal coupling denominator vanished; the two-point problem has no
    unique solution for these inputs."""


def off_diagonal_gap(params: ModelParams) -> float:
    """The quantity b = 2(delta - eta) + rho controlling the eigenvalue split."""
    return 2.0 * (params.delta - params.eta) + params.rho


def xi(params: ModelParams) -> float:
    """Eigenvalue gap xi = sqrt([2(delta-eta)+rho]^2 + 4 eta^2) of Theta.

    Always >= 2*eta > 0 for valid parameters.
    """
    return float(np.hypot(off_diagonal_gap(params), 2.0 * params.eta))


def _sinhc_half(xi_val: float, t):
    """sinh(xi t / 2) / xi, with the Taylor limit t/2 for tiny xi*t."""
    t = np.asarray(t, dtype=float)
    if xi_val * np.max(t, initial=0.0) < XI_T_TAYLOR_CUTOFF:
        return t / 2.0 * (1.0 + (xi_val * t) ** 2 / 24.0)
    return np.sinh(xi_val * t / 2.0) / xi_val


@dataclass(frozen=True)
class MatExp2:
    """Entries of e^{Theta t} as functions of t, plus the scalar xi.

    e12 == e21 for all t (Theta is symmetric) and the matrix is the
    identity at t = 0.
    """

    params: ModelParams

    @property
    def xi(self) -> float:
        return xi(self.params)

    def entries(self, t):
        """Return (e11, e12, e21, e22) at time(s) t >= 0."""
        t = np.asarray(t, dtype=float)
        b = off_diagonal_gap(self.params)
        x = self.xi
        pref = np.exp(self.params.rho * t / 2.0)
        ch = np.cosh(x * t / 2.0)
        shc = _sinhc_half(x, t)
        e11 = pref * (ch - b * shc)
        e12 = -2.0 * self.params.eta * pref * shc
        e22 = pref * (ch + b * shc)
        return e11, e12, e12, e22

    def matrix(self, t: float) -> np.ndarray:
        e11, e12, e21, e22 = self.entries(float(t))
        return np.array([[e11, e12], [e21, e22]])


def theta_exp(params: ModelParams, t):
    """Entries (e11, e12, e21, e22) of e^{Theta t}; identity at t = 0."""
    return MatExp2(params).entries(t)


def theta_matrix(params: ModelParams) -> np.ndarray:
    """The coefficient matrix Theta itself."""
    a = params.eta - params.delta
    return np.array([[a, -params.eta], [-params.eta, params.rho - a]])


def kappa(params: ModelParams) -> float:
    """Initial control/state ratio enforcing the terminal condition
    u_T = eta (1-theta)/theta * p_T on the pair z = p0 e^{Theta t} [1, kappa].

    kappa = (theta e21(T) - eta(1-theta) e11(T))
          / (eta(1-theta) e12(T) - theta e22(T)).
    """
    e11, e12, e21, e22 = theta_exp(params, params.horizon_T)
    th, w = params.theta, params.eta * (1.0 - params.theta)
    den = w * e12 - th * e22
    if abs(den) < 1e-12:
        raise DegenerateCouplingError(
            f"terminal coupling denominator {den!r} is within 1e-12 of zero")
    return float((th * e21 - w * e11) / den)


def with_delta_shift(params: ModelParams, shift) -> ModelParams:
    """Parameters of the mode system: delta -> delta + shift (shift = d*mu^2)."""
    return replace(params, delta=params.delta + float(shift))


def mode_paths(params: ModelParams, mu_sq, times):
    """Solve the coupled two-point problem for spatial frequencies mu.

    For each mu^2 in `mu_sq`, the mode amplitudes (P, U) obey the a-spatial
    system with delta replaced by delta + d*mu^2, subject to P(0) = 1 and the
    terminal condition U(T) = eta (1-theta)/theta * P(T).

    Evaluation is by eigenvector decomposition with the growing exponential
    factored out, so it is exact and overflow-free for arbitrarily large
    mu^2 * d * T (the naive entry products overflow already for modest mode
    numbers).

    Parameters
    ----------
    params : ModelParams
        Model constants; `diffusivity_d` scales mu^2 into a decay shift.
    mu_sq : array_like
        Squared spatial frequencies, shape (nk,).
    times : array_like
        Evaluation times in [0, T], shape (nt,).

    Returns
    -------
    P, U : ndarray, shape (nt, nk)
        Mode amplitude paths.
    """
    mu_sq = np.atleast_1d(np.asarray(mu_sq, dtype=float))
    times = np.atleast_1d(np.asarray(times, dtype=float))
    eta, rho, T = params.eta, params.rho, params.horizon_T
    gamma = params.terminal_ratio

    b = off_diagonal_gap(params) + 2.0 * params.diffusivity_d * mu_sq
    x = np.hypot(b, 2.0 * eta)
    lam_minus = (rho - x) / 2.0
    # eigenvectors of the symmetric mode matrix: v+ for (rho+xi)/2, v- for (rho-xi)/2
    vp0, vp1 = -eta, (b + x) / 2.0
    vm0, vm1 = (b + x) / 2.0, eta
    g_plus = vp1 - gamma * vp0            # = (b+xi)/2 + gamma*eta > 0 always
    g_minus = vm1 - gamma * vm0
    r = g_minus / g_plus
    denom = vm0 - np.exp(-x * T) * r * vp0
    bad = np.abs(denom) < 1e-12 * np.maximum(np.abs(vm0), 1.0)
    if np.any(bad):
        raise DegenerateCouplingError(
            "mode two-point problem is degenerate at mu^2 = "
            f"{mu_sq[bad][:3].tolist()}")
    alpha = 1.0 / denom

    decay = np.exp(np.outer(times, lam_minus))
    remain = np.exp(-np.outer(params.horizon_T - times, x))
    P = alpha * decay * (vm0 - r * vp0 * remain)
    U = alpha * decay * (vm1 - r * vp1 * remain)
    return P, U


def aspatial_pair_path(params: ModelParams, times):
    """(P, U) for the spatially homogeneous mode (mu = 0), P(0) = 1.

    Identical to p0-normalized solve of the a-spatial two-point problem;
    U(0) equals kappa(params).
    """
    P, U = mode_paths(params, np.array([0.0]), times)
    return P[:, 0], U[:, 0]
