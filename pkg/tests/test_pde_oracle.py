import numpy as np
import pytest

from polldiff import greens, pde_oracle, spectral
from polldiff.aspatial import growth_factor, solve_aspatial_bvp, tau_star
from polldiff.model import (PAPER_P0, Bounded, CenteredBump, Constant,
                            ModelParams, Unbounded, make_grid)
from polldiff.pde_oracle import (SweepConfig, SweepNonConvergenceError,
                                 diffuse_forward, forward_backward_sweep,
                                 laplacian_apply, trapezoid_weights)

from conftest import rel_sup


def test_mass_conservation_pure_heat(bounded, bump):
    # eta = delta and tau = 0: reaction dies, discrete mass is conserved
    p = ModelParams(eta=0.05, delta=0.05, rho=0.04, theta=0.5, horizon_T=30.0,
                    diffusivity_d=0.01)
    grid = make_grid(bounded, p, 201, 201)
    fld = diffuse_forward(bump, p, grid, source_tax=None)
    w = trapezoid_weights(grid.nx, grid.dx)
    masses = fld.p @ w
    assert np.max(np.abs(masses - masses[0])) <= 1e-10 * masses[0]
    # profile flattens monotonically toward its mean
    spreads = fld.p.max(axis=1) - fld.p.min(axis=1)
    assert np.all(np.diff(spreads) <= 1e-12 * spreads[0])
    assert spreads[-1] < 0.05 * spreads[0]


def test_no_diffusion_matches_scalar_ode(bounded, bump):
    p = ModelParams(eta=0.051, delta=0.05, rho=0.04, theta=0.5, horizon_T=30.0,
                    diffusivity_d=0.0)
    grid = make_grid(bounded, p, 21, 3201)
    taus = tau_star(p, grid.times)
    fld = diffuse_forward(bump, p, grid, source_tax=taus)
    g = growth_factor(p, grid.times, substeps=4)
    expected = g[:, None] * bump(grid.positions)[None, :]
    assert rel_sup(fld.p, expected) <= 1e-8


def test_discrete_adjoint_duality():
    rng = np.random.default_rng(3)
    nx, dx = 173, 0.013
    w = trapezoid_weights(nx, dx)
    for _ in range(5):
        a, b = rng.standard_normal(nx), rng.standard_normal(nx)
        lhs = np.sum(w * laplacian_apply(a, dx) * b)
        rhs = np.sum(w * a * laplacian_apply(b, dx))
        assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1.0)


def test_scheme_second_order_against_series(params, bounded, bump):
    # measured past the incompatible-data startup layer (t >= 0.5)
    gaps = {}
    for n in (201, 401):
        grid = make_grid(bounded, params, n, n)
        taus = tau_star(params, grid.times)
        fld = diffuse_forward(bump, params, grid, source_tax=taus)
        ref = spectral.local_solution_bounded(params, bounded, bump, grid,
                                              n_modes=128)
        late = grid.times >= 0.5
        gaps[n] = rel_sup(fld.p[late], ref.p[late])
    assert gaps[201] / gaps[401] >= 3.5


def test_local_forward_matches_series(params, bounded, bump, grid201):
    taus = tau_star(params, grid201.times)
    fld = diffuse_forward(bump, params, grid201, source_tax=taus)
    ref = spectral.local_solution_bounded(params, bounded, bump, grid201,
                                          n_modes=128)
    assert rel_sup(fld.p, ref.p) <= 1e-3


def test_sweep_homogeneous_matches_two_point(params, bounded, flat, grid201):
    fld, costate, iters = forward_backward_sweep(flat, params, grid201)
    assert iters <= 200
    sol = solve_aspatial_bvp(params, PAPER_P0)
    p_ref = np.repeat(sol.p_path(grid201.times)[:, None], grid201.nx, axis=1)
    u_ref = np.repeat(sol.u_path(grid201.times)[:, None], grid201.nx, axis=1)
    assert rel_sup(fld.p, p_ref) <= 1e-4
    assert rel_sup(fld.u, u_ref) <= 1e-4
    # u = eta * lambda at convergence
    assert rel_sup(fld.u, params.eta * costate.lam) <= 1e-6


def test_sweep_theta_one_zero_terminal_control(bounded, bump):
    p = ModelParams(eta=0.051, delta=0.05, rho=0.04, theta=1.0, horizon_T=30.0,
                    diffusivity_d=0.01)
    grid = make_grid(bounded, p, 101, 101)
    fld, _, _ = forward_backward_sweep(bump, p, grid)
    assert np.max(np.abs(fld.u[-1])) <= 1e-8 * np.max(np.abs(fld.u))


def test_sweep_matches_global_series(params, bounded, bump, grid201):
    fld, _, iters = forward_backward_sweep(bump, params, grid201)
    assert iters <= 200
    ref = spectral.global_solution_bounded(params, bounded, bump, grid201,
                                           n_modes=128)
    assert rel_sup(fld.p, ref.p) <= 1e-3
    assert rel_sup(fld.u, ref.u) <= 1e-3


def test_sweep_cost_does_not_exceed_initial_guess(params, bounded, bump):
    from polldiff import analysis
    grid = make_grid(bounded, params, 101, 101)
    taus = tau_star(params, grid.times)
    local = diffuse_forward(bump, params, grid, source_tax=taus)
    fld, _, _ = forward_backward_sweep(bump, params, grid)
    c_local = analysis.spatial_cost(params, local).total
    c_sweep = analysis.spatial_cost(params, fld).total
    assert c_sweep <= c_local


def test_sweep_nonconvergence_error(params, bounded, bump):
    grid = make_grid(bounded, params, 51, 51)
    cfg = SweepConfig(relaxation=0.5, max_iters=2, convergence_tol=1e-14)
    with pytest.raises(SweepNonConvergenceError) as err:
        forward_backward_sweep(bump, params, grid, config=cfg)
    assert err.value.residual > 0


def test_condition_number_warning(bounded, bump):
    p = ModelParams(eta=0.051, delta=0.05, rho=0.04, theta=0.5, horizon_T=30.0,
                    diffusivity_d=10.0)
    grid = make_grid(bounded, p, 2001, 3)
    with pytest.warns(RuntimeWarning):
        diffuse_forward(bump, p, grid, source_tax=None, startup_rows=0)


def test_unbounded_window_padding(params, window, bump):
    # pure-diffusion forward solve on the padded window vs kernel smoothing
    p = ModelParams(eta=0.05, delta=0.05, rho=0.04, theta=0.5, horizon_T=30.0,
                    diffusivity_d=0.01)
    grid = make_grid(window, p, 101, 201)
    fld = diffuse_forward(bump, p, grid, source_tax=None, domain=window)
    ref = np.vstack([greens.heat_convolve(bump, p.diffusivity_d, float(t),
                                          grid.positions)
                     for t in grid.times])
    assert rel_sup(fld.p, ref) <= 2e-4


def test_invalid_sweep_config():
    with pytest.raises(ValueError):
        SweepConfig(relaxation=0.0)
    with pytest.raises(ValueError):
        SweepConfig(convergence_tol=-1.0)
