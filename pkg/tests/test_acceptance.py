"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line
with the measured quantities at the stated tolerance.

Criteria 8b, 8c and 8d assert published qualitative figure claims that the
model's own closed forms contradict at the calibrated parameters (see the
failure messages for the measured values); they are asserted faithfully and
fail red rather than being weakened.
"""
import time

import numpy as np
import pytest

from polldiff import analysis, greens, pde_oracle, spectral
from polldiff.aspatial import solve_aspatial_bvp, tau_star
from polldiff.cli import figure_scenario, main, run_scenario
from polldiff.model import (PAPER_2015, PAPER_P0, Bounded, CenteredBump,
                            Constant, Grid, ModelParams, Provenance,
                            SolutionField, Unbounded, make_grid)

from conftest import rel_sup

PARAMS = PAPER_2015
BOUNDED = Bounded(-1.0, 1.0)
WINDOW = Unbounded(1.0)
FLAT = Constant(PAPER_P0)
BUMP = CenteredBump(PAPER_P0)


def emit(n, ok, detail):
    print(f"ACCEPTANCE {n}: {'PASS' if ok else 'FAIL'} - {detail}")


@pytest.fixture(scope="module")
def grid201():
    return make_grid(BOUNDED, PARAMS, 201, 201)


@pytest.fixture(scope="module")
def flat_bundle(grid201):
    t0 = time.perf_counter()
    sol = solve_aspatial_bvp(PARAMS, PAPER_P0)
    p_line, u_line = sol.p_path(grid201.times), sol.u_path(grid201.times)
    aspatial_fld = SolutionField.from_pu(
        grid201, BOUNDED, np.repeat(p_line[:, None], grid201.nx, axis=1),
        np.repeat(u_line[:, None], grid201.nx, axis=1),
        Provenance.ASPATIAL_CLOSED_FORM)
    spec = spectral.global_solution_bounded(PARAMS, BOUNDED, FLAT, grid201)
    grn = greens.global_solution_unbounded(PARAMS, FLAT, grid201)
    orc, _, iters = pde_oracle.forward_backward_sweep(FLAT, PARAMS, grid201)
    elapsed = time.perf_counter() - t0
    return {"aspatial": aspatial_fld, "spectral_global": spec,
            "greens_global": grn, "oracle_global": orc,
            "iters": iters, "elapsed": elapsed}


@pytest.fixture(scope="module")
def bump_bundle(grid201):
    taus = tau_star(PARAMS, grid201.times)
    loc = spectral.local_solution_bounded(PARAMS, BOUNDED, BUMP, grid201,
                                          n_modes=128)
    glob = spectral.global_solution_bounded(PARAMS, BOUNDED, BUMP, grid201,
                                            n_modes=128)
    orc_loc = pde_oracle.diffuse_forward(BUMP, PARAMS, grid201, source_tax=taus)
    orc_glob, _, iters = pde_oracle.forward_backward_sweep(BUMP, PARAMS, grid201)
    grn_loc = greens.local_solution_unbounded(PARAMS, BUMP, grid201)
    grn_glob = greens.global_solution_unbounded(PARAMS, BUMP, grid201)
    return {"spectral_local": loc, "spectral_global": glob,
            "oracle_local": orc_loc, "oracle_global": orc_glob,
            "greens_local": grn_loc, "greens_global": grn_glob,
            "iters": iters}


def test_criterion_1_homogeneity_equivalence(flat_bundle):
    fields = {k: flat_bundle[k] for k in
              ("aspatial", "spectral_global", "greens_global", "oracle_global")}
    names = sorted(fields)
    worst = max(analysis.pair_sup_gap(fields[a], fields[b])
                for i, a in enumerate(names) for b in names[i + 1:])
    ok = worst <= 1e-4 and flat_bundle["elapsed"] < 10.0
    emit(1, ok, f"pairwise sup gap {worst:.3e} (tol 1e-4), "
                f"runtime {flat_bundle['elapsed']:.2f}s (< 10s)")
    assert worst <= 1e-4
    assert flat_bundle["elapsed"] < 10.0


def test_criterion_2_suboptimality(bump_bundle):
    loc, glob = bump_bundle["spectral_local"], bump_bundle["spectral_global"]
    c_loc = analysis.spatial_cost(PARAMS, loc).total
    c_glob = analysis.spatial_cost(PARAMS, glob).total
    grid401 = make_grid(BOUNDED, PARAMS, 401, 401)
    loc4 = spectral.local_solution_bounded(PARAMS, BOUNDED, BUMP, grid401,
                                           n_modes=128)
    glob4 = spectral.global_solution_bounded(PARAMS, BOUNDED, BUMP, grid401,
                                             n_modes=128)
    refine_err = max(abs(analysis.spatial_cost(PARAMS, loc4).total - c_loc),
                     abs(analysis.spatial_cost(PARAMS, glob4).total - c_glob))
    gap = c_loc - c_glob
    loc_ev = spectral.local_evaluator_bounded(PARAMS, BOUNDED, BUMP, n_modes=64)
    glob_ev = spectral.global_evaluator_bounded(PARAMS, BOUNDED, BUMP, n_modes=64)
    probes_t = np.linspace(1.0, 29.0, 7)
    probes_x = np.linspace(-0.9, 0.9, 9)
    res_loc = analysis.foc_residual_probe(PARAMS, loc_ev.p_at, loc_ev.u_at,
                                          probes_t, probes_x)
    res_glob = analysis.foc_residual_probe(PARAMS, glob_ev.p_at, glob_ev.u_at,
                                           probes_t, probes_x)
    ok = gap > 0 and gap > 10 * refine_err and res_loc > 1e-3
    emit(2, ok, f"C(local)-C(global)={gap:.6g} (> 10x refinement {refine_err:.2e}), "
                f"local FOC residual {res_loc:.2e} vs global {res_glob:.2e}")
    assert gap > 0
    assert gap > 10 * refine_err
    assert res_loc > 1e-3 and res_loc > 1e3 * res_glob


def test_criterion_3_oracle_cross_validation(bump_bundle, grid201):
    gaps = {}
    iters_401 = None
    for n in (201, 401):
        grid = make_grid(BOUNDED, PARAMS, n, n)
        if n == 201:
            loc, glob = bump_bundle["spectral_local"], bump_bundle["spectral_global"]
            fd_loc, fd_glob = bump_bundle["oracle_local"], bump_bundle["oracle_global"]
            iters = bump_bundle["iters"]
        else:
            loc = spectral.local_solution_bounded(PARAMS, BOUNDED, BUMP, grid,
                                                  n_modes=128)
            glob = spectral.global_solution_bounded(PARAMS, BOUNDED, BUMP, grid,
                                                    n_modes=128)
            taus = tau_star(PARAMS, grid.times)
            fd_loc = pde_oracle.diffuse_forward(BUMP, PARAMS, grid,
                                                source_tax=taus)
            fd_glob, _, iters = pde_oracle.forward_backward_sweep(BUMP, PARAMS,
                                                                  grid)
            iters_401 = iters
        late = grid.times >= 0.5
        gaps[n] = {
            "local": rel_sup(loc.p, fd_loc.p),
            "global": max(rel_sup(glob.p, fd_glob.p), rel_sup(glob.u, fd_glob.u)),
            "local_late": rel_sup(loc.p[late], fd_loc.p[late]),
            "iters": iters,
        }
    ratio = gaps[201]["local_late"] / gaps[401]["local_late"]
    ok = (gaps[201]["local"] <= 1e-3 and gaps[201]["global"] <= 1e-3
          and gaps[401]["local"] <= 2.5e-4 and gaps[401]["global"] <= 2.5e-4
          and ratio >= 3.5 and gaps[201]["iters"] <= 200 and iters_401 <= 200)
    emit(3, ok, f"201^2 gaps local {gaps[201]['local']:.2e} / global "
                f"{gaps[201]['global']:.2e} (tol 1e-3); 401^2 "
                f"{gaps[401]['local']:.2e} / {gaps[401]['global']:.2e} "
                f"(tol 2.5e-4); order ratio {ratio:.2f} (>= 3.5, past startup); "
                f"sweep iters {gaps[201]['iters']}/{iters_401} (<= 200)")
    assert gaps[201]["local"] <= 1e-3 and gaps[201]["global"] <= 1e-3
    assert gaps[401]["local"] <= 2.5e-4 and gaps[401]["global"] <= 2.5e-4
    assert ratio >= 3.5
    assert gaps[201]["iters"] <= 200 and iters_401 <= 200


def test_criterion_4_aggregate_decay(bump_bundle):
    threshold = (PARAMS.eta - PARAMS.delta) / PARAMS.eta
    assert threshold == pytest.approx(0.0196, abs=1e-4)
    worst = -np.inf
    for name in ("spectral_local", "spectral_global", "oracle_global"):
        rep = analysis.check_aggregate_decay(PARAMS, bump_bundle[name])
        assert rep.details["threshold_met"], name
        worst = max(worst, rep.details["max_increment"] / rep.details["p_tot_start"])
        ok_one = rep.holds
        assert ok_one, (name, rep.details)
    emit(4, True, f"tau_min > {threshold:.4f} on all fields; worst p_tot "
                  f"increment {worst:.2e} of p_tot(0) (tol 1e-8)")


def test_criterion_5_upper_bound(flat_bundle, bump_bundle):
    worst_margin = np.inf
    produced = [(name, fld, FLAT) for name, fld in flat_bundle.items()
                if isinstance(fld, SolutionField)]
    produced += [(name, fld, BUMP) for name, fld in bump_bundle.items()
                 if isinstance(fld, SolutionField)]
    for name, fld, profile in produced:
        rep = analysis.check_upper_bound(PARAMS, fld, profile)
        assert rep.holds, (name, rep.details)
        worst_margin = min(worst_margin, rep.margin)
    # tightness: constant tax, no diffusion
    pars0 = ModelParams(eta=0.051, delta=0.05, rho=0.04, theta=0.5,
                        horizon_T=30.0, diffusivity_d=0.0)
    grid = make_grid(BOUNDED, pars0, 51, 51)
    tau_c = 0.3
    rate = pars0.eta - pars0.delta - pars0.eta * tau_c
    p = np.exp(rate * grid.times)[:, None] * BUMP(grid.positions)[None, :]
    tight = SolutionField.from_pu(grid, BOUNDED, p, tau_c * p,
                                  Provenance.FD_ORACLE_LOCAL)
    rep = analysis.check_upper_bound(pars0, tight, BUMP)
    tightness = abs(rep.margin) / np.max(p)
    ok = rep.holds and tightness <= 1e-10
    emit(5, ok, f"bound holds on every produced field (worst margin "
                f"{worst_margin:.3e} >= -1e-8 scale); constant-tax d=0 "
                f"tightness {tightness:.2e} (tol 1e-10)")
    assert rep.holds and tightness <= 1e-10


def test_criterion_6_longrun_cleanup():
    rep = analysis.check_longrun_cleanup(PARAMS, FLAT, (10.0, 20.0, 40.0, 80.0))
    pT = rep.details["terminal_max"]
    ok = rep.holds
    emit(6, ok, "max_x p(x,T) along T=(10,20,40,80): "
                + ", ".join(f"{v:.2f}" for v in pT)
                + " decreasing and dominated by the exponential bound")
    assert rep.holds


def test_criterion_7_kernel_correctness():
    t0 = time.perf_counter()
    ones = Constant(1.0)
    worst_mass = 0.0
    for method in (greens.GaussHermite(64), greens.AdaptiveQuadrature(1e-10),
                   greens.MonteCarlo(samples=100_000, seed=9)):
        v = greens.heat_convolve(ones, PARAMS.diffusivity_d, 13.0,
                                 np.array([0.0, 1.2]), method)
        worst_mass = max(worst_mass, float(np.max(np.abs(v - 1.0))))
    gauss = lambda y: np.exp(-np.asarray(y, dtype=float) ** 2)
    xs = np.array([-0.6, 0.0, 0.8])
    t_g = 8.0
    exact = np.exp(-xs**2 / (1 + 4 * PARAMS.diffusivity_d * t_g)) / np.sqrt(
        1 + 4 * PARAMS.diffusivity_d * t_g)
    gh = greens.heat_convolve(gauss, PARAMS.diffusivity_d, t_g, xs,
                              greens.GaussHermite(64))
    gauss_err = float(np.max(np.abs(gh - exact)))
    mc = greens.MonteCarlo(samples=100_000, seed=17)
    mean, se = greens.mc_estimate(gauss, PARAMS.diffusivity_d, t_g, 0.0, mc)
    mc_ok = abs(mean - exact[1]) <= 3 * se
    elapsed = time.perf_counter() - t0
    ok = worst_mass <= 1e-10 and gauss_err <= 1e-8 and mc_ok and elapsed < 5.0
    emit(7, ok, f"mass error {worst_mass:.2e} (tol 1e-10), gaussian error "
                f"{gauss_err:.2e} (tol 1e-8), MC within |{mean - exact[1]:.2e}| "
                f"<= 3se={3 * se:.2e}, runtime {elapsed:.2f}s (< 5s)")
    assert worst_mass <= 1e-10
    assert gauss_err <= 1e-8
    assert mc_ok
    assert elapsed < 5.0


@pytest.fixture(scope="module")
def fig2_surfaces(tmp_path_factory):
    out = tmp_path_factory.mktemp("fig2")
    scn = figure_scenario("fig2", out)
    grid = make_grid(scn.domain, scn.params, 101, 101)
    loc = spectral.local_solution_bounded(scn.params, scn.domain, scn.profile,
                                          grid)
    glob = spectral.global_solution_bounded(scn.params, scn.domain,
                                            scn.profile, grid)
    return grid, loc, glob


def test_criterion_8a_global_tax_minimum_at_center(fig2_surfaces):
    grid, _, glob = fig2_surfaces
    tau0 = glob.tau[0]
    x_min = float(grid.positions[np.argmin(tau0)])
    ok = x_min == 0.0
    emit("8a", ok, f"fig2 global tax at t=0 has its minimum at x={x_min}")
    assert x_min == 0.0


def test_criterion_8b_global_pollution_monotone(fig2_surfaces):
    grid, _, glob = fig2_surfaces
    increments = np.diff(glob.p, axis=0)
    worst = float(np.max(increments))
    j, i = np.unravel_index(int(np.argmax(increments)), increments.shape)
    scale = float(np.max(glob.p))
    ok = worst <= 1e-9 * scale
    emit("8b", ok,
         f"global pollution max increment {worst:+.4g} ({worst / scale:.2%} of "
         f"scale) at (t={grid.times[j + 1]:.2f}, x={grid.positions[i]:+.2f}); "
         "the no-flux walls reflect the initial outward gradient, so the "
         "true optimal field rises at the edges for ~0.3y")
    assert worst <= 1e-9 * scale, (
        "published claim 'monotone non-increasing at every x' fails: the "
        f"field genuinely rises by {worst:.3g} ({worst / scale:.2%}) at the "
        "domain walls during the initial boundary-layer transient")


def test_criterion_8c_local_pollution_rising_at_center(fig2_surfaces):
    grid, loc, _ = fig2_surfaces
    center = grid.nx // 2
    assert grid.positions[center] == 0.0
    dp_end = float(loc.p[-1, center] - loc.p[-2, center])
    ok = dp_end > 0
    emit("8c", ok,
         f"local pollution at the center: p(0,0)={loc.p[0, center]:.2f} -> "
         f"p(0,T)={loc.p[-1, center]:.2f}, last-step change {dp_end:+.4g}; "
         "the a-spatial tax keeps eta-delta-eta*tau < 0 throughout, so the "
         "local field falls everywhere")
    assert dp_end > 0, (
        "published claim 'local pollution increasing by t=T at the center' "
        f"fails: the surface falls from {loc.p[0, center]:.1f} to "
        f"{loc.p[-1, center]:.1f} and its last step changes by {dp_end:.3g}")


def test_criterion_8d_unbounded_tax_flat(tmp_path_factory):
    grid = make_grid(WINDOW, PARAMS, 101, 101)
    glob = greens.global_solution_unbounded(PARAMS, BUMP, grid)
    tau0 = glob.tau[0]
    variation = float((np.max(tau0) - np.min(tau0)) / np.min(tau0))
    ok = variation <= 0.01
    emit("8d", ok,
         f"fig_unbounded global tax at t=0 varies by {variation:.2%} over "
         "[-1,1] (claimed <= 1%); tau(x,0)=u(x,0)/p0(x) inherits the "
         "initial heterogeneity of p0 and only homogenizes near t=T")
    assert variation <= 0.01, (
        "published claim 'tax homogeneous in the unbounded case' fails at "
        f"t=0: measured spatial variation {variation:.2%} over the window")


def test_criterion_9_closed_form_diagnostic(tmp_path):
    balanced = """
[params]
eta = 0.051
delta = 0.031
rho = 0.04
theta = 0.5
horizon_T = 30
diffusivity_d = 0.01

[domain]
kind = bounded
x_a = -1
x_b = 1

[profile]
form = constant
p0 = 400.23

[grid]
nx = 51
nt = 51

[run]
solvers = spectral_global
out = {out}
"""
    import re

    out_b = tmp_path / "balanced"
    f_b = tmp_path / "balanced.ini"
    f_b.write_text(balanced.format(out=out_b), encoding="utf-8")
    assert main(["run", str(f_b)]) == 0
    rep_b = (out_b / "report.txt").read_text()
    gap_b = float(re.search(r"tau_gap = ([0-9.e+-]+)", rep_b).group(1))

    paper = balanced.replace("delta = 0.031", "delta = 0.05")
    out_p = tmp_path / "paper"
    f_p = tmp_path / "paper.ini"
    f_p.write_text(paper.format(out=out_p), encoding="utf-8")
    assert main(["run", str(f_p)]) == 0
    rep_p = (out_p / "report.txt").read_text()
    gap_p = float(re.search(r"tau_gap = ([0-9.e+-]+)", rep_p).group(1))

    ok = gap_b <= 1e-9 and gap_p > 1e-9
    emit(9, ok, f"report emits printed-vs-two-point tau gap: {gap_b:.2e} at "
                f"2(delta-eta)+rho=0 (tol 1e-9), {gap_p:.2e} at paper params "
                "(nonzero, documented)")
    assert gap_b <= 1e-9
    assert gap_p > 1e-9
