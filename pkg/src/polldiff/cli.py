"""Scenario-driven command line: run solvers and checks from a scenario
file, reproduce the illustration surfaces, and verify single propositions.

Commands
--------
run <scenario-file>            solve, check, and write CSV surfaces + report
figure <fig1|fig2|fig_unbounded> [--out DIR]   101x101 display surfaces
check <scenario-file> --prop <name>            run one proposition check

Exit codes: 0 ok, 1 solver failure, 2 input error.  All outputs are
deterministic for a fixed seed; the MANIFEST lists every file with its
SHA-256 content hash.
"""
from __future__ import annotations

import argparse
import hashlib
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, analysis, greens, pde_oracle, spectral
from .aspatial import closed_form_diagnostic, solve_aspatial_bvp, tau_star
from .matexp import off_diagonal_gap
from .model import (Bounded, CenteredBump, Constant, Grid, Provenance,
                    SolutionField, Unbounded, make_grid)
from .scenario import (CHECK_NAMES, PRESETS, Scenario, ScenarioError,
                       load_scenario)

FIGURE_NAMES = ("fig1", "fig2", "fig_unbounded")
DISPLAY_N = 101


def _fmt(v: float) -> str:
    return repr(float(v))


def write_surface_csv(path: Path, grid: Grid, values: np.ndarray,
                      defined: np.ndarray | None = None) -> None:
    """Write one surface as `x,t,value` rows (time-major order, full
    round-trip precision).  Rows where `defined` is False are omitted so no
    NaN/Inf is ever written."""
    lines = ["x,t,value"]
    for j, t in enumerate(grid.times):
        for i, x in enumerate(grid.positions):
            if defined is not None and not defined[j, i]:
                continue
            v = values[j, i]
            if not np.isfinite(v):
                raise pde_oracle.ValidationError(
                    f"non-finite value at (t={t}, x={x}) in {path.name}")
            lines.append(f"{_fmt(x)},{_fmt(t)},{_fmt(v)}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_field_csvs(out: Path, stem: str, fld: SolutionField) -> list[Path]:
    paths = []
    for name, values, defined in (("p", fld.p, None), ("u", fld.u, None),
                                  ("tau", fld.tau, fld.tau_defined)):
        p = out / f"{stem}_{name}.csv"
        write_surface_csv(p, fld.grid, values, defined)
        paths.append(p)
    return paths


def write_manifest(out: Path, files: list[Path], failures: list[str]) -> Path:
    lines = []
    for f in sorted(files, key=lambda p: p.name):
        digest = hashlib.sha256(f.read_bytes()).hexdigest()
        lines.append(f"{digest}  {f.name}")
    for msg in failures:
        lines.append(f"FAILED {msg}")
    manifest = out / "MANIFEST"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest


def _aspatial_field(scn: Scenario, grid: Grid) -> SolutionField:
    sol = solve_aspatial_bvp(scn.params, scn.profile.p0)
    p_line = sol.p_path(grid.times)
    u_line = sol.u_path(grid.times)
    p = np.repeat(p_line[:, None], grid.nx, axis=1)
    u = np.repeat(u_line[:, None], grid.nx, axis=1)
    return SolutionField.from_pu(grid, scn.domain, p, u,
                                 Provenance.ASPATIAL_CLOSED_FORM)


def solve_one(scn: Scenario, name: str, grid: Grid) -> SolutionField:
    params, domain, profile = scn.params, scn.domain, scn.profile
    if name == "aspatial":
        return _aspatial_field(scn, grid)
    if name == "spectral_local":
        return spectral.local_solution_bounded(params, domain, profile, grid,
                                               n_modes=scn.n_modes)
    if name == "spectral_global":
        return spectral.global_solution_bounded(params, domain, profile, grid,
                                                n_modes=scn.n_modes)
    if name == "greens_local":
        return greens.local_solution_unbounded(params, profile, grid)
    if name == "greens_global":
        return greens.global_solution_unbounded(params, profile, grid)
    if name == "oracle_local":
        taus = tau_star(params, grid.times)
        fld = pde_oracle.diffuse_forward(profile, params, grid,
                                         source_tax=taus, domain=domain)
        return fld
    if name == "oracle_global":
        fld, _, _ = pde_oracle.forward_backward_sweep(profile, params, grid,
                                                      domain=domain)
        return fld
    raise ScenarioError(f"unknown solver {name!r}")


def _run_checks(scn: Scenario, fields: dict[str, SolutionField],
                lines: list[str]) -> list[dict]:
    records: list[dict] = []

    def record(rep, solver=""):
        lines.extend(rep.to_lines())
        rec = rep.as_record()
        rec["solver"] = solver
        records.append(rec)

    for check in scn.checks:
        if check == "local_equals_global":
            rep = analysis.check_local_equals_global(
                scn.params, scn.domain, scn.profile,
                nx=min(scn.nx, 201), nt=min(scn.nt, 201), n_modes=scn.n_modes)
            record(rep)
        elif check == "longrun_cleanup":
            domain = None if isinstance(scn.profile, Constant) else scn.domain
            rep = analysis.check_longrun_cleanup(scn.params, scn.profile,
                                                 scn.horizons, domain=domain,
                                                 n_modes=scn.n_modes)
            record(rep)
        else:
            fn = (analysis.check_aggregate_decay if check == "aggregate_decay"
                  else None)
            for name, fld in fields.items():
                if fn is not None:
                    rep = fn(scn.params, fld)
                else:
                    rep = analysis.check_upper_bound(scn.params, fld,
                                                     scn.profile)
                lines.append(f"[{name}]")
                record(rep, solver=name)
    return records


def write_checks_csv(path: Path, records: list[dict]) -> None:
    """Flatten proposition reports into one CSV row each."""
    keys: list[str] = ["name", "solver", "holds", "margin", "tolerance"]
    for rec in records:
        for k in rec:
            if k not in keys:
                keys.append(k)
    lines = [",".join(keys)]
    for rec in records:
        lines.append(",".join(_csv_cell(rec.get(k, "")) for k in keys))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _csv_cell(v) -> str:
    if isinstance(v, float):
        return _fmt(v)
    s = str(v)
    return '"' + s.replace('"', '""') + '"' if ("," in s or '"' in s) else s


def run_scenario(scn: Scenario, parallel: bool = False) -> int:
    """Run every requested solver and check; write CSVs, report.txt and
    MANIFEST into the scenario's output directory.  Returns the exit code.

    With parallel=True, independent solver runs execute concurrently;
    outputs are written in scenario order either way, so artifacts are
    byte-identical."""
    out = scn.out_dir
    out.mkdir(parents=True, exist_ok=True)
    grid = make_grid(scn.domain, scn.params, scn.nx, scn.nt)
    files: list[Path] = []
    failures: list[str] = []
    fields: dict[str, SolutionField] = {}
    lines: list[str] = []

    lines.append(f"polldiff {__version__} scenario report")
    lines.append(f"params: {scn.params}")
    lines.append(f"domain: {scn.domain}")
    lines.append(f"profile: {scn.profile}")
    lines.append(f"grid: nx={scn.nx} nt={scn.nt}  mc_seed={scn.mc_seed}")
    lines.append("")

    outcomes: dict[str, SolutionField | Exception] = {}
    if parallel and len(scn.solvers) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=len(scn.solvers)) as pool:
            futures = {name: pool.submit(solve_one, scn, name, grid)
                       for name in scn.solvers}
        for name, fut in futures.items():
            outcomes[name] = fut.exception() or fut.result()
    else:
        for name in scn.solvers:
            try:
                outcomes[name] = solve_one(scn, name, grid)
            except Exception as exc:  # noqa: BLE001 - reported, not swallowed
                outcomes[name] = exc

    for name in scn.solvers:
        fld = outcomes[name]
        if isinstance(fld, Exception):
            failures.append(f"{name}: {fld}")
            continue
        fields[name] = fld
        files.extend(write_field_csvs(out, name, fld))
        cost = analysis.spatial_cost(scn.params, fld)
        lines.append(f"[{name}] cost running={_fmt(cost.running)} "
                     f"terminal={_fmt(cost.terminal)} total={_fmt(cost.total)}")
        center = grid.nx // 2
        ptot = analysis.p_total(fld)
        trend = "non-increasing" if np.all(np.diff(ptot) <= 1e-12 * ptot[0]) \
            else "not monotone" if np.any(np.diff(ptot) < 0) else "increasing"
        lines.append(f"[{name}] p(center): {_fmt(fld.p[0, center])} -> "
                     f"{_fmt(fld.p[-1, center])}; p_tot: {_fmt(ptot[0])} -> "
                     f"{_fmt(ptot[-1])} ({trend})")
        if "iterations" in fld.meta:
            lines.append(f"[{name}] sweep iterations={fld.meta['iterations']} "
                         f"residual={_fmt(fld.meta['residual'])}")
        undefined = int(np.size(fld.tau_defined) - np.count_nonzero(fld.tau_defined))
        if undefined:
            lines.append(f"[{name}] tau undefined at {undefined} grid points "
                         "(p below the reporting floor); rows omitted from CSV")
    lines.append("")

    names = sorted(fields)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            gap = analysis.pair_sup_gap(fields[a], fields[b])
            lines.append(f"cross-gap {a} vs {b}: rel_sup={_fmt(gap)}")
    lines.append("")

    records = _run_checks(scn, fields, lines)
    if records:
        checks_path = out / "checks.csv"
        write_checks_csv(checks_path, records)
        files.append(checks_path)
    lines.append("")

    diag = closed_form_diagnostic(scn.params, p0=getattr(scn.profile, "p0", 1.0))
    lines.append("closed-form diagnostic (published scalar displays vs "
                 "two-point solution):")
    lines.append(f"  b = 2(delta-eta)+rho = {_fmt(diag.b)}")
    lines.append(f"  tau_gap = {_fmt(diag.tau_gap)}  "
                 "(zero iff b = 0)")
    lines.append(f"  u_path_gap = {_fmt(diag.u_path_gap)}")
    lines.append(f"  p_path_gap = {_fmt(diag.p_path_gap)}")

    report = out / "report.txt"
    report.write_text("\n".join(lines) + "\n", encoding="utf-8")
    files.append(report)
    write_manifest(out, files, failures)
    if failures:
        for msg in failures:
            print(f"solver failed: {msg}", file=sys.stderr)
        return 1
    return 0


def figure_scenario(name: str, out_dir: Path, seed: int = 0) -> Scenario:
    params, p0 = PRESETS["paper-2015"]
    if name == "fig1":
        domain, profile = Bounded(-1.0, 1.0), Constant(p0)
        solvers = ("spectral_global",)
    elif name == "fig2":
        domain, profile = Bounded(-1.0, 1.0), CenteredBump(p0)
        solvers = ("spectral_local", "spectral_global")
    elif name == "fig_unbounded":
        domain, profile = Unbounded(1.0), CenteredBump(p0)
        solvers = ("greens_local", "greens_global")
    else:
        raise ScenarioError(
            f"unknown figure {name!r}; available: {list(FIGURE_NAMES)}")
    return Scenario(params=params, domain=domain, profile=profile,
                    nx=DISPLAY_N, nt=DISPLAY_N, solvers=solvers, checks=(),
                    out_dir=out_dir, mc_seed=seed)


def emit_figure_data(scn: Scenario, figure: str) -> list[Path]:
    """Write the display surfaces for one figure from a compatible scenario.

    fig1 expects a bounded domain with a constant profile (tax and
    pollution, spatially constant); fig2 a bounded heterogeneous profile
    (local and global tax/pollution); fig_unbounded the same on the line.
    Raises ScenarioError naming the mismatch otherwise.
    """
    if figure not in FIGURE_NAMES:
        raise ScenarioError(f"unknown figure {figure!r}")
    if figure in ("fig1", "fig2") and not isinstance(scn.domain, Bounded):
        raise ScenarioError(f"{figure} requires a bounded domain, got "
                            f"{type(scn.domain).__name__}")
    if figure == "fig_unbounded" and not isinstance(scn.domain, Unbounded):
        raise ScenarioError("fig_unbounded requires an unbounded domain, got "
                            f"{type(scn.domain).__name__}")
    if figure == "fig1" and not isinstance(scn.profile, Constant):
        raise ScenarioError("fig1 requires a constant profile, got "
                            f"{type(scn.profile).__name__}")
    if figure != "fig1" and isinstance(scn.profile, Constant):
        raise ScenarioError(f"{figure} requires a heterogeneous profile")

    out = scn.out_dir
    out.mkdir(parents=True, exist_ok=True)
    grid = make_grid(scn.domain, scn.params, DISPLAY_N, DISPLAY_N)
    files: list[Path] = []
    if figure == "fig1":
        fld = spectral.global_solution_bounded(scn.params, scn.domain,
                                               scn.profile, grid,
                                               n_modes=scn.n_modes)
        for surf, vals, defined in (("tau", fld.tau, fld.tau_defined),
                                    ("p", fld.p, None)):
            p = out / f"fig1_{surf}.csv"
            write_surface_csv(p, grid, vals, defined)
            files.append(p)
    else:
        if figure == "fig2":
            loc = spectral.local_solution_bounded(scn.params, scn.domain,
                                                  scn.profile, grid,
                                                  n_modes=scn.n_modes)
            glob = spectral.global_solution_bounded(scn.params, scn.domain,
                                                    scn.profile, grid,
                                                    n_modes=scn.n_modes)
        else:
            loc = greens.local_solution_unbounded(scn.params, scn.profile, grid)
            glob = greens.global_solution_unbounded(scn.params, scn.profile, grid)
        for stem, fld in (("local", loc), ("global", glob)):
            for surf, vals, defined in (("tau", fld.tau, fld.tau_defined),
                                        ("p", fld.p, None)):
                p = out / f"{figure}_{stem}_{surf}.csv"
                write_surface_csv(p, grid, vals, defined)
                files.append(p)
    write_manifest(out, files, [])
    return files


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polldiff",
        description="Transboundary pollution control solvers and checks")
    parser.add_argument("--version", action="version",
                        version=f"polldiff {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario file")
    run.add_argument("scenario", help="path to the scenario file")
    run.add_argument("--preset", choices=sorted(PRESETS),
                     help="parameter preset applied before file overrides")
    run.add_argument("--seed", type=int, default=None,
                     help="override the scenario's mc_seed")
    run.add_argument("--out", default=None, help="override the output directory")
    run.add_argument("--parallel", action="store_true",
                     help="run independent solvers concurrently")

    fig = sub.add_parser("figure", help="emit display surfaces for a figure")
    fig.add_argument("name", choices=FIGURE_NAMES)
    fig.add_argument("--out", default="figures", help="output directory")
    fig.add_argument("--seed", type=int, default=0)

    chk = sub.add_parser("check", help="run one proposition check")
    chk.add_argument("scenario", help="path to the scenario file")
    chk.add_argument("--prop", required=True, choices=CHECK_NAMES)
    chk.add_argument("--preset", choices=sorted(PRESETS))
    chk.add_argument("--seed", type=int, default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            scn = load_scenario(args.scenario, preset=args.preset,
                                seed=args.seed, out_override=args.out)
            return run_scenario(scn, parallel=args.parallel)
        if args.command == "figure":
            scn = figure_scenario(args.name, Path(args.out), seed=args.seed)
            files = emit_figure_data(scn, args.name)
            for f in files:
                print(f.as_posix())
            return 0
        if args.command == "check":
            scn = load_scenario(args.scenario, preset=args.preset,
                                seed=args.seed, out_override="unused-out")
            scn = replace(scn, checks=(args.prop,))
            grid = make_grid(scn.domain, scn.params, scn.nx, scn.nt)
            fields = {name: solve_one(scn, name, grid) for name in scn.solvers}
            lines: list[str] = []
            _run_checks(scn, fields, lines)
            print("\n".join(lines))
            return 0
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - solver failures exit 1
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
