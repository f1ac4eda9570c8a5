"""Scenario files: a flat INI-style key-value format with one section per
concern, plus the named parameter presets.

Example::

    [params]
    preset = paper-2015

    [domain]
    kind = bounded
    x_a = -1
    x_b = 1

    [profile]
    form = centered-bump
    p0 = 400.23

    [grid]
    nx = 201
    nt = 201

    [run]
    solvers = spectral_local, spectral_global, oracle_global
    checks = aggregate_decay, upper_bound
    out = out/fig2
    mc_seed = 0
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, replace
from pathlib import Path

from .model import (PAPER_2015, PAPER_P0, Bounded, CenteredBump, Constant,
                    InitialProfile, ModelParams, SpatialDomain, Tabulated,
                    Unbounded)

SOLVER_NAMES = ("aspatial", "spectral_local", "spectral_global",
                "greens_local", "greens_global", "oracle_local",
                "oracle_global")
CHECK_NAMES = ("local_equals_global", "aggregate_decay", "upper_bound",
               "longrun_cleanup")

PRESETS: dict[str, tuple[ModelParams, float]] = {
    "paper-2015": (PAPER_2015, PAPER_P0),
}


class ScenarioError(ValueError):
    """Malformed scenario file; the message names the offending field."""


@dataclass(frozen=True)
class Scenario:
    """Validated scenario: what to solve, on which grid, what to check."""

    params: ModelParams
    domain: SpatialDomain
    profile: InitialProfile
    nx: int
    nt: int
    solvers: tuple[str, ...]
    checks: tuple[str, ...]
    out_dir: Path
    mc_seed: int = 0
    n_modes: int = 64
    horizons: tuple[float, ...] = (10.0, 20.0, 40.0, 80.0)


def _require(section, key: str, section_name: str) -> str:
    if key not in section:
        raise ScenarioError(f"missing field '{key}' in [{section_name}]")
    return section[key]


def _as_float(section, key: str, section_name: str) -> float:
    raw = _require(section, key, section_name)
    try:
        return float(raw)
    except ValueError as exc:
        raise ScenarioError(
            f"field '{key}' in [{section_name}] is not a number: {raw!r}") from exc


def _as_int(section, key: str, section_name: str) -> int:
    raw = _require(section, key, section_name)
    try:
        return int(raw)
    except ValueError as exc:
        raise ScenarioError(
            f"field '{key}' in [{section_name}] is not an integer: {raw!r}") from exc


def _float_list(raw: str, key: str, section_name: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in raw.replace(",", " ").split())
    except ValueError as exc:
        raise ScenarioError(
            f"field '{key}' in [{section_name}] is not a number list: {raw!r}") from exc


def _parse_params(cfg: configparser.ConfigParser,
                  preset: str | None) -> tuple[ModelParams, float | None]:
    section_name = "params"
    section = cfg[section_name] if cfg.has_section(section_name) else {}
    preset_name = section.get("preset", preset) if hasattr(section, "get") else preset
    base: ModelParams | None = None
    preset_p0: float | None = None
    if preset_name is not None:
        if preset_name not in PRESETS:
            raise ScenarioError(
                f"unknown preset {preset_name!r}; available: {sorted(PRESETS)}")
        base, preset_p0 = PRESETS[preset_name]
    fields = ("eta", "delta", "rho", "theta", "horizon_T", "diffusivity_d")
    if base is None:
        values = {f: _as_float(section, f, section_name) for f in fields}
        try:
            return ModelParams(**values), None
        except ValueError as exc:
            raise ScenarioError(str(exc)) from exc
    overrides = {f: float(section[f]) for f in fields if f in section}
    try:
        return replace(base, **overrides), preset_p0
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc


def _parse_domain(cfg: configparser.ConfigParser) -> SpatialDomain:
    name = "domain"
    if not cfg.has_section(name):
        raise ScenarioError("missing section [domain]")
    section = cfg[name]
    kind = _require(section, "kind", name).strip().lower()
    if kind == "bounded":
        return Bounded(x_a=_as_float(section, "x_a", name),
                       x_b=_as_float(section, "x_b", name))
    if kind == "unbounded":
        return Unbounded(window_halfwidth=_as_float(
            section, "window_halfwidth", name))
    raise ScenarioError(
        f"field 'kind' in [domain] must be 'bounded' or 'unbounded', got {kind!r}")


def _parse_profile(cfg: configparser.ConfigParser,
                   preset_p0: float | None) -> InitialProfile:
    name = "profile"
    if not cfg.has_section(name):
        raise ScenarioError("missing section [profile]")
    section = cfg[name]
    form = _require(section, "form", name).strip().lower()
    if form in ("constant", "centered-bump"):
        if "p0" in section:
            p0 = _as_float(section, "p0", name)
        elif preset_p0 is not None:
            p0 = preset_p0
        else:
            raise ScenarioError("missing field 'p0' in [profile]")
        return Constant(p0) if form == "constant" else CenteredBump(p0)
    if form == "tabulated":
        pos = _float_list(_require(section, "positions", name), "positions", name)
        val = _float_list(_require(section, "values", name), "values", name)
        try:
            return Tabulated(positions=pos, values=val)
        except ValueError as exc:
            raise ScenarioError(str(exc)) from exc
    raise ScenarioError(
        "field 'form' in [profile] must be one of constant, centered-bump, "
        f"tabulated; got {form!r}")


def _parse_names(raw: str, allowed: tuple[str, ...], key: str,
                 section_name: str) -> tuple[str, ...]:
    names = tuple(tok.strip() for tok in raw.replace(",", " ").split() if tok.strip())
    for n in names:
        if n not in allowed:
            raise ScenarioError(
                f"field '{key}' in [{section_name}]: unknown name {n!r}; "
                f"allowed: {list(allowed)}")
    return names


def load_scenario(path: str | Path, preset: str | None = None,
                  seed: int | None = None,
                  out_override: str | Path | None = None) -> Scenario:
    """Parse and validate a scenario file; raises ScenarioError with the
    offending field named on any problem."""
    path = Path(path)
    if not path.is_file():
        raise ScenarioError(f"scenario file not found: {path}")
    cfg = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cfg.read_string(path.read_text(encoding="utf-8"), source=str(path))
    except (configparser.Error, UnicodeDecodeError) as exc:
        raise ScenarioError(f"cannot parse scenario {path}: {exc}") from exc

    params, preset_p0 = _parse_params(cfg, preset)
    domain = _parse_domain(cfg)
    profile = _parse_profile(cfg, preset_p0)

    gname = "grid"
    if not cfg.has_section(gname):
        raise ScenarioError("missing section [grid]")
    nx = _as_int(cfg[gname], "nx", gname)
    nt = _as_int(cfg[gname], "nt", gname)
    if nx < 3:
        raise ScenarioError(f"field 'nx' in [grid] must be >= 3, got {nx}")
    if nt < 2:
        raise ScenarioError(f"field 'nt' in [grid] must be >= 2, got {nt}")

    rname = "run"
    if not cfg.has_section(rname):
        raise ScenarioError("missing section [run]")
    run = cfg[rname]
    solvers = _parse_names(_require(run, "solvers", rname), SOLVER_NAMES,
                           "solvers", rname)
    if not solvers:
        raise ScenarioError("field 'solvers' in [run] must name at least one solver")
    checks = (_parse_names(run["checks"], CHECK_NAMES, "checks", rname)
              if "checks" in run else ())
    out_dir = Path(out_override) if out_override is not None else Path(
        _require(run, "out", rname))
    mc_seed = seed if seed is not None else (
        _as_int(run, "mc_seed", rname) if "mc_seed" in run else 0)
    n_modes = _as_int(run, "n_modes", rname) if "n_modes" in run else 64
    horizons = (_float_list(run["horizons"], "horizons", rname)
                if "horizons" in run else (10.0, 20.0, 40.0, 80.0))

    for solver in solvers:
        if solver.startswith("spectral") and not isinstance(domain, Bounded):
            raise ScenarioError(
                f"solver {solver!r} requires a bounded domain")
        if solver.startswith("greens") and not isinstance(domain, Unbounded):
            raise ScenarioError(
                f"solver {solver!r} requires an unbounded domain")
        if solver == "aspatial" and not isinstance(profile, Constant):
            raise ScenarioError(
                "solver 'aspatial' requires a constant profile")

    return Scenario(params=params, domain=domain, profile=profile, nx=nx,
                    nt=nt, solvers=solvers, checks=checks, out_dir=out_dir,
                    mc_seed=mc_seed, n_modes=n_modes, horizons=horizons)
