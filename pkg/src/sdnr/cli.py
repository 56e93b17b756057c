"""Command-line driver: ``sdnr solve|sweep|oracle|cluster|validate``.

Exit codes: 0 success, 1 some hours failed, 2 bad input.
"""

from __future__ import annotations

import json
import sys

import click

from . import casefile
from .distflow import SolverConfig
from .errors import SDNRError
from .experiments import METHODS, SWEEP_AXES, ScenarioConfig, run_solve, run_sweep
from .network import is_radial
from .oracle import DEFAULT_BUDGET
from .scenarios import csv_text, ingest_csv, reduce_kmedoids, synthetic_profiles
from .trees import count_spanning_trees

EXIT_OK, EXIT_FAILED, EXIT_INPUT = 0, 1, 2


class _Input(click.ClickException):
    exit_code = EXIT_INPUT


def _parse_hours(text: str) -> list[int]:
    hours: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            a, b = part.split("-", 1)
            hours.extend(range(int(a), int(b) + 1))
        else:
            hours.append(int(part))
    if not hours or any(not 0 <= h < 24 for h in hours):
        raise _Input(f"hours must lie in 0..23, got {text!r}")
    return hours


def _parse_values(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise _Input(f"cannot parse grid values {text!r}") from None
    if not vals:
        raise _Input("empty grid")
    return [int(v) if v.is_integer() else v for v in vals]


def _load_case(spec: str, ohm: bool):
    try:
        return casefile.resolve_case(spec) if not ohm else casefile.parse_case(spec, "ohm")
    except SDNRError as exc:
        raise _Input(str(exc)) from None


def _load_table(ctx, path):
    g = ctx.obj
    if path is None:
        return None
    try:
        table, rejected = ingest_csv(path, g["load_col"], g["wind_col"], g["solar_col"])
    except (OSError, SDNRError) as exc:
        raise _Input(str(exc)) from None
    for rej in rejected:
        click.echo(f"warning: skipped line {rej.line} ({rej.column}={rej.value!r})", err=True)
    return table


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


def _solver(ctx) -> SolverConfig:
    try:
        return SolverConfig(tolerance=ctx.obj["tolerance"])
    except ValueError as exc:
        raise _Input(str(exc)) from None


def _scenario_options(f):
    opts = [
        click.option("--profiles", type=click.Path(exists=True, dir_okay=False),
                      help="Hourly CSV with load/wind/solar columns (synthetic if omitted)."),
        click.option("--days", default=91, show_default=True,
                     help="Days of synthetic profiles."),
        click.option("--scenarios", "n_scenarios", default=5, show_default=True,
                     help="Scenarios per hour after k-medoids reduction."),
        click.option("--k-r", "k_r", default=1.0, show_default=True,
                     help="Renewable penetration multiplier."),
        click.option("--fixed", is_flag=True,
                     help="Use the case's fixed injections instead of profiles."),
        click.option("--hours", default="0-23", show_default=True,
                     help="Hours of day, e.g. '12' or '0-5,18'."),
        click.option("--ohm", is_flag=True, help="MATPOWER import: impedances in ohms."),
        click.option("--out", type=click.Path(dir_okay=False), help="Report file (stdout if omitted)."),
        click.option("--trace", type=click.Path(dir_okay=False), help="Also write the JSON trace here."),
        click.option("--long", "long_path", type=click.Path(dir_okay=False),
                     help="Also write a long-format CSV here."),
        click.option("--no-timing", is_flag=True, help="Leave timing fields blank."),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


def _sconf(ctx, profiles, days, n_scenarios, k_r, fixed) -> ScenarioConfig:
    if n_scenarios < 1:
        raise _Input("--scenarios must be at least 1")
    if k_r < 0:
        raise _Input("--k-r must be non-negative")
    return ScenarioConfig(n_scenarios=n_scenarios, k_r=k_r, seed=ctx.obj["seed"], days=days,
                          use_case_injections=fixed, table=_load_table(ctx, profiles))


def _finish(report, fmt, out, trace, long_path, timing) -> None:
    _emit(report.to_json(timing) if fmt == "json" else report.to_csv(timing), out)
    if trace:
        _emit(report.to_json(timing), trace)
    if long_path and hasattr(report, "to_long_csv"):
        _emit(report.to_long_csv(timing), long_path)
    failed = report.failed_hours
    if failed:
        click.echo(f"failed hours: {', '.join(map(str, failed))}", err=True)
        sys.exit(EXIT_FAILED)


@click.group()
@click.option("--seed", default=0, show_default=True, help="Seed for profiles and clustering.")
@click.option("--tolerance", default=1e-8, show_default=True, help="Power-flow mismatch tolerance (pu).")
@click.option("--budget", default=DEFAULT_BUDGET, show_default=True,
              help="Largest spanning-tree count the oracle will enumerate.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv",
              show_default=True)
@click.option("--jobs", default=1, show_default=True, help="Hours solved in parallel.")
@click.option("--load-col", default="load", show_default=True)
@click.option("--wind-col", default="wind", show_default=True)
@click.option("--solar-col", default="solar", show_default=True)
@click.pass_context
def main(ctx, seed, tolerance, budget, fmt, jobs, load_col, wind_col, solar_col):
    """Stochastic distribution network reconfiguration."""
    ctx.ensure_object(dict)
    ctx.obj.update(seed=seed, tolerance=tolerance, budget=budget, fmt=fmt, jobs=max(1, jobs),
                   load_col=load_col, wind_col=wind_col, solar_col=solar_col)


@main.command()
@click.argument("case")
@click.option("--method", "methods", multiple=True, type=click.Choice(METHODS),
              help="Repeatable; default 'proposed'.")
@_scenario_options
@click.pass_context
def solve(ctx, case, methods, profiles, days, n_scenarios, k_r, fixed, hours, ohm, out, trace,
          long_path, no_timing):
    """Reconfigure CASE (bundled name or file) for each requested hour."""
    doc = _load_case(case, ohm)
    sconf = _sconf(ctx, profiles, days, n_scenarios, k_r, fixed)
    g = ctx.obj
    report = run_solve(doc, sconf, methods or ("proposed",), _parse_hours(hours), _solver(ctx),
                       g["budget"], g["jobs"])
    _finish(report, g["fmt"], out, trace, long_path, not no_timing)


@main.command()
@click.argument("case")
@_scenario_options
@click.pass_context
def oracle(ctx, case, profiles, days, n_scenarios, k_r, fixed, hours, ohm, out, trace,
           long_path, no_timing):
    """Exhaustive search over all radial configurations of CASE."""
    doc = _load_case(case, ohm)
    sconf = _sconf(ctx, profiles, days, n_scenarios, k_r, fixed)
    g = ctx.obj
    report = run_solve(doc, sconf, ("oracle",), _parse_hours(hours), _solver(ctx),
                       g["budget"], g["jobs"])
    _finish(report, g["fmt"], out, trace, long_path, not no_timing)


@main.command()
@click.argument("case")
@click.option("--axis", type=click.Choice(SWEEP_AXES), required=True)
@click.option("--values", required=True, help="Comma-separated grid, e.g. 0.5,1,2,3.")
@click.option("--method", "methods", multiple=True, type=click.Choice(METHODS),
              help="Repeatable; default all three.")
@_scenario_options
@click.pass_context
def sweep(ctx, case, axis, values, methods, profiles, days, n_scenarios, k_r, fixed, hours, ohm,
          out, trace, long_path, no_timing):
    """Repeat the hourly solve over penetration levels or scenario counts."""
    doc = _load_case(case, ohm)
    sconf = _sconf(ctx, profiles, days, n_scenarios, k_r, fixed)
    g = ctx.obj
    grid = _parse_values(values)
    try:
        report = run_sweep(doc, axis, grid, sconf, methods or METHODS, _parse_hours(hours),
                           _solver(ctx), g["budget"], g["jobs"])
    except ValueError as exc:
        raise _Input(str(exc)) from None
    _finish(report, g["fmt"], out, trace, long_path, not no_timing)


@main.command()
@click.option("--profiles", type=click.Path(exists=True, dir_okay=False))
@click.option("--days", default=91, show_default=True)
@click.option("--scenarios", "n_scenarios", default=5, show_default=True)
@click.option("--hour", type=int, default=None, help="Cluster only rows at this hour of day.")
@click.option("--export-profiles", type=click.Path(dir_okay=False),
              help="Write the input table in ingestion format and exit.")
@click.option("--out", type=click.Path(dir_okay=False))
@click.pass_context
def cluster(ctx, profiles, days, n_scenarios, hour, export_profiles, out):
    """Reduce hourly profiles to probability-weighted medoids."""
    g = ctx.obj
    table = _load_table(ctx, profiles) or synthetic_profiles(days, g["seed"])
    if export_profiles:
        _emit(csv_text(table), export_profiles)
        return
    if hour is not None:
        if not 0 <= hour < 24:
            raise _Input("--hour must lie in 0..23")
        table = table.at_hour(hour)
    if n_scenarios < 1 or n_scenarios > len(table):
        raise _Input(f"--scenarios must lie in 1..{len(table)}")
    f = reduce_kmedoids(table, n_scenarios, seed=g["seed"])
    if g["fmt"] == "json":
        doc = {"load": f.load.tolist(), "wind": f.wind.tolist(), "solar": f.solar.tolist(),
               "probability": f.probabilities.tolist(), "row": list(f.medoid_rows),
               "cost_history": list(f.cost_history)}
        _emit(json.dumps(doc, indent=2) + "\n", out)
        return
    lines = ["scenario,row,probability,load,wind,solar"]
    for k in range(len(f)):
        lines.append(f"{k},{f.medoid_rows[k]},{f.probabilities[k]:.12g},{f.load[k]:.9g},"
                     f"{f.wind[k]:.9g},{f.solar[k]:.9g}")
    _emit("\n".join(lines) + "\n", out)


@main.command()
@click.argument("case")
@click.option("--ohm", is_flag=True, help="MATPOWER import: impedances in ohms.")
@click.option("--convert", type=click.Path(dir_okay=False),
              help="Write the case in the native JSON format.")
def validate(case, ohm, convert):
    """Parse CASE and print a summary; exit 2 on any schema error."""
    doc = _load_case(case, ohm)
    net = doc.network
    click.echo(f"name: {net.name or '-'}")
    click.echo(f"format: {doc.source_format}")
    click.echo(f"buses: {len(net.buses)}")
    click.echo(f"branches: {len(net.branches)}")
    click.echo(f"substation: {net.substation}")
    click.echo("ties: " + " ".join(f"{a}-{b}" for a, b in doc.tie_ends()))
    click.echo(f"loops when all closed: {net.n_loops}")
    click.echo(f"initial configuration radial: {is_radial(net, doc.initial)}")
    click.echo(f"spanning trees: {count_spanning_trees(net)}")
    missing = [b for b in net.bus_ids if b != net.substation and b not in doc.profiles]
    if missing:
        click.echo(f"buses without profile: {' '.join(map(str, missing))}")
    if convert:
        casefile.write_case(doc, convert)


if __name__ == "__main__":
    main()
