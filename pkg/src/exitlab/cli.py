"""Command-line interface: ``exitlab <subcommand> [options]``.

Every experiment subcommand reads a configuration (``--config FILE`` or
``--preset NAME``, default ``stable-1d``), runs the matching steps, writes
its results into ``--out`` and exits with 0 iff no verdict failed.
"""

from __future__ import annotations

import sys
from functools import wraps

import click

from .config import CONDITIONS, ConfigError, list_presets, load_config, load_preset
from .profiles import DomainError
from .runner import PLOT_KINDS, emit_plot_data, run, run_manifest

__all__ = ["main"]


def _load(config, preset, seed, paths):
    cfg = load_config(config) if config else load_preset(preset or "stable-1d")
    return cfg.with_overrides(seed=seed, paths=paths)


def _common(f):
    @click.option("--config", "config", type=click.Path(exists=True, dir_okay=False),
                  help="TOML configuration file.")
    @click.option("--preset", default=None, help=f"Bundled configuration ({', '.join(list_presets())}).")
    @click.option("--seed", type=int, default=None, help="Override the master seed.")
    @click.option("--out", "out", type=click.Path(file_okay=False), default="exitlab-out",
                  show_default=True, help="Output directory.")
    @click.option("--paths", type=click.IntRange(min=1), default=None,
                  help="Override every path count.")
    @click.option("--quiet", is_flag=True, help="Print nothing but errors.")
    @wraps(f)
    def inner(*args, **kwargs):
        return f(*args, **kwargs)
    return inner


def _execute(steps, config, preset, seed, out, paths, quiet, mutate=None):
    try:
        cfg = _load(config, preset, seed, paths)
        if mutate is not None:
            cfg = mutate(cfg)
        man = run(cfg, out, steps=steps, log=None if quiet else click.echo)
    except (ConfigError, DomainError, OSError) as exc:
        raise click.ClickException(str(exc)) from exc
    if not quiet:
        failed = [k for k, v in man.verdicts.items() if v == "fail"]
        click.echo(f"results in {out}; " + (f"failed: {', '.join(failed)}" if failed else "no failures"))
    sys.exit(man.exit_code)


@click.group()
@click.version_option(package_name="exitlab")
def main():
    """Exit measures, harmonic functions and Hoelder constants of pure-jump processes."""


@main.command()
@_common
def derive(config, preset, seed, out, paths, quiet):
    """Derive the constant ledger and print it."""
    try:
        cfg = _load(config, preset, seed, paths)
        run(cfg, out, steps=["derive"])
    except (ConfigError, DomainError, ArithmeticError) as exc:
        raise click.ClickException(str(exc)) from exc
    if not quiet:
        click.echo(cfg.ledger().table())


@main.command("check-l")
@_common
def check_l(config, preset, seed, out, paths, quiet):
    """Check (L1)-(L3), the doubling bound and the K0 integral on a radius grid."""
    _execute(["check-L"], config, preset, seed, out, paths, quiet)


@main.command()
@_common
def simulate(config, preset, seed, out, paths, quiet):
    """Simulate exits from the configured ball and test the mean exit time bounds."""
    _execute(["derive", "simulate"], config, preset, seed, out, paths, quiet)


@main.command("exit-measure")
@_common
def exit_measure(config, preset, seed, out, paths, quiet):
    """Estimate the exit measure and check the two-stage composition."""
    _execute(["derive", "exit"], config, preset, seed, out, paths, quiet)


@main.command()
@_common
@click.option("--conditions", "which", default=",".join(CONDITIONS), show_default=True,
              help="Comma-separated subset of J0,J1,J2,HI.")
def conditions(config, preset, seed, out, paths, quiet, which):
    """Monte Carlo checks of the regularity conditions."""
    chosen = [w.strip() for w in which.split(",") if w.strip()]

    def mutate(cfg):
        data = dict(cfg.data)
        data["conditions"] = {**data["conditions"], "which": chosen}
        return type(cfg).from_dict(data, cfg.source)

    _execute(["derive", "conditions"], config, preset, seed, out, paths, quiet, mutate)


@main.command()
@_common
def holder(config, preset, seed, out, paths, quiet):
    """Measure |h(x) - h(x0)| against the Hoelder bound and fit the exponent."""
    _execute(["derive", "holder"], config, preset, seed, out, paths, quiet)


@main.command()
@_common
def oscillation(config, preset, seed, out, paths, quiet):
    """Oscillation of the harmonic function over the nested balls."""
    _execute(["derive", "oscillation"], config, preset, seed, out, paths, quiet)


@main.command("plot-data")
@click.argument("result_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--kind", type=click.Choice(PLOT_KINDS), required=True)
@click.option("--out", "out", type=click.Path(file_okay=False), default=None,
              help="Where to write the data files (default: the result directory).")
@click.option("--quiet", is_flag=True)
def plot_data(result_dir, kind, out, quiet):
    """Write plain-text plot data for a finished result."""
    try:
        files = emit_plot_data(result_dir, kind, out)
    except FileNotFoundError as exc:
        raise click.ClickException(str(exc)) from exc
    if not quiet:
        for f in files:
            click.echo(str(f))


@main.command("run")
@_common
@click.option("--manifest", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Rerun the configuration and steps recorded in a manifest.")
def run_cmd(config, preset, seed, out, paths, quiet, manifest):
    """Run every step of the plan (or of a manifest)."""
    if manifest is None:
        _execute(None, config, preset, seed, out, paths, quiet)
        return
    try:
        man = run_manifest(manifest, out, log=None if quiet else click.echo)
    except (ConfigError, DomainError, OSError) as exc:
        raise click.ClickException(str(exc)) from exc
    sys.exit(man.exit_code)


if __name__ == "__main__":  # pragma: no cover
    main()
