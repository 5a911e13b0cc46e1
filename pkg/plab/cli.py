"""Command-line entry point: run scenarios, inspect field snapshots, emit plot data."""
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click

from .errors import PlabError


def _run_one(path: str):
    """Worker for one scenario; errors come back as text so they survive pickling."""
    from . import create_lab

    try:
        reports = create_lab().run_scenario(path)
    except PlabError as exc:
        return path, [], f"{type(exc).__name__}: {exc}"
    return path, [(r.key, dict(r.pass_flags), dict(r.fitted_constants)) for r in reports], None


def _split_params(text: str, count: int, what: str) -> list[float]:
    from .services.norms import parse_exponent

    parts = [p for p in text.split(",") if p.strip()]
    if len(parts) != count:
        raise click.BadParameter(f"{what} expects {count} comma-separated values, got {text!r}")
    try:
        return [parse_exponent(p) for p in parts]
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from exc


@click.group()
def main():
    """Littlewood-Paley, Besov/Lorentz and axisymmetric Euler verification lab."""


@main.command()
@click.argument("scenarios", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--jobs", default=1, show_default=True, help="Scenarios run in parallel processes.")
def run(scenarios, jobs: int):
    """Run one or more scenario files. Exit code 0 iff every pass flag is true."""
    if jobs > 1 and len(scenarios) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, scenarios))
    else:
        results = [_run_one(s) for s in scenarios]

    errors, failed = [], False
    for path, reports, error in results:
        click.echo(f"== {path}")
        if error:
            errors.append(f"{path}: {error}")
            click.echo(f"   error: {error}")
            continue
        if not reports:
            click.echo("   no experiments")
        for key, flags, constants in reports:
            ok = all(flags.values())
            failed = failed or not ok
            bad = [k for k, v in flags.items() if not v]
            click.echo(f"   {key}: {'PASS' if ok else 'FAIL ' + ', '.join(bad)}")
            for name, value in constants.items():
                click.echo(f"      {name} = {value:.6g}")
    if errors:
        raise click.ClickException("; ".join(errors))
    if failed:
        raise SystemExit(2)


@main.command()
@click.argument("field", type=click.Path(exists=True, dir_okay=False))
@click.option("--besov", "besov", multiple=True, help="s,p,r (p and r accept inf).")
@click.option("--lorentz", "lorentz", multiple=True, help="p,q (accept inf).")
@click.option("--lp", "lebesgue", multiple=True, help="p (accepts inf).")
def norms(field, besov, lorentz, lebesgue):
    """Print norms of a binary field snapshot as CSV."""
    from .models import BesovParams, LorentzParams
    from .services import norms as nm
    from .utils.snapshots import read_field

    try:
        f = read_field(field)
        name = Path(field).stem
        click.echo("field_id,norm_name,params,value")
        for text in lebesgue:
            (p,) = _split_params(text, 1, "--lp")
            click.echo(f"{name},lebesgue,{text},{nm.lebesgue_norm(f, p):.17g}")
        for text in lorentz:
            p, q = _split_params(text, 2, "--lorentz")
            click.echo(f"{name},lorentz,{text},{nm.lorentz_norm(f, LorentzParams(p, q)):.17g}")
        for text in besov:
            s, p, r = _split_params(text, 3, "--besov")
            click.echo(f"{name},besov,{text},{nm.besov_norm(f, BesovParams(s, p, r)):.17g}")
    except PlabError as exc:
        raise click.ClickException(str(exc)) from exc


@main.command()
@click.argument("field", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out", required=True, type=click.Path(file_okay=False), help="Directory for the blocks.")
@click.option("--homogeneous", is_flag=True, help="Homogeneous blocks (zero-mean fields only).")
def decompose(field, out, homogeneous: bool):
    """Split a field snapshot into its dyadic blocks."""
    import pandas as pd

    from .services import norms as nm
    from .services import spectral_core as sc
    from .utils.snapshots import read_field, write_field

    try:
        f = read_field(field)
        dec = sc.decompose(f, homogeneous=homogeneous)
        out = Path(out)
        rows = []
        for q, block in dec.blocks.items():
            write_field(out / f"block_{q}.field", block)
            rows.append({"q": q, "sup": block.max_abs(), "l2": nm.lebesgue_norm(block, 2)})
        pd.DataFrame(rows).to_csv(out / "blocks.csv", index=False, float_format="%.17g")
    except PlabError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"{len(dec.blocks)} blocks q={dec.q_min}..{dec.q_max} written to {out}; residual {dec.residual:.3e}")


@main.command()
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False))
def plots(run_dir):
    """Emit per-channel plot data and a plotting script for a run directory."""
    from .evaluation.emit_plots import emit_plots

    try:
        result = emit_plots(run_dir)
    except PlabError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"{len(result.data_files)} data files, script {result.script}")
    if result.missing:
        click.echo(f"missing channels: {', '.join(result.missing)}")


@main.command()
@click.argument("directory", required=False, type=click.Path(file_okay=False))
@click.option("--force", is_flag=True, help="Overwrite existing scenario files.")
def init(directory, force: bool):
    """Write the default scenario files."""
    from . import create_lab
    from .schemas import write_default_scenarios

    directory = directory or create_lab().config["SCENARIO_DIR"]
    written = write_default_scenarios(directory, force=force)
    click.echo(f"{len(written)} scenario files written to {directory}")


@main.command(name="list")
def list_experiments():
    """List registered experiments with their acceptance criteria."""
    from . import create_lab

    lab = create_lab()
    for key, exp in lab.experiments.items():
        click.echo(f"{key} [{exp.group}] {exp.description}")
        click.echo(f"    criteria: {', '.join(exp.criteria)}")


if __name__ == "__main__":
    main()
