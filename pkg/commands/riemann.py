import click

from command_helpers import common_options, load_run_config, output_dir
from csv_io import write_snapshots, write_trace
from solver import run


@click.command('riemann')
@common_options()
def riemann_cmd(config_path, out_dir, quiet):
    """Run the solver on the scenario's piecewise-constant data."""
    config = load_run_config(config_path, quiet)
    result = run(config.initial_field(), config.solver)

    target = output_dir(config, out_dir)
    write_snapshots(target / 'snapshots.csv', result.snapshots, config.eos)
    write_trace(target / 'trace.csv', result.trace)

    last = result.trace[-1]
    click.echo(f"{config.name}: {last.step} steps to t={last.t:.6g}, "
               f"{len(result.snapshots)} snapshots, max courant {result.max_courant:.4f}")
