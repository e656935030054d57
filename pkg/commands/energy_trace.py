import click

from command_helpers import common_options, load_run_config, output_dir
from csv_io import read_snapshots, write_energy
from energy import energy_trace
from errors import ValidationError
from solver import run


@click.command('energy-trace')
@common_options()
@click.option('--snapshots', 'snapshots_path', type=click.Path(exists=True, dir_okay=False),
              help='snapshots.csv from an earlier riemann run; the scenario is run otherwise.')
def energy_trace_cmd(config_path, out_dir, quiet, snapshots_path):
    """Energy breakdown of every snapshot; fails when the total grows."""
    config = load_run_config(config_path, quiet)
    if config.eos.kind != 'two_fluid':
        raise ValidationError(f"energy is defined for the two_fluid law only, not {config.eos.kind}")

    if snapshots_path:
        snapshots = read_snapshots(snapshots_path, config.grid)
    else:
        snapshots = run(config.initial_field(), config.solver).snapshots

    trace = energy_trace(snapshots, config.eos.two_fluid)
    path = write_energy(output_dir(config, out_dir) / 'energy.csv', trace.rows)

    first, last = trace.rows[0].total, trace.rows[-1].total
    click.echo(f"{len(trace.rows)} snapshots written to {path}; total energy {first:.10g} -> {last:.10g}")
    if not trace.monotone:
        raise ValidationError(f"total energy increased at {len(trace.increases)} snapshot(s)")
