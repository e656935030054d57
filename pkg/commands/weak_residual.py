import click

from command_helpers import common_options, load_run_config, output_dir
from csv_io import read_snapshots, write_csv
from solver import default_test_functions, run, weak_residual


@click.command('weak-residual')
@common_options()
@click.option('--snapshots', 'snapshots_path', type=click.Path(exists=True, dir_okay=False),
              help='snapshots.csv from an earlier riemann run; the scenario is run otherwise.')
def weak_residual_cmd(config_path, out_dir, quiet, snapshots_path):
    """Residuals of the weak continuity and momentum identities on a saved trace."""
    config = load_run_config(config_path, quiet)
    if snapshots_path:
        snapshots = read_snapshots(snapshots_path, config.grid)
    else:
        snapshots = run(config.initial_field(), config.solver).snapshots

    test_functions = default_test_functions(config.grid, snapshots[-1].t, config.solver.bc)
    residuals = weak_residual(snapshots, test_functions, config.eos)

    path = write_csv(output_dir(config, out_dir) / 'weak_residual.csv', ['test_function', 'identity', 'residual'],
                     ((r.test_function, r.identity, r.value) for r in residuals))
    worst = max(abs(r.value) for r in residuals)
    click.echo(f"{len(residuals)} residuals written to {path}; largest |residual| {worst:.3e}")
