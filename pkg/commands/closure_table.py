import click
import numpy as np

from command_helpers import common_options, load_run_config, output_dir
from csv_io import write_csv


@click.command('closure-table')
@common_options()
@click.option('--n', 'n', type=click.IntRange(min=1), default=11, show_default=True,
              help='Samples per density axis.')
@click.option('--r-max', type=click.FloatRange(min=0, min_open=True), default=10.0, show_default=True)
@click.option('--q-max', type=click.FloatRange(min=0, min_open=True), default=10.0, show_default=True)
def closure_table_cmd(config_path, out_dir, quiet, n, r_max, q_max):
    """Tabulate Z, p and the sound speed over a grid of (R, Q)."""
    config = load_run_config(config_path, quiet)
    eos = config.eos

    R, Q = np.meshgrid(r_max * np.arange(1, n + 1) / n, q_max * np.arange(1, n + 1) / n, indexing='ij')
    R, Q = R.ravel(), Q.ravel()
    state = eos.evaluate(R, Q)
    Z = state.Z if state.Z is not None else np.full(R.shape, np.nan)
    c = np.sqrt(state.sound_speed_squared)

    path = write_csv(output_dir(config, out_dir) / 'closure_table.csv', ['R', 'Q', 'Z', 'p', 'c'],
                     zip(R, Q, Z, state.p, c))
    click.echo(f"{len(R)} states of {eos.describe()} written to {path}")
