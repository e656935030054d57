import click
import numpy as np

from command_helpers import common_options, load_run_config, output_dir
from csv_io import AXES, write_csv
from errors import ValidationError
from solver import run
from subsolution import DEFAULT_MARGIN, fields_from_run, gap_field, min_lambda


@click.command('subsolution-check')
@common_options()
@click.option('--margin', type=click.FloatRange(min=0), default=DEFAULT_MARGIN, show_default=True,
              help='Relative inflation of the selected Lambda.')
def subsolution_check_cmd(config_path, out_dir, quiet, margin):
    """Select Lambda for the scenario's run and report the U = 0 gap per cell.

    Each row holds the worst gap over all snapshots at that cell, the
    largest Lambda the cell needs and e at the worst snapshot.
    """
    config = load_run_config(config_path, quiet)
    if config.eos.kind != 'two_fluid':
        raise ValidationError(f"subsolution checks need the two_fluid law, not {config.eos.kind}")
    if config.solver.snapshot_dt is None:
        raise ValidationError("subsolution-check needs [solver] snapshot_dt for uniformly spaced snapshots")

    result = run(config.initial_field(), config.solver)
    fields = fields_from_run(result)
    params = config.eos.two_fluid
    Lambda = min_lambda(*fields.space_time(), params, margin=margin)
    report = gap_field(*fields.space_time(), params, Lambda)

    worst = np.argmin(report.gap, axis=0)
    gap = np.take_along_axis(report.gap, worst[None], axis=0)[0]
    e = np.take_along_axis(report.e, worst[None], axis=0)[0]
    needed = np.max(report.lambda_needed, axis=0)

    grid = config.grid
    header = list(AXES[:grid.ndim]) + ['gap', 'lambda_needed', 'e']
    columns = [c.ravel() for c in grid.centers()] + [gap.ravel(), needed.ravel(), e.ravel()]
    path = write_csv(output_dir(config, out_dir) / 'subsolution.csv', header, zip(*columns))

    click.echo(f"Lambda = {Lambda:.17g}; minimum gap {float(np.min(gap)):.6g}; report written to {path}")
    if margin > 0 and not np.all(gap > 0):
        raise ValidationError(f"gap is not positive at {int(np.sum(gap <= 0))} cell(s) after selecting Lambda")
