"""Options and small helpers shared by the subcommands."""
import logging
import sys
from pathlib import Path

import click

from run_config import RunConfig, load_config

LOG_FORMAT = '[%(name)s] %(message)s'


def configure_logging(quiet: bool) -> None:
    logging.basicConfig(format=LOG_FORMAT, level=logging.WARNING if quiet else logging.INFO,
                        stream=sys.stderr, force=True)


def common_options(config_required: bool = True):
    """--config, --out and --quiet, taken by every subcommand."""
    def decorate(func):
        func = click.option('--quiet', is_flag=True, help='Only log warnings and errors.')(func)
        func = click.option('--out', 'out_dir', type=click.Path(file_okay=False),
                            help='Output directory (overrides [output] dir).')(func)
        func = click.option('--config', 'config_path', type=click.Path(dir_okay=False),
                            required=config_required, help='Scenario file.')(func)
        return func
    return decorate


def load_run_config(config_path, quiet: bool) -> RunConfig | None:
    configure_logging(quiet)
    if config_path is None:
        return None
    return load_config(config_path)


def output_dir(config: RunConfig | None, out_dir) -> Path:
    if out_dir:
        return Path(out_dir)
    if config is not None:
        return Path(config.output_dir)
    return Path('out')
