"""Command-line entry point: ``python cli.py <command> --config scenario.ini``.

Exit codes: 0 success, 1 invalid input or failed check, 2 numerical abort.
"""
import click

from errors import NumericalAbort, ValidationError

EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2


class TwoFluidGroup(click.Group):
    """Maps toolkit exceptions onto exit codes."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except ValidationError as exc:
            for message in exc.messages:
                click.echo(f"error: {message}", err=True)
            ctx.exit(EXIT_VALIDATION)
        except NumericalAbort as exc:
            click.echo(f"numerical abort: {exc}", err=True)
            ctx.exit(EXIT_NUMERICAL)


@click.group(cls=TwoFluidGroup)
def cli():
    """Closure, solver and verification tools for the compressible two-fluid model."""


# Register commands
from commands.closure_table import closure_table_cmd
from commands.riemann import riemann_cmd
from commands.energy_trace import energy_trace_cmd
from commands.helmholtz_test import helmholtz_test_cmd
from commands.subsolution_check import subsolution_check_cmd
from commands.symmetry_check import symmetry_check_cmd
from commands.weak_residual import weak_residual_cmd

cli.add_command(closure_table_cmd)
cli.add_command(riemann_cmd)
cli.add_command(energy_trace_cmd)
cli.add_command(helmholtz_test_cmd)
cli.add_command(subsolution_check_cmd)
cli.add_command(symmetry_check_cmd)
cli.add_command(weak_residual_cmd)


if __name__ == '__main__':
    cli()
