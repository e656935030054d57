import click
import numpy as np

from command_helpers import common_options, load_run_config, output_dir
from csv_io import write_csv
from errors import ValidationError
from symmetric_form import symmetry_audit

SPEED_TOL = 1e-10

HEADER = ['R', 'Q', 'ux', 'uy', 'uz', 'nx', 'ny', 'nz', 'dp_drho',
          'max_asymmetry', 'min_eig_A0', 'speed_defect', 'rational_dp_drho']


def random_states(rng: np.random.Generator, samples: int) -> tuple:
    """Log-uniform densities in [1e-2, 1e2], normal velocities, uniform unit directions."""
    R = 10.0 ** rng.uniform(-2.0, 2.0, samples)
    Q = 10.0 ** rng.uniform(-2.0, 2.0, samples)
    u = rng.normal(size=(samples, 3))
    n = rng.normal(size=(samples, 3))
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    return R, Q, u, n


@click.command('symmetry-check')
@common_options()
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--samples', type=click.IntRange(min=1), default=1000, show_default=True)
def symmetry_check_cmd(config_path, out_dir, quiet, seed, samples):
    """Audit the symmetric form on random states of the scenario's pressure law."""
    config = load_run_config(config_path, quiet)
    R, Q, u, n = random_states(np.random.default_rng(seed), samples)
    rows = symmetry_audit(R, Q, u, n, config.eos)

    path = write_csv(output_dir(config, out_dir) / 'symmetry.csv', HEADER, (
        (r.R, r.Q, *r.u, *r.n, r.dp_drho, r.max_asymmetry, r.min_eig_A0, r.speed_defect, r.rational_dp_drho)
        for r in rows))

    failures = []
    for i, r in enumerate(rows):
        scale = max(1.0, abs(float(np.dot(r.u, r.n))) + float(np.sqrt(r.dp_drho)))
        if r.max_asymmetry != 0 or r.min_eig_A0 <= 0 or r.speed_defect > SPEED_TOL * scale:
            failures.append(f"sample {i} (R={r.R:.6g}, Q={r.Q:.6g}): asymmetry {r.max_asymmetry:.3e}, "
                            f"min eig A0 {r.min_eig_A0:.3e}, speed defect {r.speed_defect:.3e}")
    click.echo(f"{len(rows)} states audited, {len(failures)} failure(s); written to {path}")
    if failures:
        raise ValidationError(f"{len(failures)} symmetry audit failure(s)", messages=failures)
