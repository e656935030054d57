"""CSV output in a locale-free format with 17 significant digits, and the readers for it."""
import csv
import io
import logging
from pathlib import Path

import numpy as np

from closure import EquationOfState
from errors import ValidationError
from grid import Grid
from solver import ConservedField, Snapshot

logger = logging.getLogger(__name__)

AXES = ('x', 'y')


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return '%.17g' % value
    return str(value)


def render_csv(header: list, rows) -> str:
    output = io.StringIO()
    writer = csv.writer(output, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return output.getvalue()


def write_csv(path, header: list, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_csv(header, rows), encoding='utf-8')
    logger.info("wrote %s", path)
    return path


def read_csv(path) -> tuple:
    """(header, rows) with every row as a list of strings."""
    path = Path(path)
    try:
        content = path.read_text(encoding='utf-8')
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror or exc}")
    reader = csv.reader(io.StringIO(content))
    header = next(reader, None)
    if not header:
        raise ValidationError(f"{path} is empty or has no header")
    return header, [row for row in reader if row]


# ── Snapshots ───────────────────────────────────────────────────────────────

def snapshot_header(grid: Grid) -> list:
    axes = list(AXES[:grid.ndim])
    return ['t'] + axes + ['R', 'Q'] + [f"m{a}" for a in axes] + ['p', 'Z']


def snapshot_rows(snapshots: list, eos: EquationOfState):
    for snap in snapshots:
        field = snap.field
        state = eos.evaluate(field.R, field.Q)
        Z = state.Z if state.Z is not None else np.full(field.grid.shape, np.nan)
        columns = ([c.ravel() for c in field.grid.centers()]
                   + [field.R.ravel(), field.Q.ravel()]
                   + [component.ravel() for component in field.m]
                   + [state.p.ravel(), Z.ravel()])
        for values in zip(*columns):
            yield (snap.t,) + values


def write_snapshots(path, snapshots: list, eos: EquationOfState) -> Path:
    return write_csv(path, snapshot_header(snapshots[0].field.grid), snapshot_rows(snapshots, eos))


def read_snapshots(path, grid: Grid) -> list:
    """Rebuild the snapshots written by :func:`write_snapshots` on ``grid``."""
    header, rows = read_csv(path)
    expected = snapshot_header(grid)
    if header != expected:
        raise ValidationError(f"{path}: header {','.join(header)} does not match the grid, "
                              f"expected {','.join(expected)}")
    if len(rows) % grid.n_cells:
        raise ValidationError(f"{path}: {len(rows)} rows is not a whole number of {grid.n_cells}-cell snapshots")

    try:
        data = np.array(rows, dtype=float)
    except ValueError:
        raise ValidationError(f"{path}: non-numeric entries")
    d = grid.ndim
    centers = np.stack([c.ravel() for c in grid.centers()], axis=1)
    scale = max(abs(v) for v in grid.lower + grid.upper) or 1.0

    snapshots = []
    for index, block in enumerate(np.split(data, len(rows) // grid.n_cells)):
        t = block[0, 0]
        if np.any(block[:, 0] != t):
            raise ValidationError(f"{path}: snapshot {index} mixes several times")
        if np.max(np.abs(block[:, 1:1 + d] - centers)) > 1e-9 * scale:
            raise ValidationError(f"{path}: snapshot {index} cell centres do not match the grid")
        R = block[:, 1 + d].reshape(grid.shape)
        Q = block[:, 2 + d].reshape(grid.shape)
        m = np.array([block[:, 3 + d + a].reshape(grid.shape) for a in range(d)])
        snapshots.append(Snapshot(index, float(t), ConservedField(grid, R, Q, m)))
    return snapshots


# ── Traces ──────────────────────────────────────────────────────────────────

TRACE_HEADER = ['step', 't', 'dt', 'mass_R', 'mass_Q', 'energy']
ENERGY_HEADER = ['t', 'kinetic', 'internal_plus', 'internal_minus', 'total']


def write_trace(path, trace: list) -> Path:
    return write_csv(path, TRACE_HEADER,
                     ((r.step, r.t, r.dt, r.mass_R, r.mass_Q, r.energy) for r in trace))


def write_energy(path, rows: list) -> Path:
    return write_csv(path, ENERGY_HEADER,
                     ((r.t, r.kinetic, r.internal_plus, r.internal_minus, r.total) for r in rows))
