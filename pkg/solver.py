"""Finite-volume integration of the two-fluid system on 1D/2D box grids.

Conserved variables per cell are (R, Q, m) with m = (R + Q) u. The scheme
is first-order Rusanov (local Lax-Friedrichs) with forward Euler in time,
dimensionally split in 2D. Walls are impermeable (reflecting ghosts) or
the box is periodic.
"""
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from closure import EquationOfState, PressureState
from errors import NumericalAbort, ValidationError
from grid import Grid

logger = logging.getLogger(__name__)


def _threads_from_env() -> int:
    raw = os.environ.get('TWOFLUID_THREADS', '1')
    try:
        return max(1, int(raw))
    except ValueError:
        logger.warning("ignoring TWOFLUID_THREADS=%r, expected an integer", raw)
        return 1


TWOFLUID_THREADS = _threads_from_env()

# Cells at or below this density count as vacuum and abort the run
VACUUM_FLOOR = 1e-12

# Below this many cells one thread evaluates the closure faster than a pool
_PARALLEL_MIN_CELLS = 8192

FLUXES = ('rusanov',)
BOUNDARY_CONDITIONS = ('reflecting', 'periodic')


# ── Fields ──────────────────────────────────────────────────────────────────

@dataclass
class ConservedField:
    """Cell averages of R, Q and the momentum m (one component per grid axis)."""
    grid: Grid
    R: np.ndarray
    Q: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        self.R = np.asarray(self.R, dtype=float)
        self.Q = np.asarray(self.Q, dtype=float)
        self.m = np.asarray(self.m, dtype=float)
        self.grid.check_shape(self.R, 'R')
        self.grid.check_shape(self.Q, 'Q')
        self.grid.check_shape(self.m, 'm', leading=(self.grid.ndim,))

    @property
    def rho(self) -> np.ndarray:
        return self.R + self.Q

    def velocity(self) -> np.ndarray:
        return self.m / self.rho

    def mass_R(self) -> float:
        return float(np.sum(self.R)) * self.grid.cell_volume

    def mass_Q(self) -> float:
        return float(np.sum(self.Q)) * self.grid.cell_volume

    def copy(self) -> 'ConservedField':
        return ConservedField(self.grid, self.R.copy(), self.Q.copy(), self.m.copy())


@dataclass(frozen=True)
class SolverConfig:
    eos: EquationOfState
    t_end: float
    cfl: float = 0.9
    flux: str = 'rusanov'
    bc: str = 'reflecting'
    stride: int = 1
    snapshot_dt: float | None = None
    max_steps: int = 1_000_000

    def __post_init__(self):
        if not (0 < self.cfl <= 1):
            raise ValidationError(f"cfl must lie in (0, 1] (got {self.cfl})")
        if not (math.isfinite(self.t_end) and self.t_end > 0):
            raise ValidationError(f"t_end must be positive (got {self.t_end})")
        if self.flux not in FLUXES:
            raise ValidationError(f"flux must be one of {', '.join(FLUXES)} (got {self.flux})")
        if self.bc not in BOUNDARY_CONDITIONS:
            raise ValidationError(f"bc must be one of {', '.join(BOUNDARY_CONDITIONS)} (got {self.bc})")
        if self.stride < 1:
            raise ValidationError(f"stride must be at least 1 (got {self.stride})")
        if self.max_steps < 1:
            raise ValidationError(f"max_steps must be at least 1 (got {self.max_steps})")
        if self.snapshot_dt is not None:
            if not (self.snapshot_dt > 0):
                raise ValidationError(f"snapshot_dt must be positive (got {self.snapshot_dt})")
            count = self.t_end / self.snapshot_dt
            if abs(count - round(count)) > 1e-9 * max(1.0, count):
                raise ValidationError("snapshot_dt must divide t_end into a whole number of intervals")

    @property
    def snapshot_count(self) -> int | None:
        if self.snapshot_dt is None:
            return None
        return int(round(self.t_end / self.snapshot_dt))


# ── Piecewise-constant initial data ─────────────────────────────────────────

@dataclass(frozen=True)
class Patch:
    """Axis-aligned box [lower, upper) carrying constant R, Q and velocity u."""
    name: str
    lower: tuple
    upper: tuple
    R: float
    Q: float
    u: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise ValidationError(f"{self.name}: lower and upper bounds differ in length")
        if any(hi <= lo for lo, hi in zip(self.lower, self.upper)):
            raise ValidationError(f"{self.name}: empty box {self.lower} .. {self.upper}")
        if not (math.isfinite(self.R) and math.isfinite(self.Q) and self.R > 0 and self.Q > 0):
            raise ValidationError(f"{self.name}: R and Q must be finite and strictly positive")
        if len(self.u) != 3 or not all(math.isfinite(c) for c in self.u):
            raise ValidationError(f"{self.name}: velocity must have 3 finite components")

    def contains(self, coords: tuple) -> np.ndarray:
        inside = np.ones(np.shape(coords[0]), dtype=bool)
        for x, lo, hi in zip(coords, self.lower, self.upper):
            inside &= (x >= lo) & (x < hi)
        return inside

    def overlap_volume(self, lower: tuple, upper: tuple) -> float:
        volume = 1.0
        for lo, hi, a, b in zip(self.lower, self.upper, lower, upper):
            volume *= max(0.0, min(hi, b) - max(lo, a))
        return volume


@dataclass(frozen=True)
class PiecewiseConstantIC:
    patches: tuple

    def __post_init__(self):
        if not self.patches:
            raise ValidationError("initial data needs at least one patch")
        for i, a in enumerate(self.patches):
            for b in self.patches[i + 1:]:
                if a.overlap_volume(b.lower, b.upper) > 0:
                    raise ValidationError(f"patches {a.name} and {b.name} overlap")

    def check_covers(self, grid: Grid) -> None:
        covered = sum(p.overlap_volume(grid.lower, grid.upper) for p in self.patches)
        if abs(covered - grid.domain_volume) > 1e-9 * grid.domain_volume:
            raise ValidationError(
                f"patches do not cover the domain (covered volume {covered:.6g} of {grid.domain_volume:.6g})")


def make_piecewise_ic(spec: PiecewiseConstantIC, grid: Grid) -> ConservedField:
    """Each cell takes the values of the patch containing its centre."""
    centers = grid.centers()
    R = np.full(grid.shape, np.nan)
    Q = np.full(grid.shape, np.nan)
    m = np.zeros((grid.ndim,) + grid.shape)

    for patch in spec.patches:
        if len(patch.lower) != grid.ndim:
            raise ValidationError(f"{patch.name} is {len(patch.lower)}D but the grid is {grid.ndim}D")
        if any(abs(c) > 0 for c in patch.u[grid.ndim:]):
            raise ValidationError(f"{patch.name}: out-of-plane velocity cannot be carried on a {grid.ndim}D grid")
        mask = patch.contains(centers)
        R[mask] = patch.R
        Q[mask] = patch.Q
        for a in range(grid.ndim):
            m[a][mask] = (patch.R + patch.Q) * patch.u[a]

    missing = np.isnan(R)
    if np.any(missing):
        first = tuple(float(c[missing][0]) for c in centers)
        raise ValidationError(f"{int(missing.sum())} cell centres are not covered by any patch, first at {first}")
    return ConservedField(grid, R, Q, m)


# ── Fluxes and boundary conditions ──────────────────────────────────────────

def _evaluate(eos: EquationOfState, R: np.ndarray, Q: np.ndarray) -> PressureState:
    """EOS evaluation, chunked over TWOFLUID_THREADS workers for large fields."""
    if TWOFLUID_THREADS <= 1 or R.size < _PARALLEL_MIN_CELLS:
        return eos.evaluate(R, Q)

    chunks = np.array_split(np.arange(R.size), TWOFLUID_THREADS)
    flat_R, flat_Q = R.ravel(), Q.ravel()
    with ThreadPoolExecutor(max_workers=TWOFLUID_THREADS) as pool:
        parts = list(pool.map(lambda idx: eos.evaluate(flat_R[idx], flat_Q[idx]), chunks))

    def join(name):
        if getattr(parts[0], name) is None:
            return None
        return np.concatenate([getattr(part, name) for part in parts]).reshape(R.shape)

    return PressureState(join('p'), join('sound_speed_squared'), join('Z'))


def physical_flux(R, Q, m, n, eos: EquationOfState, pressure=None) -> tuple:
    """(R u.n, Q u.n, m (u.n) + p n) with u = m / (R + Q).

    ``m`` carries its components on the leading axis and ``n`` has one
    entry per component. ``pressure`` skips the EOS call when known.
    """
    R = np.asarray(R, dtype=float)
    Q = np.asarray(Q, dtype=float)
    m = np.asarray(m, dtype=float)
    n = np.asarray(n, dtype=float)
    if n.shape != (m.shape[0],):
        raise ValidationError(f"normal has {n.size} components, momentum has {m.shape[0]}")
    if np.any(R <= 0) or np.any(Q <= 0):
        raise ValidationError("flux evaluated at a vacuum cell")

    p = eos.pressure(R, Q) if pressure is None else pressure
    un = np.tensordot(n, m, axes=1) / (R + Q)
    normal = n.reshape((-1,) + (1,) * R.ndim)
    return R * un, Q * un, m * un + p * normal


def _pad(array: np.ndarray, axis: int, bc: str) -> np.ndarray:
    widths = [(0, 0)] * array.ndim
    widths[axis] = (1, 1)
    return np.pad(array, widths, mode='wrap' if bc == 'periodic' else 'symmetric')


def _ghost_slices(ndim: int, axis: int) -> tuple:
    first = [slice(None)] * ndim
    last = [slice(None)] * ndim
    first[axis] = 0
    last[axis] = -1
    return tuple(first), tuple(last)


def apply_reflecting_bc(field: ConservedField, axis: int = 0) -> tuple:
    """(R, Q, m) with one mirrored ghost layer on each side of ``axis``.

    Ghosts copy R, Q and the tangential momentum of the adjacent interior
    cell and negate the normal momentum, so no mass crosses the wall.
    """
    R = _pad(field.R, axis, 'reflecting')
    Q = _pad(field.Q, axis, 'reflecting')
    m = _pad(field.m, axis + 1, 'reflecting')
    for ghost in _ghost_slices(field.grid.ndim, axis):
        m[axis][ghost] *= -1.0
    return R, Q, m


def apply_periodic_bc(field: ConservedField, axis: int = 0) -> tuple:
    return (_pad(field.R, axis, 'periodic'), _pad(field.Q, axis, 'periodic'),
            _pad(field.m, axis + 1, 'periodic'))


def _shift(ndim: int, axis: int, start, stop) -> tuple:
    index = [slice(None)] * ndim
    index[axis] = slice(start, stop)
    return tuple(index)


def _sweep(field: ConservedField, axis: int, dt: float, config: SolverConfig) -> ConservedField:
    grid = field.grid
    state = _evaluate(config.eos, field.R, field.Q)
    c = np.sqrt(state.sound_speed_squared)

    if config.bc == 'periodic':
        R, Q, m = apply_periodic_bc(field, axis)
    else:
        R, Q, m = apply_reflecting_bc(field, axis)
    p = _pad(state.p, axis, config.bc)
    c = _pad(c, axis, config.bc)

    n = np.zeros(grid.ndim)
    n[axis] = 1.0
    F_R, F_Q, F_m = physical_flux(R, Q, m, n, config.eos, pressure=p)
    speed = np.abs(m[axis] / (R + Q)) + c

    L = _shift(grid.ndim, axis, None, -1)
    Rt = _shift(grid.ndim, axis, 1, None)
    s = np.maximum(speed[L], speed[Rt])
    flux_R = 0.5 * (F_R[L] + F_R[Rt]) - 0.5 * s * (R[Rt] - R[L])
    flux_Q = 0.5 * (F_Q[L] + F_Q[Rt]) - 0.5 * s * (Q[Rt] - Q[L])
    mL = (slice(None),) + L
    mR = (slice(None),) + Rt
    flux_m = 0.5 * (F_m[mL] + F_m[mR]) - 0.5 * s * (m[mR] - m[mL])

    ratio = dt / grid.spacing[axis]
    return ConservedField(
        grid,
        field.R - ratio * (flux_R[Rt] - flux_R[L]),
        field.Q - ratio * (flux_Q[Rt] - flux_Q[L]),
        field.m - ratio * (flux_m[mR] - flux_m[mL]),
    )


def max_wave_rate(field: ConservedField, eos: EquationOfState) -> float:
    """max over axes and cells of (|u_a| + c) / dx_a."""
    c = np.sqrt(_evaluate(eos, field.R, field.Q).sound_speed_squared)
    u = field.velocity()
    return max(float(np.max(np.abs(u[a]) + c)) / field.grid.spacing[a] for a in range(field.grid.ndim))


def check_admissible(field: ConservedField, t: float = 0.0, step: int = 0) -> None:
    """Abort on NaN or when R or Q reaches the vacuum floor; never clips."""
    if not (np.all(np.isfinite(field.R)) and np.all(np.isfinite(field.Q)) and np.all(np.isfinite(field.m))):
        logger.error("non-finite state at step %d, t=%.6g", step, t)
        raise NumericalAbort(f"non-finite values at step {step}, t={t:.6g}")
    for name, values in (('R', field.R), ('Q', field.Q)):
        if np.min(values) <= VACUUM_FLOOR:
            cell = np.unravel_index(int(np.argmin(values)), values.shape)
            logger.error("vacuum in %s at cell %s, step %d", name, cell, step)
            raise NumericalAbort(
                f"{name} fell to {float(values[cell]):.3e} (floor {VACUUM_FLOOR:g}) "
                f"at cell {tuple(int(i) for i in cell)}, step {step}, t={t:.6g}")


def rusanov_step(field: ConservedField, config: SolverConfig, dt: float | None = None) -> tuple:
    """One forward-Euler Rusanov step; returns (new field, dt).

    Without ``dt`` the step is cfl / max wave rate. An explicit ``dt`` must
    respect the CFL limit of ``config``.
    """
    check_admissible(field)
    rate = max_wave_rate(field, config.eos)
    if dt is None:
        dt = config.cfl / rate
    elif not (0 < dt) or dt * rate > config.cfl * (1.0 + 1e-12):
        raise ValidationError(f"dt={dt:.6g} violates the CFL limit (courant {dt * rate:.4f} > {config.cfl})")

    for axis in range(field.grid.ndim):
        field = _sweep(field, axis, dt, config)
    return field, dt


# ── Time loop ───────────────────────────────────────────────────────────────

@dataclass
class Snapshot:
    step: int
    t: float
    field: ConservedField


@dataclass
class TraceRow:
    step: int
    t: float
    dt: float
    mass_R: float
    mass_Q: float
    energy: float


@dataclass
class RunResult:
    config: SolverConfig
    snapshots: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    max_courant: float = 0.0

    @property
    def final(self) -> ConservedField:
        return self.snapshots[-1].field


def _energy_function(eos: EquationOfState) -> Callable:
    if eos.kind != 'two_fluid':
        return lambda field: float('nan')
    from energy import total_energy
    return lambda field: total_energy(field, eos.two_fluid).total


def run(field: ConservedField, config: SolverConfig) -> RunResult:
    """Integrate from t = 0 to config.t_end.

    Snapshots are taken every ``stride`` steps, or exactly on the uniform
    ``snapshot_dt`` grid when it is set; the final state is always kept.
    """
    check_admissible(field)
    energy_of = _energy_function(config.eos)
    result = RunResult(config)
    result.snapshots.append(Snapshot(0, 0.0, field))
    result.trace.append(TraceRow(0, 0.0, 0.0, field.mass_R(), field.mass_Q(), energy_of(field)))
    logger.info("run start: %s cells, eos %s, bc %s, t_end %g",
                'x'.join(map(str, field.grid.shape)), config.eos.describe(), config.bc, config.t_end)

    t = 0.0
    step = 0
    next_index = 1
    while t < config.t_end:
        if step >= config.max_steps:
            raise NumericalAbort(f"reached max_steps={config.max_steps} at t={t:.6g} before t_end")
        rate = max_wave_rate(field, config.eos)
        dt = config.cfl / rate
        target = config.t_end
        if config.snapshot_dt is not None:
            target = min(config.t_end, next_index * config.snapshot_dt)
        landed = t + dt >= target
        if landed:
            dt = target - t

        field, dt = rusanov_step(field, config, dt)
        t = target if landed else t + dt
        step += 1
        result.max_courant = max(result.max_courant, dt * rate)
        check_admissible(field, t, step)

        row = TraceRow(step, t, dt, field.mass_R(), field.mass_Q(), energy_of(field))
        result.trace.append(row)
        logger.debug("step %d t=%.6g dt=%.3e courant=%.3f", step, t, dt, dt * rate)

        if config.snapshot_dt is not None:
            if landed:
                result.snapshots.append(Snapshot(step, t, field))
                next_index += 1
        elif step % config.stride == 0 or t >= config.t_end:
            result.snapshots.append(Snapshot(step, t, field))

    logger.info("run end: %d steps, %d snapshots, max courant %.3f",
                step, len(result.snapshots), result.max_courant)
    return result


# ── Weak formulation residual ───────────────────────────────────────────────

@dataclass(frozen=True)
class WeakTestFunction:
    """Separable test function phi(t, x) = theta(t) psi(x).

    ``psi``/``grad_psi`` take the tuple of cell-centre coordinate arrays.
    Scalar: psi -> (...), grad_psi -> (d, ...). Vector: psi -> (d, ...),
    grad_psi -> (d, d, ...) with grad_psi[i, j] = d psi_i / d x_j.
    """
    name: str
    theta: Callable
    psi: Callable
    grad_psi: Callable
    vector: bool = False


@dataclass(frozen=True)
class WeakResidual:
    test_function: str
    identity: str
    value: float


def _time_profile(t_end: float) -> Callable:
    return lambda t: np.cos(0.5 * np.pi * np.asarray(t) / t_end) ** 2


def default_test_functions(grid: Grid, t_end: float, bc: str = 'reflecting') -> list:
    """Smooth test functions for the continuity and momentum identities.

    Each momentum test function points along one axis and vanishes on the
    walls normal to it, so phi.n = 0 on the boundary.
    """
    theta = _time_profile(t_end)
    k = 2.0 * np.pi if bc == 'periodic' else np.pi
    lower, length = grid.lower, [hi - lo for lo, hi in zip(grid.lower, grid.upper)]
    d = grid.ndim

    def xi(coords, a):
        return (coords[a] - lower[a]) / length[a]

    def cosine(coords, a, mode):
        return np.cos(mode * k * xi(coords, a))

    def scalar(mode):
        def psi(coords):
            return np.prod([cosine(coords, a, mode) for a in range(d)], axis=0)

        def grad(coords):
            out = []
            for b in range(d):
                factors = [cosine(coords, a, mode) for a in range(d) if a != b]
                deriv = -mode * k / length[b] * np.sin(mode * k * xi(coords, b))
                out.append(deriv * np.prod(factors, axis=0) if factors else deriv)
            return np.array(out)

        return WeakTestFunction(f"scalar_mode{int(mode)}", theta, psi, grad)

    def vector(axis):
        def psi(coords):
            out = np.zeros((d,) + np.shape(coords[0]))
            out[axis] = np.sin(k * xi(coords, axis))
            for b in range(d):
                if b != axis:
                    out[axis] *= cosine(coords, b, 1)
            return out

        def grad(coords):
            out = np.zeros((d, d) + np.shape(coords[0]))
            for j in range(d):
                term = (k / length[axis] * np.cos(k * xi(coords, axis)) if j == axis
                        else np.sin(k * xi(coords, axis)))
                for b in range(d):
                    if b == axis:
                        continue
                    term = term * (-k / length[b] * np.sin(k * xi(coords, b)) if b == j
                                   else cosine(coords, b, 1))
                out[axis, j] = term
            return out

        return WeakTestFunction(f"vector_axis{axis}", theta, psi, grad, vector=True)

    return [scalar(1.0), scalar(2.0)] + [vector(a) for a in range(d)]


def _snapshot_steps(snapshots: list) -> np.ndarray:
    if len(snapshots) < 2:
        raise ValidationError("weak residual needs at least two snapshots")
    times = np.array([s.t for s in snapshots])
    steps = np.diff(times)
    if times[0] != 0.0 or np.any(steps <= 0):
        raise ValidationError("snapshot times must start at t = 0 and increase")
    return steps


def weak_residual(snapshots: list, test_functions: list, eos: EquationOfState) -> list:
    """Discrete space-time residuals of the weak continuity and momentum identities.

    The time derivative is paired with differences of theta between
    snapshots (summation by parts), the flux terms use the trapezoidal rule
    in time and the midpoint rule in space.
    """
    steps = _snapshot_steps(snapshots)
    grid = snapshots[0].field.grid
    for snap in snapshots:
        if snap.field.grid != grid:
            raise ValidationError(f"snapshot at t={snap.t:.6g} is on a different grid")

    coords = grid.centers()
    vol = grid.cell_volume
    times = np.array([s.t for s in snapshots])
    fields = [s.field for s in snapshots]
    pressures = [eos.pressure(f.R, f.Q) for f in fields]

    residuals = []
    for fn in test_functions:
        theta = fn.theta(times)
        psi = fn.psi(coords)
        grad = fn.grad_psi(coords)
        if fn.vector:
            div = sum(grad[i, i] for i in range(grid.ndim))
            amounts = [np.sum(f.m * psi) * vol for f in fields]
            fluxes = []
            for f, p in zip(fields, pressures):
                u = f.velocity()
                convective = sum(np.sum(f.m[i] * u[j] * grad[i, j])
                                 for i in range(grid.ndim) for j in range(grid.ndim))
                fluxes.append((convective + np.sum(p * div)) * vol)
            identities = [('momentum', amounts, fluxes)]
        else:
            identities = []
            for name in ('R', 'Q'):
                density = [getattr(f, name) for f in fields]
                amounts = [np.sum(rho * psi) * vol for rho in density]
                fluxes = [np.sum(rho * np.sum(f.velocity() * grad, axis=0)) * vol
                          for rho, f in zip(density, fields)]
                identities.append((name, amounts, fluxes))

        for name, amounts, fluxes in identities:
            amounts = np.array(amounts)
            fluxes = np.array(fluxes)
            time_term = np.sum(0.5 * (amounts[:-1] + amounts[1:]) * np.diff(theta))
            flux_term = np.sum(0.5 * steps * (theta[:-1] * fluxes[:-1] + theta[1:] * fluxes[1:]))
            initial = theta[0] * amounts[0]
            residuals.append(WeakResidual(fn.name, name, float(time_term + flux_term + initial)))
    return residuals
