"""Neumann Poisson solves and the Helmholtz split of momentum fields on boxes.

Scalar fields have the grid's shape, vector fields carry their components
on a leading axis. Walls are handled by ghost mirroring: even for scalars
(zero normal derivative), odd for the normal component of vectors.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from errors import ConvergenceError, ValidationError
from grid import Grid

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
STENCILS = ('compact', 'collocated')

# |int f| relative to ||f||_2 sqrt(|Omega|) above which a rhs is incompatible
COMPATIBILITY_TOL = 1e-8

# Relative mass change per unit time that the run potentials accept
MASS_DRIFT_TOL = 1e-10


# ── Difference operators ────────────────────────────────────────────────────

def _mirror(array: np.ndarray, axis: int) -> np.ndarray:
    widths = [(0, 0)] * array.ndim
    widths[axis] = (1, 1)
    return np.pad(array, widths, mode='symmetric')


def _central(padded: np.ndarray, axis: int, h: float) -> np.ndarray:
    n = padded.shape[axis]
    ahead = np.take(padded, np.arange(2, n), axis=axis)
    behind = np.take(padded, np.arange(0, n - 2), axis=axis)
    return (ahead - behind) / (2.0 * h)


def compact_laplacian(phi: np.ndarray, grid: Grid) -> np.ndarray:
    """Five-point (three-point in 1D) Laplacian with zero normal derivative."""
    out = np.zeros_like(phi)
    for axis, h in enumerate(grid.spacing):
        padded = _mirror(phi, axis)
        n = padded.shape[axis]
        ahead = np.take(padded, np.arange(2, n), axis=axis)
        behind = np.take(padded, np.arange(0, n - 2), axis=axis)
        out += (ahead - 2.0 * phi + behind) / (h * h)
    return out


def gradient(phi: np.ndarray, grid: Grid) -> np.ndarray:
    """Central-difference gradient with even ghosts, shape (ndim, *grid.shape)."""
    grid.check_shape(phi, 'scalar field')
    return np.array([_central(_mirror(phi, a), a, h) for a, h in enumerate(grid.spacing)])


def divergence(w: np.ndarray, grid: Grid) -> np.ndarray:
    """Central-difference divergence with odd ghosts for the normal component.

    This is the negative adjoint of :func:`gradient` under the cell-volume
    inner product, so sum(w . gradient(phi)) = -sum(divergence(w) phi).
    """
    grid.check_shape(w, 'vector field', leading=(grid.ndim,))
    out = np.zeros(grid.shape)
    for axis, h in enumerate(grid.spacing):
        padded = _mirror(w[axis], axis)
        n = padded.shape[axis]
        for ghost in (0, n - 1):
            index = [slice(None)] * padded.ndim
            index[axis] = ghost
            padded[tuple(index)] *= -1.0
        out += _central(padded, axis, h)
    return out


def collocated_laplacian(phi: np.ndarray, grid: Grid) -> np.ndarray:
    return divergence(gradient(phi, grid), grid)


# ── Neumann problem ─────────────────────────────────────────────────────────

@dataclass(frozen=True)
class NeumannProblem:
    """-Laplace(psi) = rhs with zero normal derivative and zero mean."""
    grid: Grid
    rhs: np.ndarray
    tol: float = DEFAULT_TOL
    max_iterations: int | None = None
    stencil: str = 'compact'

    def __post_init__(self):
        self.grid.check_shape(self.rhs, 'rhs')
        if self.stencil not in STENCILS:
            raise ValidationError(f"stencil must be one of {', '.join(STENCILS)} (got {self.stencil})")
        if not (self.tol > 0):
            raise ValidationError(f"tolerance must be positive (got {self.tol})")
        if not np.all(np.isfinite(self.rhs)):
            raise ValidationError("rhs contains non-finite values")
        defect = self.compatibility_defect()
        if defect > COMPATIBILITY_TOL:
            raise ValidationError(
                f"rhs is incompatible with Neumann data: |int f| / (||f|| sqrt|Omega|) = {defect:.3e}")

    def compatibility_defect(self) -> float:
        norm = np.sqrt(np.sum(self.rhs ** 2) * self.grid.cell_volume * self.grid.domain_volume)
        if norm == 0:
            return 0.0
        return abs(float(np.sum(self.rhs))) * self.grid.cell_volume / norm

    def operator(self, phi: np.ndarray) -> np.ndarray:
        if self.stencil == 'compact':
            return -compact_laplacian(phi, self.grid)
        return -collocated_laplacian(phi, self.grid)


def solve_neumann(problem: NeumannProblem) -> np.ndarray:
    """Zero-mean solution of the Neumann problem by conjugate gradients.

    Iterates are projected onto the mean-zero subspace on every product, where
    the negative Laplacian is symmetric positive definite.
    """
    grid = problem.grid
    shape = grid.shape
    size = grid.n_cells

    f = problem.rhs - np.mean(problem.rhs)
    if not np.any(f):
        return np.zeros(shape)

    def project(x):
        return x - np.mean(x)

    def matvec(x):
        return project(problem.operator(project(np.reshape(x, shape)))).ravel()

    iterations = 0

    def count(_):
        nonlocal iterations
        iterations += 1

    A = LinearOperator((size, size), matvec=matvec, dtype=float)
    max_iterations = problem.max_iterations or 10 * size
    x, info = cg(A, f.ravel(), rtol=problem.tol, atol=0.0, maxiter=max_iterations, callback=count)

    psi = project(np.reshape(x, shape))
    residual = float(np.linalg.norm(problem.operator(psi).ravel() - f.ravel()) / np.linalg.norm(f))
    if info != 0:
        logger.error("CG stopped after %d iterations, relative residual %.3e", iterations, residual)
        raise ConvergenceError(
            f"Neumann solve did not converge in {max_iterations} iterations (relative residual {residual:.3e})",
            residual=residual)
    logger.debug("CG converged in %d iterations, relative residual %.3e", iterations, residual)
    return psi


# ── Decomposition ───────────────────────────────────────────────────────────

@dataclass(frozen=True)
class HelmholtzSplit:
    """w = v + grad(psi) with div v = 0 and mean(psi) = 0."""
    v: np.ndarray
    psi: np.ndarray
    grad_psi: np.ndarray
    div_defect: float
    orthogonality_defect: float


def wall_trace_defect(w: np.ndarray, grid: Grid) -> float:
    """Largest extrapolated normal trace (3 w_0 - w_1) / 2 at the walls, relative to max|w|."""
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    if scale == 0:
        return 0.0
    worst = 0.0
    for axis in range(grid.ndim):
        normal = w[axis]
        n = normal.shape[axis]
        if n < 2:
            continue
        for inner, outer in ((0, 1), (n - 1, n - 2)):
            trace = 0.5 * (3.0 * np.take(normal, inner, axis=axis) - np.take(normal, outer, axis=axis))
            worst = max(worst, float(np.max(np.abs(trace))))
    return worst / scale


def decompose(w: np.ndarray, grid: Grid, tol: float = DEFAULT_TOL, wall_tol: float = 0.25) -> HelmholtzSplit:
    """Split ``w`` (w.n = 0 on the walls) into solenoidal and gradient parts.

    The potential solves the collocated Neumann problem with rhs -div w, so
    the solenoidal part is divergence free and orthogonal to the gradient
    part up to the CG tolerance.
    """
    w = np.asarray(w, dtype=float)
    grid.check_shape(w, 'vector field', leading=(grid.ndim,))
    defect = wall_trace_defect(w, grid)
    if defect > wall_tol:
        raise ValidationError(f"field has a normal component at the walls (relative trace {defect:.3g})")

    div_w = divergence(w, grid)
    psi = solve_neumann(NeumannProblem(grid, -div_w, tol=tol, stencil='collocated'))
    grad_psi = gradient(psi, grid)
    v = w - grad_psi

    vol = grid.cell_volume
    div_defect = float(np.sqrt(np.sum(divergence(v, grid) ** 2) * vol))
    norm_v = np.sqrt(np.sum(v * v) * vol)
    norm_g = np.sqrt(np.sum(grad_psi * grad_psi) * vol)
    inner = abs(float(np.sum(v * grad_psi))) * vol
    orthogonality = inner / (norm_v * norm_g) if norm_v > 0 and norm_g > 0 else 0.0
    return HelmholtzSplit(v, psi, grad_psi, div_defect, orthogonality)


def initial_solenoidal_part(m0: np.ndarray, grad_psi0: np.ndarray) -> np.ndarray:
    """v0 = m0 - grad(psi)(0)."""
    m0 = np.asarray(m0, dtype=float)
    grad_psi0 = np.asarray(grad_psi0, dtype=float)
    if m0.shape != grad_psi0.shape:
        raise ValidationError(f"m0 has shape {m0.shape} but grad psi has {grad_psi0.shape}")
    return m0 - grad_psi0


# ── Potentials along a run ──────────────────────────────────────────────────

@dataclass(frozen=True)
class RunPotentials:
    times: np.ndarray
    psi_R: np.ndarray
    psi_Q: np.ndarray
    psi: np.ndarray
    grad_psi: np.ndarray
    dt_psi: np.ndarray


def _check_series(times, series, grid: Grid, name: str) -> tuple:
    times = np.asarray(times, dtype=float)
    series = np.asarray(series, dtype=float)
    if len(times) < 3:
        raise ValidationError(f"{name} needs at least 3 snapshots, got {len(times)}")
    if series.shape != (len(times),) + grid.shape:
        raise ValidationError(f"{name} series has shape {series.shape}, expected {(len(times),) + grid.shape}")
    steps = np.diff(times)
    dt = float(np.mean(steps))
    if dt <= 0 or np.max(np.abs(steps - dt)) > 1e-9 * dt:
        raise ValidationError("snapshots must be uniformly spaced in time")
    return times, series, dt


def potential_from_run(times, R_series, grid: Grid, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Psi(t) solving -Laplace(Psi) = d/dt of the density series, one solve per snapshot.

    d/dt uses centred differences with one-sided ends. Its integral vanishes
    when mass is conserved; any residual mean is checked and projected out.
    """
    times, series, dt = _check_series(times, R_series, grid, 'density')
    rate = np.gradient(series, dt, axis=0, edge_order=1)

    vol = grid.cell_volume
    out = np.empty_like(series)
    for k, f in enumerate(rate):
        mass = float(np.sum(series[k])) * vol
        drift = abs(float(np.sum(f))) * vol / max(mass, np.finfo(float).tiny)
        if drift > MASS_DRIFT_TOL:
            raise ValidationError(f"density mass is not conserved at t={times[k]:.6g} (relative rate {drift:.3e})")
        out[k] = solve_neumann(NeumannProblem(grid, f - np.mean(f), tol=tol))
    return out


def potentials_from_run(times, R_series, Q_series, grid: Grid, tol: float = DEFAULT_TOL) -> RunPotentials:
    """Potentials of both densities, their sum Psi, grad Psi and dPsi/dt."""
    psi_R = potential_from_run(times, R_series, grid, tol)
    psi_Q = potential_from_run(times, Q_series, grid, tol)
    psi = psi_R + psi_Q
    dt = float(np.mean(np.diff(times)))
    grad_psi = np.array([gradient(p, grid) for p in psi])
    dt_psi = np.gradient(psi, dt, axis=0, edge_order=1)
    return RunPotentials(np.asarray(times, dtype=float), psi_R, psi_Q, psi, grad_psi, dt_psi)
