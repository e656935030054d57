"""Pointwise checks behind the subsolution construction for the two-fluid system.

With w = v + grad(Psi), rho = R + Q and e = Lambda - 3/2 (Z^gamma_+ + dPsi/dt),
a field is a strict subsolution where

    3/2 lambda_max[w (x) w / rho - U] < e

for a traceless symmetric U. Nothing here builds oscillatory perturbations;
the functions evaluate the inequality and the constants that make it hold.
"""
import logging
from dataclasses import dataclass

import numpy as np

from closure import MixtureState, PhaseParams, solve_Z, solve_Z_field
from errors import ValidationError
from grid import Grid
from helmholtz import initial_solenoidal_part, potentials_from_run

logger = logging.getLogger(__name__)

DEFAULT_MARGIN = 1e-6

# Within this distance of |r| = 1 two eigenvalues nearly coincide and the
# arccos loses digits; those matrices go to the dense solver.
_CLOSED_FORM_GUARD = 1e-4


# ── Eigenvalues ─────────────────────────────────────────────────────────────

def lambda_max(M):
    """Largest eigenvalue of symmetric 3x3 matrices (shape (..., 3, 3)).

    Trigonometric solution of the characteristic cubic, with
    numpy.linalg.eigvalsh for nearly repeated eigenvalues.
    """
    M = np.asarray(M, dtype=float)
    if M.shape[-2:] != (3, 3):
        raise ValidationError(f"expected 3x3 matrices, got shape {M.shape}")
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    if M.size and np.max(np.abs(M - np.swapaxes(M, -1, -2))) > 1e-12 * scale:
        raise ValidationError("lambda_max needs a symmetric matrix")

    batch = M.shape[:-2]
    M = M.reshape(-1, 3, 3)

    q = np.trace(M, axis1=1, axis2=2) / 3.0
    off = M[:, 0, 1] ** 2 + M[:, 0, 2] ** 2 + M[:, 1, 2] ** 2
    diag = np.diagonal(M, axis1=1, axis2=2) - q[:, None]
    p = np.sqrt((np.sum(diag ** 2, axis=1) + 2.0 * off) / 6.0)

    flat = p <= np.finfo(float).tiny * scale
    safe_p = np.where(flat, 1.0, p)
    B = (M - q[:, None, None] * np.eye(3)) / safe_p[:, None, None]
    r = np.clip(np.linalg.det(B) / 2.0, -1.0, 1.0)
    top = np.where(flat, q, q + 2.0 * p * np.cos(np.arccos(r) / 3.0))

    near = ~flat & (1.0 - np.abs(r) < _CLOSED_FORM_GUARD)
    if np.any(near):
        top[near] = np.linalg.eigvalsh(M[near])[:, -1]
    if not batch:
        return float(top[0])
    return top.reshape(batch)


def outer_over_rho(w, rho):
    """w (x) w / rho for vectors with components on the last axis."""
    w = np.asarray(w, dtype=float)
    return w[..., :, None] * w[..., None, :] / np.asarray(rho, dtype=float)[..., None, None]


def convexity_E(v, U):
    """E(v, U) = lambda_max(v (x) v - U)."""
    v = np.asarray(v, dtype=float)
    U = U.matrix() if isinstance(U, TracelessSym3) else np.asarray(U, dtype=float)
    return lambda_max(v[..., :, None] * v[..., None, :] - U)


# ── Samples ─────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class TracelessSym3:
    """Symmetric 3x3 matrix with zero trace; the zz entry is derived."""
    xx: float
    yy: float
    xy: float
    xz: float
    yz: float

    @property
    def zz(self):
        return -(self.xx + self.yy)

    def matrix(self) -> np.ndarray:
        xx, yy, zz = (np.asarray(a, dtype=float) for a in (self.xx, self.yy, self.zz))
        xy, xz, yz = (np.asarray(a, dtype=float) for a in (self.xy, self.xz, self.yz))
        rows = [[xx, xy, xz], [xy, yy, yz], [xz, yz, zz]]
        return np.stack([np.stack(np.broadcast_arrays(*row), axis=-1) for row in rows], axis=-2)

    @classmethod
    def zero(cls) -> 'TracelessSym3':
        return cls(0.0, 0.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_matrix(cls, M) -> 'TracelessSym3':
        M = np.asarray(M, dtype=float)
        scale = max(1.0, float(np.max(np.abs(M))))
        if M.shape != (3, 3) or np.max(np.abs(M - M.T)) > 1e-12 * scale:
            raise ValidationError("matrix must be symmetric 3x3")
        if abs(np.trace(M)) > 1e-12 * scale:
            raise ValidationError(f"matrix must be traceless (trace {np.trace(M):.3e})")
        return cls(M[0, 0], M[1, 1], M[0, 1], M[0, 2], M[1, 2])

    @classmethod
    def traceless_projection(cls, w, rho: float) -> 'TracelessSym3':
        """U = w (x) w / rho - |w|^2 / (3 rho) I, the equality case of the inequality."""
        w = np.asarray(w, dtype=float)
        A = np.outer(w, w) / rho
        shift = np.dot(w, w) / (3.0 * rho)
        return cls(A[0, 0] - shift, A[1, 1] - shift, A[0, 1], A[0, 2], A[1, 2])


@dataclass(frozen=True)
class SubsolutionSample:
    v: np.ndarray
    grad_psi: np.ndarray
    dt_psi: float
    R: float
    Q: float
    U: TracelessSym3
    Lambda: float

    def __post_init__(self):
        for name in ('v', 'grad_psi'):
            vector = np.asarray(getattr(self, name), dtype=float)
            if vector.shape != (3,):
                raise ValidationError(f"{name} must be a 3-vector, got shape {vector.shape}")
            object.__setattr__(self, name, vector)
        if not (self.R + self.Q > 0):
            raise ValidationError("sample needs R + Q > 0")

    @property
    def w(self) -> np.ndarray:
        return self.v + self.grad_psi


def kinetic_energy_e(Lambda, Z_pow, dt_psi):
    """e = Lambda - 3/2 (Z^gamma_+ + dPsi/dt)."""
    return Lambda - 1.5 * (np.asarray(Z_pow) + np.asarray(dt_psi))


def subsolution_gap(sample: SubsolutionSample, params: PhaseParams) -> float:
    """e - 3/2 lambda_max[w (x) w / rho - U]; positive for a strict subsolution."""
    closure = solve_Z(MixtureState(sample.R, sample.Q), params)
    e = kinetic_energy_e(sample.Lambda, closure.p, sample.dt_psi)
    bracket = outer_over_rho(sample.w, sample.R + sample.Q) - sample.U.matrix()
    return float(e - 1.5 * lambda_max(bracket))


# ── Fields ──────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class GapField:
    gap: np.ndarray
    e: np.ndarray
    lambda_needed: np.ndarray


def _as_3vectors(vectors) -> np.ndarray:
    """(d, ...) with d <= 3 components first -> (..., 3), zero padded."""
    vectors = np.asarray(vectors, dtype=float)
    if vectors.ndim == 0 or vectors.shape[0] > 3:
        raise ValidationError(f"vector field must carry at most 3 leading components, got shape {vectors.shape}")
    padded = np.zeros((3,) + vectors.shape[1:])
    padded[:vectors.shape[0]] = vectors
    return np.moveaxis(padded, 0, -1)


def gap_field(v, grad_psi, dt_psi, R, Q, params: PhaseParams, Lambda: float, U=None) -> GapField:
    """Pointwise gap, e and the Lambda that would close the gap.

    Vector fields carry their components on the leading axis; ``U`` is a
    TracelessSym3 of arrays or None for U = 0.
    """
    R = np.asarray(R, dtype=float)
    Q = np.asarray(Q, dtype=float)
    w = _as_3vectors(np.asarray(v, dtype=float) + np.asarray(grad_psi, dtype=float))
    if w.shape[:-1] != R.shape or Q.shape != R.shape:
        raise ValidationError("subsolution fields must share one shape")
    dt_psi = np.broadcast_to(np.asarray(dt_psi, dtype=float), R.shape)

    Z_pow = solve_Z_field(R, Q, params).p
    bracket = outer_over_rho(w, R + Q)
    if U is not None:
        bracket = bracket - U.matrix()
    needed = 1.5 * lambda_max(bracket) + 1.5 * (Z_pow + dt_psi)
    return GapField(gap=Lambda - needed, e=kinetic_energy_e(Lambda, Z_pow, dt_psi), lambda_needed=needed)


def min_lambda(v0, grad_psi, dt_psi, R, Q, params: PhaseParams, margin: float = DEFAULT_MARGIN) -> float:
    """Smallest constant Lambda, inflated by ``margin``, making the U = 0 gap positive everywhere."""
    if np.size(R) == 0:
        raise ValidationError("min_lambda needs a non-empty grid")
    if margin < 0:
        raise ValidationError(f"margin must be non-negative (got {margin})")
    needed = gap_field(v0, grad_psi, dt_psi, R, Q, params, 0.0).lambda_needed
    top = float(np.max(needed))
    Lambda = top + margin * abs(top) if top != 0 else margin
    logger.info("selected Lambda=%.17g from max requirement %.17g (margin %g)", Lambda, top, margin)
    return Lambda


def gap_functional_I(w, R, Q, e, times, grid) -> float:
    """Space-time integral of 1/2 |w|^2 / (R + Q) - e.

    Arrays carry time on their first axis (vectors: (d, nt, ...)); space
    uses the midpoint rule, time the trapezoidal rule. A single time slice
    gives the spatial integral alone.
    """
    w = np.asarray(w, dtype=float)
    rho = np.asarray(R, dtype=float) + np.asarray(Q, dtype=float)
    integrand = 0.5 * np.sum(w * w, axis=0) / rho - np.asarray(e, dtype=float)
    per_time = np.sum(integrand.reshape(len(times), -1), axis=1) * grid.cell_volume
    if len(times) == 1:
        return float(per_time[0])
    return float(np.trapezoid(per_time, np.asarray(times, dtype=float)))


# ── Constant-state algebra ──────────────────────────────────────────────────

def chi_threshold(R, Q, params: PhaseParams):
    """3/2 Z^gamma_+(R, Q), the least chi that admits a real momentum."""
    if np.ndim(R) == 0 and np.ndim(Q) == 0:
        return 1.5 * solve_Z(MixtureState(float(R), float(Q)), params).p
    return 1.5 * solve_Z_field(R, Q, params).p


def chi_and_m0(R: float, Q: float, params: PhaseParams, chi: float) -> float:
    """|m0| = sqrt(2 (R + Q) (chi - 3/2 Z^gamma_+)) for a constant state."""
    if not (R > 0 and Q > 0):
        raise ValidationError("constant states need R > 0 and Q > 0")
    threshold = chi_threshold(R, Q, params)
    if chi < threshold:
        raise ValidationError(f"chi={chi:.17g} is below the threshold 3/2 Z^gamma_+ = {threshold:.17g}")
    return float(np.sqrt(2.0 * (R + Q) * (chi - threshold)))


def uniform_chi(states, params: PhaseParams, margin: float = DEFAULT_MARGIN) -> float:
    """One chi above every patch threshold: (1 + margin) max_i 3/2 Z^gamma_+(R_i, Q_i)."""
    states = list(states)
    if not states:
        raise ValidationError("uniform_chi needs at least one state")
    thresholds = [chi_threshold(R, Q, params) for R, Q in states]
    chi = (1.0 + margin) * max(thresholds)
    for (R, Q), threshold in zip(states, thresholds):
        if chi < threshold or (margin > 0 and chi <= threshold):
            raise ValidationError(f"chi={chi:.17g} does not exceed the threshold {threshold:.17g} at R={R}, Q={Q}")
    return chi


# ── Fields from solver runs ─────────────────────────────────────────────────

@dataclass(frozen=True)
class SubsolutionFields:
    """v0, grad Psi, dPsi/dt, R and Q over all snapshots of a run."""
    grid: Grid
    times: np.ndarray
    v0: np.ndarray
    grad_psi: np.ndarray
    dt_psi: np.ndarray
    R: np.ndarray
    Q: np.ndarray

    def space_time(self) -> tuple:
        """(v0, grad_psi) as (d, nt, ...) plus dt_psi, R, Q as (nt, ...)."""
        nt = len(self.times)
        v0 = np.broadcast_to(self.v0[:, None], (self.v0.shape[0], nt) + self.v0.shape[1:])
        return v0, np.moveaxis(self.grad_psi, 1, 0), self.dt_psi, self.R, self.Q


def fields_from_run(result) -> SubsolutionFields:
    """Potentials along a uniformly sampled run and v0 = m0 - grad Psi(0)."""
    snapshots = result.snapshots
    grid = snapshots[0].field.grid
    times = np.array([s.t for s in snapshots])
    R = np.array([s.field.R for s in snapshots])
    Q = np.array([s.field.Q for s in snapshots])
    potentials = potentials_from_run(times, R, Q, grid)
    v0 = initial_solenoidal_part(snapshots[0].field.m, potentials.grad_psi[0])
    return SubsolutionFields(grid, times, v0, potentials.grad_psi, potentials.dt_psi, R, Q)
