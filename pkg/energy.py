"""Total energy of the two-fluid system and its evolution along runs.

    E = int 1/2 (R+Q)|u|^2
          + 1/(gamma_+ - 1) (R/alpha)^gamma_+ alpha
          + 1/(gamma_- - 1) (Q/(1-alpha))^gamma_- (1-alpha) dx,   alpha = R/Z.
"""
import logging
from dataclasses import dataclass

import numpy as np

from closure import PhaseParams, solve_Z_field
from errors import NumericalAbort, ValidationError
from grid import Grid
from solver import ConservedField, PiecewiseConstantIC

logger = logging.getLogger(__name__)

# Relative per-snapshot increase that counts as a bug in the scheme
ENERGY_INCREASE_TOL = 1e-10


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    internal_plus: float
    internal_minus: float
    total: float


@dataclass(frozen=True)
class EnergyRow:
    t: float
    kinetic: float
    internal_plus: float
    internal_minus: float
    total: float


@dataclass
class EnergyTrace:
    rows: list
    # (index of the later row, relative increase) for every flagged pair
    increases: list

    @property
    def monotone(self) -> bool:
        return not self.increases


def _alpha(R, Q, params: PhaseParams):
    R = np.asarray(R, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if np.any(R <= 0) or np.any(Q <= 0):
        raise ValidationError("energy needs R > 0 and Q > 0 in every cell")
    closure = solve_Z_field(R, Q, params)
    if np.any(closure.alpha >= 1):
        raise NumericalAbort("volume fraction alpha = R/Z reached 1 with Q > 0")
    return closure.Z, closure.alpha


def energy_densities(R, Q, m, params: PhaseParams) -> tuple:
    """Per-cell (kinetic, internal_plus, internal_minus) energy densities.

    ``m`` carries its components on the leading axis.
    """
    Z, alpha = _alpha(R, Q, params)
    m = np.asarray(m, dtype=float)
    kinetic = 0.5 * np.sum(m * m, axis=0) / (R + Q)
    internal_plus = Z ** params.gamma_plus * alpha / (params.gamma_plus - 1.0)
    internal_minus = (Q / (1.0 - alpha)) ** params.gamma_minus * (1.0 - alpha) / (params.gamma_minus - 1.0)
    return kinetic, internal_plus, internal_minus


def internal_minus_forms(R, Q, params: PhaseParams) -> tuple:
    """Both forms of the "-" internal energy density.

    The first uses Q/(1-alpha) directly, the second the closure identity
    Q/(1-alpha) = Z^gamma, giving Z^(gamma gamma_-) (1 - R/Z) / (gamma_- - 1).
    """
    Z, alpha = _alpha(R, Q, params)
    R = np.asarray(R, dtype=float)
    direct = (np.asarray(Q, dtype=float) / (1.0 - alpha)) ** params.gamma_minus * (1.0 - alpha)
    via_closure = Z ** (params.gamma * params.gamma_minus) * (1.0 - R / Z)
    return direct / (params.gamma_minus - 1.0), via_closure / (params.gamma_minus - 1.0)


def total_energy(field: ConservedField, params: PhaseParams, mask=None) -> EnergyBreakdown:
    """Midpoint quadrature of the energy, optionally over a boolean cell mask."""
    kinetic, plus, minus = energy_densities(field.R, field.Q, field.m, params)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        field.grid.check_shape(mask, 'mask')
        kinetic, plus, minus = kinetic[mask], plus[mask], minus[mask]

    vol = field.grid.cell_volume
    k = float(np.sum(kinetic)) * vol
    ip = float(np.sum(plus)) * vol
    im = float(np.sum(minus)) * vol
    return EnergyBreakdown(k, ip, im, k + ip + im)


def energy_trace(snapshots: list, params: PhaseParams, tol: float = ENERGY_INCREASE_TOL) -> EnergyTrace:
    """Energy of every snapshot, flagging increases above ``tol`` relative."""
    rows = []
    increases = []
    for i, snap in enumerate(snapshots):
        e = total_energy(snap.field, params)
        rows.append(EnergyRow(snap.t, e.kinetic, e.internal_plus, e.internal_minus, e.total))
        if i == 0:
            continue
        previous = rows[i - 1].total
        relative = (e.total - previous) / max(abs(previous), np.finfo(float).tiny)
        if relative > tol:
            logger.warning("energy increased by %.3e (relative) between t=%.6g and t=%.6g",
                           relative, rows[i - 1].t, snap.t)
            increases.append((i, relative))
    return EnergyTrace(rows, increases)


def chi_state_energy(ic: PiecewiseConstantIC, params: PhaseParams, chi: float, grid: Grid) -> float:
    """Energy of the constant-state construction with one chi on every patch.

    Each patch carries the momentum magnitude |m0| fixed by chi, so its
    kinetic density is chi - 3/2 Z^gamma_+ and the total is the sum of
    patch volumes times patch energy densities.
    """
    from subsolution import chi_and_m0

    total = 0.0
    for patch in ic.patches:
        volume = patch.overlap_volume(grid.lower, grid.upper)
        m0 = chi_and_m0(patch.R, patch.Q, params, chi)
        _, plus, minus = energy_densities(np.array([patch.R]), np.array([patch.Q]), np.zeros((1, 1)), params)
        kinetic = 0.5 * m0 * m0 / (patch.R + patch.Q)
        total += volume * (kinetic + float(plus[0]) + float(minus[0]))
    return total
