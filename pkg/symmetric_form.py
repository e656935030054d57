"""Symmetric hyperbolic form of the two-fluid system in the variables (p, u, s).

With rho = R + Q and s = R/Q the smooth system reads

    A0 dU/dt + sum_i Ai dU/dx_i = 0,    U = (p, u1, u2, u3, s),

where A0 = diag(1/(rho c^2), rho, rho, rho, 1) and c^2 = dp/drho at fixed s.
"""
import math
from dataclasses import dataclass

import numpy as np

from closure import EquationOfState, MixtureState, PhaseParams
from errors import ValidationError


@dataclass(frozen=True)
class PrimitiveState:
    p: float
    u: np.ndarray
    s: float
    rho: float

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        if u.shape != (3,):
            raise ValidationError(f"velocity must have 3 components, got shape {u.shape}")
        object.__setattr__(self, 'u', u)
        if not (self.rho > 0 and self.s > 0):
            raise ValidationError("symmetrization needs rho > 0 and s > 0")


@dataclass(frozen=True)
class SymmetricSystem:
    A0: np.ndarray
    A1: np.ndarray
    A2: np.ndarray
    A3: np.ndarray

    @property
    def spatial(self) -> tuple:
        return (self.A1, self.A2, self.A3)


def to_rho_s(state: MixtureState) -> tuple:
    if not state.Q > 0:
        raise ValidationError("s = R/Q is undefined for Q = 0")
    if not state.R > 0:
        raise ValidationError("symmetrization needs R > 0")
    return state.R + state.Q, state.R / state.Q


def from_rho_s(rho: float, s: float) -> MixtureState:
    if not (rho > 0 and s > 0):
        raise ValidationError("rho and s must be strictly positive")
    return MixtureState(rho * s / (1.0 + s), rho / (1.0 + s))


def assemble(state: PrimitiveState, dp_drho: float) -> SymmetricSystem:
    if not (state.rho > 0) or not (dp_drho > 0) or not math.isfinite(dp_drho):
        raise ValidationError("assembly needs rho > 0 and dp_drho > 0")
    rho = state.rho
    inv = 1.0 / (rho * dp_drho)

    A0 = np.diag([inv, rho, rho, rho, 1.0])
    matrices = []
    for i, ui in enumerate(state.u):
        A = np.diag([ui * inv, rho * ui, rho * ui, rho * ui, ui])
        A[0, i + 1] = 1.0
        A[i + 1, 0] = 1.0
        matrices.append(A)
    return SymmetricSystem(A0, *matrices)


def char_speeds(system: SymmetricSystem, n) -> np.ndarray:
    """Sorted generalized eigenvalues of (sum_i n_i Ai) - lambda A0.

    A0 is diagonal and positive, so scaling by A0^(-1/2) on both sides
    turns the pencil into an ordinary symmetric eigenproblem.
    """
    n = np.asarray(n, dtype=float)
    if n.shape != (3,) or abs(np.linalg.norm(n) - 1.0) > 1e-12:
        raise ValidationError("direction must be a unit 3-vector")
    A0 = system.A0
    d = np.diag(A0)
    if np.any(A0 != np.diag(d)) or not np.all(d > 0):
        raise ValidationError("A0 must be diagonal and positive definite")

    M = sum(ni * Ai for ni, Ai in zip(n, system.spatial))
    scale = 1.0 / np.sqrt(d)
    return np.sort(np.linalg.eigvalsh(scale[:, None] * M * scale[None, :]))


def primitive_state(R: float, Q: float, u, eos: EquationOfState) -> tuple:
    """(PrimitiveState, dp_drho) at partial densities R, Q > 0 and velocity u."""
    rho, s = to_rho_s(MixtureState(R, Q))
    pressure = eos.evaluate(np.array([R]), np.array([Q]))
    state = PrimitiveState(float(pressure.p[0]), u, s, rho)
    return state, float(pressure.sound_speed_squared[0])


def rational_dp_drho(rho: float, s: float, Z: float, params: PhaseParams) -> float:
    """Rational expression gamma_+ Z^gamma_+ (Z+s) / (gamma (1+s) Z^(gamma+1) + rho s).

    This closed form circulates for the two-fluid model but does not reduce
    to gamma_+ rho^(gamma_+ - 1) when gamma = 1 (Z = rho). It is evaluated
    for comparison in the symmetry audit only; A0 and all wave speeds use
    implicit differentiation of the closure.
    """
    gamma = params.gamma
    return (params.gamma_plus * Z ** params.gamma_plus * (Z + s)
            / (gamma * (1.0 + s) * Z ** (gamma + 1.0) + rho * s))


@dataclass(frozen=True)
class AuditRow:
    R: float
    Q: float
    u: np.ndarray
    n: np.ndarray
    dp_drho: float
    max_asymmetry: float
    min_eig_A0: float
    speed_defect: float
    rational_dp_drho: float


def symmetry_audit(R, Q, u, n, eos: EquationOfState) -> list:
    """Structural checks on a batch of states: symmetry, A0 > 0, wave speeds.

    ``speed_defect`` is the largest gap between the computed speeds and
    {u.n (x3), u.n - c, u.n + c}.
    """
    rows = []
    for r, q, ui, ni in zip(R, Q, u, n):
        state, c2 = primitive_state(float(r), float(q), ui, eos)
        system = assemble(state, c2)
        asym = max(float(np.max(np.abs(A - A.T))) for A in (system.A0, *system.spatial))
        min_eig = float(np.min(np.linalg.eigvalsh(system.A0)))

        un = float(np.dot(state.u, ni))
        c = math.sqrt(c2)
        expected = np.sort([un - c, un, un, un, un + c])
        defect = float(np.max(np.abs(char_speeds(system, ni) - expected)))

        rational = float('nan')
        if eos.kind == 'two_fluid':
            Z = float(eos.evaluate(np.array([r]), np.array([q])).Z[0])
            rational = rational_dp_drho(state.rho, state.s, Z, eos.two_fluid)
        rows.append(AuditRow(float(r), float(q), np.asarray(ui, dtype=float), np.asarray(ni, dtype=float),
                             c2, asym, min_eig, defect, rational))
    return rows
