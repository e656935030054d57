"""Algebraic pressure closure Z(R, Q) and the alternative two-fluid pressure laws.

Both phases share one pressure, p = Z**gamma_plus, where Z solves

    Q = (1 - R/Z) * Z**gamma,   gamma = gamma_plus / gamma_minus,   R <= Z.

The root is found by a safeguarded Newton iteration on the bracket
[R, max(2R, (2Q)**(1/gamma))]; derivatives come from implicit
differentiation of the same relation.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from errors import ConvergenceError, NumericalAbort, ValidationError

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-12
MAX_ITERATIONS = 200
# Finite-difference step relative to the perturbed variable
FD_REL_STEP = 1e-4

# Newton stops once |F| is this small relative to the largest term of F
_NEWTON_TOL = 1e-15
_EPS = np.finfo(float).eps

EOS_KINDS = ('two_fluid', 'liquid_gas', 'fluid_particle')


@dataclass(frozen=True)
class PhaseParams:
    """Adiabatic exponents of fluid "+" and fluid "-"."""
    gamma_plus: float
    gamma_minus: float
    gamma: float = field(init=False)

    def __post_init__(self):
        for name in ('gamma_plus', 'gamma_minus'):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 1:
                raise ValidationError(f"{name} must exceed 1 (got {value})")
        object.__setattr__(self, 'gamma', self.gamma_plus / self.gamma_minus)


@dataclass(frozen=True)
class MixtureState:
    """Partial densities R = alpha_+ rho_+ and Q = alpha_- rho_-."""
    R: float
    Q: float

    def __post_init__(self):
        _check_densities(np.asarray(self.R, dtype=float), np.asarray(self.Q, dtype=float))


@dataclass(frozen=True)
class ClosureResult:
    """Everything downstream of the implicit closure relation.

    Fields are floats from :func:`solve_Z` and arrays from
    :func:`solve_Z_field`.
    """
    Z: float
    p: float
    dZ_dR: float
    dZ_dQ: float
    dp_drho_at_fixed_s: float
    alpha: float


@dataclass(frozen=True)
class LiquidGasParams:
    C_const: float
    k0: float
    a0: float

    def __post_init__(self):
        for name in ('C_const', 'k0', 'a0'):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ValidationError(f"{name} must be strictly positive (got {value})")


@dataclass(frozen=True)
class FluidParticleParams:
    gamma: float
    beta: float

    def __post_init__(self):
        for name in ('gamma', 'beta'):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 1:
                raise ValidationError(f"{name} must be at least 1 (got {value})")


def _check_densities(R: np.ndarray, Q: np.ndarray, allow_total_vacuum: bool = True) -> None:
    if not (np.all(np.isfinite(R)) and np.all(np.isfinite(Q))):
        raise ValidationError("densities must be finite")
    if np.any(R < 0) or np.any(Q < 0):
        raise ValidationError("densities R and Q must be non-negative")
    if not allow_total_vacuum and np.any((R == 0) & (Q == 0)):
        raise ValidationError("closure is undefined at total vacuum (R = Q = 0)")


def _as_density_arrays(R, Q, allow_total_vacuum: bool = True):
    R = np.asarray(R, dtype=float)
    Q = np.asarray(Q, dtype=float)
    R, Q = np.broadcast_arrays(R, Q)
    _check_densities(R, Q, allow_total_vacuum)
    return R, Q


# ── Two-fluid closure ───────────────────────────────────────────────────────

def closure_function(Z, R, Q, gamma: float):
    """F(Z) = (1 - R/Z) Z**gamma - Q, written as (Z - R) Z**(gamma-1) - Q."""
    return (Z - R) * Z ** (gamma - 1.0) - Q


def closure_slope(Z, R, gamma: float):
    """F'(Z) = gamma Z**(gamma-1) - (gamma-1) R Z**(gamma-2); positive for Z >= R."""
    return Z ** (gamma - 2.0) * (gamma * Z - (gamma - 1.0) * R)


def upper_bracket(R, Q, gamma: float):
    """Pointwise upper bound max(2R, (2Q)**(1/gamma)) on Z."""
    return np.maximum(2.0 * np.asarray(R, dtype=float), (2.0 * np.asarray(Q, dtype=float)) ** (1.0 / gamma))


def closure_residual(Z, R, Q, params: PhaseParams):
    """Residual of the closure relation relative to the size of its terms."""
    Z = np.asarray(Z, dtype=float)
    gamma = params.gamma
    scale = np.maximum(1.0, np.maximum(np.asarray(Q, dtype=float), Z ** gamma))
    return np.abs(closure_function(Z, R, Q, gamma)) / scale


def _newton_bisection(r: np.ndarray, q: np.ndarray, gamma: float) -> np.ndarray:
    lo = r.copy()
    hi = upper_bracket(r, q, gamma)
    if np.any(closure_function(lo, r, q, gamma) > 0) or np.any(closure_function(hi, r, q, gamma) < 0):
        raise NumericalAbort("closure root is not bracketed by [R, max(2R, (2Q)^(1/gamma))]")

    # F is convex on [R, inf) for gamma >= 1 and concave below, so starting
    # from the matching end makes the Newton iterates monotone.
    z = hi.copy() if gamma >= 1 else lo.copy()
    for _ in range(MAX_ITERATIONS):
        f = closure_function(z, r, q, gamma)
        scale = np.maximum(1.0, np.maximum(q, z ** gamma))
        done = (np.abs(f) <= _NEWTON_TOL * scale) | (hi - lo <= 4.0 * _EPS * z)
        if np.all(done):
            break
        lo = np.where(f < 0, z, lo)
        hi = np.where(f > 0, z, hi)
        with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
            newton = z - f / closure_slope(z, r, gamma)
        bisect = np.where(hi > 4.0 * lo, np.sqrt(lo * hi), 0.5 * (lo + hi))
        inside = np.isfinite(newton) & (newton > lo) & (newton < hi)
        z = np.where(done, z, np.where(inside, newton, bisect))
    return z


def _closure_arrays(R: np.ndarray, Q: np.ndarray, params: PhaseParams) -> ClosureResult:
    gamma = params.gamma
    Z = np.empty_like(R)
    only_plus = Q == 0
    only_minus = (R == 0) & ~only_plus
    mixed = ~(only_plus | only_minus)

    Z[only_plus] = R[only_plus]
    Z[only_minus] = Q[only_minus] ** (1.0 / gamma)
    if np.any(mixed):
        Z[mixed] = _newton_bisection(R[mixed], Q[mixed], gamma)

    residual = closure_residual(Z, R, Q, params)
    if np.any(residual > RESIDUAL_TOL):
        worst = float(np.max(residual))
        logger.error("closure did not converge, worst relative residual %.3e", worst)
        raise ConvergenceError(f"closure solve left relative residual {worst:.3e}", residual=worst)

    slope = closure_slope(Z, R, gamma)
    dZ_dR = Z ** (gamma - 1.0) / slope
    dZ_dQ = 1.0 / slope
    rho = R + Q
    dZ_drho = (R * dZ_dR + Q * dZ_dQ) / rho
    dp_drho = params.gamma_plus * Z ** (params.gamma_plus - 1.0) * dZ_drho

    both = (R > 0) & (Q > 0)
    if np.any(both & ~(dp_drho > 0)):
        raise NumericalAbort("closure sound speed squared is not positive at a mixed state")

    return ClosureResult(
        Z=Z,
        p=Z ** params.gamma_plus,
        dZ_dR=dZ_dR,
        dZ_dQ=dZ_dQ,
        dp_drho_at_fixed_s=dp_drho,
        alpha=R / Z,
    )


def solve_Z_field(R, Q, params: PhaseParams) -> ClosureResult:
    """Vectorised closure solve; every field of the result is an array."""
    R, Q = _as_density_arrays(R, Q, allow_total_vacuum=False)
    result = _closure_arrays(R.ravel().copy(), Q.ravel().copy(), params)
    return ClosureResult(**{name: getattr(result, name).reshape(R.shape)
                            for name in result.__dataclass_fields__})


def solve_Z(state: MixtureState, params: PhaseParams) -> ClosureResult:
    """Solve the closure at a single state."""
    result = solve_Z_field(np.array([state.R]), np.array([state.Q]), params)
    return ClosureResult(**{name: float(getattr(result, name)[0]) for name in result.__dataclass_fields__})


def z_bounds(R, Q, params: PhaseParams) -> tuple:
    """Global bounds inf R <= Z <= max(2 sup R, (2 sup Q)**(1/gamma)) over a field."""
    R, Q = _as_density_arrays(R, Q)
    lower = float(np.min(R))
    upper = float(max(2.0 * np.max(R), (2.0 * np.max(Q)) ** (1.0 / params.gamma)))
    return lower, upper


def closure_derivatives_fd_check(state: MixtureState, params: PhaseParams, h: float | None = None,
                                 rel_step: float = FD_REL_STEP) -> float:
    """Largest relative gap between implicit derivatives and centred differences.

    Every difference quotient goes through full closure solves; the
    pressure derivative is taken along rho = R + Q at fixed s = R/Q.
    The step must scale with the state: by default each quotient steps by
    ``rel_step`` times the variable it perturbs. An absolute ``h`` applies
    one step to all three and is only accurate for R, Q of order one.
    """
    R, Q = state.R, state.Q
    if not (R > 0 and Q > 0):
        raise ValidationError("finite-difference check needs R > 0 and Q > 0")
    if h is not None and not (0 < h < min(R, Q)):
        raise ValidationError(f"step h={h} must be positive and smaller than R and Q")
    if h is None and not (0 < rel_step < 1):
        raise ValidationError(f"relative step {rel_step} must lie in (0, 1)")

    exact = solve_Z(state, params)

    def Z_at(r, q):
        return solve_Z(MixtureState(r, q), params).Z

    def p_at(rho, s):
        return solve_Z(MixtureState(rho * s / (1.0 + s), rho / (1.0 + s)), params).p

    rho, s = R + Q, R / Q
    h_R, h_Q, h_rho = (h, h, h) if h is not None else (rel_step * R, rel_step * Q, rel_step * rho)
    pairs = [
        (exact.dZ_dR, (Z_at(R + h_R, Q) - Z_at(R - h_R, Q)) / (2.0 * h_R)),
        (exact.dZ_dQ, (Z_at(R, Q + h_Q) - Z_at(R, Q - h_Q)) / (2.0 * h_Q)),
        (exact.dp_drho_at_fixed_s, (p_at(rho + h_rho, s) - p_at(rho - h_rho, s)) / (2.0 * h_rho)),
    ]
    return max(abs(a - b) / max(abs(a), abs(b), 1e-300) for a, b in pairs)


# ── Alternative pressure laws ───────────────────────────────────────────────

def _liquid_gas_arrays(R, Q, lg: LiquidGasParams):
    b = lg.k0 - R - lg.a0 * Q
    c = 4.0 * lg.k0 * lg.a0 * Q
    root = np.sqrt(b * b + c)
    # -b + root cancels when b > 0 dominates; use the rationalised form there
    with np.errstate(divide='ignore', invalid='ignore'):
        scaled = np.where(b > 0, c / (b + root), root - b)
    return lg.C_const * scaled, root


def pressure_liquid_gas(state: MixtureState, lg: LiquidGasParams) -> float:
    p, _ = _liquid_gas_arrays(float(state.R), float(state.Q), lg)
    return float(p)


def liquid_gas_partials(R, Q, lg: LiquidGasParams):
    """(p, dp/dR, dp/dQ) of the liquid-gas law; needs sqrt(b^2 + c) > 0."""
    R, Q = _as_density_arrays(R, Q)
    p, root = _liquid_gas_arrays(R, Q, lg)
    if np.any(root <= 0):
        raise ValidationError("liquid-gas pressure is not differentiable where b = c = 0")
    dp_dR = p / root
    dp_dQ = lg.a0 * (p + 2.0 * lg.C_const * lg.k0) / root
    return p, dp_dR, dp_dQ


def pressure_fluid_particle(state: MixtureState, fp: FluidParticleParams) -> float:
    return float(state.R) ** fp.gamma + float(state.Q) ** fp.beta


def fluid_particle_partials(R, Q, fp: FluidParticleParams):
    """(p, dp/dR, dp/dQ) of p = R**gamma + Q**beta."""
    R, Q = _as_density_arrays(R, Q)
    p = R ** fp.gamma + Q ** fp.beta
    return p, fp.gamma * R ** (fp.gamma - 1.0), fp.beta * Q ** (fp.beta - 1.0)


# ── Law selection ───────────────────────────────────────────────────────────

@dataclass(frozen=True)
class PressureState:
    """Pressure, sound speed squared (dp/drho at fixed s) and Z (two_fluid only)."""
    p: np.ndarray
    sound_speed_squared: np.ndarray
    Z: np.ndarray | None


@dataclass(frozen=True)
class EquationOfState:
    """One of the three pressure laws together with its parameters."""
    kind: str
    two_fluid: PhaseParams | None = None
    liquid_gas: LiquidGasParams | None = None
    fluid_particle: FluidParticleParams | None = None

    def __post_init__(self):
        if self.kind not in EOS_KINDS:
            raise ValidationError(f"unknown eos kind '{self.kind}', expected one of {', '.join(EOS_KINDS)}")
        if getattr(self, self.kind) is None:
            raise ValidationError(f"eos kind '{self.kind}' needs its parameters")

    @classmethod
    def two_fluid_law(cls, gamma_plus: float, gamma_minus: float) -> 'EquationOfState':
        return cls('two_fluid', two_fluid=PhaseParams(gamma_plus, gamma_minus))

    @classmethod
    def liquid_gas_law(cls, C_const: float, k0: float, a0: float) -> 'EquationOfState':
        return cls('liquid_gas', liquid_gas=LiquidGasParams(C_const, k0, a0))

    @classmethod
    def fluid_particle_law(cls, gamma: float, beta: float) -> 'EquationOfState':
        return cls('fluid_particle', fluid_particle=FluidParticleParams(gamma, beta))

    def evaluate(self, R, Q) -> PressureState:
        """Pressure and dp/drho|_s on arrays of partial densities (R + Q > 0)."""
        if self.kind == 'two_fluid':
            result = solve_Z_field(R, Q, self.two_fluid)
            return PressureState(result.p, result.dp_drho_at_fixed_s, result.Z)

        R, Q = _as_density_arrays(R, Q, allow_total_vacuum=False)
        if self.kind == 'liquid_gas':
            p, dp_dR, dp_dQ = liquid_gas_partials(R, Q, self.liquid_gas)
        else:
            p, dp_dR, dp_dQ = fluid_particle_partials(R, Q, self.fluid_particle)
        c2 = (R * dp_dR + Q * dp_dQ) / (R + Q)
        return PressureState(p, c2, None)

    def pressure(self, R, Q):
        return self.evaluate(R, Q).p

    def sound_speed_squared(self, R, Q):
        return self.evaluate(R, Q).sound_speed_squared

    def describe(self) -> str:
        params = getattr(self, self.kind)
        values = ', '.join(f"{k}={v:g}" for k, v in vars(params).items())
        return f"{self.kind}({values})"
