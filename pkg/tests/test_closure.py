"""Tests for the pressure closure Z(R, Q) and the alternative pressure laws."""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import bisect

from closure import (
    EquationOfState, FluidParticleParams, LiquidGasParams, MixtureState, PhaseParams,
    closure_derivatives_fd_check, closure_function, closure_residual, fluid_particle_partials,
    liquid_gas_partials, pressure_fluid_particle, pressure_liquid_gas, solve_Z, solve_Z_field,
    upper_bracket, z_bounds,
)
from errors import ValidationError


def _log_uniform(rng, low, high, size):
    return 10.0 ** rng.uniform(math.log10(low), math.log10(high), size)


# ── Parameters and states ───────────────────────────────────────────────────

class TestPhaseParams:
    """Adiabatic exponents must exceed 1."""

    def test_gamma_is_ratio(self):
        assert PhaseParams(3.0, 1.5).gamma == 2.0

    def test_rejects_gamma_plus_below_one(self):
        with pytest.raises(ValidationError, match='gamma_plus must exceed 1'):
            PhaseParams(0.9, 2.0)

    def test_rejects_gamma_minus_equal_one(self):
        with pytest.raises(ValidationError, match='gamma_minus must exceed 1'):
            PhaseParams(2.0, 1.0)

    def test_rejects_nan(self):
        with pytest.raises(ValidationError):
            PhaseParams(float('nan'), 2.0)


class TestMixtureState:

    def test_negative_density_rejected(self):
        with pytest.raises(ValidationError):
            MixtureState(-1.0, 1.0)

    def test_infinite_density_rejected(self):
        with pytest.raises(ValidationError):
            MixtureState(1.0, float('inf'))

    def test_single_phase_allowed(self):
        MixtureState(0.0, 1.0)
        MixtureState(1.0, 0.0)


# ── Root solve ──────────────────────────────────────────────────────────────

class TestSolveZ:
    """The closure root and its guarantees."""

    def test_equal_gammas_closed_form(self, equal_gammas):
        result = solve_Z(MixtureState(1.0, 1.0), equal_gammas)
        assert result.Z == pytest.approx(2.0, rel=1e-15)
        assert result.p == pytest.approx(4.0, rel=1e-15)
        assert result.alpha == pytest.approx(0.5, rel=1e-15)

    def test_pure_plus_phase(self, unequal_gammas):
        result = solve_Z(MixtureState(3.0, 0.0), unequal_gammas)
        assert result.Z == 3.0
        assert result.alpha == 1.0

    def test_pure_minus_phase(self, unequal_gammas):
        result = solve_Z(MixtureState(0.0, 4.0), unequal_gammas)
        assert result.Z == pytest.approx(4.0 ** (1.0 / unequal_gammas.gamma), rel=1e-15)
        assert result.alpha == 0.0

    def test_total_vacuum_rejected(self, unequal_gammas):
        with pytest.raises(ValidationError, match='vacuum'):
            solve_Z(MixtureState(0.0, 0.0), unequal_gammas)

    def test_matches_bisection_oracle(self, rng):
        params = PhaseParams(2.4, 1.3)
        for R, Q in zip(_log_uniform(rng, 1e-3, 1e3, 50), _log_uniform(rng, 1e-3, 1e3, 50)):
            hi = float(upper_bracket(R, Q, params.gamma))
            oracle = bisect(closure_function, R, hi, args=(R, Q, params.gamma), xtol=1e-15 * hi, rtol=1e-15)
            assert solve_Z(MixtureState(R, Q), params).Z == pytest.approx(oracle, rel=1e-12)

    def test_random_states_residual_and_bracket(self, rng):
        """10^4 states over random exponent pairs: residual and bracket hold."""
        for _ in range(50):
            params = PhaseParams(rng.uniform(1.0, 5.0) + 1e-9, rng.uniform(1.0, 5.0) + 1e-9)
            R = _log_uniform(rng, 1e-3, 1e3, 200)
            Q = _log_uniform(rng, 1e-3, 1e3, 200)
            result = solve_Z_field(R, Q, params)
            assert np.all(closure_residual(result.Z, R, Q, params) <= 1e-12)
            assert np.all(result.Z >= R)
            assert np.all(result.Z <= upper_bracket(R, Q, params.gamma) * (1 + 1e-15))
            assert np.all(result.dp_drho_at_fixed_s > 0)

    def test_equal_gammas_collapse_on_random_states(self, rng):
        params = PhaseParams(2.5, 2.5)
        R = _log_uniform(rng, 1e-3, 1e3, 10_000)
        Q = _log_uniform(rng, 1e-3, 1e3, 10_000)
        Z = solve_Z_field(R, Q, params).Z
        np.testing.assert_allclose(Z, R + Q, rtol=1e-12)

    def test_field_keeps_shape(self, unequal_gammas):
        R = np.full((4, 3), 0.5)
        Q = np.full((4, 3), 2.0)
        result = solve_Z_field(R, Q, unequal_gammas)
        assert result.Z.shape == (4, 3)
        assert result.dZ_dQ.shape == (4, 3)

    def test_z_bounds_contain_pointwise_roots(self, rng, unequal_gammas):
        R = _log_uniform(rng, 1e-2, 1e2, 500)
        Q = _log_uniform(rng, 1e-2, 1e2, 500)
        lower, upper = z_bounds(R, Q, unequal_gammas)
        Z = solve_Z_field(R, Q, unequal_gammas).Z
        assert lower == np.min(R)
        assert np.all((Z >= lower) & (Z <= upper))


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.floats(1.01, 5.0))
def test_equal_gammas_give_total_density(R, Q, gamma_plus):
    Z = solve_Z(MixtureState(R, Q), PhaseParams(gamma_plus, gamma_plus)).Z
    assert Z == pytest.approx(R + Q, rel=1e-12)


# ── Derivatives ─────────────────────────────────────────────────────────────

class TestDerivatives:
    """Implicit differentiation against centred differences through full solves."""

    def test_random_states_match_finite_differences(self, rng):
        for _ in range(1000):
            params = PhaseParams(rng.uniform(1.2, 3.0), rng.uniform(1.2, 3.0))
            state = MixtureState(rng.uniform(0.2, 5.0), rng.uniform(0.2, 5.0))
            assert closure_derivatives_fd_check(state, params, h=1e-6) <= 1e-6
            assert solve_Z(state, params).dp_drho_at_fixed_s > 0

    def test_relative_step_over_wide_density_range(self, rng):
        for _ in range(500):
            params = PhaseParams(rng.uniform(1.1, 3.0), rng.uniform(1.1, 3.0))
            R, Q = 10.0 ** rng.uniform(-2, 2, 2)
            assert closure_derivatives_fd_check(MixtureState(R, Q), params) <= 1e-6

    def test_relative_step_must_be_below_one(self, unequal_gammas):
        with pytest.raises(ValidationError, match='relative step'):
            closure_derivatives_fd_check(MixtureState(1.0, 1.0), unequal_gammas, rel_step=1.0)

    def test_equal_gammas_sound_speed(self, equal_gammas):
        result = solve_Z(MixtureState(1.0, 2.0), equal_gammas)
        # p = rho^2, so dp/drho = 2 rho
        assert result.dp_drho_at_fixed_s == pytest.approx(6.0, rel=1e-14)
        assert result.dZ_dR == pytest.approx(1.0, rel=1e-14)
        assert result.dZ_dQ == pytest.approx(1.0, rel=1e-14)

    def test_fd_check_needs_mixed_state(self, unequal_gammas):
        with pytest.raises(ValidationError):
            closure_derivatives_fd_check(MixtureState(1.0, 0.0), unequal_gammas)

    def test_fd_step_must_be_small(self, unequal_gammas):
        with pytest.raises(ValidationError):
            closure_derivatives_fd_check(MixtureState(1e-7, 1.0), unequal_gammas, h=1e-6)


# ── Alternative laws ────────────────────────────────────────────────────────

def _naive_liquid_gas(R, Q, lg):
    b = lg.k0 - R - lg.a0 * Q
    c = 4.0 * lg.k0 * lg.a0 * Q
    return lg.C_const * (-b + math.sqrt(b * b + c))


class TestLiquidGas:

    def test_pressure_matches_textbook_form(self, rng):
        lg = LiquidGasParams(2.0, 1.0, 0.5)
        for R, Q in rng.uniform(0.5, 2.0, size=(100, 2)):
            assert pressure_liquid_gas(MixtureState(R, Q), lg) == pytest.approx(_naive_liquid_gas(R, Q, lg), rel=1e-9)

    def test_large_positive_b_keeps_digits(self):
        lg = LiquidGasParams(1.0, 1e8, 1.0)
        # -b + sqrt(b^2 + c) cancels here; the limit is c / (2b) = 2 a0 k0 Q / b
        p = pressure_liquid_gas(MixtureState(1.0, 1e-3), lg)
        b = 1e8 - 1.0 - 1e-3
        assert p == pytest.approx(2.0 * 1e8 * 1e-3 / b, rel=1e-10)

    def test_partials_match_finite_differences(self, rng):
        lg = LiquidGasParams(1.5, 2.0, 0.7)
        h = 1e-6
        for R, Q in rng.uniform(0.5, 3.0, size=(50, 2)):
            _, dp_dR, dp_dQ = liquid_gas_partials(np.array(R), np.array(Q), lg)
            fd_R = (pressure_liquid_gas(MixtureState(R + h, Q), lg) - pressure_liquid_gas(MixtureState(R - h, Q), lg)) / (2 * h)
            fd_Q = (pressure_liquid_gas(MixtureState(R, Q + h), lg) - pressure_liquid_gas(MixtureState(R, Q - h), lg)) / (2 * h)
            assert float(dp_dR) == pytest.approx(fd_R, rel=1e-6)
            assert float(dp_dQ) == pytest.approx(fd_Q, rel=1e-6)

    def test_parameters_must_be_positive(self):
        with pytest.raises(ValidationError, match='k0'):
            LiquidGasParams(1.0, 0.0, 1.0)


class TestFluidParticle:

    def test_pressure_and_partials(self):
        fp = FluidParticleParams(1.4, 2.0)
        assert pressure_fluid_particle(MixtureState(2.0, 3.0), fp) == pytest.approx(2.0 ** 1.4 + 9.0)
        p, dp_dR, dp_dQ = fluid_particle_partials(np.array([2.0]), np.array([3.0]), fp)
        assert dp_dR[0] == pytest.approx(1.4 * 2.0 ** 0.4)
        assert dp_dQ[0] == pytest.approx(6.0)

    def test_exponent_below_one_rejected(self):
        with pytest.raises(ValidationError, match='beta'):
            FluidParticleParams(1.4, 0.5)


class TestEquationOfState:
    """Law selection and the common sound speed."""

    @pytest.mark.parametrize('eos', [
        EquationOfState.two_fluid_law(3.0, 1.5),
        EquationOfState.liquid_gas_law(1.5, 2.0, 0.7),
        EquationOfState.fluid_particle_law(1.4, 2.0),
    ], ids=lambda e: e.kind)
    def test_sound_speed_is_pressure_derivative_at_fixed_ratio(self, eos):
        rho, s, h = 1.7, 0.8, 1e-6

        def p_at(density):
            R = np.array([density * s / (1 + s)])
            return float(eos.pressure(R, R / s)[0])

        R = np.array([rho * s / (1 + s)])
        c2 = float(eos.sound_speed_squared(R, R / s)[0])
        assert c2 == pytest.approx((p_at(rho + h) - p_at(rho - h)) / (2 * h), rel=1e-6)

    def test_two_fluid_reports_Z(self):
        state = EquationOfState.two_fluid_law(2.0, 2.0).evaluate(np.array([1.0]), np.array([1.0]))
        assert state.Z[0] == pytest.approx(2.0)

    def test_alternative_laws_have_no_Z(self):
        state = EquationOfState.fluid_particle_law(1.4, 2.0).evaluate(np.array([1.0]), np.array([1.0]))
        assert state.Z is None

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValidationError, match='unknown eos kind'):
            EquationOfState('stiffened')

    def test_missing_parameters_rejected(self):
        with pytest.raises(ValidationError, match='needs its parameters'):
            EquationOfState('liquid_gas')

    def test_describe_names_parameters(self):
        text = EquationOfState.two_fluid_law(2.0, 1.5).describe()
        assert text.startswith('two_fluid(')
        assert 'gamma_plus=2' in text
