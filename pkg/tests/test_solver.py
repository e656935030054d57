"""Tests for the finite-volume solver: fluxes, walls, time loop and initial data."""
import math
from unittest.mock import patch

import numpy as np
import pytest

import solver
from closure import EquationOfState
from errors import NumericalAbort, ValidationError
from grid import Grid
from solver import (
    ConservedField, Patch, PiecewiseConstantIC, SolverConfig, apply_periodic_bc, apply_reflecting_bc,
    make_piecewise_ic, physical_flux, run, rusanov_step,
)
from tests.factories import constant_field, sod_field


def _relative_drift(before, after):
    return abs(after - before) / abs(before)


# ── Physical flux ───────────────────────────────────────────────────────────

class TestPhysicalFlux:

    def test_fluid_at_rest(self, two_fluid_eos):
        F_R, F_Q, F_m = physical_flux(1.0, 1.0, np.zeros(3), np.array([1.0, 0.0, 0.0]), two_fluid_eos)
        assert F_R == 0.0 and F_Q == 0.0
        np.testing.assert_allclose(F_m, [4.0, 0.0, 0.0])

    def test_matches_hand_evaluation(self, two_fluid_eos):
        # u = m / rho = 2, p = rho^2 = 4
        F_R, F_Q, F_m = physical_flux(1.0, 1.0, np.array([4.0, 0.0, 0.0]), np.array([1.0, 0.0, 0.0]), two_fluid_eos)
        assert F_R == pytest.approx(2.0)
        assert F_Q == pytest.approx(2.0)
        np.testing.assert_allclose(F_m, [4.0 * 2.0 + 4.0, 0.0, 0.0])

    def test_convective_part_moves_with_normal_velocity(self, rng):
        eos = EquationOfState.two_fluid_law(2.6, 1.7)
        R = rng.uniform(0.1, 5.0, 50)
        Q = rng.uniform(0.1, 5.0, 50)
        m = rng.normal(size=(3, 50))
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        F_R, F_Q, F_m = physical_flux(R, Q, m, n, eos)
        un = n @ m / (R + Q)
        np.testing.assert_allclose(F_R / R, un, rtol=1e-13)
        np.testing.assert_allclose(F_Q / Q, un, rtol=1e-13)
        p = eos.pressure(R, Q)
        np.testing.assert_allclose(F_m - p * n[:, None], m * un, rtol=1e-12, atol=1e-12)

    def test_vacuum_rejected(self, two_fluid_eos):
        with pytest.raises(ValidationError, match='vacuum'):
            physical_flux(1.0, 0.0, np.zeros(3), np.array([1.0, 0.0, 0.0]), two_fluid_eos)


# ── Boundary conditions ─────────────────────────────────────────────────────

class TestBoundaries:

    def test_reflecting_ghost_mirrors_with_normal_momentum_negated(self):
        grid = Grid.uniform(2)
        field = ConservedField(grid, [2.0, 1.0], [2.0, 1.0], [[0.5, 3.0]])
        R, Q, m = apply_reflecting_bc(field)
        assert (R[-1], Q[-1], m[0, -1]) == (1.0, 1.0, -3.0)
        assert (R[0], Q[0], m[0, 0]) == (2.0, 2.0, -0.5)

    def test_reflecting_keeps_tangential_momentum(self):
        grid = Grid.uniform(2, 2)
        m = np.stack([np.full((2, 2), 1.5), np.full((2, 2), -0.25)])
        field = ConservedField(grid, np.ones((2, 2)), np.ones((2, 2)), m)
        _, _, padded = apply_reflecting_bc(field, axis=0)
        assert padded[0, 0, 0] == -1.5
        assert padded[1, 0, 0] == -0.25

    def test_wall_mass_flux_vanishes(self, two_fluid_eos):
        grid = Grid.uniform(3)
        field = ConservedField(grid, [1.0, 1.2, 0.9], [1.0, 0.8, 1.1], [[0.3, -0.2, 0.7]])
        R, Q, m = apply_reflecting_bc(field)
        F_R, _, _ = physical_flux(R, Q, m, np.array([1.0]), two_fluid_eos)
        c = np.sqrt(two_fluid_eos.sound_speed_squared(R, Q))
        s = np.abs(m[0] / (R + Q)) + c
        for ghost, inner in ((0, 1), (-1, -2)):
            wall = 0.5 * (F_R[ghost] + F_R[inner]) - 0.5 * max(s[ghost], s[inner]) * (R[inner] - R[ghost])
            assert wall == 0.0

    def test_periodic_ghosts_wrap(self):
        field = ConservedField(Grid.uniform(3), [1.0, 2.0, 3.0], [1.0, 1.0, 1.0], [[0.1, 0.2, 0.3]])
        R, _, m = apply_periodic_bc(field)
        np.testing.assert_array_equal(R, [3.0, 1.0, 2.0, 3.0, 1.0])
        np.testing.assert_array_equal(m[0], [0.3, 0.1, 0.2, 0.3, 0.1])


# ── Rusanov step ────────────────────────────────────────────────────────────

class TestRusanovStep:
    """One explicit step and its exact properties."""

    @pytest.mark.parametrize('bc, u', [('reflecting', (0.0, 0.0)), ('periodic', (0.4, -0.3))])
    def test_constant_state_preserved(self, two_fluid_eos, bc, u):
        field = constant_field(Grid.uniform(16, 8), R=1.0, Q=2.0, u=u)
        config = SolverConfig(two_fluid_eos, t_end=1.0, bc=bc)
        start = field.copy()
        for _ in range(100):
            field, _ = rusanov_step(field, config)
        np.testing.assert_allclose(field.R, start.R, rtol=1e-15, atol=0)
        np.testing.assert_allclose(field.Q, start.Q, rtol=1e-15, atol=0)
        np.testing.assert_allclose(field.m, start.m, rtol=1e-14, atol=1e-15)

    @pytest.mark.parametrize('bc', ['reflecting', 'periodic'])
    def test_masses_conserved_over_100_steps(self, rng, bc):
        eos = EquationOfState.two_fluid_law(2.2, 1.6)
        grid = Grid.uniform(32, 16)
        field = ConservedField(grid, rng.uniform(0.5, 1.5, grid.shape), rng.uniform(0.5, 1.5, grid.shape),
                               rng.normal(scale=0.2, size=(2,) + grid.shape))
        config = SolverConfig(eos, t_end=1.0, cfl=0.8, bc=bc)
        mass_R, mass_Q = field.mass_R(), field.mass_Q()
        for _ in range(100):
            field, _ = rusanov_step(field, config)
        assert _relative_drift(mass_R, field.mass_R()) <= 1e-14
        assert _relative_drift(mass_Q, field.mass_Q()) <= 1e-14

    def test_proportional_densities_stay_proportional(self):
        eos = EquationOfState.two_fluid_law(1.8, 1.8)
        field = sod_field(64)
        field = ConservedField(field.grid, 2.0 * field.Q, field.Q, field.m)
        config = SolverConfig(eos, t_end=0.1)
        for _ in range(50):
            field, _ = rusanov_step(field, config)
        np.testing.assert_allclose(field.R / field.Q, 2.0, rtol=1e-10)

    def test_default_dt_uses_cfl(self, two_fluid_eos):
        field = constant_field(Grid.uniform(10), R=1.0, Q=1.0)
        _, dt = rusanov_step(field, SolverConfig(two_fluid_eos, t_end=1.0, cfl=0.5))
        # c = sqrt(2 rho) = 2, dx = 0.1
        assert dt == pytest.approx(0.5 * 0.1 / 2.0)

    def test_dt_above_cfl_limit_rejected(self, two_fluid_eos):
        field = constant_field(Grid.uniform(10), R=1.0, Q=1.0)
        with pytest.raises(ValidationError, match='CFL'):
            rusanov_step(field, SolverConfig(two_fluid_eos, t_end=1.0, cfl=0.5), dt=0.1)

    def test_vacuum_aborts(self, two_fluid_eos):
        field = constant_field(Grid.uniform(4), R=1.0, Q=1.0)
        field.Q[2] = 1e-13
        with pytest.raises(NumericalAbort, match='floor'):
            rusanov_step(field, SolverConfig(two_fluid_eos, t_end=1.0))

    def test_nan_aborts(self, two_fluid_eos):
        field = constant_field(Grid.uniform(4), R=1.0, Q=1.0)
        field.m[0, 1] = np.nan
        with pytest.raises(NumericalAbort, match='non-finite'):
            rusanov_step(field, SolverConfig(two_fluid_eos, t_end=1.0))

    def test_thread_pool_gives_identical_result(self, rng):
        eos = EquationOfState.two_fluid_law(2.5, 1.5)
        grid = Grid.uniform(128, 96)
        field = ConservedField(grid, rng.uniform(0.5, 1.5, grid.shape), rng.uniform(0.5, 1.5, grid.shape),
                               np.zeros((2,) + grid.shape))
        config = SolverConfig(eos, t_end=1.0)
        serial, dt = rusanov_step(field, config)
        with patch('solver.TWOFLUID_THREADS', 4):
            threaded, dt_threaded = rusanov_step(field, config)
        assert dt == dt_threaded
        np.testing.assert_array_equal(serial.R, threaded.R)
        np.testing.assert_array_equal(serial.m, threaded.m)


# ── Time loop ───────────────────────────────────────────────────────────────

class TestRun:

    def test_respects_cfl_and_lands_on_t_end(self, two_fluid_eos):
        result = run(sod_field(100), SolverConfig(two_fluid_eos, t_end=0.05, cfl=0.7))
        assert result.max_courant <= 0.7 * (1 + 1e-12)
        assert result.trace[-1].t == 0.05
        assert result.snapshots[-1].t == 0.05

    def test_snapshot_dt_gives_uniform_times(self, two_fluid_eos):
        result = run(sod_field(50), SolverConfig(two_fluid_eos, t_end=0.04, snapshot_dt=0.01))
        times = [s.t for s in result.snapshots]
        assert times == pytest.approx([0.0, 0.01, 0.02, 0.03, 0.04], rel=1e-14)
        assert times[-1] == 0.04

    def test_stride_thins_snapshots(self, two_fluid_eos):
        result = run(sod_field(50), SolverConfig(two_fluid_eos, t_end=0.05, stride=3))
        steps = [s.step for s in result.snapshots]
        assert all(step % 3 == 0 for step in steps[:-1])
        assert steps[-1] == result.trace[-1].step

    def test_trace_energy_is_non_increasing_on_sod(self, two_fluid_eos):
        result = run(sod_field(200), SolverConfig(two_fluid_eos, t_end=0.1))
        energies = [row.energy for row in result.trace]
        for before, after in zip(energies, energies[1:]):
            assert after <= before * (1 + 1e-10)

    def test_alternative_law_trace_has_nan_energy(self):
        eos = EquationOfState.fluid_particle_law(1.4, 2.0)
        result = run(sod_field(20), SolverConfig(eos, t_end=0.01))
        assert all(math.isnan(row.energy) for row in result.trace)

    def test_max_steps_aborts(self, two_fluid_eos):
        with pytest.raises(NumericalAbort, match='max_steps'):
            run(sod_field(50), SolverConfig(two_fluid_eos, t_end=1.0, max_steps=3))

    def test_sod_self_convergence(self, two_fluid_eos):
        """L1 error against an N=4096 reference decays at order >= 0.8."""
        config = SolverConfig(two_fluid_eos, t_end=0.15)
        reference = run(sod_field(4096), config).final
        ref_rho = reference.rho
        sizes = [128, 256, 512, 1024]
        errors = []
        for n in sizes:
            rho = run(sod_field(n), config).final.rho
            averaged = ref_rho.reshape(n, 4096 // n).mean(axis=1)
            errors.append(float(np.sum(np.abs(rho - averaged))) / n)
        order = -np.polyfit(np.log(sizes), np.log(errors), 1)[0]
        assert order >= 0.8


class TestSolverConfig:

    @pytest.mark.parametrize('kwargs, message', [
        ({'cfl': 0.0}, 'cfl must lie in'),
        ({'cfl': 1.5}, 'cfl must lie in'),
        ({'t_end': -1.0}, 't_end must be positive'),
        ({'flux': 'hllc'}, 'flux must be one of'),
        ({'bc': 'outflow'}, 'bc must be one of'),
        ({'stride': 0}, 'stride must be at least 1'),
        ({'snapshot_dt': 0.3}, 'whole number'),
    ])
    def test_invalid_settings(self, two_fluid_eos, kwargs, message):
        settings = {'t_end': 1.0, **kwargs}
        with pytest.raises(ValidationError, match=message):
            SolverConfig(two_fluid_eos, **settings)


def test_threads_env_falls_back_on_garbage(monkeypatch):
    monkeypatch.setenv('TWOFLUID_THREADS', 'many')
    assert solver._threads_from_env() == 1
    monkeypatch.setenv('TWOFLUID_THREADS', '3')
    assert solver._threads_from_env() == 3


# ── Initial data ────────────────────────────────────────────────────────────

def _patch(name, lower, upper, R=1.0, Q=1.0, u=(0.0, 0.0, 0.0)):
    return Patch(name, lower, upper, R, Q, u)


class TestPiecewiseIC:

    def test_single_patch_gives_constant_field(self):
        grid = Grid.uniform(8, 4)
        spec = PiecewiseConstantIC((_patch('a', (0.0, 0.0), (1.0, 1.0), R=0.3, Q=0.7, u=(1.0, -2.0, 0.0)),))
        field = make_piecewise_ic(spec, grid)
        assert np.all(field.R == 0.3) and np.all(field.Q == 0.7)
        assert np.all(field.m[0] == 1.0) and np.all(field.m[1] == -2.0)

    def test_two_halves_step_at_cell_boundary(self):
        grid = Grid.uniform(10)
        spec = PiecewiseConstantIC((_patch('left', (0.0,), (0.5,), R=2.0), _patch('right', (0.5,), (1.0,), R=1.0)))
        field = make_piecewise_ic(spec, grid)
        np.testing.assert_array_equal(field.R, [2.0] * 5 + [1.0] * 5)

    def test_random_tiling_matches_point_location(self, rng):
        grid = Grid.uniform(20, 20)
        cx, cy = rng.uniform(0.2, 0.8, 2)
        patches = []
        for i, (xs, ys) in enumerate([((0, cx), (0, cy)), ((cx, 1), (0, cy)), ((0, cx), (cy, 1)), ((cx, 1), (cy, 1))]):
            patches.append(_patch(f"p{i}", (xs[0], ys[0]), (xs[1], ys[1]), R=float(i + 1), Q=1.0))
        field = make_piecewise_ic(PiecewiseConstantIC(tuple(patches)), grid)
        x, y = grid.centers()
        expected = 1.0 + (x >= cx) + 2.0 * (y >= cy)
        np.testing.assert_array_equal(field.R, expected)

    def test_overlap_names_both_patches(self):
        with pytest.raises(ValidationError, match='patches a and b overlap'):
            PiecewiseConstantIC((_patch('a', (0.0,), (0.6,)), _patch('b', (0.4,), (1.0,))))

    def test_gap_in_coverage_rejected(self):
        grid = Grid.uniform(10)
        spec = PiecewiseConstantIC((_patch('a', (0.0,), (0.4,)), _patch('b', (0.6,), (1.0,))))
        with pytest.raises(ValidationError, match='do not cover'):
            spec.check_covers(grid)
        with pytest.raises(ValidationError, match='not covered'):
            make_piecewise_ic(spec, grid)

    def test_non_positive_density_rejected(self):
        with pytest.raises(ValidationError, match='strictly positive'):
            _patch('a', (0.0,), (1.0,), R=0.0)

    def test_out_of_plane_velocity_rejected(self):
        spec = PiecewiseConstantIC((_patch('a', (0.0,), (1.0,), u=(0.0, 1.0, 0.0)),))
        with pytest.raises(ValidationError, match='out-of-plane'):
            make_piecewise_ic(spec, Grid.uniform(4))
