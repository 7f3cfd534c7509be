"""Stochastic Galerkin BGK solver."""

from __future__ import annotations

import math

import numpy as np
import pytest

from sg_traffic.chaos.galerkin import reconstruct_nodal
from sg_traffic.initial import RiemannData
from sg_traffic.models.kinetic import (
    EquilibriumMonitor,
    KineticField,
    KineticGrid,
    bgk_step,
    build_equilibrium,
    closure_residual,
    equilibrium_residuals,
    init_equilibrium,
    kinetic_moments,
    run_kinetic,
)
from sg_traffic.models.macro import MacroGrid, MacroModel, run_macro
from sg_traffic.utils.error import CFLViolationError, EquilibriumError


def grid_for(n_cells=20, n_velocities=40, epsilon=1e-2, **kwargs):
    return KineticGrid(0.0, 2.0, n_cells, n_velocities, epsilon, **kwargs)


def test_zero_field_has_zero_moments():
    grid = grid_for()
    rho, q = kinetic_moments(KineticField(np.zeros((20, 40, 4))), grid)
    assert not rho.any()
    assert not q.any()


def test_single_velocity_cell_moments():
    grid = grid_for(n_cells=1, n_velocities=1, w_max=1.0)
    field = KineticField(np.array([[[0.6, 0.1]]]))
    rho, q = kinetic_moments(field, grid)
    assert rho == pytest.approx([[0.6, 0.1]])
    assert q == pytest.approx(0.5 * rho)


def test_default_velocity_bound_covers_hesitation():
    assert grid_for().velocity_bound == pytest.approx(2.0)
    assert grid_for(hesitation="zero").velocity_bound == pytest.approx(1.0)


def test_deterministic_equilibrium_moments(haar3):
    grid = grid_for()
    rho = np.array([[0.4, 0.0, 0.0, 0.0]])
    equilibrium = build_equilibrium(rho, grid, haar3.basis)
    assert equilibrium.shape == (1, 40, 4)
    assert np.max(np.abs(equilibrium[..., 1:])) <= 1e-14
    mass = equilibrium[0, :, 0].sum() * grid.dw
    flux = (grid.w_centers * equilibrium[0, :, 0]).sum() * grid.dw
    assert mass == pytest.approx(0.4, abs=1e-14)
    # mean desired speed V_eq + h = 1 for Greenshields with linear hesitation
    assert flux / mass == pytest.approx(1.0, abs=grid.dw)


@pytest.mark.parametrize("n_velocities", [20, 40, 80])
def test_equilibrium_conditions(haar15, n_velocities):
    grid = grid_for(n_velocities=n_velocities, hesitation="quadratic")
    basis = haar15.basis
    rng = np.random.default_rng(n_velocities)
    nodal = rng.uniform(0.05, 0.95, (5, 128))
    rho = nodal @ basis.weighted_matrix
    equilibrium = build_equilibrium(rho, grid, basis)
    um1, um2 = equilibrium_residuals(equilibrium, rho, grid, haar15)
    assert um1 <= 1e-10
    assert um2 <= grid.dw


def test_narrow_box_falls_back_to_lever_rule(haar0):
    grid = grid_for(equilibrium_width=0.0)
    equilibrium = build_equilibrium(np.array([[0.5]]), grid, haar0.basis)
    occupied = np.flatnonzero(equilibrium[0, :, 0])
    assert len(occupied) <= 2
    assert equilibrium[0, :, 0].sum() * grid.dw == pytest.approx(0.5)


def test_equilibrium_rejects_vacuum(haar1):
    with pytest.raises(EquilibriumError, match="outside"):
        build_equilibrium(np.array([[0.3, 0.3]]), grid_for(), haar1.basis)


def test_uniform_equilibrium_is_stationary(haar3):
    grid = grid_for(boundary="periodic")
    rho = np.tile([0.5, 0.1, -0.05, 0.02], (20, 1))
    field = KineticField(build_equilibrium(rho, grid, haar3.basis))
    stepped = bgk_step(field, grid, haar3, 0.005)
    assert np.max(np.abs(stepped.values - field.values)) <= 1e-12


def test_single_velocity_is_upwind_advection(haar0):
    grid = KineticGrid(0.0, 1.0, 10, 1, 1e6, w_max=1.0, hesitation="zero")
    values = np.full((10, 1, 1), 0.2)
    values[:5] = 0.8
    dt = 0.9 * grid.dx
    stepped = bgk_step(KineticField(values), grid, haar0, dt)
    courant = grid.w_centers[0] * dt / grid.dx
    upwind = values.copy()
    upwind[1:] -= courant * (values[1:] - values[:-1])
    assert stepped.values == pytest.approx(upwind, abs=1e-14)
    assert stepped.time == pytest.approx(dt)


def test_relaxation_contracts_towards_equilibrium(haar0):
    grid = grid_for(epsilon=1e-3, boundary="periodic")
    equilibrium = build_equilibrium(np.full((20, 1), 0.5), grid, haar0.basis)
    perturbation = np.zeros_like(equilibrium)
    perturbation[:, 10, 0] = 0.05
    perturbation[:, 30, 0] = -0.05
    field = KineticField(equilibrium + perturbation)
    dt = 2e-3
    stepped = bgk_step(field, grid, haar0, dt)
    before = np.max(np.abs(field.values - equilibrium))
    after = np.max(np.abs(stepped.values - equilibrium))
    assert after <= before * math.exp(-dt / grid.epsilon) * (1.0 + 1e-6) + 1e-14


def test_cfl_violation_is_reported(haar0):
    grid = grid_for()
    field = init_equilibrium(grid, haar0.basis, RiemannData(0.5, 0.5, 0.5))
    with pytest.raises(CFLViolationError, match="Courant"):
        bgk_step(field, grid, haar0, grid.dx)


def test_periodic_run_conserves_mass(haar3):
    grid = grid_for(boundary="periodic")
    data = RiemannData(0.75, 0.95, 0.2)
    run = run_kinetic(grid, haar3, data, t_final=0.2)
    rho0, _ = kinetic_moments(init_equilibrium(grid, haar3.basis, data), grid)
    start = rho0.sum(axis=0) * grid.dx
    end = run.snapshots[-1].rho.sum(axis=0) * grid.dx
    assert np.max(np.abs(end - start)) <= 1e-12
    assert run.monitor.max_um1 <= 1e-10
    assert run.monitor.builds == run.n_steps + 1
    assert run.n_steps == len(run.dt_history)


def test_run_records_requested_snapshots(haar0):
    grid = grid_for(n_cells=10, n_velocities=10)
    run = run_kinetic(grid, haar0, RiemannData(0.6, 0.6, 0.3), 0.2, output_times=[0.1])
    assert [s.time for s in run.snapshots] == pytest.approx([0.1, 0.2])
    rho = run.snapshots[-1].rho
    assert np.all(reconstruct_nodal(rho, haar0.basis) > 0.0)


def test_zero_hesitation_kinetic_density_follows_lwr(haar0):
    data = RiemannData(0.7, 0.7, 0.3)
    kinetic_grid = KineticGrid(0.0, 2.0, 50, 60, 1e-4, hesitation="zero")
    kinetic = run_kinetic(kinetic_grid, haar0, data, 0.3).snapshots[-1]
    macro_grid = MacroGrid(0.0, 2.0, 50, 0.3)
    lwr = run_macro(macro_grid, MacroModel("lwr"), haar0, data).snapshots[-1]
    difference = np.sum(np.abs(kinetic.rho[:, 0] - lwr.rho[:, 0])) * macro_grid.dx
    assert difference < 0.05


def test_closure_residual_vanishes_for_single_speed(haar0):
    grid = grid_for(n_cells=3, n_velocities=1, w_max=1.0, hesitation="zero")
    field = KineticField(np.full((3, 1, 1), 0.4))
    assert np.max(np.abs(closure_residual(field, grid, haar0))) <= 1e-14


def test_monitor_keeps_maxima():
    monitor = EquilibriumMonitor()
    monitor.record(1e-12, 0.01)
    monitor.record(1e-13, 0.02)
    assert (monitor.builds, monitor.max_um1, monitor.max_um2) == (2, 1e-12, 0.02)


def test_grid_validation():
    with pytest.raises(ValueError, match="relaxation"):
        grid_for(epsilon=0.0)
    with pytest.raises(ValueError, match="width"):
        grid_for(equilibrium_width=-0.1)
