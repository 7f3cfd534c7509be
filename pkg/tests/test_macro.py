"""Finite-volume stochastic Galerkin LWR and ARZ solvers."""

from __future__ import annotations

import numpy as np
import pytest

from sg_traffic.analysis import mean, variance
from sg_traffic.chaos.galerkin import project_nodal, reconstruct_nodal
from sg_traffic.initial import RiemannData
from sg_traffic.models.macro import (
    SPEED_FLOOR,
    MacroField,
    MacroGrid,
    MacroModel,
    arz_flux,
    fv_step,
    init_riemann,
    llf_numerical_flux,
    lwr_flux,
    max_wave_speed,
    require_hyperbolic,
    run_macro,
)
from sg_traffic.utils.error import DensityBoundsError, HyperbolicityError

LWR = MacroModel("lwr")
ARZ = MacroModel("arz")


def deterministic(value, n_modes):
    vector = np.zeros(n_modes)
    vector[0] = value
    return vector


def exact_greenshields_rarefaction(x, t, rho_left, rho_right, x0=1.0):
    """Entropy solution of rho_t + (rho (1 - rho))_x = 0 for rho_left > rho_right."""
    left_speed, right_speed = 1.0 - 2.0 * rho_left, 1.0 - 2.0 * rho_right
    xi = (x - x0) / t
    fan = 0.5 * (1.0 - xi)
    return np.where(xi <= left_speed, rho_left, np.where(xi >= right_speed, rho_right, fan))


def test_lwr_flux_deterministic(haar3):
    assert lwr_flux(deterministic(0.5, 4), haar3) == pytest.approx(deterministic(0.25, 4))
    assert lwr_flux(deterministic(1.0, 4), haar3) == pytest.approx(np.zeros(4), abs=1e-15)


def test_lwr_flux_matches_pointwise_projection(haar15):
    rng = np.random.default_rng(0)
    rho = project_nodal(rng.uniform(0.0, 1.0, 128), haar15.basis)
    nodal = reconstruct_nodal(rho, haar15.basis)
    oracle = project_nodal(nodal * (1.0 - nodal), haar15.basis)
    assert np.max(np.abs(lwr_flux(rho, haar15) - oracle)) <= 1e-12


def test_lwr_flux_of_uniform_left_state(haar1):
    # rho = 0.8 on the left half, 0.9 on the right half
    flux = lwr_flux(np.array([0.85, -0.05]), haar1)
    assert flux == pytest.approx([0.5 * (0.16 + 0.09), 0.5 * (0.16 - 0.09)])


def test_arz_flux_deterministic(haar0):
    flux_rho, flux_z = arz_flux(np.array([0.5]), np.array([0.4]), haar0)
    assert flux_rho == pytest.approx([0.15])
    assert flux_z == pytest.approx([0.4**2 / 0.5 - 0.4 * 0.5])


def test_arz_flux_with_zero_z(haar3):
    rho = np.array([0.5, 0.1, 0.0, 0.05])
    flux_rho, flux_z = arz_flux(rho, np.zeros(4), haar3)
    nodal = reconstruct_nodal(rho, haar3.basis)
    assert flux_rho == pytest.approx(-project_nodal(nodal * nodal, haar3.basis), abs=1e-14)
    assert flux_z == pytest.approx(np.zeros(4), abs=1e-14)


def test_arz_flux_matches_pointwise_projection(haar15):
    rng = np.random.default_rng(1)
    basis = haar15.basis
    nodal_rho = rng.uniform(0.2, 0.9, 128)
    nodal_z = nodal_rho * (rng.uniform(0.0, 0.8, 128) + nodal_rho)
    flux_rho, flux_z = arz_flux(
        project_nodal(nodal_rho, basis), project_nodal(nodal_z, basis), haar15
    )
    assert flux_rho == pytest.approx(project_nodal(nodal_z - nodal_rho**2, basis), abs=1e-12)
    oracle = project_nodal(nodal_z**2 / nodal_rho - nodal_z * nodal_rho, basis)
    assert flux_z == pytest.approx(oracle, abs=1e-12)


def test_max_wave_speed_lwr_is_bounded(haar3):
    values = np.stack([deterministic(r, 4) for r in np.linspace(0.0, 1.0, 11)])[:, None, :]
    assert max_wave_speed(MacroField(values, LWR), haar3.basis) == pytest.approx(1.1)


def test_max_wave_speed_sonic_point_uses_floor(haar3):
    field = MacroField(deterministic(0.5, 4)[None, None, :], LWR)
    assert max_wave_speed(field, haar3.basis) == SPEED_FLOOR


def test_max_wave_speed_arz(haar0):
    # rho = 0.5, v = 0.3, h = rho: z = 0.5 * (0.3 + 0.5)
    field = MacroField(np.array([[[0.5], [0.4]]]), ARZ)
    assert max_wave_speed(field, haar0.basis) == pytest.approx(0.33)


def test_llf_consistency_and_diffusion():
    state = np.array([[0.3, 0.1]])
    other = np.array([[0.6, -0.2]])

    def square(u):
        return u**2

    def nothing(u):
        return np.zeros_like(u)

    assert llf_numerical_flux(state, state, square, 0.7) == pytest.approx(square(state))
    assert llf_numerical_flux(state, other, nothing, 0.5) == pytest.approx(-0.25 * (other - state))
    forward = llf_numerical_flux(state, other, nothing, 0.5)
    backward = llf_numerical_flux(other, state, nothing, 0.5)
    assert forward == pytest.approx(-backward)


def test_llf_rejects_nonpositive_speed():
    with pytest.raises(ValueError, match="positive"):
        llf_numerical_flux(np.ones(2), np.ones(2), lambda u: u, 0.0)


def test_constant_field_is_stationary(haar3):
    grid = MacroGrid(0.0, 1.0, 20, 0.1)
    field = MacroField(np.tile(np.array([0.4, 0.05, -0.02, 0.01]), (20, 1, 1)), LWR)
    stepped = fv_step(field, grid, haar3, 0.01)
    assert np.max(np.abs(stepped.values - field.values)) <= 1e-15


def test_init_riemann_projects_left_state(haar15):
    grid = MacroGrid(0.0, 2.0, 20, 1.0)
    field = init_riemann(grid, haar15.basis, RiemannData(0.75, 0.95, 0.2), LWR)
    assert field.rho[0, 0] == pytest.approx(0.85)
    assert field.rho[0, 1] == pytest.approx(-0.05)
    assert variance(field.rho[0]) == pytest.approx(0.04 / 12.0, rel=1e-2)
    assert field.rho[-1] == pytest.approx(deterministic(0.2, 16), abs=1e-15)


def test_init_riemann_arz_starts_at_equilibrium_velocity(haar0):
    grid = MacroGrid(0.0, 2.0, 4, 1.0)
    field = init_riemann(grid, haar0.basis, RiemannData(0.6, 0.6, 0.2), ARZ)
    # z = rho (1 - rho + rho) = rho
    assert field.z[:, 0] == pytest.approx(field.rho[:, 0])


def test_deterministic_left_state_has_one_mode(haar3):
    grid = MacroGrid(0.0, 2.0, 10, 1.0)
    field = init_riemann(grid, haar3.basis, RiemannData(0.8, 0.8, 0.2), LWR)
    assert np.max(np.abs(field.rho[:, 1:])) <= 1e-15


def test_rarefaction_matches_exact_solution(haar0):
    data = RiemannData(0.85, 0.85, 0.2)
    errors = []
    for n_cells in (100, 400):
        grid = MacroGrid(0.0, 2.0, n_cells, 0.5)
        final = run_macro(grid, LWR, haar0, data).snapshots[-1]
        exact = exact_greenshields_rarefaction(grid.x_centers, 0.5, 0.85, 0.2)
        errors.append(np.sum(np.abs(final.rho[:, 0] - exact)) * grid.dx)
    assert errors[0] < 0.05
    assert errors[1] < 0.7 * errors[0]


def test_periodic_run_conserves_every_mode(haar3):
    grid = MacroGrid(0.0, 2.0, 50, 0.5, boundary="periodic")
    run = run_macro(grid, LWR, haar3, RiemannData(0.75, 0.95, 0.2))
    assert np.max(run.conservation_drift) <= 1e-12
    assert run.n_steps == len(run.speed_history)


def test_deterministic_run_keeps_zero_variance(haar15):
    grid = MacroGrid(0.0, 2.0, 40, 0.5)
    run = run_macro(grid, LWR, haar15, RiemannData(0.8, 0.8, 0.2))
    final = run.snapshots[-1]
    assert np.max(np.abs(final.rho[:, 1:])) <= 1e-13
    assert np.max(variance(final.rho)) <= 1e-24


def test_k0_matches_sampled_run(haar0):
    grid = MacroGrid(0.0, 2.0, 40, 0.5)
    data = RiemannData(0.75, 0.95, 0.2)
    frozen = run_macro(grid, LWR, haar0, data.freeze(0.4)).snapshots[-1]
    plain = run_macro(grid, LWR, haar0, RiemannData(0.83, 0.83, 0.2)).snapshots[-1]
    assert frozen.rho == pytest.approx(plain.rho, abs=1e-12)


def test_snapshots_follow_requested_times(haar3):
    grid = MacroGrid(0.0, 2.0, 20, 0.3)
    run = run_macro(grid, LWR, haar3, RiemannData(0.75, 0.95, 0.2), output_times=[0.1, 0.2])
    assert [s.time for s in run.snapshots] == pytest.approx([0.1, 0.2, 0.3])
    assert np.all(np.diff(mean(run.snapshots[-1].rho)) <= 1e-12)


def test_arz_guard_refuses_polynomials(legendre3):
    with pytest.raises(HyperbolicityError, match="haar"):
        require_hyperbolic(legendre3)
    grid = MacroGrid(0.0, 2.0, 10, 0.1)
    with pytest.raises(HyperbolicityError):
        run_macro(grid, ARZ, legendre3, RiemannData(0.75, 0.95, 0.2))


def test_arz_haar_run_with_relaxation(haar3):
    grid = MacroGrid(0.0, 2.0, 40, 0.3)
    model = MacroModel("arz", epsilon=0.01)
    run = run_macro(grid, model, haar3, RiemannData(0.75, 0.95, 0.2))
    final = run.snapshots[-1]
    nodal_rho = reconstruct_nodal(final.rho, haar3.basis)
    assert np.all((nodal_rho >= -1e-8) & (nodal_rho <= 1.0 + 1e-8))
    assert final.z.shape == final.rho.shape


def test_density_above_one_is_reported(haar1):
    grid = MacroGrid(0.0, 1.0, 2, 0.1)
    values = np.array([[[1.0, 0.2]], [[0.5, 0.0]]])
    with pytest.raises(DensityBoundsError, match="outside"):
        run_macro(grid, LWR, haar1, RiemannData(0.5, 0.5, 0.5), initial=MacroField(values, LWR))


def test_grid_validation():
    with pytest.raises(ValueError, match="CFL"):
        MacroGrid(0.0, 1.0, 10, 1.0, cfl=1.5)
    with pytest.raises(ValueError, match="boundary"):
        MacroGrid(0.0, 1.0, 10, 1.0, boundary="reflecting")
