"""
Tests for the method-of-lines finite-difference model.

Tests cover:
  - Grid construction and stencil accuracy
  - Ghost rules and the assembled right-hand side
  - Time integration, its argument checks and fixed-point drift
  - Artificial-source convergence (slow)
"""

import math
from typing import List

import numpy as np
import pytest

from ebm_lab.bim import StationarySolution, enumerate_equilibria, sample_solution
from ebm_lab.errors import InvalidParameterError, PoleError
from ebm_lab.fdm import (
    EXACT_SOLUTIONS,
    Grid,
    SimulationState,
    apply_ghost_rules,
    artificial_source_run,
    convergence_order,
    integrate,
    rhs,
    stencil_backward,
    stencil_centered,
    stencil_forward,
)
from ebm_lab.greenfn import GreenKernel
from ebm_lab.params import PRESETS, RunConfig
from ebm_lab.stability import classify_solution


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _centered_error(theta: float, h: float) -> float:
    approx = stencil_centered(math.cos(theta - h), math.cos(theta), math.cos(theta + h), theta, h)
    # L_diff cos θ = 2 cos θ
    return abs(float(approx) - 2.0 * math.cos(theta))


# ---------------------------------------------------------------------------
# Grid and stencils
# ---------------------------------------------------------------------------

def test_grid_spacing() -> None:
    """θ_i = i·π/N with N + 1 nodes."""
    grid = Grid(64)
    assert grid.h == pytest.approx(math.pi / 64)
    assert grid.theta.size == 65
    assert grid.theta[-1] == pytest.approx(math.pi)


def test_grid_too_coarse_rejected() -> None:
    with pytest.raises(InvalidParameterError):
        Grid(10)


def test_centered_stencil_of_constant_is_zero() -> None:
    """L_diff of a constant vanishes."""
    assert float(stencil_centered(3.0, 3.0, 3.0, 1.0, 0.01)) == pytest.approx(0.0, abs=1e-12)


def test_centered_stencil_on_cosine() -> None:
    """|L_h cos − 2 cos| < 1e-3 on every interior node at N = 400."""
    grid = Grid(400)
    theta = grid.theta[1:-1]
    h = grid.h
    approx = stencil_centered(np.cos(theta - h), np.cos(theta), np.cos(theta + h), theta, h)
    assert np.max(np.abs(approx - 2.0 * np.cos(theta))) < 1e-3


def test_centered_stencil_is_second_order() -> None:
    """Halving h cuts the error by about four."""
    ratio = _centered_error(1.0, math.pi / 200) / _centered_error(1.0, math.pi / 400)
    assert 3.5 < ratio < 4.5


def test_one_sided_stencils_agree_with_exact() -> None:
    """Forward and backward forms are within 1e-2 at h = 1e-3."""
    h, theta = 1e-3, 1.0
    fwd = stencil_forward(math.cos(theta), math.cos(theta + h), math.cos(theta + 2 * h), theta, h)
    bwd = stencil_backward(math.cos(theta), math.cos(theta - h), math.cos(theta - 2 * h), theta, h)
    assert float(fwd) == pytest.approx(2 * math.cos(theta), abs=1e-2)
    assert float(bwd) == pytest.approx(2 * math.cos(theta), abs=1e-2)


@pytest.mark.parametrize("theta", [0.0, math.pi])
def test_stencil_at_pole_raises(theta: float) -> None:
    """cot θ is never evaluated at a pole."""
    with pytest.raises(PoleError):
        stencil_centered(1.0, 1.0, 1.0, theta, 0.01)


# ---------------------------------------------------------------------------
# Ghost rules and rhs
# ---------------------------------------------------------------------------

def test_ghost_rules() -> None:
    """T_0 = T_2 and T_N = T_{N−2}; the input is not modified."""
    T = np.arange(7.0)
    out = apply_ghost_rules(T)
    assert out.tolist() == [2.0, 1.0, 2.0, 3.0, 4.0, 5.0, 4.0]
    assert T[0] == 0.0


def test_rhs_vanishes_for_balanced_constant(aquaplanet: RunConfig) -> None:
    """A constant with source β·T is a fixed point."""
    grid = Grid(64)
    beta = aquaplanet.dimensionless().beta
    state = SimulationState(grid, 0.0, np.full(grid.N + 1, -2.0))
    out = rhs(state, aquaplanet, source=lambda theta, t: np.full_like(theta, -2.0 * beta))
    np.testing.assert_allclose(out, 0.0, atol=1e-10)


def test_rhs_end_entries_follow_ghost_rules(aquaplanet: RunConfig) -> None:
    """The pole entries copy nodes 2 and N − 2."""
    grid = Grid(64)
    state = SimulationState(grid, 0.0, np.cos(grid.theta) - 1.0)
    out = rhs(state, aquaplanet)
    assert out[0] == out[2]
    assert out[-1] == out[-3]


def test_rhs_rejects_unknown_albedo(aquaplanet: RunConfig) -> None:
    grid = Grid(64)
    with pytest.raises(InvalidParameterError):
        rhs(SimulationState(grid, 0.0, np.zeros(grid.N + 1)), aquaplanet, albedo="linear")


# ---------------------------------------------------------------------------
# integrate
# ---------------------------------------------------------------------------

def test_zero_length_run_echoes_initial_profile(aquaplanet: RunConfig) -> None:
    """t_end = t0 returns the (ghost-ruled) initial profile only."""
    grid = Grid(64)
    T0 = np.linspace(-3.0, 1.0, grid.N + 1)
    traj = integrate(SimulationState(grid, 0.0, T0), 0.0, aquaplanet)
    assert traj.t.tolist() == [0.0]
    np.testing.assert_array_equal(traj.T[0], apply_ghost_rules(T0))


def test_unknown_method_rejected(aquaplanet: RunConfig) -> None:
    """Only explicit Runge–Kutta methods are accepted."""
    grid = Grid(64)
    with pytest.raises(InvalidParameterError):
        integrate(SimulationState(grid, 0.0, np.zeros(grid.N + 1)), 1.0, aquaplanet, method="BDF")


def test_backwards_time_rejected(aquaplanet: RunConfig) -> None:
    grid = Grid(64)
    with pytest.raises(InvalidParameterError):
        integrate(SimulationState(grid, 1.0, np.zeros(grid.N + 1)), 0.5, aquaplanet)


def test_samples_at_requested_times(aquaplanet: RunConfig) -> None:
    """t_eval controls the output times and ghost rules hold at each."""
    grid = Grid(64)
    times = [0.0, 0.5, 1.0]
    traj = integrate(SimulationState(grid, 0.0, np.full(grid.N + 1, -2.0)), 1.0, aquaplanet, t_eval=times)
    np.testing.assert_allclose(traj.t, times)
    np.testing.assert_array_equal(traj.T[:, 0], traj.T[:, 2])
    assert traj.final.t == pytest.approx(1.0)


@pytest.mark.parametrize("pattern", ["all-ice", "all-water"])
def test_equilibria_stay_put(
    aquaplanet_247: List[StationarySolution], aquaplanet: RunConfig, kernel: GreenKernel, pattern: str
) -> None:
    """Stable uniform-cover equilibria drift less than 5e-3 over 10 time units."""
    solution = next(s for s in aquaplanet_247 if s.case.ice_pattern == pattern)
    grid = Grid(200)
    cfg = aquaplanet.with_Q(247.0)
    T0 = sample_solution(solution, grid.theta, cfg, kernel)
    traj = integrate(SimulationState(grid, 0.0, T0), 10.0, cfg, albedo="step")
    assert np.max(np.abs(traj.final.T - apply_ghost_rules(T0))) < 5e-3


# ---------------------------------------------------------------------------
# Artificial-source verification
# ---------------------------------------------------------------------------

def test_single_resolution_has_no_order() -> None:
    """One report is not enough to estimate an order."""
    report = artificial_source_run("gauss_pulse", 64, 0.2)
    assert convergence_order([report]) is None
    assert report.linf < 0.1


def test_unknown_source_rejected() -> None:
    with pytest.raises(InvalidParameterError):
        artificial_source_run("square_wave", 64, 0.1)


@pytest.mark.slow
@pytest.mark.parametrize("which", sorted(EXACT_SOLUTIONS))
def test_artificial_source_converges(which: str) -> None:
    """Observed order ≥ 1.7 over N = 100, 200, 400 and L∞ < 1e-2 at N = 400."""
    reports = [artificial_source_run(which, N, 2.0) for N in (100, 200, 400)]
    assert convergence_order(reports) >= 1.7
    assert reports[-1].linf < 1e-2


# ---------------------------------------------------------------------------
# Qualitative behaviour
# ---------------------------------------------------------------------------

def test_symmetric_continent_keeps_symmetry() -> None:
    """A mirror-symmetric start on the centred continent stays mirror-symmetric."""
    cfg = PRESETS["symmetric"].with_Q(294.0)
    grid = Grid(200)
    T0 = -0.5 + 2.0 * np.sin(grid.theta) ** 2
    traj = integrate(SimulationState(grid, 0.0, T0), 1.0, cfg, t_eval=np.linspace(0.0, 1.0, 5))
    assert np.max(np.abs(traj.T - traj.T[:, ::-1])) <= 1e-8


def test_ordered_starts_stay_ordered(aquaplanet: RunConfig) -> None:
    """Two ordered initial profiles give ordered trajectories."""
    grid = Grid(200)
    low = -2.0 + 1.5 * np.sin(grid.theta) ** 2
    high = low + 0.5
    times = np.linspace(0.0, 1.0, 10)
    a = integrate(SimulationState(grid, 0.0, low), 1.0, aquaplanet, t_eval=times)
    b = integrate(SimulationState(grid, 0.0, high), 1.0, aquaplanet, t_eval=times)
    assert np.all(b.T >= a.T - 1e-6)


def test_smooth_albedo_keeps_the_all_ice_equilibrium(
    aquaplanet_247: List[StationarySolution], aquaplanet: RunConfig, kernel: GreenKernel
) -> None:
    """Away from the threshold the smooth-albedo run stays within 1e-2 of the step equilibrium."""
    solution = next(s for s in aquaplanet_247 if s.case.ice_pattern == "all-ice")
    grid = Grid(200)
    T0 = sample_solution(solution, grid.theta, aquaplanet, kernel)
    traj = integrate(SimulationState(grid, 0.0, T0), 10.0, aquaplanet, albedo="smooth")
    assert np.max(np.abs(traj.final.T - apply_ghost_rules(T0))) < 1e-2


@pytest.mark.slow
def test_snowball_start_relaxes_to_all_ice(aquaplanet: RunConfig, kernel: GreenKernel) -> None:
    """A uniformly frozen start at low Q ends on the all-ice boundary-integral profile."""
    cfg = aquaplanet.with_Q(200.0)
    solution = enumerate_equilibria(200.0, cfg, kernel, cases=["all-ice"])[0]
    grid = Grid(200)
    target = sample_solution(solution, grid.theta, cfg, kernel)
    traj = integrate(SimulationState(grid, 0.0, np.full(grid.N + 1, -3.0)), 60.0, cfg, albedo="step")
    assert np.max(np.abs(traj.final.T - target)) < 5e-3


def _relaxes_back(solution: StationarySolution, cfg: RunConfig, kernel: GreenKernel) -> float:
    grid = Grid(100)
    T0 = sample_solution(solution, grid.theta, cfg, kernel)
    rest = integrate(SimulationState(grid, 0.0, T0), 30.0, cfg).final.T
    kicked = integrate(SimulationState(grid, 0.0, 1.01 * T0), 30.0, cfg).final.T
    return float(np.max(np.abs(kicked - rest)))


@pytest.mark.slow
def test_stable_aquaplanet_states_relax_back(
    aquaplanet_247: List[StationarySolution], aquaplanet: RunConfig, kernel: GreenKernel
) -> None:
    """Every eigen-stable equilibrium at Q = 247 absorbs a 1% perturbation."""
    stable = [s for s in aquaplanet_247 if classify_solution(s, aquaplanet, kernel=kernel).verdict == "stable"]
    assert stable
    for solution in stable:
        assert _relaxes_back(solution, aquaplanet, kernel) < 5e-3, solution.id


@pytest.mark.slow
@pytest.mark.parametrize("Q", [294.0, 299.0])
def test_stable_continent_states_relax_back(kernel: GreenKernel, Q: float) -> None:
    """Eigen-stable equilibria of the centred continent absorb a 1% perturbation."""
    cfg = PRESETS["symmetric"].with_Q(Q)
    solutions = enumerate_equilibria(Q, cfg, kernel)
    stable = [s for s in solutions if classify_solution(s, cfg, kernel=kernel).verdict == "stable"]
    assert stable
    for solution in stable:
        assert _relaxes_back(solution, cfg, kernel) < 5e-3, solution.id
