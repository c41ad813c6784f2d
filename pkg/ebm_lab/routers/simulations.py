"""
Simulation endpoint.

Prefix: /simulations
Routes:
  POST   /simulations   — integrate the time-dependent model and summarise the run
"""

import logging

import numpy as np
from fastapi import APIRouter, HTTPException, status

from ebm_lab import storage
from ebm_lab.bifurcation import profile_mean
from ebm_lab.bim import sample_solution
from ebm_lab.errors import EBMError
from ebm_lab.fdm import Grid, SimulationState, integrate
from ebm_lab.models import SimulationRequest, SimulationResult
from ebm_lab.routers import numeric_failure, request_config

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/simulations", tags=["simulations"])


# ---------------------------------------------------------------------------
# Internal helpers
# ---------------------------------------------------------------------------

def _initial_profile(ic: str, grid: Grid) -> np.ndarray:
    """Resolve ``uniform:<T>`` or ``equilibrium:<id>`` on the grid.

    Raises:
        HTTPException 422: If the uniform value is not a number.
        HTTPException 404: If the referenced equilibrium does not exist.
        HTTPException 400: If the equilibrium cannot be sampled on the grid.
    """
    kind, _, value = ic.partition(":")
    if kind == "uniform":
        try:
            return np.full(grid.N + 1, float(value))
        except ValueError:
            raise HTTPException(
                status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
                detail=f"ic: {value!r} is not a number",
            )
    record = storage.equilibria.get(value)
    if record is None:
        raise HTTPException(status_code=status.HTTP_404_NOT_FOUND, detail="Equilibrium not found")
    try:
        return sample_solution(record["solution"], grid.theta, record["config"])
    except EBMError as exc:
        raise numeric_failure(exc) from exc


# ---------------------------------------------------------------------------
# Endpoints
# ---------------------------------------------------------------------------

@router.post("", response_model=SimulationResult)
def run_simulation(body: SimulationRequest) -> SimulationResult:
    """Integrate from the requested initial condition to body.t_end.

    Args:
        body: SimulationRequest with the initial condition, horizon and grid.

    Returns:
        The global mean temperature at every sample time and the final
        profile.

    Raises:
        HTTPException 400: If the integrator fails.
    """
    config = request_config(body.config, body.Q)
    grid = Grid(body.N)
    T0 = _initial_profile(body.ic, grid)
    times = np.linspace(0.0, body.t_end, body.samples)
    try:
        traj = integrate(
            SimulationState(grid, 0.0, T0), body.t_end, config,
            method=body.method, t_eval=times, albedo=body.albedo,
        )
    except EBMError as exc:
        raise numeric_failure(exc) from exc

    T_s = config.physical.T_s
    means = [T_s * profile_mean(grid.theta, T) for T in traj.T]
    final = traj.T[-1]
    logger.info("simulation N=%d to t=%.3g: mean %.3f -> %.3f °C", body.N, body.t_end, means[0], means[-1])
    return SimulationResult(
        N=body.N,
        t=[float(t) for t in traj.t],
        T_mean_C=means,
        theta=grid.theta.tolist(),
        T_final=final.tolist(),
        max_change=float(np.max(np.abs(final - traj.T[0]))),
    )
