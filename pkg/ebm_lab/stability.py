"""
Linear stability of equilibria.

eigen_classify      spectrum of the interior Jacobian H of the FD right-hand side
slope_classify      sign of dQ/dT̄ along an ordered branch
heuristic_run       perturb, integrate, and watch whether the profile returns
"""

import logging
from typing import Any, Dict, List, Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel
from scipy import linalg

from ebm_lab.bim import sample_solution
from ebm_lab.errors import InsufficientDataError, NumericError
from ebm_lab.fdm import Albedo, Grid, SimulationState, apply_ghost_rules, integrate
from ebm_lab.params import (
    DimensionlessParams,
    RunConfig,
    Surface,
    albedo_smooth_derivative,
    insolation,
)

logger = logging.getLogger(__name__)

TOL_ZERO = 1e-6
HEURISTIC_AMPLITUDE = 1e-2
HEURISTIC_T_END = 20.0
STABLE_BAND = 5.0          # multiples of the amplitude
UNSTABLE_DEPARTURE = 0.5

Verdict = Literal["stable", "unstable", "marginal", "inconclusive"]


class StabilityReport(BaseModel):
    """Outcome of one stability classification."""

    method: Literal["eigen", "slope", "heuristic"]
    verdict: Verdict
    max_real_eig: Optional[float] = None
    eig_re: Optional[List[float]] = None
    eig_im: Optional[List[float]] = None
    N: Optional[int] = None
    details: Dict[str, Any] = {}

    @property
    def eig_spectrum(self) -> Optional[np.ndarray]:
        if self.eig_re is None:
            return None
        return np.asarray(self.eig_re) + 1j * np.asarray(self.eig_im)


# ---------------------------------------------------------------------------
# Eigenvalue test
# ---------------------------------------------------------------------------

def source_jacobian_hT(T0, theta, config: RunConfig, dp: DimensionlessParams):
    """∂h/∂T = −η s(θ) a′(T) of the smooth-albedo source (non-negative)."""
    p = config.physical
    T0 = np.asarray(T0, dtype=float)
    land = config.continent.land_mask(theta)
    da = np.where(
        land,
        albedo_smooth_derivative(T0, Surface.LAND, p),
        albedo_smooth_derivative(T0, Surface.WATER, p),
    )
    out = -dp.eta * insolation(theta, p) * da
    return float(out) if np.ndim(out) == 0 else out


def build_H(
    T0_profile: np.ndarray,
    grid: Grid,
    config: RunConfig,
    dp: Optional[DimensionlessParams] = None,
    hT: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Jacobian of the interior FD tendency at T0, shape (N−1, N−1).

    The end nodes are eliminated with δ_0 = δ_2 and δ_N = δ_{N−2}.

    Args:
        T0_profile: Equilibrium on grid.theta (length N+1).
        hT:         Override of ∂h/∂T at the interior nodes.
    """
    dp = dp or config.dimensionless()
    theta = grid.theta
    inner = theta[1:-1]
    if hT is None:
        hT = source_jacobian_hT(np.asarray(T0_profile)[1:-1], inner, config, dp)
    hT = np.broadcast_to(np.asarray(hT, dtype=float), inner.shape)
    gamma = np.where(config.continent.land_mask(inner), dp.gamma_land, dp.gamma_water)

    h = grid.h
    cot = 1.0 / np.tan(inner)
    lower = (1.0 / h**2 - cot / (2.0 * h)) / gamma
    upper = (1.0 / h**2 + cot / (2.0 * h)) / gamma
    diag = (-2.0 / h**2 - dp.beta + hT) / gamma

    n = grid.N - 1
    H = np.diag(diag) + np.diag(upper[:-1], 1) + np.diag(lower[1:], -1)
    H[0, 1] += lower[0]
    H[n - 1, n - 2] += upper[-1]
    return H


def eigen_classify(
    T0: np.ndarray,
    grid: Grid,
    config: RunConfig,
    dp: Optional[DimensionlessParams] = None,
    tol_zero: float = TOL_ZERO,
) -> StabilityReport:
    """Classify by the largest real part of the spectrum of H.

    Raises:
        NumericError: If the eigensolver fails.
    """
    H = build_H(T0, grid, config, dp)
    try:
        eig = linalg.eigvals(H)
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericError(f"eigenvalue computation failed: {exc}") from exc
    eig = eig[np.lexsort((eig.imag, -eig.real))]
    top = float(np.max(eig.real))
    if top > tol_zero:
        verdict = "unstable"
    elif top < -tol_zero:
        verdict = "stable"
    else:
        verdict = "marginal"
    return StabilityReport(
        method="eigen",
        verdict=verdict,
        max_real_eig=top,
        eig_re=eig.real.tolist(),
        eig_im=eig.imag.tolist(),
        N=grid.N,
    )


# ---------------------------------------------------------------------------
# Slope test
# ---------------------------------------------------------------------------

def slope_classify(branch: Sequence[Any], slope_tol: float = 1e-12) -> List[str]:
    """Per-point verdicts from the sign of dQ/dT̄ along an ordered branch.

    Args:
        branch:    Objects with ``Q`` and ``T_mean`` attributes, in branch order.
        slope_tol: |ΔQ| at or below this makes the point marginal.

    Raises:
        InsufficientDataError: If the branch has fewer than three points.
    """
    if len(branch) < 3:
        raise InsufficientDataError(f"slope classification needs 3 points, got {len(branch)}")
    Q = np.array([pt.Q for pt in branch], dtype=float)
    T = np.array([pt.T_mean for pt in branch], dtype=float)
    dQ = np.gradient(Q)
    dT = np.gradient(T)
    verdicts = []
    for q, t in zip(dQ, dT):
        if abs(q) <= slope_tol or t == 0.0:
            verdicts.append("marginal")
        elif q * t > 0:
            verdicts.append("stable")
        else:
            verdicts.append("unstable")
    return verdicts


# ---------------------------------------------------------------------------
# Dynamic test
# ---------------------------------------------------------------------------

def perturbation_shape(theta: np.ndarray) -> np.ndarray:
    """Smooth bump of unit height with zero slope at both poles."""
    bump = np.sin(theta) ** 2 * (1.0 + 0.5 * np.cos(theta))
    return bump / np.max(bump)


def heuristic_run(
    T0: np.ndarray,
    config: RunConfig,
    dp: Optional[DimensionlessParams] = None,
    amplitude: float = HEURISTIC_AMPLITUDE,
    t_end: float = HEURISTIC_T_END,
    albedo: Albedo = "smooth",
    samples: int = 41,
) -> StabilityReport:
    """Integrate T0 ± amplitude·bump and compare the departures from T0."""
    T0 = apply_ghost_rules(np.asarray(T0, dtype=float))
    grid = Grid(T0.size - 1)
    if amplitude == 0.0:
        return StabilityReport(method="heuristic", verdict="stable", N=grid.N, details={"departure": 0.0})

    bump = amplitude * perturbation_shape(grid.theta)
    times = np.linspace(0.0, t_end, samples)
    departures = {}
    for label, sign in (("plus", 1.0), ("minus", -1.0)):
        traj = integrate(
            SimulationState(grid, 0.0, T0 + sign * bump), t_end, config, dp,
            t_eval=times, albedo=albedo,
        )
        departures[label] = float(np.max(np.abs(traj.T - T0[None, :])))

    worst = max(departures.values())
    if worst > UNSTABLE_DEPARTURE:
        verdict = "unstable"
    elif worst <= STABLE_BAND * amplitude:
        verdict = "stable"
    else:
        verdict = "inconclusive"
    logger.debug("heuristic run: departures %s -> %s", departures, verdict)
    return StabilityReport(
        method="heuristic",
        verdict=verdict,
        N=grid.N,
        details={"departure_plus": departures["plus"], "departure_minus": departures["minus"],
                 "amplitude": amplitude, "t_end": t_end},
    )


def classify_solution(
    solution,
    config: RunConfig,
    method: str = "eigen",
    N: int = 200,
    kernel=None,
) -> StabilityReport:
    """Sample a BIM equilibrium on an N-grid and classify it."""
    cfg = config.with_Q(solution.Q)
    grid = Grid(N)
    T0 = sample_solution(solution, grid.theta, cfg, kernel)
    if method == "eigen":
        return eigen_classify(T0, grid, cfg)
    if method == "heuristic":
        return heuristic_run(T0, cfg)
    raise ValueError(f"unsupported method {method!r} for a single equilibrium")
