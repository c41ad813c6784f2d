"""
Method-of-lines finite differences for the time-dependent model

    γ(θ) ∂T/∂t = −L_diff T − β T + η s(θ)(1 − a(T)) − α,
    L_diff f = −(f″ + cot θ f′).

Only interior nodes 1…N−1 carry ODEs. The end nodes follow the ghost rules
T_0 = T_2 and T_N = T_{N−2}, which are substituted into the stencils of
nodes 1 and N−1 instead of evaluating cot θ at the poles.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel
from scipy.integrate import solve_ivp

from ebm_lab.errors import InvalidParameterError, PoleError, StiffnessError
from ebm_lab.params import (
    DimensionlessParams,
    RunConfig,
    Surface,
    albedo_smooth,
    insolation,
)

logger = logging.getLogger(__name__)

MIN_N = 64
EXPLICIT_METHODS = ("RK45", "DOP853", "RK23")
DEFAULT_RTOL = 1e-6
VERIFY_RTOL = 1e-9

Albedo = Literal["smooth", "step"]
Source = Callable[[np.ndarray, float], np.ndarray]

# ---------------------------------------------------------------------------
# Grid and state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    """Uniform colatitude grid θ_i = i·π/N, i = 0…N."""

    N: int

    def __post_init__(self) -> None:
        if self.N < MIN_N:
            raise InvalidParameterError(f"grid needs N >= {MIN_N}, got {self.N}")

    @property
    def h(self) -> float:
        return math.pi / self.N

    @property
    def theta(self) -> np.ndarray:
        """Nodes, with the southern half built as π − θ of the northern half."""
        i = np.arange(self.N + 1)
        return np.where(2 * i <= self.N, i * self.h, math.pi - (self.N - i) * self.h)


@dataclass(frozen=True)
class SimulationState:
    grid: Grid
    t: float
    T: np.ndarray


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution: T[j] is the profile at time t[j]."""

    grid: Grid
    t: np.ndarray
    T: np.ndarray

    @property
    def final(self) -> SimulationState:
        return SimulationState(self.grid, float(self.t[-1]), self.T[-1].copy())


def apply_ghost_rules(T: np.ndarray) -> np.ndarray:
    """Copy of T with T_0 = T_2 and T_N = T_{N−2}."""
    out = np.array(T, dtype=float)
    out[..., 0] = out[..., 2]
    out[..., -1] = out[..., -3]
    return out


# ---------------------------------------------------------------------------
# Stencils (diffusion part only)
# ---------------------------------------------------------------------------

def _check_interior(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if np.any(np.abs(np.sin(theta)) < 1e-12):
        raise PoleError("cot(theta) is singular at the poles; use the ghost rules there")
    return theta


def stencil_centered(f_m, f_0, f_p, theta, h: float):
    """Second-order centred L_diff at an interior node.

    Raises:
        PoleError: If θ is 0 or π.
    """
    theta = _check_interior(theta)
    f_m, f_0, f_p = (np.asarray(v, dtype=float) for v in (f_m, f_0, f_p))
    return -((f_m - 2.0 * f_0 + f_p) / h**2 + (f_p - f_m) / (2.0 * h) / np.tan(theta))


def stencil_forward(f_0, f_1, f_2, theta, h: float):
    """One-sided L_diff at the first node of a window."""
    theta = _check_interior(theta)
    f_0, f_1, f_2 = (np.asarray(v, dtype=float) for v in (f_0, f_1, f_2))
    d1 = (-3.0 * f_0 + 4.0 * f_1 - f_2) / (2.0 * h)
    d2 = (f_0 - 2.0 * f_1 + f_2) / h**2
    return -(d2 + d1 / np.tan(theta))


def stencil_backward(f_0, f_m1, f_m2, theta, h: float):
    """One-sided L_diff at the last node of a window."""
    theta = _check_interior(theta)
    f_0, f_m1, f_m2 = (np.asarray(v, dtype=float) for v in (f_0, f_m1, f_m2))
    d1 = (3.0 * f_0 - 4.0 * f_m1 + f_m2) / (2.0 * h)
    d2 = (f_0 - 2.0 * f_m1 + f_m2) / h**2
    return -(d2 + d1 / np.tan(theta))


def diffusion_interior(T: np.ndarray, grid: Grid) -> np.ndarray:
    """L_diff T at nodes 1…N−1 with the ghost rules substituted."""
    full = apply_ghost_rules(T)
    theta = grid.theta[1:-1]
    return stencil_centered(full[:-2], full[1:-1], full[2:], theta, grid.h)


# ---------------------------------------------------------------------------
# Right-hand side
# ---------------------------------------------------------------------------

class _Fields:
    """Per-node coefficients of one grid and configuration."""

    def __init__(self, grid: Grid, config: RunConfig, dp: DimensionlessParams) -> None:
        self.grid = grid
        self.dp = dp
        self.p = config.physical
        theta = grid.theta
        self.land = config.continent.land_mask(theta)
        self.s = insolation(theta, self.p)
        self.gamma = np.where(self.land, dp.gamma_land, dp.gamma_water)
        self.threshold = np.where(self.land, dp.threshold(Surface.LAND), dp.threshold(Surface.WATER))
        self.warm = np.where(self.land, self.p.a1_land, self.p.a1)
        self.ice = np.where(self.land, self.p.a2_land, self.p.a2)

    def albedo(self, T: np.ndarray, kind: Albedo) -> np.ndarray:
        if kind == "step":
            return np.where(T > self.threshold, self.warm, self.ice)
        return np.where(
            self.land,
            albedo_smooth(T, Surface.LAND, self.p),
            albedo_smooth(T, Surface.WATER, self.p),
        )

    def forcing(self, T: np.ndarray, kind: Albedo) -> np.ndarray:
        return self.dp.eta * self.s * (1.0 - self.albedo(T, kind)) - self.dp.alpha

    def tendency(self, T: np.ndarray, t: float, kind: Albedo, source: Optional[Source]) -> np.ndarray:
        """dT/dt at interior nodes for a full-length T satisfying the ghost rules."""
        inner = slice(1, -1)
        if source is None:
            forcing = self.forcing(T, kind)[inner]
        else:
            forcing = source(self.grid.theta[inner], t)
        lhs = -diffusion_interior(T, self.grid) - self.dp.beta * T[inner] + forcing
        return lhs / self.gamma[inner]


def _validate_albedo(albedo: str) -> None:
    if albedo not in ("smooth", "step"):
        raise InvalidParameterError(f"albedo must be 'smooth' or 'step', got {albedo!r}")


def rhs(
    state: SimulationState,
    config: RunConfig,
    dp: Optional[DimensionlessParams] = None,
    albedo: Albedo = "smooth",
    source: Optional[Source] = None,
) -> np.ndarray:
    """dT/dt on every node; end entries copy nodes 2 and N−2 (ghost rules)."""
    _validate_albedo(albedo)
    dp = dp or config.dimensionless()
    fields = _Fields(state.grid, config, dp)
    T = apply_ghost_rules(state.T)
    out = np.empty_like(T)
    out[1:-1] = fields.tendency(T, state.t, albedo, source)
    out[0] = out[2]
    out[-1] = out[-3]
    return out


def equilibrium_residual(
    T: np.ndarray,
    grid: Grid,
    config: RunConfig,
    dp: Optional[DimensionlessParams] = None,
    albedo: Albedo = "step",
    exclude: Sequence[float] = (),
) -> float:
    """max |dT/dt| over interior nodes farther than 2h from every angle in exclude."""
    r = rhs(SimulationState(grid, 0.0, np.asarray(T, dtype=float)), config, dp, albedo)
    keep = np.ones(grid.N + 1, dtype=bool)
    keep[[0, -1]] = False
    for angle in exclude:
        keep &= np.abs(grid.theta - angle) > 2.0 * grid.h
    return float(np.max(np.abs(r[keep]), initial=0.0))


# ---------------------------------------------------------------------------
# Time integration
# ---------------------------------------------------------------------------

def integrate(
    state0: SimulationState,
    t_end: float,
    config: RunConfig,
    dp: Optional[DimensionlessParams] = None,
    method: str = "RK45",
    rtol: float = DEFAULT_RTOL,
    atol: float = 1e-9,
    t_eval: Optional[Sequence[float]] = None,
    albedo: Albedo = "smooth",
    source: Optional[Source] = None,
) -> Trajectory:
    """Advance the interior ODE system from state0.t to t_end.

    Args:
        state0: Initial state; the ghost rules are imposed on it.
        t_end:  Final time (≥ state0.t).
        method: Explicit scipy integrator, one of RK45, DOP853, RK23.
        t_eval: Output times (default: start and end only).
        albedo: ``"smooth"`` (default) or ``"step"``.
        source: Replaces the albedo forcing by source(θ, t) when given.

    Returns:
        Trajectory sampled at t_eval.

    Raises:
        InvalidParameterError: Unknown method/albedo or t_end before the start.
        StiffnessError: If the integrator gives up.
    """
    if method not in EXPLICIT_METHODS:
        raise InvalidParameterError(f"method must be one of {EXPLICIT_METHODS}, got {method!r}")
    _validate_albedo(albedo)
    t0 = float(state0.t)
    if t_end < t0:
        raise InvalidParameterError(f"t_end={t_end} precedes the initial time {t0}")
    dp = dp or config.dimensionless()
    grid = state0.grid
    fields = _Fields(grid, config, dp)
    T0 = apply_ghost_rules(state0.T)
    times = np.array(sorted(t_eval) if t_eval is not None else [t0, t_end], dtype=float)

    if t_end == t0:
        return Trajectory(grid, times[:1], T0[None, :].copy())

    N = grid.N
    work = T0.copy()

    def fun(t: float, y: np.ndarray) -> np.ndarray:
        work[1:-1] = y
        work[0] = y[1]
        work[-1] = y[-2]
        return fields.tendency(work, t, albedo, source)

    sol = solve_ivp(fun, (t0, t_end), T0[1:-1], method=method, t_eval=times, rtol=rtol, atol=atol)
    if not sol.success:
        raise StiffnessError(
            f"{method} stopped at t={sol.t[-1] if sol.t.size else t0:.6g}: {sol.message}; "
            "try a smaller N or a looser tolerance"
        )
    out = np.empty((sol.t.size, N + 1))
    out[:, 1:-1] = sol.y.T
    out = apply_ghost_rules(out)
    logger.debug("integrated N=%d to t=%.4g with %s (%d rhs evaluations)", N, t_end, method, sol.nfev)
    return Trajectory(grid, sol.t, out)


# ---------------------------------------------------------------------------
# Artificial-source verification
# ---------------------------------------------------------------------------

class ExactSolution:
    """Assumed solution T_e with closed-form derivatives."""

    def value(self, theta, t):
        raise NotImplementedError

    def dt(self, theta, t):
        raise NotImplementedError

    def dtheta(self, theta, t):
        raise NotImplementedError

    def dtheta2(self, theta, t):
        raise NotImplementedError

    def source(self, gamma: float, beta: float) -> Source:
        """ρ = γ ∂T_e/∂t + L_diff T_e + β T_e."""

        def rho(theta: np.ndarray, t: float) -> np.ndarray:
            diffusion = -(self.dtheta2(theta, t) + self.dtheta(theta, t) / np.tan(theta))
            return gamma * self.dt(theta, t) + diffusion + beta * self.value(theta, t)

        return rho


class GaussPulse(ExactSolution):
    """T_e = (3 − sin t) exp(−3 (θ − π/2)²) − 1."""

    @staticmethod
    def _g(theta):
        x = np.asarray(theta, dtype=float) - math.pi / 2
        return x, np.exp(-3.0 * x * x)

    def value(self, theta, t):
        _, g = self._g(theta)
        return (3.0 - math.sin(t)) * g - 1.0

    def dt(self, theta, t):
        _, g = self._g(theta)
        return -math.cos(t) * g

    def dtheta(self, theta, t):
        x, g = self._g(theta)
        return (3.0 - math.sin(t)) * (-6.0 * x * g)

    def dtheta2(self, theta, t):
        x, g = self._g(theta)
        return (3.0 - math.sin(t)) * (36.0 * x * x - 6.0) * g


class MovingGauss(ExactSolution):
    """T_e = 2 exp(−5 (θ − (π/2) cos 0.2t)²)."""

    @staticmethod
    def _g(theta, t):
        x = np.asarray(theta, dtype=float) - (math.pi / 2) * math.cos(0.2 * t)
        return x, np.exp(-5.0 * x * x)

    def value(self, theta, t):
        _, g = self._g(theta, t)
        return 2.0 * g

    def dt(self, theta, t):
        x, g = self._g(theta, t)
        centre_rate = -0.1 * math.pi * math.sin(0.2 * t)
        return 20.0 * x * centre_rate * g

    def dtheta(self, theta, t):
        x, g = self._g(theta, t)
        return -20.0 * x * g

    def dtheta2(self, theta, t):
        x, g = self._g(theta, t)
        return 2.0 * (100.0 * x * x - 10.0) * g


EXACT_SOLUTIONS: Dict[str, ExactSolution] = {
    "gauss_pulse": GaussPulse(),
    "moving_gauss": MovingGauss(),
}


class ArtificialSourceReport(BaseModel):
    which: str
    N: int
    t_end: float
    linf: float
    l2: float


def artificial_source_run(
    which: str,
    N: int,
    t_end: float,
    config: Optional[RunConfig] = None,
    samples: int = 21,
    rtol: float = VERIFY_RTOL,
) -> ArtificialSourceReport:
    """Integrate the manufactured problem and measure the error against T_e.

    linf is the largest nodal error over the sample times; l2 the largest
    sin-weighted L² error, normalised so a unit error everywhere gives 1.
    """
    if which not in EXACT_SOLUTIONS:
        raise InvalidParameterError(f"unknown artificial source {which!r}; choose from {sorted(EXACT_SOLUTIONS)}")
    config = config or RunConfig()
    dp = config.dimensionless()
    exact = EXACT_SOLUTIONS[which]
    grid = Grid(N)
    theta = grid.theta
    state0 = SimulationState(grid, 0.0, exact.value(theta, 0.0))
    times = np.linspace(0.0, t_end, samples)
    traj = integrate(
        state0, t_end, config, dp, rtol=rtol, atol=rtol * 1e-2, t_eval=times,
        source=exact.source(dp.gamma_water, dp.beta),
    )
    weight = np.sin(theta) * grid.h / 2.0
    linf = 0.0
    l2 = 0.0
    for t, T in zip(traj.t, traj.T):
        err = T - exact.value(theta, t)
        linf = max(linf, float(np.max(np.abs(err))))
        l2 = max(l2, float(math.sqrt(np.sum(weight * err * err))))
    logger.info("artificial source %s N=%d: linf=%.3e l2=%.3e", which, N, linf, l2)
    return ArtificialSourceReport(which=which, N=N, t_end=t_end, linf=linf, l2=l2)


def convergence_order(reports: List[ArtificialSourceReport]) -> Optional[float]:
    """Least-squares slope of −log(l2) against log(N); None for fewer than two N."""
    if len(reports) < 2:
        return None
    logN = np.log([r.N for r in reports])
    logE = np.log([max(r.l2, 1e-300) for r in reports])
    slope = np.polyfit(logN, logE, 1)[0]
    return float(-slope)
