"""
Physical and dimensionless parameters of the diffusive energy balance model.

All scaling between °C / W m⁻² and the dimensionless form happens here:

    γ ∂T/∂t + L_diff T + β T = η s(θ) (1 − a(T)) − α

with α = A/(T_s D), β = B/D, η = Q/(T_s D), γ = C/(t0 D), T_c = T_s,land / T_s.
Solver modules only ever see DimensionlessParams; temperatures are converted
back with T_dim = T_s · T at output time.
"""

import math
from enum import Enum
from typing import Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from ebm_lab.errors import AmbiguousAlbedoError, InvalidGeometryError, InvalidParameterError

ArrayLike = Union[float, np.ndarray]

# ---------------------------------------------------------------------------
# Enumerations
# ---------------------------------------------------------------------------

class Surface(str, Enum):
    """Surface type of a latitude band."""

    WATER = "water"
    LAND = "land"


# ---------------------------------------------------------------------------
# Parameter models
# ---------------------------------------------------------------------------

# nodes this close to a continent edge count as land
EDGE_TOL = 1e-12

_POSITIVE_FIELDS = ("B", "D", "C_water", "C_land", "t0", "T_s", "T_s_land")


class PhysicalParams(BaseModel):
    """Dimensional model parameters (defaults: the reference parameter table).

    C_water and C_land are given as multiples of B·t0.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    A: float = 203.0
    B: float = 2.09
    D: float = 0.208 * 2.09
    C_water: float = 4.7
    C_land: float = 0.16
    t0: float = 1.0
    T_s: float = 10.0
    T_s_land: float = 1.0
    a1: float = 0.06
    a2: float = 0.6
    a1_land: float = 0.3
    a2_land: float = 0.6
    s0: float = 0.523
    s1: float = 0.716
    sigma: float = 50.0

    @field_validator(*_POSITIVE_FIELDS)
    @classmethod
    def validate_positive(cls, v: float) -> float:
        """Ensure divisors and capacities are strictly positive."""
        if not v > 0:
            raise ValueError("must be strictly positive")
        return v

    @model_validator(mode="after")
    def validate_albedos(self) -> "PhysicalParams":
        """Ensure 0 ≤ a1 < a2 ≤ 1 on both surfaces."""
        for lo_name, hi_name in (("a1", "a2"), ("a1_land", "a2_land")):
            lo, hi = getattr(self, lo_name), getattr(self, hi_name)
            if not 0.0 <= lo < hi <= 1.0:
                raise ValueError(f"albedos must satisfy 0 <= {lo_name} < {hi_name} <= 1")
        return self


class DimensionlessParams(BaseModel):
    """Scaled coefficients driving every solver."""

    model_config = ConfigDict(frozen=True)

    alpha: float
    beta: float
    gamma_water: float
    gamma_land: float
    eta: float
    T_c: float

    def gamma(self, surface: Surface) -> float:
        """Heat-capacity coefficient of a surface."""
        return self.gamma_land if surface == Surface.LAND else self.gamma_water

    def threshold(self, surface: Surface) -> float:
        """Ice-formation temperature of a surface (−1 water, −T_c land)."""
        return -self.T_c if surface == Surface.LAND else -1.0


class ContinentConfig(BaseModel):
    """A single zonally symmetric continent, or none (aquaplanet)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["aquaplanet", "continent"] = "continent"
    l: float = math.pi / 4
    epsilon: float = 0.0

    @model_validator(mode="after")
    def validate_bounds(self) -> "ContinentConfig":
        """Ensure the continent fits strictly inside (0, π)."""
        if self.kind == "continent":
            if not 0.0 < self.l < math.pi:
                raise ValueError("continent extent l must lie in (0, pi)")
            if not (0.0 < self.theta_l1 and self.theta_l2 < math.pi):
                raise ValueError("continent edges must lie strictly inside (0, pi)")
        return self

    @property
    def theta_l1(self) -> float:
        """Northern continent edge (colatitude)."""
        return math.pi / 2 - self.l / 2 - self.epsilon

    @property
    def theta_l2(self) -> float:
        """Southern continent edge (colatitude)."""
        return math.pi / 2 + self.l / 2 - self.epsilon

    @property
    def is_continent(self) -> bool:
        return self.kind == "continent"

    @property
    def is_symmetric(self) -> bool:
        """True when the configuration is meridionally symmetric."""
        return not self.is_continent or self.epsilon == 0.0

    def land_mask(self, theta: ArrayLike) -> np.ndarray:
        """Boolean mask of the nodes lying on the continent (edges included)."""
        theta = np.asarray(theta, dtype=float)
        if not self.is_continent:
            return np.zeros(theta.shape, dtype=bool)
        return np.abs(theta - (math.pi / 2 - self.epsilon)) <= self.l / 2 + EDGE_TOL

    def surface_at(self, theta: float) -> Surface:
        """Surface type at a single colatitude."""
        return Surface.LAND if bool(self.land_mask(theta)) else Surface.WATER


AQUAPLANET = ContinentConfig(kind="aquaplanet")


class RunConfig(BaseModel):
    """Everything one run needs: physics, solar constant, geometry."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    physical: PhysicalParams = PhysicalParams()
    Q: float = 247.0
    continent: ContinentConfig = AQUAPLANET

    @field_validator("Q")
    @classmethod
    def validate_Q(cls, v: float) -> float:
        """Ensure the solar constant is positive."""
        if not v > 0:
            raise ValueError("Q must be strictly positive")
        return v

    def dimensionless(self, Q: Optional[float] = None) -> DimensionlessParams:
        """Scaled parameters at this config's Q (or an override)."""
        return nondimensionalize(self.physical, self.Q if Q is None else Q)

    def with_Q(self, Q: float) -> "RunConfig":
        return self.model_copy(update={"Q": float(Q)})


PRESETS = {
    "aquaplanet": RunConfig(continent=AQUAPLANET),
    "symmetric": RunConfig(continent=ContinentConfig(epsilon=0.0)),
    "shifted": RunConfig(continent=ContinentConfig(epsilon=0.1)),
    "far-shifted": RunConfig(continent=ContinentConfig(epsilon=0.5)),
}


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def nondimensionalize(p: PhysicalParams, Q: float) -> DimensionlessParams:
    """Scale the physical parameters at solar constant Q.

    Args:
        p: Physical parameters.
        Q: Solar constant (W m⁻²).

    Returns:
        The dimensionless coefficient set.

    Raises:
        InvalidParameterError: If Q or any divisor is not strictly positive.
    """
    if not Q > 0:
        raise InvalidParameterError(f"Q must be strictly positive, got {Q!r}")
    for name in _POSITIVE_FIELDS:
        if not getattr(p, name) > 0:
            raise InvalidParameterError(f"{name} must be strictly positive, got {getattr(p, name)!r}")

    C_water = p.C_water * p.B * p.t0
    C_land = p.C_land * p.B * p.t0
    return DimensionlessParams(
        alpha=p.A / (p.T_s * p.D),
        beta=p.B / p.D,
        gamma_water=C_water / (p.t0 * p.D),
        gamma_land=C_land / (p.t0 * p.D),
        eta=Q / (p.T_s * p.D),
        T_c=p.T_s_land / p.T_s,
    )


def insolation(theta: ArrayLike, p: PhysicalParams) -> ArrayLike:
    """Annual-mean insolation distribution s(θ) = s0 + s1 cos²(θ − π/2)."""
    return p.s0 + p.s1 * np.cos(np.asarray(theta) - np.pi / 2) ** 2


def _albedo_pair(surface: Surface, p: PhysicalParams) -> Tuple[float, float, float]:
    """Return (warm albedo, ice albedo, threshold) for a surface."""
    if surface == Surface.LAND:
        return p.a1_land, p.a2_land, -p.T_s_land / p.T_s
    return p.a1, p.a2, -1.0


def albedo_step(T: ArrayLike, surface: Surface, p: PhysicalParams) -> ArrayLike:
    """Step albedo: a1 above the ice threshold, a2 below.

    Raises:
        AmbiguousAlbedoError: If any T sits exactly on the threshold.
    """
    warm, ice, thr = _albedo_pair(surface, p)
    T_arr = np.asarray(T, dtype=float)
    if np.any(T_arr == thr):
        raise AmbiguousAlbedoError(float(T_arr[T_arr == thr].flat[0]), thr)
    out = np.where(T_arr > thr, warm, ice)
    return float(out) if out.ndim == 0 else out


def albedo_smooth(T: ArrayLike, surface: Surface, p: PhysicalParams) -> ArrayLike:
    """tanh-smoothed albedo with slope σ, centred on the ice threshold."""
    warm, ice, thr = _albedo_pair(surface, p)
    return warm + (ice - warm) / 2.0 * (1.0 + np.tanh(-p.sigma * (np.asarray(T) - thr)))


def albedo_smooth_derivative(T: ArrayLike, surface: Surface, p: PhysicalParams) -> ArrayLike:
    """da/dT of the smooth albedo (non-positive everywhere)."""
    warm, ice, thr = _albedo_pair(surface, p)
    return -p.sigma * (ice - warm) / 2.0 / np.cosh(p.sigma * (np.asarray(T) - thr)) ** 2


def source_coefficients(
    ice: bool, surface: Surface, dp: DimensionlessParams, p: PhysicalParams
) -> Tuple[float, float]:
    """Coefficients (A, B) with h(θ) = A + B sin²θ for a step-albedo branch."""
    warm, iced, _ = _albedo_pair(surface, p)
    coalbedo = 1.0 - (iced if ice else warm)
    return dp.eta * coalbedo * p.s0 - dp.alpha, dp.eta * coalbedo * p.s1


def source_term(
    theta: ArrayLike, ice: bool, surface: Surface, dp: DimensionlessParams, p: PhysicalParams
) -> ArrayLike:
    """Right-hand side η s(θ)(1 − a) − α of one of the four step-albedo branches.

    (ice, surface) = (False, water), (True, water), (False, land), (True, land)
    are the branches h1, h2, h3, h4.
    """
    warm, iced, _ = _albedo_pair(surface, p)
    a = iced if ice else warm
    return dp.eta * insolation(theta, p) * (1.0 - a) - dp.alpha


def continent_config(l: float, epsilon: float) -> ContinentConfig:
    """Build a continent of extent l shifted north by epsilon.

    Raises:
        InvalidGeometryError: If the continent does not fit inside (0, π).
    """
    theta_l1 = math.pi / 2 - l / 2 - epsilon
    theta_l2 = math.pi / 2 + l / 2 - epsilon
    if not (0.0 < l < math.pi and 0.0 < theta_l1 < theta_l2 < math.pi):
        raise InvalidGeometryError(
            f"continent l={l!r}, epsilon={epsilon!r} gives edges ({theta_l1!r}, {theta_l2!r}) outside (0, pi)"
        )
    return ContinentConfig(kind="continent", l=l, epsilon=epsilon)
