"""
Pydantic models for the EBM lab HTTP service.

Request models validate incoming payloads; the optional ``config`` object
accepts the same keys as a CLI configuration file (dotted keys and
``preset`` included). Response models define the shapes returned to clients.
"""

from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, field_validator

from ebm_lab.fdm import EXPLICIT_METHODS, MIN_N

# ---------------------------------------------------------------------------
# Validation constants
# ---------------------------------------------------------------------------

MAX_N = 2000
MAX_SAMPLES = 1001


# ---------------------------------------------------------------------------
# Request models
# ---------------------------------------------------------------------------

class EquilibriumRequest(BaseModel):
    """Request body for an equilibrium search at one solar constant."""

    config: Optional[Dict[str, Any]] = None
    Q: float
    seed_density: int = 8
    cases: Optional[List[str]] = None

    @field_validator("Q")
    @classmethod
    def validate_Q(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("Q must be strictly positive")
        return v

    @field_validator("seed_density")
    @classmethod
    def validate_seed_density(cls, v: int) -> int:
        """Ensure at least one seed per critical latitude."""
        if v < 1:
            raise ValueError("seed_density must be at least 1")
        return v


class StabilityRequest(BaseModel):
    """Request body for classifying a stored equilibrium."""

    method: Literal["eigen", "heuristic"] = "eigen"
    N: int = 200

    @field_validator("N")
    @classmethod
    def validate_N(cls, v: int) -> int:
        if not MIN_N <= v <= MAX_N:
            raise ValueError(f"N must lie in [{MIN_N}, {MAX_N}]")
        return v


class SimulationRequest(BaseModel):
    """Request body for a time integration.

    ``ic`` is ``uniform:<T>`` (dimensionless) or ``equilibrium:<id>`` naming
    a stored equilibrium.
    """

    config: Optional[Dict[str, Any]] = None
    Q: Optional[float] = None
    ic: str
    t_end: float = 10.0
    N: int = 200
    samples: int = 11
    method: str = "RK45"
    albedo: Literal["smooth", "step"] = "smooth"

    @field_validator("ic")
    @classmethod
    def validate_ic(cls, v: str) -> str:
        """Ensure the initial condition names a known kind."""
        kind, sep, value = v.partition(":")
        if not sep or kind not in ("uniform", "equilibrium") or not value:
            raise ValueError("ic must be 'uniform:<T>' or 'equilibrium:<id>'")
        return v

    @field_validator("t_end")
    @classmethod
    def validate_t_end(cls, v: float) -> float:
        if v < 0:
            raise ValueError("t_end must be non-negative")
        return v

    @field_validator("N")
    @classmethod
    def validate_N(cls, v: int) -> int:
        if not MIN_N <= v <= MAX_N:
            raise ValueError(f"N must lie in [{MIN_N}, {MAX_N}]")
        return v

    @field_validator("samples")
    @classmethod
    def validate_samples(cls, v: int) -> int:
        if not 2 <= v <= MAX_SAMPLES:
            raise ValueError(f"samples must lie in [2, {MAX_SAMPLES}]")
        return v

    @field_validator("method")
    @classmethod
    def validate_method(cls, v: str) -> str:
        if v not in EXPLICIT_METHODS:
            raise ValueError(f"method must be one of {list(EXPLICIT_METHODS)}")
        return v


# ---------------------------------------------------------------------------
# Response models
# ---------------------------------------------------------------------------

class EquilibriumSummary(BaseModel):
    """Stored equilibrium without its profile."""

    id: str
    solution_id: str
    case: str
    geometry: str
    Q: float
    theta_c: List[float]
    T_mean_C: float
    residual_norm: float
    created_at: str


class EquilibriumDetail(EquilibriumSummary):
    """Stored equilibrium with its sampled profile."""

    theta: List[float]
    T: List[float]
    T_at_landmarks: Dict[str, float]
    derivative_mismatch: float


class SimulationResult(BaseModel):
    """Trajectory summary: global mean per sample time plus the final profile."""

    N: int
    t: List[float]
    T_mean_C: List[float]
    theta: List[float]
    T_final: List[float]
    max_change: float


class KernelValue(BaseModel):
    """K(θ, ξ) and its one-sided θ-derivatives."""

    beta: float
    theta: float
    xi: float
    K: float
    dK_left: float
    dK_right: float
