"""
Green's kernel endpoint.

Prefix: /kernel
Routes:
  GET    /kernel?theta=&xi=   — K(θ, ξ) and its one-sided θ-derivatives
"""

import math
from typing import Optional

from fastapi import APIRouter, HTTPException, Query, status

from ebm_lab.greenfn import kernel_for
from ebm_lab.models import KernelValue
from ebm_lab.params import PRESETS

router = APIRouter(prefix="/kernel", tags=["kernel"])


@router.get("", response_model=KernelValue)
def evaluate_kernel(
    theta: float = Query(..., ge=0.0, le=math.pi),
    xi: float = Query(..., ge=0.0, le=math.pi),
    Q: Optional[float] = Query(default=None, gt=0.0),
    preset: str = Query(default="aquaplanet"),
) -> KernelValue:
    """Evaluate the kernel at the β of a preset configuration.

    Args:
        theta: Colatitude in [0, π].
        xi:    Source colatitude in [0, π].
        Q:     Solar constant override.
        preset: Named configuration supplying the physics.

    Raises:
        HTTPException 422: If the preset is unknown.
    """
    if preset not in PRESETS:
        raise HTTPException(
            status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
            detail=f"preset must be one of {sorted(PRESETS)}",
        )
    config = PRESETS[preset]
    kernel = kernel_for(config.dimensionless(Q).beta)
    values = (
        kernel.K(theta, xi),
        kernel.K_dtheta(theta, xi, side="left"),
        kernel.K_dtheta(theta, xi, side="right"),
    )
    if not all(math.isfinite(v) for v in values):
        # log singularity at θ = ξ = 0 and θ = ξ = π
        raise HTTPException(
            status_code=status.HTTP_400_BAD_REQUEST,
            detail="kernel is singular at this point",
        )
    K, dK_left, dK_right = values
    return KernelValue(beta=kernel.beta, theta=theta, xi=xi, K=K, dK_left=dK_left, dK_right=dK_right)
