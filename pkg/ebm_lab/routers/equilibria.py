"""
Equilibrium endpoints.

Prefix: /equilibria
Routes:
  POST   /equilibria                          — search one Q and store every equilibrium found
  GET    /equilibria                          — list stored equilibria (filterable by ?case=)
  GET    /equilibria/{equilibrium_id}         — one equilibrium with its profile, or 404
  DELETE /equilibria/{equilibrium_id}         — delete an equilibrium (204)
  POST   /equilibria/{equilibrium_id}/stability — classify a stored equilibrium
"""

import logging
import uuid
from datetime import datetime, timezone
from typing import List, Optional

from fastapi import APIRouter, HTTPException, Query, status
from fastapi.responses import Response

from ebm_lab import storage
from ebm_lab.bifurcation import mean_temperature
from ebm_lab.bim import enumerate_equilibria
from ebm_lab.errors import EBMError
from ebm_lab.models import (
    EquilibriumDetail,
    EquilibriumRequest,
    EquilibriumSummary,
    StabilityRequest,
)
from ebm_lab.routers import numeric_failure, request_config
from ebm_lab.stability import StabilityReport, classify_solution

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/equilibria", tags=["equilibria"])


# ---------------------------------------------------------------------------
# Internal helpers
# ---------------------------------------------------------------------------

def _summary_fields(d: dict) -> dict:
    s = d["solution"]
    return {
        "id": d["id"],
        "solution_id": s.id,
        "case": s.case.ice_pattern,
        "geometry": s.case.geometry,
        "Q": s.Q,
        "theta_c": [float(x) for x in s.theta_c],
        "T_mean_C": d["T_mean"],
        "residual_norm": s.residual_norm,
        "created_at": d["created_at"],
    }


def _summary_from_dict(d: dict) -> EquilibriumSummary:
    return EquilibriumSummary(**_summary_fields(d))


def _detail_from_dict(d: dict) -> EquilibriumDetail:
    """Convert a storage record into the full response model, profile included."""
    s = d["solution"]
    return EquilibriumDetail(
        **_summary_fields(d),
        theta=s.theta.tolist(),
        T=s.T.tolist(),
        T_at_landmarks=dict(s.unknowns.T_at_landmarks),
        derivative_mismatch=s.derivative_mismatch,
    )


def _get_equilibrium_or_404(equilibrium_id: str) -> dict:
    """Fetch an equilibrium from storage or raise HTTP 404.

    Args:
        equilibrium_id: UUID assigned when the equilibrium was stored.

    Returns:
        The raw storage record.

    Raises:
        HTTPException 404: If the equilibrium does not exist.
    """
    record = storage.equilibria.get(equilibrium_id)
    if record is None:
        raise HTTPException(
            status_code=status.HTTP_404_NOT_FOUND,
            detail="Equilibrium not found",
        )
    return record


# ---------------------------------------------------------------------------
# Endpoints
# ---------------------------------------------------------------------------

@router.post("", response_model=List[EquilibriumSummary], status_code=status.HTTP_201_CREATED)
def create_equilibria(body: EquilibriumRequest) -> List[EquilibriumSummary]:
    """Enumerate the equilibria at body.Q and store each one.

    Args:
        body: EquilibriumRequest with Q, optional config, seed density and
            pattern filter.

    Returns:
        The stored equilibria (possibly none) in pattern order.

    Raises:
        HTTPException 422: If the config is invalid.
        HTTPException 400: If the search fails numerically.
    """
    config = request_config(body.config, body.Q)
    try:
        solutions = enumerate_equilibria(body.Q, config, seed_density=body.seed_density, cases=body.cases)
    except EBMError as exc:
        raise numeric_failure(exc) from exc

    created_at = datetime.now(tz=timezone.utc).isoformat()
    out = []
    for s in solutions:
        record = {
            "id": str(uuid.uuid4()),
            "solution": s,
            "config": config,
            "T_mean": mean_temperature(s, config.physical),
            "created_at": created_at,
        }
        storage.equilibria[record["id"]] = record
        out.append(_summary_from_dict(record))
    logger.info("stored %d equilibria at Q=%.3f", len(out), body.Q)
    return out


@router.get("", response_model=List[EquilibriumSummary])
def list_equilibria(case: Optional[str] = Query(default=None)) -> List[EquilibriumSummary]:
    """Return stored equilibria, optionally only those of one ice pattern.

    Args:
        case: Ice-pattern name to filter by.

    Returns:
        A (possibly empty) list ordered by Q, then pattern.
    """
    records = [
        d for d in storage.equilibria.values()
        if case is None or d["solution"].case.ice_pattern == case
    ]
    records.sort(key=lambda d: (d["solution"].Q, d["solution"].id))
    return [_summary_from_dict(d) for d in records]


@router.post("/{equilibrium_id}/stability", response_model=StabilityReport)
def classify_equilibrium(equilibrium_id: str, body: StabilityRequest) -> StabilityReport:
    """Classify a stored equilibrium by spectrum or by perturbed integration.

    Raises:
        HTTPException 404: If the equilibrium does not exist.
        HTTPException 400: If the classification fails numerically.
    """
    record = _get_equilibrium_or_404(equilibrium_id)
    try:
        return classify_solution(record["solution"], record["config"], body.method, body.N)
    except EBMError as exc:
        raise numeric_failure(exc) from exc


@router.get("/{equilibrium_id}", response_model=EquilibriumDetail)
def get_equilibrium(equilibrium_id: str) -> EquilibriumDetail:
    """Return one equilibrium with its sampled profile or 404."""
    return _detail_from_dict(_get_equilibrium_or_404(equilibrium_id))


@router.delete("/{equilibrium_id}", status_code=status.HTTP_204_NO_CONTENT)
def delete_equilibrium(equilibrium_id: str) -> Response:
    """Delete a stored equilibrium.

    Raises:
        HTTPException 404: If the equilibrium does not exist.
    """
    _get_equilibrium_or_404(equilibrium_id)
    del storage.equilibria[equilibrium_id]
    return Response(status_code=status.HTTP_204_NO_CONTENT)
