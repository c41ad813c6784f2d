"""
Routers of the EBM lab service, plus the helpers they share for turning
request configs and library errors into HTTP responses.
"""

from typing import Any, Dict, Optional

from fastapi import HTTPException, status

from ebm_lab.errors import ConfigError, EBMError
from ebm_lab.io import config_from_mapping, resolve_config
from ebm_lab.params import RunConfig


def request_config(data: Optional[Dict[str, Any]], Q: Optional[float] = None) -> RunConfig:
    """Validate an optional request config, applying a Q override.

    Raises:
        HTTPException 422: With one ``key: reason`` line per problem.
    """
    try:
        config = resolve_config() if data is None else config_from_mapping(data, "config")
    except ConfigError as exc:
        raise HTTPException(
            status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
            detail=exc.problems or [str(exc)],
        ) from exc
    return config if Q is None else config.with_Q(Q)


def numeric_failure(exc: EBMError) -> HTTPException:
    """400 for infeasible requests and numerical failures."""
    return HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(exc))
