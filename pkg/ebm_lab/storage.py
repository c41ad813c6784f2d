"""
In-memory storage for the EBM lab service.

Computed equilibria live in a module-level dict and are lost on process
restart. The `reset()` helper is used by tests to clear state between runs.
"""

from typing import Any, Dict

# ---------------------------------------------------------------------------
# Storage containers
# ---------------------------------------------------------------------------

# record: id, solution (StationarySolution), config (RunConfig), T_mean, created_at
equilibria: Dict[str, Dict[str, Any]] = {}


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def reset() -> None:
    """Clear all stored equilibria."""
    equilibria.clear()
