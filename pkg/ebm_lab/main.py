"""
EBM lab — FastAPI application entry point.

Start with:
    uvicorn ebm_lab.main:app --reload

The app exposes:
  - /equilibria  → equilibrium search, storage and stability
  - /simulations → time integration of the diffusive model
  - /kernel      → Green's kernel evaluation
"""

from fastapi import FastAPI

from ebm_lab import __version__
from ebm_lab.routers import equilibria, kernel, simulations

# ---------------------------------------------------------------------------
# Application
# ---------------------------------------------------------------------------

app = FastAPI(
    title="EBM lab",
    description="Equilibria, dynamics and stability of a diffusive energy balance model.",
    version=__version__,
)

# ---------------------------------------------------------------------------
# Routers
# ---------------------------------------------------------------------------

app.include_router(equilibria.router)
app.include_router(simulations.router)
app.include_router(kernel.router)
