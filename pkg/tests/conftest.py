"""
Pytest configuration and shared fixtures for the EBM lab test suite.

Fixtures:
  client            — a fresh TestClient bound to the FastAPI app.
                      Storage is reset before EVERY test so tests are fully isolated.
  params            — reference physical parameters (session scope).
  aquaplanet        — the aquaplanet run configuration at Q = 247 (session scope).
  kernel            — Green's kernel for the reference β (session scope).
  aquaplanet_247    — every equilibrium of the aquaplanet at Q = 247 (session scope).

Markers:
  slow  — long sweeps and continent searches; deselect with ``-m "not slow"``.
"""

from typing import List

import pytest
from fastapi.testclient import TestClient

from ebm_lab import storage
from ebm_lab.bim import StationarySolution, enumerate_equilibria
from ebm_lab.greenfn import GreenKernel, kernel_for
from ebm_lab.main import app
from ebm_lab.params import PRESETS, PhysicalParams, RunConfig


def pytest_configure(config) -> None:
    config.addinivalue_line("markers", "slow: long-running sweeps and continent searches")


@pytest.fixture(autouse=True)
def reset_storage() -> None:
    """Clear all stored equilibria before each test."""
    storage.reset()


@pytest.fixture
def client(reset_storage) -> TestClient:  # noqa: F811
    """Return a TestClient wired to the FastAPI app.

    Returns:
        A configured httpx-backed TestClient.
    """
    return TestClient(app)


@pytest.fixture(scope="session")
def params() -> PhysicalParams:
    return PhysicalParams()


@pytest.fixture(scope="session")
def aquaplanet() -> RunConfig:
    return PRESETS["aquaplanet"]


@pytest.fixture(scope="session")
def kernel(aquaplanet: RunConfig) -> GreenKernel:
    return kernel_for(aquaplanet.dimensionless().beta)


@pytest.fixture(scope="session")
def aquaplanet_247(aquaplanet: RunConfig, kernel: GreenKernel) -> List[StationarySolution]:
    """All equilibria of the reference aquaplanet at Q = 247."""
    return enumerate_equilibria(247.0, aquaplanet, kernel)
