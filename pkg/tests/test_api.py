"""
Tests for the HTTP service.

Tests cover:
  - POST /equilibria              — search, store and validation errors
  - GET /equilibria               — listing and ?case= filtering
  - GET/DELETE /equilibria/{id}   — detail, deletion and 404s
  - POST /equilibria/{id}/stability
  - POST /simulations
  - GET /kernel
"""

import math

from fastapi.testclient import TestClient


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _store(client: TestClient, *cases: str, Q: float = 247.0) -> list:
    """Search the aquaplanet at Q for the given patterns and return the stored list."""
    response = client.post("/equilibria", json={"Q": Q, "cases": list(cases)})
    assert response.status_code == 201
    return response.json()


# ---------------------------------------------------------------------------
# POST /equilibria
# ---------------------------------------------------------------------------

def test_create_equilibria_returns_201(client: TestClient) -> None:
    """The snowball state is found and stored under a fresh id."""
    (record,) = _store(client, "all-ice")
    assert record["solution_id"] == "all-ice-0"
    assert record["case"] == "all-ice"
    assert record["geometry"] == "aquaplanet"
    assert record["Q"] == 247.0
    assert record["theta_c"] == []
    assert record["T_mean_C"] < 0.0
    assert record["residual_norm"] < 1e-6
    assert record["id"] != record["solution_id"]


def test_create_equilibria_none_found_is_empty(client: TestClient) -> None:
    """No snowball exists at high Q; the empty list is a valid answer."""
    assert _store(client, "all-ice", Q=450.0) == []


def test_create_equilibria_with_config(client: TestClient) -> None:
    """A request config is validated and applied."""
    response = client.post(
        "/equilibria",
        json={"Q": 300.0, "config": {"preset": "shifted"}, "cases": ["no-crit-all-ice"]},
    )
    assert response.status_code == 201
    assert all(r["geometry"] == "continent" for r in response.json())


def test_create_equilibria_non_positive_q_returns_422(client: TestClient) -> None:
    response = client.post("/equilibria", json={"Q": 0.0})
    assert response.status_code == 422


def test_create_equilibria_bad_seed_density_returns_422(client: TestClient) -> None:
    response = client.post("/equilibria", json={"Q": 247.0, "seed_density": 0})
    assert response.status_code == 422


def test_create_equilibria_invalid_config_returns_422(client: TestClient) -> None:
    """Config problems are listed one per entry."""
    response = client.post("/equilibria", json={"Q": 247.0, "config": {"D": -1.0}})
    assert response.status_code == 422
    detail = response.json()["detail"]
    assert isinstance(detail, list)
    assert any(line.startswith("physical.D") for line in detail)


# ---------------------------------------------------------------------------
# GET /equilibria
# ---------------------------------------------------------------------------

def test_list_equilibria_empty(client: TestClient) -> None:
    response = client.get("/equilibria")
    assert response.status_code == 200
    assert response.json() == []


def test_list_equilibria_sorted_and_filtered(client: TestClient) -> None:
    """Listing orders by Q and ?case= keeps one pattern."""
    _store(client, "all-ice", "all-water", Q=250.0)
    _store(client, "all-ice", Q=247.0)

    listed = client.get("/equilibria").json()
    assert [(r["Q"], r["solution_id"]) for r in listed] == [
        (247.0, "all-ice-0"),
        (250.0, "all-ice-0"),
        (250.0, "all-water-0"),
    ]

    filtered = client.get("/equilibria", params={"case": "all-water"}).json()
    assert [r["case"] for r in filtered] == ["all-water"]


# ---------------------------------------------------------------------------
# GET/DELETE /equilibria/{id}
# ---------------------------------------------------------------------------

def test_get_equilibrium_detail(client: TestClient) -> None:
    """The detail view carries the full profile and pole values."""
    (record,) = _store(client, "all-water")
    response = client.get(f"/equilibria/{record['id']}")
    assert response.status_code == 200
    body = response.json()
    assert len(body["theta"]) == len(body["T"])
    assert body["theta"][0] == 0.0
    assert body["theta"][-1] == math.pi
    assert set(body["T_at_landmarks"]) == {"T_0", "T_pi"}
    assert body["derivative_mismatch"] == 0.0


def test_get_equilibrium_not_found_returns_404(client: TestClient) -> None:
    response = client.get("/equilibria/nonexistent-id")
    assert response.status_code == 404
    assert response.json()["detail"] == "Equilibrium not found"


def test_delete_equilibrium_returns_204(client: TestClient) -> None:
    (record,) = _store(client, "all-ice")
    response = client.delete(f"/equilibria/{record['id']}")
    assert response.status_code == 204
    assert client.get(f"/equilibria/{record['id']}").status_code == 404


def test_delete_equilibrium_not_found_returns_404(client: TestClient) -> None:
    response = client.delete("/equilibria/nonexistent-id")
    assert response.status_code == 404


# ---------------------------------------------------------------------------
# POST /equilibria/{id}/stability
# ---------------------------------------------------------------------------

def test_stability_eigen(client: TestClient) -> None:
    """The snowball state is linearly stable."""
    (record,) = _store(client, "all-ice")
    response = client.post(f"/equilibria/{record['id']}/stability", json={"method": "eigen", "N": 100})
    assert response.status_code == 200
    body = response.json()
    assert body["method"] == "eigen"
    assert body["verdict"] == "stable"
    assert body["N"] == 100
    assert len(body["eig_re"]) == 99


def test_stability_slope_method_returns_422(client: TestClient) -> None:
    """Slope classification needs a branch, not one stored state."""
    (record,) = _store(client, "all-ice")
    response = client.post(f"/equilibria/{record['id']}/stability", json={"method": "slope"})
    assert response.status_code == 422


def test_stability_grid_too_coarse_returns_422(client: TestClient) -> None:
    (record,) = _store(client, "all-ice")
    response = client.post(f"/equilibria/{record['id']}/stability", json={"N": 10})
    assert response.status_code == 422


def test_stability_not_found_returns_404(client: TestClient) -> None:
    response = client.post("/equilibria/nonexistent-id/stability", json={})
    assert response.status_code == 404


# ---------------------------------------------------------------------------
# POST /simulations
# ---------------------------------------------------------------------------

def test_simulation_from_uniform(client: TestClient) -> None:
    """A uniform start is summarised at every sample time."""
    response = client.post(
        "/simulations",
        json={"ic": "uniform:-3", "t_end": 1.0, "N": 64, "samples": 5},
    )
    assert response.status_code == 200
    body = response.json()
    assert body["t"] == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert len(body["T_mean_C"]) == 5
    assert abs(body["T_mean_C"][0] - (-30.0)) < 1e-3
    assert len(body["T_final"]) == 65
    assert body["max_change"] > 0.0


def test_simulation_from_stored_equilibrium_barely_moves(client: TestClient) -> None:
    """Starting on the snowball state stays on it."""
    (record,) = _store(client, "all-ice")
    response = client.post(
        "/simulations",
        json={"ic": f"equilibrium:{record['id']}", "t_end": 2.0, "N": 100, "samples": 3},
    )
    assert response.status_code == 200
    assert response.json()["max_change"] < 5e-3


def test_simulation_from_continent_equilibrium_uses_its_config(client: TestClient) -> None:
    """An equilibrium found on a continent is sampled with the configuration it was found under."""
    response = client.post(
        "/equilibria",
        json={"Q": 247.0, "config": {"preset": "shifted"}, "cases": ["no-crit-all-ice"]},
    )
    assert response.status_code == 201
    (record,) = response.json()
    response = client.post(
        "/simulations",
        json={"ic": f"equilibrium:{record['id']}", "t_end": 0.5, "N": 100, "samples": 2},
    )
    assert response.status_code == 200
    assert len(response.json()["T_final"]) == 101


def test_simulation_unknown_equilibrium_returns_404(client: TestClient) -> None:
    response = client.post("/simulations", json={"ic": "equilibrium:nonexistent-id", "N": 64})
    assert response.status_code == 404


def test_simulation_bad_ic_returns_422(client: TestClient) -> None:
    for ic in ("warm", "uniform:", "uniform:hot", "file:x.csv"):
        response = client.post("/simulations", json={"ic": ic, "N": 64})
        assert response.status_code == 422, ic


def test_simulation_bad_method_returns_422(client: TestClient) -> None:
    response = client.post("/simulations", json={"ic": "uniform:0", "method": "BDF"})
    assert response.status_code == 422


def test_simulation_negative_t_end_returns_422(client: TestClient) -> None:
    response = client.post("/simulations", json={"ic": "uniform:0", "t_end": -1.0})
    assert response.status_code == 422


# ---------------------------------------------------------------------------
# GET /kernel
# ---------------------------------------------------------------------------

def test_kernel_jump_on_diagonal(client: TestClient) -> None:
    """The one-sided derivatives at θ = ξ differ by −1/sin ξ."""
    response = client.get("/kernel", params={"theta": 1.0, "xi": 1.0})
    assert response.status_code == 200
    body = response.json()
    assert body["K"] > 0.0
    assert abs(body["beta"] - 1 / 0.208) < 1e-12
    assert abs((body["dK_right"] - body["dK_left"]) + 1.0 / math.sin(1.0)) < 1e-6


def test_kernel_is_symmetric(client: TestClient) -> None:
    a = client.get("/kernel", params={"theta": 0.5, "xi": 2.0}).json()
    b = client.get("/kernel", params={"theta": 2.0, "xi": 0.5}).json()
    assert abs(a["K"] - b["K"]) < 1e-12


def test_kernel_out_of_range_returns_422(client: TestClient) -> None:
    response = client.get("/kernel", params={"theta": 4.0, "xi": 1.0})
    assert response.status_code == 422


def test_kernel_unknown_preset_returns_422(client: TestClient) -> None:
    response = client.get("/kernel", params={"theta": 1.0, "xi": 1.0, "preset": "venus"})
    assert response.status_code == 422


def test_kernel_singular_corner_returns_400(client: TestClient) -> None:
    response = client.get("/kernel", params={"theta": 0.0, "xi": 0.0})
    assert response.status_code == 400
