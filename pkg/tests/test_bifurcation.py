"""
Tests for mean temperatures, branch assembly, fold detection and sweeps.
"""

import math
from collections import Counter
from typing import List

import numpy as np
import pytest

from ebm_lab.bifurcation import (
    Branch,
    BranchPoint,
    assemble_branches,
    detect_folds,
    mean_temperature,
    profile_mean,
    sweep,
)
from ebm_lab.bim import StationarySolution
from ebm_lab.params import PRESETS, RunConfig, Surface, source_coefficients
from ebm_lab.stability import slope_classify


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _point(Q: float, T: float, case: str = "two-edges", stability: str = "stable") -> BranchPoint:
    return BranchPoint(Q=Q, T_mean=T, case=case, theta_c=(), stability=stability)


def _parabola_branch() -> Branch:
    """Q = 260 − (T̄ − 5)², turning at (260, 5)."""
    T = np.arange(0.0, 10.01, 0.5)
    points = [_point(260.0 - (t - 5.0) ** 2, float(t)) for t in T]
    return Branch(id="two-edges-b0", case="two-edges", points=points)


def _single(solutions: List[StationarySolution], pattern: str) -> StationarySolution:
    return next(s for s in solutions if s.case.ice_pattern == pattern)


# ---------------------------------------------------------------------------
# Mean temperature
# ---------------------------------------------------------------------------

def test_mean_of_constant_profile() -> None:
    """The area-weighted mean of a constant is the constant."""
    theta = np.linspace(0.0, math.pi, 401)
    assert profile_mean(theta, np.full_like(theta, -2.5)) == pytest.approx(-2.5, rel=1e-8)


def test_mean_with_breaks_matches_without() -> None:
    """Break points do not change the mean of a smooth profile."""
    theta = np.sort(np.concatenate([np.linspace(0.0, math.pi, 401), [0.77, 2.01]]))
    T = np.cos(theta) ** 2
    assert profile_mean(theta, T, [0.77, 2.01]) == pytest.approx(profile_mean(theta, T), rel=1e-6)


@pytest.mark.parametrize("pattern,ice", [("all-ice", True), ("all-water", False)])
def test_energy_balance_identity(
    aquaplanet_247: List[StationarySolution], aquaplanet: RunConfig, pattern: str, ice: bool
) -> None:
    """β·T̄ equals the mean source A + 2B/3 for a uniform-cover state."""
    cfg = aquaplanet.with_Q(247.0)
    dp = cfg.dimensionless()
    A, B = source_coefficients(ice, Surface.WATER, dp, cfg.physical)
    s = _single(aquaplanet_247, pattern)
    assert dp.beta * profile_mean(s.theta, s.T) == pytest.approx(A + 2.0 * B / 3.0, rel=1e-6)


def test_ice_makes_the_planet_colder(aquaplanet_247: List[StationarySolution], aquaplanet: RunConfig) -> None:
    """Snowball mean < ice-free mean, in °C."""
    p = aquaplanet.physical
    cold = mean_temperature(_single(aquaplanet_247, "all-ice"), p)
    warm = mean_temperature(_single(aquaplanet_247, "all-water"), p)
    assert cold < warm
    assert cold < 0.0


# ---------------------------------------------------------------------------
# Branches and folds
# ---------------------------------------------------------------------------

def test_fold_of_a_parabola() -> None:
    """One fold at the vertex (Q, T̄) = (260, 5)."""
    folds = detect_folds(_parabola_branch())
    assert len(folds) == 1
    assert folds[0].Q_fold == pytest.approx(260.0)
    assert folds[0].T_mean_fold == pytest.approx(5.0)
    assert folds[0].branch_id == "two-edges-b0"


def test_monotone_branch_has_no_fold() -> None:
    branch = Branch(id="b", case="all-ice", points=[_point(250.0 + i, float(i)) for i in range(6)])
    assert detect_folds(branch) == []


def test_repeated_q_does_not_fake_a_fold() -> None:
    """Zero ΔQ steps are skipped when reading turns."""
    Q = [250.0, 251.0, 251.0, 252.0, 253.0]
    branch = Branch(id="b", case="all-ice", points=[_point(q, float(i)) for i, q in enumerate(Q)])
    assert detect_folds(branch) == []


def test_separate_lines_become_separate_branches() -> None:
    """Points of one pattern far apart in T̄ are never chained."""
    points = [_point(250.0 + i, 0.0) for i in range(5)] + [_point(250.0 + i, 20.0) for i in range(5)]
    branches = assemble_branches(points, step=1.0)
    assert [len(b.points) for b in branches] == [5, 5]
    assert {b.id for b in branches} == {"two-edges-b0", "two-edges-b1"}
    assert not any(b.ambiguous for b in branches)
    for b in branches:
        assert [pt.Q for pt in b.points] == [250.0, 251.0, 252.0, 253.0, 254.0]


def test_patterns_are_chained_separately() -> None:
    """Branches never mix ice patterns."""
    points = [_point(250.0 + i, 0.0, case="all-ice") for i in range(3)]
    points += [_point(250.0 + i, 0.0, case="all-water") for i in range(3)]
    branches = assemble_branches(points, step=1.0)
    assert sorted(b.case for b in branches) == ["all-ice", "all-water"]


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("Q_min,Q_max,n_steps", [(260.0, 250.0, 5), (250.0, 260.0, 1)])
def test_sweep_rejects_bad_ranges(aquaplanet: RunConfig, Q_min: float, Q_max: float, n_steps: int) -> None:
    with pytest.raises(ValueError):
        sweep(aquaplanet, Q_min, Q_max, n_steps)


def test_short_uniform_sweep(aquaplanet: RunConfig) -> None:
    """A three-step snowball sweep gives one stable, rising branch."""
    diagram = sweep(aquaplanet, 246.0, 248.0, 3, cases=["all-ice"], N=100)
    assert [pt.Q for pt in diagram.points] == [246.0, 247.0, 248.0]
    assert all(pt.stability == "stable" for pt in diagram.points)
    assert len(diagram.branches) == 1
    assert diagram.folds == []
    assert diagram.step == pytest.approx(1.0)
    T = [pt.T_mean for pt in diagram.branches[0].points]
    assert T == sorted(T)


@pytest.mark.slow
def test_aquaplanet_three_stable_states() -> None:
    """Some Q has three stable equilibria and eigen/slope agree on ≥ 98% of points."""
    diagram = sweep(PRESETS["aquaplanet"], 240.0, 320.0, 81)
    stable = Counter(pt.Q for pt in diagram.points if pt.stability == "stable")
    assert max(stable.values()) == 3

    agree = total = 0
    for branch in diagram.branches:
        if len(branch.points) < 3:
            continue
        for pt, slope in zip(branch.points, slope_classify(branch.points)):
            if slope == "marginal" or pt.stability not in ("stable", "unstable"):
                continue
            total += 1
            agree += slope == pt.stability
    assert total > 0
    assert agree / total >= 0.98


@pytest.mark.slow
def test_symmetry_breaking_reduces_folds() -> None:
    """Fold count falls as the continent moves off the equator."""
    counts = {}
    coexisting = {}
    for preset in ("symmetric", "shifted", "far-shifted"):
        diagram = sweep(PRESETS[preset], 240.0, 320.0, 81, classify=False)
        counts[preset] = len(diagram.folds)
        coexisting[preset] = max(Counter(pt.Q for pt in diagram.points).values())
    assert counts["symmetric"] > counts["shifted"] >= counts["far-shifted"]
    assert coexisting["symmetric"] >= 7
    assert coexisting["shifted"] < 7
    assert coexisting["far-shifted"] < 7
