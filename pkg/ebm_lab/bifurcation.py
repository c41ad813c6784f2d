"""
Bifurcation diagrams in the solar constant Q.

A sweep enumerates equilibria at each Q (warm-started from the previous Q's
roots), classifies each one, and reduces them to mean temperatures. Points of
one ice pattern are then chained into branches and folds are read off the
turning points of Q along each branch.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import simpson

from ebm_lab.bim import StationarySolution, enumerate_equilibria
from ebm_lab.errors import EBMError
from ebm_lab.greenfn import GreenKernel, kernel_for
from ebm_lab.params import PhysicalParams, RunConfig
from ebm_lab.stability import classify_solution, slope_classify

logger = logging.getLogger(__name__)

# Chaining bounds per Q step: mean temperature (°C) and critical latitudes (rad).
CHAIN_T_BOUND = 5.0
CHAIN_THETA_BOUND = 0.25

# ---------------------------------------------------------------------------
# Data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BranchPoint:
    Q: float
    T_mean: float
    case: str
    theta_c: Tuple[float, ...]
    stability: str
    solution_id: str = ""

    @property
    def n_critical(self) -> int:
        return len(self.theta_c)


@dataclass
class Branch:
    id: str
    case: str
    points: List[BranchPoint]
    ambiguous: bool = False


@dataclass(frozen=True)
class Fold:
    branch_id: str
    Q_fold: float
    T_mean_fold: float
    stability_before: str
    stability_after: str


@dataclass
class Diagram:
    """Sweep result.

    Attributes:
        points: Sorted by (case, Q).
    """

    config: RunConfig
    points: List[BranchPoint]
    branches: List[Branch]
    folds: List[Fold]
    Q_min: float
    Q_max: float
    step: float
    seed_density: int
    failures: Dict[float, str] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Mean temperature
# ---------------------------------------------------------------------------

def profile_mean(theta: np.ndarray, T: np.ndarray, breaks: Sequence[float] = ()) -> float:
    """(1/2)∫₀^π T sinθ dθ by Simpson's rule on each piece between breaks."""
    theta = np.asarray(theta, dtype=float)
    f = np.asarray(T, dtype=float) * np.sin(theta)
    cuts = sorted({theta[0], theta[-1], *[b for b in breaks if theta[0] < b < theta[-1]]})
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        sel = (theta >= lo) & (theta <= hi)
        if np.count_nonzero(sel) >= 2:
            total += simpson(f[sel], x=theta[sel])
    return 0.5 * total


def mean_temperature(solution: StationarySolution, p: Optional[PhysicalParams] = None) -> float:
    """Area-weighted mean temperature of an equilibrium in °C."""
    p = p or PhysicalParams()
    breaks = [b for b in solution.unknowns.node_theta if 0.0 < b < math.pi]
    if solution.case.symmetric:
        breaks += [math.pi - b for b in breaks]
    return p.T_s * profile_mean(solution.theta, solution.T, breaks)


# ---------------------------------------------------------------------------
# Sweep
# ---------------------------------------------------------------------------

def _warm_starts(solutions: List[StationarySolution]) -> Dict[str, np.ndarray]:
    grouped: Dict[str, List[np.ndarray]] = {}
    for s in solutions:
        if s.unknowns.theta_c.size:
            grouped.setdefault(s.case.ice_pattern, []).append(s.unknowns.theta_c)
    return {k: np.vstack(v) for k, v in grouped.items()}


def sweep(
    config: RunConfig,
    Q_min: float,
    Q_max: float,
    n_steps: int,
    seed_density: int = 8,
    threads: int = 1,
    classify: bool = True,
    N: int = 200,
    kernel: Optional[GreenKernel] = None,
    cases: Optional[Sequence[str]] = None,
) -> Diagram:
    """Enumerate and classify equilibria on a uniform Q grid.

    Per-Q failures are logged and recorded in Diagram.failures; the sweep
    continues.

    Args:
        cases: Restrict the enumeration to these ice patterns.

    Raises:
        ValueError: If Q_min >= Q_max or n_steps < 2.
    """
    if not Q_min < Q_max:
        raise ValueError(f"Q_min must be below Q_max, got {Q_min} >= {Q_max}")
    if n_steps < 2:
        raise ValueError(f"n_steps must be at least 2, got {n_steps}")
    kernel = kernel or kernel_for(config.dimensionless().beta)
    Qs = np.linspace(Q_min, Q_max, n_steps)
    step = float(Qs[1] - Qs[0])

    points: List[BranchPoint] = []
    failures: Dict[float, str] = {}
    warm: Dict[str, np.ndarray] = {}
    for Q in Qs:
        Q = float(Q)
        try:
            solutions = enumerate_equilibria(
                Q, config, kernel, seed_density, cases=cases, warm_starts=warm, threads=threads
            )
        except EBMError as exc:
            logger.warning("Q=%.3f skipped: %s", Q, exc)
            failures[Q] = str(exc)
            continue
        warm = _warm_starts(solutions)
        for s in solutions:
            verdict = "unknown"
            if classify:
                try:
                    verdict = classify_solution(s, config, "eigen", N, kernel).verdict
                except EBMError as exc:
                    logger.warning("stability of %s at Q=%.3f failed: %s", s.id, Q, exc)
            points.append(
                BranchPoint(
                    Q=Q,
                    T_mean=mean_temperature(s, config.physical),
                    case=s.case.ice_pattern,
                    theta_c=tuple(float(x) for x in s.theta_c),
                    stability=verdict,
                    solution_id=s.id,
                )
            )
        logger.info("Q=%.3f: %d equilibria", Q, len(solutions))

    points.sort(key=lambda pt: (pt.case, pt.Q, pt.theta_c))
    branches = assemble_branches(points, step)
    folds = [fold for branch in branches for fold in detect_folds(branch)]
    for branch in branches:
        _cross_check(branch)
    return Diagram(
        config=config,
        points=points,
        branches=branches,
        folds=folds,
        Q_min=float(Q_min),
        Q_max=float(Q_max),
        step=step,
        seed_density=seed_density,
        failures=failures,
    )


def _cross_check(branch: Branch) -> None:
    if len(branch.points) < 3:
        return
    slopes = slope_classify(branch.points)
    for pt, slope in zip(branch.points, slopes):
        if slope != "marginal" and pt.stability in ("stable", "unstable") and slope != pt.stability:
            logger.warning(
                "branch %s at Q=%.3f: eigen says %s, slope says %s", branch.id, pt.Q, pt.stability, slope
            )


# ---------------------------------------------------------------------------
# Branches and folds
# ---------------------------------------------------------------------------

def _distance(a: BranchPoint, b: BranchPoint, step: float) -> float:
    d = max(abs(a.Q - b.Q) / step, abs(a.T_mean - b.T_mean) / CHAIN_T_BOUND)
    if a.theta_c and len(a.theta_c) == len(b.theta_c):
        d = max(d, float(np.max(np.abs(np.subtract(a.theta_c, b.theta_c)))) / CHAIN_THETA_BOUND)
    return d


def assemble_branches(points: Sequence[BranchPoint], step: Optional[float] = None) -> List[Branch]:
    """Greedy nearest-neighbour chaining of the points of each pattern.

    Two points may be linked when |ΔQ| ≤ step and their mean temperatures and
    critical latitudes are within the per-step bounds. Walks start from
    points with at most one neighbour; a walk that meets two unvisited
    candidates takes the nearer one and flags the branch as ambiguous.
    """
    if step is None:
        qs = np.unique([pt.Q for pt in points])
        step = float(np.min(np.diff(qs))) if qs.size > 1 else 1.0
    by_case: Dict[str, List[BranchPoint]] = {}
    for pt in points:
        by_case.setdefault(pt.case, []).append(pt)

    branches: List[Branch] = []
    for case in sorted(by_case):
        pts = sorted(by_case[case], key=lambda pt: (pt.Q, pt.theta_c))
        n = len(pts)
        dist = np.array([[_distance(a, b, step) for b in pts] for a in pts]) if n else np.zeros((0, 0))
        linked = (dist <= 1.0 + 1e-9) & ~np.eye(n, dtype=bool)
        degree = linked.sum(axis=1)
        unvisited = set(range(n))
        count = 0
        while unvisited:
            ends = [i for i in sorted(unvisited) if degree[i] <= 1]
            current = ends[0] if ends else min(unvisited)
            unvisited.discard(current)
            chain = [pts[current]]
            ambiguous = False
            while True:
                candidates = [j for j in unvisited if linked[current, j]]
                if not candidates:
                    break
                if len(candidates) > 1:
                    ambiguous = True
                current = min(candidates, key=lambda j: (dist[current, j], j))
                unvisited.discard(current)
                chain.append(pts[current])
            if ambiguous:
                logger.warning("branch %s-b%d chained through an ambiguous neighbourhood", case, count)
            branches.append(Branch(id=f"{case}-b{count}", case=case, points=chain, ambiguous=ambiguous))
            count += 1
    return branches


def detect_folds(branch: Branch) -> List[Fold]:
    """Turning points of Q along an ordered branch.

    The fold location is the vertex of the parabola Q(T̄) through the points
    around each turn, clipped to the turn's T̄ range.
    """
    pts = branch.points
    if len(pts) < 3:
        return []
    Q = np.array([p.Q for p in pts])
    T = np.array([p.T_mean for p in pts])
    dQ = np.diff(Q)
    moving = [i for i, d in enumerate(dQ) if d != 0.0]
    folds = []
    for j, k in zip(moving[:-1], moving[1:]):
        if np.sign(dQ[j]) == np.sign(dQ[k]):
            continue
        idx = [j, j + 1, k + 1]
        Q_fold, T_fold = _parabolic_vertex(T[idx], Q[idx])
        if Q_fold is None:
            turn = slice(j + 1, k + 1)
            pick = int(np.argmax(Q[turn]) if dQ[j] > 0 else np.argmin(Q[turn])) + j + 1
            Q_fold, T_fold = float(Q[pick]), float(T[pick])
        folds.append(
            Fold(
                branch_id=branch.id,
                Q_fold=Q_fold,
                T_mean_fold=T_fold,
                stability_before=pts[j].stability,
                stability_after=pts[k + 1].stability,
            )
        )
    return folds


def _parabolic_vertex(T: np.ndarray, Q: np.ndarray) -> Tuple[Optional[float], Optional[float]]:
    if np.unique(T).size < 3:
        return None, None
    a, b, c = np.polyfit(T, Q, 2)
    if a == 0.0:
        return None, None
    T_star = -b / (2.0 * a)
    if not T.min() <= T_star <= T.max():
        return None, None
    return float(np.polyval([a, b, c], T_star)), float(T_star)
