"""
Ice patterns and the region layouts they induce.

A pattern is described per surface segment (north ocean, continent, south
ocean; a single ocean segment on an aquaplanet) by whether the segment starts
iced and how many critical latitudes it holds. Compiling a pattern against a
geometry gives a CaseLayout: the ordered node list (poles, critical latitudes,
continent edges, the mirror point of a truncated domain) and the step-albedo
branch on every region between consecutive nodes.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from ebm_lab.errors import InfeasibleConfigurationError
from ebm_lab.params import (
    ContinentConfig,
    DimensionlessParams,
    PhysicalParams,
    Surface,
    source_coefficients,
)

logger = logging.getLogger(__name__)

# Critical latitudes may not come closer than this to an interval end or to
# each other.
FEASIBILITY_MARGIN = 1e-8

# ---------------------------------------------------------------------------
# Source branches
# ---------------------------------------------------------------------------

BRANCH_NAMES = {
    (False, Surface.WATER): "h1",
    (True, Surface.WATER): "h2",
    (False, Surface.LAND): "h3",
    (True, Surface.LAND): "h4",
}


@dataclass(frozen=True)
class SourceBranch:
    """Step-albedo source h(θ) = A + B sin²θ on one region."""

    ice: bool
    surface: Surface
    A: float
    B: float
    beta: float

    @property
    def name(self) -> str:
        return BRANCH_NAMES[(self.ice, self.surface)]

    def value(self, theta):
        return self.A + self.B * np.sin(theta) ** 2

    def particular(self, theta) -> Tuple[np.ndarray, np.ndarray]:
        """Particular solution w of L w = h and sinθ·w′(θ)."""
        theta = np.asarray(theta, dtype=float)
        c, s = np.cos(theta), np.sin(theta)
        p2 = 0.5 * (3.0 * c * c - 1.0)
        w = self.A / self.beta + self.B * (2.0 / 3.0) * (1.0 / self.beta - p2 / (6.0 + self.beta))
        sin_dw = 2.0 * self.B * s * s * c / (6.0 + self.beta)
        return w, sin_dw


def make_branch(
    ice: bool, surface: Surface, dp: DimensionlessParams, p: PhysicalParams
) -> SourceBranch:
    A, B = source_coefficients(ice, surface, dp, p)
    return SourceBranch(ice=ice, surface=surface, A=A, B=B, beta=dp.beta)


# ---------------------------------------------------------------------------
# Patterns
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SegmentPattern:
    """Ice state of one surface segment: iced at its northern end, crit count."""

    first_iced: bool
    n_crit: int

    @property
    def last_iced(self) -> bool:
        return self.first_iced != (self.n_crit % 2 == 1)

    def code(self) -> str:
        return ("i" if self.first_iced else "w") + str(self.n_crit)


def _seg(first_iced: bool, n_crit: int) -> SegmentPattern:
    return SegmentPattern(first_iced, n_crit)


W0, I0 = _seg(False, 0), _seg(True, 0)

AQUAPLANET_PATTERNS: Dict[str, Tuple[SegmentPattern, ...]] = {
    "all-water": (W0,),
    "all-ice": (I0,),
    "two-edges": (_seg(True, 2),),
}

# North ocean, continent, south ocean.
CONTINENT_PATTERNS: Dict[str, Tuple[SegmentPattern, ...]] = {
    "no-crit-all-warm": (W0, W0, W0),
    "no-crit-all-ice": (I0, I0, I0),
    "no-crit-ice-continent-only": (W0, I0, W0),
    "no-crit-north+continent-ice": (I0, I0, W0),
    "one-crit-north-ocean": (_seg(True, 1), W0, W0),
    "one-crit-continent": (I0, _seg(True, 1), W0),
    "one-crit-south-ocean": (I0, I0, _seg(False, 1)),
    "two-crit-oceans": (_seg(True, 1), W0, _seg(False, 1)),
    "two-crit-oceans-ice-continent": (_seg(True, 1), I0, _seg(False, 1)),
    "two-crit-south-ocean": (I0, I0, _seg(True, 2)),
    "two-crit-continent+north": (_seg(True, 1), _seg(True, 1), W0),
}

# Solved on the northern half with a mirror node at π/2 (ε = 0 only).
SYMMETRIC_PATTERNS: Dict[str, Tuple[SegmentPattern, ...]] = {
    "four-crit-symmetric-a": (_seg(True, 1), _seg(True, 2), _seg(False, 1)),
    "four-crit-symmetric-b": (_seg(True, 1), _seg(False, 2), _seg(False, 1)),
    "six-crit-symmetric-a": (_seg(True, 1), _seg(False, 4), _seg(False, 1)),
    "six-crit-symmetric-b": (_seg(True, 1), _seg(True, 4), _seg(False, 1)),
}

NORTH_OPTIONS = (W0, I0, _seg(True, 1), _seg(True, 2))
SOUTH_OPTIONS = (W0, I0, _seg(False, 1), _seg(True, 2))
LAND_OPTIONS = tuple(_seg(f, n) for n in range(4) for f in (False, True))
MAX_ASYMMETRIC_CRITS = 3


@dataclass(frozen=True)
class CaseLabel:
    """One ice pattern on one geometry.

    Attributes:
        geometry:    ``"aquaplanet"`` or ``"continent"``.
        ice_pattern: Pattern name (registry name or a generated one).
        segments:    Full-domain segment patterns, north to south.
        symmetric:   True when solved on the truncated domain (0, π/2].
    """

    geometry: str
    ice_pattern: str
    segments: Tuple[SegmentPattern, ...]
    symmetric: bool = False

    @property
    def k(self) -> int:
        """Critical latitudes on the full domain."""
        return sum(s.n_crit for s in self.segments)

    @property
    def n_unknowns(self) -> int:
        """Critical latitudes solved for (half of k under symmetry)."""
        return self.k // 2 if self.symmetric else self.k

    def full_domain(self) -> "CaseLabel":
        """The same pattern solved without the symmetry reduction."""
        return CaseLabel(self.geometry, self.ice_pattern, self.segments, symmetric=False)


def _generated_name(segments: Sequence[SegmentPattern]) -> str:
    k = sum(s.n_crit for s in segments)
    tags = "-".join(f"{t}{s.code()}" for t, s in zip("NLS", segments))
    return f"k{k}-{tags}"


def _edges_compatible(north: SegmentPattern, land: SegmentPattern, south: SegmentPattern) -> bool:
    # ice ends at the ocean side of a coast: iced ocean never touches warm land
    if north.last_iced and not land.first_iced:
        return False
    if south.first_iced and not land.last_iced:
        return False
    return True


def _continent_labels() -> List[CaseLabel]:
    by_segments = {v: k for k, v in CONTINENT_PATTERNS.items()}
    labels = []
    for north, land, south in itertools.product(NORTH_OPTIONS, LAND_OPTIONS, SOUTH_OPTIONS):
        segments = (north, land, south)
        if sum(s.n_crit for s in segments) > MAX_ASYMMETRIC_CRITS:
            continue
        if not _edges_compatible(north, land, south):
            continue
        name = by_segments.get(segments, _generated_name(segments))
        labels.append(CaseLabel("continent", name, segments))
    # registry names first, generated ones after, each group in a fixed order
    order = list(CONTINENT_PATTERNS)
    labels.sort(key=lambda c: (order.index(c.ice_pattern) if c.ice_pattern in order else len(order), c.k, c.ice_pattern))
    return labels


def case_labels(continent: ContinentConfig) -> List[CaseLabel]:
    """Every ice pattern attempted for a geometry, in a deterministic order."""
    if not continent.is_continent:
        return [CaseLabel("aquaplanet", name, segs) for name, segs in AQUAPLANET_PATTERNS.items()]
    labels = _continent_labels()
    if continent.epsilon == 0.0:
        labels += [
            CaseLabel("continent", name, segs, symmetric=True)
            for name, segs in SYMMETRIC_PATTERNS.items()
        ]
    return labels


def find_case(continent: ContinentConfig, name: str) -> Optional[CaseLabel]:
    for label in case_labels(continent):
        if label.ice_pattern == name:
            return label
    return None


# ---------------------------------------------------------------------------
# Layouts
# ---------------------------------------------------------------------------

class NodeKind(str, Enum):
    """Role of a node between regions."""

    POLE = "pole"          # no unknowns; T is recovered afterwards
    CRITICAL = "critical"  # angle, T and T′ unknown; T is pinned by the residual
    LANDMARK = "landmark"  # continent edge; T and T′ unknown
    MIRROR = "mirror"      # π/2 of a truncated domain; T unknown, T′ = 0


class Region(NamedTuple):
    """One region between consecutive nodes and its source branch."""

    lo: float
    hi: float
    branch: str

    @property
    def ice(self) -> bool:
        return self.branch in ("h2", "h4")

    @property
    def surface(self) -> Surface:
        return Surface.LAND if self.branch in ("h3", "h4") else Surface.WATER


@dataclass(frozen=True)
class CaseLayout:
    """Compiled node/region structure of a case on a concrete geometry."""

    case: CaseLabel
    kinds: Tuple[NodeKind, ...]
    fixed_angles: np.ndarray                     # nan at critical nodes
    region_keys: Tuple[Tuple[bool, Surface], ...]
    crit_columns: Tuple[int, ...]
    crit_surfaces: Tuple[Surface, ...]
    crit_bounds: Tuple[Tuple[float, float], ...]
    crit_segments: Tuple[int, ...]
    t_index: Tuple[int, ...]
    d_index: Tuple[int, ...]
    n_linear: int
    truncated: bool
    landmark_names: Dict[int, str] = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return len(self.kinds)

    @property
    def n_crit(self) -> int:
        return len(self.crit_columns)

    @property
    def domain_end(self) -> float:
        return math.pi / 2 if self.truncated else math.pi

    def branches(self, dp: DimensionlessParams, p: PhysicalParams) -> Tuple[SourceBranch, ...]:
        return tuple(make_branch(ice, surface, dp, p) for ice, surface in self.region_keys)

    def thresholds(self, dp: DimensionlessParams) -> np.ndarray:
        return np.array([dp.threshold(s) for s in self.crit_surfaces])

    def node_angles(self, theta_c: np.ndarray) -> np.ndarray:
        """Node angles for a batch of critical-latitude vectors, shape (S, n_nodes)."""
        theta_c = np.atleast_2d(np.asarray(theta_c, dtype=float))
        out = np.broadcast_to(self.fixed_angles, (theta_c.shape[0], self.n_nodes)).copy()
        if self.n_crit:
            out[:, list(self.crit_columns)] = theta_c
        return out

    def feasible(self, theta_c: np.ndarray) -> np.ndarray:
        """Row mask of the critical-latitude vectors that respect their intervals."""
        theta_c = np.atleast_2d(np.asarray(theta_c, dtype=float))
        ok = np.all(np.isfinite(theta_c), axis=1)
        for j, (lo, hi) in enumerate(self.crit_bounds):
            ok &= (theta_c[:, j] > lo + FEASIBILITY_MARGIN) & (theta_c[:, j] < hi - FEASIBILITY_MARGIN)
            if j and self.crit_segments[j] == self.crit_segments[j - 1]:
                ok &= theta_c[:, j] - theta_c[:, j - 1] > FEASIBILITY_MARGIN
        return ok

    def room(self, theta_c: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Distance each critical latitude may move down and up, shape (S, n_crit) each.

        A neighbour on the same segment counts as a limit as well as the
        segment ends.
        """
        theta_c = np.atleast_2d(np.asarray(theta_c, dtype=float))
        lo = np.array([b[0] for b in self.crit_bounds])
        hi = np.array([b[1] for b in self.crit_bounds])
        below = theta_c - lo
        above = hi - theta_c
        for j in range(1, self.n_crit):
            if self.crit_segments[j] == self.crit_segments[j - 1]:
                gap = theta_c[:, j] - theta_c[:, j - 1]
                below[:, j] = np.minimum(below[:, j], gap)
                above[:, j - 1] = np.minimum(above[:, j - 1], gap)
        return below, above

    def check_feasible(self, theta_c: Sequence[float]) -> np.ndarray:
        """Validate one critical-latitude vector.

        Raises:
            InfeasibleConfigurationError: If its length or placement is wrong.
        """
        arr = np.asarray(theta_c, dtype=float).ravel()
        if arr.size != self.n_crit:
            raise InfeasibleConfigurationError(
                f"{self.case.ice_pattern} needs {self.n_crit} critical latitudes, got {arr.size}"
            )
        if not self.feasible(arr[None, :])[0]:
            raise InfeasibleConfigurationError(
                f"critical latitudes {arr.tolist()} do not fit the intervals "
                f"{[tuple(b) for b in self.crit_bounds]} of {self.case.ice_pattern}"
            )
        return arr

    def seed_grid(self, density: int) -> np.ndarray:
        """Uniform multi-start guesses, shape (S, n_crit)."""
        if self.n_crit == 0:
            return np.zeros((1, 0))
        per_segment = []
        segments = sorted(set(self.crit_segments))
        for seg in segments:
            cols = [j for j, s in enumerate(self.crit_segments) if s == seg]
            lo, hi = self.crit_bounds[cols[0]]
            grid = lo + (np.arange(density) + 0.5) * (hi - lo) / density
            per_segment.append(list(itertools.combinations(grid, len(cols))))
        seeds = [sum(combo, ()) for combo in itertools.product(*per_segment)]
        return np.array(seeds, dtype=float)

    def mirror(self, theta_c: np.ndarray) -> np.ndarray:
        """Full-domain critical latitudes of a truncated solution."""
        theta_c = np.asarray(theta_c, dtype=float)
        if not self.truncated:
            return theta_c
        return np.concatenate([theta_c, math.pi - theta_c[::-1]])


def build_layout(case: CaseLabel, continent: ContinentConfig) -> CaseLayout:
    """Compile a case against a geometry.

    Raises:
        InfeasibleConfigurationError: If the case does not belong to the geometry.
    """
    if (case.geometry == "continent") != continent.is_continent:
        raise InfeasibleConfigurationError(
            f"case {case.ice_pattern} is for a {case.geometry}, config is a {continent.kind}"
        )
    if case.symmetric and continent.epsilon != 0.0:
        raise InfeasibleConfigurationError(
            f"symmetric case {case.ice_pattern} requires epsilon = 0, got {continent.epsilon}"
        )

    if continent.is_continent:
        l1, l2 = continent.theta_l1, continent.theta_l2
        spans = [(Surface.WATER, 0.0, l1), (Surface.LAND, l1, l2), (Surface.WATER, l2, math.pi)]
        edge_names = ["theta_l1", "theta_l2"]
    else:
        spans = [(Surface.WATER, 0.0, math.pi)]
        edge_names = []

    segments = list(case.segments)
    if case.symmetric:
        land = segments[1]
        segments = [segments[0], SegmentPattern(land.first_iced, land.n_crit // 2)]
        spans = [spans[0], (Surface.LAND, spans[1][1], math.pi / 2)]

    kinds = [NodeKind.POLE]
    angles = [0.0]
    region_keys = []
    crit_columns, crit_surfaces, crit_bounds, crit_segments = [], [], [], []
    landmark_names = {}

    for i, (seg, (surface, lo, hi)) in enumerate(zip(segments, spans)):
        iced = seg.first_iced
        for _ in range(seg.n_crit):
            region_keys.append((iced, surface))
            crit_columns.append(len(kinds))
            crit_surfaces.append(surface)
            crit_bounds.append((lo, hi))
            crit_segments.append(i)
            kinds.append(NodeKind.CRITICAL)
            angles.append(math.nan)
            iced = not iced
        region_keys.append((iced, surface))
        last = i == len(segments) - 1
        if not last:
            landmark_names[len(kinds)] = edge_names[i]
            kinds.append(NodeKind.LANDMARK)
            angles.append(hi)
        elif case.symmetric:
            kinds.append(NodeKind.MIRROR)
            angles.append(math.pi / 2)
        else:
            kinds.append(NodeKind.POLE)
            angles.append(math.pi)

    t_index, d_index = [], []
    n = 0
    for kind in kinds:
        if kind == NodeKind.POLE:
            t_index.append(-1)
            d_index.append(-1)
        elif kind == NodeKind.MIRROR:
            t_index.append(n)
            d_index.append(-1)
            n += 1
        else:
            t_index.append(n)
            d_index.append(n + 1)
            n += 2

    return CaseLayout(
        case=case,
        kinds=tuple(kinds),
        fixed_angles=np.array(angles, dtype=float),
        region_keys=tuple(region_keys),
        crit_columns=tuple(crit_columns),
        crit_surfaces=tuple(crit_surfaces),
        crit_bounds=tuple(crit_bounds),
        crit_segments=tuple(crit_segments),
        t_index=tuple(t_index),
        d_index=tuple(d_index),
        n_linear=n,
        truncated=case.symmetric,
        landmark_names=landmark_names,
    )
