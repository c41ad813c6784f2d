"""
Boundary-integral solution of the stationary energy balance problem.

On every region between consecutive nodes the source is one of the four
step-albedo branches, and the stationary temperature satisfies

    T(ξ) = c uπ(ξ) ∫ₐ^ξ sinθ u0 h + c u0(ξ) ∫_ξ^b sinθ uπ h
           + c u0(ξ) [s_b uπ(b) T′_b − T_b s_b uπ′(b)]
           − c uπ(ξ) [s_a u0(a) T′_a − T_a s_a u0′(a)]

(s = sinθ). Letting ξ approach both ends of every region gives one equation
per non-pole endpoint, a square linear system in the node values T and
slopes T′. Critical latitudes are then located by Newton iteration on
f_i = T(θ_ci) − threshold_i. Every batch operation here carries a leading
axis over Newton iterates, so all seeds of a pattern advance together.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from ebm_lab.cases import (
    BRANCH_NAMES,
    CaseLabel,
    CaseLayout,
    NodeKind,
    Region,
    SourceBranch,
    build_layout,
    case_labels,
    make_branch,
)
from ebm_lab.errors import (
    DegenerateCaseError,
    InfeasibleConfigurationError,
    InvalidParameterError,
    NumericError,
)
from ebm_lab.greenfn import GreenKernel, kernel_for
from ebm_lab.params import ContinentConfig, DimensionlessParams, RunConfig, Surface
from ebm_lab.quadrature import MomentQuadrature, PanelQuadrature

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 50
FD_STEP = 1e-6
MAX_HALVINGS = 30
COND_LIMIT = 1e12
DEDUP_DISTANCE = 1e-4
VALIDITY_TOL = 1e-7
VALIDITY_SAMPLES = 24
CONSISTENCY_TOL = 1e-6
PROFILE_POINTS = 401

# ---------------------------------------------------------------------------
# Result types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryUnknowns:
    """Solved boundary values of one equilibrium.

    Attributes:
        theta_c:        Critical latitudes solved for (northern half only on a
                        truncated domain), ascending.
        dT_at_c:        T′ at those critical latitudes.
        T_at_landmarks: T at the poles, continent edges and mirror point, and
                        T′ at the continent edges.
        node_theta:     All node angles of the solved domain.
        node_T:         T at every node (poles included).
        node_D:         T′ at every node (zero at poles and the mirror point).
    """

    theta_c: np.ndarray
    dT_at_c: np.ndarray
    T_at_landmarks: Dict[str, float]
    node_theta: np.ndarray
    node_T: np.ndarray
    node_D: np.ndarray


@dataclass(frozen=True)
class StationarySolution:
    """An accepted equilibrium with its sampled profile."""

    id: str
    case: CaseLabel
    Q: float
    unknowns: BoundaryUnknowns
    theta: np.ndarray
    T: np.ndarray
    residual_norm: float
    derivative_mismatch: float

    @property
    def profile(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.theta, self.T

    @property
    def theta_c(self) -> np.ndarray:
        """Critical latitudes on the full domain."""
        half = self.unknowns.theta_c
        if self.case.symmetric:
            return np.concatenate([half, math.pi - half[::-1]])
        return half


@dataclass(frozen=True)
class NewtonResult:
    converged: bool
    unknowns: Optional[BoundaryUnknowns]
    residual_norm: float
    iterations: int
    reason: str = ""


# ---------------------------------------------------------------------------
# Batched assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Context:
    layout: CaseLayout
    branches: Tuple[SourceBranch, ...]
    thresholds: np.ndarray
    kernel: GreenKernel
    quad: object
    dp: DimensionlessParams


@dataclass(frozen=True)
class _Batch:
    nodes: np.ndarray      # (S, m)
    T: np.ndarray          # (S, m)
    D: np.ndarray          # (S, m)
    f: np.ndarray          # (S, k)
    ok: np.ndarray         # (S,)
    cond: np.ndarray       # (S,)
    errors: Tuple[str, ...] = ()


def _continent(config: Union[RunConfig, ContinentConfig]) -> ContinentConfig:
    return config.continent if isinstance(config, RunConfig) else config


def _context(
    case: CaseLabel,
    config: RunConfig,
    kernel: Optional[GreenKernel],
    quad,
) -> _Context:
    dp = config.dimensionless()
    if kernel is None:
        kernel = kernel_for(dp.beta)
    elif not math.isclose(kernel.beta, dp.beta, rel_tol=1e-12):
        raise InvalidParameterError(f"kernel built for beta={kernel.beta}, config has beta={dp.beta}")
    layout = build_layout(case, config.continent)
    return _Context(
        layout=layout,
        branches=layout.branches(dp, config.physical),
        thresholds=layout.thresholds(dp),
        kernel=kernel,
        quad=quad if quad is not None else MomentQuadrature(),
        dp=dp,
    )


def _solve_batch(ctx: _Context, theta_c: np.ndarray) -> _Batch:
    """Assemble and solve the linear boundary system for every row of theta_c."""
    lay = ctx.layout
    c = ctx.kernel.c
    nodes = lay.node_angles(theta_c)
    S, m = nodes.shape
    kinds = lay.kinds
    tI, dI = lay.t_index, lay.d_index

    U0 = np.zeros((S, m))
    UP = np.zeros((S, m))
    SD0 = np.zeros((S, m))
    SDP = np.zeros((S, m))
    inner = [j for j, kind in enumerate(kinds) if kind != NodeKind.POLE]
    if inner:
        basis = ctx.kernel.basis(nodes[:, inner])
        U0[:, inner] = basis["u0"]
        UP[:, inner] = basis["upi"]
        SD0[:, inner] = basis["sin_du0"]
        SDP[:, inner] = basis["sin_dupi"]
    s = np.sin(nodes)

    I0 = np.empty((S, m - 1))
    IP = np.empty((S, m - 1))
    for r, branch in enumerate(ctx.branches):
        I0[:, r], IP[:, r] = ctx.quad.moments(ctx.kernel, branch, nodes[:, r], nodes[:, r + 1])

    n = lay.n_linear
    M = np.zeros((S, n, n))
    rhs = np.zeros((S, n))
    row = 0
    for r in range(m - 1):
        a, b = r, r + 1
        if kinds[a] != NodeKind.POLE:
            # ξ → a⁺
            M[:, row, tI[a]] += 1.0 - c * SD0[:, a] * UP[:, a]
            if dI[a] >= 0:
                M[:, row, dI[a]] += c * s[:, a] * U0[:, a] * UP[:, a]
            if dI[b] >= 0:
                M[:, row, dI[b]] -= c * s[:, b] * U0[:, a] * UP[:, b]
            if tI[b] >= 0:
                M[:, row, tI[b]] += c * U0[:, a] * SDP[:, b]
            rhs[:, row] = c * U0[:, a] * IP[:, r]
            row += 1
        if kinds[b] != NodeKind.POLE:
            # ξ → b⁻
            M[:, row, tI[b]] += 1.0 + c * U0[:, b] * SDP[:, b]
            if dI[b] >= 0:
                M[:, row, dI[b]] -= c * s[:, b] * U0[:, b] * UP[:, b]
            if dI[a] >= 0:
                M[:, row, dI[a]] += c * s[:, a] * U0[:, a] * UP[:, b]
            if tI[a] >= 0:
                M[:, row, tI[a]] -= c * SD0[:, a] * UP[:, b]
            rhs[:, row] = c * UP[:, b] * I0[:, r]
            row += 1

    if n:
        finite = np.all(np.isfinite(M), axis=(1, 2)) & np.all(np.isfinite(rhs), axis=1)
        M = np.where(finite[:, None, None], M, np.eye(n))
        cond = np.linalg.cond(M)
        ok = finite & np.isfinite(cond) & (cond < COND_LIMIT)
        M = np.where(ok[:, None, None], M, np.eye(n))
        X = np.linalg.solve(M, np.where(ok[:, None], rhs, 0.0)[..., None])[..., 0]
    else:
        cond = np.ones(S)
        ok = np.ones(S, dtype=bool)
        X = np.zeros((S, 0))

    T = np.zeros((S, m))
    D = np.zeros((S, m))
    for j in range(m):
        if tI[j] >= 0:
            T[:, j] = X[:, tI[j]]
        if dI[j] >= 0:
            D[:, j] = X[:, dI[j]]

    # pole values from the representation at ξ = 0 and ξ = π
    T[:, 0] = c * IP[:, 0]
    if kinds[1] != NodeKind.POLE:
        T[:, 0] += c * (s[:, 1] * UP[:, 1] * D[:, 1] - T[:, 1] * SDP[:, 1])
    if kinds[-1] == NodeKind.POLE:
        T[:, -1] = c * I0[:, -1]
        if kinds[-2] != NodeKind.POLE:
            T[:, -1] -= c * (s[:, -2] * U0[:, -2] * D[:, -2] - T[:, -2] * SD0[:, -2])

    f = T[:, list(lay.crit_columns)] - ctx.thresholds
    ok = ok & np.all(np.isfinite(T), axis=1) & np.all(np.isfinite(D), axis=1)
    return _Batch(nodes=nodes, T=T, D=D, f=f, ok=ok, cond=cond)


def _solve_guarded(ctx: _Context, theta_c: np.ndarray) -> _Batch:
    """_solve_batch that confines a special-function failure to the rows causing it."""
    try:
        return _solve_batch(ctx, theta_c)
    except NumericError as exc:
        logger.debug("%s: batch solve failed (%s), retrying row by row", ctx.layout.case.ice_pattern, exc)

    lay = ctx.layout
    S = theta_c.shape[0]
    nodes = lay.node_angles(theta_c)
    T = np.zeros_like(nodes)
    D = np.zeros_like(nodes)
    f = np.full((S, lay.n_crit), np.nan)
    ok = np.zeros(S, dtype=bool)
    cond = np.full(S, np.inf)
    errors = [""] * S
    for s in range(S):
        try:
            one = _solve_batch(ctx, theta_c[s:s + 1])
        except NumericError as exc:
            errors[s] = f"special-function failure: {exc}"
            continue
        T[s], D[s], f[s], ok[s], cond[s] = one.T[0], one.D[0], one.f[0], one.ok[0], one.cond[0]
    return _Batch(nodes=nodes, T=T, D=D, f=f, ok=ok, cond=cond, errors=tuple(errors))


def _unknowns(ctx: _Context, batch: _Batch, row: int) -> BoundaryUnknowns:
    lay = ctx.layout
    T, D = batch.T[row], batch.D[row]
    landmarks = {"T_0": float(T[0])}
    if lay.kinds[-1] == NodeKind.POLE:
        landmarks["T_pi"] = float(T[-1])
    else:
        landmarks["T_pi_2"] = float(T[-1])
    for col, name in lay.landmark_names.items():
        landmarks[f"T_{name}"] = float(T[col])
        landmarks[f"dT_{name}"] = float(D[col])
    cols = list(lay.crit_columns)
    return BoundaryUnknowns(
        theta_c=batch.nodes[row, cols].copy(),
        dT_at_c=D[cols].copy(),
        T_at_landmarks=landmarks,
        node_theta=batch.nodes[row].copy(),
        node_T=T.copy(),
        node_D=D.copy(),
    )


# ---------------------------------------------------------------------------
# Jacobians and Newton
# ---------------------------------------------------------------------------

def _central_jacobian(ctx: _Context, theta_c: np.ndarray) -> np.ndarray:
    S, k = theta_c.shape
    below, above = ctx.layout.room(theta_c)
    # perturbations stay inside the case's intervals, one-sided near a limit
    up = np.minimum(FD_STEP, 0.5 * above)
    down = np.minimum(FD_STEP, 0.5 * below)
    eye = np.eye(k)
    stacked = np.concatenate(
        [theta_c[:, None, :] + up[:, :, None] * eye, theta_c[:, None, :] - down[:, :, None] * eye], axis=1
    )
    f = _solve_guarded(ctx, stacked.reshape(S * 2 * k, k)).f.reshape(S, 2 * k, k)
    # J[s, i, j] = ∂f_i / ∂θ_j
    return np.transpose((f[:, :k, :] - f[:, k:, :]) / (up + down)[:, :, None], (0, 2, 1))


def _step_limit(layout: CaseLayout, theta_c: np.ndarray, step: np.ndarray) -> np.ndarray:
    """Largest damping factor in (0, 1] keeping every row inside its intervals."""
    below, above = layout.room(theta_c)
    with np.errstate(divide="ignore", invalid="ignore"):
        reach = np.where(step < 0, below / -step, np.where(step > 0, above / step, np.inf))
    # half the room each: two neighbours closing in never meet
    return np.minimum(1.0, 0.5 * np.min(reach, axis=1, initial=np.inf))


def _analytic_jacobian(ctx: _Context, theta_c: np.ndarray, D_c: np.ndarray) -> np.ndarray:
    """∂f_i/∂θ_j = δ_ij T′(θ_i) + sinθ_j K(θ_j, θ_i)(h_left − h_right)(θ_j)."""
    lay = ctx.layout
    S, k = theta_c.shape
    jump = np.empty((S, k))
    for j, col in enumerate(lay.crit_columns):
        jump[:, j] = ctx.branches[col - 1].value(theta_c[:, j]) - ctx.branches[col].value(theta_c[:, j])
    J = np.empty((S, k, k))
    for i in range(k):
        for j in range(k):
            kern = ctx.kernel.K(theta_c[:, j], theta_c[:, i])
            if lay.truncated:
                kern = kern + ctx.kernel.K(math.pi - theta_c[:, j], theta_c[:, i])
            J[:, i, j] = np.sin(theta_c[:, j]) * kern * jump[:, j]
        J[:, i, i] += D_c[:, i]
    return J


def _newton_batch(
    ctx: _Context,
    guesses: np.ndarray,
    tol: float,
    max_iter: int,
    jacobian: str,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, List[str]]:
    """Damped Newton from every row of guesses.

    Returns:
        (theta, converged mask, residual norms, iteration counts, failure reasons)
    """
    if jacobian not in ("central", "analytic"):
        raise ValueError(f"unknown jacobian {jacobian!r}")
    lay = ctx.layout
    theta = np.array(guesses, dtype=float, ndmin=2)
    S, k = theta.shape
    status = np.zeros(S, dtype=int)          # 0 running, 1 converged, 2 failed
    reasons = [""] * S
    fnorm = np.full(S, np.inf)
    iterations = np.zeros(S, dtype=int)

    for s in np.flatnonzero(~lay.feasible(theta)):
        status[s], reasons[s] = 2, "infeasible initial guess"

    for it in range(max_iter + 1):
        idx = np.flatnonzero(status == 0)
        if idx.size == 0:
            break
        batch = _solve_guarded(ctx, theta[idx])
        norm = np.max(np.abs(batch.f), axis=1) if k else np.zeros(idx.size)
        fnorm[idx] = np.where(batch.ok, norm, np.inf)
        iterations[idx] = it
        for pos in np.flatnonzero(~batch.ok):
            s = idx[pos]
            status[s] = 2
            reasons[s] = (batch.errors[pos] if batch.errors else "") or "singular boundary-integral system"
        done = batch.ok & (norm < tol)
        status[idx[done]] = 1
        run = batch.ok & ~done
        logger.debug("%s it=%d running=%d converged=%d", lay.case.ice_pattern, it, run.sum(), done.sum())
        if not run.any():
            break
        if it == max_iter:
            for s in idx[run]:
                status[s], reasons[s] = 2, f"no convergence in {max_iter} iterations"
            break

        sub = idx[run]
        th = theta[sub]
        if jacobian == "analytic":
            J = _analytic_jacobian(ctx, th, batch.D[run][:, list(lay.crit_columns)])
        else:
            J = _central_jacobian(ctx, th)
        finite = np.all(np.isfinite(J), axis=(1, 2))
        J = np.where(finite[:, None, None], J, np.eye(k))
        cond = np.linalg.cond(J)
        good = finite & np.isfinite(cond) & (cond < COND_LIMIT)
        for s in sub[~good]:
            status[s], reasons[s] = 2, "singular Jacobian"
        J = np.where(good[:, None, None], J, np.eye(k))
        step = np.linalg.solve(J, -batch.f[run][..., None])[..., 0]

        lam = _step_limit(lay, th, np.where(good[:, None], step, 0.0))
        accepted = ~good
        for _ in range(MAX_HALVINGS + 1):
            trial = th + lam[:, None] * step
            take = lay.feasible(trial) & ~accepted
            theta[sub[take]] = trial[take]
            accepted |= take
            if accepted.all():
                break
            lam[~accepted] *= 0.5
        for s in sub[~accepted]:
            status[s], reasons[s] = 2, "step left the feasible set"

    return theta, status == 1, fnorm, iterations, reasons


# ---------------------------------------------------------------------------
# Reconstruction
# ---------------------------------------------------------------------------

def _region_values(
    ctx: _Context, u: BoundaryUnknowns, r: int, xi: np.ndarray, derivative: bool
) -> np.ndarray:
    """Representation formula of region r at interior points xi."""
    lay = ctx.layout
    c = ctx.kernel.c
    a, b = u.node_theta[r], u.node_theta[r + 1]
    branch = ctx.branches[r]
    i0, _ = ctx.quad.moments(ctx.kernel, branch, a, xi)
    _, ip = ctx.quad.moments(ctx.kernel, branch, xi, b)
    basis = ctx.kernel.basis(xi)
    if derivative:
        phi0, phip = basis["du0"], basis["dupi"]
    else:
        phi0, phip = basis["u0"], basis["upi"]

    tail = 0.0
    if lay.kinds[r + 1] != NodeKind.POLE:
        end = ctx.kernel.basis(np.array([b]))
        tail = math.sin(b) * end["upi"][0] * u.node_D[r + 1] - u.node_T[r + 1] * end["sin_dupi"][0]
    head = 0.0
    if lay.kinds[r] != NodeKind.POLE:
        start = ctx.kernel.basis(np.array([a]))
        head = math.sin(a) * start["u0"][0] * u.node_D[r] - u.node_T[r] * start["sin_du0"][0]
    return c * phip * i0 + c * phi0 * ip + c * phi0 * tail - c * phip * head


def _evaluate(ctx: _Context, u: BoundaryUnknowns, xi, derivative: bool = False):
    lay = ctx.layout
    xi_arr = np.atleast_1d(np.asarray(xi, dtype=float))
    if np.any(~np.isfinite(xi_arr) | (xi_arr < 0.0) | (xi_arr > math.pi)):
        raise NumericError("profile requested outside [0, pi]", theta=float(xi_arr[0]))
    sign = np.ones_like(xi_arr)
    local = xi_arr
    if lay.truncated:
        upper = xi_arr > math.pi / 2
        local = np.where(upper, math.pi - xi_arr, xi_arr)
        sign = np.where(upper, -1.0, 1.0)

    out = np.empty_like(local)
    north = local == 0.0
    south = (local == math.pi) & (lay.kinds[-1] == NodeKind.POLE)
    out[north] = 0.0 if derivative else u.node_T[0]
    out[south] = 0.0 if derivative else u.node_T[-1]
    region = np.clip(np.searchsorted(u.node_theta, local, side="right") - 1, 0, lay.n_nodes - 2)
    inside = ~(north | south)
    for r in np.unique(region[inside]):
        sel = inside & (region == r)
        out[sel] = _region_values(ctx, u, int(r), local[sel], derivative)
    if derivative:
        out = out * sign
    if np.ndim(xi) == 0:
        return float(out[0])
    return out.reshape(np.shape(xi))


def _derivative_mismatch(ctx: _Context, u: BoundaryUnknowns) -> float:
    worst = 0.0
    for j, kind in enumerate(ctx.layout.kinds):
        if kind in (NodeKind.CRITICAL, NodeKind.LANDMARK):
            at = np.array([u.node_theta[j]])
            left = _region_values(ctx, u, j - 1, at, derivative=True)[0]
            right = _region_values(ctx, u, j, at, derivative=True)[0]
            worst = max(worst, abs(left - right))
    return worst


def _is_valid(ctx: _Context, u: BoundaryUnknowns) -> bool:
    """Every region lies on the side of its threshold its branch claims."""
    frac = (np.arange(VALIDITY_SAMPLES) + 0.5) / VALIDITY_SAMPLES
    for r, (ice, surface) in enumerate(ctx.layout.region_keys):
        a, b = u.node_theta[r], u.node_theta[r + 1]
        T = _region_values(ctx, u, r, a + (b - a) * frac, derivative=False)
        thr = ctx.dp.threshold(surface)
        if ice and np.any(T >= thr + VALIDITY_TOL):
            return False
        if not ice and np.any(T <= thr - VALIDITY_TOL):
            return False
    return True


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def partition_regions(
    case: CaseLabel, config: Union[RunConfig, ContinentConfig], theta_c: Sequence[float]
) -> List[Region]:
    """Ordered regions of a case with their source branch names.

    Raises:
        InfeasibleConfigurationError: If theta_c does not fit the case.
    """
    layout = build_layout(case, _continent(config))
    arr = layout.check_feasible(theta_c)
    nodes = layout.node_angles(arr[None, :])[0]
    return [
        Region(float(nodes[r]), float(nodes[r + 1]), BRANCH_NAMES[key])
        for r, key in enumerate(layout.region_keys)
    ]


def assemble_residual(
    case: CaseLabel,
    config: RunConfig,
    theta_c: Sequence[float],
    kernel: Optional[GreenKernel] = None,
    quad=None,
) -> Tuple[np.ndarray, BoundaryUnknowns]:
    """Critical-latitude residual f(θ_c) and the recovered boundary unknowns.

    Raises:
        InfeasibleConfigurationError: If theta_c does not fit the case.
        DegenerateCaseError: If the linear boundary system is singular.
    """
    ctx = _context(case, config, kernel, quad)
    arr = ctx.layout.check_feasible(theta_c)
    batch = _solve_batch(ctx, arr[None, :])
    if not batch.ok[0]:
        raise DegenerateCaseError(f"boundary system of {case.ice_pattern} is singular", float(batch.cond[0]))
    return batch.f[0].copy(), _unknowns(ctx, batch, 0)


def newton_find(
    case: CaseLabel,
    config: RunConfig,
    theta_c_guess: Sequence[float],
    kernel: Optional[GreenKernel] = None,
    quad=None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    jacobian: str = "central",
) -> NewtonResult:
    """Newton iteration for the critical latitudes of one case from one guess.

    Failure (infeasible guess, singular system, divergence) is returned as a
    NewtonResult with converged=False and a reason, never raised.
    """
    ctx = _context(case, config, kernel, quad)
    guess = np.asarray(theta_c_guess, dtype=float).reshape(1, -1)
    if guess.shape[1] != ctx.layout.n_crit:
        raise InfeasibleConfigurationError(
            f"{case.ice_pattern} needs {ctx.layout.n_crit} critical latitudes, got {guess.shape[1]}"
        )
    theta, converged, fnorm, iterations, reasons = _newton_batch(ctx, guess, tol, max_iter, jacobian)
    if not converged[0]:
        return NewtonResult(False, None, float(fnorm[0]), int(iterations[0]), reasons[0])
    batch = _solve_batch(ctx, theta)
    return NewtonResult(True, _unknowns(ctx, batch, 0), float(fnorm[0]), int(iterations[0]))


def solution_at(
    xi,
    case: CaseLabel,
    config: RunConfig,
    unknowns: BoundaryUnknowns,
    kernel: Optional[GreenKernel] = None,
    quad=None,
    derivative: bool = False,
):
    """Dimensionless temperature (or T′) of an equilibrium at xi ∈ [0, π].

    Raises:
        NumericError: If xi is outside [0, π]; QuadratureError from quad.
    """
    ctx = _context(case, config, kernel, quad)
    return _evaluate(ctx, unknowns, xi, derivative)


def sample_solution(
    solution: StationarySolution, theta, config: RunConfig, kernel: Optional[GreenKernel] = None
):
    """Evaluate a stored equilibrium on an arbitrary grid."""
    return solution_at(theta, solution.case, config.with_Q(solution.Q), solution.unknowns, kernel)


def uniform_cover_profile(
    ice: bool, dp: DimensionlessParams, p, theta=None, surface: Surface = Surface.WATER
) -> Tuple[np.ndarray, np.ndarray]:
    """Closed-form equilibrium without partial ice cover, T = A/β + B q(θ)."""
    if theta is None:
        theta = np.linspace(0.0, math.pi, PROFILE_POINTS)
    theta = np.asarray(theta, dtype=float)
    return theta, make_branch(ice, surface, dp, p).particular(theta)[0]


def _dedup(roots: np.ndarray) -> np.ndarray:
    if roots.shape[0] <= 1:
        return roots
    order = np.lexsort(roots.T[::-1])
    kept: List[np.ndarray] = []
    for row in roots[order]:
        if all(np.max(np.abs(row - other)) >= DEDUP_DISTANCE for other in kept):
            kept.append(row)
    return np.array(kept).reshape(-1, roots.shape[1])


def _finalize(
    ctx: _Context, reference: _Context, theta_c: np.ndarray, Q: float
) -> Optional[StationarySolution]:
    batch = _solve_batch(ctx, theta_c[None, :])
    if not batch.ok[0]:
        return None
    u = _unknowns(ctx, batch, 0)
    if not _is_valid(ctx, u):
        logger.debug("%s: root %s rejected by the validity filter", ctx.layout.case.ice_pattern, theta_c)
        return None

    ref = _solve_batch(reference, theta_c[None, :])
    residual = float(
        max(
            np.max(np.abs(ref.f[0]), initial=0.0),
            np.max(np.abs(ref.T[0] - batch.T[0])),
            np.max(np.abs(ref.D[0] - batch.D[0])),
        )
    )
    if not ref.ok[0] or residual > CONSISTENCY_TOL:
        logger.warning(
            "%s: root %s fails reference re-evaluation (residual %.3e)",
            ctx.layout.case.ice_pattern, theta_c, residual,
        )
        return None

    nodes = u.node_theta
    if ctx.layout.truncated:
        nodes = np.concatenate([nodes, math.pi - nodes])
    theta = np.union1d(np.linspace(0.0, math.pi, PROFILE_POINTS), np.clip(nodes, 0.0, math.pi))
    T = _evaluate(ctx, u, theta)
    return StationarySolution(
        id="",
        case=ctx.layout.case,
        Q=Q,
        unknowns=u,
        theta=theta,
        T=T,
        residual_norm=residual,
        derivative_mismatch=_derivative_mismatch(ctx, u),
    )


def _solve_case(
    label: CaseLabel,
    config: RunConfig,
    kernel: GreenKernel,
    quad,
    seed_density: int,
    tol: float,
    max_iter: int,
    jacobian: str,
    warm: Optional[np.ndarray],
) -> List[StationarySolution]:
    try:
        ctx = _context(label, config, kernel, quad)
        reference = replace(ctx, quad=PanelQuadrature())
        layout = ctx.layout
        if layout.n_crit == 0:
            roots = np.zeros((1, 0))
        else:
            seeds = layout.seed_grid(seed_density)
            if warm is not None and np.size(warm):
                seeds = np.vstack([np.asarray(warm, dtype=float).reshape(-1, layout.n_crit), seeds])
            theta, converged, _, _, _ = _newton_batch(ctx, seeds, tol, max_iter, jacobian)
            roots = _dedup(theta[converged])
            logger.debug(
                "%s Q=%.3f: %d seeds, %d converged, %d distinct",
                label.ice_pattern, config.Q, seeds.shape[0], int(converged.sum()), roots.shape[0],
            )
        found = []
        for root in roots:
            try:
                solution = _finalize(ctx, reference, root, config.Q)
            except NumericError as exc:
                logger.warning("%s Q=%.3f: root %s dropped: %s", label.ice_pattern, config.Q, root, exc)
                continue
            if solution is not None:
                found.append(solution)
        return found
    except NumericError as exc:
        logger.warning("%s Q=%.3f failed: %s", label.ice_pattern, config.Q, exc)
        return []


def enumerate_equilibria(
    Q: float,
    config: RunConfig,
    kernel: Optional[GreenKernel] = None,
    seed_density: int = 8,
    *,
    quad=None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    jacobian: str = "central",
    cases: Optional[Sequence[str]] = None,
    warm_starts: Optional[Mapping[str, np.ndarray]] = None,
    threads: int = 1,
) -> List[StationarySolution]:
    """All equilibria found at solar constant Q.

    Every pattern valid for the geometry is attempted from a uniform seed
    grid (plus any warm starts keyed by pattern name); roots are
    deduplicated, validity-filtered and re-checked with PanelQuadrature.

    Args:
        Q:            Solar constant (W m⁻²), overriding config.Q.
        config:       Physics and geometry.
        kernel:       Green's kernel for the config's β (built if omitted).
        seed_density: Seeds per critical latitude and segment.
        cases:        Restrict to these pattern names.
        warm_starts:  Extra Newton guesses per pattern name.
        threads:      Patterns solved concurrently.

    Returns:
        Solutions in pattern order, then ascending θ_c; ids are
        ``"<pattern>-<index>"``. An empty list is a legal result.
    """
    cfg = config.with_Q(Q)
    if kernel is None:
        kernel = kernel_for(cfg.dimensionless().beta)
    labels = case_labels(cfg.continent)
    if cases is not None:
        wanted = set(cases)
        labels = [label for label in labels if label.ice_pattern in wanted]
    warm_starts = warm_starts or {}

    def work(label: CaseLabel) -> List[StationarySolution]:
        return _solve_case(
            label, cfg, kernel, quad, seed_density, tol, max_iter, jacobian,
            warm_starts.get(label.ice_pattern),
        )

    if threads > 1 and len(labels) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, labels))
    else:
        results = [work(label) for label in labels]

    solutions = []
    for label, found in zip(labels, results):
        for i, solution in enumerate(found):
            solutions.append(replace(solution, id=f"{label.ice_pattern}-{i}"))
    logger.info("Q=%.3f: %d equilibria over %d patterns", Q, len(solutions), len(labels))
    return solutions
