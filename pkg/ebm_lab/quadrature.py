"""
Quadrature rules for the basis moments ∫ sinθ φ(θ) h(θ) dθ.

PanelQuadrature  composite Gauss–Legendre with panel halving; the reference.
MomentQuadrature exact moments through the integral identity
                 ∫ₐᵇ sinθ φ h = [w sinθ φ′ − φ sinθ w′]ₐᵇ, L w = h.

Both take arrays of interval endpoints and return arrays, so a whole batch
of Newton iterates is integrated in one call.
"""

import logging
from typing import Callable, Tuple

import numpy as np
from scipy import special

from ebm_lab.errors import QuadratureError

logger = logging.getLogger(__name__)

Moments = Tuple[np.ndarray, np.ndarray]


def _endpoints(lo, hi) -> Tuple[np.ndarray, np.ndarray, tuple]:
    lo_b, hi_b = np.broadcast_arrays(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
    return lo_b.ravel(), hi_b.ravel(), lo_b.shape


# ---------------------------------------------------------------------------
# Adaptive Gauss–Legendre panels
# ---------------------------------------------------------------------------

class PanelQuadrature:
    """Composite Gauss–Legendre rule with adaptive panel halving.

    A panel is accepted when its halves agree with it to within its share
    of the absolute tolerance, so the accepted error budget sums to ``tol``
    per integral.
    """

    def __init__(self, tol: float = 1e-10, points: int = 32, max_depth: int = 40) -> None:
        self.tol = tol
        self.points = points
        self.max_depth = max_depth
        nodes, weights = special.roots_legendre(points)
        self._nodes = nodes
        self._weights = weights

    def _rule(self, func: Callable, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        half = 0.5 * (b - a)
        mid = 0.5 * (b + a)
        x = mid[:, None] + half[:, None] * self._nodes[None, :]
        return half * (np.asarray(func(x)) @ self._weights)

    def integrate(self, func: Callable, lo, hi) -> np.ndarray:
        """Integrate a vectorised func over every [lo_i, hi_i].

        Args:
            func: Callable mapping an array of θ to integrand values (same shape).
            lo:   Lower limits (broadcast against hi).
            hi:   Upper limits.

        Returns:
            Array of integrals shaped like the broadcast limits.

        Raises:
            QuadratureError: If some panel is still unresolved at max_depth.
        """
        lo_f, hi_f, shape = _endpoints(lo, hi)
        total = np.zeros(lo_f.size)
        sign = np.where(hi_f >= lo_f, 1.0, -1.0)
        a0 = np.minimum(lo_f, hi_f)
        b0 = np.maximum(lo_f, hi_f)
        width = b0 - a0

        owner = np.flatnonzero(width > 0.0)
        a, b = a0[owner], b0[owner]
        if owner.size:
            coarse = self._rule(func, a, b)
        for depth in range(self.max_depth):
            if owner.size == 0:
                break
            m = 0.5 * (a + b)
            halves = self._rule(func, np.concatenate([a, m]), np.concatenate([m, b]))
            left, right = halves[: a.size], halves[a.size:]
            fine = left + right
            err = np.abs(fine - coarse)
            budget = self.tol * (b - a) / width[owner] + 4.0 * np.finfo(float).eps * np.abs(fine)
            ok = err <= budget
            np.add.at(total, owner[ok], fine[ok])
            keep = ~ok
            a, b, m = a[keep], b[keep], m[keep]
            owner = owner[keep]
            coarse = np.concatenate([left[keep], right[keep]])
            a, b = np.concatenate([a, m]), np.concatenate([m, b])
            owner = np.concatenate([owner, owner])
        else:
            if owner.size:
                panels = list(zip(a[:10].tolist(), b[:10].tolist()))
                raise QuadratureError(
                    f"{owner.size} panels unresolved after {self.max_depth} halvings", panels=panels
                )
        return (sign * total).reshape(shape)

    def moments(self, kernel, branch, lo, hi) -> Moments:
        """(∫ sinθ u0 h, ∫ sinθ uπ h) over [lo, hi]."""
        m0 = self.integrate(lambda t: np.sin(t) * kernel.u0(t) * branch.value(t), lo, hi)
        mp = self.integrate(lambda t: np.sin(t) * kernel.upi(t) * branch.value(t), lo, hi)
        return m0, mp


# ---------------------------------------------------------------------------
# Closed-form moments
# ---------------------------------------------------------------------------

class MomentQuadrature:
    """Exact moments for sources of the form A + B sin²θ."""

    def _bracket(self, kernel, branch, theta: np.ndarray) -> Moments:
        basis = kernel.basis(theta)
        w, sin_dw = branch.particular(theta)
        with np.errstate(invalid="ignore"):
            u0_term = np.where(sin_dw == 0.0, 0.0, basis["u0"] * sin_dw)
            upi_term = np.where(sin_dw == 0.0, 0.0, basis["upi"] * sin_dw)
        return w * basis["sin_du0"] - u0_term, w * basis["sin_dupi"] - upi_term

    def moments(self, kernel, branch, lo, hi) -> Moments:
        """(∫ sinθ u0 h, ∫ sinθ uπ h) over [lo, hi]."""
        lo_f, hi_f, shape = _endpoints(lo, hi)
        lo0, lop = self._bracket(kernel, branch, lo_f)
        hi0, hip = self._bracket(kernel, branch, hi_f)
        same = lo_f == hi_f
        m0 = np.where(same, 0.0, hi0 - lo0)
        mp = np.where(same, 0.0, hip - lop)
        return m0.reshape(shape), mp.reshape(shape)
