"""
Conical Legendre basis and Green's kernel for the operator

    L u = −(1/sinθ) d/dθ (sinθ du/dθ) + β u      on (0, π).

The two basis solutions are u0(θ) = P_λ(cos θ), regular at θ = 0, and its
mirror uπ(θ) = u0(π − θ), regular at θ = π, with λ(λ+1) = −β. The kernel is
used in its real product form

    K(θ, ξ) = c · u0(min(θ, ξ)) · uπ(max(θ, ξ)),   c = −π / (2 sin πλ),

which equals the P/Q form (P_λ Q_λ Wronskian normalisation) after the
connection formula P_λ(−x) = cos(λπ) P_λ(x) − (2/π) sin(λπ) Q_λ(x).

u0 is summed from 2F1(−λ, λ+1; 1; z), z = sin²(θ/2), for z ≤ 3/4 and from
the logarithmic c = a + b expansion in w = cos²(θ/2) otherwise. Both sets of
coefficients are real for any β > 0 and are computed once per kernel.
"""

import cmath
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple, Union

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy import special

from ebm_lab.errors import InvalidParameterError, NumericError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

Z_TERMS = 240          # z-series length; 0.75**240 / 240 is far below 1e-17
W_TERMS = 64           # w-series length; w ≤ 1/4 on that branch
Z_SWITCH = 0.75        # z = 3/4  ⇔  θ = 2π/3

# ---------------------------------------------------------------------------
# Degree
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConicalDegree:
    """Degree λ = (√(1−4β) − 1)/2 of the Legendre basis.

    Attributes:
        lam: λ (complex; Re λ = −1/2 when β > 1/4).
        mu:  Im λ, the conical parameter (0 when β ≤ 1/4).
    """

    lam: complex
    mu: float

    @property
    def beta(self) -> float:
        return float((-self.lam * (self.lam + 1)).real)


def conical_degree(beta: float) -> ConicalDegree:
    """Degree of the Legendre functions solving L u = 0.

    Raises:
        InvalidParameterError: If beta is not strictly positive.
    """
    if not beta > 0:
        raise InvalidParameterError(f"beta must be strictly positive, got {beta!r}")
    lam = (cmath.sqrt(1.0 - 4.0 * beta) - 1.0) / 2.0
    return ConicalDegree(lam=complex(lam), mu=float(lam.imag))


# ---------------------------------------------------------------------------
# Kernel
# ---------------------------------------------------------------------------

def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class GreenKernel:
    """Evaluator for u0, uπ and K(θ, ξ) at a fixed β.

    Every table is built in __init__ and never mutated, so one kernel can be
    shared between threads.
    """

    def __init__(self, beta: float) -> None:
        self.degree = conical_degree(beta)
        self.beta = float(beta)
        lam = self.degree.lam

        # t_n = (a)_n (b)_n / (n!)², a = −λ, b = λ + 1, (a+n)(b+n) = n(n+1) + β
        n = np.arange(max(Z_TERMS, W_TERMS) - 1, dtype=float)
        ratios = (n * (n + 1.0) + self.beta) / (n + 1.0) ** 2
        t = np.concatenate(([1.0], np.cumprod(ratios)))

        self._z_coef = _readonly(t[:Z_TERMS].copy())
        self._z_dcoef = _readonly(npoly.polyder(self._z_coef))

        # 1 / (Γ(a) Γ(b)) = −sin(πλ)/π ; real for every β > 0
        self.log_prefactor = float((-cmath.sin(math.pi * lam) / math.pi).real)
        m = np.arange(W_TERMS, dtype=float)
        a, b = -lam, lam + 1.0
        d = 2.0 * special.psi(m + 1.0) - (special.psi(a + m) + special.psi(b + m)).real
        self._wA = _readonly(self.log_prefactor * t[:W_TERMS] * d)
        self._wB = _readonly(self.log_prefactor * t[:W_TERMS])
        self._wA_d = _readonly(npoly.polyder(self._wA))
        self._wB_d = _readonly(npoly.polyder(self._wB))

        self.c = 1.0 / (2.0 * self.log_prefactor)
        logger.debug("GreenKernel beta=%.6f lambda=%s c=%.6e", self.beta, lam, self.c)

    # ------------------------------------------------------------------
    # Series core
    # ------------------------------------------------------------------

    def _series(
        self, z: np.ndarray, w: np.ndarray, s: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """P_λ, dP_λ/dφ and sinφ·dP_λ/dφ at an own angle φ given by
        z = sin²(φ/2), w = cos²(φ/2), s = sinφ."""
        value = np.empty_like(z)
        deriv = np.empty_like(z)
        sderiv = np.empty_like(z)

        near = z <= Z_SWITCH
        if np.any(near):
            zn, sn = z[near], s[near]
            dF = npoly.polyval(zn, self._z_dcoef)
            value[near] = npoly.polyval(zn, self._z_coef)
            deriv[near] = 0.5 * sn * dF
            sderiv[near] = 0.5 * sn * sn * dF

        far = ~near
        if np.any(far):
            wf, sf = w[far], s[far]
            A = npoly.polyval(wf, self._wA)
            B = npoly.polyval(wf, self._wB)
            dA = npoly.polyval(wf, self._wA_d)
            dB = npoly.polyval(wf, self._wB_d)
            positive = wf > 0.0
            with np.errstate(divide="ignore", invalid="ignore"):
                logw = np.where(positive, np.log(np.where(positive, wf, 1.0)), -np.inf)
                wlogw = np.where(positive, wf * np.where(positive, logw, 0.0), 0.0)
                value[far] = np.where(positive, A - logw * B, np.inf)
                # sin²φ = 4 w (1 − w)
                sd = 2.0 * (1.0 - wf) * (B - wf * dA + wlogw * dB)
                sderiv[far] = sd
                deriv[far] = np.where(sf > 0.0, sd / np.where(sf > 0.0, sf, 1.0), np.inf)
        return value, deriv, sderiv

    @staticmethod
    def _half_angles(theta: ArrayLike) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        theta = np.asarray(theta, dtype=float)
        return np.sin(0.5 * theta) ** 2, np.cos(0.5 * theta) ** 2, np.sin(theta)

    def _eval(self, theta: ArrayLike, mirror: bool) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        theta_arr = np.atleast_1d(np.asarray(theta, dtype=float))
        bad = ~np.isfinite(theta_arr) | (theta_arr < 0.0) | (theta_arr > math.pi)
        if np.any(bad):
            raise NumericError("basis evaluated outside [0, pi]", theta=float(theta_arr[bad][0]))
        sh, ch, s = self._half_angles(theta_arr)
        if mirror:
            value, deriv, sderiv = self._series(ch, sh, s)
            return value, -deriv, -sderiv
        return self._series(sh, ch, s)

    @staticmethod
    def _shape(out: np.ndarray, like: ArrayLike) -> ArrayLike:
        if np.ndim(like) == 0:
            return float(out[0])
        return out.reshape(np.shape(like))

    # ------------------------------------------------------------------
    # Basis functions
    # ------------------------------------------------------------------

    def u0(self, theta: ArrayLike) -> ArrayLike:
        """P_λ(cos θ), regular at θ = 0, log-singular at θ = π."""
        return self._shape(self._eval(theta, mirror=False)[0], theta)

    def du0(self, theta: ArrayLike) -> ArrayLike:
        return self._shape(self._eval(theta, mirror=False)[1], theta)

    def sin_du0(self, theta: ArrayLike) -> ArrayLike:
        """sinθ · u0′(θ); finite on the closed interval (2·log prefactor at π)."""
        return self._shape(self._eval(theta, mirror=False)[2], theta)

    def upi(self, theta: ArrayLike) -> ArrayLike:
        """u0(π − θ), regular at θ = π."""
        return self._shape(self._eval(theta, mirror=True)[0], theta)

    def dupi(self, theta: ArrayLike) -> ArrayLike:
        return self._shape(self._eval(theta, mirror=True)[1], theta)

    def sin_dupi(self, theta: ArrayLike) -> ArrayLike:
        return self._shape(self._eval(theta, mirror=True)[2], theta)

    def basis(self, theta: ArrayLike) -> dict:
        """All six basis quantities at once (arrays shaped like theta)."""
        v0, d0, s0 = self._eval(theta, mirror=False)
        vp, dp, sp = self._eval(theta, mirror=True)
        shape = np.shape(theta)
        return {
            "u0": v0.reshape(shape), "du0": d0.reshape(shape), "sin_du0": s0.reshape(shape),
            "upi": vp.reshape(shape), "dupi": dp.reshape(shape), "sin_dupi": sp.reshape(shape),
        }

    # ------------------------------------------------------------------
    # Kernel
    # ------------------------------------------------------------------

    def K(self, theta: ArrayLike, xi: ArrayLike) -> ArrayLike:
        theta_b, xi_b = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(xi, dtype=float))
        lo = np.minimum(theta_b, xi_b)
        hi = np.maximum(theta_b, xi_b)
        out = self.c * np.asarray(self.u0(lo)) * np.asarray(self.upi(hi))
        return float(out) if out.ndim == 0 else out

    def K_dtheta(self, theta: ArrayLike, xi: ArrayLike, side: str = "right") -> ArrayLike:
        """One-sided ∂K/∂θ; side picks the limit when θ = ξ."""
        if side not in ("left", "right"):
            raise ValueError("side must be 'left' or 'right'")
        theta_b, xi_b = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(xi, dtype=float))
        above = (theta_b > xi_b) | ((theta_b == xi_b) & (side == "right"))
        right = self.c * np.asarray(self.u0(xi_b)) * np.asarray(self.dupi(theta_b))
        left = self.c * np.asarray(self.du0(theta_b)) * np.asarray(self.upi(xi_b))
        out = np.where(above, right, left)
        return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=32)
def kernel_for(beta: float) -> GreenKernel:
    """Shared kernel per β."""
    return GreenKernel(beta)


# ---------------------------------------------------------------------------
# Functional interface
# ---------------------------------------------------------------------------

def basis_u0(theta: ArrayLike, deg: ConicalDegree) -> ArrayLike:
    """Real value of P_λ(cos θ) for θ ∈ [0, π).

    Raises:
        NumericError: If θ is outside the domain or the sum is not finite.
    """
    value = kernel_for(deg.beta).u0(theta)
    arr = np.atleast_1d(value)
    if not np.all(np.isfinite(arr)):
        bad = np.atleast_1d(np.asarray(theta, dtype=float))[~np.isfinite(arr)]
        raise NumericError("conical function is not finite", theta=float(bad[0]))
    return value


def green_K(theta: ArrayLike, xi: ArrayLike, kernel: GreenKernel) -> ArrayLike:
    """K_+(θ, ξ) for θ > ξ, K_−(θ, ξ) for θ < ξ (continuous at θ = ξ)."""
    return kernel.K(theta, xi)


def green_K_dtheta(theta: ArrayLike, xi: ArrayLike, side: str, kernel: GreenKernel) -> ArrayLike:
    """One-sided θ-derivative of K; its jump at θ = ξ is −1/sin ξ."""
    return kernel.K_dtheta(theta, xi, side)
