"""Log growth rate Lambda(s) = log kappa(s), its cumulants and tail formulas.

The eigenvalue samples are fitted globally with a Chebyshev polynomial and
the cumulants gamma_k = Lambda^(k)(0) are read off the fit: differentiating
a global analytic fit is stable where finite differences of the fifth order
would amplify eigensolver noise catastrophically.  The constant term is
pinned so the fit vanishes exactly at s=0 (kappa(0) = 1).

The standard fit window is symmetric, [-s0, s0].  Laws with a small
variance push the saddle point far up the healthy (positive) branch while
their negative branch degrades early, so an asymmetric window fit is also
provided; it feeds tilt selection and wide-range evaluation, with the same
cumulant readout at 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Chebyshev
from scipy.special import erfc

from .transfer import CircleGrid, dominant_eigen, spectral_family, transfer_matrix

ZETA_DOMAIN = 0.5
TAIL_DOMAIN = 0.2  # enforced bound on t / sqrt(n) for the closed-form tails

__all__ = [
    "CumulantData",
    "fit_cumulants",
    "fit_cumulants_window",
    "cumulant_pipeline",
    "growth_pipeline",
    "cramer_zeta",
    "solve_saddle",
    "saddle_series",
    "rate_value",
    "rate_rhs",
    "mde_theoretical",
    "llt_theoretical",
    "gaussian_upper_tail",
]


def gaussian_upper_tail(t: float) -> float:
    """1 - Phi(t) via erfc, avoiding cancellation at large t."""
    return 0.5 * float(erfc(t / math.sqrt(2.0)))


@dataclass(frozen=True)
class CumulantData:
    s_lo: float
    s_hi: float
    stencil_s: np.ndarray
    stencil_lambda: np.ndarray
    cheb: Chebyshev
    gamma: np.ndarray  # gamma_1 .. gamma_5
    fit_residual: float

    def __post_init__(self):
        if self.gamma[1] <= 0:
            raise ValueError("gamma_2 must be positive (degenerate or bad law)")
        if not self.s_lo < 0.0 < self.s_hi:
            raise ValueError("fit window must contain 0 in its interior")

    @property
    def s0(self) -> float:
        """Nominal tilt bound: radius of the symmetric part of the window."""
        return min(-self.s_lo, self.s_hi)

    @property
    def lyapunov(self) -> float:
        return float(self.gamma[0])

    @property
    def variance(self) -> float:
        return float(self.gamma[1])

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.gamma[1]))

    def lam(self, s):
        return self.cheb(s)

    def dlam(self, s):
        return self.cheb.deriv(1)(s)

    def d2lam(self, s):
        return self.cheb.deriv(2)(s)

    def sigma_s(self, s) -> float:
        """Tilted standard deviation sqrt(Lambda''(s))."""
        return float(np.sqrt(self.d2lam(s)))

    def to_json_dict(self) -> dict:
        return {
            "s_lo": self.s_lo,
            "s_hi": self.s_hi,
            "stencil_s": self.stencil_s.tolist(),
            "stencil_lambda": self.stencil_lambda.tolist(),
            "gamma": self.gamma.tolist(),
            "fit_residual": self.fit_residual,
        }


def fit_cumulants_window(stencil_s, stencil_lambda, s_lo: float, s_hi: float,
                         degree: int = 12, min_points: int = 21) -> CumulantData:
    """Chebyshev fit of Lambda on [s_lo, s_hi] with the value at 0 pinned to 0."""
    s = np.asarray(stencil_s, dtype=float)
    lam = np.asarray(stencil_lambda, dtype=float)
    if s.size < min_points:
        raise ValueError(f"need at least {min_points} stencil points")
    order = np.argsort(s)
    s, lam = s[order], lam[order]
    cheb = Chebyshev.fit(s, lam, deg=min(degree, s.size - 1), domain=[s_lo, s_hi])
    cheb = cheb - float(cheb(0.0))  # kappa(0) = 1 exactly
    residual = float(np.max(np.abs(cheb(s) - lam)))
    gamma = np.array([float(cheb.deriv(k)(0.0)) for k in range(1, 6)])
    return CumulantData(float(s_lo), float(s_hi), s, lam, cheb, gamma, residual)


def fit_cumulants(stencil_s, stencil_lambda, s0: float, degree: int = 12) -> CumulantData:
    """Standard symmetric-window fit on [-s0, s0] (stencil symmetric about 0)."""
    s = np.sort(np.asarray(stencil_s, dtype=float))
    if np.max(np.abs(s + s[::-1])) > 1e-12:
        raise ValueError("stencil must be symmetric about 0")
    return fit_cumulants_window(stencil_s, stencil_lambda, -s0, s0, degree)


def cumulant_pipeline(law, s0: float = 0.5, n_stencil: int = 33,
                      grid: CircleGrid | None = None, degree: int = 12):
    """Full stencil-to-cumulants run; returns (CumulantData, spectral family)."""
    if grid is None:
        grid = CircleGrid()
    if n_stencil % 2 == 0:
        n_stencil += 1  # keep 0 on the stencil
    svals = np.linspace(-s0, s0, n_stencil)
    family = spectral_family(law, svals, grid)
    lams = np.array([np.log(family[float(s)].kappa) for s in svals])
    return fit_cumulants(svals, lams, s0, degree), family


def growth_pipeline(law, s_lo: float, s_hi: float, n_stencil: int = 43,
                    grid: CircleGrid | None = None, degree: int = 18,
                    richardson: bool = True) -> CumulantData:
    """Asymmetric-window fit over the certified branch of the growth curve.

    With richardson=True every stencil eigenvalue is extrapolated from the
    grid and its doubling (quadratic interpolation error cancels), which is
    what wide windows need to keep the fit residual near rounding.
    """
    if grid is None:
        grid = CircleGrid()
    svals = np.linspace(s_lo, s_hi, n_stencil)
    if not np.any(np.isclose(svals, 0.0)):
        svals = np.sort(np.append(svals, 0.0))
    lams = np.empty(svals.size)
    fine = CircleGrid(grid.n_points * 2) if richardson else None
    for i, s in enumerate(svals):
        kappa, _, _ = dominant_eigen(transfer_matrix(law, float(s), grid))
        if richardson:
            kappa_fine, _, _ = dominant_eigen(transfer_matrix(law, float(s), fine))
            kappa = kappa_fine + (kappa_fine - kappa) / 3.0
        lams[i] = math.log(kappa)
    return fit_cumulants_window(svals, lams, s_lo, s_hi, degree)


def cramer_zeta(cd: CumulantData, t: float) -> float:
    """Tail-correction power series in t, truncated after the quadratic term."""
    if abs(t) > ZETA_DOMAIN:
        raise ValueError(f"|t| must be <= {ZETA_DOMAIN} for the truncated series")
    g2, g3, g4, g5 = cd.gamma[1:]
    c0 = g3 / (6.0 * g2 ** 1.5)
    c1 = (g4 * g2 - 3.0 * g3 ** 2) / (24.0 * g2 ** 3)
    c2 = (g5 * g2 ** 2 - 10.0 * g4 * g3 * g2 + 15.0 * g3 ** 3) / (120.0 * g2 ** 4.5)
    return float(c0 + c1 * t + c2 * t * t)


def _signed_tau(t: float, n: int, tail: str) -> float:
    if t < 0:
        raise ValueError("t must be nonnegative; use tail='lower' for the lower tail")
    if tail == "upper":
        return t / math.sqrt(n)
    if tail == "lower":
        return -t / math.sqrt(n)
    raise ValueError("tail must be 'upper' or 'lower'")


def saddle_series(cd: CumulantData, t: float, n: int, tail: str = "upper") -> float:
    """Series root of the saddle equation, truncated after the cubic term."""
    tau = _signed_tau(t, n, tail)
    g2, g3, g4 = cd.gamma[1], cd.gamma[2], cd.gamma[3]
    return float(tau / math.sqrt(g2)
                 - g3 / (2.0 * g2 ** 2) * tau ** 2
                 - (g4 * g2 - 3.0 * g3 ** 2) / (6.0 * g2 ** 3.5) * tau ** 3)


def solve_saddle(cd: CumulantData, t: float, n: int, tail: str = "upper",
                 tol: float = 1e-12, maxit: int = 80) -> float:
    """Newton root of Lambda'(s) - Lambda'(0) = +-sigma t / sqrt(n) on the fit."""
    tau = _signed_tau(t, n, tail)
    target = cd.sigma * tau
    lo, hi = cd.s_lo, cd.s_hi
    glo = float(cd.dlam(lo) - cd.dlam(0.0))
    ghi = float(cd.dlam(hi) - cd.dlam(0.0))
    if not (glo <= target <= ghi):
        raise ValueError(f"t too large for this s0: target {target:.4g} outside "
                         f"[{glo:.4g}, {ghi:.4g}]")
    s = min(max(saddle_series(cd, t, n, tail), lo), hi)
    d0 = float(cd.dlam(0.0))
    for _ in range(maxit):
        g = float(cd.dlam(s)) - d0 - target
        if abs(g) < tol:
            return float(s)
        # keep a bisection bracket around the (monotone) root
        if g > 0:
            hi = s
        else:
            lo = s
        step = g / float(cd.d2lam(s))
        s_new = s - step
        if not (lo < s_new < hi):
            s_new = 0.5 * (lo + hi)
        s = s_new
    raise RuntimeError(f"saddle iteration did not reach residual {tol}")


def rate_value(cd: CumulantData, s: float) -> float:
    """Legendre-type rate s Lambda'(s) - Lambda(s) evaluated on the fit."""
    return float(s * cd.dlam(s) - cd.lam(s))


def rate_rhs(cd: CumulantData, t: float, n: int, tail: str = "upper") -> float:
    """Closed-form value the rate must match at the saddle point.

    With the signed ratio tau = +-t/sqrt(n) this is tau^2/2 - tau^3 zeta(tau),
    i.e. t^2/(2n) - (t^3/n^{3/2}) zeta(t/sqrt(n)) on the upper tail.
    """
    tau = _signed_tau(t, n, tail)
    return float(tau * tau / 2.0 - tau ** 3 * cramer_zeta(cd, tau))


def mde_theoretical(cd: CumulantData, t: float, n: int, tail: str = "upper") -> float:
    """Gaussian tail times the cubic correction factor (target mass one)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t / math.sqrt(n) > TAIL_DOMAIN:
        raise ValueError(f"t/sqrt(n) must be <= {TAIL_DOMAIN}")
    tau = t / math.sqrt(n)
    base = gaussian_upper_tail(t)
    if tail == "upper":
        return float(math.exp(t ** 3 / math.sqrt(n) * cramer_zeta(cd, tau)) * base)
    if tail == "lower":
        return float(math.exp(-(t ** 3) / math.sqrt(n) * cramer_zeta(cd, -tau)) * base)
    raise ValueError("tail must be 'upper' or 'lower'")


def llt_theoretical(cd: CumulantData, t: float, n: int, a1: float, a2: float) -> float:
    """Window mass (a2-a1) e^{-t^2/2 + correction} / (sigma sqrt(2 pi n)); t signed."""
    if a1 >= a2:
        raise ValueError("need a1 < a2")
    if abs(t) / math.sqrt(n) > TAIL_DOMAIN:
        raise ValueError(f"|t|/sqrt(n) must be <= {TAIL_DOMAIN}")
    tau = t / math.sqrt(n)
    return float((a2 - a1) / (cd.sigma * math.sqrt(2.0 * math.pi * n))
                 * math.exp(-t * t / 2.0 + t ** 3 / math.sqrt(n) * cramer_zeta(cd, tau)))
