"""Smoothing kernel, one-sided exponential envelopes and the partition of unity.

The base kernel is the squared Fejer window rho(w) = (3 / 8 pi) sinc^4(w/4):
a probability density with quartic tail decay whose Fourier transform is the
cubic B-spline (3/2) B3(2u) supported on [-1, 1] -- nonnegative and Lipschitz,
which is exactly what the sandwich argument needs.  Envelope shapes carry
their sup/inf regularizations in closed form so the sandwich can be checked
by quadrature alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .projective import DualPoint, ProjectivePoint, angular_distance, delta

__all__ = [
    "SmoothingKernel",
    "make_kernel",
    "psi_minus",
    "psi_minus_hat",
    "phi_plus",
    "phi_plus_hat",
    "EnvelopeShape",
    "indicator_shape",
    "one_sided_exp_shape",
    "SandwichReport",
    "smoothing_sandwich_check",
    "PartitionFamily",
    "partition",
    "fourier_quadrature",
]

BASE_TAIL_CONSTANT = 96.0 / math.pi  # rho(w) <= c / w^4 for |w| >= 1


def _bspline3(x: np.ndarray) -> np.ndarray:
    """Cubic B-spline on [-2, 2], unit integral, value 2/3 at 0."""
    ax = np.abs(x)
    inner = 2.0 / 3.0 - ax**2 + 0.5 * ax**3
    outer = (2.0 - ax) ** 3 / 6.0
    return np.where(ax <= 1.0, inner, np.where(ax <= 2.0, outer, 0.0))


@dataclass(frozen=True)
class SmoothingKernel:
    """Scaled kernel rho_eps(w) = rho(w/eps)/eps with transform support [-1/eps, 1/eps]."""

    eps: float

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0:
            raise ValueError("eps must lie in (0, 1)")

    def density(self, w) -> np.ndarray:
        z = np.asarray(w, dtype=float) / self.eps
        sinc = np.sinc(z / (4.0 * np.pi))  # sin(z/4) / (z/4)
        return 3.0 / (8.0 * np.pi) * sinc**4 / self.eps

    def transform(self, u) -> np.ndarray:
        return 1.5 * _bspline3(2.0 * self.eps * np.asarray(u, dtype=float))

    @property
    def support_radius(self) -> float:
        return 1.0 / self.eps

    @property
    def tail_constant(self) -> float:
        """c with rho_eps(w) <= c / w^4 for |w| >= eps."""
        return BASE_TAIL_CONSTANT * self.eps**3


def make_kernel(eps: float) -> SmoothingKernel:
    return SmoothingKernel(eps)


def psi_minus(s: float, eps: float, w) -> np.ndarray:
    """Inner envelope of the decaying exponential: e^{-s(w+eps)} for w >= eps."""
    if s <= 0:
        raise ValueError("this branch needs s > 0")
    w = np.asarray(w, dtype=float)
    return np.where(w >= eps, np.exp(-s * (w + eps)), 0.0)


def psi_minus_hat(s: float, eps: float, u) -> np.ndarray:
    if s <= 0:
        raise ValueError("this branch needs s > 0")
    u = np.asarray(u, dtype=float)
    return np.exp(-2.0 * eps * s) * np.exp(-1j * eps * u) / (s + 1j * u)


def phi_plus(s: float, eps: float, w) -> np.ndarray:
    """Outer envelope of the other tail: 1 on [-eps, eps], e^{-s(w+eps)} for w < -eps."""
    if s >= 0:
        raise ValueError("this branch needs s < 0")
    w = np.asarray(w, dtype=float)
    return np.where(w > eps, 0.0, np.where(w >= -eps, 1.0, np.exp(-s * (w + eps))))


def phi_plus_hat(s: float, eps: float, u) -> np.ndarray:
    if s >= 0:
        raise ValueError("this branch needs s < 0")
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        window = np.where(u == 0.0, eps, np.sin(eps * u) / np.where(u == 0.0, 1.0, u))
    return 2.0 * window + np.exp(1j * eps * u) / (-s - 1j * u)


def fourier_quadrature(fn: Callable, u: float, lo: float, hi: float,
                       n_nodes: int = 200_001) -> complex:
    """Simpson quadrature of the transform integral of fn over [lo, hi]."""
    if n_nodes % 2 == 0:
        n_nodes += 1
    w = np.linspace(lo, hi, n_nodes)
    vals = fn(w) * np.exp(-1j * u * w)
    h = (hi - lo) / (n_nodes - 1)
    weights = np.ones(n_nodes)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    return complex(np.sum(weights * vals) * h / 3.0)


@dataclass(frozen=True)
class EnvelopeShape:
    """A nonnegative shape with closed-form ball sup/inf regularizations."""

    psi: Callable
    upper: Callable  # upper(eps) -> function
    lower: Callable  # lower(eps) -> function


def indicator_shape(b1: float, b2: float) -> EnvelopeShape:
    if b1 >= b2:
        raise ValueError("need b1 < b2")

    def psi(w):
        w = np.asarray(w, dtype=float)
        return ((w >= b1) & (w <= b2)).astype(float)

    def upper(eps):
        return lambda w: ((np.asarray(w) >= b1 - eps) & (np.asarray(w) <= b2 + eps)).astype(float)

    def lower(eps):
        def f(w):
            w = np.asarray(w, dtype=float)
            if b2 - b1 <= 2 * eps:
                return np.zeros_like(w)
            return ((w >= b1 + eps) & (w <= b2 - eps)).astype(float)
        return f

    return EnvelopeShape(psi, upper, lower)


def one_sided_exp_shape(s: float) -> EnvelopeShape:
    if s <= 0:
        raise ValueError("decay rate must be positive")

    def psi(w):
        w = np.asarray(w, dtype=float)
        return np.where(w >= 0.0, np.exp(-s * w), 0.0)

    def upper(eps):
        def f(w):
            w = np.asarray(w, dtype=float)
            return np.where(w < -eps, 0.0, np.exp(-s * np.maximum(w - eps, 0.0)))
        return f

    def lower(eps):
        return lambda w: psi_minus(s, eps, w)

    return EnvelopeShape(psi, upper, lower)


@dataclass(frozen=True)
class SandwichReport:
    max_violation: float
    c_fit: float


def smoothing_sandwich_check(shape: EnvelopeShape, eps: float, w_grid: np.ndarray,
                             window: float = 1000.0, n_nodes: int = 40_001) -> SandwichReport:
    """Check the two-sided smoothing bound pointwise on a grid of w.

    Lower side: psi_eps^- * rho_{eps^2}(w) minus the |v| >= eps remainder must
    not exceed psi(w); violations beyond quadrature noise are reported.  Upper
    side: the minimal c with psi <= (1 + c) psi_eps^+ * rho_{eps^2} is fitted
    and returned (it should shrink with eps).
    """
    kernel = make_kernel(eps * eps)
    half = window * eps * eps
    v = np.linspace(-half, half, n_nodes)
    h = v[1] - v[0]
    simpson = np.ones(n_nodes)
    simpson[1:-1:2] = 4.0
    simpson[2:-1:2] = 2.0
    rho_v = kernel.density(v) * simpson * h / 3.0
    upper_fn = shape.upper(eps)
    lower_fn = shape.lower(eps)

    w_grid = np.asarray(w_grid, dtype=float)
    psi_w = shape.psi(w_grid)
    conv_lower = np.empty_like(w_grid)
    conv_upper = np.empty_like(w_grid)
    remainder = np.empty_like(w_grid)
    outside = np.abs(v) >= eps
    for i, w in enumerate(w_grid):
        lower_vals = lower_fn(w - v)
        conv_lower[i] = float(np.dot(rho_v, lower_vals))
        conv_upper[i] = float(np.dot(rho_v, upper_fn(w - v)))
        remainder[i] = float(np.dot(rho_v[outside], lower_vals[outside]))

    violation = float(np.max(conv_lower - remainder - psi_w))
    with np.errstate(divide="ignore", invalid="ignore"):
        need = np.where(psi_w > 0.0, psi_w / conv_upper - 1.0, 0.0)
    c_fit = float(max(0.0, np.max(need)))
    return SandwichReport(max(violation, 0.0), c_fit)


@dataclass(frozen=True)
class PartitionFamily:
    """Ramp partition in halls of -log delta(y, .): bump k covers [a(k-1), a(k+1)]."""

    a: float
    gamma: float
    y: DualPoint

    def __post_init__(self):
        if not 0.0 < self.a <= 0.5:
            raise ValueError("step must lie in (0, 1/2]")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("Holder exponent must lie in (0, 1]")

    @staticmethod
    def ramp(t) -> np.ndarray:
        return np.clip(np.asarray(t, dtype=float), 0.0, 1.0)

    def u_k(self, k: int, t) -> np.ndarray:
        return self.ramp((np.asarray(t, dtype=float) - (k - 1) * self.a) / self.a)

    def h_k(self, k: int, t) -> np.ndarray:
        return self.u_k(k, t) - self.u_k(k + 1, t)

    def _neg_log_delta(self, x: ProjectivePoint) -> float:
        d = delta(self.y, x)
        return float("inf") if d == 0.0 else -math.log(d)

    def chi(self, k: int, x: ProjectivePoint) -> float:
        return float(self.h_k(k, self._neg_log_delta(x)))

    def chi_bar(self, k: int, x: ProjectivePoint) -> float:
        return float(self.u_k(k, self._neg_log_delta(x)))

    def chi_values(self, k: int, neg_log_delta) -> np.ndarray:
        return self.h_k(k, neg_log_delta)

    def hoelder_norm_estimate(self, k: int, rng: np.random.Generator,
                              n_pairs: int = 4000) -> float:
        """Sup norm plus an empirical Holder quotient over random point pairs."""
        theta = rng.random(2 * n_pairs) * np.pi
        xs = [ProjectivePoint.from_angle(t) for t in theta]
        vals = np.array([self.chi(k, x) for x in xs])
        sup = float(np.max(vals)) if vals.size else 0.0
        quot = 0.0
        for i in range(n_pairs):
            x1, x2 = xs[2 * i], xs[2 * i + 1]
            dist = angular_distance(x1, x2)
            if dist > 1e-12:
                quot = max(quot, abs(vals[2 * i] - vals[2 * i + 1]) / dist**self.gamma)
        return sup + quot

    def envelope(self, k: int) -> float:
        """Growth envelope e^{gamma k a} / a^gamma the Holder norms must respect."""
        return math.exp(self.gamma * k * self.a) / self.a**self.gamma


def partition(a: float, gamma: float, y: DualPoint) -> PartitionFamily:
    return PartitionFamily(a, gamma, y)
