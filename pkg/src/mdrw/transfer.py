"""Discretized transfer operators on the projective circle.

The projective space of the plane is a circle of circumference pi, sampled
on a uniform angle grid.  The weighted Markov operator

    (P_s phi)(x) = sum_i w_i e^{s sigma(g_i, x)} phi(g_i . x)

becomes an N x N matrix by circular piecewise-linear interpolation of phi
onto the grid nodes: interpolation keeps entries nonnegative for real s,
so dominant eigendata comes from plain power iteration.  Piecewise-linear
interpolation is used rather than spectral collocation because the
integrand is only Holder-smooth uniformly over laws.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .laws import MatrixLaw
from .projective import angles_act, angles_cocycle

__all__ = [
    "CircleGrid",
    "SpectralData",
    "PowerIterationError",
    "transfer_matrix",
    "dominant_eigen",
    "spectral_data",
    "spectral_family",
    "stationary_tilted",
    "kappa_refined",
    "perturbed_matrix",
    "dominant_eigen_complex",
    "branch_eigenvalue",
    "decay_profile",
    "fit_exponential_decay",
]


class PowerIterationError(RuntimeError):
    """Power iteration failed to converge; carries the last residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class CircleGrid:
    """Uniform grid theta_j = j pi / N on the projective circle [0, pi)."""

    n_points: int = 512

    def __post_init__(self):
        n = self.n_points
        if n < 64 or (n & (n - 1)) != 0:
            raise ValueError("n_points must be a power of two, at least 64")

    @property
    def spacing(self) -> float:
        return np.pi / self.n_points

    @property
    def thetas(self) -> np.ndarray:
        return np.arange(self.n_points) * self.spacing

    def interp_weights(self, theta: np.ndarray):
        """Circular linear-interpolation stencil: (left index, right index, right fraction)."""
        pos = np.asarray(theta) % np.pi / self.spacing
        i0 = np.floor(pos).astype(np.int64) % self.n_points
        frac = pos - np.floor(pos)
        i1 = (i0 + 1) % self.n_points
        return i0, i1, frac

    def interpolate(self, values: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """Evaluate a grid function at arbitrary angles (pi-periodic, linear)."""
        i0, i1, frac = self.interp_weights(theta)
        return values[i0] * (1.0 - frac) + values[i1] * frac


def transfer_matrix(law: MatrixLaw, s: float, grid: CircleGrid,
                    u: float = 0.0) -> np.ndarray:
    """Matrix of P_{s + iu} on the grid (real array when u == 0).

    Row j applies sum_i w_i e^{(s+iu) sigma(g_i, x_j)} Interp(g_i . x_j);
    applying the s=0 matrix to a constant reproduces it exactly, because
    weights sum to one and interpolating a constant is exact.
    """
    if law.dim != 2:
        raise ValueError("operator discretization requires d=2")
    n = grid.n_points
    dtype = complex if u != 0.0 else float
    op = np.zeros((n, n), dtype=dtype)
    thetas = grid.thetas
    rows = np.arange(n)
    for mat, w in zip(law.matrices, law.weights):
        sig = angles_cocycle(mat, thetas)
        i0, i1, frac = grid.interp_weights(angles_act(mat, thetas))
        amp = w * np.exp((s + 1j * u) * sig) if u != 0.0 else w * np.exp(s * sig)
        np.add.at(op, (rows, i0), amp * (1.0 - frac))
        np.add.at(op, (rows, i1), amp * frac)
    return op


def dominant_eigen(op: np.ndarray, tol: float = 1e-12, maxit: int = 100_000):
    """Perron data (kappa, right vector, left vector) by power iteration.

    Stops when both residuals ||P v - kappa v||_inf / (kappa ||v||_inf)
    (and its left analogue) fall below tol.  The right vector is returned
    with mean one, the left vector with total mass one.
    """
    kappa, r = _power_iteration(op, tol, maxit)
    kappa_left, nu = _power_iteration(op.T, tol, maxit)
    if abs(kappa - kappa_left) > 1e-8 * max(1.0, kappa):
        raise PowerIterationError("left/right eigenvalues disagree", abs(kappa - kappa_left))
    r = r / r.mean()
    nu = nu / nu.sum()
    return kappa, r, nu


def _power_iteration(op: np.ndarray, tol: float, maxit: int):
    n = op.shape[0]
    v = np.full(n, 1.0 / n)
    kappa = 1.0
    residual = np.inf
    for _ in range(maxit):
        w = op @ v
        kappa = w.sum()  # v has unit mass and the iteration stays nonnegative
        if kappa <= 0 or not np.isfinite(kappa):
            raise PowerIterationError("iteration left the positive cone", residual)
        residual = float(np.max(np.abs(w - kappa * v)) / (kappa * np.max(v)))
        v = w / kappa
        if residual < tol:
            return float(kappa), v
    raise PowerIterationError("power iteration did not converge", residual)


@dataclass(frozen=True)
class SpectralData:
    """Dominant eigendata of the tilted operator at one tilt s.

    r is scaled so that nu_0(r) = 1 against the untilted left measure,
    nu so that nu(r) = 1, making pi = nu * r a probability vector.
    """

    s: float
    kappa: float
    r: np.ndarray
    nu: np.ndarray
    pi: np.ndarray
    grid: CircleGrid
    residual: float
    gap: float | None = None

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if np.any(self.r <= 0):
            raise ValueError("eigenfunction must be strictly positive")
        if np.any(self.nu < 0):
            raise ValueError("eigenmeasure must be nonnegative")
        if abs(self.pi.sum() - 1.0) > 1e-8:
            raise ValueError("stationary weights must sum to one")

    def to_json_dict(self, include_vectors: bool = False) -> dict:
        out = {
            "s": self.s,
            "kappa": self.kappa,
            "gap": self.gap,
            "grid_points": self.grid.n_points,
            "residual": self.residual,
        }
        if include_vectors:
            out["r"] = self.r.tolist()
            out["nu"] = self.nu.tolist()
            out["pi"] = self.pi.tolist()
        return out


def spectral_data(law: MatrixLaw, s: float, grid: CircleGrid,
                  nu0: np.ndarray | None = None, compute_gap: bool = False,
                  tol: float = 1e-12) -> SpectralData:
    """Solve the dominant eigenproblem at tilt s and apply the normalizations."""
    op = transfer_matrix(law, s, grid)
    kappa, r, nu = dominant_eigen(op, tol=tol)
    if nu0 is None:
        if s == 0.0:
            nu0 = nu
        else:
            _, _, nu0 = dominant_eigen(transfer_matrix(law, 0.0, grid), tol=tol)
    r = r / float(nu0 @ r)
    nu = nu / float(nu @ r)
    pi = nu * r
    residual = float(np.max(np.abs(op @ r - kappa * r)) / (kappa * np.max(r)))
    gap = None
    if compute_gap:
        ev = np.sort(np.abs(np.linalg.eigvals(op)))[::-1]
        gap = float(ev[1] / ev[0])
    return SpectralData(s, kappa, r, nu, pi, grid, residual, gap)


def spectral_family(law: MatrixLaw, s_values, grid: CircleGrid,
                    tol: float = 1e-12) -> dict[float, SpectralData]:
    """Spectral data at several tilts, sharing one untilted left measure."""
    base = spectral_data(law, 0.0, grid, tol=tol)
    out = {0.0: base}
    for s in s_values:
        s = float(s)
        if s not in out:
            out[s] = spectral_data(law, s, grid, nu0=base.nu, tol=tol)
    return out


def stationary_tilted(spec: SpectralData) -> np.ndarray:
    """Stationary weights of the tilted chain, nu_s(. r_s) / nu_s(r_s)."""
    pi = spec.nu * spec.r
    return pi / pi.sum()


def kappa_refined(law: MatrixLaw, s: float, n_start: int = 512, tol: float = 1e-6,
                  max_doublings: int = 4):
    """Double the grid until kappa stabilizes; returns (kappa, grid, history)."""
    history = []
    grid = CircleGrid(n_start)
    kappa, _, _ = dominant_eigen(transfer_matrix(law, s, grid))
    history.append((grid.n_points, kappa))
    for _ in range(max_doublings):
        finer = CircleGrid(grid.n_points * 2)
        kappa_fine, _, _ = dominant_eigen(transfer_matrix(law, s, finer))
        history.append((finer.n_points, kappa_fine))
        if abs(kappa_fine - kappa) < tol:
            return kappa_fine, finer, history
        grid, kappa = finer, kappa_fine
    raise PowerIterationError("kappa did not stabilize under grid doubling",
                              abs(history[-1][1] - history[-2][1]))


def perturbed_matrix(law: MatrixLaw, s: float, u: float, grid: CircleGrid,
                     spec: SpectralData, lam_prime: float) -> np.ndarray:
    """Matrix of the frequency-perturbed tilted chain R_{s, iu}.

    Realized as the r-conjugated complex transfer matrix
    e^{-iu lam'} / kappa . diag(1/r) P_{s+iu} diag(r): at u=0 the rows sum
    to one up to the eigen-residual, and the dominant eigenvalue is exactly
    kappa(s + iu) e^{-iu lam'} / kappa(s) at the discrete level.
    """
    op = transfer_matrix(law, s, grid, u=u)
    weighted = op * spec.r[np.newaxis, :]
    scale = np.exp(-1j * u * lam_prime) / spec.kappa
    return scale * weighted / spec.r[:, np.newaxis]


def dominant_eigen_complex(op: np.ndarray, v0: np.ndarray, tol: float = 1e-12,
                           maxit: int = 100_000) -> complex:
    """Largest-modulus eigenvalue by power iteration with a Rayleigh estimate."""
    v = v0.astype(complex)
    v = v / np.linalg.norm(v)
    lam = 0.0 + 0.0j
    residual = np.inf
    for _ in range(maxit):
        w = op @ v
        lam = np.vdot(v, w)
        residual = float(np.linalg.norm(w - lam * v))
        v = w / np.linalg.norm(w)
        if residual < tol * max(1.0, abs(lam)):
            return complex(lam)
    raise PowerIterationError("complex power iteration did not converge", residual)


def branch_eigenvalue(op: np.ndarray, lam0: complex, v0: np.ndarray,
                      tol: float = 1e-10, maxit: int = 40) -> complex:
    """Eigenvalue of op nearest lam0, by shifted inverse iteration.

    Used to follow the analytic perturbation branch when it is not the
    modulus-dominant eigenvalue (isometric laws).  The result carries a
    residual certificate ||op v - lam v|| <= tol.
    """
    n = op.shape[0]
    v = v0.astype(complex)
    v = v / np.linalg.norm(v)
    lam = complex(lam0)
    for _ in range(maxit):
        shifted = op - lam * np.eye(n)
        try:
            w = scipy.linalg.lu_solve(scipy.linalg.lu_factor(shifted), v)
        except scipy.linalg.LinAlgError:  # exact hit: lam is the eigenvalue
            return lam
        v = w / np.linalg.norm(w)
        lam_new = complex(np.vdot(v, op @ v))
        residual = float(np.linalg.norm(op @ v - lam_new * v))
        lam = lam_new
        if residual < tol:
            return lam
    raise PowerIterationError("inverse iteration did not converge", residual)


def decay_profile(law: MatrixLaw, s: float, u: float, grid: CircleGrid,
                  spec: SpectralData, lam_prime: float, n_max: int) -> np.ndarray:
    """Sup norms of R_{s,iu}^n applied to the constant function, n = 1..n_max."""
    op = perturbed_matrix(law, s, u, grid, spec, lam_prime)
    v = np.ones(grid.n_points, dtype=complex)
    out = np.empty(n_max)
    for k in range(n_max):
        v = op @ v
        out[k] = np.max(np.abs(v))
    return out


def fit_exponential_decay(norms: np.ndarray, k_min: int, k_max: int):
    """Log-linear fit of sup norms over n in [k_min, k_max]: (rate, r_squared).

    rate > 0 means exponential decay at e^{-rate n}; lattice or isometric
    laws give rate ~ 0 with no explanatory power.
    """
    ks = np.arange(k_min, k_max + 1)
    ys = np.log(norms[k_min - 1:k_max])
    slope, intercept = np.polyfit(ks, ys, 1)
    fitted = slope * ks + intercept
    ss_res = float(np.sum((ys - fitted) ** 2))
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return float(-slope), float(r2)
