"""Direct and tilted path simulation with exactly unbiased importance weights.

Paths never materialize the matrix product: the state is the current line
(unit vector), the accumulated cocycle and the accumulated log weight, all
updated in log space.  The tilted sampler draws each step from tabulated
per-atom probabilities; because every weight uses exactly the probability
the sampler realized, the reweighted expectation equals the direct one for
*any* strictly positive eigenfunction guess, to rounding.  The quality of
the guess only moves the variance.

Batches use counter-based Philox streams jumped per batch index, so results
are bit-identical for a given (seed, config) regardless of thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cumulants import CumulantData, solve_saddle
from .laws import MatrixLaw, sample_indices
from .projective import DualPoint, ProjectivePoint, angles_act, angles_cocycle
from .transfer import CircleGrid, SpectralData

DEFAULT_BATCH = 1 << 17
ESS_FLOOR = 50.0

__all__ = [
    "PathBatch",
    "TailEstimate",
    "TiltedChain",
    "philox_streams",
    "simulate_direct",
    "simulate_tilted",
    "estimate_tail",
    "estimate_interval",
    "regularity_probe",
    "delta_moment_probe",
    "lyapunov_estimate",
    "phi_at_points",
]


def philox_streams(seed: int, n_batches: int) -> list[np.random.Generator]:
    """Independent counter-based streams: batch b uses Philox(seed) jumped b times."""
    root = np.random.Philox(key=seed)
    return [np.random.Generator(root.jumped(b)) for b in range(n_batches)]


def _batch_sizes(n_paths: int, batch_size: int) -> list[int]:
    full, rem = divmod(n_paths, batch_size)
    return [batch_size] * full + ([rem] if rem else [])


def _run_batches(worker, n_paths: int, seed: int, threads: int,
                 batch_size: int = DEFAULT_BATCH) -> list:
    """Run worker(rng, size) per batch; results returned in batch order."""
    sizes = _batch_sizes(n_paths, batch_size)
    streams = philox_streams(seed, len(sizes))
    if threads <= 1 or len(sizes) == 1:
        return [worker(rng, size) for rng, size in zip(streams, sizes)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(worker, rng, size) for rng, size in zip(streams, sizes)]
        return [f.result() for f in futures]


@dataclass(frozen=True)
class PathBatch:
    """Struct-of-arrays of path endpoints (one entry per simulated path)."""

    final_cocycle: np.ndarray
    final_logdelta: np.ndarray
    log_weight: np.ndarray
    final_points: np.ndarray  # (n_paths, d) unit rows

    @property
    def coefficient_log(self) -> np.ndarray:
        """log |<f, G_n v>| per path, by the cocycle + alignment split."""
        return self.final_cocycle + self.final_logdelta

    @property
    def n_paths(self) -> int:
        return self.final_cocycle.shape[0]

    @staticmethod
    def concat(parts: list["PathBatch"]) -> "PathBatch":
        return PathBatch(
            np.concatenate([p.final_cocycle for p in parts]),
            np.concatenate([p.final_logdelta for p in parts]),
            np.concatenate([p.log_weight for p in parts]),
            np.concatenate([p.final_points for p in parts]),
        )


@dataclass(frozen=True)
class TailEstimate:
    estimate: float
    stderr: float
    n_samples: int
    ess: float
    reliable: bool = True

    def __post_init__(self):
        if self.stderr < 0:
            raise ValueError("stderr must be nonnegative")
        if self.ess > self.n_samples * (1 + 1e-9):
            raise ValueError("effective sample size cannot exceed the sample count")


def _final_logdelta(points: np.ndarray, y: DualPoint) -> np.ndarray:
    pairing = np.abs(points @ y.vec)
    with np.errstate(divide="ignore"):
        return np.log(pairing)


def simulate_direct(law: MatrixLaw, n: int, x: ProjectivePoint, y: DualPoint,
                    n_paths: int, seed: int, threads: int = 1,
                    batch_size: int = DEFAULT_BATCH) -> PathBatch:
    """i.i.d. left products applied to x, tracked incrementally (any dimension)."""
    if n < 1:
        raise ValueError("need at least one step")
    mats = law.matrices

    def worker(rng, size):
        v = np.tile(x.vec, (size, 1))
        sigma = np.zeros(size)
        for _ in range(n):
            idx = sample_indices(law, rng, size)
            imgs = np.stack([v @ m.T for m in mats])
            v = np.take_along_axis(imgs, idx[None, :, None], axis=0)[0]
            nrm = np.linalg.norm(v, axis=1)
            sigma += np.log(nrm)
            v /= nrm[:, None]
        return PathBatch(sigma, _final_logdelta(v, y), np.zeros(size), v)

    return PathBatch.concat(_run_batches(worker, n_paths, seed, threads, batch_size))


class TiltedChain:
    """Tilted step sampler on the projective circle with tabulated proposals.

    The per-atom step weight w_i e^{s sigma(g_i, x)} r(g_i . x) is evaluated
    on a fine angle table and normalized per node; step probabilities are
    circular-linear interpolations of the normalized table (they sum to one
    exactly because interpolation is linear).  Any strictly positive r is
    admissible.
    """

    def __init__(self, law: MatrixLaw, s: float, r_values: np.ndarray,
                 grid: CircleGrid, table_size: int = 8192):
        if law.dim != 2:
            raise ValueError("tilted simulation requires d=2")
        r_values = np.asarray(r_values, dtype=float)
        if np.any(r_values <= 0):
            raise ValueError("eigenfunction guess must be strictly positive")
        self.law = law
        self.s = float(s)
        self.table_size = int(table_size)
        thetas = np.arange(self.table_size) * (np.pi / self.table_size)
        raw = np.empty((law.size, self.table_size))
        for i, (mat, w) in enumerate(zip(law.matrices, law.weights)):
            sig = angles_cocycle(mat, thetas)
            img = angles_act(mat, thetas)
            raw[i] = w * np.exp(self.s * sig) * grid.interpolate(r_values, img)
        self.q_table = raw / raw.sum(axis=0)
        self.log_atom_weights = np.log(law.weights)
        m = law.matrices
        self._entries = (m[:, 0, 0].copy(), m[:, 0, 1].copy(),
                         m[:, 1, 0].copy(), m[:, 1, 1].copy())
        self._scale = self.table_size / np.pi

    def _probs_at(self, theta_nonneg: np.ndarray) -> np.ndarray:
        """(n_atoms, K) step probabilities for angles already in [0, pi]."""
        pos = theta_nonneg * self._scale
        i0 = np.floor(pos).astype(np.int64)
        frac = pos - i0
        i0 &= self.table_size - 1
        i1 = (i0 + 1) & (self.table_size - 1)
        return self.q_table[:, i0] * (1.0 - frac) + self.q_table[:, i1] * frac

    def step_probabilities(self, theta: np.ndarray) -> np.ndarray:
        """(n_atoms, K) step probabilities at the given angles; columns sum to 1."""
        return self._probs_at(np.asarray(theta) % np.pi)

    def _advance(self, vx, vy, theta, sigma2, logw, rng):
        """One tilted step on a batch (sigma2 accumulates 2 sigma); returns new state."""
        q = self._probs_at(theta)
        u = rng.random(theta.shape[0])
        if self.law.size == 2:
            pick = u >= q[0]
            q_j = np.where(pick, q[1], q[0])
            logw += np.where(pick, self.log_atom_weights[1], self.log_atom_weights[0])
            logw -= np.log(q_j)
            e = self._entries
            a00 = np.where(pick, e[0][1], e[0][0])
            a01 = np.where(pick, e[1][1], e[1][0])
            a10 = np.where(pick, e[2][1], e[2][0])
            a11 = np.where(pick, e[3][1], e[3][0])
        else:
            cum = np.cumsum(q, axis=0)
            j = (u[None, :] >= cum).sum(axis=0).clip(0, self.law.size - 1)
            q_j = np.take_along_axis(q, j[None, :], axis=0)[0]
            logw += self.log_atom_weights[j] - np.log(q_j)
            a00, a01, a10, a11 = (e[j] for e in self._entries)
        ux = a00 * vx + a01 * vy
        uy = a10 * vx + a11 * vy
        nrm2 = ux * ux + uy * uy
        sigma2 += np.log(nrm2)
        inv = 1.0 / np.sqrt(nrm2)
        vx, vy = ux * inv, uy * inv
        theta = np.arctan2(vy, vx)
        np.add(theta, np.pi, out=theta, where=theta < 0.0)
        return vx, vy, theta, sigma2, logw

    def run(self, n: int, x: ProjectivePoint, y: DualPoint, n_paths: int,
            seed: int, threads: int = 1, batch_size: int = DEFAULT_BATCH) -> PathBatch:
        theta0 = x.angle

        def worker(rng, size):
            vx = np.full(size, math.cos(theta0))
            vy = np.full(size, math.sin(theta0))
            theta = np.full(size, theta0 % np.pi)
            sigma2 = np.zeros(size)
            logw = np.zeros(size)
            for _ in range(n):
                vx, vy, theta, sigma2, logw = self._advance(vx, vy, theta, sigma2, logw, rng)
            points = np.column_stack([vx, vy])
            return PathBatch(0.5 * sigma2, _final_logdelta(points, y), logw, points)

        return PathBatch.concat(_run_batches(worker, n_paths, seed, threads, batch_size))


def simulate_tilted(law: MatrixLaw, spec: SpectralData, n: int, x: ProjectivePoint,
                    y: DualPoint, n_paths: int, seed: int, threads: int = 1,
                    batch_size: int = DEFAULT_BATCH) -> PathBatch:
    """Tilted paths at tilt spec.s using the spectral eigenfunction as guide."""
    chain = TiltedChain(law, spec.s, spec.r, spec.grid)
    return chain.run(n, x, y, n_paths, seed, threads, batch_size)


def phi_at_points(phi_values: np.ndarray | None, grid: CircleGrid,
                  points: np.ndarray) -> np.ndarray:
    """Evaluate a grid target function at final points (ones when phi is None)."""
    if phi_values is None:
        return np.ones(points.shape[0])
    theta = np.arctan2(points[:, 1], points[:, 0]) % np.pi
    return grid.interpolate(np.asarray(phi_values, dtype=float), theta)


def _pooled_estimate(y: np.ndarray, weights: np.ndarray, batch_size: int) -> tuple:
    """Mean/stderr via chunked Welford merging plus the weight-based ESS."""
    count, mean, m2 = 0, 0.0, 0.0
    for lo in range(0, y.shape[0], batch_size):
        chunk = y[lo:lo + batch_size]
        c = chunk.shape[0]
        cm = float(chunk.mean())
        cm2 = float(((chunk - cm) ** 2).sum())
        delta = cm - mean
        total = count + c
        mean += delta * c / total
        m2 += cm2 + delta * delta * count * c / total
        count = total
    stderr = math.sqrt(m2 / (count - 1) / count) if count > 1 else 0.0
    wsum = float(weights.sum())
    wsq = float((weights * weights).sum())
    ess = wsum * wsum / wsq if wsq > 0 else 0.0
    return mean, stderr, count, ess


def _centered_statistic(paths: PathBatch, cd: CumulantData, n: int,
                        use_coefficient: bool) -> np.ndarray:
    base = paths.coefficient_log if use_coefficient else paths.final_cocycle
    return base - n * cd.lyapunov


def estimate_tail(law: MatrixLaw, spec: SpectralData, cd: CumulantData,
                  phi_values: np.ndarray | None, t: float, n: int, n_paths: int,
                  seed: int, tail: str = "upper", use_coefficient: bool = True,
                  threads: int = 1, paths: PathBatch | None = None) -> TailEstimate:
    """Importance-sampling estimate of E[phi(G_n . x) 1{tail event at level t}].

    The tilt of `spec` should be the saddle tilt for (t, n, tail) for good
    variance; correctness does not depend on it.  Pass precomputed `paths`
    to evaluate several targets on one ensemble.
    """
    if paths is None:
        x, y = default_directions(law.dim)
        paths = simulate_tilted(law, spec, n, x, y, n_paths, seed, threads)
    centered = _centered_statistic(paths, cd, n, use_coefficient)
    level = math.sqrt(n) * cd.sigma * t
    if tail == "upper":
        ind = centered >= level
    elif tail == "lower":
        ind = centered <= -level
    else:
        raise ValueError("tail must be 'upper' or 'lower'")
    weights = np.where(ind, np.exp(paths.log_weight), 0.0)
    y_vals = weights * phi_at_points(phi_values, spec.grid, paths.final_points)
    mean, stderr, count, ess = _pooled_estimate(y_vals, weights, DEFAULT_BATCH)
    return TailEstimate(mean, stderr, count, ess, reliable=ess >= ESS_FLOOR)


def estimate_interval(law: MatrixLaw, spec: SpectralData, cd: CumulantData,
                      phi_values: np.ndarray | None, t: float, n: int,
                      a1: float, a2: float, n_paths: int, seed: int,
                      use_coefficient: bool = True, threads: int = 1,
                      paths: PathBatch | None = None) -> TailEstimate:
    """Window estimate P(statistic - n lambda_1 in [a1, a2] + sqrt(n) sigma t); t signed."""
    if a1 > a2:
        raise ValueError("need a1 <= a2")
    if paths is None:
        x, y = default_directions(law.dim)
        paths = simulate_tilted(law, spec, n, x, y, n_paths, seed, threads)
    centered = _centered_statistic(paths, cd, n, use_coefficient)
    shifted = centered - math.sqrt(n) * cd.sigma * t
    ind = (shifted >= a1) & (shifted <= a2)
    weights = np.where(ind, np.exp(paths.log_weight), 0.0)
    y_vals = weights * phi_at_points(phi_values, spec.grid, paths.final_points)
    mean, stderr, count, ess = _pooled_estimate(y_vals, weights, DEFAULT_BATCH)
    return TailEstimate(mean, stderr, count, ess, reliable=ess >= ESS_FLOOR)


def saddle_tilt_for(cd: CumulantData, t: float, n: int, tail: str = "upper") -> float:
    """Signed saddle tilt for a tail run (lower tail and negative t give s < 0)."""
    if t == 0.0:
        return 0.0
    if t < 0:
        return solve_saddle(cd, -t, n, "lower")
    return solve_saddle(cd, t, n, tail)


def default_directions(dim: int) -> tuple[ProjectivePoint, DualPoint]:
    """Generic start line and functional used when the caller does not pin them."""
    if dim == 2:
        return (ProjectivePoint.from_angle(0.3), DualPoint.from_angle(1.1))
    v = np.ones(dim)
    f = np.arange(1, dim + 1, dtype=float)
    return ProjectivePoint(v), DualPoint(f)


def regularity_probe(law: MatrixLaw, spec: SpectralData, n: int, x: ProjectivePoint,
                     y: DualPoint, eps: float, k_max: int, n_paths: int, seed: int,
                     threads: int = 1) -> list[tuple[int, float]]:
    """Empirical tilted-chain tails P(log delta(y, G_n . x) <= -eps k), k = 0..k_max.

    Probabilities are under the tilted law itself, deliberately unweighted.
    """
    if n < k_max:
        raise ValueError("need n >= k_max")
    paths = simulate_tilted(law, spec, n, x, y, n_paths, seed, threads)
    return [(k, float(np.mean(paths.final_logdelta <= -eps * k)))
            for k in range(k_max + 1)]


def delta_moment_probe(law: MatrixLaw, spec: SpectralData, n: int, x: ProjectivePoint,
                       y: DualPoint, p: float, n_paths: int, seed: int,
                       threads: int = 1) -> tuple[float, float]:
    """Tilted-chain moment E[delta(y, G_n . x)^{-p|s|}] with its standard error."""
    if p <= 0:
        raise ValueError("p must be positive")
    exponent = p * abs(spec.s)
    paths = simulate_tilted(law, spec, n, x, y, n_paths, seed, threads)
    if exponent == 0.0:
        return 1.0, 0.0
    vals = np.exp(-exponent * paths.final_logdelta)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(vals.size))


def lyapunov_estimate(law: MatrixLaw, n: int, n_paths: int, seed: int,
                      x: ProjectivePoint | None = None, burn: int = 200,
                      threads: int = 1) -> tuple[float, float]:
    """Top growth rate from cocycle increments after a burn-in.

    The raw mean sigma_n / n carries an O(1/n) offset from the transient;
    differencing against the burn-in checkpoint removes it, so the standard
    error is an honest uncertainty for the estimate.
    """
    if n <= burn:
        raise ValueError("n must exceed the burn-in")
    if x is None:
        x = default_directions(law.dim)[0]
    mats = law.matrices

    def worker(rng, size):
        v = np.tile(x.vec, (size, 1))
        sigma = np.zeros(size)
        checkpoint = np.zeros(size)
        for step in range(n):
            idx = sample_indices(law, rng, size)
            imgs = np.stack([v @ m.T for m in mats])
            v = np.take_along_axis(imgs, idx[None, :, None], axis=0)[0]
            nrm = np.linalg.norm(v, axis=1)
            sigma += np.log(nrm)
            v /= nrm[:, None]
            if step + 1 == burn:
                checkpoint = sigma.copy()
        return (sigma - checkpoint) / (n - burn)

    rates = np.concatenate(_run_batches(worker, n_paths, seed, threads))
    return float(rates.mean()), float(rates.std(ddof=1) / math.sqrt(rates.size))
