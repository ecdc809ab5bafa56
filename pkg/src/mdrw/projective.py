"""Projective points, dual points and cocycle arithmetic for invertible matrices.

Points of the projective space are stored as canonical unit vectors (first
coordinate of magnitude above tolerance is positive), so equal lines compare
and hash identically.  All heavy numerics operate on plain numpy arrays; the
dataclasses below are thin validated wrappers around them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DET_RTOL = 1e-12
UNIT_TOL = 1e-12
DELTA_FLOOR = 1e-300

__all__ = [
    "SquareMatrix",
    "ProjectivePoint",
    "DualPoint",
    "SingularMatrixError",
    "act",
    "cocycle",
    "delta",
    "angular_distance",
    "coefficient_log",
    "matrix_gauge",
    "operator_norm",
    "singular_values_2x2",
    "canonical_unit",
    "angles_act",
    "angles_cocycle",
]


class SingularMatrixError(ValueError):
    """Matrix fails the invertibility tolerance at construction."""


def canonical_unit(v: np.ndarray) -> np.ndarray:
    """Normalize to unit length and flip sign so the first sizeable entry is positive."""
    v = np.asarray(v, dtype=float)
    nrm = np.linalg.norm(v)
    if not np.isfinite(nrm) or nrm == 0.0:
        raise ValueError("zero or non-finite vector cannot represent a line")
    v = v / nrm
    for vi in v:
        if abs(vi) > UNIT_TOL:
            if vi < 0.0:
                v = -v
            break
    return v


@dataclass(frozen=True)
class SquareMatrix:
    """Invertible d x d real matrix (row-major entries)."""

    mat: np.ndarray

    def __post_init__(self):
        m = np.array(self.mat, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("matrix entries must be finite")
        d = m.shape[0]
        scale = max(1.0, float(np.abs(m).max()))
        if abs(np.linalg.det(m)) <= DET_RTOL * scale**d:
            raise SingularMatrixError("matrix is singular within tolerance 1e-12")
        m.setflags(write=False)
        object.__setattr__(self, "mat", m)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.mat)

    def __matmul__(self, other: "SquareMatrix") -> "SquareMatrix":
        return SquareMatrix(self.mat @ other.mat)


@dataclass(frozen=True)
class ProjectivePoint:
    """A line through the origin, stored as a canonical unit representative."""

    vec: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = canonical_unit(self.vec)
        v.setflags(write=False)
        object.__setattr__(self, "vec", v)

    @property
    def dim(self) -> int:
        return self.vec.shape[0]

    @property
    def angle(self) -> float:
        """Angle in [0, pi) for d=2 representatives."""
        if self.dim != 2:
            raise ValueError("angle is only defined for d=2")
        return float(np.arctan2(self.vec[1], self.vec[0]) % np.pi)

    @classmethod
    def from_angle(cls, theta: float) -> "ProjectivePoint":
        return cls(np.array([np.cos(theta), np.sin(theta)]))

    def __repr__(self):  # short, deterministic
        return f"ProjectivePoint({np.array2string(self.vec, precision=6)})"


class DualPoint(ProjectivePoint):
    """A hyperplane direction: unit functional in dual-basis coordinates."""

    def __repr__(self):
        return f"DualPoint({np.array2string(self.vec, precision=6)})"


def act(g: SquareMatrix, x: ProjectivePoint) -> ProjectivePoint:
    """Projective action x -> line through g v."""
    return ProjectivePoint(g.mat @ x.vec)


def cocycle(g: SquareMatrix, x: ProjectivePoint) -> float:
    """Norm cocycle log(||g v|| / ||v||) for the unit representative of x."""
    return float(np.log(np.linalg.norm(g.mat @ x.vec)))


def delta(y: DualPoint, x: ProjectivePoint) -> float:
    """Alignment |<f, v>| / (||f|| ||v||) in [0, 1]; zero means f annihilates v."""
    return float(abs(np.dot(y.vec, x.vec)))


def angular_distance(x: ProjectivePoint, xp: ProjectivePoint) -> float:
    """||v ^ v'|| / (||v|| ||v'||): for d=2 this is |sin| of the angle between lines.

    Computed from the wedge minors themselves; the Gram form sqrt(1 - <v,w>^2)
    loses half the precision near parallel lines and can break the triangle
    inequality at the 1e-12 scale.
    """
    v, w = x.vec, xp.vec
    if v.shape[0] == 2:
        return float(abs(v[0] * w[1] - v[1] * w[0]))
    skew = np.outer(v, w)
    skew = skew - skew.T
    return float(np.sqrt(0.5) * np.linalg.norm(skew))


def coefficient_log(f: DualPoint, g: SquareMatrix, v: ProjectivePoint) -> float:
    """log |<f, g v>| computed directly.

    Equals cocycle(g, x) + log delta(f, g.x) whenever the alignment is not
    degenerate.  Returns -inf when |<f, g v>| falls below 1e-300; callers
    treat that event as measure zero.
    """
    gv = g.mat @ v.vec
    nrm = np.linalg.norm(gv)
    pairing = abs(float(np.dot(f.vec, gv))) / nrm
    if pairing < DELTA_FLOOR:
        return float("-inf")
    return float(np.log(pairing) + np.log(nrm))


def singular_values_2x2(m: np.ndarray) -> tuple[float, float]:
    """Closed-form singular values (s_max, s_min) of a 2x2 matrix."""
    a, b = m[0]
    c, d = m[1]
    t = a * a + b * b + c * c + d * d
    det = a * d - b * c
    disc = max(0.0, t * t - 4.0 * det * det)
    root = np.sqrt(disc)
    smax = np.sqrt(max(0.0, (t + root) / 2.0))
    smin = np.sqrt(max(0.0, (t - root) / 2.0))
    return float(smax), float(smin)


def operator_norm(m: np.ndarray) -> float:
    """Largest singular value; closed form for 2x2, LAPACK otherwise."""
    m = np.asarray(m, dtype=float)
    if m.shape == (2, 2):
        return singular_values_2x2(m)[0]
    return float(np.linalg.svd(m, compute_uv=False)[0])


def matrix_gauge(g: SquareMatrix) -> float:
    """max(||g||, ||g^-1||), always >= 1 for invertible g."""
    if g.dim == 2:
        smax, smin = singular_values_2x2(g.mat)
        return max(smax, 1.0 / smin)
    sv = np.linalg.svd(g.mat, compute_uv=False)
    return float(max(sv[0], 1.0 / sv[-1]))


# -- vectorized d=2 circle kinematics (hot path for operators and samplers) --

def angles_act(m: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Angles in [0, pi) of g.x for lines x at the given angles."""
    c, s = np.cos(theta), np.sin(theta)
    u = m[0, 0] * c + m[0, 1] * s
    w = m[1, 0] * c + m[1, 1] * s
    return np.arctan2(w, u) % np.pi


def angles_cocycle(m: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Norm cocycle sigma(g, x) for lines x at the given angles."""
    c, s = np.cos(theta), np.sin(theta)
    u = m[0, 0] * c + m[0, 1] * s
    w = m[1, 0] * c + m[1, 1] * s
    return 0.5 * np.log(u * u + w * w)
