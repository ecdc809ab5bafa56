"""Finite-support matrix laws, samplers and standing-condition probes.

A law is a finite list of invertible atoms with strictly positive weights
summing to one.  The moment and irreducibility/proximality checks are
bounded searches: a found witness proves the property (or its failure),
while exhausting the budget is reported as inconclusive, never as a
disproof.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from .projective import ProjectivePoint, SquareMatrix, act, matrix_gauge

WEIGHT_TOL = 1e-12

__all__ = [
    "MatrixLaw",
    "sample",
    "sample_indices",
    "check_moment",
    "check_proximality",
    "check_strong_irreducibility",
    "ProximalityVerdict",
    "IrreducibilityVerdict",
    "law_to_json",
    "law_from_json",
    "preset",
    "PRESET_NAMES",
]


@dataclass(frozen=True)
class MatrixLaw:
    atoms: tuple[SquareMatrix, ...]
    weights: np.ndarray

    def __post_init__(self):
        if not self.atoms:
            raise ValueError("law needs at least one atom")
        dims = {a.dim for a in self.atoms}
        if len(dims) != 1:
            raise ValueError("all atoms must have the same dimension")
        w = np.array(self.weights, dtype=float)
        if w.shape != (len(self.atoms),):
            raise ValueError("one weight per atom required")
        if np.any(w <= 0.0):
            raise ValueError("weights must be strictly positive")
        if abs(w.sum() - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1 within 1e-12")
        w.setflags(write=False)
        object.__setattr__(self, "atoms", tuple(self.atoms))
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.atoms[0].dim

    @property
    def size(self) -> int:
        return len(self.atoms)

    @property
    def matrices(self) -> np.ndarray:
        """Stacked (size, d, d) array of atom entries."""
        return np.stack([a.mat for a in self.atoms])


def sample_indices(law: MatrixLaw, rng: np.random.Generator, size: int) -> np.ndarray:
    """Vectorized atom-index draws: index i with probability weights[i]."""
    edges = np.cumsum(law.weights)
    return np.searchsorted(edges, rng.random(size), side="right").clip(0, law.size - 1)


def sample(law: MatrixLaw, rng: np.random.Generator) -> SquareMatrix:
    return law.atoms[int(sample_indices(law, rng, 1)[0])]


def check_moment(law: MatrixLaw, eps: float) -> float:
    """Weighted moment sum_i w_i N(g_i)^eps; finite by construction, reported for the record."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return float(sum(w * matrix_gauge(a) ** eps for a, w in zip(law.atoms, law.weights)))


@dataclass(frozen=True)
class ProximalityVerdict:
    proximal: bool
    word: tuple[int, ...] | None = None
    ratio: float | None = None

    def __bool__(self):
        return self.proximal


def check_proximality(law: MatrixLaw, max_word_len: int, gap_tol: float = 1e-6,
                      max_words: int = 200_000) -> ProximalityVerdict:
    """Search atom products up to the given length for a proximal witness.

    A witness word has a simple dominant eigenvalue with modulus ratio
    above 1 + gap_tol.  No witness within budget means inconclusive
    (proximal=False), not a disproof.
    """
    if max_word_len < 1:
        raise ValueError("max_word_len must be >= 1")
    mats = law.matrices
    seen = 0
    for length in range(1, max_word_len + 1):
        for word in itertools.product(range(law.size), repeat=length):
            seen += 1
            if seen > max_words:
                return ProximalityVerdict(False)
            prod = mats[word[0]]
            for idx in word[1:]:
                prod = mats[idx] @ prod
            ev = np.sort(np.abs(np.linalg.eigvals(prod)))[::-1]
            if ev[0] > (1.0 + gap_tol) * ev[1]:
                return ProximalityVerdict(True, word, float(ev[0] / ev[1]))
    return ProximalityVerdict(False)


@dataclass(frozen=True)
class IrreducibilityVerdict:
    status: str  # "passes" or "fails"
    m: int
    witness: tuple[float, ...] | None = None  # angles of an invariant union, if found

    def __bool__(self):
        return self.status == "passes"


def _real_eigendirections(m: np.ndarray) -> list[float]:
    """Angles in [0, pi) of real eigendirections of a 2x2 matrix."""
    vals, vecs = np.linalg.eig(m)
    out = []
    for k in range(2):
        if abs(vals[k].imag) < 1e-12:
            v = vecs[:, k].real
            if np.linalg.norm(v) > 1e-12:
                out.append(float(np.arctan2(v[1], v[0]) % np.pi))
    return out


def check_strong_irreducibility(law: MatrixLaw, max_word_len: int, m: int,
                                tol: float = 1e-9) -> IrreducibilityVerdict:
    """Search for a finite invariant union of at most m lines (d=2 only).

    Candidate lines are real eigendirections of short words; each candidate
    orbit is closed under all atoms or grown past m.  A closed orbit of size
    <= m proves failure; otherwise the law passes at this budget.
    """
    if law.dim != 2:
        raise ValueError("strong-irreducibility search implemented for d=2 only")
    if m < 1:
        raise ValueError("m must be >= 1")
    mats = law.matrices

    candidates: list[float] = []
    for length in range(1, max_word_len + 1):
        for word in itertools.product(range(law.size), repeat=length):
            prod = mats[word[0]]
            for idx in word[1:]:
                prod = mats[idx] @ prod
            candidates.extend(_real_eigendirections(prod))

    def _close(angle: float, bag: list[float]) -> bool:
        return any(min(abs(angle - b), np.pi - abs(angle - b)) < tol for b in bag)

    for start in candidates:
        orbit = [start]
        frontier = [start]
        closed = True
        while frontier:
            theta = frontier.pop()
            x = ProjectivePoint.from_angle(theta)
            for atom in law.atoms:
                image = act(atom, x).angle
                if not _close(image, orbit):
                    if len(orbit) >= m:
                        closed = False
                        frontier = []
                        break
                    orbit.append(image)
                    frontier.append(image)
        if closed:
            return IrreducibilityVerdict("fails", m, tuple(sorted(orbit)))
    return IrreducibilityVerdict("passes", m)


# -- JSON wire format: {"dim": 2, "atoms": [{"m": [[..],[..]], "w": 0.5}, ...]} --

def law_to_json(law: MatrixLaw) -> str:
    payload = {
        "dim": law.dim,
        "atoms": [{"m": a.mat.tolist(), "w": float(w)} for a, w in zip(law.atoms, law.weights)],
    }
    return json.dumps(payload, indent=2)


def law_from_json(text: str | dict) -> MatrixLaw:
    payload = json.loads(text) if isinstance(text, str) else text
    dim = int(payload["dim"])
    atoms, weights = [], []
    for entry in payload["atoms"]:
        mat = SquareMatrix(np.array(entry["m"], dtype=float))
        if mat.dim != dim:
            raise ValueError("atom dimension disagrees with declared dim")
        atoms.append(mat)
        weights.append(float(entry["w"]))
    return MatrixLaw(tuple(atoms), np.array(weights))


def attracting_direction(law: MatrixLaw, max_word_len: int = 6) -> ProjectivePoint | None:
    """Dominant eigendirection of a proximal witness word (d=2).

    Attracting fixed directions of semigroup elements lie in the support of
    the stationary measure, so this is the right place to aim alignment
    probes; None when no witness is found (isometric laws).
    """
    if law.dim != 2:
        raise ValueError("implemented for d=2 only")
    verdict = check_proximality(law, max_word_len)
    if not verdict:
        return None
    mats = law.matrices
    prod = mats[verdict.word[0]]
    for idx in verdict.word[1:]:
        prod = mats[idx] @ prod
    vals, vecs = np.linalg.eig(prod)
    dom = vecs[:, int(np.argmax(np.abs(vals)))].real
    return ProjectivePoint(dom)


def _rotation(angle: float, scale: float = 1.0) -> SquareMatrix:
    c, s = np.cos(angle), np.sin(angle)
    return SquareMatrix(scale * np.array([[c, -s], [s, c]]))


def _presets() -> dict:
    e = float(np.e)
    return {
        # two unipotent SL(2,R) generators; strongly irreducible and proximal
        "sl2_pair": MatrixLaw(
            (SquareMatrix(np.array([[1.0, 1.0], [0.0, 1.0]])),
             SquareMatrix(np.array([[1.0, 0.0], [1.0, 1.0]]))),
            np.array([0.5, 0.5]),
        ),
        # scalar-times-rotation atoms: the growth separates from the angular motion,
        # giving the closed form kappa(s) = E|c|^s = cosh(s) for c in {e, 1/e}
        "diag_rot": MatrixLaw(
            (_rotation(0.9, scale=e), _rotation(2.2, scale=1.0 / e)),
            np.array([0.5, 0.5]),
        ),
        # deliberately reducible: the pair of coordinate axes is invariant
        "diagonal": MatrixLaw(
            (SquareMatrix(np.diag([2.0, 0.5])), SquareMatrix(np.diag([1.0 / 3.0, 3.0]))),
            np.array([0.5, 0.5]),
        ),
        # isometric laws for degenerate-direction tests; three incommensurate
        # angles so the n-step angle law fills a two-parameter lattice and
        # equidistributes at usable n
        "rotation": MatrixLaw(
            (_rotation(1.0), _rotation(np.sqrt(2.0)), _rotation(np.sqrt(3.0))),
            np.array([1.0, 1.0, 1.0]) / 3.0,
        ),
        "rotation_rational": MatrixLaw(
            (_rotation(np.pi / 3.0),),
            np.array([1.0]),
        ),
    }


PRESET_NAMES = tuple(sorted(_presets()))


def preset(name: str) -> MatrixLaw:
    table = _presets()
    if name not in table:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}")
    return table[name]
