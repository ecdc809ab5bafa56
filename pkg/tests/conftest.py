import numpy as np
import pytest

import mdrw

ACCEPTANCE_LINES = []


def pytest_addoption(parser):
    parser.addoption("--acceptance-paths", type=int, default=1_000_000,
                     help="Monte Carlo path count for the acceptance criteria")
    parser.addoption("--acceptance-threads", type=int, default=2)


def record_criterion(num, name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    line = f"CRITERION {num:>2} {status} - {name}"
    if detail:
        line += f" ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def grid512():
    return mdrw.CircleGrid(512)


@pytest.fixture(scope="session")
def sl2_bundle(grid512):
    """Shared spectral pipeline for the sl2 preset: narrow fit + wide tilt fit."""
    law = mdrw.preset("sl2_pair")
    cd, family = mdrw.cumulant_pipeline(law, s0=0.5, n_stencil=33, grid=grid512)
    wide = mdrw.growth_pipeline(law, -0.8, 3.4, grid=grid512)
    return {"law": law, "grid": grid512, "cd": cd, "family": family,
            "spec0": family[0.0], "wide": wide}


@pytest.fixture(scope="session")
def diag_bundle(grid512):
    law = mdrw.preset("diag_rot")
    cd, family = mdrw.cumulant_pipeline(law, s0=0.5, n_stencil=33, grid=grid512)
    return {"law": law, "grid": grid512, "cd": cd, "family": family,
            "spec0": family[0.0]}


def random_invertible(rng, scale=2.0):
    """Well-conditioned random 2x2 matrix for property tests."""
    while True:
        m = rng.uniform(-scale, scale, size=(2, 2))
        if abs(np.linalg.det(m)) > 0.1:
            return mdrw.SquareMatrix(m)


def random_law(rng, n_atoms=2, scale=2.0):
    atoms = tuple(random_invertible(rng, scale) for _ in range(n_atoms))
    w = rng.random(n_atoms) + 0.2
    return mdrw.MatrixLaw(atoms, w / w.sum())


def loglinear_fit(ks, ps):
    """Slope and R^2 of log ps against ks."""
    ks = np.asarray(ks, dtype=float)
    ys = np.log(np.asarray(ps, dtype=float))
    slope, intercept = np.polyfit(ks, ys, 1)
    fitted = slope * ks + intercept
    ss_res = float(np.sum((ys - fitted) ** 2))
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    return float(slope), (1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0)
