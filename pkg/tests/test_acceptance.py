"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The Monte Carlo criteria run at a million paths by default (10-20 minutes on
two cores); pass --acceptance-paths to scale them down for smoke runs.
"""

import math
import time

import numpy as np
import pytest

import mdrw
from mdrw import smoothing as sm
from mdrw.cli import probe_functional
from mdrw.transfer import (decay_profile, dominant_eigen_complex,
                           fit_exponential_decay, perturbed_matrix,
                           transfer_matrix)

from conftest import loglinear_fit, record_criterion

X, Y = mdrw.default_directions(2)


@pytest.fixture(scope="module")
def mc_budget(pytestconfig):
    return {"paths": pytestconfig.getoption("--acceptance-paths"),
            "threads": pytestconfig.getoption("--acceptance-threads")}


@pytest.fixture(scope="module")
def tail_estimates(sl2_bundle, mc_budget):
    """Shared tilted ensembles for criteria 6-8: one simulation per (t, tail),
    all targets evaluated on it."""
    law, grid, cd = sl2_bundle["law"], sl2_bundle["grid"], sl2_bundle["cd"]
    spec0, wide = sl2_bundle["spec0"], sl2_bundle["wide"]
    n = 1000
    phi_vals = 1.0 + 0.5 * np.cos(2.0 * grid.thetas)
    out = {"n": n, "nu_phi": float(spec0.nu @ phi_vals), "runtime": 0.0}
    t0 = time.time()
    for tail in ("upper", "lower"):
        for i, t in enumerate((0.0, 0.5, 1.0, 1.5, 2.0, 2.5)):
            s = 0.0 if t == 0.0 else mdrw.solve_saddle(wide, t, n, tail)
            spec = spec0 if s == 0.0 else mdrw.spectral_data(law, s, grid,
                                                             nu0=spec0.nu)
            seed = 7000 + 100 * i + (0 if tail == "upper" else 1)
            paths = mdrw.simulate_tilted(law, spec, n, X, Y, mc_budget["paths"],
                                         seed, threads=mc_budget["threads"])
            out[(t, tail, "const")] = mdrw.estimate_tail(
                law, spec, cd, None, t, n, 0, 0, tail=tail, paths=paths)
            out[(t, tail, "phi")] = mdrw.estimate_tail(
                law, spec, cd, phi_vals, t, n, 0, 0, tail=tail, paths=paths)
            if tail == "upper" and t in (0.0, 1.0, 2.0):
                out[(t, "llt")] = mdrw.estimate_interval(
                    law, spec, cd, None, t, n, -1.0, 1.0, 0, 0, paths=paths)
            del paths
    out["runtime"] = time.time() - t0
    return out


def test_criterion_1_exact_tilting_identity(grid512):
    started = time.time()
    rng = np.random.default_rng(0)
    worst = 0.0
    for name in ("sl2_pair", "diag_rot"):
        law = mdrw.preset(name)
        guesses = [np.full(512, 2.0), 0.5 + rng.random(512), 0.2 + rng.random(512)]
        for n in range(1, 7):
            for r_guess in guesses:
                disc = mdrw.verify_change_of_measure(law, 0.3, r_guess, grid512, n, X)
                worst = max(worst, disc)
    elapsed = time.time() - started
    ok = worst < 1e-12 and elapsed < 10.0
    record_criterion(1, "exact tilting identity, arbitrary positive guide",
                     ok, f"max discrepancy {worst:.2e}, {elapsed:.1f}s")
    assert worst < 1e-12
    assert elapsed < 10.0


def test_criterion_2_spectral_sanity(sl2_bundle):
    started = time.time()
    law, grid = sl2_bundle["law"], sl2_bundle["grid"]
    spec0, cd = sl2_bundle["spec0"], sl2_bundle["cd"]
    kappa0_err = abs(spec0.kappa - 1.0)
    r0_err = float(np.max(np.abs(spec0.r - 1.0)))
    duality = 0.0
    for s in (-0.3, 0.0, 0.3):
        op = transfer_matrix(law, s, grid)
        kappa, r, nu = mdrw.dominant_eigen(op)
        duality = max(duality, float(np.max(np.abs(nu @ op - kappa * nu)) / kappa))
    convex = bool(np.all(np.diff(cd.stencil_lambda, 2) >= -1e-8))
    elapsed = time.time() - started
    ok = kappa0_err < 1e-8 and r0_err < 1e-6 and duality < 1e-8 and convex
    record_criterion(2, "spectral sanity at N=512", ok,
                     f"|kappa0-1| {kappa0_err:.1e}, |r0-1| {r0_err:.1e}, "
                     f"duality {duality:.1e}, convex {convex}, {elapsed:.1f}s")
    assert kappa0_err < 1e-8
    assert r0_err < 1e-6
    assert duality < 1e-8
    assert convex
    assert elapsed < 30.0


def test_criterion_3_scalar_reduction_oracle(grid512):
    started = time.time()
    law = mdrw.preset("diag_rot")
    cd, _ = mdrw.cumulant_pipeline(law, s0=0.5, n_stencil=33, grid=grid512)
    target = np.array([0.0, 1.0, 0.0, -2.0])
    gamma_err = float(np.max(np.abs(cd.gamma[:4] - target)))
    zeta_err = max(abs(mdrw.cramer_zeta(cd, t) - (-t / 12.0))
                   for t in np.linspace(-0.3, 0.3, 13))
    elapsed = time.time() - started
    ok = gamma_err < 1e-4 and zeta_err < 1e-4 and elapsed < 60.0
    record_criterion(3, "scalar-reduction cumulants and series", ok,
                     f"max gamma err {gamma_err:.2e}, max zeta err {zeta_err:.2e}, "
                     f"{elapsed:.1f}s")
    assert gamma_err < 1e-4
    assert zeta_err < 1e-4
    assert elapsed < 60.0


def test_criterion_4_saddle_consistency(sl2_bundle, diag_bundle):
    wide = sl2_bundle["wide"]
    worst_resid = 0.0
    for cd, taus in ((wide, (0.02, 0.05, 0.1)), (diag_bundle["cd"], (0.05, 0.1, 0.2))):
        for tau in taus:
            for n in (400, 10_000):
                t = tau * math.sqrt(n)
                for tail in ("upper", "lower"):
                    if tail == "lower" and cd is wide and tau > 0.05:
                        continue  # negative branch certified only to -0.8
                    s = mdrw.solve_saddle(cd, t, n, tail)
                    target = (1 if tail == "upper" else -1) * cd.sigma * t / math.sqrt(n)
                    resid = abs(float(cd.dlam(s) - cd.dlam(0.0)) - target)
                    worst_resid = max(worst_resid, resid)
    # quartic constant stable across n at fixed tau (skewed law keeps it alive)
    cs = []
    for n in (400, 10_000, 250_000):
        t = 0.1 * math.sqrt(n)
        diff = abs(mdrw.saddle_series(wide, t, n) - mdrw.solve_saddle(wide, t, n))
        cs.append(diff / 0.1 ** 4)
    stable = max(cs) < 2.0 * min(cs) + 1e-9
    ok = worst_resid < 1e-12 and stable
    record_criterion(4, "saddle equation solved to 1e-12; series root quartic", ok,
                     f"max residual {worst_resid:.1e}, C range "
                     f"[{min(cs):.3g}, {max(cs):.3g}]")
    assert worst_resid < 1e-12
    assert stable


@pytest.mark.parametrize("preset_name", ["diag_rot", "sl2_pair"])
def test_criterion_5_rate_identity(preset_name, sl2_bundle, diag_bundle):
    # |s lam'(s) - lam(s) - [t^2/2n - (t^3/n^{3/2}) zeta(t/sqrt n)]| < 1e-3 t^2/n
    # for t/sqrt(n) <= 0.2.  KNOWN RED for sl2_pair at tau >~ 0.15: the series
    # is pinned to the printed three-term truncation (the scalar oracle check
    # depends on exactly that), and this law's next series coefficient is O(1)
    # because of its small variance, so the truncation error ~ zeta_3 tau^6
    # overtakes the tolerance.  Measured on a certified wide fit: the full
    # correction at tau=0.2 is -0.9576 vs the truncated -0.9393, i.e. the
    # next coefficient is ~ -2.3 and the gap crosses 1e-3 t^2/n at tau ~ 0.148.
    cd = diag_bundle["cd"] if preset_name == "diag_rot" else sl2_bundle["wide"]
    n = 1_000_000  # pure-formula check: large n keeps t integral-free
    rows = []
    ok = True
    for tau in (0.02, 0.05, 0.08, 0.11, 0.14, 0.17, 0.2):
        t = tau * math.sqrt(n)
        s = mdrw.solve_saddle(cd, t, n, "upper")
        gap = abs(mdrw.rate_value(cd, s) - mdrw.rate_rhs(cd, t, n, "upper"))
        tol = 1e-3 * t * t / n
        rows.append((tau, gap, tol, gap < tol))
        ok &= gap < tol
    detail = ", ".join(f"tau={r[0]:.2f} {'ok' if r[3] else 'VIOLATED'}" for r in rows)
    record_criterion(5, f"rate identity on {preset_name}", ok, detail)
    if not ok:
        worst = max(r[1] / r[2] for r in rows)
        record_criterion(5, f"rate identity on {preset_name}: unattainable as "
                            "stated (zeta truncation pinned by criterion 3)",
                         False, f"worst overshoot {worst:.1f}x tolerance")
    assert ok, (f"rate identity violated on {preset_name}: {rows}; this is the "
                "documented zeta-truncation infeasibility for small-variance laws")


def _band_check(num, name, estimates, lo, hi):
    ok = True
    details = []
    for label, est, theory in estimates:
        ratio = est.estimate / theory
        ok &= lo <= ratio <= hi and est.reliable
        details.append(f"{label} ratio {ratio:.3f}")
    record_criterion(num, name, ok, "; ".join(details))
    return ok


def test_criterion_6_mde_reproduction(sl2_bundle, tail_estimates):
    cd, n = sl2_bundle["cd"], tail_estimates["n"]
    entries = []
    for tail in ("upper", "lower"):
        for t in (0.0, 0.5, 1.0, 1.5, 2.0, 2.5):
            est = tail_estimates[(t, tail, "const")]
            theory = mdrw.mde_theoretical(cd, t, n, tail)
            entries.append((f"{tail[0]}{t:.1f}", est, theory))
    ok = _band_check(6, "tail expansion at n=1000, both tails", entries, 0.8, 1.2)
    # MC-noise gate where the systematic error is smallest
    for tail in ("upper", "lower"):
        est = tail_estimates[(0.0, tail, "const")]
        theory = mdrw.mde_theoretical(cd, 0.0, n, tail)
        rel_se = est.stderr / theory
        assert abs(est.estimate / theory - 1.0) <= max(4.0 * rel_se, 0.05)
    assert ok, "tail ratio left the [0.8, 1.2] band"
    print(f"criterion 6-8 shared simulation time: {tail_estimates['runtime']:.0f}s")


def test_criterion_7_llt_reproduction(sl2_bundle, tail_estimates):
    cd, n = sl2_bundle["cd"], tail_estimates["n"]
    entries = []
    for t in (0.0, 1.0, 2.0):
        est = tail_estimates[(t, "llt")]
        theory = mdrw.llt_theoretical(cd, t, n, -1.0, 1.0)
        entries.append((f"t={t:.0f}", est, theory))
    ok = _band_check(7, "window law at n=1000 on [-1, 1]", entries, 0.8, 1.2)
    assert ok, "window ratio left the [0.8, 1.2] band"


def test_criterion_8_target_function_variant(sl2_bundle, tail_estimates):
    cd, n = sl2_bundle["cd"], tail_estimates["n"]
    nu_phi = tail_estimates["nu_phi"]
    entries = []
    for tail in ("upper", "lower"):
        for t in (0.0, 0.5, 1.0, 1.5, 2.0, 2.5):
            est = tail_estimates[(t, tail, "phi")]
            theory = nu_phi * mdrw.mde_theoretical(cd, t, n, tail)
            entries.append((f"{tail[0]}{t:.1f}", est, theory))
    ok = _band_check(8, "tail expansion with a nonconstant target", entries,
                     0.75, 1.25)
    assert ok, "target-weighted ratio left the [0.75, 1.25] band"


def test_criterion_9_regularity_decay(sl2_bundle, mc_budget):
    law, grid = sl2_bundle["law"], sl2_bundle["grid"]
    spec0 = sl2_bundle["spec0"]
    y = probe_functional(law)
    paths = min(mc_budget["paths"], 200_000)
    ok = True
    details = []
    for s in (-0.1, 0.0, 0.1):
        spec = spec0 if s == 0.0 else mdrw.spectral_data(law, s, grid, nu0=spec0.nu)
        probe = mdrw.regularity_probe(law, spec, 50, X, y, 0.5, 12, paths,
                                      seed=5, threads=mc_budget["threads"])
        ks = [k for k, _ in probe[1:]]
        ps = [p for _, p in probe[1:]]
        if min(ps) <= 0.0:
            ok = False
            details.append(f"s={s:+.1f} empty tail")
            continue
        slope, r2 = loglinear_fit(ks, ps)
        ok &= slope < -0.05 and r2 > 0.9
        details.append(f"s={s:+.1f} slope {slope:.3f} r2 {r2:.3f}")
    record_criterion(9, "alignment tail decays exponentially under the tilt",
                     ok, "; ".join(details))
    assert ok


def test_criterion_10_gadget_suite():
    kernel = sm.make_kernel(0.1)
    fourier_ok = True
    for u in (0.0, 0.7, 3.0, 9.0):
        num = sm.fourier_quadrature(kernel.density, u, -60.0, 60.0, 400001)
        fourier_ok &= abs(num - kernel.transform(u)) < 1e-6
    for u in (0.0, 1.0, 17.0):
        closed = complex(sm.psi_minus_hat(0.1, 0.05, u))
        num = sm.fourier_quadrature(lambda w: sm.psi_minus(0.1, 0.05, w),
                                    u, 0.05, 250.0, 800001)
        fourier_ok &= abs(closed - num) < 1e-6
        closed = complex(sm.phi_plus_hat(-0.1, 0.05, u))
        num = sm.fourier_quadrature(lambda w: sm.phi_plus(-0.1, 0.05, w),
                                    u, -250.0, 0.05, 800001)
        fourier_ok &= abs(closed - num) < 1e-6

    w_grid = np.linspace(-3.0, 4.0, 101)
    c_fits = []
    sandwich_ok = True
    for eps in (0.2, 0.1, 0.05):
        for shape in (sm.indicator_shape(0.0, 1.0), sm.one_sided_exp_shape(0.3)):
            rep = sm.smoothing_sandwich_check(shape, eps, w_grid)
            sandwich_ok &= rep.max_violation <= 1e-6
        c_fits.append(sm.smoothing_sandwich_check(
            sm.indicator_shape(0.0, 1.0), eps, w_grid).c_fit)
    c_decreasing = c_fits[0] >= c_fits[1] >= c_fits[2]

    fam = sm.partition(0.4, 0.8, mdrw.DualPoint.from_angle(2.0))
    rng = np.random.default_rng(12)
    thetas = rng.random(10_000) * np.pi
    neg_log = -np.log(np.maximum(np.abs(np.cos(thetas - 2.0)), 1e-300))
    partition_ok = True
    total = np.zeros_like(neg_log)
    for k in range(60):
        vals = np.asarray(fam.chi_values(k, neg_log))
        total += vals
        live = vals > 1e-14
        if live.any():
            partition_ok &= bool(neg_log[live].min() >= 0.4 * (k - 1) - 1e-12)
            partition_ok &= bool(neg_log[live].max() <= 0.4 * (k + 1) + 1e-12)
    remainder = fam.u_k(60, neg_log)
    partition_ok &= bool(np.max(np.abs(total + remainder - 1.0)) < 1e-12)

    ok = fourier_ok and sandwich_ok and c_decreasing and partition_ok
    record_criterion(10, "analytic gadget suite", ok,
                     f"fourier {fourier_ok}, sandwich {sandwich_ok}, "
                     f"c_fit {['%.4f' % c for c in c_fits]}, partition {partition_ok}")
    assert fourier_ok
    assert sandwich_ok
    assert c_decreasing
    assert partition_ok


def test_criterion_11_perturbation_and_nonarithmetic(sl2_bundle, grid512):
    law, grid, cd = sl2_bundle["law"], sl2_bundle["grid"], sl2_bundle["cd"]
    spec0 = sl2_bundle["spec0"]
    worst = 0.0
    for s in (0.0, 0.1, -0.1):
        spec = spec0 if s == 0.0 else mdrw.spectral_data(law, s, grid, nu0=spec0.nu)
        lamp = float(cd.dlam(s))
        for u in (-0.1, -0.05, -0.02, 0.02, 0.05, 0.1):
            op = perturbed_matrix(law, s, u, grid, spec, lamp)
            lam_hat = dominant_eigen_complex(op, spec.r.astype(complex))
            pred = np.exp(complex(cd.lam(s + 1j * u) - cd.lam(s) - 1j * u * lamp))
            worst = max(worst, abs(lam_hat - pred) / abs(lam_hat))
    norms = decay_profile(law, 0.0, 1.0, grid, spec0, float(cd.dlam(0.0)), 40)
    rate, r2 = fit_exponential_decay(norms, 5, 40)
    rot = mdrw.preset("rotation_rational")
    spec_rot = mdrw.spectral_data(rot, 0.0, grid512)
    norms_rot = decay_profile(rot, 0.0, 1.0, grid512, spec_rot, 0.0, 40)
    rate_rot, _ = fit_exponential_decay(norms_rot, 5, 40)
    lattice_flat = abs(rate_rot) < 1e-6 and float(np.max(np.abs(norms_rot - 1.0))) < 1e-9
    ok = worst < 1e-4 and rate > 0.0 and r2 > 0.95 and lattice_flat
    record_criterion(11, "perturbed eigenvalue identity and decay detection", ok,
                     f"max rel err {worst:.1e}; decay rate {rate:.4f} r2 {r2:.3f}; "
                     f"lattice flat {lattice_flat}")
    assert worst < 1e-4
    assert rate > 0.0
    assert r2 > 0.95
    assert lattice_flat
