"""Acceptance criteria 1-8, each at its stated tolerance.

Every test prints one ``[criterion N] PASS|FAIL`` line to the terminal.
"""

import math
import time

import mpmath
import numpy as np
import pytest

from coag.experiments import ExperimentConfig, midpoint_thetas, run_fibres, run_scenario
from coag.geometry import ModelParams
from coag.initdata import make_initial_data
from coag.profile import _sigma_residual, build_profile, lattice_sum_spread, sigma_root, validate_integral_identity


def report_line(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\n[criterion {n}] {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="module")
def converge_report():
    return run_scenario(ExperimentConfig("converge-constant-m0"), plots=False)


@pytest.fixture(scope="module")
def oscillate_report():
    return run_scenario(ExperimentConfig("oscillate"), plots=False)


@pytest.fixture(scope="module")
def oracle_report():
    return run_scenario(ExperimentConfig("oracle-compare"), plots=False)


def test_criterion_1_stationary_identity(capsys):
    t0 = time.perf_counter()
    prof = build_profile(ModelParams(0.0), dx=2.0**-10)
    res = validate_integral_identity(prof)
    dev, _ = lattice_sum_spread(prof, 64)
    elapsed = time.perf_counter() - t0
    ok = res < 1e-5 and dev < 1e-6 and elapsed < 30
    report_line(capsys, 1, ok, f"identity residual {res:.2e} < 1e-5, lattice deviation {dev:.2e} < 1e-6, {elapsed:.1f}s")
    assert res < 1e-5
    assert dev < 1e-6
    assert elapsed < 30


def _bisection_sigma(alpha, lo=1e-6, hi=40.0):
    # independent oracle: plain bisection at 40 digits
    mpmath.mp.dps = 40
    a = mpmath.mpf(alpha)
    e = mpmath.exp(-a)
    f = lambda s: (1 + mpmath.log(2) * s / a) * (1 - e) - 2 * (1 - e * mpmath.power(2, -s))
    lo, hi = mpmath.mpf(lo), mpmath.mpf(hi)
    assert f(lo) * f(hi) < 0
    for _ in range(200):
        mid = (lo + hi) / 2
        if f(lo) * f(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return float((lo + hi) / 2)


def test_criterion_2_sigma_root(capsys):
    p = ModelParams(0.0)
    s = sigma_root(p)
    res = abs(_sigma_residual(s, p.alpha))
    ref = _bisection_sigma(p.alpha)
    ok = res < 1e-12 and abs(s - ref) < 1e-10
    report_line(capsys, 2, ok, f"sigma={s:.15f}, residual {res:.1e} < 1e-12, |sigma - oracle| {abs(s - ref):.1e} < 1e-10")
    assert res < 1e-12
    assert abs(s - ref) < 1e-10


def test_criterion_3_fibre_conservation(capsys):
    cfg = ExperimentConfig("oscillate", horizon=10.0, fibres=64, dt_max=2.0**-8)
    prof = build_profile(cfg.params)
    init = make_initial_data(cfg.initial_data, prof)
    run = run_fibres(cfg, prof, init, thetas=midpoint_thetas(64))
    ok = run.mass_err < 1e-6 and run.bound_excess <= 1e-12 and run.clamp_max < 1e-10
    report_line(capsys, 3, ok, f"mass law {run.mass_err:.1e} < 1e-6, bound excess {run.bound_excess:.1e} <= 0, "
                               f"clamp {run.clamp_max:.1e} < 1e-10")
    assert run.mass_err < 1e-6
    assert run.bound_excess <= 1e-12
    assert run.clamp_max < 1e-10


def test_criterion_4_lyapunov_structure(capsys, converge_report, oscillate_report):
    mono = max(r.verdict("lyapunov_monotone").value for r in (converge_report, oscillate_report))
    jump = max(r.verdict("lyapunov_jump").value for r in (converge_report, oscillate_report))
    ode = converge_report.verdict("lyapunov_ode_p90").value
    ok = mono <= 1e-12 and jump < 1e-9 and ode < 1e-3
    report_line(capsys, 4, ok, f"max relative increase of L(n+theta) {mono:.1e}, jump relation {jump:.1e} < 1e-9, "
                               f"ODE residual p90 {ode:.1e} < 1e-3")
    assert mono <= 1e-12
    assert jump < 1e-9
    assert ode < 1e-3


def test_criterion_5_convergence_and_oscillation(capsys, converge_report, oscillate_report):
    r_c = converge_report.verdict("distance_ratio").value
    r_mu = oscillate_report.verdict("mu_distance_ratio").value
    margin = oscillate_report.verdict("single_shift_margin").value
    rec = oscillate_report.verdict("recurrence_ratio").value
    ok = r_c < 0.01 and r_mu < 0.01 and margin > 1.0 and rec < 1e-3
    report_line(capsys, 5, ok, f"constant-m0 ratio {r_c:.1e} < 0.01, mu ratio {r_mu:.1e} < 0.01, "
                               f"single-shift/(10 x mu-distance) {margin:.1e} > 1, recurrence {rec:.1e} < 1e-3")
    assert r_c < 0.01
    assert r_mu < 0.01
    assert margin > 1.0
    assert rec < 1e-3


def test_criterion_6_uniqueness(capsys):
    rep = run_scenario(ExperimentConfig("uniqueness"), plots=False)
    unit = rep.verdict("unit_translation").value
    other = rep.verdict("independent_seed_coincide").value
    relax = rep.verdict("perturbed_relaxation").value
    ok = unit < 1e-4 and other < 1e-4 and relax < 0.01
    report_line(capsys, 6, ok, f"unit translation sup {unit:.1e} < 1e-4, independent seed sup {other:.1e} < 1e-4, "
                               f"relaxation ratio {relax:.1e} < 0.01")
    assert unit < 1e-4
    assert other < 1e-4
    assert relax < 0.01


def test_criterion_7_oracle_equivalence(capsys, oracle_report):
    sup = oracle_report.verdict("sup_discrepancy").value
    slope = oracle_report.verdict("refinement_slope").value
    drift = oracle_report.verdict("grid_mass_drift").value
    ok = sup < 5e-3 and 0.8 <= slope <= 1.2 and drift < 1e-3
    report_line(capsys, 7, ok, f"sup discrepancy {sup:.2e} < 5e-3, slope {slope:.3f} in [0.8, 1.2], "
                               f"mass drift {drift:.1e} < 1e-3")
    assert sup < 5e-3
    assert 0.8 <= slope <= 1.2
    assert drift < 1e-3


def test_criterion_8_change_of_variables(capsys, oracle_report):
    rt = oracle_report.verdict("round_trip").value
    mass = oracle_report.verdict("original_mass").value
    collapse = oracle_report.verdict("self_similar_collapse").value
    tol = oracle_report.verdict("sup_discrepancy").tolerance
    ok = rt < 1e-9 and mass < 1e-9 and collapse < tol
    report_line(capsys, 8, ok, f"round trip {rt:.1e} < 1e-9, mass equality {mass:.1e} < 1e-9, "
                               f"collapse {collapse:.2e} < {tol:g}")
    assert rt < 1e-9
    assert mass < 1e-9
    assert collapse < tol
