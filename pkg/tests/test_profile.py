import math
import warnings

import mpmath
import numpy as np
import pytest

from coag.geometry import ModelParams
from coag.profile import (
    LeftExtensionWarning, ProfileError, _sigma_residual, best_shift, build_profile, export_profile,
    fibre_trace, fit_tail, import_profile, integral_identity_residual, is_monotone, lattice_sum_spread,
    normalize, shoot_profile, sigma_root, validate_integral_identity,
)


def sigma_oracle(gamma):
    # independent: mpmath root of the same scalar equation at 50 digits
    mpmath.mp.dps = 50
    a = (1 - mpmath.mpf(gamma)) * mpmath.log(2)
    e = mpmath.e ** (-a)
    f = lambda s: (1 + mpmath.log(2) * s / a) * (1 - e) - 2 * (1 - e * mpmath.power(2, -s))
    return float(mpmath.findroot(f, (mpmath.mpf("0.5"), mpmath.mpf(40)), solver="anderson"))


@pytest.mark.parametrize("gamma", [0.0, 0.5, -1.0, 0.9, -4.0])
def test_sigma_matches_mpmath(gamma):
    p = ModelParams(gamma)
    s = sigma_root(p)
    assert s > 0
    assert s == pytest.approx(sigma_oracle(gamma), abs=1e-10)
    assert abs(_sigma_residual(s, p.alpha)) < 1e-12


def test_sigma_gamma0_value():
    # (1 + sigma)/2 = 2 - 2^{-sigma} when alpha = ln 2
    s = sigma_root(ModelParams(0.0))
    assert (1 + s) / 2 == pytest.approx(2 - 2.0**-s, abs=1e-13)
    assert s == pytest.approx(2.69, abs=0.005)


def test_profile_invariants(prof0):
    assert validate_integral_identity(prof0) < 1e-5
    dev, std = lattice_sum_spread(prof0, 64)
    assert dev < 1e-6
    mono, strict = is_monotone(prof0)
    assert mono and strict
    assert prof0.mass() == pytest.approx(1.0, abs=1e-9)
    assert np.all(prof0.values >= 0)


def test_profile_gamma_half(prof_half):
    assert validate_integral_identity(prof_half) < 1e-5
    assert lattice_sum_spread(prof_half, 64)[0] < 1e-6
    assert prof_half.plateau == pytest.approx(ModelParams(0.5).plateau)


def test_left_plateau_and_right_decay(prof0):
    P = prof0.plateau
    x = prof0.x_start + 0.5
    assert prof0(x) == pytest.approx(P, rel=1e-6)
    assert prof0(prof0.x_end + 1.0) == 0.0
    # superexponential right tail: ln hbar ~ -C 2^x
    C, L = fit_tail(prof0)
    assert C > 0 and L > 0


def test_left_extension_uses_asymptotics(prof0):
    x = prof0.x0 - 3.0
    with pytest.warns(LeftExtensionWarning):
        v = prof0(x)
    assert v == pytest.approx(prof0.asymptotic(x), rel=1e-15)


def test_rejects_nonpositive_a(p0):
    with pytest.raises(ValueError):
        shoot_profile(p0, a=-1.0)
    with pytest.raises(ValueError):
        shoot_profile(p0, a=0.0)


def test_rejects_seed_outside_asymptotic_regime(p0):
    with pytest.raises(ValueError):
        shoot_profile(p0, a=1.0, x_start=0.0)


def test_identity_residual_detects_perturbation(prof0):
    v = prof0.values.copy()
    i = prof0.i_start + 5 * prof0.steps_per_unit
    v[i] *= 1.01
    assert validate_integral_identity(prof0, values=v) > 1e-3


def test_residual_of_constant_plateau(p0):
    # the plateau is an exact solution of the identity away from edges
    dx = 2.0**-8
    v = np.full(4 * 256 + 1, p0.plateau)
    r = integral_identity_residual(v, -2.0, dx, p0)
    assert np.nanmax(r) < 1e-10


def test_unit_translation_scaling(p0):
    s = sigma_root(p0)
    r1 = shoot_profile(p0, a=1.0)
    r2 = shoot_profile(p0, a=2.0**s)
    x = r2.x[(r2.x + 1 <= r1.x_end) & (r2.x >= r2.x_start) & (r2.x + 1 >= r1.x_start)]
    assert np.max(np.abs(r2(x, warn=False) - r1(x + 1.0, warn=False))) < 1e-4


def test_best_shift_identical_is_zero(prof0):
    L, sup = best_shift(prof0, prof0)
    assert abs(L) < 1e-10 and sup < 1e-12


def test_best_shift_recovers_known_translation(p0, prof0):
    raw = shoot_profile(p0, a=3.0)
    from dataclasses import replace

    moved = replace(raw, x0=raw.x0 + 0.3)
    L, sup = best_shift(normalize(raw), normalize(moved))
    assert sup < 1e-10


def test_normalize_shift_rule(p0):
    raw = shoot_profile(p0, a=1.0)
    n = normalize(raw)
    assert n.shift_applied - raw.shift_applied == pytest.approx(math.log(raw.mass()) / p0.alpha)
    assert n.mass() == pytest.approx(1.0, abs=1e-12)


def test_fibre_trace_conventions(prof0):
    lam = 0.7
    k = np.arange(-3, 4)
    # theta > 0 at t = 0: psi = 1 - theta, points k + theta
    v = fibre_trace(prof0, 0.25, lam, 0.0, -3, 3)
    np.testing.assert_array_equal(v, prof0(k + 0.25 - lam))
    # theta = 0 at t = 0 is a jump time: psi = 0, points k + 1
    v0 = fibre_trace(prof0, 0.0, lam, (0, 0.0), -3, 3)
    np.testing.assert_array_equal(v0, prof0(k + 1.0 - lam))


def test_trace_weighted_sum_half_phase(p0, prof0):
    # theta = 1/2, t = 0: sum_k e^{ak} hbar(k + 1/2) = e^{-a/2}
    v = fibre_trace(prof0, 0.5, 0.0, 0.0, -55, 14)
    k = np.arange(-55, 15)
    assert np.exp(p0.alpha * k) @ v == pytest.approx(math.exp(-p0.alpha / 2), abs=1e-6)


def test_export_import_round_trip(prof0, tmp_path):
    path = export_profile(prof0, tmp_path / "p.csv")
    back = import_profile(path)
    np.testing.assert_array_equal(back.values, prof0.values)
    assert back.x0 == prof0.x0 and back.dx == prof0.dx
    assert back.sigma == prof0.sigma
    x = np.linspace(-5, 3, 101)
    np.testing.assert_allclose(back(x, warn=False), prof0(x, warn=False), rtol=0, atol=1e-14)


def test_build_is_deterministic(p0):
    a = build_profile(p0, dx=2.0**-8)
    b = build_profile(p0, dx=2.0**-8)
    assert np.array_equal(a.values, b.values)
