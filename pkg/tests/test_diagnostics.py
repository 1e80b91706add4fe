import math

import numpy as np
import pytest

from coag.diagnostics import (
    DiagnosticsObserver, distance_to_shift, fibre_distances, lambda_of, lyapunov, lyapunov_ode_check,
    lyapunov_terms, min_distance_over_shifts, mu_of, recurrence_distance, theorem1_distance, trace_matrix,
)
from coag.fibre import FibreBundle, evolve_bundle, init_fibre


def _bundle(h0, p, q=16, k_min=-50):
    th = (np.arange(q) + 0.5) / q
    return FibreBundle.from_states([init_fibre(h0, t, k_min, 14, p) for t in th])


def test_lambda_of(p0):
    assert lambda_of(1.0, p0) == 0.0
    assert lambda_of(2.0, p0) == pytest.approx(1.0)
    assert lambda_of(0.0, p0) is None
    with pytest.raises(ValueError):
        lambda_of(-1.0, p0)


def test_stationary_has_zero_lyapunov(p0, prof0):
    s = init_fibre(lambda x: prof0(np.asarray(x) - 0.4, warn=False), 0.25, -47, 14, p0)
    assert lyapunov(s, prof0) < 1e-13


def test_dist_is_twice_L_when_masses_agree(p0, prof0):
    h0 = lambda x: prof0(np.asarray(x), warn=False) * (1 + 0.3 * np.sin(2 * np.pi * np.asarray(x) / 3))
    b = _bundle(h0, p0, 8)
    lam = np.log(b.m0) / p0.alpha
    bar = trace_matrix(prof0, b.k, lam, b.psi())
    t = lyapunov_terms(b.phi, bar, b.k, p0)
    # masses agree to the lattice-sum accuracy of hbar
    np.testing.assert_allclose(t["mass"], t["trace_mass"], rtol=1e-9)
    np.testing.assert_allclose(t["dist"], 2 * t["L"], rtol=0, atol=1e-9)


def test_jump_relation_and_monotone_lyapunov(p0, prof0):
    h0 = lambda x: 0.5 * prof0(np.asarray(x), warn=False) + 0.5 * prof0(np.asarray(x) - 2, warn=False)
    b = _bundle(h0, p0, 8)
    samples = evolve_bundle(b, 6.0, observe=DiagnosticsObserver(prof0))
    pre = [s for s in samples if s.tag == "pre_jump"]
    post = [s for s in samples if s.tag == "post_jump"]
    for a, c in zip(pre, post):
        np.testing.assert_allclose(a.data["L"], math.exp(p0.alpha) * c.data["L"], rtol=1e-9)
    seq = {}
    for s in post:
        for r, L in zip(s.rows, s.data["L"]):
            seq.setdefault(int(r), []).append(L)
    for v in seq.values():
        assert np.all(np.diff(v) <= 1e-12)


def test_lyapunov_ode_between_jumps(p0, prof0):
    h0 = lambda x: prof0(np.asarray(x) - 1, warn=False) * (1 + 0.2 * np.sin(2 * np.pi * np.asarray(x)))
    # theta = 3/4 carries the largest modulation; its first jump is at t = 3/4
    b = FibreBundle.from_states([init_fibre(h0, 0.75, -47, 14, p0)])
    samples = evolve_bundle(b, 0.75 - 2.0**-6, observe=DiagnosticsObserver(prof0), sample_dt=2.0**-6)
    grid = [s for s in samples if s.tag in ("start", "grid", "end")]
    t = np.array([s.t for s in grid])
    L = np.array([s.data["L"][0] for s in grid])
    D = np.array([s.data["D"][0] for s in grid])
    res = lyapunov_ode_check(t, L, D, p0.alpha)
    assert res["p90"] < 1e-3


def test_per_fibre_distance_bounded_by_2m0(p0, prof0):
    h0 = lambda x: np.exp(-(np.asarray(x) - 1.0) ** 2)
    b = _bundle(h0, p0, 16)
    d = fibre_distances(b, prof0)
    assert np.all(d <= 2 * b.m0 + 1e-12)


def test_theorem1_distance_equals_integral(p0, prof0):
    # for single-shift data the distance to the right shift vanishes, and to another shift matches quadrature
    h0 = lambda x: prof0(np.asarray(x) - 0.5, warn=False)
    b = _bundle(h0, p0, 256)
    assert theorem1_distance(b, prof0) < 1e-12
    x = np.arange(-45, 12, 2.0**-10)
    f = np.exp(p0.alpha * x) * np.abs(prof0(x - 0.5, warn=False) - prof0(x - 0.2, warn=False))
    ref = float(np.trapezoid(f, x))
    assert distance_to_shift(b, prof0, 0.2) == pytest.approx(ref, rel=1e-3)
    lam, d = min_distance_over_shifts(b, prof0, np.linspace(0, 1, 11))
    assert lam == pytest.approx(0.5) and d < 1e-12


def test_vacuous_fibre_counts_its_mass(p0, prof0):
    h0 = lambda x: np.where(np.asarray(x) > 100, 1.0, 0.0)
    b = _bundle(h0, p0, 4)
    assert np.all(b.m0 == 0)
    assert theorem1_distance(b, prof0) == 0.0


def test_recurrence_distance_zero_for_identical(p0):
    phi = np.random.default_rng(0).random((4, 10))
    assert recurrence_distance(phi, phi, np.arange(10), np.zeros(4), p0) == 0.0


def test_mu_of(p0):
    m0 = lambda th: 2.0 * (1 + 0.5 * np.sin(2 * np.pi * th))
    assert mu_of(0.0, 0.25, m0, p0) == pytest.approx(math.log(3.0) / p0.alpha)
    assert mu_of(0.5, 0.0, m0, p0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        mu_of(0.0, 0.75, lambda th: 0.0 * th, p0)
