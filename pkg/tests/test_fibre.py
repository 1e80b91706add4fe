import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from coag.fibre import (
    FibreBundle, FibreError, WindowTooSmall, apply_jump, default_window, evolve, evolve_bundle,
    init_fibre, mass_observer, ode_rhs, step, sup_bound_check, tail_mass,
)
from coag.geometry import ModelParams


def test_rhs_single_entry(p0):
    phi = np.zeros(4)
    phi[0] = 1.0
    r = ode_rhs(phi, p0)
    assert r[0] == pytest.approx(math.log(2) - 1.0, abs=1e-15)
    assert r[1] == pytest.approx(0.5, abs=1e-15)
    assert r[2] == 0.0 and r[3] == 0.0


@given(arrays(float, 12, elements=st.floats(0, 3)), st.floats(-3, 0.9))
@settings(max_examples=100, deadline=None)
def test_rhs_weighted_balance(phi, g):
    # sum_k e^{alpha k} rhs_k = alpha * mass - e^{alpha k_max} phi_{k_max}^2
    p = ModelParams(g)
    w = np.exp(p.alpha * np.arange(phi.size))
    lhs = w @ ode_rhs(phi, p)
    rhs = p.alpha * (w @ phi) - w[-1] * phi[-1] ** 2
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-9 * (1 + w @ phi ** 2))


def test_init_fibre_sampling(p0):
    h0 = lambda x: np.exp(-np.asarray(x) ** 2)
    st_ = init_fibre(h0, 0.25, -40, 10, p0)
    k = np.arange(-40, 11)
    np.testing.assert_array_equal(st_.phi, h0(k + 0.25))
    st0 = init_fibre(h0, 0.0, -40, 10, p0)
    np.testing.assert_array_equal(st0.phi, h0(k + 1.0))
    # m0 is the weighted lattice sum over the points k + theta
    assert st_.m0 == pytest.approx(float(np.sum(np.exp(p0.alpha * (k + 0.25)) * h0(k + 0.25))))


def test_init_rejects_small_window(p0, prof0):
    with pytest.raises(WindowTooSmall) as ei:
        init_fibre(lambda x: prof0(x, warn=False), 0.5, -5, 10, p0)
    assert ei.value.k_min < -40 and ei.value.k_max == 10
    with pytest.raises(WindowTooSmall) as ei:
        init_fibre(lambda x: np.exp(-(np.asarray(x) - 12.0) ** 2), 0.5, -20, 10, p0)
    assert ei.value.k_min == -20 and ei.value.k_max > 14


def test_default_window(p0):
    k_min, k_max = default_window(p0)
    assert math.exp(p0.alpha * k_min) * p0.plateau < 1e-14
    assert math.exp(p0.alpha * (k_min + 1)) * p0.plateau >= 1e-14


def test_step_refuses_to_cross_jump(p0, prof0):
    s = init_fibre(lambda x: prof0(x, warn=False), 0.5, -47, 14, p0)
    # psi(0) = 0.5, next jump at t = 0.5
    with pytest.raises(FibreError):
        step(s, 0.6)
    s2 = step(s, 0.5)
    assert (s2.n, s2.s) == (0, 0.5)
    assert s2.psi == 0.0 or s2.psi == pytest.approx(0.0)


def test_apply_jump_shifts_labels(p0):
    s = init_fibre(lambda x: np.where(np.asarray(x) > 0, 1.0, 0.0) * np.exp(-np.asarray(x) ** 2), 0.5, -10, 10, p0)
    j = apply_jump(s)
    np.testing.assert_array_equal(j.phi[:-1], s.phi[1:])
    assert j.phi[-1] == 0.0 and j.k_min == s.k_min


def test_apply_jump_extends_window_when_left_edge_heavy(p0):
    s = init_fibre(lambda x: np.full_like(np.asarray(x, dtype=float), 0.5), 0.5, -3, 3, p0, check=False)
    with pytest.raises(WindowTooSmall):
        apply_jump(s, extend=False)
    j = apply_jump(s)
    assert j.k_min == s.k_min - 1
    np.testing.assert_array_equal(j.phi[:-1], s.phi)


def test_stationary_fibre_stays_put(p0, prof0):
    lam = 0.3
    h0 = lambda x: prof0(np.asarray(x) - lam, warn=False)
    s = init_fibre(h0, 0.375, -47, 14, p0)
    out, _ = evolve(s, 3.0)
    k = out.k
    trace = prof0(k + 1.0 - out.psi - lam, warn=False)
    assert np.max(np.abs(out.phi - trace)) < 1e-9


def test_theta_zero_trajectory_matches_trace(p0, prof0):
    from coag.profile import fibre_trace

    s = init_fibre(lambda x: prof0(x, warn=False), 0.0, -47, 14, p0)
    b = FibreBundle.from_states([s])
    worst = []

    def obs(bb, tag, rows):
        st_ = bb.states()[0]
        tr = fibre_trace(prof0, 0.0, 0.0, (bb.n, bb.s), bb.k_min, bb.k_min + bb.phi.shape[1] - 1)
        if tag != "pre_jump":
            worst.append(float(np.max(np.abs(st_.phi - tr))))
        return {}

    evolve_bundle(b, 5.0, observe=obs, sample_dt=0.125)
    assert len(worst) > 40 and max(worst) < 1e-6


def test_mass_law_and_bounds_over_T10(p0, prof0):
    h0 = lambda x: prof0(np.asarray(x) - 1.0, warn=False) * (1 + 0.2 * np.sin(2 * np.pi * np.asarray(x)))
    thetas = (np.arange(16) + 0.5) / 16
    b = FibreBundle.from_states([init_fibre(h0, th, -47, 14, p0) for th in thetas])
    samples = evolve_bundle(b, 10.0, 2.0**-8, observe=mass_observer, sample_dt=0.125)
    worst = max(float(np.max(np.abs(s.data["mass"] - s.data["expected"]) / s.data["expected"])) for s in samples)
    assert worst < 1e-6
    assert float(np.max(b.clamp_total)) < 1e-10
    for st_ in b.states():
        assert sup_bound_check(st_, st_.c0)


def test_sup_bound_examples(p0):
    s = init_fibre(lambda x: np.where(np.abs(np.asarray(x)) < 2, 1.0, 0.0), 0.5, -60, 10, p0)
    assert s.c0 == pytest.approx(2 * math.log(2))
    out, _ = evolve(s, 4.0)
    assert sup_bound_check(out, 1.0)
    assert np.max(out.phi) < 2 * math.log(2)
    bad = out.copy()
    bad.phi[:] = 10.0
    assert not sup_bound_check(bad, 1.0)


def test_zero_data_stays_zero(p0):
    s = init_fibre(lambda x: np.zeros_like(np.asarray(x, dtype=float)), 0.5, -20, 5, p0)
    out, _ = evolve(s, 2.0)
    assert not out.phi.any()
    assert out.m0 == 0.0


def test_rho_mode_matches(p0, prof0):
    h0 = lambda x: 0.5 * prof0(np.asarray(x), warn=False) + 0.5 * prof0(np.asarray(x) - 2, warn=False)
    s = init_fibre(h0, 0.3, -47, 14, p0)
    a, _ = evolve(s, 3.0)
    b, _ = evolve(s, 3.0, rho_mode=True)
    assert np.max(np.abs(a.phi - b.phi)) < 1e-8


def test_jumps_land_on_exact_times(p0, prof0):
    s = init_fibre(lambda x: prof0(x, warn=False), 0.3, -47, 14, p0)
    b = FibreBundle.from_states([s])
    seen = []
    evolve_bundle(b, 5.0, 2.0**-8, observe=lambda bb, tag, rows: seen.append((tag, bb.n, bb.s)) or {})
    jumps = [(n, s_) for tag, n, s_ in seen if tag == "pre_jump"]
    assert jumps == [(n, 0.3) for n in range(5)]


def test_tail_mass(p0):
    s = init_fibre(lambda x: np.exp(-np.asarray(x) ** 2), 0.5, -30, 10, p0)
    assert tail_mass(s, 0) == pytest.approx(s.weighted_mass())
    assert tail_mass(s, 100) == 0.0
