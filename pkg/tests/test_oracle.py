import math

import numpy as np
import pytest

from coag.fibre import FibreBundle, init_fibre
from coag.geometry import LN2
from coag.oracle import (
    OracleError, compare_with_fibres, evolve_grid, grid_rhs, init_grid, step_grid, to_original_variables,
)

gauss = lambda x: np.exp(-(np.asarray(x) - 1.0) ** 2 / 2.0)


def _transport_error(p, dx):
    g = init_grid(gauss, p, -10.0, 10.0, dx)
    g = evolve_grid(g, 1.0, terms=frozenset({"transport"}))
    return float(np.max(np.abs(g.h - gauss(g.x + 1.0))))


def test_pure_transport_first_order(p0):
    e1 = _transport_error(p0, 2.0**-7)
    e2 = _transport_error(p0, 2.0**-8)
    assert e2 < 2.0**-8
    assert 1.7 < e1 / e2 < 2.3


def test_growth_only_is_exponential(p0):
    g = init_grid(gauss, p0, -5.0, 5.0, 2.0**-6)
    h0 = g.h.copy()
    g = evolve_grid(g, 1.0, terms=frozenset({"growth"}))
    np.testing.assert_allclose(g.h, 2.0 * h0, rtol=1e-9)


def test_mass_drift_small(p0, prof0):
    h0 = lambda x: 0.5 * prof0(x, warn=False) + 0.5 * prof0(np.asarray(x) - 2.0, warn=False)
    g = init_grid(h0, p0, -50.0, 14.0, 2.0**-8)
    m = g.mass()
    g = evolve_grid(g, 5.0)
    assert abs(g.mass() - m) / m < 1e-3


def test_cfl_and_dx_checks(p0):
    g = init_grid(gauss, p0, -5.0, 5.0, 2.0**-6)
    with pytest.raises(OracleError):
        step_grid(g, 2.0**-5)
    bad = init_grid(gauss, p0, -5.0, 5.0, 0.3)
    with pytest.raises(ValueError):
        grid_rhs(bad.h, p0, bad.dx, bad.steps_per_unit)


def test_negative_initial_data_rejected(p0):
    with pytest.raises(ValueError):
        init_grid(lambda x: -gauss(x), p0, -5.0, 5.0, 2.0**-6)


def test_t0_discrepancy_is_zero(p0, prof0):
    h0 = lambda x: prof0(np.asarray(x) - 0.5, warn=False)
    b = FibreBundle.from_states([init_fibre(h0, th, -47, 14, p0) for th in np.arange(8) / 8])
    g = init_grid(h0, p0, -50.0, 14.0, 2.0**-8)
    c = compare_with_fibres(g, b)
    assert c["sup"] == 0.0 and c["points"] > 100


def test_original_variables_mass(p0, prof0):
    g = init_grid(lambda x: prof0(x, warn=False), p0, -50.0, 4.0, 2.0**-8)
    g = evolve_grid(g, 0.5)
    ov = to_original_variables(g)
    assert ov["tau"] == pytest.approx(2.0**0.5)
    assert ov["mass_F"] == pytest.approx(LN2 / p0.alpha * g.mass(), rel=1e-9)
    np.testing.assert_allclose(ov["xi"], 2.0 ** (g.x + 0.5), rtol=1e-14)
