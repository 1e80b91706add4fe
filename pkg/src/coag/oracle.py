"""Eulerian cross-check: method of lines for ``h(t, x)`` on a uniform grid.

    h_t = h_x + alpha h + exp(-alpha) h(x - 1)**2 - h**2

The transport and linear growth terms are combined into the flux form
``e^{-alpha x} d/dx (e^{alpha x} h)`` and differenced upwind with the right
neighbour (characteristics run towards smaller ``x``).  In that form the
discrete weighted mass ``dx sum e^{alpha x_i} h_i`` changes only through the
domain edges.  The delay is an exact offset of ``1/dx`` cells and time is
advanced with classical RK4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, FrozenSet, Optional

import numpy as np

from .fibre import FibreBundle
from .geometry import ModelParams, h_to_G, G_to_F, mass_integral_h

ALL_TERMS = frozenset({"transport", "growth", "coagulation"})


class OracleError(RuntimeError):
    pass


@dataclass
class GridState:
    params: ModelParams
    x0: float
    dx: float
    h: np.ndarray = field(repr=False)
    t: float = 0.0

    @property
    def steps_per_unit(self) -> int:
        p = round(1.0 / self.dx)
        if abs(p * self.dx - 1.0) > 1e-12:
            raise ValueError("1/dx must be an integer")
        return p

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.h.size)

    def mass(self) -> float:
        return mass_integral_h(self.h, self.dx, self.x0, self.params, edge_tol=np.inf)


def init_grid(h0: Callable, params: ModelParams, x0: float, x1: float, dx: float = 2.0**-8) -> GridState:
    """Sample ``h0`` on ``x0, x0 + dx, ..., x1``."""
    n = int(round((x1 - x0) / dx)) + 1
    x = x0 + dx * np.arange(n)
    h = np.asarray(h0(x), dtype=float).copy()
    if np.any(h < 0):
        raise ValueError("initial data must be nonnegative")
    return GridState(params, float(x0), float(dx), h, 0.0)


def grid_rhs(h: np.ndarray, params: ModelParams, dx: float, p: int,
             terms: FrozenSet[str] = ALL_TERMS) -> np.ndarray:
    a = params.alpha
    out = np.zeros_like(h)
    right = np.empty_like(h)
    right[:-1] = h[1:]
    right[-1] = 0.0  # nothing enters from the right
    if "transport" in terms:
        factor = math.exp(a * dx) if "growth" in terms else 1.0
        out += (factor * right - h) / dx
    elif "growth" in terms:
        out += a * h
    if "coagulation" in terms:
        delayed = np.empty_like(h)
        delayed[p:] = h[:-p]
        # left of the grid: constant extension of the edge value
        delayed[:p] = h[0]
        out += math.exp(-a) * delayed * delayed - h * h
    return out


def step_grid(state: GridState, dt: float, *, terms: FrozenSet[str] = ALL_TERMS) -> GridState:
    """One RK4 step of the upwind semi-discretisation."""
    if dt > state.dx * (1.0 + 1e-12):
        raise OracleError(f"CFL violated: dt={dt} > dx={state.dx}")
    p = state.steps_per_unit
    f = lambda u: grid_rhs(u, state.params, state.dx, p, terms)
    h = state.h
    k1 = f(h)
    k2 = f(h + 0.5 * dt * k1)
    k3 = f(h + 0.5 * dt * k2)
    k4 = f(h + dt * k3)
    new = h + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    lo = float(new.min(initial=0.0))
    if lo < -1e-12:
        raise OracleError(f"negative overshoot {lo:.3g} at t={state.t + dt:.5f}")
    np.maximum(new, 0.0, out=new)
    return replace(state, h=new, t=state.t + dt)


def evolve_grid(state: GridState, horizon: float, dt: Optional[float] = None, *,
                terms: FrozenSet[str] = ALL_TERMS) -> GridState:
    """Advance by ``horizon`` with fixed ``dt`` (default ``dx / 2``)."""
    if dt is None:
        dt = 0.5 * state.dx
    n = int(round(horizon / dt))
    if abs(n * dt - horizon) > 1e-9:
        raise ValueError("horizon must be a multiple of dt")
    t0 = state.t
    for i in range(n):
        state = step_grid(state, dt, terms=terms)
    state.t = t0 + n * dt
    return state


def compare_with_fibres(grid: GridState, bundle: FibreBundle, *, margin: float = 10.0) -> Dict[str, float]:
    """Discrepancies between fibre values and the grid at the fibre points.

    Only fibre points that are grid nodes at least ``margin`` inside both
    the grid and the fibre window are compared. Returns the sup discrepancy
    and the weighted l1 one (midpoint rule over the fibres).
    """
    if abs(grid.t - bundle.t) > 1e-9:
        raise ValueError("grid and fibres are at different times")
    ph = bundle.psi()
    k = bundle.k
    x = k[None, :] + (1.0 - ph)[:, None]
    u = (x - grid.x0) / grid.dx
    idx = np.rint(u).astype(np.int64)
    on_grid = np.abs(u - idx) < 1e-6
    lo = max(grid.x0, k[0] + 1.0) + margin
    hi = grid.x0 + grid.dx * (grid.h.size - 1)
    ok = on_grid & (x >= lo) & (x <= hi)
    if not np.any(ok):
        raise ValueError("no fibre point coincides with a grid node")
    hg = np.zeros_like(bundle.phi)
    hg[ok] = grid.h[idx[ok]]
    diff = np.where(ok, np.abs(bundle.phi - hg), 0.0)
    wts = np.exp(grid.params.alpha * k)
    wl1 = float(np.mean((diff @ wts) * np.exp(grid.params.alpha * (1.0 - ph))))
    return {"sup": float(diff.max()), "weighted_l1": wl1, "points": int(ok.sum())}


def to_original_variables(grid: GridState) -> Dict[str, np.ndarray]:
    """Tabulate ``F(tau, xi)`` from ``h(t, x)`` and both mass integrals.

    ``mass_F`` is ``int xi F dxi`` computed in ``eta`` (``dxi = ln2 xi deta``)
    with the trapezoid rule; ``mass_h`` is the weighted ``h`` mass. They agree
    via ``int xi F dxi = ln2 / alpha * int e^{alpha x} h dx``.
    """
    params = grid.params
    tau, eta, G = h_to_G(grid.t, grid.x, grid.h, params)
    xi, F = G_to_F(eta, G, params)
    integrand = xi * F * math.log(2.0) * xi
    mass_F = float(np.trapezoid(integrand, dx=grid.dx))
    return {
        "tau": float(tau), "eta": eta, "xi": xi, "G": G, "F": F,
        "mass_F": mass_F, "mass_h": grid.mass(),
        "mass_F_from_h": math.log(2.0) / params.alpha * grid.mass(),
    }


def self_similar_shape(tau: float, xi: np.ndarray, F: np.ndarray, params: ModelParams):
    """``(z, phi)`` with ``z = xi / tau^{1/(1-gamma)}`` and ``phi = tau^{2/(1-gamma)} F``."""
    g = params.gamma
    return xi / tau ** (1.0 / (1.0 - g)), tau ** (2.0 / (1.0 - g)) * F
