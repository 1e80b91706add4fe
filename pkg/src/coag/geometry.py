"""Model parameters, fibre phases and the changes of variables F <-> G <-> h.

The diagonal-kernel coagulation equation is studied in self-similar variables

    alpha = (1 - gamma) ln 2,   t = ln(tau) / alpha,   x = eta - t,
    exp(-alpha t) h(t, x) = alpha G(tau, eta),   G(tau, eta) = 2**(eta (1 + gamma)) F(tau, xi),
    xi = 2**eta.

Every function here is pure and vectorises over numpy arrays.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Tuple

import numpy as np

LN2 = math.log(2.0)


class MassLeakageWarning(RuntimeWarning):
    """Weighted data is not negligible at the edge of the integration grid."""


@dataclass(frozen=True)
class ModelParams:
    """Homogeneity ``gamma`` of the kernel ``xi**(1+gamma) delta(xi - eta)``."""

    gamma: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.gamma) or self.gamma >= 1.0:
            raise ValueError(f"gamma must be finite and < 1 (got {self.gamma!r})")

    @property
    def alpha(self) -> float:
        return (1.0 - self.gamma) * LN2

    @property
    def plateau(self) -> float:
        """Left limit ``alpha / (1 - exp(-alpha))`` of every stationary profile."""
        a = self.alpha
        return a / -math.expm1(-a)


FRAC_SNAP_ULPS = 8


def frac(v):
    """Fractional part in [0, 1); never returns 1.0.

    Values within a few ulps below an integer (``2.3 - 0.3`` is
    ``1.9999999999999998``) are treated as that integer and give 0.
    """
    v = np.asarray(v, dtype=float)
    f = v - np.floor(v)
    snap = 1.0 - f <= FRAC_SNAP_ULPS * np.finfo(float).eps * np.maximum(1.0, np.abs(v))
    f = np.where((f >= 1.0) | snap, 0.0, f)
    return f[()] if f.ndim == 0 else f


def theta_of(t, x):
    """Fibre label: fractional part of ``t + x``."""
    return frac(np.asarray(t, dtype=float) + np.asarray(x, dtype=float))


def psi(t, theta):
    """Sawtooth phase ``t - theta - floor(t - theta)``; jumps 1 -> 0 at ``n + theta``."""
    return frac(np.asarray(t, dtype=float) - np.asarray(theta, dtype=float))


def psi_exact(n: int, s: float, theta):
    """Phase at the time ``n + s`` (``0 <= s < 1``) without forming ``n + s``.

    Only the fractional offset enters, so jump alignment does not drift with
    the period count.
    """
    theta = np.asarray(theta, dtype=float)
    out = np.where(s >= theta, s - theta, s - theta + 1.0)
    out = np.where(out >= 1.0, 0.0, out)
    return out[()] if out.ndim == 0 else out


# -- changes of variables ----------------------------------------------------


def h_to_G(t, x, h_value, params: ModelParams):
    """Map ``(t, x, h)`` to ``(tau, eta, G)``."""
    a = params.alpha
    t = np.asarray(t, dtype=float)
    tau = np.exp(a * t)
    eta = np.asarray(x, dtype=float) + t
    G = np.exp(-a * t) * np.asarray(h_value, dtype=float) / a
    return tau, eta, G


def G_to_h(tau, eta, G_value, params: ModelParams):
    """Inverse of :func:`h_to_G`; ``tau`` must be positive."""
    tau = np.asarray(tau, dtype=float)
    if np.any(~(tau > 0)):
        raise ValueError("tau must be > 0")
    a = params.alpha
    t = np.log(tau) / a
    x = np.asarray(eta, dtype=float) - t
    h = a * np.asarray(G_value, dtype=float) * tau
    return t, x, h


def G_to_F(eta, G_value, params: ModelParams):
    """Return ``(xi, F)`` with ``xi = 2**eta`` and ``F = G 2**(-eta (1 + gamma))``."""
    eta = np.asarray(eta, dtype=float)
    xi = np.exp2(eta)
    F = np.asarray(G_value, dtype=float) * np.exp2(-eta * (1.0 + params.gamma))
    return xi, F


def F_to_G(xi, F_value, params: ModelParams):
    """Return ``(eta, G)``; inverse of :func:`G_to_F`."""
    xi = np.asarray(xi, dtype=float)
    if np.any(~(xi > 0)):
        raise ValueError("xi must be > 0")
    eta = np.log2(xi)
    G = np.asarray(F_value, dtype=float) * np.exp2(eta * (1.0 + params.gamma))
    return eta, G


def h_to_F(t, x, h_value, params: ModelParams) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(tau, xi, F)`` for samples of ``h(t, .)``."""
    tau, eta, G = h_to_G(t, x, h_value, params)
    xi, F = G_to_F(eta, G, params)
    return tau, xi, F


def F_to_h(tau, xi, F_value, params: ModelParams):
    eta, G = F_to_G(xi, F_value, params)
    return G_to_h(tau, eta, G, params)


# -- weighted mass -----------------------------------------------------------


def mass_integral_h(h, dx: float, x0: float, params: ModelParams, *, edge_tol: float = 1e-10) -> float:
    """Trapezoid rule for ``int exp(alpha x) h(x) dx`` on the grid ``x0 + i dx``.

    Emits :class:`MassLeakageWarning` when the weighted integrand at either
    end exceeds ``edge_tol`` relative to the total.
    """
    h = np.asarray(h, dtype=float)
    if h.size == 0:
        return 0.0
    x = x0 + dx * np.arange(h.size)
    f = np.exp(params.alpha * x) * h
    if h.size == 1:
        total = 0.0
    else:
        total = dx * (f.sum() - 0.5 * (f[0] + f[-1]))
    scale = max(abs(total), np.finfo(float).tiny)
    if max(abs(f[0]), abs(f[-1])) > edge_tol * scale and np.any(f != 0):
        warnings.warn(
            f"weighted data at grid edge ({f[0]:.3g}, {f[-1]:.3g}) is not negligible",
            MassLeakageWarning,
            stacklevel=2,
        )
    return float(total)
