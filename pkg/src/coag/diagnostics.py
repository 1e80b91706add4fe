"""Lyapunov functional, dissipation and distances to shifted profiles.

For a fibre with mass ``m0`` the comparison trace is the profile shifted by
``lambda = ln(m0) / alpha``, sampled at the fibre's points:
``phibar_k = hbar(k + 1 - lambda - psi)``.  With ``w = phi - phibar``

    L = sum_k e^{alpha k} (w_k)_+
    D = sum_k e^{alpha k} (phi_k + phibar_k) w_k [sign+(w_k) - sign+(w_{k+1})]

and ``dL/dt = alpha L - D`` between jumps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .fibre import FibreBundle, FibreState
from .geometry import ModelParams, theta_of
from .profile import StationaryProfile


def lambda_of(m0_value: float, params: ModelParams) -> Optional[float]:
    """Shift ``ln(m0) / alpha``; ``None`` flags a vacuous fibre (``m0 == 0``)."""
    if m0_value < 0 or not math.isfinite(m0_value):
        raise ValueError(f"fibre mass must be finite and nonnegative (got {m0_value!r})")
    if m0_value == 0:
        return None
    return math.log(m0_value) / params.alpha


def _lambdas(m0: np.ndarray, params: ModelParams) -> np.ndarray:
    m0 = np.asarray(m0, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(m0 > 0, np.log(np.where(m0 > 0, m0, 1.0)) / params.alpha, np.nan)


def sign_plus(v):
    return (np.asarray(v) > 0).astype(float)


def trace_matrix(profile: StationaryProfile, k: np.ndarray, lam, psi_values) -> np.ndarray:
    """``hbar((k + (1 - psi)) - lam)`` for every fibre row.

    The bracket is formed first so that, across a jump, the pre-jump trace at
    label ``k + 1`` and the post-jump trace at ``k`` use bit-identical
    arguments. Rows with NaN ``lam`` (vacuous fibres) are zero.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    ph = np.atleast_1d(np.asarray(psi_values, dtype=float))
    arg = (k[None, :] + (1.0 - ph)[:, None]) - np.where(np.isnan(lam), 0.0, lam)[:, None]
    out = np.asarray(profile(arg, warn=False), dtype=float).reshape(arg.shape)
    out[np.isnan(lam)] = 0.0
    return out


def lyapunov_terms(phi, phibar, k, params: ModelParams) -> Dict[str, np.ndarray]:
    """Row-wise ``L``, ``D``, ``dist = sum e^{ak}|w|`` and masses for 2-D ``phi``/``phibar``."""
    phi = np.atleast_2d(phi)
    phibar = np.atleast_2d(phibar)
    wts = np.exp(params.alpha * k)
    w = phi - phibar
    sp = sign_plus(w)
    sp_next = np.concatenate([sp[:, 1:], np.zeros((sp.shape[0], 1))], axis=1)
    L = np.maximum(w, 0.0) @ wts
    D = ((phi + phibar) * w * (sp - sp_next)) @ wts
    dist = np.abs(w) @ wts
    return {"L": L, "D": D, "dist": dist, "mass": phi @ wts, "trace_mass": phibar @ wts}


def _state_trace(state: FibreState, profile: StationaryProfile, psi_value=None):
    lam = lambda_of(state.m0, state.params)
    ph = state.psi if psi_value is None else psi_value
    return trace_matrix(profile, state.k, np.nan if lam is None else lam, ph)[0]


def lyapunov(state: FibreState, profile: StationaryProfile, *, left_limit: bool = False) -> float:
    """``L`` of one fibre; ``left_limit`` evaluates the trace at phase 1 (just before a jump)."""
    ph = 1.0 if left_limit else None
    bar = _state_trace(state, profile, ph)
    return float(lyapunov_terms(state.phi, bar, state.k, state.params)["L"][0])


def dissipation(state: FibreState, profile: StationaryProfile) -> float:
    bar = _state_trace(state, profile)
    return float(lyapunov_terms(state.phi, bar, state.k, state.params)["D"][0])


def lyapunov_ode_check(t: np.ndarray, L: np.ndarray, D: np.ndarray, alpha: float) -> Dict[str, float]:
    """Central-difference residual of ``dL/dt = alpha L - D`` on a jump-free sample run.

    Residuals are scaled by ``max(max L, 1e-12)``. ``L`` is only Lipschitz
    where a component of ``w`` changes sign, so the 90th percentile is
    reported next to the maximum.
    """
    t = np.asarray(t, dtype=float)
    L = np.asarray(L, dtype=float)
    D = np.asarray(D, dtype=float)
    if t.size < 3:
        return {"max": 0.0, "p90": 0.0}
    dLdt = (L[2:] - L[:-2]) / (t[2:] - t[:-2])
    res = np.abs(dLdt - (alpha * L[1:-1] - D[1:-1])) / max(float(np.max(L)), 1e-12)
    return {"max": float(res.max()), "p90": float(np.percentile(res, 90))}


def is_nonincreasing(seq: Sequence[float], atol: float = 0.0) -> bool:
    seq = np.asarray(seq, dtype=float)
    return bool(np.all(np.diff(seq) <= atol))


# -- bundle-level quantities ---------------------------------------------------


class DiagnosticsObserver:
    """Observer for :func:`coag.fibre.evolve_bundle` recording per-fibre diagnostics.

    For ``pre_jump`` samples the trace is taken at phase 1, i.e. the left limit.
    """

    def __init__(self, profile: StationaryProfile, tail_N: int = 8, keep_phi: bool = False):
        self.profile = profile
        self.tail_N = tail_N
        self.keep_phi = keep_phi

    def __call__(self, bundle: FibreBundle, tag: str, rows: np.ndarray) -> Dict:
        k = bundle.k
        ph = bundle.psi(tag)[rows]
        lam = _lambdas(bundle.m0[rows], bundle.params)
        phi = bundle.phi[rows]
        bar = trace_matrix(self.profile, k, lam, ph)
        out = lyapunov_terms(phi, bar, k, bundle.params)
        wts = np.exp(bundle.params.alpha * k)
        sel = np.abs(k) >= self.tail_N
        out["tail"] = phi[:, sel] @ wts[sel]
        out["psi"] = ph
        out["expected"] = np.exp(bundle.params.alpha * (ph - 1.0)) * bundle.m0[rows]
        out["sup"] = phi.max(axis=1)
        if self.keep_phi:
            out["phi"] = phi.copy()
            out["k_min"] = bundle.k_min
        return out


def theorem1_distance(bundle: FibreBundle, profile: StationaryProfile) -> float:
    """Midpoint rule in ``theta`` of ``e^{alpha (1 - psi)} sum_k e^{alpha k} |phi_k - phibar_k|``.

    This equals ``int e^{alpha x} |h(t, x) - hbar(x - mu(t, x))| dx``. Vacuous
    fibres contribute their own weighted mass (distance to zero).
    """
    return float(np.mean(fibre_distances(bundle, profile)))


def fibre_distances(bundle: FibreBundle, profile: StationaryProfile, lam=None) -> np.ndarray:
    """Per-fibre integrand of :func:`theorem1_distance`; ``lam`` overrides the mass-matched shifts."""
    ph = bundle.psi()
    if lam is None:
        lam = _lambdas(bundle.m0, bundle.params)
    else:
        lam = np.broadcast_to(np.asarray(lam, dtype=float), ph.shape)
    bar = trace_matrix(profile, bundle.k, lam, ph)
    dist = lyapunov_terms(bundle.phi, bar, bundle.k, bundle.params)["dist"]
    return np.exp(bundle.params.alpha * (1.0 - ph)) * dist


def distance_to_shift(bundle: FibreBundle, profile: StationaryProfile, lam: float) -> float:
    """``int e^{alpha x} |h(t, x) - hbar(x - lam)| dx`` for one global shift."""
    return float(np.mean(fibre_distances(bundle, profile, lam)))


def min_distance_over_shifts(bundle: FibreBundle, profile: StationaryProfile,
                             lams: Iterable[float]) -> Tuple[float, float]:
    """``(best lam, distance)`` over a grid of single shifts."""
    best = (math.nan, math.inf)
    for lam in lams:
        d = distance_to_shift(bundle, profile, float(lam))
        if d < best[1]:
            best = (float(lam), d)
    return best


def fitted_shift(state_phi: np.ndarray, k: np.ndarray, psi_value: float, profile: StationaryProfile,
                 params: ModelParams, guess: float, span: float = 1.0) -> float:
    """Shift ``lam`` minimising ``sum_k e^{alpha k} |phi_k - hbar(k + 1 - lam - psi)|`` for one fibre."""
    from scipy.optimize import minimize_scalar

    wts = np.exp(params.alpha * k)

    def err(lam):
        bar = profile((k + (1.0 - psi_value)) - lam, warn=False)
        return float(np.abs(state_phi - bar) @ wts)

    r = minimize_scalar(err, bounds=(guess - span, guess + span), method="bounded",
                        options={"xatol": 1e-10})
    return float(r.x)


def reconstruct_h(bundle: FibreBundle) -> Tuple[np.ndarray, np.ndarray]:
    """Scatter the fibres back to ``h(t, x)`` at ``x = k + 1 - psi``, sorted by ``x``."""
    ph = bundle.psi()
    x = (bundle.k[None, :] + (1.0 - ph)[:, None]).ravel()
    h = bundle.phi.ravel()
    order = np.argsort(x, kind="stable")
    return x[order], h[order]


def recurrence_distance(phi_a: np.ndarray, phi_b: np.ndarray, k: np.ndarray, psi_values: np.ndarray,
                        params: ModelParams) -> float:
    """Weighted l1 distance between two bundle snapshots taken one period apart."""
    wts = np.exp(params.alpha * k)
    per = (np.abs(phi_a - phi_b) @ wts) * np.exp(params.alpha * (1.0 - psi_values))
    return float(np.mean(per))


def mu_of(t, x, m0_function: Callable, params: ModelParams):
    """``ln(m0(Theta(t, x))) / alpha``; raises for vacuous fibres."""
    m = np.asarray(m0_function(theta_of(t, x)), dtype=float)
    if np.any(m <= 0):
        raise ValueError("mu undefined where the fibre mass vanishes")
    out = np.log(m) / params.alpha
    return out[()] if out.ndim == 0 else out
