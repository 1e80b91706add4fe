"""Fibre engine: the ODE chain between jump times and the index shift at jumps.

Along the fibre labelled ``theta`` the solution is sampled at
``x = k + 1 - psi(t, theta)``; the samples ``phi_k`` obey

    phi_k' = alpha phi_k + exp(-alpha) phi_{k-1}**2 - phi_k**2

on each interval between the jump times ``n + theta``, where the labels shift
down by one (``phi_k <- phi_{k+1}``).  Fibres are independent; a
:class:`FibreBundle` evolves many of them at once on a shared index window so
that the right-hand side is one vectorised numpy expression.

Time is carried as ``(n, s)`` with integer ``n`` and ``0 <= s < 1``; jump
times are the exact pairs ``(n, theta)``, so no float drift accumulates.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .geometry import ModelParams, psi_exact

logger = logging.getLogger(__name__)

DEFAULT_DT = 2.0**-8
WINDOW_THRESHOLD = 1e-14


class FibreError(RuntimeError):
    pass


class WindowTooSmall(FibreError):
    """Weighted data at a window edge is above the truncation threshold."""

    def __init__(self, msg, k_min=None, k_max=None):
        super().__init__(msg)
        self.k_min = k_min
        self.k_max = k_max


@dataclass
class FibreState:
    """One fibre: ``phi[i]`` is the value at label ``k_min + i``."""

    theta: float
    n: int
    s: float
    k_min: int
    phi: np.ndarray
    m0: float
    params: ModelParams
    c0: float = float("nan")
    clamp_total: float = 0.0

    @property
    def k_max(self) -> int:
        return self.k_min + self.phi.size - 1

    @property
    def k(self) -> np.ndarray:
        return np.arange(self.k_min, self.k_max + 1)

    @property
    def t(self) -> float:
        return self.n + self.s

    @property
    def psi(self) -> float:
        return float(psi_exact(self.n, self.s, self.theta))

    def weights(self) -> np.ndarray:
        return np.exp(self.params.alpha * self.k)

    def weighted_mass(self) -> float:
        return float(np.dot(self.weights(), self.phi))

    def expected_mass(self) -> float:
        """Mass law: ``exp(alpha (psi - 1)) m0``."""
        return math.exp(self.params.alpha * (self.psi - 1.0)) * self.m0

    def positions(self) -> np.ndarray:
        """Physical points ``k + 1 - psi`` carried by the window."""
        return self.k + 1.0 - self.psi

    def copy(self) -> "FibreState":
        return FibreState(self.theta, self.n, self.s, self.k_min, self.phi.copy(),
                          self.m0, self.params, self.c0, self.clamp_total)


def default_window(params: ModelParams, k_max: int = 12, threshold: float = WINDOW_THRESHOLD):
    """Smallest label window whose left end carries weighted plateau below ``threshold``."""
    k_min = math.floor(math.log(threshold / params.plateau) / params.alpha)
    return k_min, k_max


def init_fibre(h0: Callable, theta: float, k_min: int, k_max: int, params: ModelParams,
               *, threshold: float = WINDOW_THRESHOLD, check: bool = True) -> FibreState:
    """Sample initial data on the fibre at ``t = 0``.

    ``phi_k(0) = h0(k + 1 - psi(0, theta))``, i.e. ``h0(k + theta)`` for
    ``theta > 0`` and ``h0(k + 1)`` for ``theta = 0`` (time 0 is then a jump
    time and the post-jump labelling is used).  ``m0`` is the lattice sum of
    ``h0`` over the window.
    """
    if not 0.0 <= theta < 1.0:
        raise ValueError("theta must lie in [0, 1)")
    state = FibreState(theta=float(theta), n=0, s=0.0, k_min=int(k_min),
                       phi=np.zeros(k_max - k_min + 1), m0=0.0, params=params)
    x = state.positions()
    phi = np.asarray(h0(x), dtype=float)
    if np.any(phi < 0) or not np.all(np.isfinite(phi)):
        raise ValueError("initial data must be finite and nonnegative")
    state.phi = phi.copy()
    w = state.weights()
    if check:
        total = float(np.dot(w, phi))
        tol = threshold * max(total, 1.0)
        left, right = w[0] * phi[0], w[-1] * phi[-1]
        if total > 0 and max(left, right) > tol:
            # estimate the labels needed for the edges to fall below threshold
            weighted = lambda k: math.exp(params.alpha * k) * float(h0(k + 1 - state.psi))
            need_lo, need_hi = k_min, k_max
            while left > tol and need_lo > k_min - 256 and weighted(need_lo) > tol:
                need_lo -= 1
            while right > tol and need_hi < k_max + 64 and weighted(need_hi) > tol:
                need_hi += 1
            raise WindowTooSmall(
                f"window [{k_min}, {k_max}] too small: edge weighted values ({left:.3g}, {right:.3g}); "
                f"window [{need_lo}, {need_hi}] required",
                k_min=need_lo, k_max=need_hi,
            )
    state.m0 = float(np.dot(w, phi)) * math.exp(params.alpha * (1.0 - state.psi))
    state.c0 = max(float(phi.max(initial=0.0)), params.plateau)
    return state


def ode_rhs(phi: np.ndarray, params: ModelParams, inflow=0.0) -> np.ndarray:
    """``alpha phi_k + exp(-alpha) phi_{k-1}**2 - phi_k**2``.

    ``inflow`` is the value assumed at ``k_min - 1`` (0 by default). Works
    along the last axis, so a ``(Q, K)`` bundle is handled in one call.
    """
    a = params.alpha
    sq = phi * phi
    out = a * phi - sq
    out[..., 1:] += math.exp(-a) * sq[..., :-1]
    out[..., 0] += math.exp(-a) * np.square(inflow)
    return out


def rho_rhs(rho: np.ndarray, params: ModelParams, factor, inflow=0.0) -> np.ndarray:
    """Right-hand side in the mass-conserving variables ``rho = exp(-alpha (psi - 1)) phi``."""
    a = params.alpha
    sq = rho * rho
    out = -sq
    out[..., 1:] += math.exp(-a) * sq[..., :-1]
    out[..., 0] += math.exp(-a) * np.square(inflow)
    return np.asarray(factor)[..., None] * out if np.ndim(factor) else factor * out


def _edge(phi):
    # constant extrapolation left of the window: exact for plateau and for empty data
    return phi[..., 0]


def _rk4(phi: np.ndarray, dt: float, params: ModelParams) -> np.ndarray:
    k1 = ode_rhs(phi, params, _edge(phi))
    u = phi + 0.5 * dt * k1
    k2 = ode_rhs(u, params, _edge(u))
    u = phi + 0.5 * dt * k2
    k3 = ode_rhs(u, params, _edge(u))
    u = phi + dt * k3
    k4 = ode_rhs(u, params, _edge(u))
    return phi + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _rk4_rho(phi: np.ndarray, dt: float, params: ModelParams, psi0) -> np.ndarray:
    a = params.alpha
    psi0 = np.asarray(psi0, dtype=float)
    g0 = np.exp(a * (psi0 - 1.0))
    gm = np.exp(a * (psi0 + 0.5 * dt - 1.0))
    g1 = np.exp(a * (psi0 + dt - 1.0))
    shape = (-1, 1) if phi.ndim == 2 else ()
    rho = phi / np.reshape(g0, shape)
    k1 = rho_rhs(rho, params, g0, _edge(rho))
    u = rho + 0.5 * dt * k1
    k2 = rho_rhs(u, params, gm, _edge(u))
    u = rho + 0.5 * dt * k2
    k3 = rho_rhs(u, params, gm, _edge(u))
    u = rho + dt * k3
    k4 = rho_rhs(u, params, g1, _edge(u))
    rho = rho + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return rho * np.reshape(g1, shape)


def step(state: FibreState, dt: float, *, rho_mode: bool = False) -> FibreState:
    """Advance one fibre by ``dt`` with one classical RK4 step.

    The step must not cross the next jump time. Negative roundoff is clamped
    to 0 and accounted in ``clamp_total``; values above ``2 c0`` abort.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    to_jump = 1.0 - state.psi
    if dt > to_jump + 1e-15:
        raise FibreError(f"step of {dt} crosses the jump time (only {to_jump} left)")
    out = state.copy()
    if rho_mode:
        phi = _rk4_rho(state.phi, dt, state.params, state.psi)
    else:
        phi = _rk4(state.phi, dt, state.params)
    _check_and_clamp(out, phi)
    if abs(dt - to_jump) <= 1e-15:
        # landed on the jump time; keep its exact label (the jump itself is separate)
        out.n, out.s = _jump_time_after(state.n, state.s, state.theta)
    else:
        s = state.s + dt
        out.n, out.s = (state.n + 1, s - 1.0) if s >= 1.0 else (state.n, s)
    return out


def _check_and_clamp(state: FibreState, phi: np.ndarray):
    c0 = state.c0 if math.isfinite(state.c0) else state.params.plateau
    if np.any(~np.isfinite(phi)) or np.any(np.abs(phi) > 2.0 * c0):
        raise FibreError("fibre step unstable: |phi| exceeded 2 c0")
    neg = phi < 0
    if np.any(neg):
        state.clamp_total += float(-phi[neg].sum())
        phi = np.where(neg, 0.0, phi)
    state.phi = phi


def _jump_time_after(n: int, s: float, theta: float):
    """Exact ``(n, s)`` of the first jump time strictly after ``n + s``."""
    if s < theta:
        return n, theta
    return n + 1, theta


def apply_jump(state: FibreState, *, threshold: float = WINDOW_THRESHOLD, extend: bool = True) -> FibreState:
    """Relabel at a jump time: ``phi_k <- phi_{k+1}``, zero at the right end.

    The state holds the left limit on entry. When the weighted value at the
    left edge is above ``threshold`` the window is extended by one label
    instead of dropping it (``extend=False`` raises :class:`WindowTooSmall`).
    """
    out = state.copy()
    w0 = math.exp(state.params.alpha * state.k_min) * state.phi[0]
    if w0 > threshold * max(state.m0, 1.0):
        if not extend:
            raise WindowTooSmall(
                f"left edge k={state.k_min} carries weighted value {w0:.3g}",
                k_min=state.k_min - 1,
            )
        out.k_min = state.k_min - 1
        out.phi = np.append(state.phi, 0.0)
    else:
        out.phi = np.append(state.phi[1:], 0.0)
    return out


def tail_mass(state: FibreState, N: int) -> float:
    """``sum_{|k| >= N} exp(alpha k) phi_k``."""
    k = state.k
    sel = np.abs(k) >= N
    return float(np.dot(state.weights()[sel], state.phi[sel]))


def sup_bound_check(state: FibreState, C0: float) -> bool:
    """Uniform bound ``max_k phi_k <= max(C0, plateau)`` up to a relative 1e-10."""
    c0 = max(C0, state.params.plateau)
    return bool(np.max(state.phi, initial=0.0) <= c0 * (1.0 + 1e-10))


# -- bundles -------------------------------------------------------------------


@dataclass
class FibreBundle:
    """Many fibres on one label window ``k_min..k_min+K-1`` at a common time."""

    thetas: np.ndarray
    n: int
    s: float
    k_min: int
    phi: np.ndarray  # (Q, K)
    m0: np.ndarray
    params: ModelParams
    c0: np.ndarray
    clamp_total: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.clamp_total is None:
            self.clamp_total = np.zeros(self.thetas.size)

    @classmethod
    def from_states(cls, states: Sequence[FibreState]) -> "FibreBundle":
        if not states:
            raise ValueError("no fibres")
        n, s = states[0].n, states[0].s
        if any((st.n, st.s) != (n, s) for st in states):
            raise ValueError("fibres of a bundle must share their time")
        k_min = min(st.k_min for st in states)
        k_max = max(st.k_max for st in states)
        phi = np.zeros((len(states), k_max - k_min + 1))
        for i, st in enumerate(states):
            phi[i, st.k_min - k_min: st.k_max - k_min + 1] = st.phi
        return cls(
            thetas=np.array([st.theta for st in states]), n=n, s=s, k_min=k_min, phi=phi,
            m0=np.array([st.m0 for st in states]), params=states[0].params,
            c0=np.array([st.c0 for st in states]),
            clamp_total=np.array([st.clamp_total for st in states]),
        )

    def states(self) -> List[FibreState]:
        return [
            FibreState(float(th), self.n, self.s, self.k_min, self.phi[i].copy(), float(self.m0[i]),
                       self.params, float(self.c0[i]), float(self.clamp_total[i]))
            for i, th in enumerate(self.thetas)
        ]

    @property
    def k(self) -> np.ndarray:
        return np.arange(self.k_min, self.k_min + self.phi.shape[1])

    @property
    def t(self) -> float:
        return self.n + self.s

    def psi(self, tag: str = "") -> np.ndarray:
        """Phase of every fibre; ``tag="pre_jump"`` gives the left limit 1 for fibres jumping now."""
        ph = np.asarray(psi_exact(self.n, self.s, self.thetas), dtype=float).reshape(-1)
        if tag == "pre_jump":
            ph = np.where(ph == 0.0, 1.0, ph)
        return ph

    def weights(self) -> np.ndarray:
        return np.exp(self.params.alpha * self.k)

    def weighted_mass(self) -> np.ndarray:
        return self.phi @ self.weights()

    def expected_mass(self, tag: str = "") -> np.ndarray:
        return np.exp(self.params.alpha * (self.psi(tag) - 1.0)) * self.m0


@dataclass
class Sample:
    """A recorded bundle snapshot; ``tag`` is one of pre_jump/post_jump/mid/grid/start/end."""

    t: float
    n: int
    s: float
    tag: str
    rows: np.ndarray  # fibres concerned (all for grid samples)
    data: Dict


def _event_offsets(thetas: np.ndarray, dt_max: float, sample_dt: Optional[float]) -> np.ndarray:
    """Sorted offsets in [0, 1] where a period must be cut: grid, jumps, samples."""
    m = int(math.ceil(1.0 / dt_max - 1e-12))
    pts = [np.arange(m + 1) / m, thetas, (thetas + 0.5) % 1.0]
    if sample_dt:
        ms = int(round(1.0 / sample_dt))
        pts.append(np.arange(ms + 1) / ms)
    off = np.unique(np.concatenate(pts))
    return off[(off >= 0) & (off <= 1.0)]


def evolve_bundle(
    bundle: FibreBundle,
    horizon: float,
    dt_max: float = DEFAULT_DT,
    *,
    observe: Optional[Callable[[FibreBundle, str, np.ndarray], Dict]] = None,
    sample_dt: Optional[float] = None,
    rho_mode: bool = False,
    threshold: float = WINDOW_THRESHOLD,
) -> List[Sample]:
    """Advance a bundle to ``t + horizon``.

    Steps never exceed ``dt_max`` and land exactly on every jump time
    ``n + theta_j``. ``observe(bundle, tag, rows)`` is called at the start,
    at each jump (tag ``pre_jump`` with the left limit, then ``post_jump``),
    at the half periods ``n + theta_j + 1/2`` (tag ``mid``), at multiples of
    ``sample_dt`` (tag ``grid``) and at the end; its dicts are collected.
    Horizons must end on the offset grid (multiples of ``dt_max``).
    """
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    if not dt_max > 0:
        raise ValueError("dt_max must be positive")
    samples: List[Sample] = []
    all_rows = np.arange(bundle.thetas.size)

    def record(tag, rows):
        if observe is not None:
            data = observe(bundle, tag, rows)
            samples.append(Sample(bundle.t, bundle.n, bundle.s, tag, rows, data))

    offsets = _event_offsets(bundle.thetas, dt_max, sample_dt)
    sample_m = int(round(1.0 / sample_dt)) if sample_dt else 0
    n_end = bundle.n + math.floor(bundle.s + horizon + 1e-12)
    s_end = bundle.s + horizon - math.floor(bundle.s + horizon + 1e-12)
    if abs(s_end) < 1e-12 or abs(s_end - 1.0) < 1e-12:
        s_end = 0.0
    # snap s_end onto the offset table
    j_end = int(np.argmin(np.abs(offsets - s_end)))
    if abs(offsets[j_end] - s_end) > 1e-9:
        raise ValueError("horizon must end on the step grid")
    s_end = float(offsets[j_end])

    record("start", all_rows)
    # fibres with theta == 0 jump at the start of every period
    zero_rows = np.nonzero(bundle.thetas == 0.0)[0]

    def at_offset(s):
        jumps = np.nonzero(bundle.thetas == s)[0] if s > 0 else zero_rows
        if jumps.size:
            record("pre_jump", jumps)
            _bundle_jump(bundle, jumps, threshold)
            record("post_jump", jumps)
        mids = np.nonzero(np.isclose((bundle.thetas + 0.5) % 1.0, s, rtol=0, atol=0))[0]
        if mids.size:
            record("mid", mids)
        if sample_m and abs(s * sample_m - round(s * sample_m)) < 1e-9:
            record("grid", all_rows)

    j = int(np.searchsorted(offsets, bundle.s, side="left"))
    if offsets[j] != bundle.s:
        raise ValueError("bundle time is not on the event grid")
    while (bundle.n, j) != (n_end, j_end):
        if j == offsets.size - 1:
            bundle.n += 1
            bundle.s = 0.0
            j = 0
            at_offset(0.0)
            continue
        s_next = float(offsets[j + 1])
        dt = s_next - bundle.s
        if dt > 0:
            _bundle_step(bundle, dt, rho_mode)
        j += 1
        if j == offsets.size - 1:
            continue  # offset 1.0 is handled as offset 0 of the next period
        bundle.s = s_next
        at_offset(s_next)
        _maybe_extend_right(bundle, threshold)
    record("end", all_rows)
    return samples


def _bundle_step(bundle: FibreBundle, dt: float, rho_mode: bool):
    if rho_mode:
        phi = _rk4_rho(bundle.phi, dt, bundle.params, bundle.psi())
    else:
        phi = _rk4(bundle.phi, dt, bundle.params)
    c0 = np.where(np.isfinite(bundle.c0), bundle.c0, bundle.params.plateau)
    if not np.all(np.isfinite(phi)) or np.any(np.abs(phi) > 2.0 * c0[:, None]):
        raise FibreError(f"fibre step unstable at t={bundle.t + dt:.6f}: |phi| exceeded 2 c0")
    neg = phi < 0
    if neg.any():
        bundle.clamp_total += np.where(neg, -phi, 0.0).sum(axis=1)
        phi[neg] = 0.0
    bundle.phi = phi


def _bundle_jump(bundle: FibreBundle, rows: np.ndarray, threshold: float):
    w0 = math.exp(bundle.params.alpha * bundle.k_min)
    edge = w0 * bundle.phi[rows, 0]
    if np.any(edge > threshold * np.maximum(bundle.m0[rows], 1.0)):
        # grow the window by one label on the left for every fibre
        bundle.phi = np.concatenate([np.zeros((bundle.phi.shape[0], 1)), bundle.phi], axis=1)
        bundle.k_min -= 1
        logger.debug("extended fibre window to k_min=%d", bundle.k_min)
    bundle.phi[rows, :-1] = bundle.phi[rows, 1:]
    bundle.phi[rows, -1] = 0.0


def _maybe_extend_right(bundle: FibreBundle, threshold: float):
    k_max = bundle.k_min + bundle.phi.shape[1] - 1
    edge = math.exp(bundle.params.alpha * k_max) * bundle.phi[:, -1]
    if np.any(edge > threshold * np.maximum(bundle.m0, 1.0)):
        bundle.phi = np.concatenate([bundle.phi, np.zeros((bundle.phi.shape[0], 2))], axis=1)
        logger.debug("extended fibre window to k_max=%d", k_max + 2)


def evolve(state: FibreState, horizon: float, dt_max: float = DEFAULT_DT, **kw):
    """Evolve a single fibre; returns ``(final_state, samples)``."""
    bundle = FibreBundle.from_states([state])
    samples = evolve_bundle(bundle, horizon, dt_max, **kw)
    return bundle.states()[0], samples


def mass_observer(bundle: FibreBundle, tag: str, rows: np.ndarray) -> Dict:
    """Default observer: weighted mass against the mass law."""
    return {
        "mass": bundle.weighted_mass()[rows],
        "expected": bundle.expected_mass(tag)[rows],
        "sup": bundle.phi[rows].max(axis=1),
    }
