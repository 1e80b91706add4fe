"""Stationary profile: shooting, normalisation and self-consistency checks.

The profile solves the delay equation

    hbar'(x) = hbar(x)**2 - alpha hbar(x) - exp(-alpha) hbar(x - 1)**2

on a uniform grid whose step divides 1, so the unit delay is an integer
offset.  It is seeded on one unit interval from the left asymptotics
``plateau - a 2**(sigma x)`` and continued by the method of steps with
classical RK4; the delayed value at half steps comes from cubic Hermite
interpolation of the already computed table.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from .geometry import LN2, ModelParams, mass_integral_h, psi, psi_exact

DEFAULT_DX = 2.0**-10
SEED_THRESHOLD = 1e-8
UNDERFLOW = 1e-16
# below this value the shooting continues with the integral form
TAIL_SWITCH = 1e-6
# left padding stops where exp(alpha x) * plateau falls below this
LEFT_PAD_WEIGHT = 1e-17


class ProfileError(RuntimeError):
    pass


class LeftExtensionWarning(RuntimeWarning):
    """A profile query fell left of the table; the asymptotic form was used."""


def _sigma_residual(sigma: float, alpha: float) -> float:
    e = math.exp(-alpha)
    return (1.0 + LN2 * sigma / alpha) * (1.0 - e) - 2.0 * (1.0 - e * 2.0**-sigma)


def sigma_root(params: ModelParams, sigma_max: float = 64.0) -> float:
    """Positive root of ``(1 + ln2 sigma / alpha)(1 - e^-alpha) = 2 (1 - e^-alpha 2^-sigma)``."""
    alpha = params.alpha
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    step = 0.25
    lo = 0.0
    g_lo = _sigma_residual(lo, alpha)
    hi = step
    while hi <= sigma_max:
        g_hi = _sigma_residual(hi, alpha)
        if (g_lo < 0) != (g_hi < 0):
            break
        lo, g_lo = hi, g_hi
        hi += step
    else:
        raise ProfileError(f"no sign change of the sigma equation on (0, {sigma_max}]")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        g_mid = _sigma_residual(mid, alpha)
        if g_mid == 0.0:
            return mid
        if (g_mid < 0) == (g_lo < 0):
            lo, g_lo = mid, g_mid
        else:
            hi = mid
    return lo if abs(_sigma_residual(lo, alpha)) <= abs(_sigma_residual(hi, alpha)) else hi


def hermite_eval(x, x0: float, dx: float, values: np.ndarray, derivs: np.ndarray):
    """Piecewise cubic Hermite interpolant of a uniform table.

    Returns NaN outside ``[x0, x0 + (n-1) dx]``; callers handle the edges.
    """
    x = np.asarray(x, dtype=float)
    n = values.size
    u = (x - x0) / dx
    i = np.floor(u).astype(np.int64)
    inside = (u >= 0) & (u <= n - 1)
    i = np.clip(i, 0, n - 2)
    s = u - i
    s = np.where(inside, s, 0.0)
    y0, y1 = values[i], values[i + 1]
    d0, d1 = derivs[i] * dx, derivs[i + 1] * dx
    s2 = s * s
    s3 = s2 * s
    out = (
        (2 * s3 - 3 * s2 + 1) * y0
        + (s3 - 2 * s2 + s) * d0
        + (-2 * s3 + 3 * s2) * y1
        + (s3 - s2) * d1
    )
    out = np.where(inside, out, np.nan)
    return out[()] if out.ndim == 0 else out


def _steps_per_unit(dx: float) -> int:
    p = round(1.0 / dx)
    if p < 2 or abs(p * dx - 1.0) > 1e-12:
        raise ValueError(f"1/dx must be an integer >= 2 (dx={dx!r})")
    return p


def _rhs(h, h_delayed, alpha: float, e_alpha: float):
    return h * h - alpha * h - e_alpha * h_delayed * h_delayed


@dataclass(frozen=True)
class StationaryProfile:
    """Tabulated stationary profile ``hbar(x0 + i dx)``.

    ``shift_applied`` is the translation performed by :func:`normalize`;
    the left asymptotics in table coordinates read
    ``plateau - a 2**(sigma (x + shift_applied))``.
    """

    params: ModelParams
    x0: float
    dx: float
    values: np.ndarray = field(repr=False)
    sigma: float
    a: float
    shift_applied: float = 0.0
    i_start: int = 0  # first index of the shooting region (x_start)
    derivs: np.ndarray = field(default=None, repr=False)
    tail_C: float = float("nan")
    tail_L: float = float("nan")

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.derivs is None:
            object.__setattr__(self, "derivs", self._derivatives(values))
        self.derivs.setflags(write=False)

    def _derivatives(self, values: np.ndarray) -> np.ndarray:
        a = self.params.alpha
        p = _steps_per_unit(self.dx)
        d = np.empty_like(values)
        head = min(p, values.size)
        xs = self.x[:head]
        d[:head] = -self.a * self.sigma * LN2 * np.exp2(self.sigma * (xs + self.shift_applied))
        d[p:] = _rhs(values[p:], values[:-p], a, math.exp(-a))
        return d

    # -- grid ------------------------------------------------------------
    @property
    def plateau(self) -> float:
        return self.params.plateau

    @property
    def steps_per_unit(self) -> int:
        return _steps_per_unit(self.dx)

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.values.size)

    @property
    def x_end(self) -> float:
        return self.x0 + self.dx * (self.values.size - 1)

    @property
    def x_start(self) -> float:
        return self.x0 + self.dx * self.i_start

    def asymptotic(self, x):
        """Two-term left asymptotics in the coordinates of this table."""
        return self.plateau - self.a * np.exp2(self.sigma * (np.asarray(x, dtype=float) + self.shift_applied))

    def __call__(self, x, *, warn: bool = True):
        """Evaluate ``hbar``: Hermite inside, 0 right of the table, asymptotics left of it."""
        x = np.asarray(x, dtype=float)
        out = hermite_eval(x, self.x0, self.dx, self.values, self.derivs)
        out = np.asarray(out)
        right = x > self.x_end
        left = x < self.x0
        if np.any(left):
            if warn:
                warnings.warn(
                    f"profile queried at x={float(np.min(x)):.3g} left of the table start {self.x0:.3g}",
                    LeftExtensionWarning,
                    stacklevel=2,
                )
            out = np.where(left, self.asymptotic(x), out)
        out = np.where(right, 0.0, out)
        return out[()] if out.ndim == 0 else out

    # -- integrals -------------------------------------------------------
    def mass(self) -> float:
        """``int exp(alpha x) hbar dx``: trapezoid on the table plus the analytic left tail."""
        a = self.params.alpha
        body = mass_integral_h(self.values, self.dx, self.x0, self.params, edge_tol=math.inf)
        rate = a + self.sigma * LN2
        tail = self.plateau * math.exp(a * self.x0) / a - self.a * 2.0 ** (
            self.sigma * self.shift_applied
        ) * math.exp(rate * self.x0) / rate
        return body + tail

    def lattice_sum(self, theta) -> np.ndarray:
        """``nu(theta) = sum_k exp(alpha (k + theta)) hbar(k + theta)``."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        a = self.params.alpha
        k_lo = math.floor(self.x0) - 1
        k_hi = math.ceil(self.x_end) + 1
        k = np.arange(k_lo, k_hi + 1)
        pts = k[None, :] + theta[:, None]
        vals = self(pts, warn=False)
        s = np.sum(np.exp(a * pts) * vals, axis=1)
        # below the table: geometric series of the asymptotic form
        rate = a + self.sigma * LN2
        first = k_lo + theta
        s += self.plateau * np.exp(a * first) * math.exp(-a) / -math.expm1(-a)
        s -= (
            self.a
            * 2.0 ** (self.sigma * self.shift_applied)
            * np.exp(rate * first)
            * math.exp(-rate)
            / -math.expm1(-rate)
        )
        return s

    def resolved_values(self) -> np.ndarray:
        return self.values[self.i_start:]


def seed_start(params: ModelParams, a: float, sigma: float, dx: float) -> float:
    """Grid point with ``a 2**(sigma x) < SEED_THRESHOLD * plateau``."""
    x = math.log2(SEED_THRESHOLD * params.plateau / a) / sigma
    return math.floor(x / dx) * dx


def shoot_profile(
    params: ModelParams,
    a: float = 1.0,
    x_start: Optional[float] = None,
    x_end: Optional[float] = None,
    dx: float = DEFAULT_DX,
    *,
    x_lo: Optional[float] = None,
    underflow: float = UNDERFLOW,
    tail_switch: float = TAIL_SWITCH,
) -> StationaryProfile:
    """Raw (un-normalised) profile for the normalisation constant ``a``.

    The table starts at ``x_lo`` (left padding filled with the asymptotic
    form, far enough left that the weighted plateau is below 1e-17), is
    seeded on ``[x_start, x_start + 1]`` and integrated until the profile
    drops below ``underflow`` or ``x_end`` is reached.
    """
    if not (a > 0 and math.isfinite(a)):
        raise ValueError(f"normalisation constant a must be positive (got {a!r})")
    alpha = params.alpha
    e_alpha = math.exp(-alpha)
    plateau = params.plateau
    p = _steps_per_unit(dx)
    sigma = sigma_root(params)
    if x_start is None:
        x_start = seed_start(params, a, sigma, dx)
    elif a * 2.0 ** (sigma * x_start) >= SEED_THRESHOLD * plateau:
        raise ValueError("x_start is not in the asymptotic regime: a 2^(sigma x_start) too large")
    if x_end is None:
        x_end = x_start + 60.0
    if x_lo is None:
        x_lo = math.floor(math.log(LEFT_PAD_WEIGHT / plateau) / alpha / dx) * dx
    x_lo = min(x_lo, x_start)
    i_start = int(round((x_start - x_lo) / dx))
    x_lo = x_start - i_start * dx
    n_max = int(round((x_end - x_lo) / dx)) + 1
    if n_max <= i_start + p:
        raise ValueError("x_end must lie more than one unit right of x_start")

    values = np.empty(n_max)
    derivs = np.empty(n_max)
    head = i_start + p + 1
    xs = x_lo + dx * np.arange(head)
    growth = a * np.exp2(sigma * xs)
    values[:head] = plateau - growth
    derivs[:head] = -sigma * LN2 * growth

    half = 0.5 * dx
    n = n_max
    i = head - 1
    # RK4 method of steps on the bulk of the profile
    while i < n_max - 1:
        h = values[i]
        if h < tail_switch:
            break
        j = i - p
        y0, y1 = values[j], values[j + 1]
        hd_mid = 0.5 * (y0 + y1) + dx * (derivs[j] - derivs[j + 1]) / 8.0
        k1 = h * h - alpha * h - e_alpha * y0 * y0
        u = h + half * k1
        k2 = u * u - alpha * u - e_alpha * hd_mid * hd_mid
        u = h + half * k2
        k3 = u * u - alpha * u - e_alpha * hd_mid * hd_mid
        u = h + dx * k3
        k4 = u * u - alpha * u - e_alpha * y1 * y1
        h_new = h + dx / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if h_new > 2.0 * plateau or not math.isfinite(h_new):
            raise ProfileError(f"profile blew up at x={x_lo + (i + 1) * dx:.4f}; a or x_start invalid")
        if h_new < 0:
            raise ProfileError(
                f"profile turned negative at x={x_lo + (i + 1) * dx:.4f} before underflow; dx too coarse"
            )
        values[i + 1] = h_new
        derivs[i + 1] = h_new * h_new - alpha * h_new - e_alpha * y1 * y1
        i += 1
    # Far tail: the ODE carries a homogeneous mode J exp(-alpha x) that roundoff
    # excites and that outlives the double-exponential decay. The integral form
    # exp(alpha x) h(x) = int_{x-1}^x exp(alpha s) h(s)^2 ds has J = 0 built in.
    xs_all = x_lo + dx * np.arange(n_max)
    w = np.exp(alpha * xs_all)
    while i < n_max - 1 and values[i] >= underflow:
        j = i + 1 - p
        x_new = xs_all[i + 1]
        hw = values[j:i + 1]
        f = w[j:i + 1] * hw * hw
        fp_left = w[j] * (2.0 * hw[0] * derivs[j] + alpha * hw[0] ** 2)
        known = dx * (f.sum() - 0.5 * f[0])
        y1 = values[i + 1 - p]
        h_new = values[i]
        for _ in range(4):
            hp = h_new * h_new - alpha * h_new - e_alpha * y1 * y1
            f_new = w[i + 1] * h_new * h_new
            fp_new = w[i + 1] * (2.0 * h_new * hp + alpha * h_new * h_new)
            integral = known + 0.5 * dx * f_new - dx * dx / 12.0 * (fp_new - fp_left)
            h_new = integral / w[i + 1]
        if not (h_new >= 0 and math.isfinite(h_new)):
            raise ProfileError(f"tail integration failed at x={x_new:.4f}")
        values[i + 1] = h_new
        derivs[i + 1] = h_new * h_new - alpha * h_new - e_alpha * y1 * y1
        i += 1
    # the first value below the underflow threshold is dropped; hard zero beyond
    n = i if values[i] < underflow else i + 1

    values = values[:n].copy()
    derivs = derivs[:n].copy()
    prof = StationaryProfile(
        params=params, x0=x_lo, dx=dx, values=values, sigma=sigma, a=a,
        i_start=i_start, derivs=derivs,
    )
    C, L = fit_tail(prof)
    return replace(prof, tail_C=C, tail_L=L)


def fit_tail(profile: StationaryProfile, units: float = 2.0) -> Tuple[float, float]:
    """Fit ``hbar <= C exp(-L 2**x)`` over the last ``units`` unit intervals.

    ``L`` comes from least squares of ``ln hbar`` against ``-2**x``; ``C`` is
    then raised to the smallest value making the bound hold on the window.
    """
    v = profile.values
    pos = np.nonzero(v > 0)[0]
    if pos.size == 0:
        return float("nan"), float("nan")
    last = pos[-1]
    first = max(profile.i_start, last - int(round(units / profile.dx)))
    x = profile.x[first:last + 1]
    y = np.log(v[first:last + 1])
    A = np.column_stack([np.ones_like(x), -np.exp2(x)])
    (lnC, L), *_ = np.linalg.lstsq(A, y, rcond=None)
    C = float(np.max(y + L * np.exp2(x)))
    return math.exp(C), float(L)


def normalize(raw: StationaryProfile) -> StationaryProfile:
    """Translate the profile by ``ln M / alpha`` so that its weighted mass is 1.

    Only ``x0`` moves; the table values are untouched.
    """
    M = raw.mass()
    if not (M > 0 and math.isfinite(M)):
        raise ValueError(f"profile mass must be positive and finite (got {M!r})")
    lam = math.log(M) / raw.params.alpha
    if lam == 0.0:
        return raw
    shifted = replace(
        raw,
        x0=raw.x0 - lam,
        shift_applied=raw.shift_applied + lam,
        derivs=raw.derivs,
    )
    C, L = fit_tail(shifted)
    return replace(shifted, tail_C=C, tail_L=L, derivs=raw.derivs)


def build_profile(params: ModelParams, a: float = 1.0, dx: float = DEFAULT_DX) -> StationaryProfile:
    """Shoot and normalise in one call."""
    return normalize(shoot_profile(params, a=a, dx=dx))


# -- validation --------------------------------------------------------------


def integral_identity_residual(values, x0: float, dx: float, params: ModelParams) -> np.ndarray:
    """Pointwise relative residual of ``e^{ax} h(x) = int_{x-1}^x h^2 e^{at} dt``.

    The window integral uses the trapezoid rule with the endpoint derivative
    correction, so it is fourth-order accurate. Entries with ``x - 1`` off the
    table are NaN.
    """
    values = np.asarray(values, dtype=float)
    p = _steps_per_unit(dx)
    x = x0 + dx * np.arange(values.size)
    a = params.alpha
    lhs = np.exp(a * x) * values
    f = np.exp(a * x) * values * values
    res = np.full(values.size, np.nan)
    if values.size <= p:
        return res
    fp = np.gradient(f, dx, edge_order=2)
    # direct window sums; a cumulative sum would cancel catastrophically in the tail
    window = np.convolve(f, np.ones(p + 1), mode="valid")
    integral = dx * (window - 0.5 * (f[p:] + f[:-p])) - dx * dx / 12.0 * (fp[p:] - fp[:-p])
    diff = np.abs(lhs[p:] - integral)
    scale = np.abs(lhs[p:])
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(scale > 0, diff / scale, np.where(diff == 0, 0.0, np.inf))
    res[p:] = rel
    return res


def validate_integral_identity(profile, *, values=None) -> float:
    """Maximum relative residual of the integral identity over the table.

    ``values`` overrides the table (used for perturbed negative controls).
    """
    v = profile.values if values is None else values
    res = integral_identity_residual(v, profile.x0, profile.dx, profile.params)
    return float(np.nanmax(res)) if np.any(np.isfinite(res)) else 0.0


def lattice_sum_spread(profile: StationaryProfile, n_theta: int = 64) -> Tuple[float, float]:
    """``(max |nu - 1|, std nu)`` over ``n_theta`` equispaced labels."""
    nu = profile.lattice_sum(np.arange(n_theta) / n_theta)
    return float(np.max(np.abs(nu - 1.0))), float(np.std(nu))


def is_monotone(profile: StationaryProfile) -> Tuple[bool, bool]:
    """``(nonincreasing on the whole table, strictly decreasing on the resolved part)``."""
    v = profile.values
    d = np.diff(v)
    r = np.diff(v[profile.i_start:])
    pos = v[profile.i_start:][1:] > 0
    return bool(np.all(d <= 0)), bool(np.all(r[pos] < 0))


def fibre_trace(profile: StationaryProfile, theta: float, lam: float, t, k_min: int, k_max: int) -> np.ndarray:
    """``hbar(k + 1 - lam - psi(t, theta))`` for ``k = k_min..k_max``.

    ``t`` is a float or an exact ``(n, s)`` pair with ``0 <= s < 1``.
    """
    if isinstance(t, tuple):
        ph = psi_exact(t[0], t[1], theta)
    else:
        ph = psi(t, theta)
    k = np.arange(k_min, k_max + 1)
    return np.asarray(profile(k + 1.0 - lam - ph, warn=True), dtype=float)


def best_shift(p1: StationaryProfile, p2: StationaryProfile, *, span: float = 0.5) -> Tuple[float, float]:
    """Shift ``L`` minimising ``sup |p1(x) - p2(x - L)|`` on p1's resolved table.

    Starts from the mass-matching shift ``ln(M1 / M2) / alpha`` and refines it
    with a bounded scalar search. Returns ``(L, sup difference)``.
    """
    a = p1.params.alpha
    guess = math.log(p1.mass() / p2.mass()) / a
    x = p1.x[p1.i_start:]
    v = p1.values[p1.i_start:]

    def err(L):
        return float(np.max(np.abs(v - p2(x - L, warn=False))))

    r = minimize_scalar(err, bounds=(guess - span, guess + span), method="bounded",
                        options={"xatol": 1e-12})
    L = float(r.x) if r.fun < err(guess) else guess
    return L, err(L)


# -- IO ----------------------------------------------------------------------


def export_profile(profile: StationaryProfile, csv_path) -> Path:
    """Write ``x, hbar`` columns plus a JSON sidecar next to the CSV."""
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "hbar"])
        for xv, hv in zip(profile.x, profile.values):
            w.writerow([repr(float(xv)), repr(float(hv))])
    meta = {
        "gamma": profile.params.gamma,
        "alpha": profile.params.alpha,
        "sigma": profile.sigma,
        "a": profile.a,
        "shift_applied": profile.shift_applied,
        "dx": profile.dx,
        "i_start": profile.i_start,
        "tail_C": profile.tail_C,
        "tail_L": profile.tail_L,
    }
    sidecar = csv_path.with_suffix(".json")
    sidecar.write_text(json.dumps(meta, indent=2))
    return csv_path


def import_profile(csv_path) -> StationaryProfile:
    csv_path = Path(csv_path)
    meta = json.loads(csv_path.with_suffix(".json").read_text())
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    return StationaryProfile(
        params=ModelParams(meta["gamma"]),
        x0=float(data[0, 0]),
        dx=float(meta["dx"]),
        values=data[:, 1].copy(),
        sigma=float(meta["sigma"]),
        a=float(meta["a"]),
        shift_applied=float(meta["shift_applied"]),
        i_start=int(meta["i_start"]),
        tail_C=float(meta["tail_C"]),
        tail_L=float(meta["tail_L"]),
    )
