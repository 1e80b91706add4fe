"""Named initial-data families with known fibre masses.

Every family is described by a plain dict (``{"family": name, **params}``)
so that configs can carry it. ``m0_exact(theta)`` is returned when the
weighted fibre mass has a closed form; otherwise it is ``None`` and the
fibre engine computes it from the lattice sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from .geometry import ModelParams
from .profile import StationaryProfile

FAMILIES = (
    "shifted-profile",
    "modulated-profile",
    "profile-mixture",
    "gaussian-bump-in-x",
    "compact-block",
    "random-fourier",
)


@dataclass
class InitialData:
    family: str
    h0: Callable[[np.ndarray], np.ndarray]
    m0_exact: Optional[Callable[[np.ndarray], np.ndarray]]
    desc: Dict = field(default_factory=dict)
    constant_m0: bool = False


def _hbar(profile: StationaryProfile):
    return lambda x: profile(x, warn=False)


def make_initial_data(desc: Dict, profile: StationaryProfile, seed: int = 0) -> InitialData:
    """Build the family named by ``desc["family"]``."""
    desc = dict(desc)
    name = desc.get("family")
    if name not in FAMILIES:
        raise ValueError(f"unknown initial-data family {name!r}; choose from {FAMILIES}")
    params: ModelParams = profile.params
    a = params.alpha
    hb = _hbar(profile)

    if name == "shifted-profile":
        lam = float(desc.get("shift", 1.0))
        m = math.exp(a * lam)
        return InitialData(name, lambda x: hb(np.asarray(x, dtype=float) - lam),
                           lambda th: np.full_like(np.asarray(th, dtype=float), m), desc, True)

    if name == "modulated-profile":
        lam = float(desc.get("shift", 1.0))
        eps = float(desc.get("eps", 0.2))
        if not 0.0 <= eps < 1.0:
            raise ValueError("eps must lie in [0, 1)")

        def h0(x):
            x = np.asarray(x, dtype=float)
            return hb(x - lam) * (1.0 + eps * np.sin(2.0 * np.pi * x))

        # sin(2 pi (k + theta)) = sin(2 pi theta), so the factor leaves the lattice sum
        def m0(th):
            return math.exp(a * lam) * (1.0 + eps * np.sin(2.0 * np.pi * np.asarray(th, dtype=float)))

        return InitialData(name, h0, m0, desc, eps == 0.0)

    if name == "profile-mixture":
        weights = [float(w) for w in desc.get("weights", [0.5, 0.5])]
        shifts = [float(s) for s in desc.get("shifts", [0.0, 2.0])]
        if len(weights) != len(shifts) or any(w < 0 for w in weights):
            raise ValueError("mixture needs matching nonnegative weights and shifts")
        m = sum(w * math.exp(a * s) for w, s in zip(weights, shifts))

        def h0(x):
            x = np.asarray(x, dtype=float)
            return sum(w * hb(x - s) for w, s in zip(weights, shifts))

        return InitialData(name, h0, lambda th: np.full_like(np.asarray(th, dtype=float), m), desc, True)

    if name == "gaussian-bump-in-x":
        c = float(desc.get("center", 1.0))
        w = float(desc.get("width", 1.0))
        amp = float(desc.get("amplitude", 1.0))
        if w <= 0 or amp < 0:
            raise ValueError("width must be > 0 and amplitude >= 0")
        return InitialData(name, lambda x: amp * np.exp(-0.5 * ((np.asarray(x, dtype=float) - c) / w) ** 2),
                           None, desc, False)

    if name == "compact-block":
        # A e^{-alpha x} on [start, start + n): every fibre sees exactly n points of weight A
        start = float(desc.get("start", -2.0))
        n = int(desc.get("length", 3))
        amp = float(desc.get("amplitude", 1.0))
        if n < 1 or amp < 0:
            raise ValueError("length must be >= 1 and amplitude >= 0")

        def h0(x):
            x = np.asarray(x, dtype=float)
            inside = (x >= start) & (x < start + n)
            return np.where(inside, amp * np.exp(-a * x), 0.0)

        return InitialData(name, h0, lambda th: np.full_like(np.asarray(th, dtype=float), amp * n), desc, True)

    # random-fourier: hbar(x - lam) (1 + sum_j c_j sin(2 pi j x + p_j)), period-1 modulation
    lam = float(desc.get("shift", 1.0))
    modes = int(desc.get("modes", 3))
    eps = float(desc.get("eps", 0.3))
    rng = np.random.default_rng(seed)
    c = rng.uniform(0.0, 1.0, modes)
    c *= eps / max(c.sum(), 1e-300)
    ph = rng.uniform(0.0, 2.0 * np.pi, modes)
    j = np.arange(1, modes + 1)
    desc.update(coefficients=c.tolist(), phases=ph.tolist())

    def mod(x):
        x = np.asarray(x, dtype=float)
        return 1.0 + np.sum(c * np.sin(2.0 * np.pi * j * x[..., None] + ph), axis=-1)

    return InitialData(name, lambda x: hb(np.asarray(x, dtype=float) - lam) * mod(x),
                       lambda th: math.exp(a * lam) * mod(th), desc, False)
