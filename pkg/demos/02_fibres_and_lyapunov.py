# The fibre picture.
#
# Along each fibre theta the solution is a chain phi_k obeying ODEs, and at
# times n + theta the labels shift by one. Mass follows a sawtooth law and the
# Lyapunov functional L only goes down from one jump to the next.
import math

import numpy as np

from coag.diagnostics import DiagnosticsObserver
from coag.fibre import FibreBundle, default_window, evolve_bundle, init_fibre
from coag.geometry import ModelParams
from coag.profile import build_profile

p = ModelParams(0.0)
prof = build_profile(p)
k_min, k_max = default_window(p, k_max=14)

# two bumps of hbar: m0 is the same on every fibre
h0 = lambda x: 0.5 * prof(x, warn=False) + 0.5 * prof(np.asarray(x) - 2.0, warn=False)
thetas = (np.arange(8) + 0.5) / 8
bundle = FibreBundle.from_states([init_fibre(h0, th, k_min, k_max, p) for th in thetas])
print("m0 per fibre:", bundle.m0)

samples = evolve_bundle(bundle, 10.0, observe=DiagnosticsObserver(prof))

# mass law, all samples
err = max(np.max(np.abs(s.data["mass"] - s.data["expected"]) / s.data["expected"]) for s in samples)
print("mass law, worst relative error:", err)

# L just before vs just after each jump
pre = [s for s in samples if s.tag == "pre_jump"]
post = [s for s in samples if s.tag == "post_jump"]
ratios = np.concatenate([a.data["L"] / b.data["L"] for a, b in zip(pre, post)])
print("L_pre / L_post:", ratios.min(), ratios.max(), "vs e^alpha =", math.exp(p.alpha))

# L(n + theta) for fibre 0
seq = [s.data["L"][list(s.rows).index(0)] for s in post if 0 in s.rows]
for n, L in enumerate(seq, 1):
    print(f"  n={n:2d}  L={L:.3e}")
