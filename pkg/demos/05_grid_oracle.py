# Cross-check against a plain upwind solver on a uniform x-grid.
#
# The grid solver knows nothing about fibres. Agreement to first order in dx
# is evidence that both are solving the same equation.
import numpy as np

from coag.fibre import FibreBundle, default_window, evolve_bundle, init_fibre
from coag.geometry import ModelParams
from coag.oracle import compare_with_fibres, evolve_grid, init_grid, to_original_variables
from coag.profile import build_profile

p = ModelParams(0.0)
prof = build_profile(p)
h0 = lambda x: np.exp(-0.5 * (np.asarray(x) - 1.0) ** 2)

k_min, k_max = default_window(p, k_max=14)
bundle = FibreBundle.from_states([init_fibre(h0, th, k_min, k_max, p) for th in np.arange(8) / 8])
evolve_bundle(bundle, 2.0)

for e in (7, 8, 9):
    g = init_grid(h0, p, -50.0, 14.0, 2.0**-e)
    m = g.mass()
    g = evolve_grid(g, 2.0)
    c = compare_with_fibres(g, bundle)
    print(f"dx=2^-{e}  sup {c['sup']:.2e}  weighted l1 {c['weighted_l1']:.2e}  mass drift {abs(g.mass() - m) / m:.1e}")

# back to the original size variable
ov = to_original_variables(g)
print("tau", ov["tau"], " int xi F dxi", ov["mass_F"], " from h", ov["mass_F_from_h"])
