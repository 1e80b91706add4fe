# Profiles from different normalisation constants are translates.
import numpy as np

from coag.geometry import ModelParams
from coag.profile import best_shift, build_profile, shoot_profile, sigma_root

p = ModelParams(0.0)
s = sigma_root(p)

# a -> a 2^sigma moves the raw profile one unit to the left
r1 = shoot_profile(p, a=1.0)
r2 = shoot_profile(p, a=2.0**s)
x = np.linspace(-3, 2, 11)
print(np.max(np.abs(r2(x) - r1(x + 1.0))))

# after normalisation every constant gives the same curve
base = build_profile(p, a=1.0)
for a in (0.01, 0.37, 5.0, 123.0):
    L, sup = best_shift(base, build_profile(p, a=a))
    print(f"a={a:7.2f}  best shift {L:+.2e}  sup difference {sup:.2e}")
