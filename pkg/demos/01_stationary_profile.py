# Stationary profile: shoot, normalise, check.
#
# hbar solves a delay equation with a plateau on the left and a
# super-exponential tail on the right. We shoot it from the left asymptotics
# and confirm the integral identity and the lattice sum.
import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from coag.geometry import ModelParams
from coag.profile import build_profile, fit_tail, lattice_sum_spread, sigma_root, validate_integral_identity

p = ModelParams(gamma=0.0)
print("alpha   ", p.alpha)
print("plateau ", p.plateau)
print("sigma   ", sigma_root(p))

prof = build_profile(p)
print("shift applied by normalisation:", prof.shift_applied)
print("weighted mass:", prof.mass())

# the identity e^{ax} hbar(x) = int_{x-1}^x e^{as} hbar(s)^2 ds, checked pointwise
print("max relative residual:", validate_integral_identity(prof))

# sum_k e^{a(k+theta)} hbar(k+theta) should not depend on theta
dev, std = lattice_sum_spread(prof, 64)
print("lattice sum: max |nu - 1| =", dev)

C, L = fit_tail(prof)
print(f"tail: hbar <= exp({L:.2f} - {C:.2f} 2^x)")

# same thing for a second homogeneity
p2 = ModelParams(0.5)
prof2 = build_profile(p2)
print("gamma=0.5 plateau", p2.plateau, "sigma", prof2.sigma)

x = np.linspace(-6, 4, 800)
plt.plot(x, prof(x, warn=False), label="gamma = 0")
plt.plot(x, prof2(x, warn=False), label="gamma = 0.5")
plt.legend()
plt.xlabel("x")
plt.savefig("stationary_profile.svg")
