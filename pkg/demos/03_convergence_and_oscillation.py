# Long-time behaviour.
#
# With constant m0 the solution settles onto one shifted profile. With
# m0(theta) = e^{a lam}(1 + eps sin 2 pi theta) every fibre settles onto its
# own shift, so in x the solution keeps oscillating with period 1.
import numpy as np

from coag.experiments import ExperimentConfig, run_scenario

conv = run_scenario(ExperimentConfig("converge-constant-m0", out_dir="out/converge"))
t, d = conv.series["distance"]
for ti, di in zip(t[::16], d[::16]):
    print(f"t={ti:5.1f}  distance={di:.3e}")

osc = run_scenario(ExperimentConfig("oscillate", out_dir="out/oscillate"))
print(osc.summary["best_single_shift"], osc.summary["best_single_distance"])
print("distance to the mu-shifted family at T:", osc.summary["distance_final"])

th, fitted, predicted = osc.series["shifts"]
print("fitted vs predicted shift, worst gap:", np.max(np.abs(fitted - predicted)))

for v in conv.verdicts + osc.verdicts:
    print(("PASS" if v.passed else "FAIL"), v.name, f"{v.value:.3g}", v.relation, v.tolerance)
