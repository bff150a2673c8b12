"""Distance decay of the imaging value.

Away from the scatterer the imaging value falls off like the inverse square
of the distance, uniformly in the two-scale window exponent alpha. This demo
runs the decay study on a short sweep, prints the fitted log-log slope for
the positive-frequency case, then repeats at zero frequency where the
distance mechanism is absent and the normalized curve stays flat.

demos/configs/decay_full.cfg runs the dense sweep used for the headline
numbers (60 points per decade, slope -1.88 with alpha agreement 0.01).
"""

import numpy as np

from tdscope import parse_config, run_study

text = """
study = decay
kappa = 1.0
resolution = 6
eta = 0.02
points_per_decade = 20
tol_slope = 0.6
tol_alpha_pair = 0.6
"""

rep = run_study(parse_config(text))
print("status:", rep.status)
print("slope:", rep.results["slope"], "+-", rep.results["slope_stderr"])
print("expected:", rep.results["expected_slope"])
for entry in rep.results["alpha_pair"]:
    print("  alpha =", entry["alpha"], " slope =", entry["slope"])

# One ray of the sweep: distance, raw |T|, and the aperture-normalized value
# the fit uses (the two differ only at kappa = 0).
rows = np.asarray(rep.rays[0])
print("\nfirst ray, first and last samples:")
print("  dist %.3f  |T| %.3e  normalized %.3e" % tuple(rows[0]))
print("  dist %.3f  |T| %.3e  normalized %.3e" % tuple(rows[-1]))

# Zero frequency: nothing radiates, nothing decays.
rep0 = run_study(parse_config(text.replace("kappa = 1.0", "kappa = 0.0")))
print("\nkappa = 0 slope:", rep0.results["slope"], "(flat curve)")
