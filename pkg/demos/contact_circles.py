"""
Contact circles on the torus and the sphere
===========================================

For the circle w(t) = cos(t) w1 + sin(t) w2 of a top, w ^ dw = -k vol at every
t, so the circle is taut exactly when the top is a contact top.
"""

import numpy as np

from contact_tops import FormCircle, builtin_model, circle_report, k_cartan_normalize, k_cartan_residual

for n in (1, 2, 3):
    r = circle_report(builtin_model("torus3", n=n))
    print(f"torus3(n={n}): {r.classification}, contact value {r.to_dict()['contact_value']:+.6f}, taut={r.taut}")

r = circle_report(builtin_model("s3"))
print(f"s3: contact value {r.to_dict()['contact_value']:+.6f}, round={r.round}")

# tilting the second generator keeps the value constant but bends the Reeb family
tilted = FormCircle((1, 0, 0), (0, 0.5, 0.1))
r = circle_report(builtin_model("torus3", n=1), tilted)
print(f"tilted circle on torus3(1): taut={r.taut} roundness residual {r.roundness:.6f}")

# a circle through an integrable form is neither contact nor integrable
r = circle_report(builtin_model("heisenberg"), FormCircle((1, 0, 0), (0, 0, 1)))
print("heisenberg (w1, w3):", r.classification, "witness at theta =", r.witness["theta"])

# rescaling the coframe brings a contact top to the normal form with K = sign(ck)
for name, c, k in (("s3", 2.0, 2.0), ("torus3", 0.0, 1.0)):
    kc = k_cartan_normalize(c, k)
    res = k_cartan_residual(builtin_model(name).without_structure(), kc)
    print(f"{name}: K={kc.K} scaling={np.round(kc.scaling, 3)} identity residual {res:.1e}")
