"""
Recognizing tops from their frames
==================================

A frame is a top when its brackets close up as
[X1, X2] = c X3, [X2, X3] = k X1, [X3, X1] = k X2 with constant c and k.
"""

import numpy as np

from contact_tops import builtin_model, classify_top, integrate_geodesics, rotate_frame, sample_velocities

# the unit quaternions with the frame qi, qj, qk
s3 = builtin_model("s3")
tc = classify_top(s3)
print(f"s3: c={tc.c:g} k={tc.k:g} algebra={tc.algebra} alpha={tc.alpha:g} beta={tc.beta:g}")

# the Heisenberg group is a top with k = 0, so its pencil is integrable
heis = builtin_model("heisenberg")
tc = classify_top(heis)
print(f"heisenberg: c={tc.c:g} k={tc.k:g} {tc.bundle_type}, spinning sign {tc.spinning_direction_sign}")

# brackets are measured by finite differences once the tables are dropped
tc = classify_top(heis.without_structure())
print(f"heisenberg, numeric brackets: c={tc.c:.10f} k={tc.k:.1e}")

# rotating X1, X2 by a non-constant angle destroys the pattern
bad = classify_top(rotate_frame(s3, "0.7*q1 + 0.4*q2*q3"))
print("rotated s3 is a top:", bad.is_top, "| off-pattern residual", round(bad.residuals["off_pattern"], 3))

# along any geodesic of a top, X1 turns about X3 at the constant rate (k - c/2) a3
a0 = sample_velocities(5, seed=1, n_pairs=0)
tr = integrate_geodesics(heis, heis.domain.sample(5, 1), a0, T=10.0, h=1e-2)
print("rot13 / a3 along heisenberg geodesics:", np.round(tr.rot13[-1] / tr.a[-1, :, 2], 9))
