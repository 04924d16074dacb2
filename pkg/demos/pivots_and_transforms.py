"""
Pivots, curvature and frame changes
===================================

The sectional curvature of a spinning metric depends only on the angle phi
between the plane and the pivot: K = alpha cos^2(phi) + beta sin^2(phi).
"""

import numpy as np

from contact_tops import apply_transform, builtin_model, is_admissible_transform, verify_spinning_metric

heis = builtin_model("heisenberg")
for pivot in (1, 2, 3):
    r = verify_spinning_metric(heis, pivot=pivot)
    print(f"heisenberg pivot {pivot}: passed={r.passed} killing residual {r.killing_residual:.2g}")

r = verify_spinning_metric(heis)
print(f"alpha={r.alpha:.6f} beta={r.beta:.6f} law residual {r.law_residual:.1e}")

# on the round sphere any of the three fields can serve
print("s3 pivots:", [verify_spinning_metric(builtin_model("s3"), pivot=p).passed for p in (1, 2, 3)])

# scaling the plane by rho and the axis by nu keeps a top a top
s3 = builtin_model("s3")
for T in (np.diag([2.0, 2.0, 3.0]), np.diag([1.0, -1.0, 1.0])):
    t = apply_transform(s3, T)
    print(f"diag{tuple(np.diag(T).tolist())}: measured ({t.classification.c:.6f}, {t.classification.k:.6f})"
          f" predicted {tuple(round(v, 6) for v in t.predicted)}")

print(is_admissible_transform(np.diag([1.0, 2.0, 1.0])).diagnosis)
