"""
Building a top from a spinning metric
=====================================

A spinning frame is a top up to a rotation of (X1, X2) about the pivot.  The
rotation angle psi solves d psi = alpha, where alpha is read off the brackets.
"""

import numpy as np

from contact_tops import build_top, builtin_model, extract_spinning_data, rotate_frame
from contact_tops.expr import compile_expr, parse

# scramble the sphere frame by a position-dependent angle
angle = "0.7*q1 + 0.4*q2*q3"
scrambled = rotate_frame(builtin_model("s3"), f"-({angle})")

data = extract_spinning_data(scrambled)
print(f"c12^3 = {data.c12_3:.9f}, beta = {data.beta:.9f}")

res = build_top(data)
tc = res.classification
print(f"rebuilt: top={tc.is_top} c={tc.c:.9f} k={tc.k:.9f} (h = {res.h:.9f})")

# the recovered angle differs from the scramble by a constant
x = scrambled.domain.sample(200, 3)
psi0 = compile_expr(parse(angle, scrambled.coords), scrambled.coords)(x)
print("spread of psi - psi0:", float(np.ptp(res.psi(x) - psi0)))

# on flat space the constant h is free: h = 1 gives the torus top, h = 0 the parallel frame
flat = extract_spinning_data(builtin_model("flat3"))
for h in (1.0, 0.0):
    tc = build_top(flat, h).classification
    print(f"flat3, h={h:g}: algebra {tc.algebra}, (c, k) = ({tc.c:.6f}, {tc.k:.6f})")

# on the torus the angle must close up around each circle factor
torus = extract_spinning_data(builtin_model("torus3", n=1))
try:
    build_top(torus, 0.5)
except ValueError as exc:
    print("torus3, h=0.5:", exc)
