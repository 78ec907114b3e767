"""Expanding Burgers background: characteristics and decay envelopes.

The pressureless flow ``v_t + v.grad v = 0`` with ``v0(y) = y + delta grad psi``
is solved by characteristics ``x = y + t v0(y)``. Away from the identity the
flow still spreads like ``x/(1+t)``, and the gradient of the deviation decays.

Run with ``python demos/burgers_background.py``.
"""

import numpy as np

from eulermaxwell import GridSpec, FlowEval, InitialVelocity, estimate_suite

# %% A gradient bump of strength delta = 0.1 on top of the identity flow
vel = InitialVelocity.bump(delta=0.1, radius=1.0)
flow = FlowEval(vel)
print(f"epsilon = {vel.epsilon():.3f}  (distance of Dv0 from the negative axis)")

# %% Round trip: invert the flow map and push forward again
rng = np.random.default_rng(0)
y = rng.uniform(-1.5, 1.5, size=(2000, 3))
for t in (1.0, 10.0, 100.0):
    x = flow.forward_flow(t, y)
    err = np.max(np.abs(flow.invert_flow(t, x) - y))
    print(f"t = {t:6.1f}  round-trip error {err:.2e}")

# %% Decay envelopes over t in [1, 50] in the comoving frame
times = np.geomspace(1.0, 50.0, 16)
rep = estimate_suite(flow, times, GridSpec(32, 4.0, 3), sigmas=(1.0,))
print("\nfitted slopes of log(norm) against log(1+t):")
for key, slope in rep.slopes.items():
    print(f"  {key:14s} {slope:+.3f}")
