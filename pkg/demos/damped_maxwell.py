"""Damped free Maxwell: a plane wave loses energy at exactly ``2 alpha``.

With ``E_t = curl B - alpha E`` and ``B_t = -curl E - alpha B`` the energy
``(|E|^2 + |B|^2)/2`` decays like ``exp(-2 alpha t)`` and ``div B`` stays zero.

Run with ``python demos/damped_maxwell.py``.
"""

import numpy as np

from eulermaxwell import GridSpec, exact_plane_wave, run_maxwell_free

grid = GridSpec(16, 4.0, 3)
alpha = 0.5
mode, pol = (1, 1, 0), (1.0, -1.0, 0.5)

# %% Integrate the closed-form wave and compare against the exact rate
wave = exact_plane_wave(grid, mode, pol, alpha, 0.0, amplitude=0.3)
traj = run_maxwell_free(wave, 1e-2, 4.0, alpha, alpha, snapshots=8)
t, energy = traj.column("t"), traj.column("energy")
for ti, ei in zip(t, energy):
    print(f"t = {ti:4.1f}  energy / energy(0) = {ei / energy[0]:.10f}  exp(-2 alpha t) = {np.exp(-2 * alpha * ti):.10f}")

# %% The final state matches the travelling closed form
exact = exact_plane_wave(grid, mode, pol, alpha, 4.0, amplitude=0.3)
print(f"\nmax |E - E_exact| at t = 4: {np.max(np.abs(traj.final.E.values - exact.E.values)):.2e}")
print(f"max div B residual: {np.max(traj.column('divB')):.2e}")

# %% Unequal damping: only the slower rate survives
slow = run_maxwell_free(wave, 1e-2, 4.0, 0.2, 0.8, snapshots=4)
rate = -np.log(slow.column("energy")[-1] / slow.column("energy")[0]) / 4.0
print(f"\nalpha1 = 0.2, alpha2 = 0.8: observed energy rate {rate:.3f}, at least 2 min(alpha) = 0.4")
