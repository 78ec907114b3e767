import math

import numpy as np
import pytest

from eulermaxwell.grid import GridSpec, VectorField, random_bandlimited, workspace
from eulermaxwell.maxwell import (
    CFL_RK4,
    FreeEMState,
    _rk4_spectral,
    _RK4Kernel,
    decay_check_free,
    divergence_residual,
    exact_plane_wave,
    max_stable_dt,
    run_maxwell_free,
    step_maxwell_free,
)

MODE, POL = (1, 2, 0), (2.0, -1.0, 0.5)


@pytest.fixture(scope="module")
def grid():
    return GridSpec(16, 4.0, 3)


class TestExactPlaneWave:
    def test_t0_returns_initial_pair(self, grid):
        w = exact_plane_wave(grid, MODE, POL, 0.5, 0.0)
        assert divergence_residual(w.E) < 1e-14 and divergence_residual(w.B) < 1e-14
        assert np.max(np.abs(w.E.values)) == pytest.approx(2.0)  # largest polarization component

    def test_amplitude_factor(self, grid):
        a = exact_plane_wave(grid, MODE, POL, 0.5, 0.0)
        b = exact_plane_wave(grid, MODE, POL, 0.5, 2.0)
        assert b.energy() / a.energy() == pytest.approx(math.exp(-2.0), rel=1e-12)
        assert math.sqrt(b.energy() / a.energy()) == pytest.approx(0.367879, abs=1e-6)

    def test_undamped_energy_constant(self, grid):
        e = [exact_plane_wave(grid, MODE, POL, 0.0, t).energy() for t in (0.0, 0.7, 3.1)]
        assert max(e) - min(e) <= 1e-12 * e[0]

    def test_rejects_longitudinal_polarization(self, grid):
        with pytest.raises(ValueError):
            exact_plane_wave(grid, (1, 0, 0), (1.0, 0.0, 0.0), 0.5, 0.0)


class TestStepper:
    def test_zero_state(self, grid):
        z = FreeEMState(0.0, VectorField.zeros(grid), VectorField.zeros(grid))
        out = step_maxwell_free(z, 1e-2, 0.5, 0.5)
        assert np.all(out.E.values == 0) and np.all(out.B.values == 0) and out.t == pytest.approx(1e-2)

    def test_matches_exact_solution(self):
        g = GridSpec(32, 4.0, 3)
        traj = run_maxwell_free(exact_plane_wave(g, MODE, POL, 0.5, 0.0), 1e-3, 1.0, 0.5, 0.5, snapshots=10)
        ref = exact_plane_wave(g, MODE, POL, 0.5, traj.final.t)
        assert traj.final.t == pytest.approx(1.0)
        assert np.max(np.abs(traj.final.E.values - ref.E.values)) <= 1e-8
        assert np.max(np.abs(traj.final.B.values - ref.B.values)) <= 1e-8

    def test_closed_form_kernel_equals_four_stage_rk4(self, grid):
        ws = workspace(grid)
        rng = np.random.default_rng(0)
        F = np.stack([random_bandlimited(grid, rng, kmax=4).values for _ in range(6)])
        Eh, Bh = ws.fft(F[:3]), ws.fft(F[3:])
        # make the fields solenoidal, as the stepper requires
        P = np.eye(3)[:, :, None, None, None] - np.einsum("i...,j...->ij...", ws.xi, ws.xi) / np.where(ws.xi_sq > 0, ws.xi_sq, 1.0)
        Eh = np.einsum("ij...,j...->i...", P, Eh)
        Bh = np.einsum("ij...,j...->i...", P, Bh)
        dt = 0.5 * max_stable_dt(grid)
        e1, b1 = _rk4_spectral(ws, Eh, Bh, dt)
        e2, b2 = _RK4Kernel(ws, dt).step(Eh, Bh)
        scale = np.max(np.abs(Eh)) + np.max(np.abs(Bh))
        assert np.max(np.abs(e1 - e2)) <= 1e-14 * scale
        assert np.max(np.abs(b1 - b2)) <= 1e-14 * scale

    def test_cfl_violation_raises(self, grid):
        st = exact_plane_wave(grid, MODE, POL, 0.5, 0.0)
        with pytest.raises(ValueError):
            step_maxwell_free(st, 1.01 * CFL_RK4 / np.max(np.abs(workspace(grid).xi)) * 10, 0.5, 0.5)

    def test_divergent_input_rejected(self, grid):
        E = VectorField(grid, np.stack([grid.positions()[0] * 0 + np.sin(np.pi * grid.positions()[0] / 4)] * 3))
        with pytest.raises(ValueError):
            FreeEMState(0.0, E, VectorField.zeros(grid))


class TestDecayCheck:
    def test_undamped_constant_energy(self, grid):
        traj = run_maxwell_free(exact_plane_wave(grid, MODE, POL, 0.0, 0.0), 1e-2, 2.0, 0.0, 0.0, snapshots=20)
        en = traj.column("energy")
        assert np.max(np.abs(en / en[0] - 1)) <= 1e-10

    def test_equal_damping_rate(self, grid):
        traj = run_maxwell_free(exact_plane_wave(grid, MODE, POL, 0.5, 0.0), 5e-3, 4.0, 0.5, 0.5, snapshots=40)
        rep = decay_check_free(traj)
        assert rep.monotone and rep.equal_rate_ok and rep.equal_rate_error <= 1e-6
        assert traj.column("energy")[-1] / traj.column("energy")[0] == pytest.approx(math.exp(-4.0), rel=1e-6)
        assert rep.envelope_ok
        # the bound with E(0) in place of 2 E(0) cannot hold at t = 0
        assert not rep.unhalved_t0_ok

    def test_unequal_damping_rate(self, grid):
        traj = run_maxwell_free(exact_plane_wave(grid, MODE, POL, 0.2, 0.0), 1e-2, 4.0, 0.2, 0.8, snapshots=40)
        rep = decay_check_free(traj)
        assert rep.equal_rate_ok is None
        assert rep.monotone and rep.envelope_ok
        assert rep.log_slope <= -0.4

    def test_divergence_after_many_steps(self, grid):
        traj = run_maxwell_free(exact_plane_wave(grid, MODE, POL, 0.5, 0.0), 1e-3, 10.0, 0.5, 0.5, snapshots=10)
        assert np.max(traj.column("divB")) <= 1e-11

    def test_csv(self, grid, tmp_path):
        traj = run_maxwell_free(exact_plane_wave(grid, MODE, POL, 0.5, 0.0), 1e-2, 0.5, 0.5, 0.5, snapshots=10)
        traj.write_csv(tmp_path / "m.csv")
        lines = (tmp_path / "m.csv").read_text().splitlines()
        assert lines[0].split(",")[:2] == ["t", "energy"] and len(lines) == len(traj.records) + 1
