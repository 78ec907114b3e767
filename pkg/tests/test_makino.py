import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eulermaxwell.grid import GridSpec, ScalarField, VectorField, curl, dealias, div, grad, sup_norm, x_sigma
from eulermaxwell.makino import (
    FluidEMState,
    SimParams,
    charge_density,
    clip_vacuum,
    compatibility_residual,
    desymmetrize,
    energy_density_total,
    from_makino,
    generate_family,
    ohm_current,
    prepare_data,
    pressure,
    symmetrize,
    to_makino,
)
from eulermaxwell.maxwell import exact_plane_wave


@pytest.fixture
def grid():
    return GridSpec(16, 4.0, 3)


def const(grid, value):
    return ScalarField(grid, np.full(grid.shape, float(value)))


class TestParams:
    def test_defaults_and_derived(self):
        p = SimParams()
        assert (p.A, p.gamma, p.alpha1, p.alpha2) == (1.0, 1.4, 0.5, 0.5)
        assert p.density_exponent == pytest.approx(5.0)
        assert p.acoustic == pytest.approx(0.2)
        assert p.alpha == 0.5

    @pytest.mark.parametrize("kw", [{"A": 0.0}, {"gamma": 1.0}, {"alpha1": -0.1}, {"alpha2": -1.0}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            SimParams(**kw)


class TestMakinoMap:
    def test_vacuum_maps_to_vacuum(self, grid):
        assert np.all(to_makino(const(grid, 0.0), SimParams()).values == 0.0)

    def test_unit_density(self, grid):
        rho = to_makino(const(grid, 1.0), SimParams())
        assert rho.values.flat[0] == pytest.approx(2 * math.sqrt(1.4) / 0.4, rel=1e-14)
        assert rho.values.flat[0] == pytest.approx(5.91608, abs=1e-5)

    @settings(max_examples=30, deadline=None)
    @given(d=st.floats(0.1, 10.0), gamma=st.floats(1.05, 3.0))
    def test_inverse_pair(self, d, gamma):
        g = GridSpec(8, 1.0, 1)
        p = SimParams(gamma=gamma)
        back = from_makino(to_makino(ScalarField(g, np.full(8, d)), p), p)
        assert np.allclose(back.values, d, rtol=1e-12)

    def test_pressure(self, grid):
        p = SimParams()
        assert np.all(pressure(const(grid, 0.0), p).values == 0.0)
        assert pressure(const(grid, 2.0), p).values.flat[0] == pytest.approx(2.0**1.4)
        assert pressure(const(grid, 2.0), p).values.flat[0] == pytest.approx(2.63902, abs=1e-5)
        assert pressure(const(grid, 3.0), p).values.flat[0] > pressure(const(grid, 2.0), p).values.flat[0]

    def test_clip_vacuum(self):
        vals, n = clip_vacuum(np.array([1.0, -1e-16, 0.0]))
        assert n == 1 and vals[1] == 0.0
        with pytest.raises(ValueError):
            clip_vacuum(np.array([1.0, -1e-6]))


class TestSources:
    def test_ohm_current(self, grid):
        u = VectorField.zeros(grid)
        u.values[0] = 1.0
        J = ohm_current(const(grid, 1.0), u)
        assert np.all(J.values[0] == -1.0) and np.all(J.values[1:] == 0.0)
        assert np.allclose(ohm_current(const(grid, 3.0), u).values, 3 * J.values)
        assert np.all(ohm_current(const(grid, 2.0), VectorField.zeros(grid)).values == 0)

    def test_charge_of_gradient_field(self):
        g = GridSpec(32, 2.0, 1)
        k = np.pi / g.L
        phi = ScalarField(g, np.sin(k * g.coords()))
        q = charge_density(grad(phi))
        assert np.allclose(q.values, k**2 * phi.values, atol=1e-12)
        assert np.all(charge_density(VectorField.zeros(g)).values == 0)

    def test_charge_of_curl_field(self, grid):
        F = generate_family("gaussian-bump", grid, b_amp=1.0)["B"]
        assert sup_norm(charge_density(curl(F))) < 1e-12


class TestCompatibility:
    def test_static_vacuum(self, grid):
        z = VectorField.zeros(grid)
        s0 = FluidEMState(0.0, const(grid, 0.0), z, z, z)
        s1 = FluidEMState(0.1, const(grid, 0.0), z, z, z)
        assert compatibility_residual(s0, s1, 0.5) == 0.0

    def test_plane_wave(self):
        g = GridSpec(16, 2.0, 3)
        w0 = exact_plane_wave(g, (1, 1, 0), (1.0, -1.0, 0.3), 0.5, 0.0)
        w1 = exact_plane_wave(g, (1, 1, 0), (1.0, -1.0, 0.3), 0.5, 1e-3)
        s0 = FluidEMState(0.0, const(g, 0.0), VectorField.zeros(g), w0.E, w0.B)
        s1 = FluidEMState(1e-3, const(g, 0.0), VectorField.zeros(g), w1.E, w1.B)
        assert compatibility_residual(s0, s1, 0.5) <= 1e-6

    def test_requires_ordered_snapshots(self, grid):
        z = VectorField.zeros(grid)
        s = FluidEMState(0.0, const(grid, 0.0), z, z, z)
        with pytest.raises(ValueError):
            compatibility_residual(s, s, 0.5)


class TestPrepareData:
    def test_h4_path(self, grid):
        f = generate_family("gaussian-bump", grid, u_amp=0.3, b_amp=1.0)
        st_ = prepare_data(f["rho"], f["velocity"], f["E"], f["B"], SimParams(), makino=True,
                           magnetic_from_velocity=True)
        assert np.allclose(st_.B.values, curl(st_.velocity).values, atol=1e-14)
        assert sup_norm(div(st_.B)) <= 1e-12

    def test_gauss_law_correction(self, grid):
        f = generate_family("gaussian-bump", grid, e_amp=0.0)
        q = ScalarField(grid, f["rho"].values - f["rho"].values.mean())
        st_ = prepare_data(f["rho"], f["velocity"], f["E"], f["B"], SimParams(), makino=True, charge=q)
        # the solve uses the dealiased charge
        assert sup_norm(div(st_.E) + dealias(q)) <= 1e-10

    def test_nonzero_mean_charge_rejected(self, grid):
        f = generate_family("gaussian-bump", grid)
        with pytest.raises(ValueError):
            prepare_data(f["rho"], f["velocity"], f["E"], f["B"], SimParams(), makino=True, charge=const(grid, 1.0))

    def test_budget_rescaling(self, grid):
        f = generate_family("gaussian-bump", grid, e_amp=0.1, b_amp=0.1)
        st_ = prepare_data(f["rho"], f["velocity"], f["E"], f["B"], SimParams(), makino=True, budget=1e-2)
        assert x_sigma((st_.rho, st_.velocity, st_.E, st_.B), 3.0) == pytest.approx(1e-2, rel=1e-10)

    def test_symmetrize_round_trip(self, grid):
        p = SimParams()
        f = generate_family("ring-current", grid, rho_amp=1.0)
        fs = prepare_data(f["rho"], f["velocity"], f["E"], f["B"], p, makino=True)
        back = desymmetrize(symmetrize(fs, p), p)
        assert np.allclose(back.density.values, fs.density.values, atol=1e-14)
        assert energy_density_total(back, p) == pytest.approx(energy_density_total(fs, p))


class TestFamilies:
    def test_unknown_family_and_parameter(self, grid):
        with pytest.raises(ValueError):
            generate_family("vortex", grid)
        with pytest.raises(ValueError):
            generate_family("gaussian-bump", grid, radius=1.0)

    def test_plane_wave_polarization_checked(self, grid):
        with pytest.raises(ValueError):
            generate_family("plane-wave", grid, mode=(1, 0, 0), polarization=(1.0, 0.0, 0.0))
        f = generate_family("plane-wave", grid, mode=(1, 0, 0), polarization=(0.0, 1.0, 0.0), e_amp=0.2)
        assert sup_norm(div(f["E"])) < 1e-12
        assert sup_norm(f["E"]) == pytest.approx(0.2)

    def test_bump_is_swirl(self):
        g = GridSpec(32, 4.0, 3)
        B = generate_family("gaussian-bump", g, b_amp=1.0)["B"]
        assert sup_norm(div(B)) < 1e-8 * sup_norm(B)
