import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eulermaxwell.decay import (
    BOUND_TOL,
    bound_check,
    c_gamma,
    c_gamma_s,
    composite_check,
    fit_exponent,
    gamma_s_validity,
    interpolation_check,
    interpolation_constants,
    theoretical_exponent,
    weighted_series,
    write_report,
)
from eulermaxwell.grid import GridSpec, ScalarField

T = np.linspace(0.0, 50.0, 201)


class TestExponents:
    def test_c_gamma_exact(self):
        assert c_gamma(Fraction(5, 3)) == Fraction(-1, 2)
        assert c_gamma(5 / 3) == -0.5
        assert c_gamma(1.4) == -0.9
        assert c_gamma(2) == -0.5

    def test_c_gamma_s(self):
        for g in (1.2, 1.4, 5 / 3, 2.0):
            assert c_gamma_s(g, 0) == float(c_gamma(g))
        assert c_gamma_s(1.4, 3) == 2.1

    def test_theoretical_exponent(self):
        assert theoretical_exponent(1.4, 0) == 0.9
        assert theoretical_exponent(1.4, 3) == -2.1
        assert theoretical_exponent(1.4, 1) == -0.1

    @settings(max_examples=40, deadline=None)
    @given(g=st.floats(1.01, 3.0), s=st.floats(0.0, 5.0))
    def test_affine_in_sigma(self, g, s):
        assert theoretical_exponent(g, s + 1.0) - theoretical_exponent(g, s) == pytest.approx(-1.0, abs=1e-12)

    def test_gamma_must_exceed_one(self):
        with pytest.raises(ValueError):
            c_gamma(1.0)
        with pytest.raises(ValueError):
            theoretical_exponent(0.9, 0.0)


class TestFit:
    def test_exact_power_law(self):
        f = fit_exponent(list(zip(T, (1 + T) ** -2.0)), (1.0, 50.0))
        assert f.slope == pytest.approx(-2.0, abs=1e-10) and not f.flagged

    def test_exponential_flagged(self):
        f = fit_exponent(list(zip(T, 3 * np.exp(-T))), (5.0, 50.0))
        assert f.slope < -5 and f.flagged

    def test_constant(self):
        assert fit_exponent(list(zip(T, np.full_like(T, 4.0))), (1, 50)).slope == pytest.approx(0.0, abs=1e-12)

    def test_default_window_and_errors(self):
        f = fit_exponent(list(zip(T, (1 + T) ** 0.5)))
        assert f.window == (10.0, 50.0)
        with pytest.raises(ValueError):
            fit_exponent(list(zip(T[:5], T[:5] + 1)), (0, 1))
        with pytest.raises(ValueError):
            fit_exponent(list(zip(T, -np.ones_like(T))), (1, 50))


class TestBoundCheck:
    def test_exact_envelope_passes_with_zero_margin(self):
        bc = bound_check(list(zip(T, 2.5 * (1 + T) ** -2.1)), -2.1, 1.0)
        assert bc.passed and bc.margin == pytest.approx(0.0, abs=1e-12)
        assert bc.constant == pytest.approx(2.5)

    def test_wrong_exponent_fails(self):
        assert not bound_check(list(zip(T, 2.5 * (1 + T) ** -1.6)), -2.1, 1.0).passed

    def test_tolerance(self):
        v = (1 + T) ** -1.0
        v[-1] *= 1 + 0.5 * BOUND_TOL
        assert bound_check(list(zip(T, v)), -1.0, 0.0).passed
        v[-1] *= 1 + BOUND_TOL
        assert not bound_check(list(zip(T, v)), -1.0, 0.0).passed

    def test_t_end_restricts(self):
        v = (1 + T) ** -1.0
        v[T > 30] *= 2
        assert bound_check(list(zip(T, v)), -1.0, 1.0, t_end=30.0).passed


class TestComposite:
    def test_bounded_for_theoretical_decay(self):
        s, g = 3.0, 1.4
        x0 = (1 + T) ** theoretical_exponent(g, 0)
        xs = (1 + T) ** theoretical_exponent(g, s)
        rep = composite_check(T, x0, xs, s, g)
        assert rep.bounded and rep.constant >= 0

    def test_weighted_series(self):
        w = weighted_series(T, (1 + T) ** -2.0, 1.4, 3.0, 0.1)
        assert np.allclose(w, (1 + T) ** (2.1 - 0.1 - 2.0))


class TestInterpolation:
    @pytest.mark.parametrize("k", [2, 5, 9])
    def test_single_mode_closed_forms(self, k):
        # sin(kx) on [-pi, pi): sup = 1, |f'|_inf = k, X0 = sqrt(pi), Xs = k^s sqrt(pi)
        g = GridSpec(64, np.pi, 1)
        c = interpolation_constants(ScalarField(g, np.sin(k * g.coords())), 3.0)
        x0 = np.sqrt(np.pi)
        assert c["hs1"] == pytest.approx(1.0, rel=1e-12)
        assert c["sup"] * x0 * k**1.5 == pytest.approx(1.0, rel=1e-12)
        assert c["dsup"] * x0 * k**1.5 == pytest.approx(1.0, rel=1e-12)

    def test_zero_field_skipped(self):
        g = GridSpec(16, 1.0, 1)
        rep = interpolation_check([ScalarField.zeros(g)], 3.0)
        assert rep.skipped == 1 and rep.samples == 1

    def test_stable_across_resolution(self):
        vals = []
        for n in (64, 128):
            g = GridSpec(n, 4.0, 1)
            x = g.coords()
            vals.append(interpolation_check([ScalarField(g, np.exp(-2 * x**2))], 3.0).constants)
        for k in vals[0]:
            assert 0.5 <= vals[0][k] / vals[1][k] <= 2.0


class TestValidity:
    def test_s3_no_discrepancy(self):
        r = gamma_s_validity(1.4, 3)
        assert r.condP_ok and r.theorem_ok and not r.discrepancy
        assert r.condP_window == (2.5, 5.5) and r.theorem_window == (2.5, 6.5)

    def test_s6_discrepancy(self):
        r = gamma_s_validity(1.4, 6)
        assert not r.condP_ok and r.theorem_ok and r.discrepancy

    def test_exceptional_branch(self):
        r = gamma_s_validity(2.0, 40.0)
        assert r.exceptional and r.exceptional_ok and not r.gamma_ok
        assert not gamma_s_validity(1.3, 3.0).exceptional

    def test_report_serialises(self, tmp_path):
        write_report(tmp_path / "r.json", {"a": np.float64(1.5), "b": np.arange(3), "c": Fraction(1, 2), "d": np.bool_(True)})
        assert json.loads((tmp_path / "r.json").read_text()) == {"a": 1.5, "b": [0, 1, 2], "c": 0.5, "d": True}
