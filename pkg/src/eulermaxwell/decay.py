"""Decay exponents, power-law fits, envelope checks and validity windows.

The decay results are envelopes ``||f(t)|| <= C (1+t)^e`` with an
unspecified constant, so every check here fits or anchors ``C`` and then
tests the inequality. Exact rate equality is never asserted.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import minimize_scalar

from .grid import sobolev_seminorm, sup_norm, xdot_sigma, ScalarField, VectorField, grad

BOUND_TOL = 0.05
FIT_RESIDUAL_FLAG = 0.05


def c_gamma(gamma):
    """``min(1, 3(gamma-1)/2) - 3/2``.

    Exact (a ``Fraction``) when ``gamma`` is an int, ``Fraction`` or a float
    with a short decimal expansion such as 1.4; a float otherwise.
    """
    g = _exact(gamma)
    if g <= 1:
        raise ValueError("gamma must exceed 1")
    val = min(Fraction(1), Fraction(3, 2) * (g - 1)) - Fraction(3, 2)
    return val if isinstance(gamma, Fraction) else float(val)


def c_gamma_s(gamma, s):
    val = _exact(c_gamma(gamma)) + _exact(s)
    return float(val)


def theoretical_exponent(gamma, sigma) -> float:
    """Exponent ``3/2 - sigma - min(1, 3(gamma-1)/2)`` of the perturbation envelope."""
    g = _exact(gamma)
    if g <= 1:
        raise ValueError("gamma must exceed 1")
    return float(Fraction(3, 2) - _exact(sigma) - min(Fraction(1), Fraction(3, 2) * (g - 1)))


def _exact(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    # 1.4 -> 7/5 rather than the binary expansion of the float
    return Fraction(repr(float(x))) if np.isfinite(x) else Fraction(float(x))


@dataclass
class ExponentFit:
    sigma: float | None
    window: tuple
    slope: float
    constant: float
    residual: float
    samples: int

    @property
    def flagged(self) -> bool:
        """True when a power law describes the data poorly."""
        return self.residual > FIT_RESIDUAL_FLAG


def fit_exponent(series, window=None, sigma=None, min_samples: int = 8) -> ExponentFit:
    """Least-squares line through ``(log(1+t), log value)`` inside ``window``.

    ``residual`` is the largest relative deviation of the data from the fitted
    power law. ``window`` defaults to ``[max(1, T/5), T]``.
    """
    arr = np.asarray(series, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("series must be a sequence of (t, value) pairs")
    t, v = arr[:, 0], arr[:, 1]
    if window is None:
        T = float(np.max(t))
        window = (max(1.0, T / 5.0), T)
    t0, t1 = window
    if not t1 > t0 >= 0:
        raise ValueError("fit window needs t1 > t0 >= 0")
    sel = (t >= t0 - 1e-12) & (t <= t1 + 1e-12)
    if np.count_nonzero(sel) < min_samples:
        raise ValueError(f"fit window {window} holds {np.count_nonzero(sel)} samples, need {min_samples}")
    tw, vw = t[sel], v[sel]
    if np.any(vw <= 0) or not np.all(np.isfinite(vw)):
        raise ValueError("fit_exponent needs positive finite values in the window")
    x, y = np.log1p(tw), np.log(vw)
    slope, icpt = np.polyfit(x, y, 1)
    resid = float(np.max(np.abs(np.expm1(y - (slope * x + icpt)))))
    return ExponentFit(sigma, (float(t0), float(t1)), float(slope), float(np.exp(icpt)), resid, int(sel.sum()))


@dataclass
class BoundCheck:
    passed: bool
    exponent: float
    anchor: float
    constant: float
    margin: float
    tol: float = BOUND_TOL


def bound_check(series, exponent: float, anchor: float, tol: float = BOUND_TOL, t_end: float | None = None) -> BoundCheck:
    """Envelope test ``value(t) <= C (1+t)^e (1 + tol)`` for ``anchor <= t <= t_end``.

    ``C`` is read off the sample at ``anchor`` (the first sample at or after
    it). ``margin`` is the smallest relative slack ``1 - value/(C(1+t)^e)``
    over the tail; it is negative when the envelope is exceeded.
    """
    arr = np.asarray(series, dtype=float)
    t, v = arr[:, 0], arr[:, 1]
    sel = t >= anchor - 1e-12
    if t_end is not None:
        sel &= t <= t_end + 1e-12
    if not np.any(sel):
        raise ValueError("bound_check: no samples at or after the anchor time")
    tt, vv = t[sel], v[sel]
    C = vv[0] / (1.0 + tt[0]) ** exponent
    ratio = vv / (C * (1.0 + tt) ** exponent)
    margin = float(np.min(1.0 - ratio))
    return BoundCheck(bool(np.all(ratio <= 1.0 + tol)), float(exponent), float(tt[0]), float(C), margin, tol)


@dataclass
class CompositeCheck:
    constant: float
    bounded: bool
    sup_value: float
    values: np.ndarray = field(repr=False)


def composite_check(times, xdot0, xdots, s: float, gamma: float, growth_cap: float = 10.0) -> CompositeCheck:
    """Boundedness of ``sqrt((1+t)^{2s} Xs^2 + X0^2) (1+t)^{c_gamma} exp(-C t/(1+t))``.

    ``C >= 0`` is fitted to make the series as flat as possible (smallest
    ratio of its maximum to its initial value). The composite is declared
    bounded when this ratio stays below ``growth_cap``.
    """
    t = np.asarray(times, dtype=float)
    x0 = np.asarray(xdot0, dtype=float)
    xs = np.asarray(xdots, dtype=float)
    cg = c_gamma(gamma)
    base = np.sqrt((1.0 + t) ** (2 * s) * xs**2 + x0**2) * (1.0 + t) ** cg
    w = t / (1.0 + t)

    def spread(C):
        vals = base * np.exp(-C * w)
        return float(np.log(np.max(vals) / vals[0]))

    opt = minimize_scalar(spread, bounds=(0.0, 50.0), method="bounded")
    C = float(opt.x)
    vals = base * np.exp(-C * w)
    ratio = float(np.max(vals) / vals[0])
    return CompositeCheck(C, bool(ratio <= growth_cap), float(np.max(vals)), vals)


def weighted_series(times, xdots, gamma: float, s: float, a: float) -> np.ndarray:
    """``(1+t)^{c_{gamma,s} - a} Xs(t)`` for a caller-chosen weight ``a``."""
    t = np.asarray(times, dtype=float)
    return (1.0 + t) ** (c_gamma_s(gamma, s) - a) * np.asarray(xdots, dtype=float)


@dataclass
class InterpolationReport:
    constants: dict
    skipped: int
    samples: int


def interpolation_constants(f, s: float) -> dict | None:
    """Empirical constants of the three interpolation inequalities for one field.

    Returns ``None`` when a norm vanishes. For vector fields the derivative
    sup norm is taken over all components of the Jacobian.
    """
    x0 = sobolev_seminorm(f, 0.0)
    xs = sobolev_seminorm(f, s)
    if x0 == 0 or xs == 0:
        return None
    if isinstance(f, VectorField):
        dsup = max(sup_norm(grad(c)) for c in f.components)
    else:
        dsup = sup_norm(grad(f))
    return {
        "sup": sup_norm(f) / (x0 ** (1 - 1.5 / s) * xs ** (1.5 / s)),
        "dsup": dsup / (x0 ** (1 - 2.5 / s) * xs ** (2.5 / s)),
        "hs1": sobolev_seminorm(f, s - 1) / (x0 ** (1 / s) * xs ** (1 - 1 / s)),
    }


def interpolation_check(fields, s: float) -> InterpolationReport:
    """Largest empirical interpolation constants over a sequence of fields."""
    best = {"sup": 0.0, "dsup": 0.0, "hs1": 0.0}
    skipped = 0
    for f in fields:
        c = interpolation_constants(f, s)
        if c is None:
            skipped += 1
            continue
        for k in best:
            best[k] = max(best[k], c[k])
    return InterpolationReport(best, skipped, len(fields) if hasattr(fields, "__len__") else -1)


@dataclass
class ValidityReport:
    gamma: float
    s: float
    gamma_ok: bool
    condP_ok: bool
    theorem_ok: bool
    exceptional: bool
    exceptional_ok: bool
    discrepancy: bool
    condP_window: tuple
    theorem_window: tuple


def _integer_k(gamma) -> int | None:
    g = _exact(gamma)
    if g <= 1:
        return None
    k = Fraction(2) / (g - 1)
    return int(k) if k.denominator == 1 else None


def gamma_s_validity(gamma, s) -> ValidityReport:
    """Evaluate both admissible ``s`` windows and the integer-``k`` exception."""
    g = _exact(gamma)
    if g <= 1:
        raise ValueError("gamma must exceed 1")
    sv = _exact(s)
    cond_hi = Fraction(1, 2) + 2 / (g - 1)
    thm_hi = Fraction(3, 2) + 2 / (g - 1)
    low = Fraction(5, 2)
    condP = low < sv < cond_hi
    thm = low < sv < thm_hi
    k = _integer_k(gamma)
    return ValidityReport(
        gamma=float(gamma), s=float(s),
        gamma_ok=bool(1 < g < Fraction(5, 3)),
        condP_ok=bool(condP), theorem_ok=bool(thm),
        exceptional=k is not None, exceptional_ok=bool(k is not None and sv > low),
        discrepancy=bool(condP != thm),
        condP_window=(2.5, float(cond_hi)), theorem_window=(2.5, float(thm_hi)),
    )


def perturbation_fits(times, xdot_by_sigma: dict, gamma: float, window=None, anchor: float = 1.0) -> dict:
    """Fits and envelope checks for each ``sigma`` of a perturbation run."""
    out = {}
    for sig, vals in sorted(xdot_by_sigma.items()):
        series = list(zip(times, vals))
        e = theoretical_exponent(gamma, sig)
        fit = fit_exponent(series, window, sigma=sig)
        bc = bound_check(series, e, anchor, t_end=None if window is None else window[1])
        out[sig] = {"fit": asdict(fit), "fit_flagged": fit.flagged, "theory": e, "bound": asdict(bc)}
    return out


def write_report(path, payload: dict) -> None:
    def conv(o):
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, np.bool_):
            return bool(o)
        if isinstance(o, Fraction):
            return float(o)
        raise TypeError(f"not serialisable: {type(o).__name__}")

    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=conv)


def xdot_series(states, sigma: float) -> np.ndarray:
    return np.array([xdot_sigma(st, sigma) for st in states])
