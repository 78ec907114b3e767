"""Pseudo-spectral RK4 integration of the Euler-Maxwell system.

Two systems are integrated, both in Makino variables with
``g = (gamma-1)/2`` and ``varrho = c_m rho_+^m`` (``m = 2/(gamma-1)``):

full system::

    rho_t = -u.grad rho - g rho div u
    u_t   = -u.grad u - g rho grad rho - E - u x B
    E_t   =  curl B - alpha1 E + varrho u
    B_t   = -curl E - alpha2 B

perturbation system around the expanding background ``v``: the unknowns
are ``(rho, w, e, b)`` with ``u = v + w``, ``E = Ebar + e``,
``B = Bbar + b`` and ``(Ebar, Bbar)`` the free damped Maxwell field::

    rho_t = -(v+w).grad rho - g rho (div v + div w)
    w_t   = -(v+w).grad w - Dv w - g rho grad rho - E - u x B
    e_t   =  curl b - alpha1 e + varrho u
    b_t   = -curl e - alpha2 b

In the comoving frame ``y = x/(1+t)`` with ``v = x/(1+t)`` and
``s = 1/(1+t)`` the same system reads::

    R_t    = -s W.grad R - s g R div W - 3 s g R
    W_t    = -s W.grad W - s g R grad R - s W - E - (y+W) x B
    e_t    =  s y.grad e + s curl b - alpha1 e + varrho (y+W)
    b_t    =  s y.grad b - s curl e - alpha2 b
    Ebar_t =  s y.grad Ebar + s curl Bbar - alpha1 Ebar
    Bbar_t =  s y.grad Bbar - s curl Ebar - alpha2 Bbar

with every gradient taken in ``y``. The frame advection ``y.grad F`` is
discretised in the skew form ``(y.grad F + div(y F))/2 - 3F/2``. Physical
norms follow from
``|f|_{H^sigma(x)} = (1+t)^{3/2-sigma} |F|_{H^sigma(y)}``.

Fields are stored as masked rfft coefficients. Products are formed in
physical space and masked again (2/3 rule), linear terms are applied in
spectral space.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh

from .burgers import FlowEval
from .grid import GridSpec, ScalarField, VectorField, workspace
from .makino import SimParams, SymmetrizedState

RHO, U, E, B, EBAR, BBAR = 0, slice(1, 4), slice(4, 7), slice(7, 10), slice(10, 13), slice(13, 16)
CSV_COLUMNS = ["t", "energy", "dissipation", "divB", "Zdiag", "compat", "X0", "Xs", "clip_count", "support_frac"]
NEG_RHO_TOL = 1e-3
FRAME_SAFETY = 1.02  # margin on the Lanczos estimate of the field operator norm


@dataclass(frozen=True)
class SchemeConfig:
    """Time-stepping and monitoring options.

    Give either a fixed ``dt`` or a ``cfl`` number (adaptive step). The
    filter is ``exp(-filter_strength (|m|/m_c)^36)`` per axis with ``m_c``
    the dealiasing cut; ``filter_strength = 0`` turns it off.
    """

    T: float
    dt: float | None = None
    cfl: float | None = None
    filter_strength: float = 0.0
    frame: str = "original"
    margin: float = 0.1
    snapshot_every: int | None = None
    s: float = 3.0
    sigmas: tuple = ()
    support_tol: float = 1e-4
    keep_states: bool = False

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("horizon T must be positive")
        if (self.dt is None) == (self.cfl is None):
            raise ValueError("give exactly one of dt and cfl")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.cfl is not None and not self.cfl > 0:
            raise ValueError("cfl must be positive")
        if not 0 < self.margin < 0.5:
            raise ValueError("support margin must lie in (0, 0.5)")
        if self.frame not in ("original", "comoving"):
            raise ValueError(f"unknown frame {self.frame!r}")
        if self.filter_strength < 0:
            raise ValueError("filter strength must be non-negative")
        if self.snapshot_every is not None and self.snapshot_every < 1:
            raise ValueError("snapshot_every must be at least 1")


@dataclass
class DiagnosticsRecord:
    t: float
    energy: float
    dissipation: float
    divB: float
    Zdiag: float
    compat: float
    X0: float
    Xs: float
    clip_count: int
    support_frac: float
    xdot: dict = field(default_factory=dict)
    EB_sq: float = 0.0
    filter_loss: float = 0.0

    def __post_init__(self):
        if self.energy < 0 or self.dissipation < 0:
            raise ValueError("energy and dissipation must be non-negative")

    def row(self):
        return [getattr(self, c) for c in CSV_COLUMNS]


class _Ops:
    """Grid-level spectral kernels shared by both systems."""

    def __init__(self, grid: GridSpec):
        self.grid = grid
        self.ws = ws = workspace(grid)
        self.d = grid.active_dims
        self.ik = [1j * k for k in ws.xi]
        self.mask = ws.mask
        self.kmax = float(np.sqrt(np.max(ws.xi_sq * ws.mask)))
        self.kaxis = float(max(np.max(np.abs(k) * ws.mask) for k in ws.xi))
        self.pos = grid.positions()

    def fft(self, a):
        return self.ws.fft(a)

    def ifft(self, a):
        return self.ws.ifft(a)

    def deriv_stack(self, F_hat):
        """Physical ``d_j F_i`` for ``j < d``; shape ``(d, ncomp, ...)``."""
        return self.ifft(np.stack([ik * F_hat for ik in self.ik]))

    def curl(self, F_hat):
        return self.ws.curl_hat(F_hat)

    def project(self, a):
        """Transform a physical product and apply the 2/3 mask."""
        return self.fft(a) * self.mask


def _frame_skew(ops: _Ops, Fh: np.ndarray) -> np.ndarray:
    """Skew part of the comoving Maxwell operator at ``s = 1`` on ``(E, B)``:
    ``(y.grad F + div(y F))/2`` plus the curl coupling."""
    y = ops.pos
    D = ops.deriv_stack(Fh)
    X = ops.ifft(Fh)
    yF = ops.project(y[:, None] * X[None])
    out = 0.5 * (ops.project(sum(y[j] * D[j] for j in range(3))) + sum(ops.ik[j] * yF[j] for j in range(3)))
    out[0:3] += ops.curl(Fh[3:6])
    out[3:6] -= ops.curl(Fh[0:3])
    return out


@lru_cache(maxsize=8)
def frame_operator_norm(grid: GridSpec) -> float:
    """Norm of :func:`_frame_skew` on dealiased fields, by Lanczos on ``-M^2``.

    The operator is skew-adjoint, so this is its spectral radius and the
    exact linear stability scale of the comoving field equations.
    """
    ops = _Ops(grid)
    shape = (6,) + grid.shape

    def matvec(v):
        Fh = ops.fft(np.reshape(v, shape)) * ops.mask
        return -ops.ifft(_frame_skew(ops, _frame_skew(ops, Fh))).ravel()

    size = int(np.prod(shape))
    op = LinearOperator((size, size), matvec=matvec, dtype=float)
    v0 = np.random.default_rng(0).standard_normal(size)
    lam = eigsh(op, k=1, which="LA", v0=v0, tol=1e-8, return_eigenvectors=False)[0]
    return math.sqrt(max(lam, 0.0))


def _cross(a, b):
    return np.stack([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])


def _check_terms(terms: dict):
    for name, arr in terms.items():
        if not np.all(np.isfinite(arr)):
            raise FloatingPointError(f"non-finite values in the {name} term")


class FullSystem:
    """Right-hand side of the full system on packed spectral state ``(10, ...)``."""

    ncomp = 10

    def __init__(self, grid: GridSpec, params: SimParams):
        self.ops = _Ops(grid)
        self.params = params
        self.g = 0.5 * (params.gamma - 1.0)

    def __call__(self, t: float, Y: np.ndarray) -> np.ndarray:
        ops, p, g, d = self.ops, self.params, self.g, self.ops.d
        X = ops.ifft(Y)
        rho, u, Ef, Bf = X[RHO], X[U], X[E], X[B]
        Drho = ops.deriv_stack(Y[RHO][None])[:, 0]  # (d, ...)
        Du = ops.deriv_stack(Y[U])  # (d, 3, ...)
        divu = sum(Du[j, j] for j in range(d))
        adv_rho = sum(u[j] * Drho[j] for j in range(d))
        adv_u = sum(u[j] * Du[j] for j in range(d))
        grad_rho = np.zeros_like(u)
        grad_rho[:d] = Drho
        varrho = p.density_coef * np.maximum(rho, 0.0) ** p.density_exponent
        terms = {
            "density transport": -adv_rho - g * rho * divu,
            "velocity transport": -adv_u - g * rho * grad_rho,
            "Lorentz force": -Ef - _cross(u, Bf),
            "current source": varrho * u,
        }
        _check_terms(terms)
        out = np.empty_like(Y)
        out[RHO] = ops.project(terms["density transport"])
        out[U] = ops.project(terms["velocity transport"] + terms["Lorentz force"])
        out[E] = ops.project(terms["current source"]) + ops.curl(Y[B]) - p.alpha1 * Y[E]
        out[B] = -ops.curl(Y[E]) - p.alpha2 * Y[B]
        return out

    def wave_speed(self, t: float, Y: np.ndarray) -> float:
        X = self.ops.ifft(Y[:4])
        umax = float(np.sqrt(np.max(np.sum(X[U] ** 2, axis=0))))
        cs = self.g * float(np.max(np.abs(X[RHO])))
        return max(umax + cs, 1.0) * self.ops.kmax


class PerturbationSystem:
    """Right-hand side of the perturbation system on packed state ``(16, ...)``.

    ``frame="comoving"`` uses the identity background. ``frame="original"``
    takes ``background`` (a :class:`FlowEval`, identity when ``None``).
    """

    ncomp = 16

    def __init__(self, grid: GridSpec, params: SimParams, frame: str = "comoving",
                 background: FlowEval | None = None):
        if grid.active_dims != 3:
            raise ValueError("perturbation systems need three active dims")
        if frame not in ("comoving", "original"):
            raise ValueError(f"unknown frame {frame!r}")
        if frame == "comoving" and background is not None and background.velocity.family != "identity":
            raise ValueError("the comoving frame is wired for the identity background only")
        self.ops = _Ops(grid)
        self.params = params
        self.frame = frame
        self.background = background
        self.g = 0.5 * (params.gamma - 1.0)
        self._bg_cache: dict = {}
        self._pts = np.moveaxis(self.ops.pos, 0, -1)

    def background_fields(self, t: float):
        """``v`` and ``Dv`` on the grid at time ``t`` (original frame)."""
        if t in self._bg_cache:
            return self._bg_cache[t]
        if self.background is None or self.background.velocity.family == "identity":
            v = self.ops.pos / (1.0 + t)
            Dv = None  # Id/(1+t)
        else:
            v = np.moveaxis(self.background.eval_v(t, self._pts), -1, 0)
            Dv = np.moveaxis(self.background.eval_Dv(t, self._pts), (-2, -1), (0, 1))
        if len(self._bg_cache) > 8:
            self._bg_cache.clear()
        self._bg_cache[t] = (v, Dv)
        return v, Dv

    def __call__(self, t: float, Y: np.ndarray) -> np.ndarray:
        if self.frame == "comoving":
            return self._comoving(t, Y)
        return self._original(t, Y)

    def _common(self, Y):
        ops = self.ops
        X = ops.ifft(Y)
        Drho = ops.deriv_stack(Y[RHO][None])[:, 0]
        Dw = ops.deriv_stack(Y[U])
        return X, Drho, Dw

    def _original(self, t, Y):
        ops, p, g = self.ops, self.params, self.g
        X, Drho, Dw = self._common(Y)
        rho, w = X[RHO], X[U]
        v, Dv = self.background_fields(t)
        u = v + w
        Etot, Btot = X[E] + X[EBAR], X[B] + X[BBAR]
        divw = Dw[0, 0] + Dw[1, 1] + Dw[2, 2]
        if Dv is None:
            divv = 3.0 / (1.0 + t)
            w_Dv = w / (1.0 + t)
        else:
            divv = Dv[0, 0] + Dv[1, 1] + Dv[2, 2]
            w_Dv = np.einsum("ij...,j...->i...", Dv, w)
        varrho = p.density_coef * np.maximum(rho, 0.0) ** p.density_exponent
        terms = {
            "density transport": -sum(u[j] * Drho[j] for j in range(3)) - g * rho * (divv + divw),
            "velocity transport": -sum(u[j] * Dw[j] for j in range(3)) - w_Dv - g * rho * Drho,
            "Lorentz force": -Etot - _cross(u, Btot),
            "current source": varrho * u,
        }
        _check_terms(terms)
        out = np.empty_like(Y)
        out[RHO] = ops.project(terms["density transport"])
        out[U] = ops.project(terms["velocity transport"] + terms["Lorentz force"])
        out[E] = ops.project(terms["current source"]) + ops.curl(Y[B]) - p.alpha1 * Y[E]
        out[B] = -ops.curl(Y[E]) - p.alpha2 * Y[B]
        out[EBAR] = ops.curl(Y[BBAR]) - p.alpha1 * Y[EBAR]
        out[BBAR] = -ops.curl(Y[EBAR]) - p.alpha2 * Y[BBAR]
        return out

    def _comoving(self, t, Y):
        ops, p, g = self.ops, self.params, self.g
        s = 1.0 / (1.0 + t)
        X, Drho, Dw = self._common(Y)
        R, W = X[RHO], X[U]
        y = ops.pos
        DEM = ops.deriv_stack(Y[4:16])  # (3, 12, ...)
        y_grad_em = sum(y[j] * DEM[j] for j in range(3))
        yF_hat = ops.project(y[:, None] * X[None, 4:16])  # (3, 12, ...)
        div_yF_hat = sum(ops.ik[j] * yF_hat[j] for j in range(3))
        divW = Dw[0, 0] + Dw[1, 1] + Dw[2, 2]
        Etot, Btot = X[E] + X[EBAR], X[B] + X[BBAR]
        u = y + W
        varrho = p.density_coef * np.maximum(R, 0.0) ** p.density_exponent
        terms = {
            "density transport": -s * sum(W[j] * Drho[j] for j in range(3)) - s * g * R * (divW + 3.0),
            "velocity transport": -s * sum(W[j] * Dw[j] for j in range(3)) - s * g * R * Drho - s * W,
            "Lorentz force": -Etot - _cross(u, Btot),
            "current source": varrho * u,
            "frame advection": s * y_grad_em,
        }
        _check_terms(terms)
        # skew split of y.grad F: (y.grad F + div(y F))/2 - 3F/2 keeps the
        # discrete energy balance exact for the sawtooth coefficient y
        adv = 0.5 * (ops.project(terms["frame advection"]) + s * div_yF_hat) - 1.5 * s * Y[4:16]
        out = np.empty_like(Y)
        out[RHO] = ops.project(terms["density transport"])
        out[U] = ops.project(terms["velocity transport"] + terms["Lorentz force"])
        out[E] = ops.project(terms["current source"]) + adv[0:3] + s * ops.curl(Y[B]) - p.alpha1 * Y[E]
        out[B] = adv[3:6] - s * ops.curl(Y[E]) - p.alpha2 * Y[B]
        out[EBAR] = adv[6:9] + s * ops.curl(Y[BBAR]) - p.alpha1 * Y[EBAR]
        out[BBAR] = adv[9:12] - s * ops.curl(Y[EBAR]) - p.alpha2 * Y[BBAR]
        return out

    def wave_speed(self, t: float, Y: np.ndarray) -> float:
        ops = self.ops
        X = ops.ifft(Y[:4])
        wmax = float(np.sqrt(np.max(np.sum(X[U] ** 2, axis=0))))
        cs = self.g * float(np.max(np.abs(X[RHO])))
        L = self.ops.grid.half_width
        if self.frame == "comoving":
            # fluid transport plus the measured radius of the field operator
            s = 1.0 / (1.0 + t)
            return s * ((wmax + cs) * ops.kmax + FRAME_SAFETY * frame_operator_norm(ops.grid))
        vmax = math.sqrt(3.0) * L / (1.0 + t) if self.background is None else math.sqrt(3.0) * L
        return max(vmax + wmax + cs, 1.0) * ops.kmax


def step_rk4(rhs, t: float, Y: np.ndarray, dt: float) -> np.ndarray:
    """Classical four-stage Runge-Kutta step."""
    k1 = rhs(t, Y)
    k2 = rhs(t + 0.5 * dt, Y + 0.5 * dt * k1)
    k3 = rhs(t + 0.5 * dt, Y + 0.5 * dt * k2)
    k4 = rhs(t + dt, Y + dt * k3)
    return Y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# ----------------------------------------------------------------------------
# packing


def pack_full(state: SymmetrizedState) -> np.ndarray:
    ops = _Ops(state.grid)
    X = np.concatenate([state.rho.values[None], state.u.values, state.E.values, state.B.values])
    return ops.fft(X) * ops.mask


def pack_perturbation(state: SymmetrizedState, Ebar: VectorField, Bbar: VectorField) -> np.ndarray:
    ops = _Ops(state.grid)
    X = np.concatenate([state.rho.values[None], state.u.values, state.E.values, state.B.values,
                        Ebar.values, Bbar.values])
    return ops.fft(X) * ops.mask


def unpack(grid: GridSpec, t: float, Y: np.ndarray, perturbation: bool = False):
    X = workspace(grid).ifft(Y)
    st = SymmetrizedState(t, ScalarField(grid, X[RHO]), VectorField(grid, X[U]), VectorField(grid, X[E]),
                          VectorField(grid, X[B]), perturbation=perturbation,
                          clip_count=int(np.count_nonzero(X[RHO] < 0)))
    if perturbation:
        return st, VectorField(grid, X[EBAR]), VectorField(grid, X[BBAR])
    return st


def rhs_full(state: SymmetrizedState, params: SimParams) -> SymmetrizedState:
    """Time derivative of the full system at ``state``."""
    if state.perturbation:
        raise ValueError("rhs_full expects a full (non-perturbation) state")
    sysm = FullSystem(state.grid, params)
    return unpack(state.grid, state.t, sysm(state.t, pack_full(state)))


def rhs_perturbation(state: SymmetrizedState, Ebar: VectorField, Bbar: VectorField, params: SimParams,
                     frame: str = "comoving", background: FlowEval | None = None):
    """Time derivative ``(drho, dw, de, db), dEbar, dBbar`` of the perturbation system."""
    sysm = PerturbationSystem(state.grid, params, frame, background)
    Y = pack_perturbation(state, Ebar, Bbar)
    return unpack(state.grid, state.t, sysm(state.t, Y), perturbation=True)


# ----------------------------------------------------------------------------
# diagnostics


class _Monitor:
    def __init__(self, sysm, params: SimParams, cfg: SchemeConfig):
        self.sysm = sysm
        self.ops = sysm.ops
        self.params = params
        self.cfg = cfg
        self.pert = isinstance(sysm, PerturbationSystem)
        self.comoving = self.pert and sysm.frame == "comoving"
        grid = self.ops.grid
        edge = (1.0 - cfg.margin) * grid.half_width
        layer = np.zeros(grid.shape, dtype=bool)
        for j in range(grid.active_dims):
            layer |= np.abs(self.ops.pos[j]) >= edge
        self.layer = layer
        self.sigmas = sorted(set(cfg.sigmas) | {0.0, cfg.s})
        self.prev = None

    def _total_fields(self, t, X):
        if not self.pert:
            return X[RHO], X[U], X[E], X[B]
        if self.comoving:
            v = self.ops.pos
        else:
            v = self.sysm.background_fields(t)[0]
        return X[RHO], v + X[U], X[E] + X[EBAR], X[B] + X[BBAR]

    def record(self, t: float, Y: np.ndarray, filter_loss: float = 0.0) -> DiagnosticsRecord:
        ops, p = self.ops, self.params
        ws = ops.ws
        grid = ops.grid
        X = ops.ifft(Y)
        rho, u, Ef, Bf = self._total_fields(t, X)
        scale = (1.0 + t) ** 3 if self.comoving else 1.0
        dV = grid.cell_volume * scale
        varrho = p.density_coef * np.maximum(rho, 0.0) ** p.density_exponent
        e2 = np.sum(Ef**2, axis=0)
        b2 = np.sum(Bf**2, axis=0)
        kin = 0.5 * varrho * np.sum(u**2, axis=0)
        internal = p.A * varrho**p.gamma / (p.gamma - 1.0)
        energy = float(np.sum(kin + internal + 0.5 * (e2 + b2)) * dV)
        diss = float(np.sum(p.alpha1 * e2 + p.alpha2 * b2) * dV)
        EB = float(np.sum(e2 + b2) * dV)

        Bhat = Y[B] + Y[BBAR] if self.pert else Y[B]
        bnorm = math.sqrt(ws.norm_sq_hat(Bhat))
        # scaled by 1 + ||B|| so that a field at round-off level does not read as O(1)
        divB = math.sqrt(ws.norm_sq_hat(ws.div_hat(Bhat))) * grid.h / (1.0 + bnorm)
        # Z = B - curl u; curl v = 0 for the background
        curl_u = ops.curl(Y[U])
        if self.comoving:
            curl_u = curl_u / (1.0 + t)
        Z = math.sqrt(ws.norm_sq_hat(Bhat - curl_u) * scale)

        quad = Y[:10]
        xdot = {}
        for sig in self.sigmas:
            val = math.sqrt(ws.norm_sq_hat(quad, sig))
            if self.comoving:
                val *= (1.0 + t) ** (1.5 - sig)
            xdot[sig] = val

        compat = float("nan")
        if not self.comoving:
            # d/dt(varrho + div E) + alpha1 div E, from consecutive records
            divE = ops.ifft(ws.div_hat(Y[E] + Y[EBAR] if self.pert else Y[E]))
            if self.prev is not None and t > self.prev[0]:
                t0, vr0, dE0 = self.prev
                res = (varrho + divE - vr0 - dE0) / (t - t0) + p.alpha1 * 0.5 * (divE + dE0)
                compat = float(np.sqrt(np.sum(res**2) * grid.cell_volume))
            self.prev = (t, varrho, divE)

        # only matter can leave its support; the fields carry dipole tails
        sq = X[RHO] ** 2
        total = float(np.sum(sq))
        frac = float(np.sum(sq[self.layer]) / total) if total > 0 else 0.0
        return DiagnosticsRecord(t, energy, diss, float(divB), Z, compat, xdot[0.0], xdot[self.cfg.s],
                                 int(np.count_nonzero(X[RHO] < 0)), frac, xdot, EB, filter_loss)


# ----------------------------------------------------------------------------
# driver


@dataclass
class RunResult:
    records: list
    halt_reason: str
    final_time: float
    steps: int
    final_state: np.ndarray = field(repr=False)
    states: list = field(default_factory=list, repr=False)
    grid: GridSpec | None = None

    @property
    def ok(self) -> bool:
        return self.halt_reason == "completed"

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def xdot_series(self, sigma: float) -> np.ndarray:
        return np.array([r.xdot[sigma] for r in self.records])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for r in self.records:
                w.writerow([repr(x) if isinstance(x, float) else x for x in r.row()])

    def summary(self, **extra) -> dict:
        out = {"halting_reason": self.halt_reason, "final_time": self.final_time, "steps": self.steps}
        out.update(extra)
        return out

    def write_summary(self, path, **extra) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.summary(**extra), fh, indent=2, sort_keys=True)


def _filter_factor(ops: _Ops, strength: float) -> np.ndarray:
    ws = ops.ws
    n = ops.grid.n
    mc = n / 3.0
    out = np.ones(ws.spectral_shape)
    for k in ws.xi:
        m = np.abs(k) * ops.grid.half_width / np.pi
        out *= np.exp(-strength * (m / mc) ** 36)
    return out


def run_simulation(Y0: np.ndarray, sysm, config: SchemeConfig, t0: float = 0.0) -> RunResult:
    """Integrate ``Y0`` to ``config.T`` and record diagnostics.

    The run stops early, returning everything recorded so far, on
    non-finite values, on a negative Makino variable below
    ``-1e-3 max|rho|``, or when the share of ``||rho||^2`` held by the
    outer ``margin`` layer of the box exceeds ``support_tol``.
    """
    params = sysm.params
    ops = sysm.ops
    mon = _Monitor(sysm, params, config)
    filt = _filter_factor(ops, config.filter_strength) if config.filter_strength > 0 else None
    Y = np.array(Y0, dtype=complex)
    t = t0
    if config.dt is not None:
        nsteps = max(1, int(round((config.T - t0) / config.dt)))
        every = config.snapshot_every or max(1, int(config.T / (200.0 * config.dt)))
    else:
        nsteps = None
        every = config.snapshot_every or 1
    records = [mon.record(t, Y)]
    states = [(t, Y.copy())] if config.keep_states else []
    reason = "completed"
    k = 0
    loss = 0.0
    while True:
        if nsteps is not None:
            if k >= nsteps:
                break
            dt = config.dt
        else:
            if t >= config.T - 1e-12 * config.T:
                break
            dt = min(config.cfl / sysm.wave_speed(t, Y), config.T - t)
        try:
            Ynew = step_rk4(sysm, t, Y, dt)
        except FloatingPointError as exc:
            reason = f"non-finite: {exc}"
            break
        if not np.all(np.isfinite(Ynew)):
            reason = "non-finite: state after step"
            break
        if filt is not None:
            before = ops.ws.norm_sq_hat(Ynew)
            Ynew = Ynew * filt
            loss += 0.5 * (before - ops.ws.norm_sq_hat(Ynew))
        Y = Ynew
        k += 1
        t = t0 + k * config.dt if nsteps is not None else t + dt
        last = (nsteps is not None and k == nsteps) or (nsteps is None and t >= config.T - 1e-12 * config.T)
        if k % every == 0 or last:
            rec = mon.record(t, Y, loss)
            records.append(rec)
            if config.keep_states:
                states.append((t, Y.copy()))
            rho = ops.ifft(Y[RHO])
            peak = float(np.max(np.abs(rho)))
            if peak > 0 and float(np.min(rho)) < -NEG_RHO_TOL * peak:
                reason = "negative Makino variable"
                break
            if rec.support_frac > config.support_tol:
                reason = "support escaped the margin layer"
                break
    return RunResult(records, reason, t, k, Y, states, ops.grid)


# ----------------------------------------------------------------------------
# post-processing


def energy_identity_residual(records, params: SimParams | None = None) -> np.ndarray:
    """``r_k = (E_{k+1} - E_k)/dt_k + (D_k + D_{k+1})/2`` per snapshot interval."""
    t = np.array([r.t for r in records])
    en = np.array([r.energy for r in records])
    di = np.array([r.dissipation for r in records])
    if len(t) < 2:
        return np.zeros(0)
    return np.diff(en) / np.diff(t) + 0.5 * (di[1:] + di[:-1])


def constraint_monitors(records) -> dict:
    return {
        "t": np.array([r.t for r in records]),
        "divB": np.array([r.divB for r in records]),
        "Zdiag": np.array([r.Zdiag for r in records]),
        "compat": np.array([r.compat for r in records]),
    }


def observed_orders(errors) -> list:
    """``log2(e_k / e_{k+1})`` for errors at successively halved steps."""
    e = np.asarray(errors, dtype=float)
    return [float(np.log2(a / b)) if a > 0 and b > 0 else float("nan") for a, b in zip(e[:-1], e[1:])]


def temporal_order(Y0, sysm, T: float, dts) -> dict:
    """Richardson study: differences of final states at successively halved ``dt``."""
    finals = []
    for dt in dts:
        res = run_simulation(Y0, sysm, SchemeConfig(T=T, dt=dt, snapshot_every=10**9, support_tol=1.0))
        if not res.ok:
            raise RuntimeError(f"run at dt = {dt} halted: {res.halt_reason}")
        finals.append(res.final_state)
    ws = sysm.ops.ws
    diffs = [math.sqrt(ws.norm_sq_hat(a - b)) for a, b in zip(finals[:-1], finals[1:])]
    return {"dts": list(dts), "differences": diffs, "orders": observed_orders(diffs)}


def frame_cross_check(state: SymmetrizedState, Ebar: VectorField, Bbar: VectorField, params: SimParams,
                      T: float, dt: float, return_states: bool = False) -> dict:
    """Run the perturbation system in both frames and compare at ``T``.

    The original-frame result ``f(T, x)`` is resampled at ``x = (1+T) y``
    by trigonometric interpolation and compared with the comoving result on
    the points ``|y_j| < L/(1+T)`` that the original box covers; outside
    that cube the resampling would read periodic images. Differences are
    L2 norms over the covered cube, relative to the whole comoving state
    there (single field groups can be negligibly small). Returns one entry
    per field group and ``"max"``, plus the two final spectral states under
    ``"states"`` when ``return_states`` is set.
    """
    from .grid import interpolate_scaled

    grid = state.grid
    Y0 = pack_perturbation(state, Ebar, Bbar)
    cfg = SchemeConfig(T=T, dt=dt, snapshot_every=10**9, support_tol=1.0)
    orig = run_simulation(Y0, PerturbationSystem(grid, params, "original"), cfg)
    como = run_simulation(Y0, PerturbationSystem(grid, params, "comoving"), cfg)
    if not (orig.ok and como.ok):
        raise RuntimeError(f"cross-check run halted: {orig.halt_reason} / {como.halt_reason}")
    ws = workspace(grid)
    Xo = ws.ifft(orig.final_state)
    Xc = ws.ifft(como.final_state)
    mapped = np.stack([interpolate_scaled(c, grid, 1.0 + T) for c in Xo])
    covered = np.all(np.abs(grid.positions()) < grid.half_width / (1.0 + T), axis=0)
    ref = np.linalg.norm(Xc[:, covered])
    out = {}
    for name, sl in (("rho", slice(0, 1)), ("w", U), ("e", E), ("b", B), ("Ebar", EBAR), ("Bbar", BBAR)):
        diff = np.linalg.norm((mapped[sl] - Xc[sl])[:, covered])
        out[name] = float(diff / ref) if ref > 0 else float(diff)
    out["max"] = max(out.values())
    if return_states:
        out["states"] = {"original": orig.final_state, "comoving": como.final_state}
    return out


def records_to_dicts(records) -> list:
    return [asdict(r) for r in records]
