"""Generalized Burgers flow solved by straight characteristics.

The solution of ``v_t + v . grad v = curl v x v`` with irrotational data is
``v(t, X(t, y)) = v0(y)`` along ``X(t, y) = y + t v0(y)``. Everything here
is evaluated pointwise from closed-form initial velocities, so no
interpolation enters the flow map, the Jacobian ``Dv`` or the field ``K``
defined by ``Dv = Id/(1+t) + K/(1+t)^2``.

Point arrays have shape ``(..., 3)``; matrices ``(..., 3, 3)``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from types import SimpleNamespace

import numpy as np

from .grid import GridSpec, sobolev_seminorm, ScalarField, VectorField

_EYE = np.eye(3)


@dataclass(frozen=True)
class InitialVelocity:
    """Closed-form initial velocity.

    ``family`` is one of

    * ``"identity"``: ``v0(y) = y``
    * ``"affine"``: ``v0(y) = M y + c``
    * ``"bump"``: ``v0(y) = y + delta * grad psi(y)`` with ``psi`` the
      compactly supported bump ``exp(1 - 1/(1 - |Py|^2/R^2))`` of radius
      ``R``, rescaled so that ``sup |D^2 psi| = 1``; ``P`` is the identity, or
      the projection on the first axis when ``planar``. The perturbation is a
      gradient, so ``v0`` is irrotational, and (H0) holds with
      ``epsilon = 1 - delta`` whenever ``delta < 1``.
    """

    family: str = "identity"
    M: tuple = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))
    c: tuple = (0.0, 0.0, 0.0)
    delta: float = 0.1
    radius: float = 1.0
    planar: bool = False

    def __post_init__(self):
        if self.family not in ("identity", "affine", "bump"):
            raise ValueError(f"unknown initial-velocity family {self.family!r}")
        if self.family == "bump":
            if not self.radius > 0:
                raise ValueError("bump radius must be positive")
            if not 0 <= self.delta < 1:
                raise ValueError("bump too large: delta * sup|D^2 psi| must stay below 1")

    @classmethod
    def identity(cls) -> InitialVelocity:
        return cls("identity")

    @classmethod
    def affine(cls, M, c=(0.0, 0.0, 0.0)) -> InitialVelocity:
        M = tuple(tuple(float(x) for x in row) for row in np.asarray(M, dtype=float))
        return cls("affine", M=M, c=tuple(float(x) for x in c))

    @classmethod
    def bump(cls, delta: float = 0.1, radius: float = 1.0, planar: bool = False) -> InitialVelocity:
        return cls("bump", delta=delta, radius=radius, planar=planar)

    @property
    def matrix(self) -> np.ndarray:
        return np.asarray(self.M, dtype=float)

    @property
    def offset(self) -> np.ndarray:
        return np.asarray(self.c, dtype=float)

    def _proj(self) -> np.ndarray:
        return np.diag([1.0, 0.0, 0.0]) if self.planar else _EYE

    def _radial(self, y: np.ndarray):
        """``q = |Py|^2/R^2`` and the first three derivatives of ``f(q)``."""
        P = self._proj()
        py = y @ P.T
        q = np.sum(py * py, axis=-1) / self.radius**2
        inside = q < 1.0 - 1e-3  # f and all its derivatives are below e^-998 beyond
        one_m = np.where(inside, 1.0 - q, 1.0)
        f = np.where(inside, np.exp(1.0 - 1.0 / one_m), 0.0)
        g1 = -1.0 / one_m**2
        g2 = -2.0 / one_m**3
        g3 = -6.0 / one_m**4
        f1 = f * g1
        f2 = f * (g2 + g1 * g1)
        f3 = f * (g3 + 3.0 * g1 * g2 + g1**3)
        k = 1.0 / _raw_hessian_sup(self.radius, self.planar)
        return P, py, k * f, k * f1, k * f2, k * f3

    def potential_derivatives(self, y: np.ndarray):
        """``grad psi``, ``D^2 psi`` and ``D^3 psi`` at points ``y``."""
        P, py, _, f1, f2, f3 = self._radial(y)
        R2 = self.radius**2
        a = 2.0 * py / R2  # grad q
        grad = f1[..., None] * a
        hess = f2[..., None, None] * a[..., :, None] * a[..., None, :] + f1[..., None, None] * (2.0 / R2) * P
        t1 = f3[..., None, None, None] * a[..., :, None, None] * a[..., None, :, None] * a[..., None, None, :]
        Pa = (2.0 / R2) * P
        t2 = f2[..., None, None, None] * (
            Pa[:, :, None] * a[..., None, None, :]
            + Pa[:, None, :] * a[..., None, :, None]
            + Pa[None, :, :] * a[..., :, None, None]
        )
        return grad, hess, t1 + t2

    def epsilon(self) -> float:
        """(H0) margin guaranteed by construction."""
        return 1.0 - self.delta if self.family == "bump" else float("nan")

    def v0(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.family == "identity":
            return y.copy()
        if self.family == "affine":
            return y @ self.matrix.T + self.offset
        grad, _, _ = self.potential_derivatives(y)
        return y + self.delta * grad

    def Dv0(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.family == "identity":
            return np.broadcast_to(_EYE, y.shape[:-1] + (3, 3)).copy()
        if self.family == "affine":
            return np.broadcast_to(self.matrix, y.shape[:-1] + (3, 3)).copy()
        _, hess, _ = self.potential_derivatives(y)
        return _EYE + self.delta * hess

    def D2v0(self, y: np.ndarray) -> np.ndarray:
        """Second derivatives, ``out[..., i, j, k] = d_j d_k v0_i``."""
        y = np.asarray(y, dtype=float)
        if self.family != "bump":
            return np.zeros(y.shape[:-1] + (3, 3, 3))
        _, _, third = self.potential_derivatives(y)
        return self.delta * third


@functools.lru_cache(maxsize=16)
def _raw_hessian_sup(radius: float, planar: bool) -> float:
    """``sup |D^2 f(|Py|^2/R^2)|`` (spectral norm) from the radial eigenvalues."""
    r = np.linspace(0.0, radius, 200001)[:-1]
    one_m = 1.0 - (r / radius) ** 2
    f = np.exp(1.0 - 1.0 / one_m)
    g1 = -1.0 / one_m**2
    g2 = -2.0 / one_m**3
    f1 = f * g1
    f2 = f * (g2 + g1 * g1)
    R2 = radius**2
    radial = np.abs(2.0 * f1 / R2 + f2 * (2.0 * r / R2) ** 2)
    if planar:
        return float(np.max(radial))
    return float(max(np.max(np.abs(2.0 * f1 / R2)), np.max(radial)))


@dataclass
class HZeroReport:
    distances: np.ndarray
    min_distance: float
    epsilon: float
    passed: bool
    worst_point: np.ndarray = field(repr=False)


def distance_to_negative_axis(eigvals: np.ndarray) -> np.ndarray:
    """Distance of complex numbers to ``(-inf, 0]``."""
    a, b = np.real(eigvals), np.imag(eigvals)
    return np.where(a <= 0, np.abs(b), np.hypot(a, b))


def check_H0(v0: InitialVelocity, epsilon: float, samples) -> HZeroReport:
    """Check that the spectrum of ``Dv0`` stays ``epsilon`` away from ``(-inf, 0]``."""
    pts = np.atleast_2d(np.asarray(samples, dtype=float))
    if pts.size == 0:
        raise ValueError("check_H0 needs at least one sample point")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    mats = v0.Dv0(pts)
    try:
        eig = np.linalg.eigvals(mats)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"eigenvalue solver failed: {exc}") from exc
    bad = ~np.all(np.isfinite(eig), axis=-1)
    if np.any(bad):
        where = pts[np.argmax(bad)]
        raise RuntimeError(f"eigenvalue solver failed at sample {where.tolist()}")
    dist = np.min(distance_to_negative_axis(eig), axis=-1)
    i = int(np.argmin(dist))
    m = float(dist[i])
    return HZeroReport(dist, m, epsilon, bool(m >= epsilon), pts[i])


@dataclass
class FlowEval:
    """Flow map, inverse and derived fields for one initial velocity."""

    velocity: InitialVelocity
    tol: float = 1e-12
    max_iter: int = 50
    samples: np.ndarray | None = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("Newton tolerance must be positive")
        if self.max_iter < 1:
            raise ValueError("iteration cap must be at least 1")

    def forward_flow(self, t: float, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return y + t * self.velocity.v0(y)

    def invert_flow(self, t: float, x) -> np.ndarray:
        """Solve ``x = y + t v0(y)`` for ``y`` (damped Newton, vectorised)."""
        if t < 0:
            raise ValueError("time must be non-negative")
        x = np.asarray(x, dtype=float)
        vel = self.velocity
        if vel.family == "affine" or t == 0:
            A = _EYE + t * vel.matrix
            return np.linalg.solve(A, (x - t * vel.offset).reshape(-1, 3).T).T.reshape(x.shape)
        if vel.family == "identity":
            return x / (1.0 + t)

        flat = x.reshape(-1, 3)
        y = flat / (1.0 + t)
        scale = 1.0 + np.linalg.norm(flat, axis=-1)
        res = self.forward_flow(t, y) - flat
        rnorm = np.linalg.norm(res, axis=-1)
        active = rnorm > self.tol * scale
        it = 0
        while np.any(active):
            if it >= self.max_iter:
                bad = flat[np.argmax(active)]
                raise RuntimeError(
                    f"flow inversion did not converge at x = {bad.tolist()}, t = {t} "
                    "(H0 violated or bump too large)"
                )
            ya, ra, xa = y[active], res[active], flat[active]
            J = _EYE + t * vel.Dv0(ya)
            step = np.linalg.solve(J, ra[..., None])[..., 0]
            lam = np.ones(len(ya))
            old = rnorm[active]
            trial = ya - step
            tres = self.forward_flow(t, trial) - xa
            tnorm = np.linalg.norm(tres, axis=-1)
            for _ in range(10):
                worse = tnorm >= old
                worse &= tnorm > self.tol * scale[active]
                if not np.any(worse):
                    break
                lam = np.where(worse, 0.5 * lam, lam)
                trial = np.where(worse[:, None], ya - lam[:, None] * step, trial)
                tres = np.where(worse[:, None], self.forward_flow(t, trial) - xa, tres)
                tnorm = np.linalg.norm(tres, axis=-1)
            idx = np.flatnonzero(active)
            y[idx], res[idx], rnorm[idx] = trial, tres, tnorm
            active = rnorm > self.tol * scale
            it += 1
        # one undamped polishing step, kept only where it helps
        step = np.linalg.solve(_EYE + t * vel.Dv0(y), res[..., None])[..., 0]
        trial = y - step
        tnorm = np.linalg.norm(self.forward_flow(t, trial) - flat, axis=-1)
        better = tnorm < rnorm
        y[better] = trial[better]
        return y.reshape(x.shape)

    def _pullback(self, t, x):
        y = self.invert_flow(t, x)
        A = self.velocity.Dv0(y)
        Minv = np.linalg.inv(_EYE + t * A)
        return y, A, Minv

    def eval_v(self, t: float, x) -> np.ndarray:
        return self.velocity.v0(self.invert_flow(t, x))

    def eval_Dv(self, t: float, x) -> np.ndarray:
        """``(Id + t Dv0(y))^{-1} Dv0(y)`` at ``y = X_t^{-1}(x)``."""
        _, A, Minv = self._pullback(t, x)
        return Minv @ A

    def eval_K(self, t: float, x) -> np.ndarray:
        """``(1+t) (Id + t Dv0(y))^{-1} (Dv0(y) - Id)``."""
        _, A, Minv = self._pullback(t, x)
        return (1.0 + t) * (Minv @ (A - _EYE))

    def eval_D2v(self, t: float, x) -> np.ndarray:
        """``out[..., i, j, k] = d_{x_k} (Dv)_{ij}``."""
        y, _, Minv = self._pullback(t, x)
        D2 = self.velocity.D2v0(y)  # [..., i, j, l] = d_l (Dv0)_{ij}
        # d_{y_l} (Id + t A)^{-1} A = M (d_l A) M, then chain rule with dy/dx = M
        inner = np.einsum("...ia,...abl,...bj->...ijl", Minv, D2, Minv)
        return np.einsum("...ijl,...lk->...ijk", inner, Minv)

    def eval_deviation(self, t: float, x) -> np.ndarray:
        """``v(t, x) - x/(1+t)``, the part of ``v`` not carried by the self-similar expansion."""
        x = np.asarray(x, dtype=float)
        return self.eval_v(t, x) - x / (1.0 + t)


def residual_check(flow: FlowEval, t: float, x, dh: float, dt: float) -> float:
    """Central-difference residual of ``v_t + v.grad v - curl v x v`` at ``(t, x)``."""
    x = np.asarray(x, dtype=float)
    v = flow.eval_v(t, x)
    vt = (flow.eval_v(t + dt, x) - flow.eval_v(t - dt, x)) / (2.0 * dt)
    J = np.zeros((3, 3))  # J[i, j] = d_j v_i
    for j in range(3):
        e = np.zeros(3)
        e[j] = dh
        J[:, j] = (flow.eval_v(t, x + e) - flow.eval_v(t, x - e)) / (2.0 * dh)
    adv = J @ v
    w = np.array([J[2, 1] - J[1, 2], J[0, 2] - J[2, 0], J[1, 0] - J[0, 1]])
    return float(np.linalg.norm(vt + adv - np.cross(w, v)))


def lagrangian_cloud(radius: float, n: int = 24, planar: bool = False) -> np.ndarray:
    """Regular lattice of points covering ``[-1.2 R, 1.2 R]^3`` (or a segment when planar)."""
    s = np.linspace(-1.2 * radius, 1.2 * radius, n)
    if planar:
        pts = np.zeros((n, 3))
        pts[:, 0] = s
        return pts
    g = np.meshgrid(s, s, s, indexing="ij")
    return np.stack([a.ravel() for a in g], axis=-1)


@dataclass
class EstimateReport:
    times: np.ndarray
    sup_Dv: np.ndarray
    sup_D2v: np.ndarray
    K_seminorms: dict
    Ktilde_seminorms: dict
    v_seminorms: dict
    slopes: dict
    theory: dict
    constants: dict

    def rows(self):
        sig = sorted(self.K_seminorms)
        header = ["t", "sup_Dv", "sup_D2v"]
        header += [f"K_H{s:g}" for s in sig] + [f"Ktilde_H{s:g}" for s in sig] + [f"v_H{s:g}" for s in sig]
        out = [header]
        for i, t in enumerate(self.times):
            row = [t, self.sup_Dv[i], self.sup_D2v[i]]
            row += [self.K_seminorms[s][i] for s in sig]
            row += [self.Ktilde_seminorms[s][i] for s in sig]
            row += [self.v_seminorms[s][i] for s in sig]
            out.append(row)
        return out


def _grid_points(grid: GridSpec) -> np.ndarray:
    return np.moveaxis(grid.positions(), 0, -1)


def estimate_suite(flow: FlowEval, times, grid: GridSpec, sigmas=(1.0,), frame: str = "comoving",
                   cloud: np.ndarray | None = None, window=(1.0, 50.0), margin: float = 0.1) -> EstimateReport:
    """Measure the decay envelopes of ``Dv``, ``D^2 v``, ``K`` and ``v`` over ``times``.

    Sup norms are taken over the images ``X_t(y)`` of a Lagrangian cloud.
    Seminorms are computed on ``grid``. With ``frame="comoving"`` the grid
    holds ``y = x/(1+t)`` and the dilation law
    ``|f((1+t) .)|_{H^s} (1+t)^{d/2 - s} = |f|_{H^s}`` (``d`` = active dims)
    converts back to physical seminorms exactly. With ``frame="original"``
    the grid is physical and the support of ``K`` must stay inside it.
    """
    vel = flow.velocity
    if vel.family not in ("bump", "identity"):
        raise ValueError("estimate_suite supports the bump and identity families")
    if frame not in ("comoving", "original"):
        raise ValueError(f"unknown frame {frame!r}")
    times = np.asarray(sorted(times), dtype=float)
    if cloud is None:
        cloud = lagrangian_cloud(vel.radius, planar=vel.planar)
    grad_sup = 0.0
    if vel.family == "bump":
        grad_sup = float(np.max(np.linalg.norm(vel.potential_derivatives(cloud)[0], axis=-1)))

    if frame == "original":
        reach = (1.0 + times[-1]) * vel.radius + times[-1] * vel.delta * grad_sup
        limit = (1.0 - margin) * grid.half_width
        if reach > limit:
            t_safe = (limit - vel.radius) / (vel.radius + vel.delta * grad_sup)
            raise ValueError(
                f"support of K leaves the box before t = {times[-1]}; maximal safe time is {t_safe:.4g}"
            )

    pts = _grid_points(grid)
    d = grid.active_dims
    sup_Dv, sup_D2v = [], []
    Ks = {s: [] for s in sigmas}
    Kt = {s: [] for s in sigmas}
    Vs = {s: [] for s in sigmas}
    for t in times:
        xc = flow.forward_flow(t, cloud)
        Dv = flow.eval_Dv(t, xc)
        sup_Dv.append(float(np.max(np.linalg.norm(Dv, ord=2, axis=(-2, -1)))))
        D2 = flow.eval_D2v(t, xc)
        sup_D2v.append(float(np.max(np.sqrt(np.sum(D2**2, axis=(-3, -2, -1))))))

        scale = 1.0 + t if frame == "comoving" else 1.0
        xg = pts * scale
        K = flow.eval_K(t, xg)
        dev = flow.eval_deviation(t, xg)
        for s in sigmas:
            factor = scale ** (0.5 * d - s)
            kn = _matrix_seminorm(grid, K, s) * factor
            Ks[s].append(kn)
            Kt[s].append(kn / (1.0 + t))
            Vs[s].append(sobolev_seminorm(VectorField(grid, np.moveaxis(dev, -1, 0)), s) * factor)

    from .decay import fit_exponent

    def fit(vals):
        if np.all(np.asarray(vals) > 0):
            return fit_exponent(list(zip(times, vals)), window)
        # identically zero series (identity family): nothing to fit
        return SimpleNamespace(slope=float("nan"), constant=0.0)

    slopes = {"sup_Dv": fit(sup_Dv).slope, "sup_D2v": fit(sup_D2v).slope}
    constants = {"sup_Dv": fit(sup_Dv).constant, "sup_D2v": fit(sup_D2v).constant}
    theory = {"sup_Dv": -1.0, "sup_D2v": -3.0}
    for s in sigmas:
        for name, series in (("K", Ks[s]), ("Ktilde", Kt[s]), ("v", Vs[s])):
            f = fit(series)
            slopes[f"{name}_H{s:g}"] = f.slope
            constants[f"{name}_H{s:g}"] = f.constant
            theory[f"{name}_H{s:g}"] = 0.5 - s
    return EstimateReport(times, np.array(sup_Dv), np.array(sup_D2v),
                          {s: np.array(v) for s, v in Ks.items()},
                          {s: np.array(v) for s, v in Kt.items()},
                          {s: np.array(v) for s, v in Vs.items()}, slopes, theory, constants)


def _matrix_seminorm(grid: GridSpec, K: np.ndarray, s: float) -> float:
    comps = np.moveaxis(K.reshape(K.shape[:-2] + (9,)), -1, 0)
    total = 0.0
    for c in comps:
        total += sobolev_seminorm(ScalarField(grid, c), s) ** 2
    return float(np.sqrt(total))
