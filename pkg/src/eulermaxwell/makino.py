"""Physical state, the Makino sound-speed variable and initial-data preparation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import (
    GridSpec,
    ScalarField,
    VectorField,
    curl,
    dealias,
    div,
    grad,
    inverse_laplacian,
    l2_norm,
    leray_project,
    x_sigma,
)

CLIP_EPS = 1e-14

FAMILIES = {
    "gaussian-bump": ("rho_amp", "u_amp", "e_amp", "b_amp", "width", "u_dir", "e_dir"),
    "ring-current": ("rho_amp", "u_amp", "b_amp", "radius", "width"),
    "plane-wave": ("e_amp", "mode", "polarization", "rho_amp", "width"),
}


@dataclass(frozen=True)
class SimParams:
    """Pressure law ``A rho^gamma`` and damping rates."""

    A: float = 1.0
    gamma: float = 1.4
    alpha1: float = 0.5
    alpha2: float = 0.5

    def __post_init__(self):
        if not self.A > 0:
            raise ValueError(f"A must be positive, got {self.A}")
        if not self.gamma > 1:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        if self.alpha1 < 0 or self.alpha2 < 0:
            raise ValueError("damping rates must be non-negative")

    @property
    def alpha(self) -> float:
        return min(self.alpha1, self.alpha2)

    @property
    def makino_coef(self) -> float:
        """``2 sqrt(A gamma) / (gamma - 1)``."""
        return 2.0 * math.sqrt(self.A * self.gamma) / (self.gamma - 1.0)

    @property
    def density_exponent(self) -> float:
        """``2 / (gamma - 1)``: density is ``density_coef * rho**density_exponent``."""
        return 2.0 / (self.gamma - 1.0)

    @property
    def density_coef(self) -> float:
        return ((self.gamma - 1.0) / (2.0 * math.sqrt(self.A * self.gamma))) ** self.density_exponent

    @property
    def acoustic(self) -> float:
        """``(gamma - 1) / 2``."""
        return 0.5 * (self.gamma - 1.0)


@dataclass
class FluidEMState:
    """Mass density, velocity and electromagnetic fields at time ``t``."""

    t: float
    density: ScalarField
    velocity: VectorField
    E: VectorField
    B: VectorField
    charge: ScalarField | None = None
    rho: ScalarField | None = None  # band-limited Makino variable, when prepared
    clip_count: int = 0

    def __post_init__(self):
        grids = {self.density.grid, self.velocity.grid, self.E.grid, self.B.grid}
        if len(grids) != 1:
            raise ValueError("all fields of a state must share one grid")
        if np.min(self.density.values) < -CLIP_EPS:
            raise ValueError("negative mass density beyond the clip tolerance")

    @property
    def grid(self) -> GridSpec:
        return self.density.grid


@dataclass
class SymmetrizedState:
    """``(rho, u, E, B)`` in Makino variables.

    In perturbation form ``u``, ``E``, ``B`` hold ``w = u - v``,
    ``e = E - Ebar`` and ``b = B - Bbar``.
    """

    t: float
    rho: ScalarField
    u: VectorField
    E: VectorField
    B: VectorField
    perturbation: bool = False
    clip_count: int = field(default=0, compare=False)

    @property
    def grid(self) -> GridSpec:
        return self.rho.grid

    def quadruple(self):
        return (self.rho, self.u, self.E, self.B)


def clip_vacuum(values: np.ndarray, what: str = "density") -> tuple[np.ndarray, int]:
    """Zero out round-off negatives in ``(-CLIP_EPS, 0)``; error below that."""
    lo = float(np.min(values)) if values.size else 0.0
    if lo < -CLIP_EPS:
        raise ValueError(f"{what} has negative value {lo:.3e} beyond clip tolerance {CLIP_EPS}")
    neg = values < 0
    count = int(np.count_nonzero(neg))
    if count:
        values = np.where(neg, 0.0, values)
    return values, count


def to_makino(density: ScalarField, params: SimParams) -> ScalarField:
    vals, _ = clip_vacuum(density.values, "density")
    exponent = 0.5 * (params.gamma - 1.0)
    return ScalarField(density.grid, params.makino_coef * vals**exponent)


def from_makino(rho: ScalarField, params: SimParams) -> ScalarField:
    vals, _ = clip_vacuum(rho.values, "Makino variable")
    return ScalarField(rho.grid, params.density_coef * vals**params.density_exponent)


def pressure(density: ScalarField, params: SimParams) -> ScalarField:
    vals, _ = clip_vacuum(density.values, "density")
    return ScalarField(density.grid, params.A * vals**params.gamma)


def ohm_current(density: ScalarField, velocity: VectorField) -> VectorField:
    """``J = -density * u``."""
    return VectorField(velocity.grid, -density.values[None] * velocity.values)


def charge_density(E: VectorField) -> ScalarField:
    """Charge density ``-div E``."""
    return div(E) * -1.0


def compatibility_residual(before: FluidEMState, after: FluidEMState, alpha1: float) -> float:
    """L2 norm of ``d/dt(density - charge) - alpha1 * charge`` between two snapshots.

    Time derivative by a forward difference, charge averaged over the
    interval (second order at the midpoint).
    """
    dt = after.t - before.t
    if not dt > 0:
        raise ValueError(f"snapshots must be ordered in time, got dt = {dt}")
    q0 = charge_density(before.E).values
    q1 = charge_density(after.E).values
    d0 = before.density.values
    d1 = after.density.values
    res = ((d1 - q1) - (d0 - q0)) / dt - alpha1 * 0.5 * (q0 + q1)
    return l2_norm(ScalarField(before.grid, res))


def _gauss(grid: GridSpec, width: float, center=(0.0, 0.0, 0.0)) -> np.ndarray:
    x = grid.positions()
    r2 = sum((x[i] - center[i]) ** 2 for i in range(grid.active_dims))
    return np.exp(-0.5 * r2 / width**2)


def _as_vec(v, default) -> np.ndarray:
    if v is None:
        v = default
    if isinstance(v, str):
        v = [float(p) for p in v.replace(",", " ").split()]
    a = np.asarray(v, dtype=float)
    if a.shape != (3,):
        raise ValueError(f"expected a 3-vector, got {v!r}")
    return a


def generate_family(name: str, grid: GridSpec, **kw) -> dict:
    """Raw (unconstrained) initial fields for a named data family.

    Amplitudes ``rho_amp`` refer to the Makino variable, so the returned
    dict holds ``rho`` (Makino), ``velocity``, ``E`` and ``B``.

    Families and their parameters:

    gaussian-bump
        ``rho_amp``, ``u_amp``, ``e_amp``, ``b_amp``,
        ``width``, ``u_dir``, ``e_dir`` (3-vectors). All fields share one
        Gaussian envelope centred at the origin.
    ring-current
        ``rho_amp``, ``u_amp``, ``b_amp``, ``radius``, ``width``. Density on a
        torus around the z axis, azimuthal velocity, axial magnetic bump.
    plane-wave
        ``e_amp``, ``mode`` (3 integers), ``polarization`` (3-vector),
        ``rho_amp``, ``width``. A box mode of the vacuum Maxwell system plus
        an optional Gaussian density bump.
    """
    if name not in FAMILIES:
        raise ValueError(f"unknown data family {name!r}; known: {sorted(FAMILIES)}")
    unknown = set(kw) - set(FAMILIES[name])
    if unknown:
        raise ValueError(f"unknown parameters for {name}: {sorted(unknown)}")
    x = grid.positions()
    zero_s = np.zeros(grid.shape)
    zero_v = np.zeros((3,) + grid.shape)

    if name == "gaussian-bump":
        w = float(kw.get("width", 0.6))
        env = _gauss(grid, w)
        u_dir = _as_vec(kw.get("u_dir"), (1.0, 0.5, -0.25))
        e_dir = _as_vec(kw.get("e_dir"), (0.0, 0.0, 1.0))
        rho = float(kw.get("rho_amp", 0.1)) * env
        u = float(kw.get("u_amp", 0.1)) * np.einsum("i,...->i...", u_dir, env)
        E = float(kw.get("e_amp", 0.0)) * np.einsum("i,...->i...", e_dir, env)
        # a swirl about the z axis gives a non-trivial divergence-free B
        B = zero_v.copy()
        B[0] = -x[1] * env
        B[1] = x[0] * env
        B *= float(kw.get("b_amp", 0.0))
    elif name == "ring-current":
        R = float(kw.get("radius", 1.0))
        w = float(kw.get("width", 0.4))
        s = np.sqrt(x[0] ** 2 + x[1] ** 2)
        torus = np.exp(-0.5 * ((s - R) ** 2 + x[2] ** 2) / w**2)
        rho = float(kw.get("rho_amp", 0.1)) * torus
        u = zero_v.copy()
        u[0] = -x[1] * torus
        u[1] = x[0] * torus
        u *= float(kw.get("u_amp", 0.1))
        E = zero_v.copy()
        B = zero_v.copy()
        B[2] = float(kw.get("b_amp", 0.0)) * _gauss(grid, w)
    else:
        mode = _as_vec(kw.get("mode"), (1, 0, 0))
        if np.any(mode[grid.active_dims:] != 0):
            raise ValueError("plane-wave mode has components along inactive axes")
        pol = _as_vec(kw.get("polarization"), (0.0, 1.0, 0.0))
        k = np.pi / grid.half_width * mode
        kn = np.linalg.norm(k)
        if kn == 0:
            raise ValueError("plane-wave mode must be non-zero")
        if abs(pol @ k) > 1e-12 * np.linalg.norm(pol) * kn:
            raise ValueError("plane-wave polarization must be orthogonal to the wavevector")
        pol = pol / np.linalg.norm(pol)
        phase = sum(k[i] * x[i] for i in range(3))
        amp = float(kw.get("e_amp", 0.1))
        E = amp * np.einsum("i,...->i...", pol, np.cos(phase))
        B = amp * np.einsum("i,...->i...", np.cross(k, pol) / kn, np.cos(phase))
        u = zero_v.copy()
        rho_amp = float(kw.get("rho_amp", 0.0))
        rho = rho_amp * _gauss(grid, float(kw.get("width", 0.6))) if rho_amp else zero_s.copy()

    return {
        "rho": ScalarField(grid, rho),
        "velocity": VectorField(grid, u),
        "E": VectorField(grid, E),
        "B": VectorField(grid, B),
    }


def prepare_data(density: ScalarField, velocity: VectorField, E: VectorField, B: VectorField,
                 params: SimParams, *, makino: bool = False, charge: ScalarField | None = None,
                 magnetic_from_velocity: bool = False, enforce_constraints: bool = True,
                 budget: float | None = None, budget_s: float = 3.0, t: float = 0.0) -> FluidEMState:
    """Return admissible initial data.

    ``density`` is the mass density, or the Makino variable when ``makino``.

    * all fields are dealiased (2/3 rule);
    * ``B`` is replaced by ``curl u`` when ``magnetic_from_velocity`` (H4),
      otherwise Leray-projected;
    * ``E`` receives the gradient correction making ``div E = -charge``
      (``charge`` defaults to zero and must be mean-free);
    * with ``budget`` the Makino quadruple ``(rho, u, E, B)`` is rescaled by a
      common factor so its ``H^budget_s`` norm equals ``budget``.
    """
    grid = density.grid
    if charge is None:
        charge = ScalarField.zeros(grid)
    if makino:
        vals, _ = clip_vacuum(density.values, "Makino variable")
        rho = dealias(ScalarField(grid, vals))
    else:
        vals, _ = clip_vacuum(density.values)
        rho = dealias(to_makino(ScalarField(grid, vals), params))
    u = dealias(velocity)
    E = dealias(E)
    charge = dealias(charge)

    if magnetic_from_velocity:
        B = curl(u)
    elif enforce_constraints:
        B = leray_project(dealias(B))
    else:
        B = dealias(B)

    if enforce_constraints:
        scale = max(float(np.max(np.abs(charge.values))), 1.0)
        if abs(float(charge.values.mean())) > 1e-12 * scale:
            raise ValueError("charge density must be mean-free on a periodic box")
        # E += grad phi with Delta phi = -charge - div E
        phi = inverse_laplacian(charge * -1.0 - div(E), tol=1e-10)
        E = E + grad(phi)

    if budget is not None:
        current = x_sigma((rho, u, E, B), budget_s)
        if current == 0:
            raise ValueError("cannot rescale zero data to a positive budget")
        c = budget / current
        rho, u, E, B, charge = rho * c, u * c, E * c, B * c, charge * c

    # spectral truncation of a non-negative bump leaves small negative
    # ripples; the mass density uses the positive part
    clipped = int(np.count_nonzero(rho.values < 0))
    dens = from_makino(ScalarField(grid, np.maximum(rho.values, 0.0)), params)
    return FluidEMState(t, dens, u, E, B, charge=charge_density(E), rho=rho, clip_count=clipped)


def symmetrize(state: FluidEMState, params: SimParams) -> SymmetrizedState:
    rho = state.rho if state.rho is not None else to_makino(state.density, params)
    return SymmetrizedState(state.t, rho, state.velocity, state.E, state.B, clip_count=state.clip_count)


def desymmetrize(state: SymmetrizedState, params: SimParams) -> FluidEMState:
    if state.perturbation:
        raise ValueError("perturbation states need the background to recover physical fields")
    dens = from_makino(ScalarField(state.grid, np.maximum(state.rho.values, 0.0)), params)
    return FluidEMState(state.t, dens, state.u, state.E, state.B, charge=charge_density(state.E),
                        rho=state.rho, clip_count=int(np.count_nonzero(state.rho.values < 0)))


def energy_density_total(state: FluidEMState, params: SimParams) -> float:
    """``int (rho|u|^2/2 + Pi/(gamma-1) + (|E|^2+|B|^2)/2) dx``."""
    d = state.density.values
    kin = 0.5 * d * np.sum(state.velocity.values**2, axis=0)
    internal = params.A * d**params.gamma / (params.gamma - 1.0)
    em = 0.5 * (np.sum(state.E.values**2, axis=0) + np.sum(state.B.values**2, axis=0))
    return float(np.sum(kin + internal + em) * state.grid.cell_volume)
