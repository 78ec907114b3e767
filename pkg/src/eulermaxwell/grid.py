"""Periodic-box fields and Fourier-multiplier operators.

The box is ``[-L, L)`` along each active axis with ``n`` nodes per axis.
Fields may vary only along the first ``active_dims`` coordinates, while
vector fields always carry three components. All differential operators
are Fourier multipliers, so ``div curl`` and ``curl grad`` vanish to
round-off and the homogeneous operator ``|xi|^sigma`` is exact on
band-limited data.
"""

from __future__ import annotations

import csv
import functools
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft as sfft

__all__ = [
    "GridSpec",
    "ScalarField",
    "VectorField",
    "SpectralWorkspace",
    "workspace",
    "grad",
    "div",
    "curl",
    "laplacian",
    "dealias",
    "fractional_op",
    "sobolev_seminorm",
    "l2_norm",
    "sup_norm",
    "xdot_sigma",
    "x_sigma",
    "gagliardo_seminorm_1d",
    "gagliardo_constant",
    "commutator_ratio",
    "random_bandlimited",
    "leray_project",
    "inverse_laplacian",
    "interpolate_scaled",
    "save_field",
    "load_field",
    "export_csv_slice",
]


def _fft_friendly(n) -> bool:
    """Even, at least 8, and free of prime factors above 5."""
    if not isinstance(n, (int, np.integer)) or n < 8 or n % 2:
        return False
    for p in (2, 3, 5):
        while n % p == 0:
            n //= p
    return n == 1


@dataclass(frozen=True)
class GridSpec:
    """Periodic box ``[-L, L)^d`` sampled with ``n`` points per active axis."""

    n: int
    half_width: float
    active_dims: int = 3

    def __post_init__(self):
        if self.active_dims not in (1, 2, 3):
            raise ValueError(f"active_dims must be 1, 2 or 3, got {self.active_dims}")
        if not _fft_friendly(self.n):
            raise ValueError(f"n must be an even 5-smooth integer >= 8 (such as 32, 48, 64), got {self.n}")
        if not self.half_width > 0:
            raise ValueError(f"half_width must be positive, got {self.half_width}")

    @property
    def L(self) -> float:
        return self.half_width

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.active_dims

    @property
    def size(self) -> int:
        return self.n**self.active_dims

    @property
    def cell_volume(self) -> float:
        return self.h**self.active_dims

    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(range(-self.active_dims, 0))

    def coords(self) -> np.ndarray:
        """Node positions along one active axis."""
        return -self.half_width + self.h * np.arange(self.n)

    def positions(self) -> np.ndarray:
        """Node positions as a ``(3, *shape)`` array; inactive coordinates are 0."""
        x = self.coords()
        mesh = np.meshgrid(*([x] * self.active_dims), indexing="ij")
        out = np.zeros((3,) + self.shape)
        for i, m in enumerate(mesh):
            out[i] = m
        return out


@dataclass
class ScalarField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("scalar field contains non-finite values")

    def __add__(self, other: ScalarField) -> ScalarField:
        _same_grid(self, other)
        return ScalarField(self.grid, self.values + other.values)

    def __sub__(self, other: ScalarField) -> ScalarField:
        _same_grid(self, other)
        return ScalarField(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> ScalarField:
        return ScalarField(self.grid, self.values * c)

    __rmul__ = __mul__

    @classmethod
    def zeros(cls, grid: GridSpec) -> ScalarField:
        return cls(grid, np.zeros(grid.shape))


@dataclass
class VectorField:
    """Three-component field; ``values`` has shape ``(3, *grid.shape)``."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (3,) + self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} != {(3,) + self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("vector field contains non-finite values")

    @property
    def components(self) -> tuple[ScalarField, ScalarField, ScalarField]:
        return tuple(ScalarField(self.grid, c) for c in self.values)

    @classmethod
    def from_components(cls, comps) -> VectorField:
        grids = {c.grid for c in comps}
        if len(grids) != 1 or len(comps) != 3:
            raise ValueError("a vector field needs three components on one grid")
        return cls(comps[0].grid, np.stack([c.values for c in comps]))

    @classmethod
    def zeros(cls, grid: GridSpec) -> VectorField:
        return cls(grid, np.zeros((3,) + grid.shape))

    def __add__(self, other: VectorField) -> VectorField:
        _same_grid(self, other)
        return VectorField(self.grid, self.values + other.values)

    def __sub__(self, other: VectorField) -> VectorField:
        _same_grid(self, other)
        return VectorField(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> VectorField:
        return VectorField(self.grid, self.values * c)

    __rmul__ = __mul__


def _same_grid(*fields) -> GridSpec:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise ValueError(f"grid mismatch: {f.grid} vs {grid}")
    return grid


@dataclass(eq=False)
class SpectralWorkspace:
    """Wavenumbers and the 2/3 dealiasing mask for one grid (rfft layout)."""

    grid: GridSpec
    xi: tuple[np.ndarray, ...] = field(init=False)
    xi_sq: np.ndarray = field(init=False)
    mask: np.ndarray = field(init=False)
    parseval_weight: np.ndarray = field(init=False)

    def __post_init__(self):
        g = self.grid
        d = g.active_dims
        scale = np.pi / g.half_width  # box period is 2L
        full = sfft.fftfreq(g.n, d=1.0 / g.n)
        half = sfft.rfftfreq(g.n, d=1.0 / g.n)
        idx = [full] * (d - 1) + [half]
        mesh = np.meshgrid(*idx, indexing="ij")
        self.xi = tuple(scale * m for m in mesh)
        self.xi_sq = sum(x * x for x in self.xi)
        keep = np.ones(self.xi_sq.shape, dtype=bool)
        for m in mesh:
            keep &= np.abs(m) < g.n / 3.0
        self.mask = keep
        # rfft stores one of each conjugate pair along the last axis
        w = np.full(half.shape, 2.0)
        w[0] = 1.0
        if g.n % 2 == 0:
            w[-1] = 1.0
        self.parseval_weight = np.broadcast_to(w, self.xi_sq.shape)

    @property
    def spectral_shape(self) -> tuple[int, ...]:
        return self.xi_sq.shape

    def fft(self, a: np.ndarray) -> np.ndarray:
        return sfft.rfftn(a, axes=self.grid.axes)

    def ifft(self, a_hat: np.ndarray) -> np.ndarray:
        return sfft.irfftn(a_hat, s=self.grid.shape, axes=self.grid.axes)

    def abs_xi_pow(self, sigma: float) -> np.ndarray:
        """``|xi|^sigma`` with the mean mode set to 0 for sigma != 0 (1 for sigma = 0)."""
        if sigma == 0:
            return np.ones(self.spectral_shape)
        out = np.zeros(self.spectral_shape)
        nz = self.xi_sq > 0
        out[nz] = self.xi_sq[nz] ** (0.5 * sigma)
        return out

    def dealias_hat(self, a_hat: np.ndarray) -> np.ndarray:
        return a_hat * self.mask

    def dealias(self, a: np.ndarray) -> np.ndarray:
        return self.ifft(self.fft(a) * self.mask)

    # raw-array kernels used by the solvers ---------------------------------

    def grad_hat(self, f_hat: np.ndarray) -> np.ndarray:
        out = np.zeros((3,) + f_hat.shape, dtype=complex)
        for i, k in enumerate(self.xi):
            out[i] = 1j * k * f_hat
        return out

    def div_hat(self, F_hat: np.ndarray) -> np.ndarray:
        out = np.zeros(F_hat.shape[1:], dtype=complex)
        for i, k in enumerate(self.xi):
            out += 1j * k * F_hat[i]
        return out

    def curl_hat(self, F_hat: np.ndarray) -> np.ndarray:
        k = list(self.xi) + [0.0] * (3 - len(self.xi))
        out = np.empty_like(F_hat)
        out[0] = 1j * (k[1] * F_hat[2] - k[2] * F_hat[1])
        out[1] = 1j * (k[2] * F_hat[0] - k[0] * F_hat[2])
        out[2] = 1j * (k[0] * F_hat[1] - k[1] * F_hat[0])
        return out

    def norm_sq_hat(self, a_hat: np.ndarray, sigma: float = 0.0) -> float:
        """``||Lambda^sigma a||_{L2}^2`` from rfft coefficients (any leading axes summed)."""
        g = self.grid
        weight = self.parseval_weight * self.abs_xi_pow(sigma) ** 2
        total = np.sum(weight * np.abs(a_hat) ** 2)
        return float(total) * g.cell_volume / g.size


@functools.lru_cache(maxsize=32)
def workspace(grid: GridSpec) -> SpectralWorkspace:
    return SpectralWorkspace(grid)


def grad(f: ScalarField) -> VectorField:
    ws = workspace(f.grid)
    return VectorField(f.grid, ws.ifft(ws.grad_hat(ws.fft(f.values))))


def div(F: VectorField) -> ScalarField:
    ws = workspace(F.grid)
    return ScalarField(F.grid, ws.ifft(ws.div_hat(ws.fft(F.values))))


def curl(F: VectorField) -> VectorField:
    ws = workspace(F.grid)
    return VectorField(F.grid, ws.ifft(ws.curl_hat(ws.fft(F.values))))


def laplacian(f: ScalarField) -> ScalarField:
    ws = workspace(f.grid)
    return ScalarField(f.grid, ws.ifft(-ws.xi_sq * ws.fft(f.values)))


def dealias(f):
    """Apply the 2/3-rule mask to a scalar or vector field."""
    ws = workspace(f.grid)
    return type(f)(f.grid, ws.dealias(f.values))


def fractional_op(f: ScalarField, sigma: float) -> ScalarField:
    """Apply the homogeneous multiplier ``|xi|^sigma``."""
    if not np.isfinite(sigma) or sigma < 0:
        raise ValueError(f"sigma must be finite and >= 0, got {sigma}")
    ws = workspace(f.grid)
    return ScalarField(f.grid, ws.ifft(ws.abs_xi_pow(sigma) * ws.fft(f.values)))


def sobolev_seminorm(f, sigma: float, dealiased: bool = True) -> float:
    """Homogeneous ``H^sigma`` seminorm by Parseval.

    Works for scalar and vector fields (components combined by root-sum-square).
    With ``dealiased`` the modes removed by the 2/3 rule are excluded; the
    mean mode counts only for ``sigma == 0``.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    ws = workspace(f.grid)
    a_hat = ws.fft(f.values)
    if dealiased:
        a_hat = a_hat * ws.mask
    return float(np.sqrt(ws.norm_sq_hat(a_hat, sigma)))


def l2_norm(f) -> float:
    """Physical-space L2 norm (pairwise-summed, deterministic)."""
    return float(np.sqrt(np.sum(f.values**2) * f.grid.cell_volume))


def sup_norm(f) -> float:
    """Max pointwise magnitude (Euclidean norm for vectors)."""
    if isinstance(f, VectorField):
        return float(np.sqrt(np.max(np.sum(f.values**2, axis=0))))
    return float(np.max(np.abs(f.values)))


def xdot_sigma(fields, sigma: float) -> float:
    """Root-sum-square of the ``H^sigma`` seminorms of a tuple of fields."""
    return float(np.sqrt(sum(sobolev_seminorm(f, sigma) ** 2 for f in fields)))


def x_sigma(fields, sigma: float) -> float:
    """``sqrt(Xdot_0^2 + Xdot_sigma^2)``."""
    return float(np.hypot(xdot_sigma(fields, 0.0), xdot_sigma(fields, sigma)))


def gagliardo_seminorm_1d(f: ScalarField, sigma: float) -> float:
    """Square root of the double-sum ``sum |f(y)-f(x)|^2 / |y-x|^(1+2 sigma) h^2``.

    Distances are periodic (shortest way around the box) and the diagonal is
    skipped. The result is unnormalised; divide by ``sqrt(gagliardo_constant)``
    to compare with :func:`sobolev_seminorm` on the real line.
    """
    if f.grid.active_dims != 1:
        raise ValueError("gagliardo_seminorm_1d needs a grid with one active dim")
    if not 0 < sigma < 1:
        raise ValueError(f"sigma must lie in (0, 1), got {sigma}")
    g = f.grid
    if g.n > 1024:
        raise ValueError("gagliardo_seminorm_1d is quadratic in n; n <= 1024")
    v = f.values
    offsets = np.arange(1, g.n)
    dist = g.h * np.minimum(offsets, g.n - offsets)
    kern = dist ** (-(1.0 + 2.0 * sigma))
    diffs = np.array([np.sum((np.roll(v, -k) - v) ** 2) for k in offsets])
    return float(np.sqrt(np.sum(kern * diffs) * g.h * g.h))


def gagliardo_constant(sigma: float) -> float:
    """Constant ``c`` with ``int int |f(x+r)-f(x)|^2/|r|^(1+2s) = c ||f||_{H^s}^2`` on the line."""
    from scipy.special import gamma

    return 2.0 * np.pi / (gamma(1.0 + 2.0 * sigma) * np.sin(np.pi * sigma))


def _padded(ws: SpectralWorkspace, a: np.ndarray, factor: int = 2):
    """Spectrally upsample to a grid with ``factor * n`` points per axis."""
    g = ws.grid
    big = GridSpec(g.n * factor, g.half_width, g.active_dims)
    a_hat = sfft.fftn(a, axes=g.axes)
    out_hat = np.zeros(a.shape[: a.ndim - g.active_dims] + big.shape, dtype=complex)
    n = g.n
    sl = []
    for _ in range(g.active_dims):
        sl.append(np.r_[0 : n // 2, big.n - n // 2 : big.n])
    idx = np.ix_(*sl)
    lead = (Ellipsis,)
    # Nyquist bin of the small grid is dropped so the padded field stays real
    src = a_hat.copy()
    for ax in g.axes:
        s = [slice(None)] * a.ndim
        s[ax] = n // 2
        src[tuple(s)] = 0.0
    out_hat[lead + idx] = src
    scale = (factor**g.active_dims)
    return big, np.real(sfft.ifftn(out_hat, axes=big.axes)) * scale


def commutator_ratio(v: ScalarField, u: ScalarField, s: float) -> tuple[float, float]:
    """Normalised first- and second-order commutator sizes for ``Lambda^s``.

    Returns ``(r1, r2)`` with

    * ``r1 = ||[v, L^s]u|| / (||v||_{H^s} ||u||_inf + ||grad v||_inf ||u||_{H^(s-1)})``
    * ``r2 = ||[v, L^s]u - s grad v . L^(s-2) grad u|| /
      (||v||_{H^s} ||u||_inf + ||grad^2 v||_inf ||u||_{H^(s-2)})``

    ``r2`` is ``nan`` when ``s <= 1``. Products are formed on a twice-refined
    grid so nothing aliases.
    """
    grid = _same_grid(v, u)
    if not s > 0:
        raise ValueError(f"s must be positive, got {s}")
    ws = workspace(grid)
    big, vb = _padded(ws, v.values)
    _, ub = _padded(ws, u.values)
    wb = workspace(big)
    vh, uh = wb.fft(vb), wb.fft(ub)
    lam = wb.abs_xi_pow(s)
    # [v, L^s] u = v L^s u - L^s (v u)
    comm = vb * wb.ifft(lam * uh) - wb.ifft(lam * wb.fft(vb * ub))

    u_inf = float(np.max(np.abs(ub)))
    v_hs = np.sqrt(wb.norm_sq_hat(vh, s))
    grad_v = wb.ifft(wb.grad_hat(vh))
    grad_v_inf = float(np.sqrt(np.max(np.sum(grad_v**2, axis=0))))
    u_hs1 = np.sqrt(wb.norm_sq_hat(uh * _neg_pow(wb, s - 1)))
    v_trivial = v_hs == 0 and grad_v_inf == 0
    if v_trivial and u_inf == 0:
        raise ValueError("commutator ratio undefined: both inputs trivial")

    den1 = v_hs * u_inf + grad_v_inf * u_hs1
    num1 = np.sqrt(np.sum(comm**2) * big.cell_volume)
    r1 = float(num1 / den1) if den1 > 0 else 0.0

    if s <= 1:
        return r1, float("nan")
    # s grad v . L^(s-2) grad u
    mult = _neg_pow(wb, s - 2)
    corr = np.zeros(big.shape)
    for i, k in enumerate(wb.xi):
        corr += grad_v[i] * wb.ifft(mult * 1j * k * uh)
    rem = comm - s * corr
    hess_sq = np.zeros(big.shape)
    for i, ki in enumerate(wb.xi):
        for j, kj in enumerate(wb.xi):
            hess_sq += wb.ifft(-ki * kj * vh) ** 2
    hess_inf = float(np.sqrt(np.max(hess_sq)))
    u_hs2 = np.sqrt(wb.norm_sq_hat(uh * _neg_pow(wb, s - 2)))
    den2 = v_hs * u_inf + hess_inf * u_hs2
    num2 = np.sqrt(np.sum(rem**2) * big.cell_volume)
    r2 = float(num2 / den2) if den2 > 0 else 0.0
    return r1, r2


def _neg_pow(ws: SpectralWorkspace, p: float) -> np.ndarray:
    """``|xi|^p`` for any real ``p`` with the mean mode set to 0."""
    out = np.zeros(ws.spectral_shape)
    nz = ws.xi_sq > 0
    out[nz] = ws.xi_sq[nz] ** (0.5 * p)
    return out


def random_bandlimited(grid: GridSpec, rng: np.random.Generator, decay: float = 4.0,
                       kmax: int | None = None, mean: float = 0.0) -> ScalarField:
    """Random real field with modes ``|m| <= kmax`` and amplitudes ``(1+|m|)^-decay``.

    The default ``kmax`` is the largest mode kept by the 2/3 rule. Mode
    amplitudes are drawn in a fixed order so a given seed gives the same
    coefficients for every ``n`` large enough to hold them.
    """
    if kmax is None:
        kmax = int(np.ceil(grid.n / 3.0)) - 1
    d = grid.active_dims
    ms = np.arange(-kmax, kmax + 1)
    mesh = np.meshgrid(*([ms] * d), indexing="ij")
    mabs = np.sqrt(sum(m * m for m in mesh))
    coef = (rng.standard_normal(mabs.shape) + 1j * rng.standard_normal(mabs.shape))
    coef *= (1.0 + mabs) ** (-decay)
    x = grid.positions()[:d]
    vals = np.zeros(grid.shape)
    k = np.pi / grid.half_width
    # separable evaluation: sum_m c_m exp(i k m . x)
    phases = [np.exp(1j * k * np.multiply.outer(ms, grid.coords())) for _ in range(d)]
    if d == 1:
        vals = np.real(coef @ phases[0])
    elif d == 2:
        vals = np.real(phases[0].T @ coef @ phases[1])
    else:
        t = np.einsum("abc,ai->ibc", coef, phases[0])
        t = np.einsum("ibc,bj->ijc", t, phases[1])
        vals = np.real(np.einsum("ijc,ck->ijk", t, phases[2]))
    del x
    vals = vals - vals.mean() + mean
    return ScalarField(grid, vals)


def leray_project(F: VectorField) -> VectorField:
    """Remove the gradient part of ``F`` (mean mode untouched)."""
    ws = workspace(F.grid)
    F_hat = ws.fft(F.values)
    d_hat = ws.div_hat(F_hat)
    inv = np.zeros(ws.spectral_shape)
    nz = ws.xi_sq > 0
    inv[nz] = 1.0 / ws.xi_sq[nz]
    # F - grad Delta^{-1} div F
    phi_hat = -d_hat * inv
    return VectorField(F.grid, ws.ifft(F_hat - ws.grad_hat(phi_hat)))


def inverse_laplacian(f: ScalarField, tol: float = 1e-12) -> ScalarField:
    """Mean-free solution ``phi`` of ``Delta phi = f``; ``f`` must be mean-free."""
    ws = workspace(f.grid)
    f_hat = ws.fft(f.values)
    scale = max(float(np.max(np.abs(f.values))), 1e-300)
    if abs(f.values.mean()) > tol * scale:
        raise ValueError("inverse Laplacian needs a mean-free right-hand side on a periodic box")
    inv = np.zeros(ws.spectral_shape)
    nz = ws.xi_sq > 0
    inv[nz] = -1.0 / ws.xi_sq[nz]
    return ScalarField(f.grid, ws.ifft(f_hat * inv))


def interpolate_scaled(values: np.ndarray, grid: GridSpec, factor: float) -> np.ndarray:
    """Evaluate the trigonometric interpolant of ``values`` at ``factor * x_j``.

    Separable along active axes (leading axes untouched). Used to compare
    fields sampled in frames related by a uniform dilation.
    """
    n = grid.n
    x = grid.coords()
    m = sfft.fftfreq(n, d=1.0 / n)
    k = np.pi / grid.half_width
    # matrix mapping node values to interpolant values at factor * x
    fwd = np.exp(-1j * k * np.outer(m, x)) / n
    fwd[n // 2] = 0.0  # drop Nyquist so the interpolant stays real
    back = np.exp(1j * k * np.outer(factor * x, m))
    mat = np.real(back @ fwd)
    out = values
    d = grid.active_dims
    for ax in range(values.ndim - d, values.ndim):
        out = np.moveaxis(np.tensordot(mat, out, axes=([1], [ax])), 0, ax)
    return out


_MAGIC = b"EMFLD1\0\0"


def save_field(path, f) -> None:
    """Binary layout: magic, header ``(ncomp, n, active_dims)`` int32 + ``L`` float64, then data.

    Data is little-endian float64, row-major over active axes, one block per component.
    """
    vals = f.values if isinstance(f, VectorField) else f.values[None]
    header = struct.pack("<iiid", vals.shape[0], f.grid.n, f.grid.active_dims, f.grid.half_width)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(header)
        fh.write(np.ascontiguousarray(vals, dtype="<f8").tobytes())


def load_field(path):
    data = Path(path).read_bytes()
    if data[:8] != _MAGIC:
        raise ValueError(f"{path}: not a field file")
    ncomp, n, d, L = struct.unpack("<iiid", data[8:28])
    grid = GridSpec(n, L, d)
    vals = np.frombuffer(data[28:], dtype="<f8").reshape((ncomp,) + grid.shape).astype(float)
    if ncomp == 1:
        return ScalarField(grid, vals[0])
    if ncomp == 3:
        return VectorField(grid, vals)
    raise ValueError(f"{path}: unsupported component count {ncomp}")


def export_csv_slice(path, f, axis: int = 0) -> None:
    """Write the line through the box centre along ``axis`` as CSV."""
    g = f.grid
    if axis >= g.active_dims:
        raise ValueError(f"axis {axis} is not active")
    idx = [g.n // 2] * g.active_dims
    idx[axis] = slice(None)
    x = g.coords()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if isinstance(f, VectorField):
            w.writerow(["x", "c0", "c1", "c2"])
            cols = [f.values[(c,) + tuple(idx)] for c in range(3)]
            for i in range(g.n):
                w.writerow([repr(x[i])] + [repr(float(c[i])) for c in cols])
        else:
            w.writerow(["x", "value"])
            col = f.values[tuple(idx)]
            for i in range(g.n):
                w.writerow([repr(x[i]), repr(float(col[i]))])
