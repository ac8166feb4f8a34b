"""Spectral calculus for periodic fields on the flat square torus [0, 2pi)^2.

Fields live on an n x n grid (n even, >= 16) with x along axis 0 and y
along axis 1.  Derivatives are Fourier multipliers i*k with the unpaired
Nyquist mode of the derivative zeroed; every pointwise product of fields
is dealiased by the 2/3 rule (inputs truncated, product truncated), so
quadratic nonlinearities of band-limited fields are computed exactly.

The torus is flat: the covariant derivative is the plain directional
derivative of components, and the L^2 inner product is the grid mean
scaled by the domain area (trapezoid rule, exact for resolved modes).

Bracket sign convention: vf_bracket(u, v) = (Du) v - (Dv) u, which is
minus the usual Jacobi-Lie commutator of vector fields.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from types import SimpleNamespace

import numpy as np
from scipy import fft as _fft

TWO_PI = 2.0 * math.pi

#: minimum grid size
MIN_N = 16


class GridMismatch(ValueError):
    """Raised when an operation mixes fields living on different grids."""


@dataclass(frozen=True)
class Grid:
    """Uniform n x n sampling of [0, 2pi)^2."""

    n: int

    def __post_init__(self):
        if self.n % 2 != 0 or self.n < MIN_N:
            raise ValueError(f"grid size must be even and >= {MIN_N}, got {self.n}")

    @property
    def spacing(self) -> float:
        return TWO_PI / self.n

    def axis_points(self) -> np.ndarray:
        return np.arange(self.n) * self.spacing

    def mesh(self):
        """(X, Y) coordinate arrays, x varying along axis 0."""
        return _mesh(self.n)


@functools.lru_cache(maxsize=None)
def _mesh(n):
    x = np.arange(n) * (TWO_PI / n)
    X, Y = np.meshgrid(x, x, indexing="ij")
    X.flags.writeable = False
    Y.flags.writeable = False
    return X, Y


@functools.lru_cache(maxsize=None)
def _spectral(n):
    """Cached wavenumber layout for rfft2 arrays of an n x n grid."""
    kx = np.fft.fftfreq(n, 1.0 / n)  # integer wavenumbers, includes -n/2
    ky = np.arange(n // 2 + 1, dtype=float)
    # derivative multipliers: the unpaired Nyquist mode is dropped
    dkx = kx.copy()
    dkx[n // 2] = 0.0
    dky = ky.copy()
    dky[-1] = 0.0
    cutoff = n // 3
    mask = (np.abs(kx)[:, None] <= cutoff) & (ky[None, :] <= cutoff)
    k2 = kx[:, None] ** 2 + ky[None, :] ** 2
    k2_safe = k2.copy()
    k2_safe[0, 0] = 1.0
    # |k|^2 built from the derivative multipliers; zeros (mean mode and the
    # derivative-invisible Nyquist lines) are patched so division is safe
    k2d = dkx[:, None] ** 2 + dky[None, :] ** 2
    k2d_safe = k2d.copy()
    k2d_safe[k2d == 0.0] = 1.0
    inv_k2d = np.where(k2d == 0.0, 0.0, 1.0 / k2d_safe)
    return SimpleNamespace(
        kx=kx[:, None], ky=ky[None, :],
        dkx=dkx[:, None], dky=dky[None, :],
        dealias=mask, k2=k2, k2_safe=k2_safe, k2d_safe=k2d_safe,
        inv_k2d=inv_k2d,
    )


@dataclass(frozen=True)
class ScalarField:
    """Real samples of a periodic scalar on a Grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n, self.grid.n):
            raise ValueError(
                f"values must have shape {(self.grid.n, self.grid.n)}, got {v.shape}")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class VectorField2:
    """Tangent vector field with components u (along x) and w (along y)."""

    u: ScalarField
    w: ScalarField

    def __post_init__(self):
        if self.u.grid != self.w.grid:
            raise GridMismatch("vector components live on different grids")

    @property
    def grid(self) -> Grid:
        return self.u.grid

    @classmethod
    def of(cls, grid: Grid, u_values, w_values) -> "VectorField2":
        return cls(ScalarField(grid, u_values), ScalarField(grid, w_values))


def _require_same_grid(*grids):
    first = grids[0]
    for g in grids[1:]:
        if g != first:
            raise GridMismatch(f"grids differ: {first} vs {g}")
    return first


# ---------------------------------------------------------------------------
# transforms and dealiasing on raw arrays
# ---------------------------------------------------------------------------

def _fwd(values):
    return _fft.rfft2(values)


def _inv(spec, n):
    return _fft.irfft2(spec, s=(n, n))


def _truncated(values, n):
    """Values with all modes beyond the 2/3 cutoff removed."""
    F = _fwd(values)
    F *= _spectral(n).dealias
    return _inv(F, n)


def _product(a, b, n):
    """Dealiased pointwise product of two sample arrays."""
    return _truncated(_truncated(a, n) * _truncated(b, n), n)


def _ddx_values(values, n, axis):
    s = _spectral(n)
    F = _fwd(values)
    if axis == "x":
        F *= 1j * s.dkx
    elif axis == "y":
        F *= 1j * s.dky
    else:
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    return _inv(F, n)


# ---------------------------------------------------------------------------
# public operators
# ---------------------------------------------------------------------------

def dealias(f: ScalarField) -> ScalarField:
    """Project a scalar field onto the modes kept by the 2/3 rule."""
    return ScalarField(f.grid, _truncated(f.values, f.grid.n))


def ddx(f: ScalarField, axis: str) -> ScalarField:
    """Spectral partial derivative along 'x' (axis 0) or 'y' (axis 1)."""
    return ScalarField(f.grid, _ddx_values(f.values, f.grid.n, axis))


def divergence(v: VectorField2) -> ScalarField:
    n = v.grid.n
    out = _ddx_values(v.u.values, n, "x") + _ddx_values(v.w.values, n, "y")
    return ScalarField(v.grid, out)


def gradient(f: ScalarField) -> VectorField2:
    n = f.grid.n
    return VectorField2.of(f.grid, _ddx_values(f.values, n, "x"),
                           _ddx_values(f.values, n, "y"))


def covariant_derivative(v: VectorField2, u: VectorField2) -> VectorField2:
    """(v . grad) u, the flat-torus covariant derivative of u along v."""
    n = _require_same_grid(v.grid, u.grid).n
    out = []
    for comp in (u.u.values, u.w.values):
        cx = _ddx_values(comp, n, "x")
        cy = _ddx_values(comp, n, "y")
        out.append(_product(v.u.values, cx, n) + _product(v.w.values, cy, n))
    return VectorField2.of(v.grid, out[0], out[1])


def vf_bracket(u: VectorField2, v: VectorField2) -> VectorField2:
    """(Du) v - (Dv) u  (minus the standard vector-field commutator)."""
    _require_same_grid(u.grid, v.grid)
    du_v = covariant_derivative(v, u)   # (Du) v = (v . grad) u
    dv_u = covariant_derivative(u, v)
    return VectorField2.of(u.grid, du_v.u.values - dv_u.u.values,
                           du_v.w.values - dv_u.w.values)


def inner_l2(a: VectorField2, b: VectorField2) -> float:
    """L^2 pairing: area-scaled grid mean of the pointwise dot product."""
    _require_same_grid(a.grid, b.grid)
    dots = a.u.values * b.u.values + a.w.values * b.w.values
    return float(dots.mean() * TWO_PI ** 2)


def helmholtz_decompose(u: VectorField2):
    """Split u = v + grad f with div v = 0, per-mode in Fourier space.

    Uses the same wavenumber convention as ``divergence`` and ``gradient``,
    so div v vanishes exactly under this module's derivative.  Modes the
    derivative cannot see (the mean and the unpaired Nyquist lines) belong
    to the divergence-free part.  Returns (v, gradf) on u's grid.
    """
    n = u.grid.n
    s = _spectral(n)
    U = _fwd(u.u.values)
    W = _fwd(u.w.values)
    dot = (s.dkx * U + s.dky * W) / s.k2d_safe
    GU = s.dkx * dot
    GW = s.dky * dot
    grad = VectorField2.of(u.grid, _inv(GU, n), _inv(GW, n))
    div_free = VectorField2.of(u.grid, _inv(U - GU, n), _inv(W - GW, n))
    return div_free, grad


def leray_project(u: VectorField2) -> VectorField2:
    """Orthogonal projection onto divergence-free fields."""
    return helmholtz_decompose(u)[0]


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def save_field(path, f: ScalarField, name: str) -> None:
    """Write a scalar field as CSV: one 'n,name' header line, then n rows."""
    if "," in name or "\n" in name or not name:
        raise ValueError(f"field name must be nonempty and comma-free: {name!r}")
    lines = [f"{f.grid.n},{name}"]
    for row in f.values:
        lines.append(",".join("%.17g" % x for x in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_field(path):
    """Inverse of save_field. Returns (ScalarField, name)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        parts = header.split(",", 1)
        if len(parts) != 2:
            raise ValueError(f"malformed field header: {header!r}")
        try:
            n = int(parts[0])
        except ValueError as exc:
            raise ValueError(f"malformed field header: {header!r}") from exc
        name = parts[1]
        values = np.loadtxt(fh, delimiter=",", ndmin=2)
    if values.shape != (n, n):
        raise ValueError(f"expected {n}x{n} values, got {values.shape}")
    return ScalarField(Grid(n), values), name
