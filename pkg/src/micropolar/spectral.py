"""Periodic-grid fields, spectral transforms and exact spectral operators.

Fields live on the torus [0, L)^3 sampled at n points per axis. The spectral
representation stores the full n^3 complex coefficient array with the forward
transform carrying the 1/n^3 factor, so the coefficient of mode k is

    f_hat(k) = n^-3 * sum_x f(x) exp(-i k.x).

Arrays are indexed ``[x1, x2, x3]`` (vector fields carry a leading component
axis). Differentiation zeroes the unpaired Nyquist plane.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

__all__ = [
    "Grid",
    "ScalarField",
    "VectorField",
    "State",
    "RepresentationError",
    "GridMismatchError",
    "fft_workers",
    "to_spectral",
    "to_real",
    "partial",
    "gradient",
    "leray_project",
    "curl",
    "divergence",
    "grad_div",
    "laplacian",
    "inner_l2",
]

_AXES = (-3, -2, -1)


class RepresentationError(ValueError):
    """Operation called on a field in the wrong (real/spectral) representation."""


class GridMismatchError(ValueError):
    """Fields defined on different grids were combined."""


def fft_workers() -> int:
    """Thread count handed to scipy.fft (``MICROPOLAR_THREADS``, default 1)."""
    return max(1, int(os.environ.get("MICROPOLAR_THREADS", "1")))


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with n points per axis and period ``box_length``."""

    n: int
    box_length: float = 2.0 * np.pi

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 4 or self.n % 2:
            raise ValueError(f"grid size must be an even integer >= 4, got {self.n}")
        if not self.box_length > 0:
            raise ValueError(f"box_length must be positive, got {self.box_length}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "box_length", float(self.box_length))

    @property
    def spacing(self) -> float:
        return self.box_length / self.n

    @property
    def cell_volume(self) -> float:
        return self.spacing**3

    @property
    def volume(self) -> float:
        return self.box_length**3

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @cached_property
    def mode_index(self) -> np.ndarray:
        """Signed integer mode numbers in FFT order, lattice {-n/2+1, ..., n/2}."""
        m = np.fft.fftfreq(self.n, 1.0 / self.n).astype(np.int64)
        m[self.n // 2] = self.n // 2
        return m

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable k1, k2, k3 arrays scaled by 2*pi/L."""
        k = self.mode_index * (2.0 * np.pi / self.box_length)
        return (k[:, None, None], k[None, :, None], k[None, None, :])

    @cached_property
    def derivative_wavenumbers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Wavenumbers with the Nyquist entry zeroed, used for every derivative."""
        k = self.mode_index * (2.0 * np.pi / self.box_length)
        k[self.n // 2] = 0.0
        return (k[:, None, None], k[None, :, None], k[None, None, :])

    @cached_property
    def k_squared(self) -> np.ndarray:
        k1, k2, k3 = self.wavenumbers
        return k1**2 + k2**2 + k3**2

    @cached_property
    def k_magnitude(self) -> np.ndarray:
        return np.sqrt(self.k_squared)

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """True on every mode that has a Nyquist index along some axis."""
        ny = np.abs(self.mode_index) == self.n // 2
        return ny[:, None, None] | ny[None, :, None] | ny[None, None, :]

    def dealias_mask(self, fraction: float = 2.0 / 3.0) -> np.ndarray:
        """Keep modes with |m_i| < fraction * n/2 on every axis."""
        keep = np.abs(self.mode_index) < fraction * (self.n // 2)
        return keep[:, None, None] & keep[None, :, None] & keep[None, None, :]

    def coordinates(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Sample coordinates x1, x2, x3 as broadcastable arrays."""
        x = np.arange(self.n) * self.spacing
        return (x[:, None, None], x[None, :, None], x[None, None, :])

    def describe(self) -> dict:
        return {"n": self.n, "box_length": self.box_length}


@dataclass(frozen=True, eq=False)
class _Field:
    grid: Grid
    data: np.ndarray
    spectral: bool = False

    ncomp = 0

    def __post_init__(self):
        data = np.asarray(self.data)
        expected = self.grid.shape if self.ncomp == 0 else (self.ncomp, *self.grid.shape)
        if data.shape != expected:
            raise ValueError(f"expected data of shape {expected}, got {data.shape}")
        data = data.astype(np.complex128 if self.spectral else np.float64, copy=False)
        object.__setattr__(self, "data", data)

    @property
    def is_vector(self) -> bool:
        return self.ncomp > 0

    def _new(self, data, spectral=None):
        return type(self)(self.grid, data, self.spectral if spectral is None else spectral)

    def __add__(self, other):
        _check_compatible(self, other)
        return self._new(self.data + other.data)

    def __sub__(self, other):
        _check_compatible(self, other)
        return self._new(self.data - other.data)

    def __mul__(self, c):
        return self._new(self.data * c)

    __rmul__ = __mul__

    def __neg__(self):
        return self._new(-self.data)


class ScalarField(_Field):
    """Scalar field: n^3 real samples or n^3 conjugate-symmetric coefficients."""

    ncomp = 0


class VectorField(_Field):
    """Three-component field on a single grid; data has shape (3, n, n, n)."""

    ncomp = 3

    @property
    def components(self) -> tuple[ScalarField, ScalarField, ScalarField]:
        return tuple(ScalarField(self.grid, self.data[i], self.spectral) for i in range(3))

    @classmethod
    def from_components(cls, a: ScalarField, b: ScalarField, c: ScalarField) -> "VectorField":
        for other in (b, c):
            _check_compatible(a, other)
        return cls(a.grid, np.stack([a.data, b.data, c.data]), a.spectral)


@dataclass(frozen=True)
class State:
    """Velocity ``u``, micro-rotation ``omega`` (both spectral) and time ``t``."""

    u: VectorField
    omega: VectorField
    t: float = 0.0

    def __post_init__(self):
        _check_compatible(self.u, self.omega)

    @property
    def grid(self) -> Grid:
        return self.u.grid


def _check_compatible(f: _Field, g: _Field) -> None:
    if f.grid != g.grid:
        raise GridMismatchError(f"grid mismatch: {f.grid} vs {g.grid}")
    if f.spectral != g.spectral:
        raise RepresentationError("cannot combine real-space and spectral fields")
    if f.data.shape != g.data.shape:
        raise ValueError("cannot combine scalar and vector fields")


def _require(f: _Field, spectral: bool, op: str) -> None:
    if f.spectral != spectral:
        want = "spectral" if spectral else "real-space"
        raise RepresentationError(f"{op} expects a {want} field")


def to_spectral(f):
    _require(f, False, "to_spectral")
    data = sfft.fftn(f.data, axes=_AXES, norm="forward", workers=fft_workers())
    return f._new(data, spectral=True)


def to_real(f):
    _require(f, True, "to_real")
    data = sfft.ifftn(f.data, axes=_AXES, norm="forward", workers=fft_workers()).real
    return f._new(data, spectral=False)


def partial(f, axis: int):
    """Spectral derivative along ``axis`` (1, 2 or 3)."""
    _require(f, True, "partial")
    if axis not in (1, 2, 3):
        raise ValueError(f"axis must be 1, 2 or 3, got {axis}")
    k = f.grid.derivative_wavenumbers[axis - 1]
    return f._new(1j * k * f.data)


def gradient(f: ScalarField) -> VectorField:
    _require(f, True, "gradient")
    ks = f.grid.derivative_wavenumbers
    return VectorField(f.grid, np.stack([1j * k * f.data for k in ks]), True)


def _kvec(grid: Grid):
    return grid.derivative_wavenumbers


def leray_project(v: VectorField) -> VectorField:
    """Mode-wise projection v_hat - k (k.v_hat)/|k|^2; the k=0 mode is untouched.

    Uses the same Nyquist-zeroed wavenumbers as the derivatives, so the result
    is exactly divergence-free for :func:`divergence` and fixes every curl.
    """
    _require(v, True, "leray_project")
    k = _kvec(v.grid)
    k2 = k[0] ** 2 + k[1] ** 2 + k[2] ** 2
    kdotv = k[0] * v.data[0] + k[1] * v.data[1] + k[2] * v.data[2]
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(k2 > 0, kdotv / np.where(k2 > 0, k2, 1.0), 0.0)
    out = np.stack([v.data[i] - k[i] * scale for i in range(3)])
    return v._new(out)


def curl(v: VectorField) -> VectorField:
    _require(v, True, "curl")
    k1, k2, k3 = _kvec(v.grid)
    a1, a2, a3 = v.data
    out = np.stack([
        1j * (k2 * a3 - k3 * a2),
        1j * (k3 * a1 - k1 * a3),
        1j * (k1 * a2 - k2 * a1),
    ])
    return v._new(out)


def divergence(v: VectorField) -> ScalarField:
    _require(v, True, "divergence")
    k1, k2, k3 = _kvec(v.grid)
    return ScalarField(v.grid, 1j * (k1 * v.data[0] + k2 * v.data[1] + k3 * v.data[2]), True)


def grad_div(v: VectorField) -> VectorField:
    """grad(div v), i.e. -k (k.v_hat) per mode."""
    return gradient(divergence(v))


def laplacian(f):
    _require(f, True, "laplacian")
    k1, k2, k3 = _kvec(f.grid)
    return f._new(-(k1**2 + k2**2 + k3**2) * f.data)


def inner_l2(f, g) -> float:
    """L2 inner product by equispaced quadrature (real space) or Parseval (spectral)."""
    _check_compatible(f, g)
    if f.spectral:
        return float(f.grid.volume * np.vdot(g.data, f.data).real)
    return float(f.grid.cell_volume * np.sum(f.data * g.data))
