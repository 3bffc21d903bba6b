"""Dealiased pseudo-spectral integration of the incompressible micropolar system.

    du/dt = P[-(u.grad)u + curl w] + lap u
    dw/dt = -(u.grad)w + lap w + grad div w - 2w + curl u

P is the Leray projector, so the pressure never appears. Time stepping is an
integrating-factor RK4: the diagonal part (lap on both fields, -2 on w) is
applied exactly per mode; advection and the non-diagonal couplings are
advanced by the RK4 stages.

Internally the solver works on half-spectra (real FFTs along the last axis);
``State`` objects crossing the public API carry full spectra.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable

import numpy as np
import scipy.fft as sfft

from .spectral import Grid, ScalarField, State, VectorField, fft_workers

__all__ = [
    "SolverConfig",
    "Rhs",
    "SolverError",
    "CFLViolation",
    "BlowUpError",
    "nonlinear_advection",
    "rhs",
    "step",
    "simulate",
    "pressure_field",
]

log = logging.getLogger(__name__)

_AXES = (-3, -2, -1)


class SolverError(RuntimeError):
    pass


class CFLViolation(SolverError):
    pass


class BlowUpError(SolverError):
    """NaN/Inf in the state, or H1 growth past the configured factor."""


@dataclass(frozen=True)
class SolverConfig:
    grid: Grid
    dt: float
    t_end: float
    dealias: float = 2.0 / 3.0
    integrator: str = "IFRK4"
    cfl_cap: float | None = 0.5
    coupling: bool = True  # curl w in the u-equation and curl u in the w-equation
    nonlinear: bool = True  # advection terms
    blowup_factor: float = 1e6

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not 0 < self.dealias <= 1:
            raise ValueError(f"dealias fraction must lie in (0, 1], got {self.dealias}")
        if self.integrator != "IFRK4":
            raise ValueError(f"unsupported integrator {self.integrator!r}")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")

    @property
    def num_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass(frozen=True)
class Rhs:
    du: VectorField
    domega: VectorField


class _HalfSpectralOps:
    """Wavenumbers, masks and transforms on the real-FFT half spectrum."""

    def __init__(self, grid: Grid, dealias: float):
        n = grid.n
        self.grid = grid
        self.n = n
        self.m = n // 2 + 1
        kd = grid.derivative_wavenumbers
        self.k = (kd[0], kd[1], kd[2][..., : self.m])
        self.k2 = self.k[0] ** 2 + self.k[1] ** 2 + self.k[2] ** 2
        self.inv_k2 = np.where(self.k2 > 0, 1.0 / np.where(self.k2 > 0, self.k2, 1.0), 0.0)
        self.mask = grid.dealias_mask(dealias)[..., : self.m]
        # Parseval weights: interior planes of the last axis stand for two modes
        w = np.full(self.m, 2.0)
        w[0] = 1.0
        if n % 2 == 0:
            w[-1] = 1.0
        self.weight = w

    def forward(self, a):
        return sfft.rfftn(a, axes=_AXES, norm="forward", workers=fft_workers())

    def inverse(self, a):
        return sfft.irfftn(a, s=(self.n,) * 3, axes=_AXES, norm="forward", workers=fft_workers())

    def project(self, v):
        k = self.k
        s = (k[0] * v[0] + k[1] * v[1] + k[2] * v[2]) * self.inv_k2
        return np.stack([v[i] - k[i] * s for i in range(3)])

    def curl(self, v):
        k1, k2, k3 = self.k
        return 1j * np.stack([k2 * v[2] - k3 * v[1], k3 * v[0] - k1 * v[2], k1 * v[1] - k2 * v[0]])

    def grad_div(self, v):
        k = self.k
        d = k[0] * v[0] + k[1] * v[1] + k[2] * v[2]
        return -np.stack([k[0] * d, k[1] * d, k[2] * d])

    def velocity(self, vh):
        return self.inverse(vh * self.mask)

    def advect(self, v_real, wh):
        """Masked spectrum of (v.grad)w for real-space v and half-spectrum w."""
        wm = wh * self.mask
        grads = np.empty((3, 3) + wm.shape[1:], dtype=np.complex128)
        for i in range(3):
            grads[i] = 1j * self.k[i] * wm
        g = self.inverse(grads.reshape((9,) + wm.shape[1:])).reshape((3, 3) + v_real.shape[1:])
        prod = np.einsum("i...,ij...->j...", v_real, g)
        return self.forward(prod) * self.mask

    def energy(self, vh):
        """Sum over modes of |v_hat|^2 for a half spectrum."""
        e = vh.real**2 + vh.imag**2
        return float(np.sum(e * self.weight))

    def grad_energy(self, vh):
        e = vh.real**2 + vh.imag**2
        if e.ndim == 4:
            e = e.sum(axis=0)
        return float(np.sum(e * self.k2 * self.weight))


@lru_cache(maxsize=8)
def _ops(grid: Grid, dealias: float) -> _HalfSpectralOps:
    return _HalfSpectralOps(grid, dealias)


def _to_half(f: VectorField) -> np.ndarray:
    return np.ascontiguousarray(f.data[..., : f.grid.n // 2 + 1])


def _to_full(h: np.ndarray, n: int) -> np.ndarray:
    full = np.empty(h.shape[:-1] + (n,), dtype=np.complex128)
    m = n // 2 + 1
    full[..., :m] = h
    neg = (-np.arange(n)) % n
    mirrored = np.take(np.take(h, neg, axis=-3), neg, axis=-2)
    full[..., m:] = np.conj(mirrored[..., n - np.arange(m, n)])
    return full


def _require_spectral(*fields):
    for f in fields:
        if not f.spectral:
            raise ValueError("solver operations expect spectral fields")


def nonlinear_advection(v: VectorField, w: VectorField, dealias: float = 2.0 / 3.0) -> VectorField:
    """Pseudo-spectral (v.grad)w with the 2/3 rule applied to inputs and product."""
    _require_spectral(v, w)
    if v.grid != w.grid:
        raise ValueError("grid mismatch")
    ops = _ops(v.grid, dealias)
    out = ops.advect(ops.velocity(_to_half(v)), _to_half(w))
    return VectorField(v.grid, _to_full(out, v.grid.n), True)


class _Integrator:
    """IFRK4 stepping on half spectra for one configuration."""

    def __init__(self, config: SolverConfig):
        self.config = config
        self.ops = _ops(config.grid, config.dealias)
        self._factors = {}

    def factors(self, dt):
        if dt not in self._factors:
            k2 = self.ops.k2
            self._factors[dt] = (
                np.exp(-k2 * dt), np.exp(-k2 * dt / 2),
                np.exp(-(k2 + 2.0) * dt), np.exp(-(k2 + 2.0) * dt / 2),
            )
        return self._factors[dt]

    def explicit(self, uh, wh):
        """Non-diagonal terms; also returns max |u| over the grid."""
        ops, cfg = self.ops, self.config
        du = np.zeros_like(uh)
        dw = ops.grad_div(wh)
        umax = 0.0
        if cfg.nonlinear:
            u = ops.velocity(uh)
            umax = float(np.sqrt(np.max(np.sum(u**2, axis=0))))
            du -= ops.advect(u, uh)
            dw -= ops.advect(u, wh)
        if cfg.coupling:
            du += ops.curl(wh)
            dw += ops.curl(uh)
        return ops.project(du), dw, umax

    def step(self, uh, wh, dt):
        eu, eu2, ew, ew2 = self.factors(dt)
        cfg = self.config
        a1, b1, umax = self.explicit(uh, wh)
        if not cfg.nonlinear:
            umax = float(np.sqrt(np.max(np.sum(self.ops.velocity(uh) ** 2, axis=0))))
        if cfg.cfl_cap is not None and umax > 0:
            limit = cfg.cfl_cap * cfg.grid.spacing / umax
            if dt > limit * (1 + 1e-12):
                raise CFLViolation(f"dt={dt} exceeds CFL limit {limit:.3e} (max|u|={umax:.3e})")
        a2, b2, _ = self.explicit(eu2 * (uh + 0.5 * dt * a1), ew2 * (wh + 0.5 * dt * b1))
        a3, b3, _ = self.explicit(eu2 * uh + 0.5 * dt * a2, ew2 * wh + 0.5 * dt * b2)
        a4, b4, _ = self.explicit(eu * uh + dt * eu2 * a3, ew * wh + dt * ew2 * b3)
        un = eu * uh + dt / 6.0 * (eu * a1 + 2.0 * eu2 * (a2 + a3) + a4)
        wn = ew * wh + dt / 6.0 * (ew * b1 + 2.0 * ew2 * (b2 + b3) + b4)
        un = self.ops.project(un)
        if not (np.isfinite(un).all() and np.isfinite(wn).all()):
            raise BlowUpError("non-finite values in state")
        return un, wn


def _state_from_half(grid, uh, wh, t) -> State:
    return State(
        VectorField(grid, _to_full(uh, grid.n), True),
        VectorField(grid, _to_full(wh, grid.n), True),
        t,
    )


def rhs(state: State, config: SolverConfig) -> Rhs:
    """Full time derivative of (u, omega), linear diagonal terms included."""
    _require_spectral(state.u, state.omega)
    if not (np.isfinite(state.u.data).all() and np.isfinite(state.omega.data).all()):
        raise BlowUpError("non-finite values in state")
    integ = _Integrator(config)
    uh, wh = _to_half(state.u), _to_half(state.omega)
    du, dw, _ = integ.explicit(uh, wh)
    k2 = integ.ops.k2
    du = du - k2 * uh
    dw = dw - (k2 + 2.0) * wh
    n = state.grid.n
    return Rhs(VectorField(state.grid, _to_full(du, n), True), VectorField(state.grid, _to_full(dw, n), True))


def step(state: State, config: SolverConfig, dt: float | None = None) -> State:
    """One IFRK4 step of size ``dt`` (default ``config.dt``)."""
    _require_spectral(state.u, state.omega)
    dt = config.dt if dt is None else dt
    uh, wh = _Integrator(config).step(_to_half(state.u), _to_half(state.omega), dt)
    return _state_from_half(state.grid, uh, wh, state.t + dt)


Callback = Callable[[State, int], None]


def simulate(config: SolverConfig, initial: State, callbacks: Iterable[Callback] = (),
             cadence: int = 10) -> State:
    """Advance ``initial`` to ``config.t_end``.

    Callbacks receive ``(state, step_index)`` at step 0, every ``cadence``
    steps and at the final step. On a solver error, callbacks exposing an
    ``on_abort(error, state)`` method are notified before the error propagates.
    """
    callbacks = list(callbacks)
    cadence = max(1, int(cadence))
    grid = config.grid
    integ = _Integrator(config)
    uh, wh = _to_half(initial.u), _to_half(initial.omega)
    uh = integ.ops.project(uh)
    t0 = initial.t
    nsteps = config.num_steps
    h1_ref = max(integ.ops.grad_energy(uh), integ.ops.grad_energy(wh))
    last = _state_from_half(grid, uh, wh, t0)

    def emit(i, s):
        for cb in callbacks:
            cb(s, i)

    emit(0, last)
    for i in range(1, nsteps + 1):
        try:
            uh, wh = integ.step(uh, wh, config.dt)
            if i % cadence == 0 or i == nsteps:
                h1 = max(integ.ops.grad_energy(uh), integ.ops.grad_energy(wh))
                if h1_ref > 0 and math.sqrt(h1 / h1_ref) > config.blowup_factor:
                    raise BlowUpError(f"H1 norm grew by more than {config.blowup_factor:g} at step {i}")
        except SolverError as err:
            log.warning("simulation aborted at step %d: %s", i, err)
            for cb in callbacks:
                if hasattr(cb, "on_abort"):
                    cb.on_abort(err, last)
            raise
        if i % cadence == 0 or i == nsteps:
            last = _state_from_half(grid, uh, wh, t0 + i * config.dt)
            emit(i, last)
    return last


def pressure_field(state: State, dealias: float = 2.0 / 3.0) -> ScalarField:
    """Zero-mean pressure from -lap(pi) = div((u.grad)u), returned as a spectral field."""
    grid = state.grid
    ops = _ops(grid, dealias)
    uh = _to_half(state.u)
    nh = ops.advect(ops.velocity(uh), uh)
    k = ops.k
    div = 1j * (k[0] * nh[0] + k[1] * nh[1] + k[2] * nh[2])
    ph = div * ops.inv_k2
    return ScalarField(grid, _to_full(ph, grid.n), True)
