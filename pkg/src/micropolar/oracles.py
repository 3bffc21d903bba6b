"""Brute-force reference computations used to validate the fast paths.

Nothing here imports the spectral, norm or solver modules: every oracle works
directly on numpy arrays with its own index arithmetic. All are meant for
small grids only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "OracleSizeError",
    "LinearModeSystem",
    "naive_dft",
    "direct_convolution",
    "direct_advection",
    "direct_ball_integral",
    "direct_morrey",
    "linear_mode_system",
    "matrix_exponential",
    "dense_level_sweep",
]

MAX_N = 16
MAX_LEVELS = 100_000


class OracleSizeError(ValueError):
    """Input too large for an O(n^6) reference computation."""


def _signed(n):
    # lattice {-n/2+1, ..., n/2} in FFT storage order
    return np.array([i if i <= n // 2 else i - n for i in range(n)], dtype=np.int64)


def _check_n(n):
    if n > MAX_N:
        raise OracleSizeError(f"oracle limited to n <= {MAX_N}, got {n}")


def naive_dft(samples: np.ndarray) -> np.ndarray:
    """Coefficients n^-3 sum_x f(x) exp(-2 pi i m.j / n), one mode at a time."""
    samples = np.asarray(samples, dtype=np.float64)
    n = samples.shape[0]
    _check_n(n)
    j = np.arange(n)
    J1, J2, J3 = np.meshgrid(j, j, j, indexing="ij")
    flat = samples.ravel()
    out = np.empty((n, n, n), dtype=np.complex128)
    for a in range(n):
        for b in range(n):
            for c in range(n):
                phase = (a * J1 + b * J2 + c * J3).ravel() * (-2.0 * np.pi / n)
                out[a, b, c] = np.sum(flat * np.exp(1j * phase)) / n**3
    return out


def direct_convolution(fhat: np.ndarray, ghat: np.ndarray) -> np.ndarray:
    """Exact lattice convolution sum_{m1+m2=m} f(m1) g(m2), restricted to the grid lattice.

    Products landing outside {-n/2+1..n/2}^3 are discarded rather than wrapped.
    """
    n = fhat.shape[0]
    _check_n(n)
    s = _signed(n)
    out = np.zeros((n, n, n), dtype=np.complex128)
    nz_f = np.argwhere(fhat != 0)
    nz_g = np.argwhere(ghat != 0)
    gvals = ghat[tuple(nz_g.T)]
    mg = s[nz_g]
    lo, hi = -n // 2 + 1, n // 2
    for a in nz_f:
        m = s[a][None, :] + mg
        ok = np.all((m >= lo) & (m <= hi), axis=1)
        idx = m[ok] % n
        np.add.at(out, (idx[:, 0], idx[:, 1], idx[:, 2]), fhat[tuple(a)] * gvals[ok])
    return out


def direct_advection(vhat, what, box_length=2 * np.pi, dealias=2.0 / 3.0):
    """(v . grad) w by direct convolution with the 2/3-rule mask on inputs and output.

    ``vhat`` and ``what`` have shape (3, n, n, n) with 1/n^3 forward normalisation.
    """
    n = vhat.shape[-1]
    s = _signed(n)
    keep1 = np.abs(s) < dealias * (n // 2)
    mask = keep1[:, None, None] & keep1[None, :, None] & keep1[None, None, :]
    kscale = 2 * np.pi / box_length
    k = [s[:, None, None] * kscale, s[None, :, None] * kscale, s[None, None, :] * kscale]
    v = [np.where(mask, vhat[i], 0) for i in range(3)]
    w = [np.where(mask, what[i], 0) for i in range(3)]
    out = np.zeros((3, n, n, n), dtype=np.complex128)
    for j in range(3):
        for i in range(3):
            dw = 1j * k[i] * w[j]
            out[j] += direct_convolution(v[i], dw)
        out[j] = np.where(mask, out[j], 0)
    return out


def direct_ball_integral(f: np.ndarray, box_length: float, center, radius: float, p: float) -> float:
    """(sum over samples within wrap-around distance <= radius of |f|^p h^3)^(1/p).

    ``f`` is (n,n,n) or (3,n,n,n); ``center`` is a point in physical coordinates.
    """
    f = np.asarray(f, dtype=np.float64)
    if f.ndim == 4:
        mod = np.sqrt((f**2).sum(axis=0))
    else:
        mod = np.abs(f)
    n = mod.shape[0]
    h = box_length / n
    total = 0.0
    tol = radius * (1 + 1e-12)
    for i in range(n):
        d1 = abs(i * h - center[0]) % box_length
        d1 = min(d1, box_length - d1)
        for j in range(n):
            d2 = abs(j * h - center[1]) % box_length
            d2 = min(d2, box_length - d2)
            for k in range(n):
                d3 = abs(k * h - center[2]) % box_length
                d3 = min(d3, box_length - d3)
                if math.sqrt(d1 * d1 + d2 * d2 + d3 * d3) <= tol:
                    total += mod[i, j, k] ** p
    return (total * h**3) ** (1.0 / p)


def direct_morrey(f, box_length, p, q, centers, radii) -> float:
    """Max of R^(3/q-3/p) * direct_ball_integral over the given centres and radii."""
    best = 0.0
    for c in centers:
        for r in radii:
            best = max(best, r ** (3.0 / q - 3.0 / p) * direct_ball_integral(f, box_length, c, r, p))
    return best


@dataclass(frozen=True)
class LinearModeSystem:
    """Linearised dynamics of one Fourier mode, acting on stacked (u_hat, omega_hat)."""

    k: np.ndarray
    matrix: np.ndarray


def linear_mode_system(k) -> LinearModeSystem:
    """6x6 generator: -|k|^2 P on u, curl couplings ik x, and -(|k|^2+2) - k k^T on omega."""
    k = np.asarray(k, dtype=np.float64)
    k2 = float(k @ k)
    cross = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]], dtype=np.complex128)
    ikx = 1j * cross
    if k2 > 0:
        proj = np.eye(3) - np.outer(k, k) / k2
    else:
        proj = np.eye(3)
    a = np.zeros((6, 6), dtype=np.complex128)
    a[:3, :3] = -k2 * proj
    a[:3, 3:] = proj @ ikx
    a[3:, :3] = ikx
    a[3:, 3:] = -(k2 + 2.0) * np.eye(3) - np.outer(k, k)
    return LinearModeSystem(k, a)


_PADE_ORDER = 8


def _pade_coefficients(q):
    return [
        math.factorial(2 * q - j) * math.factorial(q)
        / (math.factorial(2 * q) * math.factorial(j) * math.factorial(q - j))
        for j in range(q + 1)
    ]


def matrix_exponential(system, t: float) -> np.ndarray:
    """exp(t A) by scaling and squaring with a fixed diagonal Pade approximant."""
    a = system.matrix if isinstance(system, LinearModeSystem) else np.asarray(system)
    x = np.asarray(a, dtype=np.complex128) * t
    norm = np.abs(x).sum(axis=0).max() if x.size else 0.0
    s = max(0, int(math.ceil(math.log2(norm / 0.5))) if norm > 0.5 else 0)
    x = x / 2**s
    c = _pade_coefficients(_PADE_ORDER)
    eye = np.eye(x.shape[0], dtype=np.complex128)
    num = c[0] * eye
    den = c[0] * eye
    power = eye
    for j in range(1, _PADE_ORDER + 1):
        power = power @ x
        num = num + c[j] * power
        den = den + (-1) ** j * c[j] * power
    e = np.linalg.solve(den, num)
    for _ in range(s):
        e = e @ e
    return e


def dense_level_sweep(f: np.ndarray, p: float, levels: int, cell_volume: float) -> float:
    """max over uniform levels R_j = j * max|f| / levels of R_j |{|f| > R_j}|^(1/p)."""
    if levels > MAX_LEVELS:
        raise OracleSizeError(f"at most {MAX_LEVELS} levels, got {levels}")
    a = np.abs(np.asarray(f, dtype=np.float64)).ravel()
    top = a.max()
    best = 0.0
    for j in range(1, levels + 1):
        r = top * j / levels
        count = int(np.count_nonzero(a > r))
        best = max(best, r * (count * cell_volume) ** (1.0 / p))
    return best
