"""Norms of discretized fields and observed-constant inequality checks.

All norms are evaluated on the torus proxy with cell measure (L/n)^3. The
homogeneous norms (Sobolev, Besov) drop the k=0 mode. Littlewood-Paley
blocks are sharp dyadic annuli 2^j <= |k| < 2^(j+1) in the scaled lattice.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from . import kernels
from .spectral import (
    Grid,
    ScalarField,
    fft_workers,
    partial,
    to_real,
    to_spectral,
)

__all__ = [
    "NormReport",
    "InequalityCheck",
    "ExponentError",
    "DegenerateInputError",
    "MorreyProfile",
    "lp_norm",
    "weak_lp_norm",
    "sobolev_hdot_norm",
    "besov_b21r_norm",
    "littlewood_paley_blocks",
    "morrey_norm",
    "morrey_profile",
    "morrey_radii",
    "xr_lower_bound",
    "norm_report",
    "product_l2_norm",
    "check_lemma23",
    "check_bilinear",
    "check_anisotropic_gn",
    "check_lemma25",
    "check_embedding_chain",
]

NORM_KINDS = ("Lp", "WeakLp", "SobolevHdot", "BesovB21r", "MorreyM", "XrLowerBound")


class ExponentError(ValueError):
    """Exponents outside the admissible range of a norm or inequality."""


class DegenerateInputError(ValueError):
    """Input for which an inequality check is meaningless (zero rhs, nonzero mean)."""


@dataclass(frozen=True)
class NormReport:
    kind: str
    params: dict
    value: float
    grid: dict
    flags: tuple = ()

    def to_record(self) -> dict:
        rec = {"kind": self.kind, "params": self.params, "value": self.value, "grid": self.grid}
        if self.flags:
            rec["flags"] = list(self.flags)
        return rec

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)


@dataclass(frozen=True)
class InequalityCheck:
    """lhs <= C * rhs_without_constant, with C observed as ``ratio``."""

    name: str
    lhs: float
    rhs_without_constant: float
    ratio: float
    params: dict = field(default_factory=dict)
    seed: int | None = None

    def to_record(self) -> dict:
        return {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs_without_constant,
            "ratio": self.ratio,
            "seed": self.seed,
            "params": self.params,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)


def _check(name, lhs, rhs, params, seed=None) -> InequalityCheck:
    if lhs == 0 and rhs == 0:
        # both sides vanish (e.g. a zero factor): holds trivially
        return InequalityCheck(name, 0.0, 0.0, 0.0, params, seed)
    if not rhs > 0:
        raise DegenerateInputError(f"{name}: right-hand side is zero")
    return InequalityCheck(name, float(lhs), float(rhs), float(lhs) / float(rhs), params, seed)


def _real(f):
    return to_real(f) if f.spectral else f


def _spec(f):
    return f if f.spectral else to_spectral(f)


def _modulus(f) -> np.ndarray:
    """Pointwise |f| (Euclidean length for vector fields)."""
    f = _real(f)
    if f.is_vector:
        return np.sqrt(np.sum(f.data**2, axis=0))
    return np.abs(f.data)


def _spectral_energy(f) -> np.ndarray:
    """|f_hat(k)|^2 summed over components."""
    d = _spec(f).data
    e = d.real**2 + d.imag**2
    return e.sum(axis=0) if f.is_vector else e


# ---------------------------------------------------------------------------
# Lebesgue and Lorentz


def lp_norm(f, p: float) -> float:
    """((L/n)^3 sum |f|^p)^(1/p), or max |f| for p = inf."""
    if not p >= 1:
        raise ExponentError(f"lp_norm needs p >= 1, got {p}")
    a = _modulus(f)
    if math.isinf(p):
        return float(a.max())
    return float((f.grid.cell_volume * np.sum(a**p)) ** (1.0 / p))


def weak_lp_norm(f, p: float) -> float:
    """Weak-L^p quasinorm sup_R R |{|f| > R}|^(1/p).

    The distribution function is piecewise constant between sample values, so
    the supremum is the limit from below at a sample value v, where the level
    set is {|f| >= v}.
    """
    if not p > 1:
        raise ExponentError(f"weak_lp_norm needs p > 1, got {p}")
    a = np.sort(_modulus(f).ravel())[::-1]
    count = np.arange(1, a.size + 1, dtype=np.float64)
    cand = a * (count * f.grid.cell_volume) ** (1.0 / p)
    return float(cand.max()) if a.size else 0.0


# ---------------------------------------------------------------------------
# Sobolev and Besov


def sobolev_hdot_norm(f, r: float) -> float:
    """(L^3 sum_{k != 0} |k|^(2r) |f_hat(k)|^2)^(1/2)."""
    if not 0 <= r < 1.5:
        raise ExponentError(f"sobolev_hdot_norm needs 0 <= r < 3/2, got {r}")
    grid = f.grid
    e = _spectral_energy(f)
    k2 = grid.k_squared
    nz = k2 > 0
    return float(math.sqrt(grid.volume * np.sum(k2[nz] ** r * e[nz])))


@lru_cache(maxsize=32)
def _block_index(grid: Grid) -> np.ndarray:
    kmag = grid.k_magnitude
    idx = np.full(grid.shape, np.iinfo(np.int64).min, dtype=np.int64)
    nz = kmag > 0
    # guard exact powers of two against log2 round-off
    idx[nz] = np.floor(np.log2(kmag[nz]) + 1e-12).astype(np.int64)
    return idx


def littlewood_paley_blocks(f) -> dict[int, float]:
    """L2 norm of each occupied sharp dyadic block, keyed by j."""
    grid = f.grid
    e = _spectral_energy(f)
    idx = _block_index(grid)
    nz = grid.k_squared > 0
    js = idx[nz]
    sums = {}
    for j in np.unique(js):
        sums[int(j)] = float(math.sqrt(grid.volume * e[nz][js == j].sum()))
    return sums


def besov_b21r_norm(f, r: float) -> float:
    """sum_j 2^(jr) ||Delta_j f||_2 over sharp dyadic annuli."""
    if not 0 < r < 1:
        raise ExponentError(f"besov_b21r_norm needs 0 < r < 1, got {r}")
    return float(sum(2.0 ** (j * r) * v for j, v in sorted(littlewood_paley_blocks(f).items())))


# ---------------------------------------------------------------------------
# Morrey-Campanato


def morrey_radii(grid: Grid) -> list[float]:
    """Dyadic radii L/2, L/4, ... down to two grid spacings."""
    radii = []
    j = 1
    while grid.box_length / 2**j >= 2 * grid.spacing * (1 - 1e-12):
        radii.append(grid.box_length / 2**j)
        j += 1
    return radii


@lru_cache(maxsize=16)
def _ball_geometry(n: int, radii_cells: tuple[float, ...]):
    half = n // 2
    o = np.arange(-half + 1, half + 1, dtype=np.int64)
    off = np.stack(np.meshgrid(o, o, o, indexing="ij"), axis=-1).reshape(-1, 3)
    d2 = np.sum(off**2, axis=1)
    rmax = max(radii_cells)
    keep = d2 <= rmax * rmax
    off, d2 = off[keep], d2[keep]
    order = np.lexsort((off[:, 2], off[:, 1], off[:, 0], d2))
    off, d2 = np.ascontiguousarray(off[order]), d2[order]
    breaks = np.array([np.searchsorted(d2, r * r, side="right") for r in radii_cells], dtype=np.int64)
    return off, breaks


@lru_cache(maxsize=16)
def _centers(n: int, stride: int) -> np.ndarray:
    c = np.arange(0, n, stride, dtype=np.int64)
    return np.ascontiguousarray(np.stack(np.meshgrid(c, c, c, indexing="ij"), axis=-1).reshape(-1, 3))


@dataclass(frozen=True)
class MorreyProfile:
    """Sampled ball data behind a Morrey-Campanato norm evaluation."""

    p: float
    q: float
    radii: np.ndarray  # (nr,)
    ball_counts: np.ndarray  # grid points per ball, (nr,)
    centers: np.ndarray  # (nc, 3) grid indices
    ball_integrals: np.ndarray  # integral of |f|^p over each ball, (nc, nr)

    @property
    def values(self) -> np.ndarray:
        weight = self.radii ** (3.0 / self.q - 3.0 / self.p)
        return weight[None, :] * self.ball_integrals ** (1.0 / self.p)

    @property
    def norm(self) -> float:
        return float(self.values.max())


def _morrey_exponents(p, q):
    if not p > 1:
        raise ExponentError(f"Morrey norm needs p > 1, got {p}")
    if not p <= q:
        raise ExponentError(f"Morrey norm needs p <= q, got p={p}, q={q}")


def morrey_profile(f, p: float, q: float, center_stride: int = 4) -> MorreyProfile:
    _morrey_exponents(p, q)
    grid = f.grid
    radii = morrey_radii(grid)
    cells = tuple(r / grid.spacing for r in radii)
    offsets, breaks = _ball_geometry(grid.n, cells)
    centers = _centers(grid.n, max(1, min(int(center_stride), grid.n)))
    weights = np.ascontiguousarray(_modulus(f) ** p)
    sums = kernels.ball_sums(weights, centers, offsets, breaks) * grid.cell_volume
    return MorreyProfile(p, q, np.array(radii), breaks.copy(), centers, sums)


def morrey_norm(f, p: float, q: float, center_stride: int = 4) -> float:
    """max over sampled centers and dyadic radii of R^(3/q-3/p) ||f||_{L^p(B(x,R))}.

    Balls are closed and use the wrap-around distance; ball integrals count
    samples at cell measure.
    """
    return morrey_profile(f, p, q, center_stride).norm


# ---------------------------------------------------------------------------
# multiplier space lower bound


def _torus_dist2(grid: Grid) -> np.ndarray:
    x = np.minimum(np.arange(grid.n), grid.n - np.arange(grid.n)) * grid.spacing
    return x[:, None, None] ** 2 + x[None, :, None] ** 2 + x[None, None, :] ** 2


def xr_lower_bound(f: ScalarField, r: float, trials: int = 8) -> float:
    """Lower bound on sup_{||g||_{H^r} <= 1} ||f g||_2 over a fixed trial family.

    The family holds periodized Gaussians of dyadic widths centred at ``trials``
    sampled grid points, plus axis-aligned cosine and sine waves.
    """
    if not 0 <= r < 1.5:
        raise ExponentError(f"xr_lower_bound needs 0 <= r < 3/2, got {r}")
    if trials < 1:
        raise ValueError("xr_lower_bound needs a non-empty trial family")
    grid = f.grid
    fr = _real(f).data
    dv = grid.cell_volume
    best = 0.0

    m = max(1, math.ceil(trials ** (1.0 / 3.0)))
    stride = max(1, grid.n // m)
    centers = _centers(grid.n, stride)[:trials]
    d2 = _torus_dist2(grid)
    sigma = grid.box_length / 4
    while sigma >= 2 * grid.spacing * (1 - 1e-12):
        g0 = np.exp(-d2 / (2 * sigma**2))
        gnorm = sobolev_hdot_norm(ScalarField(grid, g0), r)
        if gnorm > 0:
            for c in centers:
                g = np.roll(g0, shift=tuple(int(ci) for ci in c), axis=(0, 1, 2))
                best = max(best, math.sqrt(dv * np.sum((fr * g) ** 2)) / gnorm)
        sigma /= 2

    x = grid.coordinates()
    kscale = 2 * np.pi / grid.box_length
    mode = 1
    while mode < grid.n / 3:
        for axis in range(3):
            for wave in (np.cos, np.sin):
                g = np.broadcast_to(wave(mode * kscale * x[axis]), grid.shape)
                gnorm = (mode * kscale) ** r * math.sqrt(dv * np.sum(g**2))
                best = max(best, math.sqrt(dv * np.sum((fr * g) ** 2)) / gnorm)
        mode *= 2
    return float(best)


# ---------------------------------------------------------------------------
# reports


def norm_report(f, kind: str, **params) -> NormReport:
    flags = []
    if kind == "Lp":
        value = lp_norm(f, params["p"])
    elif kind == "WeakLp":
        value = weak_lp_norm(f, params["p"])
    elif kind == "SobolevHdot":
        value = sobolev_hdot_norm(f, params["r"])
    elif kind == "BesovB21r":
        value = besov_b21r_norm(f, params["r"])
        flags.append("sharp-annulus blocks")
    elif kind == "MorreyM":
        value = morrey_norm(f, params["p"], params["q"], params.get("center_stride", 4))
        if params["p"] < 2:
            flags.append("p<2")
    elif kind == "XrLowerBound":
        value = xr_lower_bound(f, params["r"], params.get("trials", 8))
        flags.append("lower bound")
    else:
        raise ValueError(f"unknown norm kind {kind!r}; expected one of {NORM_KINDS}")
    return NormReport(kind, dict(params), value, f.grid.describe(), tuple(flags))


# ---------------------------------------------------------------------------
# inequality checks


def product_l2_norm(f, g) -> float:
    """||f g||_2 with the product formed on a grid padded by a factor two."""
    grid = f.grid
    m = 2 * grid.n
    fh, gh = _spec(f).data, _spec(g).data
    src = grid.mode_index % m

    def pad(a):
        out = np.zeros(a.shape[:-3] + (m, m, m), dtype=np.complex128)
        out[..., src[:, None, None], src[None, :, None], src[None, None, :]] = a
        return sfft.ifftn(out, axes=(-3, -2, -1), norm="forward", workers=fft_workers()).real

    fp, gp = pad(fh), pad(gh)
    prod = fp * gp
    if prod.ndim == 4:
        prod = np.sqrt(np.sum(prod**2, axis=0))
    return float(math.sqrt((grid.box_length / m) ** 3 * np.sum(prod**2)))


def _require_nonconstant(f, name):
    a = _real(f).data
    if np.ptp(a) == 0:
        raise DegenerateInputError(f"{name}: constant input")


def _require_zero_mean(f, name):
    a = _real(f).data
    scale = np.abs(a).max()
    if scale == 0 or abs(a.mean()) > 1e-10 * scale:
        raise DegenerateInputError(f"{name}: input must have zero mean and be nonzero")


def check_lemma23(f, r: float, seed=None) -> InequalityCheck:
    """||f||_{B^r_{2,1}} against ||f||_2^(1-r) ||grad f||_2^r."""
    _require_nonconstant(f, "lemma23")
    lhs = besov_b21r_norm(f, r)
    fs = _spec(f)
    grad = math.sqrt(sum(lp_norm(partial(fs, i), 2) ** 2 for i in (1, 2, 3)))
    rhs = lp_norm(f, 2) ** (1 - r) * grad**r
    return _check("lemma23", lhs, rhs, {"r": r, "blocks": "sharp-annulus"}, seed)


def check_bilinear(f, g, r: float, center_stride: int = 4, seed=None) -> InequalityCheck:
    """||f g||_2 against ||f||_{M_{2,3/r}} ||g||_{B^r_{2,1}}."""
    lhs = product_l2_norm(f, g)
    rhs = morrey_norm(f, 2.0, 3.0 / r, center_stride) * besov_b21r_norm(g, r)
    return _check("bilinear", lhs, rhs, {"r": r}, seed)


def check_anisotropic_gn(f, alpha: float, lam: float, gamma: float, seed=None) -> InequalityCheck:
    """||f||_gamma against ||d1 f||_alpha^(1/3) ||d2 f||_alpha^(1/3) ||d3 f||_lam^(1/3)."""
    if not (1 <= alpha < math.inf and 1 <= lam < math.inf and 1 <= gamma < math.inf):
        raise ExponentError("need 1 <= alpha, lambda, gamma < inf")
    s = 1.0 / lam + 2.0 / alpha
    if not s > 1:
        raise ExponentError(f"need 1/lambda + 2/alpha > 1, got {s}")
    if not math.isclose(1.0 + 3.0 / gamma, s, rel_tol=1e-12):
        raise ExponentError(f"need 1 + 3/gamma = 1/lambda + 2/alpha, got {1 + 3 / gamma} vs {s}")
    _require_zero_mean(f, "anisotropic_gn")
    fs = _spec(f)
    lhs = lp_norm(f, gamma)
    rhs = (lp_norm(partial(fs, 1), alpha) * lp_norm(partial(fs, 2), alpha)
           * lp_norm(partial(fs, 3), lam)) ** (1.0 / 3.0)
    return _check("anisotropic_gn", lhs, rhs, {"alpha": alpha, "lambda": lam, "gamma": gamma}, seed)


def check_lemma25(f, beta: float, seed=None) -> InequalityCheck:
    """||f||_beta against ||f||_2^((6-b)/2b) prod_i ||d_i f||_2^((b-2)/2b)."""
    if not 2 <= beta <= 6:
        raise ExponentError(f"need 2 <= beta <= 6, got {beta}")
    _require_zero_mean(f, "lemma25")
    fs = _spec(f)
    l2 = lp_norm(f, 2)
    lhs = l2 if beta == 2 else lp_norm(f, beta)
    a = (6.0 - beta) / (2.0 * beta)
    b = (beta - 2.0) / (2.0 * beta)
    rhs = l2**a
    if b:
        for i in (1, 2, 3):
            rhs *= lp_norm(partial(fs, i), 2) ** b
    return _check("lemma25", lhs, rhs, {"beta": beta}, seed)


def check_embedding_chain(f, r: float, p: float, center_stride: int = 4, seed=None) -> list[InequalityCheck]:
    """Ratios along L^{3/r} -> L^{3/r,inf} -> M_{p,3/r}; empty for the zero field."""
    if not 0 < r < 1.5:
        raise ExponentError(f"need 0 < r < 3/2, got {r}")
    q = 3.0 / r
    if not 2 <= p <= q:
        raise ExponentError(f"need 2 <= p <= 3/r, got p={p}, 3/r={q}")
    strong = lp_norm(f, q)
    if strong == 0:
        return []
    weak = weak_lp_norm(f, q)
    mor = morrey_norm(f, p, q, center_stride)
    params = {"r": r, "p": p}
    return [
        _check("lorentz_over_lebesgue", weak, strong, params, seed),
        _check("morrey_over_lorentz", mor, weak, params, seed),
    ]
