"""Regularity monitoring along solver trajectories.

A :class:`Monitor` is a solver callback that samples the state on a fixed
cadence and accumulates a :class:`CriterionTrace`: energy and dissipation
integrals, H1-level norms, the Morrey-Campanato norm of d3 u and the criterion
integral built from it, Serrin-type integrals of d3 u, the Gronwall quantity,
and both sides of the differential estimates for the advective terms.

Time integrals use the trapezoid rule on the sampled times. The unknown
constants of the estimates are never asserted; they are reported as observed
ratios.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import norms
from .spectral import State, VectorField, curl, divergence, inner_l2, partial, to_real

__all__ = [
    "CriterionTrace",
    "Monitor",
    "EstimateSides",
    "EnergyReport",
    "SerrinQuantity",
    "GronwallReport",
    "SerrinPairError",
    "criterion_exponent",
    "criterion_integral",
    "energy_inequality_check",
    "validate_serrin_pair",
    "serrin_quantities",
    "estimate_trace",
    "gronwall_bound",
    "CSV_COLUMNS",
]

CSV_COLUMNS = (
    "t", "E", "diss_grad", "diss_div", "diss_omega", "h1_u", "h1_w", "d3u_l2", "d3w_l2",
    "morrey_d3", "Q_r", "gronwall", "estA4_lhs", "estA4_rhs", "estA5_lhs", "estA5_rhs",
)


def criterion_exponent(r: float) -> float:
    """Time-integrability exponent 2/(1-r) paired with M_{2,3/r}."""
    if not 0 < r < 1:
        raise ValueError(f"criterion needs 0 < r < 1, got {r}")
    return 2.0 / (1.0 - r)


# ---------------------------------------------------------------------------
# Serrin-type exponent pairs

INF = math.inf
_TOL = 1e-12


class SerrinPairError(ValueError):
    pass


def _sum(alpha, beta):
    return 3.0 / alpha + 2.0 / beta


def validate_serrin_pair(alpha: float, beta: float) -> dict[str, str]:
    """Scaling relations satisfied by (alpha, beta) for d3 u in L^beta_t L^alpha_x.

    Returns a mapping from relation name to an echo of the checked identity.
    Raises :class:`SerrinPairError` when none holds.
    """
    alpha, beta = float(alpha), float(beta)
    if not (alpha >= 1 and beta >= 1):
        raise SerrinPairError(f"exponents must be >= 1, got alpha={alpha}, beta={beta}")
    s = _sum(alpha, beta)
    held = {}
    if s <= 1 + _TOL and alpha >= 2:
        held["sum_le_1"] = f"3/alpha + 2/beta = {s:.12g} <= 1, 2 <= alpha <= inf"
    if s <= 1.5 + _TOL and alpha > 3:
        held["sum_le_3_2"] = f"3/alpha + 2/beta = {s:.12g} <= 3/2, alpha > 3"
    target = 0.75 + 1.0 / alpha
    if abs(s - target) <= _TOL and alpha > 2:
        held["sum_eq_3_4_plus_inv_alpha"] = f"3/alpha + 2/beta = {s:.12g} = 3/4 + 1/alpha, alpha > 2"
    if not held:
        raise SerrinPairError(f"(alpha, beta) = ({alpha}, {beta}) satisfies none of the scaling relations")
    if abs(s - 1) <= _TOL and alpha > 3:
        held["lorentz_sum_eq_1"] = f"3/alpha + 2/beta = {s:.12g} = 1, 3 < alpha <= inf (weak-L^alpha variant)"
    return held


def _pair_key(alpha, beta) -> str:
    a = "inf" if math.isinf(alpha) else f"{alpha:g}"
    return f"{a},{beta:g}"


# ---------------------------------------------------------------------------
# estimate sides


@dataclass(frozen=True)
class EstimateSides:
    """Terms of the d3-energy balance and the bounds used on the advective terms."""

    r: float
    A1: float
    A2: float
    A3: float
    A4: float
    A5: float
    A4_by_parts: float
    young_bound: float  # 1/2 ||grad d3 u||^2, bound on A1 + A2 + A3
    morrey_d3u: float
    A4_besov_bound: float  # ||d3u||_M ||d3u||_B ||grad u||
    A4_rhs: float
    A5_besov_bound: float
    A5_rhs: float

    @property
    def A4_lhs(self) -> float:
        return abs(self.A4)

    @property
    def A5_lhs(self) -> float:
        return abs(self.A5)

    @property
    def A4_ratio(self) -> float:
        return self.A4_lhs / self.A4_rhs if self.A4_rhs > 0 else 0.0

    @property
    def A5_ratio(self) -> float:
        return self.A5_lhs / self.A5_rhs if self.A5_rhs > 0 else 0.0

    def to_record(self) -> dict:
        rec = asdict(self)
        rec.update(A4_lhs=self.A4_lhs, A5_lhs=self.A5_lhs, A4_ratio=self.A4_ratio, A5_ratio=self.A5_ratio)
        return rec


def _grad_tensor(v: VectorField) -> np.ndarray:
    """Real-space d_i v_j as an array indexed [i, j, ...]."""
    return np.stack([to_real(partial(v, i)).data for i in (1, 2, 3)])


def _l2(v) -> float:
    return norms.lp_norm(v, 2)


def _grad_l2(v: VectorField) -> float:
    return math.sqrt(sum(_l2(partial(v, i)) ** 2 for i in (1, 2, 3)))


def estimate_trace(state: State, r: float, center_stride: int = 4, morrey_d3u: float | None = None) -> EstimateSides:
    """Both sides of the bounds on A4 = -int (d3u.grad)u.d3u and A5 = -int (d3u.grad)w.d3w."""
    if not 0 < r < 1:
        raise ValueError(f"need 0 < r < 1, got {r}")
    u, w = state.u, state.omega
    grid = state.grid
    dv = grid.cell_volume
    d3u, d3w = partial(u, 3), partial(w, 3)

    a1 = inner_l2(partial(curl(w), 3), d3u)
    a2 = inner_l2(partial(curl(u), 3), d3w)
    a3 = -2.0 * inner_l2(d3w, d3w)

    d3u_r = to_real(d3u).data
    gu = _grad_tensor(u)
    gw = _grad_tensor(w)
    d3w_r = to_real(d3w).data
    # (d3u . grad) u_j = sum_i d3u_i d_i u_j
    adv_u = np.einsum("i...,ij...->j...", d3u_r, gu)
    adv_w = np.einsum("i...,ij...->j...", d3u_r, gw)
    a4 = -dv * float(np.sum(adv_u * d3u_r))
    a5 = -dv * float(np.sum(adv_w * d3w_r))
    # by parts with div u = 0: int (d3u.grad)u.d3u = -int u.((d3u.grad) d3u)
    gd3u = _grad_tensor(d3u)
    u_r = to_real(u).data
    a4_ibp = dv * float(np.sum(u_r * np.einsum("i...,ij...->j...", d3u_r, gd3u)))

    grad_d3u = _grad_l2(d3u)
    grad_d3w = _grad_l2(d3w)
    if morrey_d3u is None:
        morrey_d3u = norms.morrey_norm(d3u, 2.0, 3.0 / r, center_stride)
    l2_d3u, l2_d3w = _l2(d3u), _l2(d3w)
    gu_l2, gw_l2 = _grad_l2(u), _grad_l2(w)
    rhs4 = morrey_d3u * l2_d3u ** (1 - r) * grad_d3u**r * gu_l2
    rhs5 = morrey_d3u * l2_d3w ** (1 - r) * grad_d3w**r * gw_l2
    scale = max(abs(a4), abs(a5))
    if (rhs4 == 0 and abs(a4) > 1e-12 * max(scale, 1e-300)) or (rhs5 == 0 and abs(a5) > 1e-12 * max(scale, 1e-300)):
        raise ValueError("estimate has zero right-hand side but nonzero left-hand side")
    b4 = morrey_d3u * norms.besov_b21r_norm(d3u, r) * gu_l2 if l2_d3u > 0 else 0.0
    b5 = morrey_d3u * norms.besov_b21r_norm(d3w, r) * gw_l2 if l2_d3w > 0 else 0.0
    return EstimateSides(
        r=r, A1=a1, A2=a2, A3=a3, A4=a4, A5=a5, A4_by_parts=a4_ibp,
        young_bound=0.5 * grad_d3u**2, morrey_d3u=morrey_d3u,
        A4_besov_bound=b4, A4_rhs=rhs4, A5_besov_bound=b5, A5_rhs=rhs5,
    )


# ---------------------------------------------------------------------------
# trace


def _trapz_step(prev_total, t0, t1, f0, f1):
    return prev_total + 0.5 * (t1 - t0) * (f0 + f1)


@dataclass
class CriterionTrace:
    r_values: tuple = ()
    serrin_pairs: tuple = ()
    times: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    # integrands (sampled)
    grad_sq: list = field(default_factory=list)  # ||grad u||^2 + ||grad w||^2
    div_w_sq: list = field(default_factory=list)
    w_sq: list = field(default_factory=list)
    cross: list = field(default_factory=list)  # <curl u, w>
    grad_d3_sq: list = field(default_factory=list)  # ||grad d3u||^2 + ||grad d3w||^2
    # cumulative integrals
    diss_grad: list = field(default_factory=list)  # 2 int (||grad u||^2 + ||grad w||^2)
    diss_div: list = field(default_factory=list)  # 2 int ||div w||^2
    diss_omega: list = field(default_factory=list)  # 2 int ||w||^2
    cross_integral: list = field(default_factory=list)  # int <curl u, w>
    d3_dissipation: list = field(default_factory=list)  # int (||grad d3u||^2 + ||grad d3w||^2)
    h1_u: list = field(default_factory=list)
    h1_w: list = field(default_factory=list)
    d3u_l2: list = field(default_factory=list)
    d3w_l2: list = field(default_factory=list)
    gronwall: list = field(default_factory=list)
    morrey_d3: dict = field(default_factory=dict)  # r -> list
    criterion: dict = field(default_factory=dict)  # r -> cumulative Q_r
    estimates: dict = field(default_factory=dict)  # r -> list[EstimateSides]
    serrin_norms: dict = field(default_factory=dict)  # key -> list of (strong, weak)
    serrin_integrals: dict = field(default_factory=dict)  # key -> list of (strong, weak) cumulative
    blowup: bool = False
    abort_reason: str | None = None

    def __post_init__(self):
        for r in self.r_values:
            self.morrey_d3.setdefault(r, [])
            self.criterion.setdefault(r, [])
            self.estimates.setdefault(r, [])
        for a, b in self.serrin_pairs:
            self.serrin_norms.setdefault(_pair_key(a, b), [])
            self.serrin_integrals.setdefault(_pair_key(a, b), [])

    def __len__(self):
        return len(self.times)

    @property
    def sup_h1_u(self) -> float:
        return max(self.h1_u) if self.h1_u else 0.0

    @property
    def sup_h1_w(self) -> float:
        return max(self.h1_w) if self.h1_w else 0.0

    def row(self, i: int) -> dict:
        """One CSV row; criterion columns use the first configured r."""
        r = self.r_values[0] if self.r_values else None
        est = self.estimates[r][i] if r is not None else None
        nan = float("nan")
        return {
            "t": self.times[i], "E": self.energy[i],
            "diss_grad": self.diss_grad[i], "diss_div": self.diss_div[i], "diss_omega": self.diss_omega[i],
            "h1_u": self.h1_u[i], "h1_w": self.h1_w[i],
            "d3u_l2": self.d3u_l2[i], "d3w_l2": self.d3w_l2[i],
            "morrey_d3": self.morrey_d3[r][i] if r is not None else nan,
            "Q_r": self.criterion[r][i] if r is not None else nan,
            "gronwall": self.gronwall[i],
            "estA4_lhs": est.A4_lhs if est else nan, "estA4_rhs": est.A4_rhs if est else nan,
            "estA5_lhs": est.A5_lhs if est else nan, "estA5_rhs": est.A5_rhs if est else nan,
        }

    def record(self, i: int) -> dict:
        rec = self.row(i)
        rec.update(
            step=self.steps[i],
            cross_integral=self.cross_integral[i],
            d3_dissipation=self.d3_dissipation[i],
            morrey_d3_by_r={str(r): self.morrey_d3[r][i] for r in self.r_values},
            Q_by_r={str(r): self.criterion[r][i] for r in self.r_values},
            estimates={str(r): (self.estimates[r][i].to_record() if self.estimates[r][i] is not None else None)
                       for r in self.r_values},
            serrin={k: {"norm": v[i][0], "weak_norm": v[i][1],
                        "integral": self.serrin_integrals[k][i][0],
                        "weak_integral": self.serrin_integrals[k][i][1]}
                    for k, v in self.serrin_norms.items()},
        )
        return rec

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
            writer.writeheader()
            for i in range(len(self)):
                writer.writerow({k: repr(float(v)) for k, v in self.row(i).items()})

    def write_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for i in range(len(self)):
                fh.write(json.dumps(self.record(i), sort_keys=True) + "\n")
            if self.blowup or self.abort_reason:
                fh.write(json.dumps({"aborted": True, "blowup": self.blowup, "reason": self.abort_reason}) + "\n")


class Monitor:
    """Solver callback that fills a :class:`CriterionTrace`.

    ``r_values`` empty skips the Morrey-based quantities (cheap energy-only
    monitoring); ``estimates=False`` skips the A1..A5 evaluation.
    """

    def __init__(self, r_values=(0.5,), serrin_pairs=(), center_stride: int = 4, estimates: bool = True):
        for r in r_values:
            criterion_exponent(r)
        for a, b in serrin_pairs:
            validate_serrin_pair(a, b)
        self.center_stride = center_stride
        self.with_estimates = estimates
        self.trace = CriterionTrace(tuple(r_values), tuple((float(a), float(b)) for a, b in serrin_pairs))

    def on_abort(self, error, state) -> None:
        self.trace.blowup = True
        self.trace.abort_reason = str(error)

    def __call__(self, state: State, step: int) -> None:
        tr = self.trace
        u, w = state.u, state.omega
        L3 = state.grid.volume
        eu = float(np.sum(np.abs(u.data) ** 2)) * L3
        ew = float(np.sum(np.abs(w.data) ** 2)) * L3
        d3u, d3w = partial(u, 3), partial(w, 3)
        gu, gw = _grad_l2(u), _grad_l2(w)
        div_sq = inner_l2(divergence(w), divergence(w))
        cross = inner_l2(curl(u), w)
        l2_d3u, l2_d3w = _l2(d3u), _l2(d3w)
        g3 = _grad_l2(d3u) ** 2 + _grad_l2(d3w) ** 2
        t = float(state.t)
        if tr.times and not t > tr.times[-1]:
            raise ValueError("monitor times must increase")

        def accumulate(cum, integrand, value, factor=1.0):
            if not tr.times:
                return 0.0
            return cum[-1] + factor * 0.5 * (t - tr.times[-1]) * (integrand[-1] + value)

        tr.diss_grad.append(accumulate(tr.diss_grad, tr.grad_sq, gu**2 + gw**2, 2.0))
        tr.diss_div.append(accumulate(tr.diss_div, tr.div_w_sq, div_sq, 2.0))
        tr.diss_omega.append(accumulate(tr.diss_omega, tr.w_sq, ew, 2.0))
        tr.cross_integral.append(accumulate(tr.cross_integral, tr.cross, cross))
        tr.d3_dissipation.append(accumulate(tr.d3_dissipation, tr.grad_d3_sq, g3))

        for r in tr.r_values:
            m = norms.morrey_norm(d3u, 2.0, 3.0 / r, self.center_stride)
            f_new = m ** criterion_exponent(r)
            if tr.times:
                f_old = tr.morrey_d3[r][-1] ** criterion_exponent(r)
                q = _trapz_step(tr.criterion[r][-1], tr.times[-1], t, f_old, f_new)
            else:
                q = 0.0
            tr.morrey_d3[r].append(m)
            tr.criterion[r].append(q)
            if self.with_estimates:
                tr.estimates[r].append(estimate_trace(state, r, self.center_stride, morrey_d3u=m))
            else:
                tr.estimates[r].append(None)

        d3u_real = to_real(d3u)
        for a, b in tr.serrin_pairs:
            key = _pair_key(a, b)
            strong = norms.lp_norm(d3u_real, a)
            weak = strong if math.isinf(a) else norms.weak_lp_norm(d3u_real, a)
            vals = (strong**b, weak**b)
            if tr.times:
                prev_norms = tr.serrin_norms[key][-1]
                prev = tr.serrin_integrals[key][-1]
                integ = tuple(_trapz_step(prev[j], tr.times[-1], t, prev_norms[j] ** b, vals[j]) for j in range(2))
            else:
                integ = (0.0, 0.0)
            tr.serrin_norms[key].append((strong, weak))
            tr.serrin_integrals[key].append(integ)

        tr.times.append(t)
        tr.steps.append(int(step))
        tr.energy.append(eu + ew)
        tr.grad_sq.append(gu**2 + gw**2)
        tr.div_w_sq.append(div_sq)
        tr.w_sq.append(ew)
        tr.cross.append(cross)
        tr.grad_d3_sq.append(g3)
        tr.h1_u.append(gu)
        tr.h1_w.append(gw)
        tr.d3u_l2.append(l2_d3u)
        tr.d3w_l2.append(l2_d3w)
        tr.gronwall.append(1.0 + l2_d3u**2 + l2_d3w**2)


# ---------------------------------------------------------------------------
# trace-level checks


@dataclass(frozen=True)
class EnergyReport:
    """Signed defect of the stated energy inequality and of the exact energy balance.

    ``defect[i] = E(t_i) + diss_grad + diss_div + diss_omega - E(0)``; the
    inequality holds when ``max_defect <= tol * E(0)``. ``balance_residual``
    adds the terms ``2 int ||w||^2 - 4 int <curl u, w>`` that close the exact
    balance of the system as integrated.
    """

    E0: float
    defect: tuple
    max_defect: float
    relative_defect: float
    holds: bool
    balance_residual: tuple
    max_balance_residual: float
    tol: float


def _check_times(trace):
    if len(trace) < 2:
        raise ValueError("trace needs at least two samples")
    t = np.asarray(trace.times)
    if np.any(np.diff(t) <= 0):
        raise ValueError("trace times must be strictly increasing")


def energy_inequality_check(trace: CriterionTrace, tol: float = 1e-4) -> EnergyReport:
    _check_times(trace)
    E = np.asarray(trace.energy)
    E0 = float(E[0])
    defect = E + np.asarray(trace.diss_grad) + np.asarray(trace.diss_div) + np.asarray(trace.diss_omega) - E0
    balance = defect + np.asarray(trace.diss_omega) - 4.0 * np.asarray(trace.cross_integral)
    max_defect = float(defect.max())
    rel = max_defect / E0 if E0 > 0 else max_defect
    holds = max_defect <= tol * E0 if E0 > 0 else max_defect <= 0.0
    max_bal = float(np.abs(balance).max())
    return EnergyReport(E0, tuple(defect.tolist()), max_defect, rel, bool(holds),
                        tuple(balance.tolist()), max_bal, tol)


def criterion_integral(trace: CriterionTrace, r: float) -> float:
    """int_0^T ||d3 u||_{M_{2,3/r}}^{2/(1-r)} dt by trapezoid over the samples."""
    criterion_exponent(r)
    if r not in trace.morrey_d3:
        raise KeyError(f"trace has no Morrey samples for r={r}; configure the monitor with it")
    _check_times(trace)
    vals = np.asarray(trace.morrey_d3[r]) ** criterion_exponent(r)
    t = np.asarray(trace.times)
    return float(np.sum(0.5 * np.diff(t) * (vals[1:] + vals[:-1])))


@dataclass(frozen=True)
class SerrinQuantity:
    alpha: float
    beta: float
    relations: dict
    integral: float  # int ||d3 u||_{L^alpha}^beta dt
    weak_integral: float  # int ||d3 u||_{L^{alpha,inf}}^beta dt


def serrin_quantities(trace: CriterionTrace, pairs) -> list[SerrinQuantity]:
    out = []
    for a, b in pairs:
        relations = validate_serrin_pair(a, b)
        key = _pair_key(float(a), float(b))
        if key not in trace.serrin_integrals:
            raise KeyError(f"pair {key} was not monitored")
        s, w = trace.serrin_integrals[key][-1] if len(trace) else (0.0, 0.0)
        out.append(SerrinQuantity(float(a), float(b), relations, s, w))
    return out


@dataclass(frozen=True)
class GronwallReport:
    bound: float
    actual_max: float
    constant: float
    criterion_integral: float

    @property
    def holds(self) -> bool:
        return self.actual_max <= self.bound


def gronwall_bound(trace: CriterionTrace, r: float, constant: float = 1.0) -> GronwallReport:
    """(1 + ||d3u0||^2 + ||d3w0||^2) exp(C [Q_r(T) + ||u0||^2 + ||w0||^2]) vs the realised maximum."""
    if not len(trace):
        raise ValueError("empty trace")
    q = criterion_integral(trace, r) if len(trace) > 1 else 0.0
    g0 = trace.gronwall[0]
    try:
        bound = g0 * math.exp(constant * (q + trace.energy[0]))
    except OverflowError:
        bound = math.inf
    return GronwallReport(bound, max(trace.gronwall), constant, q)
