"""Initial data, run configuration, run orchestration and ensemble benches."""

from __future__ import annotations

import hashlib
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, kernels, norms, oracles
from .monitor import Monitor, criterion_exponent, criterion_integral, energy_inequality_check, validate_serrin_pair
from .snapshot import load_state, save_state
from .solver import SolverConfig, SolverError, nonlinear_advection, simulate, step
from .spectral import Grid, ScalarField, State, VectorField, fft_workers, leray_project, to_real, to_spectral

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "GENERATOR_KINDS",
    "GeneratorSpec",
    "RunConfig",
    "ConfigError",
    "generate_initial",
    "random_scalar_field",
    "load_config",
    "run",
    "git_blob_sha1",
    "BenchReport",
    "bench_inequalities",
    "OracleResult",
    "oracle_check",
]

GENERATOR_KINDS = ("TaylorGreen", "RandomDivFree", "SingleMode", "SnapshotFile")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# initial data


@dataclass(frozen=True)
class GeneratorSpec:
    """Initial-data recipe.

    ``amplitude`` scales u: the peak velocity coefficient for TaylorGreen and
    SingleMode, the root-mean-square velocity for RandomDivFree.
    ``omega_amplitude`` plays the same role for the micro-rotation (zero by
    default). ``mode`` holds integer mode numbers for SingleMode. ``kmax``
    limits RandomDivFree to |m_i| <= kmax (default: inside the dealiasing
    mask).
    """

    kind: str = "TaylorGreen"
    amplitude: float = 1.0
    slope: float = 2.0
    mode: tuple = (0, 0, 1)
    omega_amplitude: float = 0.0
    kmax: int | None = None
    path: str | None = None

    def __post_init__(self):
        if self.kind not in GENERATOR_KINDS:
            raise ConfigError(f"unknown generator {self.kind!r}; expected one of {GENERATOR_KINDS}")
        if not math.isfinite(self.amplitude) or not math.isfinite(self.omega_amplitude):
            raise ConfigError("amplitudes must be finite")
        if self.kind == "SingleMode":
            mode = tuple(int(m) for m in self.mode)
            if len(mode) != 3 or mode == (0, 0, 0):
                raise ConfigError(f"SingleMode needs a nonzero integer 3-vector, got {self.mode}")
            object.__setattr__(self, "mode", mode)
        if self.kind == "RandomDivFree" and self.kmax is not None and self.kmax < 1:
            raise ConfigError("kmax must be >= 1")
        if self.kind == "SnapshotFile" and not self.path:
            raise ConfigError("SnapshotFile needs a path")

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorSpec":
        d = dict(d)
        if "mode" in d:
            d["mode"] = tuple(d["mode"])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown initial-data keys {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items() if v is not None}


def _zero(grid):
    return VectorField(grid, np.zeros((3, *grid.shape)), True)


def _taylor_green(grid, a):
    s = 2 * np.pi / grid.box_length
    x, y, z = (c * s for c in grid.coordinates())
    u = a * np.stack(np.broadcast_arrays(
        np.sin(x) * np.cos(y) * np.cos(z), -np.cos(x) * np.sin(y) * np.cos(z), 0.0 * x * y * z))
    return to_spectral(VectorField(grid, u))


def _perpendicular(k):
    k = np.asarray(k, dtype=np.float64)
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(k)))] = 1.0
    e = np.cross(k, axis)
    return e / np.linalg.norm(e)


def _single_mode(grid, mode, a, b):
    m = np.asarray(mode, dtype=np.float64)
    if np.any(np.abs(m) >= grid.n // 2):
        raise ConfigError(f"mode {mode} is not resolved on n={grid.n}")
    e1 = _perpendicular(m)
    e2 = np.cross(m / np.linalg.norm(m), e1)
    x = grid.coordinates()
    s = 2 * np.pi / grid.box_length
    phase = np.cos(s * (m[0] * x[0] + m[1] * x[1] + m[2] * x[2]))
    u = a * e1[:, None, None, None] * phase
    w = b * e2[:, None, None, None] * phase
    return to_spectral(VectorField(grid, u)), to_spectral(VectorField(grid, w))


def _rng(seed, *stream):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed) & (2**64 - 1), *stream])))


def _band_mask(grid, kmax):
    m = np.abs(grid.mode_index)
    keep = (m <= kmax) if kmax is not None else (m < (2.0 / 3.0) * (grid.n // 2))
    keep = keep & (m < grid.n // 2)
    return keep[:, None, None] & keep[None, :, None] & keep[None, None, :]


def _random_coefficients(grid, rng, slope, kmax):
    shape = grid.shape
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    k = grid.k_magnitude
    env = np.where(k > 0, np.power(np.where(k > 0, k, 1.0), -float(slope)), 0.0)
    c = c * env * _band_mask(grid, kmax)
    # keep only the real part of the synthesized field: conjugate-symmetrizes c
    real = ScalarField(grid, c, True)
    return to_spectral(to_real(real))


def _random_vector(grid, seed, slope, kmax, stream, rms, project):
    comps = [_random_coefficients(grid, _rng(seed, stream, i), slope, kmax).data for i in range(3)]
    v = VectorField(grid, np.stack(comps), True)
    if project:
        v = leray_project(v)
    energy = float(np.sum(np.abs(v.data) ** 2))  # mean of |v|^2
    if energy == 0 or rms == 0:
        return _zero(grid)
    return v * (rms / math.sqrt(energy))


def generate_initial(spec: GeneratorSpec, grid: Grid, seed: int = 0) -> State:
    """Initial state at t=0 for ``spec``; deterministic in ``seed``."""
    if spec.kind == "TaylorGreen":
        u = _taylor_green(grid, spec.amplitude)
        w = _zero(grid)
        if spec.omega_amplitude:
            w = _random_vector(grid, seed, 2.0, None, 1, spec.omega_amplitude, False)
        return State(u, w, 0.0)
    if spec.kind == "SingleMode":
        u, w = _single_mode(grid, spec.mode, spec.amplitude, spec.omega_amplitude)
        return State(u, w, 0.0)
    if spec.kind == "RandomDivFree":
        u = _random_vector(grid, seed, spec.slope, spec.kmax, 0, spec.amplitude, True)
        w = _random_vector(grid, seed, spec.slope, spec.kmax, 1, spec.omega_amplitude, False)
        return State(u, w, 0.0)
    state = load_state(spec.path)
    if state.grid != grid:
        raise ConfigError(f"snapshot grid {state.grid} differs from configured {grid}")
    return state


def random_scalar_field(grid: Grid, seed: int, member: int = 0, slope: float = 2.0,
                        kmax: int | None = None, stream: int = 0) -> ScalarField:
    """Zero-mean band-limited Gaussian field with unit L2 norm (spectral)."""
    f = _random_coefficients(grid, _rng(seed, member, stream), slope, kmax)
    norm = math.sqrt(grid.volume * float(np.sum(np.abs(f.data) ** 2)))
    return f * (1.0 / norm)


# ---------------------------------------------------------------------------
# configuration


def _parse_float(v):
    if isinstance(v, str) and v.strip().lower() in ("inf", "infinity", "+inf"):
        return math.inf
    return float(v)


@dataclass(frozen=True)
class RunConfig:
    solver: SolverConfig
    initial: GeneratorSpec = field(default_factory=GeneratorSpec)
    cadence: int = 10
    r_values: tuple = (0.5,)
    serrin_pairs: tuple = ()
    estimates: bool = True
    center_stride: int = 4
    seed: int = 0
    output_dir: str = "micropolar-out"
    formats: tuple = ("csv", "jsonl")

    def __post_init__(self):
        if self.cadence < 1:
            raise ConfigError("cadence must be >= 1")
        for r in self.r_values:
            try:
                criterion_exponent(r)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        for a, b in self.serrin_pairs:
            try:
                validate_serrin_pair(a, b)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        bad = set(self.formats) - {"csv", "jsonl"}
        if bad:
            raise ConfigError(f"unknown output formats {sorted(bad)}")

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        s = dict(d.pop("solver", {}))
        try:
            grid = Grid(int(s.pop("n", 32)), float(s.pop("box_length", 2 * math.pi)))
            solver = SolverConfig(grid=grid, dt=float(s.pop("dt")), t_end=float(s.pop("t_end")), **s)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad [solver] section: {exc}") from exc
        initial = GeneratorSpec.from_dict(d.pop("initial", {}))
        mon = dict(d.pop("monitor", {}))
        out = dict(d.pop("output", {}))
        seed = int(d.pop("seed", 0))
        if d:
            raise ConfigError(f"unknown config keys {sorted(d)}")
        pairs = tuple((_parse_float(a), _parse_float(b)) for a, b in mon.pop("serrin_pairs", ()))
        kw = dict(
            cadence=int(mon.pop("cadence", 10)),
            r_values=tuple(float(r) for r in mon.pop("r", (0.5,))),
            serrin_pairs=pairs,
            estimates=bool(mon.pop("estimates", True)),
            center_stride=int(mon.pop("center_stride", 4)),
        )
        if mon:
            raise ConfigError(f"unknown [monitor] keys {sorted(mon)}")
        kw["output_dir"] = str(out.pop("dir", "micropolar-out"))
        kw["formats"] = tuple(out.pop("formats", ("csv", "jsonl")))
        if out:
            raise ConfigError(f"unknown [output] keys {sorted(out)}")
        return cls(solver=solver, initial=initial, seed=seed, **kw)

    def to_dict(self) -> dict:
        s = self.solver
        return {
            "seed": self.seed,
            "solver": {
                "n": s.grid.n, "box_length": s.grid.box_length, "dt": s.dt, "t_end": s.t_end,
                "dealias": s.dealias, "integrator": s.integrator, "cfl_cap": s.cfl_cap,
                "coupling": s.coupling, "nonlinear": s.nonlinear, "blowup_factor": s.blowup_factor,
            },
            "initial": self.initial.to_dict(),
            "monitor": {
                "cadence": self.cadence, "r": list(self.r_values),
                "serrin_pairs": [["inf" if math.isinf(a) else a, b] for a, b in self.serrin_pairs],
                "estimates": self.estimates, "center_stride": self.center_stride,
            },
            "output": {"dir": self.output_dir, "formats": list(self.formats)},
        }


def load_config(path) -> RunConfig:
    """Read a run configuration from a ``.toml`` or ``.json`` file."""
    path = Path(path)
    text = path.read_bytes()
    try:
        if path.suffix.lower() == ".json":
            d = json.loads(text)
        else:
            d = tomllib.loads(text.decode("utf-8"))
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return RunConfig.from_dict(d)


# ---------------------------------------------------------------------------
# running


def git_blob_sha1(data: bytes) -> str:
    """Content hash in the form git uses for blobs."""
    h = hashlib.sha1(b"blob %d\0" % len(data))
    h.update(data)
    return h.hexdigest()


class _LastState:
    def __init__(self):
        self.state = None

    def __call__(self, state, step):
        self.state = state

    def on_abort(self, error, state):
        self.state = state


def _finite(x):
    return x if math.isfinite(x) else repr(x)


def run(config: RunConfig, output_dir=None) -> int:
    """Simulate with monitoring and write outputs; 0 on success, 1 if the solver aborted.

    Outputs: ``trace.csv``, ``trace.jsonl``, ``final_state.mpfld`` and
    ``manifest.json``. ``MICROPOLAR_OUTPUT_DIR`` overrides the configured
    directory.
    """
    out = Path(output_dir or os.environ.get("MICROPOLAR_OUTPUT_DIR") or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = config.solver.grid
    initial = generate_initial(config.initial, grid, config.seed)
    monitor = Monitor(config.r_values, config.serrin_pairs, config.center_stride, config.estimates)
    last = _LastState()
    status, error = "ok", None
    try:
        simulate(config.solver, initial, [monitor, last], cadence=config.cadence)
    except SolverError as exc:
        status, error = "aborted", f"{type(exc).__name__}: {exc}"

    files = []
    trace = monitor.trace
    if "csv" in config.formats:
        trace.write_csv(out / "trace.csv")
        files.append("trace.csv")
    if "jsonl" in config.formats:
        trace.write_jsonl(out / "trace.jsonl")
        files.append("trace.jsonl")
    if last.state is not None:
        save_state(out / "final_state.mpfld", last.state)
        files.append("final_state.mpfld")

    summary = {"samples": len(trace), "sup_h1_u": trace.sup_h1_u, "sup_h1_w": trace.sup_h1_w}
    if len(trace) >= 2:
        rep = energy_inequality_check(trace)
        summary["energy_defect_relative"] = rep.relative_defect
        summary["energy_balance_residual_relative"] = rep.max_balance_residual / rep.E0 if rep.E0 else 0.0
        summary["criterion_integral"] = {str(r): criterion_integral(trace, r) for r in config.r_values}
    digests = {}
    for name in sorted(files):
        data = (out / name).read_bytes()
        digests[name] = {"bytes": len(data), "sha1": git_blob_sha1(data)}
    combined = hashlib.sha1("".join(f"{k}\0{v['sha1']}\n" for k, v in digests.items()).encode()).hexdigest()
    manifest = {
        "version": __version__,
        "config": config.to_dict(),
        "status": status,
        "error": error,
        "threads": fft_workers(),
        "kernel_backend": kernels.BACKEND,
        "files": digests,
        "content_hash": combined,
        "summary": {k: (_finite(v) if isinstance(v, float) else v) for k, v in summary.items()},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return 0 if status == "ok" else 1


# ---------------------------------------------------------------------------
# inequality bench

BENCH_BETAS = (2.0, 3.0, 4.0, 6.0)
BENCH_GN = (2.0, 2.0, 6.0)


@dataclass
class BenchReport:
    records: list
    summary: dict

    def write_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for rec in self.records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
            fh.write(json.dumps({"summary": self.summary}, sort_keys=True) + "\n")


def _check_key(rec):
    p = rec["params"]
    if rec["name"] in ("lemma23", "bilinear"):
        return f"{rec['name']}[r={p['r']}]"
    if rec["name"] == "lemma25":
        return f"lemma25[beta={p['beta']:g}]"
    if rec["name"] == "anisotropic_gn":
        return "anisotropic_gn[alpha={alpha:g},lambda={lambda:g},gamma={gamma:g}]".format(**p)
    return f"{rec['name']}[r={p['r']},p={p['p']:g}]"


def _bench_member(args):
    n, seed, member, r_values, slope, center_stride = args
    grid = Grid(n)
    f = random_scalar_field(grid, seed, member, slope, stream=0)
    g = random_scalar_field(grid, seed, member, slope, stream=1)
    checks = []
    for r in r_values:
        checks.append(norms.check_lemma23(f, r, seed=seed))
        checks.append(norms.check_bilinear(f, g, r, center_stride, seed=seed))
    checks.append(norms.check_anisotropic_gn(f, *BENCH_GN, seed=seed))
    for beta in BENCH_BETAS:
        checks.append(norms.check_lemma25(f, beta, seed=seed))
    for r in r_values:
        checks.extend(norms.check_embedding_chain(f, r, 2.0, center_stride, seed=seed))
    out = []
    for c in checks:
        rec = c.to_record()
        rec["member"] = member
        out.append(rec)
    return out


def bench_inequalities(ensemble: int, r_values=(0.25, 0.5, 0.75), seed: int = 0, n: int = 16,
                       slope: float = 0.5, center_stride: int = 4, workers: int = 1) -> BenchReport:
    """Run every inequality check over ``ensemble`` random band-limited fields."""
    if ensemble < 1:
        raise ValueError("ensemble size must be >= 1")
    r_values = tuple(float(r) for r in r_values)
    tasks = [(n, seed, i, r_values, slope, center_stride) for i in range(ensemble)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_bench_member, tasks))
    else:
        results = [_bench_member(t) for t in tasks]
    records = [rec for member in results for rec in member]
    summary = {}
    for rec in records:
        key = _check_key(rec)
        s = summary.setdefault(key, {"max_ratio": -math.inf, "min_ratio": math.inf, "count": 0})
        s["max_ratio"] = max(s["max_ratio"], rec["ratio"])
        s["min_ratio"] = min(s["min_ratio"], rec["ratio"])
        s["count"] += 1
    return BenchReport(records, {"ensemble": ensemble, "seed": seed, "n": n, "checks": summary})


# ---------------------------------------------------------------------------
# oracle cross-validation


@dataclass(frozen=True)
class OracleResult:
    name: str
    error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.error <= self.tolerance

    def to_record(self) -> dict:
        return {"name": self.name, "error": self.error, "tolerance": self.tolerance, "passed": self.passed}


def _rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.abs(a - b).max() / max(np.abs(b).max(), 1e-300))


def oracle_fft(seed=0, n=8) -> OracleResult:
    grid = Grid(n)
    x = _rng(seed, 100).standard_normal(grid.shape)
    fast = to_spectral(ScalarField(grid, x)).data
    return OracleResult("fft_vs_naive_dft", _rel(fast, oracles.naive_dft(x)), 1e-12)


def oracle_advection(seed=0, n=8) -> OracleResult:
    grid = Grid(n)
    st = generate_initial(GeneratorSpec("RandomDivFree", slope=1.0), grid, seed)
    v = st.u
    w = to_spectral(VectorField(grid, _rng(seed, 101).standard_normal((3, *grid.shape))))
    fast = nonlinear_advection(v, w).data
    ref = oracles.direct_advection(v.data, w.data, grid.box_length)
    return OracleResult("advection_vs_direct_convolution", _rel(fast, ref), 1e-12)


def oracle_morrey(seed=0, n=16, p=2.0, q=6.0, stride=4) -> OracleResult:
    """Every sampled ball integral and the resulting norm against direct summation."""
    grid = Grid(n)
    f = to_real(random_scalar_field(grid, seed, 0, slope=1.5))
    prof = norms.morrey_profile(f, p, q, stride)
    centers = [tuple(c * grid.spacing for c in idx) for idx in prof.centers]
    direct = np.array([[oracles.direct_ball_integral(f.data, grid.box_length, c, r, p) for r in prof.radii]
                       for c in centers])
    err = float(np.max(np.abs(prof.ball_integrals ** (1.0 / p) - direct) / direct))
    ref = oracles.direct_morrey(f.data, grid.box_length, p, q, centers, prof.radii)
    err = max(err, abs(prof.norm - ref) / ref)
    return OracleResult("morrey_vs_direct_ball_integral", err, 1e-3)


def oracle_linear_mode(dt=0.01, t_end=1.0, n=8, amplitude=1e-8, samples=4) -> OracleResult:
    """IFRK4 steps on a single small-amplitude mode vs the exact 6x6 propagator."""
    grid = Grid(n)
    k = np.array([0.0, 0.0, 1.0])
    idx = (0, 0, 1)
    c0 = np.zeros(6, dtype=np.complex128)
    c0[:3] = amplitude * np.array([1.0, 0.5j, 0.0])
    c0[3:] = amplitude * np.array([0.3, -0.2j, 0.7])

    def field(c):
        a = np.zeros((3, *grid.shape), dtype=np.complex128)
        a[(slice(None), *idx)] = c
        a[(slice(None), 0, 0, -1)] = np.conj(c)
        return VectorField(grid, a, True)

    state = State(field(c0[:3]), field(c0[3:]), 0.0)
    cfg = SolverConfig(grid, dt=dt, t_end=t_end)
    system = oracles.linear_mode_system(k)
    nsteps = cfg.num_steps
    checkpoints = {int(round(nsteps * (j + 1) / samples)) for j in range(samples)}
    worst = 0.0
    for i in range(1, nsteps + 1):
        state = step(state, cfg)
        if i in checkpoints:
            got = np.concatenate([state.u.data[(slice(None), *idx)], state.omega.data[(slice(None), *idx)]])
            want = oracles.matrix_exponential(system, i * dt) @ c0
            worst = max(worst, float(np.linalg.norm(got - want) / np.linalg.norm(want)))
    return OracleResult("step_vs_matrix_exponential", worst, 1e-8)


def oracle_check(seed: int = 0) -> list[OracleResult]:
    """All fast-path vs oracle cross-validations."""
    return [oracle_fft(seed), oracle_advection(seed), oracle_morrey(seed), oracle_linear_mode()]
