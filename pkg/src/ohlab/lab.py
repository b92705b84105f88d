"""Experiment orchestration: config files, presets, sweeps, snapshots, CLI.

Config files are flat ``section.key = value`` text (see README for the key
reference); initial and boundary data are chosen from named presets with
call-like parameter syntax, e.g. ``problem.u0 = gauss_wave(0.8, 2.0, 0.4)``.

Data files (snapshots, CSV tables, report JSON) are deterministic: identical
configs produce byte-identical bytes.  Wall-clock content (timestamps,
runtimes) lives exclusively in the run manifest.
"""

from __future__ import annotations

import argparse
import datetime
import json
import math
import re
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

import ohlab
from ohlab import analysis, inviscid, viscous
from ohlab.core import (
    BoundarySignal,
    Grid1D,
    ProblemSpec,
    ScalarField,
    Trajectory,
    make_grid,
)

SCHEMA_VERSION = 1

# Frozen residual-tolerance constant for the entropy audit, calibrated once
# on the moving entropy-shock case (see tests) and kept fixed thereafter.
KAPPA_DEFAULT = 0.18


class ConfigError(ValueError):
    """Bad configuration text or values; maps to CLI exit code 2."""


class SnapshotLoadError(RuntimeError):
    """Snapshot file rejected: version, corruption or grid mismatch."""


# --------------------------------------------------------------------------
# presets
# --------------------------------------------------------------------------

def _u0_zero(x: np.ndarray) -> np.ndarray:
    return np.zeros_like(x)


def _u0_gauss_bump(x: np.ndarray, a: float, x0: float, s: float) -> np.ndarray:
    return a * np.exp(-((x - x0) ** 2) / (2.0 * s**2))


def _u0_gauss_wave(x: np.ndarray, a: float, x0: float, s: float) -> np.ndarray:
    # derivative of a Gaussian, scaled to peak amplitude a: zero total mass,
    # so the primitive is itself a localized bump (square-integrable)
    return a * math.exp(0.5) * ((x0 - x) / s) * np.exp(-((x - x0) ** 2) / (2.0 * s**2))


def _u0_box(x: np.ndarray, a: float, x0: float, w: float) -> np.ndarray:
    return np.where((x >= x0) & (x < x0 + w), a, 0.0)


def _u0_ramp_down(x: np.ndarray, a: float, x0: float, w: float) -> np.ndarray:
    out = np.where(x <= x0, a, 0.0)
    on_ramp = (x > x0) & (x < x0 + w)
    return np.where(on_ramp, a * (1.0 - (x - x0) / w), out)


U0_PRESETS = {
    "zero": (_u0_zero, 0),
    "gauss_bump": (_u0_gauss_bump, 3),
    "gauss_wave": (_u0_gauss_wave, 3),
    "box": (_u0_box, 3),
    "ramp_down": (_u0_ramp_down, 3),
}


def _g_zero(t: np.ndarray) -> np.ndarray:
    return np.zeros_like(t)


def _g_ramp_hold(t: np.ndarray, gmax: float, t_rise: float) -> np.ndarray:
    return gmax * np.minimum(t / t_rise, 1.0)


def _g_sine_burst(t: np.ndarray, gmax: float, omega: float, t_end: float) -> np.ndarray:
    return gmax * np.sin(omega * np.minimum(t, t_end))


G_PRESETS = {
    "zero": (_g_zero, 0),
    "ramp_hold": (_g_ramp_hold, 2),
    "sine_burst": (_g_sine_burst, 3),
}

_PRESET_RE = re.compile(r"^([a-z_][a-z0-9_]*)\s*(?:\((.*)\))?$")


def parse_preset(text: str) -> tuple[str, tuple[float, ...]]:
    m = _PRESET_RE.match(text.strip())
    if not m:
        raise ConfigError(f"malformed preset {text!r}")
    name = m.group(1)
    args = ()
    if m.group(2) is not None and m.group(2).strip():
        try:
            args = tuple(float(p) for p in m.group(2).split(","))
        except ValueError as exc:
            raise ConfigError(f"non-numeric preset parameter in {text!r}") from exc
    return name, args


def build_u0(grid: Grid1D, preset: str) -> ScalarField:
    name, args = parse_preset(preset)
    if name not in U0_PRESETS:
        raise ConfigError(f"unknown u0 preset {name!r}")
    fn, arity = U0_PRESETS[name]
    if len(args) != arity:
        raise ConfigError(f"u0 preset {name!r} takes {arity} parameters, got {len(args)}")
    return ScalarField(grid, fn(grid.centers, *args))


def build_g(preset: str, t_final: float, n_samples: int = 2049) -> BoundarySignal:
    name, args = parse_preset(preset)
    if name not in G_PRESETS:
        raise ConfigError(f"unknown g preset {name!r}")
    fn, arity = G_PRESETS[name]
    if len(args) != arity:
        raise ConfigError(f"g preset {name!r} takes {arity} parameters, got {len(args)}")
    if name == "zero":
        return BoundarySignal.zero(t_final)
    return BoundarySignal.from_function(lambda ts: fn(ts, *args), t_final, n_samples)


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    gamma: float = 0.5
    length: float = 20.0
    cells: int = 1024
    t_final: float = 1.0
    epsilon: float = 0.05
    u0: str = "gauss_wave(0.8, 2.2, 0.4)"
    u0_b: str = ""
    g: str = "zero"
    cutoff_width: float = 1.0
    relaxed_gamma: bool = False
    g_samples: int = 2049
    c_cfl: float = 0.4
    splitting: str = "lie"
    trace_order: int = 2
    # the nonlocal source fills the whole truncated domain whenever gamma > 0,
    # so the tight tail guard is opt-in per run rather than a config default
    tail_guard_rel: float = 1e9
    sweep_eps: tuple = (0.08, 0.04, 0.02, 0.01)
    kappa: float = KAPPA_DEFAULT
    delta_c: float = 0.0  # 0 -> auto (2M/64)
    c_margin: float = 0.5
    tol_mass: float = 1e-3
    tol_bln: float = 1e-3
    tol_stability: float = 0.05
    l2_coeff: float = 2.0
    grad_coeff: float = 10.0
    sup_u_tol: float = 1e-6
    p_sweep_factor: float = 2.0
    growth_tol: float = 1.0
    stability_radius: float = 0.0  # 0 -> auto (L/4)
    out_dir: str = "out"
    stamps: int = 9
    formats: tuple = ("csv", "json")

    def validate(self) -> None:
        if self.cells < 4:
            raise ConfigError("problem.N must be at least 4")
        if not (self.length > 0):
            raise ConfigError("problem.L must be positive")
        if not (self.t_final > 0):
            raise ConfigError("problem.T must be positive")
        if self.epsilon < 0:
            raise ConfigError("problem.epsilon must be nonnegative")
        if self.stamps < 2:
            raise ConfigError("output.stamps must be at least 2")
        if self.splitting not in ("lie", "strang"):
            raise ConfigError("scheme.splitting must be lie or strang")
        if self.trace_order not in (2, 3):
            raise ConfigError("scheme.trace_order must be 2 or 3")
        eps = self.sweep_eps
        if len(eps) and not all(a > b for a, b in zip(eps, eps[1:])):
            raise ConfigError("sweep.eps must be strictly decreasing")
        presets = [(self.u0, U0_PRESETS, "u0"), (self.g, G_PRESETS, "g")]
        if self.u0_b:
            presets.append((self.u0_b, U0_PRESETS, "u0"))
        for preset, table, what in presets:
            name, args = parse_preset(preset)
            if name not in table:
                raise ConfigError(f"unknown {what} preset {name!r}")
            arity = table[name][1]
            if len(args) != arity:
                raise ConfigError(
                    f"{what} preset {name!r} takes {arity} parameters, got {len(args)}"
                )


_KEY_MAP = {
    "problem.gamma": ("gamma", float),
    "problem.L": ("length", float),
    "problem.N": ("cells", int),
    "problem.T": ("t_final", float),
    "problem.epsilon": ("epsilon", float),
    "problem.u0": ("u0", str),
    "problem.u0_b": ("u0_b", str),
    "problem.g": ("g", str),
    "problem.cutoff_width": ("cutoff_width", float),
    "problem.relaxed_gamma": ("relaxed_gamma", lambda s: s.lower() in ("1", "true", "yes")),
    "problem.g_samples": ("g_samples", int),
    "scheme.c_cfl": ("c_cfl", float),
    "scheme.splitting": ("splitting", str),
    "scheme.trace_order": ("trace_order", int),
    "scheme.tail_guard_rel": ("tail_guard_rel", float),
    "sweep.eps": ("sweep_eps", lambda s: tuple(float(p) for p in s.split(","))),
    "audit.kappa": ("kappa", float),
    "audit.delta_c": ("delta_c", lambda s: 0.0 if s.strip() == "auto" else float(s)),
    "audit.c_margin": ("c_margin", float),
    "audit.tol_mass": ("tol_mass", float),
    "audit.tol_bln": ("tol_bln", float),
    "audit.tol_stability": ("tol_stability", float),
    "audit.l2_coeff": ("l2_coeff", float),
    "audit.grad_coeff": ("grad_coeff", float),
    "audit.sup_u_tol": ("sup_u_tol", float),
    "audit.p_sweep_factor": ("p_sweep_factor", float),
    "audit.growth_tol": ("growth_tol", float),
    "audit.stability_radius": ("stability_radius", lambda s: 0.0 if s.strip() == "auto" else float(s)),
    "output.dir": ("out_dir", str),
    "output.stamps": ("stamps", int),
    "output.formats": ("formats", lambda s: tuple(p.strip() for p in s.split(","))),
}


def parse_config(text: str) -> ExperimentConfig:
    """Parse flat dotted-key config text; unknown keys are errors."""
    cfg = ExperimentConfig()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEY_MAP:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        attr, conv = _KEY_MAP[key]
        try:
            setattr(cfg, attr, conv(value))
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from exc
    cfg.validate()
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def build_problem(cfg: ExperimentConfig, epsilon: float | None = None,
                  which: str = "a") -> ProblemSpec:
    grid = make_grid(cfg.length, cfg.cells)
    preset = cfg.u0 if which == "a" else cfg.u0_b
    if not preset:
        raise ConfigError("this experiment needs problem.u0_b (a second initial datum)")
    return ProblemSpec(
        gamma=cfg.gamma,
        epsilon=cfg.epsilon if epsilon is None else epsilon,
        grid=grid,
        u0=build_u0(grid, preset),
        g=build_g(cfg.g, cfg.t_final, cfg.g_samples),
        t_final=cfg.t_final,
        cutoff_width=cfg.cutoff_width,
        relaxed_gamma=cfg.relaxed_gamma,
    )


def output_stamps(cfg: ExperimentConfig) -> np.ndarray:
    return np.linspace(0.0, cfg.t_final, cfg.stamps)


def run_from_spec(spec: ProblemSpec, stamps: np.ndarray, cfg: ExperimentConfig) -> Trajectory:
    if spec.epsilon > 0.0:
        return viscous.run_viscous(
            spec, stamps, c_cfl=cfg.c_cfl,
            tail_guard_rel=cfg.tail_guard_rel, trace_order=cfg.trace_order,
        )
    return inviscid.run_inviscid(
        spec, stamps, c_cfl=cfg.c_cfl,
        splitting=cfg.splitting, trace_order=cfg.trace_order,
    )


# --------------------------------------------------------------------------
# deterministic serialisation helpers
# --------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, allow_nan=False, separators=(",", ":"))


def write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


# --------------------------------------------------------------------------
# snapshots
# --------------------------------------------------------------------------

def snapshot_text(traj: Trajectory, problem_echo: dict | None = None,
                  scheme_echo: dict | None = None) -> str:
    """Serialise a trajectory as a header line plus one JSON line per stamp."""
    keys = sorted(traj.diagnostics.keys())
    header = {
        "kind": "ohlab-snapshot",
        "schema_version": SCHEMA_VERSION,
        "n_records": traj.n_stamps,
        "grid": {"length": traj.grid.length, "cell_count": traj.grid.cell_count},
        "epsilon": traj.epsilon,
        "gamma": traj.gamma,
        "diagnostics": keys,
        "problem": problem_echo or {},
        "scheme": scheme_echo or {},
    }
    lines = [_dump_json(header)]
    for k in range(traj.n_stamps):
        rec = {
            "t": float(traj.times[k]),
            "u": [float(v) for v in traj.u[k]],
            "P": [float(v) for v in traj.P[k]],
            "trace": float(traj.trace[k]),
            "g": float(traj.g_values[k]),
            "diag": [float(traj.diagnostics[key][k]) for key in keys],
        }
        lines.append(_dump_json(rec))
    return "\n".join(lines) + "\n"


def write_snapshot(traj: Trajectory, path: str | Path,
                   problem_echo: dict | None = None,
                   scheme_echo: dict | None = None) -> Path:
    path = Path(path)
    write_text(path, snapshot_text(traj, problem_echo, scheme_echo))
    return path


def read_snapshot(path: str | Path) -> Trajectory:
    """Load a snapshot, validating schema version and grid consistency."""
    try:
        raw = Path(path).read_text()
    except OSError as exc:
        raise SnapshotLoadError(f"cannot read snapshot {path}: {exc}") from exc
    lines = raw.splitlines()
    if not lines:
        raise SnapshotLoadError("empty snapshot file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise SnapshotLoadError(f"corrupt header: {exc}") from exc
    if header.get("kind") != "ohlab-snapshot":
        raise SnapshotLoadError("not an ohlab snapshot")
    version = header.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SnapshotLoadError(f"unsupported schema version {version!r}")
    n_records = header["n_records"]
    grid = make_grid(header["grid"]["length"], header["grid"]["cell_count"])
    keys = list(header["diagnostics"])
    times, u_rows, p_rows, trace, gvals = [], [], [], [], []
    diag_rows = []
    for idx in range(n_records):
        lineno = idx + 1
        if lineno >= len(lines) or not lines[lineno].strip():
            raise SnapshotLoadError(f"truncated snapshot: missing record {idx}")
        try:
            rec = json.loads(lines[lineno])
        except json.JSONDecodeError as exc:
            raise SnapshotLoadError(f"corrupt record {idx}: {exc}") from exc
        try:
            u_row, p_row = rec["u"], rec["P"]
            times.append(rec["t"])
            trace.append(rec["trace"])
            gvals.append(rec["g"])
            diag_rows.append(rec["diag"])
        except KeyError as exc:
            raise SnapshotLoadError(f"corrupt record {idx}: missing field {exc}") from exc
        if len(u_row) != grid.cell_count or len(p_row) != grid.cell_count:
            raise SnapshotLoadError(
                f"record {idx}: field length does not match grid "
                f"({len(u_row)} vs {grid.cell_count})"
            )
        u_rows.append(u_row)
        p_rows.append(p_row)
    diagnostics = {
        key: np.array([row[j] for row in diag_rows]) for j, key in enumerate(keys)
    }
    return Trajectory(
        grid=grid,
        epsilon=float(header["epsilon"]),
        gamma=float(header["gamma"]),
        times=np.array(times),
        u=np.array(u_rows),
        P=np.array(p_rows),
        trace=np.array(trace),
        g_values=np.array(gvals),
        diagnostics=diagnostics,
    )


# --------------------------------------------------------------------------
# manifests (the only place wall-clock content is allowed)
# --------------------------------------------------------------------------

def make_manifest(cfg: ExperimentConfig, runtimes: dict[str, float],
                  norms: dict | None = None, notes: list[str] | None = None) -> dict:
    return {
        "package_version": ohlab.__version__,
        "created_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "config": asdict(cfg),
        "scheme_flags": {
            "elliptic_right_closure": "neumann_zero_gradient",
            "elliptic_left_ghost": "quadratic_through_origin",
            "convective_flux_viscous": "local_lax_friedrichs",
            "convective_flux_inviscid": "godunov",
            "time_integrator_viscous": "ssp_rk2_heun",
            "splitting": cfg.splitting,
            "trace_order": cfg.trace_order,
            "c_cfl": cfg.c_cfl,
            "tail_guard_rel": cfg.tail_guard_rel,
            "kappa": cfg.kappa,
            "delta_c": cfg.delta_c if cfg.delta_c > 0 else "auto(2M/64)",
        },
        "runtimes_seconds": runtimes,
        "norm_series": norms or {},
        "notes": notes or [],
    }


def write_manifest(manifest: dict, path: Path) -> None:
    write_text(path, json.dumps(manifest, sort_keys=True, indent=2) + "\n")


def _norm_series(traj: Trajectory) -> dict:
    keep = ("l1_u", "l2_u", "linf_u", "l1_P", "l2_P", "linf_P", "eps_dxP0", "tail_max")
    out = {"t": [float(v) for v in traj.times]}
    for key in keep:
        if key in traj.diagnostics:
            out[key] = [float(v) for v in traj.diagnostics[key]]
    return out


# --------------------------------------------------------------------------
# experiments
# --------------------------------------------------------------------------

@dataclass
class SweepReport:
    epsilons: list[float]
    d_series: list[float]          # |u_{e_k} - u_{e_{k+1}}|_L1(0, L/2) at T
    e_series: list[float]          # |u_{e_k} - u_inviscid|_L1(0, L/2) at T
    steps: list[int]
    p_linf: list[float]
    report: analysis.AuditReport

    @property
    def all_passed(self) -> bool:
        return self.report.all_passed


def _l1_half_domain(a: np.ndarray, b: np.ndarray, grid: Grid1D) -> float:
    half = grid.centers <= grid.length / 2.0
    return float(np.abs((a - b)[half]).sum() * grid.dx)


def run_epsilon_sweep(cfg: ExperimentConfig, out_dir: Path | None = None) -> SweepReport:
    """Viscous runs over the eps list plus one inviscid run, with distances.

    Emits the distance table d_k = |u_{e_k} - u_{e_{k+1}}| and
    e_k = |u_{e_k} - u_inv| in L1(0, L/2) at the final time and checks both
    are nonincreasing within 10% slack, plus eps-independence of sup |P|.
    Partial results are persisted if a member run fails.
    """
    if len(cfg.sweep_eps) < 3:
        raise ConfigError("sweep needs at least three epsilon values")
    stamps = output_stamps(cfg)
    runtimes: dict[str, float] = {}
    finished: list[tuple[float, Trajectory]] = []
    failure: Exception | None = None
    for eps in cfg.sweep_eps:
        spec = build_problem(cfg, epsilon=eps)
        t0 = time.perf_counter()
        try:
            traj = run_from_spec(spec, stamps, cfg)
        except Exception as exc:  # persist partial results, then re-raise
            failure = exc
            break
        runtimes[f"eps={_fmt(eps)}"] = time.perf_counter() - t0
        finished.append((eps, traj))
    inv_traj = None
    if failure is None:
        spec0 = build_problem(cfg, epsilon=0.0)
        t0 = time.perf_counter()
        try:
            inv_traj = run_from_spec(spec0, stamps, cfg)
        except Exception as exc:
            failure = exc
        else:
            runtimes["eps=0"] = time.perf_counter() - t0

    grid = make_grid(cfg.length, cfg.cells)
    d_series, e_series, steps, p_linf = [], [], [], []
    for k, (eps, traj) in enumerate(finished):
        steps.append(int(traj.diagnostics["steps"][-1]))
        p_linf.append(float(traj.diagnostics["linf_P"].max()))
        if k + 1 < len(finished):
            d_series.append(_l1_half_domain(traj.u[-1], finished[k + 1][1].u[-1], grid))
        if inv_traj is not None:
            e_series.append(_l1_half_domain(traj.u[-1], inv_traj.u[-1], grid))

    report = analysis.AuditReport(metadata={
        "experiment": "epsilon_sweep",
        "eps_list": [float(e) for e in cfg.sweep_eps],
        "cells": cfg.cells,
    })
    slack = 1.10
    if failure is None:
        d_ok = all(d_series[i + 1] <= slack * d_series[i] for i in range(len(d_series) - 1))
        worst_d = max(
            (d_series[i + 1] / d_series[i] for i in range(len(d_series) - 1) if d_series[i] > 0),
            default=0.0,
        )
        report.add(analysis.Check(
            "cauchy_distances_nonincreasing", worst_d, slack, slack - 1.0, d_ok,
            None, {"d_series": d_series},
        ))
        e_ok = all(e_series[i + 1] <= slack * e_series[i] for i in range(len(e_series) - 1))
        worst_e = max(
            (e_series[i + 1] / e_series[i] for i in range(len(e_series) - 1) if e_series[i] > 0),
            default=0.0,
        )
        report.add(analysis.Check(
            "limit_distances_nonincreasing", worst_e, slack, slack - 1.0, e_ok,
            None, {"e_series": e_series},
        ))
        med = float(np.median(p_linf))
        ratio = float(max(p_linf) / med) if med > 0 else 0.0
        report.add(analysis.Check(
            "p_sup_eps_independent", ratio, cfg.p_sweep_factor, cfg.p_sweep_factor,
            ratio <= cfg.p_sweep_factor, None, {"p_linf": p_linf},
        ))

    if out_dir is not None:
        out_dir = Path(out_dir)
        rows = ["epsilon,d_k,e_k,steps"]
        for k, (eps, _) in enumerate(finished):
            d_val = _fmt(d_series[k]) if k < len(d_series) else ""
            e_val = _fmt(e_series[k]) if k < len(e_series) else ""
            rows.append(f"{_fmt(eps)},{d_val},{e_val},{steps[k]}")
        write_text(out_dir / "sweep.csv", "\n".join(rows) + "\n")
        write_text(out_dir / "sweep_report.json", _dump_json(report.to_dict()) + "\n")
        notes = [] if failure is None else [f"sweep aborted: {failure}"]
        write_manifest(make_manifest(cfg, runtimes, notes=notes), out_dir / "manifest.json")
        for eps, traj in finished:
            write_snapshot(traj, out_dir / f"run_eps_{_fmt(eps)}.snapshot.json",
                           problem_echo={"u0": cfg.u0, "g": cfg.g, "epsilon": eps})
        if inv_traj is not None:
            write_snapshot(inv_traj, out_dir / "run_inviscid.snapshot.json",
                           problem_echo={"u0": cfg.u0, "g": cfg.g, "epsilon": 0.0})

    if failure is not None:
        raise failure
    return SweepReport(
        [float(e) for e, _ in finished], d_series, e_series, steps, p_linf, report
    )


@dataclass
class StabilityReport:
    check: analysis.Check
    contraction: analysis.Check | None
    report: analysis.AuditReport

    @property
    def all_passed(self) -> bool:
        return self.report.all_passed


def run_stability_experiment(cfg: ExperimentConfig, out_dir: Path | None = None) -> StabilityReport:
    """Two inviscid runs with one boundary datum, compared in the L1 cone.

    Checkpoints are {T/4, T/2, 3T/4, T}; for gamma = 0 the plain L1
    contraction (no exponential factor) is checked as well.
    """
    if not cfg.u0_b:
        raise ConfigError("stability experiment needs problem.u0_b")
    stamps = np.linspace(0.0, cfg.t_final, 5)
    runtimes = {}
    t0 = time.perf_counter()
    spec_a = build_problem(cfg, epsilon=0.0, which="a")
    traj_a = run_from_spec(spec_a, stamps, cfg)
    runtimes["run_a"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    spec_b = build_problem(cfg, epsilon=0.0, which="b")
    traj_b = run_from_spec(spec_b, stamps, cfg)
    runtimes["run_b"] = time.perf_counter() - t0

    radius = cfg.stability_radius if cfg.stability_radius > 0 else cfg.length / 4.0
    check = analysis.stability_compare(traj_a, traj_b, radius, tol=cfg.tol_stability)
    contraction = None
    if cfg.gamma == 0.0:
        contraction = analysis.stability_compare(
            traj_a, traj_b, radius, tol=1e-3, contraction=True
        )
    report = analysis.AuditReport(metadata={
        "experiment": "stability", "radius": radius, "cells": cfg.cells,
    })
    report.add(check)
    if contraction is not None:
        report.add(contraction)

    if out_dir is not None:
        out_dir = Path(out_dir)
        rows = ["t,lhs,rhs,ratio"]
        for row in check.meta["rows"]:
            rows.append(
                f"{_fmt(row['t'])},{_fmt(row['lhs'])},{_fmt(row['rhs'])},{_fmt(row['ratio'])}"
            )
        write_text(out_dir / "stability.csv", "\n".join(rows) + "\n")
        write_text(out_dir / "stability_report.json", _dump_json(report.to_dict()) + "\n")
        write_manifest(make_manifest(cfg, runtimes), out_dir / "manifest.json")
        write_snapshot(traj_a, out_dir / "run_a.snapshot.json",
                       problem_echo={"u0": cfg.u0, "g": cfg.g})
        write_snapshot(traj_b, out_dir / "run_b.snapshot.json",
                       problem_echo={"u0": cfg.u0_b, "g": cfg.g})
    return StabilityReport(check, contraction, report)


def verify_trajectory(traj: Trajectory, cfg: ExperimentConfig) -> analysis.AuditReport:
    """Run the audits applicable to a stored trajectory."""
    report = analysis.AuditReport(metadata={
        "experiment": "verify",
        "epsilon": traj.epsilon,
        "gamma": traj.gamma,
        "cells": traj.grid.cell_count,
    })
    delta_c = cfg.delta_c if cfg.delta_c > 0 else None
    cgrid = analysis.KruzhkovConstantGrid.for_trajectory(
        traj, margin=cfg.c_margin, delta_c=delta_c
    )
    if traj.n_stamps >= 2:
        report.add(analysis.entropy_residual(traj, cgrid, kappa=cfg.kappa))
    tr = analysis.TraceSeries.from_trajectory(traj)
    report.add(analysis.bln_residual(tr, cgrid.delta_c, tol=cfg.tol_bln))
    if traj.epsilon > 0.0:
        tols = analysis.AprioriTolerances(
            mass=cfg.tol_mass, l2_coeff=cfg.l2_coeff, sup_u=cfg.sup_u_tol,
            grad_coeff=cfg.grad_coeff, p_sweep_factor=cfg.p_sweep_factor,
            growth=cfg.growth_tol,
        )
        sub = analysis.apriori_suite(traj, tols=tols)
        for c in sub.checks:
            report.add(c)
    return report


# --------------------------------------------------------------------------
# CLI
# --------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ohlab",
        description="solve and audit the Ostrovsky-Hunter half-line problem",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="config file path")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--n", type=int, default=None, help="cell count override")
        p.add_argument("--quiet", action="store_true")

    p_solve = sub.add_parser("solve", help="one run (viscous or inviscid by epsilon)")
    add_common(p_solve)
    p_solve.add_argument("--eps", type=float, default=None, help="epsilon override")

    p_sweep = sub.add_parser("sweep", help="epsilon sweep convergence experiment")
    add_common(p_sweep)
    p_sweep.add_argument("--eps", default=None, help="comma list override for sweep.eps")

    p_stab = sub.add_parser("stability", help="two-run L1 stability experiment")
    add_common(p_stab)

    p_verify = sub.add_parser("verify", help="audit an existing snapshot")
    p_verify.add_argument("snapshot", help="snapshot file")
    p_verify.add_argument("--config", default=None, help="config for audit parameters")
    p_verify.add_argument("--quiet", action="store_true")

    sub.add_parser("riemann", help="print the Godunov flux unit table")
    return parser


def _emit(quiet: bool, *parts) -> None:
    if not quiet:
        print(*parts)


def _report_lines(report: analysis.AuditReport) -> list[str]:
    lines = []
    for c in report.checks:
        status = "PASS" if c.passed else "FAIL"
        lines.append(f"{status} {c.name}: value={c.value:.6g} bound={c.bound:.6g}")
    return lines


def cli_main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 2

    try:
        if args.command == "riemann":
            cases = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0)]
            for ul, ur in cases:
                f = inviscid.godunov_flux(inviscid.RiemannInput(ul, ur))
                print(f"godunov_flux({ul:+.1f}, {ur:+.1f}) = {f:.6g}")
            return 0

        if args.command == "verify":
            cfg = load_config(args.config) if args.config else ExperimentConfig()
            traj = read_snapshot(args.snapshot)
            report = verify_trajectory(traj, cfg)
            for line in _report_lines(report):
                _emit(args.quiet, line)
            return 0 if report.all_passed else 1

        cfg = load_config(args.config)
        if args.n is not None:
            cfg.cells = args.n
        if args.out is not None:
            cfg.out_dir = args.out
        out_dir = Path(cfg.out_dir)

        if args.command == "solve":
            if args.eps is not None:
                cfg.epsilon = args.eps
            cfg.validate()
            spec = build_problem(cfg)
            t0 = time.perf_counter()
            traj = run_from_spec(spec, output_stamps(cfg), cfg)
            runtime = time.perf_counter() - t0
            write_snapshot(traj, out_dir / "run.snapshot.json",
                           problem_echo={"u0": cfg.u0, "g": cfg.g, "epsilon": cfg.epsilon})
            write_manifest(
                make_manifest(cfg, {"run": runtime}, norms=_norm_series(traj)),
                out_dir / "manifest.json",
            )
            _emit(args.quiet,
                  f"run complete: {traj.n_stamps} stamps, {int(traj.diagnostics['steps'][-1])} steps")
            return 0

        if args.command == "sweep":
            if args.eps is not None:
                try:
                    cfg.sweep_eps = tuple(float(p) for p in args.eps.split(","))
                except ValueError as exc:
                    raise ConfigError(f"bad --eps list: {args.eps!r}") from exc
            cfg.validate()
            if len(cfg.sweep_eps) < 3:
                raise ConfigError("sweep needs at least three epsilon values")
            result = run_epsilon_sweep(cfg, out_dir)
            for line in _report_lines(result.report):
                _emit(args.quiet, line)
            return 0 if result.all_passed else 1

        if args.command == "stability":
            cfg.validate()
            result = run_stability_experiment(cfg, out_dir)
            for line in _report_lines(result.report):
                _emit(args.quiet, line)
            return 0 if result.all_passed else 1

        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SnapshotLoadError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ohlab.BlowUpError, ohlab.StepFailureError, ohlab.TruncationGuardError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
