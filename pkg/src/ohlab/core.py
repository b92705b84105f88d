"""Grids, fields, problem data and discrete norms shared by all solvers.

Everything in this module is immutable after construction: arrays are
defensively copied and marked read-only, so instances can be shared freely
between concurrently running experiments without locking.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


# --------------------------------------------------------------------------
# errors raised by the solvers
# --------------------------------------------------------------------------

class BlowUpError(RuntimeError):
    """A non-finite value appeared during time stepping."""

    def __init__(self, t: float, cell: int):
        super().__init__(f"solution blew up at t={t:.6g}, cell {cell}")
        self.t = t
        self.cell = cell


class StepFailureError(RuntimeError):
    """Time step collapsed below the hard floor (1e-12)."""


class TruncationGuardError(RuntimeError):
    """Solution reached the right edge of the truncated domain.

    The truncation of the half-line to (0, L) is only faithful while the
    solution stays negligible near x = L; the guard aborts the run when
    that stops being true.
    """

    def __init__(self, t: float, tail_max: float, threshold: float):
        super().__init__(
            f"truncation guard tripped at t={t:.6g}: "
            f"max|u| near x=L is {tail_max:.3e} (threshold {threshold:.3e})"
        )
        self.t = t
        self.tail_max = tail_max
        self.threshold = threshold


# --------------------------------------------------------------------------
# grid and fields
# --------------------------------------------------------------------------

def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=np.float64, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Grid1D:
    """Uniform cell-centred grid on (0, L): x_i = (i + 1/2) dx, dx = L/N."""

    length: float
    cell_count: int
    dx: float = field(init=False)
    centers: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not (self.length > 0.0) or not np.isfinite(self.length):
            raise ValueError(f"grid length must be positive, got {self.length}")
        if self.cell_count < 4:
            raise ValueError(f"need at least 4 cells, got {self.cell_count}")
        dx = self.length / self.cell_count
        object.__setattr__(self, "dx", dx)
        centers = (np.arange(self.cell_count) + 0.5) * dx
        object.__setattr__(self, "centers", _readonly(centers))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Grid1D):
            return NotImplemented
        return self.length == other.length and self.cell_count == other.cell_count

    def __hash__(self):
        return hash((self.length, self.cell_count))


def make_grid(length: float, cell_count: int) -> Grid1D:
    """Build a Grid1D; rejects non-positive length and cell_count < 4."""
    return Grid1D(float(length), int(cell_count))


@dataclass(frozen=True)
class ScalarField:
    """Cell-averaged real values on a Grid1D.  All entries must be finite."""

    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.grid.cell_count,):
            raise ValueError(
                f"field has {v.shape} values for a grid of {self.grid.cell_count} cells"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "values", _readonly(v))

    @classmethod
    def sample(cls, grid: Grid1D, fn: Callable[[np.ndarray], np.ndarray]) -> "ScalarField":
        """Sample a function at cell centres (midpoint rule for cell averages)."""
        return cls(grid, np.asarray(fn(grid.centers), dtype=np.float64))

    @classmethod
    def zeros(cls, grid: Grid1D) -> "ScalarField":
        return cls(grid, np.zeros(grid.cell_count))


def norm_l1(f: ScalarField) -> float:
    """Discrete L1 norm: sum |f_i| dx."""
    return float(np.abs(f.values).sum() * f.grid.dx)


def norm_l2(f: ScalarField) -> float:
    """Discrete L2 norm: sqrt(sum f_i^2 dx)."""
    return float(np.sqrt((f.values**2).sum() * f.grid.dx))


def norm_linf(f: ScalarField) -> float:
    """Discrete sup norm: max |f_i|."""
    return float(np.abs(f.values).max())


# --------------------------------------------------------------------------
# boundary signal
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundarySignal:
    """Uniformly sampled boundary datum g on [0, T_signal].

    The first sample must be exactly zero, the samples must respect the
    stored Lipschitz bound between neighbours, and no sample may exceed the
    stored sup bound.  Evaluation linearly interpolates between samples and
    holds the last value beyond the final sample time.
    """

    values: np.ndarray
    dt_g: float
    lip: float = None  # type: ignore[assignment]
    sup: float = None  # type: ignore[assignment]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or len(v) < 2:
            raise ValueError("boundary signal needs at least two samples")
        if not np.all(np.isfinite(v)):
            raise ValueError("boundary signal contains non-finite samples")
        if not (self.dt_g > 0.0):
            raise ValueError("sample step must be positive")
        if v[0] != 0.0:
            raise ValueError(f"boundary signal must start at 0, got g(0)={v[0]}")
        steps = np.abs(np.diff(v))
        lip = self.lip if self.lip is not None else float(steps.max() / self.dt_g)
        sup = self.sup if self.sup is not None else float(np.abs(v).max())
        slack = 1e-12 * (1.0 + abs(sup))
        if steps.max(initial=0.0) > lip * self.dt_g + slack:
            raise ValueError("samples violate the declared Lipschitz bound")
        if np.abs(v).max() > sup + slack:
            raise ValueError("samples violate the declared sup bound")
        object.__setattr__(self, "values", _readonly(v))
        object.__setattr__(self, "lip", float(lip))
        object.__setattr__(self, "sup", float(sup))

    @property
    def t_final(self) -> float:
        return (len(self.values) - 1) * self.dt_g

    def __call__(self, t: float) -> float:
        if t <= 0.0:
            return float(self.values[0])
        if t >= self.t_final:
            return float(self.values[-1])
        s = t / self.dt_g
        k = int(s)
        w = s - k
        return float((1.0 - w) * self.values[k] + w * self.values[k + 1])

    @classmethod
    def from_function(
        cls, fn: Callable[[np.ndarray], np.ndarray], t_final: float, n_samples: int = 2049
    ) -> "BoundarySignal":
        ts = np.linspace(0.0, t_final, n_samples)
        return cls(np.asarray(fn(ts), dtype=np.float64), float(ts[1] - ts[0]))

    @classmethod
    def zero(cls, t_final: float) -> "BoundarySignal":
        return cls(np.zeros(2), float(t_final) if t_final > 0 else 1.0)


# --------------------------------------------------------------------------
# cut-off function
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CutoffChi:
    """Smooth bump used for homogenising the boundary datum: u - g(t) chi(x).

    chi(0) = 1, chi vanishes for x >= width, 0 <= chi <= 1, and the sampled
    derivative obeys |chi'| <= c_bound / width.
    """

    grid: Grid1D
    width: float
    chi: np.ndarray
    dchi: np.ndarray
    c_bound: float

    def __post_init__(self):
        object.__setattr__(self, "chi", _readonly(self.chi))
        object.__setattr__(self, "dchi", _readonly(self.dchi))


def _bump_profile(s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # chi(s) = exp(1 - 1/(1 - s^2)) on |s| < 1, extended by zero
    inside = np.abs(s) < 1.0
    chi = np.zeros_like(s)
    dchi = np.zeros_like(s)
    si = s[inside]
    one_minus = 1.0 - si**2
    chi[inside] = np.exp(1.0 - 1.0 / one_minus)
    dchi[inside] = chi[inside] * (-2.0 * si / one_minus**2)
    return chi, dchi


def make_cutoff(grid: Grid1D, width: float) -> CutoffChi:
    """Sampled cut-off chi(x) = exp(1 - 1/(1 - (x/w)^2)) for x < w, else 0."""
    if not (0.0 < width <= grid.length / 2.0):
        raise ValueError(f"cutoff width must lie in (0, L/2], got {width}")
    s = grid.centers / width
    chi, dprofile = _bump_profile(s)
    dchi = dprofile / width
    c_bound = float(np.abs(dchi).max() * width)
    return CutoffChi(grid, float(width), chi, dchi, c_bound)


# --------------------------------------------------------------------------
# problem specification
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ProblemSpec:
    """Full definition of one experiment.

    gamma is the rotation coefficient, epsilon >= 0 the viscosity (0 selects
    the inviscid solver), u0 the initial datum on the truncated grid, g the
    boundary signal, t_final the horizon and cutoff_width the support of the
    homogenising cut-off.  Structural sanity is enforced here; the model
    assumptions themselves are reported by validate_spec, not raised.
    """

    gamma: float
    epsilon: float
    grid: Grid1D
    u0: ScalarField
    g: BoundarySignal
    t_final: float
    cutoff_width: float = 1.0
    relaxed_gamma: bool = False

    def __post_init__(self):
        if self.u0.grid != self.grid:
            raise ValueError("u0 lives on a different grid")
        if not np.isfinite(self.gamma):
            raise ValueError("gamma must be finite")
        if not (self.epsilon >= 0.0) or not np.isfinite(self.epsilon):
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if not (self.t_final > 0.0):
            raise ValueError(f"final time must be positive, got {self.t_final}")
        if not (0.0 < self.cutoff_width <= self.grid.length / 2.0):
            raise ValueError("cutoff width must lie in (0, L/2]")


@dataclass(frozen=True)
class SpecAudit:
    """Outcome of validate_spec: violated assumptions plus measured bounds."""

    violations: list[str]
    measured: dict[str, float]

    @property
    def admissible(self) -> bool:
        return not self.violations


def validate_spec(spec: ProblemSpec) -> SpecAudit:
    """Report every violated model assumption; an empty list means admissible.

    Checked: gamma > 0 (or >= 0 under the relaxed flag), epsilon in [0, 1),
    g(0) = 0 with finite Lipschitz/sup bounds, u0 bounded and integrable,
    u0 supported in [0, L/2] (truncation validity), and decay of the
    primitive of u0 at x = L, without which the primitive is not square
    integrable on the half-line.  Measured bounds are reported rather than
    compared against any fixed constant.
    """
    violations: list[str] = []
    u0 = spec.u0.values
    grid = spec.grid
    dx = grid.dx

    if spec.relaxed_gamma:
        if spec.gamma < 0.0:
            violations.append("gamma < 0")
    elif spec.gamma <= 0.0:
        violations.append("gamma <= 0")

    if not (0.0 <= spec.epsilon < 1.0):
        violations.append("epsilon not in [0, 1)")

    if spec.g.values[0] != 0.0:  # unreachable through BoundarySignal, kept for raw data
        violations.append("g(0) != 0")

    linf_u0 = float(np.abs(u0).max())
    l1_u0 = float(np.abs(u0).sum() * dx)

    half = grid.centers > grid.length / 2.0
    tail_amp = float(np.abs(u0[half]).max()) if half.any() else 0.0
    if tail_amp > 1e-10 * (1.0 + linf_u0):
        violations.append("u0 not supported in [0, L/2]")

    # primitive of u0; its value at x=L is the total mass, which must vanish
    # for the primitive to be square integrable on the half-line (tolerance
    # absorbs the truncated tail of data that decay but never hit zero)
    p0 = dx * (np.cumsum(u0) - 0.5 * u0)
    p0_end = float(u0.sum() * dx)
    l2_p0 = float(np.sqrt((p0**2).sum() * dx))
    if abs(p0_end) > 1e-6 * (1.0 + l1_u0):
        violations.append("primitive of u0 not square-integrable (nonzero total mass)")

    measured = {
        "linf_u0": linf_u0,
        "l1_u0": l1_u0,
        "l2_u0": float(np.sqrt((u0**2).sum() * dx)),
        "l2_P0": l2_p0,
        "abs_P0_at_L": abs(p0_end),
        "lip_g": spec.g.lip,
        "sup_g": spec.g.sup,
    }
    return SpecAudit(violations, measured)


# --------------------------------------------------------------------------
# trajectories
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    """Time-stamped (u, P) fields with boundary trace and scalar diagnostics.

    times[0] must be 0 and stamps strictly increase.  u and P are (K, N)
    arrays sharing one grid; trace and g_values are per-stamp scalars; each
    diagnostics entry is a length-K series.
    """

    grid: Grid1D
    epsilon: float
    gamma: float
    times: np.ndarray
    u: np.ndarray
    P: np.ndarray
    trace: np.ndarray
    g_values: np.ndarray
    diagnostics: dict[str, np.ndarray]

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        if times.ndim != 1 or len(times) < 1:
            raise ValueError("trajectory needs at least one stamp")
        if times[0] != 0.0:
            raise ValueError("first stamp must be t=0")
        if len(times) > 1 and not np.all(np.diff(times) > 0.0):
            raise ValueError("stamps must strictly increase")
        k, n = len(times), self.grid.cell_count
        for name in ("u", "P"):
            a = np.asarray(getattr(self, name), dtype=np.float64)
            if a.shape != (k, n):
                raise ValueError(f"{name} has shape {a.shape}, expected {(k, n)}")
            if not np.all(np.isfinite(a)):
                raise ValueError(f"{name} contains non-finite values")
            object.__setattr__(self, name, _readonly(a))
        for name in ("trace", "g_values"):
            a = np.asarray(getattr(self, name), dtype=np.float64)
            if a.shape != (k,):
                raise ValueError(f"{name} must have one value per stamp")
            object.__setattr__(self, name, _readonly(a))
        object.__setattr__(self, "times", _readonly(times))
        diags = {}
        for key, series in self.diagnostics.items():
            a = np.asarray(series, dtype=np.float64)
            if a.shape != (k,):
                raise ValueError(f"diagnostic {key!r} must have one value per stamp")
            diags[key] = _readonly(a)
        object.__setattr__(self, "diagnostics", diags)

    @property
    def n_stamps(self) -> int:
        return len(self.times)

    def u_field(self, k: int) -> ScalarField:
        return ScalarField(self.grid, self.u[k])

    def p_field(self, k: int) -> ScalarField:
        return ScalarField(self.grid, self.P[k])
