"""Audits of computed trajectories against the model's defining inequalities.

Each audit produces a :class:`Check` (measured value, bound, tolerance,
pass flag, witness location) and checks are collected into an
:class:`AuditReport`.  Audits never mutate trajectories and may run
concurrently on distinct inputs.

The residual tolerances follow the law kappa * (dx + dt_out): first-order
schemes shed O(dx) of numerical entropy near shocks and the stamped fields
subsample the true dynamics at dt_out, so both scales enter.  kappa itself
is calibrated once on an entropy-shock run and then frozen in config.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ohlab import elliptic
from ohlab.core import ProblemSpec, Trajectory
from ohlab.inviscid import flux_values


# --------------------------------------------------------------------------
# report plumbing
# --------------------------------------------------------------------------

@dataclass
class Check:
    """One named audit outcome."""

    name: str
    value: float
    bound: float
    tol: float
    passed: bool
    location: dict | None = None
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "bound": self.bound,
            "tol": self.tol,
            "passed": self.passed,
            "location": self.location,
            "meta": self.meta,
        }


@dataclass
class AuditReport:
    """Ordered collection of checks with grid/refinement metadata."""

    checks: list[Check] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, check: Check) -> None:
        self.checks.append(check)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "metadata": self.metadata,
            "all_passed": self.all_passed,
            "checks": [c.to_dict() for c in self.checks],
        }


# --------------------------------------------------------------------------
# Kruzhkov constants
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class KruzhkovConstantGrid:
    """Finite grid of entropy constants spanning [-m, m].

    m must dominate the solution range plus the boundary datum, so the
    family |u - c| over the grid generates every convex entropy that
    matters for the audit; spacing never exceeds delta_c.
    """

    values: np.ndarray
    m: float
    delta_c: float

    @classmethod
    def from_bound(cls, m: float, delta_c: float | None = None) -> "KruzhkovConstantGrid":
        if not (m > 0.0):
            raise ValueError("constant bound must be positive")
        if delta_c is None:
            delta_c = 2.0 * m / 64.0
        n = max(3, int(math.ceil(2.0 * m / delta_c)) + 1)
        return cls(np.linspace(-m, m, n), float(m), float(delta_c))

    @classmethod
    def for_trajectory(
        cls, traj: Trajectory, margin: float = 0.5, delta_c: float | None = None
    ) -> "KruzhkovConstantGrid":
        m = float(np.abs(traj.u).max() + np.abs(traj.g_values).max() + margin)
        return cls.from_bound(m, delta_c)


# --------------------------------------------------------------------------
# entropy residual (interior inequality)
# --------------------------------------------------------------------------

def kruzhkov_numerical_flux(ul: np.ndarray, ur: np.ndarray, c: float) -> np.ndarray:
    """Numerical entropy flux paired with the Godunov scheme.

    Q(a, b; c) = F(a max c, b max c) - F(a min c, b min c) is consistent with
    sgn(u-c)(u^2/2 - c^2/2) and inherits the cell entropy inequality of the
    underlying monotone flux F.
    """
    return flux_values(np.maximum(ul, c), np.maximum(ur, c)) - flux_values(
        np.minimum(ul, c), np.minimum(ur, c)
    )


def _hat_smooth(a: np.ndarray) -> np.ndarray:
    """Test a residual field against unit-mass product hats (1/4, 1/2, 1/4)."""
    p = np.pad(a, 1, mode="edge")
    b = 0.25 * p[:-2, 1:-1] + 0.5 * p[1:-1, 1:-1] + 0.25 * p[2:, 1:-1]
    return 0.25 * b[:, :-2] + 0.5 * b[:, 1:-1] + 0.25 * b[:, 2:]


def _uniform_dt(times: np.ndarray) -> float:
    dts = np.diff(times)
    if len(dts) == 0:
        raise ValueError("entropy residual needs at least two stamps")
    dt = float(dts[0])
    if np.abs(dts - dt).max() > 1e-9 * max(dt, 1.0):
        raise ValueError("entropy residual requires uniform output stamps")
    return dt


def entropy_residual(
    traj: Trajectory,
    cgrid: KruzhkovConstantGrid,
    kappa: float,
    tol: float | None = None,
) -> Check:
    """Positive part of the discrete Kruzhkov residual, cell-integrated.

    For each constant c the residual on stamp interval k and cell i is

        R = D_t |u - c| + D_x [Q(u; c)] - gamma sgn(u - c) P,

    with forward time differences, interface entropy-flux differences and
    the source evaluated at the left stamp.  R is tested against nonnegative
    hat functions, scaled by the cell measure dx*dt_out, and the worst
    positive value over (stamp, cell, c) is compared to kappa*(dx + dt_out).
    An entropy-respecting trajectory only shows the O(dx) positive part a
    moving shock sheds into the cells it sweeps; a genuine entropy violation
    contributes O(dt_out) and lands far above the tolerance.
    """
    dt_out = _uniform_dt(traj.times)
    dx = traj.grid.dx
    u = traj.u
    p = traj.P
    gamma = traj.gamma
    bound = kappa * (dx + dt_out) if tol is None else tol

    worst = 0.0
    where = None
    for c in cgrid.values:
        eta = np.abs(u - float(c))
        dt_term = (eta[1:] - eta[:-1]) / dt_out
        uk = u[:-1]
        q = kruzhkov_numerical_flux(uk[:, :-1], uk[:, 1:], float(c))
        dx_term = (q[:, 1:] - q[:, :-1]) / dx
        r = dt_term[:, 1:-1] + dx_term
        if gamma != 0.0:
            r = r - gamma * np.sign(uk[:, 1:-1] - float(c)) * p[:-1, 1:-1]
        tested = _hat_smooth(r) * (dx * dt_out)
        peak = float(tested.max())
        if peak > worst:
            worst = peak
            k, i = np.unravel_index(int(np.argmax(tested)), tested.shape)
            where = {
                "t": float(traj.times[k]),
                "x": float(traj.grid.centers[i + 1]),
                "c": float(c),
            }
    return Check(
        name="entropy_residual",
        value=worst,
        bound=bound,
        tol=bound,
        passed=worst <= bound,
        location=where,
        meta={"kappa": kappa, "dx": dx, "dt_out": dt_out, "n_constants": len(cgrid.values)},
    )


# --------------------------------------------------------------------------
# boundary admissibility
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TraceSeries:
    """Boundary trace paired with the datum at matching stamps."""

    times: np.ndarray
    trace: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        tr = np.asarray(self.trace, dtype=np.float64)
        g = np.asarray(self.g, dtype=np.float64)
        if not (len(t) == len(tr) == len(g)):
            raise ValueError("trace series lengths disagree")
        if not (np.all(np.isfinite(tr)) and np.all(np.isfinite(g))):
            raise ValueError("trace series contains non-finite values")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "trace", tr)
        object.__setattr__(self, "g", g)

    @classmethod
    def from_trajectory(cls, traj: Trajectory) -> "TraceSeries":
        return cls(traj.times, traj.trace, traj.g_values)


def _interval_grid(lo: float, hi: float, delta_c: float) -> np.ndarray:
    if hi <= lo:
        return np.array([lo])
    n = max(2, int(math.ceil((hi - lo) / delta_c)) + 1)
    return np.linspace(lo, hi, n)


def bln_residual(tr: TraceSeries, delta_c: float, tol: float = 1e-6) -> Check:
    """Boundary admissibility residual.

    Per stamp, minimises sgn(utau - g) * (utau^2/2 - c^2/2) over a delta_c
    grid of the closed interval between utau and g, endpoints inserted
    exactly so the minimum cannot be missed by quantisation.  The most
    negative minimum across stamps is reported; an admissible trace keeps
    it at zero up to tolerance.
    """
    worst = 0.0
    where = None
    for k in range(len(tr.times)):
        utau = float(tr.trace[k])
        g = float(tr.g[k])
        cs = _interval_grid(min(utau, g), max(utau, g), delta_c)
        s = np.sign(utau - g)
        vals = s * (0.5 * utau**2 - 0.5 * cs**2)
        v = float(vals.min())
        if v < worst:
            worst = v
            where = {"t": float(tr.times[k]), "c": float(cs[int(np.argmin(vals))])}
    return Check(
        name="bln_residual",
        value=worst,
        bound=-tol,
        tol=tol,
        passed=worst >= -tol,
        location=where,
        meta={"delta_c": delta_c},
    )


def boundary_entropy_density_min(tr: TraceSeries, cgrid: KruzhkovConstantGrid) -> float:
    """Min over stamps and constants of the two-sided boundary density.

    D(c) = [sgn(g - c) - sgn(utau - c)] * (utau^2/2 - c^2/2) is the
    density multiplying boundary-concentrated test functions in the
    entropy-solution definition; admissible vanishing-viscosity traces
    keep it nonnegative for every c.
    """
    worst = 0.0
    cs = cgrid.values
    for k in range(len(tr.times)):
        utau = float(tr.trace[k])
        g = float(tr.g[k])
        d = (np.sign(g - cs) - np.sign(utau - cs)) * (0.5 * utau**2 - 0.5 * cs**2)
        worst = min(worst, float(d.min()))
    return worst


def bln_product_min(tr: TraceSeries, cgrid: KruzhkovConstantGrid) -> float:
    """Min over stamps and constants of (utau^2/2 - c^2/2)(sgn(utau-c)+sgn(c)).

    Nonnegative whenever the trace is nonnegative; for negative traces the
    expression dips below zero even at admissible stamps, so callers should
    only assert it on runs with nonnegative boundary behaviour.
    """
    worst = np.inf
    cs = cgrid.values
    for k in range(len(tr.times)):
        utau = float(tr.trace[k])
        vals = (0.5 * utau**2 - 0.5 * cs**2) * (np.sign(utau - cs) + np.sign(cs))
        worst = min(worst, float(vals.min()))
    return worst


# --------------------------------------------------------------------------
# a priori estimate suite
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AprioriTolerances:
    mass: float = 1e-3
    l2_coeff: float = 2.0          # tol = coeff * dx * (1 + |u|_L2^2)
    sup_u: float = 1e-6
    grad_coeff: float = 10.0       # tol = coeff * dx * (1 + |u|_L2)
    p_sweep_factor: float = 2.0    # max/median across the eps sweep
    growth: float = 1.0            # slack on the affine fit of log |v|^2


_REQUIRED_DIAGS = ("dxP0", "linf_u", "linf_P", "l2_u", "l2_v", "int_P")


def apriori_suite(
    traj: Trajectory,
    spec: ProblemSpec | None = None,
    tols: AprioriTolerances | None = None,
    sweep_p_linf: list[float] | None = None,
) -> AuditReport:
    """Audit a viscous trajectory against the a priori estimate family.

    Per stamp: the L2 identity defect and the mass identity defect of each
    stored elliptic solve, the comparison-principle sup bound on u, and the
    sqrt(eps)-weighted gradient bound on P.  Optionally, given the sup norms
    of P from a whole eps-sweep, checks that the family is bounded
    independently of eps (max within a factor of the sweep median).  The
    affine-fit growth check on log |v|^2 guards against super-exponential
    L2 growth.
    """
    if not (traj.epsilon > 0.0):
        raise ValueError("a priori suite audits viscous trajectories (epsilon > 0)")
    for key in _REQUIRED_DIAGS:
        if key not in traj.diagnostics:
            raise ValueError(f"trajectory lacks diagnostic {key!r}")
    if spec is not None and (spec.epsilon != traj.epsilon or spec.gamma != traj.gamma):
        raise ValueError("trajectory does not belong to the given problem")
    tols = tols or AprioriTolerances()
    dx = traj.grid.dx
    eps = traj.epsilon
    gamma = traj.gamma
    k_stamps = traj.n_stamps
    report = AuditReport(metadata={
        "epsilon": eps, "gamma": gamma, "dx": dx, "n_stamps": k_stamps,
    })

    dxP0 = traj.diagnostics["dxP0"]
    l2_u = traj.diagnostics["l2_u"]
    linf_u = traj.diagnostics["linf_u"]
    linf_p = traj.diagnostics["linf_P"]

    # L2 identity per stamp
    worst_l2 = 0.0
    loc_l2 = None
    for k in range(k_stamps):
        d = abs(elliptic.l2_identity_defect(traj.u[k], traj.P[k], float(dxP0[k]), dx, eps))
        if d > worst_l2:
            worst_l2, loc_l2 = d, {"t": float(traj.times[k])}
    tol_l2 = tols.l2_coeff * dx * (1.0 + float((l2_u**2).max()))
    report.add(Check("l2_identity", worst_l2, tol_l2, tol_l2, worst_l2 <= tol_l2, loc_l2))

    # mass identity per stamp
    mass = traj.u.sum(axis=1) * dx - eps * dxP0
    k_worst = int(np.argmax(np.abs(mass)))
    worst_mass = float(np.abs(mass[k_worst]))
    report.add(Check(
        "mass_identity", worst_mass, tols.mass, tols.mass,
        worst_mass <= tols.mass, {"t": float(traj.times[k_worst])},
    ))

    # sup bound via the comparison principle, with the running max of |P|
    run_max_p = np.maximum.accumulate(linf_p)
    bound = linf_u[0] + gamma * run_max_p * traj.times
    viol = linf_u - bound
    k_worst = int(np.argmax(viol))
    worst_sup = float(viol[k_worst])
    report.add(Check(
        "sup_bound_u", worst_sup, tols.sup_u, tols.sup_u,
        worst_sup <= tols.sup_u, {"t": float(traj.times[k_worst])},
    ))

    # sqrt(eps) * sup |dP/dx| <= |u|_L2 (+ discretisation slack)
    worst_grad = -np.inf
    loc_grad = None
    for k in range(k_stamps):
        q = elliptic.interface_gradients(traj.P[k], float(dxP0[k]), dx)
        v = math.sqrt(eps) * float(np.abs(q).max()) - float(l2_u[k])
        if v > worst_grad:
            worst_grad, loc_grad = v, {"t": float(traj.times[k])}
    tol_grad = tols.grad_coeff * dx * (1.0 + float(l2_u.max()))
    report.add(Check(
        "sqrt_eps_gradient_bound", worst_grad, tol_grad, tol_grad,
        worst_grad <= tol_grad, loc_grad,
    ))

    # eps-independence of sup |P| across a sweep
    if sweep_p_linf is not None:
        vals = np.asarray(sweep_p_linf, dtype=np.float64)
        if len(vals) < 2:
            raise ValueError("sweep check needs sup |P| from at least two runs")
        med = float(np.median(vals))
        ratio = float(vals.max() / med) if med > 0 else (0.0 if vals.max() == 0 else np.inf)
        report.add(Check(
            "p_sup_eps_independent", ratio, tols.p_sweep_factor, tols.p_sweep_factor,
            ratio <= tols.p_sweep_factor, None, {"sweep_linf_P": [float(v) for v in vals]},
        ))

    # affine-in-t bound on log |v|^2: rules out super-exponential growth
    if k_stamps >= 3:
        y = np.log(traj.diagnostics["l2_v"] ** 2 + 1e-30)
        a = np.polyfit(traj.times, y, 1)
        resid = y - np.polyval(a, traj.times)
        worst_growth = float(resid.max())
        report.add(Check(
            "l2_growth_affine_log", worst_growth, tols.growth, tols.growth,
            worst_growth <= tols.growth, None,
            {"fit_slope": float(a[0]), "fit_intercept": float(a[1])},
        ))
    return report


def f_limit_defects(traj: Trajectory) -> np.ndarray:
    """Defect series of the integral-limit identity for F(t, x) = int_0^x P.

    Compares the recorded int_0^L P dx with
    (eps/gamma) d/dt[dxP0] + (eps/gamma) dxu0 - g^2/(2 gamma)
    at interior stamps, the time derivative taken by centred differences of
    the stored boundary-derivative series.

    The identity presumes the solution keeps its primitive decaying at
    infinity; on the truncated domain with gamma > 0 the nonlocal source
    breaks that (the whole tail fills in), so this defect is a *measurement*
    of how far the run sits from the half-line idealisation, not a
    convergent quantity.  The finite-domain balance that does converge is
    :func:`integral_balance_defects`.
    """
    if traj.gamma == 0.0:
        raise ValueError("the F-limit identity needs gamma != 0")
    if traj.n_stamps < 3:
        raise ValueError("need at least three stamps for centred differences")
    eps = traj.epsilon
    gamma = traj.gamma
    t = traj.times
    dxP0 = traj.diagnostics["dxP0"]
    dxu0 = traj.diagnostics["dxu0"]
    int_p = traj.diagnostics["int_P"]
    g = traj.g_values
    ddt = (dxP0[2:] - dxP0[:-2]) / (t[2:] - t[:-2])
    rhs = (eps / gamma) * ddt + (eps / gamma) * dxu0[1:-1] - g[1:-1] ** 2 / (2.0 * gamma)
    return int_p[1:-1] - rhs


def integral_balance_defects(traj: Trajectory) -> np.ndarray:
    """Finite-domain form of the integrated u-equation, per interior stamp.

    d/dt int u + u(L)^2/2 - g^2/2 - eps du/dx(L) + eps du/dx(0)
    = gamma int_0^L P dx

    holds on the truncated domain without any decay assumption; its defect
    shrinks under simultaneous grid and stamp refinement.
    """
    if traj.n_stamps < 3:
        raise ValueError("need at least three stamps for centred differences")
    eps = traj.epsilon
    t = traj.times
    d = traj.diagnostics
    dm = (d["mass"][2:] - d["mass"][:-2]) / (t[2:] - t[:-2])
    lhs = (
        dm
        + 0.5 * d["u_end"][1:-1] ** 2
        - 0.5 * traj.g_values[1:-1] ** 2
        - eps * d["dxu_end"][1:-1]
        + eps * d["dxu0"][1:-1]
    )
    return lhs - traj.gamma * d["int_P"][1:-1]


# --------------------------------------------------------------------------
# L1 stability in the finite-speed cone
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class StabilityCone:
    """Space-time trapezoid with slope C(T) = sup(|u| + |v|).

    interval(s) = [0, R + C(T)(t_final - s)] shrinks to [0, R] at the final
    time, so information outside the base cannot influence the comparison.
    """

    r: float
    t_final: float
    speed: float

    def __post_init__(self):
        if not (self.r > 0.0 and self.t_final > 0.0 and self.speed >= 0.0):
            raise ValueError("cone needs R > 0, T > 0 and speed >= 0")

    def interval(self, s: float) -> tuple[float, float]:
        return (0.0, self.r + self.speed * (self.t_final - s))


def _l1_on(values: np.ndarray, centers: np.ndarray, dx: float, upto: float) -> float:
    mask = centers <= upto
    return float(np.abs(values[mask]).sum() * dx)


def stability_compare(
    traj_u: Trajectory,
    traj_v: Trajectory,
    r: float,
    tol: float = 0.05,
    contraction: bool = False,
) -> Check:
    """Check the L1 stability inequality between two runs with one datum.

    With C(T) the sum of the two sup norms over the whole runs, each stamp t
    must satisfy |u(t)-v(t)|_{L1(0,R)} <= e^{C t} |u0-v0|_{L1(0, R+C t)}
    up to the relative tolerance; the worst ratio is reported.  With
    contraction=True the factor e^{C t} is dropped (plain L1 contraction,
    meaningful for gamma = 0 runs).
    """
    if traj_u.grid != traj_v.grid:
        raise ValueError("stability comparison needs a common grid")
    if traj_u.n_stamps != traj_v.n_stamps or np.abs(traj_u.times - traj_v.times).max() > 1e-12:
        raise ValueError("stability comparison needs matching stamps")
    if np.abs(traj_u.g_values - traj_v.g_values).max() > 1e-12:
        raise ValueError("stability comparison requires identical boundary data")
    if not (0.0 < r <= traj_u.grid.length):
        raise ValueError("comparison radius must lie inside the domain")
    grid = traj_u.grid
    dx = grid.dx
    centers = grid.centers
    speed = float(np.abs(traj_u.u).max() + np.abs(traj_v.u).max())
    t_final = float(traj_u.times[-1])
    cone = StabilityCone(r, t_final, speed)
    w0 = traj_u.u[0] - traj_v.u[0]
    worst = 0.0
    where = None
    rows = []
    for k in range(traj_u.n_stamps):
        t = float(traj_u.times[k])
        lhs = _l1_on(traj_u.u[k] - traj_v.u[k], centers, dx, r)
        base = _l1_on(w0, centers, dx, r + speed * t)
        rhs = base if contraction else math.exp(speed * t) * base
        if rhs == 0.0:
            ratio = 0.0 if lhs == 0.0 else math.inf
        else:
            ratio = lhs / rhs
        rows.append({"t": t, "lhs": lhs, "rhs": rhs, "ratio": ratio})
        if ratio > worst:
            worst = ratio
            where = {"t": t}
    return Check(
        name="l1_contraction" if contraction else "l1_stability_cone",
        value=worst,
        bound=1.0 + tol,
        tol=tol,
        passed=worst <= 1.0 + tol,
        location=where,
        meta={"speed": cone.speed, "r": r, "rows": rows},
    )
