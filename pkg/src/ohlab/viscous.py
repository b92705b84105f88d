"""Vanishing-viscosity solver: u_t + u u_x = gamma P + eps u_xx by method of lines.

Space discretisation is conservative local Lax-Friedrichs for the u^2/2 flux
plus a centred second difference for the diffusion; the nonlocal source
gamma P is evaluated pointwise from a fresh regularised elliptic solve at
every Runge-Kutta stage (a stale P silently breaks every audit downstream,
so staleness is simply not representable here).  Time integration is
explicit SSP-RK2 (Heun); strong-stability preservation keeps the entropy
audit meaningful, since each stage is a convex combination of forward-Euler
steps.

Boundaries: the left ghost cell carries g(t) exactly at each stage
evaluation; the right ghost copies the last cell (zero gradient), which is
valid only while the solution stays negligible near x = L.  A guard aborts
the run once that assumption fails.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ohlab import elliptic
from ohlab.core import (
    BlowUpError,
    CutoffChi,
    ProblemSpec,
    ScalarField,
    StepFailureError,
    Trajectory,
    TruncationGuardError,
    make_cutoff,
)

DT_FLOOR = 1e-12


def cfl_dt(u: ScalarField, eps: float, dx: float, c_cfl: float) -> float:
    """Stable explicit step: c_cfl * min(dx/max|u|, dx^2/(2 eps)).

    The convective bound uses max(|u|_inf, 1e-12) so a rest state still
    yields a finite positive step; the diffusive bound is omitted for eps=0.
    """
    if not (dx > 0.0):
        raise ValueError("dx must be positive")
    speed = max(float(np.abs(u.values).max()), 1e-12)
    dt = dx / speed
    if eps > 0.0:
        dt = min(dt, dx**2 / (2.0 * eps))
    return c_cfl * dt


def llf_flux_values(ul: np.ndarray, ur: np.ndarray) -> np.ndarray:
    """Local Lax-Friedrichs flux for f(u) = u^2/2 with interface max speed."""
    alpha = np.maximum(np.abs(ul), np.abs(ur))
    return 0.25 * (ul**2 + ur**2) - 0.5 * alpha * (ur - ul)


def rhs_values(
    u: np.ndarray,
    g_value: float,
    dx: float,
    eps: float,
    gamma: float,
    p: np.ndarray,
) -> np.ndarray:
    """Semi-discrete time derivative with an injected source field p."""
    ue = np.empty(len(u) + 2)
    ue[0] = g_value
    ue[1:-1] = u
    ue[-1] = u[-1]
    flux = llf_flux_values(ue[:-1], ue[1:])
    out = -(flux[1:] - flux[:-1]) / dx
    if eps > 0.0:
        out += eps * (ue[:-2] - 2.0 * ue[1:-1] + ue[2:]) / dx**2
    if gamma != 0.0:
        out += gamma * p
    return out


@dataclass(frozen=True)
class ViscousState:
    """Solver state at one instant: u with its synchronized elliptic solve."""

    t: float
    u: ScalarField
    P: elliptic.EllipticSolution
    step: int


class ViscousSolver:
    """Owns one run of the regularised problem; states are never shared."""

    def __init__(
        self,
        spec: ProblemSpec,
        c_cfl: float = 0.4,
        tail_guard_rel: float = 1e-6,
        trace_order: int = 2,
    ):
        if not (spec.epsilon > 0.0):
            raise ValueError("viscous solver needs epsilon > 0")
        if not (0.0 < c_cfl <= 1.0):
            raise ValueError("c_cfl must lie in (0, 1]")
        self.spec = spec
        self.c_cfl = c_cfl
        self.tail_guard_rel = tail_guard_rel
        self.trace_order = trace_order
        # guard scale includes the boundary datum so g-driven runs with
        # u0 = 0 do not trip on their own inflow
        self._guard_scale = max(float(np.abs(spec.u0.values).max()), spec.g.sup)
        self._tail_cells = max(2, spec.grid.cell_count // 64)

    def initial_state(self) -> ViscousState:
        sol = elliptic.solve_regularized(self.spec.u0, self.spec.epsilon)
        return ViscousState(0.0, self.spec.u0, sol, 0)

    def rhs(self, state: ViscousState, t: float) -> ScalarField:
        """Time derivative of the cell averages at time t for this state."""
        g_value = self.spec.g(t)
        out = rhs_values(
            state.u.values,
            g_value,
            self.spec.grid.dx,
            self.spec.epsilon,
            self.spec.gamma,
            state.P.P.values,
        )
        bad = ~np.isfinite(out)
        if bad.any():
            raise BlowUpError(t, int(np.argmax(bad)))
        return ScalarField(self.spec.grid, out)

    # -- internal array-level stepping ------------------------------------

    def _stage(self, u: np.ndarray, t: float) -> np.ndarray:
        p, _, _ = elliptic.solve_values(u, self.spec.grid.dx, self.spec.epsilon)
        out = rhs_values(
            u, self.spec.g(t), self.spec.grid.dx, self.spec.epsilon, self.spec.gamma, p
        )
        return out

    def _check_finite(self, u: np.ndarray, t: float) -> None:
        bad = ~np.isfinite(u)
        if bad.any():
            raise BlowUpError(t, int(np.argmax(bad)))

    def _check_guard(self, u: np.ndarray, t: float) -> None:
        tail = float(np.abs(u[-self._tail_cells:]).max())
        threshold = self.tail_guard_rel * self._guard_scale
        if self._guard_scale > 0.0 and tail > threshold:
            raise TruncationGuardError(t, tail, threshold)

    def run(self, stamps: np.ndarray) -> Trajectory:
        spec = self.spec
        dx = spec.grid.dx
        eps = spec.epsilon
        stamps = _validate_stamps(stamps, spec.t_final)
        u = spec.u0.values.copy()
        t = 0.0
        steps = 0
        records = []
        for target in stamps:
            while t < target - 1e-13:
                g_now = spec.g(t)
                speed = max(float(np.abs(u).max()), abs(g_now), 1e-12)
                dt = self.c_cfl * min(dx / speed, dx**2 / (2.0 * eps))
                dt = min(dt, target - t)
                if dt < DT_FLOOR:
                    raise StepFailureError(f"dt underflow at t={t:.6g}: dt={dt:.3e}")
                k1 = self._stage(u, t)
                u1 = u + dt * k1
                self._check_finite(u1, t + dt)
                k2 = self._stage(u1, t + dt)
                u = 0.5 * u + 0.5 * (u1 + dt * k2)
                self._check_finite(u, t + dt)
                t += dt
                steps += 1
                self._check_guard(u, t)
            records.append(self._record(u, target, steps))
        return _records_to_trajectory(spec, stamps, records, self.trace_order)

    def _record(self, u: np.ndarray, t: float, steps: int) -> dict:
        spec = self.spec
        p, dxP0, _ = elliptic.solve_values(u, spec.grid.dx, spec.epsilon)
        return dict(u=u.copy(), p=p, dxP0=dxP0, t=t, g=spec.g(t), steps=steps)


def _validate_stamps(stamps: np.ndarray, t_final: float) -> np.ndarray:
    stamps = np.asarray(stamps, dtype=np.float64)
    if stamps.ndim != 1 or len(stamps) < 1:
        raise ValueError("need at least one output stamp")
    if stamps[0] != 0.0:
        raise ValueError("first output stamp must be t=0")
    if len(stamps) > 1 and not np.all(np.diff(stamps) > 0):
        raise ValueError("output stamps must strictly increase")
    if stamps[-1] > t_final + 1e-12:
        raise ValueError("output stamps exceed the final time")
    return stamps


def one_sided_gradient(u: np.ndarray, boundary_value: float, dx: float) -> float:
    """d/dx u at x=0 from the quadratic through (0, g) and the first two cells."""
    return float((9.0 * u[0] - u[1] - 8.0 * boundary_value) / (3.0 * dx))


def extrapolate_trace(u: np.ndarray, order: int = 2) -> float:
    """Boundary value of u at x=0 from the first cells (linear or quadratic)."""
    if order == 2:
        return float(1.5 * u[0] - 0.5 * u[1])
    if order == 3:
        return float((15.0 * u[0] - 10.0 * u[1] + 3.0 * u[2]) / 8.0)
    raise ValueError(f"unsupported trace extrapolation order {order}")


def _records_to_trajectory(
    spec: ProblemSpec, stamps: np.ndarray, records: list[dict], trace_order: int
) -> Trajectory:
    grid = spec.grid
    dx = grid.dx
    eps = spec.epsilon
    k = len(records)
    n = grid.cell_count
    u_all = np.empty((k, n))
    p_all = np.empty((k, n))
    trace = np.empty(k)
    g_vals = np.empty(k)
    keys = (
        "l1_u l2_u linf_u l1_P l2_P linf_P dxP0 eps_dxP0 dxu0 eps_dxu0 "
        "int_P l2_v mass u_end dxu_end tail_max steps"
    ).split()
    diags = {key: np.empty(k) for key in keys}
    chi = make_cutoff(grid, spec.cutoff_width) if spec.cutoff_width > 0.0 else None
    tail_cells = max(2, n // 64)
    for i, rec in enumerate(records):
        u, p = rec["u"], rec["p"]
        u_all[i] = u
        p_all[i] = p
        trace[i] = extrapolate_trace(u, trace_order)
        g_vals[i] = rec["g"]
        diags["l1_u"][i] = np.abs(u).sum() * dx
        diags["l2_u"][i] = np.sqrt((u**2).sum() * dx)
        diags["linf_u"][i] = np.abs(u).max()
        diags["l1_P"][i] = np.abs(p).sum() * dx
        diags["l2_P"][i] = np.sqrt((p**2).sum() * dx)
        diags["linf_P"][i] = np.abs(p).max()
        diags["dxP0"][i] = rec["dxP0"]
        diags["eps_dxP0"][i] = eps * rec["dxP0"]
        dxu0 = one_sided_gradient(u, rec["g"], dx)
        diags["dxu0"][i] = dxu0
        diags["eps_dxu0"][i] = eps * dxu0
        diags["int_P"][i] = p.sum() * dx
        if chi is not None:
            v = u - rec["g"] * chi.chi
            diags["l2_v"][i] = np.sqrt((v**2).sum() * dx)
        else:
            diags["l2_v"][i] = diags["l2_u"][i]
        diags["mass"][i] = u.sum() * dx
        diags["u_end"][i] = u[-1]  # zero-gradient ghost puts this value at x=L
        diags["dxu_end"][i] = (u[-1] - u[-2]) / dx
        diags["tail_max"][i] = np.abs(u[-tail_cells:]).max()
        diags["steps"][i] = rec["steps"]
    return Trajectory(
        grid=grid,
        epsilon=eps,
        gamma=spec.gamma,
        times=stamps,
        u=u_all,
        P=p_all,
        trace=trace,
        g_values=g_vals,
        diagnostics=diags,
    )


def run_viscous(
    spec: ProblemSpec,
    stamps: np.ndarray,
    c_cfl: float = 0.4,
    tail_guard_rel: float = 1e-6,
    trace_order: int = 2,
) -> Trajectory:
    """March the regularised problem and record the requested stamps."""
    solver = ViscousSolver(spec, c_cfl=c_cfl, tail_guard_rel=tail_guard_rel,
                           trace_order=trace_order)
    return solver.run(stamps)


def homogenized_view(state: ViscousState, chi: CutoffChi, g_value: float) -> ScalarField:
    """The substituted unknown v = u - g chi, vanishing at the boundary."""
    return ScalarField(state.u.grid, state.u.values - g_value * chi.chi)
