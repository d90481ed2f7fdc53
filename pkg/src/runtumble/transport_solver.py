"""Upwind SSP-RK2 integration of the moving-frame perturbation system.

Two modes are supported. ``nonlinear`` advects ``u`` at speed ``1 - xdot`` and
``v`` at speed ``-(1 + xdot)`` with ``xdot`` read from the current state.
``linearized`` advects at unit speeds and uses the linearized peak velocity.
A prescribed ``xdot`` path can replace the state-dependent velocity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .chemo_field import (
    PerturbativeRegimeLost,
    check_single_peak,
    density,
    peak_velocity_arrays,
    peak_velocity_lin_arrays,
    solve_chemo,
)
from .core_types import Grid, ModelParams, PairField

MODES = ("nonlinear", "linearized")
SPEED_LIMIT = 0.9
VELOCITY_RULES = ("centering", "formula")


class SolverAbort(RuntimeError):
    """Time stepping stopped; ``kind`` is one of speed-limit, blow-up, H1, regime."""

    def __init__(self, kind: str, message: str, state: "SolverState | None" = None):
        super().__init__(f"{kind}: {message}")
        self.kind = kind
        self.state = state


@dataclass(frozen=True, eq=False)
class SolverState:
    W: PairField
    t: float = 0.0
    x: float = 0.0
    xdot_last: float = 0.0
    mode: str = "nonlinear"
    steps: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")


@dataclass(frozen=True)
class StepConfig:
    cfl: float = 0.4
    t_final: float = 10.0
    diag_stride: int = 1
    watchdog_stride: int = 10
    delta: float = 0.1
    snapshots: tuple[float, ...] = ()
    keep_history: bool = False
    max_steps: int | None = None
    velocity: str = "centering"

    def __post_init__(self):
        if not (0.0 < self.cfl <= 1.0):
            raise ValueError("cfl must be in (0,1]")
        if self.t_final < 0:
            raise ValueError("t_final must be >= 0")
        if self.diag_stride < 1 or self.watchdog_stride < 1:
            raise ValueError("strides must be >= 1")
        if self.velocity not in VELOCITY_RULES:
            raise ValueError(f"velocity must be one of {VELOCITY_RULES}")


def rhs_nonlinear(W: PairField, xdot: float, params: ModelParams) -> PairField:
    """Non-advective tendency of the nonlinear moving-frame system."""
    du, dv = _source(W.u.values, W.v.values, xdot, params, W.grid, "nonlinear")
    return PairField.from_arrays(du, dv, W.grid)


def rhs_linear(W: PairField, xdot_lin: float, params: ModelParams) -> PairField:
    """Non-advective tendency of the linearized system."""
    du, dv = _source(W.u.values, W.v.values, xdot_lin, params, W.grid, "linearized")
    return PairField.from_arrays(du, dv, W.grid)


def _source(u, v, xdot, params, grid, mode):
    chi = params.chi
    s = grid.sign
    d = u - v
    drift = 2.0 * xdot * chi * s
    if mode == "nonlinear":
        du = -drift * u - (1.0 - chi * s) * d - drift
        dv = -drift * v + (1.0 + chi * s) * d - drift
    else:
        du = -drift - (1.0 - chi * s) * d
        dv = -drift + (1.0 + chi * s) * d
    return du, dv


def full_tendency(u, v, xdot, params: ModelParams, grid: Grid, mode: str):
    """Upwind advection plus source; inflow values are zero."""
    h = grid.h
    a, b = (1.0 - xdot, 1.0 + xdot) if mode == "nonlinear" else (1.0, 1.0)
    du, dv = _source(u, v, xdot, params, grid, mode)
    diff_u = np.empty_like(u)
    diff_u[0] = u[0]
    diff_u[1:] = u[1:] - u[:-1]
    diff_v = np.empty_like(v)
    diff_v[-1] = -v[-1]
    diff_v[:-1] = v[1:] - v[:-1]
    du -= (a / h) * diff_u
    dv += (b / h) * diff_v
    return du, dv


def centering_weights(params: ModelParams, grid: Grid) -> np.ndarray:
    """Weights ``l`` with ``l @ (u + v) = <u_y + v_y>_lam`` for continuous fields.

    Integration by parts gives ``<f'>_lam = (lam^2/2) int sign(y) f e^{-lam|y|}``,
    which, unlike a differenced form, sees the kink sources at the origin.
    """
    return 0.5 * params.lam**2 * grid.h * grid.sign * grid.w_lam


def centering_velocity(u, v, params: ModelParams, grid: Grid, mode: str) -> float:
    """Peak velocity that keeps the discrete centering functional stationary.

    The tendency is affine in ``xdot``; solving ``l @ (du + dv) = 0`` for
    ``xdot`` is the discrete counterpart of the peak-velocity formula.
    """
    ell = centering_weights(params, grid)
    f0u, f0v = full_tendency(u, v, 0.0, params, grid, mode)
    f1u, f1v = full_tendency(u, v, 1.0, params, grid, mode)
    a = float(ell @ (f0u + f0v))
    b = float(ell @ (f1u + f1v)) - a
    b_ref = -4.0 * params.chi * float(ell @ grid.sign)
    if abs(b) < 0.1 * abs(b_ref):
        raise PerturbativeRegimeLost(f"centering coefficient {b:.3g} below 0.1 of its steady value")
    return -a / b


def _velocity(u, v, t, params, grid, mode, path, rule="centering"):
    if path is not None:
        return float(path(t))
    if rule == "centering":
        return centering_velocity(u, v, params, grid, mode)
    if mode == "nonlinear":
        return peak_velocity_arrays(u, v, params, grid)
    return peak_velocity_lin_arrays(u, v, params, grid)


def _check(u, v, xdot, state):
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v)) and math.isfinite(xdot)):
        raise SolverAbort("blow-up", f"non-finite values at t={state.t:.6g}", state)
    if abs(xdot) >= SPEED_LIMIT:
        raise SolverAbort("speed-limit", f"|xdot|={abs(xdot):.3g} >= {SPEED_LIMIT} at t={state.t:.6g}", state)


def step(state: SolverState, params: ModelParams, cfg: StepConfig,
         dt: float | None = None, xdot_path: Callable[[float], float] | None = None) -> SolverState:
    """One SSP-RK2 step; ``dt`` defaults to ``cfl h / (1 + |xdot|)``."""
    grid = state.W.grid
    mode = state.mode
    u, v = state.W.u.values, state.W.v.values
    try:
        x1 = _velocity(u, v, state.t, params, grid, mode, xdot_path, cfg.velocity)
    except RuntimeError as exc:
        raise SolverAbort("regime", str(exc), state) from exc
    _check(u, v, x1, state)
    if dt is None:
        dt = cfl_dt(grid, cfg, x1, mode)
    du, dv = full_tendency(u, v, x1, params, grid, mode)
    u1, v1 = u + dt * du, v + dt * dv
    try:
        x2 = _velocity(u1, v1, state.t + dt, params, grid, mode, xdot_path, cfg.velocity)
    except RuntimeError as exc:
        raise SolverAbort("regime", str(exc), state) from exc
    _check(u1, v1, x2, state)
    du, dv = full_tendency(u1, v1, x2, params, grid, mode)
    un = 0.5 * (u + u1 + dt * du)
    vn = 0.5 * (v + v1 + dt * dv)
    xd = 0.5 * (x1 + x2)
    new = SolverState(PairField.from_arrays(un, vn, grid), state.t + dt, state.x + dt * xd,
                      xd, mode, state.steps + 1)
    _check(un, vn, 0.0, new)
    return new


def cfl_dt(grid: Grid, cfg: StepConfig, xdot: float, mode: str) -> float:
    speed = 1.0 + abs(xdot) if mode == "nonlinear" else 1.0
    return cfg.cfl * grid.h / speed


@dataclass(eq=False)
class Trajectory:
    """Time series of the peak motion plus stored snapshots of ``W``."""

    grid: Grid
    mode: str
    times: list = field(default_factory=list)
    x: list = field(default_factory=list)
    xdot: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)
    history_t: list = field(default_factory=list)
    history_u: list = field(default_factory=list)
    history_v: list = field(default_factory=list)
    aborted: SolverAbort | None = None

    def history_arrays(self):
        return (np.asarray(self.history_t), np.asarray(self.history_u),
                np.asarray(self.history_v))

    @property
    def final(self) -> PairField:
        t = max(self.snapshots)
        return self.snapshots[t]


def run(initial: PairField, params: ModelParams, cfg: StepConfig, mode: str = "nonlinear",
        xdot_path: Callable[[float], float] | None = None, diagnostics: bool = True,
        raise_on_abort: bool = True):
    """Integrate to ``cfg.t_final`` and record diagnostics.

    Returns
    -------
    Trajectory, DiagnosticsSeries or None
        With ``raise_on_abort=False`` an abort is stored in ``Trajectory.aborted``
        and the partial series is returned.
    """
    from .inequality_lab import DiagnosticsSeries, diagnostics_record

    grid = initial.grid
    state = SolverState(initial, mode=mode)
    traj = Trajectory(grid, mode)
    series = DiagnosticsSeries(params, mode) if diagnostics else None
    snap_times = sorted(set(cfg.snapshots) | {0.0, cfg.t_final})
    watch = mode == "nonlinear" and params.alpha > 0 and xdot_path is None

    def record(st: SolverState, xdot_now: float):
        traj.times.append(st.t)
        traj.x.append(st.x)
        traj.xdot.append(xdot_now)
        if series is not None:
            series.append(diagnostics_record(st.W, st.t, st.x, xdot_now, params, cfg.delta, mode))

    def keep(st: SolverState):
        if cfg.keep_history:
            traj.history_t.append(st.t)
            traj.history_u.append(st.W.u.values)
            traj.history_v.append(st.W.v.values)

    def watchdog(st: SolverState):
        ok, _ = check_single_peak(solve_chemo(density(st.W, params), params))
        if not ok:
            raise SolverAbort("H1", f"chemoattractant lost its single peak at t={st.t:.6g}", st)

    try:
        if watch:
            watchdog(state)
        xd0 = _velocity(initial.u.values, initial.v.values, 0.0, params, grid, mode, xdot_path,
                        cfg.velocity)
        record(state, xd0)
        keep(state)
        traj.snapshots[0.0] = initial
        next_snap = [t for t in snap_times if t > 0]
        while state.t < cfg.t_final - 1e-12:
            if cfg.max_steps is not None and state.steps >= cfg.max_steps:
                break
            xd = _velocity(state.W.u.values, state.W.v.values, state.t, params, grid, mode, xdot_path,
                           cfg.velocity)
            dt = cfl_dt(grid, cfg, xd, mode)
            target = next_snap[0] if next_snap else cfg.t_final
            if state.t + dt > target - 1e-12 * max(1.0, target):
                dt = target - state.t
            state = step(state, params, cfg, dt=dt, xdot_path=xdot_path)
            if next_snap and abs(state.t - next_snap[0]) <= 1e-12 * max(1.0, next_snap[0]):
                state = replace(state, t=next_snap[0])
                traj.snapshots[next_snap[0]] = state.W
                next_snap.pop(0)
            keep(state)
            if watch and state.steps % cfg.watchdog_stride == 0:
                watchdog(state)
            if state.steps % cfg.diag_stride == 0 or state.t >= cfg.t_final - 1e-12:
                xd_now = _velocity(state.W.u.values, state.W.v.values, state.t, params, grid,
                                   mode, xdot_path, cfg.velocity)
                record(state, xd_now)
    except SolverAbort as exc:
        traj.aborted = exc
        if series is not None:
            series.finalize()
        if raise_on_abort:
            exc.trajectory = traj
            exc.series = series
            raise
        return traj, series
    except RuntimeError as exc:
        abort = SolverAbort("regime", str(exc), state)
        traj.aborted = abort
        if raise_on_abort:
            raise abort from exc
        return traj, series
    if series is not None:
        series.finalize()
    return traj, series
