"""Independent solver built on the characteristic integral form of the system.

The pair is written in the scaled variables ``ut = e^t eta u`` and
``vt = e^t eta v``. Along the characteristics ``dY/ds = +-1 - xdot`` each
scaled component picks up only zeroth-order terms, so the solution satisfies
a pair of Volterra equations. These are solved by windowed Picard iteration
with trapezoidal quadrature in ``s`` and linear interpolation in ``y``.

The module also evaluates the characteristic formulas for the jump averages
of ``u_y`` and ``v_y`` at the origin from a stored solution history.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .core_types import Grid, ModelParams, PairField, derivative_array, one_sided_limits


class OracleError(RuntimeError):
    """Picard non-convergence, broken speed assumption or thin history."""


@dataclass(frozen=True, eq=False)
class XdotPath:
    """Peak velocity sampled at increasing times, linearly interpolated.

    ``x(t)`` is the exact integral of the interpolant from ``times[0]``.
    """

    times: np.ndarray
    xdot: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        xd = np.asarray(self.xdot, dtype=float)
        if t.ndim != 1 or t.shape != xd.shape or t.size < 2:
            raise ValueError("need matching 1-D samples with at least two points")
        if np.any(np.diff(t) <= 0):
            raise ValueError("path times must increase")
        if not np.all(np.isfinite(xd)):
            raise ValueError("path velocities must be finite")
        if np.max(np.abs(xd)) >= 1.0:
            raise ValueError("path violates |xdot| < 1")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "xdot", xd)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (xd[1:] + xd[:-1]) * np.diff(t))])
        object.__setattr__(self, "_cum", cum)

    @classmethod
    def constant(cls, value: float, t_final: float) -> "XdotPath":
        return cls(np.array([0.0, max(t_final, 1e-12)]), np.array([value, value]))

    @classmethod
    def from_trajectory(cls, traj) -> "XdotPath":
        return cls(np.asarray(traj.times), np.asarray(traj.xdot))

    @property
    def p(self) -> float:
        """Sup of ``|xdot|`` over the samples."""
        return float(np.max(np.abs(self.xdot)))

    def covers(self, t0: float, t1: float) -> bool:
        eps = 1e-12 * max(1.0, abs(t1))
        return self.times[0] <= t0 + eps and self.times[-1] >= t1 - eps

    def __call__(self, t):
        out = np.interp(t, self.times, self.xdot)
        return float(out) if np.ndim(out) == 0 else out

    def x(self, t):
        """Displacement ``x(t) - x(times[0])``."""
        tt = np.clip(np.asarray(t, dtype=float), self.times[0], self.times[-1])
        k = np.clip(np.searchsorted(self.times, tt, side="right") - 1, 0, self.times.size - 2)
        dt = tt - self.times[k]
        slope = (self.xdot[k + 1] - self.xdot[k]) / (self.times[k + 1] - self.times[k])
        out = self._cum[k] + dt * (self.xdot[k] + 0.5 * slope * dt)
        return float(out) if out.ndim == 0 else out


def _shift_sample(A: np.ndarray, shift: np.ndarray, h: float, pad: int) -> np.ndarray:
    """Rows ``A[r]`` evaluated at ``y + shift[r]``; zero outside the domain.

    ``A`` already carries ``pad`` zeros on both ends.
    """
    f = shift / h
    j = np.floor(f).astype(int)
    w = (f - j)[:, None]
    n = A.shape[1] - 2 * pad
    idx = np.arange(n)[None, :] + pad + j[:, None]
    rows = np.arange(A.shape[0])[:, None]
    return (1.0 - w) * A[rows, idx] + w * A[rows, idx + 1]


def _picard_window(U0, V0, grid: Grid, params: ModelParams, path: XdotPath, T0: float, Tw: float,
                   ds: float, tol: float, max_iter: int):
    chi = params.chi
    y, h = grid.y, grid.h
    K = max(1, int(math.ceil(Tw / ds - 1e-9)))
    dtau = Tw / K
    tau = dtau * np.arange(K + 1)
    X = path.x(T0 + tau)
    xd = np.asarray(path(T0 + tau))
    # shift[k, m] = X(tau_k) - X(tau_k - s_m) for m <= k
    kk, mm = np.meshgrid(np.arange(K + 1), np.arange(K + 1), indexing="ij")
    valid = mm <= kk
    dX = np.where(valid, X[kk] - X[np.where(valid, kk - mm, 0)], 0.0)
    s = dtau * mm
    cu, cv = dX - s, dX + s
    pad = int(math.ceil(np.max(np.abs(np.where(valid, cu, 0.0))) / h)) + 3
    pad = max(pad, int(math.ceil(np.max(np.abs(np.where(valid, cv, 0.0))) / h)) + 3)
    efac = np.exp(tau)

    def padded(A):
        return np.pad(A, ((0, 0), (pad, pad)))

    P0 = padded(np.stack([U0, V0]))
    init_u = _shift_sample(np.repeat(P0[:1], K + 1, axis=0), cu[np.arange(K + 1), np.arange(K + 1)], h, pad)
    init_v = _shift_sample(np.repeat(P0[1:], K + 1, axis=0), cv[np.arange(K + 1), np.arange(K + 1)], h, pad)

    U = np.repeat(U0[None, :], K + 1, axis=0)
    V = np.repeat(V0[None, :], K + 1, axis=0)
    for it in range(max_iter):
        PU, PV = padded(U), padded(V)
        Un, Vn = init_u.copy(), init_v.copy()
        for m in range(K + 1):
            ks = np.arange(max(m, 1), K + 1)
            if ks.size == 0:
                continue
            src = ks - m
            wq = np.where((ks == m) | (m == 0), 0.5, 1.0)[:, None] * dtau
            src_amp = (2.0 * xd[src] * efac[src])[:, None]
            # u equation: characteristic z = y - s + dX
            z = y[None, :] + cu[ks, m][:, None]
            uu, vv = _shift_sample(PU[src], cu[ks, m], h, pad), _shift_sample(PV[src], cu[ks, m], h, pad)
            g = uu + vv + src_amp * np.exp(-2.0 * chi * np.abs(z))
            Un[ks] += wq * (vv - chi * np.sign(z) * g)
            # v equation: z = y + s + dX
            z = y[None, :] + cv[ks, m][:, None]
            uu, vv = _shift_sample(PU[src], cv[ks, m], h, pad), _shift_sample(PV[src], cv[ks, m], h, pad)
            g = uu + vv - src_amp * np.exp(-2.0 * chi * np.abs(z))
            Vn[ks] += wq * (uu + chi * np.sign(z) * g)
        diff = max(np.max(np.abs(Un - U) / efac[:, None]), np.max(np.abs(Vn - V) / efac[:, None]))
        U, V = Un, Vn
        if diff < tol:
            return U[-1] / efac[-1], V[-1] / efac[-1], it + 1
    raise OracleError(f"Picard iteration did not reach tol={tol:g} on window [{T0:.6g}, {T0 + Tw:.6g}]"
                      f" after {max_iter} sweeps (last difference {diff:.3g})")


def duhamel_solve(W0: PairField, path: XdotPath, t_final: float, tol: float, params: ModelParams,
                  window: float = 0.5, ds: float | None = None, max_iter: int = 80) -> PairField:
    """Solve the characteristic integral equations up to ``t_final``.

    Parameters
    ----------
    W0 : PairField
        Initial perturbation.
    path : XdotPath
        Prescribed peak velocity covering ``[0, t_final]``.
    t_final : float
        Final time.
    tol : float
        Stopping threshold for the sup difference of successive Picard sweeps.
    params : ModelParams
    window : float
        Length of the restart windows; each one starts from the previous output.
    ds : float, optional
        Quadrature step in ``s``; defaults to the grid spacing.

    Returns
    -------
    PairField
        The pair at ``t_final``.

    Raises
    ------
    OracleError
        If Picard fails to converge on a window.
    """
    if t_final < 0:
        raise ValueError("t_final must be >= 0")
    if t_final == 0:
        return W0
    if not path.covers(0.0, t_final):
        raise ValueError("path does not cover [0, t_final]")
    if path.p >= 1.0:
        raise ValueError("path violates |xdot| < 1")
    grid = W0.grid
    ds = grid.h if ds is None else ds
    eta = grid.w_chi
    # scaled variables restart at each window with local time 0
    U, V = eta * W0.u.values, eta * W0.v.values
    T0 = 0.0
    while T0 < t_final - 1e-12:
        Tw = min(window, t_final - T0)
        U, V, _ = _picard_window(U, V, grid, params, path, T0, Tw, ds, tol, max_iter)
        T0 += Tw
    with np.errstate(over="ignore"):
        return PairField.from_arrays(U / eta, V / eta, grid)


def weighted_l1_distance(Wa: PairField, Wb: PairField) -> float:
    """``sum (|ua - ub| + |va - vb|) eta h`` on a common grid."""
    g = Wa.grid
    if not g.same_as(Wb.grid):
        raise ValueError("fields live on different grids")
    d = np.abs(Wa.u.values - Wb.u.values) + np.abs(Wa.v.values - Wb.v.values)
    return float(d @ g.w_chi) * g.h


def _side_sampler(values: np.ndarray, grid: Grid, side: int):
    """Linear interpolant of cell values on one half-line, closed at 0 by the one-sided limit."""
    m = grid.mid
    left, right = one_sided_limits(values)
    if side < 0:
        xs = np.concatenate([grid.y[:m], [0.0]])
        fs = np.concatenate([values[:m], [left]])
        return lambda z: np.interp(z, xs, fs, left=0.0, right=left)
    xs = np.concatenate([[0.0], grid.y[m:]])
    fs = np.concatenate([[right], values[m:]])
    return lambda z: np.interp(z, xs, fs, left=right, right=0.0)


def jump_representation(history, path: XdotPath, t: float, params: ModelParams) -> tuple[float, float]:
    """Characteristic formulas for ``<<u_y>>(t)`` and ``<<v_y>>(t)``.

    Parameters
    ----------
    history : Trajectory
        Run with ``keep_history`` so that ``u`` and ``v`` are stored at every step.
    path : XdotPath
        Peak velocity used by the run.
    t : float
        Evaluation time; must be a stored history time.

    Returns
    -------
    (float, float)
        The two jump averages.
    """
    chi = params.chi
    th, hu, hv = history.history_arrays()
    if th.size == 0:
        raise OracleError("history is empty; run with keep_history")
    grid = history.grid
    k_end = int(np.argmin(np.abs(th - t)))
    if abs(th[k_end] - t) > 1e-9 * max(1.0, t):
        raise OracleError(f"t={t:g} is not a stored history time")
    th, hu, hv = th[:k_end + 1], hu[:k_end + 1], hv[:k_end + 1]
    if t > 0 and (th.size < 8 or np.max(np.diff(th)) > 0.05 * max(t, 1.0)):
        raise OracleError("history too sparse for the s-quadrature")
    if not path.covers(0.0, t):
        raise OracleError("path does not cover [0, t]")
    p = float(np.max(np.abs(path(th)))) if th.size else 0.0
    if p >= 1.0:
        raise OracleError("peak speed reached 1; the characteristic formulas do not apply")

    s = t - th  # decreasing from t to 0
    dX = path.x(t) - path.x(th)
    zm, zp = -s + dX, s + dX
    pos = s > 0
    if np.any(zm[pos] >= 0) or np.any(zp[pos] <= 0):
        raise OracleError("z_- < 0 < z_+ violated; the speed assumption is broken on [0, t]")
    eta = lambda z: np.exp(-2.0 * chi * np.abs(z))
    h = grid.h
    xd_hist = np.asarray(path(th))

    bu = np.empty(th.size)
    bv = np.empty(th.size)
    for k in range(th.size):
        u, v = hu[k], hv[k]
        uy, vy = derivative_array(u, h), derivative_array(v, h)
        L = lambda f: _side_sampler(f, grid, -1)(zm[k])
        R = lambda f: _side_sampler(f, grid, +1)(zp[k])
        # integrands for <<u_y>> use data left of the origin, <<v_y>> right of it
        bu[k] = (L(vy) + 2 * chi * L(v)
                 + chi * (L(uy) + L(vy) + 2 * chi * (L(u) + L(v)))) * eta(zm[k])
        bv[k] = (R(uy) - 2 * chi * R(u)
                 + chi * (R(uy) + R(vy) - 2 * chi * (R(u) + R(v)))) * eta(zp[k])
        if k == 0:
            init_u = (L(uy) + 2 * chi * L(u)) * eta(zm[0])
            init_v = (R(vy) - 2 * chi * R(v)) * eta(zp[0])
    decay = np.exp(-s)
    src_u = 4 * chi**2 * xd_hist * eta(zm)
    src_v = 4 * chi**2 * xd_hist * eta(zp)
    # history times increase while s decreases, so integrate against th
    Iu = trapezoid(decay * (bu + src_u), th) if th.size > 1 else 0.0
    Iv = trapezoid(decay * (bv + src_v), th) if th.size > 1 else 0.0

    lu, ru = one_sided_limits(hu[-1])
    lv, rv = one_sided_limits(hv[-1])
    u0, v0 = 0.5 * (lu + ru), 0.5 * (lv + rv)
    xdt = float(path(t))
    Ju = math.exp(-t) * init_u + Iu - chi / (1.0 - xdt) * (u0 + v0 + 2 * xdt)
    Jv = math.exp(-t) * init_v + Iv + chi / (1.0 + xdt) * (u0 + v0 - 2 * xdt)
    return float(Ju), float(Jv)
