"""Chemoattractant field, single-peak watchdog and peak velocity."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .core_types import Grid, ModelParams, PairField, ScalarField, one_sided_limits, pair_norms


class PerturbativeRegimeLost(RuntimeError):
    """The denominator of the peak-velocity formula is too close to zero."""


@dataclass(frozen=True, eq=False)
class ChemoField:
    """Chemoattractant ``S`` and its gradient ``Sy``.

    For ``alpha = 0`` only ``Sy`` is meaningful and ``S`` is None.
    """

    S: ScalarField | None
    Sy: ScalarField
    alpha: float


def _exp_sweeps(rho: np.ndarray, k: float, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Left and right sums ``sum_{j<i} e^{-k|y_i-y_j|} rho_j h`` and the mirror image."""
    q = math.exp(-k * h)
    b, a = [0.0, q], [1.0, -q]
    mh = rho * h
    left = lfilter(b, a, mh)
    right = lfilter(b, a, mh[::-1])[::-1]
    return left, right


def solve_chemo(rho: ScalarField, params: ModelParams) -> ChemoField:
    """Solve ``-S'' + alpha S = rho`` on the grid by quadrature of the kernel.

    For ``alpha > 0`` the convolution with ``exp(-sqrt(alpha)|y|)/(2 sqrt(alpha))``
    is evaluated with two O(n) recursions. For ``alpha = 0`` the bounded
    antisymmetric gradient ``Sy = (mass right of y - mass left of y)/2`` is used.
    """
    r = rho.values
    if np.any(r < -1e-12):
        raise ValueError("rho must be nonnegative")
    grid = rho.grid
    h = grid.h
    if params.alpha > 0:
        k = params.sqrt_alpha
        left, right = _exp_sweeps(r, k, h)
        S = (left + right + r * h) / (2.0 * k)
        Sy = -0.5 * (left - right)
        return ChemoField(ScalarField(S, grid), ScalarField(Sy, grid), params.alpha)
    mh = r * h
    below = np.concatenate([[0.0], np.cumsum(mh)[:-1]])
    above = np.concatenate([np.cumsum(mh[::-1])[:-1][::-1], [0.0]])
    return ChemoField(None, ScalarField(0.5 * (above - below), grid), 0.0)


def chemo_residual(field: ChemoField, rho: ScalarField) -> float:
    """Interior max norm of ``-S'' + alpha S - rho`` (``alpha > 0``) or ``Sy' + rho`` (``alpha = 0``)."""
    h = rho.grid.h
    if field.S is not None:
        S = field.S.values
        res = -(S[2:] - 2 * S[1:-1] + S[:-2]) / h**2 + field.alpha * S[1:-1] - rho.values[1:-1]
    else:
        Sy = field.Sy.values
        res = (Sy[2:] - Sy[:-2]) / (2 * h) + rho.values[1:-1]
    return float(np.max(np.abs(res)))


def check_single_peak(field: ChemoField) -> tuple[bool, float]:
    """Whether ``Sy`` changes sign exactly once, from + to -.

    Returns the flag and the edge position of the first sign change (nan if none).
    """
    sy = field.Sy.values
    y = field.Sy.grid.y
    h = field.Sy.grid.h
    nz = np.flatnonzero(sy != 0.0)
    s = np.sign(sy[nz])
    flips = np.flatnonzero(s[1:] != s[:-1])
    if flips.size == 0:
        return False, math.nan
    i0, i1 = nz[flips[0]], nz[flips[0] + 1]
    pos = 0.5 * (y[i0] + y[i1]) if i1 > i0 + 1 else y[i0] + 0.5 * h
    ok = flips.size == 1 and s[flips[0]] > 0
    return bool(ok), float(pos)


def density(W: PairField, params: ModelParams) -> ScalarField:
    """Spatial density ``rho = (f+ + f-)`` of the pair ``f = (1+u, 1+v) eta / 2``.

    With the normalization sigma = 2 the steady density is ``eta`` itself.
    """
    grid = W.grid
    eta = grid.w_chi
    rho = 0.5 * ((1.0 + W.u.values) + (1.0 + W.v.values)) * eta
    return ScalarField(rho, grid)


def _point_values(W: PairField) -> tuple[float, float]:
    lu, ru = one_sided_limits(W.u.values)
    lv, rv = one_sided_limits(W.v.values)
    return 0.5 * (lu + ru), 0.5 * (lv + rv)


def peak_velocity_arrays(u: np.ndarray, v: np.ndarray, params: ModelParams, grid: Grid) -> float:
    """Array version of :func:`peak_velocity` used inside the time loop."""
    lu, ru = one_sided_limits(u)
    lv, rv = one_sided_limits(v)
    u0, v0 = 0.5 * (lu + ru), 0.5 * (lv + rv)
    lam, sa, chi = params.lam, params.sqrt_alpha, params.chi
    num = lam * (u0 - v0)
    den = 4.0 * chi + lam * (u0 + v0)
    if sa > 0:
        wl = grid.w_lam * (0.5 * lam * grid.h)
        num -= sa * float((u - v) @ wl)
        den -= sa * float((u + v) @ wl)
    if abs(den) < 0.4 * chi:
        raise PerturbativeRegimeLost(f"peak-velocity denominator {den:.3g} below 0.1*4chi")
    return num / den


def peak_velocity(W: PairField, params: ModelParams) -> float:
    """Velocity of the chemoattractant peak in the moving frame.

    Returns
    -------
    float
        ``[lam (u0 - v0) - sqrt(alpha) <u-v>_lam] / [4 chi + lam (u0 + v0) - sqrt(alpha) <u+v>_lam]``
        with ``u0, v0`` the jump averages at the origin.
    """
    return peak_velocity_arrays(W.u.values, W.v.values, params, W.grid)


def peak_velocity_lin_arrays(u: np.ndarray, v: np.ndarray, params: ModelParams, grid: Grid) -> float:
    lu, ru = one_sided_limits(u)
    lv, rv = one_sided_limits(v)
    du0 = 0.5 * (lu + ru) - 0.5 * (lv + rv)
    lam = params.lam
    integral = float((u - v) @ grid.w_lam) * grid.h
    return lam / (4.0 * params.chi) * (du0 - 0.5 * params.sqrt_alpha * integral)


def peak_velocity_lin(W: PairField, params: ModelParams) -> float:
    """Linearized peak velocity ``(lam/4chi)(u0 - v0 - (sqrt(alpha)/2) int (u-v) e^{-lam|y|})``."""
    return peak_velocity_lin_arrays(W.u.values, W.v.values, params, W.grid)


def mu_constant(params: ModelParams) -> float:
    return 4.0 * params.chi * math.sqrt(2.0 * (params.chi + params.sqrt_alpha)) / params.lam


def xdot_bound(W: PairField, Wy: PairField, params: ModelParams) -> tuple[float, bool]:
    """A priori bound on ``|xdot|`` from the pair norms.

    Returns ``(bound, valid)``; ``bound`` is nan when not valid.
    """
    nm = pair_norms(W, Wy)
    chi = params.chi
    mu = mu_constant(params)
    den = mu - math.sqrt(nm.PiWy2) - 2.0 * chi * math.sqrt(nm.PiW2)
    if den <= 0:
        return math.nan, False
    return (math.sqrt(nm.IPiWy2) + 2.0 * chi * math.sqrt(nm.IPiW2)) / den, True
