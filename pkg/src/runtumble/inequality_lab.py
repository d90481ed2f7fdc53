"""Functional inequalities, conservation laws, rate fits and trajectory diagnostics."""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields

import numpy as np
from scipy.stats import linregress

from .chemo_field import check_single_peak, density, peak_velocity, peak_velocity_lin, solve_chemo, xdot_bound
from .core_types import (
    Grid,
    ModelParams,
    PairField,
    ScalarField,
    jump_average,
    pair_derivative,
    pair_norms,
    spatial_derivative,
    weighted_average,
)
from .hypocoercivity import (
    DiscreteOperators,
    assemble_operators,
    dissipation_rhs,
    dissipation_rhs_lin,
    modified_entropy,
    modified_entropy_alpha,
)

_OPS_CACHE: dict = {}


def operators_for(params: ModelParams, grid: Grid) -> DiscreteOperators:
    key = (params.chi, params.alpha, grid.L, grid.n_cells)
    ops = _OPS_CACHE.get(key)
    if ops is None:
        if len(_OPS_CACHE) > 8:
            _OPS_CACHE.clear()
        ops = _OPS_CACHE[key] = assemble_operators(params, grid)
    return ops


@dataclass
class DiagnosticsRecord:
    """Scalars recorded at one time; field order is the series column order."""

    t: float
    xdot: float
    x: float
    mass_law: float
    second_law: float
    third_law: float
    normW2: float
    normWy2: float
    normPiWy2: float
    normIPiWy2: float
    entropyL: float
    entropyLalpha: float
    diss_lhs: float
    diss_rhs: float
    poincare_ratio: float
    xdot_bound: float
    xdot_bound_valid: bool
    h1_ok: bool


COLUMNS = tuple(f.name for f in fields(DiagnosticsRecord))


class DiagnosticsSeries:
    """Ordered list of records with column access."""

    def __init__(self, params: ModelParams, mode: str):
        self.params = params
        self.mode = mode
        self.records: list[DiagnosticsRecord] = []

    def append(self, rec: DiagnosticsRecord):
        if self.records and not rec.t > self.records[-1].t:
            raise ValueError("record times must increase")
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def finalize(self):
        """Fill ``diss_lhs`` with the time derivative of ``0.5 |Wy|^2``."""
        if len(self.records) < 3:
            for r in self.records:
                r.diss_lhs = math.nan
            return
        t = self.column("t")
        e = 0.5 * self.column("normWy2")
        slope = np.gradient(e, t, edge_order=2)
        for r, s in zip(self.records, slope):
            r.diss_lhs = float(s)

    def rows(self):
        for r in self.records:
            yield astuple(r)


def diagnostics_record(W: PairField, t: float, x: float, xdot: float, params: ModelParams,
                       delta: float, mode: str) -> DiagnosticsRecord:
    grid = W.grid
    ops = operators_for(params, grid)
    Wy = pair_derivative(W)
    nm = pair_norms(W, Wy)
    a, lam = 2.0 * params.chi, params.lam
    mass = weighted_average(W.u + W.v, a)
    second = weighted_average(Wy.u + Wy.v, lam)
    third = weighted_average(W.u - W.v, lam)
    L = modified_entropy(ops, Wy, delta)
    La = modified_entropy_alpha(ops, W, Wy, delta, params) if params.alpha > 0 else L
    if mode == "nonlinear":
        rhs = dissipation_rhs(W, Wy, xdot, params)
    else:
        rhs = dissipation_rhs_lin(W, Wy, xdot, params)
    pr = check_poincare(W.u + W.v, params)
    bound, valid = xdot_bound(W, Wy, params)
    try:
        h1, _ = check_single_peak(solve_chemo(density(W, params), params))
    except ValueError:
        h1 = False
    return DiagnosticsRecord(t, xdot, x, mass, second, third, nm.W2, nm.Wy2, nm.PiWy2, nm.IPiWy2,
                             L, La, math.nan, rhs, pr, bound, valid, h1)


def check_poincare(w: ScalarField, params: ModelParams) -> float:
    """``chi^2 int |w - <w>|^2 eta / int |w'|^2 eta``; 0 for constant ``w``."""
    grid = w.grid
    a = 2.0 * params.chi
    wh = grid.w_chi * grid.h
    centered = w.values - weighted_average(w, a)
    lhs = float(centered**2 @ wh)
    dw = spatial_derivative(w).values
    rhs = float(dw**2 @ wh)
    if rhs <= 1e-300:
        return 0.0
    return params.chi**2 * lhs / rhs


def check_interpolation(f: ScalarField, a: float, b: float) -> float:
    """Smallest slack of the two interpolation bounds at rates ``a >= b > 0``.

    The bounds are ``|f(0) - <f>_a|^2 <= (1/(2a-b)) 0.5 int |f'|^2 e^{-b|y|}`` and
    ``|<f>_a| <= (2/sqrt(2(2a-b))) (int f^2 e^{-b|y|})^{1/2}``.
    """
    if not (a >= b > 0):
        raise ValueError("need a >= b > 0")
    grid = f.grid
    wb = grid.weight(b) * grid.h
    avg = weighted_average(f, a)
    f0 = jump_average(f)
    df = spatial_derivative(f).values
    s1 = 0.5 * float(df**2 @ wb) / (2 * a - b) - (f0 - avg) ** 2
    s2 = 2.0 / math.sqrt(2 * (2 * a - b)) * math.sqrt(float(f.values**2 @ wb)) - abs(avg)
    return min(s1, s2)


@dataclass(frozen=True)
class ConservationReport:
    max_mass: float
    max_second: float
    max_third_residual: float
    third_asserted: bool


def third_law_residual(series: DiagnosticsSeries) -> np.ndarray:
    """``<u-v>_lam(t) - e^{-2t} <u-v>_lam(0)`` along the series."""
    t = series.column("t")
    th = series.column("third_law")
    return th - np.exp(-2.0 * (t - t[0])) * th[0]


def check_conservation(series: DiagnosticsSeries, params: ModelParams, mode: str) -> ConservationReport:
    """Maxima of the conservation-law defects; the third law is asserted only
    in linearized mode and in nonlinear mode with ``alpha = 0``."""
    asserted = mode == "linearized" or params.alpha == 0
    return ConservationReport(
        float(np.max(np.abs(series.column("mass_law")))),
        float(np.max(np.abs(series.column("second_law")))),
        float(np.max(np.abs(third_law_residual(series)))),
        asserted,
    )


@dataclass(frozen=True)
class RateFit:
    gamma_hat: float
    t0: float
    t1: float
    r2: float
    prefactor: float


def fit_decay_rate(t, values, window: tuple[float, float] | None = None) -> RateFit:
    """Least-squares fit of ``log value = log C - gamma t`` on the window."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(values, dtype=float)
    if window is not None:
        sel = (t >= window[0]) & (t <= window[1])
        t, y = t[sel], y[sel]
    if t.size < 10:
        raise ValueError("need at least 10 samples in the window")
    if np.any(y <= 0):
        raise ValueError("values must be positive on the fit window")
    ly = np.log(y)
    if np.ptp(ly) == 0.0:
        return RateFit(0.0, float(t[0]), float(t[-1]), 1.0, float(y[0]))
    fit = linregress(t, ly)
    return RateFit(-float(fit.slope), float(t[0]), float(t[-1]), float(fit.rvalue**2),
                   float(math.exp(fit.intercept)))


def verify_dissipation_identity(series: DiagnosticsSeries, window: tuple[float, float] | None = None) -> float:
    """Max ``|d/dt 0.5|Wy|^2 - rhs|`` over interior records of the window."""
    t = series.column("t")
    res = np.abs(series.column("diss_lhs") - series.column("diss_rhs"))
    sel = np.ones_like(t, dtype=bool)
    sel[0] = sel[-1] = False
    if window is not None:
        sel &= (t >= window[0]) & (t <= window[1])
    if not np.any(sel):
        return 0.0
    return float(np.max(res[sel]))


def xdot_bound_violations(series: DiagnosticsSeries, slack: float = 1e-8) -> int:
    """Number of records where ``|xdot|`` exceeds a valid bound."""
    valid = series.column("xdot_bound_valid").astype(bool)
    xd = np.abs(series.column("xdot"))
    b = series.column("xdot_bound")
    return int(np.sum(valid & (xd > b + slack)))


def velocity_of(W: PairField, params: ModelParams, mode: str) -> float:
    return peak_velocity(W, params) if mode == "nonlinear" else peak_velocity_lin(W, params)
