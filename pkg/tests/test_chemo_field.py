import math

import numpy as np
import pytest
from scipy.integrate import quad

from runtumble.chemo_field import (
    PerturbativeRegimeLost,
    check_single_peak,
    chemo_residual,
    density,
    mu_constant,
    peak_velocity,
    peak_velocity_lin,
    solve_chemo,
    xdot_bound,
)
from runtumble.core_types import ModelParams, PairField, ScalarField, build_grid, pair_derivative
from runtumble.equilibrium import InitialSpec, make_initial


def test_chemo_against_quadrature():
    p = ModelParams(0.5, 0.25)
    g = build_grid(p, 20.0, 2000)
    rho_f = lambda z: math.exp(-abs(z)) * (1 + 0.3 * math.sin(z))
    rho = ScalarField(np.array([rho_f(z) for z in g.y]), g)
    S = solve_chemo(rho, p)
    k = p.sqrt_alpha
    for y0 in (-3.01, 0.01, 2.49):
        i = int(np.argmin(np.abs(g.y - y0)))
        y = g.y[i]
        exact = quad(lambda z: math.exp(-k * abs(y - z)) * rho_f(z), -20, 20, points=[0.0, y], limit=200)[0] / (2 * k)
        assert S.S.values[i] == pytest.approx(exact, rel=1e-3)
    assert chemo_residual(S, rho) < 1e-2


def test_alpha_zero_gradient():
    p = ModelParams(0.5, 0.0)
    g = build_grid(p, 20.0, 2000)
    rho = ScalarField(g.w_chi.copy(), g)
    f = solve_chemo(rho, p)
    assert f.S is None
    # Sy = -(1/(2 chi)) sign(y) (1 - e^{-2 chi |y|}) for rho = eta
    exact = -np.sign(g.y) * (1 - g.w_chi) / (2 * p.chi)
    # each center misses half of its own cell mass: error <= h max(rho) / 2
    assert np.max(np.abs(f.Sy.values - exact)) <= 0.5 * g.h
    # O(h) at the kink of rho
    assert chemo_residual(f, rho) < g.h


def test_single_peak(params, grid):
    ok, pos = check_single_peak(solve_chemo(density(PairField.zeros(grid), params), params))
    assert ok and pos == pytest.approx(0.0, abs=grid.h)


def test_two_far_bumps_give_two_peaks():
    p = ModelParams(0.5, 25.0)
    g = build_grid(p, 20.0, 2000)
    rho = ScalarField(np.exp(-((g.y - 4) / 0.2) ** 2) + np.exp(-((g.y + 4) / 0.2) ** 2), g)
    ok, _ = check_single_peak(solve_chemo(rho, p))
    assert not ok


def test_negative_density_rejected(params, grid):
    with pytest.raises(ValueError):
        solve_chemo(ScalarField(-np.ones(grid.n), grid), params)


def test_peak_velocity_values(params, grid):
    assert peak_velocity(PairField.zeros(grid), params) == 0.0
    assert peak_velocity_lin(PairField.zeros(grid), params) == 0.0
    # u = c, v = 0 constant: xdot = lam c / (4 chi + lam c)
    c = 0.1
    W = PairField.from_arrays(np.full(grid.n, c), np.zeros(grid.n), grid)
    assert peak_velocity(W, params) == pytest.approx(params.lam * c / (4 * params.chi + params.lam * c))
    assert peak_velocity_lin(W, params) == pytest.approx(params.lam * c / (4 * params.chi))
    bad = PairField.from_arrays(np.full(grid.n, -1.0), np.full(grid.n, -1.0), grid)
    with pytest.raises(PerturbativeRegimeLost):
        peak_velocity(bad, params)


def test_xdot_bound(params, grid):
    assert mu_constant(params) == pytest.approx(2.0)
    W = make_initial(InitialSpec(amplitude=0.01), params, grid).W
    b, ok = xdot_bound(W, pair_derivative(W), params)
    assert ok and abs(peak_velocity(W, params)) <= b
    big = PairField.from_arrays(50 * np.sin(grid.y), np.zeros(grid.n), grid)
    b, ok = xdot_bound(big, pair_derivative(big), params)
    assert not ok and math.isnan(b)
