import numpy as np
import pytest

from runtumble.characteristics_oracle import (
    OracleError,
    XdotPath,
    duhamel_solve,
    jump_representation,
    weighted_l1_distance,
)
from runtumble.core_types import ModelParams, PairField, build_grid
from runtumble.equilibrium import InitialSpec, make_initial
from runtumble.transport_solver import StepConfig, run


def test_path_integral_exact():
    path = XdotPath(np.array([0.0, 1.0, 2.0]), np.array([0.0, 0.2, 0.2]))
    assert path.x(1.0) == pytest.approx(0.1)
    assert path.x(0.5) == pytest.approx(0.5 * 0.1 * 0.5)
    assert path.x(2.0) == pytest.approx(0.3)
    assert path(1.5) == pytest.approx(0.2)
    assert path.p == pytest.approx(0.2)
    with pytest.raises(ValueError):
        XdotPath(np.array([0.0, 1.0]), np.array([0.0, 1.2]))
    with pytest.raises(ValueError):
        XdotPath(np.array([1.0, 0.0]), np.array([0.0, 0.0]))


def test_trivial_cases(params, grid):
    W = make_initial(InitialSpec(amplitude=0.05), params, grid).W
    path = XdotPath.constant(0.0, 1.0)
    assert duhamel_solve(W, path, 0.0, 1e-12, params) is W
    Z = duhamel_solve(PairField.zeros(grid), path, 1.0, 1e-12, params)
    assert np.all(Z.stacked() == 0.0)


def test_nonconvergence_names_window(params, grid):
    W = make_initial(InitialSpec(amplitude=0.05), params, grid).W
    with pytest.raises(OracleError, match=r"window \[0, 0.5\]"):
        duhamel_solve(W, XdotPath.constant(0.0, 1.0), 1.0, 1e-14, params, max_iter=2)


def test_picard_contracts(params, grid):
    from runtumble.characteristics_oracle import _picard_window

    W = make_initial(InitialSpec(amplitude=0.05), params, grid).W
    eta = grid.w_chi
    path = XdotPath.constant(0.1, 1.0)
    its = _picard_window(eta * W.u.values, eta * W.v.values, grid, params, path, 0.0, 0.5, grid.h, 1e-12, 60)[2]
    assert its < 20


def test_telegraph_limit_chi_small():
    # chi -> 0: the oracle and the grid solver solve the plain exchange model
    p = ModelParams(0.02)
    dist = []
    for n in (400, 800):
        g = build_grid(p, 400.0, n)
        W = make_initial(InitialSpec(amplitude=0.05, width=20.0, center=10.0, constraint_mode="none"), p, g).W
        path = XdotPath.constant(0.0, 1.0)
        tr, _ = run(W, p, StepConfig(t_final=1.0), "linearized", xdot_path=path, diagnostics=False)
        dist.append(weighted_l1_distance(tr.final, duhamel_solve(W, path, 1.0, 1e-12, p)))
    assert dist[1] < 0.7 * dist[0]


def test_oracle_matches_grid_solver(params):
    dist = []
    path = XdotPath.constant(0.0, 1.0)
    for n in (250, 500, 1000):
        g = build_grid(params, 20.0, n)
        W = make_initial(InitialSpec(amplitude=0.05), params, g).W
        tr, _ = run(W, params, StepConfig(t_final=1.0), "linearized", xdot_path=path, diagnostics=False)
        dist.append(weighted_l1_distance(tr.final, duhamel_solve(W, path, 1.0, 1e-12, params)))
    assert dist[0] > dist[1] > dist[2]


def test_jump_representation_zero_history(params, grid):
    tr, _ = run(PairField.zeros(grid), params, StepConfig(t_final=0.5, keep_history=True), "nonlinear",
                diagnostics=False)
    path = XdotPath.from_trajectory(tr)
    assert jump_representation(tr, path, 0.5, params) == (0.0, 0.0)


def test_jump_representation_errors(params, grid):
    W = make_initial(InitialSpec(amplitude=0.05), params, grid).W
    tr, _ = run(W, params, StepConfig(t_final=0.5), "nonlinear", diagnostics=False)
    with pytest.raises(OracleError, match="empty"):
        jump_representation(tr, XdotPath.from_trajectory(tr), 0.5, params)
    tr, _ = run(W, params, StepConfig(t_final=0.5, keep_history=True), "nonlinear", diagnostics=False)
    with pytest.raises(OracleError, match="not a stored"):
        jump_representation(tr, XdotPath.from_trajectory(tr), 0.123456, params)
    # a displacement faster than the characteristics breaks z_- < 0 < z_+
    with pytest.raises(OracleError, match="z_-"):
        jump_representation(tr, _FastDisplacement(), 0.5, params)


class _FastDisplacement(XdotPath):
    """Zero velocity samples but a displacement growing at speed 2."""

    def __init__(self):
        super().__init__(np.array([0.0, 1.0]), np.zeros(2))

    def x(self, t):
        return 2.0 * np.asarray(t, dtype=float)
