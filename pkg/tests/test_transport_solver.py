import numpy as np
import pytest

from runtumble.characteristics_oracle import XdotPath
from runtumble.core_types import ModelParams, PairField, build_grid
from runtumble.equilibrium import InitialSpec, make_initial
from runtumble.transport_solver import (
    SolverAbort,
    SolverState,
    StepConfig,
    centering_velocity,
    centering_weights,
    full_tendency,
    run,
    step,
)


def test_step_config_validation():
    with pytest.raises(ValueError):
        StepConfig(cfl=1.5)
    with pytest.raises(ValueError):
        StepConfig(diag_stride=0)
    with pytest.raises(ValueError):
        StepConfig(velocity="magic")
    with pytest.raises(ValueError):
        SolverState(None, mode="other")


def test_tendency_affine_in_xdot(params, grid):
    W = make_initial(InitialSpec(amplitude=0.1), params, grid).W
    u, v = W.u.values, W.v.values
    f0 = np.stack(full_tendency(u, v, 0.0, params, grid, "nonlinear"))
    f1 = np.stack(full_tendency(u, v, 1.0, params, grid, "nonlinear"))
    fx = np.stack(full_tendency(u, v, 0.3, params, grid, "nonlinear"))
    assert np.allclose(fx, f0 + 0.3 * (f1 - f0), atol=1e-12)


@pytest.mark.parametrize("mode", ["nonlinear", "linearized"])
def test_centering_velocity_freezes_centering_functional(params, mode):
    g = build_grid(params, 20.0, 1000)
    ell = centering_weights(params, g)
    W = make_initial(InitialSpec(amplitude=0.02), params, g).W
    traj, s = run(W, params, StepConfig(t_final=2.0, snapshots=(0.5, 1.0, 1.5)), mode)
    vals = [ell @ (X.u.values + X.v.values) for X in traj.snapshots.values()]
    assert np.ptp(vals) < 1e-15
    # the differenced diagnostic sees only the O(h) mismatch
    assert np.max(np.abs(s.column("second_law"))) < 1e-5


def test_formula_velocity_agrees_to_first_order(params):
    gaps = []
    for n in (500, 1000, 2000):
        g = build_grid(params, 20.0, n)
        W = make_initial(InitialSpec(amplitude=0.02), params, g).W
        traj_c, _ = run(W, params, StepConfig(t_final=1.0), "nonlinear", diagnostics=False)
        traj_f, _ = run(W, params, StepConfig(t_final=1.0, velocity="formula"), "nonlinear", diagnostics=False)
        gaps.append(abs(traj_c.x[-1] - traj_f.x[-1]))
    assert gaps[0] / gaps[1] > 1.7 and gaps[1] / gaps[2] > 1.7


def test_mass_drift_first_order(params):
    drift = []
    for n in (500, 1000, 2000):
        g = build_grid(params, 20.0, n)
        W = make_initial(InitialSpec(amplitude=0.05), params, g).W
        _, s = run(W, params, StepConfig(t_final=2.0), "nonlinear")
        drift.append(np.max(np.abs(s.column("mass_law"))))
    assert drift[0] / drift[1] > 1.8 and drift[1] / drift[2] > 1.8


def test_snapshots_and_determinism(params, grid):
    W = make_initial(InitialSpec(amplitude=0.05), params, grid).W
    cfg = StepConfig(t_final=1.0, snapshots=(0.25, 0.5))
    t1, s1 = run(W, params, cfg, "nonlinear")
    t2, s2 = run(W, params, cfg, "nonlinear")
    assert sorted(t1.snapshots) == [0.0, 0.25, 0.5, 1.0]
    assert np.array_equal(t1.final.stacked(), t2.final.stacked())
    assert list(s1.rows()) == list(s2.rows())
    assert np.all(np.diff(s1.column("t")) > 0)


def test_speed_limit_abort(params, grid):
    W = make_initial(InitialSpec(amplitude=0.01), params, grid).W
    path = XdotPath.constant(0.95, 1.0)
    with pytest.raises(SolverAbort) as info:
        run(W, params, StepConfig(t_final=0.5), "nonlinear", xdot_path=path)
    assert info.value.kind == "speed-limit"
    traj, _ = run(W, params, StepConfig(t_final=0.5), "nonlinear", xdot_path=path, raise_on_abort=False)
    assert traj.aborted is not None and traj.aborted.kind == "speed-limit"


def test_h1_watchdog_abort():
    p = ModelParams(0.5, 25.0)
    g = build_grid(p, 20.0, 1000)
    W = make_initial(InitialSpec(shape="two_bump", amplitude=100.0, center=3.0, width=0.3,
                                 constraint_mode="none"), p, g).W
    with pytest.raises(SolverAbort) as info:
        run(W, p, StepConfig(t_final=1.0), "nonlinear")
    assert info.value.kind == "H1"


def test_centering_velocity_zero_at_rest(params, grid):
    z = np.zeros(grid.n)
    assert centering_velocity(z, z, params, grid, "nonlinear") == 0.0
    st = step(SolverState(PairField.zeros(grid)), params, StepConfig())
    assert np.all(st.W.stacked() == 0.0) and st.t > 0
