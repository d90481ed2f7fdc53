import numpy as np
import pytest

from runtumble.core_types import ConfigError, ModelParams, build_grid
from runtumble.equilibrium import (
    InitialSpec,
    constraint_values,
    make_initial,
    steady_residual,
    steady_state,
    tumbling_kernel,
)


def test_steady_state_is_fixed_point(params, grid):
    assert steady_residual(params, grid) == 0.0
    eta = steady_state(params, grid).eta.values
    assert eta[grid.mid] == pytest.approx(np.exp(-params.chi * grid.h))


def test_tumbling_kernel():
    assert tumbling_kernel(1.0, 1, 0.5) == 1.5
    assert tumbling_kernel(-1.0, 1, 0.5) == 0.5
    with pytest.raises(ValueError):
        tumbling_kernel(1.0, 0, 0.5)


@pytest.mark.parametrize("shape", ["gaussian_bump", "cosine_packet", "random_smooth", "two_bump"])
@pytest.mark.parametrize("alpha", [0.0, 0.25])
def test_projection_removes_constraints(shape, alpha):
    p = ModelParams(0.5, alpha)
    g = build_grid(p, 20.0, 1000)
    for mode, idx in (("project_all", [0, 1, 2]), ("project_conserved", [0, 1]), ("project_mass_only", [0])):
        W = make_initial(InitialSpec(shape=shape, amplitude=0.1, constraint_mode=mode), p, g).W
        c = constraint_values(W.u.values, W.v.values, p, g)
        assert np.max(np.abs(c[idx])) < 1e-15


def test_compatible_origin(params, grid):
    W = make_initial(InitialSpec(compatible_origin=True), params, grid).W
    c = constraint_values(W.u.values, W.v.values, params, grid)
    assert np.max(np.abs(c)) < 1e-15


def test_raw_shape_keeps_functionals(params, grid):
    W = make_initial(InitialSpec(constraint_mode="none"), params, grid).W
    c = constraint_values(W.u.values, W.v.values, params, grid)
    assert abs(c[0]) > 1e-4


def test_positivity_and_spec_errors(params, grid):
    with pytest.raises(ConfigError, match="nonpositive"):
        make_initial(InitialSpec(amplitude=20.0), params, grid)
    with pytest.raises(ConfigError):
        InitialSpec(shape="square")
    with pytest.raises(ConfigError):
        InitialSpec(constraint_mode="some")
    with pytest.raises(ConfigError):
        InitialSpec(width=0.0)


def test_seeded_shapes_are_deterministic(params, grid):
    a = make_initial(InitialSpec(shape="random_smooth", seed=3), params, grid)
    b = make_initial(InitialSpec(shape="random_smooth", seed=3), params, grid)
    c = make_initial(InitialSpec(shape="random_smooth", seed=4), params, grid)
    assert np.array_equal(a.W.stacked(), b.W.stacked())
    assert not np.array_equal(a.W.stacked(), c.W.stacked())


def test_zero_amplitude_gives_zero(params, grid):
    d = make_initial(InitialSpec(amplitude=0.0), params, grid)
    assert np.all(d.W.stacked() == 0.0) and d.sup_u == 0.0
