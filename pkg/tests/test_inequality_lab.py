import math

import numpy as np
import pytest

from runtumble.core_types import ModelParams, ScalarField, build_grid
from runtumble.equilibrium import InitialSpec, make_initial
from runtumble.inequality_lab import (
    COLUMNS,
    DiagnosticsSeries,
    check_conservation,
    check_interpolation,
    check_poincare,
    diagnostics_record,
    fit_decay_rate,
    verify_dissipation_identity,
)
from runtumble.transport_solver import StepConfig, run


def test_columns_order():
    assert ",".join(COLUMNS) == ("t,xdot,x,mass_law,second_law,third_law,normW2,normWy2,normPiWy2,normIPiWy2,"
                                 "entropyL,entropyLalpha,diss_lhs,diss_rhs,poincare_ratio,xdot_bound,"
                                 "xdot_bound_valid,h1_ok")


def test_poincare_trivial_and_bounded(params, grid):
    assert check_poincare(ScalarField(np.full(grid.n, 3.0), grid), params) == 0.0
    w = ScalarField(np.sin(grid.y) * np.exp(-0.1 * grid.y**2), grid)
    assert 0 < check_poincare(w, params) <= 1.0


def test_interpolation_constant_function(grid):
    f = ScalarField(np.ones(grid.n), grid)
    assert check_interpolation(f, 1.0, 1.0) >= -1e-3
    with pytest.raises(ValueError):
        check_interpolation(f, 1.0, 2.0)


def test_fit_exact_exponential():
    t = np.linspace(0, 10, 200)
    fit = fit_decay_rate(t, 3.0 * np.exp(-0.7 * t), (1.0, 10.0))
    assert fit.gamma_hat == pytest.approx(0.7)
    assert fit.r2 == pytest.approx(1.0)
    assert fit.prefactor == pytest.approx(3.0)
    with pytest.raises(ValueError):
        fit_decay_rate(t, np.zeros_like(t), (1.0, 10.0))
    with pytest.raises(ValueError):
        fit_decay_rate(t[:5], np.exp(-t[:5]))


def test_series_rejects_non_increasing(params, grid):
    W = make_initial(InitialSpec(), params, grid).W
    s = DiagnosticsSeries(params, "nonlinear")
    s.append(diagnostics_record(W, 0.0, 0.0, 0.0, params, 0.1, "nonlinear"))
    with pytest.raises(ValueError):
        s.append(diagnostics_record(W, 0.0, 0.0, 0.0, params, 0.1, "nonlinear"))


def test_zero_run_identities(params, grid):
    W = make_initial(InitialSpec(amplitude=0.0), params, grid).W
    _, s = run(W, params, StepConfig(t_final=0.5), "nonlinear")
    assert verify_dissipation_identity(s) == 0.0
    rep = check_conservation(s, params, "nonlinear")
    assert rep.max_mass == 0.0 and rep.max_third_residual == 0.0 and rep.third_asserted
    assert not check_conservation(s, ModelParams(0.5, 0.25), "nonlinear").third_asserted


def test_record_fields_complete(params, grid):
    W = make_initial(InitialSpec(amplitude=0.01), params, grid).W
    _, s = run(W, params, StepConfig(t_final=0.2), "nonlinear")
    for row in s.rows():
        assert len(row) == len(COLUMNS)
    lhs = s.column("diss_lhs")
    assert np.all(np.isfinite(lhs))
    # entropy sandwich at every record
    delta = 0.1
    L, wy = s.column("entropyL"), s.column("normWy2")
    assert np.all(L >= 0.5 * (1 - delta) * wy - 1e-15) and np.all(L <= 0.5 * (1 + delta) * wy + 1e-15)
