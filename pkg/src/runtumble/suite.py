"""The acceptance property suite.

Each ``criterion_*`` function runs one numbered criterion and returns a list of
:class:`CheckResult`; a criterion passes when all of its entries pass. The
keyword arguments default to the acceptance scale; the ``check`` command of
the CLI passes the configured values instead.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .characteristics_oracle import XdotPath, duhamel_solve, jump_representation, weighted_l1_distance
from .chemo_field import check_single_peak, density, solve_chemo
from .core_types import (
    ModelParams,
    PairField,
    ScalarField,
    build_grid,
    jump_average,
    pair_derivative,
    spatial_derivative,
)
from .equilibrium import InitialSpec, make_initial
from .hypocoercivity import (
    apply_A,
    apply_A_zeta,
    default_delta,
    modified_entropy,
    theory_constants,
)
from .inequality_lab import (
    check_interpolation,
    check_poincare,
    fit_decay_rate,
    operators_for,
    third_law_residual,
    verify_dissipation_identity,
    xdot_bound_violations,
)
from .transport_solver import SolverAbort, SolverState, StepConfig, run, step

ROUNDOFF = 1e-14


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    tolerance: float
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = bool(d["passed"])
        d["measured"] = _json_float(d["measured"])
        d["tolerance"] = _json_float(d["tolerance"])
        return d


def _json_float(x):
    x = float(x)
    return x if math.isfinite(x) else str(x)


def orders(errors) -> np.ndarray:
    e = np.asarray(errors, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log2(e[:-1] / e[1:])


def _refinement(name: str, errors, min_ratio: float | None = None, min_order: float | None = None,
                **details) -> CheckResult:
    """Pass when every successive ratio (or order) clears its threshold.

    Errors already at roundoff count as converged.
    """
    e = np.asarray(errors, dtype=float)
    details = {**details, "errors": e.tolist()}
    if np.all(e <= ROUNDOFF):
        return CheckResult(name, True, 0.0, ROUNDOFF, {**details, "note": "errors at roundoff"})
    if min_ratio is not None:
        with np.errstate(divide="ignore", invalid="ignore"):
            r = e[:-1] / e[1:]
        details["ratios"] = r.tolist()
        return CheckResult(name, bool(np.all(r >= min_ratio)), float(np.min(r)), min_ratio, details)
    o = orders(e)
    details["orders"] = o.tolist()
    return CheckResult(name, bool(np.all(o >= min_order)), float(np.min(o)), min_order, details)


def _random_pair(params, grid, seed: int) -> PairField:
    spec = InitialSpec(shape="random_smooth", amplitude=0.9, seed=seed, constraint_mode="none")
    return make_initial(spec, params, grid).W


def _initial(params, grid, amplitude, **kw) -> PairField:
    return make_initial(InitialSpec(amplitude=amplitude, **kw), params, grid).W


# --- 1-6: identities and inequalities ---------------------------------------------------------

def criterion_1(chi=0.5, L=20.0, n_cells=4000, steps=10_000) -> list[CheckResult]:
    """Zero perturbation stays zero under the time stepper in both modes."""
    out = []
    for mode, alpha in (("nonlinear", 0.0), ("nonlinear", 0.25), ("linearized", 0.25)):
        p = ModelParams(chi, alpha)
        g = build_grid(p, L, n_cells)
        st = SolverState(PairField.zeros(g), mode=mode)
        cfg = StepConfig()
        worst = 0.0
        for _ in range(steps):
            st = step(st, p, cfg)
            worst = max(worst, float(np.max(np.abs(st.W.stacked()))), abs(st.xdot_last))
        out.append(CheckResult(f"steady state {mode} alpha={alpha}", worst <= 1e-13, worst, 1e-13,
                               {"steps": steps}))
    return out


def criterion_2(chi=0.5, L=20.0, n_cells=1000, n_fields=100) -> list[CheckResult]:
    """<LW, W> = -2 |(I - Pi) W|^2."""
    p = ModelParams(chi)
    g = build_grid(p, L, n_cells)
    ops = operators_for(p, g)
    worst = 0.0
    for k in range(n_fields):
        w = _random_pair(p, g, k).stacked()
        lhs = ops.inner(ops.L @ w, w)
        ipw = w - ops.Pi @ w
        rhs = -2.0 * ops.inner(ipw, ipw)
        worst = max(worst, abs(lhs - rhs) / max(1.0, ops.inner(w, w)))
    return [CheckResult("microscopic coercivity", worst <= 1e-12, worst, 1e-12, {"fields": n_fields})]


def criterion_3(chi=0.5, L=20.0, n_cells=1000, n_fields=100) -> list[CheckResult]:
    """Pi T Pi = 0 and Pi^2 = Pi."""
    p = ModelParams(chi)
    g = build_grid(p, L, n_cells)
    ops = operators_for(p, g)
    ptp, pp = 0.0, 0.0
    for k in range(n_fields):
        w = _random_pair(p, g, k).stacked()
        tpw = ops.T @ (ops.Pi @ w)
        ptp = max(ptp, float(np.max(np.abs(ops.Pi @ tpw))) / max(1.0, float(np.max(np.abs(tpw)))))
        pw = ops.Pi @ w
        pp = max(pp, float(np.max(np.abs(ops.Pi @ pw - pw))) / max(1.0, float(np.max(np.abs(w)))))
    return [
        CheckResult("Pi T Pi = 0", ptp <= 1e-13, ptp, 1e-13, {"fields": n_fields}),
        CheckResult("Pi^2 = Pi", pp <= 1e-13, pp, 1e-13, {"fields": n_fields}),
    ]


def criterion_4(chi=0.5, alpha=0.0, L=20.0, n_cells=1000, n_fields=100) -> list[CheckResult]:
    """Bound on A, entropy sandwich and the zeta cross-check."""
    p = ModelParams(chi, alpha)
    g = build_grid(p, L, n_cells)
    ops = operators_for(p, g)
    delta = default_delta(p, 0.0)
    rng = np.random.default_rng(0)
    s_bound, s_low, s_high = math.inf, math.inf, math.inf
    for k in range(n_fields):
        W = _random_pair(p, g, k)
        noise = rng.standard_normal((2, g.n)) * 0.1
        Wy = pair_derivative(W) + PairField.from_arrays(noise[0], noise[1], g)
        wy = Wy.stacked()
        AW = apply_A(ops, Wy).stacked()
        ipw = wy - ops.Pi @ wy
        s_bound = min(s_bound, 0.5 * math.sqrt(ops.inner(ipw, ipw)) - math.sqrt(ops.inner(AW, AW)))
        n2 = ops.inner(wy, wy)
        ent = modified_entropy(ops, Wy, delta)
        s_low = min(s_low, ent - 0.5 * (1 - delta) * n2)
        s_high = min(s_high, 0.5 * (1 + delta) * n2 - ent)
    out = [
        CheckResult("|A Wy| <= |(I-Pi) Wy|/2", s_bound >= -1e-10, s_bound, -1e-10),
        CheckResult("entropy sandwich lower", s_low >= -1e-10, s_low, -1e-10, {"delta": delta}),
        CheckResult("entropy sandwich upper", s_high >= -1e-10, s_high, -1e-10, {"delta": delta}),
    ]
    errs = []
    for h in (0.04, 0.02, 0.01):
        gh = build_grid(p, L, int(round(2 * L / h)))
        oh = operators_for(p, gh)
        W = _random_pair(p, gh, 7)
        d = (apply_A(oh, pair_derivative(W)) - apply_A_zeta(oh, W)).stacked()
        errs.append(math.sqrt(oh.inner(d, d)))
    out.append(_refinement("zeta-route consistency order", errs, min_order=0.9, h=[0.04, 0.02, 0.01]))
    return out


def poincare_witness(chi: float, L: float = 400.0, h: float = 0.1, kappa_frac: float = 0.95) -> float:
    """Poincare ratio of ``y exp(kappa |y|)``, which tends to 1 as ``kappa -> chi``."""
    p = ModelParams(chi)
    g = build_grid(p, L, int(round(2 * L / h)))
    y = g.y
    w = y * np.exp(kappa_frac * chi * np.abs(y))
    return check_poincare(ScalarField(w, g), p)


def criterion_5(chi=0.5, L=20.0, n_cells=1000, n_fields=100) -> list[CheckResult]:
    p = ModelParams(chi)
    g = build_grid(p, L, n_cells)
    worst = 0.0
    for k in range(n_fields):
        W = _random_pair(p, g, k)
        worst = max(worst, check_poincare(W.u, p), check_poincare(W.v, p))
    tol = 1.0 + 5.0 * g.h
    wit = poincare_witness(chi)
    return [
        CheckResult("Poincare ratio <= 1 + 5h", worst <= tol, worst, tol, {"fields": n_fields}),
        CheckResult("Poincare witness ratio >= 0.95", wit >= 0.95, wit, 0.95,
                    {"L": 400.0, "h": 0.1, "kappa": 0.95 * chi}),
    ]


def criterion_6(chi=0.5, L=20.0, n_cells=1000, n_fields=100, alphas=(0.25, 1.0)) -> list[CheckResult]:
    out = []
    cases = [(0.0, 2 * chi, 2 * chi)] + [(a, 2 * chi + math.sqrt(a), 2 * chi) for a in alphas]
    for alpha, a, b in cases:
        p = ModelParams(chi, alpha)
        g = build_grid(p, L, n_cells)
        worst = math.inf
        for k in range(n_fields):
            W = _random_pair(p, g, k)
            worst = min(worst, check_interpolation(W.u, a, b), check_interpolation(W.v, a, b))
        tol = -5.0 * g.h
        out.append(CheckResult(f"interpolation a={a:g} b={b:g}", worst >= tol, worst, tol,
                               {"alpha": alpha, "fields": n_fields}))
    return out


def criterion_12() -> list[CheckResult]:
    cs = theory_constants(ModelParams(0.5, 0.0))
    expected = {"mu": 2.0, "c0": 4 * math.sqrt(0.5), "c1": 4 * math.sqrt(0.5) * 2, "c2": 2.0, "c3": 1.0}
    out = []
    for k, v in expected.items():
        err = abs(getattr(cs, k) - v)
        out.append(CheckResult(f"constant {k}", err <= 1e-12, err, 1e-12, {"value": getattr(cs, k), "expected": v}))
    return out


# --- 7-11: trajectories -----------------------------------------------------------------------

def _halvings(n_fine: int, count: int = 3) -> list[int]:
    ns = [n_fine // 2**k for k in reversed(range(count))]
    if any(n % 2 or n < 16 for n in ns):
        raise ValueError(f"n_cells={n_fine} cannot be halved {count - 1} times into even grids")
    return ns


def criterion_7(chi=0.5, L=20.0, n_cells=4000, amplitude=0.01, alphas=(0.0, 0.25),
                t_final=2.0) -> list[CheckResult]:
    """Exponential decay of <u - v>_lam in linearized mode."""
    out = []
    for alpha in alphas:
        p = ModelParams(chi, alpha)
        res, base = [], []
        for n in _halvings(n_cells):
            g = build_grid(p, L, n)
            W = _initial(p, g, amplitude, constraint_mode="project_conserved")
            _, s = run(W, p, StepConfig(t_final=t_final), "linearized")
            res.append(abs(third_law_residual(s)[-1]))
            base.append(abs(s.column("third_law")[0]))
        if base[-1] == 0.0:
            out.append(CheckResult(f"third law alpha={alpha}", res[-1] <= ROUNDOFF, res[-1], ROUNDOFF,
                                   {"note": "zero initial functional"}))
        else:
            rel = res[-1] / base[-1]
            out.append(CheckResult(f"third law relative defect alpha={alpha}", rel <= 0.01, rel, 0.01,
                                   {"n_cells": n_cells, "t": t_final}))
        out.append(_refinement(f"third law refinement alpha={alpha}", res, min_ratio=1.8))
    return out


def criterion_8(chi=0.5, L=20.0, n_cells=4000, amplitude=0.01, t_final=1.0) -> list[CheckResult]:
    """Dissipation identity residual under refinement."""
    out = []
    for mode, alpha in (("nonlinear", 0.0), ("linearized", 0.25)):
        p = ModelParams(chi, alpha)
        res = []
        for n in _halvings(n_cells):
            g = build_grid(p, L, n)
            W = _initial(p, g, amplitude, compatible_origin=True)
            _, s = run(W, p, StepConfig(t_final=t_final), mode)
            res.append(verify_dissipation_identity(s))
        out.append(_refinement(f"dissipation identity {mode} alpha={alpha}", res, min_ratio=1.8))
    return out


def criterion_9(chi=0.5, L=20.0, n_cells=4000, amplitude=0.01, t_final=10.0, fit_from=1.0) -> list[CheckResult]:
    """Nonlinear decay, velocity bound and convergence of the peak position."""
    p = ModelParams(chi, 0.0)
    g = build_grid(p, L, n_cells)
    W = _initial(p, g, amplitude)
    traj, s = run(W, p, StepConfig(t_final=t_final, delta=default_delta(p, 0.0)), "nonlinear")
    t, wy = s.column("t"), s.column("normWy2")
    out = []
    if wy[0] == 0.0:
        out.append(CheckResult("decay fit", True, 0.0, 0.0, {"note": "zero perturbation"}))
    else:
        fit = fit_decay_rate(t, wy, (fit_from, t_final))
        out.append(CheckResult("fitted rate > 0", fit.gamma_hat > 0, fit.gamma_hat, 0.0, asdict(fit)))
        out.append(CheckResult("fit r^2 >= 0.98", fit.r2 >= 0.98, fit.r2, 0.98, asdict(fit)))
    ratio = math.sqrt(wy[-1] / wy[0]) if wy[0] > 0 else 0.0
    out.append(CheckResult(f"|Wy({t_final:g})| <= 0.2 |Wy(0)|", ratio <= 0.2, ratio, 0.2))
    nv = xdot_bound_violations(s)
    out.append(CheckResult("|xdot| <= bound when valid", nv == 0, nv, 0,
                           {"valid_records": int(np.sum(s.column("xdot_bound_valid")))}))
    tt, x = np.asarray(traj.times), np.asarray(traj.x)
    xm = float(np.interp(0.5 * t_final, tt, x))
    lhs, rhs = abs(x[-1] - xm), 0.1 * abs(xm - x[0]) + 1e-6
    out.append(CheckResult("x(t) Cauchy", lhs <= rhs, lhs, rhs, {"x_mid": xm, "x_end": float(x[-1])}))
    return out


def criterion_10(chi=0.5, alpha=0.25, L=20.0, n_cells=4000, amplitude=0.01, t_final=10.0,
                 fit_from=1.0) -> list[CheckResult]:
    """Linearized decay of the alpha-entropy against the theoretical rate."""
    p = ModelParams(chi, alpha)
    cs = theory_constants(p)
    g = build_grid(p, L, n_cells)
    W = _initial(p, g, amplitude, constraint_mode="project_all")
    _, s = run(W, p, StepConfig(t_final=t_final, delta=cs.delta_alpha), "linearized")
    t, La = s.column("t"), s.column("entropyLalpha")
    two_gamma = 2.0 * cs.gamma_alpha
    if La[0] == 0.0:
        return [CheckResult("alpha-entropy decay", True, 0.0, 0.0, {"note": "zero perturbation"})]
    fit = fit_decay_rate(t, La, (fit_from, t_final))
    env = float(np.max(La / (La[0] * np.exp(-two_gamma * t))))
    return [
        CheckResult("alpha-entropy fitted rate >= 0.9 * 2 gamma", fit.gamma_hat >= 0.9 * two_gamma,
                    fit.gamma_hat, 0.9 * two_gamma, {"gamma_theory": cs.gamma_alpha, "delta": cs.delta_alpha,
                                                     "r2": fit.r2}),
        CheckResult("alpha-entropy below theoretical envelope", env <= 1.05, env, 1.05),
    ]


def criterion_11(chi=0.5, L=20.0, n_cells=4000, amplitude=0.05, t_final=1.0, t_jump=0.5,
                 n_jump=8000, tol=1e-12) -> list[CheckResult]:
    """Grid solver against the characteristic oracle."""
    p = ModelParams(chi, 0.0)
    ns = _halvings(n_cells)
    # frozen path from a nonlinear run on the finest grid
    g = build_grid(p, L, ns[-1])
    tr, _ = run(_initial(p, g, amplitude), p, StepConfig(t_final=t_final), "nonlinear", diagnostics=False)
    frozen = XdotPath.from_trajectory(tr)
    out = []
    for label, path, mode in (("xdot = 0", XdotPath.constant(0.0, t_final), "linearized"),
                              ("frozen nonlinear path", frozen, "nonlinear")):
        dist = []
        for n in ns:
            g = build_grid(p, L, n)
            W = _initial(p, g, amplitude)
            tr, _ = run(W, p, StepConfig(t_final=t_final), mode, xdot_path=path, diagnostics=False)
            dist.append(weighted_l1_distance(tr.final, duhamel_solve(W, path, t_final, tol, p)))
        out.append(_refinement(f"oracle distance order ({label})", dist, min_order=0.9, n_cells=ns,
                               p=path.p))
    errs = []
    nj = _halvings(n_jump)
    for n in nj:
        g = build_grid(p, L, n)
        tr, _ = run(_initial(p, g, amplitude), p, StepConfig(t_final=t_jump, keep_history=True),
                    "nonlinear", diagnostics=False)
        Ju, Jv = jump_representation(tr, XdotPath.from_trajectory(tr), t_jump, p)
        Wf = tr.final
        errs.append(abs(Ju - jump_average(spatial_derivative(Wf.u)))
                    + abs(Jv - jump_average(spatial_derivative(Wf.v))))
    out.append(_refinement("jump representation order", errs, min_order=0.9, n_cells=nj))
    return out


def criterion_13(chi=0.5, alpha=25.0, L=20.0, n_cells=4000) -> list[CheckResult]:
    """Two separated bumps with strong degradation give two chemoattractant peaks."""
    p = ModelParams(chi, alpha)
    g = build_grid(p, L, n_cells)
    spec = InitialSpec(shape="two_bump", amplitude=100.0, center=3.0, width=0.3, constraint_mode="none")
    W = make_initial(spec, p, g).W
    ok, _ = check_single_peak(solve_chemo(density(W, p), p))
    try:
        run(W, p, StepConfig(t_final=1.0), "nonlinear", diagnostics=False)
        kind = None
    except SolverAbort as exc:
        kind = exc.kind
    return [
        CheckResult("two-bump data has two peaks", not ok, float(ok), 0.0),
        CheckResult("solver aborts with H1", kind == "H1", float(kind == "H1"), 1.0, {"abort": kind}),
    ]


CRITERIA = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
    6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10,
    11: criterion_11, 12: criterion_12, 13: criterion_13,
}
