"""Steady state, tumbling kernel and constraint-respecting initial data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_types import (
    ConfigError,
    Grid,
    ModelParams,
    PairField,
    ScalarField,
    derivative_array,
    one_sided_limits,
)

SHAPES = ("gaussian_bump", "cosine_packet", "random_smooth", "two_bump")
CONSTRAINT_MODES = ("project_all", "project_conserved", "project_mass_only", "none")


@dataclass(frozen=True)
class InitialSpec:
    """Recipe for an initial perturbation.

    ``constraint_mode`` selects which linear functionals are projected out:

    * ``project_all``: mass, centering and ``<u-v>_lambda``;
    * ``project_conserved``: mass and centering only;
    * ``project_mass_only``: mass only;
    * ``none``: raw shape.

    With ``compatible_origin`` the data also satisfy ``u(0) = v(0)``, which
    removes the derivative jump that would otherwise be shed from the origin
    at ``t = 0+``.
    """

    shape: str = "gaussian_bump"
    amplitude: float = 0.01
    center: float = 0.5
    width: float = 1.0
    seed: int = 0
    constraint_mode: str = "project_all"
    compatible_origin: bool = False

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ConfigError(f"shape must be one of {SHAPES}")
        if self.constraint_mode not in CONSTRAINT_MODES:
            raise ConfigError(f"constraint_mode must be one of {CONSTRAINT_MODES}")
        if not self.amplitude >= 0:
            raise ConfigError("amplitude must be >= 0")
        if not self.width > 0:
            raise ConfigError("width must be > 0")


@dataclass(frozen=True, eq=False)
class SteadyState:
    eta: ScalarField


@dataclass(frozen=True, eq=False)
class InitialData:
    """Projected initial pair and the sup norms used for smallness checks."""

    W: PairField
    sup_u: float
    sup_v: float
    sup_uy: float
    sup_vy: float


def steady_state(params: ModelParams, grid: Grid) -> SteadyState:
    return SteadyState(ScalarField(np.exp(-2.0 * params.chi * np.abs(grid.y)), grid))


def tumbling_kernel(y: float, v: int, chi: float) -> float:
    """Moving-frame tumbling rate ``1 + chi sign(y) sign(v)``."""
    if v not in (-1, 1):
        raise ValueError("velocity must be -1 or +1")
    return 1.0 + chi * float(np.sign(y)) * v


def constraint_values(u: np.ndarray, v: np.ndarray, params: ModelParams, grid: Grid) -> np.ndarray:
    """Mass, centering, third-law functionals and ``u(0) - v(0)``.

    Works on stacks of fields along the leading axes.
    """
    h = grid.h
    a, lam = 2.0 * params.chi, params.lam
    mass = 0.5 * a * h * ((u + v) @ grid.w_chi)
    uy = derivative_array(u, h)
    vy = derivative_array(v, h)
    centering = 0.5 * lam * h * ((uy + vy) @ grid.w_lam)
    third = 0.5 * lam * h * ((u - v) @ grid.w_lam)
    lu, ru = one_sided_limits(u)
    lv, rv = one_sided_limits(v)
    origin = 0.5 * (lu + ru) - 0.5 * (lv + rv)
    return np.stack([mass, centering, third, origin], axis=-1)


def _correction_profiles(grid: Grid) -> np.ndarray:
    y = grid.y
    even = np.exp(-y**2)
    odd = y * np.exp(-y**2)
    narrow = np.exp(-4.0 * y**2)
    # (u, v) pairs: even symmetric, odd symmetric, even antisymmetric, narrow antisymmetric
    return np.array([
        [even, even],
        [odd, odd],
        [even, -even],
        [narrow, -narrow],
    ])


def project_constraints(u: np.ndarray, v: np.ndarray, params: ModelParams, grid: Grid,
                        which: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
    """Subtract correction profiles so the selected functionals vanish.

    ``which`` indexes into (mass, centering, third law, origin match).
    """
    if not which:
        return u, v
    prof = _correction_profiles(grid)[list(which)]
    idx = list(which)
    G = constraint_values(prof[:, 0], prof[:, 1], params, grid)[:, idx].T
    if np.linalg.cond(G) > 1e10:
        raise RuntimeError("constraint projection system is singular")
    rhs = constraint_values(u, v, params, grid)[idx]
    c = np.linalg.solve(G, rhs)
    u = u - c @ prof[:, 0]
    v = v - c @ prof[:, 1]
    # one refinement pass removes the last roundoff
    rhs = constraint_values(u, v, params, grid)[idx]
    c = np.linalg.solve(G, rhs)
    return u - c @ prof[:, 0], v - c @ prof[:, 1]


def _raw_shape(spec: InitialSpec, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    y = grid.y
    c, w = spec.center, spec.width
    if spec.shape == "gaussian_bump":
        u = np.exp(-((y - c) / w) ** 2)
        v = -0.5 * np.exp(-((y + 0.5 * c) / w) ** 2)
    elif spec.shape == "two_bump":
        # identical bumps at +-center on both components; with a large
        # amplitude the density has two separated maxima
        u = np.exp(-((y - c) / w) ** 2) + np.exp(-((y + c) / w) ** 2)
        v = u.copy()
    elif spec.shape == "cosine_packet":
        env = np.exp(-((y - c) / w) ** 2)
        u = np.cos(2.0 * (y - c) / w) * env
        v = np.sin(2.0 * (y - c) / w) * env
    else:
        rng = np.random.default_rng(spec.seed)
        u = np.zeros_like(y)
        v = np.zeros_like(y)
        for arr in (u, v):
            for _ in range(5):
                amp = rng.uniform(-1.0, 1.0)
                mu = c + rng.uniform(-3.0, 3.0)
                s = w * rng.uniform(0.5, 2.0)
                arr += amp * np.exp(-((y - mu) / s) ** 2)
        scale = max(np.max(np.abs(u)), np.max(np.abs(v)))
        u, v = u / scale, v / scale
    return u, v


_MODE_CONSTRAINTS = {
    "project_all": (0, 1, 2),
    "project_conserved": (0, 1),
    "project_mass_only": (0,),
    "none": (),
}


def make_initial(spec: InitialSpec, params: ModelParams, grid: Grid) -> InitialData:
    """Build the initial pair from ``spec`` and project out the constraints.

    Raises
    ------
    ConfigError
        If the resulting density ``(1+u) eta`` or ``(1+v) eta`` is not
        positive somewhere.
    """
    u, v = _raw_shape(spec, grid)
    u, v = spec.amplitude * u, spec.amplitude * v
    which = _MODE_CONSTRAINTS[spec.constraint_mode]
    if spec.compatible_origin:
        which = which + (3,)
    u, v = project_constraints(u, v, params, grid, which)
    if np.any(1.0 + u <= 0.0) or np.any(1.0 + v <= 0.0):
        raise ConfigError("initial perturbation makes the density nonpositive (1+u <= 0 or 1+v <= 0)")
    W = PairField.from_arrays(u, v, grid)
    uy = derivative_array(u, grid.h)
    vy = derivative_array(v, grid.h)
    return InitialData(W, float(np.max(np.abs(u))), float(np.max(np.abs(v))),
                       float(np.max(np.abs(uy))), float(np.max(np.abs(vy))))


def steady_residual(params: ModelParams, grid: Grid, W: PairField | None = None) -> float:
    """Max norm of the discrete moving-frame tendency at ``W`` (default 0) with ``xdot = 0``."""
    from .transport_solver import full_tendency

    if W is None:
        W = PairField.zeros(grid)
    du, dv = full_tendency(W.u.values, W.v.values, 0.0, params, grid, "nonlinear")
    return float(max(np.max(np.abs(du)), np.max(np.abs(dv))))
