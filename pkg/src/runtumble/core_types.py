"""Parameters, staggered grid, weighted quadrature and pair fields.

The perturbation pair ``W = (u, v)`` lives at the cell centers of a uniform
grid on ``[-L, L]`` whose origin sits on a cell edge, so that ``sign(y)`` is
never ambiguous and one-sided limits at ``y = 0`` can be taken from each side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TAIL_BUDGET = 16.0


class ConfigError(ValueError):
    """Invalid parameters or grid settings."""


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the two-velocity model.

    Parameters
    ----------
    chi : float
        Chemotactic sensitivity, strictly between 0 and 1.
    alpha : float
        Degradation rate of the chemoattractant, nonnegative.
    sigma, mass : float, optional
        Tumbling intensity and total mass. Fixed at 2 and ``1/chi`` unless
        ``normalized`` is False.
    """

    chi: float = 0.5
    alpha: float = 0.0
    sigma: float | None = None
    mass: float | None = None
    normalized: bool = True

    def __post_init__(self):
        if not (0.0 < self.chi < 1.0) or not math.isfinite(self.chi):
            raise ConfigError("chi must be in (0,1)")
        if not (self.alpha >= 0.0) or not math.isfinite(self.alpha):
            raise ConfigError("alpha must be >= 0")
        if self.sigma is None:
            object.__setattr__(self, "sigma", 2.0)
        if self.mass is None:
            object.__setattr__(self, "mass", 1.0 / self.chi)
        if self.normalized and (self.sigma != 2.0 or abs(self.mass * self.chi - 1.0) > 1e-15):
            raise ConfigError("sigma=2 and mass=1/chi are required unless normalized=False")

    @property
    def sqrt_alpha(self) -> float:
        return math.sqrt(self.alpha)

    @property
    def lam(self) -> float:
        """Decay rate ``2 chi + sqrt(alpha)`` of the chemoattractant weight."""
        return 2.0 * self.chi + math.sqrt(self.alpha)


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform cell-centered grid on ``[-L, L]`` with the origin on an edge."""

    L: float
    n_cells: int
    chi: float
    lam: float
    h: float = field(init=False)
    y: np.ndarray = field(init=False, repr=False)
    sign: np.ndarray = field(init=False, repr=False)
    w_chi: np.ndarray = field(init=False, repr=False)
    w_lam: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        h = 2.0 * self.L / self.n_cells
        y = -self.L + (np.arange(self.n_cells) + 0.5) * h
        # enforce exact symmetry of the centers
        y = 0.5 * (y - y[::-1])
        ay = np.abs(y)
        for name, val in (
            ("h", h),
            ("y", y),
            ("sign", np.sign(y)),
            ("w_chi", np.exp(-2.0 * self.chi * ay)),
            ("w_lam", np.exp(-self.lam * ay)),
        ):
            if isinstance(val, np.ndarray):
                val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def n(self) -> int:
        return self.n_cells

    @property
    def mid(self) -> int:
        """Index of the first cell with ``y > 0``."""
        return self.n_cells // 2

    def weight(self, a: float) -> np.ndarray:
        """Pointwise weight ``exp(-a|y|)`` at the centers."""
        if a == 2.0 * self.chi:
            return self.w_chi
        if a == self.lam:
            return self.w_lam
        return np.exp(-a * np.abs(self.y))

    def same_as(self, other: "Grid") -> bool:
        return self is other or (
            self.n_cells == other.n_cells and self.L == other.L
        )


def build_grid(params: ModelParams, L: float, n_cells: int) -> Grid:
    """Build the staggered grid and check the truncation tail budget.

    Raises
    ------
    ConfigError
        If ``n_cells`` is odd or below 16, ``L`` is not positive, or
        ``L * min(2 chi, lambda) < 16``.
    """
    if int(n_cells) != n_cells or n_cells < 16 or n_cells % 2:
        raise ConfigError(f"n_cells must be an even integer >= 16, got {n_cells}")
    if not L > 0:
        raise ConfigError("L must be positive")
    rate = min(2.0 * params.chi, params.lam)
    if L * rate < TAIL_BUDGET:
        raise ConfigError(
            f"L={L} too small: L*min(2chi, lambda) = {L * rate:.3g} < {TAIL_BUDGET:g}"
        )
    return Grid(float(L), int(n_cells), params.chi, params.lam)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Values at the cell centers of a grid."""

    values: np.ndarray
    grid: Grid

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n_cells,):
            raise ValueError("field length must equal n_cells")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", vals)

    def __add__(self, other):
        return ScalarField(self.values + _vals(other, self.grid), self.grid)

    def __sub__(self, other):
        return ScalarField(self.values - _vals(other, self.grid), self.grid)

    def __mul__(self, c):
        return ScalarField(self.values * _vals(c, self.grid), self.grid)

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(-self.values, self.grid)


def _vals(obj, grid: Grid):
    if isinstance(obj, ScalarField):
        if not obj.grid.same_as(grid):
            raise ValueError("fields live on different grids")
        return obj.values
    return obj


@dataclass(frozen=True, eq=False)
class PairField:
    """Perturbation pair ``W = (u, v)`` on a common grid."""

    u: ScalarField
    v: ScalarField

    def __post_init__(self):
        if not self.u.grid.same_as(self.v.grid):
            raise ValueError("u and v must share a grid")

    @classmethod
    def from_arrays(cls, u, v, grid: Grid) -> "PairField":
        return cls(ScalarField(u, grid), ScalarField(v, grid))

    @classmethod
    def zeros(cls, grid: Grid) -> "PairField":
        z = np.zeros(grid.n_cells)
        return cls.from_arrays(z, z, grid)

    @property
    def grid(self) -> Grid:
        return self.u.grid

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.u.values, self.v.values])

    def __add__(self, other: "PairField"):
        return PairField(self.u + other.u, self.v + other.v)

    def __sub__(self, other: "PairField"):
        return PairField(self.u - other.u, self.v - other.v)

    def __mul__(self, c: float):
        return PairField(self.u * c, self.v * c)

    __rmul__ = __mul__


def weighted_inner(f: ScalarField, g: ScalarField, a: float) -> float:
    """Midpoint rule for ``int f g exp(-a|y|) dy``."""
    if not f.grid.same_as(g.grid):
        raise ValueError("fields live on different grids")
    grid = f.grid
    return float(np.sum(f.values * g.values * grid.weight(a)) * grid.h)


def weighted_average(f: ScalarField, a: float) -> float:
    """Normalized average ``(a/2) int f exp(-a|y|) dy``."""
    grid = f.grid
    return float(0.5 * a * np.sum(f.values * grid.weight(a)) * grid.h)


def derivative_array(values: np.ndarray, h: float) -> np.ndarray:
    """Second-order derivative that never differences across ``y = 0``.

    Central differences in the interior of each half-line, one-sided
    three-point stencils in the two cells next to the origin and at both ends.
    """
    f = np.asarray(values, dtype=float)
    n = f.shape[-1]
    if n < 4:
        raise ValueError("need at least 4 cells")
    m = n // 2
    d = np.empty_like(f)
    d[..., 1:-1] = (f[..., 2:] - f[..., :-2]) / (2.0 * h)
    fwd = lambda i: (-3.0 * f[..., i] + 4.0 * f[..., i + 1] - f[..., i + 2]) / (2.0 * h)
    bwd = lambda i: (3.0 * f[..., i] - 4.0 * f[..., i - 1] + f[..., i - 2]) / (2.0 * h)
    d[..., 0] = fwd(0)
    d[..., m] = fwd(m)
    d[..., n - 1] = bwd(n - 1)
    d[..., m - 1] = bwd(m - 1)
    return d


def spatial_derivative(f: ScalarField) -> ScalarField:
    """Discrete ``d/dy`` preserving one-sided limits at the origin."""
    return ScalarField(derivative_array(f.values, f.grid.h), f.grid)


def pair_derivative(W: PairField) -> PairField:
    return PairField(spatial_derivative(W.u), spatial_derivative(W.v))


# quadratic extrapolation to the edge from centers at h/2, 3h/2, 5h/2
_EXTRAP = np.array([15.0, -10.0, 3.0]) / 8.0


def one_sided_limits(values: np.ndarray):
    """Return ``(f(0-), f(0+))`` by quadratic one-sided extrapolation.

    Works along the last axis, so a stack of fields gives arrays of limits.
    """
    f = np.asarray(values, dtype=float)
    m = f.shape[-1] // 2
    right = f[..., m:m + 3] @ _EXTRAP
    left = f[..., [m - 1, m - 2, m - 3]] @ _EXTRAP
    if f.ndim == 1:
        return float(left), float(right)
    return left, right


def jump_average(f: ScalarField) -> float:
    """Mean of the one-sided limits of ``f`` at the origin."""
    if f.grid.n_cells < 8:
        raise ValueError("need at least 8 cells")
    left, right = one_sided_limits(f.values)
    return 0.5 * (left + right)


def pi_project(W: PairField) -> tuple[PairField, PairField]:
    """Split ``W`` into its local-equilibrium part and the remainder."""
    m = 0.5 * (W.u.values + W.v.values)
    d = 0.5 * (W.u.values - W.v.values)
    grid = W.grid
    return PairField.from_arrays(m, m, grid), PairField.from_arrays(d, -d, grid)


@dataclass(frozen=True)
class PairNorms:
    """Squared weighted norms of a pair and of its derivative."""

    W2: float
    PiW2: float
    IPiW2: float
    Wy2: float
    PiWy2: float
    IPiWy2: float

    @property
    def H1(self) -> float:
        return math.sqrt(self.W2 + self.Wy2)


def _split_norms(W: PairField) -> tuple[float, float, float]:
    grid = W.grid
    wh = grid.w_chi * grid.h
    u, v = W.u.values, W.v.values
    total = float(np.sum((u * u + v * v) * wh))
    pi = float(0.5 * np.sum((u + v) ** 2 * wh))
    ipi = float(0.5 * np.sum((u - v) ** 2 * wh))
    return total, pi, ipi


def pair_norm2(W: PairField) -> float:
    return _split_norms(W)[0]


def pair_inner(W1: PairField, W2: PairField) -> float:
    grid = W1.grid
    a = 2.0 * grid.chi
    return weighted_inner(W1.u, W2.u, a) + weighted_inner(W1.v, W2.v, a)


def pair_norms(W: PairField, Wy: PairField) -> PairNorms:
    """Weighted norms with respect to ``exp(-2 chi |y|)``."""
    a = _split_norms(W)
    b = _split_norms(Wy)
    return PairNorms(*a, *b)
