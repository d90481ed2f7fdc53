"""Hypocoercive operators, modified entropies and the explicit constants.

All adjoints are taken in the discrete inner product with diagonal weight
``M = diag(exp(-2 chi |y_i|) h)`` on each component. The transport operator
is built from the derivative ``D = P^{-1} D_c P + chi sign``, with
``P = diag(exp(-chi |y|))`` and ``D_c`` the antisymmetric central difference.
This makes ``D* = -D + 2 chi sign`` hold exactly, so ``T`` is skew-adjoint and
``Pi T Pi = 0`` to roundoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .core_types import Grid, ModelParams, PairField, ScalarField, one_sided_limits


@dataclass(frozen=True, eq=False)
class DiscreteOperators:
    """Sparse matrices of the operator calculus on one grid.

    ``D``, ``D_adj``, ``lap_eta`` act on scalars; ``T``, ``Pi``, ``L`` act on
    stacked pairs ``[u; v]``; ``weight`` is the diagonal of ``M`` for one component.
    """

    grid: Grid
    chi: float
    weight: np.ndarray
    D: sp.csr_matrix
    D_adj: sp.csr_matrix
    lap_eta: sp.csr_matrix
    T: sp.csr_matrix
    Pi: sp.csr_matrix
    L: sp.csr_matrix
    normal: sp.csc_matrix
    _normal_lu: object
    _zeta_lu: object

    def adjoint(self, X: sp.spmatrix) -> sp.csr_matrix:
        """Adjoint of a pair operator in the weighted inner product."""
        m = np.concatenate([self.weight, self.weight])
        return (sp.diags(1.0 / m) @ X.T @ sp.diags(m)).tocsr()

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        """Weighted inner product of stacked pairs."""
        n = self.grid.n_cells
        return float(a[:n] @ (self.weight * b[:n]) + a[n:] @ (self.weight * b[n:]))


def assemble_operators(params: ModelParams, grid: Grid) -> DiscreteOperators:
    n, h, chi = grid.n_cells, grid.h, params.chi
    ay = np.abs(grid.y)
    weight = np.exp(-2.0 * chi * ay) * h
    half = np.exp(-chi * ay)
    S = sp.diags(grid.sign)
    off = np.full(n - 1, 1.0 / (2.0 * h))
    Dc = sp.diags([-off, off], [-1, 1], format="csr")
    D = (sp.diags(1.0 / half) @ Dc @ sp.diags(half) + chi * S).tocsr()
    M = sp.diags(weight)
    Minv = sp.diags(1.0 / weight)
    D_adj = (Minv @ D.T @ M).tocsr()

    # conservative weighted Laplacian on faces
    yf = 0.5 * (grid.y[1:] + grid.y[:-1])
    wf = np.exp(-2.0 * chi * np.abs(yf))
    G = sp.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n)) / h
    lap = (-sp.diags(1.0 / grid.w_chi) @ G.T @ sp.diags(wf) @ G).tocsr()

    I = sp.identity(n, format="csr")
    T = sp.bmat([[D - chi * S, chi * S], [-chi * S, -D + chi * S]], format="csr")
    Pi = 0.5 * sp.bmat([[I, I], [I, I]], format="csr")
    L = (-2.0 * (sp.identity(2 * n) - Pi)).tocsr()
    normal = (I + D_adj @ D).tocsc()
    return DiscreteOperators(
        grid, chi, weight, D, D_adj, lap, T, Pi, L, normal,
        splu(normal), splu((I - lap).tocsc()),
    )


def _stack(W: PairField) -> np.ndarray:
    return np.concatenate([W.u.values, W.v.values])


def apply_A_array(ops: DiscreteOperators, wy: np.ndarray) -> np.ndarray:
    """Scalar ``z`` with ``A Wy = (z, z)`` for a stacked pair ``wy``.

    ``(T Pi)* Wy`` lies in the range of ``Pi`` and ``I + (T Pi)*(T Pi)`` maps
    ``(z, z)`` to ``((I + D* D) z, (I + D* D) z)``, so one scalar solve suffices.
    """
    n = ops.grid.n_cells
    p, q = wy[:n], wy[n:]
    # (T Pi)* Wy = M^{-1} Pi T^T M Wy, first component
    r = 0.5 * (ops.D_adj @ (p - q))
    return ops._normal_lu.solve(r)


def apply_A(ops: DiscreteOperators, Wy: PairField) -> PairField:
    """``A Wy`` with ``A = (I + (T Pi)*(T Pi))^{-1} (T Pi)*``."""
    z = apply_A_array(ops, _stack(Wy))
    return PairField.from_arrays(z, z.copy(), Wy.grid)


def apply_A_full(ops: DiscreteOperators, Wy: PairField) -> np.ndarray:
    """Same as :func:`apply_A` via the assembled pair matrices (reference path)."""
    TPi = ops.T @ ops.Pi
    TPi_adj = ops.adjoint(TPi)
    n2 = 2 * ops.grid.n_cells
    N = (sp.identity(n2) + TPi_adj @ TPi).tocsc()
    return splu(N).solve(TPi_adj @ _stack(Wy))


def apply_A_zeta(ops: DiscreteOperators, W: PairField) -> PairField:
    """Cross-check route: solve ``zeta - lap_eta zeta = lap_eta (u - v)``, return ``-(zeta/2)(1,1)``."""
    d = W.u.values - W.v.values
    zeta = ops._zeta_lu.solve(ops.lap_eta @ d)
    return PairField.from_arrays(-0.5 * zeta, -0.5 * zeta, W.grid)


def modified_entropy(ops: DiscreteOperators, Wy: PairField, delta: float) -> float:
    """``0.5 |Wy|^2 + delta <A Wy, Wy>``."""
    wy = _stack(Wy)
    z = apply_A_array(ops, wy)
    n = ops.grid.n_cells
    cross = float(z @ (ops.weight * (wy[:n] + wy[n:])))
    return 0.5 * ops.inner(wy, wy) + delta * cross


def modified_entropy_alpha(ops: DiscreteOperators, W: PairField, Wy: PairField, delta: float,
                           params: ModelParams) -> float:
    """``modified_entropy - (sqrt(alpha)/2) <<u - v>>^2``."""
    l, r = one_sided_limits(W.u.values - W.v.values)
    jump = 0.5 * (l + r)
    return modified_entropy(ops, Wy, delta) - 0.5 * params.sqrt_alpha * jump**2


def _origin_terms(W: PairField, Wy: PairField):
    lu, ru = one_sided_limits(W.u.values)
    lv, rv = one_sided_limits(W.v.values)
    luy, ruy = one_sided_limits(Wy.u.values)
    lvy, rvy = one_sided_limits(Wy.v.values)
    return 0.5 * (lu + ru), 0.5 * (lv + rv), 0.5 * (luy + ruy), 0.5 * (lvy + rvy)


def dissipation_rhs(W: PairField, Wy: PairField, xdot: float, params: ModelParams) -> float:
    """Right-hand side of the H1 dissipation identity for the nonlinear system.

    The transport term ``int d/dy(|u_y|^2 + |v_y|^2) eta`` is taken in the
    distributional sense, which equals ``2 chi int sign(y) (|u_y|^2 + |v_y|^2) eta``.
    """
    grid = W.grid
    chi = params.chi
    wh = grid.w_chi * grid.h
    u0, v0, juy, jvy = _origin_terms(W, Wy)
    uy, vy = Wy.u.values, Wy.v.values
    micro = float(((uy - vy) ** 2) @ wh)
    g = uy * uy + vy * vy
    transport = 2.0 * chi * float((grid.sign * g) @ wh)
    return (-micro + 2.0 * chi * (u0 - v0 - 2.0 * xdot) * (juy + jvy)
            - 0.5 * xdot * transport - 4.0 * chi * xdot * (u0 * juy + v0 * jvy))


def dissipation_rhs_lin(W: PairField, Wy: PairField, xdot_lin: float, params: ModelParams) -> float:
    """Right-hand side of the H1 dissipation identity for the linearized system."""
    grid = W.grid
    wh = grid.w_chi * grid.h
    u0, v0, juy, jvy = _origin_terms(W, Wy)
    micro = float(((Wy.u.values - Wy.v.values) ** 2) @ wh)
    return -micro + 2.0 * params.chi * (u0 - v0 - 2.0 * xdot_lin) * (juy + jvy)


@dataclass(frozen=True)
class ConstantSet:
    """Explicit constants of the decay analysis at given ``(chi, alpha, p, c)``."""

    chi: float
    alpha: float
    p: float
    c: float
    mu: float
    c0: float
    c1: float
    c2: float
    c3: float
    beta: float
    delta: float
    eta: float
    mu0: float
    r: float
    g0: float
    lambda1: float
    lambda2: float
    gamma_alpha0: float
    c0p: float
    c1p: float
    c2p: float
    delta_alpha: float
    gamma_alpha: float
    p_ok_decay: bool
    p_ok_bound: bool
    gamma_alpha0_positive: bool

    def g(self, t: float) -> float:
        """Bound ``g(t, p)`` on the nonlocal terms."""
        chi, p, r = self.chi, self.p, self.r
        return 2.0 * (1 + 2 * chi) * self.c * math.exp(-r * t) + 8 * p * chi**2 / r * (1 - math.exp(-r * t))


def theory_constants(params: ModelParams, p: float = 0.0, c: float = 0.0) -> ConstantSet:
    """Evaluate the explicit constants of the entropy estimates.

    Parameters
    ----------
    p : float
        Assumed bound on ``|xdot|``, in ``[0, 1)``.
    c : float
        Smallness of the initial sup norms.
    """
    if not 0.0 <= p < 1.0:
        raise ValueError("p must be in [0,1)")
    chi, sa = params.chi, params.sqrt_alpha
    lam = params.lam
    mu = 4 * chi * math.sqrt(2 * (chi + sa)) / lam
    if chi**2 <= 0.5:
        c0 = 4 * math.sqrt(chi)
    else:
        c0 = 8 * chi**2 * math.sqrt(chi) / math.sqrt((2 * chi - 1) * (2 * chi + 1))
    c1 = 4 * math.sqrt(chi) * (1 + 2 * chi)
    c2 = 1 + 4 * chi**2
    c3 = 4 * chi**2
    beta = (1 + chi) / chi
    s2 = math.sqrt(2 * chi)
    K = 1 + c0 / (2 * s2) + c1 / s2 + beta
    delta = 2.0 / (K + chi / (2 * (1 + chi)) - p * c3 / chi**2)
    eta = 2 - delta * K
    mu0 = 2 / (1 - delta) * (eta - p * (chi + delta * (1 + 4 * chi) / (2 * beta) + delta * c2))
    r = 1 + 2 * chi * (1 - p)
    g0 = math.sqrt(4 * (1 + p) / (r * (1 - p) ** 2))
    lambda1 = 2 * (1 + 2 * chi) * c + 4 * p * chi / (1 - p) + 8 * p * chi**2
    lambda2 = (6 * s2 / (math.sqrt(1 - delta) * (1 - p))
               * (1 + (1 + 2 * chi) / (2 * chi) * math.sqrt(1 + 4 * chi)))
    gamma0 = (mu0 - 30 / (1 - delta) * lambda1) / 2
    c0p = (1 + (1 + chi) / (2 * chi) + c0 / (2 * math.sqrt(2 * chi + sa))
           + lam * (1 + 2 * chi) / (s2 * math.sqrt(chi + sa)))
    c1p = (2 * chi + sa) / (chi + sa)
    c2p = chi / (2 * (1 + chi))
    delta_a = min(0.5, c1p / (c0p + c2p))
    gamma_a = delta_a * c2p / (1 + delta_a)
    return ConstantSet(
        chi, params.alpha, p, c, mu, c0, c1, c2, c3, beta, delta, eta, mu0, r, g0,
        lambda1, lambda2, gamma0, c0p, c1p, c2p, delta_a, gamma_a,
        p_ok_decay=p < chi / (16 * (1 + chi)),
        p_ok_bound=p <= min(1 / (4 * chi), chi / (8 * (1 + chi))),
        gamma_alpha0_positive=gamma0 > 0,
    )


def default_delta(params: ModelParams, p: float) -> float:
    """Entropy weight: the alpha = 0 recipe or ``delta_alpha`` for alpha > 0."""
    cs = theory_constants(params, p)
    return cs.delta if params.alpha == 0 else cs.delta_alpha


def remainder_split(ops: DiscreteOperators, Wy: PairField) -> dict:
    """Terms of the linear part of the entropy production.

    Returns ``D_term = <A T Pi Wy, Wy>`` and the lower bound
    ``chi/(1+chi) |Pi Wy|^2 - |(I-Pi) Wy|^2 - |(I-Pi) Wy| |Pi Wy|`` on it.
    """
    wy = _stack(Wy)
    n = ops.grid.n_cells
    tpi = ops.T @ (ops.Pi @ wy)
    z = apply_A_array(ops, tpi)
    D_term = float(z @ (ops.weight * (wy[:n] + wy[n:])))
    piw = ops.Pi @ wy
    ipiw = wy - piw
    a2, b2 = ops.inner(piw, piw), ops.inner(ipiw, ipiw)
    bound = ops.chi / (1 + ops.chi) * a2 - b2 - math.sqrt(a2 * b2)
    return {"D_term": D_term, "ATPi_lower": ops.chi / (1 + ops.chi) * a2, "corollary_bound": bound}
