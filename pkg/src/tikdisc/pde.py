"""Parabolic forward model and discrete-adjoint misfit gradients.

The governing equation on D = [0, 1] x [-5, 5] is

    u_t = a(t, y) * u_yy + (b - a(t, y)) * u_y

with u(0, y) = max(0, 1 - exp(y)), u(t, -5) = 1, u(t, 5) = 0.  Time stepping
is Crank-Nicolson with centred space differences: writing eta = dt/dy**2 and
am = dt/dy, the spatial stencil applied to an interior row is

    C(a) u |_j = 0.5 * eta * a_j * (u_{j+1} - 2 u_j + u_{j-1})
                 - 0.25 * am * (a_j - b) * (u_{j+1} - u_{j-1})

and each step solves (I - C(a_new)) u_new = (I + C(a_old)) u_old on the
interior, one tridiagonal system per step.  The left-hand rows must be
diagonally dominant, which is checked at assembly; a failure means the time
step is too large for the space step.

The misfit gradient is the exact gradient of the *discretized* functional
a -> ||u(a) - data||^2: differentiate the stepping recurrence, transpose it,
and sweep backwards in time reusing the stored forward states.  Coefficients
given on a coarser grid than the solver's are prolonged bilinearly before
the solve and the gradient is restricted back by the transpose of that
prolongation, so the chain rule stays exact to machine precision.

Solves are single-threaded and deterministic; independent solves share no
mutable state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .grids import Grid, Surface, constant_surface, interpolate, transfer_matrices

__all__ = [
    "PdeParams",
    "CnSystem",
    "true_sigma",
    "true_coefficient",
    "initial_condition",
    "solve_forward",
    "forward_operator",
    "misfit_gradient",
    "ParabolicModel",
]

U_LEFT = 1.0
U_RIGHT = 0.0


@dataclass(frozen=True)
class PdeParams:
    """Drift coefficient, prior diffusion coefficient, and coefficient box."""

    b: float = 0.03
    a0: "float | Surface" = 0.08
    bounds: tuple = (0.005, 1.0)

    def __post_init__(self):
        lo, hi = self.bounds
        if not (0.0 < lo <= hi < np.inf):
            raise ValueError(f"need 0 < a1 <= a2 < inf, got {self.bounds}")
        a0 = self.a0.values if isinstance(self.a0, Surface) else self.a0
        if np.min(a0) < lo or np.max(a0) > hi:
            raise ValueError(f"prior coefficient outside the box {self.bounds}")


def true_sigma(tau, y):
    """Reference volatility: a cosine bump for |y| <= 2/5, flat 2/5 outside."""
    tau = np.asarray(tau, dtype=float)
    y = np.asarray(y, dtype=float)
    bump = 0.4 - 0.16 * np.exp(-tau / 2.0) * np.cos(4.0 * np.pi * y / 5.0)
    return np.where(np.abs(y) <= 0.4, bump, 0.4)


def true_coefficient(grid: Grid) -> Surface:
    """Diffusion coefficient a = sigma**2 / 2 sampled on the grid."""
    tt = grid.t_nodes()[:, None]
    yy = grid.y_nodes()[None, :]
    return Surface(grid, 0.5 * true_sigma(tt, yy) ** 2)


def initial_condition(y):
    """Payoff profile max(0, 1 - exp(y))."""
    return np.maximum(0.0, 1.0 - np.exp(np.asarray(y, dtype=float)))


class CnSystem:
    """Stencil coefficients and tridiagonal factors for one solve.

    Holds the mesh ratios eta = dt/dy**2 and am = dt/dy together with the
    per-node stencil coefficients of C(a); ``lhs_bands`` assembles the banded
    implicit matrix for one time row.  Assembly verifies strict diagonal
    dominance of every implicit row.
    """

    def __init__(self, a_values: np.ndarray, grid: Grid, b: float):
        self.grid = grid
        self.eta = grid.dt / grid.dy ** 2
        self.am = grid.dt / grid.dy
        a_in = a_values[:, 1:-1]
        self.cd = -self.eta * a_in
        half_adv = 0.25 * self.am * (a_in - b)
        diff = 0.5 * self.eta * a_in
        self.cl = diff + half_adv
        self.cr = diff - half_adv
        # implicit rows: diag 1 + eta a, off-diagonals -cl, -cr
        dominance = 1.0 + self.eta * a_in[1:] - (np.abs(self.cl[1:]) + np.abs(self.cr[1:]))
        if dominance.min() <= 0.0:
            raise ValueError(
                f"Crank-Nicolson rows lose diagonal dominance: dt/dy**2={self.eta:.4g}, "
                f"dt/dy={self.am:.4g}; reduce dt relative to dy")

    def apply_c(self, n: int, u_row: np.ndarray) -> np.ndarray:
        """C(a_n) applied to a full row (boundaries included), interior output."""
        return (self.cl[n] * u_row[:-2] + self.cd[n] * u_row[1:-1]
                + self.cr[n] * u_row[2:])

    def apply_c_transpose(self, n: int, v: np.ndarray) -> np.ndarray:
        """Transpose of the interior block of C(a_n) applied to an interior vector."""
        out = self.cd[n] * v
        out[:-1] += self.cl[n][1:] * v[1:]
        out[1:] += self.cr[n][:-1] * v[:-1]
        return out

    def lhs_bands(self, n: int, transpose: bool = False) -> np.ndarray:
        """Banded form of I - C(a_n) restricted to the interior."""
        ni = self.cd.shape[1]
        ab = np.zeros((3, ni))
        ab[1] = 1.0 - self.cd[n]
        if transpose:
            ab[0, 1:] = -self.cl[n][1:]
            ab[2, :-1] = -self.cr[n][:-1]
        else:
            ab[0, 1:] = -self.cr[n][:-1]
            ab[2, :-1] = -self.cl[n][1:]
        return ab

    def boundary_source(self, n: int) -> tuple:
        """Contributions of the Dirichlet columns to the first/last interior rows."""
        return self.cl[n][0] * U_LEFT, self.cr[n][-1] * U_RIGHT

    def coefficient_sensitivity(self, u_row: np.ndarray) -> np.ndarray:
        """d[C(a) u]_j / d a_j on a full row; interior output."""
        second = u_row[2:] - 2.0 * u_row[1:-1] + u_row[:-2]
        first = u_row[2:] - u_row[:-2]
        return 0.5 * self.eta * second - 0.25 * self.am * first


def _coefficient_on(a: Surface, grid: Grid) -> np.ndarray:
    if a.grid == grid:
        return a.values
    return interpolate(a, grid).values


def solve_forward(a: Surface, params: PdeParams, grid: Grid) -> Surface:
    """March the Crank-Nicolson scheme; returns u on the grid.

    The first row is the payoff profile with the Dirichlet corner values
    enforced; all later rows carry u = 1 and u = 0 on the space boundaries.
    """
    a_vals = _coefficient_on(a, grid)
    sys = CnSystem(a_vals, grid, params.b)
    u = np.empty(grid.shape)
    u[0] = initial_condition(grid.y_nodes())
    u[0, 0] = U_LEFT
    u[0, -1] = U_RIGHT
    for n in range(1, grid.nt):
        rhs = u[n - 1, 1:-1] + sys.apply_c(n - 1, u[n - 1])
        src_l, src_r = sys.boundary_source(n)
        rhs[0] += src_l
        rhs[-1] += src_r
        u[n, 1:-1] = solve_banded((1, 1), sys.lhs_bands(n), rhs, check_finite=False)
        u[n, 0] = U_LEFT
        u[n, -1] = U_RIGHT
    return Surface(grid, u)


def _misfit_gradient_values(a: Surface, target: Surface, params: PdeParams,
                            grid: Grid, p: float) -> np.ndarray:
    """Euclidean-to-L2 gradient of ||u(a) - target||^p on a's own grid."""
    a_vals = _coefficient_on(a, grid)
    sys = CnSystem(a_vals, grid, params.b)
    u = solve_forward(a, params, grid).values
    w = grid.cell_weights()
    residual = u - target.values
    source = 2.0 * w * residual

    nt = grid.nt
    ni = grid.ny - 2
    grad = np.zeros(grid.shape)
    mu_next = np.zeros(ni)
    for n in range(nt - 1, 0, -1):
        rhs = sys.apply_c_transpose(n, mu_next) + mu_next - source[n, 1:-1]
        mu = solve_banded((1, 1), sys.lhs_bands(n, transpose=True), rhs, check_finite=False)
        grad[n, 1:-1] = -(mu + mu_next) * sys.coefficient_sensitivity(u[n])
        mu_next = mu
    grad[0, 1:-1] = -mu_next * sys.coefficient_sensitivity(u[0])

    if p != 2.0:
        rnorm = float(np.sqrt(np.sum(w * residual * residual)))
        if rnorm == 0.0:
            return np.zeros(a.grid.shape)
        grad *= 0.5 * p * rnorm ** (p - 2.0)

    if a.grid != grid:
        mt, my = transfer_matrices(a.grid, grid)
        grad = mt.T @ grad @ my
    return grad / a.grid.cell_weights()


def forward_operator(a: Surface, params: PdeParams, grid: Grid) -> Surface:
    """u(a) - u(a0): the solution shift relative to the prior coefficient."""
    base = params.a0 if isinstance(params.a0, Surface) else constant_surface(grid, params.a0)
    return solve_forward(a, params, grid) - solve_forward(base, params, grid)


def misfit_gradient(a: Surface, udelta: Surface, params: PdeParams, grid: Grid,
                    p: float = 2.0) -> Surface:
    """Gradient of a -> ||u(a) - udelta||^p via the discrete adjoint."""
    if udelta.grid != grid:
        raise ValueError("data must live on the solver grid")
    return Surface(a.grid, _misfit_gradient_values(a, udelta, params, grid, p))


class ParabolicModel:
    """Forward model a -> u(a) - u(a0) on a fixed solver grid.

    The base solution u(a0) is computed once; ``apply`` accepts coefficients
    on the solver grid or any coarser grid inside the domain.  Deterministic:
    equal inputs give bitwise-equal output.
    """

    def __init__(self, params: PdeParams, grid: Grid):
        self.params = params
        self.grid = grid
        self.bounds = params.bounds
        self.name = "parabolic-diffusion"
        a0 = params.a0 if isinstance(params.a0, Surface) else constant_surface(grid, params.a0)
        self._base = solve_forward(a0, params, grid)

    def base_solution(self) -> Surface:
        return self._base

    def solve(self, a: Surface) -> Surface:
        return solve_forward(a, self.params, self.grid)

    def apply(self, a: Surface) -> Surface:
        return self.solve(a) - self._base

    def shift_data(self, u_delta: Surface) -> Surface:
        """Observed solution surface -> data for ``apply`` (subtract the base)."""
        if u_delta.grid != self.grid:
            raise ValueError("data must live on the solver grid")
        return u_delta - self._base

    def misfit_gradient(self, a: Surface, ydelta: Surface, p: float = 2.0) -> Surface:
        target = ydelta + self._base
        return Surface(a.grid, _misfit_gradient_values(a, target, self.params, self.grid, p))
