import numpy as np
import pytest

from tikdisc.grids import Grid, Surface, constant_surface, inner, interpolate, norm
from tikdisc.pde import (CnSystem, ParabolicModel, PdeParams, forward_operator,
                         initial_condition, misfit_gradient, solve_forward,
                         true_coefficient, true_sigma)
from tikdisc.penalties import Penalty
from tikdisc.synthdata import generate_data
from tikdisc.tikhonov import TikhonovConfig, tikhonov_gradient, tikhonov_value

PARAMS = PdeParams()
SOLVER = Grid.from_steps(0.02, 0.1)


def test_true_sigma_values():
    assert true_sigma(0.0, 0.0) == pytest.approx(0.24)
    assert true_sigma(3.7, 1.0) == pytest.approx(0.4)
    assert true_sigma(0.0, 0.25) == pytest.approx(0.4 - 0.16 * np.cos(np.pi / 5))
    assert true_sigma(0.0, 0.25) == pytest.approx(0.270557, abs=5e-7)


def test_true_coefficient_range():
    a = true_coefficient(SOLVER)
    assert a.values.min() == pytest.approx(0.0288, abs=1e-4)
    assert a.values.max() == pytest.approx(0.08, abs=1e-12)


def test_initial_condition_values():
    assert initial_condition(0.0) == 0.0
    assert initial_condition(-5.0) == pytest.approx(1.0 - np.exp(-5.0))
    assert initial_condition(-5.0) == pytest.approx(0.993262, abs=5e-7)
    assert initial_condition(2.0) == 0.0


def test_zero_coefficient_zero_drift_is_identity_march():
    grid = Grid.from_counts(6, 11)
    params = PdeParams(b=0.0, a0=0.08)
    a = constant_surface(grid, 0.0)
    u = solve_forward(a, params, grid)
    for n in range(1, grid.nt):
        assert np.array_equal(u.values[n], u.values[0])


def test_boundary_columns_exact():
    u = solve_forward(true_coefficient(SOLVER), PARAMS, SOLVER)
    assert np.all(u.values[:, 0] == 1.0)
    assert np.all(u.values[:, -1] == 0.0)


@pytest.mark.parametrize("coeff", ["true", 0.0288, 0.08])
def test_maximum_principle_and_monotone_rows(coeff):
    a = true_coefficient(SOLVER) if coeff == "true" else constant_surface(SOLVER, coeff)
    u = solve_forward(a, PARAMS, SOLVER)
    assert u.values.min() >= -1e-10
    assert u.values.max() <= 1.0 + 1e-10
    assert np.all(np.diff(u.values, axis=1) <= 1e-8)


def test_self_convergence_second_order():
    ref_grid = Grid.from_steps(0.0025, 0.01)
    u_ref = solve_forward(constant_surface(ref_grid, 0.08), PARAMS, ref_grid)
    errs = []
    for dt, dy in [(0.02, 0.1), (0.01, 0.05)]:
        g = Grid.from_steps(dt, dy)
        uh = solve_forward(constant_surface(g, 0.08), PARAMS, g)
        errs.append(norm(uh - interpolate(u_ref, g)))
    order = np.log2(errs[0] / errs[1])
    assert 1.7 <= order <= 2.3


def test_dominance_rejection_reports_ratio():
    grid = Grid.from_counts(3, 201)  # dt = 0.5, dy = 0.05
    params = PdeParams(b=30.0, a0=0.08)
    a = constant_surface(grid, 0.005)
    with pytest.raises(ValueError, match="diagonal dominance"):
        solve_forward(a, params, grid)


def test_solver_determinism_bitwise():
    a = true_coefficient(SOLVER)
    u1 = solve_forward(a, PARAMS, SOLVER)
    u2 = solve_forward(a, PARAMS, SOLVER)
    assert np.array_equal(u1.values, u2.values)


def test_forward_operator_zero_at_prior():
    a0 = constant_surface(SOLVER, 0.08)
    f = forward_operator(a0, PARAMS, SOLVER)
    assert np.array_equal(f.values, np.zeros(SOLVER.shape))


def test_forward_operator_nonlinear():
    grid = Grid.from_counts(6, 11)
    a = true_coefficient(grid)
    f1 = forward_operator(a, PARAMS, grid)
    f2 = forward_operator(Surface(grid, 2.0 * a.values), PARAMS, grid)
    assert norm(f2 - 2.0 * f1) > 1e-3 * max(norm(f1), 1e-12)


def test_truth_residual_consistent_with_noise_level():
    fine = Grid.from_steps(0.0025, 0.01)
    ds = generate_data(true_coefficient(fine), PARAMS, fine, SOLVER, noise_std=0.01, seed=3)
    model = ParabolicModel(PARAMS, SOLVER)
    ydelta = model.shift_data(ds.u_delta)
    r = norm(model.apply(true_coefficient(SOLVER)) - ydelta)
    assert r <= ds.delta * 1.05
    assert r >= ds.delta * 0.95


class TestAdjointGradient:
    GRID = Grid.from_counts(6, 11)

    def _setup(self):
        rng = np.random.default_rng(0)
        model = ParabolicModel(PARAMS, self.GRID)
        a_true = true_coefficient(self.GRID)
        u_true = solve_forward(a_true, PARAMS, self.GRID)
        udelta = Surface(self.GRID, u_true.values + 0.01 * rng.standard_normal(self.GRID.shape))
        ydelta = model.shift_data(udelta)
        a = Surface(self.GRID, np.clip(a_true.values * (1 + 0.1 * rng.standard_normal(self.GRID.shape)),
                                       0.01, 0.9))
        return rng, model, ydelta, a, u_true

    def test_zero_residual_zero_gradient(self):
        _, model, _, _, u_true = self._setup()
        g = model.misfit_gradient(true_coefficient(self.GRID), model.shift_data(u_true))
        assert norm(g) <= 1e-10

    def test_central_difference_20_directions(self):
        rng, model, ydelta, a, _ = self._setup()
        g = model.misfit_gradient(a, ydelta)
        misfit = lambda z: norm(model.apply(z) - ydelta) ** 2
        for _ in range(20):
            h = Surface(self.GRID, rng.standard_normal(self.GRID.shape))
            eps = 1e-6
            fd = (misfit(a + eps * h) - misfit(a - eps * h)) / (2 * eps)
            assert abs(fd - inner(g, h)) <= 1e-5 * max(abs(fd), 1e-12)

    def test_directional_derivative_50_directions(self):
        rng, model, ydelta, a, _ = self._setup()
        g = model.misfit_gradient(a, ydelta)
        misfit = lambda z: norm(model.apply(z) - ydelta) ** 2
        for _ in range(50):
            h = Surface(self.GRID, rng.standard_normal(self.GRID.shape))
            eps = 1e-6
            fd = (misfit(a + eps * h) - misfit(a - eps * h)) / (2 * eps)
            assert abs(fd - inner(g, h)) <= 1e-5 * max(abs(fd), 1e-12)

    def test_coarse_coefficient_chain_rule(self):
        rng, model, ydelta, _, _ = self._setup()
        coarse = Grid.from_counts(4, 6)
        ac = constant_surface(coarse, 0.05)
        g = model.misfit_gradient(ac, ydelta)
        assert g.grid == coarse
        misfit = lambda z: norm(model.apply(z) - ydelta) ** 2
        for _ in range(10):
            h = Surface(coarse, rng.standard_normal(coarse.shape))
            eps = 1e-6
            fd = (misfit(ac + eps * h) - misfit(ac - eps * h)) / (2 * eps)
            assert abs(fd - inner(g, h)) <= 1e-5 * max(abs(fd), 1e-12)

    def test_full_tikhonov_gradient(self):
        rng, model, ydelta, a, _ = self._setup()
        pen = Penalty("weighted-h1", constant_surface(self.GRID, 0.08), beta1=0.5,
                      beta2=0.25 * self.GRID.dy, beta3=0.25 * self.GRID.dt)
        cfg = TikhonovConfig(alpha=0.01, penalty=pen)
        g = tikhonov_gradient(a, model, ydelta, cfg)
        for _ in range(10):
            h = Surface(self.GRID, rng.standard_normal(self.GRID.shape))
            eps = 1e-6
            fd = (tikhonov_value(a + eps * h, model, ydelta, cfg)
                  - tikhonov_value(a - eps * h, model, ydelta, cfg)) / (2 * eps)
            assert abs(fd - inner(g, h)) <= 1e-5 * max(abs(fd), 1e-12)

    def test_misfit_gradient_op_matches_model(self):
        rng, model, ydelta, a, _ = self._setup()
        target = ydelta + model.base_solution()
        g_op = misfit_gradient(a, target, PARAMS, self.GRID)
        g_model = model.misfit_gradient(a, ydelta)
        assert np.allclose(g_op.values, g_model.values, atol=1e-15)

    def test_p_variant_scaling(self):
        rng, model, ydelta, a, _ = self._setup()
        g2 = model.misfit_gradient(a, ydelta, p=2.0)
        g4 = model.misfit_gradient(a, ydelta, p=4.0)
        r = norm(model.apply(a) - ydelta)
        assert np.allclose(g4.values, 2.0 * r ** 2 * g2.values, rtol=1e-12)


def test_cn_transpose_matches_dense():
    grid = Grid.from_counts(4, 7)
    rng = np.random.default_rng(1)
    a_vals = rng.uniform(0.01, 0.9, grid.shape)
    sys = CnSystem(a_vals, grid, b=0.03)
    ni = grid.ny - 2
    n = 2
    dense = np.zeros((ni, ni))
    for j in range(ni):
        e = np.zeros(grid.ny)
        e[j + 1] = 1.0
        dense[:, j] = sys.apply_c(n, e)
    v = rng.standard_normal(ni)
    assert np.allclose(sys.apply_c_transpose(n, v.copy()), dense.T @ v, atol=1e-14)


def test_pde_params_validation():
    with pytest.raises(ValueError):
        PdeParams(bounds=(0.0, 1.0))
    with pytest.raises(ValueError):
        PdeParams(a0=2.0, bounds=(0.005, 1.0))
