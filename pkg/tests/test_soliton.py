import numpy as np
import pytest
import sympy as sp

from hodgeflow.errors import DegenerateForm, NoConvergence
from hodgeflow.grid import PeriodicGrid, ScalarField
from hodgeflow.soliton import (SolitonProblem, manufactured_forcing,
                               solve_soliton, soliton_residual)

X, Y = sp.symbols("x y", real=True)


def field_from_expr(grid, expr):
    f = sp.lambdify((X, Y), expr, "numpy")
    return ScalarField(grid, np.asarray(f(*grid.coordinates()), dtype=float)
                       * np.ones(grid.dims))


def test_residual_symbolic_oracle():
    grid = PeriodicGrid((64, 64))
    a_expr = 2 + sp.cos(X) * sp.cos(Y) / 2
    v = (1.0, 0.5)
    lhs_expr = (sp.diff(sp.diff(a_expr, X) / sp.sqrt(a_expr), X)
                + sp.diff(sp.diff(a_expr, Y) / sp.sqrt(a_expr), Y)
                + v[0] * sp.diff(a_expr, X) + v[1] * sp.diff(a_expr, Y))
    a = field_from_expr(grid, a_expr)
    res = soliton_residual(SolitonProblem(a, v))
    want = field_from_expr(grid, lhs_expr)
    assert np.abs(res.values - want.values).max() < 1e-9


def test_constants_have_zero_residual():
    grid = PeriodicGrid((32, 32))
    a = ScalarField.constant(grid, 3.0)
    res = soliton_residual(SolitonProblem(a, (1.0, 0.5)))
    assert np.abs(res.values).max() == 0.0


def test_manufactured_forcing_zeroes_residual():
    grid = PeriodicGrid((32, 32))
    a_star = field_from_expr(grid, 2 + sp.cos(X) * sp.cos(Y) / 2)
    forcing = manufactured_forcing(a_star, (1.0, 0.5))
    res = soliton_residual(SolitonProblem(a_star, (1.0, 0.5), forcing))
    assert np.abs(res.values).max() == 0.0


def test_problem_validation():
    with pytest.raises(ValueError):
        SolitonProblem(ScalarField.constant(PeriodicGrid((16,)), 1.0), (1, 0))
    grid = PeriodicGrid((16, 16))
    x = grid.coordinates()[0]
    sign_changing = ScalarField(grid, 0.1 + np.sin(x) * np.ones(grid.dims))
    with pytest.raises(DegenerateForm):
        soliton_residual(SolitonProblem(sign_changing, (0.0, 0.0)))


def test_solver_recovers_manufactured_solution_small():
    grid = PeriodicGrid((48, 48))
    a_star = field_from_expr(grid, 2 + sp.cos(X) * sp.cos(Y) / 2)
    forcing = manufactured_forcing(a_star, (1.0, 0.5))
    start = ScalarField.constant(grid, a_star.mean())
    a, res_norm = solve_soliton(SolitonProblem(start, (1.0, 0.5), forcing),
                                tol=1e-8)
    assert res_norm < 1e-8
    assert np.abs(a.values - a_star.values).max() < 1e-6
    assert a.mean() == pytest.approx(a_star.mean(), abs=1e-12)


def test_no_convergence_carries_best_iterate():
    grid = PeriodicGrid((32, 32))
    a_star = field_from_expr(grid, 2 + sp.cos(X) * sp.cos(Y) / 2)
    forcing = manufactured_forcing(a_star, (1.0, 0.5))
    start = ScalarField.constant(grid, a_star.mean())
    with pytest.raises(NoConvergence) as info:
        solve_soliton(SolitonProblem(start, (1.0, 0.5), forcing),
                      tol=1e-13, max_iter=50)
    err = info.value
    assert hasattr(err, "best") and hasattr(err, "residual_norm")
    assert err.residual_norm > 0
    assert err.best.values.shape == grid.dims


def test_solver_rejects_bad_tol():
    grid = PeriodicGrid((16, 16))
    with pytest.raises(ValueError):
        solve_soliton(SolitonProblem(ScalarField.constant(grid, 1.0), (0, 0)),
                      tol=0.0)
