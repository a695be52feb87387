import math
import warnings

import numpy as np
import pytest
from scipy.optimize import minimize

from nonisopot import PotentialParams, SphereMeasure, WeightField, ball, build_grid
from nonisopot._validation import ValidationError
from nonisopot.capacity import (
    CapacityProblem,
    ball_capacity_profile,
    capacitary_measure,
    capacity,
    constraint_matrix,
    extremal_check,
    fit_slope,
    solve_dual,
    solve_primal,
)


def conjugate_dual_bound(problem):
    """Lower bound from the concave dual, maximised independently with L-BFGS-B.

    For lam >= 0 the Lagrangian minimiser is ``f = (A^T lam / (p D))^{p'-1}``
    and the dual value is ``sum(lam) - (p-1) sum D f^p``.
    """
    A = constraint_matrix(problem)
    D = problem.grid.weights * problem.w.values
    p = problem.params.p
    pc = p / (p - 1)

    def neg(lam):
        u = (A.T @ lam) / (p * D)
        value = lam.sum() - (p - 1) * np.dot(D, u**pc)
        grad = 1 - A @ (u ** (pc - 1))
        return -value, -grad

    res = minimize(
        neg,
        np.ones(A.shape[0]),
        jac=True,
        method="L-BFGS-B",
        bounds=[(0, None)] * A.shape[0],
        options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 10000},
    )
    return -res.fun


def singleton_capacity(problem):
    """Closed form for one constraint row: ``(sum a^{p'} D^{1-p'})^{1-p}``."""
    a = constraint_matrix(problem)[0]
    D = problem.grid.weights * problem.w.values
    p = problem.params.p
    pc = p / (p - 1)
    return np.sum(a**pc * D ** (1 - pc)) ** (1 - p)


@pytest.fixture(scope="module")
def circle():
    return build_grid(1, 64)


@pytest.fixture(scope="module")
def sphere():
    return build_grid(2, 6)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("which", ["circle", "sphere"])
def test_against_conjugate_dual(p, which, circle, sphere):
    grid = circle if which == "circle" else sphere
    params = PotentialParams(p, 0.3 if grid.dim == 1 else 0.6, grid.dim)
    w = WeightField.constant(grid) if grid.dim == 1 else WeightField.power(grid, 0.3)
    for E in (np.arange(grid.size), ball(grid, grid.nodes[0], 0.6)):
        problem = CapacityProblem(E, params, w, grid)
        res = capacity(problem)
        lb = conjugate_dual_bound(problem)
        assert res.converged
        assert lb <= res.value * (1 + 1e-9)
        assert res.value == pytest.approx(lb, rel=1e-5)


@pytest.mark.parametrize("p", [1.5, 2.0, 4.0])
def test_singleton_closed_form(circle, p):
    params = PotentialParams(p, 0.4, 1)
    rng = np.random.default_rng(0)
    w = WeightField(rng.lognormal(size=circle.size))
    problem = CapacityProblem([5], params, w, circle)
    assert capacity(problem).value == pytest.approx(singleton_capacity(problem), rel=1e-6)


def test_primal_and_dual_agree_at_p2(sphere):
    params = PotentialParams(2.0, 0.6, 2)
    w = WeightField.power(sphere, -0.3)
    E = ball(sphere, sphere.nodes[3], 0.8)
    a = solve_dual(CapacityProblem(E, params, w, sphere))
    b = solve_primal(CapacityProblem(E, params, w, sphere))
    assert a.converged and b.converged
    assert a.value == pytest.approx(b.value, rel=1e-5)


def test_optimizer_is_feasible(circle):
    params = PotentialParams(3.0, 0.3, 1)
    problem = CapacityProblem(np.arange(10), params, WeightField.constant(circle), circle)
    res = capacity(problem)
    A = constraint_matrix(problem)
    assert (A @ res.optimizer).min() >= 1 - 1e-12
    assert np.all(res.optimizer >= 0)
    D = circle.weights
    assert np.dot(D, res.optimizer**3) == pytest.approx(res.value, rel=1e-12)


def test_monotone_in_set(circle):
    params = PotentialParams(2.0, 0.3, 1)
    w = WeightField.constant(circle)
    vals = [capacity(CapacityProblem(ball(circle, circle.nodes[0], r), params, w, circle)).value for r in (0.1, 0.4, 1.0)]
    assert vals[0] <= vals[1] <= vals[2]


def test_weight_scaling(circle):
    params = PotentialParams(1.5, 0.3, 1)
    E = np.arange(0, 64, 4)
    a = capacity(CapacityProblem(E, params, WeightField.constant(circle), circle)).value
    b = capacity(CapacityProblem(E, params, WeightField.constant(circle, 3.0), circle)).value
    assert b == pytest.approx(3 * a, rel=1e-5)


def test_empty_set(circle):
    res = capacity(CapacityProblem([], PotentialParams(2.0, 0.3, 1), WeightField.constant(circle), circle))
    assert res.value == 0.0 and res.converged


def test_problem_validation(circle, sphere):
    w = WeightField.constant(circle)
    with pytest.raises(ValidationError):
        CapacityProblem([0], PotentialParams(2.0, 0.3, 1), w, circle, tol=0.0)
    with pytest.raises(ValidationError):
        CapacityProblem([0], PotentialParams(2.0, 0.3, 1), w, circle, method="newton")
    with pytest.raises(ValidationError):
        CapacityProblem([0], PotentialParams(2.0, 0.3, 2), w, circle)
    with pytest.raises(ValidationError):
        CapacityProblem([100], PotentialParams(2.0, 0.3, 1), w, circle)
    with pytest.raises(ValidationError):
        capacity(CapacityProblem([0], PotentialParams(1.5, 0.3, 1), w, circle, method="dual"))


def test_unconverged_primal_is_flagged(circle):
    problem = CapacityProblem(np.arange(20), PotentialParams(1.5, 0.3, 1), WeightField.constant(circle), circle,
                              tol=1e-30, max_iter=5)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = capacity(problem)
    assert not res.converged
    assert res.status == "inexact"
    assert math.isfinite(res.value)


def test_capacitary_measure_mass_equals_capacity(sphere):
    params = PotentialParams(2.0, 0.6, 2)
    w = WeightField.constant(sphere)
    problem = CapacityProblem(ball(sphere, sphere.nodes[0], 0.7), params, w, sphere, tol=1e-10)
    res = solve_dual(problem)
    nu = capacitary_measure(problem, res)
    assert nu.total == pytest.approx(res.value, rel=1e-6)
    assert set(nu.nodes) <= set(problem.E.tolist())
    with pytest.raises(ValidationError):
        capacitary_measure(CapacityProblem([0], PotentialParams(3.0, 0.6, 2), w, sphere))


def test_extremal_check(sphere):
    params = PotentialParams(2.0, 0.6, 2)
    w = WeightField.constant(sphere)
    E = ball(sphere, sphere.nodes[0], 0.7)
    problem = CapacityProblem(E, params, w, sphere, tol=1e-10)
    res = solve_dual(problem)
    nu = capacitary_measure(problem, res)
    out = extremal_check(nu, E, params, w, sphere)
    assert out["status"] == "ok"
    assert out["ratio"] >= 1
    assert out["mass"] == pytest.approx(res.value, rel=1e-6)
    # energy of the capacitary measure equals the capacity at p = 2
    assert out["energy"] == pytest.approx(res.value, rel=1e-5)
    assert extremal_check(SphereMeasure.empty(), E, params, w, sphere)["status"] == "empty"


def test_fit_slope():
    x = np.array([0.1, 0.2, 0.4])
    assert fit_slope(x, 3 * x**1.7) == pytest.approx(1.7)
    assert math.isnan(fit_slope([1.0], [1.0]))


def test_ball_profile_slope():
    g = build_grid(1, 1024)
    out = ball_capacity_profile(PotentialParams(2.0, 0.3, 1), WeightField.constant(g), g, [0.05, 0.1, 0.2])
    assert [row["r"] for row in out["rows"]] == [0.05, 0.1, 0.2]
    assert all(row["converged"] for row in out["rows"])
    assert out["slope"] == pytest.approx(1 - 0.6, abs=0.05)
    assert not out["degenerate"]
