import math
import warnings

import numpy as np
import pytest

from nonisopot import BallMeasure, PotentialParams, WeightField, ball, build_grid
from nonisopot._validation import ValidationError
from nonisopot.carleson import (
    ExperimentConfig,
    capacity_condition_ratio,
    check_regime,
    counterexample_weight,
    embed_const_C,
    embed_const_K,
    equivalence_experiment,
    power_iteration,
    random_ball_measure,
    tent_ball_ratio,
    tent_function_ratio,
    tent_mass,
    tent_test_function,
)
from nonisopot.geometry import gauge_matrix
from nonisopot.weights import BallFamily


@pytest.fixture(scope="module")
def circle():
    return build_grid(1, 128)


def one_atom(z, m=2.0):
    return BallMeasure(np.array([[z]]), [m])


def rank_one_norm(mu, params, w, grid):
    """Holder: the norm of f -> m^{1/p} sum q k f is m^{1/p} (sum q k^{p'} w^{1-p'})^{1/p'}."""
    pc = params.p_conj
    k = gauge_matrix(mu.points, grid.nodes)[0] ** (-params.order)
    return mu.masses[0] ** (1 / params.p) * np.sum(grid.weights * k**pc * w.values ** (1 - pc)) ** (1 / pc)


def test_ball_measure_validation():
    with pytest.raises(ValidationError):
        BallMeasure(np.array([[1.0 + 0j]]), [1.0])
    with pytest.raises(ValidationError):
        BallMeasure(np.array([[0.5 + 0j]]), [0.0])
    with pytest.raises(ValidationError):
        BallMeasure(np.array([[0.5 + 0j]]), [1.0, 2.0])
    mu = BallMeasure.empty(2).with_atom(np.array([0.1, 0.2j]), 3.0)
    assert len(mu) == 1 and mu.scaled(2).masses[0] == 6.0


def test_power_iteration_matches_svd():
    B = np.random.default_rng(0).normal(size=(7, 20)) + 1j * np.random.default_rng(1).normal(size=(7, 20))
    assert power_iteration(B, tol=1e-14) == pytest.approx(np.linalg.svd(B, compute_uv=False)[0], rel=1e-6)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_single_atom_embedding_constant(circle, p):
    params = PotentialParams(p, 0.3, 1)
    w = WeightField(np.random.default_rng(2).lognormal(size=circle.size))
    mu = one_atom(0.7 + 0.2j)
    exact = rank_one_norm(mu, params, w, circle)
    assert embed_const_K(mu, params, w, circle) == pytest.approx(exact, rel=1e-6)
    # |C kernel| equals the K kernel, so a single atom has the same constant
    assert embed_const_C(mu, params, w, circle) == pytest.approx(exact, rel=1e-6)


def test_cauchy_constant_never_exceeds_riesz(circle):
    rng = np.random.default_rng(3)
    params = PotentialParams(2.0, 0.3, 1)
    w = WeightField.constant(circle)
    mu = random_ball_measure(circle.nodes, rng, 12, 5)
    assert embed_const_C(mu, params, w, circle) <= embed_const_K(mu, params, w, circle) * (1 + 1e-8)


def test_empty_measure_constants(circle):
    params = PotentialParams(2.0, 0.3, 1)
    w = WeightField.constant(circle)
    assert embed_const_K(BallMeasure.empty(1), params, w, circle) == 0.0
    assert embed_const_C(BallMeasure.empty(1), params, w, circle) == 0.0
    assert tent_ball_ratio(BallMeasure.empty(1), w, params, 2.0, None, circle) == 0.0


def test_tent_mass(circle):
    G = ball(circle, circle.nodes[0], 0.5)
    near = 0.95 * circle.nodes[0]
    far = -0.95 * circle.nodes[0]
    mu = BallMeasure(np.vstack([near, far]), [1.0, 2.0])
    assert tent_mass(mu, G, circle) == 1.0
    assert tent_mass(mu, np.arange(circle.size), circle) == 3.0
    assert tent_mass(mu, [], circle) == 0.0


def test_tent_ball_ratio_scales_with_mass(circle):
    params = PotentialParams(2.0, 0.3, 1)
    w = WeightField.constant(circle)
    mu = random_ball_measure(circle.nodes, np.random.default_rng(4), 8, 5)
    fam = BallFamily(circle.nodes[::8], 2.0 ** -np.arange(1, 5))
    a = tent_ball_ratio(mu, w, params, 2.0, fam, circle)
    assert a > 0
    assert tent_ball_ratio(mu.scaled(3.0), w, params, 2.0, fam, circle) == pytest.approx(3 * a)
    with pytest.raises(ValidationError):
        tent_ball_ratio(mu, w, params, 0.5, fam, circle)


def test_capacity_condition_ratio(circle):
    params = PotentialParams(2.0, 0.3, 1)
    w = WeightField.constant(circle)
    mu = BallMeasure(np.array([[0.9 + 0j]]), [1.0])
    sets = [ball(circle, circle.nodes[0], 0.5), ball(circle, circle.nodes[64], 0.5)]
    best, rows = capacity_condition_ratio(mu, sets, params, w, circle)
    assert rows[0]["tent_mass"] == 1.0 and rows[1]["tent_mass"] == 0.0
    assert best == pytest.approx(rows[0]["ratio"])
    assert rows[0]["ratio"] == pytest.approx(1.0 / rows[0]["capacity"])


def test_random_ball_measure_levels(circle):
    mu = random_ball_measure(circle.nodes, np.random.default_rng(5), 30, 6)
    r = np.abs(mu.points[:, 0])
    levels = -np.log2(1 - r)
    np.testing.assert_allclose(levels, np.round(levels), atol=1e-9)
    levels = np.round(levels)
    assert levels.min() >= 2 and levels.max() <= 6
    assert np.all((mu.masses >= 0.1) & (mu.masses <= 10))


def test_counterexample_weight_range():
    g = build_grid(2, 8)
    assert counterexample_weight(0.5, g).descriptor["eps"] == 0.5
    for eps in (-1.0, 1.0, 2.0):
        with pytest.raises(ValidationError):
            counterexample_weight(eps, g)


def test_tent_test_function_truncation():
    zeta = np.array([1.0 + 0j])
    F = tent_test_function(1, 4, zeta, 0.25, tol=1e-10)
    z = np.array([[0.99 + 0j], [0.5j]])
    exact = (1 - 0.75 * z[:, 0]) ** -4
    np.testing.assert_allclose(F(z), exact, rtol=1e-9)


def test_tent_function_ratio_is_scale_stable():
    g = build_grid(1, 1024)
    params = PotentialParams(2.0, 0.3, 1)
    w = WeightField.constant(g)
    vals = [tent_function_ratio(params, w, g, g.nodes[0], r) for r in (0.25, 0.125, 0.0625)]
    assert max(vals) / min(vals) < 1.5


def test_check_regime(circle):
    w = WeightField.constant(circle)
    assert check_regime(PotentialParams(2.0, 0.3, 1), w, circle) == []
    assert len(check_regime(PotentialParams(2.0, 0.6, 1), w, circle)) == 1


def test_equivalence_experiment_small():
    cfg = ExperimentConfig(seed=1, measures=2, atoms=6, resolutions=(64, 128), base_resolution=16, max_level=4)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rows, summary = equivalence_experiment(cfg)
    assert len(rows) == 4 and summary["rows"] == 4
    assert all(row["ratio"] >= 1 - 1e-8 for row in rows)
    assert math.isfinite(summary["max_ratio"])
    with pytest.raises(ValidationError):
        equivalence_experiment(ExperimentConfig(p=3.0))
    with pytest.raises(ValidationError):
        equivalence_experiment(ExperimentConfig(s=0.6))
