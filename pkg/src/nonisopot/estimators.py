"""scikit-learn style wrappers around the capacity, weight and embedding routines.

Hyperparameters go to the constructor; ``fit`` computes trailing-underscore
attributes.  Inputs are complex point arrays, which scikit-learn's array
validation does not accept, so validation is done here instead.
"""

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import ValidationError, check_points
from .capacity import CapacityProblem, capacitary_measure, capacity
from .carleson import BallMeasure, embed_const_C, embed_const_K, tent_ball_ratio
from .geometry import build_grid, gauge_matrix, self_cell_integral
from .potentials import PotentialParams, riesz_kernel
from .weights import BallFamily, ap_constant, doubling_order, weight_from_descriptor


def _descriptor(eps):
    return {"kind": "constant", "c": 1.0} if not eps else {"kind": "power", "eps": float(eps)}


def _check_fitted(est, attr):
    if not hasattr(est, attr):
        raise ValidationError(f"{type(est).__name__} is not fitted yet; call fit first")


class RieszCapacity(BaseEstimator):
    """Weighted Riesz capacity of the grid nodes nearest to the points ``X``.

    After ``fit``: ``capacity_``, ``optimizer_`` (the minimising density),
    ``support_`` (node indices of E), ``measure_`` (capacitary measure, p = 2
    only), ``converged_`` and ``n_iter_``.  ``predict`` evaluates the
    potential ``K_s f`` of the optimiser at sphere points with the kernel
    the solver used, capped at each source cell's average.
    """

    def __init__(self, n=1, p=2.0, s=0.3, eps=0.0, resolution=256, tol=None, method="auto"):
        self.n = n
        self.p = p
        self.s = s
        self.eps = eps
        self.resolution = resolution
        self.tol = tol
        self.method = method

    def fit(self, X, y=None):
        params = PotentialParams(self.p, self.s, self.n)
        grid = build_grid(self.n, self.resolution)
        w = weight_from_descriptor(_descriptor(self.eps), grid)
        pts = check_points(X, self.n, name="X")
        E = np.unique(np.argmin(gauge_matrix(pts, grid.nodes), axis=1))
        problem = CapacityProblem(E, params, w, grid, tol=self.tol, method=self.method)
        res = capacity(problem)
        self.grid_, self.weight_, self.params_ = grid, w, params
        self.support_ = E
        self.capacity_ = res.value
        self.optimizer_ = res.optimizer
        self.converged_ = res.converged
        self.n_iter_ = res.iterations
        self.measure_ = capacitary_measure(problem, res) if self.p == 2 and res.dual is not None else None
        return self

    def predict(self, X):
        _check_fitted(self, "optimizer_")
        pts = check_points(X, self.n, name="X")
        g = self.grid_
        order = self.params_.order
        cap = self_cell_integral(g, order) / g.weights
        return riesz_kernel(pts, g.nodes, order, cap) @ (g.weights * self.optimizer_)

    def score(self, X, y=None):
        """Smallest potential over ``X``; at least one on the fitted set up to the solver tolerance."""
        return float(np.min(self.predict(X)))


class WeightProfile(BaseEstimator):
    """A_p constant and doubling order of a constant or power weight on an n = 2 grid.

    ``fit`` takes no data; the weight is set by ``eps``.
    """

    def __init__(self, eps=0.0, p=2.0, resolution=32):
        self.eps = eps
        self.p = p
        self.resolution = resolution

    def fit(self, X=None, y=None):
        grid = build_grid(2, self.resolution)
        w = weight_from_descriptor(_descriptor(self.eps), grid)
        self.ap_constant_ = ap_constant(w, self.p, grid)
        self.doubling_order_ = doubling_order(w, grid)
        self.weight_ = w
        return self


class CarlesonEmbedding(BaseEstimator):
    """Embedding constants of ``K_s`` and ``C_s`` into ``L^p(mu)`` for an atomic ball measure.

    ``X`` holds the atoms (interior points), ``sample_weight`` their masses
    (default one each).
    """

    def __init__(self, n=1, p=2.0, s=0.3, eps=0.0, resolution=256, alpha=2.0):
        self.n = n
        self.p = p
        self.s = s
        self.eps = eps
        self.resolution = resolution
        self.alpha = alpha

    def fit(self, X, y=None, sample_weight=None):
        pts = check_points(X, self.n, closed=False, name="X")
        masses = np.ones(pts.shape[0]) if sample_weight is None else np.asarray(sample_weight, dtype=float)
        mu = BallMeasure(pts, masses)
        params = PotentialParams(self.p, self.s, self.n)
        grid = build_grid(self.n, self.resolution)
        w = weight_from_descriptor(_descriptor(self.eps), grid)
        self.const_K_ = embed_const_K(mu, params, w, grid)
        self.const_C_ = embed_const_C(mu, params, w, grid)
        self.ratio_ = self.const_K_ / self.const_C_ if self.const_C_ > 0 else np.nan
        family = BallFamily(grid.nodes[:: max(1, grid.size // 64)], 2.0 ** -np.arange(1, 7))
        self.tent_ratio_ = tent_ball_ratio(mu, w, params, self.alpha, family, grid)
        return self
