"""Weighted Riesz capacities as convex programs, capacitary measures and ball profiles."""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from ._validation import ValidationError, check_index_set, check_points
from .geometry import ball, self_cell_integral
from .potentials import PotentialParams, SphereMeasure, energy, riesz_kernel, wolff_potential
from .weights import weighted_mass


@dataclass(frozen=True, eq=False)
class CapacityProblem:
    """Minimise ``sum_j q_j w_j f_j^p`` over ``f >= 0`` with ``(K_s f)(zeta_i) >= 1`` on E.

    ``method`` is ``"auto"`` (dual for p=2, primal otherwise), ``"dual"`` or
    ``"primal"``.
    """

    E: np.ndarray
    params: PotentialParams
    w: object
    grid: object
    tol: float | None = None
    max_iter: int = 20000
    method: str = "auto"

    def __post_init__(self):
        object.__setattr__(self, "E", check_index_set(self.E, self.grid.size))
        if self.tol is not None and not self.tol > 0:
            raise ValidationError("tolerance must be positive")
        if self.method not in ("auto", "dual", "primal"):
            raise ValidationError(f"unknown method {self.method!r}")
        if self.params.n != self.grid.dim:
            raise ValidationError("parameter dimension does not match the grid")


@dataclass(eq=False)
class CapacityResult:
    value: float
    optimizer: np.ndarray
    residual: float
    converged: bool
    iterations: int
    method: str
    dual: np.ndarray | None = None
    gap: float | None = None
    info: dict = field(default_factory=dict)

    @property
    def status(self):
        return "converged" if self.converged else "inexact"


def constraint_matrix(problem):
    """Rows ``q_j K(zeta_i, zeta_j)`` for i in E, the kernel capped at its self-cell average."""
    g = problem.grid
    order = problem.params.order
    cap = self_cell_integral(g, order) / g.weights
    return riesz_kernel(g.nodes[problem.E], g.nodes, order, cap) * g.weights


def _empty_result(problem, method):
    return CapacityResult(0.0, np.zeros(problem.grid.size), 0.0, True, 0, method, np.zeros(0), 0.0)


def _scaled_primal(f, A, D, p):
    """Feasible rescaling of ``f`` and its objective."""
    c = A @ f
    m = c.min()
    if not m > 0:
        return math.inf, f
    f = f / m
    return float(np.dot(D, f**p)), f


def solve_dual(problem):
    """p = 2 capacity via its dual ``max sum(lam) - lam^T G lam / 4`` over ``lam >= 0``.

    ``G = A D^{-1} A^T`` with ``D = q w``.  An active-set phase on the free
    variables gives a warm start; cyclic coordinate ascent then runs until the
    relative duality gap against the rescaled primal falls below ``tol``.
    The capacitary measure is ``lam / 2``.
    """
    tol = 1e-8 if problem.tol is None else problem.tol
    if problem.E.size == 0:
        return _empty_result(problem, "dual")
    A = constraint_matrix(problem)
    D = problem.grid.weights * problem.w.values
    B = A / np.sqrt(D)
    G = B @ B.T
    m = G.shape[0]

    def dual_value(lam):
        return float(lam.sum() - lam @ (G @ lam) / 4.0)

    def primal(lam):
        return _scaled_primal((A.T @ lam) / (2.0 * D), A, D, 2.0)

    lam = _active_set(G, np.ones(m) * 2.0)
    best, f_best = primal(lam)
    d_best = dual_value(lam)
    Glam = G @ lam
    diag = np.diag(G).copy()
    it = 0
    gap = (best - d_best) / best if math.isfinite(best) else math.inf
    while gap > tol and it < problem.max_iter:
        it += 1
        for i in range(m):
            step = (1.0 - Glam[i] / 2.0) / (diag[i] / 2.0)
            new = max(0.0, lam[i] + step)
            delta = new - lam[i]
            if delta:
                lam[i] = new
                Glam += delta * G[:, i]
        d_best = max(d_best, dual_value(lam))
        value, f = primal(lam)
        if value < best:
            best, f_best = value, f
        gap = (best - d_best) / best
    residual = float(max(0.0, 1.0 - (A @ f_best).min()))
    return CapacityResult(
        best, f_best, residual, bool(gap <= tol), it, "dual", lam, float(gap), {"dual_value": d_best}
    )


def _active_set(G, c, max_rounds=100):
    """Approximate minimiser of ``lam^T G lam / 4 - sum lam`` over ``lam >= 0``.

    Solves the stationarity system ``G_FF lam_F = c_F`` on a free set ``F``,
    dropping negative components and re-admitting violated ones.
    """
    m = G.shape[0]
    free = np.ones(m, dtype=bool)
    lam = np.zeros(m)
    for _ in range(max_rounds):
        lam = np.zeros(m)
        if free.any():
            sub = G[np.ix_(free, free)]
            try:
                lam[free] = linalg.solve(sub, c[free], assume_a="pos")
            except (linalg.LinAlgError, ValueError):
                lam[free] = linalg.lstsq(sub, c[free])[0]
        neg = lam < 0
        if neg.any():
            free &= ~neg
            continue
        grad = c - G @ lam
        enter = (~free) & (grad > 1e-12 * np.abs(c).max())
        if not enter.any():
            break
        free |= enter
    return np.maximum(lam, 0.0)


def solve_primal(problem, stages=5, growth=10.0):
    """Projected accelerated gradient on the quadratic-penalty primal.

    The penalty grows by ``growth`` per stage for ``stages`` stages, with
    extra stages while the constraint residual exceeds ``tol``.  Steps use
    backtracking.  Every iterate is rescaled to feasibility and the best
    value is kept.
    """
    tol = 1e-6 if problem.tol is None else problem.tol
    p = problem.params.p
    if problem.E.size == 0:
        return _empty_result(problem, "primal")
    A = constraint_matrix(problem)
    D = problem.grid.weights * problem.w.values
    f = np.full(A.shape[1], 1.0 / (A @ np.ones(A.shape[1])).min())
    best, f_best = _scaled_primal(f, A, D, p)
    mu = 10.0 * best
    step = 1.0
    total = 0
    stage = 0
    residual = math.inf
    max_stages = stages + 6
    while stage < max_stages:
        stage += 1

        def phi(x):
            v = np.maximum(0.0, 1.0 - A @ x)
            return float(np.dot(D, x**p) + 0.5 * mu * v @ v)

        def grad(x):
            v = np.maximum(0.0, 1.0 - A @ x)
            return p * D * x ** (p - 1.0) - mu * (A.T @ v)

        y, x_prev, t = f.copy(), f.copy(), 1.0
        for _ in range(problem.max_iter):
            total += 1
            gy, py = grad(y), phi(y)
            while True:
                x = np.maximum(0.0, y - step * gy)
                d = x - y
                if phi(x) <= py + gy @ d + (d @ d) / (2.0 * step) + 1e-15 * abs(py) or step < 1e-300:
                    break
                step /= 2.0
            if gy @ (x - x_prev) > 0:  # gradient restart
                t = 1.0
            t_next = (1.0 + math.sqrt(1.0 + 4.0 * t * t)) / 2.0
            y = np.maximum(0.0, x + ((t - 1.0) / t_next) * (x - x_prev))
            x_prev, t = x, t_next
            step *= 1.1
            # gradient mapping small relative to the iterate
            if math.sqrt(d @ d) <= 1e-10 * max(1e-300, math.sqrt(x @ x)):
                break
        value, fs = _scaled_primal(x_prev, A, D, p)
        if value < best:
            best, f_best = value, fs
        f = x_prev
        residual = float(max(0.0, 1.0 - (A @ f).min()))
        if stage >= stages and residual <= tol:
            break
        mu *= growth
    converged = residual <= tol
    if not converged:
        warnings.warn(f"primal capacity solver stopped with residual {residual:.2e}", RuntimeWarning, stacklevel=2)
    res_best = float(max(0.0, 1.0 - (A @ f_best).min()))
    return CapacityResult(
        best, f_best, res_best, bool(converged), total, "primal", None, None, {"penalty": mu, "stages": stage,
                                                                             "penalty_residual": residual}
    )


def capacity(problem):
    """Discrete weighted capacity of the node set ``problem.E``."""
    method = problem.method
    if method == "auto":
        method = "dual" if problem.params.p == 2 else "primal"
    if method == "dual":
        if problem.params.p != 2:
            raise ValidationError("the dual solver needs p = 2")
        return solve_dual(problem)
    return solve_primal(problem)


def capacitary_measure(problem, result=None):
    """Dual optimal measure ``lam / 2`` on E for p = 2."""
    if problem.params.p != 2:
        raise ValidationError("capacitary measures are computed for p = 2 only")
    if result is None:
        result = solve_dual(problem)
    if result.dual is None:
        raise ValidationError("the result carries no dual variables")
    if not result.converged:
        warnings.warn("capacitary measure taken from an inexact solve", RuntimeWarning, stacklevel=2)
    masses = result.dual / 2.0
    keep = masses > 0
    return SphereMeasure(problem.E[keep], masses[keep])


def extremal_check(nu, E, params, w, grid, L=None):
    """Mass, self-cell energy and Wolff potential range of a capacitary measure.

    ``ratio`` is max over min of the Wolff potential on the support of
    ``nu``.  The minimum over all of E is reported separately; it may be
    small at isolated inactive nodes.
    """
    E = check_index_set(E, grid.size)
    if len(nu) == 0:
        nan = math.nan
        return {"status": "empty", "mass": 0.0, "energy": 0.0, "min_on_E": nan, "min_on_support": nan,
                "max_on_support": nan, "ratio": nan}
    idx = np.union1d(E, nu.nodes)
    vals = wolff_potential(nu, params, w, grid, grid.nodes[idx], L)
    on_E = vals[np.isin(idx, E)]
    on_supp = vals[np.isin(idx, nu.nodes)]
    return {
        "status": "ok",
        "mass": nu.total,
        "energy": energy(nu, params, w, grid, diagonal="cell"),
        "min_on_E": float(on_E.min()),
        "min_on_support": float(on_supp.min()),
        "max_on_support": float(on_supp.max()),
        "ratio": float(on_supp.max() / on_supp.min()),
    }


def fit_slope(x, y):
    """Least-squares slope of ``log y`` against ``log x``; NaN for fewer than two points."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.size < 2:
        return math.nan
    lx, ly = np.log(x), np.log(y)
    lx = lx - lx.mean()
    return float(lx @ (ly - ly.mean()) / (lx @ lx))


def ball_capacity_profile(params, w, grid, radii, center=None, tol=None, method="auto"):
    """Capacities of balls ``B(center, r)`` with their log-log slope.

    Also returns the comparison profile ``W(B)/r^{sp}``.  The default center
    is the first grid node.
    """
    radii = np.sort(np.asarray(radii, dtype=float))
    center = grid.nodes[0] if center is None else check_points(center, grid.dim)[0]
    rows = []
    for r in radii:
        E = ball(grid, center, r)
        res = capacity(CapacityProblem(E, params, w, grid, tol=tol, method=method))
        rows.append(
            {
                "r": float(r),
                "capacity": res.value,
                "comparison": weighted_mass(w, E, grid) / r ** (params.s * params.p),
                "nodes": int(E.size),
                "converged": res.converged,
            }
        )
    slope = fit_slope(radii, [row["capacity"] for row in rows])
    return {"rows": rows, "slope": slope, "degenerate": radii.size < 2}
