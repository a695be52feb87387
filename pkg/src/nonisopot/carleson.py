"""Measures on the ball: embedding constants, tent conditions and the trace-equivalence batch."""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ._validation import ValidationError, check_aperture
from .capacity import CapacityProblem, capacity
from .geometry import build_grid, cone_shadow, gauge, gauge_matrix, pairing
from .holomorphic import hs_norm, kernel_series
from .potentials import PotentialParams
from .weights import BallFamily, WeightField, ap_constant, doubling_order, weight_from_descriptor


@dataclass(frozen=True, eq=False)
class BallMeasure:
    """Finite positive atomic measure at interior points of the unit ball."""

    points: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex)
        masses = np.asarray(self.masses, dtype=float).ravel()
        if pts.ndim != 2 or pts.shape[0] != masses.size:
            raise ValidationError("points must have shape (atoms, n) with one mass per atom")
        if np.any(masses <= 0) or np.any(~np.isfinite(masses)):
            raise ValidationError("atom masses must be positive and finite")
        if masses.size and np.any(np.sqrt(np.sum(np.abs(pts) ** 2, axis=1)) > 1.0 - 1e-6 + 1e-15):
            raise ValidationError("atoms must satisfy |z| <= 1 - 1e-6")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "masses", masses)

    def __len__(self):
        return self.masses.size

    @classmethod
    def empty(cls, n):
        return cls(np.zeros((0, n), dtype=complex), np.zeros(0))

    def scaled(self, c):
        return BallMeasure(self.points, self.masses * c)

    def with_atom(self, z, m):
        return BallMeasure(np.vstack([self.points, np.atleast_2d(z)]), np.r_[self.masses, m])


@dataclass(frozen=True)
class ExperimentConfig:
    """Seeded batch description for :func:`equivalence_experiment`."""

    seed: int = 0
    measures: int = 10
    atoms: int = 24
    n: int = 1
    p: float = 2.0
    s: float = 0.3
    eps: float = 0.0
    alpha: float = 2.0
    resolutions: tuple = (256, 512)
    base_resolution: int = 32
    max_level: int = 6


def _operator(mu, params, w, grid, kind):
    """Matrix of the discretised map ``L^2(w) -> L^2(mu)`` in orthonormal coordinates."""
    if kind == "K":
        kern = gauge_matrix(mu.points, grid.nodes) ** (-params.order)
    else:
        kern = (1.0 - pairing(mu.points, grid.nodes)) ** (-params.order)
    return np.sqrt(mu.masses)[:, None] * kern * np.sqrt(grid.weights / w.values)[None, :]


def power_iteration(B, tol=1e-8, max_iter=10000):
    """Largest singular value of ``B`` by power iteration on ``B B^H``.

    Stops when the Rayleigh quotient changes by less than ``tol`` relative.
    """
    v = np.ones(B.shape[0], dtype=B.dtype)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        u = B @ (np.conj(B.T) @ v)
        new = float(np.real(np.vdot(v, u)))
        norm = np.linalg.norm(u)
        if norm == 0:
            return 0.0
        v = u / norm
        if abs(new - lam) <= tol * abs(new):
            return math.sqrt(max(new, 0.0))
        lam = new
    warnings.warn("power iteration did not reach its tolerance", RuntimeWarning, stacklevel=2)
    return math.sqrt(max(lam, 0.0))


def _lower_bound(mu, params, w, grid, kind, iters=500):
    """Nonlinear power iteration for ``||T f||_{L^p(mu)} / ||f||_{L^p(w)}``.

    Each step takes ``f = |h / D|^{p'-1}`` with the phase of ``h = T^* (mu |Tf|^{p-2} Tf)``;
    for the positive Riesz kernel the iterates stay nonnegative.
    """
    p = params.p
    if kind == "K":
        T = gauge_matrix(mu.points, grid.nodes) ** (-params.order) * grid.weights
    else:
        T = (1.0 - pairing(mu.points, grid.nodes)) ** (-params.order) * grid.weights
    D = grid.weights * w.values
    f = np.ones(grid.size, dtype=T.dtype)
    best = 0.0
    for _ in range(iters):
        g = T @ f
        num = np.dot(mu.masses, np.abs(g) ** p) ** (1.0 / p)
        den = np.dot(D, np.abs(f) ** p) ** (1.0 / p)
        ratio = num / den
        if ratio <= best * (1 + 1e-12):
            best = max(best, ratio)
            break
        best = ratio
        h = np.conj(T).T @ (mu.masses * np.abs(g) ** (p - 2.0) * g)
        mag = np.abs(h)
        if not np.any(mag > 0):
            break
        f = (mag / D) ** (1.0 / (p - 1.0))
        if np.iscomplexobj(T):
            f = f * np.exp(1j * np.angle(h))
    return float(best)


def embed_const_K(mu, params, w, grid, tol=1e-8):
    """Norm of ``K_s: L^p(w) -> L^p(mu)``; exact for p=2, a lower bound otherwise."""
    if len(mu) == 0:
        return 0.0
    if params.p == 2:
        return power_iteration(_operator(mu, params, w, grid, "K"), tol)
    return _lower_bound(mu, params, w, grid, "K")


def embed_const_C(mu, params, w, grid, tol=1e-8):
    """Norm of the Cauchy-type operator ``C_s: L^p(w) -> L^p(mu)``; p=2 exact, otherwise a lower bound."""
    if len(mu) == 0:
        return 0.0
    if params.p == 2:
        return power_iteration(_operator(mu, params, w, grid, "C"), tol)
    return _lower_bound(mu, params, w, grid, "C")


def shadow_reach(mu, grid, alpha, centers):
    """For each atom and center, the largest gauge from the center to a node whose cone holds the atom.

    The atom lies in the tent over ``B(center, r)`` exactly when this reach is
    below ``r``.  Atoms whose cone holds no node get reach 0.
    """
    shadow = cone_shadow(mu.points, grid, alpha)
    empty = ~shadow.any(axis=1)
    if np.any(empty):
        warnings.warn(f"{int(empty.sum())} atoms sit above every node's cone at this resolution", RuntimeWarning, stacklevel=2)
    centers = np.atleast_2d(centers)
    reach = np.zeros((len(mu), centers.shape[0]))
    gc = gauge_matrix(centers, grid.nodes)
    for i in range(len(mu)):
        if shadow[i].any():
            reach[i] = gc[:, shadow[i]].max(axis=1)
    return reach


def tent_ball_ratio(mu, w, params, alpha, family, grid):
    """Largest ``mu(T(B)) r^{sp} / W(B)`` over a ball family."""
    alpha = check_aperture(alpha)
    if len(mu) == 0:
        return 0.0
    if family is None:
        family = BallFamily(grid.nodes, 2.0 ** -np.arange(1, 7))
    reach = shadow_reach(mu, grid, alpha, family.centers)
    sp = params.s * params.p
    best = 0.0
    gc = gauge_matrix(family.centers, grid.nodes)
    wq = grid.weights * w.values
    for r in family.radii:
        tent_mass = mu.masses @ (reach < r)
        W = (gc < r).astype(float) @ wq
        ok = W > 0
        if np.any(ok):
            best = max(best, float(np.max(tent_mass[ok] * r**sp / W[ok])))
    return best


def tent_mass(mu, G, grid, alpha=2.0):
    """``mu(T(G))`` for a node set ``G``; the tent is decided from the complement of G."""
    inside = np.zeros(grid.size, dtype=bool)
    inside[np.asarray(G, dtype=np.int64)] = True
    if len(mu) == 0:
        return 0.0
    shadow = cone_shadow(mu.points, grid, alpha)
    in_tent = ~np.any(shadow & ~inside[None, :], axis=1)
    return float(mu.masses @ in_tent)


def capacity_condition_ratio(mu, sets, params, w, grid, alpha=2.0, tol=None):
    """Largest ``mu(T(G)) / C(G)`` over node sets ``G``, with the per-set table."""
    alpha = check_aperture(alpha)
    rows = []
    for k, G in enumerate(sets):
        G = np.asarray(G, dtype=np.int64)
        res = capacity(CapacityProblem(G, params, w, grid, tol=tol))
        m = tent_mass(mu, G, grid, alpha)
        rows.append(
            {
                "set": k,
                "nodes": int(G.size),
                "tent_mass": m,
                "capacity": res.value,
                "ratio": m / res.value if res.value > 0 else (0.0 if m == 0 else math.inf),
                "status": res.status,
            }
        )
    best = max((row["ratio"] for row in rows), default=0.0)
    return best, rows


def random_ball_measure(directions, rng, atoms, max_level, min_level=2):
    """Atoms at radii ``1 - 2^-k`` (k uniform in [min_level, max_level]) above given directions.

    Directions are drawn without replacement; masses are log-uniform in [0.1, 10].
    """
    directions = np.atleast_2d(directions)
    pick = rng.choice(directions.shape[0], size=min(atoms, directions.shape[0]), replace=False)
    levels = rng.integers(min_level, max_level + 1, size=pick.size)
    masses = np.exp(rng.uniform(math.log(0.1), math.log(10.0), size=pick.size))
    radii = 1.0 - 2.0 ** -levels.astype(float)
    return BallMeasure(directions[pick] * radii[:, None], masses)


def counterexample_weight(eps, grid):
    """Power weight ``(1 - |zeta'|^2)^eps`` on an n=2 grid, for ``-1 < eps < 1``."""
    if not -1.0 < eps < 1.0:
        raise ValidationError("eps must lie in (-1, 1); outside it the weight is not in A_2")
    return WeightField.power(grid, eps)


def counterexample_report(eps, resolutions=(16, 32)):
    """A_2 estimates across resolutions and the doubling order of the power weight."""
    rows = []
    for N in resolutions:
        grid = build_grid(2, N)
        w = counterexample_weight(eps, grid)
        rows.append({"resolution": N, "ap_constant": ap_constant(w, 2.0, grid)})
    grid = build_grid(2, resolutions[-1])
    return {"eps": eps, "ap": rows, "doubling_order": doubling_order(counterexample_weight(eps, grid), grid)}


def tent_test_function(n, order, zeta, r, tol=1e-8, max_degree=None):
    """Truncated expansion of ``(1 - (1-r) z conj(zeta))^{-order}``; the dropped tail is below ``tol``."""
    if max_degree is None:
        a = 1.0 - r
        k, term = 0, 1.0
        while True:
            k += 1
            term *= a * (order + k - 1) / k
            if term * a / (1.0 - a) < tol and k > order:
                break
        max_degree = k
    return kernel_series(n, order, zeta, max_degree, 1.0 - r)


def tent_function_ratio(params, w, grid, zeta, r, order=4):
    """``||F||^p_{H^p_s(w)} r^{(order+s)p} / W(B(zeta, r))`` for the tent test function."""
    F = tent_test_function(grid.dim, order, zeta, r)
    norm = hs_norm(F, params.p, params.s, w, grid)
    W = float(np.dot(grid.weights * w.values, gauge(grid.nodes, zeta) < r))
    return norm**params.p * r ** ((order + params.s) * params.p) / W


def check_regime(params, w, grid):
    """Names of violated inequalities among ``0 < n - sp < 1`` and ``tau - sp < 1``."""
    sp = params.s * params.p
    problems = []
    if not 0 < params.n - sp < 1:
        problems.append(f"0 < n - sp < 1 fails (n - sp = {params.n - sp:.4g})")
    tau = doubling_order(w, grid)
    if not tau - sp < 1:
        problems.append(f"tau - sp < 1 fails (tau - sp = {tau - sp:.4g})")
    return problems


def equivalence_experiment(config):
    """Embedding constants of ``K_s`` and ``C_s`` for a seeded batch of ball measures.

    Returns ``(rows, summary)``; rows follow the report CSV columns.
    """
    params = PotentialParams(config.p, config.s, config.n)
    if config.p != 2:
        raise ValidationError("the equivalence batch runs in the exact lane p = 2")
    descriptor = {"kind": "constant", "c": 1.0} if config.eps == 0 or config.n == 1 else {
        "kind": "power", "eps": config.eps}
    if config.n == 1 and config.eps != 0:
        raise ValidationError("power weights need n = 2")
    probe = build_grid(config.n, config.resolutions[0])
    problems = check_regime(params, weight_from_descriptor(descriptor, probe), probe)
    if problems:
        raise ValidationError("regime violated: " + "; ".join(problems))
    base = build_grid(config.n, config.base_resolution)
    rng = np.random.default_rng(config.seed)
    measures = [random_ball_measure(base.nodes, rng, config.atoms, config.max_level) for _ in range(config.measures)]
    rows = []
    for N in config.resolutions:
        grid = build_grid(config.n, N)
        w = weight_from_descriptor(descriptor, grid)
        family = BallFamily(base.nodes, 2.0 ** -np.arange(1, 7))
        for k, mu in enumerate(measures):
            cK = embed_const_K(mu, params, w, grid)
            cC = embed_const_C(mu, params, w, grid)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                tr = tent_ball_ratio(mu, w, params, config.alpha, family, grid)
            rows.append(
                {
                    "seed": config.seed,
                    "measure_id": k,
                    "p": config.p,
                    "s": config.s,
                    "eps": config.eps,
                    "resolution": N,
                    "const_K": cK,
                    "const_C": cC,
                    "ratio": cK / cC,
                    "tent_ratio": tr,
                }
            )
    ratios = np.array([row["ratio"] for row in rows])
    summary = {"max_ratio": float(ratios.max()), "median_ratio": float(np.median(ratios)), "rows": len(rows)}
    return rows, summary
