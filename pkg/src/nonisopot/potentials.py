"""Riesz and Cauchy potentials, energies, Wolff potentials and holomorphic potentials."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import comb, roots_jacobi
from numpy.polynomial.legendre import leggauss

from ._validation import ValidationError, check_exponent, check_points, check_smoothness, conjugate
from .geometry import PUNCTURE, ball_sums, build_grid, gauge_matrix, pairing, row_blocks, self_cell_integral
from .weights import doubling_order, dual_weight, weight_from_descriptor

LOG2 = math.log(2.0)


@dataclass(frozen=True)
class PotentialParams:
    """Exponents shared by the potential operators.

    ``lam`` is the holomorphic-potential exponent, ``q`` and ``K`` the
    parameters of the extended Wolff inequality.
    """

    p: float
    s: float
    n: int
    lam: float | None = None
    q: float | None = None
    K: float | None = None

    def __post_init__(self):
        check_exponent(self.p)
        if self.n not in (1, 2):
            raise ValidationError("n must be 1 or 2")
        check_smoothness(self.s, self.n)
        if self.lam is not None and not 0 < self.lam < 1:
            raise ValidationError("lambda must lie in (0, 1)")
        if self.q is not None and not self.q > 0:
            raise ValidationError("q must be positive")
        if self.K is not None and not self.K > 0:
            raise ValidationError("K must be positive")

    @property
    def p_conj(self):
        return conjugate(self.p)

    @property
    def order(self):
        """Kernel order ``n - s`` of the Riesz and Cauchy kernels."""
        return self.n - self.s


@dataclass(frozen=True, eq=False)
class SphereMeasure:
    """Finite positive atomic measure carried by grid nodes."""

    nodes: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=np.int64).ravel()
        masses = np.asarray(self.masses, dtype=float).ravel()
        if nodes.shape != masses.shape:
            raise ValidationError("one mass per atom is required")
        if np.any(masses <= 0) or np.any(~np.isfinite(masses)):
            raise ValidationError("atom masses must be positive and finite")
        if np.unique(nodes).size != nodes.size:
            raise ValidationError("atom nodes must be distinct")
        if nodes.size and nodes.min() < 0:
            raise ValidationError("atom nodes must be grid indices")
        order = np.argsort(nodes)
        object.__setattr__(self, "nodes", nodes[order])
        object.__setattr__(self, "masses", masses[order])

    @classmethod
    def empty(cls):
        return cls(np.zeros(0, dtype=np.int64), np.zeros(0))

    @classmethod
    def from_dense(cls, dense):
        dense = np.asarray(dense, dtype=float)
        idx = np.flatnonzero(dense > 0)
        return cls(idx, dense[idx])

    @property
    def total(self):
        return float(self.masses.sum())

    def __len__(self):
        return self.nodes.size

    def dense(self, size):
        if self.nodes.size and self.nodes[-1] >= size:
            raise ValidationError("measure atoms exceed the grid size")
        out = np.zeros(size)
        out[self.nodes] = self.masses
        return out

    def scaled(self, c):
        if c == 0:
            return SphereMeasure.empty()
        return SphereMeasure(self.nodes, self.masses * c)


def _as_source(source, grid):
    """Return (source points, masses) for a measure or node-value array."""
    if isinstance(source, SphereMeasure):
        return grid.nodes[source.nodes], source.masses
    values = np.asarray(source, dtype=float).ravel()
    if values.size != grid.size:
        raise ValidationError("function values must be given at every grid node")
    mask = values != 0
    return grid.nodes[mask], grid.weights[mask] * values[mask]


def riesz_kernel(targets, sources, order, cap=None):
    """``gauge^{-order}`` with coincident pairs (gauge < 1e-12) set to zero.

    With ``cap`` (one value per source) the kernel is instead capped at
    ``cap`` and coincident pairs take the cap.
    """
    g = gauge_matrix(targets, sources)
    with np.errstate(divide="ignore"):
        k = g ** (-order)
    if cap is None:
        k[g < PUNCTURE] = 0.0
        return k
    return np.minimum(k, np.asarray(cap, dtype=float))


def _check_diagonal(diagonal):
    if diagonal not in ("puncture", "cell"):
        raise ValidationError(f"diagonal must be 'puncture' or 'cell', got {diagonal!r}")
    return diagonal


def _source_cap(source, grid, order):
    """Self-cell average ``c_j / q_j`` of the kernel for each source node.

    A mass at node j is smeared over its cell; near pairs closer than the
    cell scale, which occur where the product grid crowds its rings, are
    capped at the same value.
    """
    idx = source.nodes if isinstance(source, SphereMeasure) else np.flatnonzero(np.asarray(source).ravel() != 0)
    return (self_cell_integral(grid, order) / grid.weights)[idx]


def riesz_apply(source, targets, s, grid, diagonal="puncture"):
    """Riesz potential ``K_s`` of a measure or of node values at each target.

    ``"puncture"`` drops coincident target/source pairs.  ``"cell"`` caps the
    kernel at the self-cell average of each source, which also fills the
    diagonal.
    """
    s = check_smoothness(s, grid.dim)
    targets = check_points(targets, grid.dim, name="targets")
    _check_diagonal(diagonal)
    pts, mass = _as_source(source, grid)
    out = np.zeros(targets.shape[0])
    if mass.size == 0:
        return out
    cap = _source_cap(source, grid, grid.dim - s) if diagonal == "cell" else None
    for blk in row_blocks(targets.shape[0], mass.size):
        out[blk] = riesz_kernel(targets[blk], pts, grid.dim - s, cap) @ mass
    return out


def cauchy_apply(g, targets, s, grid):
    """``sum_j q_j g_j (1 - z conj(zeta_j))^{-(n-s)}`` with the principal branch."""
    s = check_smoothness(s, grid.dim)
    targets = check_points(targets, grid.dim, name="targets")
    if np.any(np.sum(np.abs(targets) ** 2, axis=1) > (1.0 - 1e-6) ** 2):
        raise ValidationError("Cauchy targets must satisfy |z| <= 1 - 1e-6")
    g = np.asarray(g, dtype=complex).ravel()
    out = np.zeros(targets.shape[0], dtype=complex)
    for blk in row_blocks(targets.shape[0], grid.size):
        out[blk] = (1.0 - pairing(targets[blk], grid.nodes)) ** (-(grid.dim - s)) @ (grid.weights * g)
    return out


def node_potential(nu, s, grid, diagonal="puncture"):
    """``K_s nu`` at every grid node."""
    return riesz_apply(nu, grid.nodes, s, grid, diagonal)


def energy(nu, params, w, grid, potential=None, diagonal="puncture"):
    """Weighted energy ``sum_j q_j (K_s nu)_j^{p'} w_j^{-(p'-1)}``."""
    pc = params.p_conj
    kv = node_potential(nu, params.s, grid, diagonal) if potential is None else potential
    return float(np.dot(grid.weights * w.values ** (-(pc - 1.0)), kv**pc))


def nonlinear_potential(nu, params, w, grid, at=None, diagonal="puncture"):
    """``U = K_s[w^{-(p'-1)} (K_s nu)^{p'-1}]`` at grid nodes (all, or the indices ``at``)."""
    pc = params.p_conj
    kv = node_potential(nu, params.s, grid, diagonal)
    density = w.values ** (-(pc - 1.0)) * kv ** (pc - 1.0)
    targets = grid.nodes if at is None else grid.nodes[np.asarray(at, dtype=np.int64)]
    return riesz_apply(density, targets, params.s, grid, diagonal)


def random_sphere_points(n, rng, count):
    """Uniform points on the unit sphere of C^n."""
    z = rng.normal(size=(count, n)) + 1j * rng.normal(size=(count, n))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def spread_centers(n, rng, count, separation, max_tries=100000):
    """``count`` uniform sphere points with pairwise gauge at least ``separation``."""
    pts = np.zeros((0, n), dtype=complex)
    tries = 0
    while pts.shape[0] < count:
        tries += 1
        if tries > max_tries:
            raise ValidationError("could not place the requested number of separated centers")
        z = random_sphere_points(n, rng, 1)
        if pts.shape[0] == 0 or gauge_matrix(z, pts).min() >= separation:
            pts = np.vstack([pts, z])
    return pts


def lump_measure(centers, masses, radius, grid):
    """Mass ``masses[i]`` spread uniformly (against sigma) over the nodes of ``B(centers[i], radius)``.

    Lumps with no node inside fall back to the nearest node.
    """
    centers = check_points(centers, grid.dim, name="centers")
    masses = np.asarray(masses, dtype=float).ravel()
    if masses.size != centers.shape[0]:
        raise ValidationError("one mass per center is required")
    dense = np.zeros(grid.size)
    g = gauge_matrix(centers, grid.nodes)
    for i, m in enumerate(masses):
        inside = g[i] < radius
        if not inside.any():
            inside = g[i] == g[i].min()
        q = grid.weights * inside
        dense += m * q / q.sum()
    return SphereMeasure.from_dense(dense)


def spread_measure_plan(n, rng, lumps=4, radius=None):
    """Seeded lump centers, masses and radius for a spread measure.

    The radius defaults to 2^-2 on n=2 and 2^-4 on n=1; centers are
    separated by four radii and masses are log-uniform in [0.1, 10].
    """
    radius = (0.25 if n == 2 else 0.0625) if radius is None else float(radius)
    centers = spread_centers(n, rng, lumps, 4.0 * radius)
    masses = np.exp(rng.uniform(math.log(0.1), math.log(10.0), size=lumps))
    return centers, masses, radius


def default_levels(grid):
    """Dyadic levels down to the radius of a ball holding one node on average."""
    if grid.dim == 1:
        h = 2.0 * math.sin(math.pi / (2.0 * grid.size))
    else:
        h = math.sqrt(2.0 / grid.size)
    return max(4, int(math.floor(math.log2(1.0 / h))))


def _levels(grid, L):
    L = default_levels(grid) if L is None else int(L)
    if L < 1:
        raise ValidationError("need at least one dyadic level")
    return L


def level_sums(nu, duals, grid, centers, L):
    """Per center and level ``t = 2^-l``: ``nu(B)``, ``sigma(B)`` and the averages of each dual weight.

    ``duals`` is a list of value arrays sharing one pass over the balls.
    Empty balls take the value at the nearest node as their average.
    """
    radii = 2.0 ** -np.arange(1, L + 1)
    density = nu.dense(grid.size) / grid.weights
    sums = ball_sums(grid, centers, radii, np.column_stack([density, np.ones(grid.size), *duals]))
    mass, sigma = sums[..., 0], sums[..., 1]
    ok = sigma > 0
    empty = np.flatnonzero(~np.all(ok, axis=1))
    nearest = None
    if empty.size:
        nearest = np.argmax(np.abs(pairing(np.asarray(centers)[empty], grid.nodes)), axis=1)
    avgs = []
    for k, dual in enumerate(duals):
        avg = np.empty_like(sigma)
        avg[ok] = sums[..., 2 + k][ok] / sigma[ok]
        if empty.size:
            fill = np.broadcast_to(dual[nearest][:, None], (empty.size, L))
            sub = avg[empty]
            sub[~ok[empty]] = fill[~ok[empty]]
            avg[empty] = sub
        avgs.append(avg)
    return radii, mass, sigma, avgs


def level_table(nu, params, w, grid, centers, L):
    """Per center and level ``t = 2^-l``: ``nu(B)``, ``sigma(B)`` and ``<w^{-(p'-1)}>_B``."""
    radii, mass, sigma, (avg,) = level_sums(nu, [dual_weight(w, params.p).values], grid, centers, L)
    return radii, mass, sigma, avg


def wolff_terms(radii, mass, avg, params):
    """Dyadic Wolff sum from a level table."""
    gamma = params.p_conj - 1.0
    return ((mass / radii ** (params.n - params.s * params.p)) ** gamma * avg * LOG2).sum(axis=1)


def wolff_potential(nu, params, w, grid, zeta, L=None):
    """Dyadic weighted Wolff potential at each point ``zeta``.

    ``sum_l (nu(B_l) / t_l^{n-sp})^{p'-1} <w^{-(p'-1)}>_{B_l} log 2`` with
    ``B_l = B(zeta, 2^-l)``, l = 1..L.
    """
    L = _levels(grid, L)
    single = np.asarray(zeta).ndim == 1
    zeta = check_points(zeta, grid.dim, name="zeta")
    radii, mass, _, avg = level_table(nu, params, w, grid, zeta, L)
    out = wolff_terms(radii, mass, avg, params)
    return float(out[0]) if single else out


def wolff_ratio(nu, params, w, grid, L=None, diagonal="puncture"):
    """Energy, its Wolff counterpart ``sum_i m_i W(zeta_i)``, and their ratio."""
    E = energy(nu, params, w, grid, diagonal=diagonal)
    if len(nu) == 0:
        return E, 0.0, math.nan
    iw = float(np.dot(nu.masses, wolff_potential(nu, params, w, grid, grid.nodes[nu.nodes], L)))
    return E, iw, E / iw


def wolff_extension_lhs(nu, params, w, grid, q=None, K=None, L=None):
    """Left side of the extended Wolff inequality, dyadically discretised.

    ``sum_j q_j w_j [sum_{2^-l <= K} (nu(B_l)/t^{n-s} <w^{-(p'-1)}>_{B_l}^{1/(p'-1)})^q log 2]^{p'/q}``.
    """
    q = params.q if q is None else q
    K = (params.K if params.K is not None else 1.0) if K is None else K
    if q is None or not q > 0:
        raise ValidationError("q must be positive")
    L = _levels(grid, L)
    if len(nu) == 0:
        return 0.0
    radii, mass, _, avg = level_table(nu, params, w, grid, grid.nodes, L)
    gamma = params.p_conj - 1.0
    keep = radii <= K
    inner = ((mass / radii ** (params.n - params.s)) * avg ** (1.0 / gamma))[:, keep] ** q
    inner = inner.sum(axis=1) * LOG2
    return float(np.dot(grid.weights * w.values, inner ** (params.p_conj / q)))


# holomorphic potentials -------------------------------------------------------


def default_lambda(params, w, grid):
    """Midpoint of ``(max(0, tau - sp), 1)`` with ``tau`` the estimated doubling order."""
    tau = doubling_order(w, grid)
    lo = max(0.0, tau - params.s * params.p)
    if lo >= 1.0:
        raise ValidationError(f"no admissible lambda: tau - sp = {tau - params.s * params.p:.3f} >= 1")
    return 0.5 * (lo + 1.0)


def _lambda(params, w, grid):
    lam = params.lam if params.lam is not None else default_lambda(params, w, grid)
    if not 0 < lam < 1:
        raise ValidationError("lambda must lie in (0, 1)")
    return lam


def kernel_derivatives(u, lam, order):
    """``R^m (1-u)^{-lam}`` for m = 0..order as functions of ``u = a z conj(zeta)``.

    Works in the basis ``u^j (1-u)^{-lam-j}``, on which
    ``R[u^j (1-u)^{-lam-j}] = j u^j (1-u)^{-lam-j} + (lam+j) u^{j+1} (1-u)^{-lam-j-1}``.
    """
    base = 1.0 - u
    coefs = [1.0]
    out = []
    for _ in range(order + 1):
        val = np.zeros_like(u)
        for j, c in enumerate(coefs):
            if c:
                val = val + c * u**j * base ** (-lam - j)
        out.append(val)
        new = [0.0] * (len(coefs) + 1)
        for j, c in enumerate(coefs):
            new[j] += j * c
            new[j + 1] += (lam + j) * c
        coefs = new
    return out


def _is_circle(grid):
    return grid.dim == 1 and np.allclose(grid.weights, 1.0 / grid.size)


def _sphere_sums(coef, grid, support, points, scale, lam, order):
    """``sum_j coef_j R^m[(1 - scale z conj(zeta_j))^{-lam}]`` for m = 0..order at each point.

    ``points=None`` means every grid node; on the circle this is a circular
    convolution and is done by FFT.  Returns shape ``(order+1, P)``.
    """
    if points is None and _is_circle(grid):
        M = grid.size
        dense = np.zeros(M)
        dense[support] = coef
        u = scale * np.exp(2j * np.pi * np.arange(M) / M)
        fc = np.fft.fft(dense)
        return np.array([np.fft.ifft(fc * np.fft.fft(h)) for h in kernel_derivatives(u, lam, order)])
    pts = grid.nodes if points is None else points
    out = np.zeros((order + 1, pts.shape[0]), dtype=complex)
    for blk in row_blocks(pts.shape[0], len(support)):
        u = scale * pairing(pts[blk], grid.nodes[support])
        for m, h in enumerate(kernel_derivatives(u, lam, order)):
            out[m, blk] = h @ coef
    return out


@dataclass(frozen=True, eq=False)
class _HoloData:
    kind: str
    lam: float
    radii: np.ndarray
    support: np.ndarray
    coefs: np.ndarray  # (L, len(support))
    gamma: float


def _holo_data(nu, params, w, grid, which, L):
    L = _levels(grid, L)
    lam = _lambda(params, w, grid)
    gamma = params.p_conj - 1.0
    n, sp = params.n, params.s * params.p
    if which == "U":
        if not params.p < 2:
            raise ValidationError("the U potential needs 1 < p < 2")
        radii, mass, _, avg = level_table(nu, params, w, grid, grid.nodes, L)
        a = LOG2 * grid.weights * ((mass / radii ** (n - sp)) ** gamma * avg * radii ** (lam - n)).T
        support = np.flatnonzero(np.any(a > 0, axis=0))
        return _HoloData("U", lam, radii, support, a[:, support], gamma)
    if which == "V":
        if not params.p >= 2:
            raise ValidationError("the V potential needs p >= 2")
        radii, _, _, avg = level_table(nu, params, w, grid, grid.nodes[nu.nodes], L)
        b = nu.masses * (radii ** (lam + sp - n) * avg ** (1.0 / gamma)).T
        return _HoloData("V", lam, radii, nu.nodes, b, gamma)
    raise ValidationError("which must be 'U' or 'V'")


def _holo_eval(data, grid, points, rho, order):
    """``R^m F(rho z)`` for m = 0..order; ``points=None`` means all grid nodes."""
    P = grid.size if points is None else points.shape[0]
    out = np.zeros((order + 1, P), dtype=complex)
    if data.support.size == 0:
        return out
    for ell, t in enumerate(data.radii):
        sums = _sphere_sums(data.coefs[ell], grid, data.support, points, rho * (1.0 - t), data.lam, order)
        if data.kind == "U":
            out += sums
            continue
        g = data.gamma
        S = sums[0]
        out[0] += LOG2 * S**g
        if order >= 1:
            out[1] += LOG2 * g * S ** (g - 1.0) * sums[1]
        if order >= 2:
            out[2] += LOG2 * (g * (g - 1.0) * S ** (g - 2.0) * sums[1] ** 2 + g * S ** (g - 1.0) * sums[2])
        if order > 2:
            raise ValidationError("radial derivatives of V are implemented up to order 2")
    return out


def _holo_point(nu, params, w, grid, z, which, L):
    data = _holo_data(nu, params, w, grid, which, L)
    z = check_points(z, grid.dim, closed=False, name="z")
    return _holo_eval(data, grid, z, 1.0, 0)[0]


def holo_potential_U(nu, params, w, grid, z, L=None):
    """Holomorphic potential for 1 < p < 2 at points ``z`` of the open ball.

    Dyadic in ``t = 1 - r`` and grid-discretised in ``zeta``:
    ``sum_l sum_j q_j (nu(B)/t^{n-sp})^{p'-1} <w^{-(p'-1)}>_B t^{lam-n} (1-(1-t) z conj(zeta_j))^{-lam} log 2``.
    """
    return _holo_point(nu, params, w, grid, z, "U", L)


def holo_potential_V(nu, params, w, grid, z, L=None):
    """Holomorphic potential for p >= 2 at points ``z`` of the open ball.

    ``sum_l [sum_i m_i t^{lam+sp-n} <w^{-(p'-1)}>_{B(zeta_i,t)}^{1/(p'-1)} (1-(1-t) z conj(zeta_i))^{-lam}]^{p'-1} log 2``.
    """
    return _holo_point(nu, params, w, grid, z, "V", L)


def rho_rule(depth, a, order=8):
    """Nodes and weights for ``int_0^1 g(rho) (1-rho)^a d rho``.

    Composite Gauss-Legendre on dyadic panels up to ``1 - 2^-depth`` and a
    Gauss-Jacobi panel on the last piece.
    """
    x, wx = leggauss(order)
    edges = 1.0 - 2.0 ** -np.arange(depth + 1.0)
    half = np.diff(edges) / 2.0
    r = ((edges[:-1] + half)[:, None] + half[:, None] * x).ravel()
    wt = (half[:, None] * wx).ravel() * (1.0 - r) ** a
    xj, wj = roots_jacobi(order, a, 0.0)
    h = 2.0 ** -depth
    rj = 1.0 - h + h * (1.0 + xj) / 2.0
    wj = wj * (h / 2.0) ** (a + 1.0)
    return np.r_[r, rj], np.r_[wt, wj]


def holo_potential_norm(nu, params, w, grid, which="U", L=None, depth=None, k=None):
    """Majorant of the Hardy-Sobolev norm of the holomorphic potential.

    Returns the p-th root of
    ``|F(0)|^p + sum_eta q_eta w_eta (int_0^1 (1-rho)^{k-s-1} |(I+R)^k F(rho eta)| d rho)^p``
    with ``k`` the integer part of ``s`` plus one.  The radial derivative is
    applied to the kernel in closed form.
    """
    if len(nu) == 0:
        return 0.0
    data = _holo_data(nu, params, w, grid, which, L)
    k = int(math.floor(params.s)) + 1 if k is None else int(k)
    depth = data.radii.size + 8 if depth is None else depth
    rho, wr = rho_rule(depth, k - params.s - 1.0)
    f0 = _holo_eval(data, grid, np.zeros((1, grid.dim), dtype=complex), 1.0, 0)[0, 0]
    binom = [comb(k, m) for m in range(k + 1)]
    acc = np.zeros(grid.size)
    for r, wt in zip(rho, wr):
        derivs = _holo_eval(data, grid, None, r, k)
        acc += wt * np.abs(sum(b * d for b, d in zip(binom, derivs)))
    total = abs(f0) ** params.p + float(np.dot(grid.weights * w.values, acc**params.p))
    return total ** (1.0 / params.p)


# continuity ------------------------------------------------------------------


def singular_integral(zeta0, params, w, grid):
    """Quadrature of ``int gauge(zeta0, .)^{-(n-s)p'} w^{-(p'-1)} d sigma``.

    Punctured when the exponent is at least n.  Below n the kernel is
    capped at its self-cell average, so nodes crowding a ring of the grid
    near ``zeta0`` cannot outweigh their cells.
    """
    zeta0 = check_points(zeta0, grid.dim, name="zeta0")
    pc = params.p_conj
    order = (params.n - params.s) * pc
    cap = self_cell_integral(grid, order) / grid.weights if order < params.n else None
    kern = riesz_kernel(zeta0, grid.nodes, order, cap)[0]
    return float(np.dot(grid.weights * w.values ** (-(pc - 1.0)), kern))


def continuity_criterion(zeta0, params, weight, resolution, refine=2):
    """Singular integral at ``resolution`` and at ``refine`` times it, and their ratio.

    ``weight`` is a constant or power descriptor, rebuilt on each grid.  A
    ratio near one indicates a finite integral; a ratio well above one a
    divergent one.
    """
    values = []
    for N in (resolution, resolution * refine):
        grid = build_grid(params.n, N)
        values.append(singular_integral(zeta0, params, weight_from_descriptor(weight, grid), grid))
    return values[0], values[1], values[1] / values[0]
