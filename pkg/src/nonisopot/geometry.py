"""Sphere geometry: the gauge, quadrature grids, nonisotropic balls, cones and tents."""

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, optimize

from ._validation import ValidationError, check_aperture, check_dim, check_points

# Entries per gauge block; keeps the working set near 64 MB of complex128.
BLOCK = 1 << 22
PUNCTURE = 1e-12


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Nodes on the unit sphere of C^n with positive weights summing to one.

    ``levels`` holds, for n=2, the index of the latitude ring ``t`` each node
    belongs to; the grid is then invariant under the lattice translations of
    the two phase angles, which :func:`representatives` exploits.
    """

    dim: int
    nodes: np.ndarray
    weights: np.ndarray
    resolution: int | None = None
    levels: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=complex)
        weights = np.ascontiguousarray(self.weights, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] != self.dim:
            raise ValidationError("nodes must have shape (M, dim)")
        if weights.shape != (nodes.shape[0],):
            raise ValidationError("one weight per node is required")
        if np.any(weights <= 0):
            raise ValidationError("quadrature weights must be positive")
        if abs(weights.sum() - 1.0) > 1e-10:
            raise ValidationError("quadrature weights must sum to 1")
        if np.max(np.abs(np.sum(np.abs(nodes) ** 2, axis=1) - 1.0)) > 1e-12:
            raise ValidationError("nodes must lie on the unit sphere")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self):
        return self.nodes.shape[0]

    def __len__(self):
        return self.size

    def integrate(self, values):
        return float(np.dot(self.weights, np.asarray(values, dtype=float)))


def build_grid(n, resolution, *, t_rule="gauss"):
    """Quadrature grid on the sphere of C^n for n in {1, 2}.

    For n=1 the ``resolution`` nodes are equispaced on the circle.  For n=2
    the nodes are ``(cos t e^{i a}, sin t e^{i b})`` with ``resolution``
    equispaced phases in each of ``a`` and ``b`` and ``resolution // 2``
    latitudes ``t`` in ``(0, pi/2)``; cell weights are proportional to
    ``sin t cos t`` times the ``t``-rule weight and then normalised.  The
    default ``t_rule="gauss"`` places the latitudes at Gauss-Legendre
    points, ``"midpoint"`` uses the midpoint rule.
    """
    n = check_dim(n)
    N = int(resolution)
    if N != resolution or N < 4:
        raise ValidationError(f"resolution must be an integer >= 4, got {resolution!r}")
    theta = 2.0 * np.pi * np.arange(N) / N
    if n == 1:
        nodes = np.exp(1j * theta)[:, None]
        return QuadratureGrid(1, nodes, np.full(N, 1.0 / N), N)

    nt = N // 2
    if t_rule == "gauss":
        x, wx = leggauss(nt)
        t = (x + 1.0) * np.pi / 4.0
        wt = wx * np.pi / 4.0
    elif t_rule == "midpoint":
        t = (np.arange(nt) + 0.5) * (np.pi / 2.0) / nt
        wt = np.full(nt, (np.pi / 2.0) / nt)
    else:
        raise ValidationError(f"unknown t_rule {t_rule!r}")
    T, A, B = np.meshgrid(t, theta, theta, indexing="ij")
    nodes = np.stack([np.cos(T) * np.exp(1j * A), np.sin(T) * np.exp(1j * B)], axis=-1)
    cell = (wt * np.sin(t) * np.cos(t))[:, None, None] * np.ones((1, N, N))
    weights = cell.ravel()
    levels = np.repeat(np.arange(nt), N * N)
    return QuadratureGrid(2, nodes.reshape(-1, 2), weights / weights.sum(), N, levels)


def representatives(grid):
    """One node per symmetry orbit of the grid under phase rotations.

    Returns ``(indices, multiplicity)``; every node is the image of exactly one
    representative under a symmetry of the grid that also preserves ``sigma``
    and every weight depending only on ``|zeta_1|``.
    """
    if grid.dim == 1:
        return np.array([0]), np.array([grid.size])
    if grid.levels is None:
        return np.arange(grid.size), np.ones(grid.size, dtype=int)
    first = np.flatnonzero(np.r_[True, np.diff(grid.levels) != 0])
    counts = np.diff(np.r_[first, grid.size])
    return first, counts


def latitude(points):
    """The angle ``t`` with ``|zeta_1| = cos t`` for points of the n=2 sphere."""
    points = np.asarray(points, dtype=complex).reshape(-1, 2)
    return np.arctan2(np.abs(points[:, 1]), np.abs(points[:, 0]))


def gauge(z, zeta):
    """``|1 - z . conj(zeta)|``, broadcasting over leading axes."""
    z = np.asarray(z, dtype=complex)
    zeta = np.asarray(zeta, dtype=complex)
    return np.abs(1.0 - np.sum(z * np.conj(zeta), axis=-1))


def pairing(z, nodes):
    """Matrix of ``z_i . conj(nodes_j)``."""
    return np.asarray(z, dtype=complex) @ np.conj(np.asarray(nodes, dtype=complex)).T


def gauge_matrix(z, nodes):
    return np.abs(1.0 - pairing(z, nodes))


def row_blocks(rows, cols):
    """Yield slices splitting ``rows`` so that each block has about BLOCK entries."""
    step = max(1, BLOCK // max(cols, 1))
    for start in range(0, rows, step):
        yield slice(start, min(rows, start + step))


def ball(grid, zeta, r):
    """Indices of grid nodes in the nonisotropic ball ``{|1 - zeta conj(eta)| < r}``."""
    if not r > 0:
        raise ValidationError("radius must be positive")
    zeta = check_points(zeta, grid.dim, name="zeta")[0]
    return np.flatnonzero(gauge(grid.nodes, zeta) < r)


def ball_sums(grid, centers, radii, values):
    """Sums ``sum_{j in B(c, r)} q_j v_j`` for every center and radius.

    ``values`` has shape ``(M,)`` or ``(M, k)``; the result has shape
    ``(len(centers), len(radii))`` or ``(len(centers), len(radii), k)``.
    """
    centers = np.asarray(centers, dtype=complex).reshape(-1, grid.dim)
    radii = np.asarray(radii, dtype=float).ravel()
    vals = np.asarray(values, dtype=float)
    squeeze = vals.ndim == 1
    vals = grid.weights[:, None] * vals.reshape(grid.size, -1)
    out = np.empty((centers.shape[0], radii.size, vals.shape[1]))
    for blk in row_blocks(centers.shape[0], grid.size):
        g = gauge_matrix(centers[blk], grid.nodes)
        for k, r in enumerate(radii):
            out[blk, k] = (g < r).astype(float) @ vals
    return out[..., 0] if squeeze else out


def sphere_ball_measure(n, r):
    """Exact normalised measure of a nonisotropic ball of radius ``r`` on S^n, n in {1, 2}.

    For n=1 the ball is an arc of half-angle ``2 arcsin(r/2)``.  For n=2 the
    pairing ``zeta . conj(eta)`` is uniformly distributed on the unit disc,
    so the measure is the area of a lens divided by pi.
    """
    n = check_dim(n)
    r = np.clip(np.asarray(r, dtype=float), 0.0, 2.0)
    if n == 1:
        return 2.0 * np.arcsin(r / 2.0) / np.pi
    lens = r * r * np.arccos(r / 2.0) + np.arccos(1.0 - r * r / 2.0) - 0.5 * r * np.sqrt(4.0 - r * r)
    return lens / np.pi


def _ball_measure_density(n, r):
    """Derivative in ``r`` of :func:`sphere_ball_measure`, divided by ``r^(n-1)``."""
    if n == 1:
        return 2.0 / (np.pi * np.sqrt(4.0 - r * r))
    return 2.0 * np.arccos(r / 2.0) / np.pi


def self_cell_integral(grid, order):
    """Integral of ``gauge(zeta_j, .)^{-order}`` over the cell of each node.

    The cell is replaced by the ball around the node with the same measure
    ``q_j``, which is exact on the circle.  Finite for ``order < n`` and
    of size ``q_j^{1 - order/n}``.
    """
    if not 0 <= order < grid.dim:
        raise ValidationError("the self-cell integral needs 0 <= order < n")
    n = grid.dim
    uniq, inv = np.unique(grid.weights, return_inverse=True)
    out = np.empty(uniq.size)
    for k, q in enumerate(uniq):
        rho = optimize.brentq(lambda r: sphere_ball_measure(n, r) - q, 0.0, 2.0, xtol=1e-15, rtol=1e-14)
        out[k] = integrate.quad(
            lambda r: _ball_measure_density(n, r), 0.0, rho, weight="alg", wvar=(n - 1 - order, 0.0), epsabs=0.0, epsrel=1e-12
        )[0]
    return out[inv]


def admissible_contains(z, zeta, alpha=2.0):
    """Whether ``z`` lies in the approach region ``|1 - z conj(zeta)| < alpha (1 - |z|)``."""
    alpha = check_aperture(alpha)
    z = np.asarray(z, dtype=complex)
    modulus = np.sqrt(np.sum(np.abs(z) ** 2, axis=-1))
    return gauge(z, zeta) < alpha * (1.0 - modulus)


def cone_shadow(z, grid, alpha=2.0):
    """Boolean matrix: node ``j`` has ``z_i`` in its approach region."""
    z = check_points(z, grid.dim)
    modulus = np.sqrt(np.sum(np.abs(z) ** 2, axis=1))
    return gauge_matrix(z, grid.nodes) < alpha * (1.0 - modulus)[:, None]


def tent_contains(z, outside_nodes, alpha=2.0, grid=None):
    """Whether ``z`` lies in the tent over the open set whose complement is ``outside_nodes``.

    Accepts a single point or an ``(m, n)`` array of points.
    """
    if grid is None:
        raise ValidationError("a grid is required to resolve outside_nodes")
    alpha = check_aperture(alpha)
    single = np.asarray(z).ndim == 1
    z = check_points(z, grid.dim)
    outside = np.asarray(outside_nodes, dtype=np.int64).ravel()
    if outside.size == 0:
        inside = np.ones(z.shape[0], dtype=bool)
    else:
        modulus = np.sqrt(np.sum(np.abs(z) ** 2, axis=1))
        inside = np.ones(z.shape[0], dtype=bool)
        for blk in row_blocks(z.shape[0], outside.size):
            g = gauge_matrix(z[blk], grid.nodes[outside])
            inside[blk] = ~np.any(g < alpha * (1.0 - modulus[blk])[:, None], axis=1)
    return bool(inside[0]) if single else inside
