"""Holomorphic polynomials, fractional radial derivatives and the associated norms."""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import brentq
from scipy.special import gammainc, gammaincc, gammaln, roots_jacobi

from ._validation import ValidationError, check_aperture, check_exponent, check_points
from .geometry import pairing, row_blocks


@dataclass(frozen=True, eq=False)
class HoloFunction:
    """Holomorphic polynomial ``sum_m c_m z^m`` stored by multi-index.

    ``exponents`` is an integer array of shape ``(T, n)``; ``coefs`` holds the
    matching complex coefficients.  Repeated multi-indices are merged.
    """

    exponents: np.ndarray
    coefs: np.ndarray
    max_degree: int | None = None

    def __post_init__(self):
        exps = np.asarray(self.exponents, dtype=np.int64)
        coefs = np.asarray(self.coefs, dtype=complex).ravel()
        if exps.ndim != 2 or exps.shape[0] != coefs.size:
            raise ValidationError("exponents must have shape (terms, n) matching coefs")
        if np.any(exps < 0):
            raise ValidationError("multi-indices must be nonnegative")
        if exps.shape[0]:
            exps, inv = np.unique(exps, axis=0, return_inverse=True)
            merged = np.zeros(exps.shape[0], dtype=complex)
            np.add.at(merged, inv.ravel(), coefs)
            coefs = merged
        degree = int(exps.sum(axis=1).max()) if exps.shape[0] else 0
        max_degree = degree if self.max_degree is None else max(int(self.max_degree), degree)
        for arr in (exps, coefs):
            arr.setflags(write=False)
        object.__setattr__(self, "exponents", exps)
        object.__setattr__(self, "coefs", coefs)
        object.__setattr__(self, "max_degree", max_degree)

    @property
    def dim(self):
        return self.exponents.shape[1]

    @property
    def degrees(self):
        return self.exponents.sum(axis=1)

    @classmethod
    def monomial(cls, multi_index, coef=1.0):
        return cls(np.array([multi_index]), np.array([coef]))

    @classmethod
    def constant(cls, n, c):
        return cls(np.zeros((1, n), dtype=int), np.array([c]))

    @classmethod
    def zero(cls, n):
        return cls(np.zeros((0, n), dtype=int), np.zeros(0))

    def __call__(self, z):
        z = np.asarray(z, dtype=complex).reshape(-1, self.dim)
        return self.degree_values(z).sum(axis=1)

    def degree_values(self, z):
        """Homogeneous parts ``f_k(z)`` for k = 0..max_degree, shape ``(P, K+1)``."""
        z = np.asarray(z, dtype=complex).reshape(-1, self.dim)
        out = np.zeros((z.shape[0], self.max_degree + 1), dtype=complex)
        if self.coefs.size == 0:
            return out
        mono = np.ones((z.shape[0], self.coefs.size), dtype=complex)
        for i in range(self.dim):
            mono *= z[:, i : i + 1] ** self.exponents[:, i]
        np.add.at(out.T, self.degrees, (mono * self.coefs).T)
        return out

    def radial_values(self, points, radii, s=0.0):
        """``(I+R)^s f(r zeta)`` on a grid of points times radii, shape ``(P, len(radii))``."""
        parts = self.degree_values(points)
        k = np.arange(self.max_degree + 1)
        radii = np.asarray(radii, dtype=float)
        return (parts * (1.0 + k) ** s) @ (radii[None, :] ** k[:, None])

    def scaled(self, c):
        return HoloFunction(self.exponents, self.coefs * c, self.max_degree)

    def __add__(self, other):
        return HoloFunction(
            np.vstack([self.exponents, other.exponents]),
            np.r_[self.coefs, other.coefs],
            max(self.max_degree, other.max_degree),
        )

    def to_dict(self):
        return {
            "max_degree": int(self.max_degree),
            "terms": [
                {"multi_index": [int(v) for v in m], "re": float(c.real), "im": float(c.imag)}
                for m, c in zip(self.exponents, self.coefs)
            ],
        }

    @classmethod
    def from_dict(cls, data, n=None):
        terms = data.get("terms", [])
        if not terms:
            if n is None:
                raise ValidationError("an empty function needs an explicit dimension")
            return cls(np.zeros((0, n), dtype=int), np.zeros(0), data.get("max_degree"))
        exps = np.array([t["multi_index"] for t in terms], dtype=np.int64)
        coefs = np.array([complex(t["re"], t.get("im", 0.0)) for t in terms])
        return cls(exps, coefs, data.get("max_degree"))


def multi_indices(n, k):
    """All multi-indices of length n and total degree k."""
    if n == 1:
        return np.array([[k]])
    return np.array([[i, k - i] for i in range(k, -1, -1)])


def kernel_series(n, order, zeta0, max_degree, scale=1.0):
    """Truncated expansion of ``(1 - scale z . conj(zeta0))^{-order}``.

    Uses the binomial series and the multinomial expansion of the pairing.
    """
    zeta0 = np.asarray(zeta0, dtype=complex).ravel()
    exps, coefs = [], []
    for k in range(max_degree + 1):
        log_binom = gammaln(order + k) - gammaln(order) - gammaln(k + 1) if k else 0.0
        for m in multi_indices(n, k):
            log_multi = gammaln(k + 1) - np.sum(gammaln(m + 1))
            c = math.exp(log_binom + log_multi) * scale**k * np.prod(np.conj(zeta0) ** m)
            exps.append(m)
            coefs.append(c)
    return HoloFunction(np.array(exps), np.array(coefs), max_degree)


def random_polynomial(n, max_degree, rng, decay=0.7):
    """Random holomorphic polynomial with Gaussian coefficients decaying like ``decay^k``."""
    exps, coefs = [], []
    for k in range(max_degree + 1):
        for m in multi_indices(n, k):
            exps.append(m)
            coefs.append(decay**k * complex(rng.standard_normal(), rng.standard_normal()))
    return HoloFunction(np.array(exps), np.array(coefs), max_degree)


def radial_power(f, s):
    """``(I+R)^s f``: multiply the degree-k part by ``(1+k)^s``."""
    return HoloFunction(f.exponents, f.coefs * (1.0 + f.degrees) ** s, f.max_degree)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Nodes in (0, 1) with weights for ``int g(r) (1-r)^jacobi (log 1/r)^{moment-1} dr``."""

    radii: np.ndarray
    weights: np.ndarray
    jacobi: float = 0.0
    tail: float = 0.0
    moment: float = 1.0

    def __post_init__(self):
        radii = np.asarray(self.radii, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if radii.ndim != 1 or radii.shape != weights.shape:
            raise ValidationError("radii and weights must be 1-D arrays of equal length")
        if np.any(np.diff(radii) <= 0) or radii[0] < 0 or radii[-1] >= 1:
            raise ValidationError("radii must be strictly increasing inside [0, 1)")
        if np.any(weights <= 0):
            raise ValidationError("radial weights must be positive")
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return self.radii.size

    @classmethod
    def geometric(cls, count=200, per_octave=12):
        """``r_m = 1 - 2^{-m/per_octave}``, m = 1..count, with trapezoid weights."""
        r = 1.0 - 2.0 ** (-np.arange(1, count + 1) / per_octave)
        gaps = np.diff(r)
        w = np.zeros_like(r)
        w[:-1] += gaps / 2.0
        w[1:] += gaps / 2.0
        return cls(r, w)

    @classmethod
    def gauss_jacobi(cls, order, a=0.0):
        """Gauss rule for ``int_0^1 g(r) (1-r)^a dr``; exact for polynomial g of degree < 2 order."""
        if a <= -1:
            raise ValidationError("Jacobi exponent must exceed -1")
        x, w = roots_jacobi(order, a, 0.0)
        return cls((1.0 + x) / 2.0, w * 2.0 ** (-a - 1.0), a)

    @classmethod
    def dyadic(cls, stop, order=8):
        """Composite Gauss-Legendre on ``[0, 1/2], [1/2, 3/4], ...`` ending at ``stop``."""
        edges = [0.0]
        while 1.0 - edges[-1] > 2.0 * (1.0 - stop):
            edges.append(1.0 - (1.0 - edges[-1]) / 2.0)
        edges.append(stop)
        edges = np.array(edges)
        x, wx = leggauss(order)
        half = np.diff(edges) / 2.0
        r = ((edges[:-1] + half)[:, None] + half[:, None] * x).ravel()
        return cls(r, (half[:, None] * wx).ravel())

    @classmethod
    def log_moment(cls, m, step=0.05, u_max=40.0, cutoff=1e-17):
        """Grid for ``int_0^1 (log 1/r)^{m-1} g(r) dr`` in the variable ``x = log log(1/r)``.

        Trapezoid in ``x`` with ``r = exp(-e^x)``; the integrand decays doubly
        exponentially at one end and like ``e^{m x}`` at the other, so the
        rule converges geometrically.  The weight factor ``u^{m-1}`` is built
        in from ``u`` itself, since ``log(1/r)`` is lost to rounding near
        ``r = 1``; nodes that round to the same radius are merged.  ``tail``
        bounds the truncated mass relative to ``Gamma(m)``.
        """
        u_min = (cutoff * m * math.exp(gammaln(m))) ** (1.0 / m)
        x = np.arange(math.log(u_min), math.log(u_max) + step, step)
        u = np.exp(x)
        r = np.exp(-u)
        keep = r > 0
        u, r = u[keep], r[keep]
        # radii that round to 1 go to the largest representable radius below it
        r = np.minimum(r, np.nextafter(1.0, 0.0))
        r, inv = np.unique(r, return_inverse=True)
        w = np.zeros(r.size)
        np.add.at(w, inv.ravel(), step * u**m * np.exp(-u))
        tail = float(gammainc(m, u_min) + gammaincc(m, u_max))
        return cls(r, w, 0.0, tail, float(m))


def inverse_radial_integral(f, m, points, radial=None, tolerance=1e-10):
    """``(1/Gamma(m)) int_0^1 (log 1/r)^{m-1} f(r y) dr`` at each point ``y``.

    Agrees with ``radial_power(f, -m)`` up to quadrature error; a warning
    carries the tail estimate when it exceeds ``tolerance``.
    """
    if not m > 0:
        raise ValidationError("m must be positive")
    if radial is None:
        radial = RadialGrid.log_moment(m)
    if radial.tail > tolerance:
        warnings.warn(f"radial quadrature tail {radial.tail:.3e} exceeds {tolerance:.1e}", RuntimeWarning, stacklevel=2)
    r = radial.radii
    wts = radial.weights * (1.0 - r) ** (-radial.jacobi)
    if m != radial.moment:
        wts = wts * np.log(1.0 / r) ** (m - radial.moment)
    vals = f.radial_values(points, r)
    return (vals @ wts) / math.exp(gammaln(m))


def hs_norm(f, p, s, w, grid, radial=None):
    """``sup_r || (I+R)^s f(r .) ||_{L^p(w)}`` over the radial grid plus ``r = 1 - 1e-6``."""
    p = check_exponent(p)
    if radial is None:
        radial = RadialGrid.geometric()
    radii = np.r_[radial.radii, 1.0 - 1e-6]
    vals = np.abs(f.radial_values(grid.nodes, radii, s)) ** p
    norms = (grid.weights * w.values) @ vals
    return float(norms.max() ** (1.0 / p))


def _check_order(k, s):
    if int(k) != k or k <= s:
        raise ValidationError(f"k must be an integer greater than s, got k={k}, s={s}")
    return int(k)


def littlewood_paley(f, zeta, k, q, s, radial=None):
    """``(int_0^1 |(I+R)^k f(r zeta)|^q (1-r^2)^{(k-s)q-1} dr)^{1/q}`` at each zeta.

    ``q = inf`` gives the supremum of ``|(I+R)^k f(r zeta)| (1-r^2)^{k-s}``.
    The default rule is Gauss-Jacobi with the boundary factor built in.
    """
    k = _check_order(k, s)
    single = np.asarray(zeta).ndim == 1
    zeta = check_points(zeta, f.dim, name="zeta")
    if math.isinf(q):
        if radial is None:
            radial = RadialGrid.geometric()
        r = np.r_[0.0, radial.radii]
        vals = np.abs(f.radial_values(zeta, r, k)) * (1.0 - r * r) ** (k - s)
        out = vals.max(axis=1)
    else:
        if not q >= 1:
            raise ValidationError("q must lie in [1, inf]")
        a = (k - s) * q - 1.0
        if radial is None:
            radial = RadialGrid.gauss_jacobi(2 * f.max_degree + 40, a)
        r = radial.radii
        factor = (1.0 - r * r) ** a / (1.0 - r) ** radial.jacobi
        vals = np.abs(f.radial_values(zeta, r, k)) ** q
        out = (vals @ (radial.weights * factor)) ** (1.0 / q)
    return float(out[0]) if single else out


def cone_floor(grid, alpha, min_nodes=4.0):
    """Smallest height ``1 - r`` at which a cone cross-section holds ``min_nodes`` nodes on average.

    The cross-section of the approach region at height ``d`` is the set of
    ``eta`` with ``|1 - (1-d) eta conj(zeta)| < alpha d``; its measure is
    computed from the distribution of ``eta conj(zeta)`` (arc for n=1,
    uniform disc for n=2).
    """
    alpha = check_aperture(alpha)

    def section(d):
        rho = 1.0 - d
        if grid.dim == 1:
            c = (1.0 + rho * rho - (alpha * d) ** 2) / (2.0 * rho)
            return math.acos(max(-1.0, min(1.0, c))) / math.pi
        # disc of radius alpha d / rho around 1 / rho, intersected with the unit disc
        c, R = 1.0 / rho, alpha * d / rho
        if R >= c + 1.0:
            return 1.0
        x = (c * c + 1.0 - R * R) / (2.0 * c)
        x = max(-1.0, min(1.0, x))
        y = (c * c + R * R - 1.0) / (2.0 * c * R)
        y = max(-1.0, min(1.0, y))
        area = math.acos(x) + R * R * math.acos(y) - 0.5 * math.sqrt(
            max(0.0, (-c + 1 + R) * (c + 1 - R) * (c - 1 + R) * (c + 1 + R))
        )
        return area / math.pi

    target = min_nodes / grid.size
    if section(0.5) <= target:
        return 0.5
    return brentq(lambda d: section(d) - target, 1e-14, 0.5, xtol=1e-15, rtol=1e-12)


def _cone_bounds(pair, alpha):
    """Largest ``r`` such that ``r eta`` stays in the approach region at ``zeta``, given ``eta conj(zeta)``."""
    a2 = np.abs(pair) ** 2
    B = 2.0 * (alpha * alpha - pair.real)
    A = a2 - alpha * alpha
    C = 1.0 - alpha * alpha
    disc = np.maximum(B * B - 4.0 * A * C, 0.0)
    return -2.0 * C / (B + np.sqrt(disc))


def _cone_radii(grid, alpha, radial):
    floor = cone_floor(grid, alpha)
    if radial is None:
        return RadialGrid.dyadic(1.0 - floor)
    keep = radial.radii <= 1.0 - floor
    return RadialGrid(radial.radii[keep], radial.weights[keep], radial.jacobi, radial.tail, radial.moment)


def _cone_reduce(zeta, grid, alpha, table, op):
    """Combine per-node cumulative tables along the cone over each zeta."""
    out = np.empty(zeta.shape[0])
    for blk in row_blocks(zeta.shape[0], grid.size):
        rstar = _cone_bounds(pairing(zeta[blk], grid.nodes), alpha)
        idx = np.searchsorted(table["radii"], rstar, side="left")
        cols = np.arange(grid.size)[None, :]
        vals = table["cum"][cols, idx]
        out[blk] = op(vals, axis=1)
    return out


def area_fn(f, zeta, alpha, k, q, s, grid, radial=None):
    """Admissible area function over the discretised approach region at each zeta.

    The region is ``{r eta : eta in grid, r in radial grid}`` cut at the height
    where a cross-section still holds about four nodes; the volume element is
    ``q_eta dr r^{2n-1}`` and the integrand
    ``|(I+R)^k f|^q (1-|z|^2)^{(k-s)q-n-1}``.
    """
    alpha = check_aperture(alpha)
    k = _check_order(k, s)
    if not q >= 1 or math.isinf(q):
        raise ValidationError("area functions need a finite q >= 1")
    single = np.asarray(zeta).ndim == 1
    zeta = check_points(zeta, grid.dim, name="zeta")
    rad = _cone_radii(grid, alpha, radial)
    if len(rad) == 0:
        raise ValidationError("resolution too coarse for alpha")
    r = rad.radii
    n = grid.dim
    dens = rad.weights * (1.0 - r) ** (-rad.jacobi) * (1.0 - r * r) ** ((k - s) * q - n - 1) * r ** (2 * n - 1)
    vals = np.abs(f.radial_values(grid.nodes, r, k)) ** q * dens * grid.weights[:, None]
    cum = np.concatenate([np.zeros((grid.size, 1)), np.cumsum(vals, axis=1)], axis=1)
    out = _cone_reduce(zeta, grid, alpha, {"radii": r, "cum": cum}, np.sum) ** (1.0 / q)
    return float(out[0]) if single else out


def admissible_max(f, zeta, alpha, grid, radial=None):
    """Supremum of ``|f|`` over the same discretised approach region as :func:`area_fn`."""
    alpha = check_aperture(alpha)
    single = np.asarray(zeta).ndim == 1
    zeta = check_points(zeta, grid.dim, name="zeta")
    rad = _cone_radii(grid, alpha, radial)
    r = np.r_[0.0, rad.radii]
    vals = np.abs(f.radial_values(grid.nodes, r))
    cum = np.concatenate([np.zeros((grid.size, 1)), np.maximum.accumulate(vals, axis=1)], axis=1)
    # radius 0 is always inside the cone, so index at least 1
    table = {"radii": r, "cum": cum}
    out = np.empty(zeta.shape[0])
    for blk in row_blocks(zeta.shape[0], grid.size):
        rstar = _cone_bounds(pairing(zeta[blk], grid.nodes), alpha)
        idx = np.maximum(np.searchsorted(table["radii"], rstar, side="left"), 1)
        out[blk] = cum[np.arange(grid.size)[None, :], idx].max(axis=1)
    return float(out[0]) if single else out


def tl_norm(f, p, q, s, w, grid, variant="radial", alpha=2.0, k=None, radial=None):
    """L^p(w) norm of the radial (Littlewood-Paley) or area pointwise function.

    ``k`` defaults to the integer part of ``s`` plus one.
    """
    p = check_exponent(p)
    if k is None:
        k = int(math.floor(s)) + 1
    if variant == "radial":
        pointwise = littlewood_paley(f, grid.nodes, k, q, s, radial)
    elif variant == "area":
        pointwise = area_fn(f, grid.nodes, alpha, k, q, s, grid, radial)
    else:
        raise ValidationError(f"variant must be 'radial' or 'area', got {variant!r}")
    return float(np.dot(grid.weights * w.values, pointwise**p) ** (1.0 / p))
