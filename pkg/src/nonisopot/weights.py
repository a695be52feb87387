"""Weight fields on grids: averages, A_p constants, doubling orders and tail integrals."""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from ._validation import ValidationError, check_exponent, check_index_set, check_points, conjugate
from .geometry import ball_sums, latitude, representatives, sphere_ball_measure


@dataclass(frozen=True, eq=False)
class WeightField:
    """Positive density against sigma, sampled on the nodes of one grid.

    ``descriptor`` is ``{"kind": "constant", "c": c}``,
    ``{"kind": "power", "eps": eps}`` (``w = (1 - |zeta_1|^2)^eps`` on S^2)
    or ``{"kind": "custom"}``.
    """

    values: np.ndarray
    descriptor: dict = field(default_factory=lambda: {"kind": "custom"})

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=float)
        if values.ndim != 1 or np.any(~np.isfinite(values)) or np.any(values <= 0):
            raise ValidationError("weight values must be positive and finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "descriptor", dict(self.descriptor))

    @classmethod
    def constant(cls, grid, c=1.0):
        if not c > 0:
            raise ValidationError("constant weight must be positive")
        return cls(np.full(grid.size, float(c)), {"kind": "constant", "c": float(c)})

    @classmethod
    def power(cls, grid, eps):
        """The weight ``(1 - |zeta'|^2)^eps`` with ``zeta'`` the first n-1 coordinates."""
        if grid.dim != 2:
            raise ValidationError("power weights need n = 2 (zeta' is empty for n = 1)")
        return cls(power_values(grid.nodes, eps), {"kind": "power", "eps": float(eps)})

    @property
    def kind(self):
        return self.descriptor.get("kind", "custom")

    @property
    def torus_invariant(self):
        """True when the weight depends on ``|zeta_1|`` only."""
        return self.kind in ("constant", "power")

    def at(self, points):
        """Closed-form values at arbitrary sphere points (constant and power kinds only)."""
        points = np.asarray(points, dtype=complex)
        if self.kind == "constant":
            return np.full(points.reshape(points.shape[0], -1).shape[0], self.descriptor["c"])
        if self.kind == "power":
            return power_values(points.reshape(-1, 2), self.descriptor["eps"])
        raise ValidationError("custom weights have no closed form")

    def __pow__(self, exponent):
        return WeightField(self.values**exponent, _power_descriptor(self.descriptor, exponent))

    def scaled(self, c):
        desc = dict(self.descriptor)
        if self.kind == "constant":
            desc["c"] = desc["c"] * c
        elif self.kind != "custom":
            desc = {"kind": "custom"}
        return WeightField(self.values * c, desc)


def power_values(points, eps):
    points = np.asarray(points, dtype=complex)
    return (1.0 - np.abs(points[:, 0]) ** 2).clip(min=0.0) ** float(eps)


def _power_descriptor(desc, exponent):
    kind = desc.get("kind", "custom")
    if kind == "constant":
        return {"kind": "constant", "c": desc["c"] ** exponent}
    if kind == "power":
        return {"kind": "power", "eps": desc["eps"] * exponent}
    return {"kind": "custom"}


@dataclass(frozen=True, eq=False)
class BallFamily:
    """All pairs of the given centers and radii."""

    centers: np.ndarray
    radii: np.ndarray
    multiplicity: np.ndarray | None = None

    def __post_init__(self):
        centers = np.atleast_2d(np.asarray(self.centers, dtype=complex))
        radii = np.atleast_1d(np.asarray(self.radii, dtype=float))
        if centers.shape[0] == 0 or radii.size == 0:
            raise ValidationError("ball family must be nonempty")
        if np.any(radii <= 0) or np.any(radii > 2):
            raise ValidationError("radii must lie in (0, 2]")
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "radii", radii)

    def __len__(self):
        return self.centers.shape[0] * self.radii.size

    @classmethod
    def default(cls, grid, weight=None, radii=None):
        """Grid-node centers times dyadic radii ``2^-k``, k = 1..6.

        When the weight depends on ``|zeta_1|`` only, one center per symmetry
        orbit of the grid is enough; otherwise every node is a center.
        """
        if radii is None:
            radii = 2.0 ** -np.arange(1, 7)
        if weight is None or weight.torus_invariant:
            idx, mult = representatives(grid)
        else:
            idx, mult = np.arange(grid.size), np.ones(grid.size, dtype=int)
        return cls(grid.nodes[idx], radii, mult)


def weighted_mass(w, E, grid):
    """``W(E) = sum_{j in E} q_j w_j``."""
    E = check_index_set(E, grid.size)
    return float(np.dot(grid.weights[E], w.values[E]))


def ball_average(w, E, grid):
    E = check_index_set(E, grid.size)
    if E.size == 0:
        raise ValidationError("empty ball")
    return weighted_mass(w, E, grid) / float(grid.weights[E].sum())


def dual_weight(w, p):
    """The weight ``w^{-(p'-1)} = w^{-1/(p-1)}``."""
    p = check_exponent(p)
    return w ** (-(conjugate(p) - 1.0))


def ap_constant(w, p, grid, family=None):
    """Largest A_p product ``<w>_B <w^{-1/(p-1)}>_B^{p-1}`` over a ball family.

    Balls containing no node are skipped with a warning.
    """
    p = check_exponent(p)
    if family is None:
        family = BallFamily.default(grid, w)
    if np.all(w.values == w.values[0]):
        return 1.0
    dual = dual_weight(w, p).values
    sums = ball_sums(grid, family.centers, family.radii, np.column_stack([np.ones(grid.size), w.values, dual]))
    sigma, mass, dmass = sums[..., 0], sums[..., 1], sums[..., 2]
    ok = sigma > 0
    if not np.all(ok):
        warnings.warn(f"{int((~ok).sum())} balls contain no grid node and were skipped", RuntimeWarning, stacklevel=2)
    if not np.any(ok):
        raise ValidationError("every ball of the family is empty on this grid")
    prod = (mass[ok] / sigma[ok]) * (dmass[ok] / sigma[ok]) ** (p - 1.0)
    return float(max(1.0, prod.max()))


def torus_ball_mass(t0, r, eps=0.0, *, n_phase=512, panels=16, order=20):
    """``int_B w dsigma`` on S^2 for ``w = sin^{2 eps} t`` and a ball centered at latitude ``t0``.

    Both the measure and the weight are invariant under the two phase
    rotations, so the phase integrals are done in closed form (arc lengths)
    or by the periodic trapezoid rule, leaving a Gauss-Legendre integral in
    ``t`` over the latitudes that the ball can reach.
    """
    if r >= 2.0:
        r = 2.0 + 1e-12
    c0, s0 = math.cos(t0), math.sin(t0)
    reach = math.acos(max(1.0 - r, -1.0))
    lo, hi = max(0.0, t0 - reach), min(math.pi / 2.0, t0 + reach)
    if hi <= lo:
        return 0.0
    x, wx = leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    t = ((edges[:-1] + half)[:, None] + half[:, None] * x).ravel()
    wt = (half[:, None] * wx).ravel()
    beta = 2.0 * np.pi * np.arange(n_phase) / n_phase
    c, s = np.cos(t)[:, None], np.sin(t)[:, None]
    a = np.abs(1.0 - s0 * s * np.exp(1j * beta))
    rad = c0 * c
    with np.errstate(divide="ignore", invalid="ignore"):
        cosphi = (a * a + rad * rad - r * r) / (2.0 * a * rad)
    arc = np.where(a * rad > 0, 2.0 * np.arccos(np.clip(cosphi, -1.0, 1.0)), np.where(a < r, 2.0 * np.pi, 0.0))
    frac = arc.mean(axis=1) / (2.0 * np.pi)
    dens = 2.0 * np.sin(t) ** (2.0 * eps + 1.0) * np.cos(t)
    return float(np.sum(wt * frac * dens))


def exact_ball_mass(w, n, center, r):
    """Closed-form or semi-analytic ``W(B(center, r))`` for constant and power weights."""
    if w.kind == "constant":
        return w.descriptor["c"] * float(sphere_ball_measure(n, r))
    if w.kind == "power" and n == 2:
        return torus_ball_mass(float(latitude(center)[0]), r, w.descriptor["eps"])
    raise ValidationError("exact ball masses need a constant or power weight")


def _exact_available(w, n):
    return w.kind == "constant" or (w.kind == "power" and n == 2)


def doubling_slopes(w, grid, family=None, method="auto", min_nodes=16):
    """Least-squares exponents of ``log W(2^k B) - log W(B)`` against ``k log 2``, k = 0..3.

    ``method="exact"`` integrates ball masses semi-analytically (constant and
    power weights); ``"nodes"`` sums grid nodes and drops radii whose balls
    hold fewer than ``min_nodes`` nodes on average.  Returns an array of
    shape ``(centers, radii)``; degenerate fits are NaN.
    """
    if family is None:
        # 8r <= 1 keeps the largest ball clear of the antipodal saturation
        family = BallFamily.default(grid, w, radii=2.0 ** -np.arange(3, 7))
    if np.any(family.radii * 8.0 > 2.0 + 1e-12):
        raise ValidationError("doubling fits need 2^3 r <= 2 for every radius")
    if method == "auto":
        method = "exact" if _exact_available(w, grid.dim) else "nodes"
    ks = np.arange(4)
    radii = family.radii
    if method == "exact":
        if not _exact_available(w, grid.dim):
            raise ValidationError("exact ball masses need a constant or power weight")
        masses = np.array(
            [[[exact_ball_mass(w, grid.dim, c, r * 2.0**k) for k in ks] for r in radii] for c in family.centers]
        )
    elif method == "nodes":
        expected = sphere_ball_measure(grid.dim, radii) * grid.size
        keep = expected >= min_nodes
        if not np.any(keep):
            raise ValidationError("every radius is below the resolution floor of the grid")
        radii = radii[keep]
        all_r = (radii[:, None] * 2.0**ks).ravel()
        masses = ball_sums(grid, family.centers, all_r, w.values).reshape(-1, radii.size, ks.size)
    else:
        raise ValidationError(f"unknown method {method!r}")
    slopes = np.full(masses.shape[:2], np.nan)
    good = np.all(masses > 0, axis=-1)
    if not np.all(good):
        warnings.warn(f"{int((~good).sum())} degenerate doubling fits (empty balls)", RuntimeWarning, stacklevel=2)
    x = ks * math.log(2.0)
    xc = x - x.mean()
    logs = np.log(np.where(good[..., None], masses, 1.0))
    slopes[good] = (logs[good] @ xc) / float(xc @ xc)
    return slopes


def doubling_order(w, grid, family=None, method="auto", min_nodes=16):
    """Doubling order estimate: the largest fitted exponent over the family."""
    slopes = doubling_slopes(w, grid, family, method, min_nodes)
    if np.all(np.isnan(slopes)):
        raise ValidationError("no nondegenerate doubling fit")
    return float(np.nanmax(slopes))


def _average_profile(w, grid, zeta, radii, method):
    """Ball averages of ``w`` around ``zeta`` for each radius."""
    radii = np.asarray(radii, dtype=float)
    if w.kind == "constant":
        return np.full(radii.size, w.descriptor["c"])
    if method == "auto":
        method = "exact" if _exact_available(w, grid.dim) else "nodes"
    if method == "exact":
        t0 = float(latitude(zeta)[0])
        eps = w.descriptor["eps"]
        return np.array([torus_ball_mass(t0, r, eps) / torus_ball_mass(t0, r, 0.0) for r in radii])
    sums = ball_sums(grid, zeta, radii, np.column_stack([np.ones(grid.size), w.values]))[0]
    avg = np.full(radii.size, np.nan)
    ok = sums[:, 0] > 0
    avg[ok] = sums[ok, 1] / sums[ok, 0]
    if not np.all(ok):
        # below resolution the ball holds only the nearest node
        nearest = int(np.argmax(np.abs(grid.nodes @ np.conj(zeta))))
        avg[~ok] = w.values[nearest]
    return avg


def tail_bound_ratio(w, p, t, zeta, r, grid, side="upper", method="auto"):
    """Dyadic discretisation of the two tail integrals controlled by the doubling order.

    ``side="upper"``: ``int_r^2 x^{-t} <w>_{B(zeta,x)} dx/x`` divided by
    ``r^{-t} <w>_{B(zeta,r)}``.  ``side="lower"``:
    ``int_0^r x^t <w^{-(p'-1)}>_{B(zeta,x)}^{p-1} dx/x`` divided by
    ``r^t <w^{-(p'-1)}>_{B(zeta,r)}^{p-1}``.
    """
    p = check_exponent(p)
    if not 0 < r <= 0.5:
        raise ValidationError("r must lie in (0, 1/2]")
    zeta = check_points(zeta, grid.dim, name="zeta")[0]
    if side == "upper":
        cells = int(math.floor(math.log2(2.0 / r) + 1e-12))
        lo = r * 2.0 ** np.arange(cells)
        hi = np.minimum(2.0 * lo, 2.0)
        last = r * 2.0**cells
        if last < 2.0 * (1 - 1e-12):
            lo, hi = np.r_[lo, last], np.r_[hi, 2.0]
        mid = np.sqrt(lo * hi)
        avg = _average_profile(w, grid, zeta, np.r_[r, mid], method)
        num = np.sum(mid ** (-t) * avg[1:] * np.log(hi / lo))
        return float(num / (r ** (-t) * avg[0]))
    if side == "lower":
        if t <= 0:
            return math.inf
        dual = dual_weight(w, p)
        mid = r * 2.0 ** (-np.arange(64) - 0.5)
        mid = mid[mid ** t > 1e-15 * r**t]
        avg = _average_profile(dual, grid, zeta, np.r_[r, mid], method) ** (p - 1.0)
        num = np.sum(mid**t * avg[1:]) * math.log(2.0)
        return float(num / (r**t * avg[0]))
    raise ValidationError(f"side must be 'upper' or 'lower', got {side!r}")


def weight_from_descriptor(descriptor, grid):
    """Build a constant or power weight on ``grid`` from its descriptor."""
    kind = descriptor.get("kind")
    if kind == "constant":
        return WeightField.constant(grid, descriptor.get("c", 1.0))
    if kind == "power":
        return WeightField.power(grid, descriptor["eps"])
    raise ValidationError(f"cannot rebuild a weight of kind {kind!r} on a new grid")
