"""Small argument checkers shared by every module."""

import math
import numbers

import numpy as np


class ValidationError(ValueError):
    """Raised when an argument violates a documented precondition."""


def check_exponent(p, name="p"):
    """Return ``p`` as a float after checking ``1 < p < inf``."""
    if not isinstance(p, numbers.Real) or not math.isfinite(p) or p <= 1:
        raise ValidationError(f"{name} must be a finite real > 1, got {p!r}")
    return float(p)


def conjugate(p):
    return p / (p - 1.0)


def check_smoothness(s, n, name="s"):
    if not isinstance(s, numbers.Real) or not 0 < s < n:
        raise ValidationError(f"{name} must lie in (0, {n}), got {s!r}")
    return float(s)


def check_dim(n):
    if n not in (1, 2):
        raise ValidationError(f"dimension must be 1 or 2, got {n!r}")
    return int(n)


def check_aperture(alpha):
    if not isinstance(alpha, numbers.Real) or not alpha > 1:
        raise ValidationError(f"alpha must be > 1, got {alpha!r}")
    return float(alpha)


def check_positive(x, name):
    if not isinstance(x, numbers.Real) or not x > 0 or not math.isfinite(x):
        raise ValidationError(f"{name} must be a positive finite real, got {x!r}")
    return float(x)


def check_points(z, n, *, closed=True, name="points"):
    """Coerce to a complex ``(m, n)`` array and check it lies in the (closed) ball."""
    z = np.asarray(z, dtype=complex)
    if z.ndim == 1:
        z = z.reshape(1, -1) if z.shape[0] == n else z.reshape(-1, 1)
    if z.ndim != 2 or z.shape[1] != n:
        raise ValidationError(f"{name} must have shape (m, {n}), got {z.shape}")
    norms = np.sqrt(np.sum(np.abs(z) ** 2, axis=1))
    limit = 1.0 + 1e-12 if closed else 1.0
    if np.any(norms > limit) or (not closed and np.any(norms >= 1.0)):
        raise ValidationError(f"{name} must lie in the {'closed' if closed else 'open'} unit ball")
    return z


def check_index_set(E, size):
    E = np.unique(np.asarray(E, dtype=np.int64).ravel())
    if E.size and (E[0] < 0 or E[-1] >= size):
        raise ValidationError("index set out of range for the grid")
    return E
