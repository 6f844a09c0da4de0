"""Truncation at level k, its remainder, bounded data approximants and the
degenerate diffusion coefficient ``a / (b + |T_k(v)|)**2``."""
from __future__ import annotations

import math

import numpy as np

from .grid import ScalarField, same_grid

#: The "no truncation" level.  Any float works as a level; ``math.inf``
#: is the distinguished one, so the untruncated coefficient is exact.
INFINITE = math.inf


def check_level(k: float) -> float:
    k = float(k)
    if not k >= 0:
        raise ValueError("truncation level must be nonnegative, got %r" % k)
    return k


def truncate(s, k: float = INFINITE):
    """Clamp ``s`` to ``[-k, k]``; works on scalars and arrays."""
    k = check_level(k)
    if k == INFINITE:
        return s
    if np.ndim(s) == 0:
        s = float(s)
        return s if abs(s) <= k else math.copysign(k, s)
    return np.clip(s, -k, k)


def truncation_remainder(s, k: float = INFINITE):
    """``s - truncate(s, k)``: the excess of ``s`` beyond the band."""
    return s - truncate(s, k)


def truncate_field(v: ScalarField, k: float) -> ScalarField:
    return v.with_values(truncate(v.values, k))


def remainder_field(v: ScalarField, k: float) -> ScalarField:
    return v.with_values(truncation_remainder(v.values, k))


def approximate_datum(f: ScalarField, n: int) -> ScalarField:
    """Bounded approximant ``f / (1 + |f|/n)``; ``|f_n| <= min(n, |f|)``."""
    if int(n) != n or n < 1:
        raise ValueError("approximation index must be a positive integer")
    vals = f.values
    return f.with_values(vals / (1.0 + np.abs(vals) / n))


class DegeneracyOffsetError(ValueError):
    """Offset field is not strictly positive."""


def degenerate_coefficient(
    a: ScalarField, b: ScalarField, v: ScalarField, level: float = INFINITE
) -> ScalarField:
    """Nodal coefficient ``a / (b + |T_level(v)|)**2``."""
    same_grid(a, b, v)
    if np.any(b.values <= 0):
        raise DegeneracyOffsetError("degeneracy offset must be positive everywhere")
    denom = b.values + np.abs(truncate(v.values, level))
    return a.with_values(a.values / (denom * denom))
