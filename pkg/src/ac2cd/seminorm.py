"""Inner product and seminorm that ignore one coordinate."""

from __future__ import annotations

import math

import numpy as np

from .exceptions import ContractError


def _check(x, y, j):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ContractError("vectors must be 1-d and of equal length")
    if not 0 <= j < x.shape[0]:
        raise ContractError(f"index {j} out of range")
    return x, y


def inner_j(x, y, j: int) -> float:
    """sum_{i != j} x_i y_i."""
    x, y = _check(x, y, j)
    return float(x @ y - x[j] * y[j])


def seminorm_j(x, j: int) -> float:
    x, _ = _check(x, x, j)
    # hypot scales internally, so tiny or huge entries neither underflow nor overflow
    return math.hypot(*np.delete(x, j).tolist())


def reduced_product_identity(v, xp, xpp, j: int, tol: float = 1e-9):
    """Both sides of v'(x' - x'') = <v - v_j e, x' - x''>_j.

    Requires x' and x'' on the same hyperplane sum(x) = b (checked to
    ``tol`` relative).
    """
    v, xp = _check(v, xp, j)
    _, xpp = _check(v, xpp, j)
    sp, spp = xp.sum(), xpp.sum()
    if abs(sp - spp) > tol * max(1.0, abs(sp), abs(spp)):
        raise ContractError("x' and x'' lie on different hyperplanes sum(x) = b")
    diff = xp - xpp
    lhs = float(v @ diff)
    rhs = inner_j(v - v[j], diff, j)
    return lhs, rhs
