"""Problem instances, objective oracles, feasibility and KKT certificates.

Indices are 0-based throughout the package. Infinite bounds are stored as
``numpy.inf`` / ``-numpy.inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import ContractError, UndefinedQuantityError

AT_LOWER = "at_lower"
AT_UPPER = "at_upper"
INTERIOR = "interior"


class QuadraticObjective:
    """f(x) = 0.5 x'Hx + c'x + constant, with a dense symmetric H."""

    kind = "quadratic"
    is_quadratic = True

    def __init__(self, H, c, constant: float = 0.0):
        H = np.asarray(H, dtype=float)
        c = np.asarray(c, dtype=float)
        if H.ndim != 2 or H.shape[0] != H.shape[1] or H.shape[0] != c.shape[0]:
            raise ContractError("H must be square and match c")
        if not np.allclose(H, H.T, rtol=0, atol=1e-12 * max(1.0, np.abs(H).max())):
            raise ContractError("H must be symmetric")
        self.H = 0.5 * (H + H.T)
        self.c = c
        self.constant = float(constant)
        self._diag = np.diag(self.H).copy()

    @property
    def n(self) -> int:
        return self.c.shape[0]

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ (self.H @ x) + self.c @ x + self.constant)

    def partial(self, x, i: int) -> float:
        return float(self.H[i] @ x + self.c[i])

    def gradient(self, x) -> np.ndarray:
        return self.H @ np.asarray(x, dtype=float) + self.c

    def pair_curvature(self, x, i: int, j: int) -> float:
        return float(self._diag[i] + self._diag[j] - 2.0 * self.H[i, j])

    def hessian(self) -> np.ndarray:
        return self.H

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "H": self.H.tolist(),
            "c": self.c.tolist(),
            "constant": self.constant,
        }


class FactoredQuadraticObjective:
    """f(x) = x'Q'Qx - q'x with Q of shape (m, n).

    Partial derivatives cost O(m): the product Qx is cached and updated
    only in the coordinates that changed since the previous call. The
    counters ``partial_calls``, ``gradient_calls`` and ``flops`` make the
    cost asymmetry observable.
    """

    kind = "factored"
    is_quadratic = True

    def __init__(self, Q, q):
        self.Q = np.asarray(Q, dtype=float)
        self.q = np.asarray(q, dtype=float)
        if self.Q.ndim != 2 or self.Q.shape[1] != self.q.shape[0]:
            raise ContractError("Q must have shape (m, n) with n == len(q)")
        self._x = None
        self._Qx = None
        self.partial_calls = 0
        self.gradient_calls = 0
        self.flops = 0

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @property
    def m(self) -> int:
        return self.Q.shape[0]

    def reset_counters(self) -> None:
        self.partial_calls = self.gradient_calls = self.flops = 0

    def _sync(self, x: np.ndarray) -> np.ndarray:
        if self._x is None or self._x.shape != x.shape:
            self._x = x.copy()
            self._Qx = self.Q @ x
            self.flops += self.Q.size
            return self._Qx
        changed = np.flatnonzero(self._x != x)
        if changed.size:
            if changed.size > self.n // 2:
                self._Qx = self.Q @ x
                self.flops += self.Q.size
            else:
                self._Qx = self._Qx + self.Q[:, changed] @ (x[changed] - self._x[changed])
                self.flops += self.m * changed.size
            self._x[changed] = x[changed]
        return self._Qx

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        r = self._sync(x)
        return float(r @ r - self.q @ x)

    def partial(self, x, i: int) -> float:
        x = np.asarray(x, dtype=float)
        r = self._sync(x)
        self.partial_calls += 1
        self.flops += self.m
        return float(2.0 * (self.Q[:, i] @ r) - self.q[i])

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        self.gradient_calls += 1
        self.flops += 2 * self.Q.size
        return 2.0 * (self.Q.T @ (self.Q @ x)) - self.q

    def pair_curvature(self, x, i: int, j: int) -> float:
        diff = self.Q[:, i] - self.Q[:, j]
        return float(2.0 * (diff @ diff))

    def hessian(self) -> np.ndarray:
        return 2.0 * (self.Q.T @ self.Q)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "Q": self.Q.tolist(), "q": self.q.tolist()}


class CallableObjective:
    """Wrap plain callables ``value(x)`` and ``partial(x, i)`` as an oracle."""

    kind = "callable"

    def __init__(self, value, partial, gradient=None, pair_curvature=None):
        self._value = value
        self._partial = partial
        self._gradient = gradient
        if pair_curvature is not None:
            self.pair_curvature = pair_curvature

    def value(self, x) -> float:
        return float(self._value(np.asarray(x, dtype=float)))

    def partial(self, x, i: int) -> float:
        return float(self._partial(np.asarray(x, dtype=float), i))

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self._gradient is not None:
            return np.asarray(self._gradient(x), dtype=float)
        return np.array([self._partial(x, i) for i in range(x.shape[0])])


def full_gradient(oracle, x) -> np.ndarray:
    if hasattr(oracle, "gradient"):
        return np.asarray(oracle.gradient(x), dtype=float)
    return np.array([oracle.partial(x, i) for i in range(len(x))])


@dataclass
class BoxSimplexProblem:
    """min f(x) subject to sum(x) == b and l <= x <= u."""

    b: float
    l: np.ndarray
    u: np.ndarray
    oracle: object
    name: str = ""

    def __post_init__(self):
        self.l = np.asarray(self.l, dtype=float).copy()
        self.u = np.asarray(self.u, dtype=float).copy()
        self.b = float(self.b)
        if self.l.shape != self.u.shape or self.l.ndim != 1:
            raise ContractError("l and u must be vectors of equal length")
        if self.n < 2:
            raise ContractError("problem dimension must be at least 2")
        if np.any(np.isnan(self.l)) or np.any(np.isnan(self.u)):
            raise ContractError("bounds must not be NaN")
        if np.any(self.l == np.inf) or np.any(self.u == -np.inf):
            raise ContractError("l must be < +inf and u must be > -inf")
        if not np.all(self.l < self.u):
            raise ContractError("bounds must satisfy l_i < u_i")
        on = getattr(self.oracle, "n", None)
        if on is not None and on != self.n:
            raise ContractError(f"oracle dimension {on} != problem dimension {self.n}")

    @property
    def n(self) -> int:
        return self.l.shape[0]

    def f(self, x) -> float:
        return self.oracle.value(x)

    def grad(self, x) -> np.ndarray:
        return full_gradient(self.oracle, x)

    def _check_len(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ContractError(f"expected a vector of length {self.n}, got shape {x.shape}")
        return x


@dataclass
class KKTCertificate:
    lambda_hat: float
    residual: float
    classification: list

    def to_dict(self) -> dict:
        return {
            "lambda_hat": self.lambda_hat,
            "residual": self.residual,
            "classification": list(self.classification),
        }


@dataclass
class SolutionCertificate:
    x_star: np.ndarray
    lambda_star: float
    f_star: float
    active: frozenset
    strict_active: frozenset
    zeta: Optional[float]
    dmax_star: float
    dmin_star: Optional[float]
    condition: Optional[float] = None
    extra: dict = field(default_factory=dict)

    @property
    def degenerate(self) -> bool:
        return self.strict_active != self.active

    def to_dict(self) -> dict:
        return {
            "x_star": np.asarray(self.x_star).tolist(),
            "lambda_star": self.lambda_star,
            "f_star": self.f_star,
            "active": sorted(self.active),
            "strict_active": sorted(self.strict_active),
            "zeta": self.zeta,
            "dmax_star": _enc(self.dmax_star),
            "dmin_star": None if self.dmin_star is None else _enc(self.dmin_star),
            "condition": self.condition,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SolutionCertificate":
        return cls(
            x_star=np.asarray(d["x_star"], dtype=float),
            lambda_star=float(d["lambda_star"]),
            f_star=float(d["f_star"]),
            active=frozenset(int(i) for i in d["active"]),
            strict_active=frozenset(int(i) for i in d["strict_active"]),
            zeta=None if d.get("zeta") is None else float(d["zeta"]),
            dmax_star=_dec(d["dmax_star"]),
            dmin_star=None if d.get("dmin_star") is None else _dec(d["dmin_star"]),
            condition=d.get("condition"),
        )


def _enc(v: float):
    if v == math.inf:
        return "inf"
    if v == -math.inf:
        return "-inf"
    return float(v)


def _dec(v) -> float:
    if isinstance(v, str):
        return float(v)
    return float(v)


def _bound_scale(bound: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        return np.where(np.isfinite(bound), np.maximum(1.0, np.abs(bound)), 1.0)


def at_lower_mask(p: BoxSimplexProblem, x, tol: float) -> np.ndarray:
    return np.isfinite(p.l) & (x - p.l <= tol * _bound_scale(p.l))


def at_upper_mask(p: BoxSimplexProblem, x, tol: float) -> np.ndarray:
    return np.isfinite(p.u) & (p.u - x <= tol * _bound_scale(p.u))


def is_feasible(p: BoxSimplexProblem, x, tol: float = 1e-9) -> bool:
    x = p._check_len(x)
    if tol < 0:
        raise ContractError("tol must be nonnegative")
    if abs(x.sum() - p.b) > tol * max(1.0, abs(p.b)):
        return False
    return bool(np.all(x >= p.l - tol) and np.all(x <= p.u + tol))


def distance_to_bound(p: BoxSimplexProblem, x, h: int) -> float:
    """Distance of x_h from its nearest bound (inf only if both bounds are infinite)."""
    if not 0 <= h < p.n:
        raise ContractError(f"index {h} out of range")
    return float(min(x[h] - p.l[h], p.u[h] - x[h]))


def distances(p: BoxSimplexProblem, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.minimum(x - p.l, p.u - x)


def max_distance(p: BoxSimplexProblem, x) -> float:
    return float(distances(p, x).max())


def _violations(grad, lam, lower, upper) -> np.ndarray:
    viol = np.abs(grad - lam)
    viol = np.where(lower, np.maximum(0.0, lam - grad), viol)
    viol = np.where(upper, np.maximum(0.0, grad - lam), viol)
    return viol


def kkt_certificate(p: BoxSimplexProblem, x, tol: float = 1e-8, grad=None) -> KKTCertificate:
    """Estimate the equality multiplier at x and the stationarity violation.

    Candidates for the multiplier are the partial derivatives of interior
    coordinates, falling back to all partial derivatives when none is
    interior. The candidate with the smallest max-violation wins (ties go
    to the earliest index).
    """
    x = p._check_len(x)
    g = p.grad(x) if grad is None else np.asarray(grad, dtype=float)
    lower = at_lower_mask(p, x, tol)
    upper = at_upper_mask(p, x, tol) & ~lower
    interior = ~(lower | upper)
    cand = g[interior] if interior.any() else g
    best_lam, best_res = float(cand[0]), math.inf
    for lam in cand:
        res = float(_violations(g, lam, lower, upper).max())
        if res < best_res:
            best_lam, best_res = float(lam), res
    classification = [
        AT_LOWER if lower[i] else AT_UPPER if upper[i] else INTERIOR for i in range(p.n)
    ]
    return KKTCertificate(lambda_hat=best_lam, residual=best_res, classification=classification)


def active_sets(p: BoxSimplexProblem, x, lam: float, tol: float = 1e-8, grad=None):
    """Return (A, A_plus): bound indices and those with strict complementarity."""
    x = p._check_len(x)
    g = p.grad(x) if grad is None else np.asarray(grad, dtype=float)
    bound = at_lower_mask(p, x, tol) | at_upper_mask(p, x, tol)
    A = frozenset(int(i) for i in np.flatnonzero(bound))
    A_plus = frozenset(i for i in A if abs(g[i] - lam) > tol)
    return A, A_plus


def zeta(p: BoxSimplexProblem, cert: SolutionCertificate) -> float:
    if not cert.strict_active:
        raise UndefinedQuantityError("zeta undefined: no strictly active coordinate")
    g = p.grad(cert.x_star)
    return float(min(abs(g[i] - cert.lambda_star) for i in cert.strict_active))


def dmax_dmin_star(p: BoxSimplexProblem, cert: SolutionCertificate):
    D = distances(p, cert.x_star)
    dmax = float(D.max())
    free = [i for i in range(p.n) if i not in cert.active]
    if not free:
        raise UndefinedQuantityError("D*min undefined: every coordinate is active")
    return dmax, float(min(D[i] for i in free))


def snap_to_bounds(p: BoxSimplexProblem, x, tol: float) -> np.ndarray:
    """Set coordinates within tol (scaled) of a bound exactly onto it."""
    x = np.array(x, dtype=float)
    lo = at_lower_mask(p, x, tol)
    hi = at_upper_mask(p, x, tol) & ~lo
    x[lo] = p.l[lo]
    x[hi] = p.u[hi]
    return x


def make_certificate(p: BoxSimplexProblem, x_star, lam: Optional[float] = None,
                     tol: float = 1e-9, condition: Optional[float] = None) -> SolutionCertificate:
    """Assemble a SolutionCertificate from a (near-)stationary point."""
    x = snap_to_bounds(p, x_star, tol)
    g = p.grad(x)
    if lam is None:
        lam = kkt_certificate(p, x, tol, grad=g).lambda_hat
    A, A_plus = active_sets(p, x, lam, tol, grad=g)
    z = float(min(abs(g[i] - lam) for i in A_plus)) if A_plus else None
    D = distances(p, x)
    free = [i for i in range(p.n) if i not in A]
    dmin = float(min(D[i] for i in free)) if free else None
    return SolutionCertificate(
        x_star=x,
        lambda_star=float(lam),
        f_star=p.f(x),
        active=A,
        strict_active=A_plus,
        zeta=z,
        dmax_star=float(D.max()),
        dmin_star=dmin,
        condition=condition,
    )


def bound_vertices(p: BoxSimplexProblem, max_n: int = 16):
    """Yield feasible points whose coordinates all sit at a finite bound."""
    from itertools import product

    if p.n > max_n:
        raise ContractError(f"vertex enumeration limited to n <= {max_n}")
    choices = []
    for i in range(p.n):
        opts = [v for v in (p.l[i], p.u[i]) if np.isfinite(v)]
        if not opts:
            return
        choices.append(opts)
    for combo in product(*choices):
        v = np.array(combo, dtype=float)
        if abs(v.sum() - p.b) <= 1e-12 * max(1.0, abs(p.b)):
            yield v


def assumption1_violations(p: BoxSimplexProblem, x0, max_n: int = 16, samples: int = 2000,
                           seed: int = 0) -> list:
    """Points of the level set {f <= f(x0)} with every coordinate at a bound.

    For n <= max_n the all-at-bounds feasible points are enumerated
    exactly; otherwise random bound patterns are sampled. An empty list
    means no violation was found.
    """
    f0 = p.f(x0)
    if p.n <= max_n:
        return [v for v in bound_vertices(p, max_n) if p.f(v) <= f0]
    rng = np.random.default_rng(seed)
    bad = []
    for _ in range(samples):
        pick = rng.integers(0, 2, size=p.n)
        v = np.where(pick == 0, p.l, p.u)
        if not np.all(np.isfinite(v)):
            continue
        if abs(v.sum() - p.b) <= 1e-12 * max(1.0, abs(p.b)) and p.f(v) <= f0:
            bad.append(v)
    return bad
