"""Deterministic test-problem generators with known certificates."""

from __future__ import annotations

import numpy as np

from .exceptions import ContractError
from .problem import (
    BoxSimplexProblem,
    FactoredQuadraticObjective,
    QuadraticObjective,
    assumption1_violations,
    make_certificate,
)
from .reference import project_onto_feasible, simplex_projection

LOWER, UPPER, FREE = "lower", "upper", "free"

# bound kinds: both finite, lower only, upper only
_BOUND_KINDS = ("box", "lower", "upper")


def e1():
    """The canonical 3-variable simplex instance with c = (0.5, 0.7, -0.2)."""
    return gen_simplex_projection(3, [0.5, 0.7, -0.2], name="E1")


def gen_simplex_projection(n: int, c, name: str = ""):
    """f(x) = 0.5 ||x - c||^2 on the unit simplex (upper bounds infinite)."""
    c = np.asarray(c, dtype=float)
    if c.shape != (n,):
        raise ContractError("c must have length n")
    oracle = QuadraticObjective(np.eye(n), -c, 0.5 * float(c @ c))
    p = BoxSimplexProblem(1.0, np.zeros(n), np.full(n, np.inf), oracle, name=name or f"simplex{n}")
    x = simplex_projection(c)
    cert = make_certificate(p, x, tol=1e-12)
    return p, cert


def random_spd(n: int, mu: float, Lcap: float, rng) -> np.ndarray:
    """Random symmetric matrix with eigenvalues in [mu, Lcap], both attained."""
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    eig = np.sort(rng.uniform(mu, Lcap, size=n))
    eig[0], eig[-1] = mu, Lcap
    H = (Q * eig) @ Q.T
    return 0.5 * (H + H.T)


def gen_quadratic_designed(n: int, seed: int, mu: float = 0.5, Lcap: float = 2.0,
                           active_pattern=None, margins=None, bound_kinds=None):
    """Strongly convex quadratic with a prescribed minimizer and multiplier.

    ``active_pattern[i]`` is "lower", "upper" or "free"; ``margins[i]`` is the
    gap |grad_i f(x*) - lambda*| on active coordinates (0 gives a degenerate
    coordinate). At least one coordinate must be free.
    """
    if not 0 < mu <= Lcap:
        raise ContractError("need 0 < mu <= Lcap")
    rng = np.random.default_rng(seed)
    if active_pattern is None:
        k = int(rng.integers(1, max(2, n // 2) + 1))
        active_pattern = [FREE] * n
        for i in rng.choice(n, size=min(k, n - 1), replace=False):
            active_pattern[i] = LOWER if rng.random() < 0.5 else UPPER
    active_pattern = list(active_pattern)
    if len(active_pattern) != n or all(a != FREE for a in active_pattern):
        raise ContractError("active_pattern must have length n and leave a coordinate free")
    if margins is None:
        margins = rng.uniform(0.2, 1.0, size=n)
    margins = np.asarray(margins, dtype=float)
    if bound_kinds is None:
        bound_kinds = [_BOUND_KINDS[int(rng.integers(3))] for _ in range(n)]
    l = np.empty(n)
    u = np.empty(n)
    x = np.empty(n)
    for i, (a, kind) in enumerate(zip(active_pattern, bound_kinds)):
        if a == LOWER and kind == "upper":
            kind = "box"
        if a == UPPER and kind == "lower":
            kind = "box"
        lo = float(np.round(rng.uniform(-1.0, 0.0), 3))
        width = float(np.round(rng.uniform(0.5, 2.0), 3))
        l[i] = lo if kind in ("box", "lower") else -np.inf
        u[i] = lo + width if kind in ("box", "upper") else np.inf
        anchor = lo if kind != "upper" else lo + width
        if a == LOWER:
            x[i] = l[i]
        elif a == UPPER:
            x[i] = u[i]
        elif kind == "box":
            x[i] = lo + width * rng.uniform(0.2, 0.8)
        elif kind == "lower":
            x[i] = anchor + width * rng.uniform(0.2, 0.8)
        else:
            x[i] = anchor - width * rng.uniform(0.2, 0.8)
    H = random_spd(n, mu, Lcap, rng)
    lam = float(rng.uniform(-1.0, 1.0))
    g = np.full(n, lam)
    for i, a in enumerate(active_pattern):
        if a == LOWER:
            g[i] = lam + margins[i]
        elif a == UPPER:
            g[i] = lam - margins[i]
    c = g - H @ x
    oracle = QuadraticObjective(H, c)
    p = BoxSimplexProblem(float(x.sum()), l, u, oracle, name=f"designed-n{n}-s{seed}")
    cert = make_certificate(p, x, lam, tol=1e-12)
    cert.extra["mu"] = mu
    cert.extra["designed"] = {"pattern": active_pattern, "margins": margins.tolist()}
    return p, cert


def analytic_center(p: BoxSimplexProblem) -> np.ndarray:
    both = np.isfinite(p.l) & np.isfinite(p.u)
    return np.where(both, 0.5 * (p.l + p.u),
                    np.where(np.isfinite(p.l), p.l + 1.0,
                             np.where(np.isfinite(p.u), p.u - 1.0, 0.0)))


def default_x0(p: BoxSimplexProblem, x_star=None, max_halvings: int = 60) -> np.ndarray:
    """Projected analytic center, pulled toward x* until the level set is safe.

    When x* is supplied the point is averaged with x* until no feasible
    all-at-bounds point lies in {f <= f(x0)}, which makes the level set
    satisfy the interior-coordinate assumption (checked exactly for n <= 16).
    """
    x0 = project_onto_feasible(p, analytic_center(p))
    if x_star is None:
        return x0
    x_star = np.asarray(x_star, dtype=float)
    for _ in range(max_halvings):
        if not assumption1_violations(p, x0):
            return x0
        x0 = 0.5 * (x0 + x_star)
    raise ContractError("could not find a starting point with a safe level set")


def acceptance_instances(count: int = 50, seed: int = 0, n_range=(3, 10)):
    """Seeded non-degenerate strongly convex instances with mixed bounds."""
    rng = np.random.default_rng(seed)
    out = []
    for idx in range(count):
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        s = int(rng.integers(2**31))
        mu = float(np.round(rng.uniform(0.3, 1.0), 3))
        Lcap = float(np.round(mu + rng.uniform(0.5, 3.0), 3))
        p, cert = gen_quadratic_designed(n, s, mu=mu, Lcap=Lcap)
        p.name = f"acc{idx:02d}-n{n}"
        out.append((p, cert))
    return out


def gen_svm_like(m: int, n: int, seed: int, Cbox: float = 1.0):
    """Linear-kernel SVM dual with labels folded into the variables.

    f(x) = x'Q'Qx - q'x with Q = X'/sqrt(2) (X: n samples by m features),
    q = y, and after x_i = y_i alpha_i the box [0, C] becomes [0, C] for
    y_i = +1 and [-C, 0] for y_i = -1, with sum(x) = 0.
    """
    if m < 1 or n < 2:
        raise ContractError("need m >= 1 and n >= 2")
    rng = np.random.default_rng(seed)
    y = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    y[0], y[1] = 1.0, -1.0
    X = rng.normal(size=(n, m)) + 0.5 * y[:, None]
    Q = X.T / np.sqrt(2.0)
    oracle = FactoredQuadraticObjective(Q, y)
    l = np.where(y > 0, 0.0, -Cbox)
    u = np.where(y > 0, Cbox, 0.0)
    return BoxSimplexProblem(0.0, l, u, oracle, name=f"svm-m{m}-n{n}-s{seed}")
