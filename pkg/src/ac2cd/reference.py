"""Small-instance ground truth: exact QP by active-set enumeration and friends."""

from __future__ import annotations

import itertools
import math

import numpy as np
import scipy.linalg

from .exceptions import ContractError, OracleError
from .problem import BoxSimplexProblem, kkt_certificate, make_certificate

MAX_ENUMERATION_N = 14


def _quadratic_parts(p: BoxSimplexProblem):
    oracle = p.oracle
    if not getattr(oracle, "is_quadratic", False):
        raise ContractError("enumeration requires a quadratic objective")
    H = np.asarray(oracle.hessian(), dtype=float)
    q = oracle.gradient(np.zeros(p.n))
    return H, q


def _patterns(p: BoxSimplexProblem):
    """Fixed-coordinate patterns ordered by the number of fixed coordinates."""
    n = p.n
    for m in range(n + 1):
        for fixed in itertools.combinations(range(n), m):
            opts = []
            for i in fixed:
                o = []
                if np.isfinite(p.l[i]):
                    o.append(p.l[i])
                if np.isfinite(p.u[i]):
                    o.append(p.u[i])
                if not o:
                    break
                opts.append(o)
            else:
                for vals in itertools.product(*opts):
                    yield fixed, vals


def solve_qp_enumerate(p: BoxSimplexProblem, tol: float = 1e-9):
    """Exact minimizer of a strongly convex quadratic over the feasible set.

    Patterns are tried in order of increasing number of coordinates fixed
    at a bound; the first one whose solution passes the primal and KKT
    sign checks is returned as a SolutionCertificate.
    """
    if p.n > MAX_ENUMERATION_N:
        raise ContractError(f"enumeration is limited to n <= {MAX_ENUMERATION_N}")
    H, q = _quadratic_parts(p)
    try:
        np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        raise ContractError("H must be symmetric positive definite") from None
    n = p.n
    scale = max(1.0, abs(p.b), float(np.abs(q).max(initial=0.0)))
    finite_l = np.where(np.isfinite(p.l), p.l, 0.0)
    finite_u = np.where(np.isfinite(p.u), p.u, 0.0)
    for fixed, vals in _patterns(p):
        free = [i for i in range(n) if i not in fixed]
        x = np.zeros(n)
        x[list(fixed)] = vals
        rest = p.b - sum(vals)
        if free:
            lo = p.l[free].sum()
            hi = p.u[free].sum()
            if rest < lo - tol * scale or rest > hi + tol * scale:
                continue
            S = np.array(free)
            F = np.array(fixed, dtype=int)
            k = len(free)
            K = np.zeros((k + 1, k + 1))
            K[:k, :k] = H[np.ix_(S, S)]
            # symmetric saddle form; the last unknown is -lambda
            K[:k, k] = 1.0
            K[k, :k] = 1.0
            rhs = np.empty(k + 1)
            rhs[:k] = -q[S] - (H[np.ix_(S, F)] @ x[F] if F.size else 0.0)
            rhs[k] = rest
            try:
                sol = scipy.linalg.solve(K, rhs, assume_a="sym")
            except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
                continue
            x[S] = sol[:k]
            lam = -float(sol[k])
            xs = x[S]
            if np.any(xs < p.l[S] - tol * np.maximum(1.0, np.abs(finite_l[S]))):
                continue
            if np.any(xs > p.u[S] + tol * np.maximum(1.0, np.abs(finite_u[S]))):
                continue
        else:
            if abs(rest) > tol * scale:
                continue
            lam = None
        grad = H @ x + q
        if lam is None:
            lower = [i for i, v in zip(fixed, vals) if v == p.l[i]]
            upper = [i for i, v in zip(fixed, vals) if v != p.l[i]]
            lo = max((grad[i] for i in upper), default=-math.inf)
            hi = min((grad[i] for i in lower), default=math.inf)
            if lo > hi + tol * scale:
                continue
            lam = lo if math.isfinite(lo) else hi if math.isfinite(hi) else 0.0
        ok = True
        for i, v in zip(fixed, vals):
            if v == p.l[i] and grad[i] < lam - tol * scale:
                ok = False
                break
            if v == p.u[i] and v != p.l[i] and grad[i] > lam + tol * scale:
                ok = False
                break
        if not ok:
            continue
        cond = None
        if free:
            cond = float(np.linalg.cond(K))
        cert = make_certificate(p, x, lam, tol=tol, condition=cond)
        res = kkt_certificate(p, cert.x_star, tol).residual
        if res > 1e3 * tol * scale:
            continue
        return cert
    raise OracleError("no active pattern verified the KKT conditions (numerical degeneracy?)")


def simplex_projection(c) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum(x) = 1} by sort and threshold."""
    c = np.asarray(c, dtype=float)
    s = np.sort(c)[::-1]
    css = np.cumsum(s)
    idx = np.arange(1, c.size + 1)
    rho = np.flatnonzero(s - (css - 1.0) / idx > 0)[-1]
    theta = (css[rho] - 1.0) / (rho + 1)
    return np.maximum(c - theta, 0.0)


def project_onto_feasible(p: BoxSimplexProblem, y) -> np.ndarray:
    """Euclidean projection of y onto {sum(x) = b, l <= x <= u}.

    The projection is clip(y - lam, l, u) for the multiplier lam solving
    sum(...) = b. The sum is piecewise linear and nonincreasing in lam;
    bisection over the sorted breakpoints isolates the linear piece, which
    is then solved exactly.
    """
    y = np.asarray(y, dtype=float)
    l, u, b = p.l, p.u, p.b

    def total(lam):
        return float(np.clip(y - lam, l, u).sum())

    bps = np.concatenate([(y - l)[np.isfinite(l)], (y - u)[np.isfinite(u)]])
    bps = np.unique(bps)
    # extend with points outside every breakpoint so the bracket always exists
    width = 1.0 + abs(b) + float(np.abs(y).max()) + (float(np.abs(bps).max()) if bps.size else 0.0)
    lo_ext, hi_ext = -width, width
    while total(lo_ext) < b:
        lo_ext *= 2.0
        if lo_ext < -1e300:
            raise ContractError("feasible set is empty")
    while total(hi_ext) > b:
        hi_ext *= 2.0
        if hi_ext > 1e300:
            raise ContractError("feasible set is empty")
    grid = np.concatenate([[lo_ext], bps[(bps > lo_ext) & (bps < hi_ext)], [hi_ext]])
    a, z = 0, grid.size - 1
    # invariant: total(grid[a]) >= b >= total(grid[z])
    while z - a > 1:
        mid = (a + z) // 2
        if total(grid[mid]) >= b:
            a = mid
        else:
            z = mid
    t0, t1 = grid[a], grid[z]
    s0, s1 = total(t0), total(t1)
    lam = t0 if s0 == s1 else t0 + (s0 - b) * (t1 - t0) / (s0 - s1)
    x = np.clip(y - lam, l, u)
    # remove the rounding residue of the sum on one free coordinate
    free = np.flatnonzero((x > l) & (x < u))
    if free.size:
        i = free[np.argmax(np.minimum(x[free] - l[free], u[free] - x[free]))]
        x[i] += b - x.sum()
        x[i] = min(max(x[i], l[i]), u[i])
    return x


def projected_gradient_reference(p: BoxSimplexProblem, x0, tol: float = 1e-10,
                                 max_iter: int = 200_000, step: float = None) -> np.ndarray:
    """Projected gradient with a fixed 1/L step (L from the Hessian if known).

    Non-quadratic oracles fall back to Armijo backtracking along the
    projection arc.
    """
    x = project_onto_feasible(p, x0)
    if step is None and getattr(p.oracle, "is_quadratic", False):
        L = float(np.abs(np.linalg.eigvalsh(p.oracle.hessian())).max())
        step = 1.0 / L
    t = step if step is not None else 1.0
    for _ in range(max_iter):
        g = p.grad(x)
        if kkt_certificate(p, x, 1e-12, grad=g).residual <= tol:
            return x
        if step is not None:
            x = project_onto_feasible(p, x - t * g)
            continue
        fx = p.f(x)
        while True:
            xn = project_onto_feasible(p, x - t * g)
            s = xn - x
            fn = p.f(xn)
            if abs(fn - fx) > 64 * np.finfo(float).eps * max(abs(fx), abs(fn)):
                ok = fn <= fx + g @ s + s @ s / (2 * t)
            else:
                # f differences are rounding noise here; test the local gradient Lipschitz estimate
                ok = t * np.linalg.norm(p.grad(xn) - g) <= np.linalg.norm(s)
            if ok or t < 1e-16:
                break
            t *= 0.5
        x = xn
        t *= 2.0
    raise OracleError(f"projected gradient did not reach tol={tol} in {max_iter} iterations")
