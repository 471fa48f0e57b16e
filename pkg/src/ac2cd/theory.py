"""Lipschitz tables, rate constant, identification radii and complexity bounds.

Everything here is a direct evaluation of closed-form constants; the
checks that compare them against solver traces live in ``ac2cd.verify``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import ContractError, UndefinedQuantityError
from .linesearch import ArmijoParams
from .problem import BoxSimplexProblem, SolutionCertificate
from .seminorm import seminorm_j

ZERO_FLOOR = 1e-12


@dataclass
class LipschitzTable:
    L: float
    Lij: np.ndarray
    estimate: bool = False

    @property
    def n(self) -> int:
        return self.Lij.shape[0]

    @property
    def Lmax(self) -> float:
        return float(self.Lij.max())

    @property
    def Lj(self) -> np.ndarray:
        return self.Lij.sum(axis=0)

    @property
    def Lbar(self) -> float:
        return float(self.Lj.max())

    def scaled(self, factor: float) -> "LipschitzTable":
        return LipschitzTable(self.L * factor, self.Lij * factor, self.estimate)

    def to_dict(self) -> dict:
        return {
            "L": self.L,
            "Lij": self.Lij.tolist(),
            "Lmax": self.Lmax,
            "Lj": self.Lj.tolist(),
            "Lbar": self.Lbar,
            "estimate": self.estimate,
        }


def _floor_zeros(Lij: np.ndarray) -> np.ndarray:
    Lij = Lij.copy()
    off = ~np.eye(Lij.shape[0], dtype=bool)
    top = float(Lij[off].max()) if off.any() else 0.0
    eta = ZERO_FLOOR * top if top > 0 else ZERO_FLOOR
    Lij[off & (Lij <= 0)] = eta
    np.fill_diagonal(Lij, 0.0)
    return Lij


def lipschitz_table_quadratic(H) -> LipschitzTable:
    """Exact local constants |H_ii + H_jj - 2 H_ij| and L = max |eig(H)|."""
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ContractError("H must be square")
    if not np.allclose(H, H.T, rtol=0, atol=1e-12 * max(1.0, float(np.abs(H).max()))):
        raise ContractError("H must be symmetric")
    d = np.diag(H)
    Lij = np.abs(d[:, None] + d[None, :] - 2.0 * H)
    L = float(np.abs(np.linalg.eigvalsh(0.5 * (H + H.T))).max())
    return LipschitzTable(L=L, Lij=_floor_zeros(Lij))


def lipschitz_table_sampled(oracle, lower, upper, samples: int = 200, safety: float = 1.0,
                            seed: int = 0) -> LipschitzTable:
    """Estimate local constants from difference quotients of the pair derivative.

    For each pair (i, j), points x are drawn uniformly from the box
    [lower, upper] and the derivative of t -> f(x + t(e_i - e_j)) is compared
    at two random offsets. The largest quotient, times ``safety``, is the
    estimate. L is estimated the same way from full-gradient quotients.
    """
    if samples < 2:
        raise ContractError("need at least two samples")
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    n = lower.shape[0]
    rng = np.random.default_rng(seed)
    span = upper - lower
    Lij = np.zeros((n, n))
    L = 0.0
    for _ in range(samples):
        x = lower + rng.random(n) * span
        s, t = rng.uniform(-1.0, 1.0, size=2)
        if s == t:
            continue
        for i in range(n):
            for j in range(i + 1, n):
                e = np.zeros(n)
                e[i], e[j] = 1.0, -1.0
                xs, xt = x + s * e, x + t * e
                ds = oracle.partial(xs, i) - oracle.partial(xs, j)
                dt = oracle.partial(xt, i) - oracle.partial(xt, j)
                qv = abs(ds - dt) / abs(s - t)
                if qv > Lij[i, j]:
                    Lij[i, j] = Lij[j, i] = qv
        y = lower + rng.random(n) * span
        gx = np.array([oracle.partial(x, i) for i in range(n)])
        gy = np.array([oracle.partial(y, i) for i in range(n)])
        dist = np.linalg.norm(x - y)
        if dist > 0:
            L = max(L, float(np.linalg.norm(gx - gy) / dist))
    return LipschitzTable(L=safety * L, Lij=_floor_zeros(safety * Lij), estimate=True)


@dataclass
class RateConstants:
    R0: float
    Gstar: float
    T: float
    fdec: float
    C: float
    mu: float
    n: int
    estimate: bool = False
    chain: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "R0": self.R0,
            "Gstar": self.Gstar,
            "T": self.T,
            "fdec": self.fdec,
            "C": self.C,
            "mu": self.mu,
            "n": self.n,
            "estimate": self.estimate,
            "chain": self.chain,
        }


def stepsize_floor_reciprocal(table: LipschitzTable, armijo: ArmijoParams) -> float:
    """1 / min{A_l, 2 delta (1 - gamma) / Lmax}."""
    return max(1.0 / armijo.A_l, table.Lmax / (2.0 * armijo.delta * (1.0 - armijo.gamma)))


def rate_constants(p: BoxSimplexProblem, table: LipschitzTable, cert: SolutionCertificate,
                   f_x0: float, armijo: ArmijoParams, mu: float = 0.0,
                   level_set_samples=None) -> RateConstants:
    """Constant C with f(x^k) - f* <= C / k for convex objectives.

    R0 comes from strong convexity when ``mu > 0``; otherwise it is a lower
    estimate from ``level_set_samples`` and the result is flagged.
    """
    n = p.n
    gap0 = max(0.0, f_x0 - cert.f_star)
    estimate = table.estimate
    if mu > 0:
        R0 = math.sqrt(2.0 * gap0 / mu)
    elif level_set_samples is not None and len(level_set_samples):
        xs = np.asarray(cert.x_star)
        R0 = max(seminorm_j(np.asarray(x) - xs, j) for x in level_set_samples for j in range(n))
        estimate = True
    else:
        raise ContractError("need mu > 0 or level-set samples to bound R0")
    g = p.grad(cert.x_star)
    Gstar = float(g.max() - g.min())
    T = stepsize_floor_reciprocal(table, armijo)
    Lbar = table.Lbar
    fdec = T * R0 + 2.0 * Lbar * R0 + Gstar
    C_decrease = 3.0 * armijo.A_u * (n - 1) * fdec ** 2 / (2.0 * armijo.gamma)
    # the recursion argument also needs f(x^1) - f* <= C and f(x^2) - f* <= C/2
    C_start = Lbar * R0 ** 2 + 2.0 * math.sqrt(n - 1) * Gstar * R0
    C = max(C_decrease, C_start)
    chain = {
        "f_x0": f_x0,
        "f_star": cert.f_star,
        "Lmax": table.Lmax,
        "Lbar": Lbar,
        "A_l": armijo.A_l,
        "A_u": armijo.A_u,
        "gamma": armijo.gamma,
        "delta": armijo.delta,
        "C_decrease": C_decrease,
        "C_start": C_start,
    }
    return RateConstants(R0=R0, Gstar=Gstar, T=T, fdec=fdec, C=C, mu=mu, n=n,
                         estimate=estimate, chain=chain)


@dataclass
class Radii:
    r_j: float
    r_A: Optional[float]

    def to_dict(self) -> dict:
        return {"r_j": _enc(self.r_j), "r_A": self.r_A}


def _enc(v):
    return "inf" if v == math.inf else v


def identification_radii(cert: SolutionCertificate, table: LipschitzTable, L: float,
                         armijo: ArmijoParams, tau: float) -> Radii:
    """r_j (sup-norm ball where j(k) avoids the active set) and r_A.

    r_A is ``None`` when no coordinate is strictly active.
    """
    if not 0 < tau <= 1:
        raise ContractError("tau must lie in (0, 1]")
    if not cert.dmax_star > 0:
        raise UndefinedQuantityError("D*max must be positive")
    r_j = tau * cert.dmax_star / (1.0 + tau) if math.isfinite(cert.dmax_star) else math.inf
    r_A = None
    if cert.strict_active:
        denom = 2.0 * L + max(1.0 / armijo.A_l, table.Lmax / (2.0 * (1.0 - armijo.gamma)))
        r_A = cert.zeta / denom
    return Radii(r_j=r_j, r_A=r_A)


def _floor_plus_one(x: float) -> int:
    if not math.isfinite(x):
        raise UndefinedQuantityError("bound is infinite")
    return int(math.floor(x)) + 1


def complexity_bounds(rc: RateConstants, radii: Radii, dmin_star: Optional[float]):
    """Upper bounds on the identification iterations (kA_bound, kN_bound).

    kA_bound is ``None`` if r_A is undefined; kN_bound is ``None`` if D*min is.
    """
    if not rc.mu > 0:
        raise ContractError("bounds require strong convexity (mu > 0)")
    factor = 2.0 * rc.C / rc.mu
    kA = None
    if radii.r_A is not None:
        inv_j = 0.0 if radii.r_j == math.inf else radii.r_j ** -2
        kA = _floor_plus_one(factor * max(inv_j, radii.r_A ** -2))
    kN = None
    if dmin_star is not None:
        inv = 0.0 if dmin_star == math.inf else dmin_star ** -2
        kN = _floor_plus_one(factor * inv)
    return kA, kN


def _random_feasible(p: BoxSimplexProblem, rng, spread: float = 1.0) -> np.ndarray:
    from .reference import project_onto_feasible

    center = np.where(np.isfinite(p.l) & np.isfinite(p.u), 0.5 * (p.l + p.u),
                      np.where(np.isfinite(p.l), p.l + 1.0, np.where(np.isfinite(p.u), p.u - 1.0, 0.0)))
    width = np.where(np.isfinite(p.l) & np.isfinite(p.u), p.u - p.l, 2.0)
    y = center + spread * width * rng.normal(size=p.n)
    return project_onto_feasible(p, y)


def lemma_suite(p: BoxSimplexProblem, table: LipschitzTable, trials: int = 1000, seed: int = 0) -> dict:
    """Evaluate the seminorm Lipschitz inequalities on random feasible points.

    Returns the largest scaled violation (0 when every inequality held) and
    the number of violations above 1e-9 for each of: the L_j Lipschitz bound
    on reduced gradients, its pairwise corollary, and the L_j descent bound.
    """
    rng = np.random.default_rng(seed)
    n = p.n
    Lj = table.Lj
    names = ("lips_const", "lips_corollary", "lips_descent")
    worst = dict.fromkeys(names, 0.0)
    count = dict.fromkeys(names, 0)
    for _ in range(trials):
        x1 = _random_feasible(p, rng)
        x2 = _random_feasible(p, rng) if rng.random() > 0.05 else x1.copy()
        g1, g2 = p.grad(x1), p.grad(x2)
        f1, f2 = p.f(x1), p.f(x2)
        j = int(rng.integers(n))
        h = int(rng.integers(n - 1))
        h = h + 1 if h >= j else h
        dx = seminorm_j(x1 - x2, j)
        r1, r2 = g1 - g1[j], g2 - g2[j]
        lhs = seminorm_j(r1 - r2, j)
        rhs = Lj[j] * dx
        _tally(worst, count, "lips_const", lhs - rhs, 1.0 + abs(lhs) + abs(rhs))
        # v = x2, z = x1: |grad_h f(v) - grad_j f(v) + g| with g = grad_j f(z) - grad_h f(z)
        gz = g1[j] - g1[h]
        lhs = abs(g2[h] - g2[j] + gz)
        _tally(worst, count, "lips_corollary", lhs - rhs, 1.0 + abs(lhs) + abs(rhs))
        rhs = f1 + g1 @ (x2 - x1) + 0.5 * Lj[j] * dx * dx
        _tally(worst, count, "lips_descent", f2 - rhs, 1.0 + abs(f2) + abs(rhs))
    return {
        "trials": trials,
        "max_violation": worst,
        "violations": count,
        "ok": all(c == 0 for c in count.values()),
    }


def _tally(worst, count, name, excess, scale):
    v = max(0.0, excess) / scale
    if v > worst[name]:
        worst[name] = v
    if v > 1e-9:
        count[name] += 1
