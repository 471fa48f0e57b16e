"""Almost cyclic 2-coordinate descent with Armijo line search."""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import ContractError, LineSearchError
from .linesearch import ArmijoParams, StepRecord, Strategy, armijo, choose_A, max_feasible_stepsize
from .problem import (
    BoxSimplexProblem,
    SolutionCertificate,
    distances,
    is_feasible,
    kkt_certificate,
)


# relative size below which a difference of two objective values is not trusted
_NOISE = 64 * np.finfo(float).eps


class Permutation(str, enum.Enum):
    IDENTITY = "Identity"
    FIXED_SHUFFLE = "FixedShuffle"
    RESHUFFLE = "ReshufflePerOuter"


class TraceLevel(str, enum.Enum):
    SUMMARY = "Summary"
    FULL = "Full"


@dataclass(frozen=True)
class SolverConfig:
    tau: float = 0.5
    permutation: Permutation = Permutation.RESHUFFLE
    seed: int = 0
    armijo: ArmijoParams = field(default_factory=ArmijoParams)
    max_outer: int = 100_000
    kkt_tol: float = 1e-8
    active_tol: float = 1e-8
    trace_level: TraceLevel = TraceLevel.FULL

    def __post_init__(self):
        object.__setattr__(self, "permutation", Permutation(self.permutation))
        object.__setattr__(self, "trace_level", TraceLevel(self.trace_level))
        if not 0 < self.tau <= 1:
            raise ContractError("tau must lie in (0, 1]")
        if self.max_outer < 0:
            raise ContractError("max_outer must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "permutation": self.permutation.value,
            "seed": self.seed,
            "armijo": self.armijo.to_dict(),
            "max_outer": self.max_outer,
            "kkt_tol": self.kkt_tol,
            "active_tol": self.active_tol,
            "trace_level": self.trace_level.value,
        }


@dataclass
class OuterRecord:
    k: int
    x: np.ndarray
    f: float
    residual: float
    lambda_hat: float
    Dk: float
    active: tuple
    j: Optional[int] = None
    perm: Optional[list] = None
    steps: list = field(default_factory=list)
    # z^{k,1}, ..., z^{k,n+1}; only kept at the Full trace level
    z: Optional[list] = None
    stalled: bool = False

    def to_dict(self) -> dict:
        d = {
            "k": self.k,
            "x": self.x.tolist(),
            "f": self.f,
            "residual": self.residual,
            "lambda_hat": self.lambda_hat,
            "Dk": _jf(self.Dk),
            "active": list(self.active),
            "j": self.j,
            "perm": self.perm,
            "stalled": self.stalled,
            "steps": [s.to_dict() for s in self.steps],
        }
        if self.z is not None:
            d["z"] = [zz.tolist() for zz in self.z]
        return d


def _jf(v):
    return "inf" if v == math.inf else v


@dataclass
class Trace:
    records: list
    config: SolverConfig
    lower: np.ndarray
    upper: np.ndarray
    status: str = "running"
    message: str = ""

    @property
    def final(self) -> OuterRecord:
        return self.records[-1]

    @property
    def iterates(self) -> np.ndarray:
        return np.array([r.x for r in self.records])

    @property
    def n_outer(self) -> int:
        return self.records[-1].k

    def steps(self):
        for r in self.records:
            for i, s in enumerate(r.steps):
                yield r, i, s

    def min_A_moving(self) -> Optional[float]:
        vals = [s.A for _, _, s in self.steps() if s.g != 0]
        return min(vals) if vals else None

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_dict(), allow_nan=False) + "\n" for r in self.records)

    def summary_csv(self, f_star: Optional[float] = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "f", "gap", "residual", "j", "Dk", "n_active", "min_alpha", "max_backtracks"])
        for r in self.records:
            moving = [s.alpha for s in r.steps if s.g != 0]
            w.writerow([
                r.k,
                repr(r.f),
                "" if f_star is None else repr(r.f - f_star),
                repr(r.residual),
                "" if r.j is None else r.j,
                repr(r.Dk),
                len(r.active),
                repr(min(moving)) if moving else "",
                max((s.backtracks for s in r.steps), default=""),
            ])
        return buf.getvalue()


def select_j(p: BoxSimplexProblem, x, tau: float = 1.0) -> int:
    """Index farthest from its nearest bound (lowest index on ties).

    The argmax satisfies D_j(x) >= tau * max_h D_h(x) for every tau in (0, 1].
    """
    if not 0 < tau <= 1:
        raise ContractError("tau must lie in (0, 1]")
    return int(np.argmax(distances(p, x)))


def _move(p: BoxSimplexProblem, z: np.ndarray, pk: int, j: int, g: float, alpha: float,
          alpha_bar: float) -> tuple:
    """z + alpha g (e_pk - e_j), landing exactly on a bound when the step reaches it."""
    znew = z.copy()
    room_p, room_j = (p.u[pk] - z[pk], z[j] - p.l[j]) if g > 0 else (z[pk] - p.l[pk], p.u[j] - z[j])
    room = min(room_p, room_j)
    s = alpha * abs(g)
    hit = alpha == alpha_bar or s >= room
    if hit:
        s = room
    sign = 1.0 if g > 0 else -1.0
    znew[pk] = z[pk] + sign * s
    znew[j] = z[j] - sign * s
    if hit:
        if room_p == room:
            znew[pk] = p.u[pk] if g > 0 else p.l[pk]
        if room_j == room:
            znew[j] = p.l[j] if g > 0 else p.u[j]
    return znew, bool(hit)


def inner_step(p: BoxSimplexProblem, z, pk: int, j: int, params: ArmijoParams):
    """One inner iteration: move x_pk and x_j along g (e_pk - e_j)."""
    z = np.asarray(z, dtype=float)
    if pk == j:
        return z.copy(), StepRecord(pk, 0.0, 0.0, params.A_u, 0.0, 0.0, 0, False)
    oracle = p.oracle
    g = float(oracle.partial(z, j) - oracle.partial(z, pk))
    if g == 0:
        return z.copy(), StepRecord(pk, 0.0, 0.0, params.A_u, 0.0, 0.0, 0, False)
    alpha_bar = max_feasible_stepsize(p, z, pk, j, g)
    A = choose_A(p, z, pk, j, g, params)
    Delta = float(min(alpha_bar, A))
    if Delta == 0:
        return z.copy(), StepRecord(pk, g, alpha_bar, A, 0.0, 0.0, 0, False)
    dir_deriv = -g * g
    if getattr(oracle, "is_quadratic", False):
        # exact along the pair direction; avoids cancellation in f(z + alpha d) - f(z)
        c = oracle.pair_curvature(z, pk, j)
        g2 = g * g

        def f_change(alpha):
            return -alpha * g2 + 0.5 * alpha * alpha * g2 * c
    else:
        f0 = oracle.value(z)

        def f_change(alpha):
            zt = _move(p, z, pk, j, g, alpha, alpha_bar)[0]
            ft = oracle.value(zt)
            if abs(ft - f0) > _NOISE * max(abs(f0), abs(ft)):
                return ft - f0
            # the difference is rounding noise; integrate the pair derivative instead
            # (trapezoid rule, exact up to the third derivative along d)
            slope = g * (oracle.partial(zt, pk) - oracle.partial(zt, j))
            return 0.5 * alpha * (dir_deriv + slope)

    d = np.zeros_like(z)
    d[pk], d[j] = g, -g
    alpha, backtracks = armijo(p, z, d, Delta, dir_deriv, params, f_change=f_change)
    znew, hit = _move(p, z, pk, j, g, alpha, alpha_bar)
    return znew, StepRecord(pk, g, alpha_bar, A, Delta, alpha, backtracks, hit)


def _permutation(config: SolverConfig, n: int, k: int, rng, fixed):
    if config.permutation is Permutation.IDENTITY:
        return list(range(n))
    if config.permutation is Permutation.FIXED_SHUFFLE:
        return fixed
    return [int(i) for i in rng.permutation(n)]


def outer_iteration(p: BoxSimplexProblem, x, config: SolverConfig, perm=None, j=None):
    """Run the n inner steps of one outer iteration.

    Returns ``(x_next, j, perm, steps, zs)`` where ``zs`` holds the inner
    points z^{k,1..n+1}.
    """
    x = np.asarray(x, dtype=float)
    if j is None:
        j = select_j(p, x, config.tau)
    if perm is None:
        perm = list(range(p.n))
    z = x.copy()
    zs = [z]
    steps = []
    for pk in perm:
        z, rec = inner_step(p, z, pk, j, config.armijo)
        steps.append(rec)
        zs.append(z)
    return z, j, perm, steps, zs


def _record(p, k, x, config) -> OuterRecord:
    cert = kkt_certificate(p, x, config.active_tol)
    D = distances(p, x)
    active = tuple(int(i) for i in np.flatnonzero((x == p.l) | (x == p.u)))
    return OuterRecord(
        k=k,
        x=x.copy(),
        f=p.f(x),
        residual=cert.residual,
        lambda_hat=cert.lambda_hat,
        Dk=float(D.max()),
        active=active,
    )


def solve(p: BoxSimplexProblem, x0, config: SolverConfig = SolverConfig()):
    """Run AC2CD from x0. Returns ``(trace, kkt_certificate_of_last_iterate)``.

    Stops when the KKT residual drops to ``config.kkt_tol`` (status
    "converged"), after ``config.max_outer`` outer iterations ("max_outer"),
    on a line-search failure ("linesearch_failure"), or when every
    coordinate is at a bound under the interiority-preserving strategy
    ("stalled").
    """
    x = np.array(x0, dtype=float)
    if not is_feasible(p, x, 1e-9):
        raise ContractError("x0 is not feasible")
    if not math.isfinite(p.f(x)):
        raise ContractError("f(x0) is not finite")
    rng = np.random.default_rng(config.seed)
    fixed = [int(i) for i in np.random.default_rng(config.seed).permutation(p.n)]
    full = config.trace_level is TraceLevel.FULL
    trace = Trace(records=[], config=config, lower=p.l, upper=p.u)
    k = 0
    while True:
        rec = _record(p, k, x, config)
        trace.records.append(rec)
        if rec.residual <= config.kkt_tol:
            trace.status = "converged"
            break
        if k >= config.max_outer:
            trace.status = "max_outer"
            break
        if rec.Dk == 0:
            # every coordinate sits on a bound; the selection rule gives no guidance
            rec.stalled = True
            if config.armijo.strategy is Strategy.INTERIORITY_PRESERVING:
                # the interiority cap needs an interior j(k), so no step can be taken
                trace.status = "stalled"
                trace.message = "all coordinates at bounds and not stationary"
                break
        perm = _permutation(config, p.n, k, rng, fixed)
        try:
            x_next, j, perm, steps, zs = outer_iteration(p, x, config, perm=perm)
        except LineSearchError as exc:
            trace.status = "linesearch_failure"
            trace.message = str(exc)
            break
        rec.j, rec.perm, rec.steps = j, perm, steps
        if full:
            rec.z = zs
        x = x_next
        k += 1
    return trace, kkt_certificate(p, x, config.active_tol)


def identification_detector(trace: Trace, cert: SolutionCertificate, tol: float = 1e-6):
    """Empirical identification iterations (kA_emp, kN_emp).

    kA_emp is the smallest k such that x^{k'}_h == x*_h exactly for every
    strictly active h and every recorded k' > k; kN_emp is the analogue for
    strict interiority of the non-active coordinates. ``None`` means the
    condition does not hold at the last recorded iterate.
    """
    X = trace.iterates
    xs = np.asarray(cert.x_star)
    if np.max(np.abs(X[-1] - xs)) > tol:
        raise ContractError("trace did not converge to the certificate point")
    strict = sorted(cert.strict_active)
    kA = 0
    if strict:
        kA = _tail_start(np.all(X[:, strict] == xs[strict], axis=1))
    free = [i for i in range(X.shape[1]) if i not in cert.active]
    kN = 0
    if free:
        inside = (X[:, free] > trace.lower[free]) & (X[:, free] < trace.upper[free])
        kN = _tail_start(np.all(inside, axis=1))
    return kA, kN


def _tail_start(ok: np.ndarray) -> Optional[int]:
    if not ok[-1]:
        return None
    bad = np.flatnonzero(~ok)
    return int(bad[-1]) if bad.size else 0
