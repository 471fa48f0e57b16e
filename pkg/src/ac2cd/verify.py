"""Property checks on solver traces and the verification suites built on them.

Every check counts how many times an inequality was evaluated and how many
times it failed; failures keep a few examples with their location. Suites
run the checks over seeded instance collections and return a plain dict
that serializes deterministically (see ``report_json``).
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import ContractError
from .linesearch import ArmijoParams, Strategy
from .problem import BoxSimplexProblem, SolutionCertificate, distance_to_bound
from .seminorm import inner_j, reduced_product_identity, seminorm_j
from .solver import SolverConfig, Trace, identification_detector, solve
from .theory import (
    LipschitzTable,
    complexity_bounds,
    identification_radii,
    lemma_suite,
    lipschitz_table_quadratic,
    rate_constants,
)
from .zoo import acceptance_instances, default_x0

SUITES = ("seminorm", "lemmas", "descent", "stepsize", "interiority", "rate", "identification")
TRACE_SUITES = SUITES[2:]
MAX_EXAMPLES = 10


@dataclass
class Check:
    name: str
    checked: int = 0
    violations: int = 0
    worst: float = 0.0
    examples: list = field(default_factory=list)

    def record(self, excess: float, **where) -> None:
        """Count one evaluation; ``excess > 0`` means the property failed by that much."""
        self.checked += 1
        if excess > 0 or math.isnan(excess):
            self.violations += 1
            if not excess <= self.worst:
                self.worst = excess
            if len(self.examples) < MAX_EXAMPLES:
                self.examples.append({"excess": excess, **where})

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def merge(self, other: "Check") -> None:
        self.checked += other.checked
        self.violations += other.violations
        self.worst = max(self.worst, other.worst)
        room = MAX_EXAMPLES - len(self.examples)
        self.examples.extend(other.examples[:max(room, 0)])

    def to_dict(self) -> dict:
        return {
            "checked": self.checked,
            "violations": self.violations,
            "worst": self.worst,
            "examples": self.examples,
        }


# ---------------------------------------------------------------- trace checks


def check_descent(trace: Trace, params: ArmijoParams) -> list:
    """Monotone descent and the Armijo-induced decrease per outer iteration."""
    mono = Check("monotone")
    dec = Check("armijo_decrease")
    recs = trace.records
    for r, r2 in zip(recs, recs[1:]):
        scale = 1.0 + abs(r.f)
        mono.record(r2.f - r.f - 1e-12 * scale, k=r.k)
        step = seminorm_j(r2.x - r.x, r.j)
        need = params.gamma / params.A_u * step * step
        dec.record(need - (r.f - r2.f) - 1e-10 * scale, k=r.k)
    return [mono, dec]


def check_structure(p: BoxSimplexProblem, trace: Trace, tau: float) -> list:
    """Each p != j(k) is moved in exactly one inner step, and j(k) obeys the tau rule."""
    once = Check("coordinate_touched_once")
    jrule = Check("j_rule")
    recs = trace.records
    for r, r2 in zip(recs, recs[1:]):
        D = np.array([distance_to_bound(p, r.x, h) for h in range(p.n)])
        jrule.record(0.0 if D[r.j] >= tau * D.max() else 1.0, k=r.k, j=r.j)
        if r.z is None:
            continue
        for i, pk in enumerate(r.perm):
            if pk == r.j:
                continue
            bad = r.z[i][pk] != r.x[pk] or r2.x[pk] != r.z[i + 1][pk]
            once.record(1.0 if bad else 0.0, k=r.k, p=pk)
    return [once, jrule]


def check_stepsize_floor(trace: Trace, table: LipschitzTable, params: ArmijoParams) -> list:
    """alpha >= min{Delta, 2 delta (1 - gamma) / L_pj} for every inner step."""
    chk = Check("stepsize_floor")
    c = 2.0 * params.delta * (1.0 - params.gamma)
    for r, i, s in trace.steps():
        if s.p == r.j:
            continue
        floor = min(s.Delta, c / table.Lij[s.p, r.j])
        chk.record(floor - 1e-12 - s.alpha, k=r.k, i=i, p=s.p, j=r.j)
    return [chk]


def check_interiority(p: BoxSimplexProblem, trace: Trace, epsilon: float) -> list:
    """D_j(z^{k,i+1}) >= epsilon^i D_j(x^k) and z_j strictly inside its bounds."""
    shrink = Check("interiority_shrink")
    inside = Check("j_interior")
    for r in trace.records:
        if r.z is None or r.j is None:
            continue
        D0 = distance_to_bound(p, r.x, r.j)
        for i in range(1, len(r.z)):
            D = distance_to_bound(p, r.z[i], r.j)
            inside.record(0.0 if D > 0 else 1.0, k=r.k, i=i)
            if math.isfinite(D0):
                shrink.record(epsilon ** i * D0 - D - 1e-14 * max(1.0, D0), k=r.k, i=i)
    return [shrink, inside]


def check_rate(trace: Trace, cert: SolutionCertificate, rc, params: ArmijoParams, n: int) -> list:
    """f(x^k) - f* <= C/k, and the per-iteration decrease in terms of the gap."""
    rate = Check("rate")
    dec = Check("gap_decrease")
    fs = cert.f_star
    beta = params.gamma / (params.A_u * (n - 1) * rc.fdec ** 2) if rc.fdec > 0 else math.inf
    recs = trace.records
    for r in recs:
        if r.k >= 1:
            rate.record(r.f - fs - rc.C / r.k - 1e-9, k=r.k)
    for r, r2 in zip(recs, recs[1:]):
        gap = max(0.0, r2.f - fs)
        need = beta * gap * gap if math.isfinite(beta) else (0.0 if gap == 0 else math.inf)
        dec.record(need - (r.f - r2.f) - 1e-10 * (1.0 + abs(r.f)), k=r.k)
    return [rate, dec]


def rate_tightness(trace: Trace, cert: SolutionCertificate, C: float) -> float:
    """max_k k (f(x^k) - f*) / C; at most 1 when the rate bound holds."""
    if C <= 0:
        return 0.0
    vals = [r.k * (r.f - cert.f_star) / C for r in trace.records if r.k >= 1]
    return max(vals, default=0.0)


def check_radii(p: BoxSimplexProblem, trace: Trace, cert: SolutionCertificate, radii) -> list:
    """Pointwise consequences of being close to x*.

    * within r_j (sup norm) the selected j(k) is not active at x*;
    * within D*min (sup norm) every coordinate inactive at x* is strictly inside;
    * if every inner point of outer iteration k is within r_A (Euclidean) and
      j(k) is inactive at x*, then x^{k+1} equals x* on the strictly active set.
    """
    cj = Check("radius_j")
    cn = Check("radius_dmin")
    ca = Check("radius_A")
    xs = np.asarray(cert.x_star)
    free = [h for h in range(p.n) if h not in cert.active]
    strict = sorted(cert.strict_active)
    recs = trace.records
    for idx, r in enumerate(recs):
        dist = float(np.max(np.abs(r.x - xs)))
        if r.j is not None and dist < radii.r_j:
            cj.record(1.0 if r.j in cert.active else 0.0, k=r.k, j=r.j)
        if cert.dmin_star is not None and dist < cert.dmin_star:
            bad = [h for h in free if not p.l[h] < r.x[h] < p.u[h]]
            cn.record(float(len(bad)), k=r.k)
        if radii.r_A is None or r.z is None or idx + 1 >= len(recs) or r.j in cert.active:
            continue
        if all(np.linalg.norm(z - xs) < radii.r_A for z in r.z[:-1]):
            nxt = recs[idx + 1].x
            bad = [h for h in strict if nxt[h] != xs[h]]
            ca.record(float(len(bad)), k=r.k)
    return [cj, cn, ca]


def check_identification(trace: Trace, cert: SolutionCertificate, bounds) -> tuple:
    """Empirical identification iterations, exact bound-set tail, and the bounds.

    Returns ``(checks, info)`` where info holds kA/kN values and ratios.
    """
    found = Check("identified")
    exact = Check("exact_active_tail")
    below = Check("within_bounds")
    kA, kN = identification_detector(trace, cert)
    found.record(0.0 if kA is not None and kN is not None else 1.0)
    kA_bound, kN_bound = bounds
    info = {"kA_emp": kA, "kN_emp": kN, "kA_bound": kA_bound, "kN_bound": kN_bound,
            "kA_ratio": _ratio(kA_bound, kA), "kN_ratio": _ratio(kN_bound, kN)}
    if kA is None or kN is None:
        return [found, exact, below], info
    start = max(kA, kN)
    want = tuple(sorted(cert.active))
    for r in trace.records:
        if r.k > start:
            exact.record(0.0 if r.active == want else 1.0, k=r.k)
    if kA_bound is not None:
        below.record(float(kA - kA_bound), which="kA")
    if kN_bound is not None:
        below.record(float(kN - kN_bound), which="kN")
    return [found, exact, below], info


def _ratio(bound, emp):
    if bound is None or emp is None:
        return None
    if emp == 0:
        return "inf"
    return bound / emp


# ---------------------------------------------------------------- instance runs


@dataclass
class Run:
    problem: BoxSimplexProblem
    cert: SolutionCertificate
    mu: float
    x0: np.ndarray
    trace: Trace
    table: LipschitzTable
    rc: object
    radii: object
    bounds: tuple


def run_instance(p: BoxSimplexProblem, cert: SolutionCertificate, mu: float,
                 config: SolverConfig = SolverConfig(), x0=None, table: LipschitzTable = None) -> Run:
    """Solve from ``x0`` (default: ``default_x0``) and evaluate every theory constant."""
    if x0 is None:
        x0 = default_x0(p, cert.x_star)
    trace, _ = solve(p, x0, config)
    if table is None:
        table = lipschitz_table_quadratic(p.oracle.hessian())
    rc = rate_constants(p, table, cert, p.f(x0), config.armijo, mu=mu)
    radii = identification_radii(cert, table, table.L, config.armijo, config.tau)
    bounds = complexity_bounds(rc, radii, cert.dmin_star)
    return Run(p, cert, mu, np.asarray(x0, dtype=float), trace, table, rc, radii, bounds)


def converged_within(run: Run, rel: float = 1e-6) -> float:
    """Excess of f(x_final) - f* over rel (1 + |f*|)."""
    fs = run.cert.f_star
    return run.trace.final.f - fs - rel * (1.0 + abs(fs))


def trace_checks(suite: str, run: Run, config: SolverConfig):
    """The checks a trace suite evaluates on one run; returns ``(checks, info)``."""
    p, tr = run.problem, run.trace
    conv = Check("converged")
    conv.record(converged_within(run))
    checks = [conv]
    info = {}
    if suite == "descent":
        checks += check_descent(tr, config.armijo)
        checks += check_structure(p, tr, config.tau)
    elif suite == "stepsize":
        checks += check_stepsize_floor(tr, run.table, config.armijo)
    elif suite == "interiority":
        if config.armijo.strategy is not Strategy.INTERIORITY_PRESERVING:
            raise ContractError("the interiority suite needs the InteriorityPreserving strategy")
        checks += check_interiority(p, tr, config.armijo.epsilon)
    elif suite == "rate":
        checks += check_rate(tr, run.cert, run.rc, config.armijo, p.n)
        info["constants"] = run.rc.to_dict()
        info["tightness"] = rate_tightness(tr, run.cert, run.rc.C)
    elif suite == "identification":
        checks += check_radii(p, tr, run.cert, run.radii)
        more, info = check_identification(tr, run.cert, run.bounds)
        checks += more
        info["radii"] = run.radii.to_dict()
        info["C"] = run.rc.C
    else:
        raise ContractError(f"unknown trace suite {suite!r}")
    return checks, info


def _trace_job(args):
    suite, count, seed, idx, config, corrupt = args
    p, cert = acceptance_instances(count, seed)[idx]
    table = lipschitz_table_quadratic(p.oracle.hessian())
    if corrupt:
        table = table.scaled(0.5)
    run = run_instance(p, cert, cert.extra["mu"], config, table=table)
    checks, info = trace_checks(suite, run, config)
    tr = run.trace
    entry = {
        "index": idx,
        "name": p.name,
        "n": p.n,
        "status": tr.status,
        "n_outer": tr.n_outer,
        "gap": tr.final.f - cert.f_star,
        "checks": {c.name: c.to_dict() for c in checks},
    }
    entry.update(info)
    return entry


def _lemma_job(args):
    count, seed, idx, trials, corrupt = args
    p, _ = acceptance_instances(count, seed)[idx]
    table = lipschitz_table_quadratic(p.oracle.hessian())
    if corrupt:
        table = table.scaled(0.5)
    rep = lemma_suite(p, table, trials=trials, seed=seed + idx)
    checks = {}
    for name in ("lips_const", "lips_corollary", "lips_descent"):
        checks[name] = {"checked": trials, "violations": rep["violations"][name],
                        "worst": rep["max_violation"][name], "examples": []}
    return {"index": idx, "name": p.name, "n": p.n, "checks": checks}


def seminorm_checks(trials: int = 1000, seed: int = 0) -> list:
    """Random-vector checks of the reduced-product identity and seminorm inequalities."""
    rng = np.random.default_rng(seed)
    prod = Check("prod_identity")
    cauchy = Check("cauchy")
    absv = Check("abs_vs_seminorm")
    sumabs = Check("sum_abs_vs_seminorm")
    le = Check("seminorm_le_norm")
    for t in range(trials):
        n = int(rng.integers(2, 11))
        j = int(rng.integers(n))
        x = rng.normal(size=n) * 10.0 ** rng.uniform(-3, 3)
        y = rng.normal(size=n)
        sx, sy = seminorm_j(x, j), seminorm_j(y, j)
        cauchy.record(inner_j(x, y, j) - sx * sy - 1e-12 * (1.0 + sx * sy), t=t)
        others = np.delete(np.abs(x), j)
        absv.record(float(others.max()) - sx - 1e-12 * (1.0 + sx), t=t)
        sumabs.record(float(others.sum()) - math.sqrt(n - 1) * sx - 1e-12 * (1.0 + sx), t=t)
        nx = float(np.linalg.norm(x))
        le.record(sx - nx - 1e-12 * (1.0 + nx), t=t)
        v = rng.normal(size=n)
        xp = rng.normal(size=n)
        xpp = rng.normal(size=n)
        xpp += (xp.sum() - xpp.sum()) / n
        lhs, rhs = reduced_product_identity(v, xp, xpp, j)
        prod.record(abs(lhs - rhs) - 1e-12 * (1.0 + abs(lhs)), t=t)
    return [prod, cauchy, absv, sumabs, le]


def run_suite(suite: str, seed: int = 0, trials: int = 1000, count: int = 50,
              config: Optional[SolverConfig] = None, workers: int = 1,
              corrupt_lipschitz: bool = False) -> dict:
    """Run one named suite and return its report.

    Trace suites solve the ``count`` seeded acceptance instances; the lemma
    suite uses the first ten of them. ``corrupt_lipschitz`` halves every
    Lipschitz table (a negative control that should produce violations).
    """
    if suite not in SUITES:
        raise ContractError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")
    if config is None:
        config = SolverConfig()
    report = {"suite": suite, "seed": seed, "corrupt_lipschitz": corrupt_lipschitz}
    if suite == "seminorm":
        checks = seminorm_checks(trials, seed)
        report["trials"] = trials
        report["checks"] = {c.name: c.to_dict() for c in checks}
        return _finish(report)
    if suite == "lemmas":
        m = min(count, 10)
        jobs = [(m, seed, i, trials, corrupt_lipschitz) for i in range(m)]
        entries = _map(_lemma_job, jobs, workers)
        report["trials"] = trials
    else:
        jobs = [(suite, count, seed, i, config, corrupt_lipschitz) for i in range(count)]
        entries = _map(_trace_job, jobs, workers)
        report["config"] = config.to_dict()
    report["count"] = len(entries)
    report["instances"] = entries
    agg = {}
    for e in entries:
        for name, d in e["checks"].items():
            c = agg.setdefault(name, Check(name))
            c.merge(Check(name, d["checked"], d["violations"], d["worst"],
                          [dict(ex, instance=e["name"]) for ex in d["examples"]]))
    report["checks"] = {name: c.to_dict() for name, c in agg.items()}
    return _finish(report)


def _map(fn, jobs, workers: int):
    if workers <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        # map preserves job order, so the merged report does not depend on scheduling
        return list(ex.map(fn, jobs))


def _finish(report: dict) -> dict:
    total = sum(c["violations"] for c in report["checks"].values())
    report["violations"] = total
    report["ok"] = total == 0
    return report


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_plain(x) for x in v.tolist()]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return v


def report_json(report: dict) -> str:
    """Canonical JSON text (sorted keys, finite floats only)."""
    return json.dumps(_plain(report), sort_keys=True, indent=1, allow_nan=False) + "\n"
