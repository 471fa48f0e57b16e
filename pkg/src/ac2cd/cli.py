"""Command-line entry point: ``ac2cd {solve,verify,complexity,sweep,export}``.

Exit codes: 0 success (converged / no violations), 1 bad input, 2 not
converged (iteration cap or stall at an all-bounds point), 3 line-search
failure, 4 verification violations.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from pathlib import Path

import numpy as np

from .exceptions import ContractError, LineSearchError, OracleError, UndefinedQuantityError
from .instance_io import load_instance
from .linesearch import ArmijoParams
from .solver import SolverConfig, identification_detector, solve
from .verify import SUITES, report_json, run_suite

EXIT_OK, EXIT_INPUT, EXIT_CAP, EXIT_LINESEARCH, EXIT_VIOLATIONS = 0, 1, 2, 3, 4
STATUS_EXIT = {"converged": EXIT_OK, "max_outer": EXIT_CAP, "stalled": EXIT_CAP,
               "linesearch_failure": EXIT_LINESEARCH}

# config key -> (parser, section) where section says which dataclass takes it
_KEYS = {
    "tau": (float, "solver"),
    "permutation": (str, "solver"),
    "seed": (int, "solver"),
    "max_outer": (int, "solver"),
    "kkt_tol": (float, "solver"),
    "active_tol": (float, "solver"),
    "trace_level": (str, "solver"),
    "gamma": (float, "armijo"),
    "delta": (float, "armijo"),
    "A_l": (float, "armijo"),
    "A_u": (float, "armijo"),
    "epsilon": (float, "armijo"),
    "strategy": (str, "armijo"),
    "max_backtracks": (int, "armijo"),
}


class InputError(Exception):
    pass


def read_config_file(path) -> dict:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc.strerror}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise InputError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def build_config(values: dict) -> SolverConfig:
    """SolverConfig from string or typed values; unknown keys are rejected."""
    solver, armijo = {}, {}
    for key, raw in values.items():
        if key not in _KEYS:
            raise InputError(f"unknown config key {key!r}")
        conv, section = _KEYS[key]
        try:
            val = conv(raw)
        except ValueError:
            raise InputError(f"bad value for {key}: {raw!r}") from None
        (solver if section == "solver" else armijo)[key] = val
    try:
        return SolverConfig(armijo=ArmijoParams(**armijo), **solver)
    except (ContractError, ValueError) as exc:
        raise InputError(f"invalid configuration: {exc}") from None


def _collect_config(args) -> SolverConfig:
    values = {}
    env_seed = os.environ.get("AC2CD_SEED")
    if env_seed is not None:
        values["seed"] = env_seed
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    for key in _KEYS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return build_config(values)


def _add_config_flags(ap: argparse.ArgumentParser) -> None:
    ap.add_argument("--config", help="flat key=value configuration file")
    for key, (conv, _) in _KEYS.items():
        ap.add_argument(f"--{key.replace('_', '-')}", dest=key, type=conv, default=None)


def _load(path):
    try:
        return load_instance(path)
    except OSError as exc:
        raise InputError(f"cannot read instance {path}: {exc.strerror}") from None
    except (ContractError, ValueError) as exc:
        raise InputError(str(exc)) from None


def _write(out_dir: Path, name: str, text: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / name).write_text(text)


def _start_point(p, cert, extras):
    from .zoo import default_x0

    if "x0" in extras:
        return extras["x0"]
    return default_x0(p, None if cert is None else cert.x_star)


def _jsonable_float(v):
    if v is None:
        return None
    return "inf" if v == math.inf else "-inf" if v == -math.inf else float(v)


def cmd_solve(args) -> int:
    p, cert, extras = _load(args.instance)
    config = _collect_config(args)
    x0 = _start_point(p, cert, extras)
    try:
        trace, kkt = solve(p, x0, config)
    except ContractError as exc:
        raise InputError(str(exc)) from None
    fin = trace.final
    f_star = None if cert is None else cert.f_star
    report = {
        "instance": p.name,
        "n": p.n,
        "status": trace.status,
        "message": trace.message,
        "n_outer": trace.n_outer,
        "x": fin.x.tolist(),
        "f": fin.f,
        "f_star": f_star,
        "gap": None if f_star is None else fin.f - f_star,
        "kkt": kkt.to_dict(),
        "active": list(fin.active),
        "config": config.to_dict(),
    }
    out = Path(args.out)
    _write(out, "trace.jsonl", trace.to_jsonl())
    _write(out, "summary.csv", trace.summary_csv(f_star))
    _write(out, "report.json", report_json(report))
    print(f"{p.name or args.instance}: {trace.status} after {trace.n_outer} outer iterations, "
          f"f = {fin.f!r}, KKT residual = {kkt.residual:.3e}")
    if trace.status in ("linesearch_failure", "stalled"):
        print(trace.message, file=sys.stderr)
    return STATUS_EXIT[trace.status]


def cmd_verify(args) -> int:
    if args.suite not in SUITES:
        raise InputError(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)}")
    config = _collect_config(args)
    report = run_suite(args.suite, seed=config.seed, trials=args.trials, count=args.count,
                       config=config, workers=args.workers,
                       corrupt_lipschitz=args.corrupt_lipschitz)
    text = report_json(report)
    if args.out:
        _write(Path(args.out), "report.json", text)
    for name, c in report["checks"].items():
        print(f"{name:28s} checked {c['checked']:8d}  violations {c['violations']:6d}")
    print(f"suite {args.suite}: {'PASS' if report['ok'] else 'FAIL'}")
    return EXIT_OK if report["ok"] else EXIT_VIOLATIONS


def _certificate_and_mu(p, cert, extras):
    from .reference import MAX_ENUMERATION_N, solve_qp_enumerate

    quadratic = getattr(p.oracle, "is_quadratic", False)
    mu = extras.get("mu")
    if mu is None and quadratic:
        mu = float(np.linalg.eigvalsh(p.oracle.hessian()).min())
    if mu is None or not mu > 0:
        raise InputError("bounds require strong convexity (mu > 0)")
    if cert is None:
        if not quadratic or p.n > MAX_ENUMERATION_N:
            raise InputError("instance has no certificate and cannot be solved exactly")
        try:
            cert = solve_qp_enumerate(p)
        except (ContractError, OracleError) as exc:
            raise InputError(str(exc)) from None
    return cert, mu


def complexity_report(p, cert, mu, config, x0) -> dict:
    from .theory import complexity_bounds, identification_radii, lipschitz_table_quadratic, rate_constants

    if not getattr(p.oracle, "is_quadratic", False):
        raise InputError("complexity bounds need a quadratic objective (exact Lipschitz table)")
    table = lipschitz_table_quadratic(p.oracle.hessian())
    rc = rate_constants(p, table, cert, p.f(x0), config.armijo, mu=mu)
    try:
        radii = identification_radii(cert, table, table.L, config.armijo, config.tau)
    except UndefinedQuantityError as exc:
        raise InputError(str(exc)) from None
    kA_bound, kN_bound = complexity_bounds(rc, radii, cert.dmin_star)
    trace, _ = solve(p, x0, config)
    notes = []
    if radii.r_A is None:
        notes.append("no strictly active coordinate: r_A undefined, only the kN path applies")
    if cert.degenerate:
        unclassified = sorted(cert.active - cert.strict_active)
        notes.append(f"degenerate: active but not strictly active coordinates {unclassified} are not "
                     "covered by the identification guarantee")
    kA = kN = None
    try:
        kA, kN = identification_detector(trace, cert)
    except ContractError as exc:
        notes.append(f"identification not measured: {exc}")

    def ratio(b, e):
        if b is None or e is None:
            return None
        return "inf" if e == 0 else b / e

    return {
        "instance": p.name,
        "status": trace.status,
        "n_outer": trace.n_outer,
        "mu": mu,
        "lipschitz": table.to_dict(),
        "constants": rc.to_dict(),
        "zeta": cert.zeta,
        "dmax_star": _jsonable_float(cert.dmax_star),
        "dmin_star": _jsonable_float(cert.dmin_star),
        "r_j": _jsonable_float(radii.r_j),
        "r_A": radii.r_A,
        "kA_bound": kA_bound,
        "kN_bound": kN_bound,
        "kA_emp": kA,
        "kN_emp": kN,
        "kA_ratio": ratio(kA_bound, kA),
        "kN_ratio": ratio(kN_bound, kN),
        "notes": notes,
    }


def cmd_complexity(args) -> int:
    p, cert, extras = _load(args.instance)
    cert, mu = _certificate_and_mu(p, cert, extras)
    config = _collect_config(args)
    x0 = _start_point(p, cert, extras)
    rep = complexity_report(p, cert, mu, config, x0)
    if args.out:
        _write(Path(args.out), "report.json", report_json(rep))
    for key in ("C", "R0", "Gstar", "T", "fdec"):
        print(f"{key:10s} {rep['constants'][key]!r}")
    for key in ("r_j", "r_A", "kA_bound", "kN_bound", "kA_emp", "kN_emp", "kA_ratio", "kN_ratio"):
        print(f"{key:10s} {rep[key]!r}")
    for note in rep["notes"]:
        print(f"note: {note}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .zoo import acceptance_instances

    if args.param not in _KEYS:
        raise InputError(f"unknown parameter {args.param!r}")
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise InputError("--values is empty")
    base = _collect_config(args)
    if args.instance:
        p, cert, extras = _load(args.instance)
        items = [(p, cert, _start_point(p, cert, extras))]
    else:
        items = [(p, c, None) for p, c in acceptance_instances(args.count, base.seed)]
    base_values = _flatten(base)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([args.param, "instance", "status", "n_outer", "f", "gap", "kA_emp", "kN_emp"])
    rows = []
    for v in values:
        config = build_config(dict(base_values, **{args.param: v}))
        for p, cert, x0 in items:
            if x0 is None:
                from .zoo import default_x0

                x0 = default_x0(p, cert.x_star)
            try:
                trace, _ = solve(p, x0, config)
            except ContractError as exc:
                raise InputError(str(exc)) from None
            gap = kA = kN = None
            if cert is not None:
                gap = trace.final.f - cert.f_star
                try:
                    kA, kN = identification_detector(trace, cert)
                except ContractError:
                    pass
            row = [v, p.name, trace.status, trace.n_outer, repr(trace.final.f),
                   "" if gap is None else repr(gap), "" if kA is None else kA, "" if kN is None else kN]
            w.writerow(row)
            rows.append(dict(zip(["value", "instance", "status", "n_outer", "f", "gap", "kA_emp", "kN_emp"],
                                 [v, p.name, trace.status, trace.n_outer, trace.final.f, gap, kA, kN])))
    out = Path(args.out)
    _write(out, "sweep.csv", buf.getvalue())
    _write(out, "report.json", report_json({"param": args.param, "values": values, "runs": rows}))
    sys.stdout.write(buf.getvalue())
    return EXIT_OK


def _flatten(config: SolverConfig) -> dict:
    d = config.to_dict()
    a = d.pop("armijo")
    d.update(a)
    return {k: v for k, v in d.items() if k in _KEYS}


def cmd_export(args) -> int:
    from .instance_io import save_instance
    from .zoo import acceptance_instances, default_x0, e1

    if args.which == "e1":
        p, cert = e1()
        mu, x0 = 1.0, np.array([1.0, 0.0, 0.0])
    else:
        insts = acceptance_instances(max(args.count, args.index + 1), args.seed)
        p, cert = insts[args.index]
        mu, x0 = cert.extra["mu"], default_x0(p, cert.x_star)
    save_instance(args.out, p, cert, mu=mu, x0=x0)
    print(args.out)
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ac2cd", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve an instance and write trace files")
    s.add_argument("instance")
    s.add_argument("--out", default="out")
    _add_config_flags(s)
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("suite", help=f"one of: {', '.join(SUITES)}")
    v.add_argument("--trials", type=int, default=1000)
    v.add_argument("--count", type=int, default=50, help="number of seeded instances")
    v.add_argument("--workers", type=int, default=1)
    v.add_argument("--corrupt-lipschitz", action="store_true",
                   help="halve the Lipschitz tables (negative control)")
    v.add_argument("--out")
    _add_config_flags(v)
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("complexity", help="theory constants and identification bounds for an instance")
    c.add_argument("instance")
    c.add_argument("--out")
    _add_config_flags(c)
    c.set_defaults(func=cmd_complexity)

    w = sub.add_parser("sweep", help="solve over a list of values of one parameter")
    w.add_argument("--instance", help="instance JSON (default: the seeded acceptance set)")
    w.add_argument("--param", required=True)
    w.add_argument("--values", required=True, help="comma-separated values")
    w.add_argument("--count", type=int, default=10)
    w.add_argument("--out", default="out")
    _add_config_flags(w)
    w.set_defaults(func=cmd_sweep)

    e = sub.add_parser("export", help="write a built-in instance as JSON")
    e.add_argument("which", choices=("e1", "acceptance"))
    e.add_argument("--index", type=int, default=0)
    e.add_argument("--count", type=int, default=50)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("out")
    e.set_defaults(func=cmd_export)
    return ap


def main(argv=None) -> int:
    ap = make_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors, which would read as "iteration cap"
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except LineSearchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LINESEARCH


if __name__ == "__main__":
    sys.exit(main())
