"""JSON documents for problem instances and their certificates.

Layout::

    {"name": ..., "n": 3, "b": 1.0, "l": [...], "u": [...],
     "objective": {"kind": "quadratic", "H": [[...]], "c": [...], "constant": 0.0},
     "mu": 1.0, "x0": [...], "certificate": {...}}

``objective`` may instead be ``{"kind": "factored", "Q": [[...]], "q": [...]}``
for f(x) = x'Q'Qx - q'x. Infinite bounds are the strings "inf" / "-inf".
``mu``, ``x0`` and ``certificate`` are optional.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .exceptions import ContractError
from .problem import (
    BoxSimplexProblem,
    FactoredQuadraticObjective,
    QuadraticObjective,
    SolutionCertificate,
)


def _enc_vec(v) -> list:
    return [("inf" if x == math.inf else "-inf" if x == -math.inf else float(x)) for x in v]


def _dec_vec(v, what: str) -> np.ndarray:
    if not isinstance(v, list):
        raise ContractError(f"{what} must be a list")
    out = []
    for x in v:
        if isinstance(x, str):
            if x not in ("inf", "-inf"):
                raise ContractError(f"{what}: unexpected string {x!r}")
            out.append(float(x))
        elif isinstance(x, (int, float)) and not isinstance(x, bool):
            out.append(float(x))
        else:
            raise ContractError(f"{what}: entries must be numbers or 'inf'/'-inf'")
    return np.array(out, dtype=float)


def _matrix(v, what: str) -> np.ndarray:
    try:
        a = np.array(v, dtype=float)
    except (TypeError, ValueError):
        raise ContractError(f"{what} must be a numeric matrix") from None
    if a.ndim != 2:
        raise ContractError(f"{what} must be two-dimensional")
    return a


def objective_from_dict(d: dict):
    if not isinstance(d, dict):
        raise ContractError("objective must be an object")
    kind = d.get("kind")
    if kind == "quadratic":
        return QuadraticObjective(_matrix(d["H"], "H"), _dec_vec(d["c"], "c"), float(d.get("constant", 0.0)))
    if kind == "factored":
        return FactoredQuadraticObjective(_matrix(d["Q"], "Q"), _dec_vec(d["q"], "q"))
    raise ContractError(f"unknown objective kind {kind!r}")


def problem_to_dict(p: BoxSimplexProblem, cert: SolutionCertificate = None, mu: float = None,
                    x0=None) -> dict:
    if not hasattr(p.oracle, "to_dict"):
        raise ContractError("objective cannot be serialized")
    d = {
        "name": p.name,
        "n": p.n,
        "b": p.b,
        "l": _enc_vec(p.l),
        "u": _enc_vec(p.u),
        "objective": p.oracle.to_dict(),
    }
    if mu is not None:
        d["mu"] = float(mu)
    if x0 is not None:
        d["x0"] = [float(v) for v in x0]
    if cert is not None:
        d["certificate"] = cert.to_dict()
    return d


def problem_from_dict(d: dict):
    """Return ``(problem, certificate or None, extras)``; extras holds mu and x0."""
    if not isinstance(d, dict):
        raise ContractError("instance document must be a JSON object")
    for key in ("b", "l", "u", "objective"):
        if key not in d:
            raise ContractError(f"instance is missing {key!r}")
    try:
        l = _dec_vec(d["l"], "l")
        u = _dec_vec(d["u"], "u")
        oracle = objective_from_dict(d["objective"])
        p = BoxSimplexProblem(float(d["b"]), l, u, oracle, name=str(d.get("name", "")))
    except (KeyError, TypeError) as exc:
        raise ContractError(f"malformed instance: {exc}") from None
    if "n" in d and int(d["n"]) != p.n:
        raise ContractError(f"n = {d['n']} does not match the bounds (length {p.n})")
    cert = None
    if d.get("certificate") is not None:
        try:
            cert = SolutionCertificate.from_dict(d["certificate"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ContractError(f"malformed certificate: {exc}") from None
    extras = {}
    if d.get("mu") is not None:
        extras["mu"] = float(d["mu"])
    if d.get("x0") is not None:
        x0 = _dec_vec(d["x0"], "x0")
        if x0.shape != (p.n,):
            raise ContractError("x0 has the wrong length")
        extras["x0"] = x0
    return p, cert, extras


def save_instance(path, p: BoxSimplexProblem, cert: SolutionCertificate = None, mu: float = None,
                  x0=None) -> None:
    with open(path, "w") as fh:
        json.dump(problem_to_dict(p, cert, mu, x0), fh, indent=1, allow_nan=False)
        fh.write("\n")


def load_instance(path):
    try:
        with open(path) as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ContractError(f"{path}: invalid JSON ({exc})") from None
    return problem_from_dict(d)
