"""Initial stepsize and Armijo backtracking for two-coordinate moves.

A move along ``d = g (e_p - e_j)`` increases x_p and decreases x_j by the
same amount ``alpha * g``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass

from .exceptions import ContractError, LineSearchError


class Strategy(str, enum.Enum):
    FIXED_CLAMP = "FixedClamp"
    INTERIORITY_PRESERVING = "InteriorityPreserving"


@dataclass(frozen=True)
class ArmijoParams:
    gamma: float = 0.1
    delta: float = 0.5
    A_l: float = 1e-8
    A_u: float = 1.0
    epsilon: float = 0.5
    strategy: Strategy = Strategy.INTERIORITY_PRESERVING
    max_backtracks: int = 60

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if not 0 < self.gamma < 1:
            raise ContractError("gamma must lie in (0, 1)")
        if not 0 < self.delta < 1:
            raise ContractError("delta must lie in (0, 1)")
        if not 0 < self.A_l <= self.A_u < math.inf:
            raise ContractError("need 0 < A_l <= A_u < inf")
        if not 0 < self.epsilon < 1:
            raise ContractError("epsilon must lie in (0, 1)")
        if self.max_backtracks < 0:
            raise ContractError("max_backtracks must be nonnegative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["strategy"] = self.strategy.value
        return d


@dataclass
class StepRecord:
    p: int
    g: float
    alpha_bar: float
    A: float
    Delta: float
    alpha: float
    backtracks: int
    hit_boundary: bool

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "g": self.g,
            "alpha_bar": _json_float(self.alpha_bar),
            "A": _json_float(self.A),
            "Delta": self.Delta,
            "alpha": self.alpha,
            "backtracks": self.backtracks,
            "hit_boundary": self.hit_boundary,
        }


def _json_float(v: float):
    return "inf" if v == math.inf else v


def _room(p, z, pk: int, j: int, g: float):
    """Room (in coordinate units) on the p side and on the j side for sign(g)."""
    if g > 0:
        return p.u[pk] - z[pk], z[j] - p.l[j]
    return z[pk] - p.l[pk], p.u[j] - z[j]


def max_feasible_stepsize(p, z, pk: int, j: int, g: float) -> float:
    """Largest feasible alpha along g (e_pk - e_j); zero when g == 0."""
    if pk == j:
        raise ContractError("pk must differ from j")
    if g == 0:
        return 0.0
    room_p, room_j = _room(p, z, pk, j, g)
    return float(min(room_p, room_j)) / abs(g)


def interiority_cap(p, z, j: int, g: float, epsilon: float) -> float:
    """Stepsize at which D_j shrinks to epsilon * D_j(z); may be +inf."""
    if g == 0:
        raise ContractError("interiority cap is defined only for g != 0")
    below = float(z[j] - p.l[j])
    above = float(p.u[j] - z[j])
    if not (below > 0 and above > 0):
        raise ContractError("x_j must be strictly inside its bounds")
    D = min(below, above)
    if D == math.inf:
        return math.inf
    if g > 0:
        # x_j decreases
        if D == below:
            return (1.0 - epsilon) * D / g
        return (below - epsilon * D) / g
    if D == above:
        return (1.0 - epsilon) * D / -g
    return (above - epsilon * D) / -g


def choose_A(p, z, pk: int, j: int, g: float, params: ArmijoParams) -> float:
    if params.strategy is Strategy.FIXED_CLAMP or g == 0:
        return params.A_u
    return float(min(interiority_cap(p, z, j, g, params.epsilon), params.A_u))


def armijo(p, z, d, Delta: float, dir_deriv: float, params: ArmijoParams, f_change=None):
    """Backtrack from Delta until the sufficient-decrease test passes.

    ``f_change(alpha)`` must return f(z + alpha d) - f(z); by default it is
    computed from two objective evaluations. Returns ``(alpha, backtracks)``.
    """
    if Delta < 0:
        raise ContractError("Delta must be nonnegative")
    if Delta == 0:
        return 0.0, 0
    if dir_deriv >= 0:
        raise LineSearchError(f"not a descent direction (dir_deriv={dir_deriv!r})")
    if f_change is None:
        f0 = p.f(z)

        def f_change(alpha):
            return p.f(z + alpha * d) - f0

    alpha = Delta
    for m in range(params.max_backtracks + 1):
        if f_change(alpha) <= params.gamma * alpha * dir_deriv:
            return alpha, m
        alpha *= params.delta
    raise LineSearchError(
        f"Armijo test failed after {params.max_backtracks} backtracks (Delta={Delta!r}, dir_deriv={dir_deriv!r})"
    )
