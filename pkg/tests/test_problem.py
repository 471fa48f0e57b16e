import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ac2cd.exceptions import ContractError, UndefinedQuantityError
from ac2cd.problem import (
    BoxSimplexProblem,
    CallableObjective,
    QuadraticObjective,
    SolutionCertificate,
    active_sets,
    assumption1_violations,
    distance_to_bound,
    dmax_dmin_star,
    is_feasible,
    kkt_certificate,
    make_certificate,
    max_distance,
    zeta,
)
from ac2cd.reference import project_onto_feasible
from ac2cd.zoo import acceptance_instances, e1, gen_quadratic_designed


@pytest.fixture
def E1():
    return e1()


def box(n=2, lo=0.0, hi=1.0, H=None, c=None, b=1.0):
    H = np.eye(n) if H is None else H
    c = np.zeros(n) if c is None else c
    return BoxSimplexProblem(b, np.full(n, lo), np.full(n, hi), QuadraticObjective(H, c))


def test_problem_validation():
    q = QuadraticObjective(np.eye(2), np.zeros(2))
    with pytest.raises(ContractError):
        BoxSimplexProblem(1.0, [0.0, 1.0], [1.0, 1.0], q)
    with pytest.raises(ContractError):
        BoxSimplexProblem(1.0, [0.0], [1.0], QuadraticObjective(np.eye(1), [0.0]))
    with pytest.raises(ContractError):
        BoxSimplexProblem(1.0, [0.0, np.inf], [1.0, np.inf], q)
    with pytest.raises(ContractError):
        BoxSimplexProblem(1.0, [0, 0, 0], [1, 1, 1], q)
    with pytest.raises(ContractError):
        QuadraticObjective([[1.0, 2.0], [0.0, 1.0]], [0.0, 0.0])


def test_is_feasible(E1):
    p, _ = E1
    assert is_feasible(p, [0.4, 0.6, 0.0], 1e-12)
    assert not is_feasible(p, [0.5, 0.6, 0.0], 1e-12)
    assert not is_feasible(p, [1.2, 0.1, -0.3], 1e-12)
    with pytest.raises(ContractError):
        is_feasible(p, [1.0, 0.0], 1e-12)


def test_distance_to_bound():
    p = BoxSimplexProblem(1.0, [0.0, 0.0, 0.0], [1.0, np.inf, 1.0],
                          QuadraticObjective(np.eye(3), np.zeros(3)))
    x = np.array([0.3, 0.4, 0.3])
    assert distance_to_bound(p, x, 0) == pytest.approx(0.3)
    assert distance_to_bound(p, x, 1) == pytest.approx(0.4)
    assert distance_to_bound(p, np.array([0.5, 0.0, 0.5]), 2) == 0.5
    free = BoxSimplexProblem(0.0, [-np.inf, 0.0], [np.inf, 1.0], QuadraticObjective(np.eye(2), np.zeros(2)))
    assert distance_to_bound(free, np.array([-0.5, 0.5]), 0) == math.inf


def test_max_distance(E1):
    p, _ = E1
    assert max_distance(p, [1.0, 0.0, 0.0]) == 1.0
    assert max_distance(p, [0.4, 0.6, 0.0]) == pytest.approx(0.6)
    q = box(4, 0.0, 2.0, b=4.0)
    assert max_distance(q, np.ones(4)) == 1.0


def test_kkt_certificate_e1(E1):
    p, _ = E1
    kc = kkt_certificate(p, [0.4, 0.6, 0.0], 1e-12)
    assert kc.lambda_hat == pytest.approx(-0.1, abs=1e-15)
    assert kc.residual <= 1e-15
    assert kc.classification == ["interior", "interior", "at_lower"]
    kc = kkt_certificate(p, [1.0, 0.0, 0.0], 1e-12)
    assert kc.lambda_hat == pytest.approx(0.5)
    assert kc.residual == pytest.approx(1.2)


def test_kkt_certificate_constant_gradient():
    # gradient H x + c equals 0.7 e at the midpoint
    p = box(3, 0.0, 1.0, c=np.full(3, 0.7) - 0.5, b=1.5)
    kc = kkt_certificate(p, np.full(3, 0.5), 1e-12)
    assert kc.lambda_hat == pytest.approx(0.7)
    assert kc.residual <= 1e-15


def test_active_sets_e1(E1):
    p, _ = E1
    A, Ap = active_sets(p, np.array([0.4, 0.6, 0.0]), -0.1, 1e-9)
    assert A == {2} and Ap == {2}
    A, Ap = active_sets(p, np.array([1 / 3, 1 / 3, 1 / 3]), 0.0, 1e-9)
    assert A == set() and Ap == set()


def test_active_sets_degenerate():
    p, cert = gen_quadratic_designed(4, 3, active_pattern=["lower", "free", "upper", "free"],
                                     margins=[0.0, 0.0, 0.4, 0.0])
    A, Ap = active_sets(p, cert.x_star, cert.lambda_star, 1e-9)
    assert A == {0, 2}
    assert Ap == {2}
    assert cert.degenerate


def test_zeta_and_dstar(E1):
    p, cert = E1
    assert zeta(p, cert) == pytest.approx(0.3)
    dmax, dmin = dmax_dmin_star(p, cert)
    assert dmax == pytest.approx(0.6)
    assert dmin == pytest.approx(0.4)
    p2, c2 = gen_quadratic_designed(4, 1, active_pattern=["lower", "upper", "free", "free"],
                                    margins=[0.3, 0.1, 0.0, 0.0])
    assert zeta(p2, c2) == pytest.approx(0.1, abs=1e-12)


def test_zeta_undefined_without_strict_active():
    p = box(3, 0.0, 1.0, b=1.5)
    cert = make_certificate(p, np.full(3, 0.5))
    assert cert.strict_active == frozenset()
    with pytest.raises(UndefinedQuantityError):
        zeta(p, cert)
    dmax, dmin = dmax_dmin_star(p, cert)
    assert dmax == dmin == 0.5


def test_dmin_undefined_when_all_active():
    p = box(2, 0.0, 1.0, b=1.0)
    cert = make_certificate(p, np.array([1.0, 0.0]), lam=0.0)
    with pytest.raises(UndefinedQuantityError):
        dmax_dmin_star(p, cert)


def test_designed_certificates_reproduced():
    for p, cert in acceptance_instances(10, seed=5):
        A, Ap = active_sets(p, cert.x_star, cert.lambda_star, 1e-9)
        assert A == cert.active and Ap == cert.strict_active
        assert kkt_certificate(p, cert.x_star, 1e-10).residual <= 1e-9


def test_kkt_residual_positive_away_from_optimum():
    for p, cert in acceptance_instances(10, seed=6):
        rng = np.random.default_rng(0)
        x = project_onto_feasible(p, cert.x_star + rng.normal(size=p.n))
        if p.f(x) - cert.f_star > 1e-6 * (1 + abs(cert.f_star)):
            assert kkt_certificate(p, x, 1e-8).residual > 0


def test_certificate_roundtrip(E1):
    _, cert = E1
    back = SolutionCertificate.from_dict(cert.to_dict())
    assert np.array_equal(back.x_star, cert.x_star)
    assert back.active == cert.active and back.strict_active == cert.strict_active
    assert back.dmax_star == cert.dmax_star and back.zeta == cert.zeta


def test_callable_objective_matches_quadratic():
    H = np.array([[2.0, 0.5], [0.5, 1.0]])
    c = np.array([0.1, -0.3])
    q = QuadraticObjective(H, c)
    f = CallableObjective(q.value, q.partial)
    x = np.array([0.3, 0.7])
    assert f.value(x) == q.value(x)
    assert np.allclose(f.gradient(x), q.gradient(x), rtol=1e-12, atol=0)


def test_assumption1_check():
    # concave f: both vertices (1, 0) and (0, 1) lie below f(0.5, 0.5)
    p = box(2, 0.0, 1.0, H=-np.eye(2))
    assert len(assumption1_violations(p, np.array([0.5, 0.5]))) == 2
    p, cert = e1()
    assert assumption1_violations(p, np.array([1.0, 0.0, 0.0])) == []


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000), t1=st.floats(1e-12, 1e-2), t2=st.floats(1e-12, 1e-2))
def test_active_sets_monotone_in_tol(seed, t1, t2):
    lo, hi = sorted((t1, t2))
    rng = np.random.default_rng(seed)
    p, cert = gen_quadratic_designed(5, seed)
    # perturb x* slightly so some coordinates sit near, not on, their bounds
    x = cert.x_star + rng.normal(scale=1e-4, size=5) * rng.integers(0, 2, size=5)
    A_lo, Ap_lo = active_sets(p, x, cert.lambda_star, lo)
    A_hi, _ = active_sets(p, x, cert.lambda_star, hi)
    assert A_lo <= A_hi
    assert Ap_lo <= A_lo
