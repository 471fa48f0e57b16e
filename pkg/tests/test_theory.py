import math

import numpy as np
import pytest

from ac2cd.exceptions import ContractError
from ac2cd.linesearch import ArmijoParams
from ac2cd.problem import BoxSimplexProblem, CallableObjective, QuadraticObjective, make_certificate
from ac2cd.theory import (
    LipschitzTable,
    RateConstants,
    Radii,
    complexity_bounds,
    identification_radii,
    lemma_suite,
    lipschitz_table_quadratic,
    lipschitz_table_sampled,
    rate_constants,
)
from ac2cd.zoo import acceptance_instances, e1, random_spd

# parameters of the hand-computed E1 chain
E1_PARAMS = ArmijoParams(gamma=0.1, delta=0.5, A_l=0.01, A_u=1.0)
SQRT072 = math.sqrt(0.72)


def test_table_identity():
    t = lipschitz_table_quadratic(np.eye(3))
    off = ~np.eye(3, dtype=bool)
    assert np.all(t.Lij[off] == 2.0) and np.all(np.diag(t.Lij) == 0.0)
    assert t.Lmax == 2.0 and t.Lbar == 4.0
    assert np.array_equal(t.Lj, [4.0, 4.0, 4.0])
    assert t.L == pytest.approx(1.0, rel=1e-12)


def test_table_diag():
    t = lipschitz_table_quadratic(np.diag([1.0, 3.0]))
    assert t.Lij[0, 1] == 4.0
    assert t.L == pytest.approx(3.0, rel=1e-12)


def test_table_rejects_asymmetric():
    with pytest.raises(ContractError):
        lipschitz_table_quadratic([[1.0, 0.5], [0.0, 1.0]])


def test_table_zero_entries_floored():
    # H = ones: every pair direction has zero curvature
    t = lipschitz_table_quadratic(np.ones((3, 3)) + np.diag([0.0, 0.0, 1.0]))
    assert t.Lij[0, 1] > 0 and t.Lij[0, 1] == pytest.approx(1e-12 * t.Lmax)


def test_table_local_le_twice_global():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(2, 9))
        H = random_spd(n, 0.1, float(rng.uniform(0.5, 5.0)), rng)
        t = lipschitz_table_quadratic(H)
        assert t.Lmax <= 2 * t.L + 1e-9
        assert t.Lbar <= (n - 1) * t.Lmax * (1 + 1e-12)
        assert t.L == pytest.approx(np.abs(np.linalg.eigvals(H)).max(), rel=1e-10)


def test_sampled_table_close_to_exact():
    p, _ = acceptance_instances(1, seed=2)[0]
    exact = lipschitz_table_quadratic(p.oracle.hessian())
    lo = np.where(np.isfinite(p.l), p.l, -1.0)
    hi = np.where(np.isfinite(p.u), p.u, 1.0)
    est = lipschitz_table_sampled(p.oracle, lo, hi, samples=20, seed=1)
    assert est.estimate
    off = ~np.eye(p.n, dtype=bool)
    assert np.allclose(est.Lij[off], exact.Lij[off], rtol=0.05)
    assert est.L <= exact.L * (1 + 1e-9)
    bigger = lipschitz_table_sampled(p.oracle, lo, hi, samples=20, seed=1, safety=1.1)
    assert np.all(bigger.Lij >= est.Lij)


def test_sampled_table_linear_objective():
    c = np.array([0.3, -1.0, 2.0])
    f = CallableObjective(lambda x: float(c @ x), lambda x, i: float(c[i]))
    t = lipschitz_table_sampled(f, np.zeros(3), np.ones(3), samples=5)
    off = ~np.eye(3, dtype=bool)
    assert np.all(t.Lij[off] > 0) and np.all(t.Lij[off] <= 1e-12)
    with pytest.raises(ContractError):
        lipschitz_table_sampled(f, np.zeros(3), np.ones(3), samples=1)


def e1_constants():
    p, cert = e1()
    table = lipschitz_table_quadratic(np.eye(3))
    rc = rate_constants(p, table, cert, f_x0=0.39, armijo=E1_PARAMS, mu=1.0)
    return p, cert, table, rc


def test_rate_constants_e1_chain():
    p, cert, table, rc = e1_constants()
    assert cert.f_star == pytest.approx(0.03, abs=1e-15)
    assert rc.R0 == pytest.approx(SQRT072, rel=1e-12)
    assert rc.Gstar == pytest.approx(0.3, rel=1e-12)
    assert rc.T == pytest.approx(100.0, rel=1e-12)
    # fdec = T R0 + 2 Lbar R0 + G* = 108 sqrt(0.72) + 0.3
    fdec = 108 * SQRT072 + 0.3
    assert rc.fdec == pytest.approx(fdec, rel=1e-12)
    assert rc.fdec == pytest.approx(91.94103884, rel=1e-9)
    # C = 3 A_u (n - 1) fdec^2 / (2 gamma) = 30 fdec^2
    assert rc.C == pytest.approx(30 * fdec ** 2, rel=1e-12)
    assert rc.C == pytest.approx(253594.6387, rel=1e-9)
    assert not rc.estimate


def test_rate_constants_branches():
    p, cert, table, _ = e1_constants()
    huge = ArmijoParams(A_l=1.0, A_u=1.0, gamma=0.1, delta=0.5)
    rc = rate_constants(p, table, cert, 0.39, huge, mu=1.0)
    assert rc.T == pytest.approx(2.0 / (2 * 0.5 * 0.9))
    with pytest.raises(ContractError):
        rate_constants(p, table, cert, 0.39, E1_PARAMS, mu=0.0)
    rc = rate_constants(p, table, cert, 0.39, E1_PARAMS, mu=0.0,
                        level_set_samples=[np.array([1.0, 0.0, 0.0])])
    assert rc.estimate and rc.R0 > 0


def test_gstar_zero_for_interior_optimum():
    p = BoxSimplexProblem(1.5, np.zeros(3), np.ones(3), QuadraticObjective(np.eye(3), np.zeros(3)))
    cert = make_certificate(p, np.full(3, 0.5))
    table = lipschitz_table_quadratic(np.eye(3))
    rc = rate_constants(p, table, cert, p.f(np.full(3, 0.5)), E1_PARAMS, mu=1.0)
    assert rc.Gstar == 0.0 and rc.R0 == 0.0 and rc.fdec == 0.0 and rc.C == 0.0


def test_rate_constant_monotone():
    p, cert, table, rc = e1_constants()
    bigger_Au = rate_constants(p, table, cert, 0.39, ArmijoParams(A_l=0.01, A_u=2.0), mu=1.0)
    assert bigger_Au.C >= rc.C
    farther = rate_constants(p, table, cert, 0.5, E1_PARAMS, mu=1.0)
    assert farther.C >= rc.C
    steeper = rate_constants(p, table.scaled(2.0), cert, 0.39, E1_PARAMS, mu=1.0)
    assert steeper.C >= rc.C


def test_radii_e1():
    _, cert, table, _ = e1_constants()
    r = identification_radii(cert, table, table.L, E1_PARAMS, tau=1.0)
    assert r.r_j == pytest.approx(0.3, rel=1e-12)
    assert r.r_A == pytest.approx(0.3 / 102, rel=1e-12)
    small = [identification_radii(cert, table, table.L, E1_PARAMS, tau=t).r_j for t in (1e-6, 0.1, 0.5, 1.0)]
    assert small == sorted(small) and small[0] < 1e-6
    with pytest.raises(ContractError):
        identification_radii(cert, table, table.L, E1_PARAMS, tau=0.0)


def test_radii_without_strict_active():
    p = BoxSimplexProblem(1.5, np.zeros(3), np.ones(3), QuadraticObjective(np.eye(3), np.zeros(3)))
    cert = make_certificate(p, np.full(3, 0.5))
    r = identification_radii(cert, lipschitz_table_quadratic(np.eye(3)), 1.0, E1_PARAMS, 0.5)
    assert r.r_A is None


def test_complexity_bounds_e1():
    _, cert, table, rc = e1_constants()
    radii = identification_radii(cert, table, table.L, E1_PARAMS, tau=1.0)
    kA, kN = complexity_bounds(rc, radii, cert.dmin_star)
    C = 30 * (108 * SQRT072 + 0.3) ** 2
    # r_A^-2 = (102 / 0.3)^2 = 115600 dominates r_j^-2 = 11.1
    assert kA == math.floor(2 * C * 115600.0) + 1
    assert kA == 58631080468
    assert kN == math.floor(2 * C / 0.16) + 1
    assert kN == 3169933
    assert isinstance(kA, int) and isinstance(kN, int)


def test_complexity_bounds_degenerate_and_errors():
    rc0 = RateConstants(R0=0.0, Gstar=0.0, T=1.0, fdec=0.0, C=0.0, mu=1.0, n=3)
    assert complexity_bounds(rc0, Radii(0.3, 0.01), 0.4) == (1, 1)
    rc_bad = RateConstants(R0=0.0, Gstar=0.0, T=1.0, fdec=0.0, C=0.0, mu=0.0, n=3)
    with pytest.raises(ContractError):
        complexity_bounds(rc_bad, Radii(0.3, 0.01), 0.4)
    assert complexity_bounds(rc0, Radii(0.3, None), None) == (None, None)


def test_lemma_suite_e1_clean():
    p, _ = e1()
    rep = lemma_suite(p, lipschitz_table_quadratic(np.eye(3)), trials=1000, seed=0)
    assert rep["ok"], rep
    assert all(v <= 1e-9 for v in rep["max_violation"].values())


def test_lemma_suite_detects_corrupted_table():
    p, _ = e1()
    bad = lipschitz_table_quadratic(np.eye(3)).scaled(0.5)
    rep = lemma_suite(p, bad, trials=300, seed=0)
    assert not rep["ok"]
    assert rep["violations"]["lips_const"] > 0


def test_lemma_suite_on_quadratics():
    for p, _ in acceptance_instances(10, seed=1):
        rep = lemma_suite(p, lipschitz_table_quadratic(p.oracle.hessian()), trials=200, seed=3)
        assert rep["ok"], (p.name, rep)


def test_table_to_dict():
    d = LipschitzTable(1.0, np.array([[0.0, 2.0], [2.0, 0.0]])).to_dict()
    assert d["Lmax"] == 2.0 and d["Lbar"] == 2.0 and d["Lj"] == [2.0, 2.0]
