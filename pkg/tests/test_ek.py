from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest

from ssmlab.ek import (
    Annulus,
    DomainError,
    SolverError,
    compute_constants,
    ek_step_uniqueness,
    ek_trace,
    random_blocks,
    random_trace,
    recover_theta,
    solve_exact,
    theta_approximation_error,
    theta_power,
    trace_suite,
)

ANN = Annulus(1.1, 2.0, 0.05)
UNIT = (1, 1, 1, 1, 1, 2)


@pytest.fixture(scope="module")
def const():
    return compute_constants(ANN, {1: 1, 2: 1})


def _forward(theta, z0):
    return [(theta**j * z0).real for j in range(4)], (theta**3 * z0).imag


# recovering theta ------------------------------------------------------------------------

@pytest.mark.parametrize("theta,z0,x,y3", [
    (2j, 10, [10, 0, -40, 0], -80),
    (1 + 1j, 20, [20, 20, 0, -40], 40),
])
def test_recover_theta_examples(theta, z0, x, y3):
    fx, fy = _forward(theta, z0)
    assert np.allclose(fx, x) and fy == pytest.approx(y3)
    rec = recover_theta(x)
    assert rec.theta == pytest.approx(theta, abs=1e-9)
    assert rec.y3 == pytest.approx(y3, abs=1e-7)
    assert rec.residual < 1e-9
    ex = solve_exact(x)
    assert ex.exact and (ex.re, ex.im, ex.y3) == (theta.real, theta.imag, y3)


def test_recover_theta_random_and_lipschitz(const):
    rng = np.random.default_rng(3)
    for _ in range(30):
        theta = ANN.sample(rng)
        z0 = const.R0 * (1 + 3 * rng.random()) * np.exp(2j * np.pi * rng.random())
        x, y3 = _forward(theta, z0)
        rec = recover_theta(x)
        assert rec.theta == pytest.approx(theta, abs=1e-8)
        d = rng.uniform(-1e-6, 1e-6, 4)
        moved = recover_theta(np.asarray(x) + d)
        # derivative bound: each coordinate moves theta by at most D / |z0|
        assert abs(moved.theta - rec.theta) <= 4 * const.D / abs(z0) * 1e-6 * 1.01 + 1e-12


def test_recover_theta_errors():
    with pytest.raises(SolverError):
        solve_exact([1, 1, 1, 1])
    with pytest.raises(SolverError):
        recover_theta([1, 2, 4, 8], starts=2, max_iter=5)


# traces ------------------------------------------------------------------------------------

def test_trace_unit_blocks_against_direct_evaluation():
    tr = ek_trace(2j, {1: 1, 2: 1}, [UNIT] * 4, 1)
    assert tr.exact and tr.M == 3
    theta2 = 2j
    for n in range(tr.M):
        Theta = (2j) ** (6 * n)
        for j in range(1, 6):
            v = (Theta * theta2 * (2j) ** j).real
            assert tr.K[n][j - 1] == round(v) and tr.eps[n][j - 1] == 0


def test_trace_invariants():
    rng = np.random.default_rng(11)
    for kind in ("float", "complex", "exact"):
        for _ in range(3):
            tr = random_trace(rng, ANN, 10, kind)
            assert all(abs(e) <= 0.5 for row in tr.eps for e in row)
            with mpmath.workprec(tr.prec):
                for n in range(tr.M):
                    ratio = tr.Theta[n + 1] / tr.Theta[n]
                    want = mpmath.mpc(theta_power(tr.theta, tr.step_beta(n)))
                    assert abs(ratio / want - 1) < 1e-10
                    for j in range(5):
                        assert tr.z[n][j].real - tr.K[n][j] == pytest.approx(tr.eps[n][j], abs=1e-12)


def test_trace_ties_go_to_even():
    # theta = 1/2 + i: Re(theta^k) hits half-integers
    tr = ek_trace(0.5 + 1.5j, {1: 1, 2: 1}, [UNIT] * 3, 1)
    for row_k, row_z in zip(tr.K, tr.z):
        for k, z in zip(row_k, row_z):
            frac = z.real - math.floor(z.real)
            if frac == 0.5:
                assert k % 2 == 0


def test_trace_domain_errors():
    with pytest.raises(DomainError):
        ek_trace(2j, {1: 1, 2: 1}, [UNIT] * 3, 0.5)
    with pytest.raises(DomainError):
        ek_trace(2j, {1: 1, 2: 1}, [UNIT] * 3, 2.0**7)
    with pytest.raises(DomainError):
        ek_trace(3j, {1: 1, 2: 1}, [UNIT] * 3, 1, annulus=ANN)
    with pytest.raises(ValueError):
        ek_trace(2j, {1: 1, 2: 1}, [(1, 2)] * 3, 1)


def test_random_blocks_shape():
    blocks = random_blocks(np.random.default_rng(0), 20)
    assert len(blocks) == 20
    for b in blocks:
        # 1^5 2 occurs exactly once, at the end
        assert b[-6:] == UNIT
        assert all(b[i : i + 6] != UNIT for i in range(len(b) - 6))


# approximation and step checks ---------------------------------------------------------------

def test_constants_thresholds(const):
    assert const.C4 == pytest.approx((1 + 3 * const.b) * (1 + 8 * const.C3))
    assert 1 <= const.n1 <= const.n2 <= const.n3
    assert float(const.rho(6)) == pytest.approx(1 / (2 * float(const.B(6))))


def test_approximation_error_exact_trace(const):
    M = const.n3 + 3
    tr = ek_trace(2j, {1: 1, 2: 1}, [UNIT] * (M + 1), 1)
    for n in range(const.n2, M):
        c = theta_approximation_error(tr, n, const)
        assert c.lhs == 0 and c.holds
    with pytest.raises(ValueError):
        theta_approximation_error(tr, const.n2 - 1, const)


def test_approximation_error_generic(const):
    theta = 1.2 + 0.9j
    blocks = random_blocks(np.random.default_rng(8), 13)
    tr = ek_trace(theta, {1: 1, 2: 1}, blocks, 1.3 + 0.4j, annulus=ANN)
    lhs = []
    for n in range(max(const.n2, 2), tr.M):
        c = theta_approximation_error(tr, n, const)
        assert c.holds
        lhs.append((n, c.lhs, tr.log_abs_theta_tau(n)))
    # error shrinks with |Theta_n|: regress log error on log|Theta_n tau|
    pts = [(lt, math.log(e)) for _, e, lt in lhs if e > 0]
    if len(pts) >= 3:
        slope = np.polyfit(*zip(*pts), 1)[0]
        assert slope < -0.5


def test_step_uniqueness_exact_trace(const):
    M = const.n3 + 3
    tr = ek_trace(1 + 1j, {1: 1, 2: 1}, [UNIT] * (M + 1), 1)
    for n in range(const.n3, M - 1):
        s = ek_step_uniqueness(tr, n, const)
        assert s.unique_required and s.unique_ok and s.holds
        assert s.predicted == [float(k) for k in tr.K[n + 1]]


def test_step_candidate_count_generic(const):
    rng = np.random.default_rng(4)
    tr = random_trace(rng, ANN, const.n3 + 4, "float")
    for n in range(const.n3, tr.M - 1):
        s = ek_step_uniqueness(tr, n, const)
        assert s.count_ok and s.bound_ok and s.count <= 2 * s.B + 1


def test_trace_suite_small(const):
    rep = trace_suite(12, 1, ANN, const, exact_count=4, complex_count=3)
    assert rep.traces == 12 and not rep.failures
    assert rep.eps_ok and rep.approx_ok and rep.count_ok and rep.bound_ok and rep.unique_ok
    assert rep.unique_cases >= 1
