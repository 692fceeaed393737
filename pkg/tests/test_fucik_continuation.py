import numpy as np
import pytest

from fucik_lab.assembly import cross_term, energy
from fucik_lab.errors import ContinuationError
from fucik_lab.fucik_continuation import (CurveSample, FucikPoint, fucik_residual,
                                          semismooth_newton, sign_changes, trivial_lines_check,
                                          validate_curve)
from fucik_lab.fucik_minimax import J_p


def test_zero_p_is_second_eigenpair(gp128, lumped128):
    e2 = lumped128[1]
    q = semismooth_newton(gp128, 0.0, e2.vector + 1e-3 * np.sin(np.arange(gp128.n)), e2.value)
    assert q.iterations <= 3
    assert q.t == pytest.approx(e2.value, rel=1e-12)


def test_positive_part_energy_identity(gp128, curve128):
    q = curve128.at(2.0)
    up, um = np.maximum(q.u, 0), np.maximum(-q.u, 0)
    lhs = energy(gp128, up) + 2 * cross_term(gp128, up, um)
    rhs = q.alpha * np.dot(gp128.lumped * up, up)
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_quadratic_tail(gp128, lumped128):
    e2 = lumped128[1]
    seed = e2.vector + 0.05 * np.cos(3 * np.arange(gp128.n) / gp128.n)
    q = semismooth_newton(gp128, 1.5, seed, e2.value - 0.5, tol=1e-13)
    h = [r for r in q.history if r > 1e-13]
    assert len(h) >= 3
    r0, r1 = h[-2], h[-1]
    assert r1 <= 10 * r0 ** 2 or r1 < 1e-11


def test_seed_must_change_sign(gp128, lumped128):
    with pytest.raises(ValueError):
        semismooth_newton(gp128, 1.0, lumped128[0].vector, 10.0)


def test_max_iter_carries_last_iterate(gp128, lumped128):
    with pytest.raises(ContinuationError) as info:
        semismooth_newton(gp128, 3.0, lumped128[1].vector + 0.3, 10.0, max_iter=1)
    u, t = info.value.last
    assert u.shape == (gp128.n,)


def test_curve_invariants(gp128, curve128):
    assert not curve128.truncated
    assert len(curve128.points) == 51
    rep = validate_curve(curve128)
    assert rep.passed, rep.checks
    b = curve128.beta
    assert np.all(b > curve128.lam1)
    assert np.all(curve128.alpha >= b)


def test_point_invariants(gp128, curve128):
    for q in curve128.points:
        assert q.alpha == pytest.approx(q.p + q.t, abs=1e-12)
        assert q.beta == q.t
        assert q.residual <= 1e-8
        assert q.u.max() > 0 > q.u.min()
        assert abs(q.t - J_p(gp128, q.p, q.u)) <= 1e-8 * max(1.0, q.t)
    assert curve128.points[0].sign_changes == 1


def test_mirror_points(gp128, curve128):
    for q in curve128.mirror():
        assert fucik_residual(gp128, q.alpha, q.beta, q.u) <= 1e-8
        assert q.alpha == pytest.approx(q.p + q.t, abs=1e-12)


def _fake_curve(betas, lam1=1.0):
    pts = [FucikPoint(p + b, b, p, b, np.array([1.0, -1.0]), 0.0, "continuation")
           for p, b in zip(np.arange(len(betas)) * 0.5, betas)]
    return CurveSample(pts, lam1, betas[0])


def test_constant_curve_fails_monotone():
    rep = validate_curve(_fake_curve([5.0, 5.0, 5.0]))
    assert not rep["monotone"].passed
    assert rep["lipschitz"].passed


def test_curve_below_lam1_fails_lower_bound():
    rep = validate_curve(_fake_curve([5.0, 4.0, 0.5]))
    assert not rep["lower_bound"].passed
    assert rep["lower_bound"].witness == (2,)
    assert not rep["lipschitz"].passed


def test_validate_needs_three_samples():
    with pytest.raises(ValueError):
        validate_curve(_fake_curve([5.0, 4.9]))


def test_trivial_lines(gp128, lumped128):
    lam1 = lumped128[0].value
    rep = trivial_lines_check(gp128, [0.0, lam1, 1e3])
    assert rep.passed
    vals = {c.worst for c in rep.checks}
    assert len(vals) == 1  # beta-independence is exact


def test_sign_changes_counts():
    assert sign_changes([1.0, 2.0, -1.0, -3.0, 4.0]) == 2
    assert sign_changes([1.0, 0.0, 1.0]) == 0
