import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fucik_lab.errors import MinimaxError
from fucik_lab.fucik_minimax import (J_p, MinimaxOptions, c_of_p, criticality_norm,
                                     deform_path, grad_Jp, initial_path, on_sphere,
                                     ring_minimum, sphere_point)


@pytest.fixture(scope="module")
def phis(lumped128):
    return np.array(lumped128[0].vector), np.array(lumped128[1].vector)


@pytest.mark.parametrize("p", [0.0, 1.0, 5.0, 37.5])
def test_endpoint_values(gp128, lumped128, phis, p):
    lam1 = lumped128[0].value
    assert J_p(gp128, p, phis[0]) == pytest.approx(lam1 - p, abs=1e-10)
    assert J_p(gp128, p, -phis[0]) == pytest.approx(lam1, abs=1e-10)


def test_negative_p_rejected(gp32):
    with pytest.raises(ValueError):
        J_p(gp32, -1.0, np.ones(31))


@given(seed=st.integers(0, 2**32 - 1))
def test_rayleigh_lower_bound_at_zero(gp128, lumped128, seed):
    u = sphere_point(gp128, np.random.default_rng(seed).standard_normal(gp128.n))
    assert J_p(gp128, 0.0, u) >= lumped128[0].value - 1e-10


def test_gradient_central_differences(gp128, rng):
    for _ in range(20):
        u = rng.standard_normal(gp128.n)
        v = rng.standard_normal(gp128.n)
        g = grad_Jp(gp128, 2.0, u) @ v
        for eps in (1e-4, 1e-5):
            fd = (J_p(gp128, 2.0, u + eps * v) - J_p(gp128, 2.0, u - eps * v)) / (2 * eps)
            assert fd == pytest.approx(g, rel=1e-6)


def test_gradient_trivial_cases(gp128, rng):
    u = -np.abs(rng.standard_normal(gp128.n)) - 0.1
    assert np.array_equal(grad_Jp(gp128, 3.0, u), 2 * (gp128.A @ u))
    w = rng.standard_normal(gp128.n)
    assert np.allclose(grad_Jp(gp128, 3.0, 2 * w), 2 * grad_Jp(gp128, 3.0, w), rtol=1e-13,
                       atol=1e-11)


@pytest.mark.parametrize("p", [0.0, 2.0])
def test_criticality_at_principal(gp128, phis, p):
    for u in (phis[0], -phis[0]):
        t, c = criticality_norm(gp128, p, u)
        assert c < 1e-9
        assert t == pytest.approx(J_p(gp128, p, u), rel=1e-12)


def test_criticality_positive_at_random(gp128, rng):
    u = sphere_point(gp128, rng.standard_normal(gp128.n))
    t, c = criticality_norm(gp128, 1.0, u)
    assert c > 1e-2
    assert t == pytest.approx(J_p(gp128, 1.0, u), rel=1e-12)


@pytest.mark.parametrize("kind", ["bezier", "great-circle"])
def test_initial_path_geometry(gp128, phis, kind):
    P = initial_path(gp128, n_path=17, kind=kind)
    assert P.shape == (17, gp128.n)
    assert np.array_equal(P[0], -phis[0]) and np.array_equal(P[-1], phis[0])
    assert all(on_sphere(gp128, u) for u in P)
    chords = np.sqrt(((np.diff(P, axis=0) ** 2) * gp128.lumped).sum(axis=1))
    assert chords.max() / chords.min() < 1.05


def test_initial_path_rejects_parallel_third(gp128, phis):
    with pytest.raises(MinimaxError):
        initial_path(gp128, third=3 * phis[0])


def test_zero_p_great_circle_reaches_lam2(gp128, lumped128):
    third = np.random.default_rng(7).standard_normal(gp128.n)
    st_ = deform_path(gp128, 0.0, initial_path(gp128, third, kind="great-circle"))
    lam2 = lumped128[1].value
    assert abs(st_.level - lam2) <= 1e-4 * lam2
    levels = [h[1] for h in st_.history]
    assert all(b <= a for a, b in zip(levels, levels[1:]))
    assert st_.level > lumped128[0].value


@pytest.fixture(scope="module")
def cp1(gp128):
    return c_of_p(gp128, 1.0)


def test_c_of_p_point(gp128, lumped128, cp1):
    assert cp1.polished
    assert cp1.u.max() > 0 > cp1.u.min()
    assert cp1.value > lumped128[0].value
    assert cp1.residual <= 1e-8
    assert abs(cp1.t - J_p(gp128, 1.0, cp1.u)) <= 1e-8 * max(1.0, abs(cp1.t))
    assert cp1.alpha == pytest.approx(cp1.beta + 1.0)
    assert on_sphere(gp128, cp1.u)


def test_levels_bound_minimax_value(cp1):
    assert all(h[1] >= cp1.value - 1e-10 for h in cp1.history)


def test_unpolished_option(gp128):
    cp = c_of_p(gp128, 0.5, MinimaxOptions(polish=False))
    assert not cp.polished and cp.quality == "unpolished"
    assert cp.criticality < 1e-6


@pytest.mark.parametrize("eps", [1e-2, 1e-1])
def test_ring_around_negative_phi1(gp128, lumped128, eps):
    assert ring_minimum(gp128, 1.0, eps) > lumped128[0].value
