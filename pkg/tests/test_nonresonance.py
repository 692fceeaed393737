from types import SimpleNamespace

import numpy as np
import pytest

from fucik_lab.errors import NonresonanceError, SpecError
from fucik_lab.nonresonance import (NonlinearitySpec, grad_norm, grad_psi, phi_endpoints, psi,
                                    select_R, solve_nonresonance)


@pytest.fixture(scope="module")
def target(curve128):
    q = curve128.at(1.0)
    return q.alpha, q.beta


@pytest.fixture(scope="module")
def shift(gp128):
    return NonlinearitySpec.linear_shift(gp128)


@pytest.fixture(scope="module")
def asym(gp128, lumped128, target):
    lam1 = lumped128[0].value
    return NonlinearitySpec.piecewise_asymptotic(gp128, 0.5 * (lam1 + target[0]),
                                                 0.5 * (lam1 + target[1]), target)


def _resonant_standin(gp, lam1):
    # bypasses the spec gate on purpose
    return SimpleNamespace(eval_F=lambda s: 0.5 * lam1 * np.asarray(s) ** 2,
                           eval_f=lambda s: lam1 * np.asarray(s))


def test_psi_zero(gp128, shift):
    assert psi(gp128, shift, np.zeros(gp128.n)) == 0.0


def test_psi_flat_along_phi1_at_resonance(gp128, lumped128):
    lam1, phi = lumped128[0].value, lumped128[0].vector
    spec = _resonant_standin(gp128, lam1)
    for c in (-3.0, 0.5, 10.0):
        assert abs(psi(gp128, spec, c * phi)) <= 1e-10 * c * c
        assert grad_norm(gp128, grad_psi(gp128, spec, c * phi)) <= 1e-9 * abs(c)


def test_grad_psi_central_differences(gp128, asym, rng):
    for _ in range(20):
        u, v = rng.standard_normal(gp128.n), rng.standard_normal(gp128.n)
        g = grad_psi(gp128, asym, u) @ v
        eps = 1e-5
        fd = (psi(gp128, asym, u + eps * v) - psi(gp128, asym, u - eps * v)) / (2 * eps)
        assert fd == pytest.approx(g, rel=1e-6)


def test_grad_vanishes_at_linear_solution(gp128, shift):
    m = shift.params["m"]
    u = np.linalg.solve(gp128.A - m * np.diag(gp128.lumped), gp128.lumped)
    assert grad_norm(gp128, grad_psi(gp128, shift, u)) <= 1e-9


def test_select_R_closed_form(gp128, lumped128, shift):
    lam1, phi = lumped128[0].value, lumped128[0].vector
    m = shift.params["m"]
    mass = float(np.dot(gp128.lumped, phi))
    trace = []
    R = select_R(gp128, shift, trace=trace)
    expect = next(r for r in 2.0 ** np.arange(21) if r * r * (lam1 - m) / 2 + r * mass < -1)
    assert R == expect
    worst = [max(a, b) for _, a, b in trace]
    assert all(y < x for x, y in zip(worst, worst[1:]))


def test_select_R_aborts_at_resonance(gp128, lumped128):
    with pytest.raises(NonresonanceError):
        select_R(gp128, _resonant_standin(gp128, lumped128[0].value))


def test_linear_shift_solution(gp128, shift):
    ec = solve_nonresonance(gp128, shift)
    m = shift.params["m"]
    ref = np.linalg.solve(gp128.A - m * np.diag(gp128.lumped), gp128.lumped)
    assert np.linalg.norm(ec.u - ref) <= 1e-6 * np.linalg.norm(ref)
    assert ec.classification == "mountain-pass"
    assert ec.value > ec.endpoint_level


def test_piecewise_asymptotic(gp128, asym):
    ec = solve_nonresonance(gp128, asym)
    assert ec.grad_norm <= 1e-8
    assert ec.value > ec.endpoint_level
    assert ec.path_level > ec.endpoint_level


def test_piecewise_asymptotic_with_forcing(gp128, asym, target):
    spec = NonlinearitySpec.piecewise_asymptotic(gp128, asym.params["a"], asym.params["b"],
                                                 target, c=2.0)
    ec = solve_nonresonance(gp128, spec)
    assert ec.grad_norm <= 1e-8
    assert np.abs(ec.u).max() > 0.1
    assert ec.value > ec.endpoint_level


def test_custom_table(gp128, asym, target):
    a, b = asym.params["a"], asym.params["b"]
    spec = NonlinearitySpec.custom_table(gp128, [-2.0, -0.5, 0.0, 1.0, 2.0],
                                         [-2 * b + 1.0, -0.4 * b, 0.5, a, 2 * a - 0.2], target)
    assert spec.report.primitive_worst <= 1e-12
    ec = solve_nonresonance(gp128, spec)
    assert ec.grad_norm <= 1e-8


def test_quadrature_primitive_fallback(gp128, asym, target):
    spec = NonlinearitySpec.build(gp128, "piecewise-asymptotic", asym.f,
                                  {k: getattr(asym, k) for k in (
                                      "gamma_plus", "Gamma_plus", "gamma_minus", "Gamma_minus",
                                      "delta_plus", "Delta_plus", "delta_minus", "Delta_minus")},
                                  target)
    s = np.linspace(-3, 3, gp128.n)
    assert np.allclose(spec.eval_F(s), asym.eval_F(s), atol=1e-9)


def test_spec_gate(gp128, lumped128, target):
    lam1, lam2 = lumped128[0].value, lumped128[1].value
    with pytest.raises(SpecError, match="delta_\\+ > lam_1"):
        NonlinearitySpec.linear_shift(gp128, m=lam1)
    with pytest.raises(SpecError, match="Gamma_\\+ <= alpha"):
        NonlinearitySpec.linear_shift(gp128, m=lam2 + 1.0)
    with pytest.raises(SpecError, match="Delta_\\+ < alpha a.e. or"):
        NonlinearitySpec.linear_shift(gp128, m=lam2)
    with pytest.raises(SpecError, match="lam_1 <= gamma_-"):
        NonlinearitySpec.piecewise_asymptotic(gp128, lam1 + 1, lam1 - 1, target)
    with pytest.raises(SpecError, match="asymptotic"):
        NonlinearitySpec.build(gp128, "custom", lambda x, s: 2 * lam2 * np.asarray(s),
                               {k: lam1 + 1 for k in (
                                   "gamma_plus", "Gamma_plus", "gamma_minus", "Gamma_minus",
                                   "delta_plus", "Delta_plus", "delta_minus", "Delta_minus")},
                               target, F=lambda x, s: lam2 * np.asarray(s) ** 2)
    with pytest.raises(SpecError):
        NonlinearitySpec.custom_table(gp128, [0.0, 1.0, 0.5], [0, 1, 2], target)


def test_phi_endpoints_negative(gp128, asym, shift):
    for spec in (asym, shift):
        a, b = phi_endpoints(gp128, spec)
        assert a < 0 and b < 0
