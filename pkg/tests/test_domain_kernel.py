import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from fucik_lab.domain_kernel import Domain, Kernel, Mesh, eval_kernel, exterior_tail
from fucik_lab.errors import DomainError, KernelError, NearBoundaryWarning, SingularityError


def test_domain_sorts_and_measures():
    d = Domain(((2.0, 3.0), (-1.0, 0.5)))
    assert d.intervals == ((-1.0, 0.5), (2.0, 3.0))
    assert d.measure == pytest.approx(2.5)
    assert not d.connected
    assert d.bounds == (-1.0, 3.0)
    assert d.complement() == [(-math.inf, -1.0), (0.5, 2.0), (3.0, math.inf)]


@pytest.mark.parametrize("ivs", [((1.0, 0.0),), ((0.0, 0.0),), ((0.0, 1.0), (1.0, 2.0)),
                                 ((0.0, 2.0), (1.0, 3.0)), ((0.0, math.inf),), ()])
def test_domain_rejects_bad_intervals(ivs):
    with pytest.raises(DomainError):
        Domain(ivs)


def test_contains_is_open():
    d = Domain.interval(-1, 1)
    assert list(d.contains([-1.0, -0.999, 0.0, 1.0])) == [False, True, True, False]


def test_proper_subset():
    big, small = Domain.interval(-1, 1), Domain.interval(-0.5, 0.5)
    assert small.is_proper_subset_of(big)
    assert not big.is_proper_subset_of(small)
    assert not big.is_proper_subset_of(big)


@pytest.mark.parametrize("s", [0.0, 0.5, 0.7, -0.1])
def test_kernel_order_gate(s):
    with pytest.raises(KernelError):
        Kernel.fractional(s)


def test_high_order_override():
    assert Kernel.fractional(0.7, allow_high_order=True).s == 0.7
    with pytest.raises(KernelError):
        Kernel.fractional(1.0, allow_high_order=True)


def test_kernel_parameter_errors():
    with pytest.raises(KernelError):
        Kernel.fractional(0.25, lam=0.0)
    with pytest.raises(KernelError):
        Kernel.perturbed(0.25, m_max=0.5)
    with pytest.raises(KernelError):
        Kernel.perturbed(0.25, width=0.0)
    with pytest.raises(KernelError):
        Kernel(0.25, variant="gaussian")


def test_eval_kernel_singular():
    with pytest.raises(SingularityError):
        eval_kernel(Kernel.fractional(0.25), 0.0)


@given(z=st.floats(1e-3, 50.0), s=st.floats(0.05, 0.45), m=st.floats(1.0, 4.0))
def test_kernel_symmetric_and_bounded_below(z, s, m):
    k = Kernel.perturbed(s, 1.3, m_max=m, width=0.7)
    assert eval_kernel(k, z) == eval_kernel(k, -z)
    # lower bound lam |z|^(-1-2s) and upper bound m_max times it
    base = 1.3 * z ** (-1 - 2 * s)
    assert base * (1 - 1e-14) <= eval_kernel(k, z) <= m * base * (1 + 1e-14)


@given(d=st.floats(1e-2, 20.0), s=st.floats(0.05, 0.45))
def test_tail_matches_quadrature(d, s):
    for k in (Kernel.fractional(s, 0.8), Kernel.perturbed(s, 0.8, m_max=3.0, width=0.5)):
        ref = integrate.quad(lambda w: k(w), d, np.inf, epsabs=0, epsrel=1e-11, limit=400)[0]
        assert float(k.tail(np.array(d))) == pytest.approx(ref, rel=1e-8)


def test_exterior_tail_fractional_closed_form():
    k = Kernel.fractional(0.25)
    x = np.array([-0.9, 0.0, 0.3])
    expect = ((x + 1) ** -0.5 + (1 - x) ** -0.5) / 0.5
    assert np.allclose(exterior_tail(k, Domain.interval(-1, 1), x), expect, rtol=1e-14)


def test_exterior_tail_two_intervals_quadrature():
    k = Kernel.perturbed(0.3, m_max=2.0, width=0.4)
    d = Domain(((-1.0, -0.2), (0.3, 1.0)))
    x = 0.5
    ref = sum(integrate.quad(lambda y: k(x - y), a, b, epsrel=1e-12, limit=200)[0]
              for a, b in ((-np.inf, -1.0), (-0.2, 0.3), (1.0, np.inf)))
    assert exterior_tail(k, d, x) == pytest.approx(ref, rel=1e-9)


def test_exterior_tail_errors_and_warning():
    k, d = Kernel.fractional(0.25), Domain.interval(-1, 1)
    with pytest.raises(DomainError):
        exterior_tail(k, d, 1.0)
    with pytest.warns(NearBoundaryWarning):
        exterior_tail(k, d, 1.0 - 1e-16)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        exterior_tail(k, d, 0.5)


def test_uniform_mesh_structure():
    m = Mesh.uniform(Domain(((-1.0, 0.0), (1.0, 3.0))), 12)
    assert m.n_elements == 12
    assert m.n_dofs == (4 - 1) + (8 - 1)
    assert np.all(np.diff(m.nodes) > 0)
    used = m.element_dofs[m.element_dofs >= 0]
    assert sorted(set(used.tolist())) == list(range(m.n_dofs))
    # each dof sits on the shared endpoint of its two elements
    for e, (a, b) in enumerate(m.element_dofs):
        if a >= 0:
            assert m.nodes[a] == m.elements[e, 0]
        if b >= 0:
            assert m.nodes[b] == m.elements[e, 1]
    with pytest.raises(DomainError):
        Mesh.uniform(Domain.interval(0, 1), 1)
