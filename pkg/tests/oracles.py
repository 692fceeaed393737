"""Independent reference computations used to freeze expected values.

None of these call into the package's assembly or solvers.
"""

import numpy as np
from scipy import linalg

# Richardson limit of the principal eigenvalue (s = 0.25, unit scale, (-1, 1))
# from the closed-form stiffness at N = 128, 256, 512 with consistent mass.
LAM1_REFERENCE = 9.727315071262607


def toeplitz_stiffness(s, lam, N, length=2.0):
    """Closed-form stiffness of uniform P1 hats on one interval, pure
    fractional kernel.

    Integrating ``(u(x)-u(y))(v(x)-v(y)) |x-y|^(-1-2s)`` over the plane for
    hats of width ``h`` reduces to a fourth central difference of
    ``|z|^(3-2s)``; the entry between hats ``k`` apart is
    ``lam * C * h^(1-2s) * sum_m c_m |k-m|^(3-2s)`` with ``c = (1,-4,6,-4,1)``
    and ``C = 2 / ((2s)(1-2s)(2-2s)(3-2s))``.
    """
    h = length / N
    q = 3.0 - 2.0 * s
    C = 2.0 / ((2 * s) * (1 - 2 * s) * (2 - 2 * s) * (3 - 2 * s))
    k = np.arange(N - 1)
    a = sum(c * np.abs(k - m) ** q for c, m in zip((1, -4, 6, -4, 1), range(-2, 3)))
    return linalg.toeplitz(lam * C * h ** (1 - 2 * s) * a)


def uniform_mass(N, length=2.0, lumped=False):
    h = length / N
    n = N - 1
    if lumped:
        d = np.full(n, h)
        d[0] = d[-1] = 5 * h / 6
        return np.diag(d)
    return h / 6 * (4 * np.eye(n) + np.eye(n, k=1) + np.eye(n, k=-1))


def oracle_eigs(s, N, k=2, lumped=False, length=2.0):
    T = toeplitz_stiffness(s, 1.0, N, length)
    return linalg.eigh(T, uniform_mass(N, length, lumped), eigvals_only=True,
                       subset_by_index=[0, k - 1])


def richardson3(l0, l1, l2, ratio=2.0):
    d1, d2 = l0 - l1, l1 - l2
    order = np.log(d1 / d2) / np.log(ratio)
    return l2 - d2 / (ratio**order - 1.0), order
