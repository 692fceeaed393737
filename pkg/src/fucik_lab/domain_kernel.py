"""Domains and singular kernels on the real line, with their nodal meshes.

A :class:`Domain` is a finite union of disjoint open intervals; functions in
the discrete space vanish identically on its complement. A :class:`Kernel`
is the symmetric singular kernel ``K(z) = lam * m(z) * |z|**-(1+2s)`` with
``m == 1`` (fractional) or a Gaussian bump ``m(z) = 1 + (m_max-1) exp(-(z/w)^2)``
(perturbed-fractional). Because every admissible function vanishes outside
the domain, the interaction with the complement collapses to the weight
``kappa(x) = int_{R minus Omega} K(x-y) dy`` returned by :func:`exterior_tail`.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import DomainError, KernelError, NearBoundaryWarning, SingularityError

VARIANTS = ("fractional", "perturbed-fractional")


@dataclass(frozen=True)
class Domain:
    """Ordered union of disjoint open intervals ``(a_i, b_i)``."""

    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self):
        ivs = tuple((float(a), float(b)) for a, b in self.intervals)
        if not ivs:
            raise DomainError("domain needs at least one interval")
        for a, b in ivs:
            if not (math.isfinite(a) and math.isfinite(b)):
                raise DomainError(f"interval ({a}, {b}) is not bounded")
            if not a < b:
                raise DomainError(f"interval ({a}, {b}) violates a < b")
        ivs = tuple(sorted(ivs))
        for (a0, b0), (a1, b1) in zip(ivs, ivs[1:]):
            if not b0 < a1:
                raise DomainError(
                    f"intervals ({a0}, {b0}) and ({a1}, {b1}) must be separated by a positive gap")
        object.__setattr__(self, "intervals", ivs)

    @classmethod
    def interval(cls, a: float, b: float) -> "Domain":
        return cls(((a, b),))

    @property
    def connected(self) -> bool:
        return len(self.intervals) == 1

    @property
    def measure(self) -> float:
        return sum(b - a for a, b in self.intervals)

    @property
    def bounds(self) -> tuple[float, float]:
        return self.intervals[0][0], self.intervals[-1][1]

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        inside = np.zeros(x.shape, dtype=bool)
        for a, b in self.intervals:
            inside |= (x > a) & (x < b)
        return inside

    def complement(self) -> list[tuple[float, float]]:
        """Closed pieces of ``R minus Omega`` (unbounded ends use +-inf)."""
        pieces = [(-math.inf, self.intervals[0][0])]
        for (_, b0), (a1, _) in zip(self.intervals, self.intervals[1:]):
            pieces.append((b0, a1))
        pieces.append((self.intervals[-1][1], math.inf))
        return pieces

    def is_proper_subset_of(self, other: "Domain", slack: float = 0.0) -> bool:
        """True if every interval of ``self`` sits inside one of ``other``'s
        and the two domains differ by more than ``slack`` in measure."""
        for a, b in self.intervals:
            if not any(a >= c - slack and b <= d + slack for c, d in other.intervals):
                return False
        return other.measure - self.measure > slack

    def digest(self) -> str:
        payload = json.dumps([list(iv) for iv in self.intervals]).encode()
        return hashlib.sha256(payload).hexdigest()


@dataclass(frozen=True)
class Kernel:
    """Symmetric kernel ``lam * m(z) * |z|^-(1+2s)`` on ``R minus {0}``.

    Parameters
    ----------
    s : float
        Order, in (0, 1/2) unless ``allow_high_order`` is set (then (0, 1)).
    lam : float
        Positive scale; also the lower-bound constant of the kernel.
    variant : str
        ``"fractional"`` (``m == 1``) or ``"perturbed-fractional"``.
    m_max : float
        Peak of the multiplier, ``m(0) = m_max >= 1``.
    width : float
        Width of the Gaussian bump in the multiplier.
    allow_high_order : bool
        Permit ``s >= 1/2``, which leaves the standing assumption ``n > 2s``
        for ``n = 1``.
    """

    s: float
    lam: float = 1.0
    variant: str = "fractional"
    m_max: float = 1.0
    width: float = 1.0
    allow_high_order: bool = False
    n: int = field(default=1, repr=False)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise KernelError(f"unknown kernel variant {self.variant!r}")
        upper = 1.0 if self.allow_high_order else 0.5
        if not 0.0 < self.s < upper:
            hint = "" if self.allow_high_order else " (n > 2s requires s < 1/2 in one dimension)"
            raise KernelError(f"kernel order s={self.s} outside (0, {upper}){hint}")
        if not self.lam > 0:
            raise KernelError(f"kernel scale lambda={self.lam} must be positive")
        if self.variant == "perturbed-fractional":
            if not (math.isfinite(self.m_max) and self.m_max >= 1.0):
                raise KernelError(f"multiplier peak m_max={self.m_max} must be >= 1")
            if not self.width > 0:
                raise KernelError(f"multiplier width={self.width} must be positive")
        if self.n != 1:
            raise KernelError("only n = 1 is implemented")

    @classmethod
    def fractional(cls, s: float, lam: float = 1.0, **kw) -> "Kernel":
        return cls(s=s, lam=lam, variant="fractional", **kw)

    @classmethod
    def perturbed(cls, s: float, lam: float = 1.0, m_max: float = 2.0, width: float = 1.0,
                  **kw) -> "Kernel":
        return cls(s=s, lam=lam, variant="perturbed-fractional", m_max=m_max, width=width, **kw)

    @property
    def perturbed_flag(self) -> bool:
        return self.variant == "perturbed-fractional" and self.m_max > 1.0

    def multiplier(self, z):
        z = np.asarray(z, dtype=float)
        if not self.perturbed_flag:
            return np.ones_like(z)
        return 1.0 + (self.m_max - 1.0) * np.exp(-(z / self.width) ** 2)

    def __call__(self, z):
        """Vectorised kernel; the caller guarantees ``z != 0``."""
        z = np.abs(np.asarray(z, dtype=float))
        return self.lam * self.multiplier(z) * z ** (-1.0 - 2.0 * self.s)

    def tail(self, d):
        """``int_d^inf K(w) dw`` for ``d > 0`` (``d = inf`` gives 0)."""
        d = np.asarray(d, dtype=float)
        s = self.s
        out = np.zeros_like(d)
        fin = np.isfinite(d)
        df = d[fin]
        val = df ** (-2.0 * s) / (2.0 * s)
        if self.perturbed_flag:
            x = (df / self.width) ** 2
            # Gamma(-s, x) via Gamma(a, x) = (Gamma(a+1, x) - x^a e^-x) / a with a = -s
            upper = special.gammaincc(1.0 - s, x) * special.gamma(1.0 - s)
            gneg = (x ** (-s) * np.exp(-x) - upper) / s
            val = val + (self.m_max - 1.0) * self.width ** (-2.0 * s) / 2.0 * gneg
        out[fin] = self.lam * val
        return out

    def params(self) -> dict:
        return {"s": self.s, "lambda": self.lam, "variant": self.variant,
                "m_max": self.m_max, "width": self.width}


def eval_kernel(k: Kernel, z: float) -> float:
    """Kernel value at a single nonzero separation ``z``."""
    if z == 0:
        raise SingularityError("kernel is singular at z = 0")
    return float(k(z))


def exterior_tail(k: Kernel, d: Domain, x, *, warn_eps: float | None = None):
    """Weight ``kappa(x) = int_{R minus Omega} K(x - y) dy`` for ``x`` in the domain.

    Accepts a scalar or an array of points. Each complement piece ``[c, e]``
    contributes ``T(dist to near end) - T(dist to far end)`` with ``T`` the
    kernel tail integral.
    """
    xa = np.asarray(x, dtype=float)
    if not np.all(d.contains(xa)):
        raise DomainError("exterior_tail requires points strictly inside the domain")
    lo, hi = d.bounds
    eps = warn_eps if warn_eps is not None else 8 * np.finfo(float).eps * max(1.0, abs(lo), abs(hi))
    total = np.zeros_like(xa)
    near = np.full(xa.shape, np.inf)
    for c, e in d.complement():
        if math.isinf(c):  # (-inf, e]
            dn = xa - e
            total += k.tail(dn)
        elif math.isinf(e):  # [c, inf)
            dn = c - xa
            total += k.tail(dn)
        else:
            left = xa < c
            dn = np.where(left, c - xa, xa - e)
            df = np.where(left, e - xa, xa - c)
            total += k.tail(dn) - k.tail(df)
        near = np.minimum(near, dn)
    if np.any(near <= eps):
        warnings.warn("exterior_tail evaluated within machine precision of the boundary",
                      NearBoundaryWarning, stacklevel=2)
    return float(total) if np.ndim(x) == 0 else total


@dataclass(frozen=True, eq=False)
class Mesh:
    """Uniform-per-interval P1 mesh with degrees of freedom at interior nodes.

    ``nodes`` are the degree-of-freedom coordinates (boundary points are not
    unknowns: the exterior Dirichlet condition pins them to zero).
    ``elements`` holds element endpoints, ``element_dofs`` the dof index of
    each endpoint or -1, ``element_interval`` the owning interval.
    """

    domain: Domain
    nodes: np.ndarray
    elements: np.ndarray
    element_dofs: np.ndarray
    element_interval: np.ndarray
    n_elements: int

    @classmethod
    def uniform(cls, domain: Domain, n_elements: int) -> "Mesh":
        """Split ``n_elements`` across the intervals in proportion to length
        (at least two per interval), uniform inside each interval."""
        n_elements = int(n_elements)
        if n_elements < 2 * len(domain.intervals):
            raise DomainError(f"need at least two elements per interval, got N={n_elements}")
        lengths = np.array([b - a for a, b in domain.intervals])
        counts = np.maximum(2, np.round(n_elements * lengths / lengths.sum()).astype(int))
        nodes, elems, edofs, eint = [], [], [], []
        offset = 0
        for idx, ((a, b), m) in enumerate(zip(domain.intervals, counts)):
            grid = np.linspace(a, b, m + 1)
            nodes.append(grid[1:-1])
            dof = np.arange(m + 1) + offset - 1  # grid point j -> dof offset + j - 1
            dof[0] = dof[m] = -1
            elems.append(np.column_stack([grid[:-1], grid[1:]]))
            edofs.append(np.column_stack([dof[:-1], dof[1:]]))
            eint.append(np.full(m, idx))
            offset += m - 1
        arrays = [np.concatenate(nodes), np.vstack(elems), np.vstack(edofs).astype(int),
                  np.concatenate(eint)]
        for arr in arrays:
            arr.setflags(write=False)
        return cls(domain, *arrays, n_elements=int(counts.sum()))

    @property
    def n_dofs(self) -> int:
        return self.nodes.size

    @property
    def widths(self) -> np.ndarray:
        return self.elements[:, 1] - self.elements[:, 0]

    @property
    def h(self) -> float:
        return float(self.widths.max())
