"""Lowest eigenpairs of ``A u = lam M u`` and the domain-monotonicity experiment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .assembly import GalerkinPair, assemble
from .domain_kernel import Domain, Kernel, Mesh
from .errors import DomainError, MultiplicityError, SpectrumError

SIMPLICITY_GAP = 1e-10


@dataclass(frozen=True, eq=False)
class EigenPair:
    value: float
    vector: np.ndarray
    index: int
    residual: float


def mass_matrix(gp: GalerkinPair, mass: str = "consistent") -> np.ndarray:
    if mass == "consistent":
        return gp.M
    if mass == "lumped":
        return gp.M_L
    raise ValueError(f"mass must be 'consistent' or 'lumped', got {mass!r}")


def _sign_normalize(v: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(v)))
    return v if v[i] > 0 else -v


def lowest_eigenpairs(gp: GalerkinPair, k: int = 2, tol: float = 1e-8,
                      mass: str = "consistent") -> list[EigenPair]:
    """The ``k`` smallest eigenpairs, ascending and ``B``-normalised.

    ``mass`` selects ``B = M`` (conforming Galerkin) or ``B = M_L``; the
    Fucik modules work with the lumped form. Every vector is sign-normalised
    so its largest-magnitude entry is positive. Raises ``SpectrumError`` when
    a residual exceeds ``tol * ||A u||`` and ``MultiplicityError`` when the
    first gap is below ``1e-10 * lam_1``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    B = mass_matrix(gp, mass)
    kk = min(max(k, 2), gp.n)
    try:
        w, V = linalg.eigh(gp.A, B, subset_by_index=[0, kk - 1])
    except linalg.LinAlgError as exc:
        raise SpectrumError(f"generalized eigensolver failed: {exc}") from exc
    if kk >= 2 and w[1] - w[0] < SIMPLICITY_GAP * abs(w[0]):
        raise MultiplicityError(
            f"principal eigenvalue is not simple: gap {w[1] - w[0]:.3e} at lam_1 = {w[0]:.6g}")
    out = []
    for i in range(min(k, kk)):
        v = _sign_normalize(V[:, i])
        Av = gp.A @ v
        res = float(np.linalg.norm(Av - w[i] * (B @ v)))
        if res > tol * np.linalg.norm(Av):
            raise SpectrumError(f"eigenpair {i + 1} residual {res:.3e} exceeds tolerance")
        v.setflags(write=False)
        out.append(EigenPair(float(w[i]), v, i + 1, res))
    return out


def principal(gp: GalerkinPair, mass: str = "consistent") -> EigenPair:
    return lowest_eigenpairs(gp, 1, mass=mass)[0]


def weighted_mass(gp: GalerkinPair, w, mass: str = "consistent") -> np.ndarray:
    """Mass form of ``int w u v`` for a nodal weight ``w``.

    The consistent variant integrates the P1 interpolant of ``w`` exactly
    (boundary nodes copy the adjacent interior value); the lumped variant is
    ``diag(w) M_L``.
    """
    w = np.asarray(w, dtype=float)
    if w.shape != (gp.n,):
        raise ValueError(f"weight has shape {w.shape}, expected ({gp.n},)")
    if np.any(~np.isfinite(w)) or np.any(w <= 0):
        raise ValueError("weight entries must be strictly positive")
    if mass == "lumped":
        return np.diag(w * gp.lumped)
    if mass != "consistent":
        raise ValueError(f"unknown mass {mass!r}")
    mesh = gp.mesh
    dofs = mesh.element_dofs
    wl = np.where(dofs[:, 0] >= 0, w[np.maximum(dofs[:, 0], 0)], w[np.maximum(dofs[:, 1], 0)])
    wr = np.where(dofs[:, 1] >= 0, w[np.maximum(dofs[:, 1], 0)], wl)
    h = mesh.widths
    loc = np.empty((h.size, 2, 2))
    loc[:, 0, 0] = h * (3 * wl + wr) / 12.0
    loc[:, 0, 1] = loc[:, 1, 0] = h * (wl + wr) / 12.0
    loc[:, 1, 1] = h * (wl + 3 * wr) / 12.0
    Mw = np.zeros((gp.n, gp.n))
    for p in range(2):
        for q in range(2):
            keep = (dofs[:, p] >= 0) & (dofs[:, q] >= 0)
            np.add.at(Mw, (dofs[keep, p], dofs[keep, q]), loc[keep, p, q])
    return (Mw + Mw.T) / 2.0


def weighted_principal(gp: GalerkinPair, w, mass: str = "consistent") -> float:
    """``min v^T A v / v^T M_w v`` over nonzero ``v``."""
    Mw = weighted_mass(gp, w, mass)
    return float(linalg.eigh(gp.A, Mw, eigvals_only=True, subset_by_index=[0, 0])[0])


def domain_monotonicity(kernel: Kernel, A_dom: Domain, B_dom: Domain, N: int,
                        mass: str = "consistent") -> tuple[float, float]:
    """Principal eigenvalues ``(lam_1(A_dom), lam_1(B_dom))`` for a proper
    subdomain ``A_dom`` of the connected domain ``B_dom``.

    Each domain is meshed with ``N`` elements and carries the exterior
    condition on its own complement.
    """
    if not B_dom.connected:
        raise DomainError("the larger domain must be connected")
    if A_dom == B_dom or not A_dom.is_proper_subset_of(B_dom, slack=1e-12):
        raise DomainError("domain_monotonicity needs A_dom to be a proper subset of B_dom")
    lam_a = principal(assemble(Mesh.uniform(A_dom, N), kernel), mass).value
    lam_b = principal(assemble(Mesh.uniform(B_dom, N), kernel), mass).value
    return lam_a, lam_b


def richardson(values, ratio: float = 2.0) -> tuple[float, float]:
    """Extrapolate a sequence of three refinements with unknown order.

    Returns ``(limit, order)`` from the last three values.
    """
    l0, l1, l2 = (float(v) for v in values[-3:])
    d1, d2 = l0 - l1, l1 - l2
    if d1 == 0 or d2 == 0 or d1 / d2 <= 0:
        raise SpectrumError("refinement sequence is not in the asymptotic regime")
    order = np.log(d1 / d2) / np.log(ratio)
    return l2 - d2 / (ratio**order - 1.0), float(order)
