"""Mountain-pass characterization of the first nontrivial Fucik curve.

On the lumped-mass sphere ``u^T M_L u = 1`` the functional
``J_p(u) = u^T A u - p (u+)^T M_L u+`` has a global minimum at ``phi_1``
(value ``lam_1 - p``) and a strict local minimum at ``-phi_1`` (value
``lam_1``). The minimax level ``c(p)`` over paths joining them gives the point
``(p + c(p), c(p))`` of the Fucik spectrum.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .assembly import GalerkinPair
from .errors import ContinuationError, MinimaxError
from .fucik_continuation import FucikPoint, fucik_residual, semismooth_newton
from .paths import DeformOptions, Functional, PathEngine, PathState, Sphere
from .spectrum import lowest_eigenpairs

log = logging.getLogger(__name__)

SPHERE_TOL = 1e-12


def _vec(gp: GalerkinPair, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (gp.n,):
        raise ValueError(f"vector has shape {u.shape}, expected ({gp.n},)")
    return u


def sphere_point(gp: GalerkinPair, u) -> np.ndarray:
    """Normalize ``u`` onto the lumped sphere."""
    u = _vec(gp, u)
    nrm = math.sqrt(float(np.dot(gp.lumped * u, u)))
    if nrm == 0:
        raise ValueError("cannot normalize the zero vector")
    return u / nrm


def on_sphere(gp: GalerkinPair, u, tol: float = SPHERE_TOL) -> bool:
    u = _vec(gp, u)
    return abs(float(np.dot(gp.lumped * u, u)) - 1.0) <= tol


def J_p(gp: GalerkinPair, p: float, u) -> float:
    """``u^T A u - p sum_i w_i (u_i+)^2``."""
    if p < 0:
        raise ValueError("p must be nonnegative")
    u = _vec(gp, u)
    up = np.maximum(u, 0.0)
    return float(u @ gp.A @ u - p * np.dot(gp.lumped * up, up))


def grad_Jp(gp: GalerkinPair, p: float, u) -> np.ndarray:
    """``2 A u - 2 p M_L u+``; nodal zeros count as nonpositive."""
    u = _vec(gp, u)
    return 2.0 * (gp.A @ u) - 2.0 * p * gp.lumped * np.maximum(u, 0.0)


def criticality_norm(gp: GalerkinPair, p: float, u) -> tuple[float, float]:
    """Return ``(t*, ||g - 2 t* M_L u||_{M_L^-1})`` with ``t* = u^T g / 2``."""
    u = _vec(gp, u)
    g = grad_Jp(gp, p, u)
    t = 0.5 * float(u @ g)
    r = g - 2.0 * t * gp.lumped * u
    return t, float(np.sqrt(np.sum(r * r / gp.lumped)))


def _functional(gp: GalerkinPair, p: float) -> Functional:
    w = gp.lumped

    def nodal(U):
        Up = np.maximum(U, 0.0)
        return p * np.einsum("...i,...i->...", Up * w, Up)

    def nodal_grad(u):
        return 2.0 * p * w * np.maximum(u, 0.0)

    return Functional(gp.A, 1.0, nodal, nodal_grad)


def _resample(curve: np.ndarray, n_path: int, gp: GalerkinPair) -> np.ndarray:
    """Pick ``n_path`` points equally spaced in M_L chord length along a dense polyline."""
    seg = np.sqrt(np.einsum("ij,ij,j->i", np.diff(curve, axis=0), np.diff(curve, axis=0), gp.lumped))
    s = np.concatenate([[0.0], np.cumsum(seg)])
    targets = np.linspace(0.0, s[-1], n_path)
    idx = np.clip(np.searchsorted(s, targets, side="right") - 1, 0, len(seg) - 1)
    frac = np.where(seg[idx] > 0, (targets - s[idx]) / np.where(seg[idx] > 0, seg[idx], 1.0), 0.0)
    P = curve[idx] + frac[:, None] * (curve[idx + 1] - curve[idx])
    P = P / np.sqrt(np.einsum("ij,ij,j->i", P, P, gp.lumped))[:, None]
    P[0], P[-1] = curve[0], curve[-1]
    return P


def initial_path(gp: GalerkinPair, third=None, n_path: int = 33, kind: str = "bezier",
                 dense: int = 2049) -> np.ndarray:
    """Path from ``-phi_1`` to ``phi_1`` on the lumped sphere.

    ``kind="bezier"`` uses ``(2 tau - 1) phi_1 + 4 tau (1 - tau) v`` projected to
    the sphere; ``kind="great-circle"`` joins two geodesic arcs through ``v``.
    ``v`` defaults to the normalized ``phi_2`` and must not be parallel to
    ``phi_1``. The result is resampled uniformly by arclength.
    """
    if n_path < 3:
        raise ValueError("n_path must be at least 3")
    e1, e2 = lowest_eigenpairs(gp, 2, mass="lumped")
    phi = np.array(e1.vector)
    v = np.array(e2.vector) if third is None else sphere_point(gp, third)
    sph = Sphere(gp.lumped)
    if abs(abs(sph.inner(v, phi)) - 1.0) < 1e-10:
        raise MinimaxError("third point is parallel to phi_1")
    tau = np.linspace(0.0, 1.0, dense)
    if kind == "bezier":
        curve = (2 * tau - 1)[:, None] * phi + (4 * tau * (1 - tau))[:, None] * v
        nrm = np.sqrt(np.einsum("ij,ij,j->i", curve, curve, gp.lumped))
        if np.any(nrm < 1e-12):
            raise MinimaxError("Bezier path passes through the origin")
        curve /= nrm[:, None]
    elif kind == "great-circle":
        half = np.linspace(0.0, 1.0, dense // 2 + 1)
        pieces = []
        for a, b in ((-phi, v), (v, phi)):
            c1, c2 = sph.coeffs(a, b, half)
            pieces.append(c1[:, None] * a + c2[:, None] * b)
        curve = np.vstack([pieces[0], pieces[1][1:]])
    else:
        raise ValueError(f"unknown path kind {kind!r}")
    curve[0], curve[-1] = -phi, phi
    return _resample(curve, n_path, gp)


def deform_path(gp: GalerkinPair, p: float, path, steps: int = 5000,
                step_size: float | None = None, tol: float = 1e-6, **opts) -> PathState:
    """Lower the path level by projected descent on the sphere.

    ``path`` is a point array (as from :func:`initial_path`) or a previous
    :class:`PathState` to resume. ``step_size`` defaults to ``0.1 / lam_2``.
    Extra keywords go to :class:`DeformOptions`.
    """
    if p < 0:
        raise ValueError("p must be nonnegative")
    engine = PathEngine(_functional(gp, p), Sphere(gp.lumped))
    if step_size is None:
        step_size = 0.1 / lowest_eigenpairs(gp, 2, mass="lumped")[1].value
    o = DeformOptions(steps=steps, step_size=step_size, crit_tol=tol, **opts)
    if isinstance(path, PathState):
        state = path
    else:
        P = np.asarray(path, dtype=float)
        if P.ndim != 2 or P.shape[1] != gp.n or P.shape[0] < 3:
            raise ValueError("path must be an (m, n) array with m >= 3")
        state = engine.start(P, step_size, o.samples)
    return engine.deform(state, o)


@dataclass(frozen=True, eq=False)
class CriticalPoint:
    u: np.ndarray
    t: float
    p: float
    value: float
    criticality: float
    polished: bool
    path_level: float
    sweeps: int
    deform_converged: bool
    residual: float
    history: list = field(default_factory=list)

    @property
    def alpha(self) -> float:
        return self.p + self.value

    @property
    def beta(self) -> float:
        return self.value

    @property
    def quality(self) -> str:
        return "polished" if self.polished else "unpolished"

    def as_fucik(self) -> FucikPoint:
        return FucikPoint(self.alpha, self.beta, self.p, self.value, self.u, self.residual,
                          "minimax")


@dataclass
class MinimaxOptions:
    n_path: int = 33
    kind: str = "bezier"
    third: np.ndarray | None = None
    steps: int = 5000
    step_size: float | None = None
    tol: float = 1e-6
    polish: bool = True
    polish_tol: float = 1e-10


def c_of_p(gp: GalerkinPair, p: float, opts: MinimaxOptions | None = None) -> CriticalPoint:
    """Minimax value ``c(p)`` with its critical point.

    The highest point of the deformed default path is polished by the
    semismooth Newton solver on the same line ``alpha - beta = p``.
    If polishing fails or lands below ``lam_1`` the deformed point is
    returned with ``polished=False``. A stalled deformation whose top point is
    not critical raises ``MinimaxError``.
    """
    o = opts or MinimaxOptions()
    P0 = initial_path(gp, o.third, o.n_path, o.kind)
    st = deform_path(gp, p, P0, steps=o.steps, step_size=o.step_size, tol=o.tol)
    u0 = st.points[st.argmax]
    t0, crit0 = criticality_norm(gp, p, u0)
    if st.stalled and crit0 > max(o.tol, 1e-3):
        raise MinimaxError(f"path deformation stalled at level {st.level:.10g} "
                           f"(criticality {crit0:.3e})")
    lam1 = lowest_eigenpairs(gp, 1, mass="lumped")[0].value
    u, t, crit, polished = u0, t0, crit0, False
    if o.polish:
        try:
            q = semismooth_newton(gp, p, u0, t0,
                                  tol=o.polish_tol)
            # the polished point must still be the mountain-pass point
            if q.t > lam1 and abs(q.t - st.level) <= 1e-3 * abs(st.level) + 10 * crit0:
                u, t, polished = np.array(q.u), q.t, True
                crit = criticality_norm(gp, p, u)[1]
            else:
                log.warning("polish moved to t=%.10g away from level %.10g", q.t, st.level)
        except (ContinuationError, ValueError) as exc:
            log.warning("polish failed: %s", exc)
    value = J_p(gp, p, u)
    u.setflags(write=False)
    return CriticalPoint(u, t, p, value, crit, polished, st.level, st.sweeps, st.converged,
                         fucik_residual(gp, p + t, t, u), st.history)


def ring_minimum(gp: GalerkinPair, p: float, eps: float, samples: int = 200,
                 seed: int = 0) -> float:
    """Minimum of ``J_p`` over random sphere points at M_L-distance ``eps``
    from ``-phi_1``."""
    rng = np.random.default_rng(seed)
    phi = np.array(lowest_eigenpairs(gp, 1, mass="lumped")[0].vector)
    sph = Sphere(gp.lumped)
    a = -phi
    # chord eps on the unit sphere <-> geodesic angle theta
    theta = 2.0 * math.asin(eps / 2.0)
    best = math.inf
    for _ in range(samples):
        d = sph.project(a, rng.standard_normal(gp.n))
        d /= sph.norm(d)
        u = math.cos(theta) * a + math.sin(theta) * d
        best = min(best, J_p(gp, p, u))
    return best
