"""Semismooth Newton continuation of the first nontrivial Fucik curve.

The discrete Fucik system on the lumped sphere is::

    F(u, t) = [ A u - (p + t) W u+ + t W u- ;  (u^T W u - 1) / 2 ] = 0

with ``W = diag(M_L)`` and nodal positive/negative parts. Its generalized
Jacobian uses the active set ``D = diag(u_i > 0)`` (zeros count as
nonpositive, matching the minimax module):

    [ A - t W - p W D   -W u ]
    [ (W u)^T            0   ]
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .assembly import GalerkinPair
from .errors import ContinuationError
from .spectrum import lowest_eigenpairs

log = logging.getLogger(__name__)

MAX_HALVINGS = 6


def dual_norm(gp: GalerkinPair, r) -> float:
    """``||r||_{M_L^-1}``."""
    r = np.asarray(r, dtype=float)
    return float(np.sqrt(np.sum(r * r / gp.lumped)))


def fucik_residual(gp: GalerkinPair, alpha: float, beta: float, u) -> float:
    """``||A u - alpha M_L u+ + beta M_L u-||_{M_L^-1}``."""
    u = np.asarray(u, dtype=float)
    up, um = np.maximum(u, 0.0), np.maximum(-u, 0.0)
    return dual_norm(gp, gp.A @ u - alpha * gp.lumped * up + beta * gp.lumped * um)


def sign_changes(u, rtol: float = 1e-12) -> int:
    """Number of sign changes in nodal order, ignoring entries near zero."""
    u = np.asarray(u, dtype=float)
    sig = np.sign(u[np.abs(u) > rtol * np.abs(u).max()])
    return int(np.count_nonzero(sig[1:] != sig[:-1]))


@dataclass(frozen=True, eq=False)
class FucikPoint:
    """Point ``(alpha, beta) = (p + t, t)`` of the Fucik spectrum with its
    eigenfunction ``u`` (unit lumped mass)."""

    alpha: float
    beta: float
    p: float
    t: float
    u: np.ndarray
    residual: float
    method: str
    iterations: int = 0
    history: tuple = ()

    @property
    def sign_changes(self) -> int:
        return sign_changes(self.u)

    def mirror(self) -> "FucikPoint":
        """The diagonal reflection ``(beta, alpha)`` carried by ``-u``."""
        return FucikPoint(self.beta, self.alpha, -self.p, self.alpha, -self.u, self.residual,
                          self.method, self.iterations, self.history)


def _F(gp, p, u, t):
    w = gp.lumped
    r = gp.A @ u - t * w * u - p * w * np.maximum(u, 0.0)
    c = 0.5 * (np.dot(w * u, u) - 1.0)
    return r, c


def _norm(gp, r, c):
    return math.sqrt(np.sum(r * r / gp.lumped) + c * c)


def semismooth_newton(gp: GalerkinPair, p: float, seed, t_seed: float, tol: float = 1e-10,
                      max_iter: int = 50) -> FucikPoint:
    """Solve the discrete Fucik system on the line ``alpha - beta = p``.

    Full generalized-Newton steps are taken when they reduce ``||F||``;
    otherwise the step is damped, and if the active set has changed the step
    is recomputed with the previous active set frozen. Raises
    ``ContinuationError`` (carrying the last ``(u, t)``) after ``max_iter``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    w = gp.lumped
    u = np.array(seed, dtype=float)
    if not (u.max() > 0 and u.min() < 0):
        raise ValueError("semismooth_newton needs a sign-changing seed")
    u /= math.sqrt(np.dot(w * u, u))
    t = float(t_seed)
    n = gp.n
    r, c = _F(gp, p, u, t)
    res = _norm(gp, r, c)
    hist = [res]
    active_prev = None
    it = 0
    while res > tol:
        if it >= max_iter:
            raise ContinuationError(
                f"semismooth Newton did not converge in {max_iter} iterations (||F|| = {res:.3e})",
                last=(u, t))
        it += 1
        active = u > 0
        candidates = [active]
        if active_prev is not None and not np.array_equal(active, active_prev):
            candidates.append(active_prev)
        best = None
        for act in candidates:
            J = np.empty((n + 1, n + 1))
            J[:n, :n] = gp.A
            J[np.arange(n), np.arange(n)] -= w * (t + p * act)
            J[:n, n] = -w * u
            J[n, :n] = w * u
            J[n, n] = 0.0
            try:
                step = np.linalg.solve(J, -np.append(r, c))
            except np.linalg.LinAlgError:
                continue
            lam = 1.0
            for _ in range(30):
                un, tn = u + lam * step[:n], t + lam * step[n]
                rn, cn = _F(gp, p, un, tn)
                resn = _norm(gp, rn, cn)
                if resn < (1.0 - 1e-4 * lam) * res:
                    break
                lam *= 0.5
            if best is None or resn < best[0]:
                best = (resn, un, tn, rn, cn)
            if lam == 1.0:
                break
        if best is None or not best[0] < res:
            raise ContinuationError(
                f"semismooth Newton stagnated at ||F|| = {res:.3e}", last=(u, t))
        active_prev = active
        res, u, t, r, c = best
        hist.append(res)
    alpha = p + t
    resid = fucik_residual(gp, alpha, t, u)
    u.setflags(write=False)
    return FucikPoint(alpha, t, p, t, u, resid, "continuation", it, tuple(hist))


@dataclass
class CurveSample:
    """Traced branch ordered by ``p`` plus the reference eigenvalues."""

    points: list
    lam1: float
    lam2: float
    truncated: bool = False
    diagnostic: str = ""
    branch: list = field(default_factory=list)  # seed sign (+1/-1) chosen per point

    @property
    def p(self):
        return np.array([q.p for q in self.points])

    @property
    def alpha(self):
        return np.array([q.alpha for q in self.points])

    @property
    def beta(self):
        return np.array([q.beta for q in self.points])

    def mirror(self) -> list:
        return [q.mirror() for q in self.points]

    def at(self, p: float, atol: float = 1e-12) -> FucikPoint:
        for q in self.points:
            if abs(q.p - p) <= atol:
                return q
        raise KeyError(f"no traced point at p = {p}")


def _trace_branch(gp, seed, t0, grid, tol):
    first = semismooth_newton(gp, grid[0], seed, t0, tol=tol)
    pts = [first]
    hist = [(first.p, np.array(first.u), first.t)]
    diag = ""
    for target in grid[1:]:
        p_cur = hist[-1][0]
        h = target - p_cur
        halvings = 0
        while p_cur < target - 1e-14:
            h = min(h, target - p_cur)
            pa, ua, ta = hist[-1]
            if len(hist) >= 2:
                pb, ub, tb = hist[-2]
                du, dt = (ua - ub) / (pa - pb), (ta - tb) / (pa - pb)
            else:
                du, dt = np.zeros_like(ua), 0.0
            pn = target if abs(p_cur + h - target) < 1e-14 else p_cur + h
            try:
                q = semismooth_newton(gp, pn, ua + h * du, ta + h * dt, tol=tol)
            except (ContinuationError, ValueError) as exc:
                halvings += 1
                if halvings > MAX_HALVINGS:
                    diag = f"corrector failed near p = {pn:.6g} after {MAX_HALVINGS} halvings: {exc}"
                    log.warning(diag)
                    return pts, diag
                h /= 2.0
                continue
            hist.append((pn, np.array(q.u), q.t))
            p_cur = pn
        pts.append(q)
    return pts, diag


def trace_curve(gp: GalerkinPair, p_max: float, dp: float | None = None,
                tol: float = 1e-10) -> CurveSample:
    """Trace ``p -> (p + c(p), c(p))`` on ``{0, dp, ..., p_max}``.

    Starts from ``(phi_2, lam_2)`` (lumped spectrum) with a secant predictor
    and the semismooth corrector. Both signs of ``phi_2`` are continued and the
    lower ``beta`` kept at each ``p``; on reflection-symmetric domains the two
    coincide. ``dp`` defaults to ``0.1 * lam_1``.
    """
    e1, e2 = lowest_eigenpairs(gp, 2, mass="lumped")
    if dp is None:
        dp = 0.1 * e1.value
    if not (p_max > 0 and 0 < dp <= p_max):
        raise ValueError("need p_max > 0 and 0 < dp <= p_max")
    n = int(math.floor(p_max / dp + 1e-9))
    grid = [k * dp for k in range(n + 1)]
    if grid[-1] < p_max - 1e-12:
        grid.append(p_max)
    branches = [_trace_branch(gp, sgn * e2.vector, e2.value, grid, tol) for sgn in (1.0, -1.0)]
    npts = min(len(b[0]) for b in branches)
    chosen, signs = [], []
    for k in range(npts):
        a, b = branches[0][0][k], branches[1][0][k]
        pick = 0 if a.beta <= b.beta + 1e-12 * abs(a.beta) else 1
        chosen.append((a, b)[pick])
        signs.append(1 if pick == 0 else -1)
    diag = "; ".join(d for _, d in branches if d)
    return CurveSample(chosen, e1.value, e2.value, truncated=npts < len(grid), diagnostic=diag,
                       branch=signs)


@dataclass
class PropertyCheck:
    name: str
    passed: bool
    worst: float
    witness: tuple


@dataclass
class CurveReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def validate_curve(cs: CurveSample, lip_slack: float = 1e-10) -> CurveReport:
    """Check (a) Lipschitz constant 1, (b) strict monotonicity of both
    coordinates, (c) ``beta > lam_1``, (d) monotone approach toward ``lam_1``.

    Every check records its worst value and the sample indices attaining it.
    """
    p, a, b = cs.p, cs.alpha, cs.beta
    if p.size < 3:
        raise ValueError("validate_curve needs at least 3 samples")
    i, j = np.triu_indices(p.size, k=1)
    excess = np.abs(b[i] - b[j]) - np.abs(p[i] - p[j])
    k = int(np.argmax(excess))
    lip = PropertyCheck("lipschitz", bool(excess[k] <= lip_slack), float(excess[k]),
                        (int(i[k]), int(j[k])))
    db, da = np.diff(b), np.diff(a)
    worst_b, worst_a = int(np.argmax(db)), int(np.argmin(da))
    mono_ok = bool(np.all(db < 0) and np.all(da > 0))
    worst = max(float(db[worst_b]), -float(da[worst_a]))
    mono = PropertyCheck("monotone", mono_ok, worst,
                         (worst_b, worst_b + 1) if db[worst_b] >= -da[worst_a] else (worst_a, worst_a + 1))
    gap = b - cs.lam1
    kmin = int(np.argmin(gap))
    lower = PropertyCheck("lower_bound", bool(gap[kmin] > 0), float(gap[kmin]), (kmin,))
    dg = np.diff(gap)
    kd = int(np.argmax(dg))
    approach_ok = bool(np.all(gap > 0) and np.all(dg < 0) and gap[-1] < gap[len(gap) // 2])
    approach = PropertyCheck("asymptote", approach_ok, float(dg[kd]), (kd, kd + 1))
    return CurveReport([lip, mono, lower, approach])


def trivial_lines_check(gp: GalerkinPair, beta_list, alpha_list=None) -> CurveReport:
    """Residuals of ``phi_1`` on ``{lam_1} x R`` and of ``-phi_1`` on ``R x {lam_1}``.

    Each must not exceed the lumped eigen-residual of ``phi_1``.
    """
    e1 = lowest_eigenpairs(gp, 1, mass="lumped")[0]
    lam1, phi = e1.value, e1.vector
    eig_res = dual_norm(gp, gp.A @ phi - lam1 * gp.lumped * phi)
    bound = eig_res * (1.0 + 1e-12) + 1e-300
    alpha_list = beta_list if alpha_list is None else alpha_list
    checks = []
    for beta in beta_list:
        r = fucik_residual(gp, lam1, beta, phi)
        checks.append(PropertyCheck(f"vertical beta={beta:g}", r <= bound, r, (lam1, beta)))
    for alpha in alpha_list:
        r = fucik_residual(gp, alpha, lam1, -phi)
        checks.append(PropertyCheck(f"horizontal alpha={alpha:g}", r <= bound, r, (alpha, lam1)))
    return CurveReport(checks)
