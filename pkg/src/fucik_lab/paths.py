"""Path-deformation engine shared by the constrained and unconstrained
mountain-pass solvers.

A path is a polyline of points joined by geodesics of a :class:`Geometry`
(great-circle arcs on the mass sphere, segments in the flat case). Its level
is the maximum of the functional along the whole interpolated curve, so it
never undershoots the minimax value. Each sweep moves the points near the top
by descent perpendicular to the path; the highest point climbs along the path
tangent instead (climbing image), which drives it onto the saddle. A sweep is
kept only if the level does not increase. When the level is flat but the top
point stops improving, a node is placed on the interpolated maximum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class Geometry:
    """Flat geometry with the metric ``<x, y> = x^T diag(w) y``."""

    def __init__(self, weights: np.ndarray):
        self.w = np.asarray(weights, dtype=float)

    def inner(self, x, y):
        return float(np.dot(x * self.w, y))

    def norm(self, x):
        return math.sqrt(max(self.inner(x, x), 0.0))

    def riemannian(self, u, g):
        return g / self.w

    def project(self, u, d):
        return d

    def retract(self, u):
        return u

    def coeffs(self, a, b, tau):
        tau = np.asarray(tau, dtype=float)
        return 1.0 - tau, tau


class Sphere(Geometry):
    """Unit sphere ``u^T diag(w) u = 1`` with great-circle interpolation."""

    def project(self, u, d):
        return d - self.inner(u, d) * u

    def retract(self, u):
        return u / self.norm(u)

    def coeffs(self, a, b, tau):
        tau = np.asarray(tau, dtype=float)
        c = min(1.0, max(-1.0, self.inner(a, b)))
        theta = math.acos(c)
        if theta < 1e-8 or math.pi - theta < 1e-8:
            # nearly coincident (or antipodal, guarded by chord insertion)
            c1, c2 = 1.0 - tau, tau
            scale = np.array([self.norm(c1[i] * a + c2[i] * b) for i in range(tau.size)]).reshape(tau.shape)
            return c1 / scale, c2 / scale
        st = math.sin(theta)
        return np.sin((1.0 - tau) * theta) / st, np.sin(tau * theta) / st


@dataclass
class Functional:
    """Quadratic-plus-nodal functional ``scale * u^T A u - nodal(u)``.

    ``nodal(U)`` maps a batch of rows to the non-quadratic part and
    ``nodal_grad(u)`` returns its gradient.
    """

    A: np.ndarray
    scale: float
    nodal: callable
    nodal_grad: callable

    def value(self, U, AU):
        return self.scale * np.einsum("...i,...i->...", U, AU) - self.nodal(U)

    def grad(self, u, Au):
        return 2.0 * self.scale * Au - self.nodal_grad(u)


@dataclass
class PathState:
    """Polyline state. ``level`` is the max along the interpolated path,
    ``argmax`` the index of the highest *point*."""

    points: np.ndarray
    values: np.ndarray
    level: float
    argmax: int
    eta: float
    sweeps: int = 0
    stalled: bool = False
    converged: bool = False
    criticality: float = math.inf
    history: list = field(default_factory=list)  # (sweep, level, criticality)


@dataclass
class DeformOptions:
    steps: int = 5000
    step_size: float = 0.01
    crit_tol: float = 1e-6
    flat_tol: float = 1e-10
    flat_sweeps: int = 5
    window: float = 0.1
    lazy_every: int = 10
    samples: int = 8
    chord_max: float | None = None
    max_points: int = 257
    min_step: float = 1e-14
    refine_after: int = 20
    patience: int = 200


class PathEngine:
    def __init__(self, functional: Functional, geometry: Geometry):
        self.f = functional
        self.geo = geometry

    # ------------------------------------------------------------ evaluation
    def values(self, P, AP):
        return self.f.value(P, AP)

    def level(self, P, AP, samples: int) -> float:
        """Max of the functional along the interpolated polyline."""
        return self.peak(P, AP, samples)[0]

    def peak(self, P, AP, samples: int) -> tuple[float, int, float]:
        """``(level, segment, tau)`` of the maximum along the interpolated polyline."""
        m = P.shape[0]
        tau = np.linspace(0.0, 1.0, samples + 1)
        best, where = -math.inf, None
        for i in range(m - 1):
            c1, c2 = self.geo.coeffs(P[i], P[i + 1], tau)
            U = c1[:, None] * P[i] + c2[:, None] * P[i + 1]
            AU = c1[:, None] * AP[i] + c2[:, None] * AP[i + 1]
            vals = self.f.value(U, AU)
            j = int(np.argmax(vals))
            if vals[j] > best:
                best, where = float(vals[j]), (i, j)
        i, j = where
        lo, hi = tau[max(j - 1, 0)], tau[min(j + 1, samples)]
        g, t = self._golden(P[i], P[i + 1], AP[i], AP[i + 1], lo, hi)
        return (g, i, t) if g > best else (best, i, float(tau[j]))

    def _golden(self, a, b, Aa, Ab, lo, hi, iters: int = 60) -> tuple[float, float]:
        def val(t):
            c1, c2 = self.geo.coeffs(a, b, np.array([t]))
            u = c1[0] * a + c2[0] * b
            return float(self.f.value(u, c1[0] * Aa + c2[0] * Ab))

        g = (math.sqrt(5.0) - 1.0) / 2.0
        x1, x2 = hi - g * (hi - lo), lo + g * (hi - lo)
        f1, f2 = val(x1), val(x2)
        best, arg = (f1, x1) if f1 >= f2 else (f2, x2)
        for _ in range(iters):
            if f1 > f2:
                hi, x2, f2 = x2, x1, f1
                x1 = hi - g * (hi - lo)
                f1 = val(x1)
            else:
                lo, x1, f1 = x1, x2, f2
                x2 = lo + g * (hi - lo)
                f2 = val(x2)
            for fv, xv in ((f1, x1), (f2, x2)):
                if fv > best:
                    best, arg = fv, xv
            if hi - lo < 1e-13:
                break
        return best, arg

    def criticality(self, u, Au) -> float:
        """Dual norm of the (projected) derivative at ``u``."""
        g = self.f.grad(u, Au)
        d = self.geo.project(u, self.geo.riemannian(u, g))
        return self.geo.norm(d)

    # ------------------------------------------------------------- deformation
    def _insert(self, P, AP, chord_max, max_points):
        rows, arows = [P[0]], [AP[0]]
        for i in range(P.shape[0] - 1):
            a, b = P[i], P[i + 1]
            chord = self.geo.norm(b - a)
            k = int(math.ceil(chord / chord_max)) if chord > chord_max else 1
            k = min(k, max(1, max_points - P.shape[0] - (len(rows) - i - 1)))
            if k > 1:
                tau = np.arange(1, k) / k
                c1, c2 = self.geo.coeffs(a, b, tau)
                for j in range(k - 1):
                    rows.append(c1[j] * a + c2[j] * b)
                    arows.append(c1[j] * AP[i] + c2[j] * AP[i + 1])
            rows.append(b)
            arows.append(AP[i + 1])
        return np.array(rows), np.array(arows)

    def _insert_peak(self, P, AP, samples, min_chord):
        """Add a node where the interpolated maximum sits inside a long enough segment."""
        _, i, t = self.peak(P, AP, samples)
        if not 0.05 < t < 0.95 or self.geo.norm(P[i + 1] - P[i]) < min_chord:
            return P, AP, False
        c1, c2 = self.geo.coeffs(P[i], P[i + 1], np.array([t]))
        u = c1[0] * P[i] + c2[0] * P[i + 1]
        Au = c1[0] * AP[i] + c2[0] * AP[i + 1]
        return np.insert(P, i + 1, u, axis=0), np.insert(AP, i + 1, Au, axis=0), True

    def _tangent(self, P, i):
        t = self.geo.project(P[i], P[i + 1] - P[i - 1])
        nrm = self.geo.norm(t)
        return t / nrm if nrm > 0 else t

    def start(self, P, step_size: float, samples: int = 8) -> PathState:
        P = np.array(P, dtype=float)
        AP = P @ self.f.A
        vals = self.values(P, AP)
        am = 1 + int(np.argmax(vals[1:-1])) if P.shape[0] > 2 else 0
        st = PathState(P, vals, self.level(P, AP, samples), am, step_size)
        st.criticality = self.criticality(P[am], AP[am])
        return st

    def deform(self, state: PathState, opts: DeformOptions) -> PathState:
        P = state.points.copy()
        AP = P @ self.f.A
        level = state.level
        eta = state.eta
        eta0 = opts.step_size
        chord_max = opts.chord_max or 2.0 * max(
            self.geo.norm(P[i + 1] - P[i]) for i in range(P.shape[0] - 1))
        flat_run = 0
        best_crit, since_best = math.inf, 0
        hist = list(state.history)
        sweep = state.sweeps
        stalled = converged = False
        crit = state.criticality
        while sweep < state.sweeps + opts.steps:
            sweep += 1
            vals = self.values(P, AP)
            inner = np.arange(1, P.shape[0] - 1)
            top = inner[int(np.argmax(vals[inner]))]
            if sweep % opts.lazy_every == 0:
                window = inner
            else:
                vmax, vmin = vals.max(), vals.min()
                window = inner[vals[inner] >= vmax - opts.window * (vmax - vmin)]
            dirs = {}
            for i in window:
                g = self.f.grad(P[i], AP[i])
                d = self.geo.project(P[i], self.geo.riemannian(P[i], g))
                tan = self._tangent(P, i)
                along = self.geo.inner(d, tan)
                dirs[i] = (d - along * tan, along * tan)
            accepted = False
            climb = True
            while not accepted:
                Q, AQ = P.copy(), AP.copy()
                for i, (perp, par) in dirs.items():
                    # the top point ascends along the path, all others only move across it
                    d = perp - par if (climb and i == top) else perp
                    Q[i] = self.geo.retract(P[i] - eta * d)
                    AQ[i] = self.f.A @ Q[i]
                new = self.level(Q, AQ, opts.samples)
                if new <= level:
                    accepted = True
                elif climb:
                    climb = False
                else:
                    eta *= 0.5
                    climb = True
                    if eta < opts.min_step:
                        break
            if not accepted:
                # no admissible step: a critical top point means the path is already optimal
                top = 1 + int(np.argmax(self.values(P, AP)[1:-1]))
                crit = self.criticality(P[top], AP[top])
                converged = crit < opts.crit_tol
                stalled = not converged
                break
            decrease = level - new
            P, AP, level = Q, AQ, new
            eta = min(eta * 1.25, eta0)
            if P.shape[0] < opts.max_points:
                P, AP = self._insert(P, AP, chord_max, opts.max_points)
            vals = self.values(P, AP)
            top = 1 + int(np.argmax(vals[1:-1]))
            crit = self.criticality(P[top], AP[top])
            hist.append((sweep, level, crit))
            flat_run = flat_run + 1 if decrease <= opts.flat_tol * max(1.0, abs(level)) else 0
            if flat_run >= opts.flat_sweeps and crit < opts.crit_tol:
                converged = True
                break
            if crit < best_crit * (1.0 - 1e-3):
                best_crit, since_best = crit, 0
            else:
                since_best += 1
            if flat_run >= opts.flat_sweeps and since_best >= opts.refine_after \
                    and P.shape[0] < opts.max_points:
                # the saddle may sit between nodes: put a node on the path maximum
                P, AP, added = self._insert_peak(P, AP, opts.samples, chord_max / 64.0)
                if added:
                    since_best = 0
            if flat_run >= opts.flat_sweeps and since_best >= opts.patience:
                # level settled and the top point stopped improving
                break
        vals = self.values(P, AP)
        top = 1 + int(np.argmax(vals[1:-1]))
        return PathState(P, vals, level, top, eta, sweep, stalled, converged,
                         self.criticality(P[top], AP[top]), hist)
