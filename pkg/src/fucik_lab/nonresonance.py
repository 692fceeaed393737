"""Mountain-pass solver for ``-L_K u = f(x, u)`` with asymptotically
nonresonant slopes below a point of the first Fucik curve.

A :class:`NonlinearitySpec` bundles ``f``, its primitive ``F``, declared
slope bounds and the target curve point ``(alpha, beta)``. The hypotheses on
the bounds are checked on the nodal grid when the spec is built; a spec that
fails them is refused with the violated inequality named.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .assembly import GalerkinPair
from .errors import NonresonanceError, SpecError
from .paths import DeformOptions, Functional, Geometry, PathEngine
from .spectrum import lowest_eigenpairs

log = logging.getLogger(__name__)

ASYMPTOTIC_SCALE = 1e6
ASYMPTOTIC_RTOL = 1e-5
PRIMITIVE_TOL = 1e-8
QUAD_TOL = 1e-10
R_MAX = 2.0**20
MARGIN = 1.0


def _as_fn(v) -> Callable:
    if callable(v):
        return v
    c = float(v)
    return lambda x: np.full(np.shape(x), c)


@dataclass
class SpecReport:
    """Outcome of the hypothesis gate on the nodal grid."""

    strict_plus: bool  # Delta_+ < alpha at every node
    strict_minus: bool  # Delta_- < beta at every node
    measure_plus: float  # lumped measure of {delta_+ > lam_1}
    measure_minus: float
    asymptotic_scale: float
    asymptotic_worst: float  # heuristic stand-in for the uniform limits
    primitive_worst: float
    notes: list = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class NonlinearitySpec:
    """Nonlinearity ``f(x, s)`` with primitive and declared bounds.

    ``f``, ``F`` and ``df`` take broadcastable arrays ``(x, s)``. ``F`` and
    ``df`` may be omitted: ``F`` then comes from adaptive quadrature and
    ``df`` from a central difference. Bounds are constants or maps of ``x``.
    """

    kind: str
    f: Callable
    gamma_plus: object
    Gamma_plus: object
    gamma_minus: object
    Gamma_minus: object
    delta_plus: object
    Delta_plus: object
    delta_minus: object
    Delta_minus: object
    alpha: float
    beta: float
    lam1: float
    nodes: np.ndarray
    weights: np.ndarray
    F: Callable | None = None
    df: Callable | None = None
    params: dict = field(default_factory=dict)
    report: SpecReport | None = field(default=None, init=False)

    def __post_init__(self):
        object.__setattr__(self, "report", _validate(self))

    @classmethod
    def build(cls, gp: GalerkinPair, kind: str, f, bounds: dict, target, F=None, df=None,
              params=None) -> "NonlinearitySpec":
        lam1 = lowest_eigenpairs(gp, 1, mass="lumped")[0].value
        alpha, beta = (float(v) for v in target)
        return cls(kind, f, bounds["gamma_plus"], bounds["Gamma_plus"], bounds["gamma_minus"],
                   bounds["Gamma_minus"], bounds["delta_plus"], bounds["Delta_plus"],
                   bounds["delta_minus"], bounds["Delta_minus"], alpha, beta, lam1,
                   np.array(gp.nodes), np.array(gp.lumped), F, df, dict(params or {}))

    @classmethod
    def linear_shift(cls, gp: GalerkinPair, m: float | None = None, c: float = 1.0,
                     target=None) -> "NonlinearitySpec":
        """``f = m s + c``; ``m`` defaults to ``(lam_1 + lam_2) / 2`` and the
        target to ``(lam_2, lam_2)``."""
        e1, e2 = lowest_eigenpairs(gp, 2, mass="lumped")
        m = 0.5 * (e1.value + e2.value) if m is None else float(m)
        target = (e2.value, e2.value) if target is None else target
        b = {k: m for k in ("gamma_plus", "Gamma_plus", "gamma_minus", "Gamma_minus",
                            "delta_plus", "Delta_plus", "delta_minus", "Delta_minus")}
        return cls.build(gp, "linear-shift", lambda x, s: m * np.asarray(s) + c, b, target,
                         F=lambda x, s: 0.5 * m * np.asarray(s) ** 2 + c * np.asarray(s),
                         df=lambda x, s: np.full(np.broadcast(x, s).shape, m),
                         params={"m": m, "c": c})

    @classmethod
    def piecewise_asymptotic(cls, gp: GalerkinPair, a: float, b: float, target,
                             c: float = 0.0) -> "NonlinearitySpec":
        """``f = a s+ - b s- + arctan(s) + c``: slopes ``a`` at ``+inf`` and
        ``b`` at ``-inf``. With ``c = 0`` the trivial solution ``u = 0`` exists."""
        a, b, c = float(a), float(b), float(c)

        def f(x, s):
            s = np.asarray(s, dtype=float)
            return a * np.maximum(s, 0.0) - b * np.maximum(-s, 0.0) + np.arctan(s) + c

        def F(x, s):
            s = np.asarray(s, dtype=float)
            return (0.5 * a * np.maximum(s, 0.0) ** 2 + 0.5 * b * np.maximum(-s, 0.0) ** 2
                    + s * np.arctan(s) - 0.5 * np.log1p(s * s) + c * s)

        def df(x, s):
            s = np.asarray(s, dtype=float)
            return np.where(s > 0, a, b) + 1.0 / (1.0 + s * s)

        bounds = {"gamma_plus": a, "Gamma_plus": a, "delta_plus": a, "Delta_plus": a,
                  "gamma_minus": b, "Gamma_minus": b, "delta_minus": b, "Delta_minus": b}
        return cls.build(gp, "piecewise-asymptotic", f, bounds, target, F=F, df=df,
                         params={"a": a, "b": b, "c": c})

    @classmethod
    def custom_table(cls, gp: GalerkinPair, knots, values, target) -> "NonlinearitySpec":
        """Piecewise-linear ``f(s)`` through ``(knots, values)``, extended
        linearly beyond the table; the end slopes are the asymptotic slopes."""
        k = np.asarray(knots, dtype=float)
        v = np.asarray(values, dtype=float)
        if k.ndim != 1 or k.size < 2 or k.shape != v.shape or np.any(np.diff(k) <= 0):
            raise SpecError("custom table needs >= 2 strictly increasing knots with matching values")
        if not k[0] <= 0.0 <= k[-1]:
            raise SpecError("custom table must bracket s = 0")
        slopes = np.diff(v) / np.diff(k)
        # primitive at each knot, measured from s = 0
        seg = 0.5 * (v[1:] + v[:-1]) * np.diff(k)
        Fk = np.concatenate([[0.0], np.cumsum(seg)])
        i0 = int(np.clip(np.searchsorted(k, 0.0, side="right") - 1, 0, k.size - 2))
        Fk = Fk - (Fk[i0] + v[i0] * (0.0 - k[i0]) + 0.5 * slopes[i0] * k[i0] ** 2)

        def locate(s):
            return np.clip(np.searchsorted(k, s, side="right") - 1, 0, k.size - 2)

        def f(x, s):
            s = np.asarray(s, dtype=float)
            i = locate(s)
            return v[i] + slopes[i] * (s - k[i])

        def F(x, s):
            s = np.asarray(s, dtype=float)
            i = locate(s)
            ds = s - k[i]
            return Fk[i] + v[i] * ds + 0.5 * slopes[i] * ds * ds

        def df(x, s):
            return slopes[locate(np.asarray(s, dtype=float))]

        sp, sm = float(slopes[-1]), float(slopes[0])
        bounds = {"gamma_plus": sp, "Gamma_plus": sp, "delta_plus": sp, "Delta_plus": sp,
                  "gamma_minus": sm, "Gamma_minus": sm, "delta_minus": sm, "Delta_minus": sm}
        return cls.build(gp, "custom-table", f, bounds, target, F=F, df=df,
                         params={"knots": k.tolist(), "values": v.tolist()})

    # ------------------------------------------------------------ evaluation
    def eval_f(self, s):
        return np.asarray(self.f(self.nodes, s), dtype=float)

    def eval_F(self, s):
        s = np.asarray(s, dtype=float)
        if self.F is not None:
            return np.asarray(self.F(self.nodes, s), dtype=float)
        out = np.empty(s.shape)
        x = np.broadcast_to(self.nodes, s.shape)
        for idx in np.ndindex(s.shape):
            xi = x[idx]
            out[idx] = integrate.quad(lambda t: float(self.f(xi, t)), 0.0, float(s[idx]),
                                      epsabs=QUAD_TOL, epsrel=1e-12, limit=200)[0]
        return out

    def eval_df(self, s):
        s = np.asarray(s, dtype=float)
        if self.df is not None:
            return np.asarray(self.df(self.nodes, s), dtype=float)
        h = 1e-6 * np.maximum(1.0, np.abs(s))
        return (self.eval_f(s + h) - self.eval_f(s - h)) / (2.0 * h)

    def bound(self, name: str) -> np.ndarray:
        return np.asarray(_as_fn(getattr(self, name))(self.nodes), dtype=float)


def _validate(spec: NonlinearitySpec) -> SpecReport:
    lam1, al, be = spec.lam1, spec.alpha, spec.beta
    slack = 1e-12 * max(1.0, abs(lam1), abs(al), abs(be))
    b = {name: spec.bound(name) for name in ("gamma_plus", "Gamma_plus", "gamma_minus",
                                             "Gamma_minus", "delta_plus", "Delta_plus",
                                             "delta_minus", "Delta_minus")}

    def need(cond, what):
        if not np.all(cond):
            i = int(np.argmin(cond))
            raise SpecError(f"hypothesis violated: {what} (first failing node x = {spec.nodes[i]:.6g})")

    need(b["gamma_plus"] >= lam1 - slack, "lam_1 <= gamma_+")
    need(b["gamma_plus"] <= b["Gamma_plus"] + slack, "gamma_+ <= Gamma_+")
    need(b["Gamma_plus"] <= al + slack, "Gamma_+ <= alpha")
    need(b["gamma_minus"] >= lam1 - slack, "lam_1 <= gamma_-")
    need(b["gamma_minus"] <= b["Gamma_minus"] + slack, "gamma_- <= Gamma_-")
    need(b["Gamma_minus"] <= be + slack, "Gamma_- <= beta")
    need(b["delta_plus"] >= lam1 - slack, "lam_1 <= delta_+")
    need(b["delta_plus"] <= b["Delta_plus"] + slack, "delta_+ <= Delta_+")
    need(b["Delta_plus"] <= al + slack, "Delta_+ <= alpha")
    need(b["delta_minus"] >= lam1 - slack, "lam_1 <= delta_-")
    need(b["delta_minus"] <= b["Delta_minus"] + slack, "delta_- <= Delta_-")
    need(b["Delta_minus"] <= be + slack, "Delta_- <= beta")
    w = spec.weights
    mp = float(w[b["delta_plus"] > lam1 + slack].sum())
    mm = float(w[b["delta_minus"] > lam1 + slack].sum())
    if mp <= 0:
        raise SpecError("hypothesis violated: delta_+ > lam_1 on a set of positive measure")
    if mm <= 0:
        raise SpecError("hypothesis violated: delta_- > lam_1 on a set of positive measure")
    sp = bool(np.all(b["Delta_plus"] < al - slack))
    sm = bool(np.all(b["Delta_minus"] < be - slack))
    if not (sp or sm):
        raise SpecError("hypothesis violated: Delta_+ < alpha a.e. or Delta_- < beta a.e.")

    # uniform limits can only be sampled; this is a heuristic check
    S = ASYMPTOTIC_SCALE
    worst = 0.0
    for sgn, lo, hi, dlo, dhi in ((1.0, "gamma_plus", "Gamma_plus", "delta_plus", "Delta_plus"),
                                  (-1.0, "gamma_minus", "Gamma_minus", "delta_minus", "Delta_minus")):
        s = np.full(spec.nodes.shape, sgn * S)
        ratio = spec.eval_f(s) / s
        quad = 2.0 * spec.eval_F(s) / (S * S)
        for val, l, h, what in ((ratio, b[lo], b[hi], f"f/s at s = {sgn * S:g}"),
                                (quad, b[dlo], b[dhi], f"2F/s^2 at s = {sgn * S:g}")):
            tol = ASYMPTOTIC_RTOL * np.maximum(1.0, np.abs(h))
            excess = np.maximum(l - val, val - h)
            worst = max(worst, float(np.max(excess / tol)))
            need(excess <= tol, f"asymptotic slope bound ({what})")

    # primitive consistency on a few magnitudes at three nodes
    pw = 0.0
    picks = np.unique(np.linspace(0, spec.nodes.size - 1, 3).astype(int))
    for i in picks:
        xi = spec.nodes[i]
        for s in (-10.0, -1.0, -0.3, 0.4, 1.0, 10.0):
            ref = integrate.quad(lambda t: float(spec.f(xi, t)), 0.0, s, epsabs=1e-13,
                                 epsrel=1e-13, limit=200)[0]
            got = spec.eval_F(np.full(spec.nodes.shape, s))[i]
            pw = max(pw, abs(got - ref) / (1.0 + s * s))
    need(np.array([pw <= PRIMITIVE_TOL]), "F is a primitive of f")
    return SpecReport(sp, sm, mp, mm, S, worst, pw,
                      notes=["asymptotic bounds sampled at finite |s|; a heuristic stand-in for the limits"])


def psi(gp: GalerkinPair, spec: NonlinearitySpec, u) -> float:
    """``u^T A u / 2 - sum_i w_i F(x_i, u_i)``."""
    u = np.asarray(u, dtype=float)
    return float(0.5 * u @ gp.A @ u - np.dot(gp.lumped, spec.eval_F(u)))


def grad_psi(gp: GalerkinPair, spec: NonlinearitySpec, u) -> np.ndarray:
    """``A u - M_L f(x, u)``."""
    u = np.asarray(u, dtype=float)
    return gp.A @ u - gp.lumped * spec.eval_f(u)


def grad_norm(gp: GalerkinPair, g) -> float:
    return float(np.sqrt(np.sum(np.asarray(g) ** 2 / gp.lumped)))


def _phi1(gp):
    return np.array(lowest_eigenpairs(gp, 1, mass="lumped")[0].vector)


def select_R(gp: GalerkinPair, spec: NonlinearitySpec, margin: float = MARGIN,
             trace: list | None = None) -> float:
    """Smallest ``R`` in ``1, 2, 4, ...`` with ``max Psi(+-R phi_1) < -margin``.

    ``trace`` (if given) receives ``(R, Psi(R phi_1), Psi(-R phi_1))`` for each
    trial. Raises ``NonresonanceError`` beyond ``2**20``.
    """
    phi = _phi1(gp)
    R = 1.0
    while R <= R_MAX:
        vp, vm = psi(gp, spec, R * phi), psi(gp, spec, -R * phi)
        if trace is not None:
            trace.append((R, vp, vm))
        if max(vp, vm) < -margin:
            return R
        R *= 2.0
    raise NonresonanceError(
        f"no R <= 2^20 puts Psi(+-R phi_1) below -{margin}; the slope hypotheses are "
        "probably not strict")


@dataclass(frozen=True, eq=False)
class EnergyCritical:
    u: np.ndarray
    value: float
    grad_norm: float
    classification: str  # mountain-pass | minimizer | unknown
    R: float
    endpoint_level: float
    path_level: float
    newton_iterations: int
    history: list = field(default_factory=list)


def _newton(gp, spec, u, tol, max_iter):
    g = grad_psi(gp, spec, u)
    r = grad_norm(gp, g)
    it = 0
    while r > tol and it < max_iter:
        it += 1
        J = gp.A - np.diag(gp.lumped * spec.eval_df(u))
        try:
            d = np.linalg.solve(J, -g)
        except np.linalg.LinAlgError:
            break
        lam = 1.0
        for _ in range(40):
            un = u + lam * d
            gn = grad_psi(gp, spec, un)
            rn = grad_norm(gp, gn)
            if rn < (1.0 - 1e-4 * lam) * r:
                break
            lam *= 0.5
        else:
            break
        u, g, r = un, gn, rn
    return u, r, it


def solve_nonresonance(gp: GalerkinPair, spec: NonlinearitySpec, tol: float = 1e-8,
                       n_path: int = 33, steps: int = 5000, path_tol: float = 1e-3,
                       max_newton: int = 50) -> EnergyCritical:
    """Mountain-pass critical point of ``Psi`` between ``-R phi_1`` and ``R phi_1``.

    The straight segment is deformed (flat geometry) until the top point has
    gradient norm below ``path_tol``, then polished by damped Newton with the
    nodal-slope Jacobian ``A - M_L diag(f_s)``. If Newton does not reach
    ``tol`` the best iterate is returned classified ``"unknown"``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    R = select_R(gp, spec)
    phi = _phi1(gp)
    w = gp.lumped
    end = max(psi(gp, spec, R * phi), psi(gp, spec, -R * phi))
    fun = Functional(gp.A, 0.5,
                     nodal=lambda U: np.einsum("...i,i->...", spec.eval_F(U), w),
                     nodal_grad=lambda u: w * spec.eval_f(u))
    engine = PathEngine(fun, Geometry(w))
    tau = np.linspace(-1.0, 1.0, n_path)
    P = tau[:, None] * (R * phi)
    lam2 = lowest_eigenpairs(gp, 2, mass="lumped")[1].value
    eta0 = 0.1 / lam2
    state = engine.start(P, eta0)
    opts = DeformOptions(steps=steps, step_size=eta0, crit_tol=path_tol, flat_tol=1e-10)
    state = engine.deform(state, opts)
    if state.stalled and state.criticality > path_tol:
        log.warning("deformation stalled with criticality %.3e", state.criticality)
    u0 = state.points[state.argmax]
    u, r, its = _newton(gp, spec, np.array(u0), tol, max_newton)
    value = psi(gp, spec, u)
    if r > tol:
        cls = "unknown"
    else:
        H = gp.A - np.diag(w * spec.eval_df(u))
        neg = int(np.sum(np.linalg.eigvalsh(H / np.sqrt(np.outer(w, w))) < 0))
        if neg == 0:
            cls = "minimizer"
        elif value > end:
            cls = "mountain-pass"
        else:
            cls = "unknown"
    u.setflags(write=False)
    return EnergyCritical(u, value, r, cls, R, end, state.level, its, state.history)


def phi_functional(gp: GalerkinPair, spec: NonlinearitySpec, u) -> float:
    """``u^T A u - sum w Delta_+ (u+)^2 - sum w Delta_- (u-)^2``."""
    u = np.asarray(u, dtype=float)
    up, um = np.maximum(u, 0.0), np.maximum(-u, 0.0)
    w = gp.lumped
    return float(u @ gp.A @ u - np.dot(w * spec.bound("Delta_plus"), up * up)
                 - np.dot(w * spec.bound("Delta_minus"), um * um))


def phi_endpoints(gp: GalerkinPair, spec: NonlinearitySpec) -> tuple[float, float]:
    """``(Phi(phi_1), Phi(-phi_1))`` for the lumped-normalized ``phi_1``."""
    phi = _phi1(gp)
    return phi_functional(gp, spec, phi), phi_functional(gp, spec, -phi)
