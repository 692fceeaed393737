"""Galerkin stiffness and mass forms for the nonlocal energy on P1 elements.

For functions vanishing outside the domain the energy splits as::

    <u, v> = int_{Om x Om} (u(x)-u(y)) (v(x)-v(y)) K(x-y) dx dy
             + 2 int_Om u v kappa dx

The double integral is accumulated over element pairs:

* identical elements reduce to a one-dimensional Gauss-Jacobi rule in the
  separation ``z`` (the integrand is ``(h-|z|) z^2 K(z)``);
* elements sharing a vertex use a Duffy split of the pair rectangle into two
  triangles collapsed onto the common corner, which turns the singular factor
  into the Jacobi weight ``r^(2-2s)``;
* all remaining pairs use tensor Gauss-Legendre rules.

The tail term uses Gauss rules on interior elements and geometrically graded
subdivision on elements touching the boundary, where ``kappa ~ dist^-2s``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import struct
import warnings
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .domain_kernel import Domain, Kernel, Mesh
from .errors import AssemblyError

log = logging.getLogger(__name__)

# quadrature orders; pairs closer than NEAR_GAP element widths get the larger rule
NEAR_GAP = 4.0
Q_NEAR, Q_FAR = 8, 4
Q_TAIL = 8
Q_SELF, Q_DUFFY_R, Q_DUFFY_T = 12, 10, 14
GRADE_RATIO, GRADE_LEVELS, Q_GRADE = 0.25, 40, 12
CACHE_MAGIC = b"FKLB"
CACHE_VERSION = 1


@lru_cache(maxsize=None)
def _legendre01(q: int):
    x, w = roots_legendre(q)
    return (x + 1.0) / 2.0, w / 2.0


@lru_cache(maxsize=None)
def _jacobi01(q: int, a: float, b: float):
    """Nodes/weights on [0, 1] for the weight ``(1-r)^a r^b``."""
    x, w = roots_jacobi(q, a, b)
    return (x + 1.0) / 2.0, w / 2.0 ** (1.0 + a + b)


@lru_cache(maxsize=None)
def _graded01(ratio: float, levels: int, q: int):
    """Composite rule on [0, 1] refined geometrically toward 0."""
    xg, wg = _legendre01(q)
    edges = ratio ** np.arange(levels + 1)
    edges = np.append(edges, 0.0)[::-1]
    lo, hi = edges[:-1], edges[1:]
    x = (lo[:, None] + (hi - lo)[:, None] * xg[None, :]).ravel()
    w = ((hi - lo)[:, None] * wg[None, :]).ravel()
    return x, w


@dataclass(frozen=True, eq=False)
class GalerkinPair:
    """Assembled stiffness ``A``, consistent mass ``M`` and lumped mass weights.

    ``lumped`` holds the diagonal of ``M_L`` (row sums of ``M``).
    """

    A: np.ndarray
    M: np.ndarray
    lumped: np.ndarray
    mesh: Mesh
    kernel: Kernel

    @property
    def M_L(self) -> np.ndarray:
        return np.diag(self.lumped)

    @property
    def n(self) -> int:
        return self.lumped.size

    @property
    def nodes(self) -> np.ndarray:
        return self.mesh.nodes


def _self_integral(k: Kernel, h: np.ndarray) -> np.ndarray:
    """``int_{E x E} (x-y)^2 K(x-y)`` for elements of width ``h``.

    Equals ``2 lam h^(3-2s) int_0^1 (1-r) r^(1-2s) m(h r) dr``.
    """
    s = k.s
    r, w = _jacobi01(Q_SELF, 1.0, 1.0 - 2.0 * s)
    m = k.multiplier(h[:, None] * r[None, :])
    return 2.0 * k.lam * h ** (3.0 - 2.0 * s) * (m @ w)


def _adjacent_local(k: Kernel, h1: np.ndarray, h2: np.ndarray) -> np.ndarray:
    """Local 3x3 matrices for vertex-sharing elements (left width ``h1``,
    right width ``h2``), dofs ordered (left, shared, right); ordered pairs in
    one direction only.

    With ``xi = x0 - x``, ``eta = y - x0`` scaled to the unit square, the hat
    differences are ``X``, ``Y - X`` and ``-Y``. Each triangle is collapsed
    onto the corner (``X = r, Y = r t`` and ``Y = r, X = r t``).
    """
    s = k.s
    rr, wr = _jacobi01(Q_DUFFY_R, 0.0, 2.0 - 2.0 * s)
    tt, wt = _legendre01(Q_DUFFY_T)
    one = np.ones_like(tt)
    d1 = np.stack([one, tt - 1.0, -tt])      # X = r, Y = r t
    d2 = np.stack([tt, 1.0 - tt, -one])      # Y = r, X = r t
    out = np.zeros((h1.size, 3, 3))
    for d, c in ((d1, h1[:, None] + h2[:, None] * tt[None, :]),
                 (d2, h1[:, None] * tt[None, :] + h2[:, None])):
        # radial factor int_0^1 r^(2-2s) m(r c) dr, exact for m == 1
        rad = np.einsum("r,ptr->pt", wr, k.multiplier(c[:, :, None] * rr[None, None, :]))
        g = wt[None, :] * c ** (-1.0 - 2.0 * s) * rad
        out += np.einsum("pt,it,jt->pij", g, d, d)
    return k.lam * (h1 * h2)[:, None, None] * out


def _separated_blocks(k: Kernel, xa, ha, xb, hb, q: int):
    """Gauss blocks for well-separated element pairs.

    Returns ``(Gaa, Gbb, C)`` with ``Gaa[p,p'] = int psi_p psi_p'(x) K``,
    ``Gbb`` likewise in ``y`` and ``C[p,q] = int psi_p(x) psi_q(y) K``.
    """
    xi, w = _legendre01(q)
    psi = np.stack([1.0 - xi, xi])
    X = xa[:, None] + ha[:, None] * xi[None, :]
    Y = xb[:, None] + hb[:, None] * xi[None, :]
    K = k(X[:, :, None] - Y[:, None, :])
    K *= (ha * hb)[:, None, None]
    Kw = K * w[None, :, None] * w[None, None, :]
    kx = Kw.sum(axis=2)
    ky = Kw.sum(axis=1)
    Gaa = np.einsum("pi,qi,ni->npq", psi, psi, kx)
    Gbb = np.einsum("pi,qi,ni->npq", psi, psi, ky)
    C = np.einsum("pi,qj,nij->npq", psi, psi, Kw)
    return Gaa, Gbb, C


class _Accumulator:
    """Scatter-add of local blocks into a dense matrix, skipping -1 dofs."""

    def __init__(self, n):
        self.n = n
        self.rows, self.cols, self.vals = [], [], []

    def add(self, dofs_r, dofs_c, blocks):
        # dofs_r: (P, a), dofs_c: (P, b), blocks: (P, a, b)
        r = np.broadcast_to(dofs_r[:, :, None], blocks.shape)
        c = np.broadcast_to(dofs_c[:, None, :], blocks.shape)
        keep = (r >= 0) & (c >= 0)
        self.rows.append(r[keep])
        self.cols.append(c[keep])
        self.vals.append(blocks[keep])

    def dense(self):
        n = self.n
        if not self.rows:
            return np.zeros((n, n))
        idx = np.concatenate(self.rows) * n + np.concatenate(self.cols)
        return np.bincount(idx, weights=np.concatenate(self.vals), minlength=n * n).reshape(n, n)


def _tail_weights(mesh: Mesh, kernel: Kernel):
    """Per-element quadrature points/weights for the exterior-tail term."""
    dom = mesh.domain
    ends = np.array([e for iv in dom.intervals for e in iv])
    xg, wg = _legendre01(Q_TAIL)
    xr, wr = _graded01(GRADE_RATIO, GRADE_LEVELS, Q_GRADE)
    out = []
    for e, (x0, x1) in enumerate(mesh.elements):
        h = x1 - x0
        at_left = np.isclose(ends, x0, rtol=0, atol=1e-14 * max(1.0, abs(x0))).any()
        at_right = np.isclose(ends, x1, rtol=0, atol=1e-14 * max(1.0, abs(x1))).any()
        if at_left and at_right:
            half = np.concatenate([xr / 2.0, 1.0 - xr[::-1] / 2.0])
            xi, w = half, np.concatenate([wr / 2.0, wr[::-1] / 2.0])
        elif at_left:
            xi, w = xr, wr
        elif at_right:
            xi, w = 1.0 - xr[::-1], wr[::-1]
        else:
            xi, w = xg, wg
        keep = (xi > 0) & (xi < 1)
        xi, w = xi[keep], w[keep]
        kap = _kappa_offsets(kernel, dom, x0, x1, xi)
        psi = np.stack([1.0 - xi, xi])
        out.append(2.0 * h * np.einsum("pi,qi,i->pq", psi, psi, w * kap))
    return np.array(out)


def _kappa_offsets(kernel: Kernel, dom: Domain, x0: float, x1: float, xi: np.ndarray):
    """``kappa`` at ``x0 + (x1-x0) xi`` with distances formed from offsets,
    so points graded toward an endpoint never round onto it."""
    h = x1 - x0
    kap = np.zeros_like(xi)
    for c, e in dom.complement():
        if e <= x0:  # piece on the left
            dn = (x0 - e) + h * xi
            df = (x0 - c) + h * xi
        else:  # piece on the right
            dn = (c - x1) + h * (1.0 - xi)
            df = (e - x1) + h * (1.0 - xi)
        kap += kernel.tail(dn) - kernel.tail(df)
    return kap


def assemble(mesh: Mesh, kernel: Kernel, *, batch: int = 2048) -> GalerkinPair:
    """Assemble the stiffness and mass forms on ``mesh``."""
    n = mesh.n_dofs
    E = mesh.elements
    h = mesh.widths
    dofs = mesh.element_dofs
    ne = E.shape[0]
    acc = _Accumulator(n)

    # identical element pairs
    I = _self_integral(kernel, h)
    unit = np.array([[1.0, -1.0], [-1.0, 1.0]])
    blocks = unit[None] * (I / h**2)[:, None, None]
    _check(blocks, "self", np.arange(ne), np.arange(ne))
    acc.add(dofs, dofs, blocks)

    # vertex-sharing pairs (e, e+1) in the same interval; both orders
    same = mesh.element_interval[:-1] == mesh.element_interval[1:]
    left = np.nonzero(same)[0]
    if left.size:
        right = left + 1
        loc = 2.0 * _adjacent_local(kernel, h[left], h[right])
        _check(loc, "adjacent", left, right)
        d3 = np.column_stack([dofs[left, 0], dofs[left, 1], dofs[right, 1]])
        acc.add(d3, d3, loc)

    # separated pairs a < b
    ia, ib = np.triu_indices(ne, k=1)
    adjacent = (ib == ia + 1) & (mesh.element_interval[ia] == mesh.element_interval[ib])
    ia, ib = ia[~adjacent], ib[~adjacent]
    gap = np.maximum(E[ib, 0] - E[ia, 1], E[ia, 0] - E[ib, 1])
    near = gap < NEAR_GAP * np.maximum(h[ia], h[ib])
    for mask, q in ((near, Q_NEAR), (~near, Q_FAR)):
        pa, pb = ia[mask], ib[mask]
        for lo in range(0, pa.size, batch):
            a, b = pa[lo:lo + batch], pb[lo:lo + batch]
            Gaa, Gbb, C = _separated_blocks(kernel, E[a, 0], h[a], E[b, 0], h[b], q)
            _check(C, "separated", a, b)
            acc.add(dofs[a], dofs[a], 2.0 * Gaa)
            acc.add(dofs[b], dofs[b], 2.0 * Gbb)
            acc.add(dofs[a], dofs[b], -2.0 * C)
            acc.add(dofs[b], dofs[a], -2.0 * np.transpose(C, (0, 2, 1)))

    tail = _tail_weights(mesh, kernel)
    _check(tail, "tail", np.arange(ne), np.arange(ne))
    acc.add(dofs, dofs, tail)

    A = acc.dense()
    A = (A + A.T) / 2.0

    mass = _Accumulator(n)
    mass.add(dofs, dofs, (h / 6.0)[:, None, None] * np.array([[2.0, 1.0], [1.0, 2.0]])[None])
    M = mass.dense()
    M = (M + M.T) / 2.0
    lumped = M.sum(axis=1)
    for arr in (A, M, lumped):
        arr.setflags(write=False)
    return GalerkinPair(A, M, lumped, mesh, kernel)


def _check(blocks, kind, a, b):
    bad = ~np.isfinite(blocks).reshape(blocks.shape[0], -1).all(axis=1)
    if bad.any():
        i = int(np.nonzero(bad)[0][0])
        raise AssemblyError(f"non-finite {kind} quadrature for element pair ({a[i]}, {b[i]})")


def energy(gp: GalerkinPair, u) -> float:
    """Squared energy norm ``u^T A u``."""
    u = np.asarray(u, dtype=float)
    if u.shape != (gp.n,):
        raise ValueError(f"coefficient vector has shape {u.shape}, expected ({gp.n},)")
    return float(u @ gp.A @ u)


def cross_term(gp: GalerkinPair, a, b) -> float:
    """Interaction ``-a^T A b / 2`` of two nodally disjoint nonnegative vectors.

    This is the discrete counterpart of ``int_Q a(x) b(y) K(x-y)``: for
    ``u = a - b`` it closes the identity
    ``energy(u) = energy(a) + energy(b) + 4 cross(a, b)``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != (gp.n,) or b.shape != (gp.n,):
        raise ValueError("dimension mismatch in cross_term")
    if (a < 0).any() or (b < 0).any():
        raise ValueError("cross_term needs nonnegative vectors")
    if np.any(a * b != 0):
        raise ValueError("cross_term needs vectors with disjoint nodal supports")
    return float(-(a @ gp.A @ b) / 2.0)


# ---------------------------------------------------------------- disk cache

def cache_key(domain: Domain, kernel: Kernel, n_elements: int) -> str:
    payload = json.dumps({"domain": [list(iv) for iv in domain.intervals],
                          "kernel": kernel.params(), "N": int(n_elements),
                          "layout": CACHE_VERSION}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:32]


# header: magic, version u32, n_dofs u64, s f64, lambda f64, 32-byte domain sha256
_HEADER = struct.Struct("<4sIQdd32s")


def save_pair(gp: GalerkinPair, path: Path) -> None:
    """Write ``A``, ``M``, ``M_L`` row-major as little-endian float64."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = gp.n
    header = _HEADER.pack(CACHE_MAGIC, CACHE_VERSION, n, gp.kernel.s, gp.kernel.lam,
                          bytes.fromhex(gp.mesh.domain.digest()))
    body = b"".join(np.ascontiguousarray(m, dtype="<f8").tobytes()
                    for m in (gp.A, gp.M, np.diag(gp.lumped)))
    tmp = path.with_suffix(".tmp")
    tmp.write_bytes(header + body)
    tmp.replace(path)


def load_pair(path: Path, mesh: Mesh, kernel: Kernel) -> GalerkinPair:
    """Read a cached pair; raises ``AssemblyError`` when it does not match."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise AssemblyError("truncated cache header")
    magic, ver, n, s, lam, dig = _HEADER.unpack_from(raw)
    if magic != CACHE_MAGIC or ver != CACHE_VERSION:
        raise AssemblyError("unrecognised cache header")
    if n != mesh.n_dofs or s != kernel.s or lam != kernel.lam or dig.hex() != mesh.domain.digest():
        raise AssemblyError("cache header does not match the requested assembly")
    need = _HEADER.size + 3 * n * n * 8
    if len(raw) != need:
        raise AssemblyError(f"cache body has {len(raw)} bytes, expected {need}")
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(3, n, n)
    A, M, ML = (np.array(b, dtype=float) for b in body)
    if not (np.isfinite(body).all() and np.array_equal(A, A.T)):
        raise AssemblyError("cache body is corrupted")
    lumped = np.diag(ML).copy()
    for arr in (A, M, lumped):
        arr.setflags(write=False)
    return GalerkinPair(A, M, lumped, mesh, kernel)


def assemble_cached(mesh: Mesh, kernel: Kernel, cache_dir: Path | None) -> GalerkinPair:
    """``assemble`` with an optional on-disk cache; unreadable files are
    replaced after a warning."""
    if cache_dir is None:
        return assemble(mesh, kernel)
    path = Path(cache_dir) / f"{cache_key(mesh.domain, kernel, mesh.n_elements)}.bin"
    if path.exists():
        try:
            return load_pair(path, mesh, kernel)
        except (AssemblyError, ValueError) as exc:
            warnings.warn(f"ignoring cache file {path.name}: {exc}", RuntimeWarning, stacklevel=2)
            log.warning("cache %s ignored: %s", path, exc)
    gp = assemble(mesh, kernel)
    save_pair(gp, path)
    return gp
