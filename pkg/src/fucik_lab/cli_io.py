"""Config parsing and task orchestration for ``fucik-lab``, with CSV/SVG output.

Config files are flat ``section.key = value`` lines; ``#`` starts a comment
and lists use bracket syntax::

    domain.intervals = [[-1, 1]]
    kernel.s = 0.25
    mesh.N = 128
    task.p_max = 5
"""

from __future__ import annotations

import argparse
import ast
import csv
import io
import logging
import sys
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

from .assembly import GalerkinPair, assemble_cached, cross_term, energy
from .domain_kernel import Domain, Kernel, Mesh
from .errors import ConfigError, DomainError, FucikLabError, KernelError
from .fucik_continuation import trace_curve, trivial_lines_check, validate_curve
from .fucik_minimax import J_p, MinimaxOptions, c_of_p, ring_minimum
from .nonresonance import NonlinearitySpec, solve_nonresonance
from .spectrum import lowest_eigenpairs

log = logging.getLogger(__name__)

TASKS = ("spectrum", "minimax", "curve", "nonres", "validate")
F_KINDS = ("linear-shift", "piecewise-asymptotic", "custom-table")
SEED = 20240607


@dataclass
class RunConfig:
    task: str = "spectrum"
    intervals: list = field(default_factory=lambda: [[-1.0, 1.0]])
    s: float = 0.25
    lam: float = 1.0
    variant: str = "fractional"
    m_max: float = 2.0
    width: float = 1.0
    allow_high_order: bool = False
    N: int = 256
    p: float = 1.0
    p_max: float = 5.0
    dp: float | None = None
    tol: float = 1e-10
    crit_tol: float = 1e-6
    steps: int = 5000
    n_path: int = 33
    f_kind: str = "linear-shift"
    f_m: float | None = None
    f_c: float = 1.0
    f_a: float | None = None
    f_b: float | None = None
    f_knots: list | None = None
    f_values: list | None = None
    f_alpha: float | None = None
    f_beta: float | None = None
    f_curve_csv: str | None = None
    f_target_p: float = 1.0
    out: str = "fucik_out"
    cache: bool = True

    def domain(self) -> Domain:
        return Domain(tuple(tuple(iv) for iv in self.intervals))

    def kernel(self) -> Kernel:
        extra = {} if self.variant == "fractional" else {"m_max": self.m_max, "width": self.width}
        return Kernel(self.s, self.lam, self.variant, allow_high_order=self.allow_high_order,
                      **extra)


# config key -> (RunConfig field, type)
_KEYS = {
    "task": ("task", str),
    "domain.intervals": ("intervals", list),
    "kernel.s": ("s", float),
    "kernel.lambda": ("lam", float),
    "kernel.variant": ("variant", str),
    "kernel.m_max": ("m_max", float),
    "kernel.width": ("width", float),
    "kernel.allow_high_order": ("allow_high_order", bool),
    "mesh.N": ("N", int),
    "task.p": ("p", float),
    "task.p_max": ("p_max", float),
    "task.dp": ("dp", float),
    "task.tol": ("tol", float),
    "task.crit_tol": ("crit_tol", float),
    "task.steps": ("steps", int),
    "task.n_path": ("n_path", int),
    "f.kind": ("f_kind", str),
    "f.m": ("f_m", float),
    "f.c": ("f_c", float),
    "f.a": ("f_a", float),
    "f.b": ("f_b", float),
    "f.knots": ("f_knots", list),
    "f.values": ("f_values", list),
    "f.alpha": ("f_alpha", float),
    "f.beta": ("f_beta", float),
    "f.curve_csv": ("f_curve_csv", str),
    "f.target_p": ("f_target_p", float),
    "output.dir": ("out", str),
    "output.cache": ("cache", bool),
}


def _coerce(key: str, raw: str, typ):
    text = raw.strip()
    if typ is str:
        if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
            return text[1:-1]
        return text
    if typ is bool:
        low = text.lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {text!r}")
    try:
        val = ast.literal_eval(text)
    except (ValueError, SyntaxError) as exc:
        raise ConfigError(f"{key}: cannot parse {text!r}") from exc
    if typ is list:
        if not isinstance(val, (list, tuple)):
            raise ConfigError(f"{key}: expected a bracketed list, got {text!r}")
        return [list(v) if isinstance(v, (list, tuple)) else v for v in val]
    if typ is int:
        if isinstance(val, bool) or not isinstance(val, int):
            raise ConfigError(f"{key}: expected an integer, got {text!r}")
        return val
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {text!r}")
    return float(val)


def parse_config(text: str) -> RunConfig:
    """Parse and validate a flat ``section.key = value`` config."""
    cfg = RunConfig()
    seen = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        name, typ = _KEYS[key]
        setattr(cfg, name, _coerce(key, raw, typ))
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> None:
    if cfg.task not in TASKS:
        raise ConfigError(f"task: must be one of {', '.join(TASKS)}, got {cfg.task!r}")
    if cfg.N < 16:
        raise ConfigError(f"mesh.N: must be >= 16, got {cfg.N}")
    for key in ("task.tol", "task.crit_tol"):
        if not getattr(cfg, _KEYS[key][0]) > 0:
            raise ConfigError(f"{key}: must be positive")
    if cfg.steps < 1 or cfg.n_path < 3:
        raise ConfigError("task.steps must be >= 1 and task.n_path >= 3")
    if cfg.p < 0:
        raise ConfigError("task.p: must be nonnegative")
    if not cfg.p_max > 0:
        raise ConfigError("task.p_max: must be positive")
    if cfg.dp is not None and not 0 < cfg.dp <= cfg.p_max:
        raise ConfigError("task.dp: need 0 < dp <= p_max")
    if cfg.f_kind not in F_KINDS:
        raise ConfigError(f"f.kind: must be one of {', '.join(F_KINDS)}")
    if cfg.f_kind == "custom-table" and cfg.task == "nonres" and (cfg.f_knots is None or cfg.f_values is None):
        raise ConfigError("f.knots and f.values are required for f.kind = custom-table")
    try:
        cfg.domain()
    except DomainError as exc:
        raise ConfigError(f"domain.intervals: {exc}") from exc
    try:
        cfg.kernel()
    except KernelError as exc:
        raise ConfigError(f"kernel.s: {exc}" if "order" in str(exc) else f"kernel: {exc}") from exc


# ------------------------------------------------------------------ output

def version_string() -> str:
    try:
        return "v" + metadata.version("fucik-lab")
    except metadata.PackageNotFoundError:
        from . import __version__
        return "v" + __version__


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def write_csv(path: Path, cfg: RunConfig, header, rows) -> None:
    """CSV with one comment line of run metadata, a header row and 17-digit floats."""
    buf = io.StringIO()
    dom = ";".join(f"({_fmt(float(a))},{_fmt(float(b))})" for a, b in cfg.intervals)
    buf.write(f"# s={_fmt(float(cfg.s))} lambda={_fmt(float(cfg.lam))} N={cfg.N} "
              f"domain={dom} version={version_string()}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    Path(path).write_text(buf.getvalue())


def read_curve_csv(path) -> list[tuple[float, float, float]]:
    """``(p, alpha, beta)`` rows of a curve CSV (comment lines skipped)."""
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    out = []
    for row in csv.DictReader(lines):
        out.append((float(row["p"]), float(row["alpha"]), float(row["beta"])))
    return out


def curve_svg(p_alpha_beta, mirror, lam1: float, lam2: float, width: int = 480,
              height: int = 480) -> str:
    """Static SVG of the branch, its mirror, the trivial lines, the diagonal
    and the points ``(lam_1, lam_1)`` and ``(lam_2, lam_2)``."""
    pts = [(a, b) for _, a, b in p_alpha_beta] + [(a, b) for a, b in mirror]
    hi = max(max(a for a, _ in pts), max(b for _, b in pts)) * 1.05
    lo = 0.0
    pad = 40

    def X(v):
        return pad + (v - lo) / (hi - lo) * (width - 2 * pad)

    def Y(v):
        return height - pad - (v - lo) / (hi - lo) * (height - 2 * pad)

    def poly(seq, style):
        coords = " ".join(f"{X(a):.3f},{Y(b):.3f}" for a, b in seq)
        return f'<polyline points="{coords}" fill="none" {style}/>'

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<line x1="{X(lo):.3f}" y1="{Y(lo):.3f}" x2="{X(hi):.3f}" y2="{Y(lo):.3f}" stroke="black"/>',
           f'<line x1="{X(lo):.3f}" y1="{Y(lo):.3f}" x2="{X(lo):.3f}" y2="{Y(hi):.3f}" stroke="black"/>']
    n_ticks = 5
    for k in range(n_ticks + 1):
        v = lo + k * (hi - lo) / n_ticks
        out.append(f'<text x="{X(v):.3f}" y="{height - pad + 16}" font-size="10" '
                   f'text-anchor="middle">{v:.3g}</text>')
        out.append(f'<text x="{pad - 6}" y="{Y(v) + 3:.3f}" font-size="10" '
                   f'text-anchor="end">{v:.3g}</text>')
    out.append(f'<text x="{width / 2}" y="{height - 6}" font-size="12" text-anchor="middle">alpha</text>')
    out.append(f'<text x="12" y="{height / 2}" font-size="12" text-anchor="middle" '
               f'transform="rotate(-90 12 {height / 2})">beta</text>')
    out.append(poly([(lo, lo), (hi, hi)], 'stroke="gray" stroke-dasharray="1,3"'))
    out.append(poly([(lam1, lo), (lam1, hi)], 'stroke="gray" stroke-dasharray="6,4"'))
    out.append(poly([(lo, lam1), (hi, lam1)], 'stroke="gray" stroke-dasharray="6,4"'))
    out.append(poly([(a, b) for _, a, b in p_alpha_beta], 'stroke="navy" stroke-width="2"'))
    out.append(poly(list(mirror), 'stroke="darkred" stroke-width="2"'))
    for v, name in ((lam1, "lam1"), (lam2, "lam2")):
        out.append(f'<circle cx="{X(v):.3f}" cy="{Y(v):.3f}" r="3.5" fill="black"/>')
        out.append(f'<text x="{X(v) + 6:.3f}" y="{Y(v) - 6:.3f}" font-size="10">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ------------------------------------------------------------------ tasks

@dataclass
class Report:
    task: str
    outputs: list = field(default_factory=list)
    checks: list = field(default_factory=list)  # (name, passed, value)
    summary: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def check(self, name, ok, value=float("nan")):
        self.checks.append((name, bool(ok), value))


def _pair(cfg: RunConfig, out: Path) -> GalerkinPair:
    mesh = Mesh.uniform(cfg.domain(), cfg.N)
    return assemble_cached(mesh, cfg.kernel(), out / "cache" if cfg.cache else None)


def _spectrum(cfg, gp, out, rep):
    ec = lowest_eigenpairs(gp, 2)
    el = lowest_eigenpairs(gp, 2, mass="lumped")
    write_csv(out / "spectrum.csv", cfg, ["index", "lambda_consistent", "lambda_lumped",
                                          "residual_consistent", "residual_lumped"],
              [(i + 1, ec[i].value, el[i].value, ec[i].residual, el[i].residual) for i in range(2)])
    write_csv(out / "eigenvectors.csv", cfg, ["x", "phi1", "phi2"],
              zip(gp.nodes, ec[0].vector, ec[1].vector))
    rep.outputs += ["spectrum.csv", "eigenvectors.csv"]
    rep.summary.update(lam1=ec[0].value, lam2=ec[1].value)
    rep.check("phi1 positive", np.all(ec[0].vector > 0))
    rep.check("lam1 < lam2", ec[0].value < ec[1].value, ec[1].value - ec[0].value)


def _minimax(cfg, gp, out, rep):
    cp = c_of_p(gp, cfg.p, MinimaxOptions(n_path=cfg.n_path, steps=cfg.steps, tol=cfg.crit_tol,
                                          polish_tol=cfg.tol))
    write_csv(out / "minimax_history.csv", cfg, ["sweep", "level", "criticality"], cp.history)
    write_csv(out / "minimax_u.csv", cfg, ["x", "u"], zip(gp.nodes, cp.u))
    rep.outputs += ["minimax_history.csv", "minimax_u.csv"]
    lam1 = lowest_eigenpairs(gp, 1, mass="lumped")[0].value
    levels = [h[1] for h in cp.history]
    rep.summary.update(p=cfg.p, c=cp.value, alpha=cp.alpha, beta=cp.beta, quality=cp.quality)
    rep.check("polished", cp.polished)
    rep.check("c(p) > lam1", cp.value > lam1, cp.value - lam1)
    rep.check("u changes sign", cp.u.max() > 0 > cp.u.min())
    rep.check("residual <= 1e-8", cp.residual <= 1e-8, cp.residual)
    rep.check("levels non-increasing", all(b <= a for a, b in zip(levels, levels[1:])))


def _curve(cfg, gp, out, rep):
    cs = trace_curve(gp, cfg.p_max, cfg.dp, cfg.tol)
    rows = [(q.p, q.alpha, q.beta, q.residual, q.method) for q in cs.points]
    rows += [(q.p, q.alpha, q.beta, q.residual, q.method + "-mirror") for q in cs.mirror()
             if q.p != 0.0]
    write_csv(out / "curve.csv", cfg, ["p", "alpha", "beta", "residual", "method"], rows)
    svg = curve_svg([(q.p, q.alpha, q.beta) for q in cs.points],
                    [(q.alpha, q.beta) for q in cs.mirror()], cs.lam1, cs.lam2)
    (out / "curve.svg").write_text(svg)
    rep.outputs += ["curve.csv", "curve.svg"]
    rep.summary.update(points=len(cs.points), lam1=cs.lam1, lam2=cs.lam2,
                       truncated=cs.truncated)
    rep.check("not truncated", not cs.truncated)
    if len(cs.points) >= 3:
        for c in validate_curve(cs).checks:
            rep.check(c.name, c.passed, c.worst)
    worst = max(q.residual for q in cs.points)
    rep.check("residuals <= 1e-8", worst <= 1e-8, worst)


def _nonres_spec(cfg, gp) -> NonlinearitySpec:
    if cfg.f_alpha is not None and cfg.f_beta is not None:
        target = (cfg.f_alpha, cfg.f_beta)
    elif cfg.f_curve_csv:
        rows = read_curve_csv(cfg.f_curve_csv)
        match = [r for r in rows if abs(r[0] - cfg.f_target_p) <= 1e-9]
        if not match:
            raise ConfigError(f"f.curve_csv: no row with p = {cfg.f_target_p}")
        target = match[0][1:]
    elif cfg.f_kind == "linear-shift":
        target = None
    else:
        cs = trace_curve(gp, max(cfg.f_target_p, 1e-3), cfg.f_target_p or None, cfg.tol)
        q = cs.points[-1]
        target = (q.alpha, q.beta)
    if cfg.f_kind == "linear-shift":
        return NonlinearitySpec.linear_shift(gp, cfg.f_m, cfg.f_c, target)
    lam1 = lowest_eigenpairs(gp, 1, mass="lumped")[0].value
    if cfg.f_kind == "piecewise-asymptotic":
        a = cfg.f_a if cfg.f_a is not None else 0.5 * (lam1 + target[0])
        b = cfg.f_b if cfg.f_b is not None else 0.5 * (lam1 + target[1])
        return NonlinearitySpec.piecewise_asymptotic(gp, a, b, target)
    return NonlinearitySpec.custom_table(gp, cfg.f_knots, cfg.f_values, target)


def _nonres(cfg, gp, out, rep):
    spec = _nonres_spec(cfg, gp)
    ec = solve_nonresonance(gp, spec, tol=max(cfg.tol, 1e-12) * 100, steps=cfg.steps,
                            n_path=cfg.n_path)
    write_csv(out / "nonres_u.csv", cfg, ["node_x", "u"], zip(gp.nodes, ec.u))
    write_csv(out / "nonres_log.csv", cfg, ["sweep", "level", "criticality"], ec.history)
    rep.outputs += ["nonres_u.csv", "nonres_log.csv"]
    rep.summary.update(kind=spec.kind, alpha=spec.alpha, beta=spec.beta, R=ec.R,
                       value=ec.value, classification=ec.classification)
    rep.check("gradient norm <= tol", ec.grad_norm <= max(cfg.tol, 1e-12) * 100, ec.grad_norm)
    rep.check("level above endpoints", ec.value > ec.endpoint_level, ec.value - ec.endpoint_level)


def _validate(cfg, gp, out, rep):
    rng = np.random.default_rng(SEED)
    e1, e2 = lowest_eigenpairs(gp, 2, mass="lumped")
    lam1, phi = e1.value, np.array(e1.vector)
    for p in (0.0, 1.0, 5.0):
        err = max(abs(J_p(gp, p, phi) - (lam1 - p)), abs(J_p(gp, p, -phi) - lam1))
        rep.check(f"endpoint identities p={p:g}", err <= 1e-10, err)
    for c in trivial_lines_check(gp, [0.0, lam1, 1e3]).checks:
        rep.check(c.name, c.passed, c.worst)
    for eps in (1e-2, 1e-1):
        m = ring_minimum(gp, 1.0, eps, seed=SEED)
        rep.check(f"ring minimum eps={eps:g}", m > lam1, m - lam1)
    worst = 0.0
    for _ in range(20):
        u = rng.standard_normal(gp.n)
        up, um = np.maximum(u, 0.0), np.maximum(-u, 0.0)
        d = energy(gp, u) - (energy(gp, up) + energy(gp, um) + 4 * cross_term(gp, up, um))
        worst = max(worst, abs(d) / max(1.0, abs(energy(gp, u))))
    rep.check("decomposition identity", worst <= 1e-10, worst)
    cs = trace_curve(gp, cfg.p_max, cfg.dp, cfg.tol)
    for c in validate_curve(cs).checks:
        rep.check(f"curve {c.name}", c.passed, c.worst)
    for q in cs.points:
        gap = abs(q.t - J_p(gp, q.p, q.u))
        rep.check(f"point p={q.p:.6g} residual", q.residual <= 1e-8, q.residual)
        rep.check(f"point p={q.p:.6g} multiplier", gap <= 1e-8 * max(1.0, abs(q.t)), gap)
    rep.check("continuation c(0) = lam2", abs(cs.points[0].beta - e2.value) <= 1e-8 * e2.value,
              abs(cs.points[0].beta - e2.value))
    rows = [(name, int(ok), val) for name, ok, val in rep.checks]
    write_csv(out / "validate.csv", cfg, ["check", "passed", "value"], rows)
    rep.outputs.append("validate.csv")


_RUNNERS = {"spectrum": _spectrum, "minimax": _minimax, "curve": _curve, "nonres": _nonres,
            "validate": _validate}


def run(cfg: RunConfig) -> Report:
    """Assemble (with cache), run the task and write its outputs under ``cfg.out``."""
    validate_config(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    rep = Report(cfg.task)
    gp = _pair(cfg, out)
    try:
        _RUNNERS[cfg.task](cfg, gp, out, rep)
    except FucikLabError as exc:
        raise type(exc)(f"task {cfg.task}: {exc}") from exc
    return rep


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="fucik-lab",
                                 description="Nonlocal eigenvalues and the first Fucik curve in 1-D.")
    ap.add_argument("task", choices=TASKS)
    ap.add_argument("--config", required=True, type=Path, help="flat section.key = value file")
    ap.add_argument("--out", type=Path, default=None, help="output directory")
    ap.add_argument("--no-cache", action="store_true", help="skip the assembly cache")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config.read_text(encoding="utf-8"))
    except (OSError, ConfigError) as exc:
        print(f"fucik-lab: {exc}", file=sys.stderr)
        return 2
    cfg.task = args.task
    if args.out is not None:
        cfg.out = str(args.out)
    if args.no_cache:
        cfg.cache = False
    try:
        rep = run(cfg)
    except (FucikLabError, ValueError) as exc:
        print(f"fucik-lab: {exc}", file=sys.stderr)
        return 3
    for k, v in rep.summary.items():
        print(f"{k} = {_fmt(v) if isinstance(v, float) else v}")
    n_ok = sum(ok for _, ok, _ in rep.checks)
    for name, ok, val in rep.checks:
        print(f"[{'PASS' if ok else 'FAIL'}] {name} ({_fmt(float(val))})")
    print(f"{n_ok}/{len(rep.checks)} checks passed; outputs: {', '.join(rep.outputs)}")
    return 0 if rep.passed else 1


if __name__ == "__main__":
    sys.exit(main())
