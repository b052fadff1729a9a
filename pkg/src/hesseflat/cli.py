"""Command-line entry point: ``hesseflat {check,cone,pipeline,reconstruct,catalog}``.

Exit codes: 0 pass, 1 validated rejection, 2 malformed input or numerical
failure. Errors are printed as a JSON payload and written to ``error.json``.
"""
from __future__ import annotations

import argparse
import json
import re
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import io
from .catalog import FIXTURES, get_fixture, run_fixture
from .chart import reconstruct_potential, verify_roundtrip
from .errors import HesseFlatError, NotPositiveDefinite, VerificationFailed
from .expr import parse
from .geometry import (ClosedFormField, ConeWitness, Domain, Grid, MetricTriple,
                       check_positive_definite, cone_identity_check,
                       curvature_from_bundle, curvature_grid, normalized_rank_test)
from .run import PipelineConfig, run_pipeline

TASKS = ("check", "cone", "pipeline", "reconstruct", "catalog")


class ConfigError(HesseFlatError):
    pass


@dataclass
class RunConfig:
    task: str
    potential: str | None = None
    catalog: str | None = None
    metric: str | None = None
    witness: str | None = None
    profile: str | None = None
    modes: str | None = None
    psi: str | None = None
    urange: str | None = None
    u0: float | None = None
    grid: str | None = None
    trange: str | None = None
    thetarange: str | None = None
    xrange: str | None = None
    yrange: str | None = None
    base: str | None = None
    tol: float | None = None
    out: str = "out"
    extra: dict = field(default_factory=dict)


def _pair(text, name):
    try:
        a, b = (float(v) for v in str(text).split(","))
    except ValueError:
        raise ConfigError(f"--{name} expects two comma-separated numbers, got {text!r}",
                          flag=name, value=text)
    if not a < b and name != "base":
        raise ConfigError(f"--{name} must be increasing, got {text!r}", flag=name)
    return a, b


def _grid(text, default):
    if text is None:
        return default
    parts = str(text).lower().split("x")
    try:
        dims = tuple(int(p) for p in parts)
    except ValueError:
        raise ConfigError(f"--grid expects N or NxM, got {text!r}", flag="grid", value=text)
    if len(dims) == 1:
        dims = dims * 2
    if len(dims) != 2 or min(dims) < 9:
        raise ConfigError(f"--grid needs two sizes >= 9, got {text!r}", flag="grid")
    return dims


def _modes(text):
    out = []
    for chunk in str(text).split(";"):
        if not chunk.strip():
            continue
        try:
            a, b, k = (float(v) for v in chunk.split(","))
        except ValueError:
            raise ConfigError(f"mode {chunk.strip()!r} is not A,B,k", flag="modes")
        if k < 0:
            raise ConfigError(f"mode {chunk.strip()!r} has negative k", flag="modes")
        out.append((a, b, k))
    if not out:
        raise ConfigError("--modes is empty", flag="modes")
    return out


def _field_and_domain(cfg: RunConfig):
    """Potential field plus the sampling box, from --potential or --catalog."""
    fx = None
    if cfg.catalog:
        fx = _fixture(cfg.catalog)
        source, dom = fx.potential, fx.domain
    elif cfg.potential:
        source, dom = cfg.potential, Domain((-1.0, 1.0), (-1.0, 1.0))
    else:
        raise ConfigError("need --potential or --catalog")
    xr = _pair(cfg.xrange, "xrange") if cfg.xrange else dom.x
    yr = _pair(cfg.yrange, "yrange") if cfg.yrange else dom.y
    dom = Domain(xr, yr)
    return ClosedFormField(source, dom), dom, fx


def _fixture(name):
    try:
        return get_fixture(name)
    except KeyError:
        raise ConfigError(f"unknown fixture {name!r}", available=list(FIXTURES))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_check(cfg: RunConfig, out: Path):
    f, dom, fx = _field_and_domain(cfg)
    nx, ny = _grid(cfg.grid, (41, 41))
    tol = cfg.tol if cfg.tol is not None else 1e-8
    grid = Grid.uniform(dom.x, dom.y, nx, ny)
    X, Y = grid.mesh()
    b = f.bundle(X, Y)
    trace, det = check_positive_definite(b.fxx, b.fxy, b.fyy, where=(X, Y))
    report = {"potential": f.name,
              "grid": [nx, ny], "xrange": list(dom.x), "yrange": list(dom.y),
              "pd_min_trace": float(np.min(trace)), "pd_min_det": float(np.min(det)),
              "tolerance": tol}
    try:
        cols = curvature_grid(f, grid)
    except NotPositiveDefinite as e:
        report.update(passed=False, error=e.payload())
        io.write_json(out / "report.json", report)
        raise
    K = np.abs(cols["K"])
    k = int(np.argmax(K))
    report.update(curvature_max=float(K[k]),
                  curvature_argmax=[float(cols["x"][k]), float(cols["y"][k])],
                  flatness_max=float(np.max(np.abs(cols["residual"]))))
    if fx is not None:
        sx, sy = fx.sample_point
        Ks, _ = curvature_from_bundle(f.bundle(sx, sy))
        report.update(sample_point=[sx, sy], curvature_at_sample=float(Ks))
    report["passed"] = bool(report["curvature_max"] < tol)
    io.write_csv(out / "grid.csv", cols)
    return _finish(report, out)


def cmd_cone(cfg: RunConfig, out: Path):
    f, dom, fx = _field_and_domain(cfg)
    nx, ny = _grid(cfg.grid, (41, 41))
    tol = cfg.tol if cfg.tol is not None else 1e-12
    grid = Grid.uniform(dom.x, dom.y, nx, ny)
    m = MetricTriple.from_potential(f)
    report = {"grid": [nx, ny], "xrange": list(dom.x), "yrange": list(dom.y),
              "tolerance": tol}
    witness = cfg.witness or (fx.witness if fx else None)
    checks = []
    if witness:
        w = ConeWitness.from_string(witness)
        report["witness"] = witness
        report["cone_residual"] = cone_identity_check(m, w, grid)
        checks.append(report["cone_residual"] < tol)
    # the pointwise stencils need room inside the box
    inner = Grid.uniform(*(_shrink(r, 0.95) for r in (dom.x, dom.y)), nx, ny)
    report["rank_cross_max"] = normalized_rank_test(m, inner)
    checks.append(report["rank_cross_max"] < 1e-6)
    report["passed"] = bool(all(checks))
    return _finish(report, out)


def _finish(report, out: Path):
    """Write report.json; a failed check becomes a VerificationFailed payload."""
    io.write_json(out / "report.json", report)
    if not report["passed"]:
        raise VerificationFailed("verification failed", report=report)
    return report, 0


def _shrink(r, s):
    mid, half = 0.5 * (r[0] + r[1]), 0.5 * s * (r[1] - r[0])
    return mid - half, mid + half


def pipeline_config(cfg: RunConfig) -> PipelineConfig:
    pc = PipelineConfig()
    if cfg.profile is not None:
        pc.profile = cfg.profile
    if cfg.modes is not None:
        pc.modes = _modes(cfg.modes)
    pc.psi = cfg.psi
    if cfg.urange:
        pc.urange = _pair(cfg.urange, "urange")
    pc.u0 = cfg.u0
    pc.grid = _grid(cfg.grid, pc.grid)
    if cfg.trange:
        pc.trange = _pair(cfg.trange, "trange")
    if cfg.thetarange:
        pc.thetarange = _pair(cfg.thetarange, "thetarange")
    if cfg.tol is not None:
        pc.curvature_tol = cfg.tol
    for k, v in cfg.extra.items():
        if not hasattr(pc, k):
            raise ConfigError(f"unknown pipeline option {k!r}", option=k)
        setattr(pc, k, tuple(v) if isinstance(v, list) else v)
    return pc


def cmd_pipeline(cfg: RunConfig, out: Path):
    pc = pipeline_config(cfg)
    res = run_pipeline(pc)
    w = res.wave
    io.write_csv(out / "wave.csv", {"t": w.t, "gamma": w.gamma, "mu": w.mu, "V": w.V})
    io.write_csv(out / "drift.csv", {"t": w.t, "beta": w.beta})
    for i, sm in enumerate(res.solved):
        cols = {"t": sm.psi.t, "psi": sm.psi.psi.real}
        if np.iscomplexobj(sm.psi.psi):
            cols["psi_imag"] = sm.psi.psi.imag
        io.write_csv(out / f"mode_{i}.csv", cols)
    c = res.chart
    T, TH = np.meshgrid(c.t, c.theta, indexing="ij")
    U = np.broadcast_to(c.u[:, None], c.shape)
    nm = res.node_metric
    io.write_csv(out / "chart.csv", {"t": T, "theta": TH, "u": U, "v": c.v, "x": c.x,
                                     "y": c.y, "E": nm.E, "F": nm.F, "G": nm.G})
    p = res.potential
    PX, PY = np.meshgrid(p.xs, p.ys, indexing="ij")
    io.write_csv(out / "potential.csv", {"x": PX, "y": PY, "f": p.f})
    report = dict(res.report.to_dict())
    report["summary"] = res.summary()
    report["passed"] = res.passed
    return _finish(report, out)


def cmd_reconstruct(cfg: RunConfig, out: Path):
    n = _grid(cfg.grid, (81, 81))
    truth = None
    if cfg.metric:
        parts = cfg.metric.split(";")
        if len(parts) != 3:
            raise ConfigError("--metric expects 'E;F;G'", flag="metric")
        xr = _pair(cfg.xrange, "xrange") if cfg.xrange else (-1.0, 1.0)
        yr = _pair(cfg.yrange, "yrange") if cfg.yrange else (-1.0, 1.0)
        dom = Domain(xr, yr)
        m = MetricTriple.from_expressions(*parts, domain=dom)
    else:
        truth, dom, _ = _field_and_domain(cfg)
        m = MetricTriple.from_potential(truth)
    xs, ys = np.linspace(*dom.x, n[0]), np.linspace(*dom.y, n[1])
    base = _pair(cfg.base, "base") if cfg.base else (0.5 * sum(dom.x), 0.5 * sum(dom.y))
    dom.check(*base)
    rp = reconstruct_potential(m, base, xs, ys, inside=dom.contains)
    rep = verify_roundtrip(rp, m)
    report = dict(rep.to_dict())
    report.update(base=list(base), xrange=list(dom.x), yrange=list(dom.y),
                  grid=list(n), gauge=rp.gauge)
    if truth is not None:
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        diff = (truth(X, Y) - rp.f).ravel()
        A = np.column_stack([np.ones_like(diff), X.ravel(), Y.ravel()])
        coef, *_ = np.linalg.lstsq(A, diff, rcond=None)
        report["affine_deviation"] = float(np.max(np.abs(diff - A @ coef)))
    tol = cfg.tol if cfg.tol is not None else 1e-4
    report["passed"] = rep.passed(curvature=tol)
    PX, PY = np.meshgrid(xs, ys, indexing="ij")
    io.write_csv(out / "potential.csv", {"x": PX, "y": PY, "f": rp.f})
    return _finish(report, out)


def cmd_catalog(cfg: RunConfig, out: Path):
    name = cfg.catalog
    if not name:
        raise ConfigError("catalog needs a fixture name", available=list(FIXTURES))
    _fixture(name)
    _, summary = run_fixture(name)
    width = max(len(k) for k in summary)
    for k, v in summary.items():
        print(f"{k:<{width}}  {v}", file=sys.stderr)
    return _finish(summary, out)


COMMANDS = {"check": cmd_check, "cone": cmd_cone, "pipeline": cmd_pipeline,
            "reconstruct": cmd_reconstruct, "catalog": cmd_catalog}


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"usage: {message}")


def build_parser():
    ap = _Parser(prog="hesseflat", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="task", required=True, parser_class=_Parser)
    for task in TASKS:
        sp = sub.add_parser(task)
        if task == "catalog":
            sp.add_argument("name", nargs="?", help="fixture name")
        sp.add_argument("--config", help="JSON file with option values")
        sp.add_argument("--out", help="output directory (default: out)")
        sp.add_argument("--tol", type=float)
        sp.add_argument("--grid", help="N or NxM")
        sp.add_argument("--catalog", help="fixture name")
        if task in ("check", "cone", "reconstruct"):
            sp.add_argument("--potential")
            sp.add_argument("--xrange")
            sp.add_argument("--yrange")
        if task == "cone":
            sp.add_argument("--witness", help="'coef:i,j,k; ...' monomials in E,F,G")
        if task == "reconstruct":
            sp.add_argument("--metric", help="'E;F;G' expressions in x, y")
            sp.add_argument("--base", help="x,y")
        if task == "pipeline":
            sp.add_argument("--profile")
            sp.add_argument("--modes", help="'A,B,k;A,B,k'")
            sp.add_argument("--psi", help="explicit Psi(t, theta) instead of modes")
            sp.add_argument("--urange")
            sp.add_argument("--u0", type=float)
            sp.add_argument("--trange")
            sp.add_argument("--thetarange")
    return ap


_NEGATIVE = re.compile(r"^-[0-9.]")


def _attach_values(argv):
    """'--xrange -1,1' -> '--xrange=-1,1' so that argparse keeps the value."""
    out, i = [], 0
    while i < len(argv):
        a = argv[i]
        if (a.startswith("--") and "=" not in a and i + 1 < len(argv)
                and _NEGATIVE.match(argv[i + 1])):
            out.append(f"{a}={argv[i + 1]}")
            i += 2
        else:
            out.append(a)
            i += 1
    return out


def load_config(argv) -> RunConfig:
    args = vars(build_parser().parse_args(_attach_values(list(argv))))
    task = args.pop("task")
    values = {}
    path = args.pop("config", None)
    if path:
        try:
            values = json.loads(Path(path).read_text())
        except (OSError, ValueError) as e:
            raise ConfigError(f"cannot read config {path}: {e}", path=path)
        if not isinstance(values, dict):
            raise ConfigError("config file must hold a JSON object", path=path)
    name = args.pop("name", None)
    if name:
        args["catalog"] = name
    values.update({k: v for k, v in args.items() if v is not None})
    known = {f.name for f in fields(RunConfig)} - {"task", "extra"}
    extra = {k: v for k, v in values.items() if k not in known}
    if extra and task != "pipeline":
        raise ConfigError(f"unknown options: {sorted(extra)}", options=sorted(extra))
    cfg = RunConfig(task=task, extra=extra,
                    **{k: v for k, v in values.items() if k in known})
    for key in ("potential", "profile", "psi"):
        src = getattr(cfg, key)
        if src is not None and not isinstance(src, str):
            raise ConfigError(f"{key} must be a string", option=key)
    if cfg.potential:
        parse(cfg.potential)     # fail fast with the parse offset
    if cfg.profile:
        parse(cfg.profile, variables=("u",))
    return cfg


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    out = Path("out")
    try:
        cfg = load_config(argv)
        out = Path(cfg.out)
        report, code = COMMANDS[cfg.task](cfg, out)
        print(io.dumps(report), end="")
        return code
    except HesseFlatError as e:
        payload = e.payload()
        code = e.exit_code
    except (ValueError, ArithmeticError, FloatingPointError, TypeError, KeyError) as e:
        payload = {"error": type(e).__name__, "message": str(e), "details": {}}
        code = 2
    print(payload["message"], file=sys.stderr)
    print(io.dumps(payload), end="")
    try:
        io.write_json(out / "error.json", payload)
    except OSError:
        pass
    return code


if __name__ == "__main__":
    sys.exit(main())
