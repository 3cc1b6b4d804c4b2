"""Command-line front end: verification runs, solver jobs and report emission.

Every subcommand writes one JSON object per line (the ``xray`` verb writes CSV).
Exit status is 0 when every verdict passes, 1 when at least one fails and 2 for
usage or configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import inspect
import io
import json
import sys
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import einstein_weyl as ew_mod
from . import topology, xray, zoo
from .fields import ExpressionError, parse_expr
from .geometry import asd_residual, ricci_flat_residual, sd_weyl_ratio
from .jets import DomainError, SingularPointError
from .reports import ResidualReport
from .spinor import (petrov_classify, petrov_from_spinor, random_sl2, rotate_dyad, weyl_frame_components,
                     weyl_spinors)

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """A fully resolved invocation. The seed fixes every sample set."""

    subcommand: str
    options: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)  # free potentials for zoo builders
    seed: int = 0
    samples: int = 50
    tolerance: Optional[float] = None
    box: Optional[tuple] = None
    output: Optional[str] = None


# ---------------------------------------------------------------------------
# Config files and argument parsing
# ---------------------------------------------------------------------------


def read_config(path: str) -> list:
    """``key = value`` lines (``#`` starts a comment) as ``(key, value)`` pairs."""
    pairs = []
    try:
        text = open(path).read()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for k, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{k}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or not key.replace("_", "").replace("-", "").isalnum():
            raise UsageError(f"{path}:{k}: bad key {key!r}")
        pairs.append((key, value))
    return pairs


def _parse_box(text: str) -> tuple:
    try:
        box = tuple(tuple(float(v) for v in part.split(",")) for part in text.split(";"))
    except ValueError:
        raise UsageError(f"bad box {text!r}; use 'lo,hi;lo,hi;...'") from None
    if any(len(b) != 2 or b[0] >= b[1] for b in box):
        raise UsageError(f"bad box {text!r}; each axis needs lo < hi")
    return box


def _coerce(value: str):
    try:
        return float(value)
    except ValueError:
        return value


def _free_params(extra: Sequence[str]) -> dict:
    out, it = {}, iter(extra)
    for tok in it:
        if not tok.startswith("--") or len(tok) < 3:
            raise UsageError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
        else:
            try:
                val = next(it)
            except StopIteration:
                raise UsageError(f"{tok} needs a value") from None
        out[key] = _coerce(val)
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--samples", type=int, default=50)
    common.add_argument("--tolerance", type=float)
    common.add_argument("--box", type=str, help="sampling box 'lo,hi;lo,hi;...'")
    common.add_argument("--output", type=str, help="write reports here instead of stdout")

    p = argparse.ArgumentParser(prog="asdkit", description=__doc__.splitlines()[0])
    p.add_argument("--config", type=str, help="key = value file; command-line flags win")
    sub = p.add_subparsers(dest="subcommand")

    s = sub.add_parser("verify", parents=[common], help="governing equations and expected verdicts of a zoo entry")
    s.add_argument("--entry", required=True)
    s = sub.add_parser("lax", parents=[common], help="Lax integrability versus the ASD verdict")
    s.add_argument("--entry", required=True)
    s.add_argument("--lambdas", type=str, help="comma-separated spectral parameters")
    s = sub.add_parser("reduce", parents=[common], help="reduce a zoo entry along its Killing field")
    s.add_argument("--entry", required=True)
    s.add_argument("--axis", type=int, help="coordinate index of the Killing field")
    s = sub.add_parser("lift", parents=[common], help="lift a named Einstein-Weyl space with its monopole")
    s.add_argument("--ew", required=True, choices=["flat", "toda", "dkp"])
    s = sub.add_parser("solve-monopole", parents=[common], help="march the monopole or linearised dKP equation")
    s.add_argument("--ew", required=True, choices=["flat", "toda", "dkp"])
    s.add_argument("--equation", choices=["monopole", "lindkp"], default="monopole")
    s.add_argument("--boundary", type=str, help="exact boundary data over (x, y, t)")
    s.add_argument("--H", type=str, default="-x^2/(2*t)", help="dKP background for lindkp")
    s.add_argument("--n", type=int, default=17, help="grid points per axis")
    s.add_argument("--march-axis", type=int)
    s.add_argument("--csv", type=str, help="export (x,y,t,V)")
    s = sub.add_parser("xray", parents=[common], help="transform along lines and wave residual (CSV)")
    s.add_argument("--f", default="gaussian", help=f"named integrand ({', '.join(xray.NAMED_INTEGRANDS)}) or expression in x1,x2,x3")
    s.add_argument("--radius", type=float, default=8.0, help="decay radius for expression integrands")
    s.add_argument("--lines", type=str, help="CSV of x,y,w,z")
    s.add_argument("--random", type=int, default=20, help="random lines when --lines is absent")
    s.add_argument("--h", type=float, default=1e-2)
    s = sub.add_parser("petrov", parents=[common], help="Petrov-Penrose type at sample points")
    s.add_argument("--entry", required=True)
    s.add_argument("--rotations", type=int, default=0, help="random dyad rotations per point")
    s = sub.add_parser("topology", parents=[common], help="Hirzebruch-Hopf and Atiyah conditions")
    s.add_argument("--manifold", required=True)
    s.add_argument("--radius", type=int, default=3)
    s.add_argument("--format", choices=["table", "json"], default="table")
    s = sub.add_parser("zoo", parents=[common], help="list or evaluate registry entries")
    s.add_argument("action", choices=["list", "eval"])
    s.add_argument("--entry")
    s.add_argument("--point", type=str, help="comma-separated chart point (default: box centre)")
    return p


HYPHENATED = {"march_axis": "march-axis"}
ACCEPTS_FREE = {"verify", "lax", "reduce", "petrov", "zoo"}


def parse_config(argv: Sequence[str]) -> RunConfig:
    argv = list(argv)
    parser = build_parser()
    # pull --config out first so its pairs can be spliced in before the flags
    cfg_path = None
    if "--config" in argv:
        i = argv.index("--config")
        if i + 1 >= len(argv):
            raise UsageError("--config needs a path")
        cfg_path = argv[i + 1]
        del argv[i:i + 2]
    if cfg_path:
        pairs = read_config(cfg_path)
        subs = [v for k, v in pairs if k == "subcommand"]
        rest = []
        for k, v in pairs:
            if k == "subcommand":
                continue
            if k == "action":
                rest.insert(0, v)
            else:
                rest += [f"--{HYPHENATED.get(k, k)}", v]
        if argv and not argv[0].startswith("-"):
            argv = argv[:1] + rest + argv[1:]
        elif subs:
            argv = [subs[-1]] + rest + argv
        else:
            raise UsageError("no subcommand given on the command line or in the config")
    try:
        ns, extra = parser.parse_known_args(argv)
    except SystemExit as exc:
        raise UsageError("invalid arguments") from exc
    if not ns.subcommand:
        raise UsageError("a subcommand is required")
    if extra and ns.subcommand not in ACCEPTS_FREE:
        raise UsageError(f"unrecognised arguments: {' '.join(extra)}")
    params = _free_params(extra)
    opts = {k: v for k, v in vars(ns).items()
            if k not in ("subcommand", "config", "seed", "samples", "tolerance", "box", "output")}
    return RunConfig(
        ns.subcommand, opts, params, ns.seed, ns.samples, ns.tolerance,
        _parse_box(ns.box) if ns.box else None, ns.output,
    )


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


class Emitter:
    def __init__(self, stream):
        self.stream = stream
        self.failed = False

    def report(self, rep: ResidualReport, tolerance: Optional[float] = None, **extra) -> None:
        if tolerance is not None:
            rep.tolerance = tolerance
        if not rep.passed:
            self.failed = True
        d = rep.to_dict()
        d.update(extra)
        self.line(d)

    def line(self, d: dict, fails: bool = False) -> None:
        if fails:
            self.failed = True
        self.stream.write(json.dumps(d, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def _entry(cfg: RunConfig) -> zoo.ZooEntry:
    name = cfg.options.get("entry")
    if not name:
        raise UsageError("--entry is required")
    try:
        return zoo.get_entry(name, **cfg.params)
    except zoo.UnknownEntryError as exc:
        raise UsageError(str(exc.args[0])) from None
    except TypeError as exc:
        raise UsageError(f"bad parameters for {name}: {exc}") from None


def _samples(entry: zoo.ZooEntry, cfg: RunConfig) -> np.ndarray:
    return entry.samples(cfg.samples, cfg.seed, cfg.box)


def cmd_verify(cfg: RunConfig, out: Emitter) -> None:
    entry = _entry(cfg)
    S = _samples(entry, cfg)
    for rep in entry.verify(S):
        out.report(rep, cfg.tolerance, entry=entry.name)
    if entry.frame is not None:
        out.report(entry.tetrad_report(S), entry=entry.name)
    for rep in entry.killing_reports(S):
        out.report(rep, entry=entry.name)


def cmd_lax(cfg: RunConfig, out: Emitter) -> None:
    entry = _entry(cfg)
    S = _samples(entry, cfg)
    lams = None
    if cfg.options.get("lambdas"):
        try:
            lams = np.array([float(v) for v in cfg.options["lambdas"].split(",")])
        except ValueError:
            raise UsageError(f"bad --lambdas {cfg.options['lambdas']!r}") from None
        if len(lams) < 3:
            raise UsageError("--lambdas needs at least three values")
    lax = entry.lax_report(S, lams)
    asd = asd_residual(entry.metric, S, name=f"{entry.name}:ASD")
    out.report(lax, cfg.tolerance, entry=entry.name)
    out.report(asd, entry=entry.name)
    out.line({"name": f"{entry.name}:lax_vs_asd", "lax": lax.verdict, "asd": asd.verdict,
              "verdict": "pass" if lax.verdict == asd.verdict else "fail"}, fails=lax.verdict != asd.verdict)
    if entry.lax is not None:
        out.report(entry.explicit_lax_report(S), entry=entry.name)


def cmd_reduce(cfg: RunConfig, out: Emitter) -> None:
    entry = _entry(cfg)
    axis = cfg.options.get("axis")
    if axis is None:
        K = entry.killing
        nz = [i for i, c in enumerate(K or ()) if not (isinstance(c, (int, float)) and c == 0)]
        if K is None or len(nz) != 1:
            raise UsageError(f"{entry.name} has no coordinate Killing field; pass --axis")
        axis = nz[0]
    S = _samples(entry, cfg)
    try:
        ew = ew_mod.jones_tod_reduce(entry.metric, axis, S[: min(len(S), 10)])
    except ew_mod.NullKillingError as exc:
        out.line({"name": f"{entry.name}:reduce", "verdict": "fail", "error": "null Killing field",
                  "message": str(exc), "see": ["null_kv_nontwisting", "null_kv_twisting"]}, fails=True)
        return
    except ew_mod.NotConformalKillingError as exc:
        out.line({"name": f"{entry.name}:reduce", "verdict": "fail", "error": str(exc)}, fails=True)
        return
    pts = np.delete(S, axis, axis=1)
    tol = cfg.tolerance if cfg.tolerance is not None else 1e-7
    out.report(ew_mod.ew_residual(ew, pts, tol, name=f"{entry.name}:reduced_einstein_weyl"), entry=entry.name,
               axis=int(axis))


def _named_ew(name: str):
    if name == "flat":
        return ew_mod.flat_ew(), ew_mod.MonopoleData(1.0, (0.0, 0.0, 0.0))
    if name == "toda":
        return ew_mod.toda_ew(), ew_mod.toda_monopole()
    return ew_mod.dkp_ew(), ew_mod.dkp_monopole()


def cmd_lift(cfg: RunConfig, out: Emitter) -> None:
    name = cfg.options["ew"]
    ew, m = _named_ew(name)
    S3 = ew.samples(cfg.samples, cfg.seed, cfg.box)
    tol = cfg.tolerance if cfg.tolerance is not None else 1e-7
    out.report(ew_mod.ew_residual(ew, S3, tol, name=f"{name}:einstein_weyl"))
    out.report(ew_mod.monopole_residual(ew, m, S3, tol, name=f"{name}:monopole"))
    g = ew_mod.jones_tod_lift(ew, m, check_points=S3, label=f"{name}_lift", divide_by_V=True)
    S4 = np.column_stack([S3, np.zeros(len(S3))])
    out.report(asd_residual(g, S4, tol, name=f"{name}_lift:ASD"))
    out.report(ricci_flat_residual(g, S4, tol, name=f"{name}_lift:RicciFlat"))


SOLVER_DEFAULTS = {
    # (box, marching axis, exact boundary data)
    "flat": (((-0.5, 0.5), (-0.5, 0.5), (0.0, 1.0)), 2, "1"),
    "toda": (((-0.3, 0.3), (-0.3, 0.3), (-0.5, -0.3)), 2, None),
    "dkp": (((-1.5, -0.5), (-0.5, 0.5), (-1.5, -0.5)), 0, "y^2 + (2/3)*x*t + x/t^2 - 1/t"),
}


def cmd_solve_monopole(cfg: RunConfig, out: Emitter) -> None:
    o = cfg.options
    name = o["ew"]
    box, axis, bdry = SOLVER_DEFAULTS[name]
    box = cfg.box or box
    axis = o["march_axis"] if o.get("march_axis") is not None else axis
    n = int(o["n"])
    grid = ew_mod.Grid3.uniform(box, (n, n, n))
    X, Y, T = grid.mesh()
    tol = cfg.tolerance if cfg.tolerance is not None else 1e-2
    if o["equation"] == "lindkp":
        if name != "dkp":
            raise UsageError("the linearised dKP equation needs --ew dkp")
        text = o.get("boundary") or "-x/t"
        exact = parse_expr(text, ew_mod.EW_NAMES)
        sol = ew_mod.lindkp_solve(parse_expr(o["H"], ew_mod.EW_NAMES), grid, exact, axis)
    else:
        ew, m = _named_ew(name)
        exact = parse_expr(o["boundary"], ew_mod.EW_NAMES) if o.get("boundary") else (
            m.V if bdry is None else parse_expr(bdry, ew_mod.EW_NAMES))
        sol = ew_mod.monopole_solve_linear(ew, grid, exact, axis)
    from .fields import ScalarField

    ref = ScalarField(exact, ew_mod.EW_NAMES).values([X, Y, T])
    err = float(np.max(np.abs(sol.V - ref)))
    d = {"name": f"{name}:{o['equation']}", "n": n, "marchAxis": int(axis), "maxError": err,
         "discreteResidual": sol.residual, "tolerance": tol}
    if sol.closure is not None:
        d["closure"] = sol.closure
    d["verdict"] = "pass" if err <= tol and sol.residual <= tol else "fail"
    out.line(d, fails=d["verdict"] == "fail")
    if o.get("csv"):
        sol.to_csv(o["csv"])


def _integrand(o: dict) -> xray.Integrand3D:
    f = o.get("f") or "gaussian"
    if f in xray.NAMED_INTEGRANDS:
        return xray.NAMED_INTEGRANDS[f]()
    return xray.Integrand3D.parse(f, float(o.get("radius", 8.0)))


def cmd_xray(cfg: RunConfig, out: Emitter) -> None:
    o = cfg.options
    f = _integrand(o)
    lines = xray.read_lines(o["lines"]) if o.get("lines") else xray.random_lines(int(o["random"]), cfg.seed)
    h = float(o["h"])
    tol = cfg.tolerance if cfg.tolerance is not None else 1e-4

    def psi(q):
        return xray.john_transform(f, xray.LineParam.from_array(q))[0]

    w = csv.writer(out.stream, lineterminator="\n")
    w.writerow(["x", "y", "w", "z", "psi", "residual"])
    for L in lines:
        r = xray.wave_operator_fd(psi, L.as_array(), h)
        if abs(r) > tol:
            out.failed = True
        w.writerow([repr(L.x), repr(L.y), repr(L.w), repr(L.z), repr(psi(L.as_array())), repr(r)])


def cmd_petrov(cfg: RunConfig, out: Emitter) -> None:
    entry = _entry(cfg)
    if entry.frame is None:
        raise UsageError(f"{entry.name} has no tetrad")
    S = entry.samples(cfg.samples, cfg.seed, cfg.box)
    rng = np.random.default_rng(cfg.seed)
    types = []
    for p in S:
        q = petrov_classify(entry.metric, entry.frame, p)
        rot = []
        if cfg.options.get("rotations"):
            psi, _ = weyl_spinors(weyl_frame_components(entry.metric, entry.frame, p))
            rot = [petrov_from_spinor(rotate_dyad(psi, random_sl2(rng))).petrovType
                   for _ in range(int(cfg.options["rotations"]))]
        types.append(q.petrovType)
        ok = all(t == q.petrovType for t in rot)
        out.line({"name": f"{entry.name}:petrov", "point": [float(v) for v in p], "type": q.petrovType,
                  "multiplicities": list(q.multiplicities), "rotated": rot,
                  "verdict": "pass" if ok else "fail"}, fails=not ok)
    uniq = sorted(set(types))
    out.line({"name": f"{entry.name}:petrov_summary", "types": uniq, "samples": len(types),
              "verdict": "pass" if len(uniq) == 1 else "fail"}, fails=len(uniq) != 1)


def cmd_topology(cfg: RunConfig, out: Emitter) -> None:
    o = cfg.options
    try:
        m = topology.get_manifold(o["manifold"])
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None
    hh = topology.hirzebruch_hopf_check(m, int(o["radius"]))
    at = topology.atiyah_check(m.euler, m.signature)
    reason = topology.atiyah_reason(m.euler, m.signature)
    fails = not at or hh.verdict != topology.ADMITS
    if o["format"] == "json":
        out.line(hh.to_dict())
        out.line({"manifold": m.name, "check": "atiyah", "euler": m.euler, "signature": m.signature,
                  "verdict": "pass" if at else "fail", "reason": reason})
        out.failed |= fails
        return
    rows = [
        ("manifold", m.name),
        ("euler", str(m.euler)),
        ("signature", str(m.signature)),
        ("rank", str(m.rank)),
        ("3tau+2chi, 3tau-2chi", f"{hh.targets[0]}, {hh.targets[1]}"),
        ("hirzebruch-hopf", f"{hh.verdict} (radius {hh.radius})" + (f": {hh.reason}" if hh.reason else "")),
        ("atiyah", reason),
    ]
    width = max(len(k) for k, _ in rows)
    for k, v in rows:
        out.stream.write(f"{k.ljust(width)}  {v}\n")
    out.failed |= fails


def cmd_zoo(cfg: RunConfig, out: Emitter) -> None:
    if cfg.options["action"] == "list":
        for name in zoo.entry_names():
            params = [k for k in inspect.signature(zoo.REGISTRY[name]).parameters if k != "box"]
            out.line({"entry": name, "parameters": params})
        return
    entry = _entry(cfg)
    if cfg.options.get("point"):
        p = np.array([float(v) for v in cfg.options["point"].split(",")])
    else:
        p = entry.reference_point()
    try:
        gval = entry.metric.value(p)
        ratio = sd_weyl_ratio(entry.metric, p)
    except (DomainError, SingularPointError) as exc:
        raise UsageError(str(exc)) from None
    out.line({"entry": entry.name, "names": list(entry.names), "point": p.tolist(), "metric": gval.tolist(),
              "det": float(np.linalg.det(gval)), "sdWeylRatio": ratio, "orientation": entry.metric.orientation,
              "expected": list(entry.expected), "description": entry.description})


COMMANDS: dict = {
    "verify": cmd_verify,
    "lax": cmd_lax,
    "reduce": cmd_reduce,
    "lift": cmd_lift,
    "solve-monopole": cmd_solve_monopole,
    "xray": cmd_xray,
    "petrov": cmd_petrov,
    "topology": cmd_topology,
    "zoo": cmd_zoo,
}


def run(cfg: RunConfig, stream=None) -> int:
    """Execute ``cfg``, writing reports to ``stream`` (or ``cfg.output``, or stdout)."""
    buf = io.StringIO()
    em = Emitter(buf)
    fn: Callable = COMMANDS[cfg.subcommand]
    fn(cfg, em)
    text = buf.getvalue()
    if cfg.output:
        with open(cfg.output, "w") as fh:
            fh.write(text)
    else:
        (stream or sys.stdout).write(text)
    return EXIT_FAIL if em.failed else EXIT_PASS


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = parse_config(argv)
        return run(cfg)
    except (UsageError, ExpressionError, zoo.MissingDataError) as exc:
        sys.stderr.write(f"asdkit: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
