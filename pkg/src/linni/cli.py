"""Command-line front end.

Every subcommand writes its dataset into the output directory and prints a
short ``key=value`` or CSV summary on standard output.  Exit codes: 0 on
success, 1 for usage errors, 2 for numerical failures, 3 for I/O errors;
failures also print ``ERROR <code> <message>`` on standard error.

Configuration precedence: command-line flags, then ``LINNI_*`` environment
variables, then a ``key=value`` config file, then built-in defaults.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

from . import asymptotics, bvp, continuation, diagnostics, greenmass
from .errors import LinniError, NumericalFailure, StallError
from .radial_ode import (
    DEFAULT_OVERFLOW_CAP,
    DEFAULT_TOLERANCE,
    RadialProblem,
    _atomic_write,
    _fmt,
    integrate,
    metadata_path,
    read_metadata,
    read_profile_csv,
    write_metadata,
)

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3
ENV_PREFIX = "LINNI_"


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    tolerance: float = DEFAULT_TOLERANCE
    shooting_tolerance: float = bvp.SHOOTING_TOLERANCE
    overflow_cap: float = DEFAULT_OVERFLOW_CAP
    scan_samples: int = 200
    outdir: str = "."
    overwrite: bool = True
    jobs: int = 1

    def validate(self) -> "RunConfig":
        for name in ("tolerance", "shooting_tolerance", "overflow_cap"):
            if not getattr(self, name) > 0:
                raise UsageError(f"{name} must be positive")
        if self.scan_samples < 2:
            raise UsageError("scan_samples must be at least 2")
        if self.jobs < 1:
            raise UsageError("jobs must be at least 1")
        return self


def _coerce(name: str, raw: str):
    kind = {f.name: f.type for f in fields(RunConfig)}[name]
    try:
        if kind in (bool, "bool"):
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind in (int, "int"):
            return int(raw)
        if kind in (float, "float"):
            return float(raw)
        return raw.strip()
    except ValueError:
        raise UsageError(f"bad value for {name}: {raw!r}") from None


def read_config_file(path) -> dict:
    known = {f.name for f in fields(RunConfig)}
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (x.strip() for x in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in known:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def resolve_config(flags: dict, environ=None, config_file: Optional[str] = None) -> RunConfig:
    """Merge defaults, config file, environment and flags (later wins)."""
    environ = os.environ if environ is None else environ
    values = {}
    config_file = config_file or environ.get(ENV_PREFIX + "CONFIG")
    if config_file:
        values.update(read_config_file(config_file))
    for f in fields(RunConfig):
        raw = environ.get(ENV_PREFIX + f.name.upper())
        if raw is not None:
            values[f.name] = _coerce(f.name, raw)
    values.update({k: v for k, v in flags.items() if v is not None})
    return replace(RunConfig(), **values).validate()


# ------------------------------------------------------------------ helpers


def _tag(x: float) -> str:
    text = repr(float(x))
    return text[:-2] if text.endswith(".0") else text


class _Context:
    def __init__(self, config: RunConfig, out):
        self.config = config
        self.out = out
        self.outdir = Path(config.outdir)

    def target(self, name: str, explicit: Optional[str] = None) -> Path:
        path = Path(explicit) if explicit else self.outdir / name
        if not self.config.overwrite and path.exists():
            raise FileExistsError(f"{path} exists and overwrite is disabled")
        return path

    def emit(self, text: str = "") -> None:
        print(text, file=self.out)

    def emit_meta(self, meta: dict) -> None:
        for k, v in meta.items():
            self.emit(f"{k}={_fmt(v)}")


def _load_profile(path: str, config: RunConfig):
    """Profile from CSV; re-integrated from the recorded center value when available."""
    prof = read_profile_csv(path)
    meta = read_metadata(metadata_path(path)) if metadata_path(path).exists() else {}
    if "a" in meta and meta.get("truncated", "False") != "True":
        prof = integrate(prof.problem, float(meta["a"]), prof.problem.radius, config.tolerance,
                         overflow_cap=config.overflow_cap)
    return prof


def _stop(args) -> continuation.StopCriteria:
    base = continuation.StopCriteria()
    return continuation.StopCriteria(
        p_min=base.p_min if args.p_min is None else args.p_min,
        p_max=args.p_max,
        a_max=base.a_max if args.a_max is None else args.a_max,
    )


# ----------------------------------------------------------------- commands


def cmd_solve(args, ctx):
    cfg = ctx.config
    prob = RadialProblem(args.N, args.R, args.p, args.mu)
    res = bvp.solve_neumann(prob, args.a_lo, args.a_hi, tolerance=cfg.shooting_tolerance,
                            integration_tolerance=cfg.tolerance, overflow_cap=cfg.overflow_cap)
    path = ctx.target(f"solve_N{args.N}_R{_tag(args.R)}_p{_tag(args.p)}.csv", args.output)
    res.to_csv(path)
    ctx.emit_meta(res.metadata())
    ctx.emit(f"file={path}")
    if not res.converged:
        raise bvp.NonConvergence(f"residual {res.boundary_slope:.3e} above tolerance")


def cmd_scan(args, ctx):
    cfg = ctx.config
    prob = RadialProblem(args.N, args.R, args.p, args.mu)
    samples = cfg.scan_samples if args.samples is None else args.samples
    sols = bvp.scan_solutions(prob, args.a_min, args.a_max, samples, tolerance=cfg.shooting_tolerance,
                              integration_tolerance=cfg.tolerance, overflow_cap=cfg.overflow_cap)
    rows = ["a,residual,converged,extrema"]
    for s in sols:
        rows.append(",".join([_fmt(s.center_value), _fmt(s.boundary_slope), _fmt(s.converged),
                              _fmt(len(s.profile.extrema))]))
    path = ctx.target(f"scan_N{args.N}_R{_tag(args.R)}_p{_tag(args.p)}.csv", args.output)
    _atomic_write(path, "\n".join(rows) + "\n")
    ctx.emit("\n".join(rows))


def cmd_eigs(args, ctx):
    lam = bvp.radial_neumann_eigenvalues(args.N, args.R, args.count)
    rows = ["index,lambda,bifurcation_p"]
    rows += [f"{j},{_fmt(x)},{_fmt(1.0 + x)}" for j, x in enumerate(lam, 1)]
    path = ctx.target(f"eigs_N{args.N}_R{_tag(args.R)}.csv", args.output)
    _atomic_write(path, "\n".join(rows) + "\n")
    ctx.emit("\n".join(rows))


def _trace(job):
    N, R, i, direction, step, max_points, stop, tolerance = job
    try:
        br = continuation.trace_branch(N, R, i, direction, step, max_points, stop,
                                       tolerance=tolerance, keep_profiles=False)
        return br, None
    except StallError as exc:
        return exc.branch, str(exc)


def _write_branch(ctx, br, explicit=None) -> Path:
    path = ctx.target(br.filename(), explicit)
    _atomic_write(path, "\n".join(continuation.branch_rows(br)) + "\n")
    write_metadata(metadata_path(path), {
        "N": br.N, "R": br.R, "i": br.origin_index, "direction": br.direction,
        "origin_p": br.origin_p, "points": len(br.points), "stop": br.stop_reason,
    })
    return path


def cmd_branch(args, ctx):
    job = (args.N, args.R, args.i, args.direction, args.step, args.max_points, _stop(args),
           ctx.config.tolerance)
    br, failure = _trace(job)
    path = _write_branch(ctx, br, args.output) if br is not None else None
    if failure:
        raise StallError(failure + (f" (partial branch in {path})" if path else ""))
    ctx.emit_meta({"origin_p": br.origin_p, "points": len(br.points), "stop": br.stop_reason,
                   "file": str(path)})


def cmd_diagram(args, ctx):
    try:
        indices = [int(x) for x in args.i_list.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad --i-list {args.i_list!r}") from None
    directions = ["upper", "lower"] if args.direction == "both" else [args.direction]
    stop = _stop(args)
    jobs = [(args.N, args.R, i, d, args.step, args.max_points, stop, ctx.config.tolerance)
            for i in indices for d in directions]
    if ctx.config.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=ctx.config.jobs) as pool:
            results = list(pool.map(_trace, jobs))
    else:
        results = [_trace(j) for j in jobs]
    failures = [msg for _, msg in results if msg]
    branches = [br for br, _ in results if br is not None]
    directory = ctx.outdir / f"diagram_N{args.N}_R{_tag(args.R)}" if args.output is None else Path(args.output)
    index = continuation.bifurcation_diagram(args.N, args.R, branches, directory)
    ctx.emit(f"critical_p={_fmt(index['critical_p'])}")
    for e in index["branches"]:
        ctx.emit(f"{e['file']},{e['points']},{e['stop']}")
    ctx.emit(f"directory={directory}")
    if failures:
        raise StallError("; ".join(failures))


def cmd_green_mass(args, ctx):
    green = greenmass.green_radial(args.N, args.R, args.mu)
    mass = greenmass.mass_at_origin(green)
    tag = f"N{args.N}_R{_tag(args.R)}"
    green.to_csv(ctx.target(f"green_{tag}.csv"))
    path = ctx.target(f"mass_{tag}.txt", args.output)
    meta = dict(mass.metadata(), mu=args.mu)
    write_metadata(path, meta)
    ctx.emit_meta(meta)


def cmd_rstar(args, ctx):
    ctx.emit(f"rstar={_fmt(greenmass.exceptional_radius_dim3(args.mu, method=args.method))}")


def cmd_dim6_radii(args, ctx):
    radii = bvp.exceptional_radii_dim6(args.count, args.r_max, ctx.config.tolerance)
    if args.separation:
        seps = bvp.dim6_root_separation(args.count, ctx.config.tolerance)
        rows = ["index,R,v_root,distance,margin"] + [
            f"{j},{_fmt(s.radius)},{_fmt(s.nearest_root)},{_fmt(s.distance)},{_fmt(s.margin)}"
            for j, s in enumerate(seps, 1)]
    else:
        rows = ["index,R"] + [f"{j},{_fmt(r)}" for j, r in enumerate(radii, 1)]
    gaps = [b - a for a, b in zip(radii, radii[1:])]
    _atomic_write(ctx.target("dim6_radii.csv", args.output), "\n".join(rows) + "\n")
    ctx.emit("\n".join(rows))
    if gaps:
        ctx.emit(f"# min_gap={_fmt(min(gaps))}")


def cmd_nondeg(args, ctx):
    prof = _load_profile(args.profile, ctx.config)
    base = bvp.ShootingResult(prof, prof.center_value, float(prof.derivatives[-1]), True, 0)
    rep = bvp.nondegeneracy_check(base, tolerance=ctx.config.tolerance)
    path = ctx.target(Path(args.profile).stem + "_nondeg.txt", args.output)
    bvp.write_nondeg_report(rep, path)
    ctx.emit_meta(rep.metadata())


def cmd_pohozaev(args, ctx):
    prof = _load_profile(args.profile, ctx.config)
    delta = prof.r_max if args.delta is None else args.delta
    rep = diagnostics.pohozaev_residual(prof, delta)
    path = ctx.target(Path(args.profile).stem + "_pohozaev.txt", args.output)
    rep.write(path)
    ctx.emit_meta(rep.metadata())


def cmd_classify(args, ctx):
    rows = asymptotics.classify_blowup(args.N, args.regime)
    ctx.emit("N,regime,kind,statement,allowed,conditions")
    for e in rows:
        ctx.emit(",".join([str(e.N), e.regime, e.kind, e.statement, "|".join(sorted(e.allowed)),
                           "|".join(e.conditions)]))


def cmd_reduced_energy(args, ctx):
    if args.n4_type_b:
        if args.N != 4:
            raise UsageError("--n4-type-b applies to N=4 only")
        u0 = 0.0
    elif args.u0_center is None:
        raise UsageError("--u0-center is required unless --n4-type-b is given")
    else:
        u0 = args.u0_center
    model = asymptotics.ReducedEnergyModel.build(args.N, args.regime, u0)
    ctx.emit_meta({
        "N": model.N, "regime": model.regime, "u0_center": model.u0_center,
        "special_N4_typeB": model.special_N4_typeB, "c4": model.c4, "c5": model.c5,
        "t0": "none" if model.t0 is None else model.t0,
    })


def cmd_decompose(args, ctx):
    prof = read_profile_csv(args.profile)
    u0 = read_profile_csv(args.u0_profile) if args.u0_profile else None
    res = asymptotics.decomposition_residual(prof, u0, args.mu, args.kappa)
    ctx.emit(f"residual={_fmt(res)}")


def cmd_constants(args, ctx):
    rows = asymptotics.constants_table([args.N])
    path = ctx.target(f"constants_N{args.N}.csv", args.output)
    asymptotics.write_constants_csv(path, [args.N])
    ctx.emit("name,N,value,method,tolerance")
    for name, N, value, method, tol in rows:
        ctx.emit(f"{name},{N},{_fmt(float(value))},{method},{_fmt(float(tol))}")
    for k, v in asymptotics.bubble_moments(args.N).items():
        if v is not None:
            ctx.emit(f"moment_{k}={_fmt(v)}")


# ------------------------------------------------------------------ parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="linni", description="Radial Neumann problems on balls.")
    parser.add_argument("--config", help="key=value configuration file")
    parser.add_argument("--outdir", help="output directory")
    parser.add_argument("--tolerance", type=float, help="integrator tolerance")
    parser.add_argument("--shooting-tolerance", type=float, help="boundary residual tolerance")
    parser.add_argument("--overflow-cap", type=float, help="overflow threshold for |u|")
    parser.add_argument("--scan-samples", type=int, help="default grid size for scan")
    parser.add_argument("--jobs", type=int, help="parallel branch traces in diagram")
    parser.add_argument("--overwrite", dest="overwrite", action="store_true", default=None)
    parser.add_argument("--no-overwrite", dest="overwrite", action="store_false")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def command(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        return p

    def problem(p, with_p=True):
        p.add_argument("--N", type=int, required=True)
        p.add_argument("--R", type=float, required=True)
        if with_p:
            p.add_argument("--p", type=float, required=True)
            p.add_argument("--mu", type=float, default=1.0)

    def output(p):
        p.add_argument("--output", help="explicit output path")

    p = command("solve", cmd_solve, "solve the Neumann problem by shooting")
    problem(p)
    p.add_argument("--a-lo", type=float, required=True)
    p.add_argument("--a-hi", type=float, required=True)
    output(p)

    p = command("scan", cmd_scan, "find all solutions with center values in a range")
    problem(p)
    p.add_argument("--a-min", type=float, required=True)
    p.add_argument("--a-max", type=float, required=True)
    p.add_argument("--samples", type=int)
    output(p)

    p = command("eigs", cmd_eigs, "radial Neumann eigenvalues of -Delta + 1")
    problem(p, with_p=False)
    p.add_argument("--count", type=int, required=True)
    output(p)

    def branch_opts(p):
        p.add_argument("--step", type=float, default=0.02)
        p.add_argument("--max-points", type=int, default=2000)
        p.add_argument("--p-min", type=float)
        p.add_argument("--p-max", type=float)
        p.add_argument("--a-max", type=float)

    p = command("branch", cmd_branch, "trace one bifurcating branch")
    problem(p, with_p=False)
    p.add_argument("--i", type=int, required=True)
    p.add_argument("--direction", choices=("upper", "lower"), default="upper")
    branch_opts(p)
    output(p)

    p = command("diagram", cmd_diagram, "trace several branches and write an index")
    problem(p, with_p=False)
    p.add_argument("--i-list", required=True, help="comma-separated branch indices")
    p.add_argument("--direction", choices=("upper", "lower", "both"), default="both")
    branch_opts(p)
    p.add_argument("--output", help="output directory for the diagram")

    p = command("green-mass", cmd_green_mass, "Green's function and its mass at the origin")
    problem(p, with_p=False)
    p.add_argument("--mu", type=float, default=1.0)
    output(p)

    p = command("rstar", cmd_rstar, "exceptional radius in dimension 3")
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--method", choices=("closed_form", "numerical"), default="closed_form")

    p = command("dim6-radii", cmd_dim6_radii, "exceptional radii in dimension 6")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--r-max", type=float)
    p.add_argument("--separation", action="store_true",
                   help="also report the gap to the nearest critical point of the linearized solution")
    output(p)

    p = command("nondeg", cmd_nondeg, "nondegeneracy report for a solution profile")
    p.add_argument("--profile", required=True)
    output(p)

    p = command("pohozaev", cmd_pohozaev, "Pohozaev identity audit of a profile")
    p.add_argument("--profile", required=True)
    p.add_argument("--delta", type=float)
    output(p)

    p = command("classify", cmd_classify, "blow-up classification rows")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--regime", choices=asymptotics.REGIMES, required=True)

    p = command("reduced-energy", cmd_reduced_energy, "reduced energy coefficients and critical point")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--regime", choices=("sub", "super"), required=True)
    p.add_argument("--u0-center", type=float)
    p.add_argument("--n4-type-b", action="store_true")

    p = command("decompose", cmd_decompose, "single-bubble decomposition residual")
    p.add_argument("--profile", required=True)
    p.add_argument("--u0-profile")
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--kappa", type=int, choices=(1, -1), default=1)

    p = command("constants", cmd_constants, "bubble constants for one dimension")
    p.add_argument("--N", type=int, required=True)
    output(p)
    return parser


def _fail(code: int, exc: BaseException, err) -> int:
    message = " ".join(str(exc).split()) or type(exc).__name__
    print(f"ERROR {code} {type(exc).__name__}: {message}", file=err)
    return code


def main(argv=None, *, environ=None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
        flags = {
            "outdir": args.outdir, "tolerance": args.tolerance,
            "shooting_tolerance": args.shooting_tolerance, "overflow_cap": args.overflow_cap,
            "scan_samples": args.scan_samples, "jobs": args.jobs, "overwrite": args.overwrite,
        }
        config = resolve_config(flags, environ, args.config)
    except UsageError as exc:
        return _fail(EXIT_USAGE, exc, err)
    except OSError as exc:
        return _fail(EXIT_IO, exc, err)
    try:
        outdir = Path(config.outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        if not os.access(outdir, os.W_OK):
            raise PermissionError(f"output directory {outdir} is not writable")
        args.func(args, _Context(config, out))
    except UsageError as exc:
        return _fail(EXIT_USAGE, exc, err)
    except NumericalFailure as exc:
        return _fail(EXIT_NUMERICAL, exc, err)
    except OSError as exc:
        return _fail(EXIT_IO, exc, err)
    except (LinniError, ValueError) as exc:
        return _fail(EXIT_USAGE, exc, err)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
