"""Command-line entry point.

Subcommands
-----------
bound      solve one relaxation and print value, flatness and baselines
sweep      solve a family over a one- or two-parameter grid, writing CSV
export     write the relaxation in sparse SDPA format
baselines  print the closed-form and comparison bounds only
check      cp/cpsd membership test by levels

Exit codes are 0 on success, 2 when the solver does not reach an optimal
status, 3 when the instance cannot be parsed and 64 on usage errors.

Default solver tolerances can be set through ``FACTORANK_TOLERANCES``,
e.g. ``FACTORANK_TOLERANCES="feas_tol=1e-7,gap_tol=1e-7,max_iter=300"``.
Command-line flags take precedence.
"""
from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import instances
from .hierarchies import KINDS, BoundRequest, baselines, bound, build
from .sdpcore import OPTIMAL, SolverOptions, export_sdpa
from .sdpcore.analysis import DEFAULT_RANK_TOL

CSV_HEADER = ("param1", "param2", "kind", "t", "variants", "value", "status")
ENV_TOLERANCES = "FACTORANK_TOLERANCES"

EXIT_OK = 0
EXIT_SOLVER = 2
EXIT_PARSE = 3
EXIT_USAGE = 64


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Everything one subcommand needs, after argument parsing."""

    subcommand: str
    gen: str | None = None
    file: str | None = None
    kind: str = "cpsd"
    t: int = 1
    variants: dict = field(default_factory=dict)
    transpose: bool = False
    scale_rows: tuple | None = None
    solver: SolverOptions = field(default_factory=SolverOptions)
    rank_tol: float = DEFAULT_RANK_TOL
    csv: str | None = None
    out: str | None = None
    stdout: bool = False
    equalities: str = "pairs"
    tau: bool = True
    grid: tuple = ()
    fixed: tuple = ()
    jobs: int = 1
    skip_existing: bool = False

    def __post_init__(self):
        if self.subcommand != "sweep" and (self.gen is None) == (self.file is None):
            raise UsageError("give exactly one of --gen or --file")
        if self.t < 1:
            raise UsageError("--t must be at least 1")


def env_solver_options(environ=None) -> SolverOptions:
    """Solver defaults with overrides from ``FACTORANK_TOLERANCES``."""
    environ = os.environ if environ is None else environ
    opts = SolverOptions()
    spec = environ.get(ENV_TOLERANCES, "").strip()
    if not spec:
        return opts
    for item in spec.split(","):
        key, _, val = item.partition("=")
        key = key.strip()
        if key in ("feas_tol", "gap_tol"):
            setattr(opts, key, float(val))
        elif key == "max_iter":
            opts.max_iter = int(val)
        else:
            raise UsageError(f"{ENV_TOLERANCES}: unknown key {key!r}")
    return opts


# ---------------------------------------------------------------- instances


def _floats(text: str) -> list:
    return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]


def load_instance(cfg: RunConfig) -> tuple:
    """Matrix and the (param1, param2) labels used in CSV rows."""
    params = ("", "")
    if cfg.gen is not None:
        inst = instances.parse_spec(cfg.gen)
        _, _, rest = cfg.gen.partition(":")
        vals = [x.strip() for x in rest.split(",") if x.strip()]
        params = tuple((vals + ["", ""])[:2])
    else:
        inst = instances.load(cfg.file)
    A = np.array(inst.values, dtype=float)
    if cfg.transpose:
        A = A.T.copy()
    if cfg.scale_rows is not None:
        d = np.asarray(cfg.scale_rows, dtype=float)
        if d.shape != (A.shape[0],):
            raise UsageError(f"--scale-rows needs {A.shape[0]} entries")
        A = d[:, None] * A
    return A, params


def make_request(cfg: RunConfig, A: np.ndarray, t: int | None = None) -> BoundRequest:
    v = cfg.variants
    V = [np.asarray(x, dtype=float) for x in v.get("V", ())]
    for base in v.get("V_shifts", ()):
        base = np.asarray(base, dtype=float)
        V.extend(np.roll(base, k) for k in range(len(base)))
    return BoundRequest(
        kind=cfg.kind,
        A=A,
        t=cfg.t if t is None else t,
        V=V,
        dagger=v.get("dagger", False),
        tensor_levels=v.get("tensor_levels"),
        bilinear_pairs=v.get("bilinear", ()),
        kernel=v.get("kernel", False),
        extra_monomial_localizers=v.get("monomials", False),
    )


# ---------------------------------------------------------------- output


def fmt_value(x) -> str:
    if x is None or (isinstance(x, float) and not math.isfinite(x)):
        return ""
    return f"{x:.10g}"


def csv_row(params, kind, t, variants, value, status) -> list:
    return [params[0], params[1], kind, str(t), variants, fmt_value(value), status]


def write_csv(rows, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    w.writerows(rows)


def _append_csv(path: str, row: list) -> None:
    p = Path(path)
    new = not p.exists() or p.stat().st_size == 0
    with p.open("a", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(CSV_HEADER)
        w.writerow(row)


def _print_baselines(base: dict, out) -> None:
    print("baselines:", file=out)
    if not base:
        print("  (none applicable)", file=out)
    for name in sorted(base):
        print(f"  {name:<14s} {fmt_value(base[name]) or 'n/a'}", file=out)


# ---------------------------------------------------------------- subcommands


def cmd_bound(cfg: RunConfig, out=sys.stdout) -> int:
    A, params = load_instance(cfg)
    req = make_request(cfg, A)
    res = bound(req, cfg.solver, cfg.rank_tol, with_baselines=True,
                with_tau=cfg.tau and cfg.kind in ("cp", "nonneg"))
    print(f"kind      {cfg.kind}", file=out)
    print(f"level     {cfg.t}", file=out)
    print(f"variants  {req.variant_label()}", file=out)
    print(f"status    {res.status}", file=out)
    print(f"value     {fmt_value(res.value) or 'n/a'}", file=out)
    reason = res.solution.diagnostics.get("reason", "")
    if reason:
        print(f"note      {reason}", file=out)
    if res.flat_report is not None:
        print(f"flatness  {res.flat_report} (rank_tol {cfg.rank_tol:g})", file=out)
    _print_baselines(res.baselines, out)
    if cfg.csv:
        _append_csv(cfg.csv, csv_row(params, cfg.kind, cfg.t, req.variant_label(),
                                     res.value, res.status))
    return EXIT_OK if res.status == OPTIMAL else EXIT_SOLVER


def cmd_baselines(cfg: RunConfig, out=sys.stdout) -> int:
    A, _ = load_instance(cfg)
    base = baselines(A, cfg.kind, with_tau=cfg.tau and cfg.kind in ("cp", "nonneg"),
                     opts=cfg.solver)
    _print_baselines(base, out)
    return EXIT_OK


def cmd_export(cfg: RunConfig, out=sys.stdout) -> int:
    A, _ = load_instance(cfg)
    text = export_sdpa(build(make_request(cfg, A)), cfg.equalities)
    if cfg.stdout:
        out.write(text)
        return EXIT_OK
    if not cfg.out:
        raise UsageError("export needs --out PATH or --stdout")
    with open(cfg.out, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(text)
    return EXIT_OK


def cmd_check(cfg: RunConfig, out=sys.stdout) -> int:
    """Run levels ``1..t``; report non-membership or inconclusive, never membership."""
    if cfg.kind not in ("cp", "cpsd"):
        raise UsageError("check supports --kind cp or cpsd only")
    A, _ = load_instance(cfg)
    n = A.shape[0]
    cap = math.comb(n + 1, 2) if cfg.kind == "cp" else None
    for level in range(1, cfg.t + 1):
        res = bound(make_request(cfg, A, level), cfg.solver, cfg.rank_tol,
                    with_baselines=False)
        if res.status == "infeasible":
            print(f"not {cfg.kind}: level {level} relaxation is infeasible", file=out)
            return EXIT_OK
        if res.status != OPTIMAL:
            print(f"solver failed at level {level}: {res.status}", file=out)
            return EXIT_SOLVER
        line = f"level {level}: bound {fmt_value(res.value)}"
        if cap is not None:
            line += f" (cap {cap})"
            if res.value > cap + 1e-6 * max(1.0, cap):
                print(line, file=out)
                print(f"not {cfg.kind}: bound exceeds the cap {cap}", file=out)
                return EXIT_OK
        print(line, file=out)
    print("inconclusive: every level is feasible"
          + (f" with bound at most {cap}" if cap is not None else ""), file=out)
    return EXIT_OK


def grid_points(spec: str) -> list:
    """``lo:hi:step`` to the list of grid values, rounded to 10 decimals."""
    try:
        lo, hi, step = (float(x) for x in spec.split(":"))
    except ValueError:
        raise UsageError(f"grid must be lo:hi:step, got {spec!r}") from None
    if step <= 0:
        raise UsageError("grid step must be positive")
    if hi < lo:
        return []
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + k * step, 10) for k in range(count)]


def _sweep_point(args):
    cfg, point = args
    spec = cfg.gen + ":" + ",".join(f"{p:g}" for p in point + cfg.fixed)
    pcfg = replace(cfg, subcommand="bound", gen=spec)
    params = (tuple(f"{p:g}" for p in point) + ("", ""))[:2]
    label = make_request(cfg, _label_matrix(cfg)).variant_label()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            A, _ = load_instance(pcfg)
            req = make_request(pcfg, A)
            label = req.variant_label()
            res = bound(req, cfg.solver, cfg.rank_tol, with_baselines=False)
            return csv_row(params, cfg.kind, cfg.t, label, res.value, res.status)
        except Exception as exc:  # one bad point must not stop the sweep
            return csv_row(params, cfg.kind, cfg.t, label, None, f"error: {type(exc).__name__}")


def cmd_sweep(cfg: RunConfig, out=sys.stdout) -> int:
    if cfg.gen is None or ":" in cfg.gen:
        raise UsageError("sweep needs --gen FAMILY (parameters come from --grid)")
    if cfg.gen not in instances.FAMILIES:
        raise instances.UnknownFamily(cfg.gen)
    axes = [grid_points(g) for g in cfg.grid]
    if not axes:
        raise UsageError("sweep needs at least one --grid")
    points = [tuple(p) for p in np.array(np.meshgrid(*axes, indexing="ij")).reshape(len(axes), -1).T] \
        if all(axes) else []
    points = [tuple(float(x) for x in p) for p in points]

    done = {}
    if cfg.skip_existing and cfg.out and Path(cfg.out).exists():
        with open(cfg.out, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                if row["status"] == OPTIMAL or row["status"] == "infeasible":
                    done[(row["param1"], row["param2"], row["kind"], row["t"], row["variants"])] = \
                        [row[h] for h in CSV_HEADER]
    label = make_request(cfg, _label_matrix(cfg)).variant_label()
    todo, rows = [], {}
    for i, pt in enumerate(points):
        params = (tuple(f"{p:g}" for p in pt) + ("", ""))[:2]
        key = (params[0], params[1], cfg.kind, str(cfg.t), label)
        if key in done:
            rows[i] = done[key]
        else:
            todo.append(i)
    tasks = [(cfg, points[i]) for i in todo]
    if cfg.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
            results = list(ex.map(_sweep_point, tasks))
    else:
        results = [_sweep_point(tk) for tk in tasks]
    rows.update(zip(todo, results))
    ordered = [rows[i] for i in range(len(points))]
    if cfg.out:
        with open(cfg.out, "w", newline="", encoding="utf-8") as fh:
            write_csv(ordered, fh)
    else:
        write_csv(ordered, out)
    return EXIT_OK


def _label_matrix(cfg: RunConfig) -> np.ndarray:
    # a square placeholder of the right size keeps the variant label independent
    # of the grid point
    n = max((len(v) for v in cfg.variants.get("V", ())), default=0)
    n = max([n] + [len(v) for v in cfg.variants.get("V_shifts", ())])
    return np.eye(max(n, 1))


COMMANDS = {
    "bound": cmd_bound,
    "sweep": cmd_sweep,
    "export": cmd_export,
    "baselines": cmd_baselines,
    "check": cmd_check,
}


# ---------------------------------------------------------------- parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="factorank", description="Moment-hierarchy lower bounds on factorization ranks.")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    src = common.add_argument_group("instance")
    src.add_argument("--gen", help="generator spec NAME[:p1,p2,...]; see instances.FAMILIES")
    src.add_argument("--file", help="CSV or whitespace-separated matrix file")
    src.add_argument("--transpose", action="store_true", help="use the transposed matrix")
    src.add_argument("--scale-rows", type=_floats, metavar="D1,D2,...",
                     help="multiply row i by D_i before solving")
    common.add_argument("--kind", choices=KINDS, default="cpsd")
    common.add_argument("--t", type=int, default=1, help="hierarchy level")
    var = common.add_argument_group("variants")
    var.add_argument("--V", action="append", type=_floats, default=[], metavar="V1,V2,...",
                     help="localizing vector (repeatable)")
    var.add_argument("--V-shifts", action="append", type=_floats, default=[], metavar="V1,V2,...",
                     help="add all cyclic shifts of this vector")
    var.add_argument("--dagger", action="store_true", help="scalar positivity and tensor rows")
    var.add_argument("--tensor", type=lambda s: tuple(int(x) for x in s.split(",")),
                     metavar="L1,L2", help="explicit tensor orders (cp)")
    var.add_argument("--bilinear", choices=["cross"], help="bilinear block family")
    var.add_argument("--kernel", action="store_true", help="ideal rows from zeros and kernel")
    var.add_argument("--monomials", action="store_true", help="monomial localizers (cp)")
    sol = common.add_argument_group("solver")
    sol.add_argument("--feas-tol", type=float)
    sol.add_argument("--gap-tol", type=float)
    sol.add_argument("--max-iter", type=int)
    sol.add_argument("--rank-tol", type=float, default=DEFAULT_RANK_TOL)
    sol.add_argument("--no-tau", action="store_true", help="skip the tau-sos baseline solve")

    p = sub.add_parser("bound", parents=[common], help="solve one relaxation")
    p.add_argument("--csv", help="append a result row to this CSV file")
    p = sub.add_parser("baselines", parents=[common], help="print baseline bounds")
    p = sub.add_parser("check", parents=[common], help="cp/cpsd non-membership test")
    p = sub.add_parser("export", parents=[common], help="write sparse SDPA")
    p.add_argument("--out", help="output path")
    p.add_argument("--stdout", action="store_true", help="write to standard output")
    p.add_argument("--equalities", choices=["pairs", "eliminate"], default="pairs")
    p = sub.add_parser("sweep", parents=[common], help="solve over a parameter grid")
    p.add_argument("--grid", action="append", default=[], metavar="LO:HI:STEP",
                   help="grid for the next family parameter (give once or twice)")
    p.add_argument("--fixed", type=_floats, default=[], metavar="P3,...",
                   help="further family parameters held fixed")
    p.add_argument("--out", help="CSV output path (standard output when omitted)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--skip-existing", action="store_true",
                   help="reuse solved rows already present in --out")
    return parser


def config_from_args(ns: argparse.Namespace, environ=None) -> RunConfig:
    opts = env_solver_options(environ)
    for key in ("feas_tol", "gap_tol", "max_iter"):
        val = getattr(ns, key)
        if val is not None:
            setattr(opts, key, val)
    variants = {
        "V": ns.V,
        "V_shifts": ns.V_shifts,
        "dagger": ns.dagger,
        "tensor_levels": ns.tensor,
        "bilinear": ns.bilinear or (),
        "kernel": ns.kernel,
        "monomials": ns.monomials,
    }
    return RunConfig(
        subcommand=ns.subcommand,
        gen=ns.gen,
        file=ns.file,
        kind=ns.kind,
        t=ns.t,
        variants=variants,
        transpose=ns.transpose,
        scale_rows=tuple(ns.scale_rows) if ns.scale_rows else None,
        solver=opts,
        rank_tol=ns.rank_tol,
        csv=getattr(ns, "csv", None),
        out=getattr(ns, "out", None),
        stdout=getattr(ns, "stdout", False),
        equalities=getattr(ns, "equalities", "pairs"),
        tau=not ns.no_tau,
        grid=tuple(getattr(ns, "grid", ())),
        fixed=tuple(getattr(ns, "fixed", ())),
        jobs=getattr(ns, "jobs", 1),
        skip_existing=getattr(ns, "skip_existing", False),
    )


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = config_from_args(ns)
        return COMMANDS[cfg.subcommand](cfg, out)
    except UsageError as exc:
        print(f"factorank: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (instances.ParseError, instances.UnknownFamily, OSError, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"factorank: cannot read instance: {msg}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
