"""Command-line front end.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .data import Dataset, read_csv
from .engines import (
    ENGINES,
    EngineConfig,
    bootstrapper,
    network_min_observations,
    replicate,
    simulator,
    standard_errors,
)
from .errors import DataError, NumericalError, SpecError, Underdetermined
from .processes import ProcessSpec, builtin, load_spec, simulate
from .regression import FitConfig
from .sobol import SobolReport, pareto_data, sobol_pick_freeze

REPORT_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    pass


# argument parsing ---------------------------------------------------------------


def _add_process(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--builtin", choices=["welding", "injection_molding"], help="built-in process")
    g.add_argument("--spec", type=Path, help="process spec JSON")
    p.add_argument("--output", dest="output_node", help="output node (default: the process's declared output)")


def _add_degrees(p: argparse.ArgumentParser) -> None:
    p.add_argument("--p", type=int, default=None, help="highest total degree at every level")
    p.add_argument(
        "--p-level", action="append", default=[], metavar="L=K",
        help="degree K at level L (repeatable); overrides --p for that level",
    )
    p.add_argument("--gamma", type=float, default=1e-3, help="relative residual bound for sparse fits")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dagsobol",
        description="Sobol indices of networked processes via naive, network and sparse network PCE.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate a process and write a CSV dataset")
    _add_process(s)
    s.add_argument("--m", type=int, required=True, help="number of rows")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out", type=Path, default=None, help="CSV path (default: stdout)")

    f = sub.add_parser("fit", help="estimate Sobol indices with one engine")
    _add_process(f)
    src = f.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", type=Path, help="dataset CSV")
    src.add_argument("--m", type=int, help="simulate this many rows per replication")
    f.add_argument("--engine", choices=sorted(ENGINES), default="sn")
    _add_degrees(f)
    f.add_argument("--reps", type=int, default=1, help="replications (fresh simulations or bootstrap)")
    f.add_argument("--seed", type=int, default=None)
    f.add_argument("--out", type=Path, default=None, help="report JSON path (default: stdout)")
    f.add_argument("--pareto", type=Path, default=None, help="Pareto chart data (.csv) or bar chart (.svg)")

    c = sub.add_parser("compare", help="index MSE of engines against a pick-freeze reference")
    _add_process(c)
    c.add_argument("--engine", action="append", choices=sorted(ENGINES), default=None, help="repeatable")
    c.add_argument("--sizes", type=int, nargs="+", default=None, help="sample sizes to compare")
    c.add_argument("--m", type=int, default=None, help="single sample size (alternative to --sizes)")
    _add_degrees(c)
    c.add_argument("--reps", type=int, default=20)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--reference-n", type=int, default=100_000)
    c.add_argument("--out", type=Path, default=None, help="comparison JSON path (default: stdout)")
    c.add_argument("--csv", type=Path, default=None, help="also write the table as CSV")

    pa = sub.add_parser("pareto", help="Pareto data or chart from a fit report")
    pa.add_argument("--report", type=Path, required=True, help="report JSON written by 'fit'")
    pa.add_argument("--which", choices=["first", "total"], default="first")
    pa.add_argument("--out", type=Path, default=None, help=".csv or .svg (default: CSV on stdout)")

    mo = sub.add_parser("minobs", help="minimum observation counts per engine")
    _add_process(mo)
    mo.add_argument("--p", type=int, default=None)
    mo.add_argument("--json", action="store_true", help="print JSON instead of a table")
    return parser


# helpers --------------------------------------------------------------------------


def _load_process(args) -> ProcessSpec:
    spec = builtin(args.builtin) if args.builtin else load_spec(args.spec)
    if getattr(args, "output_node", None):
        if args.output_node not in spec.dag.index:
            raise SpecError(f"unknown output node {args.output_node!r}")
        spec.output = args.output_node
    return spec


def _default_p(args) -> int:
    if args.p is not None:
        return args.p
    return 4 if getattr(args, "builtin", None) == "injection_molding" else 3


def _engine_config(args, seed=None) -> EngineConfig:
    p = _default_p(args)
    if p < 1:
        raise UsageError("--p must be >= 1")
    levels: dict[int, int] = {}
    for item in getattr(args, "p_level", []) or []:
        try:
            lvl, deg = (int(x) for x in item.split("=", 1))
        except ValueError:
            raise UsageError(f"--p-level expects L=K, got {item!r}") from None
        if lvl < 1 or deg < 1:
            raise UsageError(f"--p-level values must be >= 1, got {item!r}")
        levels[lvl] = deg
    # levels past the last override use --p
    degrees = tuple(levels.get(l, p) for l in range(1, max([0, *levels]) + 1)) + (p,)
    if not (0.0 <= args.gamma <= 1.0):
        raise UsageError("--gamma must lie in [0, 1]")
    return EngineConfig(degrees, FitConfig(gamma=args.gamma), seed)


def _write_text(path: Path | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc.strerror}") from None


def _finite(x):
    if isinstance(x, float) and not math.isfinite(x):
        raise NumericalError("non-finite number in report")
    return x


def report_document(report: SobolReport, spec: ProcessSpec, cfg: EngineConfig, m: int) -> dict:
    """Versioned JSON-ready report of one (possibly replicated) fit."""
    se_first, se_total = standard_errors(report)
    inputs = {}
    for i, v in enumerate(report.inputs):
        entry = {"first_order": _finite(float(report.first[i])), "total": _finite(float(report.total[i]))}
        if report.reps > 1:
            entry["first_order_se"] = float(se_first[i])
            entry["total_se"] = float(se_total[i])
        inputs[v] = entry
    extra = dict(report.extra)
    doc = {
        "report_version": REPORT_VERSION,
        "engine": report.engine,
        "process": spec.name,
        "output": report.output,
        "m": int(m),
        "degrees": list(cfg.degrees),
        "gamma": cfg.fit.gamma,
        "reps": int(report.reps),
        "inputs": inputs,
        "output_moments": {"mean": _finite(float(report.mean)), "variance": _finite(float(report.variance))},
        "support": report.support,
        "calibration": {"constants": dict(spec.constants), "notes": spec.notes},
        "flags": {
            "zero_variance": bool(extra.pop("zero_variance", False)),
            "constraint_unmet": extra.pop("constraint_unmet", []),
            "excluded_degenerate": extra.pop("excluded_degenerate", []),
        },
    }
    if "support_per_rep" in extra:
        doc["support_per_rep"] = extra.pop("support_per_rep")
    if "failures" in extra:
        doc["failures"] = extra.pop("failures")
        doc["failure_messages"] = extra.pop("failure_messages", [])
        doc["flags"]["reps_with_constraint_unmet"] = extra.pop("reps_with_constraint_unmet", 0)
    return doc


def report_from_document(doc: dict) -> SobolReport:
    try:
        names = tuple(doc["inputs"])
        first = np.array([doc["inputs"][v]["first_order"] for v in names], dtype=float)
        total = np.array([doc["inputs"][v]["total"] for v in names], dtype=float)
        mom = doc.get("output_moments", {})
        return SobolReport(names, first, total, mom.get("mean", 0.0), mom.get("variance", 0.0),
                           engine=doc.get("engine", ""), output=doc.get("output", ""))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed report: {exc}") from None


def pareto_csv(report: SobolReport, which: str = "first") -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["input", "first_order" if which == "first" else "total", "cumulative_share"])
    for name, val, cum in pareto_data(report, which):
        w.writerow([name, repr(val), repr(cum)])
    return buf.getvalue()


def pareto_svg(report: SobolReport, which: str = "first") -> str:
    """Static bar chart (descending bars, cumulative-share line on a right axis)."""
    rows = pareto_data(report, which)
    W, H = 640, 400
    left, right, top, bottom = 60, 60, 40, 80
    pw, ph = W - left - right, H - top - bottom
    n = max(len(rows), 1)
    slot = pw / n
    vmax = max([r[1] for r in rows] + [1e-12])
    ymax = min(1.0, math.ceil(vmax * 10) / 10) if vmax > 0 else 1.0
    label = "First-order Sobol index" if which == "first" else "Total Sobol index"

    def y_of(v, top_val):
        return top + ph * (1 - max(v, 0.0) / top_val)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{W / 2}" y="22" text-anchor="middle" font-family="sans-serif" font-size="14">'
        f"{_esc(report.output or 'output')}: {label}</text>",
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left + pw}" y1="{top}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
    ]
    for k in range(6):
        frac = k / 5
        yy = top + ph * (1 - frac)
        out.append(f'<text x="{left - 6}" y="{yy + 4:.1f}" text-anchor="end" font-family="sans-serif" '
                   f'font-size="10">{frac * ymax:.2f}</text>')
        out.append(f'<text x="{left + pw + 6}" y="{yy + 4:.1f}" font-family="sans-serif" '
                   f'font-size="10">{int(round(frac * 100))}%</text>')
    pts = []
    for i, (name, val, cum) in enumerate(rows):
        x = left + i * slot
        yb = y_of(val, ymax)
        out.append(f'<rect x="{x + 0.15 * slot:.1f}" y="{yb:.1f}" width="{0.7 * slot:.1f}" '
                   f'height="{top + ph - yb:.1f}" fill="#4a78b5"/>')
        out.append(f'<text x="{x + slot / 2:.1f}" y="{top + ph + 16}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="11">{_esc(name)}</text>')
        pts.append(f"{x + slot / 2:.1f},{y_of(cum, 1.0):.1f}")
    if pts:
        out.append(f'<polyline points="{" ".join(pts)}" fill="none" stroke="#c0392b" stroke-width="2"/>')
        for p in pts:
            cx, cy = p.split(",")
            out.append(f'<circle cx="{cx}" cy="{cy}" r="3" fill="#c0392b"/>')
    out.append(f'<text x="{W / 2}" y="{H - 20}" text-anchor="middle" font-family="sans-serif" '
               f'font-size="12">Input</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _write_pareto(path: Path, report: SobolReport, which: str = "first") -> None:
    if path.suffix.lower() == ".svg":
        _write_text(path, pareto_svg(report, which))
    elif path.suffix.lower() == ".csv":
        _write_text(path, pareto_csv(report, which))
    else:
        raise UsageError("--pareto/--out must end in .csv or .svg")


# commands ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    if args.m < 1:
        raise UsageError("--m must be >= 1")
    spec = _load_process(args)
    data = simulate(spec, args.m, args.seed)
    if args.out is None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(data.names)
        for i in range(data.m):
            w.writerow([repr(float(data[n][i])) for n in data.names])
        sys.stdout.write(buf.getvalue())
    else:
        try:
            data.to_csv(args.out)
        except OSError as exc:
            raise DataError(f"cannot write {args.out}: {exc.strerror}") from None
        print(f"wrote {data.m} rows x {len(data.names)} columns to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_fit(args) -> int:
    if args.reps < 1:
        raise UsageError("--reps must be >= 1")
    if args.m is not None and args.m < 1:
        raise UsageError("--m must be >= 1")
    spec = _load_process(args)
    cfg = _engine_config(args, args.seed)
    fn = ENGINES[args.engine]
    if args.data is not None:
        data = read_csv(args.data)
        m = data.m
        resampler = bootstrapper(data)
    else:
        data = None
        m = args.m
        resampler = simulator(spec, m)
    if args.reps == 1:
        if data is None:
            data = simulate(spec, m, args.seed)
        report = fn(spec.dag, spec.output, data, spec.input_dists, cfg)[1]
    else:
        report = replicate(fn, spec.dag, spec.output, spec.input_dists, cfg, args.reps, resampler, args.seed)
        report.engine = report.engine or args.engine
    doc = report_document(report, spec, cfg, m)
    _write_text(args.out, json.dumps(doc, indent=2) + "\n")
    if args.pareto is not None:
        _write_pareto(args.pareto, report)
    return EXIT_OK


def cmd_compare(args) -> int:
    engines = args.engine or []
    if not engines:
        raise UsageError("compare needs at least one --engine")
    sizes = args.sizes or ([args.m] if args.m else None)
    if not sizes or min(sizes) < 1:
        raise UsageError("compare needs --sizes (or --m) with positive values")
    if args.reps < 1 or args.reference_n < 2:
        raise UsageError("--reps must be >= 1 and --reference-n >= 2")
    spec = _load_process(args)
    cfg = _engine_config(args, args.seed)
    ref_seed, rep_seed = np.random.SeedSequence(args.seed).spawn(2)
    ref = sobol_pick_freeze(spec.model(), spec.input_dists, args.reference_n, ref_seed)
    rows = []
    for engine in engines:
        for m in sizes:
            row = {"engine": engine, "m": int(m), "reps": int(args.reps)}
            try:
                rep = replicate(engine, spec.dag, spec.output, spec.input_dists, cfg, args.reps,
                                simulator(spec, m), seed=rep_seed)
            except Underdetermined as exc:
                row.update(status="underdetermined", required=exc.required,
                           mse_first_order=None, mse_total=None)
                rows.append(row)
                continue
            per = _per_rep_mse(rep, ref)
            row.update(status="ok", mse_first_order=per[0], mse_total=per[1],
                       failures=int(rep.extra.get("failures", 0)))
            rows.append(row)
    doc = {
        "report_version": REPORT_VERSION,
        "process": spec.name,
        "output": spec.output,
        "degrees": list(cfg.degrees),
        "gamma": cfg.fit.gamma,
        "reference": {"method": "pick-freeze", "n": int(args.reference_n),
                      "first_order": ref.as_mapping("first"), "total": ref.as_mapping("total")},
        "rows": rows,
    }
    _write_text(args.out, json.dumps(doc, indent=2) + "\n")
    if args.csv is not None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["engine", "m", "status", "mse_first_order", "mse_total"])
        for r in rows:
            w.writerow([r["engine"], r["m"], r["status"],
                        "" if r["mse_first_order"] is None else repr(r["mse_first_order"]),
                        "" if r["mse_total"] is None else repr(r["mse_total"])])
        _write_text(args.csv, buf.getvalue())
    return EXIT_OK


def _per_rep_mse(rep: SobolReport, ref: SobolReport) -> tuple[float, float]:
    # MSE of the replicated estimator against the reference: bias^2 + variance
    sf = rep.first_sd if rep.first_sd is not None else np.zeros(len(rep.inputs))
    st = rep.total_sd if rep.total_sd is not None else np.zeros(len(rep.inputs))
    k = (rep.reps - 1) / rep.reps if rep.reps > 1 else 1.0
    mf = np.mean((rep.first - ref.first) ** 2 + k * sf**2)
    mt = np.mean((rep.total - ref.total) ** 2 + k * st**2)
    return float(mf), float(mt)


def cmd_pareto(args) -> int:
    try:
        doc = json.loads(args.report.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read {args.report}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{args.report}: invalid JSON ({exc.msg})") from None
    report = report_from_document(doc)
    if args.out is None:
        sys.stdout.write(pareto_csv(report, args.which))
    else:
        _write_pareto(args.out, report, args.which)
    return EXIT_OK


def minobs_table(spec: ProcessSpec, p: int) -> dict:
    mo = network_min_observations(spec.dag, spec.output, p)
    from fractions import Fraction

    frac = Fraction(mo.width, mo.n_inputs)
    return {
        "process": spec.name,
        "output": spec.output,
        "p": p,
        "n_inputs": mo.n_inputs,
        "max_regression_width": mo.width,
        "naive": mo.naive,
        "network": mo.network,
        "lambda": f"{frac.numerator}/{frac.denominator}",
        "lambda_value": float(frac),
    }


def cmd_minobs(args) -> int:
    spec = _load_process(args)
    p = _default_p(args)
    if p < 0:
        raise UsageError("--p must be >= 0")
    t = minobs_table(spec, p)
    if args.json:
        print(json.dumps(t, indent=2))
    else:
        print(f"process {t['process'] or '(spec)'}  output {t['output']}  p={p}")
        print(f"{'engine':<10}{'min rows':>10}")
        print(f"{'naive':<10}{t['naive']:>10}")
        print(f"{'network':<10}{t['network']:>10}")
        print(f"lambda = {t['max_regression_width']}/{t['n_inputs']} ({t['lambda_value']:.4f})")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "compare": cmd_compare,
    "pareto": cmd_pareto,
    "minobs": cmd_minobs,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ValueError) as exc:
        print(f"dagsobol {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"dagsobol {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"dagsobol {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
