"""Command-line front end: bound-hierarchy curves, scenario runs, device certification.

Exit codes: 0 all checks pass, 2 a bound is violated, 3 an expectation
(reference value, saturation, route agreement) is missed, 4 bad input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import bounds as bd
from .scenarios import (
    EXIT_INPUT,
    INPUT_ERRORS,
    apply_overrides,
    builtin_names,
    certify,
    dumps,
    evaluate,
    load_config,
)


def parse_grid(text: str) -> np.ndarray:
    """``"a:b:n"`` -> ``n`` points from ``a`` to ``b``; must be positive and strictly increasing."""
    try:
        a, b, n = text.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise ValueError(f"grid must look like a:b:n, got {text!r}") from None
    if n < 1:
        raise ValueError("grid is empty")
    if a <= 0 or (n > 1 and b <= a):
        raise ValueError("grid must be strictly positive and increasing")
    return np.linspace(a, b, n) if n > 1 else np.array([a])


def parse_floats(text: str | None) -> list[float]:
    if not text:
        return []
    return [float(v) for v in text.split(",")]


def _label(value: float) -> str:
    return format(value, "g")


def curve_columns(s_values, t_values) -> list[str]:
    cols = ["vx", "b1_upper", "b1_lower", "b3", "b2"]
    cols += [f"sur2_s{_label(s)}" for s in s_values]
    cols += [f"mib_s{_label(s)}_t{_label(t)}" for s in (s_values or [1.0]) for t in t_values]
    return cols


def curve_rows(G: float, lam: float, grid: np.ndarray, s_values=(), t_values=()) -> list[dict]:
    """Minimum ``V_p`` along each bound curve at every ``V_x`` in ``grid``.

    The product bounds give ``V_p = RHS / V_x``; the offset (SUR2) curves and
    tangent lines use ``eta = G``.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("grid is empty")
    if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly positive and increasing")
    cols = {
        "vx": grid,
        "b1_upper": bd.bound_channel(G, lam, bd.UPPER) / grid,
        "b1_lower": bd.bound_channel(G, lam, bd.LOWER) / grid,
        "b3": bd.bound_joint(G, lam) / grid,
        "b2": bd.bound_eb(G, lam) / grid,
    }
    for s in s_values:
        cols[f"sur2_s{_label(s)}"] = bd.sur2_curve(grid, G, s, lam)
    for s in (s_values or [1.0]):
        for t in t_values:
            cols[f"mib_s{_label(s)}_t{_label(t)}"] = bd.tangent_line(grid, G, s, lam, t)
    names = curve_columns(s_values, t_values)
    return [{k: float(cols[k][i]) for k in names} for i in range(grid.size)]


def format_rows(rows: list[dict], columns: list[str], fmt: str) -> str:
    if fmt == "json":
        return dumps({"columns": columns, "rows": [[r[c] for c in columns] for r in rows]})
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([repr(r[c]) for c in columns])
    return buf.getvalue()


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _summary(report: dict) -> str:
    lines = [f"scenario {report['scenario']}: {report['verdict']}"]
    for r in report["results"]:
        lines.append(f"  {r['method']:<12} V_M={r['v_m_x']:.8f}  V_N={r['v_n_p']:.8f}  product={r['product']:.8f}")
    for c in report["checks"]:
        flag = "VIOLATED" if c["violated"] else ("saturated" if c["saturated"] else "ok")
        lines.append(f"  {c['method']:<12} {c['kind']:<20} lhs={c['lhs']:.8f} rhs={c['rhs']:.8f} {flag}")
    for m in report["mismatches"]:
        lines.append(f"  mismatch: {m}")
    return "\n".join(lines) + "\n"


def _checks_csv(report: dict) -> str:
    cols = ["method", "kind", "lhs", "rhs", "slack", "saturated", "violated", "offset_negative"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for c in report["checks"]:
        writer.writerow([repr(c[k]) if isinstance(c[k], float) else c[k] for k in cols])
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="bayesur",
        description="Bayesian uncertainty bounds for joint measurements of canonical variables.",
    )
    mode = ap.add_mutually_exclusive_group(required=True)
    mode.add_argument("--scenario", metavar="PATH|NAME", help="run a scenario file or builtin")
    mode.add_argument("--curves", action="store_true", help="emit bound-hierarchy curves")
    mode.add_argument("--certify", metavar="PATH", help="check a model or estimator description")
    mode.add_argument("--list", action="store_true", help="list builtin scenarios")
    ap.add_argument("--g", type=float, help="gain G")
    ap.add_argument("--lambda", dest="lam", type=float, help="prior parameter lambda")
    ap.add_argument("--s", help="gain ratio s (comma list for --curves)")
    ap.add_argument("--t", help="tangent weight t (comma list for --curves)")
    ap.add_argument("--grid", default="0.05:4:80", help="V_x sweep a:b:n for --curves")
    ap.add_argument("--method", choices=["quad", "mc", "choi", "all"])
    ap.add_argument("--seed", type=int)
    ap.add_argument("--cutoff", type=int)
    ap.add_argument("--out", help="write output here instead of stdout")
    ap.add_argument("--format", choices=["csv", "json"])
    return ap


def _single(values: list[float], name: str):
    if len(values) > 1:
        raise ValueError(f"--{name} takes a single value outside --curves")
    return values[0] if values else None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.list:
            sys.stdout.write("\n".join(builtin_names()) + "\n")
            return 0
        if args.curves:
            G = 1.0 if args.g is None else args.g
            lam = 0.0 if args.lam is None else args.lam
            if G < 0 or lam < 0:
                raise ValueError("need G >= 0 and lambda >= 0")
            s_values, t_values = parse_floats(args.s), parse_floats(args.t)
            if any(v <= 0 for v in s_values + t_values):
                raise ValueError("s and t must be positive")
            rows = curve_rows(G, lam, parse_grid(args.grid), s_values, t_values)
            _emit(format_rows(rows, curve_columns(s_values, t_values), args.format or "csv"), args.out)
            return 0
        overrides = dict(s=_single(parse_floats(args.s), "s"), t=_single(parse_floats(args.t), "t"),
                         method=args.method, seed=args.seed, cutoff=args.cutoff)
        if args.certify:
            report = certify(args.certify, args.g, args.lam, **overrides)
        else:
            config = apply_overrides(load_config(args.scenario), G=args.g, lam=args.lam, **overrides)
            report = evaluate(config)
    except INPUT_ERRORS as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    sys.stderr.write(_summary(report))
    _emit(_checks_csv(report) if args.format == "csv" else dumps(report), args.out)
    return report["exit_code"]


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
